//! A single processing element of the systolic array.
//!
//! The PE holds its two 32-bit operand registers and a 64-bit output
//! accumulator. During compute it consumes the incoming operands for a MAC
//! and forwards the previous register contents to its neighbours, giving the
//! one-cycle pass-through that builds the array skew. During drain the
//! accumulator moves one hop per step and is not modified by MACs.

use crate::arith::{mac, AccumBundle, PackedWord, PrecisionMode};

/// Control input for one PE step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeCtrl {
    Compute,
    Drain,
    Idle,
}

/// Architectural state of one processing element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeState {
    pub x_reg: PackedWord,
    pub w_reg: PackedWord,
    pub y_reg: AccumBundle,
    pub mode: PrecisionMode,
    /// Accumulator is stationary across operator chunks instead of being
    /// shifted out after each compute phase.
    pub hold: bool,
}

impl PeState {
    pub fn new(mode: PrecisionMode) -> PeState {
        PeState {
            x_reg: PackedWord::ZERO,
            w_reg: PackedWord::ZERO,
            y_reg: AccumBundle::ZERO,
            mode,
            hold: false,
        }
    }
}

/// Outputs of one PE step: operands forwarded east/south and the
/// accumulator handed to the next PE in the drain chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PeOutputs {
    pub x_out: PackedWord,
    pub w_out: PackedWord,
    pub y_out: AccumBundle,
}

/// Advance one PE by one step.
///
/// `Compute` MACs the incoming operands into `y_reg` and emits the previous
/// operand registers. `Drain` emits the previous `y_reg` and latches `y_in`.
/// `Idle` leaves the state untouched and emits zeros.
pub fn pe_step(
    state: &PeState,
    x_in: PackedWord,
    w_in: PackedWord,
    y_in: AccumBundle,
    ctrl: PeCtrl,
) -> (PeState, PeOutputs) {
    match ctrl {
        PeCtrl::Idle => (*state, PeOutputs::default()),
        PeCtrl::Compute => {
            let out = PeOutputs {
                x_out: state.x_reg,
                w_out: state.w_reg,
                y_out: AccumBundle::ZERO,
            };
            let next = PeState {
                x_reg: x_in,
                w_reg: w_in,
                y_reg: mac(x_in, w_in, state.y_reg, state.mode),
                ..*state
            };
            (next, out)
        }
        PeCtrl::Drain => {
            let out = PeOutputs {
                x_out: PackedWord::ZERO,
                w_out: PackedWord::ZERO,
                y_out: state.y_reg,
            };
            let next = PeState { y_reg: y_in, ..*state };
            (next, out)
        }
    }
}
