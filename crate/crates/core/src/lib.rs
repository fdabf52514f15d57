//! Bit-accurate, cycle-approximate simulator of a precision-scalable systolic
//! DNN co-processor with FP16 support.
//!
//! The crate models the co-processor from the arithmetic up:
//!
//! * [`arith`] — lane-decomposed multiplier trees, the precision-scalable
//!   adder bank, and the FP16 path that shares the 16-bit integer multiplier.
//! * [`pe`] — a single processing element: operand shift-through and the
//!   64-bit output accumulator.
//! * [`systolic`] — the R×C output-stationary array with skewed operand
//!   injection and column drain, plus its calibrated cycle model.
//! * [`isa`] — the `hwpe.*` command set: assembly parsing, configuration
//!   registers, sequencing, and per-instruction cycle costs.
//! * [`mem`] — byte-addressable memory and the packing codec between logical
//!   tensors and 32-bit word streams.
//! * [`perfmodel`] — theoretical throughput, baseline comparison, and a
//!   roofline bound for memory-limited workloads.
//! * [`workload`] — convolution/fully-connected layer lowering, tiling onto
//!   the array, program emission, and whole-network cycle reports.

pub mod arith;
pub mod isa;
pub mod mem;
pub mod pe;
pub mod perfmodel;
pub mod systolic;
pub mod workload;

pub use arith::{AccumBundle, PackedWord, PrecisionMode, ProductBundle};
pub use perfmodel::CycleReport;
pub use systolic::{ArrayShape, Matrix, SaConfig};
