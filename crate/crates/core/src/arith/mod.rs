//! Bit-exact semantics of the precision-scalable multiplier, the
//! precision-scalable adder bank, and the FP16 path that reuses the 16-bit
//! integer multiplier.
//!
//! A 32-bit operand word carries 1/4/8/16 lanes depending on the precision
//! mode; the 64-bit product and accumulator bundles keep a fixed width across
//! every mode. Lane 0 always sits at the least significant bits.

pub mod fp16;
mod tree;

pub use fp16::FpOptions;
pub use tree::{mul_tree4, mul_tree8, SignCtl, Tree4Mode, Tree8Mode};

use std::fmt;

/// Operating precision of the co-processor. Determines lane count and lane
/// widths for every packed value in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PrecisionMode {
    Int16,
    Int8,
    Int4,
    Int2,
    Fp16,
}

impl PrecisionMode {
    pub const ALL: [PrecisionMode; 5] = [
        PrecisionMode::Int16,
        PrecisionMode::Int8,
        PrecisionMode::Int4,
        PrecisionMode::Int2,
        PrecisionMode::Fp16,
    ];

    /// Parallel MAC lanes per operand word.
    pub fn lanes(self) -> usize {
        match self {
            PrecisionMode::Int16 | PrecisionMode::Fp16 => 1,
            PrecisionMode::Int8 => 4,
            PrecisionMode::Int4 => 8,
            PrecisionMode::Int2 => 16,
        }
    }

    /// Width of one operand lane in bits. 16-bit modes occupy the low half
    /// of the 32-bit word; the upper half is zero padding.
    pub fn operand_bits(self) -> u32 {
        match self {
            PrecisionMode::Int16 | PrecisionMode::Fp16 => 16,
            PrecisionMode::Int8 => 8,
            PrecisionMode::Int4 => 4,
            PrecisionMode::Int2 => 2,
        }
    }

    /// Width of one product/accumulator lane in bits.
    pub fn product_bits(self) -> u32 {
        match self {
            PrecisionMode::Int16 => 32,
            PrecisionMode::Int8 => 16,
            PrecisionMode::Int4 => 8,
            PrecisionMode::Int2 => 4,
            PrecisionMode::Fp16 => 16,
        }
    }

    /// Result lanes per 32-bit memory word when storing accumulator values.
    /// 16-bit-wide FP16 results are padded to a full word like their operands.
    pub fn result_lanes_per_word(self) -> usize {
        match self {
            PrecisionMode::Int16 | PrecisionMode::Fp16 => 1,
            PrecisionMode::Int8 => 2,
            PrecisionMode::Int4 => 4,
            PrecisionMode::Int2 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        self == PrecisionMode::Fp16
    }

    /// Signed value range of one operand lane, inclusive. FP16 lanes accept
    /// any 16-bit pattern.
    pub fn operand_range(self) -> (i64, i64) {
        if self.is_float() {
            (0, 0xFFFF)
        } else {
            let b = self.operand_bits();
            (-(1i64 << (b - 1)), (1i64 << (b - 1)) - 1)
        }
    }

    /// Signed value range of one accumulator lane, inclusive.
    pub fn accum_range(self) -> (i64, i64) {
        if self.is_float() {
            (0, 0xFFFF)
        } else {
            let b = self.product_bits();
            (-(1i64 << (b - 1)), (1i64 << (b - 1)) - 1)
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PrecisionMode::Int16 => "int16",
            PrecisionMode::Int8 => "int8",
            PrecisionMode::Int4 => "int4",
            PrecisionMode::Int2 => "int2",
            PrecisionMode::Fp16 => "fp16",
        }
    }

    pub fn parse(s: &str) -> Option<PrecisionMode> {
        match s {
            "int16" => Some(PrecisionMode::Int16),
            "int8" => Some(PrecisionMode::Int8),
            "int4" => Some(PrecisionMode::Int4),
            "int2" => Some(PrecisionMode::Int2),
            "fp16" => Some(PrecisionMode::Fp16),
            _ => None,
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// 32-bit operand word. Lane `i` occupies bits `[i·w, (i+1)·w)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PackedWord(pub u32);

impl PackedWord {
    pub const ZERO: PackedWord = PackedWord(0);

    /// Sign-extended value of lane `i` (raw bits for FP16).
    pub fn lane(self, mode: PrecisionMode, i: usize) -> i64 {
        debug_assert!(i < mode.lanes());
        let w = mode.operand_bits();
        let raw = (self.0 as u64 >> (i as u32 * w)) & ((1u64 << w) - 1);
        if mode.is_float() {
            raw as i64
        } else {
            sign_extend(raw, w)
        }
    }

    /// Pack lane values little-endian; missing trailing lanes are zero.
    /// Values must already be within the operand range for `mode`.
    pub fn from_lanes(mode: PrecisionMode, values: &[i64]) -> PackedWord {
        debug_assert!(values.len() <= mode.lanes());
        let w = mode.operand_bits();
        let mask = (1u64 << w) - 1;
        let mut bits = 0u32;
        for (i, &v) in values.iter().enumerate() {
            bits |= (((v as u64) & mask) as u32) << (i as u32 * w);
        }
        PackedWord(bits)
    }
}

/// 64-bit product bundle: `lanes(mode)` products of `product_bits(mode)`
/// each for the sub-word modes; a sign-extended 32-bit product for INT16; a
/// single binary16 value in bits [0,16) for FP16.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ProductBundle(pub u64);

impl ProductBundle {
    pub const ZERO: ProductBundle = ProductBundle(0);

    pub fn lane(self, mode: PrecisionMode, i: usize) -> i64 {
        debug_assert!(i < mode.lanes());
        let p = mode.product_bits();
        let raw = (self.0 >> (i as u32 * p)) & mask64(p);
        if mode.is_float() {
            raw as i64
        } else {
            sign_extend(raw, p)
        }
    }
}

/// 64-bit packed accumulator. Lane layout matches [`ProductBundle`]; the
/// INT16 lane is kept sign-extended through bits [32,64).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccumBundle(pub u64);

impl AccumBundle {
    pub const ZERO: AccumBundle = AccumBundle(0);

    pub fn lane(self, mode: PrecisionMode, i: usize) -> i64 {
        ProductBundle(self.0).lane(mode, i)
    }

    pub fn from_lanes(mode: PrecisionMode, values: &[i64]) -> AccumBundle {
        debug_assert!(values.len() <= mode.lanes());
        let p = mode.product_bits();
        let mut bits = 0u64;
        for (i, &v) in values.iter().enumerate() {
            bits |= ((v as u64) & mask64(p)) << (i as u32 * p);
        }
        if mode == PrecisionMode::Int16 {
            // keep the single 32-bit lane sign-extended
            bits = values.first().copied().unwrap_or(0) as u64;
        }
        AccumBundle(bits)
    }
}

fn mask64(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn sign_extend(raw: u64, bits: u32) -> i64 {
    ((raw << (64 - bits)) as i64) >> (64 - bits)
}

/// The shared 16×16 signed multiplier. The INT16 lane and the FP16
/// significand product both run on this path.
pub(crate) fn mul16(a: i16, b: i16) -> i32 {
    a as i32 * b as i32
}

/// Precision-scalable multiply: one operand word against another, lane-wise.
///
/// INT16 and FP16 route to the 16-bit multiplier; the sub-word modes route
/// each byte pair to one of the four 8-bit multiplier trees.
pub fn ps_multiply(x: PackedWord, w: PackedWord, mode: PrecisionMode) -> ProductBundle {
    match mode {
        PrecisionMode::Int16 => {
            let p = mul16(x.0 as u16 as i16, w.0 as u16 as i16);
            ProductBundle(p as i64 as u64)
        }
        PrecisionMode::Fp16 => {
            ProductBundle(fp16::mul(x.0 as u16, w.0 as u16) as u64)
        }
        PrecisionMode::Int8 | PrecisionMode::Int4 | PrecisionMode::Int2 => {
            let tmode = match mode {
                PrecisionMode::Int8 => Tree8Mode::Int8x1,
                PrecisionMode::Int4 => Tree8Mode::Int4x2,
                _ => Tree8Mode::Int2x4,
            };
            let mut bits = 0u64;
            for byte in 0..4 {
                let xa = (x.0 >> (8 * byte)) as u8;
                let wb = (w.0 >> (8 * byte)) as u8;
                let p = mul_tree8(xa, wb, tmode, SignCtl::SIGNED);
                bits |= (p as u64) << (16 * byte);
            }
            ProductBundle(bits)
        }
    }
}

/// Lane-wise accumulate on the adder bank: wraparound two's-complement adds
/// at the accumulator lane width for the INT modes, one FP16 add otherwise.
pub fn ps_accumulate(y: AccumBundle, p: ProductBundle, mode: PrecisionMode) -> AccumBundle {
    match mode {
        PrecisionMode::Fp16 => {
            AccumBundle(fp16::add(y.0 as u16, p.0 as u16) as u64)
        }
        PrecisionMode::Int16 => {
            let sum = (y.0 as u32).wrapping_add(p.0 as u32);
            AccumBundle(sum as i32 as i64 as u64)
        }
        PrecisionMode::Int8 | PrecisionMode::Int4 | PrecisionMode::Int2 => {
            let width = mode.product_bits();
            let mask = mask64(width);
            let mut bits = 0u64;
            for i in 0..mode.lanes() as u32 {
                let off = i * width;
                let sum = (y.0 >> off).wrapping_add(p.0 >> off) & mask;
                bits |= sum << off;
            }
            AccumBundle(bits)
        }
    }
}

/// Experimental wide accumulation: lane widths doubled to `2·product_bits`,
/// held in a 128-bit bundle. Not part of the PE pipeline, whose output
/// register is fixed at 64 bits.
pub fn ps_accumulate_wide(y: u128, p: ProductBundle, mode: PrecisionMode) -> u128 {
    assert!(!mode.is_float(), "wide accumulation is integer-only");
    let narrow = mode.product_bits();
    let wide = 2 * narrow;
    let mask = if wide == 64 { u64::MAX as u128 } else { (1u128 << wide) - 1 };
    let mut bits = 0u128;
    for i in 0..mode.lanes() as u32 {
        let lane = sign_extend((p.0 >> (i * narrow)) & mask64(narrow), narrow) as u128;
        let sum = (y >> (i * wide)).wrapping_add(lane) & mask;
        bits |= sum << (i * wide);
    }
    bits
}

/// One packed multiply-accumulate step.
pub fn mac(x: PackedWord, w: PackedWord, y: AccumBundle, mode: PrecisionMode) -> AccumBundle {
    ps_accumulate(y, ps_multiply(x, w, mode), mode)
}

/// Reduce an accumulator bundle to a single output element: the wrapping sum
/// of all integer lanes at the lane width, or the FP16 bits unchanged.
pub fn fold_lanes(y: AccumBundle, mode: PrecisionMode) -> i64 {
    match mode {
        PrecisionMode::Fp16 => (y.0 & 0xFFFF) as i64,
        PrecisionMode::Int16 => y.lane(mode, 0),
        _ => {
            let width = mode.product_bits();
            let mut sum = 0i64;
            for i in 0..mode.lanes() {
                sum = sum.wrapping_add(y.lane(mode, i));
            }
            sign_extend(sum as u64 & mask64(width), width)
        }
    }
}
