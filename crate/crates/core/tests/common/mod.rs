//! Shared test oracles, kept independent of the library's arithmetic paths.
//!
//! The binary16 oracle goes through f64: every binary16 value converts to
//! f64 exactly, the product of two 11-bit significands and the aligned sum
//! of two binary16 values are both exact in f64's 53-bit significand, so a
//! single correctly-rounded narrowing back to binary16 gives the IEEE
//! round-to-nearest-even result.

#![allow(dead_code)]

use pssim_core::arith::PrecisionMode;
use pssim_core::systolic::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const QNAN: u16 = 0x7E00;

pub fn is_nan16(x: u16) -> bool {
    x & 0x7FFF > 0x7C00
}

pub fn f16_to_f64(bits: u16) -> f64 {
    let sign = if bits & 0x8000 != 0 { -1.0 } else { 1.0 };
    let e = (bits >> 10) & 0x1F;
    let frac = (bits & 0x3FF) as f64;
    match e {
        0 => sign * frac * 2f64.powi(-24),
        0x1F => {
            if frac == 0.0 {
                sign * f64::INFINITY
            } else {
                f64::NAN
            }
        }
        _ => sign * (1024.0 + frac) * 2f64.powi(e as i32 - 25),
    }
}

/// Correctly rounded (nearest-even) narrowing of an f64 to binary16 bits.
pub fn f64_to_f16(x: f64) -> u16 {
    let bits = x.to_bits();
    let sign = ((bits >> 63) as u16) << 15;
    let e = ((bits >> 52) & 0x7FF) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if e == 0x7FF {
        return if frac != 0 { QNAN } else { sign | 0x7C00 };
    }
    if x == 0.0 {
        return sign;
    }
    let (sig, lsb_exp) =
        if e == 0 { (frac, -1022 - 52) } else { (frac | (1u64 << 52), e - 1023 - 52) };
    let msb = 63 - sig.leading_zeros() as i32;
    let val_exp = msb + lsb_exp;

    let target = if val_exp < -14 { -24 } else { val_exp - 10 };
    let shift = target - lsb_exp;
    debug_assert!(shift > 0);
    if shift >= 54 {
        return sign; // below half the smallest subnormal
    }
    let mut kept = sig >> shift;
    let rem = sig & ((1u64 << shift) - 1);
    let half = 1u64 << (shift - 1);
    if rem > half || (rem == half && kept & 1 == 1) {
        kept += 1;
    }
    if val_exp < -14 {
        // subnormal quantum; a carry to 1<<10 lands on the smallest normal
        return sign | kept as u16;
    }
    let mut val_exp = val_exp;
    if kept == 1 << 11 {
        kept >>= 1;
        val_exp += 1;
    }
    if val_exp > 15 {
        return sign | 0x7C00;
    }
    sign | (((val_exp + 15) as u16) << 10) | (kept as u16 & 0x3FF)
}

pub fn oracle_mul(a: u16, b: u16) -> u16 {
    if is_nan16(a) || is_nan16(b) {
        return QNAN;
    }
    let r = f16_to_f64(a) * f16_to_f64(b);
    if r.is_nan() {
        return QNAN; // 0 × ∞
    }
    f64_to_f16(r)
}

pub fn oracle_add(a: u16, b: u16) -> u16 {
    if is_nan16(a) || is_nan16(b) {
        return QNAN;
    }
    let r = f16_to_f64(a) + f16_to_f64(b);
    if r.is_nan() {
        return QNAN; // ∞ − ∞
    }
    f64_to_f16(r)
}

/// Edge patterns crossed pairwise in the FP16 sweeps: signed zeros, the
/// subnormal boundary, the normal boundary, exact-tie neighbours, the
/// overflow boundary, infinities and NaNs.
pub const FP16_EDGES: &[u16] = &[
    0x0000, 0x8000, 0x0001, 0x8001, 0x0002, 0x0200, 0x03FF, 0x83FF, 0x0400, 0x8400, 0x0401,
    0x07FF, 0x0800, 0x1000, 0x3400, 0x3800, 0x3BFF, 0x3C00, 0xBC00, 0x3C01, 0x4000, 0x4248,
    0x4400, 0x5640, 0x6400, 0x6800, 0x6BFF, 0x7400, 0x77FF, 0x7800, 0x7BFE, 0x7BFF, 0xFBFF,
    0x7C00, 0xFC00, 0x7C01, 0x7E00, 0xFE00, 0x7FFF, 0xFFFF,
];

/// Truncate to the two's-complement range of `bits`.
pub fn wrap_signed(v: i64, bits: u32) -> i64 {
    ((v as u64) << (64 - bits)) as i64 >> (64 - bits)
}

/// Reference product of one operand lane pair: plain signed multiply
/// truncated to the product lane width.
pub fn ref_lane_product(a: i64, b: i64, mode: PrecisionMode) -> i64 {
    wrap_signed(a * b, mode.product_bits())
}

/// Reference GEMM under the lane-modular semantics: integer dot products
/// accumulate exactly and wrap at the accumulator lane width; FP16 dot
/// products fold sequentially in K order through the f64-based oracle.
pub fn ref_gemm(a: &Matrix, b: &Matrix, mode: PrecisionMode) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |r, c| {
        if mode.is_float() {
            let mut acc: u16 = 0;
            for k in 0..a.cols() {
                let p = oracle_mul(a.get(r, k) as u16, b.get(k, c) as u16);
                acc = oracle_add(acc, p);
            }
            acc as i64
        } else {
            let mut acc: i64 = 0;
            for k in 0..a.cols() {
                acc = acc.wrapping_add(ref_lane_product(a.get(r, k), b.get(k, c), mode));
            }
            wrap_signed(acc, mode.product_bits())
        }
    })
}

/// Random matrix with entries in the operand range of `mode` (random bit
/// patterns for FP16, NaNs excluded so results stay comparable).
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, mode: PrecisionMode) -> Matrix {
    let (lo, hi) = mode.operand_range();
    Matrix::from_fn(rows, cols, |_, _| {
        if mode.is_float() {
            loop {
                let bits = rng.gen_range(0..=0xFFFFu16);
                if !is_nan16(bits) {
                    return bits as i64;
                }
            }
        } else {
            rng.gen_range(lo..=hi)
        }
    })
}
