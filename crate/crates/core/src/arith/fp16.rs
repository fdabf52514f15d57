//! IEEE 754 binary16 multiply and add on raw bit patterns.
//!
//! Round-to-nearest-even with full subnormal support. Any NaN result is the
//! canonical quiet NaN [`QNAN`]. The significand multiply runs on the same
//! 16-bit integer multiplier as the INT16 lane (see [`super::mul16`]).

use super::mul16;

pub const SIGN_MASK: u16 = 0x8000;
pub const EXP_MASK: u16 = 0x7C00;
pub const FRAC_MASK: u16 = 0x03FF;
/// Canonical quiet NaN returned for every NaN-producing operation.
pub const QNAN: u16 = 0x7E00;
pub const INF: u16 = 0x7C00;

/// Optional deviations from the default rounding behaviour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FpOptions {
    /// Flush subnormal results to zero (inputs are not flushed).
    pub flush_to_zero: bool,
}

pub fn is_nan(x: u16) -> bool {
    x & !SIGN_MASK > EXP_MASK
}

pub fn is_inf(x: u16) -> bool {
    x & !SIGN_MASK == EXP_MASK
}

pub fn is_zero(x: u16) -> bool {
    x & !SIGN_MASK == 0
}

fn sign_of(x: u16) -> u16 {
    x & SIGN_MASK
}

/// Decompose a finite nonzero value into `(sig, exp)` with
/// `value = sig · 2^(exp − 10)` and `sig` normalized into `[2^10, 2^11)`.
fn decompose(x: u16) -> (u32, i32) {
    let biased = ((x & EXP_MASK) >> 10) as i32;
    let frac = (x & FRAC_MASK) as u32;
    if biased == 0 {
        // subnormal: value = frac · 2^(-24)
        let shift = 10 - (31 - frac.leading_zeros() as i32);
        (frac << shift, -14 - shift)
    } else {
        (frac | 0x400, biased - 15)
    }
}

/// Round `sig · 2^lsb_exp` to the nearest binary16 value, ties to even.
///
/// `sig` must be nonzero. Overflow returns signed infinity; the subnormal
/// range rounds at the fixed 2^(-24) quantum.
fn round_pack(sign: u16, sig: u64, lsb_exp: i32, opts: FpOptions) -> u16 {
    debug_assert!(sig != 0);
    let msb = 63 - sig.leading_zeros() as i32;
    let val_exp = msb + lsb_exp;

    // Target position of the result's least significant bit.
    let target = if val_exp < -14 { -24 } else { val_exp - 10 };
    let shift = target - lsb_exp;

    let (kept, round_up) = if shift <= 0 {
        (sig << -shift, false)
    } else if shift > 64 {
        (0, false) // sticky only, rounds down
    } else if shift == 64 {
        let round = sig >> 63 != 0;
        let sticky = sig & (u64::MAX >> 1) != 0;
        (0, round && sticky)
    } else {
        let kept = sig >> shift;
        let round = (sig >> (shift - 1)) & 1 != 0;
        let sticky = sig & ((1u64 << (shift - 1)) - 1) != 0;
        (kept, round && (sticky || kept & 1 != 0))
    };

    let mut rsig = kept + round_up as u64;
    let mut target = target;
    if rsig >= 0x800 {
        rsig >>= 1;
        target += 1;
    }

    if rsig < 0x400 {
        // subnormal (or zero after rounding down)
        debug_assert_eq!(target, -24);
        if opts.flush_to_zero {
            return sign;
        }
        return sign | rsig as u16;
    }

    let biased = target + 25; // value = rsig·2^target, rsig ∈ [2^10, 2^11)
    if biased > 30 {
        return sign | INF;
    }
    debug_assert!(biased >= 1);
    sign | ((biased as u16) << 10) | (rsig as u16 & FRAC_MASK)
}

pub fn mul(a: u16, b: u16) -> u16 {
    mul_opt(a, b, FpOptions::default())
}

pub fn mul_opt(a: u16, b: u16, opts: FpOptions) -> u16 {
    let sign = sign_of(a) ^ sign_of(b);
    if is_nan(a) || is_nan(b) {
        return QNAN;
    }
    if is_inf(a) || is_inf(b) {
        if is_zero(a) || is_zero(b) {
            return QNAN; // 0 × ∞
        }
        return sign | INF;
    }
    if is_zero(a) || is_zero(b) {
        return sign;
    }
    let (sa, ea) = decompose(a);
    let (sb, eb) = decompose(b);
    // Both significands are below 2^11, so the product fits the shared
    // 16×16 multiplier.
    let prod = mul16(sa as i16, sb as i16) as u64;
    round_pack(sign, prod, ea + eb - 20, opts)
}

pub fn add(a: u16, b: u16) -> u16 {
    add_opt(a, b, FpOptions::default())
}

pub fn add_opt(a: u16, b: u16, opts: FpOptions) -> u16 {
    if is_nan(a) || is_nan(b) {
        return QNAN;
    }
    match (is_inf(a), is_inf(b)) {
        (true, true) => {
            return if sign_of(a) == sign_of(b) { a } else { QNAN };
        }
        (true, false) => return a,
        (false, true) => return b,
        (false, false) => {}
    }
    if is_zero(a) && is_zero(b) {
        // -0 only when both addends are -0
        return sign_of(a) & sign_of(b);
    }
    if is_zero(a) {
        return flush(b, opts);
    }
    if is_zero(b) {
        return flush(a, opts);
    }

    let (sa, ea) = decompose(a);
    let (sb, eb) = decompose(b);
    // Three extra low bits hold guard/round/sticky through alignment.
    let (big_sig, big_exp, big_sign, small_sig, small_exp, small_sign) =
        if (ea, sa) >= (eb, sb) {
            (sa, ea, sign_of(a), sb, eb, sign_of(b))
        } else {
            (sb, eb, sign_of(b), sa, ea, sign_of(a))
        };
    let big = (big_sig as u64) << 3;
    let small = (small_sig as u64) << 3;
    let d = (big_exp - small_exp) as u32;
    let aligned = if d == 0 {
        small
    } else if d >= 64 {
        1 // everything becomes sticky
    } else {
        let lost = small & ((1u64 << d) - 1) != 0;
        (small >> d) | lost as u64
    };

    let lsb_exp = big_exp - 10 - 3;
    if big_sign == small_sign {
        round_pack(big_sign, big + aligned, lsb_exp, opts)
    } else {
        let diff = big - aligned;
        if diff == 0 {
            return 0; // exact cancellation → +0
        }
        round_pack(big_sign, diff, lsb_exp, opts)
    }
}

fn flush(x: u16, opts: FpOptions) -> u16 {
    if opts.flush_to_zero && x & EXP_MASK == 0 && x & FRAC_MASK != 0 {
        sign_of(x)
    } else {
        x
    }
}
