//! Precision-scalable multiplier trees.
//!
//! The 8-bit tree is built from four 4-bit trees combined by shift-and-add of
//! partial products; each 4-bit tree in turn performs one INT4 multiply or two
//! INT2 multiplies in parallel. Sub-operand sign control selects between
//! signed and unsigned interpretation of the 4-bit fields so that the
//! shift-and-add composition preserves signed 8-bit semantics.

/// Sub-mode of a 4-bit multiplier tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tree4Mode {
    /// One 4-bit × 4-bit multiply producing an 8-bit product.
    Int4x1,
    /// Two independent 2-bit × 2-bit multiplies, one per nibble half.
    Int2x2,
}

/// Sub-mode of an 8-bit multiplier tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tree8Mode {
    /// One 8-bit × 8-bit multiply via four 4-bit partial products.
    Int8x1,
    /// Two 4-bit multiplies on the low/low and high/high nibble pairs.
    Int4x2,
    /// Four 2-bit multiplies; only the low/low and high/high trees are used.
    Int2x4,
}

/// Per-operand signed/unsigned interpretation of the input fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignCtl {
    pub a_signed: bool,
    pub b_signed: bool,
}

impl SignCtl {
    pub const SIGNED: SignCtl = SignCtl { a_signed: true, b_signed: true };
    pub const UNSIGNED: SignCtl = SignCtl { a_signed: false, b_signed: false };
}

fn sext4(field: u8) -> i32 {
    ((field as i32) << 28) >> 28
}

fn sext2(field: u8) -> i32 {
    ((field as i32) << 30) >> 30
}

fn field4(field: u8, signed: bool) -> i32 {
    if signed {
        sext4(field & 0xF)
    } else {
        (field & 0xF) as i32
    }
}

fn field2(field: u8, signed: bool) -> i32 {
    if signed {
        sext2(field & 0x3)
    } else {
        (field & 0x3) as i32
    }
}

/// 4-bit precision-scalable multiplier tree.
///
/// `Int4x1` yields one 8-bit product of the 4-bit input fields. `Int2x2`
/// yields two 4-bit products, low input lanes into bits [0,4) and high lanes
/// into bits [4,8).
pub fn mul_tree4(a: u8, b: u8, mode: Tree4Mode, sign: SignCtl) -> u8 {
    match mode {
        Tree4Mode::Int4x1 => {
            let p = field4(a, sign.a_signed) * field4(b, sign.b_signed);
            p as u8
        }
        Tree4Mode::Int2x2 => {
            let lo = field2(a, sign.a_signed) * field2(b, sign.b_signed);
            let hi = field2(a >> 2, sign.a_signed) * field2(b >> 2, sign.b_signed);
            ((lo as u8) & 0xF) | (((hi as u8) & 0xF) << 4)
        }
    }
}

/// 8-bit precision-scalable multiplier tree built from four 4-bit trees.
///
/// The `Int8x1` product is assembled as
/// `(ah·bh) << 8 + (ah·bl + al·bh) << 4 + (al·bl)` with high sub-operands
/// taking the operand's sign mode and low sub-operands unsigned. `Int4x2`
/// and `Int2x4` reuse the low/low and high/high sub-trees only, keeping the
/// 16-bit output width constant across sub-modes.
pub fn mul_tree8(a: u8, b: u8, mode: Tree8Mode, sign: SignCtl) -> u16 {
    let (ah, al) = (a >> 4, a & 0xF);
    let (bh, bl) = (b >> 4, b & 0xF);
    match mode {
        Tree8Mode::Int8x1 => {
            let hh = mul_tree4(
                ah,
                bh,
                Tree4Mode::Int4x1,
                SignCtl { a_signed: sign.a_signed, b_signed: sign.b_signed },
            );
            let hl = mul_tree4(
                ah,
                bl,
                Tree4Mode::Int4x1,
                SignCtl { a_signed: sign.a_signed, b_signed: false },
            );
            let lh = mul_tree4(
                al,
                bh,
                Tree4Mode::Int4x1,
                SignCtl { a_signed: false, b_signed: sign.b_signed },
            );
            let ll = mul_tree4(al, bl, Tree4Mode::Int4x1, SignCtl::UNSIGNED);
            // Partial products re-enter the adder at their natural widths:
            // hh/hl/lh are signed 8-bit fields, ll is unsigned.
            let hh = if sign.a_signed || sign.b_signed { hh as i8 as i32 } else { hh as i32 };
            let mixed_hl = if sign.a_signed { hl as i8 as i32 } else { hl as i32 };
            let mixed_lh = if sign.b_signed { lh as i8 as i32 } else { lh as i32 };
            let sum = (hh << 8) + ((mixed_hl + mixed_lh) << 4) + ll as i32;
            sum as u16
        }
        Tree8Mode::Int4x2 => {
            let lo = mul_tree4(al, bl, Tree4Mode::Int4x1, sign);
            let hi = mul_tree4(ah, bh, Tree4Mode::Int4x1, sign);
            (lo as u16) | ((hi as u16) << 8)
        }
        Tree8Mode::Int2x4 => {
            let lo = mul_tree4(al, bl, Tree4Mode::Int2x2, sign);
            let hi = mul_tree4(ah, bh, Tree4Mode::Int2x2, sign);
            (lo as u16) | ((hi as u16) << 8)
        }
    }
}
