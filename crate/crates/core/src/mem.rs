//! Byte-addressable memory with little-endian 32-bit word access, the
//! tensor packing codec, and the flat memory image file format.
//!
//! Operand packing groups four, eight, or sixteen sub-word values into one
//! 32-bit word; 16-bit values are zero-padded to a full word. Result packing
//! uses the wider accumulator lanes instead.

use crate::arith::PrecisionMode;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("access of {len} bytes at {addr:#010x} runs past memory size {size:#x}")]
    OutOfBounds { addr: u32, len: u32, size: u32 },
    #[error("unaligned word access at {addr:#010x}")]
    Misaligned { addr: u32 },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    #[error("value {value} at index {index} is out of range for {mode} lanes")]
    OutOfRange { index: usize, value: i64, mode: PrecisionMode },
    #[error("tensor has {words} words but length {len} requires {expect}")]
    WordCount { words: usize, expect: usize, len: usize },
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image truncated: header says {expect} bytes, file holds {got}")]
    Truncated { expect: u64, got: usize },
    #[error("image too short for its 8-byte size header")]
    NoHeader,
}

/// Zero-initialized byte memory. Word access is 4-byte aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Memory {
    bytes: Vec<u8>,
}

impl Memory {
    pub fn new(size: usize) -> Memory {
        Memory { bytes: vec![0; size] }
    }

    pub fn size(&self) -> usize {
        self.bytes.len()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn check(&self, addr: u32, len: u32) -> Result<usize, MemError> {
        if addr % 4 != 0 {
            return Err(MemError::Misaligned { addr });
        }
        let end = addr as u64 + len as u64;
        if end > self.bytes.len() as u64 {
            return Err(MemError::OutOfBounds { addr, len, size: self.bytes.len() as u32 });
        }
        Ok(addr as usize)
    }

    pub fn read_word(&self, addr: u32) -> Result<u32, MemError> {
        let at = self.check(addr, 4)?;
        Ok(u32::from_le_bytes(self.bytes[at..at + 4].try_into().unwrap()))
    }

    pub fn write_word(&mut self, addr: u32, word: u32) -> Result<(), MemError> {
        let at = self.check(addr, 4)?;
        self.bytes[at..at + 4].copy_from_slice(&word.to_le_bytes());
        Ok(())
    }

    pub fn read_words(&self, addr: u32, count: usize) -> Result<Vec<u32>, MemError> {
        self.check(addr, (count * 4) as u32)?;
        (0..count).map(|i| self.read_word(addr + 4 * i as u32)).collect()
    }

    pub fn write_words(&mut self, addr: u32, words: &[u32]) -> Result<(), MemError> {
        self.check(addr, (words.len() * 4) as u32)?;
        for (i, &w) in words.iter().enumerate() {
            self.write_word(addr + 4 * i as u32, w)?;
        }
        Ok(())
    }

    /// Serialize as a flat image: an 8-byte little-endian size header
    /// followed by the raw contents.
    pub fn to_image(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.bytes.len());
        out.extend_from_slice(&(self.bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out
    }

    pub fn from_image(data: &[u8]) -> Result<Memory, ImageError> {
        if data.len() < 8 {
            return Err(ImageError::NoHeader);
        }
        let size = u64::from_le_bytes(data[..8].try_into().unwrap());
        let body = &data[8..];
        if (body.len() as u64) < size {
            return Err(ImageError::Truncated { expect: size, got: body.len() });
        }
        Ok(Memory { bytes: body[..size as usize].to_vec() })
    }

    /// Hex dump for debugging: one address and four words per line.
    pub fn hex_dump(&self, start: u32, words: usize) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for line in 0..words.div_ceil(4) {
            let addr = start + 16 * line as u32;
            write!(out, "{addr:08x}:").unwrap();
            for i in 0..4.min(words - line * 4) {
                match self.read_word(addr + 4 * i as u32) {
                    Ok(w) => write!(out, " {w:08x}").unwrap(),
                    Err(_) => write!(out, " ????????").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Which lane geometry a packed tensor uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneLayout {
    /// Operand lanes of `operand_bits` each (the load-side arrangement).
    Operand,
    /// Accumulator lanes of `product_bits` each (the store-side arrangement).
    Result,
}

impl LaneLayout {
    fn lanes_per_word(self, mode: PrecisionMode) -> usize {
        match self {
            LaneLayout::Operand => {
                if mode.operand_bits() == 16 {
                    1
                } else {
                    (32 / mode.operand_bits()) as usize
                }
            }
            LaneLayout::Result => mode.result_lanes_per_word(),
        }
    }

    fn lane_bits(self, mode: PrecisionMode) -> u32 {
        match self {
            LaneLayout::Operand => mode.operand_bits(),
            LaneLayout::Result => mode.product_bits(),
        }
    }

    fn range(self, mode: PrecisionMode) -> (i64, i64) {
        match self {
            LaneLayout::Operand => mode.operand_range(),
            LaneLayout::Result => mode.accum_range(),
        }
    }
}

/// A logical value sequence packed into 32-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedTensor {
    pub mode: PrecisionMode,
    pub layout: LaneLayout,
    pub logical_len: usize,
    pub words: Vec<u32>,
}

impl PackedTensor {
    pub fn expected_words(mode: PrecisionMode, layout: LaneLayout, len: usize) -> usize {
        len.div_ceil(layout.lanes_per_word(mode))
    }
}

fn pack_layout(
    values: &[i64],
    mode: PrecisionMode,
    layout: LaneLayout,
) -> Result<PackedTensor, PackError> {
    let (lo, hi) = layout.range(mode);
    let bits = layout.lane_bits(mode);
    let per_word = layout.lanes_per_word(mode);
    let mut words = vec![0u32; PackedTensor::expected_words(mode, layout, values.len())];
    for (index, &value) in values.iter().enumerate() {
        if value < lo || value > hi {
            return Err(PackError::OutOfRange { index, value, mode });
        }
        let mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
        let lane = (index % per_word) as u32;
        words[index / per_word] |= ((value as u32) & mask) << (lane * bits);
    }
    Ok(PackedTensor { mode, layout, logical_len: values.len(), words })
}

fn unpack_layout(t: &PackedTensor) -> Result<Vec<i64>, PackError> {
    let expect = PackedTensor::expected_words(t.mode, t.layout, t.logical_len);
    if t.words.len() != expect {
        return Err(PackError::WordCount {
            words: t.words.len(),
            expect,
            len: t.logical_len,
        });
    }
    let bits = t.layout.lane_bits(t.mode);
    let per_word = t.layout.lanes_per_word(t.mode);
    let mut out = Vec::with_capacity(t.logical_len);
    for index in 0..t.logical_len {
        let word = t.words[index / per_word] as u64;
        let lane = (index % per_word) as u32;
        let raw = (word >> (lane * bits)) & if bits == 32 { 0xFFFF_FFFF } else { (1 << bits) - 1 };
        let v = if t.mode.is_float() {
            raw as i64
        } else {
            ((raw << (64 - bits)) as i64) >> (64 - bits)
        };
        out.push(v);
    }
    Ok(out)
}

/// Pack operand values at the load-side lane width. Sub-word values must be
/// in the signed range of their lane; FP16 values are raw bit patterns.
pub fn pack(values: &[i64], mode: PrecisionMode) -> Result<PackedTensor, PackError> {
    pack_layout(values, mode, LaneLayout::Operand)
}

/// Inverse of [`pack`]; integer lanes come back sign-extended.
pub fn unpack(t: &PackedTensor) -> Result<Vec<i64>, PackError> {
    unpack_layout(t)
}

/// Pack accumulator values at the store-side lane width.
pub fn pack_results(values: &[i64], mode: PrecisionMode) -> Result<PackedTensor, PackError> {
    pack_layout(values, mode, LaneLayout::Result)
}

/// Unpack a store-side tensor of `len` values from raw words.
pub fn unpack_results(
    words: Vec<u32>,
    mode: PrecisionMode,
    len: usize,
) -> Result<Vec<i64>, PackError> {
    unpack_layout(&PackedTensor { mode, layout: LaneLayout::Result, logical_len: len, words })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn word_rw_roundtrip() {
        let mut m = Memory::new(64);
        m.write_word(0x10, 0xDEAD_BEEF).unwrap();
        assert_eq!(m.read_word(0x10).unwrap(), 0xDEAD_BEEF);
        // untouched region reads zero
        assert_eq!(m.read_word(0x20).unwrap(), 0);
    }

    #[test]
    fn word_access_faults() {
        let mut m = Memory::new(16);
        assert_eq!(m.read_word(2), Err(MemError::Misaligned { addr: 2 }));
        assert_eq!(
            m.write_word(16, 0),
            Err(MemError::OutOfBounds { addr: 16, len: 4, size: 16 })
        );
        assert!(m.read_words(8, 3).is_err());
    }

    #[test]
    fn image_roundtrip() {
        let mut m = Memory::new(24);
        m.write_word(4, 0x0102_0304).unwrap();
        let img = m.to_image();
        assert_eq!(img.len(), 8 + 24);
        let back = Memory::from_image(&img).unwrap();
        assert_eq!(back, m);
        assert!(Memory::from_image(&img[..4]).is_err());
        assert!(Memory::from_image(&img[..20]).is_err());
    }

    #[test]
    fn pack_examples() {
        let t = pack(&[1, 2, 3, 4], PrecisionMode::Int8).unwrap();
        assert_eq!(t.words, vec![0x0403_0201]);
        let t = pack(&[0x1234], PrecisionMode::Int16).unwrap();
        assert_eq!(t.words, vec![0x0000_1234]);
        let t = pack(&[], PrecisionMode::Int4).unwrap();
        assert!(t.words.is_empty());
        // trailing lanes of the final word are zero
        let t = pack(&[-1, -1, -1], PrecisionMode::Int8).unwrap();
        assert_eq!(t.words, vec![0x00FF_FFFF]);
    }

    #[test]
    fn unpack_examples() {
        let t = PackedTensor {
            mode: PrecisionMode::Int2,
            layout: LaneLayout::Operand,
            logical_len: 16,
            words: vec![0xFFFF_FFFF],
        };
        assert_eq!(unpack(&t).unwrap(), vec![-1; 16]);
        let t = PackedTensor {
            mode: PrecisionMode::Fp16,
            layout: LaneLayout::Operand,
            logical_len: 1,
            words: vec![0x0000_3C00],
        };
        assert_eq!(unpack(&t).unwrap(), vec![0x3C00]);
    }

    #[test]
    fn pack_range_errors() {
        let err = pack(&[0, 130], PrecisionMode::Int8).unwrap_err();
        assert_eq!(
            err,
            PackError::OutOfRange { index: 1, value: 130, mode: PrecisionMode::Int8 }
        );
        assert!(pack(&[0x1_0000], PrecisionMode::Fp16).is_err());
        assert!(pack(&[-9], PrecisionMode::Int4).is_err());
    }

    #[test]
    fn unpack_word_count_error() {
        let t = PackedTensor {
            mode: PrecisionMode::Int8,
            layout: LaneLayout::Operand,
            logical_len: 5,
            words: vec![0; 1],
        };
        assert!(matches!(unpack(&t), Err(PackError::WordCount { expect: 2, .. })));
    }

    #[test]
    fn result_layout_widths() {
        let t = pack_results(&[-1, 1], PrecisionMode::Int8).unwrap();
        assert_eq!(t.words, vec![0x0001_FFFF]);
        let t = pack_results(&[i64::from(i32::MIN)], PrecisionMode::Int16).unwrap();
        assert_eq!(t.words, vec![0x8000_0000]);
        let vals = unpack_results(t.words, PrecisionMode::Int16, 1).unwrap();
        assert_eq!(vals, vec![i64::from(i32::MIN)]);
    }

    #[test]
    fn hex_dump_shape() {
        let mut m = Memory::new(64);
        m.write_word(0, 0xAABB_CCDD).unwrap();
        let dump = m.hex_dump(0, 5);
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("00000000: aabbccdd"));
    }

    proptest! {
        #[test]
        fn pack_unpack_roundtrip(
            mode in prop::sample::select(&PrecisionMode::ALL[..]),
            len in 0usize..64,
            seed in any::<u64>(),
        ) {
            let values: Vec<i64> = {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let (lo, hi) = mode.operand_range();
                (0..len).map(|_| rng.gen_range(lo..=hi)).collect()
            };
            let t = pack(&values, mode).unwrap();
            prop_assert_eq!(
                t.words.len(),
                PackedTensor::expected_words(mode, LaneLayout::Operand, len)
            );
            prop_assert_eq!(unpack(&t).unwrap(), values);
        }

        #[test]
        fn single_value_roundtrip(
            mode in prop::sample::select(&PrecisionMode::ALL[..]),
            v in any::<i64>(),
        ) {
            let (lo, hi) = mode.operand_range();
            let v = lo + v.rem_euclid(hi - lo + 1);
            let t = pack(&[v], mode).unwrap();
            prop_assert_eq!(unpack(&t).unwrap(), vec![v]);
        }
    }
}
