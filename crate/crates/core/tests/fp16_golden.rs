//! Pins the binary16 arithmetic (and the test oracle itself) to a frozen
//! table of externally computed IEEE round-to-nearest-even results.

mod common;

use common::{oracle_add, oracle_mul};
use pssim_core::arith::fp16;

// (a, b, a·b) under round-to-nearest-even
const GOLDEN_MUL: &[(u16, u16, u16)] = &[
    (0x3C00, 0x3C00, 0x3C00),
    (0x4000, 0x3800, 0x3C00),
    (0xBC00, 0x3C00, 0xBC00),
    (0x0001, 0x3C00, 0x0001),
    (0x0001, 0x3800, 0x0000),
    (0x0003, 0x3800, 0x0002),
    (0x0400, 0x3800, 0x0200),
    (0x7BFF, 0x4000, 0x7C00),
    (0x7BFF, 0x3C01, 0x7C00),
    (0x7BFF, 0x7BFF, 0x7C00),
    (0x03FF, 0x03FF, 0x0000),
    (0x03FF, 0x6400, 0x2BFE),
    (0x0001, 0x6400, 0x0400),
    (0x8001, 0x6400, 0x8400),
    (0x3C01, 0x3C01, 0x3C02),
    (0x4248, 0x3555, 0x3C30),
    (0x6800, 0x2E66, 0x5A66),
    (0x0000, 0xFBFF, 0x8000),
    (0x8000, 0x7BFF, 0x8000),
    (0x1000, 0x1000, 0x0004),
    (0x2400, 0x2400, 0x0C00),
    (0x23FF, 0x2400, 0x0BFF),
    (0x7800, 0x0400, 0x4000),
    (0xF800, 0x8400, 0x4000),
    (0x5640, 0x4DA8, 0x686B),
    (0x3BFF, 0x3BFF, 0x3BFE),
    (0x43FF, 0x3BFF, 0x43FE),
    (0x03FF, 0x3BFF, 0x03FF),
    (0x0200, 0x4000, 0x0400),
    (0x0555, 0x38AA, 0x031C),
];

// (a, b, a+b) under round-to-nearest-even
const GOLDEN_ADD: &[(u16, u16, u16)] = &[
    (0x3C00, 0x3C00, 0x4000),
    (0x3C00, 0xBC00, 0x0000),
    (0x8000, 0x8000, 0x8000),
    (0x8000, 0x0000, 0x0000),
    (0x7BFF, 0x7BFF, 0x7C00),
    (0x7BFF, 0x0001, 0x7BFF),
    (0x6800, 0x3C00, 0x6800),
    (0x6800, 0x4200, 0x6802),
    (0x0001, 0x0001, 0x0002),
    (0x0001, 0x8002, 0x8001),
    (0x03FF, 0x0001, 0x0400),
    (0x0400, 0x8001, 0x03FF),
    (0x3C00, 0x0001, 0x3C00),
    (0x3C01, 0xBC00, 0x1400),
    (0x4000, 0xC000, 0x0000),
    (0x7800, 0xF400, 0x7400),
    (0x3555, 0x3555, 0x3955),
    (0x5640, 0xD638, 0x3800),
    (0x3BFF, 0x8400, 0x3BFF),
    (0x03FF, 0x83FE, 0x0001),
    (0x0200, 0x0200, 0x0400),
    (0x6BFF, 0x1400, 0x6BFF),
    (0x7BFF, 0x5000, 0x7C00),
    (0xFBFF, 0xD000, 0xFC00),
    (0x3C00, 0x1400, 0x3C01),
    (0x4800, 0x2C00, 0x4808),
    (0x4801, 0xAC00, 0x47F2),
    (0x67FF, 0x2400, 0x67FF),
    (0x77FF, 0x4400, 0x77FF),
    (0x0001, 0x0400, 0x0401),
];

// (a, b, a·b, a+b) on random non-NaN patterns
const GOLDEN_RANDOM: &[(u16, u16, u16, u16)] = &[
    (0xE40F, 0x5030, 0xF840, 0xE3DB),
    (0x2A41, 0xB320, 0xA192, 0xB190),
    (0xE175, 0xA5EC, 0x4C0A, 0xE175),
    (0x45C1, 0xEEA9, 0xF8CA, 0xEEA8),
    (0x0225, 0x2EC6, 0x003A, 0x2EC7),
    (0x9323, 0xC793, 0x1EC2, 0xC793),
    (0x5D7E, 0x3730, 0x58EF, 0x5D80),
    (0xB1A7, 0x84EC, 0x00DF, 0xB1A8),
    (0x39A3, 0xDEF2, 0xDCE5, 0xDEEF),
    (0x1C13, 0xB988, 0x99A2, 0xB980),
    (0xAACB, 0x7A3F, 0xE94E, 0x7A3F),
    (0xF45E, 0xEFC3, 0x7C00, 0xF64F),
    (0x3C68, 0x9DEE, 0x9E88, 0x3C62),
    (0x07EA, 0x0788, 0x0000, 0x0BB9),
    (0xF0EF, 0xD022, 0x7C00, 0xF0F3),
    (0x6EF9, 0xF7E1, 0xFC00, 0xF623),
    (0x0D52, 0x6321, 0x34BE, 0x6321),
    (0x8630, 0xEA33, 0x34CB, 0xEA33),
    (0xBF19, 0x83B5, 0x0694, 0xBF19),
    (0xA70E, 0xAB58, 0x167A, 0xAD70),
    (0x8E9A, 0x1923, 0x8011, 0x1850),
    (0x3169, 0x1803, 0x0D6D, 0x3179),
    (0xCC71, 0x99CC, 0x2A70, 0xCC71),
    (0x30AF, 0x934B, 0x8845, 0x30A8),
];

#[test]
fn implementation_matches_golden_table() {
    for &(a, b, want) in GOLDEN_MUL {
        assert_eq!(fp16::mul(a, b), want, "mul({a:#06x}, {b:#06x})");
    }
    for &(a, b, want) in GOLDEN_ADD {
        assert_eq!(fp16::add(a, b), want, "add({a:#06x}, {b:#06x})");
    }
    for &(a, b, prod, sum) in GOLDEN_RANDOM {
        assert_eq!(fp16::mul(a, b), prod, "mul({a:#06x}, {b:#06x})");
        assert_eq!(fp16::add(a, b), sum, "add({a:#06x}, {b:#06x})");
    }
}

#[test]
fn oracle_matches_golden_table() {
    for &(a, b, want) in GOLDEN_MUL {
        assert_eq!(oracle_mul(a, b), want, "oracle mul({a:#06x}, {b:#06x})");
    }
    for &(a, b, want) in GOLDEN_ADD {
        assert_eq!(oracle_add(a, b), want, "oracle add({a:#06x}, {b:#06x})");
    }
    for &(a, b, prod, sum) in GOLDEN_RANDOM {
        assert_eq!(oracle_mul(a, b), prod, "oracle mul({a:#06x}, {b:#06x})");
        assert_eq!(oracle_add(a, b), sum, "oracle add({a:#06x}, {b:#06x})");
    }
}

#[test]
fn commutativity_on_golden_operands() {
    for &(a, b, _) in GOLDEN_MUL {
        assert_eq!(fp16::mul(a, b), fp16::mul(b, a));
    }
    for &(a, b, _) in GOLDEN_ADD {
        assert_eq!(fp16::add(a, b), fp16::add(b, a));
    }
}
