//! The `hwpe.*` command set driving the co-processor: assembly parsing,
//! configuration registers, the load/store sequencer, and per-instruction
//! cycle costs.
//!
//! A computation is set up by four register writes (`setup`, `xaddr`,
//! `waddr`, `len`) and executed by `load`, which streams every operator of
//! the batch through the array, and `store`, which drains the results to
//! memory. `load`/`store` fault unless all four setup registers have been
//! written since the last reset.
//!
//! Memory layout of a batch: operand words for matrix A sit at `xaddr`, one
//! operator after another, each operator row-major with `ceil(k/lanes)`
//! packed words per row. Matrix B sits at `waddr` column-major, each column
//! packed the same way. `store` writes each operator's m×n results
//! row-major at the accumulator lane width.

use crate::arith::PrecisionMode;
use crate::mem::{self, LaneLayout, Memory, MemError, PackedTensor, PackError};
use crate::perfmodel::CycleReport;
use crate::systolic::{
    drain_cycles, load_cycles, ArrayShape, Matrix, SaConfig, SaError, SystolicArray,
};
use std::fmt;
use thiserror::Error;

/// One co-processor command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HwpeInstruction {
    Setup { mode: PrecisionMode, hold: bool },
    Xaddr { addr: u32 },
    Waddr { addr: u32 },
    Len { m: usize, k: usize, n: usize, ops: usize },
    Load,
    Store { dest: u32 },
}

impl HwpeInstruction {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            HwpeInstruction::Setup { .. } => "hwpe.setup",
            HwpeInstruction::Xaddr { .. } => "hwpe.xaddr",
            HwpeInstruction::Waddr { .. } => "hwpe.waddr",
            HwpeInstruction::Len { .. } => "hwpe.len",
            HwpeInstruction::Load => "hwpe.load",
            HwpeInstruction::Store { .. } => "hwpe.store",
        }
    }

    /// Setup-class instructions write configuration registers; compute-class
    /// instructions move data through the array.
    pub fn is_setup_class(&self) -> bool {
        !matches!(self, HwpeInstruction::Load | HwpeInstruction::Store { .. })
    }
}

impl fmt::Display for HwpeInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HwpeInstruction::Setup { mode, hold } => {
                write!(f, "hwpe.setup {mode}")?;
                if *hold {
                    write!(f, " hold")?;
                }
                Ok(())
            }
            HwpeInstruction::Xaddr { addr } => write!(f, "hwpe.xaddr {addr:#x}"),
            HwpeInstruction::Waddr { addr } => write!(f, "hwpe.waddr {addr:#x}"),
            HwpeInstruction::Len { m, k, n, ops } => {
                write!(f, "hwpe.len m={m} k={k} n={n} ops={ops}")
            }
            HwpeInstruction::Load => write!(f, "hwpe.load"),
            HwpeInstruction::Store { dest } => write!(f, "hwpe.store {dest:#x}"),
        }
    }
}

/// An instruction plus the source line it came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcedInstruction {
    pub line: usize,
    pub instr: HwpeInstruction,
}

/// A parsed program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub instructions: Vec<SourcedInstruction>,
}

impl Program {
    pub fn from_instructions(instrs: impl IntoIterator<Item = HwpeInstruction>) -> Program {
        Program {
            instructions: instrs
                .into_iter()
                .enumerate()
                .map(|(i, instr)| SourcedInstruction { line: i + 1, instr })
                .collect(),
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for si in &self.instructions {
            writeln!(f, "{}", si.instr)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unknown mnemonic {0:?}")]
    UnknownMnemonic(String),
    #[error("missing {0}")]
    MissingOperand(&'static str),
    #[error("malformed {what}: {token:?}")]
    BadOperand { what: &'static str, token: String },
    #[error("{what} {token:?} is out of range")]
    OutOfRange { what: &'static str, token: String },
    #[error("unexpected trailing tokens {0:?}")]
    Trailing(String),
}

fn parse_hex(token: &str, what: &'static str, line: usize) -> Result<u32, ParseError> {
    let digits = token.strip_prefix("0x").or_else(|| token.strip_prefix("0X")).unwrap_or(token);
    u32::from_str_radix(digits, 16).map_err(|_| ParseError {
        line,
        kind: ParseErrorKind::BadOperand { what, token: token.to_string() },
    })
}

fn parse_count(token: &str, what: &'static str, line: usize) -> Result<usize, ParseError> {
    let n: usize = token.parse().map_err(|_| ParseError {
        line,
        kind: ParseErrorKind::BadOperand { what, token: token.to_string() },
    })?;
    if n == 0 || n > 1 << 20 {
        return Err(ParseError {
            line,
            kind: ParseErrorKind::OutOfRange { what, token: token.to_string() },
        });
    }
    Ok(n)
}

/// Parse assembly text: one instruction per line, `#` starts a comment.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut instructions = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens = body.split_whitespace();
        let Some(mnemonic) = tokens.next() else { continue };
        let err = |kind| ParseError { line, kind };

        let instr = match mnemonic {
            "hwpe.setup" => {
                let token = tokens
                    .next()
                    .ok_or_else(|| err(ParseErrorKind::MissingOperand("precision")))?;
                let mode = PrecisionMode::parse(token).ok_or_else(|| {
                    err(ParseErrorKind::BadOperand { what: "precision", token: token.into() })
                })?;
                let hold = match tokens.next() {
                    None => false,
                    Some("hold") => true,
                    Some(other) => {
                        return Err(err(ParseErrorKind::Trailing(other.to_string())));
                    }
                };
                HwpeInstruction::Setup { mode, hold }
            }
            "hwpe.xaddr" | "hwpe.waddr" => {
                let token =
                    tokens.next().ok_or_else(|| err(ParseErrorKind::MissingOperand("address")))?;
                let addr = parse_hex(token, "address", line)?;
                if mnemonic == "hwpe.xaddr" {
                    HwpeInstruction::Xaddr { addr }
                } else {
                    HwpeInstruction::Waddr { addr }
                }
            }
            "hwpe.len" => {
                let (mut m, mut k, mut n, mut ops) = (None, None, None, None);
                for token in tokens.by_ref() {
                    let (key, value) = token.split_once('=').ok_or_else(|| {
                        err(ParseErrorKind::BadOperand {
                            what: "length field",
                            token: token.into(),
                        })
                    })?;
                    let slot = match key {
                        "m" => &mut m,
                        "k" => &mut k,
                        "n" => &mut n,
                        "ops" => &mut ops,
                        _ => {
                            return Err(err(ParseErrorKind::BadOperand {
                                what: "length field",
                                token: token.into(),
                            }))
                        }
                    };
                    *slot = Some(parse_count(value, "length field", line)?);
                }
                HwpeInstruction::Len {
                    m: m.ok_or_else(|| err(ParseErrorKind::MissingOperand("m=")))?,
                    k: k.ok_or_else(|| err(ParseErrorKind::MissingOperand("k=")))?,
                    n: n.ok_or_else(|| err(ParseErrorKind::MissingOperand("n=")))?,
                    ops: ops.ok_or_else(|| err(ParseErrorKind::MissingOperand("ops=")))?,
                }
            }
            "hwpe.load" => HwpeInstruction::Load,
            "hwpe.store" => {
                let token =
                    tokens.next().ok_or_else(|| err(ParseErrorKind::MissingOperand("address")))?;
                HwpeInstruction::Store { dest: parse_hex(token, "address", line)? }
            }
            other => return Err(err(ParseErrorKind::UnknownMnemonic(other.to_string()))),
        };

        if let Some(extra) = tokens.next() {
            return Err(ParseError { line, kind: ParseErrorKind::Trailing(extra.to_string()) });
        }
        instructions.push(SourcedInstruction { line, instr });
    }
    Ok(Program { instructions })
}

/// Operator batch dimensions from `hwpe.len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LenRegs {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub ops: usize,
}

impl LenRegs {
    pub fn k_words(&self, mode: PrecisionMode) -> usize {
        self.k.div_ceil(mode.lanes())
    }

    pub fn x_words(&self, mode: PrecisionMode) -> usize {
        self.ops * self.m * self.k_words(mode)
    }

    pub fn w_words(&self, mode: PrecisionMode) -> usize {
        self.ops * self.n * self.k_words(mode)
    }

    pub fn result_words_per_op(&self, mode: PrecisionMode) -> usize {
        (self.m * self.n).div_ceil(mode.result_lanes_per_word())
    }

    pub fn macs(&self) -> u64 {
        (self.ops * self.m * self.k * self.n) as u64
    }
}

/// The configuration register file. Arms once all four registers have been
/// written since the last reset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HwpeRegs {
    pub setup: Option<(PrecisionMode, bool)>,
    pub x_base: Option<u32>,
    pub w_base: Option<u32>,
    pub len: Option<LenRegs>,
}

impl HwpeRegs {
    pub fn armed(&self) -> bool {
        self.setup.is_some() && self.x_base.is_some() && self.w_base.is_some() && self.len.is_some()
    }
}

/// Base cycle costs of the setup-class instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostTable {
    pub setup: u64,
    pub xaddr: u64,
    pub waddr: u64,
    pub len: u64,
}

impl Default for CostTable {
    fn default() -> CostTable {
        CostTable { setup: 4, xaddr: 1, waddr: 1, len: 1 }
    }
}

/// Cycles one instruction takes. Setup-class costs come from the table;
/// `load`/`store` delegate to the systolic cost model, so `regs` must be
/// armed for those.
pub fn cycle_cost(instr: &HwpeInstruction, regs: &HwpeRegs, shape: ArrayShape) -> u64 {
    let table = CostTable::default();
    match instr {
        HwpeInstruction::Setup { .. } => table.setup,
        HwpeInstruction::Xaddr { .. } => table.xaddr,
        HwpeInstruction::Waddr { .. } => table.waddr,
        HwpeInstruction::Len { .. } => table.len,
        HwpeInstruction::Load => {
            let (mode, _) = regs.setup.expect("load cost needs armed registers");
            let len = regs.len.expect("load cost needs armed registers");
            load_cycles(shape, len.ops, len.k_words(mode))
        }
        HwpeInstruction::Store { .. } => {
            let (_, hold) = regs.setup.expect("store cost needs armed registers");
            let len = regs.len.expect("store cost needs armed registers");
            let ops = if hold { 1 } else { len.ops };
            drain_cycles(shape, ops)
        }
    }
}

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("line {line}: {op} before setup/xaddr/waddr/len completed")]
    NotArmed { line: usize, op: &'static str },
    #[error("line {line}: hold mode accumulates a single operator, got ops={ops}")]
    HoldBatch { line: usize, ops: usize },
    #[error("line {line}: store with no computed results pending")]
    NothingToStore { line: usize },
    #[error("line {line}: {source}")]
    Array { line: usize, source: SaError },
    #[error("line {line}: {source}")]
    Fault { line: usize, source: MemError },
    #[error("line {line}: {source}")]
    Codec { line: usize, source: PackError },
}

struct Datapath {
    array: SystolicArray,
    /// Dimensions of the operator accumulating in hold mode.
    held: Option<(usize, usize)>,
    /// Results computed by `load`, waiting for `store`.
    latch: Vec<Matrix>,
}

/// Run a program against memory on an array of the given shape. Returns the
/// instruction/cycle report; results land in memory at the store addresses.
pub fn execute(
    program: &Program,
    mem: &mut Memory,
    shape: ArrayShape,
) -> Result<CycleReport, ExecError> {
    let mut regs = HwpeRegs::default();
    let mut path: Option<Datapath> = None;
    let mut report = CycleReport::default();

    for &SourcedInstruction { line, instr } in &program.instructions {
        let cycles_known = regs.armed() || instr.is_setup_class();
        if instr.is_setup_class() {
            report.setup_instructions += 1;
        } else {
            report.compute_instructions += 1;
        }
        match instr {
            HwpeInstruction::Setup { mode, hold } => {
                regs.setup = Some((mode, hold));
                // re-initialization clears any in-flight results
                path = None;
                report.setup_cycles += cycle_cost(&instr, &regs, shape);
            }
            HwpeInstruction::Xaddr { addr } => {
                regs.x_base = Some(addr);
                report.setup_cycles += cycle_cost(&instr, &regs, shape);
            }
            HwpeInstruction::Waddr { addr } => {
                regs.w_base = Some(addr);
                report.setup_cycles += cycle_cost(&instr, &regs, shape);
            }
            HwpeInstruction::Len { m, k, n, ops } => {
                regs.len = Some(LenRegs { m, k, n, ops });
                report.setup_cycles += cycle_cost(&instr, &regs, shape);
            }
            HwpeInstruction::Load => {
                if !cycles_known {
                    return Err(ExecError::NotArmed { line, op: "hwpe.load" });
                }
                let (mode, hold) = regs.setup.unwrap();
                let len = regs.len.unwrap();
                if hold && len.ops != 1 {
                    return Err(ExecError::HoldBatch { line, ops: len.ops });
                }
                let (a_ops, b_ops) = read_operands(mem, &regs, mode).map_err(|source| match source {
                    OperandError::Fault(source) => ExecError::Fault { line, source },
                    OperandError::Codec(source) => ExecError::Codec { line, source },
                })?;

                let path = path.get_or_insert_with(|| Datapath {
                    array: SystolicArray::new(SaConfig { shape, mode }),
                    held: None,
                    latch: Vec::new(),
                });
                for (a, b) in a_ops.iter().zip(&b_ops) {
                    if path.held.is_none() {
                        path.array.reset_accumulators();
                    }
                    path.array
                        .stream_operator(a, b)
                        .map_err(|source| ExecError::Array { line, source })?;
                    if hold {
                        path.held = Some((len.m, len.n));
                    } else {
                        path.latch.push(path.array.drain_outputs(len.m, len.n));
                    }
                }
                report.load_cycles += cycle_cost(&instr, &regs, shape);
                report.macs += len.macs();
            }
            HwpeInstruction::Store { dest } => {
                if !cycles_known {
                    return Err(ExecError::NotArmed { line, op: "hwpe.store" });
                }
                let (mode, _) = regs.setup.unwrap();
                let len = regs.len.unwrap();
                let Some(path_ref) = path.as_mut() else {
                    return Err(ExecError::NothingToStore { line });
                };
                if let Some((m, n)) = path_ref.held.take() {
                    path_ref.latch.push(path_ref.array.drain_outputs(m, n));
                }
                if path_ref.latch.is_empty() {
                    return Err(ExecError::NothingToStore { line });
                }
                let words_per_op = len.result_words_per_op(mode);
                let total_bytes = (path_ref.latch.len() * words_per_op * 4) as u64;
                if dest % 4 != 0 {
                    return Err(ExecError::Fault { line, source: MemError::Misaligned { addr: dest } });
                }
                if dest as u64 + total_bytes > mem.size() as u64 {
                    return Err(ExecError::Fault {
                        line,
                        source: MemError::OutOfBounds {
                            addr: dest,
                            len: total_bytes as u32,
                            size: mem.size() as u32,
                        },
                    });
                }
                for (o, result) in path_ref.latch.iter().enumerate() {
                    let flat: Vec<i64> = (0..result.rows())
                        .flat_map(|r| result.row(r).to_vec())
                        .collect();
                    let packed = mem::pack_results(&flat, mode)
                        .map_err(|source| ExecError::Codec { line, source })?;
                    let addr = dest + (o * words_per_op * 4) as u32;
                    mem.write_words(addr, &packed.words)
                        .map_err(|source| ExecError::Fault { line, source })?;
                }
                report.store_cycles += cycle_cost(&instr, &regs, shape);
                path_ref.latch.clear();
            }
        }
    }
    Ok(report)
}

enum OperandError {
    Fault(MemError),
    Codec(PackError),
}

impl From<MemError> for OperandError {
    fn from(e: MemError) -> Self {
        OperandError::Fault(e)
    }
}

impl From<PackError> for OperandError {
    fn from(e: PackError) -> Self {
        OperandError::Codec(e)
    }
}

fn read_operands(
    mem: &Memory,
    regs: &HwpeRegs,
    mode: PrecisionMode,
) -> Result<(Vec<Matrix>, Vec<Matrix>), OperandError> {
    let len = regs.len.unwrap();
    let kw = len.k_words(mode);
    let x_words = mem.read_words(regs.x_base.unwrap(), len.x_words(mode))?;
    let w_words = mem.read_words(regs.w_base.unwrap(), len.w_words(mode))?;

    let unpack_k = |words: &[u32]| -> Result<Vec<i64>, PackError> {
        mem::unpack(&PackedTensor {
            mode,
            layout: LaneLayout::Operand,
            logical_len: len.k,
            words: words.to_vec(),
        })
    };

    let mut a_ops = Vec::with_capacity(len.ops);
    let mut b_ops = Vec::with_capacity(len.ops);
    for o in 0..len.ops {
        let mut a = Matrix::zeros(len.m, len.k);
        for r in 0..len.m {
            let at = (o * len.m + r) * kw;
            let row = unpack_k(&x_words[at..at + kw])?;
            for (c, v) in row.into_iter().enumerate() {
                a.set(r, c, v);
            }
        }
        let mut b = Matrix::zeros(len.k, len.n);
        for c in 0..len.n {
            let at = (o * len.n + c) * kw;
            let col = unpack_k(&w_words[at..at + kw])?;
            for (r, v) in col.into_iter().enumerate() {
                b.set(r, c, v);
            }
        }
        a_ops.push(a);
        b_ops.push(b);
    }
    Ok((a_ops, b_ops))
}
