//! Mapping DNN layers onto the array: im2col lowering of convolutions,
//! output tiling with in-PE K-chunk accumulation, program emission for the
//! sequencer, and whole-network cycle/GOPS reports.
//!
//! Layer lists are read from a line-oriented text format, one layer per
//! line:
//!
//! ```text
//! conv cin=3 cout=8 kh=3 kw=3 oh=8 ow=8 int8
//! fc in=512 out=1000 int16
//! ```

use crate::arith::PrecisionMode;
use crate::isa::{self, ExecError, ParseError};
use crate::mem::{self, MemError, Memory, PackError};
use crate::perfmodel::{gemm_traffic_words, theoretical_throughput, CycleReport, ThroughputSpec};
use crate::systolic::{ArrayShape, Matrix};
use std::fmt;
use thiserror::Error;

/// GEMM dimensions: an M×K by K×N product at one precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GemmSpec {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub mode: PrecisionMode,
}

impl GemmSpec {
    pub fn macs(&self) -> u64 {
        (self.m * self.k * self.n) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv {
        in_ch: usize,
        out_ch: usize,
        kernel_h: usize,
        kernel_w: usize,
        out_h: usize,
        out_w: usize,
    },
    Fc {
        in_features: usize,
        out_features: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub mode: PrecisionMode,
}

impl LayerSpec {
    pub fn macs(&self) -> u64 {
        lower_layer(self).macs()
    }

    pub fn with_mode(&self, mode: PrecisionMode) -> LayerSpec {
        LayerSpec { mode, ..*self }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LayerKind::Conv { in_ch, out_ch, kernel_h, kernel_w, out_h, out_w } => write!(
                f,
                "conv cin={in_ch} cout={out_ch} kh={kernel_h} kw={kernel_w} oh={out_h} ow={out_w} {}",
                self.mode
            ),
            LayerKind::Fc { in_features, out_features } => {
                write!(f, "fc in={in_features} out={out_features} {}", self.mode)
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("layer list line {line}: {msg}")]
pub struct LayerError {
    pub line: usize,
    pub msg: String,
}

/// Parse a layer list. `#` starts a comment.
pub fn parse_layers(text: &str) -> Result<Vec<LayerSpec>, LayerError> {
    let mut layers = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens: Vec<&str> = body.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let bad = |msg: String| LayerError { line, msg };
        let mode_token = tokens.pop().unwrap();
        let mode = PrecisionMode::parse(mode_token)
            .ok_or_else(|| bad(format!("unknown precision {mode_token:?}")))?;

        let field = |key: &str| -> Result<usize, LayerError> {
            let prefix = format!("{key}=");
            let tok = tokens
                .iter()
                .find(|t| t.starts_with(&prefix))
                .ok_or_else(|| bad(format!("missing {key}=")))?;
            let v: usize = tok[prefix.len()..]
                .parse()
                .map_err(|_| bad(format!("malformed {tok:?}")))?;
            if v == 0 {
                return Err(bad(format!("{key} must be positive")));
            }
            Ok(v)
        };

        let kind = match tokens[0] {
            "conv" => LayerKind::Conv {
                in_ch: field("cin")?,
                out_ch: field("cout")?,
                kernel_h: field("kh")?,
                kernel_w: field("kw")?,
                out_h: field("oh")?,
                out_w: field("ow")?,
            },
            "fc" => LayerKind::Fc { in_features: field("in")?, out_features: field("out")? },
            other => return Err(bad(format!("unknown layer kind {other:?}"))),
        };
        layers.push(LayerSpec { kind, mode });
    }
    Ok(layers)
}

/// im2col lowering: a convolution becomes `out_ch × (in_ch·kh·kw)` by
/// `(in_ch·kh·kw) × (oh·ow)`; a fully-connected layer is a matrix-vector
/// product at batch 1. MAC count is preserved.
pub fn lower_layer(layer: &LayerSpec) -> GemmSpec {
    match layer.kind {
        LayerKind::Conv { in_ch, out_ch, kernel_h, kernel_w, out_h, out_w } => GemmSpec {
            m: out_ch,
            k: in_ch * kernel_h * kernel_w,
            n: out_h * out_w,
            mode: layer.mode,
        },
        LayerKind::Fc { in_features, out_features } => {
            GemmSpec { m: out_features, k: in_features, n: 1, mode: layer.mode }
        }
    }
}

/// One K-range accumulated in place before the next chunk of the same tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KChunk {
    pub k0: usize,
    pub len: usize,
}

/// One output tile: a row/column window of C plus its K-chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub row0: usize,
    pub rows: usize,
    pub col0: usize,
    pub cols: usize,
    pub chunks: Vec<KChunk>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingPlan {
    pub gemm: GemmSpec,
    pub shape: ArrayShape,
    pub tiles: Vec<Tile>,
}

impl TilingPlan {
    /// True when K is split, so the emitted program uses hold mode.
    pub fn uses_hold(&self) -> bool {
        self.tiles.first().map_or(false, |t| t.chunks.len() > 1)
    }
}

/// Split a GEMM into output tiles that fit the array. `k_word_cap` limits
/// the operand words accumulated per load; K beyond the cap is split into
/// chunks held in the PEs.
pub fn tile(gemm: &GemmSpec, shape: ArrayShape, k_word_cap: Option<usize>) -> TilingPlan {
    let lanes = gemm.mode.lanes();
    let chunk_elems = k_word_cap.map_or(usize::MAX, |cap| cap.max(1) * lanes);
    let mut chunks = Vec::new();
    let mut k0 = 0;
    while k0 < gemm.k {
        let len = chunk_elems.min(gemm.k - k0);
        chunks.push(KChunk { k0, len });
        k0 += len;
    }

    let mut tiles = Vec::new();
    let mut row0 = 0;
    while row0 < gemm.m {
        let rows = shape.rows.min(gemm.m - row0);
        let mut col0 = 0;
        while col0 < gemm.n {
            let cols = shape.cols.min(gemm.n - col0);
            tiles.push(Tile { row0, rows, col0, cols, chunks: clone_chunks(&chunks) });
            col0 += cols;
        }
        row0 += rows;
    }
    TilingPlan { gemm: *gemm, shape, tiles }
}

fn clone_chunks(chunks: &[KChunk]) -> Vec<KChunk> {
    chunks.to_vec()
}

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error(transparent)]
    Codec(#[from] PackError),
}

/// Host-side driver for one GEMM: stages operand tiles contiguously (the
/// sequencer reads flat blocks), emits the program text, and reassembles
/// the output matrix from the stored tiles.
pub struct GemmDriver {
    plan: TilingPlan,
    x_base: u32,
    w_base: u32,
    y_base: u32,
    /// word offsets of each (tile, chunk) operand block
    chunk_offsets: Vec<Vec<(usize, usize)>>,
    /// word offset of each tile's result block
    result_offsets: Vec<usize>,
    mem_words: usize,
}

impl GemmDriver {
    pub fn new(plan: TilingPlan) -> GemmDriver {
        let lanes = plan.gemm.mode.lanes();
        let result_lanes = plan.gemm.mode.result_lanes_per_word();
        let mut x_words = 0usize;
        let mut w_words = 0usize;
        let mut y_words = 0usize;
        let mut chunk_offsets = Vec::with_capacity(plan.tiles.len());
        let mut result_offsets = Vec::with_capacity(plan.tiles.len());
        for tile in &plan.tiles {
            let mut per_chunk = Vec::with_capacity(tile.chunks.len());
            for chunk in &tile.chunks {
                let kw = chunk.len.div_ceil(lanes);
                per_chunk.push((x_words, w_words));
                x_words += tile.rows * kw;
                w_words += tile.cols * kw;
            }
            chunk_offsets.push(per_chunk);
            result_offsets.push(y_words);
            y_words += (tile.rows * tile.cols).div_ceil(result_lanes);
        }
        let x_base = 0u32;
        let w_base = (x_words * 4) as u32;
        let y_base = w_base + (w_words * 4) as u32;
        GemmDriver {
            plan,
            x_base,
            w_base,
            y_base,
            chunk_offsets,
            result_offsets,
            mem_words: x_words + w_words + y_words,
        }
    }

    pub fn plan(&self) -> &TilingPlan {
        &self.plan
    }

    /// Bytes of memory the staged program needs.
    pub fn mem_size(&self) -> usize {
        self.mem_words * 4
    }

    /// Emit the program: one load per (tile, chunk), one store per tile.
    pub fn program_text(&self) -> String {
        use std::fmt::Write;
        let gemm = &self.plan.gemm;
        let hold = self.plan.uses_hold();
        let mut out = String::new();
        write!(out, "hwpe.setup {}", gemm.mode).unwrap();
        if hold {
            out.push_str(" hold");
        }
        out.push('\n');
        for (t, tile) in self.plan.tiles.iter().enumerate() {
            for (c, chunk) in tile.chunks.iter().enumerate() {
                let (x_off, w_off) = self.chunk_offsets[t][c];
                writeln!(out, "hwpe.xaddr {:#x}", self.x_base + (x_off * 4) as u32).unwrap();
                writeln!(out, "hwpe.waddr {:#x}", self.w_base + (w_off * 4) as u32).unwrap();
                writeln!(
                    out,
                    "hwpe.len m={} k={} n={} ops=1",
                    tile.rows, chunk.len, tile.cols
                )
                .unwrap();
                writeln!(out, "hwpe.load").unwrap();
            }
            writeln!(out, "hwpe.store {:#x}", self.y_base + (self.result_offsets[t] * 4) as u32)
                .unwrap();
        }
        out
    }

    /// Write the operand blocks for `a` (M×K) and `b` (K×N) into memory.
    pub fn stage(&self, a: &Matrix, b: &Matrix, mem: &mut Memory) -> Result<(), WorkloadError> {
        let mode = self.plan.gemm.mode;
        let lanes = mode.lanes();
        for (t, tile) in self.plan.tiles.iter().enumerate() {
            for (c, chunk) in tile.chunks.iter().enumerate() {
                let kw = chunk.len.div_ceil(lanes);
                let (x_off, w_off) = self.chunk_offsets[t][c];
                for r in 0..tile.rows {
                    let vals: Vec<i64> =
                        (0..chunk.len).map(|k| a.get(tile.row0 + r, chunk.k0 + k)).collect();
                    let packed = mem::pack(&vals, mode)?;
                    let addr = self.x_base + ((x_off + r * kw) * 4) as u32;
                    mem.write_words(addr, &packed.words)?;
                }
                for col in 0..tile.cols {
                    let vals: Vec<i64> =
                        (0..chunk.len).map(|k| b.get(chunk.k0 + k, tile.col0 + col)).collect();
                    let packed = mem::pack(&vals, mode)?;
                    let addr = self.w_base + ((w_off + col * kw) * 4) as u32;
                    mem.write_words(addr, &packed.words)?;
                }
            }
        }
        Ok(())
    }

    /// Read back the stored tiles into the full output matrix.
    pub fn collect(&self, mem: &Memory) -> Result<Matrix, WorkloadError> {
        let gemm = &self.plan.gemm;
        let result_lanes = gemm.mode.result_lanes_per_word();
        let mut out = Matrix::zeros(gemm.m, gemm.n);
        for (t, tile) in self.plan.tiles.iter().enumerate() {
            let words = (tile.rows * tile.cols).div_ceil(result_lanes);
            let addr = self.y_base + (self.result_offsets[t] * 4) as u32;
            let raw = mem.read_words(addr, words)?;
            let vals = mem::unpack_results(raw, gemm.mode, tile.rows * tile.cols)?;
            for r in 0..tile.rows {
                for c in 0..tile.cols {
                    out.set(tile.row0 + r, tile.col0 + c, vals[r * tile.cols + c]);
                }
            }
        }
        Ok(out)
    }
}

/// Full pipeline for one GEMM: tile, stage, emit, parse, execute, collect.
pub fn run_gemm(
    a: &Matrix,
    b: &Matrix,
    mode: PrecisionMode,
    shape: ArrayShape,
    k_word_cap: Option<usize>,
) -> Result<(Matrix, CycleReport), WorkloadError> {
    let gemm = GemmSpec { m: a.rows(), k: a.cols(), n: b.cols(), mode };
    let driver = GemmDriver::new(tile(&gemm, shape, k_word_cap));
    let mut memory = Memory::new(driver.mem_size());
    driver.stage(a, b, &mut memory)?;
    let program = isa::parse_program(&driver.program_text())?;
    let report = isa::execute(&program, &mut memory, shape)?;
    let c = driver.collect(&memory)?;
    Ok((c, report))
}

/// Modeled run of one layer or network.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub layer: LayerSpec,
    pub gemm: GemmSpec,
    pub macs: u64,
    /// Marginal modeled cycles: this layer's loads and stores, plus setup
    /// and skew fill when the precision changes.
    pub cycles: f64,
    pub gops: f64,
    /// Theoretical peak for this layer's precision on the same array.
    pub peak_gops: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkReport {
    pub layers: Vec<LayerReport>,
    pub total_macs: u64,
    pub total_cycles: f64,
    pub aggregate_gops: f64,
    pub freq_hz: f64,
}

/// Per-instruction setup cost of a precision change: setup + xaddr + waddr
/// + len.
const SETUP_CYCLES: f64 = 7.0;

/// Model a network, layer by layer, on one array. Consecutive layers at the
/// same precision share one setup and one skew fill; a `None` bus width
/// means compute-bound (infinite bandwidth).
pub fn simulate_network(
    layers: &[LayerSpec],
    shape: ArrayShape,
    freq_hz: f64,
    bus_words_per_cycle: Option<f64>,
) -> NetworkReport {
    let mut reports = Vec::with_capacity(layers.len());
    let mut prev_mode: Option<PrecisionMode> = None;
    let mut total_cycles = 0.0;
    let mut total_macs = 0u64;

    for layer in layers {
        let gemm = lower_layer(layer);
        let tiles = gemm.m.div_ceil(shape.rows) * gemm.n.div_ceil(shape.cols);
        let k_words = gemm.k.div_ceil(gemm.mode.lanes());
        let mut compute = (tiles * shape.rows * k_words + tiles) as f64;
        if prev_mode != Some(gemm.mode) {
            compute += SETUP_CYCLES + (shape.rows - 1) as f64 + (shape.cols - 1) as f64;
        }
        let cycles = match bus_words_per_cycle {
            Some(bw) => compute.max(gemm_traffic_words(&gemm, shape) as f64 / bw),
            None => compute,
        };
        let macs = gemm.macs();
        let peak = theoretical_throughput(&ThroughputSpec { shape, freq_hz, mode: gemm.mode });
        reports.push(LayerReport {
            layer: *layer,
            gemm,
            macs,
            cycles,
            gops: 2.0 * macs as f64 * freq_hz / cycles / 1e9,
            peak_gops: peak,
        });
        total_cycles += cycles;
        total_macs += macs;
        prev_mode = Some(gemm.mode);
    }

    let aggregate_gops = if total_cycles > 0.0 {
        2.0 * total_macs as f64 * freq_hz / total_cycles / 1e9
    } else {
        0.0
    };
    NetworkReport { layers: reports, total_macs, total_cycles, aggregate_gops, freq_hz }
}
