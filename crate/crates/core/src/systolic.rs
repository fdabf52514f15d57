//! R×C output-stationary systolic array.
//!
//! Operand words enter skewed: the word stream for row `i` is delayed by `i`
//! steps at the west edge and the stream for column `j` by `j` steps at the
//! north edge, so lane products for word `t` meet in PE `(i,j)` at step
//! `t+i+j`. Results stay in the PEs and leave southward through a column
//! drain chain.
//!
//! The micro-stepped simulation produces bit-exact values. Reported cycle
//! counts come from the calibrated cost model in [`load_cycles`] and
//! [`drain_cycles`] instead, which reflects the serial word injection of the
//! real load path rather than the idealized parallel feed used for
//! functional stepping.

use crate::arith::{fold_lanes, AccumBundle, PackedWord, PrecisionMode};
use crate::pe::{pe_step, PeCtrl, PeState};
use thiserror::Error;

/// Geometry of the array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayShape {
    pub rows: usize,
    pub cols: usize,
}

impl ArrayShape {
    pub fn new(rows: usize, cols: usize) -> ArrayShape {
        assert!(rows >= 1 && cols >= 1);
        ArrayShape { rows, cols }
    }
}

impl std::fmt::Display for ArrayShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Array geometry plus the operating precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SaConfig {
    pub shape: ArrayShape,
    pub mode: PrecisionMode,
}

impl SaConfig {
    pub fn new(rows: usize, cols: usize, mode: PrecisionMode) -> SaConfig {
        SaConfig { shape: ArrayShape::new(rows, cols), mode }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SaError {
    #[error("{m}x{n} operator exceeds the {rows}x{cols} array; tile first")]
    Dimension { m: usize, n: usize, rows: usize, cols: usize },
    #[error("inner dimensions disagree: lhs is _x{lhs}, rhs is {rhs}x_")]
    InnerDim { lhs: usize, rhs: usize },
}

/// Row-major matrix of lane values. Integer modes store the signed value;
/// FP16 stores the raw 16-bit pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> i64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, f(r, c));
            }
        }
        m
    }

    pub fn identity(n: usize) -> Matrix {
        Matrix::from_fn(n, n, |r, c| (r == c) as i64)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<i64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Per-phase cycle counts from the calibrated model. Compute overlaps the
/// load phase, so the total is load + drain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CyclePhases {
    pub load: u64,
    pub drain: u64,
}

impl CyclePhases {
    pub fn total(self) -> u64 {
        self.load + self.drain
    }
}

/// Cycles to inject one batch of operators: the skew fill plus one word
/// injection per row per operator word.
pub fn load_cycles(shape: ArrayShape, n_ops: usize, k_words: usize) -> u64 {
    if n_ops == 0 {
        return 0;
    }
    (shape.rows - 1) as u64 + (n_ops * shape.rows * k_words) as u64
}

/// Like [`load_cycles`] for operators with differing word counts.
pub fn load_cycles_mixed(shape: ArrayShape, k_words_per_op: &[usize]) -> u64 {
    if k_words_per_op.is_empty() {
        return 0;
    }
    (shape.rows - 1) as u64
        + k_words_per_op.iter().map(|kw| (shape.rows * kw) as u64).sum::<u64>()
}

/// Cycles to drain one batch: the column skew plus one beat per operator.
pub fn drain_cycles(shape: ArrayShape, n_ops: usize) -> u64 {
    if n_ops == 0 {
        return 0;
    }
    (shape.cols - 1) as u64 + n_ops as u64
}

/// Progress of the array through one operator pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SaPhase {
    Loading,
    Computing,
    Draining,
    Done,
}

/// The stateful array. Use [`sa_matmul`]/[`sa_run_batch`] for whole
/// operators; the stateful interface exists for accumulating K-chunks in
/// place (hold mode) before a single drain.
pub struct SystolicArray {
    cfg: SaConfig,
    grid: Vec<PeState>,
    phase: SaPhase,
    steps: u64,
}

impl SystolicArray {
    pub fn new(cfg: SaConfig) -> SystolicArray {
        let pe = PeState::new(cfg.mode);
        SystolicArray {
            cfg,
            grid: vec![pe; cfg.shape.rows * cfg.shape.cols],
            phase: SaPhase::Loading,
            steps: 0,
        }
    }

    pub fn config(&self) -> &SaConfig {
        &self.cfg
    }

    pub fn phase(&self) -> SaPhase {
        self.phase
    }

    /// Micro-steps executed so far (not the modeled cycle count).
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn reset_accumulators(&mut self) {
        for pe in &mut self.grid {
            pe.y_reg = AccumBundle::ZERO;
        }
        self.phase = SaPhase::Loading;
    }

    /// Stream one operator through the array, accumulating onto whatever the
    /// PEs currently hold. `a` is M×K, `b` is K×N with M ≤ rows, N ≤ cols.
    pub fn stream_operator(&mut self, a: &Matrix, b: &Matrix) -> Result<(), SaError> {
        let (rows, cols) = (self.cfg.shape.rows, self.cfg.shape.cols);
        if a.cols() != b.rows() {
            return Err(SaError::InnerDim { lhs: a.cols(), rhs: b.rows() });
        }
        if a.rows() > rows || b.cols() > cols {
            return Err(SaError::Dimension { m: a.rows(), n: b.cols(), rows, cols });
        }
        let mode = self.cfg.mode;
        let lanes = mode.lanes();
        let k_words = a.cols().div_ceil(lanes);

        let a_streams: Vec<Vec<PackedWord>> =
            (0..a.rows()).map(|r| pack_stream(a.row(r), mode)).collect();
        let b_streams: Vec<Vec<PackedWord>> =
            (0..b.cols()).map(|c| pack_stream(&b.column(c), mode)).collect();

        let feed = |streams: &[Vec<PackedWord>], lane: usize, idx: i64| -> PackedWord {
            if lane >= streams.len() || idx < 0 || idx as usize >= k_words {
                PackedWord::ZERO
            } else {
                streams[lane][idx as usize]
            }
        };

        self.phase = SaPhase::Computing;
        let total = k_words + rows + cols - 2;
        let mut north_w = vec![PackedWord::ZERO; cols];
        for t in 0..total {
            for i in 0..rows {
                let mut west = feed(&a_streams, i, t as i64 - i as i64);
                for j in 0..cols {
                    let north = if i == 0 {
                        feed(&b_streams, j, t as i64 - j as i64)
                    } else {
                        north_w[j]
                    };
                    let (next, out) = pe_step(
                        &self.grid[i * cols + j],
                        west,
                        north,
                        AccumBundle::ZERO,
                        PeCtrl::Compute,
                    );
                    self.grid[i * cols + j] = next;
                    west = out.x_out;
                    north_w[j] = out.w_out;
                }
            }
            self.steps += 1;
        }
        Ok(())
    }

    /// Shift every accumulator out through the south edge. Returns the grid
    /// of Y bundles indexed `[row][col]` and leaves all accumulators zero.
    pub fn drain(&mut self) -> Vec<Vec<AccumBundle>> {
        let (rows, cols) = (self.cfg.shape.rows, self.cfg.shape.cols);
        self.phase = SaPhase::Draining;
        let mut out = vec![vec![AccumBundle::ZERO; cols]; rows];
        for step in 0..rows {
            let mut north_y = vec![AccumBundle::ZERO; cols];
            for i in 0..rows {
                for j in 0..cols {
                    let (next, o) = pe_step(
                        &self.grid[i * cols + j],
                        PackedWord::ZERO,
                        PackedWord::ZERO,
                        north_y[j],
                        PeCtrl::Drain,
                    );
                    self.grid[i * cols + j] = next;
                    // the south edge emits the value that started in row
                    // rows-1-step this drain beat
                    if i == rows - 1 {
                        out[rows - 1 - step][j] = o.y_out;
                    }
                    north_y[j] = o.y_out;
                }
            }
            self.steps += 1;
        }
        self.phase = SaPhase::Done;
        out
    }

    /// Drain and fold the top-left `m`×`n` accumulators into output values.
    pub fn drain_outputs(&mut self, m: usize, n: usize) -> Matrix {
        let grid = self.drain();
        Matrix::from_fn(m, n, |r, c| fold_lanes(grid[r][c], self.cfg.mode))
    }
}

fn pack_stream(values: &[i64], mode: PrecisionMode) -> Vec<PackedWord> {
    values
        .chunks(mode.lanes())
        .map(|chunk| PackedWord::from_lanes(mode, chunk))
        .collect()
}

/// Run one M×K · K×N operator and report its modeled cycles.
pub fn sa_matmul(a: &Matrix, b: &Matrix, cfg: &SaConfig) -> Result<(Matrix, CyclePhases), SaError> {
    let mut sa = SystolicArray::new(*cfg);
    sa.stream_operator(a, b)?;
    let c = sa.drain_outputs(a.rows(), b.cols());
    let k_words = a.cols().div_ceil(cfg.mode.lanes());
    let cycles = CyclePhases {
        load: load_cycles(cfg.shape, 1, k_words),
        drain: drain_cycles(cfg.shape, 1),
    };
    Ok((c, cycles))
}

/// Run a batch of operators back to back, sharing one skew fill.
pub fn sa_run_batch(
    ops: &[(Matrix, Matrix)],
    cfg: &SaConfig,
) -> Result<(Vec<Matrix>, CyclePhases), SaError> {
    if ops.is_empty() {
        return Ok((Vec::new(), CyclePhases::default()));
    }
    let mut sa = SystolicArray::new(*cfg);
    let mut results = Vec::with_capacity(ops.len());
    let mut k_words = Vec::with_capacity(ops.len());
    for (a, b) in ops {
        sa.stream_operator(a, b)?;
        results.push(sa.drain_outputs(a.rows(), b.cols()));
        k_words.push(a.cols().div_ceil(cfg.mode.lanes()));
    }
    let cycles = CyclePhases {
        load: load_cycles_mixed(cfg.shape, &k_words),
        drain: drain_cycles(cfg.shape, ops.len()),
    };
    Ok((results, cycles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::PrecisionMode;

    fn gemm_wrapped(a: &Matrix, b: &Matrix, mode: PrecisionMode) -> Matrix {
        // integer reference: exact sum, then wrap to the accumulator width
        let bits = mode.product_bits();
        Matrix::from_fn(a.rows(), b.cols(), |r, c| {
            let mut acc = 0i64;
            for k in 0..a.cols() {
                acc = acc.wrapping_add(a.get(r, k) * b.get(k, c));
            }
            ((acc as u64) << (64 - bits)) as i64 >> (64 - bits)
        })
    }

    #[test]
    fn identity_times_b_is_b() {
        let cfg = SaConfig::new(4, 4, PrecisionMode::Int8);
        let a = Matrix::identity(4);
        let b = Matrix::from_fn(4, 4, |r, c| (r as i64 * 4 + c as i64) - 7);
        let (c, _) = sa_matmul(&a, &b, &cfg).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn rejects_oversized_operators() {
        let cfg = SaConfig::new(4, 4, PrecisionMode::Int8);
        let a = Matrix::zeros(5, 4);
        let b = Matrix::zeros(4, 4);
        assert_eq!(
            sa_matmul(&a, &b, &cfg).unwrap_err(),
            SaError::Dimension { m: 5, n: 4, rows: 4, cols: 4 }
        );
        let a = Matrix::zeros(4, 3);
        assert!(matches!(sa_matmul(&a, &b, &cfg), Err(SaError::InnerDim { .. })));
    }

    #[test]
    fn int_modes_match_reference_gemm() {
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for mode in [
            PrecisionMode::Int16,
            PrecisionMode::Int8,
            PrecisionMode::Int4,
            PrecisionMode::Int2,
        ] {
            let (lo, hi) = mode.operand_range();
            let span = (hi - lo + 1) as u64;
            for trial in 0..16 {
                let m = (next() % 4 + 1) as usize;
                let n = (next() % 4 + 1) as usize;
                let k = (next() % 17 + 1) as usize;
                let a = Matrix::from_fn(m, k, |_, _| lo + (next() % span) as i64);
                let b = Matrix::from_fn(k, n, |_, _| lo + (next() % span) as i64);
                let cfg = SaConfig::new(4, 4, mode);
                let (c, _) = sa_matmul(&a, &b, &cfg).unwrap();
                assert_eq!(c, gemm_wrapped(&a, &b, mode), "mode={mode} trial={trial}");
            }
        }
    }

    #[test]
    fn fig2_batch_cycle_totals() {
        // four 4x4 INT8 operators on a 4x4 array: 19 load + 7 drain = 26
        let cfg = SaConfig::new(4, 4, PrecisionMode::Int8);
        let ops: Vec<(Matrix, Matrix)> =
            (0..4).map(|i| (Matrix::identity(4), Matrix::from_fn(4, 4, |r, c| (r + c + i) as i64 % 5))).collect();
        let (results, cycles) = sa_run_batch(&ops, &cfg).unwrap();
        assert_eq!(cycles.load, 19);
        assert_eq!(cycles.drain, 7);
        assert_eq!(cycles.total(), 26);
        for (out, (_, b)) in results.iter().zip(&ops) {
            assert_eq!(out, b);
        }
    }

    #[test]
    fn empty_batch_is_free() {
        let cfg = SaConfig::new(4, 4, PrecisionMode::Int8);
        let (results, cycles) = sa_run_batch(&[], &cfg).unwrap();
        assert!(results.is_empty());
        assert_eq!(cycles.total(), 0);
    }

    #[test]
    fn batch_amortizes_skew() {
        let cfg = SaConfig::new(4, 4, PrecisionMode::Int8);
        let a = Matrix::identity(4);
        let b = Matrix::from_fn(4, 4, |r, c| (r * c) as i64 % 3);
        let two_ops = vec![(a.clone(), b.clone()), (a.clone(), b.clone())];
        let (_, batch) = sa_run_batch(&two_ops, &cfg).unwrap();
        let (_, single) = sa_matmul(&a, &b, &cfg).unwrap();
        assert!(batch.total() <= 2 * single.total());
    }

    #[test]
    fn cycle_model_monotonicity() {
        let s44 = ArrayShape::new(4, 4);
        let s128 = ArrayShape::new(12, 8);
        assert!(load_cycles(s44, 2, 3) <= load_cycles(s44, 3, 3));
        assert!(load_cycles(s44, 2, 3) <= load_cycles(s44, 2, 4));
        assert!(load_cycles(s44, 2, 3) <= load_cycles(s128, 2, 3));
        assert!(drain_cycles(s44, 1) <= drain_cycles(s44, 5));
    }

    #[test]
    fn hold_mode_chunks_match_unsplit() {
        let mode = PrecisionMode::Int8;
        let cfg = SaConfig::new(4, 4, mode);
        let k = 12;
        let a = Matrix::from_fn(3, k, |r, c| ((r * 31 + c * 17) % 251) as i64 - 125);
        let b = Matrix::from_fn(k, 4, |r, c| ((r * 13 + c * 7) % 251) as i64 - 125);
        let (want, _) = sa_matmul(&a, &b, &cfg).unwrap();

        let mut sa = SystolicArray::new(cfg);
        for chunk in 0..3 {
            let k0 = chunk * 4;
            let a_chunk = Matrix::from_fn(3, 4, |r, c| a.get(r, k0 + c));
            let b_chunk = Matrix::from_fn(4, 4, |r, c| b.get(k0 + r, c));
            sa.stream_operator(&a_chunk, &b_chunk).unwrap();
        }
        assert_eq!(sa.drain_outputs(3, 4), want);
    }

    #[test]
    fn drain_preserves_y_multiset_and_clears() {
        let cfg = SaConfig::new(3, 2, PrecisionMode::Int4);
        let mut sa = SystolicArray::new(cfg);
        let a = Matrix::from_fn(3, 2, |r, c| (r as i64 - c as i64) % 8);
        let b = Matrix::from_fn(2, 2, |r, c| (r + c) as i64 % 8);
        sa.stream_operator(&a, &b).unwrap();
        let before: Vec<AccumBundle> = sa.grid.clone().iter().map(|p| p.y_reg).collect();
        let grid = sa.drain();
        let mut drained: Vec<AccumBundle> = grid.into_iter().flatten().collect();
        let mut held = before;
        drained.sort_by_key(|b| b.0);
        held.sort_by_key(|b| b.0);
        assert_eq!(drained, held);
        assert!(sa.grid.iter().all(|p| p.y_reg == AccumBundle::ZERO));
    }

    #[test]
    fn phases_progress_monotonically() {
        let cfg = SaConfig::new(2, 2, PrecisionMode::Int8);
        let mut sa = SystolicArray::new(cfg);
        assert_eq!(sa.phase(), SaPhase::Loading);
        sa.stream_operator(&Matrix::identity(2), &Matrix::identity(2)).unwrap();
        assert_eq!(sa.phase(), SaPhase::Computing);
        sa.drain();
        assert_eq!(sa.phase(), SaPhase::Done);
    }
}
