//! Analytical throughput, baseline comparison, and a roofline bound.
//!
//! Peak throughput follows directly from array geometry, lane count, and
//! frequency. Baseline systems are described by constants in a plain-text
//! `key = value` file (see `data/baselines.conf`), never re-derived from
//! their microarchitecture.

use crate::arith::PrecisionMode;
use crate::systolic::{drain_cycles, load_cycles, ArrayShape};
use crate::workload::GemmSpec;
use std::collections::BTreeMap;
use thiserror::Error;

/// Array configuration a throughput figure refers to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputSpec {
    pub shape: ArrayShape,
    pub freq_hz: f64,
    pub mode: PrecisionMode,
}

impl ThroughputSpec {
    pub fn new(rows: usize, cols: usize, freq_hz: f64, mode: PrecisionMode) -> ThroughputSpec {
        assert!(freq_hz > 0.0);
        ThroughputSpec { shape: ArrayShape::new(rows, cols), freq_hz, mode }
    }
}

/// Peak GOPS: every PE retires `lanes` MACs per cycle, one MAC counts as
/// two operations.
pub fn theoretical_throughput(spec: &ThroughputSpec) -> f64 {
    let macs_per_cycle = (spec.shape.rows * spec.shape.cols * spec.mode.lanes()) as f64;
    macs_per_cycle * 2.0 * spec.freq_hz / 1e9
}

/// Instruction and cycle counts plus the modeled work of one run.
///
/// Total cycles are the sum of the three phases; GOPS counts one MAC as two
/// operations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleReport {
    pub setup_instructions: u64,
    pub compute_instructions: u64,
    pub setup_cycles: u64,
    pub load_cycles: u64,
    pub store_cycles: u64,
    pub macs: u64,
    /// (baseline name, speedup) pairs attached by comparison passes.
    pub comparisons: Vec<(String, f64)>,
}

impl CycleReport {
    pub fn total_instructions(&self) -> u64 {
        self.setup_instructions + self.compute_instructions
    }

    pub fn compute_cycles(&self) -> u64 {
        self.load_cycles + self.store_cycles
    }

    pub fn total_cycles(&self) -> u64 {
        self.setup_cycles + self.load_cycles + self.store_cycles
    }

    pub fn gops(&self, freq_hz: f64) -> f64 {
        if self.total_cycles() == 0 {
            return 0.0;
        }
        2.0 * self.macs as f64 * freq_hz / self.total_cycles() as f64 / 1e9
    }
}

/// Fixed instruction/cycle constants of one baseline scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScenarioCost {
    pub setup_instructions: u64,
    pub setup_cycles: u64,
    pub compute_instructions: u64,
    pub compute_cycles: u64,
}

impl ScenarioCost {
    pub fn total_instructions(&self) -> u64 {
        self.setup_instructions + self.compute_instructions
    }

    pub fn total_cycles(&self) -> u64 {
        self.setup_cycles + self.compute_cycles
    }
}

/// A named baseline system: per-scenario cost constants and theoretical
/// peak GOPS per precision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineModel {
    pub name: String,
    pub scenarios: BTreeMap<String, ScenarioCost>,
    pub peak_gops: BTreeMap<PrecisionMode, f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BaselineSet {
    pub models: BTreeMap<String, BaselineModel>,
}

#[derive(Debug, Error)]
pub enum PerfError {
    #[error("baseline config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("baseline {baseline} has no scenario {scenario:?}")]
    UnknownScenario { baseline: String, scenario: String },
    #[error("unknown baseline {0:?}")]
    UnknownBaseline(String),
}

impl BaselineSet {
    /// Constants shipped with the repository.
    pub fn builtin() -> BaselineSet {
        BaselineSet::parse(include_str!("../../../data/baselines.conf"))
            .expect("shipped baseline config must parse")
    }

    pub fn parse(text: &str) -> Result<BaselineSet, PerfError> {
        let mut set = BaselineSet::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| PerfError::Config {
                line,
                msg: "expected key = value".into(),
            })?;
            let path: Vec<&str> = key.trim().split('.').collect();
            let value = value.trim();
            let bad = |msg: &str| PerfError::Config { line, msg: msg.into() };
            match path.as_slice() {
                [model, "scenario", scenario, field] => {
                    let n: u64 = value.parse().map_err(|_| bad("expected an integer"))?;
                    let entry = set
                        .models
                        .entry(model.to_string())
                        .or_insert_with(|| BaselineModel {
                            name: model.to_string(),
                            ..BaselineModel::default()
                        })
                        .scenarios
                        .entry(scenario.to_string())
                        .or_default();
                    match *field {
                        "setup_instructions" => entry.setup_instructions = n,
                        "setup_cycles" => entry.setup_cycles = n,
                        "compute_instructions" => entry.compute_instructions = n,
                        "compute_cycles" => entry.compute_cycles = n,
                        _ => return Err(bad("unknown scenario field")),
                    }
                }
                [model, "peak", mode] => {
                    let mode = PrecisionMode::parse(mode).ok_or_else(|| bad("unknown precision"))?;
                    let gops: f64 = value.parse().map_err(|_| bad("expected a number"))?;
                    set.models
                        .entry(model.to_string())
                        .or_insert_with(|| BaselineModel {
                            name: model.to_string(),
                            ..BaselineModel::default()
                        })
                        .peak_gops
                        .insert(mode, gops);
                }
                _ => return Err(bad("unknown key shape")),
            }
        }
        Ok(set)
    }

    pub fn get(&self, name: &str) -> Result<&BaselineModel, PerfError> {
        self.models.get(name).ok_or_else(|| PerfError::UnknownBaseline(name.to_string()))
    }
}

/// Total-cycle speedup of `report` over a baseline scenario doing the same
/// work.
pub fn compare_to_baseline(
    report: &CycleReport,
    baseline: &BaselineModel,
    scenario: &str,
) -> Result<f64, PerfError> {
    let cost = baseline.scenarios.get(scenario).ok_or_else(|| PerfError::UnknownScenario {
        baseline: baseline.name.clone(),
        scenario: scenario.to_string(),
    })?;
    Ok(cost.total_cycles() as f64 / report.total_cycles() as f64)
}

/// Modeled compute cycles of a GEMM tiled onto the array: each output tile
/// is one operator load, all sharing one skew fill.
pub fn gemm_compute_cycles(gemm: &GemmSpec, shape: ArrayShape) -> u64 {
    let tiles = gemm.m.div_ceil(shape.rows) * gemm.n.div_ceil(shape.cols);
    let k_words = gemm.k.div_ceil(gemm.mode.lanes());
    load_cycles(shape, tiles, k_words) + drain_cycles(shape, tiles)
}

/// Words moved for a tiled GEMM: operand words per tile pass (activations
/// re-read once per row tile, weights once per column tile) plus packed
/// result words.
pub fn gemm_traffic_words(gemm: &GemmSpec, shape: ArrayShape) -> u64 {
    let k_words = gemm.k.div_ceil(gemm.mode.lanes());
    let result_lanes = gemm.mode.result_lanes_per_word();
    let mut words = 0u64;
    let mut r0 = 0;
    while r0 < gemm.m {
        let mt = shape.rows.min(gemm.m - r0);
        let mut c0 = 0;
        while c0 < gemm.n {
            let nt = shape.cols.min(gemm.n - c0);
            words += ((mt + nt) * k_words) as u64;
            words += (mt * nt).div_ceil(result_lanes) as u64;
            c0 += nt;
        }
        r0 += mt;
    }
    words
}

/// Roofline cycle bound: the slower of the compute model and the word
/// traffic at the given bus width. An infinite bus reduces to the compute
/// bound.
pub fn roofline_cycles(gemm: &GemmSpec, shape: ArrayShape, bus_words_per_cycle: f64) -> f64 {
    assert!(bus_words_per_cycle > 0.0);
    let compute = gemm_compute_cycles(gemm, shape) as f64;
    let traffic = gemm_traffic_words(gemm, shape) as f64;
    compute.max(traffic / bus_words_per_cycle)
}
