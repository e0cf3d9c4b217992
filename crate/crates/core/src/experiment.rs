//! Experiment harness: configs, per-seed runs, weight sweeps and file formats.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::{AnnealSchedule, TracePoint};
use crate::energy::{DistortionMeasure, EnergyError, LagrangianWeights};
use crate::pipeline::{
    check_rate_lower_bounds, md_decode_central, md_decode_side, md_encode, MdParams,
    PipelineError,
};
use crate::source::{generate_markov, MarkovSourceSpec, SourceError};
use crate::stats::{Sequence, StatsError};

pub const SEQUENCE_MAGIC: &[u8; 4] = b"MDSQ";

/// Noise band for the α1 → D1 monotonicity diagnostic.
pub const MONOTONICITY_BAND: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: not a sequence file ({reason})")]
    SequenceFormat { path: PathBuf, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("empty weight grid")]
    EmptyGrid,

    #[error(transparent)]
    Source(#[from] SourceError),

    #[error(transparent)]
    Pipeline(#[from] PipelineError),

    #[error(transparent)]
    Energy(#[from] EnergyError),

    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `"hamming"` or `{"matrix": [[...], ...]}` in JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionSpec {
    #[default]
    Hamming,
    Matrix(Vec<Vec<f64>>),
}

impl DistortionSpec {
    pub fn build(&self, alphabet: usize) -> Result<DistortionMeasure> {
        match self {
            DistortionSpec::Hamming => Ok(DistortionMeasure::hamming(alphabet)),
            DistortionSpec::Matrix(rows) => {
                if rows.len() != alphabet || rows.iter().any(|r| r.len() != alphabet) {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "distortion matrix must be {alphabet}x{alphabet}"
                    )));
                }
                Ok(DistortionMeasure::new(alphabet, rows.concat())?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

fn default_theta() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// One experiment: a source draw, the code parameters, and the seeds to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: MarkovSourceSpec,
    pub k: usize,
    pub k1: usize,
    pub weights: LagrangianWeights,
    #[serde(default)]
    pub distortion: DistortionSpec,
    pub schedule: AnnealSchedule,
    /// Total Gibbs iterations `r`.
    pub iterations: u64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    pub seeds: Vec<u64>,
    /// Decode both messages after encoding and record whether the triple
    /// came back exactly.
    #[serde(default = "default_true")]
    pub verify: bool,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    /// n = 10⁴ binary Markov source with flip probability 0.2, k = 5,
    /// k1 = 1, unit weights, power-law schedule, r = 50n.
    pub fn markov_baseline(n: usize, weights: LagrangianWeights, seeds: Vec<u64>) -> Self {
        Self {
            source: MarkovSourceSpec::symmetric_binary(0.2, n, 1),
            k: 5,
            k1: 1,
            weights,
            distortion: DistortionSpec::Hamming,
            schedule: AnnealSchedule::default_power_law(),
            iterations: 50 * n as u64,
            theta: 0.5,
            seeds,
            verify: true,
            output: OutputPaths::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.weights.validate()?;
        if self.k1 > self.k {
            return Err(ExperimentError::InvalidConfig(format!(
                "k1 = {} exceeds k = {}",
                self.k1, self.k
            )));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::InvalidConfig("no seeds".into()));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(PipelineError::InvalidTheta(self.theta).into());
        }
        self.schedule
            .validate()
            .map_err(|e| ExperimentError::Pipeline(e.into()))?;
        self.distortion.build(self.source.alphabet)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    fn params(&self, seed: u64) -> Result<MdParams> {
        Ok(MdParams {
            weights: self.weights,
            distortion: self.distortion.build(self.source.alphabet)?,
            k: self.k,
            k1: self.k1,
            schedule: self.schedule,
            iterations: self.iterations,
            theta: self.theta,
            seed,
        })
    }
}

/// One row of the records CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub hk_y: f64,
    pub hk_z: f64,
    pub hkk1_w: f64,
    pub d_y: f64,
    pub d_z: f64,
    pub d_w: f64,
    pub total: f64,
    pub r1: f64,
    pub r2: f64,
    pub slack: f64,
    pub margin_r1: f64,
    pub margin_r2: f64,
    pub margin_sum: f64,
    pub rate_check: bool,
    /// Empty when verification is off.
    pub roundtrip: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub record: SeedRecord,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub runs: Vec<SeedRun>,
}

pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl ExperimentResult {
    pub fn records(&self) -> impl Iterator<Item = &SeedRecord> {
        self.runs.iter().map(|r| &r.record)
    }

    pub fn median_of(&self, f: impl Fn(&SeedRecord) -> f64) -> f64 {
        median(self.records().map(f))
    }

    pub fn write_records(&self, path: &Path) -> Result<()> {
        write_csv(path, self.records())
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let rows = self.runs.iter().flat_map(|run| {
            run.trace.iter().map(move |p| TraceRow {
                seed: run.record.seed,
                iteration: p.iteration,
                hk_y: p.energy.hk_y,
                hk_z: p.energy.hk_z,
                hkk1_w: p.energy.hkk1_w,
                d_y: p.energy.d_y,
                d_z: p.energy.d_z,
                d_w: p.energy.d_w,
                total: p.energy.total,
            })
        });
        write_csv(path, rows)
    }
}

#[derive(Serialize)]
struct TraceRow {
    seed: u64,
    iteration: u64,
    hk_y: f64,
    hk_z: f64,
    hkk1_w: f64,
    d_y: f64,
    d_z: f64,
    d_w: f64,
    total: f64,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

fn run_seed(cfg: &ExperimentConfig, x: &Sequence, seed: u64) -> Result<SeedRun> {
    let params = cfg.params(seed)?;
    let enc = md_encode(x, &params)?;
    let check = check_rate_lower_bounds(&enc.rates);
    let roundtrip = if cfg.verify {
        Some(
            md_decode_side(&enc.m1, 1)? == enc.anneal.y
                && md_decode_side(&enc.m2, 2)? == enc.anneal.z
                && md_decode_central(&enc.m1, &enc.m2)? == enc.anneal.w,
        )
    } else {
        None
    };
    let e = enc.anneal.energy;
    Ok(SeedRun {
        record: SeedRecord {
            seed,
            hk_y: e.hk_y,
            hk_z: e.hk_z,
            hkk1_w: e.hkk1_w,
            d_y: e.d_y,
            d_z: e.d_z,
            d_w: e.d_w,
            total: e.total,
            r1: enc.rates.r1,
            r2: enc.rates.r2,
            slack: enc.rates.slack,
            margin_r1: check.margin_r1,
            margin_r2: check.margin_r2,
            margin_sum: check.margin_sum,
            rate_check: check.passed,
            roundtrip,
        },
        trace: enc.anneal.trace,
    })
}

fn run_on(cfg: &ExperimentConfig, x: &Sequence) -> Result<ExperimentResult> {
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, x, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { runs })
}

/// Draws the source once and runs the full pipeline for every seed.
/// Rows come back in the config's seed order; CSVs are written when the
/// config names output paths.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let x = generate_markov(&cfg.source)?;
    let result = run_on(cfg, &x)?;
    if let Some(path) = &cfg.output.records {
        result.write_records(path)?;
    }
    if let Some(path) = &cfg.output.trace {
        result.write_trace(path)?;
    }
    Ok(result)
}

/// A base experiment and the weight vectors to run it at.
///
/// `points` lists weight vectors explicitly. Otherwise `axes` maps weight
/// names (`gamma1`, …, `alpha0`) to value lists and the grid is their
/// product over the base weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    #[serde(default)]
    pub points: Vec<LagrangianWeights>,
    #[serde(default)]
    pub axes: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier: Option<PathBuf>,
}

fn set_weight(w: &mut LagrangianWeights, name: &str, value: f64) -> Result<()> {
    let slot = match name {
        "gamma1" => &mut w.gamma1,
        "gamma2" => &mut w.gamma2,
        "gamma0" => &mut w.gamma0,
        "alpha1" => &mut w.alpha1,
        "alpha2" => &mut w.alpha2,
        "alpha0" => &mut w.alpha0,
        other => {
            return Err(ExperimentError::InvalidConfig(format!(
                "unknown weight axis {other}"
            )))
        }
    };
    *slot = value;
    Ok(())
}

impl SweepConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn grid(&self) -> Result<Vec<LagrangianWeights>> {
        if !self.points.is_empty() {
            return Ok(self.points.clone());
        }
        let mut grid = vec![self.base.weights];
        for (name, values) in &self.axes {
            let mut next = Vec::with_capacity(grid.len() * values.len());
            for w in &grid {
                for &v in values {
                    let mut w = *w;
                    set_weight(&mut w, name, v)?;
                    next.push(w);
                }
            }
            grid = next;
        }
        if grid.is_empty() {
            return Err(ExperimentError::EmptyGrid);
        }
        Ok(grid)
    }
}

/// Medians over seeds at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub point: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha0: f64,
    pub hk_y: f64,
    pub hk_z: f64,
    pub hkk1_w: f64,
    pub d_y: f64,
    pub d_z: f64,
    pub d_w: f64,
    pub total: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Median D1 between two grid points that differ only in α1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityCheck {
    pub alpha1_from: f64,
    pub alpha1_to: f64,
    pub d1_from: f64,
    pub d1_to: f64,
    /// `d1_to ≤ d1_from + band`.
    pub within_band: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<FrontierRow>,
    pub results: Vec<ExperimentResult>,
    pub monotonicity: Vec<MonotonicityCheck>,
}

impl SweepResult {
    pub fn write_frontier(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.rows)
    }
}

fn frontier_row(point: usize, w: &LagrangianWeights, r: &ExperimentResult) -> FrontierRow {
    FrontierRow {
        point,
        gamma1: w.gamma1,
        gamma2: w.gamma2,
        gamma0: w.gamma0,
        alpha1: w.alpha1,
        alpha2: w.alpha2,
        alpha0: w.alpha0,
        hk_y: r.median_of(|s| s.hk_y),
        hk_z: r.median_of(|s| s.hk_z),
        hkk1_w: r.median_of(|s| s.hkk1_w),
        d_y: r.median_of(|s| s.d_y),
        d_z: r.median_of(|s| s.d_z),
        d_w: r.median_of(|s| s.d_w),
        total: r.median_of(|s| s.total),
        r1: r.median_of(|s| s.r1),
        r2: r.median_of(|s| s.r2),
    }
}

/// Groups rows sharing every weight but α1 and compares consecutive α1 values.
pub fn alpha1_monotonicity(rows: &[FrontierRow], band: f64) -> Vec<MonotonicityCheck> {
    let key = |r: &FrontierRow| {
        [r.gamma1, r.gamma2, r.gamma0, r.alpha2, r.alpha0].map(f64::to_bits)
    };
    let mut groups: BTreeMap<_, Vec<&FrontierRow>> = BTreeMap::new();
    for r in rows {
        groups.entry(key(r)).or_default().push(r);
    }
    let mut out = Vec::new();
    for mut group in groups.into_values() {
        group.sort_by(|a, b| a.alpha1.total_cmp(&b.alpha1));
        for pair in group.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.alpha1 == b.alpha1 {
                continue;
            }
            out.push(MonotonicityCheck {
                alpha1_from: a.alpha1,
                alpha1_to: b.alpha1,
                d1_from: a.d_y,
                d1_to: b.d_y,
                within_band: b.d_y <= a.d_y + band,
            });
        }
    }
    out
}

/// Runs the base experiment at every grid point on one shared source draw.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let grid = cfg.grid()?;
    cfg.base.validate()?;
    for w in &grid {
        w.validate()?;
    }
    let x = generate_markov(&cfg.base.source)?;
    let results = grid
        .par_iter()
        .map(|w| {
            let point = ExperimentConfig {
                weights: *w,
                ..cfg.base.clone()
            };
            run_on(&point, &x)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<FrontierRow> = grid
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (w, r))| frontier_row(i, w, r))
        .collect();
    let monotonicity = alpha1_monotonicity(&rows, MONOTONICITY_BAND);
    let result = SweepResult {
        rows,
        results,
        monotonicity,
    };
    if let Some(path) = &cfg.frontier {
        result.write_frontier(path)?;
    }
    Ok(result)
}

/// `"MDSQ" | n u32 LE | A u8 | one byte per symbol`.
pub fn sequence_to_bytes(s: &Sequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + s.len());
    out.extend_from_slice(SEQUENCE_MAGIC);
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.push(s.alphabet_size() as u8);
    out.extend_from_slice(s.symbols());
    out
}

pub fn sequence_from_bytes(bytes: &[u8]) -> std::result::Result<Sequence, String> {
    if bytes.len() < 9 || &bytes[..4] != SEQUENCE_MAGIC {
        return Err("bad magic".into());
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let alphabet = bytes[8] as usize;
    if bytes.len() - 9 != n {
        return Err(format!("header says {n} symbols, file has {}", bytes.len() - 9));
    }
    Sequence::new(bytes[9..].to_vec(), alphabet).map_err(|e| e.to_string())
}

pub fn write_sequence(path: &Path, s: &Sequence) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&sequence_to_bytes(s)).map_err(io_err(path))
}

pub fn read_sequence(path: &Path) -> Result<Sequence> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    sequence_from_bytes(&bytes).map_err(|reason| ExperimentError::SequenceFormat {
        path: path.to_path_buf(),
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seeds: Vec<u64>) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::markov_baseline(400, LagrangianWeights::unit(), seeds);
        cfg.k = 2;
        cfg.k1 = 1;
        cfg.iterations = 2 * 400;
        cfg
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median([3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median([4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median([]).is_nan());
    }

    #[test]
    fn config_json_roundtrip() {
        let mut cfg = small(vec![1, 2]);
        cfg.distortion = DistortionSpec::Matrix(vec![vec![0.0, 1.0], vec![2.0, 0.0]]);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), cfg);
        let minimal = r#"{
            "source": {"alphabet": 2, "transition": [[0.8, 0.2], [0.2, 0.8]], "n": 100, "seed": 3},
            "k": 2, "k1": 0,
            "weights": {"gamma1": 1, "gamma2": 1, "gamma0": 1, "alpha1": 1, "alpha2": 1, "alpha0": 1},
            "schedule": {"kind": "power_law", "exponent": 0.1},
            "iterations": 100,
            "seeds": [7]
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!(cfg.theta, 0.5);
        assert_eq!(cfg.distortion, DistortionSpec::Hamming);
        assert!(cfg.verify);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small(vec![1]);
        cfg.k1 = 3;
        assert!(matches!(cfg.validate(), Err(ExperimentError::InvalidConfig(_))));
        let mut cfg = small(vec![]);
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = small(vec![1]);
        cfg.distortion = DistortionSpec::Matrix(vec![vec![0.0]]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_iterations_keep_the_source() {
        let mut cfg = small(vec![1, 2, 3]);
        cfg.iterations = 0;
        let x = generate_markov(&cfg.source).unwrap();
        let hk = crate::stats::CountMatrix::build(&x, cfg.k).unwrap().conditional_entropy();
        let result = run_experiment(&cfg).unwrap();
        for r in result.records() {
            assert_eq!((r.d_y, r.d_z, r.d_w), (0.0, 0.0, 0.0));
            assert!((r.total - 2.0 * hk).abs() < 1e-12);
            assert_eq!(r.roundtrip, Some(true));
        }
    }

    #[test]
    fn seeds_keep_config_order() {
        let result = run_experiment(&small(vec![5, 1, 3])).unwrap();
        let seeds: Vec<u64> = result.records().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![5, 1, 3]);
        assert!(result.records().all(|r| r.rate_check && r.roundtrip == Some(true)));
    }

    #[test]
    fn grid_expansion() {
        let mut cfg = SweepConfig {
            base: small(vec![1]),
            points: vec![],
            axes: BTreeMap::new(),
            frontier: None,
        };
        assert_eq!(cfg.grid().unwrap(), vec![LagrangianWeights::unit()]);
        cfg.axes.insert("alpha1".into(), vec![1.0, 2.0, 4.0]);
        cfg.axes.insert("gamma0".into(), vec![0.5, 1.0]);
        let grid = cfg.grid().unwrap();
        assert_eq!(grid.len(), 6);
        assert!(grid.iter().any(|w| w.alpha1 == 4.0 && w.gamma0 == 0.5));
        cfg.axes.insert("alpha1".into(), vec![]);
        assert!(matches!(cfg.grid(), Err(ExperimentError::EmptyGrid)));
        cfg.axes.clear();
        cfg.axes.insert("beta".into(), vec![1.0]);
        assert!(cfg.grid().is_err());
    }

    #[test]
    fn single_point_sweep_matches_experiment() {
        let base = small(vec![2, 4]);
        let direct = run_experiment(&base).unwrap();
        let swept = sweep(&SweepConfig {
            base,
            points: vec![],
            axes: BTreeMap::new(),
            frontier: None,
        })
        .unwrap();
        assert_eq!(swept.results, vec![direct]);
        assert!(swept.monotonicity.is_empty());
    }

    #[test]
    fn zero_weights_give_zero_energy() {
        let mut base = small(vec![1, 2]);
        base.weights = LagrangianWeights::uniform(0.0);
        let result = run_experiment(&base).unwrap();
        assert!(result.records().all(|r| r.total == 0.0));
    }

    #[test]
    fn monotonicity_groups_by_other_weights() {
        let row = |alpha1: f64, alpha2: f64, d_y: f64| FrontierRow {
            point: 0,
            gamma1: 1.0,
            gamma2: 1.0,
            gamma0: 1.0,
            alpha1,
            alpha2,
            alpha0: 1.0,
            hk_y: 0.0,
            hk_z: 0.0,
            hkk1_w: 0.0,
            d_y,
            d_z: 0.0,
            d_w: 0.0,
            total: 0.0,
            r1: 0.0,
            r2: 0.0,
        };
        let rows = [
            row(4.0, 1.0, 0.02),
            row(1.0, 1.0, 0.05),
            row(2.0, 1.0, 0.04),
            row(1.0, 2.0, 0.01),
            row(2.0, 2.0, 0.03),
        ];
        let checks = alpha1_monotonicity(&rows, 0.01);
        assert_eq!(checks.len(), 3);
        assert_eq!(checks.iter().filter(|c| !c.within_band).count(), 1);
    }

    #[test]
    fn sequence_file_roundtrip() {
        let s = Sequence::from_digits("0120012", 3).unwrap();
        let bytes = sequence_to_bytes(&s);
        assert_eq!(&bytes[..4], b"MDSQ");
        assert_eq!(sequence_from_bytes(&bytes).unwrap(), s);
        assert!(sequence_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(sequence_from_bytes(&bad).is_err());
    }
}
