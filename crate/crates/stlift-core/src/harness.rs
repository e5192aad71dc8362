//! Experiment runner: seeded signal generation, spectrogram noise injection,
//! the noiseless-recovery and noisy-approximation sweeps, and CSV/JSON
//! emission including per-trial overlay data.

use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::griffin_lim::{griffin_lim_multi, GlConfig};
use crate::solver::{solve_from_power, SolverConfig};
use crate::stft::{
    check_cola, magnitude_spec, make_hann, objective, power_spec, stft, PowerSpectrogram, Signal,
    StftConfig,
};

/// Threshold on the magnitude-mismatch objective below which a noiseless
/// trial counts as recovered.
pub const RECOVERY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Noiseless,
    Noisy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GriffinLim,
    Stlift,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::GriffinLim => write!(f, "griffin-lim"),
            Method::Stlift => write!(f, "stlift"),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "griffin-lim" | "gl" => Ok(Method::GriffinLim),
            "stlift" => Ok(Method::Stlift),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

/// All COLA hop sizes for a Hann window of length `m`, largest first: the
/// divisors of `m-1` not exceeding `(m-1)/2`.
pub fn cola_hops(m: usize) -> Vec<usize> {
    let period = m - 1;
    let mut hops: Vec<usize> = (1..=period / 2).filter(|&r| period.is_multiple_of(r)).collect();
    hops.reverse();
    hops
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    /// (window length, hop) cells to sweep.
    pub cells: Vec<(usize, usize)>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    pub noise_sigma: f64,
    pub methods: Vec<Method>,
    #[serde(default = "default_gl_iters")]
    pub gl_max_iters: usize,
    #[serde(default = "default_gl_inits")]
    pub gl_inits: usize,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Trial indices for which overlay (original vs. reconstruction) data is emitted.
    #[serde(default)]
    pub overlay_trials: Vec<usize>,
}

fn default_gl_iters() -> usize {
    1000
}

fn default_gl_inits() -> usize {
    10
}

/// Serializable subset of [`SolverConfig`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSettings {
    pub step: Option<f64>,
    pub max_iters: usize,
    pub lambda_decay: f64,
    pub rank1_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            step: None,
            max_iters: d.max_iters,
            lambda_decay: d.lambda_decay,
            rank1_tol: d.rank1_tol,
        }
    }
}

impl SolverSettings {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            step: match self.step {
                Some(t) => crate::solver::StepSize::Fixed(t),
                None => crate::solver::StepSize::Auto,
            },
            max_iters: self.max_iters,
            lambda_decay: self.lambda_decay,
            rank1_tol: self.rank1_tol,
            ..SolverConfig::default()
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidSpec("trials must be at least 1".into()));
        }
        if self.cells.is_empty() {
            return Err(Error::InvalidSpec("no (window, hop) cells given".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidSpec("no methods selected".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidSpec("noise sigma must be nonnegative".into()));
        }
        for &(m, r) in &self.cells {
            if m > self.n {
                return Err(Error::InvalidSpec(format!(
                    "window length {m} exceeds signal length {}",
                    self.n
                )));
            }
            let window = make_hann(m)?;
            if !check_cola(&window, r).holds {
                return Err(Error::InvalidSpec(format!(
                    "window {m} with hop {r} is not constant overlap-add"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub method: Method,
    pub m: usize,
    pub r: usize,
    /// Magnitude-mismatch objective of the estimate against the target.
    pub objective_value: f64,
    /// Noiseless mode: objective below [`RECOVERY_THRESHOLD`].
    pub recovered: Option<bool>,
    /// Noisy mode: 100 * objective / total target power.
    pub relative_error_pct: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub method: Method,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
}

/// (index, original, reconstruction) triples for one trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlayData {
    pub m: usize,
    pub r: usize,
    pub method: Method,
    pub trial_index: usize,
    pub original: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
    pub overlays: Vec<OverlayData>,
}

/// `count` signals of length `n` with i.i.d. standard normal entries; signal
/// `i` is drawn from RNG stream `(seed, i)` and does not depend on `count`.
pub fn gen_signals(n: usize, count: usize, seed: u64) -> Vec<Signal> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            Signal::new((0..n).map(|_| rng.sample(StandardNormal)).collect())
                .expect("normal draws are finite")
        })
        .collect()
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every entry, clamping negatives to zero.
pub fn add_noise(p: &PowerSpectrogram, sigma: f64, seed: u64) -> PowerSpectrogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = p.clone();
    for v in out.values_mut() {
        let noise: f64 = rng.sample(StandardNormal);
        *v = (*v + sigma * noise).max(0.0);
    }
    out
}

/// Noise stream for a (cell, trial) pair of a sweep; exposed so external
/// evaluations can reconstruct the exact corrupted targets of a run.
pub fn trial_noise_seed(seed: u64, cell_index: usize, trial: usize) -> u64 {
    derive_seed(seed, cell_index as u64, trial as u64, 2)
}

// splitmix64; derives independent sub-seeds from (seed, cell, trial, salt).
fn derive_seed(seed: u64, cell: u64, trial: u64, salt: u64) -> u64 {
    let mut z = seed;
    for w in [cell, trial, salt] {
        z = z.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(w);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^= z >> 31;
    }
    z
}

pub fn run_noiseless(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    if spec.mode != Mode::Noiseless {
        return Err(Error::InvalidSpec("expected noiseless mode".into()));
    }
    run(spec)
}

pub fn run_noisy(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    if spec.mode != Mode::Noisy {
        return Err(Error::InvalidSpec("expected noisy mode".into()));
    }
    run(spec)
}

struct TrialOutput {
    records: Vec<TrialRecord>,
    overlays: Vec<OverlayData>,
}

/// Runs the full sweep. Trials execute in parallel; every trial owns derived
/// RNG streams and results are emitted in (cell, trial, method) order, so the
/// output is independent of scheduling.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentResults> {
    spec.validate()?;
    let signals = gen_signals(spec.n, spec.trials, spec.seed);

    let tasks: Vec<(usize, usize)> = (0..spec.cells.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();

    let outputs: Vec<TrialOutput> = tasks
        .par_iter()
        .map(|&(cell_idx, trial)| run_trial(spec, cell_idx, trial, &signals[trial]))
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut overlays = Vec::new();
    for out in outputs {
        records.extend(out.records);
        overlays.extend(out.overlays);
    }

    let rows = summarize(spec, &records);
    Ok(ExperimentResults {
        rows,
        records,
        overlays,
    })
}

fn run_trial(
    spec: &ExperimentSpec,
    cell_idx: usize,
    trial: usize,
    signal: &Signal,
) -> Result<TrialOutput> {
    let (m, r) = spec.cells[cell_idx];
    let cfg = StftConfig::hann(m, r, spec.n)?;
    let true_power = power_spec(&stft(signal, &cfg)?);
    let (target_power, noisy) = match spec.mode {
        Mode::Noiseless => (true_power, false),
        Mode::Noisy => (
            add_noise(
                &true_power,
                spec.noise_sigma,
                derive_seed(spec.seed, cell_idx as u64, trial as u64, 2),
            ),
            true,
        ),
    };
    let target_mag = target_power.sqrt();
    let total_power = target_power.total();

    let mut records = Vec::new();
    let mut overlays = Vec::new();
    for &method in &spec.methods {
        let start = Instant::now();
        let estimate = match method {
            Method::GriffinLim => {
                let gl_cfg = GlConfig {
                    max_iters: spec.gl_max_iters,
                    n_inits: spec.gl_inits,
                    rng_seed: derive_seed(spec.seed, cell_idx as u64, trial as u64, 1),
                    ..GlConfig::default()
                };
                griffin_lim_multi(&target_mag, &cfg, &gl_cfg).map(|res| res.signal)
            }
            Method::Stlift => {
                solve_from_power(&target_power, &cfg, &spec.solver.to_config()).map(|res| res.signal)
            }
        };
        let wall_time_s = start.elapsed().as_secs_f64();
        // A solver failure counts against the method, never aborts the sweep.
        let objective_value = match &estimate {
            Ok(est) => objective(&magnitude_spec(&stft(est, &cfg)?), &target_mag)?,
            Err(_) => f64::INFINITY,
        };
        records.push(TrialRecord {
            trial_index: trial,
            method,
            m,
            r,
            objective_value,
            recovered: (!noisy).then_some(objective_value < RECOVERY_THRESHOLD),
            relative_error_pct: noisy.then(|| {
                if total_power > 0.0 {
                    100.0 * objective_value / total_power
                } else {
                    0.0
                }
            }),
            wall_time_s,
        });
        if spec.overlay_trials.contains(&trial) {
            if let Ok(est) = estimate {
                overlays.push(OverlayData {
                    m,
                    r,
                    method,
                    trial_index: trial,
                    original: signal.samples().to_vec(),
                    estimate: est.into_samples(),
                });
            }
        }
    }
    Ok(TrialOutput { records, overlays })
}

/// Lower-middle median: for even counts the element at index `(len-1)/2` of
/// the sorted values.
pub fn median_lower(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    sorted[(sorted.len() - 1) / 2]
}

fn summarize(spec: &ExperimentSpec, records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &(m, r) in &spec.cells {
        for &method in &spec.methods {
            let cell: Vec<&TrialRecord> = records
                .iter()
                .filter(|rec| rec.m == m && rec.r == r && rec.method == method)
                .collect();
            let (metric, value) = match spec.mode {
                Mode::Noiseless => {
                    let hits = cell.iter().filter(|rec| rec.recovered == Some(true)).count();
                    (
                        "accuracy_pct".to_string(),
                        100.0 * hits as f64 / cell.len() as f64,
                    )
                }
                Mode::Noisy => {
                    let errs: Vec<f64> = cell
                        .iter()
                        .map(|rec| rec.relative_error_pct.unwrap_or(f64::INFINITY))
                        .collect();
                    ("median_rel_err_pct".to_string(), median_lower(&errs))
                }
            };
            rows.push(SummaryRow {
                n: spec.n,
                m,
                r,
                method,
                metric,
                value,
                trials: cell.len(),
            });
        }
    }
    rows
}

/// Renders summary rows as CSV with a provenance comment line.
pub fn rows_to_csv(spec: &ExperimentSpec, rows: &[SummaryRow]) -> String {
    let mut out = format!(
        "# mode={} seed={} trials={}\n",
        match spec.mode {
            Mode::Noiseless => "noiseless",
            Mode::Noisy => "noisy",
        },
        spec.seed,
        spec.trials
    );
    out.push_str("n,M,R,method,metric,value,trials\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.n, row.m, row.r, row.method, row.metric, row.value, row.trials
        ));
    }
    out
}

/// Parses CSV produced by [`rows_to_csv`]; comment lines are skipped.
pub fn rows_from_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for line in text.lines() {
        if line.starts_with('#') || line.starts_with("n,") || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                path: "<csv>".into(),
                reason: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let parse_err = |reason: String| Error::Parse {
            path: "<csv>".into(),
            reason,
        };
        rows.push(SummaryRow {
            n: fields[0].parse().map_err(|e| parse_err(format!("n: {e}")))?,
            m: fields[1].parse().map_err(|e| parse_err(format!("M: {e}")))?,
            r: fields[2].parse().map_err(|e| parse_err(format!("R: {e}")))?,
            method: fields[3].parse().map_err(parse_err)?,
            metric: fields[4].to_string(),
            value: fields[5]
                .parse()
                .map_err(|e| parse_err(format!("value: {e}")))?,
            trials: fields[6]
                .parse()
                .map_err(|e| parse_err(format!("trials: {e}")))?,
        });
    }
    Ok(rows)
}

/// Overlay triples as CSV.
pub fn overlay_to_csv(overlay: &OverlayData) -> String {
    let mut out = String::from("index,original,reconstructed\n");
    for (i, (o, e)) in overlay.original.iter().zip(&overlay.estimate).enumerate() {
        out.push_str(&format!("{i},{o},{e}\n"));
    }
    out
}

/// Writes the summary CSV to `<path>`, per-trial records to
/// `<path stem>_trials.json`, and one overlay CSV per collected overlay.
pub fn emit_results(
    spec: &ExperimentSpec,
    results: &ExperimentResults,
    path: &std::path::Path,
) -> Result<()> {
    let io_err = |p: &std::path::Path, e: std::io::Error| Error::Io {
        path: p.display().to_string(),
        source: e,
    };
    std::fs::write(path, rows_to_csv(spec, &results.rows)).map_err(|e| io_err(path, e))?;

    let stem = path.with_extension("");
    let trials_path = stem.with_file_name(format!(
        "{}_trials.json",
        stem.file_name().unwrap_or_default().to_string_lossy()
    ));
    let json = serde_json::to_string_pretty(&results.records).map_err(|e| Error::Json {
        path: trials_path.display().to_string(),
        source: e,
    })?;
    std::fs::write(&trials_path, json).map_err(|e| io_err(&trials_path, e))?;

    for overlay in &results.overlays {
        let overlay_path = stem.with_file_name(format!(
            "{}_overlay_M{}_R{}_t{}_{}.csv",
            stem.file_name().unwrap_or_default().to_string_lossy(),
            overlay.m,
            overlay.r,
            overlay.trial_index,
            overlay.method
        ));
        std::fs::write(&overlay_path, overlay_to_csv(overlay))
            .map_err(|e| io_err(&overlay_path, e))?;
    }
    Ok(())
}
