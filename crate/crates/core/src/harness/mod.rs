//! Monte Carlo experiments: configuration, seeded replication, aggregation,
//! CSV persistence and SVG plots.
//!
//! Trial `i` uses seed `seed + i`. A generated environment without a fixed
//! seed is drawn from that seed; the policy runs on ChaCha8 stream 1 of the
//! same seed, so the two never share random numbers.

pub mod config;
pub mod csvio;
pub mod plot;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use serde::Serialize;

pub use config::{Algorithm, Constants, EnvironmentConfig, ExperimentConfig, GeneratorParams};
use csvio::{field, read_table_file, write_table_file, Table};

use crate::bandit::run_single_index;
use crate::baseline::run_smooth_bandit;
use crate::env::{EnvironmentSpec, LabeledSample};
use crate::lpe::bandwidth_hn;
use crate::sireg::{fit_sireg, RewardEstimator, SiregConfig};
use crate::smooth::{estimate_smoothness, run_adaptive, SmoothnessEstimate};
use crate::trace::RegretTrace;
use crate::{Error, Result, SimRng};

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed.wrapping_add(trial as u64)
}

/// Policy RNG for a trial seed.
pub fn policy_rng(trial_seed: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(trial_seed);
    rng.set_stream(1);
    rng
}

#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub trial: usize,
    pub seed: u64,
    pub env: EnvironmentSpec,
    pub trace: RegretTrace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub mean_cum_regret: f64,
    pub std_cum_regret: f64,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSummaryRow {
    pub epoch: usize,
    pub arm: usize,
    pub mean_index_error: f64,
    pub trials: usize,
    pub algorithm: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialOutput>,
    pub summary: Vec<SummaryRow>,
    pub index_summary: Vec<IndexSummaryRow>,
}

impl ExperimentResult {
    pub fn terminal_mean_regret(&self) -> f64 {
        self.summary.last().map_or(0.0, |r| r.mean_cum_regret)
    }
}

/// Runs one trial of `config`.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<TrialOutput> {
    let seed = trial_seed(config.seed, trial);
    let env = config.environment.for_trial(seed)?;
    let mut rng = policy_rng(seed);
    let n = config.horizon;
    let trace = match config.algorithm {
        Algorithm::SingleIndex => run_single_index(&env, n, &config.bandit(), &mut rng)?,
        Algorithm::SmoothBandit => run_smooth_bandit(&env, n, &config.smooth_bandit(), &mut rng)?,
        Algorithm::Adaptive => run_adaptive(&env, n, &config.adaptive(), &mut rng)?,
    };
    Ok(TrialOutput {
        trial,
        seed,
        env,
        trace,
    })
}

fn map_trials<T: Send>(trials: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(f).collect()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let trials = map_trials(config.trials, |i| run_trial(config, i))?;
    let name = config.algorithm.name();
    let summary = summarize(&trials, config.horizon, config.checkpoint_stride, name);
    let index_summary = summarize_index(&trials, name);
    Ok(ExperimentResult {
        config: config.clone(),
        trials,
        summary,
        index_summary,
    })
}

/// Rounds `stride, 2 stride, ...` plus the horizon.
pub fn checkpoints(horizon: usize, stride: usize) -> Vec<usize> {
    let mut ts: Vec<usize> = (1..=horizon / stride).map(|i| i * stride).collect();
    if horizon > 0 && ts.last() != Some(&horizon) {
        ts.push(horizon);
    }
    ts
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(trials: &[TrialOutput], horizon: usize, stride: usize, algorithm: &str) -> Vec<SummaryRow> {
    checkpoints(horizon, stride)
        .into_iter()
        .map(|t| {
            let values: Vec<f64> = trials.iter().map(|tr| tr.trace.cumulative_at(t)).collect();
            let (mean, std) = mean_std(&values);
            SummaryRow {
                t,
                mean_cum_regret: mean,
                std_cum_regret: std,
                algorithm: algorithm.to_string(),
            }
        })
        .collect()
}

/// Mean index error per `(epoch, arm)` over the trials that fitted it.
pub fn summarize_index(trials: &[TrialOutput], algorithm: &str) -> Vec<IndexSummaryRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for tr in trials {
        for e in &tr.trace.epochs {
            groups.entry((e.epoch, e.arm)).or_default().push(e.index_error);
        }
    }
    groups
        .into_iter()
        .map(|((epoch, arm), errs)| IndexSummaryRow {
            epoch,
            arm,
            mean_index_error: mean_std(&errs).0,
            trials: errs.len(),
            algorithm: algorithm.to_string(),
        })
        .collect()
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", out.display()))))
}

/// Writes `config.json`, `regret_trace.csv` (checkpoint rows),
/// `index_diagnostics.csv`, `summary.csv`, `index_summary.csv` and, for the
/// adaptive policy, `smoothness.csv`.
pub fn write_experiment(result: &ExperimentResult, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let config = &result.config;
    std::fs::write(out.join("config.json"), config.to_json() + "\n")?;
    let marks = checkpoints(config.horizon, config.checkpoint_stride);

    let trace_rows = result.trials.iter().flat_map(|tr| {
        marks.iter().map(move |&t| {
            let r = &tr.trace.rows[t - 1];
            vec![
                tr.trial.to_string(),
                r.t.to_string(),
                r.arm.to_string(),
                r.inst_regret.to_string(),
                r.cum_regret.to_string(),
            ]
        })
    });
    write_table_file(&out.join("regret_trace.csv"), Table::RegretTrace, trace_rows)?;

    let diag_rows = result.trials.iter().flat_map(|tr| {
        tr.trace.epochs.iter().map(move |e| {
            vec![
                tr.trial.to_string(),
                e.epoch.to_string(),
                e.arm.to_string(),
                e.index_error.to_string(),
                e.objective.to_string(),
            ]
        })
    });
    write_table_file(&out.join("index_diagnostics.csv"), Table::IndexDiagnostics, diag_rows)?;
    write_summary(&result.summary, &out.join("summary.csv"))?;
    write_index_summary(&result.index_summary, &out.join("index_summary.csv"))?;

    if config.algorithm == Algorithm::Adaptive {
        let estimates: Vec<(usize, &SmoothnessEstimate)> = result
            .trials
            .iter()
            .filter_map(|tr| tr.trace.smoothness.as_ref().map(|s| (tr.trial, s)))
            .collect();
        write_smoothness(&estimates, out)?;
    }
    Ok(())
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_table_file(
        path,
        Table::Summary,
        rows.iter().map(|r| {
            vec![
                r.t.to_string(),
                r.mean_cum_regret.to_string(),
                r.std_cum_regret.to_string(),
                r.algorithm.clone(),
            ]
        }),
    )
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    read_table_file(path, Table::Summary)?
        .iter()
        .map(|rec| {
            Ok(SummaryRow {
                t: field(rec, 0, "t")?,
                mean_cum_regret: field(rec, 1, "mean_cum_regret")?,
                std_cum_regret: field(rec, 2, "std_cum_regret")?,
                algorithm: field(rec, 3, "algorithm")?,
            })
        })
        .collect()
}

pub fn write_index_summary(rows: &[IndexSummaryRow], path: &Path) -> Result<()> {
    write_table_file(
        path,
        Table::IndexSummary,
        rows.iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.arm.to_string(),
                r.mean_index_error.to_string(),
                r.trials.to_string(),
                r.algorithm.clone(),
            ]
        }),
    )
}

pub fn read_index_summary(path: &Path) -> Result<Vec<IndexSummaryRow>> {
    read_table_file(path, Table::IndexSummary)?
        .iter()
        .map(|rec| {
            Ok(IndexSummaryRow {
                epoch: field(rec, 0, "epoch")?,
                arm: field(rec, 1, "arm")?,
                mean_index_error: field(rec, 2, "mean_index_error")?,
                trials: field(rec, 3, "trials")?,
                algorithm: field(rec, 4, "algorithm")?,
            })
        })
        .collect()
}

/// `(trial, t, cum_regret)` rows of a regret trace file.
pub fn read_regret_trace(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    read_table_file(path, Table::RegretTrace)?
        .iter()
        .map(|rec| Ok((field(rec, 0, "trial")?, field(rec, 1, "t")?, field(rec, 4, "cum_regret")?)))
        .collect()
}

fn write_smoothness(estimates: &[(usize, &SmoothnessEstimate)], out: &Path) -> Result<()> {
    write_table_file(
        &out.join("smoothness.csv"),
        Table::Smoothness,
        estimates.iter().map(|(trial, s)| {
            vec![
                trial.to_string(),
                s.beta_est.to_string(),
                s.beta_raw.to_string(),
                s.b_max.to_string(),
                s.l1.to_string(),
                s.l2.to_string(),
                s.l3.to_string(),
                s.n0.to_string(),
            ]
        }),
    )?;
    write_table_file(
        &out.join("smoothness_bins.csv"),
        Table::SmoothnessBins,
        estimates.iter().flat_map(|(trial, s)| {
            s.bins.iter().map(move |b| {
                vec![
                    trial.to_string(),
                    b.arm.to_string(),
                    b.index.to_string(),
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.samples.to_string(),
                    b.grid_points.to_string(),
                    b.max_discrepancy.to_string(),
                ]
            })
        }),
    )
}

/// Standalone smoothness estimation for every trial of an adaptive config.
pub fn run_smoothness(config: &ExperimentConfig) -> Result<Vec<SmoothnessEstimate>> {
    config.validate()?;
    if config.algorithm != Algorithm::Adaptive {
        return Err(Error::Config(
            "smoothness estimation needs algorithm `adaptive` with beta_lo and beta_hi".into(),
        ));
    }
    let smooth = config.smoothness();
    map_trials(config.trials, |trial| {
        let seed = trial_seed(config.seed, trial);
        let env = config.environment.for_trial(seed)?;
        estimate_smoothness(&env, config.horizon, &smooth, &mut policy_rng(seed), None)
    })
}

/// Writes `smoothness.csv`, `smoothness_bins.csv` and `smoothness.json`.
pub fn write_smoothness_outputs(estimates: &[SmoothnessEstimate], out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let indexed: Vec<(usize, &SmoothnessEstimate)> = estimates.iter().enumerate().collect();
    write_smoothness(&indexed, out)?;
    std::fs::write(out.join("smoothness.json"), serde_json::to_string_pretty(estimates)? + "\n")?;
    Ok(())
}

/// Reads `x_1, ..., x_d, y` rows. A first row that does not parse as numbers
/// is taken as a header.
pub fn read_regression_data(path: &Path) -> Result<Vec<LabeledSample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let values: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match values {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Schema(format!("row {}: {e}", i + 1))),
        };
        if values.len() < 2 {
            return Err(Error::Schema(format!("row {}: need at least one covariate and y", i + 1)));
        }
        let (x, y) = values.split_at(values.len() - 1);
        samples.push(LabeledSample::new(x.to_vec(), y[0]));
    }
    Ok(samples)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionReport {
    pub n: usize,
    pub d: usize,
    pub beta: f64,
    pub degree: usize,
    pub bandwidth: f64,
    pub index: Vec<f64>,
    pub objective: f64,
    pub region: (f64, f64),
}

pub fn regression_report(samples: &[LabeledSample], est: &RewardEstimator, config: &SiregConfig) -> RegressionReport {
    let d = samples.first().map_or(0, |s| s.x.len());
    RegressionReport {
        n: samples.len(),
        d,
        beta: config.beta,
        degree: est.primary.link.degree(),
        bandwidth: bandwidth_hn(samples.len() as f64, d, config.beta, config.c_h),
        index: est.index().v.clone(),
        objective: est.index().objective_value,
        region: est.evaluable_region(),
    }
}

/// Fits the single-index model to a data file and writes `index.json` and the
/// link on a 201-point grid over the evaluable region (`link_grid.csv`).
pub fn regress_file(data: &Path, beta: f64, out: &Path) -> Result<RegressionReport> {
    let samples = read_regression_data(data)?;
    let config = SiregConfig::new(beta);
    let est = fit_sireg(&samples, &config)?;
    let report = regression_report(&samples, &est, &config);
    ensure_dir(out)?;
    std::fs::write(out.join("index.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    let (lo, hi) = report.region;
    let link = &est.primary.link;
    write_table_file(
        &out.join("link_grid.csv"),
        Table::LinkGrid,
        (0..=200).map(|i| {
            let z = lo + (hi - lo) * i as f64 / 200.0;
            let p = link.predict(z);
            vec![z.to_string(), p.value.to_string(), p.in_domain.to_string()]
        }),
    )?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(algorithm: &str, constants: &str, horizon: usize) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "seed": 11, "trials": 3, "horizon": {horizon},
                "environment": {{"generate": {{"d": 3, "K": 2, "beta": 1.5}}}},
                "algorithm": "{algorithm}",
                "constants": {constants},
                "checkpoint_stride": 50
            }}"#
        ))
        .unwrap()
    }

    const FAST: &str = r#"{"beta": 1.5, "mrc": {"max_generations": 20, "restarts": 1}}"#;

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(250, 100), vec![100, 200, 250]);
        assert_eq!(checkpoints(200, 100), vec![100, 200]);
        assert!(checkpoints(0, 100).is_empty());
        assert_eq!(checkpoints(7, 100), vec![7]);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn summary_is_the_mean_of_traces() {
        let config = small_config("single_index", FAST, 600);
        let result = run_experiment(&config).unwrap();
        for row in &result.summary {
            let vals: Vec<f64> = result.trials.iter().map(|t| t.trace.cumulative_at(row.t)).collect();
            assert_eq!(row.mean_cum_regret, vals.iter().sum::<f64>() / 3.0);
        }
        assert_eq!(result.summary.last().unwrap().t, 600);
        // trials see different environments
        assert_ne!(result.trials[0].env.indices, result.trials[1].env.indices);
    }

    #[test]
    fn trials_match_standalone_runs() {
        let config = small_config("smooth_bandit", r#"{"beta": 1.5}"#, 400);
        let result = run_experiment(&config).unwrap();
        for (i, tr) in result.trials.iter().enumerate() {
            assert_eq!(tr.trial, i);
            let alone = run_trial(&config, i).unwrap();
            assert_eq!(alone.trace.rows, tr.trace.rows);
        }
    }

    #[test]
    fn empty_horizon_writes_headers() {
        let config = small_config("single_index", FAST, 0);
        let result = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_experiment(&result, dir.path()).unwrap();
        assert!(read_regret_trace(&dir.path().join("regret_trace.csv")).unwrap().is_empty());
        assert!(read_summary(&dir.path().join("summary.csv")).unwrap().is_empty());
    }

    #[test]
    fn outputs_are_deterministic() {
        let config = small_config("adaptive", r#"{"beta_lo": 0.9, "beta_hi": 1.9, "mrc": {"max_generations": 20}}"#, 2500);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_experiment(&run_experiment(&config).unwrap(), a.path()).unwrap();
        write_experiment(&run_experiment(&config).unwrap(), b.path()).unwrap();
        for name in [
            "config.json",
            "regret_trace.csv",
            "index_diagnostics.csv",
            "summary.csv",
            "index_summary.csv",
            "smoothness.csv",
            "smoothness_bins.csv",
        ] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }

    #[test]
    fn regression_data_with_and_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("a.csv");
        std::fs::write(&with, "x1,x2,y\n0.1,0.2,0.3\n0.4,0.5,0.6\n").unwrap();
        let without = dir.path().join("b.csv");
        std::fs::write(&without, "0.1,0.2,0.3\n0.4,0.5,0.6\n").unwrap();
        let a = read_regression_data(&with).unwrap();
        assert_eq!(a, read_regression_data(&without).unwrap());
        assert_eq!(a[1].x, vec![0.4, 0.5]);
        assert_eq!(a[1].y, 0.6);
        let bad = dir.path().join("c.csv");
        std::fs::write(&bad, "x,y\n0.1,0.2\nfoo,0.3\n").unwrap();
        assert!(read_regression_data(&bad).is_err());
    }
}
