//! Seeded multi-trial experiment sweeps: JSON-configured parameter grids,
//! the MSE metric, weighted-aggregation scenarios, and deterministic CSV
//! emission.
//!
//! Trials run on a worker pool; every trial's randomness comes from a seed
//! derived from (master seed, grid index, trial index), and rows are
//! assembled by index, so output is identical regardless of scheduling.
//! Sweep estimates for the distributed protocols are computed through their
//! collapsed samplers, which produce bit-identical output to the full
//! message-level simulations (covered by paired tests in `sim`).

use crate::data::{synth_normal, synth_uniform, Dataset};
use crate::error::{Error, Result};
use crate::field::EncodedRecord;
use crate::mech::calibrate::{calibrate_p_thm1, gaussian_params, min_delta_thm1};
use crate::mech::dpcs::dpcs_seeded;
use crate::mech::gaussian::dpdg;
use crate::mech::report_set::{predict_variance_tss, tss_mechanism_seeded};
use crate::mech::{MechanismParams, Reporting};
use crate::seed::{derive_master, substream, StreamTag};
use crate::weights::{
    closed_form_weights, combine, expected_squared_error, optimize_weights,
    relative_report_variance, unweighted, GroupReport, WeightAssignment,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Mean squared error between two same-length real sequences.
pub fn mse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.is_empty() || truth.len() != estimate.len() {
        return Err(Error::domain(format!(
            "mse needs equal non-empty lengths, got {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    let sum: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / truth.len() as f64)
}

/// Which estimator a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    /// One-stage sampling, centralized tally.
    Dpcs,
    /// One-stage sampling over secret shares (same estimates as dpcs).
    Dpds,
    /// Gaussian-noise baseline.
    Dpdg,
    /// Two-stage sampling protocol.
    Tss,
    /// Two-stage sampling with padded elections (same estimates as tss).
    TssPrime,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Dpcs => "dpcs",
            MechanismKind::Dpds => "dpds",
            MechanismKind::Dpdg => "dpdg",
            MechanismKind::Tss => "tss",
            MechanismKind::TssPrime => "tss_prime",
        })
    }
}

/// How each grid point's failure probability is chosen: pinned up front, or
/// derived from the dataset's minimum item frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    Fixed(f64),
    FromData,
}

/// Where the experiment's dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Synthetic items, i.i.d. uniform over `[1, n_items]`.
    Uniform { n_items: usize },
    /// Synthetic items from a discretized clipped standard normal.
    Normal { n_items: usize },
    /// A file in the canonical dataset format.
    File { path: String },
}

/// Group partition for weighted-aggregation scenarios: consecutive user
/// groups of the given sizes, each running with its own budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub epsilons: Vec<f64>,
    pub sizes: Vec<usize>,
}

fn default_seed() -> u64 {
    42
}

fn default_delta() -> DeltaRule {
    DeltaRule::FromData
}

fn default_alpha() -> f64 {
    0.4
}

fn default_gamma() -> f64 {
    2.0
}

fn default_chi() -> Reporting {
    Reporting::Uniform
}

/// One experiment: a mechanism, a parameter grid, a dataset, and a trial
/// budget. Deserialized from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario label used in weighted-run CSV output.
    #[serde(default)]
    pub name: String,
    pub mechanism: MechanismKind,
    /// Budget grid; participation probabilities follow as `1 - e^(-eps)`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: DeltaRule,
    /// Population grid; empty means the full dataset.
    #[serde(default)]
    pub populations: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_chi")]
    pub chi: Reporting,
    #[serde(default)]
    pub phi: usize,
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dataset: DataSource,
    #[serde(default)]
    pub groups: Option<GroupSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("need at least one trial"));
        }
        if let Some(groups) = &self.groups {
            if groups.epsilons.is_empty() || groups.epsilons.len() != groups.sizes.len() {
                return Err(Error::config(
                    "groups need matching non-empty epsilon and size lists",
                ));
            }
            if groups.sizes.iter().any(|&s| s == 0) {
                return Err(Error::config("every group needs at least one user"));
            }
            if groups.epsilons.iter().any(|&e| e <= 0.0) {
                return Err(Error::config("group budgets must be positive"));
            }
            if !matches!(self.mechanism, MechanismKind::Dpcs | MechanismKind::Dpds) {
                return Err(Error::config(
                    "weighted runs use the one-stage sampling mechanisms",
                ));
            }
            return Ok(());
        }
        if self.epsilons.is_empty() {
            return Err(Error::config("empty budget grid"));
        }
        if self.epsilons.iter().any(|&e| e <= 0.0) {
            return Err(Error::config("budgets must be positive"));
        }
        if matches!(
            self.dataset,
            DataSource::Uniform { .. } | DataSource::Normal { .. }
        ) && self.populations.is_empty()
        {
            return Err(Error::config(
                "synthetic datasets need an explicit population list",
            ));
        }
        if self.mechanism == MechanismKind::Dpdg && !matches!(self.delta, DeltaRule::Fixed(_)) {
            return Err(Error::config(
                "the Gaussian baseline needs a fixed failure probability",
            ));
        }
        if let DeltaRule::Fixed(d) = self.delta {
            if !(0.0 < d && d < 1.0) {
                return Err(Error::config(format!("delta = {d} outside (0, 1)")));
            }
        }
        Ok(())
    }

    fn two_stage(&self) -> bool {
        matches!(self.mechanism, MechanismKind::Tss | MechanismKind::TssPrime)
    }
}

/// One grid point's outcome: coordinates, per-trial errors, their mean, the
/// predicted mean squared error, or an error marker when calibration is
/// infeasible at that point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub mechanism: MechanismKind,
    /// Budget; absent for weighted rows, which mix several budgets.
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub n: u64,
    pub alpha: Option<f64>,
    pub chi: Option<Reporting>,
    /// Aggregation method tag for weighted rows.
    pub method: Option<String>,
    pub trial_mse: Vec<f64>,
    pub mean_mse: Option<f64>,
    pub predicted: Option<f64>,
    pub error: Option<String>,
}

impl ResultRow {
    fn from_trials(trial_mse: Vec<f64>) -> (Vec<f64>, Option<f64>) {
        let mean = trial_mse.iter().sum::<f64>() / trial_mse.len() as f64;
        (trial_mse, Some(mean))
    }
}

fn build_dataset(source: &DataSource, n: Option<usize>, seed: u64) -> Result<Dataset> {
    match source {
        DataSource::Uniform { n_items } => {
            let n = n.ok_or_else(|| Error::config("synthetic source without a population"))?;
            synth_uniform(n, *n_items, seed)
        }
        DataSource::Normal { n_items } => {
            let n = n.ok_or_else(|| Error::config("synthetic source without a population"))?;
            synth_normal(n, *n_items, seed)
        }
        DataSource::File { path } => {
            let base = Dataset::load(path)?;
            match n {
                None => Ok(base),
                Some(n) if n == base.n_users() => Ok(base),
                Some(n) => base.subsample(n, seed),
            }
        }
    }
}

/// Smallest per-item frequency in the dataset, the `beta` the calibration
/// bounds are re-checked against.
fn beta_floor(counts: &[u64], n: u64) -> f64 {
    counts.iter().copied().min().unwrap_or(0) as f64 / n as f64
}

/// Resolve the failure probability at one grid point. `Err(Infeasible)`
/// becomes an error-marker row upstream.
fn resolve_delta(rule: DeltaRule, n: u64, n_items: usize, epsilon: f64, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::infeasible(
            "some item has zero support, so no frequency floor holds",
        ));
    }
    let floor = min_delta_thm1(n, n_items, epsilon, beta)?;
    match rule {
        DeltaRule::FromData => Ok(floor),
        DeltaRule::Fixed(d) if floor <= d => Ok(d),
        DeltaRule::Fixed(d) => Err(Error::infeasible(format!(
            "requested delta {d} below the achievable floor {floor}"
        ))),
    }
}

/// Run the configured sweep or weighted scenario.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    match &config.groups {
        Some(groups) => run_weighted(config, groups),
        None => run_sweep(config),
    }
}

fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let populations: Vec<Option<usize>> = if config.populations.is_empty() {
        vec![None]
    } else {
        config.populations.iter().map(|&n| Some(n)).collect()
    };
    let mut rows = Vec::new();
    for (ni, &pop) in populations.iter().enumerate() {
        let dataset = build_dataset(&config.dataset, pop, config.seed)?;
        let records = dataset.encode()?;
        let truth = dataset.normalized_histogram();
        let counts = dataset.histogram();
        let n = dataset.n_users() as u64;
        let n_items = dataset.n_items();
        for (ei, &epsilon) in config.epsilons.iter().enumerate() {
            let grid = (ni * config.epsilons.len() + ei) as u64;
            rows.push(sweep_row(
                config, epsilon, grid, &records, &truth, &counts, n, n_items,
            )?);
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn sweep_row(
    config: &ExperimentConfig,
    epsilon: f64,
    grid: u64,
    records: &[EncodedRecord],
    truth: &[f64],
    counts: &[u64],
    n: u64,
    n_items: usize,
) -> Result<ResultRow> {
    let beta = beta_floor(counts, n);
    let mut row = ResultRow {
        mechanism: config.mechanism,
        epsilon: Some(epsilon),
        delta: None,
        n,
        alpha: config.two_stage().then_some(config.alpha),
        chi: config.two_stage().then_some(config.chi),
        method: None,
        trial_mse: Vec::new(),
        mean_mse: None,
        predicted: None,
        error: None,
    };
    let outcome: Result<Result<(f64, f64, Vec<f64>)>> = match config.mechanism {
        MechanismKind::Dpcs | MechanismKind::Dpds => {
            resolve_delta(config.delta, n, n_items, epsilon, beta).map(|delta| {
                let p = calibrate_p_thm1(epsilon)?;
                let predicted = (1.0 - p) / (p * n as f64) / n_items as f64;
                let trials = run_trials(config, grid, |master| {
                    let estimate = dpcs_seeded(records, p, master)?;
                    mse(truth, estimate.normalized())
                })?;
                Ok((delta, predicted, trials))
            })
        }
        MechanismKind::Dpdg => {
            let DeltaRule::Fixed(delta) = config.delta else {
                unreachable!("checked by validate")
            };
            gaussian_params(n, epsilon, delta).map(|g| {
                let trials = run_trials(config, grid, |master| {
                    let mut rng = substream(master, StreamTag::Noise, 0, 0);
                    let estimate = dpdg(records, epsilon, delta, &mut rng)?;
                    mse(truth, estimate.normalized())
                })?;
                Ok((delta, g.per_coord_variance, trials))
            })
        }
        MechanismKind::Tss | MechanismKind::TssPrime => {
            resolve_delta(config.delta, n, n_items, epsilon, beta).map(|delta| {
                let params = MechanismParams {
                    epsilon,
                    delta: Some(delta),
                    p: calibrate_p_thm1(epsilon)?,
                    beta: Some(beta),
                    z: 0.0,
                    alpha: config.alpha,
                    gamma: config.gamma,
                    chi: config.chi,
                    phi: config.phi,
                };
                params.validate(n_items)?;
                let predicted = predict_variance_tss(params.q_chi(), n)? / n_items as f64;
                let trials = run_trials(config, grid, |master| {
                    let estimate = tss_mechanism_seeded(records, &params, master)?;
                    mse(truth, estimate.normalized())
                })?;
                Ok((delta, predicted, trials))
            })
        }
    };
    match outcome {
        Ok(inner) => {
            let (delta, predicted, trials) = inner?;
            let (trial_mse, mean) = ResultRow::from_trials(trials);
            row.delta = Some(delta);
            row.predicted = Some(predicted);
            row.trial_mse = trial_mse;
            row.mean_mse = mean;
        }
        Err(Error::Infeasible(why)) => row.error = Some(why),
        Err(other) => return Err(other),
    }
    Ok(row)
}

/// Run the configured number of trials on the worker pool, each from its own
/// derived seed; results come back in trial order.
fn run_trials(
    config: &ExperimentConfig,
    grid: u64,
    trial: impl Fn(u64) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    (0..config.trials)
        .into_par_iter()
        .map(|t| trial(derive_master(config.seed, StreamTag::Trial, grid, t as u64)))
        .collect()
}

fn run_weighted(config: &ExperimentConfig, groups: &GroupSpec) -> Result<Vec<ResultRow>> {
    let total: usize = groups.sizes.iter().sum();
    let dataset = build_dataset(&config.dataset, Some(total), config.seed)?;
    if dataset.n_users() != total {
        return Err(Error::config(format!(
            "dataset has {} users, group sizes sum to {total}",
            dataset.n_users()
        )));
    }
    let parts = dataset.partition_by_sizes(&groups.sizes)?;
    let part_records: Vec<Vec<EncodedRecord>> =
        parts.iter().map(|p| p.encode()).collect::<Result<_>>()?;
    let truth = dataset.normalized_histogram();
    let n_items = dataset.n_items();
    let populations: Vec<u64> = groups.sizes.iter().map(|&s| s as u64).collect();
    let variances: Vec<f64> = groups
        .epsilons
        .iter()
        .map(|&e| relative_report_variance(e))
        .collect::<Result<_>>()?;
    let ps: Vec<f64> = groups
        .epsilons
        .iter()
        .map(|&e| calibrate_p_thm1(e))
        .collect::<Result<_>>()?;
    let lowest = groups
        .epsilons
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(g, _)| g)
        .expect("validated non-empty");

    let methods: Vec<(String, Option<WeightAssignment>)> = vec![
        ("vwa".into(), Some(closed_form_weights(&variances)?)),
        (
            "owa".into(),
            Some(optimize_weights(&populations, &variances, 1e-6)?),
        ),
        ("uwa".into(), Some(unweighted(groups.sizes.len())?)),
        ("cpa".into(), None),
    ];

    // trial_errors[t][k] = MSE of method k in trial t.
    let trial_errors: Vec<Vec<f64>> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let trial_master = derive_master(config.seed, StreamTag::Trial, 0, t as u64);
            let reports: Vec<GroupReport> = part_records
                .iter()
                .enumerate()
                .map(|(g, records)| {
                    let master = derive_master(trial_master, StreamTag::Grouping, g as u64, 0);
                    let estimate = dpcs_seeded(records, ps[g], master)?;
                    Ok(GroupReport {
                        group_id: g,
                        epsilon: groups.epsilons[g],
                        n: populations[g],
                        estimate: estimate.normalized().to_vec(),
                        variance: variances[g],
                    })
                })
                .collect::<Result<_>>()?;
            methods
                .iter()
                .map(|(_, assignment)| match assignment {
                    Some(a) => mse(&truth, &combine(&reports, a)?),
                    None => mse(&truth, &reports[lowest].estimate),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let rows = methods
        .iter()
        .enumerate()
        .map(|(k, (tag, assignment))| {
            let predicted = match assignment {
                Some(a) => expected_squared_error(a.weights(), &populations, &variances),
                None => variances[lowest] / populations[lowest] as f64,
            } / n_items as f64;
            let (trial_mse, mean) =
                ResultRow::from_trials(trial_errors.iter().map(|e| e[k]).collect());
            ResultRow {
                mechanism: config.mechanism,
                epsilon: None,
                delta: None,
                n: total as u64,
                alpha: None,
                chi: None,
                method: Some(tag.clone()),
                trial_mse,
                mean_mse: mean,
                predicted: Some(predicted),
                error: None,
            }
        })
        .collect();
    Ok(rows)
}

/// Error marker written into numeric CSV cells for infeasible grid points.
pub const CSV_ERROR_MARKER: &str = "infeasible";

/// Format a value with '.' decimal separator, scientific notation below
/// 1e-4 in magnitude.
fn fmt_value(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Serialize rows to CSV. Sweeps emit
/// `epsilon,mechanism,delta[,n][,alpha,chi],mean_mse,predicted` (the `n`
/// column appears when the population grid has more than one entry, the
/// two-stage columns for the two-stage mechanisms); weighted scenarios emit
/// `scenario,method,mean_mse,predicted`. Identical config and seed produce
/// byte-identical output.
pub fn write_csv(config: &ExperimentConfig, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    if config.groups.is_some() {
        out.push_str("scenario,method,mean_mse,predicted\n");
        let scenario = if config.name.is_empty() {
            "weighted"
        } else {
            &config.name
        };
        for row in rows {
            out.push_str(&format!(
                "{scenario},{},{},{}\n",
                row.method.as_deref().unwrap_or(""),
                row.mean_mse.map(fmt_value).unwrap_or_default(),
                row.predicted.map(fmt_value).unwrap_or_default(),
            ));
        }
        return out;
    }
    let with_n = config.populations.len() > 1;
    let two_stage = config.two_stage();
    out.push_str("epsilon,mechanism,delta");
    if with_n {
        out.push_str(",n");
    }
    if two_stage {
        out.push_str(",alpha,chi");
    }
    out.push_str(",mean_mse,predicted\n");
    for row in rows {
        out.push_str(&fmt_value(row.epsilon.unwrap_or(f64::NAN)));
        out.push_str(&format!(",{}", row.mechanism));
        let (delta, mean, predicted) = match row.error {
            None => (
                row.delta.map(fmt_value).unwrap_or_default(),
                row.mean_mse.map(fmt_value).unwrap_or_default(),
                row.predicted.map(fmt_value).unwrap_or_default(),
            ),
            Some(_) => (
                CSV_ERROR_MARKER.into(),
                CSV_ERROR_MARKER.into(),
                CSV_ERROR_MARKER.into(),
            ),
        };
        out.push_str(&format!(",{delta}"));
        if with_n {
            out.push_str(&format!(",{}", row.n));
        }
        if two_stage {
            let chi = match row.chi {
                Some(Reporting::Adaptive) => "adaptive",
                _ => "uniform",
            };
            out.push_str(&format!(",{},{chi}", fmt_value(row.alpha.unwrap_or(0.0))));
        }
        out.push_str(&format!(",{mean},{predicted}\n"));
    }
    out
}

/// Run an experiment and serialize the rows in one step.
pub fn run_to_csv(config: &ExperimentConfig) -> Result<String> {
    let rows = run_experiment(config)?;
    Ok(write_csv(config, &rows))
}
