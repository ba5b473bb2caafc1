//! Variance-weighted combination of frequency estimates released by groups
//! with different privacy budgets: closed-form inverse-variance weights, a
//! projected-gradient optimizer over the simplex, and the expected squared
//! error of any weighting.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One privacy group's released estimate and its variance model.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group_id: usize,
    /// The group's privacy budget.
    pub epsilon: f64,
    /// Group population.
    pub n: u64,
    /// The group's released frequency estimate.
    pub estimate: Vec<f64>,
    /// Relative per-user report variance `V_j` (scalar convention; constant
    /// factors shared by all groups cancel in the weights).
    pub variance: f64,
}

/// Relative per-user report variance of a sampling group at budget
/// `epsilon`: `(1 - p) / p = 1 / (e^eps - 1)` with `p = 1 - e^{-eps}`.
/// Item-dependent factors are identical across groups and cancel.
pub fn relative_report_variance(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon = {epsilon} must be positive")));
    }
    Ok(1.0 / epsilon.exp_m1())
}

/// How a weight vector was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMethod {
    /// Inverse-variance critical point (variance-weighted aggregation).
    ClosedForm,
    /// Numerically optimized (optimized weighted aggregation).
    Optimized,
    /// Equal weights (unweighted aggregation).
    Unweighted,
}

impl std::fmt::Display for WeightMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightMethod::ClosedForm => "vwa",
            WeightMethod::Optimized => "owa",
            WeightMethod::Unweighted => "uwa",
        })
    }
}

/// Positive weights summing to 1, with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightAssignment {
    weights: Vec<f64>,
    method: WeightMethod,
}

impl WeightAssignment {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn method(&self) -> WeightMethod {
        self.method
    }
}

fn check_variances(variances: &[f64]) -> Result<()> {
    if variances.is_empty() {
        return Err(Error::domain("need at least one group"));
    }
    if variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain("every group variance must be positive"));
    }
    Ok(())
}

fn check_populations(populations: &[u64]) -> Result<()> {
    if populations.iter().any(|&n| n == 0) {
        return Err(Error::domain("every group population must be at least 1"));
    }
    Ok(())
}

/// Inverse-variance weights `w_i = (1/V_i) / sum_j (1/V_j)`: the unique
/// critical point of the expected squared error on the simplex.
pub fn closed_form_weights(variances: &[f64]) -> Result<WeightAssignment> {
    check_variances(variances)?;
    let inv: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let total: f64 = inv.iter().sum();
    Ok(WeightAssignment {
        weights: inv.into_iter().map(|x| x / total).collect(),
        method: WeightMethod::ClosedForm,
    })
}

/// Equal weights over `mu` groups.
pub fn unweighted(mu: usize) -> Result<WeightAssignment> {
    if mu == 0 {
        return Err(Error::domain("need at least one group"));
    }
    Ok(WeightAssignment {
        weights: vec![1.0 / mu as f64; mu],
        method: WeightMethod::Unweighted,
    })
}

/// Expected squared error of combining unbiased group means with weights
/// `w`: `sum_j w_j^2 n_j V_j / (sum_j n_j w_j)^2`.
pub fn expected_squared_error(weights: &[f64], populations: &[u64], variances: &[f64]) -> f64 {
    assert_eq!(weights.len(), populations.len());
    assert_eq!(weights.len(), variances.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&w, &n), &v) in weights.iter().zip(populations).zip(variances) {
        num += w * w * n as f64 * v;
        den += n as f64 * w;
    }
    num / (den * den)
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(w: &mut [f64]) {
    let mut sorted = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        acc += u;
        let t = (acc - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in w.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

/// Minimize the expected squared error over the simplex by projected
/// gradient descent.
///
/// The step is `0.45 * S^2 / max_j(n_j V_j)` with `S = sum n_j w_j`,
/// just under the inverse curvature of the objective near its critical
/// point, so convergence is geometric with rate governed by the spread of
/// `n_j V_j`. Iteration stops when the weight change falls below
/// `tolerance` shrunk by that spread, which bounds the remaining distance
/// to the critical point by about `tolerance`.
pub fn optimize_weights(
    populations: &[u64],
    variances: &[f64],
    tolerance: f64,
) -> Result<WeightAssignment> {
    check_variances(variances)?;
    check_populations(populations)?;
    if populations.len() != variances.len() {
        return Err(Error::contract(
            "population and variance lists differ in length",
        ));
    }
    if !(tolerance > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let mu = variances.len();
    if mu == 1 {
        return Ok(WeightAssignment {
            weights: vec![1.0],
            method: WeightMethod::Optimized,
        });
    }
    let nv: Vec<f64> = populations
        .iter()
        .zip(variances)
        .map(|(&n, &v)| n as f64 * v)
        .collect();
    let nv_max = nv.iter().cloned().fold(f64::MIN, f64::max);
    let nv_min = nv.iter().cloned().fold(f64::MAX, f64::min);
    let spread = nv_max / nv_min;
    let stop = tolerance * (0.5 / spread).min(1.0);

    let cap = 100_000usize;
    let mut w = vec![1.0 / mu as f64; mu];
    for it in 0..cap {
        let s: f64 = populations
            .iter()
            .zip(&w)
            .map(|(&n, &wi)| n as f64 * wi)
            .sum();
        let a: f64 = populations
            .iter()
            .zip(&w)
            .zip(variances)
            .map(|((&n, &wi), &v)| n as f64 * wi * wi * v)
            .sum();
        let step = 0.45 * s * s / nv_max;
        let mut next = w.clone();
        for i in 0..mu {
            let n_i = populations[i] as f64;
            let grad = 2.0 * n_i * (w[i] * variances[i] * s - a) / (s * s * s);
            next[i] -= step * grad;
        }
        project_simplex(&mut next);
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if change < stop {
            let _ = it;
            return Ok(WeightAssignment {
                weights: w,
                method: WeightMethod::Optimized,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: cap,
        best: w,
    })
}

/// Combine group estimates coordinate-wise with coefficients
/// `w_j n_j / sum_k w_k n_k`, the group-level form of weighting every
/// user's report by its group weight.
pub fn combine(reports: &[GroupReport], assignment: &WeightAssignment) -> Result<Vec<f64>> {
    if reports.is_empty() {
        return Err(Error::domain("need at least one group report"));
    }
    if reports.len() != assignment.weights().len() {
        return Err(Error::contract(
            "weight count does not match group count",
        ));
    }
    let dim = reports[0].estimate.len();
    if reports.iter().any(|r| r.estimate.len() != dim) {
        return Err(Error::domain("group estimates differ in dimension"));
    }
    let coeffs: Vec<f64> = reports
        .iter()
        .zip(assignment.weights())
        .map(|(r, &w)| w * r.n as f64)
        .collect();
    let total: f64 = coeffs.iter().sum();
    let mut out = vec![0.0; dim];
    for (r, c) in reports.iter().zip(&coeffs) {
        for (o, &e) in out.iter_mut().zip(&r.estimate) {
            *o += c * e / total;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{substream, StreamTag};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    const TABLE_EPSILONS: [[f64; 4]; 4] = [
        [0.1, 0.4, 0.7, 1.0],
        [0.1, 0.1, 0.8, 1.0],
        [0.1, 0.1, 0.1, 1.0],
        [0.1, 0.8, 0.7, 1.0],
    ];
    const TABLE_WEIGHTS: [[f64; 4]; 4] = [
        [0.0316, 0.1477, 0.3045, 0.5162],
        [0.0333, 0.0333, 0.3885, 0.5448],
        [0.0517, 0.0517, 0.0517, 0.8449],
        [0.0259, 0.3017, 0.2495, 0.4229],
    ];

    fn table_variances(setting: usize) -> Vec<f64> {
        TABLE_EPSILONS[setting]
            .iter()
            .map(|&e| relative_report_variance(e).unwrap())
            .collect()
    }

    #[test]
    fn closed_form_reproduces_published_weight_table() {
        for s in 0..4 {
            let w = closed_form_weights(&table_variances(s)).unwrap();
            for (got, want) in w.weights().iter().zip(&TABLE_WEIGHTS[s]) {
                assert!(
                    (got - want).abs() < 5e-5,
                    "setting {s}: got {got}, published {want}"
                );
            }
            assert_relative_eq!(w.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_variances_give_uniform_weights() {
        let w = closed_form_weights(&[2.5; 5]).unwrap();
        for &x in w.weights() {
            assert_relative_eq!(x, 0.2, epsilon = 1e-14);
        }
    }

    #[test]
    fn weights_are_scale_invariant() {
        let v = [0.3, 1.1, 4.2];
        let a = closed_form_weights(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * 37.0).collect();
        let b = closed_form_weights(&scaled).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_variances_are_rejected() {
        assert!(closed_form_weights(&[]).is_err());
        assert!(closed_form_weights(&[1.0, 0.0]).is_err());
        assert!(closed_form_weights(&[1.0, -2.0]).is_err());
        assert!(relative_report_variance(0.0).is_err());
    }

    #[test]
    fn expected_error_reference_values() {
        let n = [10u64, 10];
        let v = [1.0, 4.0];
        assert_relative_eq!(expected_squared_error(&[0.8, 0.2], &n, &v), 0.08);
        assert_relative_eq!(expected_squared_error(&[0.5, 0.5], &n, &v), 0.125);
        let opt = 1.0 / (n[0] as f64 / v[0] + n[1] as f64 / v[1]);
        assert_relative_eq!(opt, 0.08);
    }

    #[test]
    fn closed_form_dominates_unweighted() {
        let mut rng = substream(0xd0, StreamTag::Trial, 0, 0);
        for _ in 0..200 {
            let mu = rng.random_range(2..=6);
            let n: Vec<u64> = (0..mu).map(|_| rng.random_range(1..=400)).collect();
            let v: Vec<f64> = (0..mu).map(|_| rng.random_range(0.2..5.0)).collect();
            let w = closed_form_weights(&v).unwrap();
            let u = unweighted(mu).unwrap();
            let dw = expected_squared_error(w.weights(), &n, &v);
            let du = expected_squared_error(u.weights(), &n, &v);
            assert!(dw <= du * (1.0 + 1e-12), "dominance violated: {dw} > {du}");
        }
        let v_eq = vec![1.7; 3];
        let n_eq = [5u64, 50, 500];
        let dw = expected_squared_error(closed_form_weights(&v_eq).unwrap().weights(), &n_eq, &v_eq);
        let du = expected_squared_error(unweighted(3).unwrap().weights(), &n_eq, &v_eq);
        assert_relative_eq!(dw, du, epsilon = 1e-14);
    }

    #[test]
    fn optimizer_matches_closed_form_on_reference_cases() {
        let w = optimize_weights(&[10, 10], &[1.0, 4.0], 1e-8).unwrap();
        assert!((w.weights()[0] - 0.8).abs() < 1e-6);
        assert!((w.weights()[1] - 0.2).abs() < 1e-6);
        assert_eq!(w.method(), WeightMethod::Optimized);
        assert_eq!(optimize_weights(&[7], &[3.0], 1e-8).unwrap().weights(), &[1.0]);
        for s in 0..4 {
            let v = table_variances(s);
            let opt = optimize_weights(&[250; 4], &v, 1e-8).unwrap();
            let closed = closed_form_weights(&v).unwrap();
            for (a, b) in opt.weights().iter().zip(closed.weights()) {
                assert!((a - b).abs() < 1e-6, "setting {s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn optimizer_matches_closed_form_on_random_instances() {
        let mut rng = substream(0xd1, StreamTag::Trial, 0, 0);
        for case in 0..100 {
            let mu = rng.random_range(2..=8);
            let n: Vec<u64> = (0..mu).map(|_| rng.random_range(20..=500)).collect();
            let v: Vec<f64> = (0..mu).map(|_| rng.random_range(0.2..5.0)).collect();
            let opt = optimize_weights(&n, &v, 1e-8).unwrap();
            let closed = closed_form_weights(&v).unwrap();
            for (a, b) in opt.weights().iter().zip(closed.weights()) {
                assert!((a - b).abs() < 1e-6, "case {case}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn optimizer_rejects_bad_inputs() {
        assert!(optimize_weights(&[0, 5], &[1.0, 1.0], 1e-8).is_err());
        assert!(optimize_weights(&[5, 5], &[1.0, -1.0], 1e-8).is_err());
        assert!(optimize_weights(&[5, 5], &[1.0, 1.0], 0.0).is_err());
        assert!(optimize_weights(&[5], &[1.0, 1.0], 1e-8).is_err());
    }

    fn report(group_id: usize, n: u64, estimate: Vec<f64>, variance: f64) -> GroupReport {
        GroupReport {
            group_id,
            epsilon: 1.0,
            n,
            estimate,
            variance,
        }
    }

    #[test]
    fn combine_reference_cases() {
        let reports = [
            report(0, 1, vec![0.2], 1.0),
            report(1, 1, vec![0.4], 1.0),
        ];
        let w = unweighted(2).unwrap();
        assert_relative_eq!(combine(&reports, &w).unwrap()[0], 0.3);

        let same = [
            report(0, 30, vec![0.1, 0.9], 1.0),
            report(1, 400, vec![0.1, 0.9], 4.0),
        ];
        let w = closed_form_weights(&[1.0, 4.0]).unwrap();
        let c = combine(&same, &w).unwrap();
        assert_relative_eq!(c[0], 0.1, epsilon = 1e-12);
        assert_relative_eq!(c[1], 0.9, epsilon = 1e-12);

        let ragged = [report(0, 1, vec![0.2], 1.0), report(1, 1, vec![0.1, 0.9], 1.0)];
        assert!(combine(&ragged, &w).is_err());
        assert!(combine(&same, &unweighted(3).unwrap()).is_err());
        assert!(combine(&[], &w).is_err());
    }

    /// Monte-Carlo check of the error formula and of unbiasedness: group
    /// means of independent Gaussian per-user reports, combined with
    /// closed-form weights.
    #[test]
    fn combined_estimator_is_unbiased_with_predicted_error() {
        let truth = 0.37;
        let n = [10u64, 40];
        let v = [1.0, 4.0];
        let w = closed_form_weights(&v).unwrap();
        let predicted = expected_squared_error(w.weights(), &n, &v);
        let trials = 40_000;
        let mut rng = substream(0xd2, StreamTag::Trial, 1, 0);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..trials {
            let reports: Vec<GroupReport> = n
                .iter()
                .zip(&v)
                .enumerate()
                .map(|(g, (&nj, &vj))| {
                    let noise = Normal::new(0.0, (vj / nj as f64).sqrt()).unwrap();
                    report(g, nj, vec![truth + noise.sample(&mut rng)], vj)
                })
                .collect();
            let c = combine(&reports, &w).unwrap()[0];
            sum += c;
            sq += (c - truth) * (c - truth);
        }
        let mean = sum / trials as f64;
        let mse = sq / trials as f64;
        let se = (predicted / trials as f64).sqrt();
        assert!(
            (mean - truth).abs() < 4.0 * se,
            "bias {} exceeds 4 se {se}",
            mean - truth
        );
        assert!(
            (mse - predicted).abs() < 0.1 * predicted,
            "mse {mse} vs predicted {predicted}"
        );
    }
}
