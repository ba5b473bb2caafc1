//! Closed-form calibration of the sampling probability and failure
//! probability, plus the Gaussian-baseline noise scales and the population
//! threshold where sampling beats Gaussian noise.

use crate::error::{Error, Result};

/// Participation probability for the relaxed bound: `p = 1 - e^(-epsilon)`.
pub fn calibrate_p_thm1(epsilon: f64) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::domain(format!("epsilon = {epsilon} must be > 0")));
    }
    Ok(-f64::exp_m1(-epsilon))
}

fn check_basic(n: u64, n_items: usize, epsilon: f64, beta: f64) -> Result<()> {
    if n < 1 || n_items < 1 {
        return Err(Error::domain("need n >= 1 and N >= 1"));
    }
    if epsilon <= 0.0 {
        return Err(Error::domain(format!("epsilon = {epsilon} must be > 0")));
    }
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::domain(format!("beta = {beta} outside (0, 1)")));
    }
    Ok(())
}

/// Smallest failure probability supported by the relaxed bound:
/// `delta = max(2 pi X^(-(N+1)/2), X^(-N/2))` with
/// `X = 2 pi n beta (e^-eps - e^-2eps)`. Because both branches decay in `X`,
/// no meaningful `delta < 1` exists when `X <= 1`.
pub fn min_delta_thm1(n: u64, n_items: usize, epsilon: f64, beta: f64) -> Result<f64> {
    check_basic(n, n_items, epsilon, beta)?;
    let x = 2.0
        * std::f64::consts::PI
        * n as f64
        * beta
        * ((-epsilon).exp() - (-2.0 * epsilon).exp());
    if x <= 1.0 {
        return Err(Error::infeasible(format!(
            "decay base X = {x:.6} <= 1: bound admits no delta < 1"
        )));
    }
    let nn = n_items as f64;
    let delta = f64::max(
        2.0 * std::f64::consts::PI * x.powf(-(nn + 1.0) / 2.0),
        x.powf(-nn / 2.0),
    );
    if delta >= 1.0 {
        return Err(Error::infeasible(format!(
            "smallest supported delta = {delta:.6} is not below 1"
        )));
    }
    Ok(delta)
}

/// Minimum item-frequency fraction required by the relaxed bound for a given
/// failure probability; `min_delta_thm1` inverts this in closed form.
pub fn min_beta_thm1(n: u64, n_items: usize, epsilon: f64, delta: f64) -> Result<f64> {
    if n < 1 || n_items < 1 {
        return Err(Error::domain("need n >= 1 and N >= 1"));
    }
    if epsilon <= 0.0 || !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain("need epsilon > 0 and delta in (0, 1)"));
    }
    let nn = n_items as f64;
    let tau = std::f64::consts::TAU;
    Ok(
        f64::max(
            (tau / delta).powf(2.0 / (nn + 1.0)),
            delta.powf(-2.0 / nn),
        ) / (tau * n as f64 * ((-epsilon).exp() - (-2.0 * epsilon).exp())),
    )
}

/// Feasibility report for the tighter calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct Thm2Check {
    pub feasible: bool,
    /// Lower bound on beta at the requested slack `z`.
    pub beta_min: f64,
    /// Upper bound on the slack at the requested beta.
    pub z_max: f64,
    /// Participation probability `1 - e^(-z-epsilon)`, when feasible.
    pub p: Option<f64>,
    pub reason: Option<String>,
}

fn thm2_beta_min(n: u64, n_items: usize, epsilon: f64, delta: f64, z: f64) -> f64 {
    let nn = n_items as f64;
    let tau = std::f64::consts::TAU;
    let shrink = 1.0 - (-epsilon / 2.0).exp();
    let grow = 1.0 + (-epsilon / 2.0).exp();
    (z + epsilon).exp() / (tau * n as f64 * shrink * shrink)
        * f64::max(
            (tau / delta).powf(2.0 / (nn + 1.0)) / (grow * grow),
            (2.0 * tau / delta).powf(2.0 / nn),
        )
}

fn thm2_z_max(n: u64, n_items: usize, epsilon: f64, beta: f64) -> Result<f64> {
    let headroom = 1.0 - beta * (n_items as f64 - 1.0);
    if headroom <= 0.0 {
        return Err(Error::infeasible(format!(
            "beta (N - 1) = {} >= 1: slack bound undefined",
            beta * (n_items as f64 - 1.0)
        )));
    }
    Ok((1.0 + n as f64 * headroom * (1.0 - (-epsilon / 2.0).exp())).ln())
}

/// Evaluate the tighter calibration at a caller-chosen slack `z`: both bounds
/// plus the resulting participation probability when they hold.
pub fn check_thm2(
    n: u64,
    n_items: usize,
    epsilon: f64,
    delta: f64,
    beta: f64,
    z: f64,
) -> Result<Thm2Check> {
    check_basic(n, n_items, epsilon, beta)?;
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain(format!("delta = {delta} outside (0, 1)")));
    }
    if z < 0.0 {
        return Err(Error::domain(format!("z = {z} negative")));
    }
    let z_max = thm2_z_max(n, n_items, epsilon, beta)?;
    let beta_min = thm2_beta_min(n, n_items, epsilon, delta, z);
    let mut reason = None;
    if beta < beta_min {
        reason = Some(format!("beta = {beta} below beta_min = {beta_min:.6}"));
    } else if z > z_max {
        reason = Some(format!("z = {z} above z_max = {z_max:.6}"));
    }
    let feasible = reason.is_none();
    Ok(Thm2Check {
        feasible,
        beta_min,
        z_max,
        p: feasible.then(|| -f64::exp_m1(-z - epsilon)),
        reason,
    })
}

/// Largest slack `z` the tighter calibration admits for this instance, found
/// by bisection to 1e-9. Larger `z` means larger `p`, hence less noise.
pub fn max_feasible_z(
    n: u64,
    n_items: usize,
    epsilon: f64,
    delta: f64,
    beta: f64,
) -> Result<f64> {
    let base = check_thm2(n, n_items, epsilon, delta, beta, 0.0)?;
    if !base.feasible {
        return Err(Error::infeasible(
            base.reason
                .unwrap_or_else(|| "no feasible slack at z = 0".into()),
        ));
    }
    // beta_min grows monotonically in z (factor e^z), so feasibility is an
    // interval [0, z*]; bisect its upper end within [0, z_max].
    let (mut lo, mut hi) = (0.0_f64, base.z_max);
    if thm2_beta_min(n, n_items, epsilon, delta, hi) <= beta {
        return Ok(hi);
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if thm2_beta_min(n, n_items, epsilon, delta, mid) <= beta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Noise scales for the Gaussian baseline on the normalized histogram query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianParams {
    /// L2 sensitivity of the normalized histogram: `sqrt(2) / n`.
    pub sensitivity: f64,
    /// Noise multiplier `sqrt(2 ln(1.25/delta)) / epsilon`.
    pub sigma: f64,
    /// Per-coordinate noise variance `4 ln(1.25/delta) / (n^2 eps^2)`.
    pub per_coord_variance: f64,
}

pub fn gaussian_params(n: u64, epsilon: f64, delta: f64) -> Result<GaussianParams> {
    if n < 1 {
        return Err(Error::domain("need n >= 1"));
    }
    if epsilon <= 0.0 || !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain("need epsilon > 0 and delta in (0, 1)"));
    }
    let log_term = (1.25 / delta).ln();
    let sensitivity = std::f64::consts::SQRT_2 / n as f64;
    let sigma = (2.0 * log_term).sqrt() / epsilon;
    Ok(GaussianParams {
        sensitivity,
        sigma,
        per_coord_variance: 4.0 * log_term / ((n * n) as f64 * epsilon * epsilon),
    })
}

/// Smallest population size from which the Gaussian baseline's
/// per-coordinate variance drops below the sampling bound `(1-p)/(pn)`:
/// smallest integer `n > 4 (e^eps - 1) ln(1.25/delta) / eps^2`. Below this
/// point sampling noise is the smaller of the two.
pub fn gaussian_crossover_n(epsilon: f64, delta: f64) -> Result<u64> {
    if epsilon <= 0.0 || !(0.0 < delta && delta < 1.0) {
        return Err(Error::domain("need epsilon > 0 and delta in (0, 1)"));
    }
    let threshold =
        4.0 * f64::exp_m1(epsilon) * (1.25 / delta).ln() / (epsilon * epsilon);
    Ok(threshold.max(0.0).floor() as u64 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn p_matches_exponential_oracle() {
        assert_relative_eq!(
            calibrate_p_thm1(0.5).unwrap(),
            0.39346934028736658,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            calibrate_p_thm1(1.0).unwrap(),
            0.63212055882855768,
            max_relative = 1e-12
        );
        assert!(calibrate_p_thm1(1e-9).unwrap() < 1.1e-9);
        assert!(calibrate_p_thm1(0.0).is_err());
        assert!(calibrate_p_thm1(-1.0).is_err());
    }

    #[test]
    fn min_delta_reference_instance() {
        let d = min_delta_thm1(1000, 30, 0.5, 0.02).unwrap();
        assert_relative_eq!(d, 8.0369322073994538e-23, max_relative = 1e-10);
        // Re-substituting the returned delta satisfies the original bound.
        let beta_needed = min_beta_thm1(1000, 30, 0.5, d).unwrap();
        assert!(0.02 >= beta_needed - 1e-12, "bound violated: {beta_needed}");
        // Shrinking delta by 1% breaks the bound: minimality.
        let tighter = min_beta_thm1(1000, 30, 0.5, d * 0.99).unwrap();
        assert!(tighter > 0.02, "1% smaller delta should need beta > 0.02");
    }

    #[test]
    fn min_delta_infeasible_when_base_small() {
        // X scales linearly in n and beta; tiny populations push X below 1.
        assert!(matches!(
            min_delta_thm1(1, 30, 0.5, 0.02),
            Err(Error::Infeasible(_))
        ));
        // X barely above 1 still yields delta >= 1: also infeasible.
        assert!(min_delta_thm1(34, 30, 0.5, 0.02).is_err());
    }

    #[test]
    fn thm2_reference_instance() {
        let c = check_thm2(1000, 30, 0.5, 1e-6, 0.02, 0.0).unwrap();
        assert!(c.feasible);
        assert_relative_eq!(c.beta_min, 0.015947068503873650, max_relative = 1e-10);
        assert_relative_eq!(c.z_max, 4.5422694814032380, max_relative = 1e-10);
        assert_relative_eq!(c.p.unwrap(), 0.39346934028736658, max_relative = 1e-12);
    }

    #[test]
    fn thm2_constraint_violations() {
        let c = check_thm2(1000, 30, 0.5, 1e-6, 0.02, 5.0).unwrap();
        assert!(!c.feasible);
        assert!(c.p.is_none());
        // beta = 1/(N-1) zeroes the slack headroom: bound undefined.
        assert!(matches!(
            check_thm2(1000, 30, 0.5, 1e-6, 1.0 / 29.0, 0.0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn max_z_bisection() {
        let z = max_feasible_z(1000, 30, 0.5, 1e-6, 0.02).unwrap();
        assert_relative_eq!(z, 0.22645725407570122, max_relative = 1e-6);
        let at_z = check_thm2(1000, 30, 0.5, 1e-6, 0.02, z).unwrap();
        assert!(at_z.feasible);
        assert!(!check_thm2(1000, 30, 0.5, 1e-6, 0.02, z + 1e-6)
            .unwrap()
            .feasible);
        // Larger slack means larger p than the z = 0 setting.
        assert!(at_z.p.unwrap() > 0.3935);
    }

    #[test]
    fn gaussian_scales_match_oracle() {
        let g = gaussian_params(1000, 0.1, 1e-7).unwrap();
        assert_relative_eq!(g.sigma, 57.168591380709267, max_relative = 1e-12);
        assert_relative_eq!(
            g.per_coord_variance,
            6.5364956809090118e-3,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            g.sensitivity * g.sigma,
            0.080848597272364669,
            max_relative = 1e-12
        );
        // per_coord_variance = (sensitivity * sigma)^2 by construction.
        assert_relative_eq!(
            g.per_coord_variance,
            (g.sensitivity * g.sigma).powi(2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn crossover_reference_points() {
        assert_eq!(gaussian_crossover_n(1.0, 1e-5).unwrap(), 81);
        // delta = 1.25/e makes the log term exactly 1.
        assert_eq!(gaussian_crossover_n(1.0, 1.25 / std::f64::consts::E).unwrap(), 7);
        // Shrinking delta tenfold always raises the threshold.
        for eps in [0.1, 0.5, 1.0, 2.0] {
            assert!(
                gaussian_crossover_n(eps, 1e-6).unwrap()
                    > gaussian_crossover_n(eps, 1e-5).unwrap()
            );
        }
    }

    #[test]
    fn domain_errors() {
        assert!(min_delta_thm1(0, 30, 0.5, 0.02).is_err());
        assert!(min_delta_thm1(1000, 30, 0.5, 1.5).is_err());
        assert!(check_thm2(1000, 30, 0.5, 2.0, 0.02, 0.0).is_err());
        assert!(check_thm2(1000, 30, 0.5, 1e-6, 0.02, -0.1).is_err());
        assert!(gaussian_params(0, 0.5, 1e-6).is_err());
        assert!(gaussian_crossover_n(0.5, 0.0).is_err());
    }
}
