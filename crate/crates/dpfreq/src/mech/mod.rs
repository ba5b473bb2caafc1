//! Sampling-based private frequency estimation mechanisms and their
//! calibration and variance-prediction formulas.

pub mod calibrate;
pub mod dpcs;
pub mod gaussian;
pub mod report_set;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Second-stage reporting distribution: uniform over all size-`alpha*N`
/// subsets, or adaptive with the true item preferred by factor `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reporting {
    Uniform,
    Adaptive,
}

/// Full parameter set for the sampling mechanisms and protocols.
///
/// Not every mechanism reads every field: one-stage sampling uses only `p`,
/// the two-stage protocols add `alpha`, `chi`, `gamma`, and the padded
/// variant adds the collusion bound `phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismParams {
    pub epsilon: f64,
    pub delta: Option<f64>,
    /// First-stage participation probability.
    pub p: f64,
    /// Minimum item-frequency fraction assumed by the calibration bounds.
    pub beta: Option<f64>,
    /// Slack in the tighter calibration `p = 1 - e^(-z-epsilon)`.
    pub z: f64,
    /// Reporting proportion: each report names `alpha * N` items.
    pub alpha: f64,
    /// Adaptive preference for the true item.
    pub gamma: f64,
    pub chi: Reporting,
    /// Collusion bound: padded elections guarantee `phi + 1` aggregators.
    pub phi: usize,
}

impl MechanismParams {
    /// Two-stage defaults around a given participation probability.
    pub fn two_stage(p: f64, alpha: f64, chi: Reporting, gamma: f64) -> Self {
        MechanismParams {
            epsilon: 0.0,
            delta: None,
            p,
            beta: None,
            z: 0.0,
            alpha,
            gamma,
            chi,
            phi: 0,
        }
    }

    /// Probability that a report set contains the reporter's true item.
    pub fn p_chi(&self) -> f64 {
        report_set::report_inclusion_prob(self.alpha, self.chi, self.gamma)
    }

    /// Overall per-user reporting probability `p * p_chi`.
    pub fn q_chi(&self) -> f64 {
        report_set::q_chi(self.p, self.p_chi())
    }

    /// Report-set size `alpha * N`, enforcing integrality.
    pub fn report_size(&self, n_items: usize) -> Result<usize> {
        report_set::report_size(n_items, self.alpha)
    }

    pub fn validate(&self, n_items: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::domain(format!("p = {} outside [0, 1]", self.p)));
        }
        if let Some(d) = self.delta {
            if !(0.0 < d && d < 1.0) {
                return Err(Error::domain(format!("delta = {d} outside (0, 1)")));
            }
        }
        if let Some(b) = self.beta {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::domain(format!("beta = {b} outside (0, 1)")));
            }
        }
        if self.z < 0.0 {
            return Err(Error::domain(format!("z = {} negative", self.z)));
        }
        self.report_size(n_items)?;
        if self.chi == Reporting::Adaptive && self.gamma <= 1.0 {
            return Err(Error::domain(format!(
                "adaptive reporting needs gamma > 1, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// A frequency estimate: integer tallies (when the mechanism produces them)
/// plus the normalized per-item estimates and the divisor that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEstimate {
    raw_counts: Option<Vec<u64>>,
    normalized: Vec<f64>,
    scale: f64,
}

impl FrequencyEstimate {
    pub(crate) fn from_counts(raw_counts: Vec<u64>, scale: f64) -> Self {
        let normalized = raw_counts.iter().map(|&c| c as f64 / scale).collect();
        FrequencyEstimate {
            raw_counts: Some(raw_counts),
            normalized,
            scale,
        }
    }

    pub(crate) fn from_values(normalized: Vec<f64>, scale: f64) -> Self {
        FrequencyEstimate {
            raw_counts: None,
            normalized,
            scale,
        }
    }

    /// Integer tallies before normalization, absent for real-valued outputs.
    pub fn raw_counts(&self) -> Option<&[u64]> {
        self.raw_counts.as_deref()
    }

    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// The divisor applied to raw tallies, e.g. `p * n` or `q_chi * n`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn n_items(&self) -> usize {
        self.normalized.len()
    }

    /// Most frequent item (1-based); ties resolve to the lowest index.
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in self.normalized.iter().enumerate() {
            if best.map_or(true, |(_, bv)| v > bv) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k + 1)
    }
}
