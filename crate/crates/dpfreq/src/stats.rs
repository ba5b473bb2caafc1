//! Statistical helpers for the privacy proxy tests and the harness.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    (1.0 - d.cdf(statistic)).clamp(0.0, 1.0)
}

/// Pearson goodness-of-fit test of `counts` against the uniform distribution
/// over `counts.len()` cells.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquare {
    assert!(counts.len() >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    assert!(total > 0, "need at least one observation");
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = counts.len() - 1;
    ChiSquare {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Pearson goodness-of-fit test of `counts` against explicit cell
/// probabilities (which must be positive and sum to 1).
pub fn chi_square_expected(counts: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(counts.len(), probs.len(), "cell layouts differ");
    assert!(counts.len() >= 2, "need at least two cells");
    let total: u64 = counts.iter().sum();
    assert!(total > 0, "need at least one observation");
    assert!(
        (probs.iter().sum::<f64>() - 1.0).abs() < 1e-9 && probs.iter().all(|&p| p > 0.0),
        "cell probabilities must be positive and sum to 1"
    );
    let statistic = counts
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = total as f64 * p;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let dof = counts.len() - 1;
    ChiSquare {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

/// Two-sample homogeneity test: were `a` and `b` drawn from the same
/// categorical distribution? Expected cell counts come from the pooled
/// proportions.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> ChiSquare {
    assert_eq!(a.len(), b.len(), "samples need identical cell layouts");
    assert!(a.len() >= 2, "need at least two cells");
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    assert!(na > 0 && nb > 0, "both samples need observations");
    let total = (na + nb) as f64;
    let mut statistic = 0.0;
    for (&oa, &ob) in a.iter().zip(b) {
        let pooled = (oa + ob) as f64 / total;
        if pooled == 0.0 {
            continue;
        }
        let ea = pooled * na as f64;
        let eb = pooled * nb as f64;
        statistic += (oa as f64 - ea).powi(2) / ea;
        statistic += (ob as f64 - eb).powi(2) / eb;
    }
    let dof = a.len() - 1;
    ChiSquare {
        statistic,
        dof,
        p_value: upper_tail(statistic, dof),
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (divides by len - 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2);
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}
