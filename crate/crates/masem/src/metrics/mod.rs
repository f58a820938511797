//! Evaluation metrics: Sinkhorn transport cost, pairwise-distance histogram
//! KL, feasible entropy, component total variation, homotopy-class entropy,
//! and mean max slack, plus the Welch test used by the metric-discrimination
//! experiment.

pub mod discrimination;
pub mod entropy;
pub mod sinkhorn;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::constraint::ConstraintProblem;
use crate::error::{MasemError, Result};

pub use discrimination::{discrimination_experiment, energy_distance, DiscriminationReport};
pub use entropy::{feasible_entropy, kl_entropy};
pub use sinkhorn::{median_cost_reg, sinkhorn_w22, SinkhornResult};

pub const PAIRWISE_BINS: usize = 50;
/// Smoothing mass for predicted histogram bins that would otherwise be empty.
const HIST_SMOOTHING: f64 = 1e-12;

/// One evaluation record; absent metrics are omitted from serialization.
#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub schema_version: u32,
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub n: usize,
    pub iteration: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinkhorn_w22: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise_kl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_components: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homotopy_entropy: Option<f64>,
    pub mean_max_slack: f64,
}

/// All pairwise Euclidean distances within a set (i < j).
pub fn pairwise_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = points[i].clone();
            let tail = &points[i + 1..];
            tail.iter()
                .map(move |xj| {
                    xi.iter()
                        .zip(xj)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

fn histogram(values: &[f64], bins: usize, clip: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for &v in values {
        let idx = ((v / clip * bins as f64) as usize).min(bins - 1);
        h[idx] += 1.0;
    }
    h
}

/// Forward KL between 50-bin normalized histograms of pairwise distances
/// clipped to `[0, clip]`, ground truth as the reference distribution.
pub fn pairwise_kl(gt: &[Vec<f64>], predicted: &[Vec<f64>], clip: f64) -> Result<f64> {
    if gt.len() < 2 || predicted.len() < 2 {
        return Err(MasemError::InvalidInput(
            "pairwise KL needs at least two points per set".into(),
        ));
    }
    if !(clip > 0.0) {
        return Err(MasemError::InvalidInput("clip must be positive".into()));
    }
    let mut p = histogram(&pairwise_distances(gt), PAIRWISE_BINS, clip);
    let mut q = histogram(&pairwise_distances(predicted), PAIRWISE_BINS, clip);
    let p_total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= p_total;
    }
    for (qv, pv) in q.iter_mut().zip(&p) {
        if *qv == 0.0 && *pv > 0.0 {
            *qv = HIST_SMOOTHING;
        }
    }
    let q_total: f64 = q.iter().sum();
    for v in &mut q {
        *v /= q_total;
    }
    Ok(p
        .iter()
        .zip(&q)
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, qv)| pv * (pv / qv).ln())
        .sum())
}

/// Max-norm distance between empirical component masses and the target.
/// Samples that are infeasible at `tol` or fall outside the labeled range
/// form an extra bucket with target mass zero.
pub fn tv_components(samples: &[Vec<f64>], problem: &ConstraintProblem, tol: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(MasemError::InvalidInput("empty sample set".into()));
    }
    let label = problem.component_of.as_ref().ok_or_else(|| {
        MasemError::Unsupported(format!("problem '{}' has no component labeler", problem.name))
    })?;
    let alpha_star = problem.component_masses.as_ref().ok_or_else(|| {
        MasemError::Unsupported(format!(
            "problem '{}' has no target component masses",
            problem.name
        ))
    })?;
    let c = alpha_star.len();
    let mut counts = vec![0usize; c + 1];
    for x in samples {
        let idx = if problem.is_feasible(x, tol) {
            label(x).min(c)
        } else {
            c
        };
        counts[idx] += 1;
    }
    let n = samples.len() as f64;
    let mut tv: f64 = counts[c] as f64 / n;
    for (i, &count) in counts[..c].iter().enumerate() {
        tv = tv.max((count as f64 / n - alpha_star[i]).abs());
    }
    Ok(tv)
}

/// Shannon entropy (natural log) of above/below-obstacle signatures for
/// x-monotone paths: per obstacle, the path's interpolated y at the obstacle
/// center's x decides the bit.
pub fn homotopy_entropy(paths: &[Vec<[f64; 2]>], obstacles: &[([f64; 2], f64)]) -> f64 {
    use std::collections::HashMap;
    let mut counts: HashMap<Vec<bool>, usize> = HashMap::new();
    for path in paths {
        let signature: Vec<bool> = obstacles
            .iter()
            .map(|(c, _)| path_above(path, c))
            .collect();
        *counts.entry(signature).or_insert(0) += 1;
    }
    let total = paths.len() as f64;
    counts
        .values()
        .map(|&n| {
            let p = n as f64 / total;
            -p * p.ln()
        })
        .sum()
}

fn path_above(path: &[[f64; 2]], center: &[f64; 2]) -> bool {
    let cx = center[0];
    // Nearest endpoint decides when the path does not span the obstacle's x.
    if cx <= path[0][0] {
        return path[0][1] > center[1];
    }
    if cx >= path[path.len() - 1][0] {
        return path[path.len() - 1][1] > center[1];
    }
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a[0] <= cx && cx <= b[0]) && b[0] > a[0] {
            let t = (cx - a[0]) / (b[0] - a[0]);
            return a[1] + t * (b[1] - a[1]) > center[1];
        }
    }
    path[path.len() - 1][1] > center[1]
}

/// Mean over samples of the max constraint violation.
pub fn mean_max_slack(samples: &[Vec<f64>], problem: &ConstraintProblem) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for x in samples {
        total += problem.slack(x)?.max_violation;
    }
    Ok(total / samples.len() as f64)
}

/// Two-sided Welch t-test p-value from summary statistics, with
/// Welch-Satterthwaite degrees of freedom.
pub fn welch_p_value(xs: &[f64], ys: &[f64]) -> f64 {
    let n1 = xs.len() as f64;
    let n2 = ys.len() as f64;
    let m1 = xs.iter().sum::<f64>() / n1;
    let m2 = ys.iter().sum::<f64>() / n2;
    let v1 = xs.iter().map(|x| (x - m1).powi(2)).sum::<f64>() / (n1 - 1.0);
    let v2 = ys.iter().map(|y| (y - m2).powi(2)).sum::<f64>() / (n2 - 1.0);
    let se2 = v1 / n1 + v2 / n2;
    if se2 <= 0.0 {
        return if m1 == m2 { 1.0 } else { 0.0 };
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}
