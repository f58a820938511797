//! Nearest-neighbor differential entropy estimation and the feasible-entropy
//! metric.

use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::digamma;

use crate::constraint::ConstraintProblem;
use crate::resampler::{knn_radii, unit_ball_volume};

/// Nearest-neighbor entropy estimate
/// `H = psi(n) - psi(k) + log V_d + (d/n) sum_i log eps_{i,k}`.
/// Duplicate points drive the estimate to -infinity, which callers treat as
/// minimal diversity.
pub fn kl_entropy(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let radii = knn_radii(points, k).expect("valid k for entropy estimate");
    let sum_log: f64 = (0..n)
        .map(|i| {
            let eps = radii.radius(i, k);
            if eps > 0.0 {
                eps.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum();
    digamma(n as f64) - digamma(k as f64) + unit_ball_volume(d).ln()
        + d as f64 / n as f64 * sum_log
}

const SUBSET_SIZE: usize = 100;
const SUBSET_COUNT: usize = 10;
const ENSEMBLE_KS: [usize; 3] = [2, 4, 8];

/// Feasible-sample entropy: the fraction of feasible samples times the summed
/// nearest-neighbor entropy estimates over resampled 100-point subsets for
/// k in {2, 4, 8}. Returns `None` when fewer than 100 samples are feasible.
pub fn feasible_entropy(
    points: &[Vec<f64>],
    problem: &ConstraintProblem,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> Option<f64> {
    let feasible: Vec<&Vec<f64>> = points
        .iter()
        .filter(|x| problem.is_feasible(x, tol))
        .collect();
    if feasible.len() < SUBSET_SIZE {
        return None;
    }
    let fraction = feasible.len() as f64 / points.len() as f64;

    let mut subsets: Vec<Vec<Vec<f64>>> = Vec::with_capacity(SUBSET_COUNT);
    for _ in 0..SUBSET_COUNT {
        let idx = rand::seq::index::sample(rng, feasible.len(), SUBSET_SIZE);
        subsets.push(idx.iter().map(|i| feasible[i].clone()).collect());
    }

    let mut total = 0.0;
    for k in ENSEMBLE_KS {
        for subset in &subsets {
            total += kl_entropy(subset, k);
        }
    }
    Some(fraction * total)
}
