//! Metric-discrimination experiment: can a metric tell a uniform disk from a
//! disk with 50 of 2000 points re-drawn near the center (or near the edge)?
//!
//! Per trial, two independent ground-truth sets and the two biased sets are
//! drawn, each metric is evaluated against the first ground-truth set, and a
//! Welch t-test over trials yields the probability that the metric cannot
//! distinguish the biased sets from a second ground-truth draw.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::metrics::{pairwise_kl, sinkhorn_w22, welch_p_value};
use crate::rng::{derive_rng, derive_seed};

/// Energy distance between two point sets.
pub fn energy_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let cross = mean_cross_distance(x, y);
    let xx = mean_cross_distance(x, x);
    let yy = mean_cross_distance(y, y);
    (2.0 * cross - xx - yy).max(0.0).sqrt()
}

fn mean_cross_distance(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    // Row sums are collected and reduced sequentially so the result does not
    // depend on the rayon split.
    let rows: Vec<f64> = x
        .par_iter()
        .map(|xi| {
            y.iter()
                .map(|yj| {
                    xi.iter()
                        .zip(yj)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum::<f64>()
        })
        .collect();
    rows.iter().sum::<f64>() / (x.len() * y.len()) as f64
}

fn uniform_disk(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let r = rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            vec![r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

/// Uniform on the annulus r in [r_lo, r_hi] of the unit disk (area-uniform).
fn annulus(n: usize, r_lo: f64, r_hi: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>();
            let r = (r_lo * r_lo + u * (r_hi * r_hi - r_lo * r_lo)).sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            vec![r * theta.cos(), r * theta.sin()]
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
pub struct DiscriminationConfig {
    pub n_trials: usize,
    pub n_samples: usize,
    /// Points replaced by biased draws.
    pub n_biased: usize,
    /// The Sinkhorn column runs on a subsample with a coarse regularization
    /// to keep the experiment tractable; only the pairwise-KL p-value is a
    /// constrained result, the others are reported.
    pub sinkhorn_subsample: usize,
    pub sinkhorn_reg: f64,
    pub sinkhorn_max_iters: usize,
}

impl Default for DiscriminationConfig {
    fn default() -> Self {
        Self {
            n_trials: 1000,
            n_samples: 2000,
            n_biased: 50,
            sinkhorn_subsample: 250,
            sinkhorn_reg: 0.05,
            sinkhorn_max_iters: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscriminationReport {
    /// Welch p-values per metric for the center-biased alternative.
    pub p_center: MetricPValues,
    /// Welch p-values per metric for the edge-biased alternative.
    pub p_edge: MetricPValues,
    /// Per-trial baseline distances (GT1 vs GT2) for self-consistency checks.
    pub baseline_kl: Vec<f64>,
    pub center_kl: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct MetricPValues {
    pub energy_distance: f64,
    pub sinkhorn_w22: f64,
    pub pairwise_kl: f64,
}

const DISK_CLIP: f64 = 2.0;

struct TrialRow {
    ed: [f64; 3],
    w22: [f64; 3],
    kl: [f64; 3],
}

pub fn discrimination_experiment(
    seed: u64,
    cfg: &DiscriminationConfig,
) -> Result<DiscriminationReport> {
    let rows: Vec<Result<TrialRow>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, "discrimination", trial as u64);
            let mut rng = derive_rng(trial_seed, "trial", 0);
            let n = cfg.n_samples;
            let nb = cfg.n_biased.min(n);

            let gt1 = uniform_disk(n, &mut rng);
            let gt2 = uniform_disk(n, &mut rng);
            let mut center = uniform_disk(n - nb, &mut rng);
            center.extend(annulus(nb, 0.0, 0.5, &mut rng));
            let mut edge = uniform_disk(n - nb, &mut rng);
            edge.extend(annulus(nb, 0.5, 1.0, &mut rng));

            let candidates = [&gt2, &center, &edge];
            let mut ed = [0.0; 3];
            let mut kl = [0.0; 3];
            let mut w22 = [0.0; 3];
            for (slot, other) in candidates.iter().enumerate() {
                ed[slot] = energy_distance(&gt1, other);
                kl[slot] = pairwise_kl(&gt1, other, DISK_CLIP)?;
                // Strided subsample keeps the biased tail proportionally
                // represented.
                let sub = cfg.sinkhorn_subsample.min(n);
                let stride = (n / sub).max(1);
                let a: Vec<Vec<f64>> = (0..sub).map(|t| gt1[t * stride].clone()).collect();
                let b: Vec<Vec<f64>> = (0..sub).map(|t| other[t * stride].clone()).collect();
                w22[slot] =
                    sinkhorn_w22(&a, &b, cfg.sinkhorn_reg, cfg.sinkhorn_max_iters, 1e-6)?.cost;
            }
            Ok(TrialRow { ed, w22, kl })
        })
        .collect();

    let mut ed = [Vec::new(), Vec::new(), Vec::new()];
    let mut w22 = [Vec::new(), Vec::new(), Vec::new()];
    let mut kl = [Vec::new(), Vec::new(), Vec::new()];
    for row in rows {
        let row = row?;
        for slot in 0..3 {
            ed[slot].push(row.ed[slot]);
            w22[slot].push(row.w22[slot]);
            kl[slot].push(row.kl[slot]);
        }
    }

    let p_for = |slot: usize| MetricPValues {
        energy_distance: welch_p_value(&ed[0], &ed[slot]),
        sinkhorn_w22: welch_p_value(&w22[0], &w22[slot]),
        pairwise_kl: welch_p_value(&kl[0], &kl[slot]),
    };

    Ok(DiscriminationReport {
        p_center: p_for(1),
        p_edge: p_for(2),
        baseline_kl: kl[0].clone(),
        center_kl: kl[1].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_distance_of_identical_sets_is_zero() {
        let mut rng = derive_rng(0, "ed", 0);
        let x = uniform_disk(100, &mut rng);
        assert_eq!(energy_distance(&x, &x), 0.0);
    }

    #[test]
    fn energy_distance_detects_shift() {
        let mut rng = derive_rng(1, "ed", 0);
        let x = uniform_disk(200, &mut rng);
        let y: Vec<Vec<f64>> = x.iter().map(|p| vec![p[0] + 3.0, p[1]]).collect();
        assert!(energy_distance(&x, &y) > 1.0);
    }

    #[test]
    fn baseline_distances_have_no_systematic_shift() {
        // GT1-vs-GT2 comparisons are exchangeable across trials: the Welch
        // test against themselves (split halves) must not reject.
        let cfg = DiscriminationConfig {
            n_trials: 40,
            n_samples: 300,
            n_biased: 10,
            sinkhorn_subsample: 60,
            ..DiscriminationConfig::default()
        };
        let report = discrimination_experiment(7, &cfg).unwrap();
        let half = report.baseline_kl.len() / 2;
        let p = welch_p_value(&report.baseline_kl[..half], &report.baseline_kl[half..]);
        assert!(p > 0.01, "split-half p {p}");
    }
}
