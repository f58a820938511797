//! Entropy-based resampling: kNN radii, entropy weights with slack penalty
//! and k-ensembling, systematic resampling, and the full sampling loop.
//!
//! The loop alternates importance resampling toward the maximum-entropy
//! (uniform) target with local rejuvenation. Weights come from k-nearest-
//! neighbor radii: particles in sparsely covered regions get larger radii and
//! therefore more offspring, which redistributes mass across disconnected
//! components that no local kernel can cross.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::constraint::{ConstraintProblem, SlackValue};
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::kernels::{kernel_step, KernelConfig};
use crate::projection::{initialize_ensemble, ProjectionConfig};
use crate::rng::derive_rng;

/// Normalized, nonnegative resampling weights.
#[derive(Clone, Debug)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Normalize nonnegative unnormalized weights. A vector that sums to zero
    /// is rejected; callers decide whether to fall back to uniform.
    pub fn normalize(mut w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(MasemError::InvalidInput("empty weight vector".into()));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MasemError::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return Err(MasemError::InvalidInput("weights sum to zero".into()));
        }
        for v in &mut w {
            *v /= sum;
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Effective sample size `1 / sum(w_i^2)`.
    pub fn ess(&self) -> f64 {
        1.0 / self.0.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Distances from each point to its 1st..k-th nearest neighbors (self
/// excluded), rows sorted non-decreasing, ties broken by point index.
#[derive(Clone, Debug)]
pub struct KnnRadii {
    eps: Vec<Vec<f64>>,
}

impl KnnRadii {
    /// Build from precomputed rows (each sorted non-decreasing, equal
    /// length). Exists so tests can plug in independent oracles.
    pub fn from_rows(eps: Vec<Vec<f64>>) -> Result<Self> {
        if eps.is_empty() {
            return Err(MasemError::InvalidInput("empty radii".into()));
        }
        let k = eps[0].len();
        for row in &eps {
            if row.len() != k || row.windows(2).any(|w| w[0] > w[1]) {
                return Err(MasemError::InvalidInput(
                    "radii rows must share a length and be sorted".into(),
                ));
            }
        }
        Ok(Self { eps })
    }

    pub fn k(&self) -> usize {
        self.eps.first().map_or(0, Vec::len)
    }

    /// Distance from point `i` to its `j`-th nearest neighbor (1-indexed).
    pub fn radius(&self, i: usize, j: usize) -> f64 {
        self.eps[i][j - 1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.eps[i]
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }
}

/// Exact O(N^2 d) nearest-neighbor radii. Desk-scale ensembles (a few
/// thousand particles) do not need a spatial index; one could be slotted in
/// here without touching callers.
pub fn knn_radii(positions: &[Vec<f64>], k: usize) -> Result<KnnRadii> {
    let n = positions.len();
    if k == 0 || k + 1 > n {
        return Err(MasemError::InvalidInput(format!(
            "k must satisfy 1 <= k <= N-1 (k={k}, N={n})"
        )));
    }
    let eps: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = &positions[i];
            let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
            for (j, xj) in positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d2: f64 = xi
                    .iter()
                    .zip(xj)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dists.push((d2.sqrt(), j));
            }
            dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dists.truncate(k);
            dists.into_iter().map(|(d, _)| d).collect()
        })
        .collect();
    Ok(KnnRadii { eps })
}

/// Volume of the unit ball in `R^p`.
pub fn unit_ball_volume(p: usize) -> f64 {
    std::f64::consts::PI.powf(p as f64 / 2.0) / gamma(p as f64 / 2.0 + 1.0)
}

/// kNN density estimate `rho(x_i) = k / (N V_p eps_{i,k}^p)`. Zero radius
/// yields +infinity. Used for estimator-consistency checks, not the loop.
pub fn knn_density(radii: &KnnRadii, n: usize, k: usize, p: usize) -> Vec<f64> {
    let vp = unit_ball_volume(p);
    (0..radii.len())
        .map(|i| {
            let eps = radii.radius(i, k);
            k as f64 / (n as f64 * vp * eps.powi(p as i32))
        })
        .collect()
}

/// Entropy resampling weights: the mean of the first k radii is raised to the
/// temperature and penalized by `exp(-mu * slack)`. If every unnormalized
/// weight vanishes the result falls back to uniform.
pub fn entropy_weights(
    radii: &KnnRadii,
    slack: &[SlackValue],
    tau: f64,
    mu: f64,
) -> Result<WeightVector> {
    let n = radii.len();
    if slack.len() != n {
        return Err(MasemError::Dimension {
            expected: n,
            got: slack.len(),
        });
    }
    if !(tau > 0.0) || !tau.is_finite() || !mu.is_finite() || mu < 0.0 {
        return Err(MasemError::InvalidInput(
            "tau must be positive and mu nonnegative".into(),
        ));
    }
    let k = radii.k() as f64;
    let mut raw = Vec::with_capacity(n);
    for i in 0..n {
        let row = radii.row(i);
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MasemError::NonFinite {
                what: "knn radius",
                index: i,
            });
        }
        if !slack[i].value.is_finite() {
            return Err(MasemError::NonFinite {
                what: "slack",
                index: i,
            });
        }
        let mean_radius = row.iter().sum::<f64>() / k;
        raw.push(mean_radius.powf(tau) * (-mu * slack[i].value).exp());
    }
    match WeightVector::normalize(raw) {
        Ok(w) => Ok(w),
        // All-zero weights (e.g. duplicated points after heavy resampling).
        Err(MasemError::InvalidInput(_)) => Ok(WeightVector::uniform(n)),
        Err(e) => Err(e),
    }
}

/// Systematic resampling: one uniform offset `u ~ U[0, 1/N_out)` and stratum
/// points `u + j/N_out` matched against the cumulative weights, so the copy
/// count of index `i` is within one of `N_out * w_i`.
pub fn systematic_resample(
    weights: &WeightVector,
    n_out: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    assert!(n_out >= 1);
    let n = weights.len();
    let w = weights.as_slice();
    let step = 1.0 / n_out as f64;
    let u0: f64 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n_out);
    let mut cumulative = w[0];
    let mut i = 0usize;
    for j in 0..n_out {
        let u = u0 + j as f64 * step;
        // Select min{i : cum_i > u}, so a stratum point exactly on a weight
        // boundary belongs to the next index.
        while u >= cumulative && i + 1 < n {
            i += 1;
            cumulative += w[i];
        }
        out.push(i);
    }
    out
}

/// Knobs of the full sampling loop.
#[derive(Clone, Debug)]
pub struct MasemConfig {
    pub n_particles: usize,
    /// Resampling iterations T.
    pub n_iterations: usize,
    /// Rejuvenation steps M between resamples.
    pub rejuvenation_steps: usize,
    /// Radii 1..k_max are averaged into each particle's weight.
    pub k_max: usize,
    pub temperature: f64,
    /// Slack penalty mu.
    pub penalty: f64,
    pub kernel: KernelConfig,
    pub projection: ProjectionConfig,
    pub seed: u64,
}

impl MasemConfig {
    pub fn new(n_particles: usize, kernel: KernelConfig) -> Self {
        Self {
            n_particles,
            n_iterations: 20,
            rejuvenation_steps: 50,
            k_max: 4,
            temperature: 1.0,
            penalty: 1000.0,
            kernel,
            projection: ProjectionConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(MasemError::Config("need at least 2 particles".into()));
        }
        if self.k_max == 0 || self.k_max > self.n_particles - 1 {
            return Err(MasemError::Config(format!(
                "k_max must be in 1..=N-1 (k={}, N={})",
                self.k_max, self.n_particles
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(MasemError::Config("temperature must be positive".into()));
        }
        if self.rejuvenation_steps == 0 {
            return Err(MasemError::Config("need at least 1 rejuvenation step".into()));
        }
        if self.penalty < 0.0 {
            return Err(MasemError::Config("penalty must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-iteration log record of the sampling loop.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Effective sample size of the weights used at this iteration's
    /// resampling step (N for iteration 0, which only rejuvenates).
    pub ess: f64,
    pub mean_slack: f64,
    pub max_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub component_counts: Option<Vec<usize>>,
}

fn record(
    iteration: usize,
    ess: f64,
    ensemble: &ParticleEnsemble,
    problem: &ConstraintProblem,
) -> IterationRecord {
    IterationRecord {
        iteration,
        ess,
        mean_slack: ensemble.mean_slack_value(),
        max_violation: ensemble.max_violation(),
        component_counts: ensemble.component_counts(problem),
    }
}

/// Initialize, rejuvenate, then iterate resample + rejuvenate. The callback
/// fires after each iteration (including the post-initialization one) with a
/// read-only view of the ensemble.
pub fn masem_run(
    problem: &ConstraintProblem,
    cfg: &MasemConfig,
    mut callback: impl FnMut(&IterationRecord, &ParticleEnsemble),
) -> Result<(ParticleEnsemble, Vec<IterationRecord>)> {
    cfg.validate()?;
    let mut init_rng = derive_rng(cfg.seed, "init", 0);
    let ensemble = initialize_ensemble(problem, cfg.n_particles, &mut init_rng, &cfg.projection)?;
    masem_loop(ensemble, problem, cfg, &mut callback)
}

/// The loop of [`masem_run`] starting from an existing ensemble; used by
/// experiments that control initialization explicitly.
pub fn masem_loop(
    mut ensemble: ParticleEnsemble,
    problem: &ConstraintProblem,
    cfg: &MasemConfig,
    callback: &mut impl FnMut(&IterationRecord, &ParticleEnsemble),
) -> Result<(ParticleEnsemble, Vec<IterationRecord>)> {
    cfg.validate()?;
    let n = ensemble.len();
    let mut log = Vec::with_capacity(cfg.n_iterations + 1);

    for _ in 0..cfg.rejuvenation_steps {
        kernel_step(&mut ensemble, problem, &cfg.kernel)?;
    }
    ensemble.iteration = 0;
    let rec = record(0, n as f64, &ensemble, problem);
    callback(&rec, &ensemble);
    log.push(rec);

    let mut resample_rng = derive_rng(cfg.seed, "resample", 0);
    for t in 1..=cfg.n_iterations {
        let radii = knn_radii(ensemble.positions(), cfg.k_max)?;
        let weights = entropy_weights(&radii, ensemble.slack(), cfg.temperature, cfg.penalty)?;
        let ess = weights.ess();
        let indices = systematic_resample(&weights, n, &mut resample_rng);
        ensemble.resample(&indices);
        for _ in 0..cfg.rejuvenation_steps {
            kernel_step(&mut ensemble, problem, &cfg.kernel)?;
        }
        ensemble.iteration = t;
        let rec = record(t, ess, &ensemble, problem);
        callback(&rec, &ensemble);
        log.push(rec);
    }
    Ok((ensemble, log))
}
