//! Cluster-NHR baseline: explicit component discovery by single-linkage
//! clustering plus volume-weighted resampling.
//!
//! Unlike the entropy weights, the cluster-volume weights need the intrinsic
//! dimension `p` to invert the kNN density estimate, which is exactly the
//! knowledge the temperature parameter avoids; problems without an intrinsic
//! dimension hint are rejected.

use crate::constraint::{ConstraintProblem, SlackValue};
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::kernels::kernel_step;
use crate::projection::initialize_ensemble;
use crate::resampler::{
    knn_radii, systematic_resample, unit_ball_volume, IterationRecord, MasemConfig, WeightVector,
};
use crate::rng::derive_rng;

#[derive(Clone, Copy, Debug)]
pub struct ClusterConfig {
    /// Single-linkage connectivity threshold; defaults to twice the NHR step.
    pub linkage_radius: f64,
    /// Iterations between cluster-resample steps.
    pub resample_every: usize,
    /// Neighbor index used for the per-cluster volume estimate.
    pub volume_k: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            linkage_radius: 2.0,
            resample_every: 1,
            volume_k: 4,
        }
    }
}

/// Single-linkage clustering: particles share a label iff connected by a
/// chain of hops each within `linkage_radius`. Labels are ordered by the
/// smallest member index.
pub fn cluster_particles(positions: &[Vec<f64>], linkage_radius: f64) -> Vec<usize> {
    let n = positions.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }

    let r2 = linkage_radius * linkage_radius;
    for i in 0..n {
        for j in i + 1..n {
            let d2: f64 = positions[i]
                .iter()
                .zip(&positions[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d2 <= r2 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        let root = find(&mut parent, i);
        if labels[root] == usize::MAX {
            labels[root] = next;
            next += 1;
        }
        labels[i] = labels[root];
    }
    labels
}

/// Volume-weighted resampling weights: cluster volume is the inverse kNN
/// density averaged over members, particle weight is `V_c / n_c` with the
/// usual slack penalty.
pub fn cluster_volume_weights(
    positions: &[Vec<f64>],
    slack: &[SlackValue],
    labels: &[usize],
    p: usize,
    volume_k: usize,
    mu: f64,
) -> Result<WeightVector> {
    let n = positions.len();
    let k = volume_k.min(n - 1).max(1);
    let radii = knn_radii(positions, k)?;
    let vp = unit_ball_volume(p);

    let n_clusters = labels.iter().copied().max().unwrap_or(0) + 1;
    // V_c = n_c * mean_{i in c}(V_p eps^p / k): the member sum collapses the
    // n_c and 1/n_c factors.
    let mut volume = vec![0.0f64; n_clusters];
    let mut count = vec![0usize; n_clusters];
    for i in 0..n {
        volume[labels[i]] += vp * radii.radius(i, k).powi(p as i32) / k as f64;
        count[labels[i]] += 1;
    }

    let raw: Vec<f64> = (0..n)
        .map(|i| {
            let c = labels[i];
            let v_c = volume[c];
            (v_c / count[c] as f64) * (-mu * slack[i].value).exp()
        })
        .collect();
    match WeightVector::normalize(raw) {
        Ok(w) => Ok(w),
        Err(MasemError::InvalidInput(_)) => Ok(WeightVector::uniform(n)),
        Err(e) => Err(e),
    }
}

/// Same loop shape as the entropy-based run, with cluster-volume weights.
pub fn cluster_nhr_run(
    problem: &ConstraintProblem,
    cfg: &MasemConfig,
    ccfg: &ClusterConfig,
    mut callback: impl FnMut(&IterationRecord, &ParticleEnsemble),
) -> Result<(ParticleEnsemble, Vec<IterationRecord>)> {
    cfg.validate()?;
    let p = problem.intrinsic_dim_hint.ok_or_else(|| {
        MasemError::Config("cluster volume estimation needs intrinsic_dim_hint".into())
    })?;

    let mut init_rng = derive_rng(cfg.seed, "init", 0);
    let mut ensemble =
        initialize_ensemble(problem, cfg.n_particles, &mut init_rng, &cfg.projection)?;
    let n = ensemble.len();
    let mut log = Vec::with_capacity(cfg.n_iterations + 1);

    for _ in 0..cfg.rejuvenation_steps {
        kernel_step(&mut ensemble, problem, &cfg.kernel)?;
    }
    let rec = IterationRecord {
        iteration: 0,
        ess: n as f64,
        mean_slack: ensemble.mean_slack_value(),
        max_violation: ensemble.max_violation(),
        component_counts: ensemble.component_counts(problem),
    };
    callback(&rec, &ensemble);
    log.push(rec);

    let mut resample_rng = derive_rng(cfg.seed, "resample", 0);
    for t in 1..=cfg.n_iterations {
        let mut ess = n as f64;
        if t % ccfg.resample_every.max(1) == 0 {
            let labels = cluster_particles(ensemble.positions(), ccfg.linkage_radius);
            let weights = cluster_volume_weights(
                ensemble.positions(),
                ensemble.slack(),
                &labels,
                p,
                ccfg.volume_k,
                cfg.penalty,
            )?;
            ess = weights.ess();
            let idx = systematic_resample(&weights, n, &mut resample_rng);
            ensemble.resample(&idx);
        }
        for _ in 0..cfg.rejuvenation_steps {
            kernel_step(&mut ensemble, problem, &cfg.kernel)?;
        }
        ensemble.iteration = t;
        let rec = IterationRecord {
            iteration: t,
            ess,
            mean_slack: ensemble.mean_slack_value(),
            max_violation: ensemble.max_violation(),
            component_counts: ensemble.component_counts(problem),
        };
        callback(&rec, &ensemble);
        log.push(rec);
    }
    Ok((ensemble, log))
}
