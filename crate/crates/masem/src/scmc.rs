//! Sequentially constrained Monte Carlo over annealed soft constraints.
//!
//! SMC targeting `pi_t(x) proportional to exp(-beta_t * Slack(x))` on the
//! bounding box for an increasing penalty schedule `beta_1 < ... < beta_T`.
//! Each stage reweights by the incremental penalty, systematic-resamples, and
//! rejuvenates with random-walk Metropolis sweeps whose proposal scale adapts
//! toward a 0.3 acceptance rate. The sampler cannot guarantee exact
//! feasibility, so callers apply a Gauss-Newton projection pass before
//! evaluating metrics; the pre-projection slack is reported in the log.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rayon::prelude::*;

use crate::constraint::ConstraintProblem;
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::projection::{gauss_newton_project, ProjectionConfig};
use crate::resampler::{systematic_resample, WeightVector};
use crate::rng::{derive_rng, standard_normal};

const RWM_SWEEPS_PER_STAGE: usize = 5;
const TARGET_ACCEPT: f64 = 0.3;

/// Geometric schedule `beta_1 = start, ..., beta_T = end`.
pub fn geometric_schedule(start: f64, end: f64, stages: usize) -> Vec<f64> {
    assert!(stages >= 1 && start > 0.0 && end >= start);
    if stages == 1 {
        return vec![end];
    }
    let ratio = (end / start).powf(1.0 / (stages - 1) as f64);
    (0..stages).map(|t| start * ratio.powi(t as i32)).collect()
}

#[derive(Clone, Debug, Default)]
pub struct ScmcLog {
    /// Mean max violation before the final projection pass.
    pub pre_projection_mean_max_violation: f64,
    pub pre_projection_mean_slack: f64,
    pub stage_ess: Vec<f64>,
    pub stage_accept: Vec<f64>,
}

/// Run SCMC with `n` particles over `schedule`, then project the survivors.
pub fn scmc_run(
    problem: &ConstraintProblem,
    n: usize,
    schedule: &[f64],
    seed: u64,
    final_projection: &ProjectionConfig,
) -> Result<(ParticleEnsemble, ScmcLog)> {
    if n == 0 {
        return Err(MasemError::InvalidInput("n must be >= 1".into()));
    }
    if schedule.is_empty() || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MasemError::InvalidInput(
            "schedule must be strictly increasing and nonempty".into(),
        ));
    }

    let d = problem.dim;
    let mut init_rng = derive_rng(seed, "scmc-init", 0);
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d)
            .map(|j| init_rng.random_range(problem.lo[j]..problem.hi[j]))
            .collect();
        positions.push(x);
    }
    let mut slot_rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|i| derive_rng(seed, "scmc-slot", i as u64))
        .collect();
    let mut slacks = positions
        .iter()
        .map(|x| problem.slack(x))
        .collect::<Result<Vec<_>>>()?;

    let mut resample_rng = derive_rng(seed, "scmc-resample", 0);
    let mut proposal_scale = 0.25 * problem.mean_bound_width();
    let mut log = ScmcLog::default();
    let mut prev_beta = 0.0;

    for (stage, &beta) in schedule.iter().enumerate() {
        // Reweight by the incremental penalty exp(-(beta_t - beta_{t-1}) S).
        let dbeta = beta - prev_beta;
        let log_w: Vec<f64> = slacks.iter().map(|s| -dbeta * s.value).collect();
        let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max_lw.is_finite() {
            return Err(MasemError::DegenerateWeights { stage });
        }
        let unnormalized: Vec<f64> = log_w.iter().map(|lw| (lw - max_lw).exp()).collect();
        let weights = WeightVector::normalize(unnormalized)
            .map_err(|_| MasemError::DegenerateWeights { stage })?;
        log.stage_ess.push(weights.ess());

        let idx = systematic_resample(&weights, n, &mut resample_rng);
        let new_positions: Vec<Vec<f64>> = idx.iter().map(|&i| positions[i].clone()).collect();
        let new_slacks: Vec<_> = idx.iter().map(|&i| slacks[i]).collect();
        positions = new_positions;
        slacks = new_slacks;

        // Rejuvenate with adaptive random-walk Metropolis targeting pi_t.
        let mut stage_accept = 0.0;
        for _ in 0..RWM_SWEEPS_PER_STAGE {
            let scale = proposal_scale;
            let accepts: Vec<Result<bool>> = positions
                .par_iter_mut()
                .zip(slacks.par_iter_mut())
                .zip(slot_rngs.par_iter_mut())
                .map(|((x, s), rng)| {
                    let proposal: Vec<f64> = x
                        .iter()
                        .map(|&v| v + scale * standard_normal(rng))
                        .collect();
                    let log_accept_u: f64 = rng.random();
                    if !problem.in_bounds(&proposal) {
                        return Ok(false);
                    }
                    let s_new = problem.slack(&proposal)?;
                    if log_accept_u.ln() < -beta * (s_new.value - s.value) {
                        *x = proposal;
                        *s = s_new;
                        Ok(true)
                    } else {
                        Ok(false)
                    }
                })
                .collect();
            let mut accepted = 0usize;
            for a in accepts {
                if a? {
                    accepted += 1;
                }
            }
            let rate = accepted as f64 / n as f64;
            stage_accept = rate;
            proposal_scale = (proposal_scale * ((rate - TARGET_ACCEPT)).exp()).clamp(1e-8, 1e3);
        }
        log.stage_accept.push(stage_accept);
        prev_beta = beta;
    }

    log.pre_projection_mean_max_violation =
        slacks.iter().map(|s| s.max_violation).sum::<f64>() / n as f64;
    log.pre_projection_mean_slack = slacks.iter().map(|s| s.value).sum::<f64>() / n as f64;

    // Final feasibility restoration before metric evaluation.
    let cfg = final_projection.exact();
    let projected: Vec<Result<(Vec<f64>, crate::constraint::SlackValue)>> = positions
        .par_iter()
        .zip(slot_rngs.par_iter_mut())
        .map(|(x, rng)| {
            let out = gauss_newton_project(x, problem, &cfg, rng)?;
            let s = problem.slack(&out.x)?;
            Ok((out.x, s))
        })
        .collect();
    let mut final_positions = Vec::with_capacity(n);
    let mut final_slacks = Vec::with_capacity(n);
    for p in projected {
        let (x, s) = p?;
        final_positions.push(x);
        final_slacks.push(s);
    }
    Ok((
        ParticleEnsemble::from_parts(final_positions, final_slacks, slot_rngs),
        log,
    ))
}
