//! Gauss-Newton descent on the squared slack.
//!
//! Used to project initial particles onto the feasible set and to re-project
//! proposals inside local kernels. Steps solve the damped normal equations
//! `(J^T J + lambda I) delta = J^T r` for the stacked residual of
//! [`ConstraintProblem::residual_and_jacobian`], optionally perturbed by
//! Gaussian noise during initialization.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use rayon::prelude::*;

use crate::constraint::ConstraintProblem;
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::rng::{derive_rng, standard_normal};

#[derive(Clone, Copy, Debug)]
pub struct ProjectionConfig {
    pub max_steps: usize,
    /// Convergence threshold on the max constraint violation.
    pub tol: f64,
    /// Levenberg damping on the normal equations.
    pub damping: f64,
    /// Std of the Gaussian perturbation added during the exploration phase
    /// (the first 60% of the step budget, used at initialization to improve
    /// mode coverage). The remaining steps are noise-free monotone descent,
    /// so the iteration still reaches the violation tolerance. Zero disables
    /// the exploration phase entirely.
    pub noise_scale: f64,
    pub step_scale: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            max_steps: 500,
            tol: 1e-9,
            damping: 1e-8,
            noise_scale: 0.01,
            step_scale: 1.0,
        }
    }
}

impl ProjectionConfig {
    /// Noise-free variant used for re-projection inside kernels.
    pub fn exact(mut self) -> Self {
        self.noise_scale = 0.0;
        self
    }
}

#[derive(Clone, Debug)]
pub struct ProjectionOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub steps_used: usize,
}

const MAX_HALVINGS: usize = 30;

/// Project `x0` toward the feasible set. Noise-free steps keep the slack
/// sequence non-increasing (backtracking up to 30 halvings per step; if no
/// decrease is found the outcome reports `converged = false`).
pub fn gauss_newton_project(
    x0: &[f64],
    problem: &ConstraintProblem,
    cfg: &ProjectionConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ProjectionOutcome> {
    let mut x = problem.clamp_to_bounds(x0);
    if x.len() != problem.dim {
        return Err(MasemError::Dimension {
            expected: problem.dim,
            got: x.len(),
        });
    }
    let mut slack = problem.slack(&x)?;
    if slack.max_violation <= cfg.tol {
        return Ok(ProjectionOutcome {
            x,
            converged: true,
            steps_used: 0,
        });
    }

    let noisy_steps = if cfg.noise_scale > 0.0 {
        (cfg.max_steps as f64 * 0.6) as usize
    } else {
        0
    };

    for step in 1..=cfg.max_steps {
        let (r, jac) = problem.residual_and_jacobian(&x)?;
        let delta = solve_damped_normal_equations(&jac, &r, cfg.damping)?;

        if step <= noisy_steps {
            let mut next: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    let eta: f64 = standard_normal(rng);
                    v - cfg.step_scale * delta[j] + cfg.noise_scale * eta
                })
                .collect();
            next = problem.clamp_to_bounds(&next);
            slack = problem.slack(&next)?;
            x = next;
        } else {
            let mut scale = cfg.step_scale;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f64> = x.iter().enumerate().map(|(j, &v)| v - scale * delta[j]).collect();
                let cand = problem.clamp_to_bounds(&cand);
                let cand_slack = problem.slack(&cand)?;
                if cand_slack.value <= slack.value {
                    x = cand;
                    slack = cand_slack;
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                return Ok(ProjectionOutcome {
                    x,
                    converged: false,
                    steps_used: step,
                });
            }
        }

        if slack.max_violation <= cfg.tol {
            return Ok(ProjectionOutcome {
                x,
                converged: true,
                steps_used: step,
            });
        }
    }

    Ok(ProjectionOutcome {
        x,
        converged: false,
        steps_used: cfg.max_steps,
    })
}

fn solve_damped_normal_equations(
    jac: &DMatrix<f64>,
    r: &DVector<f64>,
    damping: f64,
) -> Result<DVector<f64>> {
    let d = jac.ncols();
    if jac.nrows() == 0 {
        return Ok(DVector::zeros(d));
    }
    let mut jtj = jac.tr_mul(jac);
    for i in 0..d {
        jtj[(i, i)] += damping;
    }
    let rhs = jac.tr_mul(r);
    let chol = jtj
        .cholesky()
        .ok_or_else(|| MasemError::Numerical("regularized normal equations not SPD".into()))?;
    let delta = chol.solve(&rhs);
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(MasemError::Numerical(
            "non-finite Gauss-Newton step".into(),
        ));
    }
    Ok(delta)
}

/// Draw `n` points from `Normal(0, sigma^2 I)` with `sigma` a quarter of the
/// mean bound width, project each onto the feasible set, and return the
/// ensemble with cached slack values. Initial draws and per-slot stream seeds
/// come sequentially from `rng`, so results are independent of thread count.
pub fn initialize_ensemble(
    problem: &ConstraintProblem,
    n: usize,
    rng: &mut ChaCha8Rng,
    cfg: &ProjectionConfig,
) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(MasemError::InvalidInput("ensemble size must be >= 1".into()));
    }
    let sigma = 0.25 * problem.mean_bound_width();
    let d = problem.dim;
    let mut starts = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d)
            .map(|_| sigma * standard_normal(rng))
            .collect();
        starts.push(x);
    }
    let mut slot_rngs: Vec<ChaCha8Rng> = Vec::with_capacity(n);
    for _ in 0..n {
        let s: u64 = rand::Rng::random(rng);
        slot_rngs.push(derive_rng(s, "slot", 0));
    }

    let results: Vec<Result<(Vec<f64>, crate::constraint::SlackValue)>> = starts
        .par_iter()
        .zip(slot_rngs.par_iter_mut())
        .map(|(x0, slot_rng)| {
            let out = gauss_newton_project(x0, problem, cfg, slot_rng)?;
            let slack = problem.slack(&out.x)?;
            Ok((out.x, slack))
        })
        .collect();

    let mut positions = Vec::with_capacity(n);
    let mut slack = Vec::with_capacity(n);
    for r in results {
        let (x, s) = r?;
        positions.push(x);
        slack.push(s);
    }
    Ok(ParticleEnsemble::from_parts(positions, slack, slot_rngs))
}
