//! Feasibility-preserving local rejuvenation kernels.
//!
//! Two kernels sit behind one contract: a transition applied independently to
//! every particle that mixes within a connected component of the feasible set.
//!
//! * NHR: random direction on the unit sphere, uniform step length, Gauss-
//!   Newton re-projection, and rejection of anything the projection could not
//!   make feasible. Exactly feasible up to the projection tolerance.
//! * OLLA: overdamped Langevin step with a landing drift pulling toward
//!   `h = 0`, tangentially projected noise, an optional inequality barrier
//!   drift, and a Hutchinson-probe estimate of the tangential log-volume
//!   correction. Only approximately feasible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rayon::prelude::*;

use crate::constraint::ConstraintProblem;
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::projection::{gauss_newton_project, ProjectionConfig};
use crate::rng::standard_normal;

/// Feasibility gate applied to accepted NHR proposals.
const NHR_INEQ_TOL: f64 = 1e-8;
/// Damping for the OLLA Gram-matrix solves.
const OLLA_DAMPING: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Nhr,
    Olla,
}

#[derive(Clone, Copy, Debug)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Maximum NHR step length; the proposal is `x + s u` with
    /// `s ~ Uniform(-max_step, max_step)`.
    pub nhr_max_step: f64,
    /// Noise-free projection used to pull NHR proposals back to the manifold.
    pub nhr_project: ProjectionConfig,
    /// Langevin step size eta; the tangential noise has variance `2 eta`.
    pub olla_step_size: f64,
    /// Gain on the landing drift toward `h = 0`.
    pub olla_landing_gain: f64,
    /// Weight on the inequality drift `-grad |g_+|^2`.
    pub olla_barrier_weight: f64,
    /// Probes for the Hutchinson estimate of the log-volume drift (0 = off).
    pub hutchinson_probes: usize,
}

impl KernelConfig {
    pub fn nhr() -> Self {
        Self {
            kind: KernelKind::Nhr,
            nhr_max_step: 1.0,
            nhr_project: ProjectionConfig {
                max_steps: 50,
                tol: 1e-8,
                ..ProjectionConfig::default()
            }
            .exact(),
            olla_step_size: 1e-3,
            olla_landing_gain: 1.0,
            olla_barrier_weight: 0.0,
            hutchinson_probes: 1,
        }
    }

    pub fn olla() -> Self {
        Self {
            kind: KernelKind::Olla,
            ..Self::nhr()
        }
    }

    pub fn with_max_step(mut self, s: f64) -> Self {
        self.nhr_max_step = s;
        self
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self::nhr()
    }
}

fn unit_direction(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// One NHR transition. Returns the new point, or a copy of `x` when the
/// proposal is rejected (projection failure is a rejection, never an error).
///
/// Besides feasibility, accepted moves must be local: the displacement may
/// not exceed the sampled step length (plus a curvature allowance). Without
/// this check the re-projection can carry a proposal that lands between two
/// components into the farther one, silently transporting mass across gaps
/// wider than the step size.
pub fn nhr_transition(
    x: &[f64],
    problem: &ConstraintProblem,
    cfg: &KernelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let u = unit_direction(problem.dim, rng);
    let s: f64 = rng.random_range(-cfg.nhr_max_step..cfg.nhr_max_step);
    let proposal: Vec<f64> = x.iter().zip(&u).map(|(&xi, &ui)| xi + s * ui).collect();

    let projected = match gauss_newton_project(&proposal, problem, &cfg.nhr_project, rng) {
        Ok(out) => out,
        // A singular solve means the projection failed; the particle stays.
        Err(MasemError::Numerical(_)) => return Ok(x.to_vec()),
        Err(e) => return Err(e),
    };
    if !projected.converged || !problem.in_bounds(&projected.x) {
        return Ok(x.to_vec());
    }
    let moved: f64 = x
        .iter()
        .zip(&projected.x)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if moved > 1.05 * s.abs() + 1e-9 {
        return Ok(x.to_vec());
    }
    let g = problem.eval_g(&projected.x);
    if g.iter().any(|&v| !(v <= NHR_INEQ_TOL)) {
        return Ok(x.to_vec());
    }
    Ok(projected.x)
}

/// One OLLA step: `x' = clamp(x + gamma * landing + P xi + barrier + volume)`.
pub fn olla_transition(
    x: &[f64],
    problem: &ConstraintProblem,
    cfg: &KernelConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let d = problem.dim;
    let eta = cfg.olla_step_size;
    let mut next = DVector::from_column_slice(x);

    if problem.num_eq > 0 {
        let h = problem.eval_h(x);
        for (i, &v) in h.iter().enumerate() {
            if !v.is_finite() {
                return Err(MasemError::NonFinite {
                    what: "equality",
                    index: i,
                });
            }
        }
        let jh = problem.jac_h_at(x);
        let h = DVector::from_vec(h);
        let mut gram = &jh * jh.transpose();
        for i in 0..gram.nrows() {
            gram[(i, i)] += OLLA_DAMPING;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| MasemError::Numerical("singular constraint Gram matrix".into()))?;

        // Landing drift toward h = 0.
        let landing = -jh.transpose() * chol.solve(&h);
        next += cfg.olla_landing_gain * &landing;

        // Tangential noise: P xi with xi ~ Normal(0, 2 eta I).
        let xi = DVector::from_iterator(
            d,
            (0..d).map(|_| (2.0 * eta).sqrt() * standard_normal(rng)),
        );
        let project_tangent =
            |v: &DVector<f64>| -> DVector<f64> { v - jh.transpose() * chol.solve(&(&jh * v)) };
        next += project_tangent(&xi);

        // Hutchinson probe of the log-volume correction: each coordinate of
        // grad log det(J J^T + lambda I) is tr(G^{-1} dG/dx_j), estimated with
        // Rademacher probes and finite-differenced Gram matrices.
        if cfg.hutchinson_probes > 0 && eta > 0.0 {
            let mut grad = DVector::zeros(d);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            for j in 0..d {
                let step = 1e-5 * (1.0 + x[j].abs());
                xp[j] = x[j] + step;
                xm[j] = x[j] - step;
                let jp = problem.jac_h_at(&xp);
                let jm = problem.jac_h_at(&xm);
                let dgram = (&jp * jp.transpose() - &jm * jm.transpose()) / (2.0 * step);
                let mut acc = 0.0;
                for _ in 0..cfg.hutchinson_probes {
                    let v = DVector::from_iterator(
                        gram_dim(&jh),
                        (0..gram_dim(&jh)).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }),
                    );
                    let y = chol.solve(&v);
                    acc += y.dot(&(&dgram * v));
                }
                grad[j] = acc / cfg.hutchinson_probes as f64;
                xp[j] = x[j];
                xm[j] = x[j];
            }
            next += project_tangent(&(-0.5 * eta * grad));
        }
    } else if eta > 0.0 {
        // No equality projector: plain Langevin noise.
        for j in 0..d {
            next[j] += (2.0 * eta).sqrt() * standard_normal(rng);
        }
    }

    if problem.num_ineq > 0 && cfg.olla_barrier_weight > 0.0 {
        let g = problem.eval_g(x);
        if g.iter().any(|v| v > &0.0) {
            let jg = problem.jac_g_at(x);
            let gplus = DVector::from_iterator(g.len(), g.iter().map(|&v| v.max(0.0)));
            // -w * grad |g_+|^2 = -2 w Jg^T g_+
            next -= 2.0 * cfg.olla_barrier_weight * jg.transpose() * gplus;
        }
    }

    if next.iter().any(|v| !v.is_finite()) {
        return Err(MasemError::Numerical("non-finite OLLA step".into()));
    }
    Ok(problem.clamp_to_bounds(next.as_slice()))
}

fn gram_dim(jh: &DMatrix<f64>) -> usize {
    jh.nrows()
}

/// Apply one kernel transition independently to every particle and refresh
/// the slack cache. Parallel across slots; each slot uses only its own
/// stream, so the result is independent of thread count.
pub fn kernel_step(
    ensemble: &mut ParticleEnsemble,
    problem: &ConstraintProblem,
    cfg: &KernelConfig,
) -> Result<()> {
    let (positions, slack, rngs) = ensemble.parts_mut();
    let results: Vec<Result<()>> = positions
        .par_iter_mut()
        .zip(slack.par_iter_mut())
        .zip(rngs.par_iter_mut())
        .map(|((x, s), rng)| {
            let next = match cfg.kind {
                KernelKind::Nhr => nhr_transition(x, problem, cfg, rng)?,
                KernelKind::Olla => olla_transition(x, problem, cfg, rng)?,
            };
            *s = problem.slack(&next)?;
            *x = next;
            Ok(())
        })
        .collect();
    results.into_iter().collect()
}
