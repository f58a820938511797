//! Executable checks of the mean-field resampling theory.
//!
//! In the infinite-particle limit the resampling step reduces to a
//! deterministic map on the simplex of component weights,
//!
//! ```text
//! (Phi alpha)_c = alpha_c^{1-beta} (alpha*_c)^beta / Z,    beta = tau / p,
//! ```
//!
//! whose iterates admit the exponential-tilt closed form
//! `alpha_{t,c} = alpha*_c exp(a_t z_c) / Z(a_t)` with `a_t = (1-beta)^t` and
//! `z_c = log(alpha^0_c / alpha*_c)`. The KL divergence to the target obeys
//! `KL(alpha_t || alpha*) <= C_0 (1-beta)^{2t}` with
//! `C_0 = (max_c z_c - min_c z_c)^2 / 4`. This module computes all of these
//! in the log domain (z spans +-log N, so naive exponentiation overflows) and
//! provides the finite-N component-loss simulation.

use rayon::prelude::*;

use crate::benchmarks::grid_disks::GridDisks;
use crate::ensemble::ParticleEnsemble;
use crate::error::{MasemError, Result};
use crate::kernels::{KernelConfig, KernelKind};
use crate::resampler::{masem_loop, MasemConfig};
use crate::rng::{derive_rng, derive_seed};

/// Floor applied before taking logs; worst-case initializations contain
/// near-zero weights.
const LOG_FLOOR: f64 = 1e-300;

/// A point on the simplex of component weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentWeights(Vec<f64>);

impl ComponentWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(MasemError::InvalidInput("empty weight vector".into()));
        }
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(MasemError::InvalidInput(
                "component weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MasemError::InvalidInput(format!(
                "component weights must sum to 1 (got {sum})"
            )));
        }
        Ok(Self(alpha))
    }

    /// Normalize arbitrary positive masses onto the simplex.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let sum: f64 = masses.iter().sum();
        if !(sum > 0.0) {
            return Err(MasemError::InvalidInput("masses must sum > 0".into()));
        }
        Self::new(masses.iter().map(|m| m / sum).collect())
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
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// One mean-field resampling step (log-domain geometric mean of `alpha` and
/// `alpha_star`).
pub fn phi_map(alpha: &ComponentWeights, alpha_star: &ComponentWeights, beta: f64) -> ComponentWeights {
    assert_eq!(alpha.len(), alpha_star.len());
    assert!((0.0..=1.0).contains(&beta));
    let logs: Vec<f64> = alpha
        .as_slice()
        .iter()
        .zip(alpha_star.as_slice())
        .map(|(&a, &s)| (1.0 - beta) * a.max(LOG_FLOOR).ln() + beta * s.max(LOG_FLOOR).ln())
        .collect();
    let z = log_sum_exp(&logs);
    ComponentWeights(logs.into_iter().map(|l| (l - z).exp()).collect())
}

/// The exponential tilt solving the `Phi` recursion in closed form.
#[derive(Clone, Debug)]
pub struct TiltedFamily {
    pub alpha_star: ComponentWeights,
    /// `z_c = log(alpha^0_c / alpha*_c)`.
    pub z: Vec<f64>,
    /// `beta = tau / p`, in (0, 1).
    pub beta: f64,
}

impl TiltedFamily {
    pub fn new(alpha0: &ComponentWeights, alpha_star: &ComponentWeights, beta: f64) -> Result<Self> {
        if alpha0.len() != alpha_star.len() {
            return Err(MasemError::Dimension {
                expected: alpha_star.len(),
                got: alpha0.len(),
            });
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(MasemError::InvalidInput("beta must lie in (0, 1)".into()));
        }
        if alpha_star.as_slice().iter().any(|&a| a <= 0.0) {
            return Err(MasemError::InvalidInput(
                "target weights must be strictly positive".into(),
            ));
        }
        let z = alpha0
            .as_slice()
            .iter()
            .zip(alpha_star.as_slice())
            .map(|(&a0, &s)| a0.max(LOG_FLOOR).ln() - s.ln())
            .collect();
        Ok(Self {
            alpha_star: alpha_star.clone(),
            z,
            beta,
        })
    }

    /// Tilt exponent `a_t = (1 - beta)^t`.
    pub fn tilt(&self, t: usize) -> f64 {
        (1.0 - self.beta).powi(t as i32)
    }
}

/// Closed-form iterate `alpha_t`; equals the t-fold application of `phi_map`.
pub fn closed_form(family: &TiltedFamily, t: usize) -> ComponentWeights {
    let a_t = family.tilt(t);
    let logs: Vec<f64> = family
        .alpha_star
        .as_slice()
        .iter()
        .zip(&family.z)
        .map(|(&s, &z)| s.ln() + a_t * z)
        .collect();
    let norm = log_sum_exp(&logs);
    ComponentWeights(logs.into_iter().map(|l| (l - norm).exp()).collect())
}

/// `KL(alpha || alpha*) = sum_c alpha_c log(alpha_c / alpha*_c)`, with the
/// convention `0 log 0 = 0`.
pub fn kl_simplex(alpha: &ComponentWeights, alpha_star: &ComponentWeights) -> f64 {
    alpha
        .as_slice()
        .iter()
        .zip(alpha_star.as_slice())
        .map(|(&a, &s)| {
            if a <= 0.0 {
                0.0
            } else {
                a * (a.ln() - s.ln())
            }
        })
        .sum()
}

/// Contraction constant `C_0 = (max_c z_c - min_c z_c)^2 / 4` for the initial
/// weights.
pub fn c0_constant(alpha0: &ComponentWeights, alpha_star: &ComponentWeights) -> f64 {
    let z: Vec<f64> = alpha0
        .as_slice()
        .iter()
        .zip(alpha_star.as_slice())
        .map(|(&a, &s)| a.max(LOG_FLOOR).ln() - s.max(LOG_FLOOR).ln())
        .collect();
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    0.25 * (max - min).powi(2)
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub holds: bool,
    /// Largest observed `KL_t / (bound_t + 1e-12)` over the horizon; the
    /// additive guard keeps the ratio meaningful once the bound underflows
    /// toward zero at large t.
    pub max_ratio: f64,
    pub violations: usize,
}

/// Check `KL(alpha_t || alpha*) <= C_0 (1-beta)^{2t} + 1e-12` for
/// `t = 0..=t_max`. Violations are reported, never thrown.
pub fn verify_theorem_bound(family: &TiltedFamily, t_max: usize) -> BoundReport {
    let alpha0 = closed_form(family, 0);
    let c0 = c0_constant(&alpha0, &family.alpha_star);
    let mut max_ratio: f64 = 0.0;
    let mut violations = 0;
    for t in 0..=t_max {
        let alpha_t = closed_form(family, t);
        let kl = kl_simplex(&alpha_t, &family.alpha_star);
        let bound = c0 * (1.0 - family.beta).powi(2 * t as i32);
        if kl > bound + 1e-12 {
            violations += 1;
        }
        max_ratio = max_ratio.max(kl / (bound + 1e-12));
    }
    BoundReport {
        holds: violations == 0,
        max_ratio,
        violations,
    }
}

/// Smallest `t` with `C_0 (1-beta)^{2t} <= eps`; zero when `C_0 <= eps`.
pub fn iterations_to_eps(c0: f64, beta: f64, eps: f64) -> usize {
    assert!(eps > 0.0 && beta > 0.0 && beta < 1.0 && c0 >= 0.0);
    if c0 <= eps {
        return 0;
    }
    let t = ((eps / c0).ln() / (2.0 * (1.0 - beta).ln())).ceil();
    t as usize
}

#[derive(Clone, Debug)]
pub struct ExtinctionReport {
    /// `P_c = (1 - (Phi alpha)_c)^N` per component.
    pub probability: Vec<f64>,
    /// Upper bound `exp(-N (Phi alpha)_c)`.
    pub bound: Vec<f64>,
}

/// Probability that a component holds zero particles after one multinomial
/// resampling step at population size `n`.
pub fn extinction_probability(
    alpha: &ComponentWeights,
    alpha_star: &ComponentWeights,
    beta: f64,
    n: usize,
) -> ExtinctionReport {
    let phi = phi_map(alpha, alpha_star, beta);
    let probability: Vec<f64> = phi
        .as_slice()
        .iter()
        .map(|&p| (1.0 - p).powi(n as i32))
        .collect();
    let bound: Vec<f64> = phi
        .as_slice()
        .iter()
        .map(|&p| (-(n as f64) * p).exp())
        .collect();
    for (p, b) in probability.iter().zip(&bound) {
        debug_assert!(p <= &(b + 1e-15), "1-x <= exp(-x) violated: {p} > {b}");
    }
    ExtinctionReport { probability, bound }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// Chains spread evenly over all components.
    Uniform,
    /// One randomly chosen component left empty, a single chain everywhere
    /// else.
    WorstCase,
}

#[derive(Clone, Debug)]
pub struct ComponentLossResult {
    pub mean_covered: f64,
    /// Half-width of the 95% normal confidence interval.
    pub ci95: f64,
    pub trials: usize,
}

/// Finite-N component-loss experiment on the 100-disk grid. Runs the real
/// NHR kernel with max step 1 (below the inter-disk gap, so only resampling
/// can move mass between components) and counts components holding at least
/// one particle after `t_iterations` resampling rounds.
pub fn component_loss_sim(
    grid: &GridDisks,
    n: usize,
    tau: f64,
    t_iterations: usize,
    n_trials: usize,
    init_mode: InitMode,
    seed: u64,
) -> Result<ComponentLossResult> {
    let n_components = grid.centers.len();
    let covered: Vec<Result<usize>> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, "component-loss", trial as u64);
            let mut rng = derive_rng(trial_seed, "init", 0);
            let positions = match init_mode {
                InitMode::Uniform => grid.uniform_init(n, &mut rng),
                InitMode::WorstCase => grid.worst_case_init(&mut rng),
            };
            let ensemble = ParticleEnsemble::from_positions(&grid.problem, positions, trial_seed)?;
            let mut cfg = MasemConfig::new(
                ensemble.len(),
                KernelConfig {
                    kind: KernelKind::Nhr,
                    ..KernelConfig::nhr().with_max_step(1.0)
                },
            );
            cfg.n_iterations = t_iterations;
            cfg.rejuvenation_steps = 5;
            cfg.k_max = 4.min(ensemble.len() - 1);
            cfg.temperature = tau;
            cfg.seed = trial_seed;
            let (final_ensemble, _) = masem_loop(ensemble, &grid.problem, &cfg, &mut |_, _| {})?;
            let counts = final_ensemble
                .component_counts(&grid.problem)
                .expect("grid problem has a labeler");
            Ok(counts.iter().filter(|&&c| c > 0).count().min(n_components))
        })
        .collect();

    let mut values = Vec::with_capacity(n_trials);
    for c in covered {
        values.push(c? as f64);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        / (values.len().max(2) - 1) as f64;
    Ok(ComponentLossResult {
        mean_covered: mean,
        ci95: 1.96 * (var / values.len() as f64).sqrt(),
        trials: n_trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn weights(v: &[f64]) -> ComponentWeights {
        ComponentWeights::new(v.to_vec()).unwrap()
    }

    #[test]
    fn phi_fixed_point_and_identity() {
        let star = weights(&[0.3, 0.7]);
        let fixed = phi_map(&star, &star, 0.5);
        assert_abs_diff_eq!(fixed.as_slice()[0], 0.3, epsilon = 1e-14);

        let alpha = weights(&[0.9, 0.1]);
        let id = phi_map(&alpha, &star, 0.0);
        assert_abs_diff_eq!(id.as_slice()[0], 0.9, epsilon = 1e-14);
    }

    #[test]
    fn phi_two_component_hand_example() {
        // sqrt(0.9 * 0.5) / sqrt(0.1 * 0.5) = 3, so the map yields (0.75, 0.25).
        let alpha = weights(&[0.9, 0.1]);
        let star = weights(&[0.5, 0.5]);
        let out = phi_map(&alpha, &star, 0.5);
        assert_abs_diff_eq!(out.as_slice()[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(out.as_slice()[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_matches_iterated_phi() {
        let mut rng = derive_rng(17, "meanfield", 0);
        for _ in 0..20 {
            let c = rng.random_range(2..12);
            let beta: f64 = rng.random_range(0.05..0.95);
            let raw0: Vec<f64> = (0..c).map(|_| rng.random_range(0.01..1.0)).collect();
            let raws: Vec<f64> = (0..c).map(|_| rng.random_range(0.01..1.0)).collect();
            let alpha0 = ComponentWeights::from_masses(&raw0).unwrap();
            let star = ComponentWeights::from_masses(&raws).unwrap();
            let family = TiltedFamily::new(&alpha0, &star, beta).unwrap();

            let mut iterate = alpha0.clone();
            for t in 0..=200 {
                let cf = closed_form(&family, t);
                for (a, b) in cf.as_slice().iter().zip(iterate.as_slice()) {
                    assert!((a - b).abs() <= 1e-12, "t={t}: {a} vs {b}");
                }
                iterate = phi_map(&iterate, &star, beta);
            }
        }
    }

    #[test]
    fn closed_form_limits() {
        let alpha0 = weights(&[0.9, 0.1]);
        let star = weights(&[0.25, 0.75]);
        let family = TiltedFamily::new(&alpha0, &star, 0.5).unwrap();
        let t0 = closed_form(&family, 0);
        assert_abs_diff_eq!(t0.as_slice()[0], 0.9, epsilon = 1e-12);
        let t_inf = closed_form(&family, 400);
        assert_abs_diff_eq!(t_inf.as_slice()[0], 0.25, epsilon = 1e-9);
    }

    #[test]
    fn kl_examples() {
        let star = weights(&[0.5, 0.5]);
        assert_eq!(kl_simplex(&star, &star), 0.0);
        let point = weights(&[1.0, 0.0]);
        assert_abs_diff_eq!(kl_simplex(&point, &star), std::f64::consts::LN_2, epsilon = 1e-14);
        let mut rng = derive_rng(3, "kl", 0);
        for _ in 0..50 {
            let a = ComponentWeights::from_masses(&[rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01]).unwrap();
            let b = ComponentWeights::from_masses(&[rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01]).unwrap();
            assert!(kl_simplex(&a, &b) >= 0.0);
        }
    }

    #[test]
    fn c0_hand_example() {
        let star = weights(&[0.5, 0.5]);
        assert_eq!(c0_constant(&star, &star), 0.0);
        let alpha0 = weights(&[0.9, 0.1]);
        // z = (log 1.8, log 0.2): C0 = (log 9)^2 / 4.
        let expect = 0.25 * 9.0f64.ln().powi(2);
        assert_abs_diff_eq!(c0_constant(&alpha0, &star), expect, epsilon = 1e-12);
        // Permutation symmetry.
        let alpha_p = weights(&[0.1, 0.9]);
        assert_abs_diff_eq!(c0_constant(&alpha_p, &star), expect, epsilon = 1e-12);
    }

    #[test]
    fn bound_holds_on_random_families() {
        let mut rng = derive_rng(23, "bound", 0);
        for _ in 0..100 {
            let c = rng.random_range(2..=50);
            let beta: f64 = rng.random_range(0.1..=0.9);
            let raw0: Vec<f64> = (0..c).map(|_| rng.random_range(1e-4..1.0f64)).collect();
            let raws: Vec<f64> = (0..c).map(|_| rng.random_range(1e-4..1.0f64)).collect();
            let family = TiltedFamily::new(
                &ComponentWeights::from_masses(&raw0).unwrap(),
                &ComponentWeights::from_masses(&raws).unwrap(),
                beta,
            )
            .unwrap();
            let report = verify_theorem_bound(&family, 100);
            assert!(report.holds, "violations: {}", report.violations);
            assert!(report.max_ratio <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn iteration_count_examples() {
        assert_eq!(iterations_to_eps(1e-9, 0.5, 1e-6), 0);
        // C0 = 1, beta = 0.5: ceil(ln(1e-6) / (2 ln 0.5)) = 10.
        assert_eq!(iterations_to_eps(1.0, 0.5, 1e-6), 10);
        for (c0, beta, eps) in [(2.0, 0.3, 1e-4), (5.0, 0.7, 1e-8), (0.5, 0.9, 1e-3)] {
            let t = iterations_to_eps(c0, beta, eps);
            let bound_at = |t: usize| c0 * (1.0f64 - beta).powi(2 * t as i32);
            assert!(bound_at(t) <= eps);
            if t > 0 {
                assert!(bound_at(t - 1) > eps);
            }
        }
    }

    #[test]
    fn extinction_examples() {
        let single = weights(&[1.0]);
        let rep = extinction_probability(&single, &single, 0.5, 10);
        assert_eq!(rep.probability[0], 0.0);

        let alpha = weights(&[0.5, 0.5]);
        let rep = extinction_probability(&alpha, &alpha, 0.5, 10);
        assert_abs_diff_eq!(rep.probability[0], 2f64.powi(-10), epsilon = 1e-12);

        let mut rng = derive_rng(4, "ext", 0);
        for _ in 0..50 {
            let a = ComponentWeights::from_masses(&[rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01]).unwrap();
            let s = ComponentWeights::from_masses(&[rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01, rng.random::<f64>() + 0.01]).unwrap();
            let rep = extinction_probability(&a, &s, 0.4, 25);
            for (p, b) in rep.probability.iter().zip(&rep.bound) {
                assert!(p <= &(b + 1e-15));
            }
        }
    }

    #[test]
    fn kl_monotone_along_iterates() {
        let alpha0 = weights(&[0.97, 0.01, 0.02]);
        let star = weights(&[0.2, 0.5, 0.3]);
        let family = TiltedFamily::new(&alpha0, &star, 0.3).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=80 {
            let kl = kl_simplex(&closed_form(&family, t), &star);
            assert!(kl <= prev + 1e-13);
            prev = kl;
        }
    }
}
