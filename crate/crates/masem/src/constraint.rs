//! Implicit constraint problems and constraint-evaluation primitives.
//!
//! A feasible set is `{x : h(x) = 0, g(x) <= 0}` intersected with a bounding
//! box, where the equality map `h: R^d -> R^m` and inequality map
//! `g: R^d -> R^l` can only be evaluated point-wise. Everything downstream
//! (projection, kernels, resampling) works through the primitives here:
//! slack, stacked residuals with Jacobians, bound clamping, and feasibility
//! tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use crate::error::{MasemError, Result};

pub type ConstraintFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ComponentFn = Arc<dyn Fn(&[f64]) -> usize + Send + Sync>;
type SampleFn = Arc<dyn Fn(usize, &mut ChaCha8Rng) -> Vec<Vec<f64>> + Send + Sync>;

/// Exact sampler for a problem's feasible set, available only where the
/// benchmark construction admits one.
#[derive(Clone)]
pub struct GroundTruthSampler {
    sample_fn: SampleFn,
    pub description: String,
}

impl GroundTruthSampler {
    pub fn new(
        description: impl Into<String>,
        sample_fn: impl Fn(usize, &mut ChaCha8Rng) -> Vec<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        Self {
            sample_fn: Arc::new(sample_fn),
            description: description.into(),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (self.sample_fn)(n, rng)
    }
}

/// Squared-violation summary at a point: `value = (|g(x)_+|^2 + |h(x)|^2) / 2`
/// and the worst single violation `max{max_j |h_j|, max_i g_i_+}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SlackValue {
    pub value: f64,
    pub max_violation: f64,
}

/// An implicit constraint problem. Immutable after construction and safe to
/// share across threads; all evaluation methods are pure in `(x, self)`.
#[derive(Clone)]
pub struct ConstraintProblem {
    pub name: String,
    pub dim: usize,
    pub num_eq: usize,
    pub num_ineq: usize,
    eval_h: ConstraintFn,
    eval_g: ConstraintFn,
    jac_h: Option<JacobianFn>,
    jac_g: Option<JacobianFn>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub intrinsic_dim_hint: Option<usize>,
    pub ground_truth: Option<GroundTruthSampler>,
    pub component_of: Option<ComponentFn>,
    pub n_components: Option<usize>,
    /// Target component masses, set only where an analytic expression exists.
    pub component_masses: Option<Vec<f64>>,
    /// Clip value `b` for the pairwise-distance histogram, set per benchmark.
    pub pairwise_clip: Option<f64>,
}

impl ConstraintProblem {
    /// Unconstrained box problem (`m = l = 0`); add maps via the `with_*`
    /// builder methods.
    pub fn new(name: impl Into<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(MasemError::InvalidInput("bounds length mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(MasemError::InvalidInput(
                "bounds must satisfy lo < hi elementwise".into(),
            ));
        }
        let dim = lo.len();
        Ok(Self {
            name: name.into(),
            dim,
            num_eq: 0,
            num_ineq: 0,
            eval_h: Arc::new(|_| Vec::new()),
            eval_g: Arc::new(|_| Vec::new()),
            jac_h: None,
            jac_g: None,
            lo,
            hi,
            intrinsic_dim_hint: None,
            ground_truth: None,
            component_of: None,
            n_components: None,
            component_masses: None,
            pairwise_clip: None,
        })
    }

    pub fn with_equalities(
        mut self,
        m: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.num_eq = m;
        self.eval_h = Arc::new(f);
        self
    }

    pub fn with_inequalities(
        mut self,
        l: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.num_ineq = l;
        self.eval_g = Arc::new(f);
        self
    }

    pub fn with_eq_jacobian(
        mut self,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac_h = Some(Arc::new(f));
        self
    }

    pub fn with_ineq_jacobian(
        mut self,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac_g = Some(Arc::new(f));
        self
    }

    pub fn with_intrinsic_dim(mut self, p: usize) -> Self {
        self.intrinsic_dim_hint = Some(p);
        self
    }

    pub fn with_ground_truth(mut self, gt: GroundTruthSampler) -> Self {
        self.ground_truth = Some(gt);
        self
    }

    pub fn with_components(
        mut self,
        n: usize,
        label: impl Fn(&[f64]) -> usize + Send + Sync + 'static,
    ) -> Self {
        self.n_components = Some(n);
        self.component_of = Some(Arc::new(label));
        self
    }

    pub fn with_component_masses(mut self, alpha_star: Vec<f64>) -> Self {
        self.component_masses = Some(alpha_star);
        self
    }

    pub fn with_pairwise_clip(mut self, b: f64) -> Self {
        self.pairwise_clip = Some(b);
        self
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(MasemError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Raw equality residuals `h(x)`.
    pub fn eval_h(&self, x: &[f64]) -> Vec<f64> {
        (self.eval_h)(x)
    }

    /// Raw inequality values `g(x)` (feasible where `<= 0`).
    pub fn eval_g(&self, x: &[f64]) -> Vec<f64> {
        (self.eval_g)(x)
    }

    /// Squared slack `(|g(x)_+|^2 + |h(x)|^2) / 2` plus the max violation.
    pub fn slack(&self, x: &[f64]) -> Result<SlackValue> {
        self.check_dim(x)?;
        let h = self.eval_h(x);
        let g = self.eval_g(x);
        let mut value = 0.0;
        let mut max_violation = 0.0f64;
        for (i, &hv) in h.iter().enumerate() {
            if !hv.is_finite() {
                return Err(MasemError::NonFinite {
                    what: "equality",
                    index: i,
                });
            }
            value += hv * hv;
            max_violation = max_violation.max(hv.abs());
        }
        for (i, &gv) in g.iter().enumerate() {
            if !gv.is_finite() {
                return Err(MasemError::NonFinite {
                    what: "inequality",
                    index: i,
                });
            }
            let plus = gv.max(0.0);
            value += plus * plus;
            max_violation = max_violation.max(plus);
        }
        Ok(SlackValue {
            value: 0.5 * value,
            max_violation,
        })
    }

    /// Jacobian of `h` at `x`: analytic if provided, else central differences.
    pub fn jac_h_at(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.jac_h {
            Some(j) => j(x),
            None => fd_jacobian(&self.eval_h, x, self.num_eq),
        }
    }

    /// Jacobian of `g` at `x`: analytic if provided, else central differences.
    pub fn jac_g_at(&self, x: &[f64]) -> DMatrix<f64> {
        match &self.jac_g {
            Some(j) => j(x),
            None => fd_jacobian(&self.eval_g, x, self.num_ineq),
        }
    }

    /// Stacked residual and Jacobian for Gauss-Newton on the squared slack:
    /// all equality rows, then the active inequality rows (`g_i(x) > 0`
    /// strictly; a row at exactly zero is excluded, matching the subgradient
    /// choice of `g_+` at the kink). Satisfies `|r|^2 / 2 == slack(x).value`.
    pub fn residual_and_jacobian(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_dim(x)?;
        let h = self.eval_h(x);
        let g = self.eval_g(x);
        for (i, &v) in h.iter().enumerate() {
            if !v.is_finite() {
                return Err(MasemError::NonFinite {
                    what: "equality",
                    index: i,
                });
            }
        }
        for (i, &v) in g.iter().enumerate() {
            if !v.is_finite() {
                return Err(MasemError::NonFinite {
                    what: "inequality",
                    index: i,
                });
            }
        }
        let active: Vec<usize> = (0..g.len()).filter(|&i| g[i] > 0.0).collect();
        let rows = h.len() + active.len();
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, self.dim);

        if !h.is_empty() {
            let jh = self.jac_h_at(x);
            for (row, &hv) in h.iter().enumerate() {
                r[row] = hv;
                jac.row_mut(row).copy_from(&jh.row(row));
            }
        }
        if !active.is_empty() {
            let jg = self.jac_g_at(x);
            for (out, &i) in active.iter().enumerate() {
                let row = h.len() + out;
                r[row] = g[i];
                jac.row_mut(row).copy_from(&jg.row(i));
            }
        }
        Ok((r, jac))
    }

    /// Elementwise `min(max(x, lo), hi)`; idempotent.
    pub fn clamp_to_bounds(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
            .collect()
    }

    pub fn in_bounds(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// True iff `max_violation <= tol` and `x` lies within bounds (inclusive).
    /// Non-finite constraint output counts as infeasible.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim || !self.in_bounds(x) {
            return false;
        }
        match self.slack(x) {
            Ok(s) => s.max_violation <= tol,
            Err(_) => false,
        }
    }

    /// Mean per-axis bound width, `mean_j(hi_j - lo_j)`.
    pub fn mean_bound_width(&self) -> f64 {
        self.hi
            .iter()
            .zip(&self.lo)
            .map(|(h, l)| h - l)
            .sum::<f64>()
            / self.dim as f64
    }
}

/// Central finite differences with per-coordinate step `1e-6 * (1 + |x_j|)`.
pub fn fd_jacobian(f: &ConstraintFn, x: &[f64], rows: usize) -> DMatrix<f64> {
    let d = x.len();
    let mut jac = DMatrix::zeros(rows, d);
    if rows == 0 {
        return jac;
    }
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for col in 0..d {
        let step = 1e-6 * (1.0 + x[col].abs());
        xp[col] = x[col] + step;
        xm[col] = x[col] - step;
        let fp = f(&xp);
        let fm = f(&xm);
        for row in 0..rows {
            jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * step);
        }
        xp[col] = x[col];
        xm[col] = x[col];
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sphere(radius: f64) -> ConstraintProblem {
        ConstraintProblem::new("sphere", vec![-5.0; 3], vec![5.0; 3])
            .unwrap()
            .with_equalities(1, move |x: &[f64]| {
                vec![x.iter().map(|v| v * v).sum::<f64>().sqrt() - radius]
            })
    }

    #[test]
    fn slack_on_sphere() {
        let p = sphere(2.5);
        let on = p.slack(&[2.5, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(on.value, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(on.max_violation, 0.0, epsilon = 1e-15);

        // Hand evaluation at the origin: h = -2.5, value = 2.5^2 / 2.
        let origin = p.slack(&[0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(origin.value, 3.125, epsilon = 1e-12);
        assert_abs_diff_eq!(origin.max_violation, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn slack_without_constraints_is_zero() {
        let p = ConstraintProblem::new("box", vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let s = p.slack(&[0.3, -0.7]).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.max_violation, 0.0);
    }

    #[test]
    fn slack_dimension_mismatch_is_input_error() {
        let p = sphere(2.5);
        assert!(matches!(
            p.slack(&[1.0, 2.0]),
            Err(MasemError::Dimension { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn residual_stacks_equalities_and_active_inequalities() {
        let p = ConstraintProblem::new("line", vec![-5.0, -5.0], vec![5.0, 5.0])
            .unwrap()
            .with_equalities(1, |x: &[f64]| vec![x[0] - 1.0]);
        let (r, j) = p.residual_and_jacobian(&[3.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(0, 0)], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[(0, 1)], 0.0, epsilon = 1e-8);

        let q = ConstraintProblem::new("half", vec![-5.0, -5.0], vec![5.0, 5.0])
            .unwrap()
            .with_inequalities(1, |x: &[f64]| vec![x[0]]);
        // Inactive inequality is excluded.
        let (r, _) = q.residual_and_jacobian(&[-1.0, 0.0]).unwrap();
        assert_eq!(r.len(), 0);
        // Active inequality contributes its own gradient row.
        let (r, j) = q.residual_and_jacobian(&[0.5, 0.0]).unwrap();
        assert_abs_diff_eq!(r[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(j[(0, 0)], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn residual_norm_matches_slack() {
        let p = sphere(2.5);
        for x in [[1.0, 2.0, 0.5], [0.1, -0.2, 0.3], [3.0, 3.0, 3.0]] {
            let (r, _) = p.residual_and_jacobian(&x).unwrap();
            let s = p.slack(&x).unwrap();
            assert_abs_diff_eq!(0.5 * r.norm_squared(), s.value, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_output_carries_index() {
        let p = ConstraintProblem::new("bad", vec![-1.0], vec![1.0])
            .unwrap()
            .with_equalities(2, |_x: &[f64]| vec![0.0, f64::NAN]);
        assert!(matches!(
            p.residual_and_jacobian(&[0.0]),
            Err(MasemError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn clamp_examples() {
        let p = ConstraintProblem::new("box", vec![-5.0; 3], vec![5.0; 3]).unwrap();
        assert_eq!(p.clamp_to_bounds(&[7.0, -9.0, 0.0]), vec![5.0, -5.0, 0.0]);
        let inside = vec![1.0, -2.0, 3.0];
        assert_eq!(p.clamp_to_bounds(&inside), inside);
        assert_eq!(p.clamp_to_bounds(&p.clamp_to_bounds(&[7.0, -9.0, 0.0])), vec![5.0, -5.0, 0.0]);
        assert_eq!(p.clamp_to_bounds(&[5.0, 5.0, 5.0]), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn feasibility_examples() {
        let p = sphere(2.5);
        assert!(p.is_feasible(&[2.5, 0.0, 0.0], 1e-9));
        // Violation 2.5 at the origin exceeds tol 1e-2.
        assert!(!p.is_feasible(&[0.0, 0.0, 0.0], 1e-2));
        let free = ConstraintProblem::new("box", vec![-1.0], vec![1.0]).unwrap();
        assert!(free.is_feasible(&[0.5], 0.0));
        assert!(!free.is_feasible(&[1.5], 0.0));
    }

    #[test]
    fn fd_jacobian_matches_analytic_on_sphere() {
        let radius = 2.5;
        let analytic = sphere(radius).with_eq_jacobian(move |x: &[f64]| {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            DMatrix::from_row_slice(1, 3, &[x[0] / n, x[1] / n, x[2] / n])
        });
        let fd = sphere(radius);
        for x in [[1.0, 2.0, 0.5], [0.4, -0.2, 1.3]] {
            let ja = analytic.jac_h_at(&x);
            let jf = fd.jac_h_at(&x);
            let rel = (&ja - &jf).norm() / ja.norm();
            assert!(rel < 1e-4, "relative error {rel}");
        }
    }
}
