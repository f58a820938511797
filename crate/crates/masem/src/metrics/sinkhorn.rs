//! Entropic-regularized optimal transport between uniform empirical measures,
//! computed by log-domain Sinkhorn iteration with squared-Euclidean cost.

use rayon::prelude::*;

use crate::error::{MasemError, Result};

#[derive(Clone, Copy, Debug)]
pub struct SinkhornResult {
    /// Transport cost `<P, C>` (entropy term excluded).
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
    pub reg: f64,
}

fn cost_matrix(x: &[Vec<f64>], y: &[Vec<f64>]) -> Vec<f64> {
    let m = y.len();
    let mut c = vec![0.0; x.len() * m];
    c.par_chunks_mut(m).zip(x.par_iter()).for_each(|(row, xi)| {
        for (j, yj) in y.iter().enumerate() {
            row[j] = xi
                .iter()
                .zip(yj)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
    });
    c
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Scale-adaptive regularization: `1e-3 x median pairwise squared distance`.
pub fn median_cost_reg(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let mut c = cost_matrix(x, y);
    let mid = c.len() / 2;
    let (_, median, _) = c.select_nth_unstable_by(mid, f64::total_cmp);
    (1e-3 * *median).max(1e-12)
}

struct Stage<'a> {
    /// Row-major n x m cost matrix.
    c: &'a [f64],
    /// Transposed copy, so both potential updates stream memory linearly.
    ct: &'a [f64],
    n: usize,
    m: usize,
}

impl Stage<'_> {
    /// One alternating update. Returns the max row-marginal violation of the
    /// plan entering the update: the f-update computes the row sums of
    /// `exp((f_old + g - C)/reg)` implicitly, so the check costs nothing.
    fn update(&self, reg: f64, f: &mut Vec<f64>, g: &mut Vec<f64>) -> f64 {
        let (n, m) = (self.n, self.m);
        let log_a = -(n as f64).ln();
        let log_b = -(m as f64).ln();
        let a = 1.0 / n as f64;

        let pairs: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.c[i * m..(i + 1) * m];
                let lse = log_sum_exp(row.iter().zip(g.iter()).map(|(cij, gj)| (gj - cij) / reg));
                let new_f = reg * (log_a - lse);
                // Row sum of the incoming plan: a * exp((f_old - f_new)/reg).
                let err = a * (((f[i] - new_f) / reg).exp() - 1.0).abs();
                (new_f, err)
            })
            .collect();
        let mut err = 0.0f64;
        for (i, (new_f, e)) in pairs.into_iter().enumerate() {
            f[i] = new_f;
            err = err.max(e);
        }

        let new_g: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|j| {
                let col = &self.ct[j * n..(j + 1) * n];
                let lse = log_sum_exp(col.iter().zip(f.iter()).map(|(cij, fi)| (fi - cij) / reg));
                reg * (log_b - lse)
            })
            .collect();
        *g = new_g;
        err
    }

    /// Run until the row marginals match `tol` or the budget runs out.
    fn run(
        &self,
        reg: f64,
        f: &mut Vec<f64>,
        g: &mut Vec<f64>,
        budget: usize,
        tol: f64,
    ) -> (usize, bool) {
        for it in 0..budget {
            let err = self.update(reg, f, g);
            if it > 0 && err <= tol {
                return (it + 1, true);
            }
        }
        (budget, false)
    }
}

/// Sinkhorn distance between the uniform empirical measures on `x` and `y`.
/// Uses epsilon scaling: the regularization anneals geometrically from the
/// median cost down to `reg` with warm-started potentials, which keeps the
/// iteration count manageable at small `reg`.
pub fn sinkhorn_w22(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    reg: f64,
    max_iters: usize,
    tol: f64,
) -> Result<SinkhornResult> {
    let n = x.len();
    let m = y.len();
    if n == 0 || m == 0 {
        return Err(MasemError::InvalidInput("empty point set".into()));
    }
    if !(reg > 0.0) {
        return Err(MasemError::InvalidInput("reg must be positive".into()));
    }
    let c = cost_matrix(x, y);
    let mut ct = vec![0.0; c.len()];
    for i in 0..n {
        for j in 0..m {
            ct[j * n + i] = c[i * m + j];
        }
    }
    let mut start = {
        let mut sorted = c.clone();
        let mid = sorted.len() / 2;
        let (_, median, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
        *median
    };
    if !(start > reg) {
        start = reg;
    }

    let mut ladder = Vec::new();
    let mut eps = start;
    while eps > reg {
        ladder.push(eps);
        eps *= 0.25;
    }
    ladder.push(reg);

    let stage = Stage {
        c: &c,
        ct: &ct,
        n,
        m,
    };
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; m];
    let mut iterations = 0;
    let mut converged = false;
    // Warm stages only seed the potentials; convergence is enforced at the
    // target regularization.
    const WARM_ITERS: usize = 15;
    for (idx, &eps) in ladder.iter().enumerate() {
        let last = idx + 1 == ladder.len();
        if last {
            let budget = max_iters.saturating_sub(iterations).max(10);
            let (used, ok) = stage.run(eps, &mut f, &mut g, budget, tol);
            iterations += used;
            converged = ok;
        } else {
            for _ in 0..WARM_ITERS {
                stage.update(eps, &mut f, &mut g);
            }
            iterations += WARM_ITERS;
        }
    }

    let cost = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &c[i * m..(i + 1) * m];
            row.iter()
                .zip(&g)
                .map(|(cij, gj)| ((f[i] + gj - cij) / reg).exp() * cij)
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum();

    Ok(SinkhornResult {
        cost,
        converged,
        iterations,
        reg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use rand::Rng;

    #[test]
    fn identical_clouds_cost_is_negligible() {
        let mut rng = derive_rng(0, "sinkhorn", 0);
        // Spacing well above the blur scale sqrt(reg).
        let x: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![i as f64 * 0.5 + 0.01 * rng.random::<f64>(), 0.0])
            .collect();
        let r = sinkhorn_w22(&x, &x, 1e-3, 5000, 1e-8).unwrap();
        assert!(r.converged);
        assert!(r.cost.abs() <= 1e-6, "cost {}", r.cost);
    }

    #[test]
    fn single_pair_cost_is_forced() {
        let x = vec![vec![0.0, 0.0]];
        let y = vec![vec![1.0, 0.0]];
        let r = sinkhorn_w22(&x, &y, 1e-3, 100, 1e-12).unwrap();
        assert!((r.cost - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn rigid_shift_costs_squared_norm() {
        // Oracle: the identity matching moves every point by v, so the exact
        // OT cost is |v|^2; the entropic cost must land within 2%.
        let mut rng = derive_rng(1, "sinkhorn", 0);
        let x: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random::<f64>() * 4.0, rng.random::<f64>() * 4.0])
            .collect();
        let v = [0.7, -0.3];
        let y: Vec<Vec<f64>> = x
            .iter()
            .map(|p| vec![p[0] + v[0], p[1] + v[1]])
            .collect();
        let exact = v[0] * v[0] + v[1] * v[1];
        let r = sinkhorn_w22(&x, &y, 1e-3, 5000, 1e-9).unwrap();
        assert!(
            (r.cost - exact).abs() / exact <= 0.02,
            "cost {} vs exact {exact}",
            r.cost
        );
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let mut rng = derive_rng(2, "sinkhorn", 0);
        let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let y: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let a = sinkhorn_w22(&x, &y, 1e-2, 3000, 1e-10).unwrap();
        let b = sinkhorn_w22(&y, &x, 1e-2, 3000, 1e-10).unwrap();
        assert!((a.cost - b.cost).abs() <= 1e-9);
        assert!(a.cost >= 0.0);
    }
}
