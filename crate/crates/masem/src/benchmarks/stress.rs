//! Scaling stress test: five disjoint hyperspheres in a random linear
//! subspace of R^d, with spherical ball cutouts, under explicit control of
//! the ambient dimension and constraint counts.
//!
//! Equalities: `m - 1` random orthonormal linear rows `A x = 0` plus the
//! nearest-sphere residual `|z - c_i*|^2 - r_i*^2` in latent coordinates
//! `z = N^T x`. Inequalities: five cutout balls `rho_j^2 - |z - o_j|^2 <= 0`
//! centered on component surfaces. Intrinsic dimension is `d - m`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;


use crate::constraint::{ConstraintProblem, GroundTruthSampler};
use crate::error::{MasemError, Result};
use crate::rng::{derive_rng, standard_normal};

pub const N_COMPONENTS: usize = 5;
pub const N_CUTOUTS: usize = 5;
pub const BASE_RADIUS: f64 = 0.25;

#[derive(Clone, Copy, Debug)]
pub struct StressTestSpec {
    /// Ambient dimension.
    pub d: usize,
    /// Total equality count (m - 1 linear rows plus the sphere residual).
    pub m: usize,
    pub layout_seed: u64,
}

impl StressTestSpec {
    pub fn new(d: usize, m: usize) -> Self {
        Self {
            d,
            m,
            layout_seed: 0,
        }
    }
}

struct Layout {
    /// Linear equality rows, (m-1) x d with orthonormal rows.
    a: DMatrix<f64>,
    /// Orthonormal nullspace basis, d x p.
    basis: DMatrix<f64>,
    centers: Vec<DVector<f64>>,
    radii: Vec<f64>,
    cutout_centers: Vec<DVector<f64>>,
    cutout_radii: Vec<f64>,
}

fn build_layout(spec: &StressTestSpec) -> Result<Layout> {
    let d = spec.d;
    let m = spec.m;
    if m < 1 || d <= m {
        return Err(MasemError::Config(format!(
            "stress test needs d - m >= 1 (d={d}, m={m})"
        )));
    }
    let p = d - m + 1;
    let mut rng = derive_rng(spec.layout_seed, "stress-layout", 0);

    // Random orthogonal frame via QR of a Gaussian matrix.
    let gauss = DMatrix::from_fn(d, d, |_, _| standard_normal(&mut rng));
    let q = gauss.qr().q();
    let a = q.columns(0, m - 1).transpose().into_owned();
    let basis = q.columns(m - 1, p).into_owned();

    // Component spheres: jittered radii, centers separated by rejection.
    let mut centers: Vec<DVector<f64>> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    while centers.len() < N_COMPONENTS {
        let r = BASE_RADIUS * rng.random_range(0.5..1.5);
        let c = DVector::from_fn(p, |_, _| rng.random_range(-4.0..4.0));
        let ok = centers
            .iter()
            .zip(&radii)
            .all(|(other, or)| (&c - other).norm() >= r + or + 2.0);
        if ok {
            centers.push(c);
            radii.push(r);
        }
    }

    // Cutouts on randomly selected component surfaces, pairwise disjoint.
    let mut cutout_centers: Vec<DVector<f64>> = Vec::new();
    let mut cutout_radii: Vec<f64> = Vec::new();
    while cutout_centers.len() < N_CUTOUTS {
        let sel = rng.random_range(0..N_COMPONENTS);
        let dir = random_unit(p, &mut rng);
        let o = &centers[sel] + radii[sel] * dir;
        let rho = radii[sel] / 2.0;
        let ok = cutout_centers
            .iter()
            .zip(&cutout_radii)
            .all(|(other, orho)| (&o - other).norm() >= rho + orho + 0.05);
        if ok {
            cutout_centers.push(o);
            cutout_radii.push(rho);
        }
    }

    Ok(Layout {
        a,
        basis,
        centers,
        radii,
        cutout_centers,
        cutout_radii,
    })
}

fn random_unit(p: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(p, |_, _| standard_normal(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn nearest_sphere(z: &DVector<f64>, centers: &[DVector<f64>], radii: &[f64]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY, 0.0);
    for (i, (c, r)) in centers.iter().zip(radii).enumerate() {
        let resid = (z - c).norm_squared() - r * r;
        if resid.abs() < best.1 {
            best = (i, resid.abs(), resid);
        }
    }
    (best.0, best.2)
}

/// Surface fraction of a cap with chordal radius `rho` on a sphere of radius
/// `r` in R^p (surface dimension p-1), by quadrature of `sin^{p-2}`.
fn cap_fraction(rho: f64, r: f64, p: usize) -> f64 {
    let phi = 2.0 * (rho / (2.0 * r)).clamp(0.0, 1.0).asin();
    let integrand = |theta: f64| theta.sin().powi(p as i32 - 2);
    let integrate = |hi: f64| {
        let steps = 2000;
        let h = hi / steps as f64;
        let mut acc = 0.5 * (integrand(0.0) + integrand(hi));
        for i in 1..steps {
            acc += integrand(i as f64 * h);
        }
        acc * h
    };
    integrate(phi) / integrate(std::f64::consts::PI)
}

pub fn make_stress_test(spec: &StressTestSpec) -> Result<ConstraintProblem> {
    let layout = build_layout(spec)?;
    let d = spec.d;
    let m = spec.m;
    let p = d - m + 1;
    let name = format!("stress:d={d},m={m}");

    // Analytic component masses: surface area r^{p-1} minus cutout caps.
    let mut masses: Vec<f64> = layout
        .radii
        .iter()
        .map(|r| r.powi(p as i32 - 1))
        .collect();
    for (o, rho) in layout.cutout_centers.iter().zip(&layout.cutout_radii) {
        for (i, (c, r)) in layout.centers.iter().zip(&layout.radii).enumerate() {
            // A cutout touches its own sphere only (layout enforces margins).
            if ((o - c).norm() - r).abs() < 1e-9 {
                masses[i] *= 1.0 - cap_fraction(*rho, *r, p);
            }
        }
    }
    let total: f64 = masses.iter().sum();
    let alpha_star: Vec<f64> = masses.iter().map(|v| v / total).collect();

    let lat = |x: &[f64], basis: &DMatrix<f64>| basis.transpose() * DVector::from_column_slice(x);

    let h_layout = LayoutRef::new(&layout);
    let eval_h = move |x: &[f64]| -> Vec<f64> {
        let z = lat(x, &h_layout.basis);
        let mut out = Vec::with_capacity(m);
        let ax = &h_layout.a * DVector::from_column_slice(x);
        out.extend(ax.iter().cloned());
        out.push(nearest_sphere(&z, &h_layout.centers, &h_layout.radii).1);
        out
    };

    let j_layout = LayoutRef::new(&layout);
    let jac_h = move |x: &[f64]| -> DMatrix<f64> {
        let z = lat(x, &j_layout.basis);
        let (i, _) = nearest_sphere(&z, &j_layout.centers, &j_layout.radii);
        let mut jac = DMatrix::zeros(m, x.len());
        jac.rows_mut(0, m - 1).copy_from(&j_layout.a);
        let grad_z = 2.0 * (&z - &j_layout.centers[i]);
        let grad_x = &j_layout.basis * grad_z;
        jac.row_mut(m - 1).copy_from(&grad_x.transpose());
        jac
    };

    let g_layout = LayoutRef::new(&layout);
    let eval_g = move |x: &[f64]| -> Vec<f64> {
        let z = lat(x, &g_layout.basis);
        g_layout
            .cutout_centers
            .iter()
            .zip(&g_layout.cutout_radii)
            .map(|(o, rho)| rho * rho - (&z - o).norm_squared())
            .collect()
    };

    let jg_layout = LayoutRef::new(&layout);
    let jac_g = move |x: &[f64]| -> DMatrix<f64> {
        let z = lat(x, &jg_layout.basis);
        let mut jac = DMatrix::zeros(N_CUTOUTS, x.len());
        for (j, o) in jg_layout.cutout_centers.iter().enumerate() {
            let grad_x = &jg_layout.basis * (-2.0 * (&z - o));
            jac.row_mut(j).copy_from(&grad_x.transpose());
        }
        jac
    };

    let gt_layout = LayoutRef::new(&layout);
    let gt_p = p;
    let gt = GroundTruthSampler::new(
        "surface-area-weighted sphere choice with cutout rejection",
        move |n, rng| {
            let weights: Vec<f64> = gt_layout
                .radii
                .iter()
                .map(|r| r.powi(gt_p as i32 - 1))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let mut pick = rng.random::<f64>() * total;
                let mut i = 0;
                while i + 1 < weights.len() && pick > weights[i] {
                    pick -= weights[i];
                    i += 1;
                }
                let u = random_unit(gt_p, rng);
                let z = &gt_layout.centers[i] + gt_layout.radii[i] * u;
                let cut = gt_layout
                    .cutout_centers
                    .iter()
                    .zip(&gt_layout.cutout_radii)
                    .any(|(o, rho)| (&z - o).norm_squared() < rho * rho);
                if cut {
                    continue;
                }
                let x = &gt_layout.basis * z;
                out.push(x.iter().cloned().collect());
            }
            out
        },
    );

    let label_layout = LayoutRef::new(&layout);
    let problem = ConstraintProblem::new(name, vec![-28.0; d], vec![28.0; d])?
        .with_equalities(m, eval_h)
        .with_eq_jacobian(jac_h)
        .with_inequalities(N_CUTOUTS, eval_g)
        .with_ineq_jacobian(jac_g)
        .with_intrinsic_dim(d - m)
        .with_ground_truth(gt)
        .with_components(N_COMPONENTS, move |x: &[f64]| {
            let z = lat(x, &label_layout.basis);
            nearest_sphere(&z, &label_layout.centers, &label_layout.radii).0
        })
        .with_component_masses(alpha_star)
        .with_pairwise_clip(
            2.0 * layout
                .centers
                .iter()
                .zip(&layout.radii)
                .map(|(c, r)| c.norm() + r)
                .fold(0.0, f64::max),
        );
    Ok(problem)
}

/// Shared immutable layout for the constraint closures.
#[derive(Clone)]
struct LayoutRef {
    a: DMatrix<f64>,
    basis: DMatrix<f64>,
    centers: Vec<DVector<f64>>,
    radii: Vec<f64>,
    cutout_centers: Vec<DVector<f64>>,
    cutout_radii: Vec<f64>,
}

impl LayoutRef {
    fn new(layout: &Layout) -> Self {
        Self {
            a: layout.a.clone(),
            basis: layout.basis.clone(),
            centers: layout.centers.clone(),
            radii: layout.radii.clone(),
            cutout_centers: layout.cutout_centers.clone(),
            cutout_radii: layout.cutout_radii.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(make_stress_test(&StressTestSpec::new(4, 4)).is_err());
        assert!(make_stress_test(&StressTestSpec::new(3, 5)).is_err());
    }

    #[test]
    fn nullspace_is_orthonormal_and_annihilated() {
        let spec = StressTestSpec::new(8, 5);
        let layout = build_layout(&spec).unwrap();
        let an = &layout.a * &layout.basis;
        assert!(an.norm() <= 1e-12, "|AN| = {}", an.norm());
        let gram = layout.basis.transpose() * &layout.basis;
        let eye = DMatrix::<f64>::identity(4, 4);
        assert!((gram - eye).norm() <= 1e-12);
    }

    #[test]
    fn intrinsic_dimension_matches() {
        let p = make_stress_test(&StressTestSpec::new(8, 5)).unwrap();
        assert_eq!(p.intrinsic_dim_hint, Some(3));
        assert_eq!(p.num_eq, 5);
        assert_eq!(p.num_ineq, 5);
    }

    #[test]
    fn ground_truth_is_feasible() {
        let p = make_stress_test(&StressTestSpec::new(6, 3)).unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let mut rng = derive_rng(0, "stress-gt", 0);
        for x in gt.sample(300, &mut rng) {
            assert!(p.is_feasible(&x, 1e-9));
        }
    }

    #[test]
    fn empirical_masses_match_analytic_alpha_star() {
        let p = make_stress_test(&StressTestSpec::new(6, 4)).unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let label = p.component_of.as_ref().unwrap();
        let alpha = p.component_masses.clone().unwrap();
        let mut rng = derive_rng(1, "stress-mass", 0);
        let samples = gt.sample(40_000, &mut rng);
        let mut counts = vec![0usize; N_COMPONENTS];
        for x in &samples {
            counts[label(x)] += 1;
        }
        for (c, a) in counts.iter().zip(&alpha) {
            let emp = *c as f64 / samples.len() as f64;
            assert!((emp - a).abs() < 0.015, "empirical {emp} vs analytic {a}");
        }
    }

    #[test]
    fn cap_fraction_sanity() {
        // Hemisphere cap on a circle: chord sqrt(2) r -> quarter arc... the
        // chordal radius sqrt(2) r corresponds to a 90-degree cap = half of
        // the upper colatitude range.
        let f = cap_fraction(2.0f64.sqrt(), 1.0, 2);
        assert!((f - 0.5).abs() < 1e-6);
        // Full-diameter cap covers the whole sphere.
        let f = cap_fraction(2.0, 1.0, 3);
        assert!((f - 1.0).abs() < 1e-6);
    }
}
