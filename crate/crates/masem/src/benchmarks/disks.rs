//! Two spherical caps ("disks") on a sphere of radius 2.5 in R^3.
//!
//! The equality pins points to the sphere; one min-composed inequality keeps
//! them inside the union of two caps of angular radii 0.2 and 0.6 whose
//! centers sit an arc `delta` apart (0.6 -> overlapping caps, one component;
//! 1.35 -> separated caps, two components). Cap centers are rotated 45
//! degrees about the x-axis.

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraint::{ConstraintProblem, GroundTruthSampler};
use crate::error::Result;

pub const SPHERE_RADIUS: f64 = 2.5;
pub const CAP_RADII: [f64; 2] = [0.2, 0.6];

fn rot_x_45(v: [f64; 3]) -> [f64; 3] {
    let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
    [v[0], c * v[1] - s * v[2], s * v[1] + c * v[2]]
}

fn cap_centers(delta: f64) -> [[f64; 3]; 2] {
    let a = [(-delta / 2.0).cos(), (-delta / 2.0).sin(), 0.0];
    let b = [(delta / 2.0).cos(), (delta / 2.0).sin(), 0.0];
    [rot_x_45(a), rot_x_45(b)]
}

fn dot3(a: &[f64], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Exact cap masses from the spherical-cap area formula `2 pi R^2 (1-cos rho)`.
pub fn cap_area_fractions() -> [f64; 2] {
    let a = 1.0 - CAP_RADII[0].cos();
    let b = 1.0 - CAP_RADII[1].cos();
    [a / (a + b), b / (a + b)]
}

pub fn make_disks(connected: bool) -> Result<ConstraintProblem> {
    let delta = if connected { 0.6 } else { 1.35 };
    let centers = cap_centers(delta);
    let name = if connected {
        "disks-connected"
    } else {
        "disks-disconnected"
    };

    // g(x) = min_i cos(rho_i) - <x, mu_i> / R  (<= 0 inside some cap).
    let g_centers = centers;
    let eval_g = move |x: &[f64]| -> Vec<f64> {
        let v = (0..2)
            .map(|i| CAP_RADII[i].cos() - dot3(x, &g_centers[i]) / SPHERE_RADIUS)
            .fold(f64::INFINITY, f64::min);
        vec![v]
    };
    let jac_centers = centers;
    let jac_g = move |x: &[f64]| -> DMatrix<f64> {
        let vals: Vec<f64> = (0..2)
            .map(|i| CAP_RADII[i].cos() - dot3(x, &jac_centers[i]) / SPHERE_RADIUS)
            .collect();
        let i = if vals[0] <= vals[1] { 0 } else { 1 };
        DMatrix::from_row_slice(
            1,
            3,
            &[
                -jac_centers[i][0] / SPHERE_RADIUS,
                -jac_centers[i][1] / SPHERE_RADIUS,
                -jac_centers[i][2] / SPHERE_RADIUS,
            ],
        )
    };

    let gt = ground_truth_sampler(centers, connected);
    let label_centers = centers;

    let mut problem = ConstraintProblem::new(name, vec![-5.0; 3], vec![5.0; 3])?
        .with_equalities(1, |x: &[f64]| {
            vec![x.iter().map(|v| v * v).sum::<f64>().sqrt() - SPHERE_RADIUS]
        })
        .with_eq_jacobian(|x: &[f64]| {
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-12 {
                DMatrix::zeros(1, 3)
            } else {
                DMatrix::from_row_slice(1, 3, &[x[0] / n, x[1] / n, x[2] / n])
            }
        })
        .with_inequalities(1, eval_g)
        .with_ineq_jacobian(jac_g)
        .with_intrinsic_dim(2)
        .with_ground_truth(gt)
        .with_pairwise_clip(2.0 * SPHERE_RADIUS);

    if connected {
        problem = problem
            .with_components(1, |_x: &[f64]| 0)
            .with_component_masses(vec![1.0]);
    } else {
        // Signed angular distance to each cap boundary decides the label.
        problem = problem
            .with_components(2, move |x: &[f64]| {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                let mut best = 0;
                let mut best_val = f64::INFINITY;
                for i in 0..2 {
                    let cos_angle = (dot3(x, &label_centers[i]) / norm).clamp(-1.0, 1.0);
                    let val = cos_angle.acos() - CAP_RADII[i];
                    if val < best_val {
                        best_val = val;
                        best = i;
                    }
                }
                best
            })
            .with_component_masses(cap_area_fractions().to_vec());
    }
    Ok(problem)
}

/// Orthonormal tangent frame at a unit vector.
fn tangent_frame(mu: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if mu[0].abs() < 0.9 {
        [1.0, 0.0, 0.0]
    } else {
        [0.0, 1.0, 0.0]
    };
    let d = dot3(&pick, mu);
    let mut e1 = [pick[0] - d * mu[0], pick[1] - d * mu[1], pick[2] - d * mu[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    let e2 = [
        mu[1] * e1[2] - mu[2] * e1[1],
        mu[2] * e1[0] - mu[0] * e1[2],
        mu[0] * e1[1] - mu[1] * e1[0],
    ];
    (e1, e2)
}

/// Area-weighted cap choice, uniform sampling on the chosen cap via
/// `cos(alpha) ~ U(cos rho, 1)`, and acceptance `1/m(x)` to correct overlap.
fn ground_truth_sampler(centers: [[f64; 3]; 2], connected: bool) -> GroundTruthSampler {
    let fractions = cap_area_fractions();
    let frames = [tangent_frame(&centers[0]), tangent_frame(&centers[1])];
    GroundTruthSampler::new(
        "surface-uniform on the union of two spherical caps",
        move |n, rng| {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let i = if rng.random::<f64>() < fractions[0] { 0 } else { 1 };
                let mu = centers[i];
                let (e1, e2) = frames[i];
                let phi = rng.random::<f64>() * std::f64::consts::TAU;
                let cos_alpha = rng.random_range(CAP_RADII[i].cos()..1.0);
                let sin_alpha = (1.0 - cos_alpha * cos_alpha).sqrt();
                let x: Vec<f64> = (0..3)
                    .map(|j| {
                        SPHERE_RADIUS
                            * (cos_alpha * mu[j]
                                + sin_alpha * (phi.cos() * e1[j] + phi.sin() * e2[j]))
                    })
                    .collect();
                if connected {
                    let m = (0..2)
                        .filter(|&j| {
                            let cos_angle =
                                (dot3(&x, &centers[j]) / SPHERE_RADIUS).clamp(-1.0, 1.0);
                            cos_angle.acos() <= CAP_RADII[j]
                        })
                        .count()
                        .max(1);
                    if rng.random::<f64>() >= 1.0 / m as f64 {
                        continue;
                    }
                }
                out.push(x);
            }
            out
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn ground_truth_samples_are_feasible() {
        for connected in [true, false] {
            let p = make_disks(connected).unwrap();
            let gt = p.ground_truth.as_ref().unwrap();
            let mut rng = derive_rng(0, "disks-gt", 0);
            for x in gt.sample(500, &mut rng) {
                let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!((r - SPHERE_RADIUS).abs() <= 1e-12);
                assert!(p.eval_g(&x)[0] <= 1e-12);
            }
        }
    }

    #[test]
    fn cap_masses_follow_area_formula() {
        let f = cap_area_fractions();
        // 1 - cos(0.2) vs 1 - cos(0.6): the small cap holds ~10% of the area.
        assert!((f[0] - 0.1024).abs() < 1e-3, "got {}", f[0]);
        assert!((f[0] + f[1] - 1.0).abs() < 1e-15);

        let p = make_disks(false).unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let label = p.component_of.as_ref().unwrap();
        let mut rng = derive_rng(1, "disks-split", 0);
        let samples = gt.sample(20_000, &mut rng);
        let n0 = samples.iter().filter(|x| label(x) == 0).count();
        let frac = n0 as f64 / samples.len() as f64;
        assert!((frac - f[0]).abs() < 0.01, "empirical {frac} vs {}", f[0]);
    }

    #[test]
    fn connected_case_joins_cap_centers() {
        // delta = 0.6 < rho_1 + rho_2 = 0.8: walk the geodesic between the
        // two cap centers and check every point stays feasible.
        let p = make_disks(true).unwrap();
        let centers = cap_centers(0.6);
        for step in 0..=50 {
            let t = step as f64 / 50.0;
            let mix: Vec<f64> = (0..3)
                .map(|j| (1.0 - t) * centers[0][j] + t * centers[1][j])
                .collect();
            let norm: f64 = mix.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x: Vec<f64> = mix.iter().map(|v| SPHERE_RADIUS * v / norm).collect();
            assert!(p.is_feasible(&x, 1e-9), "gap at t={t}");
        }
    }

    #[test]
    fn disconnected_case_separates_caps() {
        let p = make_disks(false).unwrap();
        let centers = cap_centers(1.35);
        // Midpoint of the geodesic is 0.675 from either center, outside both
        // caps: g = cos(0.6) - cos(0.675) = 0.044 at its smallest.
        let mix: Vec<f64> = (0..3).map(|j| centers[0][j] + centers[1][j]).collect();
        let norm: f64 = mix.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = mix.iter().map(|v| SPHERE_RADIUS * v / norm).collect();
        let expect = 0.6f64.cos() - 0.675f64.cos();
        assert!((p.eval_g(&x)[0] - expect).abs() < 1e-12);
        assert!(p.eval_g(&x)[0] > 0.0);
    }
}
