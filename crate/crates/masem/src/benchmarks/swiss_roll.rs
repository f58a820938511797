//! Disconnected 1-D manifold: six seeded circles plus an Archimedean spiral
//! segment, with a softplus-product inequality cutting the lower-left region.
//!
//! The equality is the signed residual of the closest circle or valid spiral
//! branch; branch candidates are found by winding search over whole
//! revolutions. The circle layout is drawn once from a fixed layout seed with
//! rejection sampling, keeping circles inside bounds, apart from each other,
//! and clear of the spiral's annulus.

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraint::{ConstraintProblem, GroundTruthSampler};
use crate::error::Result;
use crate::rng::derive_rng;

pub const SPIRAL_CENTER: [f64; 2] = [4.8, -0.4];
pub const SPIRAL_A: f64 = 0.45;
pub const SPIRAL_B: f64 = 0.33;
pub const SPIRAL_T_MIN: f64 = 0.9;
pub const N_CIRCLES: usize = 6;
pub const LAYOUT_SEED: u64 = 0;

pub fn spiral_t_max() -> f64 {
    3.9 * std::f64::consts::PI
}

#[derive(Clone, Debug)]
pub struct SwissRollLayout {
    pub centers: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
}

/// Non-overlapping circles with radii in [0.45, 1.15], placed clear of the
/// spiral. Deterministic for a fixed seed.
pub fn layout(seed: u64) -> SwissRollLayout {
    let mut rng = derive_rng(seed, "swiss-roll-layout", 0);
    let spiral_reach = SPIRAL_A + SPIRAL_B * spiral_t_max();
    let mut centers: Vec<[f64; 2]> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    while centers.len() < N_CIRCLES {
        let c = [rng.random_range(-8.5..8.5), rng.random_range(-8.5..8.5)];
        let r = rng.random_range(0.45..1.15);
        let spiral_dist =
            ((c[0] - SPIRAL_CENTER[0]).powi(2) + (c[1] - SPIRAL_CENTER[1]).powi(2)).sqrt();
        if spiral_dist < spiral_reach + r + 0.5 {
            continue;
        }
        let clash = centers.iter().zip(&radii).any(|(other, or)| {
            let d = ((c[0] - other[0]).powi(2) + (c[1] - other[1]).powi(2)).sqrt();
            d < r + or + 0.5
        });
        if clash {
            continue;
        }
        centers.push(c);
        radii.push(r);
    }
    SwissRollLayout { centers, radii }
}

/// Branch index and signed residual of the candidate nearest to `x`:
/// `0..N_CIRCLES` are circles, `N_CIRCLES` is the spiral.
fn nearest_branch(x: &[f64], layout: &SwissRollLayout) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY, 0.0f64);
    for (k, (c, r)) in layout.centers.iter().zip(&layout.radii).enumerate() {
        let s = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - r;
        if s.abs() < best.1 {
            best = (k, s.abs(), s);
        }
    }
    let v = [x[0] - SPIRAL_CENTER[0], x[1] - SPIRAL_CENTER[1]];
    let radial = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let psi = v[1].atan2(v[0]);
    let tau = std::f64::consts::TAU;
    let t_max = spiral_t_max();
    // Tolerance keeps endpoint branches valid under atan2 rounding.
    let n_lo = ((SPIRAL_T_MIN - psi) / tau - 1e-9).ceil() as i64;
    let n_hi = ((t_max - psi) / tau + 1e-9).floor() as i64;
    for n in n_lo..=n_hi {
        let t = psi + tau * n as f64;
        let s = radial - (SPIRAL_A + SPIRAL_B * t);
        if s.abs() < best.1 {
            best = (N_CIRCLES, s.abs(), s);
        }
    }
    (best.0, best.2)
}

fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn cut_ineq(x: &[f64]) -> f64 {
    softplus(-3.0 - x[0]) * softplus(-x[1]) - 0.1
}

pub fn make_swiss_roll() -> Result<ConstraintProblem> {
    let lay = layout(LAYOUT_SEED);

    // Pairwise clip from the layout geometry: per-axis extents over all
    // components.
    let reach = SPIRAL_A + SPIRAL_B * spiral_t_max();
    let mut min_c = [SPIRAL_CENTER[0] - reach, SPIRAL_CENTER[1] - reach];
    let mut max_c = [SPIRAL_CENTER[0] + reach, SPIRAL_CENTER[1] + reach];
    for (c, r) in lay.centers.iter().zip(&lay.radii) {
        for a in 0..2 {
            min_c[a] = min_c[a].min(c[a] - r);
            max_c[a] = max_c[a].max(c[a] + r);
        }
    }
    let clip = (max_c[0] - min_c[0]).max(max_c[1] - min_c[1]);

    let h_layout = lay.clone();
    let jac_layout = lay.clone();
    let label_layout = lay.clone();
    let gt = ground_truth_sampler(lay.clone());

    ConstraintProblem::new("swiss-roll", vec![-10.0; 2], vec![10.0; 2]).map(|p| {
        p.with_equalities(1, move |x: &[f64]| vec![nearest_branch(x, &h_layout).1])
            .with_eq_jacobian(move |x: &[f64]| {
                let (branch, _) = nearest_branch(x, &jac_layout);
                if branch < N_CIRCLES {
                    let c = jac_layout.centers[branch];
                    let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
                    if d < 1e-12 {
                        return DMatrix::zeros(1, 2);
                    }
                    DMatrix::from_row_slice(1, 2, &[(x[0] - c[0]) / d, (x[1] - c[1]) / d])
                } else {
                    let v = [x[0] - SPIRAL_CENTER[0], x[1] - SPIRAL_CENTER[1]];
                    let r2 = v[0] * v[0] + v[1] * v[1];
                    let r = r2.sqrt();
                    if r < 1e-12 {
                        return DMatrix::zeros(1, 2);
                    }
                    // d/dx [ |v| - (a + b t(psi)) ], t = psi + 2 pi n
                    DMatrix::from_row_slice(
                        1,
                        2,
                        &[
                            v[0] / r + SPIRAL_B * v[1] / r2,
                            v[1] / r - SPIRAL_B * v[0] / r2,
                        ],
                    )
                }
            })
            .with_inequalities(1, |x: &[f64]| vec![cut_ineq(x)])
            .with_ineq_jacobian(|x: &[f64]| {
                let sa = softplus(-3.0 - x[0]);
                let sb = softplus(-x[1]);
                DMatrix::from_row_slice(
                    1,
                    2,
                    &[-sigmoid(-3.0 - x[0]) * sb, -sa * sigmoid(-x[1])],
                )
            })
            .with_intrinsic_dim(1)
            .with_ground_truth(gt)
            .with_pairwise_clip(clip)
            .with_components(N_CIRCLES + 1, move |x: &[f64]| {
                nearest_branch(x, &label_layout).0
            })
    })
}

/// Branch choice proportional to parameter length, arclength-corrected
/// rejection within each branch, then feasibility filtering.
fn ground_truth_sampler(lay: SwissRollLayout) -> GroundTruthSampler {
    let tau = std::f64::consts::TAU;
    let t_max = spiral_t_max();
    let spiral_len = t_max - SPIRAL_T_MIN;
    let total_param: f64 = tau * N_CIRCLES as f64 + spiral_len;
    let speed_sup = lay
        .radii
        .iter()
        .cloned()
        .fold((SPIRAL_A + SPIRAL_B * t_max).hypot(SPIRAL_B), f64::max);

    GroundTruthSampler::new(
        "parameter-length branch choice with arclength correction",
        move |n, rng| {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let pick = rng.random::<f64>() * total_param;
                let x = if pick < tau * N_CIRCLES as f64 {
                    let k = (pick / tau) as usize;
                    let phi = rng.random::<f64>() * tau;
                    if rng.random::<f64>() * speed_sup >= lay.radii[k] {
                        continue;
                    }
                    vec![
                        lay.centers[k][0] + lay.radii[k] * phi.cos(),
                        lay.centers[k][1] + lay.radii[k] * phi.sin(),
                    ]
                } else {
                    let t = rng.random_range(SPIRAL_T_MIN..t_max);
                    let speed = (SPIRAL_A + SPIRAL_B * t).hypot(SPIRAL_B);
                    if rng.random::<f64>() * speed_sup >= speed {
                        continue;
                    }
                    vec![
                        SPIRAL_CENTER[0] + (SPIRAL_A + SPIRAL_B * t) * t.cos(),
                        SPIRAL_CENTER[1] + (SPIRAL_A + SPIRAL_B * t) * t.sin(),
                    ]
                };
                if cut_ineq(&x) > 0.0 || x.iter().any(|v| v.abs() > 10.0) {
                    continue;
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
    use approx::assert_abs_diff_eq;

    #[test]
    fn layout_is_deterministic_and_separated() {
        let a = layout(LAYOUT_SEED);
        let b = layout(LAYOUT_SEED);
        assert_eq!(a.centers, b.centers);
        assert_eq!(a.radii, b.radii);
        for i in 0..N_CIRCLES {
            for j in i + 1..N_CIRCLES {
                let d = ((a.centers[i][0] - a.centers[j][0]).powi(2)
                    + (a.centers[i][1] - a.centers[j][1]).powi(2))
                .sqrt();
                assert!(d >= a.radii[i] + a.radii[j] + 0.5);
            }
        }
    }

    #[test]
    fn spiral_points_satisfy_equality() {
        let p = make_swiss_roll().unwrap();
        for i in 0..50 {
            let t = SPIRAL_T_MIN + (spiral_t_max() - SPIRAL_T_MIN) * i as f64 / 49.0;
            let x = [
                SPIRAL_CENTER[0] + (SPIRAL_A + SPIRAL_B * t) * t.cos(),
                SPIRAL_CENTER[1] + (SPIRAL_A + SPIRAL_B * t) * t.sin(),
            ];
            assert_abs_diff_eq!(p.eval_h(&x)[0], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn circle_points_satisfy_equality() {
        let p = make_swiss_roll().unwrap();
        let lay = layout(LAYOUT_SEED);
        for k in 0..N_CIRCLES {
            for i in 0..24 {
                let phi = i as f64 / 24.0 * std::f64::consts::TAU;
                let x = [
                    lay.centers[k][0] + lay.radii[k] * phi.cos(),
                    lay.centers[k][1] + lay.radii[k] * phi.sin(),
                ];
                assert_abs_diff_eq!(p.eval_h(&x)[0], 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn ground_truth_is_feasible() {
        let p = make_swiss_roll().unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let mut rng = crate::rng::derive_rng(0, "swiss", 0);
        for x in gt.sample(500, &mut rng) {
            assert!(p.is_feasible(&x, 1e-9), "infeasible {x:?}");
        }
    }

    #[test]
    fn cut_region_is_infeasible() {
        // Deep in the lower-left corner both softplus factors are large.
        assert!(cut_ineq(&[-9.0, -9.0]) > 0.0);
        assert!(cut_ineq(&[5.0, 5.0]) < 0.0);
    }
}
