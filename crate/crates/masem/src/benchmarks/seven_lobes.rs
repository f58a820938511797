//! Seven-lobed closed curve `r = 3 + cos(7 theta)` with a quintic inequality
//! cut, target uniform with respect to arclength.

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraint::{ConstraintProblem, GroundTruthSampler};
use crate::error::Result;

/// `sup_theta ds/dtheta <= sqrt((3+1)^2 + 7^2)`: radius at most 4 and
/// |dr/dtheta| = |7 sin(7 theta)| at most 7.
const ARC_SPEED_SUP: f64 = 8.06225774829855; // sqrt(65)

fn radius_at(theta: f64) -> f64 {
    3.0 + (7.0 * theta).cos()
}

fn ineq(x: &[f64]) -> f64 {
    (x[0] - 2.0).powi(2) - 5.0 * x[0] * x[1].powi(3) + 0.5 * x[1].powi(5) - 40.0
}

pub fn make_seven_lobes() -> Result<ConstraintProblem> {
    let gt = GroundTruthSampler::new(
        "polar rejection sampling with arclength correction",
        move |n, rng| {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let r = radius_at(theta);
                let speed = (r * r + (7.0 * (7.0 * theta).sin()).powi(2)).sqrt();
                if rng.random::<f64>() * ARC_SPEED_SUP >= speed {
                    continue;
                }
                let x = vec![r * theta.cos(), r * theta.sin()];
                if ineq(&x) > 0.0 || x.iter().any(|v| v.abs() > 4.1) {
                    continue;
                }
                out.push(x);
            }
            out
        },
    );

    ConstraintProblem::new("seven-lobes", vec![-4.1; 2], vec![4.1; 2]).map(|p| {
        p.with_equalities(1, |x: &[f64]| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let theta = x[1].atan2(x[0]);
            vec![r - radius_at(theta)]
        })
        .with_eq_jacobian(|x: &[f64]| {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let r = r2.sqrt();
            if r < 1e-12 {
                return DMatrix::zeros(1, 2);
            }
            let theta = x[1].atan2(x[0]);
            // grad r + 7 sin(7 theta) * grad theta
            let s = 7.0 * (7.0 * theta).sin();
            DMatrix::from_row_slice(
                1,
                2,
                &[x[0] / r - s * x[1] / r2, x[1] / r + s * x[0] / r2],
            )
        })
        .with_inequalities(1, |x: &[f64]| vec![ineq(x)])
        .with_ineq_jacobian(|x: &[f64]| {
            DMatrix::from_row_slice(
                1,
                2,
                &[
                    2.0 * (x[0] - 2.0) - 5.0 * x[1].powi(3),
                    -15.0 * x[0] * x[1].powi(2) + 2.5 * x[1].powi(4),
                ],
            )
        })
        .with_intrinsic_dim(1)
        .with_ground_truth(gt)
        .with_pairwise_clip(8.2)
    })
}

/// Numeric arclength mass of `[theta0, theta1]`, used as the binning oracle
/// in sampler audits.
pub fn arclength_integral(theta0: f64, theta1: f64, steps: usize) -> f64 {
    let h = (theta1 - theta0) / steps as f64;
    let speed = |t: f64| {
        let r = radius_at(t);
        (r * r + (7.0 * (7.0 * t).sin()).powi(2)).sqrt()
    };
    let mut acc = 0.5 * (speed(theta0) + speed(theta1));
    for i in 1..steps {
        acc += speed(theta0 + i as f64 * h);
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parametrization_satisfies_equality() {
        let p = make_seven_lobes().unwrap();
        for i in 0..100 {
            let theta = i as f64 / 100.0 * std::f64::consts::TAU;
            let r = radius_at(theta);
            let h = p.eval_h(&[r * theta.cos(), r * theta.sin()]);
            assert_abs_diff_eq!(h[0], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rightmost_point_is_feasible() {
        // theta = 0 -> x = (4, 0); g(4, 0) = 4 - 40 = -36.
        let p = make_seven_lobes().unwrap();
        assert_abs_diff_eq!(p.eval_g(&[4.0, 0.0])[0], -36.0, epsilon = 1e-12);
        assert!(p.is_feasible(&[4.0, 0.0], 1e-9));
    }

    #[test]
    fn arc_speed_never_exceeds_envelope() {
        for i in 0..10_000 {
            let theta = i as f64 / 10_000.0 * std::f64::consts::TAU;
            let r = radius_at(theta);
            let speed = (r * r + (7.0 * (7.0 * theta).sin()).powi(2)).sqrt();
            assert!(speed <= ARC_SPEED_SUP);
        }
    }

    #[test]
    fn ground_truth_is_feasible() {
        let p = make_seven_lobes().unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let mut rng = derive_rng(0, "lobes", 0);
        for x in gt.sample(500, &mut rng) {
            assert!(p.is_feasible(&x, 1e-9));
        }
    }
}
