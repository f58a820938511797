//! Damped sine curve `x2 = exp(-0.15 x1) sin(x1)` restricted to the upper
//! half-plane, which cuts the curve into seven disconnected arcs over
//! `x1 in [-20, 20]` with wildly different arclengths.

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraint::{ConstraintProblem, GroundTruthSampler};
use crate::error::Result;

fn curve_y(t: f64) -> f64 {
    (-0.15 * t).exp() * t.sin()
}

fn curve_dy(t: f64) -> f64 {
    (-0.15 * t).exp() * (t.cos() - 0.15 * t.sin())
}

/// Numeric supremum of `ds/dt` over a dense grid, padded 1% so the rejection
/// envelope stays valid.
fn arc_speed_sup() -> f64 {
    let mut sup: f64 = 0.0;
    for i in 0..=200_000 {
        let t = -20.0 + 40.0 * i as f64 / 200_000.0;
        sup = sup.max((1.0 + curve_dy(t).powi(2)).sqrt());
    }
    sup * 1.01
}

/// Feasible arcs are `x1 in [2k pi, (2k+1) pi]` clipped to the bounds; seven
/// of them intersect `[-20, 20]`.
pub const N_ARCS: usize = 7;

fn arc_label(x1: f64) -> usize {
    let q = x1 / std::f64::consts::PI;
    let k = q.floor() as i64;
    let m = if k.rem_euclid(2) == 0 {
        // inside an arc interval
        k.div_euclid(2)
    } else if q - (k as f64) < 0.5 {
        (k - 1).div_euclid(2)
    } else {
        (k + 1).div_euclid(2)
    };
    (m.clamp(-3, 3) + 3) as usize
}

pub fn make_sine() -> Result<ConstraintProblem> {
    let sup = arc_speed_sup();
    let gt = GroundTruthSampler::new(
        "graph-parametrized rejection sampling with arclength correction",
        move |n, rng| {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let t = rng.random_range(-20.0..20.0);
                let speed = (1.0 + curve_dy(t).powi(2)).sqrt();
                if rng.random::<f64>() * sup >= speed {
                    continue;
                }
                let y = curve_y(t);
                if y < 0.0 {
                    continue;
                }
                out.push(vec![t, y]);
            }
            out
        },
    );

    ConstraintProblem::new("sine", vec![-20.0; 2], vec![20.0; 2]).map(|p| {
        p.with_equalities(1, |x: &[f64]| vec![x[1] - curve_y(x[0])])
            .with_eq_jacobian(|x: &[f64]| DMatrix::from_row_slice(1, 2, &[-curve_dy(x[0]), 1.0]))
            .with_inequalities(1, |x: &[f64]| vec![-x[1]])
            .with_ineq_jacobian(|_x: &[f64]| DMatrix::from_row_slice(1, 2, &[0.0, -1.0]))
            .with_intrinsic_dim(1)
            .with_ground_truth(gt)
            .with_pairwise_clip(40.0)
            .with_components(N_ARCS, |x: &[f64]| arc_label(x[0]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn origin_is_on_curve_boundary() {
        // t = 0 gives x = (0, 0), on the halfspace boundary and accepted.
        let p = make_sine().unwrap();
        assert!(p.is_feasible(&[0.0, 0.0], 1e-12));
    }

    #[test]
    fn ground_truth_is_feasible() {
        let p = make_sine().unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let mut rng = derive_rng(0, "sine", 0);
        for x in gt.sample(500, &mut rng) {
            assert!(p.is_feasible(&x, 1e-9));
        }
    }

    #[test]
    fn left_arcs_dominate_arclength() {
        // The amplitude decays like exp(-0.15 t): ground truth mass must pile
        // onto the leftmost arc.
        let p = make_sine().unwrap();
        let gt = p.ground_truth.as_ref().unwrap();
        let label = p.component_of.as_ref().unwrap();
        let mut rng = derive_rng(1, "sine", 0);
        let samples = gt.sample(5_000, &mut rng);
        let mut counts = vec![0usize; N_ARCS];
        for x in &samples {
            counts[label(x)] += 1;
        }
        assert!(counts[0] as f64 / 5_000.0 > 0.4, "leftmost mass {}", counts[0]);
        assert!(counts[N_ARCS - 1] as f64 / 5_000.0 < 0.05);
        assert!(counts[0] > 10 * counts[N_ARCS - 1].max(1));
    }

    #[test]
    fn arc_labels_partition_the_axis() {
        assert_eq!(arc_label(0.5), 3);
        assert_eq!(arc_label(-17.0), 0);
        assert_eq!(arc_label(19.0), 6);
    }
}
