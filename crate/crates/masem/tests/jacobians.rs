//! Analytic-vs-finite-difference Jacobian agreement for every benchmark:
//! relative Frobenius error at most 1e-4 on 100 random interior points.

use std::sync::Arc;

use masem::benchmarks;
use masem::constraint::{fd_jacobian, ConstraintFn};
use masem::rng::derive_rng;
use rand::Rng;

fn random_interior_points(
    problem: &masem::ConstraintProblem,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = derive_rng(seed, "jacobian-points", 0);
    (0..n)
        .map(|_| {
            (0..problem.dim)
                .map(|j| {
                    let width = problem.hi[j] - problem.lo[j];
                    problem.lo[j] + width * (0.05 + 0.9 * rng.random::<f64>())
                })
                .collect()
        })
        .collect()
}

fn check_problem(name: &str) {
    let bench = benchmarks::make(name).unwrap();
    let p = &bench.problem;
    let eval_h: ConstraintFn = {
        let p = p.clone();
        Arc::new(move |x: &[f64]| p.eval_h(x))
    };
    let eval_g: ConstraintFn = {
        let p = p.clone();
        Arc::new(move |x: &[f64]| p.eval_g(x))
    };
    for (idx, x) in random_interior_points(p, 100, 7).iter().enumerate() {
        if p.num_eq > 0 {
            let analytic = p.jac_h_at(x);
            let h = p.eval_h(x.as_slice());
            assert!(h.iter().all(|v| v.is_finite()), "{name} produced non-finite h");
            let fd = fd_jacobian(&eval_h, x, p.num_eq);
            let rel = (&analytic - &fd).norm() / analytic.norm().max(1e-12);
            assert!(
                rel <= 1e-4,
                "{name} equality Jacobian mismatch at point {idx}: rel {rel}"
            );
        }
        if p.num_ineq > 0 {
            let analytic = p.jac_g_at(x);
            let fd = fd_jacobian(&eval_g, x, p.num_ineq);
            let rel = (&analytic - &fd).norm() / analytic.norm().max(1e-12);
            assert!(
                rel <= 1e-4,
                "{name} inequality Jacobian mismatch at point {idx}: rel {rel}"
            );
        }
    }
}

#[test]
fn disks_jacobians_agree() {
    check_problem("disks-connected");
    check_problem("disks-disconnected");
}

#[test]
fn seven_lobes_jacobians_agree() {
    check_problem("seven-lobes");
}

#[test]
fn sine_jacobians_agree() {
    check_problem("sine");
}

#[test]
fn swiss_roll_jacobians_agree() {
    check_problem("swiss-roll");
}

#[test]
fn stress_jacobians_agree() {
    check_problem("stress:d=8,m=5");
    check_problem("stress:d=6,m=3");
}

#[test]
fn motion_planning_jacobians_agree() {
    check_problem("mp-grid");
    check_problem("mp-random");
}

#[test]
fn grasping_jacobians_agree() {
    check_problem("grasping");
}

#[test]
fn ground_truth_samplers_are_deterministic() {
    for name in ["disks-disconnected", "seven-lobes", "sine", "swiss-roll", "stress:d=6,m=3"] {
        let bench = benchmarks::make(name).unwrap();
        let gt = bench.problem.ground_truth.as_ref().unwrap();
        let a = gt.sample(50, &mut derive_rng(3, "gt-det", 0));
        let b = gt.sample(50, &mut derive_rng(3, "gt-det", 0));
        assert_eq!(a, b, "{name} sampler not deterministic");
    }
}
