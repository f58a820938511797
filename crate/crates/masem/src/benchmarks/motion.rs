//! 2-D motion planning: sample spline trajectories through an obstacle
//! course from a fixed start to a vertical goal line.
//!
//! The state is the start point plus three waypoints (eight coordinates).
//! A clamped cubic spline through `[q0; X]` is evaluated at `T = 40` equally
//! spaced parameters; every path sample carries collision, monotone-progress,
//! velocity, and acceleration constraints, and the six waypoint coordinates
//! carry explicit box rows. Equalities pin the start (two rows) and the final
//! waypoint's first coordinate to the goal line `x = 3.6`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::constraint::ConstraintProblem;
use crate::error::Result;
use crate::rng::derive_rng;

pub const N_WAYPOINTS: usize = 3;
pub const T_SAMPLES: usize = 40;
pub const GOAL_X: f64 = 3.6;
pub const START: [f64; 2] = [-3.6, 0.0];
pub const S_MAX: f64 = 1.0;
pub const A_MAX: f64 = 0.65;
const DOMAIN: f64 = 4.0;
const RANDOM_LAYOUT_SEED: u64 = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    Grid4x4,
    Random20,
}

/// Obstacles plus the path reconstruction used by the homotopy metric.
#[derive(Clone)]
pub struct MotionInfo {
    pub obstacles: Vec<([f64; 2], f64)>,
    /// Maps an 8-dim state to the discretized path `p_0..p_T`.
    pub discretize: Arc<dyn Fn(&[f64]) -> Vec<[f64; 2]> + Send + Sync>,
}

pub struct MotionPlanning {
    pub problem: ConstraintProblem,
    pub info: MotionInfo,
}

/// Cubic Bernstein basis at `u`.
fn bernstein(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u]
}

/// Row-stochastic weight matrix `W` with `p_t = sum_j W[t][j] * P_j`, where
/// `P` stacks `[q0; w1; w2; w3]` and the spline interpolates `P` at knots
/// `u = 0, 1/3, 2/3, 1`.
fn path_weights() -> Vec<[f64; 4]> {
    let mut knots = DMatrix::zeros(4, 4);
    for j in 0..4 {
        let b = bernstein(j as f64 / 3.0);
        for c in 0..4 {
            knots[(j, c)] = b[c];
        }
    }
    let inv = knots.try_inverse().expect("Bernstein knot matrix is invertible");
    let mut rows = Vec::with_capacity(T_SAMPLES + 1);
    for t in 0..=T_SAMPLES {
        let b = bernstein(t as f64 / T_SAMPLES as f64);
        let mut row = [0.0; 4];
        for (j, r) in row.iter_mut().enumerate() {
            *r = (0..4).map(|c| b[c] * inv[(c, j)]).sum();
        }
        rows.push(row);
    }
    rows
}

fn control_points(x: &[f64]) -> [[f64; 2]; 4] {
    [
        [x[0], x[1]],
        [x[2], x[3]],
        [x[4], x[5]],
        [x[6], x[7]],
    ]
}

fn discretize_path(x: &[f64], weights: &[[f64; 4]]) -> Vec<[f64; 2]> {
    let pts = control_points(x);
    weights
        .iter()
        .map(|w| {
            let mut p = [0.0; 2];
            for (j, pt) in pts.iter().enumerate() {
                p[0] += w[j] * pt[0];
                p[1] += w[j] * pt[1];
            }
            p
        })
        .collect()
}

fn grid_obstacles() -> Vec<([f64; 2], f64)> {
    let coords = [-2.4, -0.8, 0.8, 2.4];
    let mut out = Vec::with_capacity(16);
    for &cx in &coords {
        for &cy in &coords {
            out.push(([cx, cy], 0.5));
        }
    }
    out
}

fn random_obstacles() -> Vec<([f64; 2], f64)> {
    let mut rng = derive_rng(RANDOM_LAYOUT_SEED, "mp-random-layout", 0);
    let mut out: Vec<([f64; 2], f64)> = Vec::with_capacity(20);
    while out.len() < 20 {
        let c = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let r = rng.random_range(0.2..0.5);
        let ok = out.iter().all(|(oc, or)| {
            let d = ((c[0] - oc[0]).powi(2) + (c[1] - oc[1]).powi(2)).sqrt();
            d >= r + or + 0.3
        });
        if ok {
            out.push((c, r));
        }
    }
    out
}

pub fn make_motion_planning(layout: Layout) -> Result<MotionPlanning> {
    let (name, obstacles) = match layout {
        Layout::Grid4x4 => ("mp-grid", grid_obstacles()),
        Layout::Random20 => ("mp-random", random_obstacles()),
    };
    let weights = path_weights();
    let n_obs = obstacles.len();
    // collision + monotonicity + velocity + acceleration + waypoint boxes
    let n_ineq = n_obs * T_SAMPLES + T_SAMPLES + T_SAMPLES + (T_SAMPLES - 1) + 12;

    let h = |x: &[f64]| -> Vec<f64> {
        vec![x[0] - START[0], x[1] - START[1], x[6] - GOAL_X]
    };
    let jac_h = |_x: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(3, 8);
        j[(0, 0)] = 1.0;
        j[(1, 1)] = 1.0;
        j[(2, 6)] = 1.0;
        j
    };

    let g_weights = weights.clone();
    let g_obstacles = obstacles.clone();
    let eval_g = move |x: &[f64]| -> Vec<f64> {
        let p = discretize_path(x, &g_weights);
        let mut g = Vec::with_capacity(n_ineq);
        for (c, r) in &g_obstacles {
            for pt in p.iter().skip(1) {
                g.push(r * r - ((pt[0] - c[0]).powi(2) + (pt[1] - c[1]).powi(2)));
            }
        }
        for t in 1..=T_SAMPLES {
            g.push(p[t - 1][0] - p[t][0]);
        }
        for t in 1..=T_SAMPLES {
            let dx = p[t][0] - p[t - 1][0];
            let dy = p[t][1] - p[t - 1][1];
            g.push(dx * dx + dy * dy - S_MAX * S_MAX);
        }
        for t in 1..T_SAMPLES {
            let ax = p[t + 1][0] - 2.0 * p[t][0] + p[t - 1][0];
            let ay = p[t + 1][1] - 2.0 * p[t][1] + p[t - 1][1];
            g.push(ax * ax + ay * ay - A_MAX * A_MAX);
        }
        for j in 2..8 {
            g.push(x[j] - DOMAIN);
            g.push(-DOMAIN - x[j]);
        }
        g
    };

    let j_weights = weights.clone();
    let j_obstacles = obstacles.clone();
    let jac_g = move |x: &[f64]| -> DMatrix<f64> {
        let p = discretize_path(x, &j_weights);
        let w = &j_weights;
        let mut jac = DMatrix::zeros(n_ineq, 8);
        let mut row = 0;
        for (c, _r) in &j_obstacles {
            for t in 1..=T_SAMPLES {
                for k in 0..4 {
                    jac[(row, 2 * k)] = -2.0 * (p[t][0] - c[0]) * w[t][k];
                    jac[(row, 2 * k + 1)] = -2.0 * (p[t][1] - c[1]) * w[t][k];
                }
                row += 1;
            }
        }
        for t in 1..=T_SAMPLES {
            for k in 0..4 {
                jac[(row, 2 * k)] = w[t - 1][k] - w[t][k];
            }
            row += 1;
        }
        for t in 1..=T_SAMPLES {
            let dx = p[t][0] - p[t - 1][0];
            let dy = p[t][1] - p[t - 1][1];
            for k in 0..4 {
                let dw = w[t][k] - w[t - 1][k];
                jac[(row, 2 * k)] = 2.0 * dx * dw;
                jac[(row, 2 * k + 1)] = 2.0 * dy * dw;
            }
            row += 1;
        }
        for t in 1..T_SAMPLES {
            let ax = p[t + 1][0] - 2.0 * p[t][0] + p[t - 1][0];
            let ay = p[t + 1][1] - 2.0 * p[t][1] + p[t - 1][1];
            for k in 0..4 {
                let dw = w[t + 1][k] - 2.0 * w[t][k] + w[t - 1][k];
                jac[(row, 2 * k)] = 2.0 * ax * dw;
                jac[(row, 2 * k + 1)] = 2.0 * ay * dw;
            }
            row += 1;
        }
        for j in 2..8 {
            jac[(row, j)] = 1.0;
            jac[(row + 1, j)] = -1.0;
            row += 2;
        }
        jac
    };

    let problem = ConstraintProblem::new(name, vec![-DOMAIN; 8], vec![DOMAIN; 8])?
        .with_equalities(3, h)
        .with_eq_jacobian(jac_h)
        .with_inequalities(n_ineq, eval_g)
        .with_ineq_jacobian(jac_g)
        .with_intrinsic_dim(5);

    let info_weights = weights.clone();
    let info = MotionInfo {
        obstacles,
        discretize: Arc::new(move |x: &[f64]| discretize_path(x, &info_weights)),
    };
    Ok(MotionPlanning { problem, info })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn spline_interpolates_start_and_waypoints() {
        let weights = path_weights();
        let x = [-3.6, 0.0, -1.0, 2.0, 1.5, -0.5, 3.6, 1.0];
        let path = discretize_path(&x, &weights);
        assert_eq!(path.len(), T_SAMPLES + 1);
        // Knots u = 0, 1/3, 2/3, 1 coincide with samples at t multiples of
        // T/3 only for t divisible; check u=0 and u=1 exactly, and the
        // interior knots by direct Bernstein evaluation.
        assert_abs_diff_eq!(path[0][0], -3.6, epsilon = 1e-9);
        assert_abs_diff_eq!(path[0][1], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(path[T_SAMPLES][0], 3.6, epsilon = 1e-9);
        assert_abs_diff_eq!(path[T_SAMPLES][1], 1.0, epsilon = 1e-9);

        // Re-evaluate the spline at the interior knots.
        let mut knots = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let b = bernstein(j as f64 / 3.0);
            for c in 0..4 {
                knots[(j, c)] = b[c];
            }
        }
        let inv = knots.try_inverse().unwrap();
        let pts = control_points(&x);
        for (j, expect) in pts.iter().enumerate() {
            let b = bernstein(j as f64 / 3.0);
            for axis in 0..2 {
                let mut v = 0.0;
                for c in 0..4 {
                    let mut ctrl = 0.0;
                    for k in 0..4 {
                        ctrl += inv[(c, k)] * pts[k][axis];
                    }
                    v += b[c] * ctrl;
                }
                assert_abs_diff_eq!(v, expect[axis], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn constraint_counts() {
        let grid = make_motion_planning(Layout::Grid4x4).unwrap();
        assert_eq!(grid.problem.num_eq, 3);
        assert_eq!(grid.problem.num_ineq, 771);
        let random = make_motion_planning(Layout::Random20).unwrap();
        assert_eq!(random.problem.num_eq, 3);
        assert_eq!(random.problem.num_ineq, 931);
    }

    #[test]
    fn straight_feasible_path_exists() {
        // The corridor along y = 0 between the middle obstacle rows: a
        // straight line from the start to the goal stays 0.8 from every
        // obstacle center and moves 0.18 per sample.
        let grid = make_motion_planning(Layout::Grid4x4).unwrap();
        let x = [-3.6, 0.0, -1.2, 0.0, 1.2, 0.0, 3.6, 0.0];
        let slack = grid.problem.slack(&x).unwrap();
        assert!(slack.max_violation <= 1e-9, "violation {}", slack.max_violation);
    }

    #[test]
    fn collision_rows_activate_inside_obstacles() {
        let grid = make_motion_planning(Layout::Grid4x4).unwrap();
        // Waypoint 1 sits on an obstacle center; the path must collide.
        let x = [-3.6, 0.0, -2.4, -0.8, 0.8, -0.8, 3.6, -0.8];
        let g = grid.problem.eval_g(&x);
        assert!(g.iter().any(|&v| v > 0.0));
    }
}
