//! Three-finger capsule grasp: 18 dimensions (point of attack and force per
//! finger), 9 equalities, 48 inequalities.
//!
//! The capsule sits at the origin with axis toward (1,1,1), length 1, radius
//! 0.25. Equalities: force balance against gravity, zero net torque, and
//! each attack point on the capsule surface via the axis-clamped offset
//! `d_i = clamp(<o, p_i>, -l/2, l/2) o - p_i` with `|d_i| = r`. Inequalities
//! per finger: friction cone, force-norm band [0.1, 1], and the forbidden
//! middle band `|<o, p_i>| >= w/2`; plus per-coordinate box rows on all 18
//! coordinates. The clamp and absolute values are evaluated as written, with
//! subgradient zero at their kinks.

use nalgebra::DMatrix;

use crate::constraint::ConstraintProblem;
use crate::error::Result;

pub const CAPSULE_LENGTH: f64 = 1.0;
pub const CAPSULE_RADIUS: f64 = 0.25;
pub const FRICTION: f64 = 1.0;
pub const GRAVITY: [f64; 3] = [0.0, 0.0, 1.0];
pub const BAND_WIDTH: f64 = 0.25;
pub const FORCE_MIN: f64 = 0.1;
pub const FORCE_MAX: f64 = 1.0;

fn axis() -> [f64; 3] {
    let n = 3f64.sqrt();
    [1.0 / n, 1.0 / n, 1.0 / n]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn finger(x: &[f64], i: usize) -> (&[f64], &[f64]) {
    (&x[6 * i..6 * i + 3], &x[6 * i + 3..6 * i + 6])
}

/// Offset from the attack point to the nearest axis-segment point.
fn capsule_offset(p: &[f64]) -> ([f64; 3], f64, bool) {
    let o = axis();
    let s = dot(&o, p);
    let clamped = s.abs() >= CAPSULE_LENGTH / 2.0;
    let sc = s.clamp(-CAPSULE_LENGTH / 2.0, CAPSULE_LENGTH / 2.0);
    let d = [sc * o[0] - p[0], sc * o[1] - p[1], sc * o[2] - p[2]];
    (d, s, clamped)
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub fn make_grasping() -> Result<ConstraintProblem> {
    let eval_h = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; 9];
        for i in 0..3 {
            let (p, f) = finger(x, i);
            for a in 0..3 {
                out[a] += f[a];
            }
            let tau = cross(p, f);
            for a in 0..3 {
                out[3 + a] += tau[a];
            }
            let (d, _, _) = capsule_offset(p);
            out[6 + i] = norm3(&d) - CAPSULE_RADIUS;
        }
        for a in 0..3 {
            out[a] -= GRAVITY[a];
        }
        out
    };

    let jac_h = |x: &[f64]| -> DMatrix<f64> {
        let o = axis();
        let mut j = DMatrix::zeros(9, 18);
        for i in 0..3 {
            let (p, f) = finger(x, i);
            let pi = 6 * i;
            let fi = 6 * i + 3;
            // Force balance rows: identity on each force block.
            for a in 0..3 {
                j[(a, fi + a)] = 1.0;
            }
            // Torque rows: d(p x f)/dp = -[f]_x, d(p x f)/df = [p]_x.
            let skew = |v: &[f64]| -> [[f64; 3]; 3] {
                [
                    [0.0, -v[2], v[1]],
                    [v[2], 0.0, -v[0]],
                    [-v[1], v[0], 0.0],
                ]
            };
            let fs = skew(f);
            let ps = skew(p);
            for a in 0..3 {
                for b in 0..3 {
                    j[(3 + a, pi + b)] = -fs[a][b];
                    j[(3 + a, fi + b)] = ps[a][b];
                }
            }
            // Surface row: grad |d| = d^T/|d| * dd/dp.
            let (d, _, clamped) = capsule_offset(p);
            let dn = norm3(&d).max(1e-12);
            for b in 0..3 {
                let mut grad = 0.0;
                for a in 0..3 {
                    // dd_a/dp_b = s' * o_a o_b - delta_ab, s' = 0 when clamped
                    let dd = if clamped { 0.0 } else { o[a] * o[b] }
                        - if a == b { 1.0 } else { 0.0 };
                    grad += d[a] / dn * dd;
                }
                j[(6 + i, pi + b)] = grad;
            }
        }
        j
    };

    let eval_g = |x: &[f64]| -> Vec<f64> {
        let mut out = Vec::with_capacity(48);
        for i in 0..3 {
            let (p, f) = finger(x, i);
            let (d, s, _) = capsule_offset(p);
            let dn = norm3(&d).max(1e-12);
            let n = [d[0] / dn, d[1] / dn, d[2] / dn];
            let nf = dot(&n, f);
            let tang = [f[0] - nf * n[0], f[1] - nf * n[1], f[2] - nf * n[2]];
            out.push(norm3(&tang) + FRICTION * nf);
            let fnorm = norm3(&[f[0], f[1], f[2]]);
            out.push(FORCE_MIN - fnorm);
            out.push(fnorm - FORCE_MAX);
            out.push(BAND_WIDTH / 2.0 - s.abs());
        }
        for j in 0..18 {
            out.push(x[j] - 1.0);
            out.push(-1.0 - x[j]);
        }
        out
    };

    let jac_g = |x: &[f64]| -> DMatrix<f64> {
        let o = axis();
        let mut jac = DMatrix::zeros(48, 18);
        for i in 0..3 {
            let (p, f) = finger(x, i);
            let pi = 6 * i;
            let fi = 6 * i + 3;
            let (d, s, clamped) = capsule_offset(p);
            let dn = norm3(&d).max(1e-12);
            let n = [d[0] / dn, d[1] / dn, d[2] / dn];
            let nf = dot(&n, f);
            let tang = [f[0] - nf * n[0], f[1] - nf * n[1], f[2] - nf * n[2]];
            let tn = norm3(&tang);
            let that = if tn > 1e-12 {
                [tang[0] / tn, tang[1] / tn, tang[2] / tn]
            } else {
                [0.0; 3]
            };
            let row = 4 * i;

            // dd/dp (3x3), then dn/dp = (I - n n^T)/|d| * dd/dp.
            let mut ddp = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    ddp[a][b] = if clamped { 0.0 } else { o[a] * o[b] }
                        - if a == b { 1.0 } else { 0.0 };
                }
            }
            let mut dndp = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    let mut v = 0.0;
                    for c in 0..3 {
                        let proj = if a == c { 1.0 } else { 0.0 } - n[a] * n[c];
                        v += proj / dn * ddp[c][b];
                    }
                    dndp[a][b] = v;
                }
            }

            // Cone row: d/df = that + mu n; d/dn = -<n,f> that + mu f.
            for b in 0..3 {
                jac[(row, fi + b)] = that[b] + FRICTION * n[b];
                let dgdn: f64 = (0..3)
                    .map(|a| (-nf * that[a] + FRICTION * f[a]) * dndp[a][b])
                    .sum();
                jac[(row, pi + b)] = dgdn;
            }
            // Force norm rows.
            let fnorm = norm3(&[f[0], f[1], f[2]]).max(1e-12);
            for b in 0..3 {
                jac[(row + 1, fi + b)] = -f[b] / fnorm;
                jac[(row + 2, fi + b)] = f[b] / fnorm;
            }
            // Band row: -sign(s) o^T, subgradient 0 at s = 0.
            let sign = if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                0.0
            };
            for b in 0..3 {
                jac[(row + 3, pi + b)] = -sign * o[b];
            }
        }
        let mut row = 12;
        for j in 0..18 {
            jac[(row, j)] = 1.0;
            jac[(row + 1, j)] = -1.0;
            row += 2;
        }
        jac
    };

    ConstraintProblem::new("grasping", vec![-1.0; 18], vec![1.0; 18]).map(|p| {
        p.with_equalities(9, eval_h)
            .with_eq_jacobian(jac_h)
            .with_inequalities(48, eval_g)
            .with_ineq_jacobian(jac_g)
            .with_intrinsic_dim(9)
    })
}
