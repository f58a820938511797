//! 100 filled disks on a 10x10 grid, the component-loss benchmark.
//!
//! Disk radius 1, neighboring centers 5 apart: the 3-unit boundary gap
//! exceeds the unit NHR step, so particles change components only through
//! resampling.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::ConstraintProblem;
use crate::error::Result;

pub const DISK_RADIUS: f64 = 1.0;
pub const GRID_SPACING: f64 = 5.0;

pub struct GridDisks {
    pub problem: ConstraintProblem,
    pub centers: Vec<[f64; 2]>,
    pub radius: f64,
}

fn nearest_disk(x: &[f64], centers: &[[f64; 2]]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

pub fn make_grid_disks() -> Result<GridDisks> {
    let mut centers = Vec::with_capacity(100);
    for i in 0..10 {
        for j in 0..10 {
            centers.push([
                GRID_SPACING * i as f64 - 22.5,
                GRID_SPACING * j as f64 - 22.5,
            ]);
        }
    }

    let g_centers = centers.clone();
    let jac_centers = centers.clone();
    let label_centers = centers.clone();
    let problem = ConstraintProblem::new("grid-disks", vec![-25.0; 2], vec![25.0; 2])?
        .with_inequalities(1, move |x: &[f64]| {
            let (_, d2) = nearest_disk(x, &g_centers);
            vec![d2 - DISK_RADIUS * DISK_RADIUS]
        })
        .with_ineq_jacobian(move |x: &[f64]| {
            let (i, _) = nearest_disk(x, &jac_centers);
            DMatrix::from_row_slice(
                1,
                2,
                &[
                    2.0 * (x[0] - jac_centers[i][0]),
                    2.0 * (x[1] - jac_centers[i][1]),
                ],
            )
        })
        .with_intrinsic_dim(2)
        .with_components(100, move |x: &[f64]| nearest_disk(x, &label_centers).0)
        .with_component_masses(vec![0.01; 100]);

    Ok(GridDisks {
        problem,
        centers,
        radius: DISK_RADIUS,
    })
}

impl GridDisks {
    fn point_in_disk(&self, component: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let r = self.radius * rng.random::<f64>().sqrt();
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        vec![
            self.centers[component][0] + r * theta.cos(),
            self.centers[component][1] + r * theta.sin(),
        ]
    }

    /// Chains spread round-robin over all components, uniform within a disk.
    pub fn uniform_init(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| self.point_in_disk(i % self.centers.len(), rng))
            .collect()
    }

    /// One random component left empty, a single chain in every other one.
    pub fn worst_case_init(&self, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let empty = rng.random_range(0..self.centers.len());
        (0..self.centers.len())
            .filter(|&c| c != empty)
            .map(|c| self.point_in_disk(c, rng))
            .collect()
    }
}
