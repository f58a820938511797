//! Benchmark problems with ground-truth samplers and component labelers.
//!
//! Every factory builds a [`ConstraintProblem`] with analytic Jacobians, the
//! per-problem pairwise-distance clip constant, and (where the construction
//! admits them) an exact feasible-set sampler and component labeler. Problems
//! are addressable by name through [`make`].

pub mod disks;
pub mod grasping;
pub mod grid_disks;
pub mod motion;
pub mod seven_lobes;
pub mod sine;
pub mod stress;
pub mod swiss_roll;

use rand_chacha::ChaCha8Rng;

use crate::constraint::ConstraintProblem;
use crate::error::{MasemError, Result};

pub use motion::MotionInfo;

/// A benchmark problem plus problem-family extras that do not belong on the
/// generic constraint interface (currently: path reconstruction for the
/// motion-planning problems).
pub struct Bench {
    pub problem: ConstraintProblem,
    pub motion: Option<MotionInfo>,
}

impl Bench {
    fn plain(problem: ConstraintProblem) -> Self {
        Self {
            problem,
            motion: None,
        }
    }
}

/// Registry names accepted by [`make`].
pub fn problem_names() -> Vec<&'static str> {
    vec![
        "disks-connected",
        "disks-disconnected",
        "seven-lobes",
        "sine",
        "swiss-roll",
        "stress:d=<d>,m=<m>",
        "mp-grid",
        "mp-random",
        "grasping",
    ]
}

/// Build a problem from its registry name. Stress-test instances are
/// parameterized inline, e.g. `stress:d=8,m=5`.
pub fn make(name: &str) -> Result<Bench> {
    match name {
        "disks-connected" => Ok(Bench::plain(disks::make_disks(true)?)),
        "disks-disconnected" => Ok(Bench::plain(disks::make_disks(false)?)),
        "seven-lobes" => Ok(Bench::plain(seven_lobes::make_seven_lobes()?)),
        "sine" => Ok(Bench::plain(sine::make_sine()?)),
        "swiss-roll" => Ok(Bench::plain(swiss_roll::make_swiss_roll()?)),
        "mp-grid" => {
            let mp = motion::make_motion_planning(motion::Layout::Grid4x4)?;
            Ok(Bench {
                problem: mp.problem,
                motion: Some(mp.info),
            })
        }
        "mp-random" => {
            let mp = motion::make_motion_planning(motion::Layout::Random20)?;
            Ok(Bench {
                problem: mp.problem,
                motion: Some(mp.info),
            })
        }
        "grasping" => Ok(Bench::plain(grasping::make_grasping()?)),
        other => {
            if let Some(rest) = other.strip_prefix("stress:") {
                let spec = parse_stress_spec(rest)?;
                return Ok(Bench::plain(stress::make_stress_test(&spec)?));
            }
            Err(MasemError::UnknownProblem(other.to_string()))
        }
    }
}

fn parse_stress_spec(rest: &str) -> Result<stress::StressTestSpec> {
    let mut d = None;
    let mut m = None;
    for part in rest.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| MasemError::UnknownProblem(format!("stress:{rest}")))?;
        let parsed: usize = value
            .trim()
            .parse()
            .map_err(|_| MasemError::UnknownProblem(format!("stress:{rest}")))?;
        match key.trim() {
            "d" => d = Some(parsed),
            "m" => m = Some(parsed),
            _ => return Err(MasemError::UnknownProblem(format!("stress:{rest}"))),
        }
    }
    match (d, m) {
        (Some(d), Some(m)) => Ok(stress::StressTestSpec::new(d, m)),
        _ => Err(MasemError::UnknownProblem(format!("stress:{rest}"))),
    }
}

/// Draw `n` ground-truth samples, failing for problems without a sampler.
pub fn ground_truth(
    problem: &ConstraintProblem,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    match &problem.ground_truth {
        Some(gt) => Ok(gt.sample(n, rng)),
        None => Err(MasemError::Unsupported(format!(
            "problem '{}' has no ground-truth sampler",
            problem.name
        ))),
    }
}
