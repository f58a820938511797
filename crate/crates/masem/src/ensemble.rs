//! Particle ensemble: positions with cached slack values and per-slot RNG
//! streams.
//!
//! Each slot owns its generator, so kernel transitions can run in parallel
//! while results stay independent of thread count. Resampling copies
//! positions and slack between slots but never reassigns streams.

use rand_chacha::ChaCha8Rng;

use crate::constraint::{ConstraintProblem, SlackValue};
use crate::error::Result;
use crate::rng::derive_rng;

#[derive(Clone)]
pub struct ParticleEnsemble {
    positions: Vec<Vec<f64>>,
    slack: Vec<SlackValue>,
    rngs: Vec<ChaCha8Rng>,
    pub iteration: usize,
}

impl ParticleEnsemble {
    /// Build from explicit positions; slack is evaluated and cached, and slot
    /// streams are derived from `(seed, "particle", slot)`.
    pub fn from_positions(
        problem: &ConstraintProblem,
        positions: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        let slack = positions
            .iter()
            .map(|x| problem.slack(x))
            .collect::<Result<Vec<_>>>()?;
        let rngs = (0..positions.len())
            .map(|i| derive_rng(seed, "particle", i as u64))
            .collect();
        Ok(Self {
            positions,
            slack,
            rngs,
            iteration: 0,
        })
    }

    pub(crate) fn from_parts(
        positions: Vec<Vec<f64>>,
        slack: Vec<SlackValue>,
        rngs: Vec<ChaCha8Rng>,
    ) -> Self {
        debug_assert_eq!(positions.len(), slack.len());
        debug_assert_eq!(positions.len(), rngs.len());
        Self {
            positions,
            slack,
            rngs,
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.positions
    }

    pub fn slack(&self) -> &[SlackValue] {
        &self.slack
    }

    /// Mutable access for kernels; callers must keep the slack cache in sync.
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (&mut [Vec<f64>], &mut [SlackValue], &mut [ChaCha8Rng]) {
        (&mut self.positions, &mut self.slack, &mut self.rngs)
    }

    /// Replace the population by the selected slots. Streams stay with their
    /// slot, so the operation is a pure copy of positions and slack.
    pub fn resample(&mut self, indices: &[usize]) {
        let positions: Vec<Vec<f64>> = indices.iter().map(|&i| self.positions[i].clone()).collect();
        let slack: Vec<SlackValue> = indices.iter().map(|&i| self.slack[i]).collect();
        self.positions = positions;
        self.slack = slack;
    }

    pub fn mean_slack_value(&self) -> f64 {
        if self.slack.is_empty() {
            return 0.0;
        }
        self.slack.iter().map(|s| s.value).sum::<f64>() / self.slack.len() as f64
    }

    pub fn mean_max_violation(&self) -> f64 {
        if self.slack.is_empty() {
            return 0.0;
        }
        self.slack.iter().map(|s| s.max_violation).sum::<f64>() / self.slack.len() as f64
    }

    pub fn max_violation(&self) -> f64 {
        self.slack
            .iter()
            .map(|s| s.max_violation)
            .fold(0.0, f64::max)
    }

    /// Component occupancy counts under the problem's labeler, if any.
    pub fn component_counts(&self, problem: &ConstraintProblem) -> Option<Vec<usize>> {
        let label = problem.component_of.as_ref()?;
        let n_components = problem.n_components?;
        let mut counts = vec![0usize; n_components];
        for x in &self.positions {
            let c = label(x);
            if c < n_components {
                counts[c] += 1;
            }
        }
        Some(counts)
    }
}
