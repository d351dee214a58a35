//! Particle clouds, genealogy and trajectories.

use crate::error::{Error, Result};

/// Dense state vector; length must match the owning model's state dimension.
pub type StateVector = Vec<f64>;

/// Dense observation vector of the model's observation dimension.
pub type Observation = Vec<f64>;

/// One realization of the latent path `x_{0:T}`, either a smoothing sample
/// or a conditioning trajectory. `source_indices` records which particle
/// slot each state was taken from when the trajectory was extracted from a
/// [`ParticleHistory`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
    pub source_indices: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn new(states: Vec<StateVector>) -> Self {
        Self {
            states,
            source_indices: None,
        }
    }

    /// All-zero trajectory covering `t = 0..=t_max`; the default initial
    /// conditioning for the iterated smoothers.
    pub fn zeros(t_max: usize, dim: usize) -> Self {
        Self::new(vec![vec![0.0; dim]; t_max + 1])
    }

    /// Number of stored states, `T + 1`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }
}

/// Full record of one particle filter pass over `t = 0..=t_max`.
///
/// Particles at each time step are stored as one flat row-major block of
/// `n_particles * dim_x` values to keep the per-step loops allocation-free.
/// `ancestors[t-1][i]` is the index of the parent at time `t-1` of particle
/// `i` at time `t`; `log_evidence_increments[t-1]` is the log of the
/// per-step normalizing-constant estimate `mean_i(w~_t^i)`.
#[derive(Debug, Clone)]
pub struct ParticleHistory {
    pub n_particles: usize,
    pub dim_x: usize,
    pub t_max: usize,
    pub particles: Vec<Vec<f64>>,
    pub log_weights: Vec<Vec<f64>>,
    pub norm_weights: Vec<Vec<f64>>,
    pub ancestors: Vec<Vec<usize>>,
    pub log_evidence_increments: Vec<f64>,
}

impl ParticleHistory {
    /// Zero-filled history with the right shapes.
    pub fn with_shape(n_particles: usize, dim_x: usize, t_max: usize) -> Self {
        Self {
            n_particles,
            dim_x,
            t_max,
            particles: vec![vec![0.0; n_particles * dim_x]; t_max + 1],
            log_weights: vec![vec![0.0; n_particles]; t_max + 1],
            norm_weights: vec![vec![0.0; n_particles]; t_max + 1],
            ancestors: vec![vec![0; n_particles]; t_max],
            log_evidence_increments: vec![0.0; t_max],
        }
    }

    /// State of particle `i` at time `t`.
    #[inline]
    pub fn particle(&self, t: usize, i: usize) -> &[f64] {
        &self.particles[t][i * self.dim_x..(i + 1) * self.dim_x]
    }

    #[inline]
    pub(crate) fn particle_mut(&mut self, t: usize, i: usize) -> &mut [f64] {
        &mut self.particles[t][i * self.dim_x..(i + 1) * self.dim_x]
    }

    /// Log evidence estimate for the whole window,
    /// `sum_t log p_hat(y_t | y_{1:t-1})`.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence_increments.iter().sum()
    }

    /// Weighted mean of the particle cloud at time `t`.
    pub fn filtered_mean(&self, t: usize) -> StateVector {
        let mut mean = vec![0.0; self.dim_x];
        for i in 0..self.n_particles {
            let w = self.norm_weights[t][i];
            for (m, x) in mean.iter_mut().zip(self.particle(t, i)) {
                *m += w * x;
            }
        }
        mean
    }

    /// Extract the trajectory ending in particle `idx` at each stored index.
    pub(crate) fn path_from_indices(&self, indices: &[usize]) -> Trajectory {
        let states = indices
            .iter()
            .enumerate()
            .map(|(t, &i)| self.particle(t, i).to_vec())
            .collect();
        Trajectory {
            states,
            source_indices: Some(indices.to_vec()),
        }
    }

    /// Check every structural invariant: shapes, finite particle values,
    /// nonnegative weights summing to one, valid ancestor indices.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::InvalidHistory { reason });
        if self.particles.len() != self.t_max + 1
            || self.log_weights.len() != self.t_max + 1
            || self.norm_weights.len() != self.t_max + 1
            || self.ancestors.len() != self.t_max
            || self.log_evidence_increments.len() != self.t_max
        {
            return fail("time axis lengths inconsistent".into());
        }
        for t in 0..=self.t_max {
            if self.particles[t].len() != self.n_particles * self.dim_x {
                return fail(format!("particle block at t={t} has wrong size"));
            }
            if self.particles[t].iter().any(|v| !v.is_finite()) {
                return fail(format!("non-finite particle at t={t}"));
            }
            let mut sum = 0.0;
            for &w in &self.norm_weights[t] {
                if !(w >= 0.0) {
                    return fail(format!("negative weight at t={t}"));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return fail(format!("weights at t={t} sum to {sum}"));
            }
        }
        for (t, row) in self.ancestors.iter().enumerate() {
            if row.len() != self.n_particles {
                return fail(format!("ancestor row at t={} has wrong size", t + 1));
            }
            if row.iter().any(|&a| a >= self.n_particles) {
                return fail(format!("ancestor index out of range at t={}", t + 1));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_history() -> ParticleHistory {
        let mut h = ParticleHistory::with_shape(2, 1, 2);
        for t in 0..=2 {
            h.norm_weights[t] = vec![0.5, 0.5];
            h.log_weights[t] = vec![0.0, 0.0];
        }
        h
    }

    #[test]
    fn validate_accepts_consistent_history() {
        assert!(tiny_history().validate().is_ok());
    }

    #[test]
    fn validate_rejects_unnormalized_weights() {
        let mut h = tiny_history();
        h.norm_weights[1] = vec![0.7, 0.6];
        assert!(h.validate().is_err());
    }

    #[test]
    fn validate_rejects_bad_ancestor() {
        let mut h = tiny_history();
        h.ancestors[0][1] = 5;
        assert!(h.validate().is_err());
    }

    #[test]
    fn validate_rejects_nan_particle() {
        let mut h = tiny_history();
        h.particles[2][0] = f64::NAN;
        assert!(h.validate().is_err());
    }

    #[test]
    fn filtered_mean_weighted() {
        let mut h = ParticleHistory::with_shape(2, 1, 0);
        h.particles[0] = vec![1.0, 3.0];
        h.norm_weights[0] = vec![0.25, 0.75];
        assert!((h.filtered_mean(0)[0] - 2.5).abs() < 1e-15);
    }
}
