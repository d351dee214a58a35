//! Kitagawa benchmark model: bimodal forecasts from the `cos` forcing and a
//! quadratic observation operator.
//!
//! `x_t = 0.5 x_{t-1} + 25 x_{t-1} / (1 + x_{t-1}^2) + 8 cos(1.2 t) + eta_t`
//! `y_t = 0.05 x_t^2 + eps_t`
//!
//! The transition is time-inhomogeneous; `t` is the integer index of the
//! destination state, counting from 1 at the first transition.

use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaKitagawa {
    pub q: f64,
    pub r: f64,
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl ThetaKitagawa {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidTheta {
                reason: format!("Q and R must be positive (Q={}, R={})", self.q, self.r),
            });
        }
        if !(self.x0_var >= 0.0) || !self.x0_mean.is_finite() {
            return Err(Error::InvalidTheta {
                reason: "non-finite parameter".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct KitagawaModel {
    theta: ThetaKitagawa,
    x0_mean: [f64; 1],
}

impl KitagawaModel {
    pub fn new(theta: &ThetaKitagawa) -> Result<Self> {
        theta.validate()?;
        Ok(Self {
            theta: *theta,
            x0_mean: [theta.x0_mean],
        })
    }

    pub fn theta(&self) -> &ThetaKitagawa {
        &self.theta
    }
}

impl StateSpaceModel for KitagawaModel {
    fn dim_x(&self) -> usize {
        1
    }
    fn dim_y(&self) -> usize {
        1
    }
    fn process_noise_var(&self) -> f64 {
        self.theta.q
    }
    fn observation_noise_var(&self) -> f64 {
        self.theta.r
    }
    fn initial_mean(&self) -> &[f64] {
        &self.x0_mean
    }
    fn initial_var(&self) -> f64 {
        self.theta.x0_var
    }
    fn transition_mean(&self, t: usize, x_prev: &[f64], out: &mut [f64]) {
        let x = x_prev[0];
        out[0] = 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * t as f64).cos();
    }
    fn observe_mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 0.05 * x[0] * x[0];
    }
}
