//! Univariate linear Gaussian model: `x_t = A x_{t-1} + eta_t`,
//! `y_t = x_t + eps_t`.

use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{Error, Result};

/// Parameters of the linear model. `x0_mean`/`x0_var` define the initial
/// distribution, which is held fixed during estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaLinear {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl ThetaLinear {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > 0.0) || !(self.r > 0.0) {
            return Err(Error::InvalidTheta {
                reason: format!("Q and R must be positive (Q={}, R={})", self.q, self.r),
            });
        }
        if !(self.x0_var >= 0.0) || !self.a.is_finite() || !self.x0_mean.is_finite() {
            return Err(Error::InvalidTheta {
                reason: "non-finite parameter".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel {
    theta: ThetaLinear,
    x0_mean: [f64; 1],
}

impl LinearModel {
    pub fn new(theta: &ThetaLinear) -> Result<Self> {
        theta.validate()?;
        Ok(Self {
            theta: *theta,
            x0_mean: [theta.x0_mean],
        })
    }

    pub fn theta(&self) -> &ThetaLinear {
        &self.theta
    }
}

impl StateSpaceModel for LinearModel {
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
    fn transition_mean(&self, _t: usize, x_prev: &[f64], out: &mut [f64]) {
        out[0] = self.theta.a * x_prev[0];
    }
    fn observe_mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
}
