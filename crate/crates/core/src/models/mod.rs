//! State-space model contract and the three concrete models.
//!
//! A model owns its parameters and exposes the transition/observation
//! structure the filters need. All in-scope models are additive-Gaussian
//! with isotropic noise (`Q = q I`, `R = r I`), so the trait is organized
//! around the noise-free maps `transition_mean` / `observe_mean` plus the
//! two variances; densities and samplers come as provided methods. The
//! Kitagawa transition depends on the step index, so every transition
//! method carries the destination time `t` (first transition is `t = 1`).

mod kitagawa;
mod linear;
mod lorenz;

pub use kitagawa::{KitagawaModel, ThetaKitagawa};
pub use linear::{LinearModel, ThetaLinear};
pub use lorenz::{lorenz_attractor_point, lorenz_flow, lorenz_flow_fixed, LorenzModel, ThetaLorenz};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::{Observation, Trajectory};
use crate::rng::RngStream;

/// Largest state dimension across the built-in models; sized for the stack
/// buffers in the provided trait methods.
pub(crate) const MAX_DIM: usize = 4;

const LN_2PI: f64 = 1.8378770664093453;

/// Isotropic Gaussian log density of a residual with `dim` components and
/// per-component variance `var`.
#[inline]
pub(crate) fn iso_gauss_logpdf(sq_residual: f64, dim: usize, var: f64) -> f64 {
    -0.5 * dim as f64 * (LN_2PI + var.ln()) - 0.5 * sq_residual / var
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Contract every filter, smoother and estimator is written against.
pub trait StateSpaceModel {
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    /// Per-component process noise variance (`Q = q I`).
    fn process_noise_var(&self) -> f64;
    /// Per-component observation noise variance (`R = r I`).
    fn observation_noise_var(&self) -> f64;

    fn initial_mean(&self) -> &[f64];
    fn initial_var(&self) -> f64;

    /// Noise-free forecast `m(x_{t-1})` for the transition into time `t`.
    fn transition_mean(&self, t: usize, x_prev: &[f64], out: &mut [f64]);

    /// Noise-free observation operator `h(x)`.
    fn observe_mean(&self, x: &[f64], out: &mut [f64]);

    /// Whether `log_transition_density` factors through `transition_mean`;
    /// lets the backward pass cache the forecast means instead of
    /// re-evaluating the dynamics per density call.
    fn transition_factors_through_mean(&self) -> bool {
        true
    }

    fn sample_initial(&self, rng: &mut RngStream, out: &mut [f64]) {
        let sd = self.initial_var().sqrt();
        for (o, &m) in out.iter_mut().zip(self.initial_mean()) {
            *o = m + sd * rng.standard_normal();
        }
    }

    fn log_initial_density(&self, x0: &[f64]) -> f64 {
        let var = self.initial_var();
        if var == 0.0 {
            // Degenerate prior: constant in theta, zero if on the point.
            return if sq_dist(x0, self.initial_mean()) == 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            };
        }
        iso_gauss_logpdf(sq_dist(x0, self.initial_mean()), self.dim_x(), var)
    }

    fn sample_transition(&self, rng: &mut RngStream, t: usize, x_prev: &[f64], out: &mut [f64]) {
        self.transition_mean(t, x_prev, out);
        let sd = self.process_noise_var().sqrt();
        for o in out.iter_mut() {
            *o += sd * rng.standard_normal();
        }
    }

    fn log_transition_density(&self, t: usize, x_next: &[f64], x_prev: &[f64]) -> f64 {
        let mut mean = [0.0; MAX_DIM];
        self.transition_mean(t, x_prev, &mut mean[..self.dim_x()]);
        self.log_transition_density_from_mean(x_next, &mean[..self.dim_x()])
    }

    /// Transition log density given a precomputed forecast mean.
    fn log_transition_density_from_mean(&self, x_next: &[f64], mean: &[f64]) -> f64 {
        iso_gauss_logpdf(sq_dist(x_next, mean), self.dim_x(), self.process_noise_var())
    }

    fn log_observation_density(&self, _t: usize, y: &[f64], x: &[f64]) -> f64 {
        let mut mean = [0.0; MAX_DIM];
        self.observe_mean(x, &mut mean[..self.dim_y()]);
        iso_gauss_logpdf(
            sq_dist(y, &mean[..self.dim_y()]),
            self.dim_y(),
            self.observation_noise_var(),
        )
    }

    fn sample_observation(&self, rng: &mut RngStream, x: &[f64], out: &mut [f64]) {
        self.observe_mean(x, out);
        let sd = self.observation_noise_var().sqrt();
        for o in out.iter_mut() {
            *o += sd * rng.standard_normal();
        }
    }
}

/// Simulate a truth trajectory `x_{0:T}` and observations `y_{1:T}`.
pub fn simulate<M: StateSpaceModel>(
    model: &M,
    rng: &mut RngStream,
    t_max: usize,
) -> Result<(Trajectory, Vec<Observation>)> {
    assert!(t_max >= 1, "simulate needs at least one step");
    let dx = model.dim_x();
    let dy = model.dim_y();
    let mut states = Vec::with_capacity(t_max + 1);
    let mut obs = Vec::with_capacity(t_max);

    let mut x = vec![0.0; dx];
    model.sample_initial(rng, &mut x);
    states.push(x.clone());

    let mut next = vec![0.0; dx];
    let mut y = vec![0.0; dy];
    for t in 1..=t_max {
        model.sample_transition(rng, t, &x, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: t });
        }
        model.sample_observation(rng, &next, &mut y);
        states.push(next.clone());
        obs.push(y.clone());
        std::mem::swap(&mut x, &mut next);
    }
    Ok((Trajectory::new(states), obs))
}

/// Parameters of one of the built-in models, resolved from a config.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    Linear(ThetaLinear),
    Kitagawa(ThetaKitagawa),
    Lorenz(ThetaLorenz),
}

/// Initial-state mean as it appears in JSON: a scalar for the univariate
/// models, a 3-vector for Lorenz.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Mean {
    Scalar(f64),
    Vector(Vec<f64>),
}

/// JSON configuration document for a model and simulation window.
///
/// Unset fields fall back to the model's standard experiment values.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ModelConfig {
    pub model: String,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_mean: Option<X0Mean>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_var: Option<f64>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn scalar_x0(&self) -> Result<Option<f64>> {
        match &self.x0_mean {
            None => Ok(None),
            Some(X0Mean::Scalar(v)) => Ok(Some(*v)),
            Some(X0Mean::Vector(_)) => Err(Error::InvalidConfig {
                reason: format!("model '{}' expects a scalar x0_mean", self.model),
            }),
        }
    }

    /// Resolve the document into model parameters, a window length and a
    /// seed, applying per-model defaults for anything unset.
    pub fn resolve(&self) -> Result<(ModelSpec, usize, u64)> {
        let t_max = self.t.unwrap_or(100);
        if t_max < 1 {
            return Err(Error::InvalidConfig {
                reason: "T must be >= 1".into(),
            });
        }
        let seed = self.seed.unwrap_or(0);
        let spec = match self.model.as_str() {
            "linear" => {
                let a = self.a.unwrap_or(0.9);
                let q = self.q.unwrap_or(1.0);
                let r = self.r.unwrap_or(1.0);
                let x0_mean = self.scalar_x0()?.unwrap_or(0.0);
                // Stationary AR(1) variance unless overridden.
                let x0_var = match self.x0_var {
                    Some(v) => v,
                    None => {
                        if a.abs() >= 1.0 {
                            return Err(Error::InvalidConfig {
                                reason: "x0_var required when |A| >= 1".into(),
                            });
                        }
                        q / (1.0 - a * a)
                    }
                };
                ModelSpec::Linear(ThetaLinear {
                    a,
                    q,
                    r,
                    x0_mean,
                    x0_var,
                })
            }
            "kitagawa" => ModelSpec::Kitagawa(ThetaKitagawa {
                q: self.q.unwrap_or(1.0),
                r: self.r.unwrap_or(10.0),
                x0_mean: self.scalar_x0()?.unwrap_or(0.0),
                x0_var: self.x0_var.unwrap_or(1.0),
            }),
            "lorenz" => {
                let x0_mean = match &self.x0_mean {
                    None => lorenz_attractor_point(),
                    Some(X0Mean::Vector(v)) if v.len() == 3 => [v[0], v[1], v[2]],
                    Some(_) => {
                        return Err(Error::InvalidConfig {
                            reason: "lorenz x0_mean must be a 3-vector".into(),
                        })
                    }
                };
                ModelSpec::Lorenz(ThetaLorenz {
                    sigma_q2: self.sigma_q2.unwrap_or(1.0),
                    sigma_r2: self.sigma_r2.unwrap_or(2.0),
                    dt: self.dt.unwrap_or(0.15),
                    x0_mean,
                    x0_var: self.x0_var.unwrap_or(0.1),
                })
            }
            other => {
                return Err(Error::InvalidConfig {
                    reason: format!("unknown model '{other}'"),
                })
            }
        };
        Ok((spec, t_max, seed))
    }
}
