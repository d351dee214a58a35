//! Stochastic EM drivers.
//!
//! One iteration applies the smoothing kernel once at the current
//! parameter value (E-step, `n_s` trajectory draws plus the conditioning
//! update) and then the closed-form covariance maximizers on those draws
//! (M-step). The per-iteration log likelihood reported in the trace is the
//! filter evidence estimate from the E-step pass, i.e. an estimate of
//! `log p(y | theta_{r-1})`.

mod mstep;

pub use mstep::{auxiliary_q, mstep_gaussian, mstep_linear_a, mstep_lorenz};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::history::{Observation, Trajectory};
use crate::models::{
    KitagawaModel, LinearModel, LorenzModel, StateSpaceModel, ThetaKitagawa, ThetaLinear,
    ThetaLorenz,
};
use crate::rng::RngStream;
use crate::smoothing::{smoother_step, SmootherVariant};

/// Variances below this are clamped (and flagged) so densities stay
/// defined when the sample residuals collapse.
pub const VARIANCE_FLOOR: f64 = 1e-8;

fn clamp_var(v: f64) -> (f64, bool) {
    if v < VARIANCE_FLOOR {
        (VARIANCE_FLOOR, true)
    } else {
        (v, false)
    }
}

/// A parametric model family: how to build a model from a parameter value
/// and how to maximize the auxiliary function over that value.
pub trait ModelFamily {
    type Theta: Clone + std::fmt::Debug;
    type Model: StateSpaceModel;

    fn build(&self, theta: &Self::Theta) -> Result<Self::Model>;

    /// Closed-form M-step on the E-step samples. The boolean reports
    /// whether any variance hit [`VARIANCE_FLOOR`].
    fn mstep(&self, samples: &[Trajectory], y: &[Observation]) -> Result<(Self::Theta, bool)>;

    fn param_names(&self) -> &'static [&'static str];
    fn param_values(&self, theta: &Self::Theta) -> Vec<f64>;
}

/// Linear Gaussian family; estimates (A, Q, R) with the initial
/// distribution held fixed.
#[derive(Debug, Clone, Copy)]
pub struct LinearFamily {
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl LinearFamily {
    pub fn theta(&self, a: f64, q: f64, r: f64) -> ThetaLinear {
        ThetaLinear {
            a,
            q,
            r,
            x0_mean: self.x0_mean,
            x0_var: self.x0_var,
        }
    }
}

impl ModelFamily for LinearFamily {
    type Theta = ThetaLinear;
    type Model = LinearModel;

    fn build(&self, theta: &Self::Theta) -> Result<LinearModel> {
        LinearModel::new(theta)
    }

    fn mstep(&self, samples: &[Trajectory], y: &[Observation]) -> Result<(Self::Theta, bool)> {
        let a = mstep_linear_a(samples)?;
        let probe = self.build(&self.theta(a, 1.0, 1.0))?;
        let (qm, rm) = mstep_gaussian(&probe, samples, y)?;
        let (q, cq) = clamp_var(qm[(0, 0)]);
        let (r, cr) = clamp_var(rm[(0, 0)]);
        Ok((self.theta(a, q, r), cq || cr))
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["A", "Q", "R"]
    }

    fn param_values(&self, theta: &Self::Theta) -> Vec<f64> {
        vec![theta.a, theta.q, theta.r]
    }
}

/// Kitagawa family; estimates (Q, R), the drift is fully known.
#[derive(Debug, Clone, Copy)]
pub struct KitagawaFamily {
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl KitagawaFamily {
    pub fn theta(&self, q: f64, r: f64) -> ThetaKitagawa {
        ThetaKitagawa {
            q,
            r,
            x0_mean: self.x0_mean,
            x0_var: self.x0_var,
        }
    }
}

impl ModelFamily for KitagawaFamily {
    type Theta = ThetaKitagawa;
    type Model = KitagawaModel;

    fn build(&self, theta: &Self::Theta) -> Result<KitagawaModel> {
        KitagawaModel::new(theta)
    }

    fn mstep(&self, samples: &[Trajectory], y: &[Observation]) -> Result<(Self::Theta, bool)> {
        let probe = self.build(&self.theta(1.0, 1.0))?;
        let (qm, rm) = mstep_gaussian(&probe, samples, y)?;
        let (q, cq) = clamp_var(qm[(0, 0)]);
        let (r, cr) = clamp_var(rm[(0, 0)]);
        Ok((self.theta(q, r), cq || cr))
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["Q", "R"]
    }

    fn param_values(&self, theta: &Self::Theta) -> Vec<f64> {
        vec![theta.q, theta.r]
    }
}

/// Lorenz-63 family; estimates the isotropic variances
/// (sigma_q^2, sigma_r^2) at a fixed model time step.
#[derive(Debug, Clone, Copy)]
pub struct LorenzFamily {
    pub dt: f64,
    pub x0_mean: [f64; 3],
    pub x0_var: f64,
}

impl LorenzFamily {
    pub fn theta(&self, sigma_q2: f64, sigma_r2: f64) -> ThetaLorenz {
        ThetaLorenz {
            sigma_q2,
            sigma_r2,
            dt: self.dt,
            x0_mean: self.x0_mean,
            x0_var: self.x0_var,
        }
    }
}

impl ModelFamily for LorenzFamily {
    type Theta = ThetaLorenz;
    type Model = LorenzModel;

    fn build(&self, theta: &Self::Theta) -> Result<LorenzModel> {
        LorenzModel::new(theta)
    }

    fn mstep(&self, samples: &[Trajectory], y: &[Observation]) -> Result<(Self::Theta, bool)> {
        let probe = self.build(&self.theta(1.0, 1.0))?;
        let (sq2, sr2) = mstep_lorenz(&probe, samples, y)?;
        let (sq2, cq) = clamp_var(sq2);
        let (sr2, cr) = clamp_var(sr2);
        Ok((self.theta(sq2, sr2), cq || cr))
    }

    fn param_names(&self) -> &'static [&'static str] {
        &["sigma_q2", "sigma_r2"]
    }

    fn param_values(&self, theta: &Self::Theta) -> Vec<f64> {
        vec![theta.sigma_q2, theta.sigma_r2]
    }
}

/// Configuration of one stochastic EM run.
#[derive(Debug, Clone)]
pub struct SemConfig<Th> {
    pub smoother: SmootherVariant,
    pub n_f: usize,
    pub n_s: usize,
    pub iters: usize,
    pub theta0: Th,
    /// Initial conditioning trajectory; all-zero states when `None`.
    pub conditioning0: Option<Trajectory>,
    pub seed: u64,
    /// Retain the E-step samples of the last this-many iterations in the
    /// run output (for reconstruction summaries).
    pub keep_samples_last: usize,
}

impl<Th> SemConfig<Th> {
    pub fn new(smoother: SmootherVariant, n_f: usize, n_s: usize, iters: usize, theta0: Th, seed: u64) -> Self {
        assert!(iters >= 1 && n_f >= 2 && n_s >= 1);
        Self {
            smoother,
            n_f,
            n_s,
            iters,
            theta0,
            conditioning0: None,
            seed,
            keep_samples_last: 0,
        }
    }
}

/// One row of a [`SemTrace`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemIterationRecord {
    pub iter: usize,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub wall_ms: f64,
    pub clamped: bool,
}

/// Per-iteration estimates and diagnostics of one run.
#[derive(Debug, Clone)]
pub struct SemTrace {
    pub param_names: Vec<String>,
    pub records: Vec<SemIterationRecord>,
}

impl SemTrace {
    /// CSV rendering with header `iter,<params...>,loglik,wall_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter");
        for name in &self.param_names {
            out.push(',');
            out.push_str(name);
        }
        out.push_str(",loglik,wall_ms\n");
        for rec in &self.records {
            out.push_str(&rec.iter.to_string());
            for v in &rec.theta {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&rec.loglik.to_string());
            out.push(',');
            out.push_str(&format!("{:.3}", rec.wall_ms));
            out.push('\n');
        }
        out
    }

    /// Estimates of one parameter across iterations.
    pub fn param_series(&self, name: &str) -> Vec<f64> {
        let idx = self
            .param_names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"));
        self.records.iter().map(|r| r.theta[idx]).collect()
    }

    pub fn final_params(&self) -> &[f64] {
        &self.records.last().expect("empty trace").theta
    }
}

/// Output of [`run_sem`]: the trace, the final parameter value, and the
/// retained sample pool (empty unless requested in the config).
#[derive(Debug, Clone)]
pub struct SemRun<Th> {
    pub trace: SemTrace,
    pub final_theta: Th,
    pub pooled_samples: Vec<Trajectory>,
}

/// Run the stochastic EM loop for a model family.
pub fn run_sem<F: ModelFamily>(
    family: &F,
    y: &[Observation],
    cfg: &SemConfig<F::Theta>,
) -> Result<SemRun<F::Theta>> {
    let t_max = y.len();
    let root = RngStream::seed_from_u64(cfg.seed);
    let mut theta = cfg.theta0.clone();
    let dim_x = family.build(&theta)?.dim_x();
    let mut conditioning = cfg
        .conditioning0
        .clone()
        .unwrap_or_else(|| Trajectory::zeros(t_max, dim_x));
    if conditioning.len() != t_max + 1 {
        return Err(Error::ConditioningLengthMismatch {
            expected: t_max + 1,
            got: conditioning.len(),
        });
    }

    let mut records = Vec::with_capacity(cfg.iters);
    let mut pooled = Vec::new();
    for r in 1..=cfg.iters {
        let started = Instant::now();
        let model = family.build(&theta)?;
        let step_rng = root.substream(r as u64);
        let out = smoother_step(
            &model,
            y,
            cfg.smoother,
            &conditioning,
            cfg.n_f,
            cfg.n_s,
            &step_rng,
        )
        .map_err(|e| Error::SemAborted {
            iter: r,
            source: Box::new(e),
        })?;
        let loglik = out.history.log_evidence();
        let (next_theta, clamped) = family.mstep(&out.samples, y)?;
        theta = next_theta;
        conditioning = out.next_conditioning;
        if cfg.iters - r < cfg.keep_samples_last {
            pooled.extend(out.samples.iter().cloned());
        }
        records.push(SemIterationRecord {
            iter: r,
            theta: family.param_values(&theta),
            loglik,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            clamped,
        });
    }
    Ok(SemRun {
        trace: SemTrace {
            param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
            records,
        },
        final_theta: theta,
        pooled_samples: pooled,
    })
}
