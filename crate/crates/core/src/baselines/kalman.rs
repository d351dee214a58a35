//! Exact machinery for the univariate linear Gaussian model: Kalman
//! filter, RTS smoother, joint smoothing sampler and KS-EM. These are the
//! oracles the particle methods are tested against.

use crate::error::{Error, Result};
use crate::history::{Observation, Trajectory};
use crate::models::ThetaLinear;
use crate::rng::RngStream;

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian belief over the scalar state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub var: f64,
}

fn scalar_obs(y: &[Observation]) -> Result<Vec<f64>> {
    y.iter()
        .map(|row| {
            if row.len() == 1 {
                Ok(row[0])
            } else {
                Err(Error::LengthMismatch {
                    reason: "linear baseline expects scalar observations".into(),
                })
            }
        })
        .collect()
}

struct KalmanPass {
    /// Filtered beliefs, index 0 is the initial prior.
    filtered: Vec<GaussianBelief>,
    /// One-step-ahead predicted beliefs for t = 1..=T.
    predicted: Vec<GaussianBelief>,
    /// Final-step Kalman gain (needed by the lag-one recursion).
    last_gain: f64,
    loglik: f64,
}

fn kalman_pass(theta: &ThetaLinear, y: &[f64]) -> Result<KalmanPass> {
    theta.validate()?;
    let mut filtered = Vec::with_capacity(y.len() + 1);
    let mut predicted = Vec::with_capacity(y.len());
    filtered.push(GaussianBelief {
        mean: theta.x0_mean,
        var: theta.x0_var,
    });
    let mut loglik = 0.0;
    let mut gain = 0.0;
    for (t, &obs) in y.iter().enumerate() {
        let prev = filtered[t];
        let m_pred = theta.a * prev.mean;
        let p_pred = theta.a * theta.a * prev.var + theta.q;
        let s = p_pred + theta.r;
        if !(s > 0.0) {
            return Err(Error::SingularInnovation { step: t + 1 });
        }
        let innov = obs - m_pred;
        loglik += -0.5 * (LN_2PI + s.ln() + innov * innov / s);
        gain = p_pred / s;
        predicted.push(GaussianBelief {
            mean: m_pred,
            var: p_pred,
        });
        filtered.push(GaussianBelief {
            mean: m_pred + gain * innov,
            var: (1.0 - gain) * p_pred,
        });
    }
    Ok(KalmanPass {
        filtered,
        predicted,
        last_gain: gain,
        loglik,
    })
}

/// Kalman filter: filtered beliefs for `t = 0..=T` (index 0 is the prior)
/// and the exact log likelihood of `y_{1:T}`.
pub fn kalman_filter(theta: &ThetaLinear, y: &[Observation]) -> Result<(Vec<GaussianBelief>, f64)> {
    let obs = scalar_obs(y)?;
    let pass = kalman_pass(theta, &obs)?;
    Ok((pass.filtered, pass.loglik))
}

struct RtsPass {
    smoothed: Vec<GaussianBelief>,
    /// Smoother gains J_t = P_t^f A / P_{t+1}^pred for t = 0..T-1.
    gains: Vec<f64>,
    forward: KalmanPass,
}

fn rts_pass(theta: &ThetaLinear, y: &[f64]) -> Result<RtsPass> {
    let forward = kalman_pass(theta, y)?;
    let t_max = y.len();
    let mut smoothed = forward.filtered.clone();
    let mut gains = vec![0.0; t_max];
    for t in (0..t_max).rev() {
        let f = forward.filtered[t];
        let pred = forward.predicted[t];
        let j = theta.a * f.var / pred.var;
        gains[t] = j;
        smoothed[t] = GaussianBelief {
            mean: f.mean + j * (smoothed[t + 1].mean - pred.mean),
            var: f.var + j * j * (smoothed[t + 1].var - pred.var),
        };
    }
    Ok(RtsPass {
        smoothed,
        gains,
        forward,
    })
}

/// RTS smoother: smoothing beliefs for `t = 0..=T`.
pub fn rts_smoother(theta: &ThetaLinear, y: &[Observation]) -> Result<Vec<GaussianBelief>> {
    let obs = scalar_obs(y)?;
    Ok(rts_pass(theta, &obs)?.smoothed)
}

/// Draw one exact sample of `x_{0:T} | y_{1:T}`: the terminal filtered
/// state first, then backward through the exact conditional
/// `x_t | x_{t+1}, y_{1:t}`.
pub fn joint_smoothing_sample(
    theta: &ThetaLinear,
    y: &[Observation],
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let obs = scalar_obs(y)?;
    let pass = kalman_pass(theta, &obs)?;
    let t_max = obs.len();
    let mut states = vec![0.0; t_max + 1];
    let last = pass.filtered[t_max];
    states[t_max] = last.mean + last.var.sqrt() * rng.standard_normal();
    for t in (0..t_max).rev() {
        let f = pass.filtered[t];
        let p_pred = theta.a * theta.a * f.var + theta.q;
        let j = theta.a * f.var / p_pred;
        let mean = f.mean + j * (states[t + 1] - theta.a * f.mean);
        let var = (f.var - j * j * p_pred).max(0.0);
        states[t] = mean + var.sqrt() * rng.standard_normal();
    }
    Ok(Trajectory::new(states.into_iter().map(|x| vec![x]).collect()))
}

/// Exact EM for the linear model (Shumway-Stoffer E-step with lag-one
/// covariances, closed-form M-step for A, Q, R). The initial distribution
/// is held fixed. Returns the estimate after `iters` iterations and the
/// log-likelihood evaluated at the start of each iteration.
pub fn ks_em(
    theta0: &ThetaLinear,
    y: &[Observation],
    iters: usize,
) -> Result<(ThetaLinear, Vec<f64>)> {
    assert!(iters >= 1);
    let obs = scalar_obs(y)?;
    let t_max = obs.len();
    let mut theta = *theta0;
    let mut trace = Vec::with_capacity(iters);

    for _ in 0..iters {
        let rts = rts_pass(&theta, &obs)?;
        trace.push(rts.forward.loglik);

        // Lag-one smoothed covariances Cov(x_t, x_{t-1} | y_{1:T}).
        let mut lag = vec![0.0; t_max + 1];
        lag[t_max] =
            (1.0 - rts.forward.last_gain) * theta.a * rts.forward.filtered[t_max - 1].var;
        for t in (1..t_max).rev() {
            let f_t = rts.forward.filtered[t];
            lag[t] = f_t.var * rts.gains[t - 1]
                + rts.gains[t] * (lag[t + 1] - theta.a * f_t.var) * rts.gains[t - 1];
        }

        let (mut s11, mut s10, mut s00, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for t in 1..=t_max {
            let st = rts.smoothed[t];
            let sp = rts.smoothed[t - 1];
            s11 += st.var + st.mean * st.mean;
            s10 += lag[t] + st.mean * sp.mean;
            s00 += sp.var + sp.mean * sp.mean;
            syy += (obs[t - 1] - st.mean).powi(2) + st.var;
        }
        let a = s10 / s00;
        let q = ((s11 - 2.0 * a * s10 + a * a * s00) / t_max as f64).max(1e-12);
        let r = (syy / t_max as f64).max(1e-12);
        theta = ThetaLinear {
            a,
            q,
            r,
            x0_mean: theta.x0_mean,
            x0_var: theta.x0_var,
        };
    }
    Ok((theta, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, LinearModel};

    fn obs_from(vals: &[f64]) -> Vec<Observation> {
        vals.iter().map(|&v| vec![v]).collect()
    }

    fn dataset(t_max: usize, seed: u64) -> (ThetaLinear, Vec<Observation>) {
        let theta = ThetaLinear {
            a: 0.9,
            q: 1.0,
            r: 1.0,
            x0_mean: 0.0,
            x0_var: 1.0 / 0.19,
        };
        let model = LinearModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(seed);
        let (_, obs) = simulate(&model, &mut rng, t_max).unwrap();
        (theta, obs)
    }

    #[test]
    fn filter_hand_computed_single_step() {
        // x0 ~ delta(0), A=0.9, Q=R=1, y1=1: predicted N(0,1), filtered
        // mean 0.5, var 0.5, loglik log N(1; 0, 2).
        let theta = ThetaLinear {
            a: 0.9,
            q: 1.0,
            r: 1.0,
            x0_mean: 0.0,
            x0_var: 0.0,
        };
        let (beliefs, loglik) = kalman_filter(&theta, &obs_from(&[1.0])).unwrap();
        assert!((beliefs[1].mean - 0.5).abs() < 1e-14);
        assert!((beliefs[1].var - 0.5).abs() < 1e-14);
        let expect = -0.5 * (LN_2PI + 2f64.ln() + 0.5);
        assert!((loglik - expect).abs() < 1e-14);
    }

    #[test]
    fn uninformative_observations_keep_prior() {
        // R huge: filtering barely moves the prior dynamics; variance
        // settles near the stationary value Q/(1-A^2) with A=0.
        let theta = ThetaLinear {
            a: 0.0,
            q: 1.0,
            r: 1e12,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let (beliefs, _) = kalman_filter(&theta, &obs_from(&[5.0, -3.0, 8.0])).unwrap();
        for b in &beliefs[1..] {
            assert!(b.mean.abs() < 1e-10);
            assert!((b.var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn loglik_matches_joint_gaussian_brute_force() {
        // Direct evaluation of log N(y_{1:5}; mu, Sigma) from the full
        // covariance of the stacked observation vector.
        use nalgebra::{DMatrix, DVector};
        let (theta, obs) = dataset(5, 17);
        let (_, loglik) = kalman_filter(&theta, &obs).unwrap();

        let t_max = 5;
        // Cov(x_s, x_t) = A^{|s-t|} Var(x_min); Var recursion from x0.
        let mut var_x = vec![theta.x0_var];
        for t in 1..=t_max {
            var_x.push(theta.a * theta.a * var_x[t - 1] + theta.q);
        }
        let mut sigma = DMatrix::zeros(t_max, t_max);
        for s in 1..=t_max {
            for t in 1..=t_max {
                let (lo, hi) = (s.min(t), s.max(t));
                let cov = theta.a.powi((hi - lo) as i32) * var_x[lo];
                sigma[(s - 1, t - 1)] = cov + if s == t { theta.r } else { 0.0 };
            }
        }
        let mu = DVector::from_iterator(
            t_max,
            (1..=t_max).map(|t| theta.a.powi(t as i32) * theta.x0_mean),
        );
        let yv = DVector::from_iterator(t_max, obs.iter().map(|row| row[0]));
        let chol = sigma.clone().cholesky().unwrap();
        let diff = yv - mu;
        let solved = chol.solve(&diff);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let brute =
            -0.5 * (t_max as f64 * LN_2PI + logdet + diff.dot(&solved));
        assert!(
            (loglik - brute).abs() < 1e-9,
            "kalman {loglik} vs brute force {brute}"
        );
    }

    #[test]
    fn smoother_terminal_matches_filter_and_shrinks_variance() {
        let (theta, obs) = dataset(40, 3);
        let (filtered, _) = kalman_filter(&theta, &obs).unwrap();
        let smoothed = rts_smoother(&theta, &obs).unwrap();
        assert_eq!(smoothed[40], filtered[40]);
        for t in 0..=40 {
            assert!(smoothed[t].var <= filtered[t].var + 1e-12);
        }
    }

    #[test]
    fn sampler_moments_match_smoother() {
        let (theta, obs) = dataset(20, 5);
        let smoothed = rts_smoother(&theta, &obs).unwrap();
        let n = 100_000;
        let mut rng = RngStream::seed_from_u64(7);
        let mut sums = vec![0.0; 21];
        let mut sq = vec![0.0; 21];
        for _ in 0..n {
            let traj = joint_smoothing_sample(&theta, &obs, &mut rng).unwrap();
            for t in 0..=20 {
                let v = traj.state(t)[0];
                sums[t] += v;
                sq[t] += v * v;
            }
        }
        for t in 0..=20 {
            let mean = sums[t] / n as f64;
            let var = sq[t] / n as f64 - mean * mean;
            let se_mean = (smoothed[t].var / n as f64).sqrt();
            let se_var = smoothed[t].var * (2.0 / n as f64).sqrt();
            assert!(
                (mean - smoothed[t].mean).abs() < 3.0 * se_mean,
                "mean at t={t}"
            );
            assert!((var - smoothed[t].var).abs() < 3.0 * se_var, "var at t={t}");
        }
    }

    #[test]
    fn ks_em_monotone_and_stationary_at_optimum() {
        let (theta_star, obs) = dataset(100, 11);
        let theta0 = ThetaLinear {
            a: 0.5,
            q: 0.5,
            r: 2.0,
            ..theta_star
        };
        let (theta_hat, trace) = ks_em(&theta0, &obs, 2000).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "loglik decreased: {} -> {}", w[0], w[1]);
        }
        // Restarting at the fixed point moves each parameter < 1e-6.
        let (theta_next, _) = ks_em(&theta_hat, &obs, 1).unwrap();
        assert!((theta_next.a - theta_hat.a).abs() < 1e-6);
        assert!((theta_next.q - theta_hat.q).abs() < 1e-6);
        assert!((theta_next.r - theta_hat.r).abs() < 1e-6);
    }

    #[test]
    fn ks_em_with_a_pinned_to_zero_still_monotone() {
        // Pure-noise model: only (Q, R) identifiable through their sum, EM
        // must still increase the likelihood.
        let theta = ThetaLinear {
            a: 0.0,
            q: 1.0,
            r: 1.0,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let model = LinearModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(23);
        let (_, obs) = simulate(&model, &mut rng, 200).unwrap();
        let theta0 = ThetaLinear {
            a: 0.0,
            q: 3.0,
            r: 0.3,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let (_, trace) = ks_em(&theta0, &obs, 200).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }
}
