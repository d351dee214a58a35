//! Monte Carlo auxiliary function and its closed-form maximizers.
//!
//! For the additive-Gaussian family the maximizers of the sample-averaged
//! complete-data log likelihood are residual covariances averaged over all
//! time steps and trajectories; the linear model additionally has a
//! quadratic maximizer in the autoregressive coefficient, computed before
//! the variances, and the Lorenz model constrains the covariances to
//! isotropic form, which turns into trace averages.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::history::{Observation, Trajectory};
use crate::models::{StateSpaceModel, MAX_DIM};

fn check_samples(samples: &[Trajectory], t_max: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            reason: "no smoothing samples".into(),
        });
    }
    for s in samples {
        if s.len() != t_max + 1 {
            return Err(Error::LengthMismatch {
                reason: format!("sample has {} states, expected {}", s.len(), t_max + 1),
            });
        }
    }
    Ok(())
}

/// Monte Carlo estimate of the EM auxiliary function: the complete-data
/// log likelihood averaged over the smoothing samples.
pub fn auxiliary_q<M: StateSpaceModel>(
    model: &M,
    samples: &[Trajectory],
    y: &[Observation],
) -> Result<f64> {
    let t_max = y.len();
    check_samples(samples, t_max)?;
    let mut total = 0.0;
    for s in samples {
        let mut acc = model.log_initial_density(s.state(0));
        for t in 1..=t_max {
            acc += model.log_transition_density(t, s.state(t), s.state(t - 1));
            acc += model.log_observation_density(t, &y[t - 1], s.state(t));
        }
        if !acc.is_finite() {
            return Err(Error::NonFiniteLogDensity);
        }
        total += acc;
    }
    Ok(total / samples.len() as f64)
}

/// Closed-form covariance maximizers: mean outer products of the state and
/// observation residuals over all `(t, sample)` pairs. Both matrices are
/// symmetric PSD by construction.
pub fn mstep_gaussian<M: StateSpaceModel>(
    model: &M,
    samples: &[Trajectory],
    y: &[Observation],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let t_max = y.len();
    check_samples(samples, t_max)?;
    let dx = model.dim_x();
    let dy = model.dim_y();
    let mut q_acc = DMatrix::<f64>::zeros(dx, dx);
    let mut r_acc = DMatrix::<f64>::zeros(dy, dy);
    let mut mean = [0.0; MAX_DIM];
    let mut resid = [0.0; MAX_DIM];
    for s in samples {
        for t in 1..=t_max {
            model.transition_mean(t, s.state(t - 1), &mut mean[..dx]);
            for k in 0..dx {
                resid[k] = s.state(t)[k] - mean[k];
            }
            for a in 0..dx {
                for b in 0..dx {
                    q_acc[(a, b)] += resid[a] * resid[b];
                }
            }
            model.observe_mean(s.state(t), &mut mean[..dy]);
            for k in 0..dy {
                resid[k] = y[t - 1][k] - mean[k];
            }
            for a in 0..dy {
                for b in 0..dy {
                    r_acc[(a, b)] += resid[a] * resid[b];
                }
            }
        }
    }
    let scale = 1.0 / (t_max * samples.len()) as f64;
    Ok((q_acc * scale, r_acc * scale))
}

/// Maximizer of the auxiliary function in the autoregressive coefficient:
/// the ratio of lagged cross-moments over the samples.
pub fn mstep_linear_a(samples: &[Trajectory]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput {
            reason: "no smoothing samples".into(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in samples {
        for t in 1..s.len() {
            num += s.state(t)[0] * s.state(t - 1)[0];
            den += s.state(t - 1)[0] * s.state(t - 1)[0];
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateRegressor);
    }
    Ok(num / den)
}

/// Isotropic-constrained variance maximizers for the three-dimensional
/// state / two-dimensional observation model: trace averages of the full
/// covariance maximizers.
pub fn mstep_lorenz<M: StateSpaceModel>(
    model: &M,
    samples: &[Trajectory],
    y: &[Observation],
) -> Result<(f64, f64)> {
    let (q_hat, r_hat) = mstep_gaussian(model, samples, y)?;
    Ok((q_hat.trace() / 3.0, r_hat.trace() / 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{KitagawaModel, LinearModel, LorenzModel, ThetaKitagawa, ThetaLinear, ThetaLorenz};

    fn linear(a: f64, q: f64, r: f64) -> LinearModel {
        LinearModel::new(&ThetaLinear {
            a,
            q,
            r,
            x0_mean: 0.0,
            x0_var: 1.0,
        })
        .unwrap()
    }

    fn traj(vals: &[f64]) -> Trajectory {
        Trajectory::new(vals.iter().map(|&v| vec![v]).collect())
    }

    #[test]
    fn auxiliary_q_three_standard_normals() {
        // One sample, T = 1, everything at zero: three standard-normal log
        // densities at their mode.
        let model = linear(0.9, 1.0, 1.0);
        let q = auxiliary_q(&model, &[traj(&[0.0, 0.0])], &[vec![0.0]]).unwrap();
        let expect = 3.0 * (-0.5 * (2.0 * std::f64::consts::PI).ln());
        assert!((q - expect).abs() < 1e-14);
    }

    #[test]
    fn auxiliary_q_duplicate_invariance() {
        let model = linear(0.9, 1.0, 1.0);
        let s = traj(&[0.3, -0.2, 1.1]);
        let y = vec![vec![0.5], vec![-0.1]];
        let single = auxiliary_q(&model, &[s.clone()], &y).unwrap();
        let doubled = auxiliary_q(&model, &[s.clone(), s], &y).unwrap();
        assert!((single - doubled).abs() < 1e-14);
    }

    #[test]
    fn mstep_gaussian_hand_average() {
        // Residuals (1, -1) in state, (2, 0) in observation with m = x and
        // h = x: Q = 1, R = 2.
        let model = linear(1.0, 1.0, 1.0);
        let s = traj(&[0.0, 1.0, 0.0]);
        let y = vec![vec![3.0], vec![0.0]];
        let (q, r) = mstep_gaussian(&model, &[s], &y).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r[(0, 0)] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mstep_gaussian_zero_on_exact_trajectory() {
        let theta = ThetaKitagawa {
            q: 1.0,
            r: 10.0,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let model = KitagawaModel::new(&theta).unwrap();
        // Build a noise-free trajectory under the deterministic dynamics
        // and noise-free observations of it.
        let mut states = vec![vec![0.4]];
        let mut y = Vec::new();
        for t in 1..=10 {
            let mut m = [0.0];
            model.transition_mean(t, &states[t - 1], &mut m);
            states.push(vec![m[0]]);
            let mut h = [0.0];
            model.observe_mean(&states[t], &mut h);
            y.push(vec![h[0]]);
        }
        let (q, r) = mstep_gaussian(&model, &[Trajectory::new(states)], &y).unwrap();
        assert!(q[(0, 0)].abs() < 1e-20);
        assert!(r[(0, 0)].abs() < 1e-20);
    }

    #[test]
    fn mstep_q_is_argmax() {
        // Perturbing the closed-form Q by +-10% must decrease the
        // auxiliary function evaluated on the same samples.
        let samples = vec![traj(&[0.1, 0.9, 0.2, -0.7]), traj(&[-0.4, 0.66, 1.4, 0.0])];
        let y = vec![vec![0.4], vec![0.2], vec![-0.5]];
        let a = mstep_linear_a(&samples).unwrap();
        let probe = linear(a, 1.0, 1.0);
        let (qm, rm) = mstep_gaussian(&probe, &samples, &y).unwrap();
        let (q_hat, r_hat) = (qm[(0, 0)], rm[(0, 0)]);
        let value = |qv: f64, rv: f64| {
            auxiliary_q(&linear(a, qv, rv), &samples, &y).unwrap()
        };
        let best = value(q_hat, r_hat);
        assert!(value(q_hat * 1.1, r_hat) < best);
        assert!(value(q_hat * 0.9, r_hat) < best);
        assert!(value(q_hat, r_hat * 1.1) < best);
        assert!(value(q_hat, r_hat * 0.9) < best);
        // And the A maximizer beats nearby coefficients.
        let with_a = |av: f64| {
            let m = linear(av, q_hat, r_hat);
            auxiliary_q(&m, &samples, &y).unwrap()
        };
        assert!(with_a(a + 0.05) < with_a(a));
        assert!(with_a(a - 0.05) < with_a(a));
    }

    #[test]
    fn mstep_a_noiseless_regression() {
        let s = traj(&[8.0, 4.0, 2.0, 1.0, 0.5]);
        assert!((mstep_linear_a(&[s]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mstep_a_scale_invariant_and_ls_oracle() {
        let mut rng = crate::rng::RngStream::seed_from_u64(40);
        let vals: Vec<f64> = (0..30).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        let s = traj(&vals);
        let a = mstep_linear_a(std::slice::from_ref(&s)).unwrap();

        let scaled = traj(&vals.iter().map(|v| v * -3.7).collect::<Vec<_>>());
        let a_scaled = mstep_linear_a(&[scaled]).unwrap();
        assert!((a - a_scaled).abs() < 1e-12);

        // Normal-equations oracle on the stacked (x_{t-1}, x_t) pairs.
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for t in 1..vals.len() {
            sxy += vals[t] * vals[t - 1];
            sxx += vals[t - 1] * vals[t - 1];
        }
        assert!((a - sxy / sxx).abs() < 1e-12);
    }

    #[test]
    fn mstep_a_degenerate_regressor() {
        let s = traj(&[0.0, 0.0, 0.0]);
        assert!(matches!(
            mstep_linear_a(&[s]),
            Err(Error::DegenerateRegressor)
        ));
    }

    #[test]
    fn lorenz_trace_update() {
        let theta = ThetaLorenz {
            sigma_q2: 1.0,
            sigma_r2: 2.0,
            dt: 0.15,
            x0_mean: [0.0; 3],
            x0_var: 0.1,
        };
        let model = LorenzModel::new(&theta).unwrap();
        // Identity Q-hat: residuals (1,0,0), (0,1,0), (0,0,1) spread over
        // three samples at a single step, against diag(1,2,3)/identity-like
        // hand cases is cumbersome; instead check the trace identity on the
        // matrix route directly.
        let q = DMatrix::<f64>::identity(3, 3);
        assert!((q.trace() / 3.0 - 1.0).abs() < 1e-15);
        let q2 = DMatrix::<f64>::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 3.0]));
        assert!((q2.trace() / 3.0 - 2.0).abs() < 1e-15);

        // Golden-section oracle: the isotropic variance maximizing the
        // auxiliary function matches the trace average to 1e-6.
        let mut rng = crate::rng::RngStream::seed_from_u64(77);
        let (truth, y) = crate::models::simulate(&model, &mut rng, 12).unwrap();
        let mut other = truth.clone();
        for s in other.states.iter_mut() {
            for v in s.iter_mut() {
                *v += 0.3 * rng.standard_normal();
            }
        }
        let samples = vec![truth, other];
        let (sq2, sr2) = mstep_lorenz(&model, &samples, &y).unwrap();
        let value = |s2: f64| {
            let m = LorenzModel::new(&ThetaLorenz {
                sigma_q2: s2,
                sigma_r2: sr2,
                ..theta
            })
            .unwrap();
            auxiliary_q(&m, &samples, &y).unwrap()
        };
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (1e-4, 10.0);
        while hi - lo > 1e-9 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if value(m1) < value(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        let golden = 0.5 * (lo + hi);
        assert!(
            (golden - sq2).abs() < 1e-6,
            "golden {golden} vs trace {sq2}"
        );
    }
}
