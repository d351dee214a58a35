//! Stochastic ensemble Kalman smoother with perturbed observations, and
//! the EM driver built on it.
//!
//! The forward pass is a stochastic EnKF; at each observation time the
//! whole stored window is updated with the cross-covariance between the
//! lagged states and the predicted observations, which yields smoothed
//! member trajectories over `0..=T`. No localization or inflation. The
//! analysis aborts when the predicted-observation ensemble is rank
//! deficient or the innovation covariance loses positive definiteness;
//! with few members this is a real failure mode, not a corner case.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimation::{ModelFamily, SemIterationRecord, SemTrace};
use crate::history::{Observation, Trajectory};
use crate::models::StateSpaceModel;
use crate::rng::RngStream;

const LN_2PI: f64 = 1.8378770664093453;

/// Smoothed ensemble and the innovation-based log-likelihood estimate
/// `sum_t log N(y_t; z_bar_t, S_t)` accumulated along the forward pass.
#[derive(Debug, Clone)]
pub struct EnksOutput {
    pub members: Vec<Trajectory>,
    pub loglik: f64,
}

/// Run the ensemble smoother over the full window.
pub fn enks<M: StateSpaceModel>(
    model: &M,
    y: &[Observation],
    n_members: usize,
    rng: &mut RngStream,
) -> Result<EnksOutput> {
    assert!(n_members >= 2, "EnKS needs at least two members");
    let t_max = y.len();
    let dx = model.dim_x();
    let dy = model.dim_y();
    let n = n_members;

    // ens[t] holds the current (progressively smoothed) member states at
    // time t, flat n x dx.
    let mut ens: Vec<Vec<f64>> = vec![vec![0.0; n * dx]; t_max + 1];
    for i in 0..n {
        model.sample_initial(rng, &mut ens[0][i * dx..(i + 1) * dx]);
    }

    let r_var = model.observation_noise_var();
    let r_mat = DMatrix::<f64>::identity(dy, dy) * r_var;
    let mut loglik = 0.0;

    let mut z = DMatrix::<f64>::zeros(dy, n);
    let mut zbuf = vec![0.0; dy];

    for t in 1..=t_max {
        // Forecast.
        let (before, after) = ens.split_at_mut(t);
        let prev = &before[t - 1];
        let cur = &mut after[0];
        for i in 0..n {
            model.sample_transition(rng, t, &prev[i * dx..(i + 1) * dx], &mut cur[i * dx..(i + 1) * dx]);
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: t });
        }

        // Predicted observations and their anomalies.
        for i in 0..n {
            model.observe_mean(&cur[i * dx..(i + 1) * dx], &mut zbuf);
            for (k, &v) in zbuf.iter().enumerate() {
                z[(k, i)] = v;
            }
        }
        let z_mean = z.column_mean();
        let mut z_anom = z.clone();
        for mut col in z_anom.column_iter_mut() {
            col -= &z_mean;
        }
        let c_zz = &z_anom * z_anom.transpose() / (n - 1) as f64;
        if !obs_spread_full_rank(&c_zz) {
            return Err(Error::SingularEnsembleCovariance { step: t });
        }
        let s = &c_zz + &r_mat;
        let chol = s
            .clone()
            .cholesky()
            .ok_or(Error::SingularEnsembleCovariance { step: t })?;

        // Innovation likelihood.
        let yv = DVector::from_column_slice(&y[t - 1]);
        let innov = &yv - &z_mean;
        let solved = chol.solve(&innov);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        loglik += -0.5 * (dy as f64 * LN_2PI + logdet + innov.dot(&solved));

        // Perturbed innovations, one column per member.
        let mut d = DMatrix::<f64>::zeros(dy, n);
        for i in 0..n {
            for k in 0..dy {
                d[(k, i)] = yv[k] + r_var.sqrt() * rng.standard_normal() - z[(k, i)];
            }
        }
        let d_solved = chol.solve(&d);

        // Update every stored time with its cross-covariance against the
        // predicted observations.
        for block in ens[0..=t].iter_mut() {
            let mut x = DMatrix::<f64>::zeros(dx, n);
            for i in 0..n {
                for k in 0..dx {
                    x[(k, i)] = block[i * dx + k];
                }
            }
            let x_mean = x.column_mean();
            let mut x_anom = x.clone();
            for mut col in x_anom.column_iter_mut() {
                col -= &x_mean;
            }
            let c_xz = &x_anom * z_anom.transpose() / (n - 1) as f64;
            let update = &c_xz * &d_solved;
            for i in 0..n {
                for k in 0..dx {
                    block[i * dx + k] += update[(k, i)];
                }
            }
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { step: t });
            }
        }
    }

    let members = (0..n)
        .map(|i| {
            Trajectory::new(
                (0..=t_max)
                    .map(|t| ens[t][i * dx..(i + 1) * dx].to_vec())
                    .collect(),
            )
        })
        .collect();
    Ok(EnksOutput { members, loglik })
}

/// The analysis needs the predicted-observation spread to carry full rank;
/// a collinear ensemble (fewer than `d_y + 1` effective members) cannot
/// define the update.
fn obs_spread_full_rank(c_zz: &DMatrix<f64>) -> bool {
    let eig = c_zz.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return false;
    }
    eig.eigenvalues.iter().all(|&v| v > 1e-12 * max)
}

/// EM with the ensemble smoother as E-step; the M-step is the same
/// closed-form residual-covariance update the particle drivers use,
/// applied to the member trajectories.
pub fn enks_em<F: ModelFamily>(
    family: &F,
    theta0: &F::Theta,
    y: &[Observation],
    n_members: usize,
    iters: usize,
    seed: u64,
) -> Result<(SemTrace, F::Theta)> {
    assert!(iters >= 1);
    let root = RngStream::seed_from_u64(seed);
    let mut theta = theta0.clone();
    let mut records = Vec::with_capacity(iters);
    for r in 1..=iters {
        let started = std::time::Instant::now();
        let model = family.build(&theta)?;
        let mut rng = root.substream(r as u64);
        let out = enks(&model, y, n_members, &mut rng).map_err(|e| Error::SemAborted {
            iter: r,
            source: Box::new(e),
        })?;
        let (next, clamped) = family.mstep(&out.members, y)?;
        theta = next;
        records.push(SemIterationRecord {
            iter: r,
            theta: family.param_values(&theta),
            loglik: out.loglik,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
            clamped,
        });
    }
    let trace = SemTrace {
        param_names: family.param_names().iter().map(|s| s.to_string()).collect(),
        records,
    };
    Ok((trace, theta))
}
