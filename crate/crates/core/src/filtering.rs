//! Particle filtering: bootstrap, conditional, and conditional with
//! ancestor sampling.
//!
//! One pass over `t = 1..=T` does, in order: systematic resampling of the
//! previous cloud, forecasting through the transition kernel, the replacing
//! step for the conditional variants (slot `N_f` is pinned to the
//! conditioning state), and likelihood weighting. Weights live in log
//! domain; resampling happens at every step, so weights are not inherited
//! across steps.

use crate::error::{Error, Result};
use crate::history::{Observation, ParticleHistory, Trajectory};
use crate::models::StateSpaceModel;
use crate::rng::RngStream;
use crate::weights::{categorical_draw_unchecked, normalize_log_weights, systematic_resample};

/// Which filter to run. The conditional variants carry the conditioning
/// trajectory `x*_{0:T}`; the full path including the initial state is
/// pinned into slot `N_f`, which is what makes the smoothing kernel leave
/// the exact joint smoothing distribution invariant at every time index.
#[derive(Debug, Clone, Copy)]
pub enum FilterVariant<'a> {
    /// Bootstrap particle filter.
    Pf,
    /// Conditional particle filter: slot `N_f` is replaced by the
    /// conditioning state and keeps its own ancestry.
    Cpf(&'a Trajectory),
    /// Conditional particle filter with ancestor sampling: the replaced
    /// slot's parent is redrawn from the posterior over parents.
    CpfAs(&'a Trajectory),
}

impl<'a> FilterVariant<'a> {
    fn conditioning(&self) -> Option<&'a Trajectory> {
        match self {
            FilterVariant::Pf => None,
            FilterVariant::Cpf(c) | FilterVariant::CpfAs(c) => Some(c),
        }
    }
}

/// Run one filter pass over `y_{1:T}` with `n_f` particles.
pub fn run_filter<M: StateSpaceModel>(
    model: &M,
    y: &[Observation],
    variant: FilterVariant,
    n_f: usize,
    rng: &mut RngStream,
) -> Result<ParticleHistory> {
    let t_max = y.len();
    assert!(n_f >= 2, "conditional kernels require at least 2 particles");
    assert!(t_max >= 1, "need at least one observation");
    let dx = model.dim_x();
    if let Some(cond) = variant.conditioning() {
        if cond.len() != t_max + 1 {
            return Err(Error::ConditioningLengthMismatch {
                expected: t_max + 1,
                got: cond.len(),
            });
        }
    }

    let mut h = ParticleHistory::with_shape(n_f, dx, t_max);

    // t = 0: draw from the initial distribution with uniform weights; for
    // the conditional variants the last slot holds the conditioning path's
    // initial state.
    let free_slots = if variant.conditioning().is_some() {
        n_f - 1
    } else {
        n_f
    };
    for i in 0..free_slots {
        model.sample_initial(rng, h.particle_mut(0, i));
    }
    if let Some(cond) = variant.conditioning() {
        h.particle_mut(0, n_f - 1).copy_from_slice(cond.state(0));
    }
    let w0 = 1.0 / n_f as f64;
    h.log_weights[0].fill(w0.ln());
    h.norm_weights[0].fill(w0);

    let mut logw = vec![0.0; n_f];
    let mut as_logw = vec![0.0; n_f];

    for t in 1..=t_max {
        // Resampling.
        let mut ancestors = systematic_resample(rng, &h.norm_weights[t - 1], n_f)?;

        // Forecasting; prev/cur blocks are disjoint rows of the history.
        let (before, after) = h.particles.split_at_mut(t);
        let prev = &before[t - 1];
        let cur = &mut after[0];
        for i in 0..n_f {
            let parent = &prev[ancestors[i] * dx..(ancestors[i] + 1) * dx];
            model.sample_transition(rng, t, parent, &mut cur[i * dx..(i + 1) * dx]);
        }

        // Replacing (conditional variants only).
        match variant {
            FilterVariant::Pf => {}
            FilterVariant::Cpf(cond) => {
                cur[(n_f - 1) * dx..].copy_from_slice(cond.state(t));
                ancestors[n_f - 1] = n_f - 1;
            }
            FilterVariant::CpfAs(cond) => {
                cur[(n_f - 1) * dx..].copy_from_slice(cond.state(t));
                // Parent of the conditioning slot drawn by Bayes' rule:
                // p(i) proportional to w_{t-1}^i p(x*_t | x_{t-1}^i).
                for i in 0..n_f {
                    as_logw[i] = h.norm_weights[t - 1][i].ln()
                        + model.log_transition_density(t, cond.state(t), &prev[i * dx..(i + 1) * dx]);
                }
                let (as_norm, _) = normalize_log_weights(&as_logw)
                    .map_err(|_| Error::AllWeightsDegenerate { step: t })?;
                ancestors[n_f - 1] = categorical_draw_unchecked(rng, &as_norm);
            }
        }
        if cur.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: t });
        }

        // Weighting: bootstrap proposal, so the weight is the observation
        // likelihood alone.
        for i in 0..n_f {
            logw[i] = model.log_observation_density(t, &y[t - 1], &cur[i * dx..(i + 1) * dx]);
        }
        let (norm, log_sum) =
            normalize_log_weights(&logw).map_err(|_| Error::AllWeightsDegenerate { step: t })?;
        h.log_weights[t].copy_from_slice(&logw);
        h.norm_weights[t].copy_from_slice(&norm);
        h.log_evidence_increments[t - 1] = log_sum - (n_f as f64).ln();
        h.ancestors[t - 1] = ancestors.clone();
    }

    debug_assert!(h.validate().is_ok());
    Ok(h)
}
