//! Numerically stable importance-weight utilities.
//!
//! Weights are carried in log domain throughout the filters; this module is
//! the single place where they are exponentiated, normalized and sampled
//! from. Likelihood evaluations routinely reach `exp(-500)` territory (e.g.
//! a quadratic observation operator with large noise variance), so the
//! max-shift in [`normalize_log_weights`] is load-bearing, not cosmetic.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tolerance on `sum(weights) - 1` accepted by the samplers.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Normalize a vector of unnormalized log weights.
///
/// Returns the normalized weights and `log(sum_i exp(logw[i]))`, computed
/// with a max-shift so that any finite input is handled without overflow.
/// NaN entries are treated as `-inf` (zero weight).
pub fn normalize_log_weights(logw: &[f64]) -> Result<(Vec<f64>, f64)> {
    if logw.is_empty() {
        return Err(Error::EmptyInput {
            reason: "log weight vector".into(),
        });
    }
    let max = logw
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsDegenerate { step: 0 });
    }
    let mut norm = Vec::with_capacity(logw.len());
    let mut sum = 0.0;
    for &lw in logw {
        let w = if lw.is_nan() { 0.0 } else { (lw - max).exp() };
        norm.push(w);
        sum += w;
    }
    let log_sum = max + sum.ln();
    let inv = 1.0 / sum;
    for w in &mut norm {
        *w *= inv;
    }
    Ok((norm, log_sum))
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::EmptyInput {
            reason: "weight vector".into(),
        });
    }
    let mut sum = 0.0;
    for &w in weights {
        if !(w >= 0.0) {
            return Err(Error::InvalidWeights {
                reason: format!("negative or NaN weight {w}"),
            });
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights {
            reason: format!("weights sum to {sum}, expected 1"),
        });
    }
    Ok(())
}

/// Draw one index from a normalized weight vector (multinomial draw).
pub fn categorical_draw(rng: &mut RngStream, weights: &[f64]) -> Result<usize> {
    check_weights(weights)?;
    Ok(categorical_draw_unchecked(rng, weights))
}

/// Categorical draw without re-validating the weights; used in inner loops
/// where the weights come straight out of [`normalize_log_weights`].
pub(crate) fn categorical_draw_unchecked(rng: &mut RngStream, weights: &[f64]) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave acc marginally below 1; fall back to the last
    // positively-weighted index.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1)
}

/// Multinomial resampling: `n` independent categorical draws.
pub fn multinomial_resample(rng: &mut RngStream, weights: &[f64], n: usize) -> Result<Vec<usize>> {
    check_weights(weights)?;
    Ok((0..n)
        .map(|_| categorical_draw_unchecked(rng, weights))
        .collect())
}

/// Systematic resampling: stratified positions `(u + j)/n` with a single
/// uniform offset `u`. The copy count of index `i` is always `floor(n*w_i)`
/// or `ceil(n*w_i)`, which keeps the resampled cloud unbiased with much
/// lower variance than multinomial draws.
pub fn systematic_resample(rng: &mut RngStream, weights: &[f64], n: usize) -> Result<Vec<usize>> {
    check_weights(weights)?;
    let offset = rng.uniform();
    Ok(systematic_resample_with_offset(weights, n, offset))
}

/// Deterministic core of [`systematic_resample`], exposed so tests can
/// enumerate over the offset.
pub fn systematic_resample_with_offset(weights: &[f64], n: usize, offset: f64) -> Vec<usize> {
    debug_assert!((0.0..1.0).contains(&offset));
    let mut indices = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut i = 0;
    for j in 0..n {
        let u = (offset + j as f64) / n as f64;
        while u >= acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        indices.push(i);
    }
    indices
}
