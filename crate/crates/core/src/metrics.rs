//! Reconstruction scoring: pointwise means, empirical 95% bands, RMSE and
//! coverage probability of a smoothing-sample set against the truth.

use crate::error::{Error, Result};
use crate::history::Trajectory;

/// Empirical quantiles with linear interpolation between order statistics.
pub fn quantile_summary(values: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput {
            reason: "quantile of empty vector".into(),
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(probs
        .iter()
        .map(|&p| {
            let h = (n as f64 - 1.0) * p.clamp(0.0, 1.0);
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        })
        .collect())
}

/// Per-time, per-component summary of a set of smoothing samples, plus the
/// scalar scores against the truth. Scores run over `t = 1..=T` (the
/// observed window); rows are stored for every `t` including 0.
#[derive(Debug, Clone)]
pub struct ReconstructionSummary {
    pub t_len: usize,
    pub dim: usize,
    /// `mean[t][c]`, likewise `lo`/`hi` (2.5% / 97.5% quantiles).
    pub mean: Vec<Vec<f64>>,
    pub lo: Vec<Vec<f64>>,
    pub hi: Vec<Vec<f64>>,
    pub truth: Vec<Vec<f64>>,
    /// Root mean squared error of the sample mean, per component.
    pub rmse: Vec<f64>,
    /// Fraction of times the truth falls inside the band, per component.
    pub cp: Vec<f64>,
}

impl ReconstructionSummary {
    /// CSV rows `t,component,mean,lo,hi,truth` (components are 1-based).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,component,mean,lo,hi,truth\n");
        for t in 0..self.t_len {
            for c in 0..self.dim {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t,
                    c + 1,
                    self.mean[t][c],
                    self.lo[t][c],
                    self.hi[t][c],
                    self.truth[t][c]
                ));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for t in 0..self.t_len {
            for c in 0..self.dim {
                if !(self.lo[t][c] <= self.mean[t][c] && self.mean[t][c] <= self.hi[t][c]) {
                    return Err(Error::InvalidHistory {
                        reason: format!("band ordering violated at t={t}, component {c}"),
                    });
                }
            }
        }
        if self.cp.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::InvalidHistory {
                reason: "coverage outside [0,1]".into(),
            });
        }
        Ok(())
    }
}

/// Summarize smoothing samples against a truth trajectory.
pub fn summarize_reconstruction(
    samples: &[Trajectory],
    truth: &Trajectory,
) -> Result<ReconstructionSummary> {
    if samples.len() < 2 {
        return Err(Error::EmptyInput {
            reason: "need at least two samples".into(),
        });
    }
    let t_len = truth.len();
    let dim = truth.state(0).len();
    for s in samples {
        if s.len() != t_len {
            return Err(Error::LengthMismatch {
                reason: format!("sample length {} vs truth {}", s.len(), t_len),
            });
        }
    }

    let mut mean = vec![vec![0.0; dim]; t_len];
    let mut lo = vec![vec![0.0; dim]; t_len];
    let mut hi = vec![vec![0.0; dim]; t_len];
    let mut vals = vec![0.0; samples.len()];
    for t in 0..t_len {
        for c in 0..dim {
            for (k, s) in samples.iter().enumerate() {
                vals[k] = s.state(t)[c];
            }
            mean[t][c] = vals.iter().sum::<f64>() / vals.len() as f64;
            let q = quantile_summary(&vals, &[0.025, 0.975])?;
            lo[t][c] = q[0];
            hi[t][c] = q[1];
        }
    }

    let mut rmse = vec![0.0; dim];
    let mut cp = vec![0.0; dim];
    let scored = t_len - 1;
    for c in 0..dim {
        let mut acc = 0.0;
        let mut covered = 0usize;
        for t in 1..t_len {
            let tr = truth.state(t)[c];
            acc += (mean[t][c] - tr) * (mean[t][c] - tr);
            if (lo[t][c]..=hi[t][c]).contains(&tr) {
                covered += 1;
            }
        }
        rmse[c] = (acc / scored as f64).sqrt();
        cp[c] = covered as f64 / scored as f64;
    }

    Ok(ReconstructionSummary {
        t_len,
        dim,
        mean,
        lo,
        hi,
        truth: truth.states.clone(),
        rmse,
        cp,
    })
}
