//! Exact and ensemble baselines used as oracles and comparison methods.

mod enks;
mod kalman;

pub use enks::{enks, enks_em, EnksOutput};
pub use kalman::{joint_smoothing_sample, kalman_filter, ks_em, rts_smoother, GaussianBelief};
