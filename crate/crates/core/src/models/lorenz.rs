//! Lorenz-63 model with only the first and third components observed.
//!
//! The flow map integrates `dx/dtau = g(x)` with the classic parameters
//! (sigma 10, rho 28, beta 8/3) over a window of length `dt`, using the
//! fifth-order Dormand-Prince stages in fixed-step mode. The inner step is
//! capped at 0.01 time units so the integration error stays orders of
//! magnitude below the model noise for every `dt` used in the experiments.

use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{Error, Result};

#[inline]
fn drift(x: [f64; 3]) -> [f64; 3] {
    [
        10.0 * (x[1] - x[0]),
        x[0] * (28.0 - x[2]) - x[1],
        x[0] * x[1] - (8.0 / 3.0) * x[2],
    ]
}

#[inline]
fn axpy(x: [f64; 3], h: f64, coeffs: &[(f64, [f64; 3])]) -> [f64; 3] {
    let mut out = x;
    for &(c, k) in coeffs {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
        out[2] += h * c * k[2];
    }
    out
}

/// One fixed step of length `h` with the order-5 Dormand-Prince stages.
fn dp5_step(x: [f64; 3], h: f64) -> [f64; 3] {
    let k1 = drift(x);
    let k2 = drift(axpy(x, h, &[(1.0 / 5.0, k1)]));
    let k3 = drift(axpy(x, h, &[(3.0 / 40.0, k1), (9.0 / 40.0, k2)]));
    let k4 = drift(axpy(
        x,
        h,
        &[(44.0 / 45.0, k1), (-56.0 / 15.0, k2), (32.0 / 9.0, k3)],
    ));
    let k5 = drift(axpy(
        x,
        h,
        &[
            (19372.0 / 6561.0, k1),
            (-25360.0 / 2187.0, k2),
            (64448.0 / 6561.0, k3),
            (-212.0 / 729.0, k4),
        ],
    ));
    let k6 = drift(axpy(
        x,
        h,
        &[
            (9017.0 / 3168.0, k1),
            (-355.0 / 33.0, k2),
            (46732.0 / 5247.0, k3),
            (49.0 / 176.0, k4),
            (-5103.0 / 18656.0, k5),
        ],
    ));
    axpy(
        x,
        h,
        &[
            (35.0 / 384.0, k1),
            (500.0 / 1113.0, k3),
            (125.0 / 192.0, k4),
            (-2187.0 / 6784.0, k5),
            (11.0 / 84.0, k6),
        ],
    )
}

pub(crate) fn substeps_for(dt: f64) -> usize {
    ((dt / 0.005).ceil() as usize).max(1)
}

pub(crate) fn flow_raw(mut x: [f64; 3], dt: f64, n_sub: usize) -> [f64; 3] {
    let h = dt / n_sub as f64;
    for _ in 0..n_sub {
        x = dp5_step(x, h);
    }
    x
}

/// Integrate the Lorenz-63 system from `x` over a window of length `dt`.
pub fn lorenz_flow(x: &[f64], dt: f64) -> Result<[f64; 3]> {
    lorenz_flow_fixed(x, dt, substeps_for(dt))
}

/// Same flow with an explicit substep count; mainly for convergence
/// studies.
pub fn lorenz_flow_fixed(x: &[f64], dt: f64, n_sub: usize) -> Result<[f64; 3]> {
    assert!(dt > 0.0 && x.len() == 3 && n_sub >= 1);
    let out = flow_raw([x[0], x[1], x[2]], dt, n_sub);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    Ok(out)
}

/// A point on the attractor: the state reached from (8, 0, 30) after five
/// time units. Used as the default initial mean.
pub fn lorenz_attractor_point() -> [f64; 3] {
    flow_raw([8.0, 0.0, 30.0], 5.0, 1000)
}

/// Parameters of the Lorenz-63 state-space model: isotropic noise
/// `Q = sigma_q2 I_3`, `R = sigma_r2 I_2`, model time step `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaLorenz {
    pub sigma_q2: f64,
    pub sigma_r2: f64,
    pub dt: f64,
    pub x0_mean: [f64; 3],
    pub x0_var: f64,
}

impl ThetaLorenz {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_q2 > 0.0) || !(self.sigma_r2 > 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidTheta {
                reason: format!(
                    "sigma_q2, sigma_r2, dt must be positive ({}, {}, {})",
                    self.sigma_q2, self.sigma_r2, self.dt
                ),
            });
        }
        if !(self.x0_var >= 0.0) || self.x0_mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTheta {
                reason: "non-finite initial state parameters".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LorenzModel {
    theta: ThetaLorenz,
    n_sub: usize,
}

impl LorenzModel {
    pub fn new(theta: &ThetaLorenz) -> Result<Self> {
        theta.validate()?;
        Ok(Self {
            theta: *theta,
            n_sub: substeps_for(theta.dt),
        })
    }

    pub fn theta(&self) -> &ThetaLorenz {
        &self.theta
    }
}

impl StateSpaceModel for LorenzModel {
    fn dim_x(&self) -> usize {
        3
    }
    fn dim_y(&self) -> usize {
        2
    }
    fn process_noise_var(&self) -> f64 {
        self.theta.sigma_q2
    }
    fn observation_noise_var(&self) -> f64 {
        self.theta.sigma_r2
    }
    fn initial_mean(&self) -> &[f64] {
        &self.theta.x0_mean
    }
    fn initial_var(&self) -> f64 {
        self.theta.x0_var
    }
    fn transition_mean(&self, _t: usize, x_prev: &[f64], out: &mut [f64]) {
        let f = flow_raw([x_prev[0], x_prev[1], x_prev[2]], self.theta.dt, self.n_sub);
        out.copy_from_slice(&f);
    }
    fn observe_mean(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
        out[1] = x[2];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::simulate;
    use crate::rng::RngStream;

    #[test]
    fn origin_is_fixed_point() {
        for &dt in &[0.01, 0.08, 0.15, 1.0] {
            let out = lorenz_flow(&[0.0, 0.0, 0.0], dt).unwrap();
            assert_eq!(out, [0.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn short_time_euler_consistency() {
        // flow(x, dt) - (x + dt g(x)) must shrink like O(dt^2): halving dt
        // shrinks the defect by a factor of at least ~4.
        let x = [1.0, 1.0, 1.0];
        let g = drift(x);
        let defect = |dt: f64| {
            let f = flow_raw(x, dt, 1);
            let mut s = 0.0;
            for i in 0..3 {
                let e = f[i] - (x[i] + dt * g[i]);
                s += e * e;
            }
            s.sqrt()
        };
        let mut dt = 1e-3;
        let mut prev = defect(dt);
        for _ in 0..4 {
            dt *= 0.5;
            let cur = defect(dt);
            assert!(prev / cur >= 3.5, "ratio {}", prev / cur);
            prev = cur;
        }
    }

    #[test]
    fn flow_matches_adaptive_reference() {
        // Reference oracle: adaptive embedded RKF45 with tolerance 1e-12.
        fn rkf45_adaptive(mut x: [f64; 3], t_end: f64, tol: f64) -> [f64; 3] {
            let mut t = 0.0;
            let mut h = 1e-4;
            while t < t_end {
                if t + h > t_end {
                    h = t_end - t;
                }
                let k1 = drift(x);
                let k2 = drift(axpy(x, h, &[(0.25, k1)]));
                let k3 = drift(axpy(x, h, &[(3.0 / 32.0, k1), (9.0 / 32.0, k2)]));
                let k4 = drift(axpy(
                    x,
                    h,
                    &[
                        (1932.0 / 2197.0, k1),
                        (-7200.0 / 2197.0, k2),
                        (7296.0 / 2197.0, k3),
                    ],
                ));
                let k5 = drift(axpy(
                    x,
                    h,
                    &[
                        (439.0 / 216.0, k1),
                        (-8.0, k2),
                        (3680.0 / 513.0, k3),
                        (-845.0 / 4104.0, k4),
                    ],
                ));
                let k6 = drift(axpy(
                    x,
                    h,
                    &[
                        (-8.0 / 27.0, k1),
                        (2.0, k2),
                        (-3544.0 / 2565.0, k3),
                        (1859.0 / 4104.0, k4),
                        (-11.0 / 40.0, k5),
                    ],
                ));
                let x4 = axpy(
                    x,
                    h,
                    &[
                        (25.0 / 216.0, k1),
                        (1408.0 / 2565.0, k3),
                        (2197.0 / 4104.0, k4),
                        (-1.0 / 5.0, k5),
                    ],
                );
                let x5 = axpy(
                    x,
                    h,
                    &[
                        (16.0 / 135.0, k1),
                        (6656.0 / 12825.0, k3),
                        (28561.0 / 56430.0, k4),
                        (-9.0 / 50.0, k5),
                        (2.0 / 55.0, k6),
                    ],
                );
                let mut err = 0.0f64;
                for i in 0..3 {
                    err = err.max((x5[i] - x4[i]).abs());
                }
                if err <= tol {
                    t += h;
                    x = x5;
                }
                let scale = if err > 0.0 {
                    0.9 * (tol / err).powf(0.2)
                } else {
                    2.0
                };
                h *= scale.clamp(0.2, 2.0);
            }
            x
        }

        let x0 = [1.0, 1.0, 1.0];
        let reference = rkf45_adaptive(x0, 0.08, 1e-12);
        let ours = lorenz_flow(&x0, 0.08).unwrap();
        for i in 0..3 {
            assert!(
                (ours[i] - reference[i]).abs() < 1e-8,
                "component {i}: {} vs {}",
                ours[i],
                reference[i]
            );
        }
    }

    #[test]
    fn flow_semigroup_property() {
        // flow(dt = a + b) == flow(b) after flow(a), within integrator
        // accuracy; substep grids differ so exact equality is not expected.
        let x0 = lorenz_attractor_point();
        let a = 0.07;
        let b = 0.08;
        let direct = lorenz_flow(&x0, a + b).unwrap();
        let mid = lorenz_flow(&x0, a).unwrap();
        let composed = lorenz_flow(&mid, b).unwrap();
        for i in 0..3 {
            assert!((direct[i] - composed[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn simulated_path_stays_on_attractor() {
        let theta = ThetaLorenz {
            sigma_q2: 1.0,
            sigma_r2: 2.0,
            dt: 0.15,
            x0_mean: lorenz_attractor_point(),
            x0_var: 0.1,
        };
        let model = LorenzModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(21);
        let (truth, obs) = simulate(&model, &mut rng, 100).unwrap();
        for s in &truth.states {
            assert!(s[0].abs() < 25.0 && s[1].abs() < 30.0 && s[2] > 0.0 && s[2] < 55.0);
        }
        assert_eq!(obs.len(), 100);
        assert_eq!(obs[0].len(), 2);
    }

    #[test]
    fn observation_is_projection() {
        let theta = ThetaLorenz {
            sigma_q2: 1.0,
            sigma_r2: 2.0,
            dt: 0.15,
            x0_mean: [0.0; 3],
            x0_var: 0.1,
        };
        let model = LorenzModel::new(&theta).unwrap();
        let mut out = [0.0; 2];
        model.observe_mean(&[1.0, 2.0, 3.0], &mut out);
        assert_eq!(out, [1.0, 3.0]);
    }

    #[test]
    fn bivariate_density_normalizer() {
        // At zero residual with sigma_r2 = 2 the log density is -log(4 pi).
        let theta = ThetaLorenz {
            sigma_q2: 1.0,
            sigma_r2: 2.0,
            dt: 0.15,
            x0_mean: [0.0; 3],
            x0_var: 0.1,
        };
        let model = LorenzModel::new(&theta).unwrap();
        let lp = model.log_observation_density(1, &[1.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!((lp - (-(4.0 * std::f64::consts::PI).ln())).abs() < 1e-14);
    }
}
