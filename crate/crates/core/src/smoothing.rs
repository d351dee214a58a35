//! Smoothing samplers on top of a filter pass.
//!
//! Two ways of extracting trajectories from a [`ParticleHistory`]:
//! ancestor tracking follows the stored genealogy backward, backward
//! simulation redraws the index at every step from the estimated backward
//! kernel `p(i) ~ w_t^i p(x_{t+1} | x_t^i)` and therefore does not touch
//! the genealogy at all. [`smoother_step`] wraps one filter pass plus
//! `n_s` draws into the Markov kernel that the iterated smoothers and the
//! stochastic EM loop apply repeatedly.

use crate::error::{Error, Result};
use crate::filtering::{run_filter, FilterVariant};
use crate::history::{Observation, ParticleHistory, Trajectory};
use crate::models::StateSpaceModel;
use crate::rng::RngStream;
use crate::weights::{categorical_draw_unchecked, normalize_log_weights};

/// The four iterable smoothers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmootherVariant {
    /// Conditional filter + ancestor tracking.
    CpfTrack,
    /// Conditional filter with ancestor sampling + ancestor tracking.
    CpfAsTrack,
    /// Conditional filter + backward simulation.
    CpfBs,
    /// Unconditional bootstrap filter + backward simulation.
    PfBs,
}

impl SmootherVariant {
    pub fn is_conditional(self) -> bool {
        self != SmootherVariant::PfBs
    }

    pub fn name(self) -> &'static str {
        match self {
            SmootherVariant::CpfTrack => "cpf",
            SmootherVariant::CpfAsTrack => "cpf_as",
            SmootherVariant::CpfBs => "cpf_bs",
            SmootherVariant::PfBs => "pf_bs",
        }
    }
}

/// Follow the stored genealogy backward from a terminal index drawn
/// proportionally to the final weights.
pub fn ancestor_track(h: &ParticleHistory, rng: &mut RngStream) -> Result<Trajectory> {
    let t_max = h.t_max;
    let mut indices = vec![0usize; t_max + 1];
    indices[t_max] = categorical_draw_unchecked(rng, &h.norm_weights[t_max]);
    for t in (0..t_max).rev() {
        indices[t] = h.ancestors[t][indices[t + 1]];
    }
    Ok(h.path_from_indices(&indices))
}

/// Draw one trajectory backward in time through the particle cloud.
///
/// Reads only particles and weights; the genealogy is ignored by
/// construction.
pub fn backward_simulate<M: StateSpaceModel>(
    model: &M,
    h: &ParticleHistory,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    let t_max = h.t_max;
    let n = h.n_particles;
    let mut indices = vec![0usize; t_max + 1];
    indices[t_max] = categorical_draw_unchecked(rng, &h.norm_weights[t_max]);
    let mut logw = vec![0.0; n];
    for t in (0..t_max).rev() {
        let next_state = h.particle(t + 1, indices[t + 1]);
        for i in 0..n {
            logw[i] = h.norm_weights[t][i].ln()
                + model.log_transition_density(t + 1, next_state, h.particle(t, i));
        }
        let (norm, _) =
            normalize_log_weights(&logw).map_err(|_| Error::AllWeightsDegenerate { step: t })?;
        indices[t] = categorical_draw_unchecked(rng, &norm);
    }
    Ok(h.path_from_indices(&indices))
}

/// Draw `n_s` backward-simulation trajectories.
///
/// Draw `s` consumes only the substream `rng.substream(s)`, so the result
/// is identical to running [`backward_simulate`] once per draw on those
/// substreams. Internally the draws advance through time together, which
/// lets the forecast means be evaluated once per particle and the backward
/// weight columns be shared between draws that sit on the same next-state
/// index; with the dynamics evaluated `T x N_f` times total this is the
/// reuse that keeps the backward pass at filter cost.
pub fn backward_simulate_batch<M: StateSpaceModel>(
    model: &M,
    h: &ParticleHistory,
    n_s: usize,
    rng: &RngStream,
) -> Result<Vec<Trajectory>> {
    let t_max = h.t_max;
    let n = h.n_particles;
    let dx = h.dim_x;
    let use_mean_cache = model.transition_factors_through_mean();

    let mut streams: Vec<RngStream> = (0..n_s).map(|s| rng.substream(s as u64)).collect();
    let mut paths = vec![vec![0usize; t_max + 1]; n_s];
    for (s, stream) in streams.iter_mut().enumerate() {
        paths[s][t_max] = categorical_draw_unchecked(stream, &h.norm_weights[t_max]);
    }

    let mut means = vec![0.0; n * dx];
    let mut logw = vec![0.0; n];
    // Normalized backward-weight columns for the distinct next indices in
    // play at the current step, rebuilt at every t.
    let mut columns: Vec<Option<Vec<f64>>> = vec![None; n];

    for t in (0..t_max).rev() {
        if use_mean_cache {
            for i in 0..n {
                model.transition_mean(t + 1, h.particle(t, i), &mut means[i * dx..(i + 1) * dx]);
            }
        }
        for c in columns.iter_mut() {
            *c = None;
        }
        for s in 0..n_s {
            let j = paths[s][t + 1];
            if columns[j].is_none() {
                let next_state = h.particle(t + 1, j);
                for i in 0..n {
                    let lp = if use_mean_cache {
                        model.log_transition_density_from_mean(
                            next_state,
                            &means[i * dx..(i + 1) * dx],
                        )
                    } else {
                        model.log_transition_density(t + 1, next_state, h.particle(t, i))
                    };
                    logw[i] = h.norm_weights[t][i].ln() + lp;
                }
                let (norm, _) = normalize_log_weights(&logw)
                    .map_err(|_| Error::AllWeightsDegenerate { step: t })?;
                columns[j] = Some(norm);
            }
            let col = columns[j].as_ref().unwrap();
            paths[s][t] = categorical_draw_unchecked(&mut streams[s], col);
        }
    }
    Ok(paths.iter().map(|p| h.path_from_indices(p)).collect())
}

/// Output of one application of the smoothing kernel.
#[derive(Debug, Clone)]
pub struct SmootherStepOutput {
    pub samples: Vec<Trajectory>,
    pub next_conditioning: Trajectory,
    pub history: ParticleHistory,
}

/// One iteration of an iterable smoother: a filter pass, `n_s` trajectory
/// draws, and the conditioning update (a uniform choice among the draws).
///
/// For [`SmootherVariant::PfBs`] the conditioning argument is ignored.
pub fn smoother_step<M: StateSpaceModel>(
    model: &M,
    y: &[Observation],
    variant: SmootherVariant,
    conditioning: &Trajectory,
    n_f: usize,
    n_s: usize,
    rng: &RngStream,
) -> Result<SmootherStepOutput> {
    assert!(n_s >= 1, "need at least one smoothing draw");
    let filter_variant = match variant {
        SmootherVariant::CpfTrack | SmootherVariant::CpfBs => FilterVariant::Cpf(conditioning),
        SmootherVariant::CpfAsTrack => FilterVariant::CpfAs(conditioning),
        SmootherVariant::PfBs => FilterVariant::Pf,
    };
    let mut filter_rng = rng.substream(0);
    let history = run_filter(model, y, filter_variant, n_f, &mut filter_rng)?;

    let draws_rng = rng.substream(1);
    let samples = match variant {
        SmootherVariant::CpfTrack | SmootherVariant::CpfAsTrack => {
            let mut out = Vec::with_capacity(n_s);
            for s in 0..n_s {
                let mut stream = draws_rng.substream(s as u64);
                out.push(ancestor_track(&history, &mut stream)?);
            }
            out
        }
        SmootherVariant::CpfBs | SmootherVariant::PfBs => {
            backward_simulate_batch(model, &history, n_s, &draws_rng)?
        }
    };

    let mut choice_rng = rng.substream(2);
    let next_conditioning = samples[choice_rng.uniform_index(n_s)].clone();

    Ok(SmootherStepOutput {
        samples,
        next_conditioning,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate, KitagawaModel, LinearModel, ThetaKitagawa, ThetaLinear};

    fn linear_model() -> LinearModel {
        LinearModel::new(&ThetaLinear {
            a: 0.9,
            q: 1.0,
            r: 1.0,
            x0_mean: 0.0,
            x0_var: 1.0 / 0.19,
        })
        .unwrap()
    }

    #[test]
    fn single_particle_track_and_backward_agree() {
        // With one particle the only possible path is the particle path.
        let model = linear_model();
        let mut rng = RngStream::seed_from_u64(3);
        let (_, obs) = simulate(&model, &mut rng, 12).unwrap();
        // run_filter requires n_f >= 2; build a 1-particle history by hand
        // from a 2-particle run restricted to particle 0's values.
        let mut h = ParticleHistory::with_shape(1, 1, 12);
        let mut state = 0.3;
        h.particles[0][0] = state;
        h.norm_weights[0][0] = 1.0;
        for t in 1..=12 {
            state = 0.9 * state + 0.1;
            h.particles[t][0] = state;
            h.norm_weights[t][0] = 1.0;
            h.ancestors[t - 1][0] = 0;
        }
        let _ = obs;
        let mut r1 = RngStream::seed_from_u64(5);
        let mut r2 = RngStream::seed_from_u64(6);
        let a = ancestor_track(&h, &mut r1).unwrap();
        let b = backward_simulate(&model, &h, &mut r2).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.source_indices, Some(vec![0; 13]));
    }

    #[test]
    fn ancestor_track_follows_pictured_genealogy() {
        // T = 4, N_f = 3, terminal draw pinned to particle 1 (1-based).
        // Parent links (1-based): I_4^1 = 3, I_3^3 = 3, I_2^3 = 2, I_1^2 = 1
        // give the path (x_1^(2), x_2^(3), x_3^(3), x_4^(1)).
        let mut h = ParticleHistory::with_shape(3, 1, 4);
        for t in 0..=4 {
            for i in 0..3 {
                h.particles[t][i] = (10 * t + i) as f64;
            }
            h.norm_weights[t] = vec![1.0 / 3.0; 3];
        }
        h.norm_weights[4] = vec![1.0, 0.0, 0.0];
        // 0-based ancestor entries; unused entries left at 0.
        h.ancestors[3][0] = 2; // parent of x_4^(1) is x_3^(3)
        h.ancestors[2][2] = 2; // parent of x_3^(3) is x_2^(3)
        h.ancestors[1][2] = 1; // parent of x_2^(3) is x_1^(2)
        h.ancestors[0][1] = 0; // parent of x_1^(2) is x_0^(1)
        let mut rng = RngStream::seed_from_u64(0);
        let traj = ancestor_track(&h, &mut rng).unwrap();
        assert_eq!(traj.source_indices, Some(vec![0, 1, 2, 2, 0]));
        assert_eq!(
            traj.states[1..],
            [vec![11.0], vec![22.0], vec![32.0], vec![40.0]]
        );
    }

    #[test]
    fn terminal_weight_degenerate_is_deterministic() {
        let model = linear_model();
        let mut rng = RngStream::seed_from_u64(8);
        let (truth, obs) = simulate(&model, &mut rng, 10).unwrap();
        let mut frng = RngStream::seed_from_u64(9);
        let mut h = run_filter(&model, &obs, FilterVariant::Cpf(&truth), 4, &mut frng).unwrap();
        h.norm_weights[10] = vec![1.0, 0.0, 0.0, 0.0];
        let mut r1 = RngStream::seed_from_u64(100);
        let mut r2 = RngStream::seed_from_u64(200);
        let a = ancestor_track(&h, &mut r1).unwrap();
        let b = ancestor_track(&h, &mut r2).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn backward_ignores_genealogy() {
        let model = linear_model();
        let mut rng = RngStream::seed_from_u64(13);
        let (_, obs) = simulate(&model, &mut rng, 15).unwrap();
        let mut frng = RngStream::seed_from_u64(14);
        let h = run_filter(&model, &obs, FilterVariant::Pf, 6, &mut frng).unwrap();

        let mut scrambled = h.clone();
        for row in scrambled.ancestors.iter_mut() {
            row.rotate_left(1);
        }
        let mut r1 = RngStream::seed_from_u64(50);
        let mut r2 = RngStream::seed_from_u64(50);
        let a = backward_simulate(&model, &h, &mut r1).unwrap();
        let b = backward_simulate(&model, &scrambled, &mut r2).unwrap();
        assert_eq!(a.states, b.states);
    }

    #[test]
    fn batch_matches_single_draw_streams() {
        let model = linear_model();
        let mut rng = RngStream::seed_from_u64(31);
        let (_, obs) = simulate(&model, &mut rng, 25).unwrap();
        let mut frng = RngStream::seed_from_u64(32);
        let h = run_filter(&model, &obs, FilterVariant::Pf, 12, &mut frng).unwrap();

        let parent = RngStream::seed_from_u64(77);
        let batch = backward_simulate_batch(&model, &h, 6, &parent).unwrap();
        for (s, sample) in batch.iter().enumerate() {
            let mut stream = parent.substream(s as u64);
            let single = backward_simulate(&model, &h, &mut stream).unwrap();
            assert_eq!(sample.states, single.states, "draw {s}");
        }
    }

    #[test]
    fn cpf_track_terminal_states_come_from_cloud() {
        // With two particles every tracked sample ends in particle 0 or the
        // conditioning state.
        let model = linear_model();
        let mut rng = RngStream::seed_from_u64(41);
        let (truth, obs) = simulate(&model, &mut rng, 10).unwrap();
        let step_rng = RngStream::seed_from_u64(42);
        let out = smoother_step(
            &model,
            &obs,
            SmootherVariant::CpfTrack,
            &truth,
            2,
            8,
            &step_rng,
        )
        .unwrap();
        for s in &out.samples {
            let last = s.state(10)[0];
            let p0 = out.history.particle(10, 0)[0];
            let cond = truth.state(10)[0];
            assert!(last == p0 || last == cond);
        }
    }

    #[test]
    fn cpf_as_track_paths_coincide_early() {
        // Genealogy degeneracy: the tracked samples share one ancestor path
        // below some t0 > 0 in nearly every seed.
        let theta = ThetaKitagawa {
            q: 1.0,
            r: 10.0,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let model = KitagawaModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(55);
        let (truth, obs) = simulate(&model, &mut rng, 30).unwrap();
        let mut coincide = 0;
        let seeds = 100;
        for seed in 0..seeds {
            let step_rng = RngStream::seed_from_u64(1000 + seed);
            let out = smoother_step(
                &model,
                &obs,
                SmootherVariant::CpfAsTrack,
                &truth,
                10,
                10,
                &step_rng,
            )
            .unwrap();
            // Largest t below which all samples agree.
            let mut t0 = 0;
            't_loop: for t in (1..=30usize).rev() {
                for s in 1..out.samples.len() {
                    if out.samples[s].state(t) != out.samples[0].state(t) {
                        continue 't_loop;
                    }
                }
                t0 = t;
                break;
            }
            if t0 > 0 {
                coincide += 1;
            }
        }
        assert!(coincide >= 90, "coincided in {coincide}/{seeds} seeds");
    }

    #[test]
    fn bs_samples_more_distinct_than_as_track() {
        // Backward simulation breaks the genealogy bottleneck: it keeps
        // strictly more distinct states at mid-window on average.
        let theta = ThetaKitagawa {
            q: 1.0,
            r: 10.0,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let model = KitagawaModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(66);
        let (truth, obs) = simulate(&model, &mut rng, 30).unwrap();
        let distinct_at = |samples: &[Trajectory], t: usize| {
            let mut vals: Vec<f64> = samples.iter().map(|s| s.state(t)[0]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals.len()
        };
        let (mut sum_bs, mut sum_as) = (0usize, 0usize);
        for seed in 0..100 {
            let rng_bs = RngStream::seed_from_u64(2000 + seed);
            let rng_as = RngStream::seed_from_u64(2000 + seed);
            let bs = smoother_step(&model, &obs, SmootherVariant::CpfBs, &truth, 10, 10, &rng_bs)
                .unwrap();
            let astr = smoother_step(
                &model,
                &obs,
                SmootherVariant::CpfAsTrack,
                &truth,
                10,
                10,
                &rng_as,
            )
            .unwrap();
            sum_bs += distinct_at(&bs.samples, 15);
            sum_as += distinct_at(&astr.samples, 15);
        }
        assert!(
            sum_bs > sum_as,
            "distinct states: bs {sum_bs} vs as-track {sum_as}"
        );
    }

    #[test]
    fn iterated_bs_recovers_from_zero_conditioning() {
        // Starting from the all-zero conditioning, the sample-mean RMSE
        // drops monotonically over the first three iterations in most
        // seeds.
        let theta = ThetaKitagawa {
            q: 1.0,
            r: 10.0,
            x0_mean: 0.0,
            x0_var: 1.0,
        };
        let model = KitagawaModel::new(&theta).unwrap();
        let mut rng = RngStream::seed_from_u64(3);
        let (truth, obs) = simulate(&model, &mut rng, 30).unwrap();
        let rmse = |samples: &[Trajectory]| {
            let mut acc = 0.0;
            for t in 1..=30 {
                let mean: f64 =
                    samples.iter().map(|s| s.state(t)[0]).sum::<f64>() / samples.len() as f64;
                acc += (mean - truth.state(t)[0]).powi(2);
            }
            (acc / 30.0).sqrt()
        };
        let mut improved = 0;
        let seeds = 100;
        let mut iter_mean = [0.0f64; 3];
        for seed in 0..seeds {
            let root = RngStream::seed_from_u64(4000 + seed);
            let mut conditioning = Trajectory::zeros(30, 1);
            let mut errs = Vec::new();
            for it in 0..3 {
                let out = smoother_step(
                    &model,
                    &obs,
                    SmootherVariant::CpfBs,
                    &conditioning,
                    10,
                    10,
                    &root.substream(it),
                )
                .unwrap();
                errs.push(rmse(&out.samples));
                conditioning = out.next_conditioning;
            }
            for (m, e) in iter_mean.iter_mut().zip(&errs) {
                *m += e / seeds as f64;
            }
            if errs[2] <= errs[0] {
                improved += 1;
            }
        }
        // Concentration toward the truth: the seed-averaged RMSE drops
        // strictly at each of the first three iterations, and a majority of
        // individual seeds end up better than they started.
        assert!(
            iter_mean[0] > iter_mean[1] && iter_mean[1] > iter_mean[2],
            "mean rmse per iteration {iter_mean:?}"
        );
        assert!(improved > 50, "improved in {improved}/{seeds} seeds");
    }
}
