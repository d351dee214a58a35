//! Command implementations: dataset simulation, SEM estimation runs,
//! reconstruction summaries and the cross-validation table.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use smcem::baselines::enks_em;
use smcem::error::{Error, Result};
use smcem::estimation::{
    run_sem, KitagawaFamily, LinearFamily, LorenzFamily, ModelFamily, SemConfig, SemTrace,
};
use smcem::metrics::summarize_reconstruction;
use smcem::models::{simulate, ModelConfig, ModelSpec};
use smcem::smoothing::{smoother_step, SmootherVariant};
use smcem::{Observation, RngStream, Trajectory};

use crate::config::Algorithm;
use crate::scenarios::{CrossvalJob, EstimateArm, EstimateJob, SmoothJob};

fn mix_seed(seed: u64, arm: u64, rep: u64) -> u64 {
    let mut h = seed ^ 0xcbf2_9ce4_8422_2325;
    for v in [arm, rep] {
        h ^= v;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
        h ^= h >> 29;
    }
    h
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), content)?;
    Ok(())
}

fn csv_states(states: &[Vec<f64>], t0: usize) -> String {
    let mut out = String::from("t,component,value\n");
    for (off, s) in states.iter().enumerate() {
        for (c, v) in s.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", t0 + off, c + 1, v));
        }
    }
    out
}

/// Family-erased handle over the three model families.
enum FamilyKind {
    Linear(LinearFamily),
    Kitagawa(KitagawaFamily),
    Lorenz(LorenzFamily),
}

struct ResolvedModel {
    kind: FamilyKind,
    spec: ModelSpec,
    t_max: usize,
    data_seed: u64,
}

fn resolve(model: &ModelConfig) -> Result<ResolvedModel> {
    let (spec, t_max, data_seed) = model.resolve()?;
    let kind = match &spec {
        ModelSpec::Linear(th) => FamilyKind::Linear(LinearFamily {
            x0_mean: th.x0_mean,
            x0_var: th.x0_var,
        }),
        ModelSpec::Kitagawa(th) => FamilyKind::Kitagawa(KitagawaFamily {
            x0_mean: th.x0_mean,
            x0_var: th.x0_var,
        }),
        ModelSpec::Lorenz(th) => FamilyKind::Lorenz(LorenzFamily {
            dt: th.dt,
            x0_mean: th.x0_mean,
            x0_var: th.x0_var,
        }),
    };
    Ok(ResolvedModel {
        kind,
        spec,
        t_max,
        data_seed,
    })
}

impl ResolvedModel {
    fn simulate_truth(&self) -> Result<(Trajectory, Vec<Observation>)> {
        let mut rng = RngStream::seed_from_u64(self.data_seed);
        match (&self.kind, &self.spec) {
            (FamilyKind::Linear(f), ModelSpec::Linear(th)) => {
                simulate(&f.build(th)?, &mut rng, self.t_max)
            }
            (FamilyKind::Kitagawa(f), ModelSpec::Kitagawa(th)) => {
                simulate(&f.build(th)?, &mut rng, self.t_max)
            }
            (FamilyKind::Lorenz(f), ModelSpec::Lorenz(th)) => {
                simulate(&f.build(th)?, &mut rng, self.t_max)
            }
            _ => unreachable!(),
        }
    }

    fn param_names(&self) -> Vec<&'static str> {
        match &self.kind {
            FamilyKind::Linear(f) => f.param_names().to_vec(),
            FamilyKind::Kitagawa(f) => f.param_names().to_vec(),
            FamilyKind::Lorenz(f) => f.param_names().to_vec(),
        }
    }

    /// One SEM (or EnKS-EM) run with the repetition's own initial value
    /// drawn from the family's standard uniform range.
    fn run_one(
        &self,
        y: &[Observation],
        algorithm: Algorithm,
        n_f: usize,
        n_s: usize,
        iters: usize,
        sem_seed: u64,
        theta0_seed: u64,
        keep_last: usize,
    ) -> Result<(SemTrace, Vec<Trajectory>)> {
        let mut trng = RngStream::seed_from_u64(theta0_seed);
        match &self.kind {
            FamilyKind::Linear(f) => {
                let theta0 = f.theta(
                    trng.uniform_range(0.5, 1.5),
                    trng.uniform_range(0.5, 1.5),
                    trng.uniform_range(0.5, 1.5),
                );
                run_family(f, y, algorithm, n_f, n_s, iters, sem_seed, keep_last, theta0)
            }
            FamilyKind::Kitagawa(f) => {
                let theta0 = f.theta(trng.uniform_range(1.0, 10.0), trng.uniform_range(1.0, 10.0));
                run_family(f, y, algorithm, n_f, n_s, iters, sem_seed, keep_last, theta0)
            }
            FamilyKind::Lorenz(f) => {
                let theta0 = f.theta(trng.uniform_range(0.5, 2.0), trng.uniform_range(1.0, 4.0));
                run_family(f, y, algorithm, n_f, n_s, iters, sem_seed, keep_last, theta0)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_family<F: ModelFamily>(
    family: &F,
    y: &[Observation],
    algorithm: Algorithm,
    n_f: usize,
    n_s: usize,
    iters: usize,
    sem_seed: u64,
    keep_last: usize,
    theta0: F::Theta,
) -> Result<(SemTrace, Vec<Trajectory>)> {
    match algorithm.smoother() {
        Some(variant) => {
            let mut cfg = SemConfig::new(variant, n_f, n_s, iters, theta0, sem_seed);
            cfg.keep_samples_last = keep_last;
            let run = run_sem(family, y, &cfg)?;
            Ok((run.trace, run.pooled_samples))
        }
        None => {
            let (trace, _) = enks_em(family, &theta0, y, n_f, iters, sem_seed)?;
            Ok((trace, Vec::new()))
        }
    }
}

pub fn cmd_simulate(model: &ModelConfig, out: &str) -> Result<()> {
    let resolved = resolve(model)?;
    let (truth, obs) = resolved.simulate_truth()?;
    let dir = PathBuf::from(out);
    write_file(&dir, "truth.csv", &csv_states(&truth.states, 0))?;
    write_file(&dir, "obs.csv", &csv_states(&obs, 1))?;
    println!(
        "simulate: wrote {} truth states and {} observations to {}",
        truth.len(),
        obs.len(),
        dir.display()
    );
    Ok(())
}

fn estimate_cost(job: &EstimateJob) -> u64 {
    job.arms
        .iter()
        .map(|a| {
            let (_, t_max, _) = a.model.resolve().map(|r| r).unwrap_or_else(|_| {
                (ModelSpec::Linear(smcem::models::ThetaLinear {
                    a: 0.0,
                    q: 1.0,
                    r: 1.0,
                    x0_mean: 0.0,
                    x0_var: 1.0,
                }), 0, 0)
            });
            (job.repetitions * a.iters * t_max * a.n_f) as u64
        })
        .sum()
}

fn guard_cost(cost: u64, max_evals: Option<u64>) -> Result<()> {
    println!("estimated cost: {cost} model evaluations");
    if let Some(limit) = max_evals {
        if cost > limit {
            return Err(Error::InvalidConfig {
                reason: format!("estimated cost {cost} exceeds --max-evals {limit}"),
            });
        }
    }
    Ok(())
}

pub fn cmd_estimate(job: &EstimateJob, out: &str, max_evals: Option<u64>) -> Result<()> {
    guard_cost(estimate_cost(job), max_evals)?;
    let dir = PathBuf::from(out);
    fs::create_dir_all(&dir)?;

    let mut final_rows: Vec<(String, String, usize, usize, usize, Vec<f64>)> = Vec::new();
    let mut param_names: Option<Vec<&'static str>> = None;

    for (arm_idx, arm) in job.arms.iter().enumerate() {
        let resolved = resolve(&arm.model)?;
        let (_, obs) = resolved.simulate_truth()?;
        if param_names.is_none() {
            param_names = Some(resolved.param_names());
        }

        let results: Vec<Result<(SemTrace, Vec<Trajectory>)>> = (0..job.repetitions)
            .into_par_iter()
            .map(|rep| {
                resolved.run_one(
                    &obs,
                    arm.algorithm,
                    arm.n_f,
                    arm.n_s,
                    arm.iters,
                    mix_seed(job.seed, arm_idx as u64, rep as u64),
                    mix_seed(job.seed, u64::MAX, rep as u64),
                    0,
                )
            })
            .collect();

        for (rep, result) in results.into_iter().enumerate() {
            let (trace, _) = result.map_err(|e| {
                eprintln!("arm {} repetition {rep} failed: {e}", arm.label);
                e
            })?;
            write_file(
                &dir,
                &format!("{}_sem_trace_rep{rep}.csv", arm.label),
                &trace.to_csv(),
            )?;
            final_rows.push((
                arm.label.clone(),
                arm.algorithm.name().to_string(),
                arm.n_f,
                arm.n_s,
                rep,
                trace.final_params().to_vec(),
            ));
        }
    }

    let names = param_names.unwrap_or_default();
    let mut csv = String::from("arm,algorithm,n_f,n_s,rep");
    for n in &names {
        csv.push(',');
        csv.push_str(n);
    }
    csv.push('\n');
    for (label, alg, n_f, n_s, rep, params) in &final_rows {
        csv.push_str(&format!("{label},{alg},{n_f},{n_s},{rep}"));
        for v in params {
            csv.push_str(&format!(",{v}"));
        }
        csv.push('\n');
    }
    write_file(&dir, "estimates_final.csv", &csv)?;
    println!(
        "estimate: {} arms x {} repetitions written to {}",
        job.arms.len(),
        job.repetitions,
        dir.display()
    );
    Ok(())
}

pub fn cmd_smooth(job: &SmoothJob, out: &str, max_evals: Option<u64>) -> Result<()> {
    let resolved = resolve(&job.model)?;
    guard_cost(
        (job.iters * resolved.t_max * job.n_f) as u64,
        max_evals,
    )?;
    let (truth, obs) = resolved.simulate_truth()?;
    let (_, pooled) = resolved.run_one(
        &obs,
        job.algorithm,
        job.n_f,
        job.n_s,
        job.iters,
        mix_seed(job.seed, 1, 0),
        mix_seed(job.seed, u64::MAX, 0),
        job.pool_last,
    )?;
    let summary = summarize_reconstruction(&pooled, &truth)?;
    let dir = PathBuf::from(out);
    write_file(&dir, "reconstruction.csv", &summary.to_csv())?;
    for c in 0..summary.dim {
        println!(
            "smooth: component {} rmse {:.4} cp {:.3}",
            c + 1,
            summary.rmse[c],
            summary.cp[c]
        );
    }
    println!("smooth: wrote reconstruction.csv to {}", dir.display());
    Ok(())
}

pub fn cmd_crossval(job: &CrossvalJob, out: &str, max_evals: Option<u64>) -> Result<()> {
    let resolved = resolve(&job.model)?;
    let train_cost = 2 * job.train_reps * job.iters * job.train_t * job.n;
    let test_cost = 2 * job.iters * job.test_t * job.n;
    guard_cost((train_cost + test_cost) as u64, max_evals)?;

    let lorenz = match &resolved.kind {
        FamilyKind::Lorenz(f) => *f,
        _ => {
            return Err(Error::InvalidConfig {
                reason: "crossval is defined for the lorenz model".into(),
            })
        }
    };
    let theta_star = match &resolved.spec {
        ModelSpec::Lorenz(th) => *th,
        _ => unreachable!(),
    };
    let model_star = lorenz.build(&theta_star)?;

    let mut rng = RngStream::seed_from_u64(resolved.data_seed);
    let (_, train_obs) = simulate(&model_star, &mut rng, job.train_t)?;
    let mut rng = RngStream::seed_from_u64(resolved.data_seed.wrapping_add(1));
    let (test_truth, test_obs) = simulate(&model_star, &mut rng, job.test_t)?;

    let train = |variant: SmootherVariant, arm: u64| -> Result<smcem::models::ThetaLorenz> {
        let finals: Vec<Result<Vec<f64>>> = (0..job.train_reps)
            .into_par_iter()
            .map(|rep| {
                let mut trng =
                    RngStream::seed_from_u64(mix_seed(job.seed, u64::MAX, rep as u64));
                let theta0 =
                    lorenz.theta(trng.uniform_range(0.5, 2.0), trng.uniform_range(1.0, 4.0));
                let cfg = SemConfig::new(
                    variant,
                    job.n,
                    job.n,
                    job.iters,
                    theta0,
                    mix_seed(job.seed, arm, rep as u64),
                );
                Ok(run_sem(&lorenz, &train_obs, &cfg)?.trace.final_params().to_vec())
            })
            .collect();
        let mut sums = [0.0f64; 2];
        let mut count = 0usize;
        for f in finals {
            let f = f?;
            sums[0] += f[0];
            sums[1] += f[1];
            count += 1;
        }
        Ok(lorenz.theta(sums[0] / count as f64, sums[1] / count as f64))
    };
    let theta_bs = train(SmootherVariant::CpfBs, 10)?;
    let theta_as = train(SmootherVariant::CpfAsTrack, 11)?;

    let score = |variant: SmootherVariant,
                 theta: &smcem::models::ThetaLorenz,
                 arm: u64|
     -> Result<Vec<(usize, f64, f64)>> {
        let model = lorenz.build(theta)?;
        let root = RngStream::seed_from_u64(mix_seed(job.seed, arm, 0));
        let mut conditioning = Trajectory::zeros(job.test_t, 3);
        let mut rows = Vec::new();
        for it in 1..=job.iters {
            let step = smoother_step(
                &model,
                &test_obs,
                variant,
                &conditioning,
                job.n,
                job.n,
                &root.substream(it as u64),
            )?;
            conditioning = step.next_conditioning;
            if job.checkpoints.contains(&it) {
                let sum = summarize_reconstruction(&step.samples, &test_truth)?;
                rows.push((it, sum.rmse[1], sum.cp[1]));
            }
        }
        Ok(rows)
    };
    let bs_rows = score(SmootherVariant::CpfBs, &theta_bs, 20)?;
    let as_rows = score(SmootherVariant::CpfAsTrack, &theta_as, 21)?;

    let mut csv = String::from("algorithm,iterations,rmse,cp\n");
    for (alg, rows) in [("cpf_bs", &bs_rows), ("cpf_as", &as_rows)] {
        for (it, rmse, cp) in rows {
            csv.push_str(&format!("{alg},{it},{rmse},{cp}\n"));
        }
    }
    let dir = PathBuf::from(out);
    write_file(&dir, "table1.csv", &csv)?;
    for (alg, rows) in [("cpf_bs", &bs_rows), ("cpf_as", &as_rows)] {
        for (it, rmse, cp) in rows {
            println!("crossval {alg} @ {it} iters: rmse {rmse:.4} cp {cp:.3}");
        }
    }
    println!("crossval: wrote table1.csv to {}", dir.display());
    Ok(())
}
