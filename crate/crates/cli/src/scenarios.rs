//! Named experiment scenarios mirroring the benchmark protocols.

use smcem::error::{Error, Result};
use smcem::models::ModelConfig;

use crate::config::{Algorithm, ExperimentConfig};

/// One estimation arm: an algorithm on a dataset with fixed sizes.
#[derive(Debug, Clone)]
pub struct EstimateArm {
    pub label: String,
    pub algorithm: Algorithm,
    pub model: ModelConfig,
    pub n_f: usize,
    pub n_s: usize,
    pub iters: usize,
}

#[derive(Debug, Clone)]
pub struct EstimateJob {
    pub arms: Vec<EstimateArm>,
    pub repetitions: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SmoothJob {
    pub algorithm: Algorithm,
    pub model: ModelConfig,
    pub n_f: usize,
    pub n_s: usize,
    pub iters: usize,
    pub pool_last: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CrossvalJob {
    pub model: ModelConfig,
    pub train_t: usize,
    pub test_t: usize,
    pub n: usize,
    pub train_reps: usize,
    pub iters: usize,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
}

pub struct ScenarioInfo {
    pub name: &'static str,
    pub command: &'static str,
    pub description: &'static str,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "linear",
        command: "simulate",
        description: "linear Gaussian model, theta*=(0.9, 1, 1), T=100",
    },
    ScenarioInfo {
        name: "kitagawa",
        command: "simulate",
        description: "Kitagawa model, theta*=(1, 10), T=100",
    },
    ScenarioInfo {
        name: "lorenz",
        command: "simulate",
        description: "Lorenz-63 model, theta*=(1, 2), dt=0.15, T=100",
    },
    ScenarioInfo {
        name: "fig7",
        command: "estimate",
        description: "linear: CPF-BS vs CPF-AS SEM, N_f=N_s=10, 100 iters, 100 reps",
    },
    ScenarioInfo {
        name: "fig8",
        command: "estimate",
        description: "linear: CPF-BS/CPF-AS/PF-BS SEM, N in {10, 100, 1000}, 100 reps",
    },
    ScenarioInfo {
        name: "fig10",
        command: "estimate",
        description: "kitagawa: CPF-BS vs CPF-AS SEM, N_f=N_s=10, 100 iters, 100 reps",
    },
    ScenarioInfo {
        name: "fig11",
        command: "estimate",
        description: "kitagawa: N_f=10 fixed, N_s in {1, 5, 10}, both smoothers, 100 reps",
    },
    ScenarioInfo {
        name: "fig13",
        command: "estimate",
        description: "lorenz dt=0.15: CPF-BS vs CPF-AS SEM, N_f=N_s=20, 100 reps",
    },
    ScenarioInfo {
        name: "fig14",
        command: "estimate",
        description: "lorenz dt in {0.01, 0.08, 0.15}: CPF-BS/CPF-AS/EnKS EM, 20 members, 100 reps",
    },
    ScenarioInfo {
        name: "fig9",
        command: "smooth",
        description: "linear reconstruction: CPF-BS SEM, samples pooled from last 10 iters",
    },
    ScenarioInfo {
        name: "fig12",
        command: "smooth",
        description: "kitagawa reconstruction: CPF-BS SEM, samples pooled from last 10 iters",
    },
    ScenarioInfo {
        name: "fig15",
        command: "smooth",
        description: "lorenz reconstruction: CPF-BS SEM, N_f=N_s=20, pooled last 10 iters",
    },
    ScenarioInfo {
        name: "table1",
        command: "crossval",
        description: "lorenz dt=0.15: smoother scores on T'=1000 at 5/10/50/100 iterations",
    },
];

fn model_json(text: &str) -> ModelConfig {
    ModelConfig::from_json(text).expect("builtin scenario model")
}

pub fn simulate_model(cfg: &ExperimentConfig) -> Result<ModelConfig> {
    let mut model = match cfg.scenario.as_deref() {
        Some("linear") => model_json(r#"{"model":"linear"}"#),
        Some("kitagawa") => model_json(r#"{"model":"kitagawa"}"#),
        Some("lorenz") => model_json(r#"{"model":"lorenz"}"#),
        Some(other) => {
            return Err(Error::InvalidConfig {
                reason: format!("unknown simulate scenario '{other}'"),
            })
        }
        None => cfg.model.clone().ok_or_else(|| Error::InvalidConfig {
            reason: "simulate needs --scenario or a model config".into(),
        })?,
    };
    if let Some(seed) = cfg.seed {
        model.seed = Some(seed);
    }
    Ok(model)
}

pub fn estimate_job(cfg: &ExperimentConfig) -> Result<EstimateJob> {
    let seed = cfg.seed.unwrap_or(0);
    let arm = |label: &str, algorithm, model: &ModelConfig, n_f, n_s, iters| EstimateArm {
        label: label.to_string(),
        algorithm,
        model: model.clone(),
        n_f,
        n_s,
        iters,
    };
    let job = match cfg.scenario.as_deref() {
        Some("fig7") => {
            let m = model_json(r#"{"model":"linear","T":100,"seed":42}"#);
            EstimateJob {
                arms: vec![
                    arm("cpf_bs", Algorithm::CpfBs, &m, 10, 10, 100),
                    arm("cpf_as", Algorithm::CpfAs, &m, 10, 10, 100),
                ],
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some("fig8") => {
            let m = model_json(r#"{"model":"linear","T":100,"seed":42}"#);
            let mut arms = Vec::new();
            for &n in &[10usize, 100, 1000] {
                for &(label, alg) in &[
                    ("cpf_bs", Algorithm::CpfBs),
                    ("cpf_as", Algorithm::CpfAs),
                    ("pf_bs", Algorithm::PfBs),
                ] {
                    arms.push(arm(&format!("{label}_n{n}"), alg, &m, n, n, 100));
                }
            }
            EstimateJob {
                arms,
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some("fig10") => {
            let m = model_json(r#"{"model":"kitagawa","T":100,"seed":1234}"#);
            EstimateJob {
                arms: vec![
                    arm("cpf_bs", Algorithm::CpfBs, &m, 10, 10, 100),
                    arm("cpf_as", Algorithm::CpfAs, &m, 10, 10, 100),
                ],
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some("fig11") => {
            let m = model_json(r#"{"model":"kitagawa","T":100,"seed":1234}"#);
            let mut arms = Vec::new();
            for &n_s in &[1usize, 5, 10] {
                arms.push(arm(
                    &format!("cpf_bs_ns{n_s}"),
                    Algorithm::CpfBs,
                    &m,
                    10,
                    n_s,
                    100,
                ));
                arms.push(arm(
                    &format!("cpf_as_ns{n_s}"),
                    Algorithm::CpfAs,
                    &m,
                    10,
                    n_s,
                    100,
                ));
            }
            EstimateJob {
                arms,
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some("fig13") => {
            let m = model_json(r#"{"model":"lorenz","dt":0.15,"T":100,"seed":777}"#);
            EstimateJob {
                arms: vec![
                    arm("cpf_bs", Algorithm::CpfBs, &m, 20, 20, 100),
                    arm("cpf_as", Algorithm::CpfAs, &m, 20, 20, 100),
                ],
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some("fig14") => {
            let mut arms = Vec::new();
            for &dt in &[0.01f64, 0.08, 0.15] {
                let m = model_json(&format!(
                    r#"{{"model":"lorenz","dt":{dt},"T":100,"seed":777}}"#
                ));
                for &(label, alg) in &[
                    ("cpf_bs", Algorithm::CpfBs),
                    ("cpf_as", Algorithm::CpfAs),
                    ("enks", Algorithm::Enks),
                ] {
                    arms.push(arm(&format!("{label}_dt{dt}"), alg, &m, 20, 20, 100));
                }
            }
            EstimateJob {
                arms,
                repetitions: cfg.repetitions.unwrap_or(100),
                seed,
            }
        }
        Some(other) => {
            return Err(Error::InvalidConfig {
                reason: format!("unknown estimate scenario '{other}'"),
            })
        }
        None => {
            let model = cfg.model.clone().ok_or_else(|| Error::InvalidConfig {
                reason: "estimate needs --scenario or a model config".into(),
            })?;
            let algorithm = cfg.algorithm.ok_or_else(|| Error::InvalidConfig {
                reason: "estimate needs an algorithm".into(),
            })?;
            let n_f = cfg.n_f.unwrap_or(10);
            EstimateJob {
                arms: vec![EstimateArm {
                    label: algorithm.name().to_string(),
                    algorithm,
                    model,
                    n_f,
                    n_s: cfg.n_s.unwrap_or(n_f),
                    iters: cfg.iters.unwrap_or(100),
                }],
                repetitions: cfg.repetitions.unwrap_or(1),
                seed,
            }
        }
    };
    Ok(job)
}

pub fn smooth_job(cfg: &ExperimentConfig) -> Result<SmoothJob> {
    let seed = cfg.seed.unwrap_or(0);
    let job = match cfg.scenario.as_deref() {
        Some("fig9") => SmoothJob {
            algorithm: Algorithm::CpfBs,
            model: model_json(r#"{"model":"linear","T":100,"seed":42}"#),
            n_f: 10,
            n_s: 10,
            iters: 100,
            pool_last: 10,
            seed,
        },
        Some("fig12") => SmoothJob {
            algorithm: Algorithm::CpfBs,
            model: model_json(r#"{"model":"kitagawa","T":100,"seed":1234}"#),
            n_f: 10,
            n_s: 10,
            iters: 100,
            pool_last: 10,
            seed,
        },
        Some("fig15") => SmoothJob {
            algorithm: Algorithm::CpfBs,
            model: model_json(r#"{"model":"lorenz","dt":0.15,"T":100,"seed":777}"#),
            n_f: 20,
            n_s: 20,
            iters: 100,
            pool_last: 10,
            seed,
        },
        Some(other) => {
            return Err(Error::InvalidConfig {
                reason: format!("unknown smooth scenario '{other}'"),
            })
        }
        None => SmoothJob {
            algorithm: cfg.algorithm.unwrap_or(Algorithm::CpfBs),
            model: cfg.model.clone().ok_or_else(|| Error::InvalidConfig {
                reason: "smooth needs --scenario or a model config".into(),
            })?,
            n_f: cfg.n_f.unwrap_or(10),
            n_s: cfg.n_s.unwrap_or(10),
            iters: cfg.iters.unwrap_or(100),
            pool_last: 10,
            seed,
        },
    };
    Ok(job)
}

pub fn crossval_job(cfg: &ExperimentConfig) -> Result<CrossvalJob> {
    match cfg.scenario.as_deref() {
        Some("table1") | None => Ok(CrossvalJob {
            model: model_json(r#"{"model":"lorenz","dt":0.15,"T":100,"seed":777}"#),
            train_t: 100,
            test_t: 1000,
            n: 20,
            train_reps: cfg.repetitions.unwrap_or(10),
            iters: cfg.iters.unwrap_or(100),
            checkpoints: vec![5, 10, 50, 100],
            seed: cfg.seed.unwrap_or(0),
        }),
        Some(other) => Err(Error::InvalidConfig {
            reason: format!("unknown crossval scenario '{other}'"),
        }),
    }
}
