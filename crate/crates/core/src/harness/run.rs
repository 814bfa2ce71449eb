use rayon::prelude::*;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use super::config::{ExperimentConfig, ExperimentKind, LoadedConfig};
use super::HarnessError;
use crate::bandits::{
    asymptotic_ratio_experiment, pseudo_regret, ucb_run, write_ratio_rows, write_regret_rows,
    BanditSupport, RegretRow,
};
use crate::distributions::MdpDistribution;
use crate::mdp::validate_mdp;
use crate::omerm::{
    default_log_cover, distribution_optimum, expected_value, high_prob_tasks, omerm_high_prob,
    omerm_train, HighProbConfig, OmermConfig, OmermLogRow,
};
use crate::oracles::{EnvHandle, OracleSettings};
use crate::pce::{
    default_accuracy, initial_tasks, run_baseline_experiment, run_pce_experiment,
    write_regret_csv, PceConfig, PolicyValueSetDocument, PretrainConfig,
};
use crate::rng::{derive_stream, fork};

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub key: String,
    pub seconds: f64,
}

/// Written as `metadata.json` next to every output file set.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub version: String,
    pub experiment: &'static str,
    /// Effective config after overrides.
    pub config: ExperimentConfig,
    /// `--override` arguments, verbatim.
    pub overrides: Vec<String>,
    pub seeds: Vec<u64>,
    pub timings: Vec<Timing>,
    /// Every departure from the algorithms' own parameter schedules.
    pub deviations: Vec<String>,
    pub notes: Vec<String>,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: Option<PathBuf>,
    pub files: Vec<PathBuf>,
    pub metadata: RunMetadata,
    /// Human-readable summary lines.
    pub messages: Vec<String>,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: PathBuf) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), String>,
    ) -> Result<(), HarnessError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(|message| HarnessError::Runtime {
            key: name.to_string(),
            message,
        })?;
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn runtime(key: impl Into<String>) -> impl FnOnce(String) -> HarnessError {
    let key = key.into();
    move |message| HarnessError::Runtime { key, message }
}

/// Runs the configured experiment and writes its outputs.
pub fn run(loaded: &LoadedConfig) -> Result<RunOutcome, HarnessError> {
    let cfg = &loaded.config;
    cfg.validate()?;
    let dist = cfg.instance.build(&loaded.base_dir)?;
    let seeds = cfg.seeds.seeds();
    let mut meta = RunMetadata {
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
        experiment: cfg.experiment.name(),
        config: cfg.clone(),
        overrides: loaded.cli_overrides.clone(),
        seeds: seeds.clone(),
        timings: Vec::new(),
        deviations: Vec::new(),
        notes: Vec::new(),
        files: Vec::new(),
    };
    if cfg.experiment == ExperimentKind::Validate {
        let messages = validate(&dist, cfg)?;
        return Ok(RunOutcome {
            out_dir: None,
            files: Vec::new(),
            metadata: meta,
            messages,
        });
    }
    let mut out = Outputs::new(loaded.out_dir())?;
    let start = Instant::now();
    let messages = match cfg.experiment {
        ExperimentKind::Pce => run_pce(&dist, cfg, &seeds, &mut out, &mut meta)?,
        ExperimentKind::Omerm => run_omerm(&dist, cfg, &seeds, &mut out, &mut meta)?,
        ExperimentKind::BanditUcb => run_ucb(&dist, cfg, &seeds, &mut out)?,
        ExperimentKind::BanditRatio => run_ratio(&dist, cfg, &seeds, &mut out, &mut meta)?,
        ExperimentKind::Validate => unreachable!("handled above"),
    };
    meta.timings.push(Timing {
        key: "total".into(),
        seconds: start.elapsed().as_secs_f64(),
    });
    meta.files = out
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let json = serde_json::to_string_pretty(&meta).expect("metadata always serializes");
    out.write("metadata.json", |w| writeln!(w, "{json}").map_err(|e| e.to_string()))?;
    Ok(RunOutcome {
        out_dir: Some(out.dir),
        files: out.files,
        metadata: meta,
        messages,
    })
}

fn validate(dist: &MdpDistribution, cfg: &ExperimentConfig) -> Result<Vec<String>, HarnessError> {
    let mut lines = vec![format!(
        "{} member(s), shape {}",
        dist.len(),
        dist.shape()
    )];
    for (i, m) in dist.support().iter().enumerate() {
        let report = validate_mdp(m);
        if !report.is_valid() {
            return Err(HarnessError::Config(format!("member {i}: {report}")));
        }
        lines.push(format!(
            "member {i}: p = {}, max path reward {:.6}",
            dist.probs()[i],
            m.reward_path_bound()
        ));
    }
    if cfg.k >= 2 {
        let delta = default_accuracy(cfg.k);
        lines.push(format!(
            "C(D) at delta = {delta:.6}: {}",
            dist.complexity_measure(delta)
        ));
    }
    Ok(lines)
}

fn run_pce(
    dist: &MdpDistribution,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out: &mut Outputs,
    meta: &mut RunMetadata,
) -> Result<Vec<String>, HarnessError> {
    let settings = OracleSettings::from(cfg.oracle);
    let pce_cfg = PceConfig {
        pretrain: PretrainConfig {
            n_cap: cfg.overrides.n_cap,
        },
        epsilon: cfg.epsilon,
        delta: cfg.delta,
    };
    let t = Instant::now();
    let result = run_pce_experiment(dist, cfg.k, cfg.num_test_draws, seeds, &settings, &pce_cfg)
        .map_err(|e| runtime("pce")(e.to_string()))?;
    meta.timings.push(Timing {
        key: "pce".into(),
        seconds: t.elapsed().as_secs_f64(),
    });
    if settings.white_box {
        meta.deviations
            .push("white-box oracles: exact planning and evaluation, zero pre-training episodes".into());
    }
    if let Some(cap) = cfg.overrides.n_cap {
        let capped: Vec<String> = result
            .sets
            .iter()
            .filter(|(_, s)| s.provenance.as_ref().is_some_and(|p| p.capped))
            .map(|(seed, _)| seed.to_string())
            .collect();
        if !capped.is_empty() {
            meta.deviations.push(format!(
                "pre-training tasks capped at {cap} per phase (schedule starts at {}); capped seeds: {}",
                initial_tasks(default_accuracy(cfg.k)),
                capped.join(" ")
            ));
        }
    }
    if let Some(e) = cfg.epsilon {
        meta.deviations.push(format!("test-stage epsilon set to {e} instead of 1/sqrt(K)"));
    }
    if let Some(d) = cfg.delta {
        meta.deviations.push(format!("test-stage delta set to {d} instead of 1/sqrt(K)"));
    }
    let mut rows = Vec::new();
    for (seed, set) in &result.sets {
        let doc = serde_json::to_string_pretty(&PolicyValueSetDocument::from(set))
            .expect("policy-value sets always serialize");
        out.write(&format!("pretrain_seed{seed}.json"), |w| {
            writeln!(w, "{doc}").map_err(|e| e.to_string())
        })?;
        let p = set.provenance.clone().unwrap_or_else(|| unreachable!("pretrain sets provenance"));
        rows.push((seed, set.pairs.len(), p));
    }
    out.write("pretrain.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "seed",
            "pairs",
            "final_tasks",
            "phases",
            "capped",
            "stopping_rule_met",
            "stopping_statistic",
            "pretraining_episodes",
        ])
        .map_err(|e| e.to_string())?;
        for (seed, pairs, p) in &rows {
            c.write_record([
                seed.to_string(),
                pairs.to_string(),
                p.final_tasks.to_string(),
                p.phases.to_string(),
                p.capped.to_string(),
                p.stopping_rule_met.to_string(),
                p.stopping_statistic.to_string(),
                p.pretraining_episodes.to_string(),
            ])
            .map_err(|e| e.to_string())?;
        }
        c.flush().map_err(|e| e.to_string())
    })?;
    let mut messages = vec![format!(
        "pre-trained {} seed(s); pairs per seed: {}",
        rows.len(),
        rows.iter().map(|r| r.1.to_string()).collect::<Vec<_>>().join(" ")
    )];
    if cfg.num_test_draws > 0 {
        out.write("regret.csv", |w| write_regret_csv(w, &result.runs).map_err(|e| e.to_string()))?;
        messages.push(format!(
            "{} fine-tuning run(s), mean cumulative regret {:.4} at K = {}",
            result.runs.len(),
            result.mean_cum_regret.last().copied().unwrap_or(0.0),
            cfg.k
        ));
        if cfg.baseline {
            let t = Instant::now();
            let base = run_baseline_experiment(dist, cfg.k, cfg.num_test_draws, seeds)
                .map_err(|e| runtime("baseline")(e.to_string()))?;
            meta.timings.push(Timing {
                key: "baseline".into(),
                seconds: t.elapsed().as_secs_f64(),
            });
            out.write("baseline_regret.csv", |w| write_regret_csv(w, &base).map_err(|e| e.to_string()))?;
            let mean = base.iter().map(|r| r.trace.total_regret()).sum::<f64>() / base.len() as f64;
            messages.push(format!("baseline mean cumulative regret {mean:.4}"));
        }
    }
    Ok(messages)
}

/// `iter_k,mdp_index,avg_optimistic_value,episode_return`
pub fn write_omerm_log<W: Write>(out: W, rows: &[OmermLogRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter_k", "mdp_index", "avg_optimistic_value", "episode_return"])?;
    for r in rows {
        w.write_record([
            r.iter_k.to_string(),
            r.mdp_index.to_string(),
            r.avg_optimistic_value.to_string(),
            r.episode_return.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn run_omerm(
    dist: &MdpDistribution,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out: &mut Outputs,
    meta: &mut RunMetadata,
) -> Result<Vec<String>, HarnessError> {
    let epsilon = cfg.epsilon.expect("validated");
    let ov = cfg.overrides;
    let shape = dist.shape();
    let log_cover = ov.log_cover.unwrap_or_else(|| default_log_cover(shape, epsilon));
    for (name, set) in [
        ("task count", ov.omerm_tasks.map(|v| v.to_string())),
        ("iteration count", ov.omerm_iterations.map(|v| v.to_string())),
        ("log covering number", ov.log_cover.map(|v| v.to_string())),
    ] {
        if let Some(v) = set {
            meta.deviations.push(format!("OMERM {name} overridden to {v}"));
        }
    }
    let t = Instant::now();
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let key = format!("omerm seed {seed}");
            let mut rng = derive_stream(seed, 0);
            match cfg.delta {
                Some(delta) => {
                    let hp = HighProbConfig {
                        c1: ov.c1.unwrap_or(1.0),
                        c2: ov.c2.unwrap_or(1.0),
                        tasks: ov.omerm_tasks,
                        iterations: ov.omerm_iterations,
                        mode: ov.mode.unwrap_or_default(),
                        log_cover: Some(log_cover),
                    };
                    let o = omerm_high_prob(dist, epsilon, delta, &hp, &mut rng)
                        .map_err(|e| runtime(key)(e.to_string()))?;
                    Ok((seed, o.policy, o.task_indices.len(), o.iterations, Vec::new()))
                }
                None => {
                    // Constant-probability variant: sample size at confidence 1/3.
                    let n = ov
                        .omerm_tasks
                        .unwrap_or_else(|| high_prob_tasks(log_cover, epsilon, 1.0 / 3.0, ov.c1.unwrap_or(1.0)));
                    let mut handles: Vec<EnvHandle> = (0..n)
                        .map(|i| {
                            let idx = dist.sample_index(&mut rng);
                            EnvHandle::new(dist.member(idx).clone(), fork(&mut rng, i as u64))
                        })
                        .collect();
                    let tc = OmermConfig {
                        c2: ov.c2.unwrap_or(1.0),
                        iterations: ov.omerm_iterations,
                        mode: ov.mode.unwrap_or_default(),
                        record_log: true,
                    };
                    let o = omerm_train(&mut handles, epsilon, &tc, &mut fork(&mut rng, u64::MAX))
                        .map_err(|e| runtime(key)(e.to_string()))?;
                    Ok((seed, o.policy, n, o.iterations, o.log))
                }
            }
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    meta.timings.push(Timing {
        key: "omerm".into(),
        seconds: t.elapsed().as_secs_f64(),
    });
    let optimum = distribution_optimum(dist).ok().map(|(_, v)| v);
    if optimum.is_none() {
        meta.notes
            .push("policy space too large to enumerate; expected suboptimality not reported".into());
    }
    let mut summary = Vec::new();
    for (seed, policy, tasks, iterations, log) in &results {
        let doc = serde_json::to_string_pretty(&policy.to_document()).expect("policies serialize");
        out.write(&format!("policy_seed{seed}.json"), |w| {
            writeln!(w, "{doc}").map_err(|e| e.to_string())
        })?;
        if cfg.delta.is_none() {
            out.write(&format!("omerm_log_seed{seed}.csv"), |w| {
                write_omerm_log(w, log).map_err(|e| e.to_string())
            })?;
        }
        let value = expected_value(dist, policy).map_err(|e| runtime(format!("seed {seed}"))(e.to_string()))?;
        summary.push((*seed, *tasks, *iterations, value));
    }
    let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    out.write("omerm_summary.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["seed", "tasks", "iterations", "expected_value", "optimum", "suboptimality"])
            .map_err(|e| e.to_string())?;
        for (seed, tasks, iterations, value) in &summary {
            c.write_record([
                seed.to_string(),
                tasks.to_string(),
                iterations.to_string(),
                value.to_string(),
                fmt_opt(optimum),
                fmt_opt(optimum.map(|o| o - value)),
            ])
            .map_err(|e| e.to_string())?;
        }
        c.flush().map_err(|e| e.to_string())
    })?;
    let mut messages = vec![format!("trained {} seed(s)", summary.len())];
    if let Some(o) = optimum {
        let within = summary.iter().filter(|s| o - s.3 <= epsilon).count();
        messages.push(format!(
            "expected suboptimality <= epsilon on {within} of {} seed(s)",
            summary.len()
        ));
    }
    Ok(messages)
}

fn bandit_support(dist: &MdpDistribution) -> Result<BanditSupport, HarnessError> {
    BanditSupport::from_distribution(dist).map_err(|e| HarnessError::Config(format!("instance: {e}")))
}

fn run_ucb(
    dist: &MdpDistribution,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out: &mut Outputs,
) -> Result<Vec<String>, HarnessError> {
    let support = bandit_support(dist)?;
    let arms = support.instances[0].arms();
    if cfg.k < arms as u64 {
        return Err(HarnessError::Config(format!(
            "k = {} steps is shorter than the {arms} arms",
            cfg.k
        )));
    }
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = derive_stream(seed, 0);
            let bandit = &support.instances[support.sample_index(&mut rng)];
            let record = ucb_run(bandit, cfg.k, &mut fork(&mut rng, 1))
                .map_err(|e| runtime(format!("ucb seed {seed}"))(e.to_string()))?;
            let regret = pseudo_regret(&record, bandit)
                .map_err(|e| runtime(format!("ucb seed {seed}"))(e.to_string()))?;
            Ok(RegretRow {
                steps: cfg.k,
                seed,
                algorithm: "ucb",
                pseudo_regret: regret,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    out.write("ucb.csv", |w| write_regret_rows(w, &rows).map_err(|e| e.to_string()))?;
    let mean = rows.iter().map(|r| r.pseudo_regret).sum::<f64>() / rows.len() as f64;
    let bound = 9.0 * (arms as f64 * cfg.k as f64 * (cfg.k as f64).ln()).sqrt();
    Ok(vec![format!(
        "mean pseudo-regret {mean:.4} over {} seed(s); 9 sqrt(K T ln T) = {bound:.4}",
        rows.len()
    )])
}

pub(crate) const RATIO_NOTE: &str = "illustrative only: the informed baseline stands in for an optimal \
distribution-aware algorithm, which cannot be simulated; finite runs do not verify an asymptotic claim";

fn run_ratio(
    dist: &MdpDistribution,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out: &mut Outputs,
    meta: &mut RunMetadata,
) -> Result<Vec<String>, HarnessError> {
    let support = bandit_support(dist)?;
    let arms = support.instances[0].arms() as u64;
    if cfg.t_grid[0] < arms {
        return Err(HarnessError::Config(format!(
            "smallest horizon {} is shorter than the {arms} arms",
            cfg.t_grid[0]
        )));
    }
    let table = asymptotic_ratio_experiment(&support, &cfg.t_grid, seeds)
        .map_err(|e| runtime("bandit-ratio")(e.to_string()))?;
    meta.notes.push(RATIO_NOTE.into());
    out.write("ratio_runs.csv", |w| write_regret_rows(w, &table.runs).map_err(|e| e.to_string()))?;
    out.write("ratio.csv", |w| write_ratio_rows(w, &table.ratios).map_err(|e| e.to_string()))?;
    let mut messages = vec![format!("# {RATIO_NOTE}")];
    messages.extend(
        table
            .ratios
            .iter()
            .map(|r| format!("T = {}: informed {:.4}, ucb {:.4}, ratio {:.4}", r.steps, r.mean_informed, r.mean_ucb, r.ratio)),
    );
    Ok(messages)
}
