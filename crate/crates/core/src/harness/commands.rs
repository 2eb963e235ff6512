//! The six commands behind the `spg` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use super::checkpoint::{Checkpoint, TrainedPolicy};
use super::checks::{bound_checks, oracle_checks, variance_checks, CheckReport};
use super::config::{CriticConfig, EvalStart, ExperimentConfig, ExperimentEnv};
use super::output::{write_evaluation_csv, write_sweep_csv, MetricsWriter, RunManifest, RunRecord};
use crate::env::{FiniteMdp, NavEnvSpec, StartDistribution};
use crate::episode::Metrics;
use crate::oracle::builtin_instances;
use crate::policy::Policy;
use crate::trainers::{self, evaluate_episodes, summarize, train_with, DualState, EvalSummary, ExactCritic, Method, SweepPoint, SweepRow, SweepSpec, TrainerConfig};
use crate::{Error, Result};

/// Replaces the output root (default `.`) that relative `output.directory` values resolve against.
pub const OUT_DIR_ENV: &str = "SPG_OUT_DIR";

#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub episodes: Option<u64>,
    /// Full output directory; bypasses the root entirely.
    pub out: Option<PathBuf>,
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."))
}

fn output_dir(config_dir: &Path, overrides: &Overrides) -> PathBuf {
    match &overrides.out {
        Some(p) => p.clone(),
        None if config_dir.is_absolute() => config_dir.to_path_buf(),
        None => output_root().join(config_dir),
    }
}

/// Applies `--seed` / `--episodes` to a config and re-validates it.
pub fn apply_overrides(config: &ExperimentConfig, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut c = config.clone();
    if let Some(seed) = overrides.seed {
        c.evaluation.seeds = vec![seed];
    }
    if let Some(n) = overrides.episodes {
        c.trainer.episodes = n;
    }
    c.validate()?;
    Ok(c)
}

/// Training env and evaluation env (the latter may use uniform safe starts).
pub fn environments(config: &ExperimentConfig, base: Option<&Path>) -> Result<(ExperimentEnv, ExperimentEnv)> {
    let env = config.env.resolve(base)?;
    let eval = eval_environment(&env, config.evaluation.start);
    Ok((env, eval))
}

pub fn eval_environment(env: &ExperimentEnv, start: EvalStart) -> ExperimentEnv {
    match (env, start) {
        (ExperimentEnv::Nav(spec), EvalStart::UniformSafe) => ExperimentEnv::Nav(NavEnvSpec { start: StartDistribution::UniformSafe, ..spec.clone() }),
        _ => env.clone(),
    }
}

/// Trains one run, dispatching on the environment and policy kind.
pub fn train_policy<F>(
    trainer: &TrainerConfig,
    critic: &CriticConfig,
    env: &ExperimentEnv,
    policy: TrainedPolicy,
    mut on_episode: F,
) -> Result<(TrainedPolicy, DualState)>
where
    F: FnMut(&Metrics, &[f64]) -> Result<()>,
{
    match (env, policy) {
        (ExperimentEnv::Nav(spec), TrainedPolicy::Rbf(p)) => {
            let (p, d) = train_with(trainer, spec, p, &mut critic.build(), |m, p| on_episode(m, p.params()))?;
            Ok((TrainedPolicy::Rbf(p), d))
        }
        (ExperimentEnv::Nav(spec), TrainedPolicy::Gated(p)) => {
            let (p, d) = train_with(trainer, spec, p, &mut critic.build(), |m, p| on_episode(m, p.params()))?;
            Ok((TrainedPolicy::Gated(p), d))
        }
        (ExperimentEnv::Finite(mdp), TrainedPolicy::Tabular(p)) => {
            let (p, d) = train_with(trainer, mdp, p, &mut ExactCritic::default(), |m, p| on_episode(m, p.params()))?;
            Ok((TrainedPolicy::Tabular(p), d))
        }
        _ => Err(Error::Config("policy kind does not match the environment".into())),
    }
}

pub fn evaluate_policy(env: &ExperimentEnv, policy: &TrainedPolicy, episodes: usize, seed: u64) -> Result<Vec<(f64, bool)>> {
    match (env, policy) {
        (ExperimentEnv::Nav(spec), TrainedPolicy::Rbf(p)) => evaluate_episodes(p, spec, episodes, seed),
        (ExperimentEnv::Nav(spec), TrainedPolicy::Gated(p)) => evaluate_episodes(p, spec, episodes, seed),
        (ExperimentEnv::Finite(mdp), TrainedPolicy::Tabular(p)) => evaluate_episodes(p, mdp, episodes, seed),
        _ => Err(Error::Config("policy kind does not match the environment".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub final_avg_return: f64,
    pub final_avg_safety: f64,
    pub final_lambda: f64,
    pub metrics_csv: PathBuf,
    pub checkpoint: PathBuf,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub out_dir: PathBuf,
    pub runs: Vec<RunSummary>,
    pub manifest: PathBuf,
}

fn seed_dir(seed: u64) -> PathBuf {
    PathBuf::from(format!("seed-{seed}"))
}

/// Trains one run per seed in `evaluation.seeds` (in parallel), writing
/// `seed-<s>/metrics.csv`, `seed-<s>/checkpoint.json` and a manifest.
pub fn cmd_train(config: &ExperimentConfig, base: Option<&Path>, overrides: &Overrides) -> Result<TrainReport> {
    let started = Instant::now();
    let config = apply_overrides(config, overrides)?;
    let env = config.env.resolve(base)?;
    TrainedPolicy::build(&config.policy, &env)?;
    let out = output_dir(&config.output.directory, overrides);
    std::fs::create_dir_all(&out)?;
    let config_text = config.to_toml();
    std::fs::write(out.join("config.toml"), &config_text)?;

    let results: Vec<Result<(RunSummary, RunRecord)>> = config
        .evaluation
        .seeds
        .par_iter()
        .map(|&seed| {
            let t0 = Instant::now();
            let rel = seed_dir(seed);
            let dir = out.join(&rel);
            std::fs::create_dir_all(&dir)?;
            let trainer = TrainerConfig { seed, ..config.trainer.clone() };
            let mut writer = MetricsWriter::create(&dir.join("metrics.csv"))?;
            let mut outputs = vec![rel.join("metrics.csv")];
            let cadence = config.output.checkpoint_every;
            let mut last = None;
            let policy = TrainedPolicy::build(&config.policy, &env)?;
            let (policy, dual) = train_policy(&trainer, &config.critic, &env, policy, |m, params| {
                writer.write(m)?;
                let done = m.episode + 1;
                if cadence > 0 && done % cadence == 0 && done < trainer.episodes {
                    let name = format!("checkpoint-{done}.json");
                    Checkpoint::new(&env, &config.policy, &trainer, done, m.lambda, params).save(&dir.join(&name))?;
                    outputs.push(rel.join(name));
                }
                last = Some(*m);
                Ok(())
            })?;
            writer.finish()?;
            let checkpoint = dir.join("checkpoint.json");
            Checkpoint::new(&env, &config.policy, &trainer, trainer.episodes, dual.lambda, policy.params()).save(&checkpoint)?;
            outputs.push(rel.join("checkpoint.json"));
            let (avg_return, avg_safety) = last.map_or((f64::NAN, f64::NAN), |m| (m.avg_return, m.avg_safety));
            Ok((
                RunSummary {
                    seed,
                    final_avg_return: avg_return,
                    final_avg_safety: avg_safety,
                    final_lambda: dual.lambda,
                    metrics_csv: dir.join("metrics.csv"),
                    checkpoint,
                },
                RunRecord { seed, outputs, seconds: t0.elapsed().as_secs_f64() },
            ))
        })
        .collect();

    let mut manifest = RunManifest::new("train", &config_text);
    manifest.seeds = config.evaluation.seeds.clone();
    manifest.outputs = vec![PathBuf::from("config.toml")];
    let mut runs = Vec::new();
    for r in results {
        let (summary, record) = r?;
        runs.push(summary);
        manifest.runs.push(record);
    }
    manifest.total_seconds = started.elapsed().as_secs_f64();
    let manifest = manifest.save(&out)?;
    Ok(TrainReport { out_dir: out, runs, manifest })
}

#[derive(Clone, Debug)]
pub struct EvaluateReport {
    pub summary: EvalSummary,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Evaluates a checkpoint on the `EVAL` stream of `seed`; writes `evaluation.csv`.
/// Default output: an `evaluation` directory next to the checkpoint.
pub fn cmd_evaluate(checkpoint: &Path, episodes: usize, seed: u64, start: EvalStart, out: Option<&Path>) -> Result<EvaluateReport> {
    let started = Instant::now();
    let ck = Checkpoint::load(checkpoint)?;
    let (env, policy) = ck.restore()?;
    let env = eval_environment(&env, start);
    let rows = evaluate_policy(&env, &policy, episodes, seed)?;
    if rows.is_empty() {
        return Err(Error::InvalidInput("evaluation needs at least one episode".into()));
    }
    let dir = match out {
        Some(p) => p.to_path_buf(),
        None => checkpoint.parent().unwrap_or(Path::new(".")).join("evaluation"),
    };
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("evaluation.csv");
    write_evaluation_csv(&csv, &rows)?;
    let summary = summarize(&rows);
    let mut manifest = RunManifest::new("evaluate", &format!("{}\nepisodes={episodes}\nseed={seed}\nstart={start:?}", ck.to_text()));
    manifest.seeds = vec![seed];
    manifest.runs.push(RunRecord { seed, outputs: vec![PathBuf::from("evaluation.csv")], seconds: started.elapsed().as_secs_f64() });
    manifest.total_seconds = started.elapsed().as_secs_f64();
    let manifest = manifest.save(&dir)?;
    Ok(EvaluateReport { summary, csv, manifest })
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Sweep points in order: probabilistic weights, then cumulative weights.
pub fn sweep_points(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let s = config.sweep.as_ref().ok_or_else(|| Error::Config("config has no [sweep] section".into()))?;
    let mut points: Vec<SweepPoint> = s.prob_weights.iter().map(|&w| SweepPoint { method: s.prob_method, weight: w }).collect();
    points.extend(s.cumulative_weights.iter().map(|&w| SweepPoint { method: Method::CumulativeShaped, weight: w }));
    if points.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    Ok(points)
}

/// Runs the `[sweep]` grid; run `r` of every point uses seed `seeds[0] + r`.
pub fn cmd_sweep(config: &ExperimentConfig, base: Option<&Path>, overrides: &Overrides) -> Result<SweepReport> {
    let started = Instant::now();
    let config = apply_overrides(config, overrides)?;
    let points = sweep_points(&config)?;
    let runs = config.sweep.as_ref().map_or(1, |s| s.runs);
    let (env, eval_env) = environments(&config, base)?;
    let spec = SweepSpec {
        base: TrainerConfig { seed: config.evaluation.seeds[0], ..config.trainer.clone() },
        points,
        runs,
        eval_episodes: config.evaluation.episodes,
    };
    let make = || TrainedPolicy::build(&config.policy, &env);
    make()?;
    let critic = config.critic;
    let rows = match (&env, &eval_env, make()?) {
        (ExperimentEnv::Nav(train), ExperimentEnv::Nav(eval), TrainedPolicy::Rbf(p)) => trainers::sweep(&spec, train, eval, || p.clone(), || critic.build())?,
        (ExperimentEnv::Nav(train), ExperimentEnv::Nav(eval), TrainedPolicy::Gated(p)) => trainers::sweep(&spec, train, eval, || p.clone(), || critic.build())?,
        (ExperimentEnv::Finite(train), ExperimentEnv::Finite(eval), TrainedPolicy::Tabular(p)) => {
            trainers::sweep(&spec, train, eval, || p.clone(), ExactCritic::default)?
        }
        _ => return Err(Error::Config("policy kind does not match the environment".into())),
    };
    let out = output_dir(&config.output.directory, overrides);
    std::fs::create_dir_all(&out)?;
    let config_text = config.to_toml();
    std::fs::write(out.join("config.toml"), &config_text)?;
    let csv = out.join("sweep.csv");
    write_sweep_csv(&csv, &rows)?;
    let mut manifest = RunManifest::new("sweep", &config_text);
    manifest.seeds = (0..runs as u64).map(|r| spec.base.seed + r).collect();
    manifest.outputs = vec![PathBuf::from("config.toml"), PathBuf::from("sweep.csv")];
    manifest.total_seconds = started.elapsed().as_secs_f64();
    let manifest = manifest.save(&out)?;
    Ok(SweepReport { rows, csv, manifest })
}

/// Builtin instances, or a single instance read from a TOML file. The file is
/// validated before any check runs.
pub fn check_instances(mdp_file: Option<&Path>) -> Result<Vec<(String, FiniteMdp)>> {
    match mdp_file {
        None => Ok(builtin_instances().into_iter().map(|(n, m)| (n.to_string(), m)).collect()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mdp: FiniteMdp = toml::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {}", path.display(), e.message())))?;
            let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
            Ok(vec![(name, mdp)])
        }
    }
}

fn write_report(report: &CheckReport, out: &Path, file: &str, command: &str, extra: Vec<PathBuf>) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    let text = report.render();
    std::fs::write(out.join(file), &text)?;
    let mut manifest = RunManifest::new(command, &text);
    manifest.outputs = std::iter::once(PathBuf::from(file)).chain(extra).collect();
    manifest.save(out)
}

pub fn default_check_dir(command: &str) -> PathBuf {
    output_root().join("runs").join(command)
}

pub fn cmd_oracle_check(mdp_file: Option<&Path>, delta: f64, out: &Path) -> Result<CheckReport> {
    let instances = check_instances(mdp_file)?;
    let report = oracle_checks(&instances, delta);
    write_report(&report, out, "oracle-check.txt", "oracle-check", Vec::new())?;
    Ok(report)
}

pub fn cmd_variance_check(mdp_file: Option<&Path>, out: &Path) -> Result<CheckReport> {
    let instances = check_instances(mdp_file)?;
    let report = variance_checks(&instances);
    write_report(&report, out, "variance-check.txt", "variance-check", Vec::new())?;
    Ok(report)
}

/// Writes one `certificate-<instance>.toml` per certified instance.
pub fn cmd_bound_check(mdp_file: Option<&Path>, delta: f64, grid_steps: usize, out: &Path) -> Result<CheckReport> {
    let instances = match mdp_file {
        Some(_) => check_instances(mdp_file)?,
        None => check_instances(None)?.into_iter().filter(|(n, _)| n != "random-3x2").collect(),
    };
    std::fs::create_dir_all(out)?;
    let (report, certificates) = bound_checks(&instances, delta, grid_steps);
    let mut files = Vec::new();
    for (name, cert) in certificates {
        let file = PathBuf::from(format!("certificate-{name}.toml"));
        std::fs::write(out.join(&file), cert.to_report())?;
        files.push(file);
    }
    write_report(&report, out, "bound-check.txt", "bound-check", files)?;
    Ok(report)
}
