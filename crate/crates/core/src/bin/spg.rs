use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use safe_pg::harness::{
    cmd_bound_check, cmd_evaluate, cmd_oracle_check, cmd_sweep, cmd_train, cmd_variance_check, default_check_dir,
    CheckReport, EvalStart, ExperimentConfig, Overrides,
};
use safe_pg::trainers::Method;

#[derive(Parser)]
#[command(name = "spg", version, about = "Probabilistically constrained policy gradients")]
#[command(after_help = "Relative output directories resolve against $SPG_OUT_DIR (default: the working directory).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunFlags {
    /// Train a single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<u64>,
    /// Output directory (overrides the config and the output root).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<RunFlags> for Overrides {
    fn from(f: RunFlags) -> Self {
        Overrides { seed: f.seed, episodes: f.episodes, out: f.out }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    UniformSafe,
    Env,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a builtin config name or a TOML file.
    Train {
        config: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Evaluate a checkpoint and write per-episode results.
    Evaluate {
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 500)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "uniform-safe")]
        start: StartArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config's [sweep] grid with fixed penalties.
    Sweep {
        config: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Gradient identities, critic table, g-hat and feasible-set checks.
    OracleCheck {
        /// Finite MDP TOML file (default: the builtin instances).
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Variance ordering of the SPG coefficients.
    VarianceCheck {
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid certificates for the optimality-gap sandwiches.
    BoundCheck {
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 100)]
        grid_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(config: &str) -> anyhow::Result<(ExperimentConfig, Option<PathBuf>)> {
    ExperimentConfig::load(config).with_context(|| format!("loading config `{config}`"))
}

fn finish_checks(report: CheckReport, out: PathBuf) -> anyhow::Result<ExitCode> {
    print!("{}", report.render());
    println!("report written to {}", out.display());
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Train { config, flags } => {
            let (config, base) = load(&config)?;
            let report = cmd_train(&config, base.as_deref(), &flags.into())?;
            for r in &report.runs {
                println!(
                    "seed {}: avg_return {:.4} avg_safety {:.4} lambda {:.4}",
                    r.seed, r.final_avg_return, r.final_avg_safety, r.final_lambda
                );
            }
            println!("outputs in {} (manifest {})", report.out_dir.display(), report.manifest.display());
        }
        Command::Evaluate { checkpoint, episodes, seed, start, out } => {
            let start = match start {
                StartArg::UniformSafe => EvalStart::UniformSafe,
                StartArg::Env => EvalStart::Env,
            };
            let r = cmd_evaluate(&checkpoint, episodes as usize, seed, start, out.as_deref())?;
            println!("episodes {} mean_return {:.4} safety {:.4}", r.summary.episodes, r.summary.mean_return, r.summary.safety);
            println!("wrote {}", r.csv.display());
        }
        Command::Sweep { config, flags } => {
            let (config, base) = load(&config)?;
            let r = cmd_sweep(&config, base.as_deref(), &flags.into())?;
            let mut keys: Vec<(Method, u64)> = Vec::new();
            for row in &r.rows {
                if !keys.contains(&(row.method, row.weight.to_bits())) {
                    keys.push((row.method, row.weight.to_bits()));
                }
            }
            for (method, bits) in keys {
                let rows: Vec<_> = r.rows.iter().filter(|x| x.method == method && x.weight.to_bits() == bits).collect();
                let n = rows.len() as f64;
                let ret = rows.iter().map(|x| x.eval_return).sum::<f64>() / n;
                let safety = rows.iter().map(|x| x.eval_safety).sum::<f64>() / n;
                println!("{method} weight {:>8.3}: return {ret:.4} safety {safety:.4}", f64::from_bits(bits));
            }
            println!("wrote {}", r.csv.display());
        }
        Command::OracleCheck { mdp, delta, out } => {
            let out = out.unwrap_or_else(|| default_check_dir("oracle-check"));
            return finish_checks(cmd_oracle_check(mdp.as_deref(), delta, &out)?, out);
        }
        Command::VarianceCheck { mdp, out } => {
            let out = out.unwrap_or_else(|| default_check_dir("variance-check"));
            return finish_checks(cmd_variance_check(mdp.as_deref(), &out)?, out);
        }
        Command::BoundCheck { mdp, delta, grid_steps, out } => {
            let out = out.unwrap_or_else(|| default_check_dir("bound-check"));
            return finish_checks(cmd_bound_check(mdp.as_deref(), delta, grid_steps, &out)?, out);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
