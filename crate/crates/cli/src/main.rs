//! `causal-kc`: learn, refute and query causal knowledge-component networks.
//!
//! Exit codes: 0 success, 1 usage/schema error, 2 data error, 3 capacity error.

use std::path::PathBuf;
use std::process::ExitCode;

use causal_kc::causal::{AdjustmentPolicy, RefuteConfig, TieThresholds};
use causal_kc::path::Weighting;
use causal_kc::pipeline::{
    cmd_effects, cmd_learn, cmd_path, cmd_refute, cmd_simulate, EffectsArgs, LearnArgs, PathArgs,
    PipelineConfig, RefuteArgs, SimulateArgs, DEFAULT_THRESHOLD,
};
use causal_kc::search::SearchConfig;
use causal_kc::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "causal-kc", version, about = "Causal knowledge-component networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a mastery dataset from a ground-truth network file.
    Simulate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, env = "CAUSAL_KC_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a Bayesian network structure by BIC hill climbing.
    Learn {
        #[arg(long)]
        data: PathBuf,
        /// Input is student_id,component_name,score records rather than a mastery matrix.
        #[arg(long)]
        performance: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the accepted moves as line-delimited JSON next to the output.
        #[arg(long)]
        verbose: bool,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Refute every edge and write the annotated causal network.
    Refute {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Interventional distribution P(outcome | do(treatment = value)).
    Effects {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        treatment: String,
        #[arg(long)]
        value: usize,
        #[arg(long)]
        outcome: String,
        #[arg(long, value_enum, default_value_t = Policy::Parents)]
        policy: Policy,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan learning paths for one student's mastery row.
    Path {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        mastery: PathBuf,
        #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
        weighting: WeightingArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CommonFlags {
    #[arg(long, env = "CAUSAL_KC_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 4)]
    max_in_degree: usize,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long = "bootstrap", default_value_t = 200)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.2)]
    tau_effect: f64,
    #[arg(long, default_value_t = 0.95)]
    tau_cred: f64,
    #[arg(long, default_value_t = 0.5)]
    tau_removal: f64,
    #[arg(long, default_value_t = 0.05)]
    eps_effect: f64,
    #[arg(long, value_enum, default_value_t = Policy::Parents)]
    policy: Policy,
    #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
    weighting: WeightingArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Parents,
    Nondescendants,
}

impl From<Policy> for AdjustmentPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Parents => AdjustmentPolicy::Parents,
            Policy::Nondescendants => AdjustmentPolicy::NonDescendants,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Uniform,
    EffectInverse,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Uniform => Weighting::Uniform,
            WeightingArg::EffectInverse => Weighting::EffectInverse,
        }
    }
}

impl CommonFlags {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            seed: self.seed,
            threshold: self.threshold,
            search: SearchConfig {
                max_in_degree: self.max_in_degree,
                max_iterations: self.max_iterations,
                seed: self.seed,
                restarts: self.restarts,
            },
            refute: RefuteConfig {
                bootstrap: self.bootstrap,
                thresholds: TieThresholds {
                    tau_effect: self.tau_effect,
                    tau_cred: self.tau_cred,
                    tau_removal: self.tau_removal,
                    eps_effect: self.eps_effect,
                },
                seed: self.seed,
                policy: self.policy.into(),
                ..RefuteConfig::default()
            },
            weighting: self.weighting.into(),
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { truth, n, seed, out } => {
            cmd_simulate(&SimulateArgs { truth, n, seed, out })?;
        }
        Command::Learn {
            data,
            performance,
            out,
            verbose,
            common,
        } => {
            cmd_learn(&LearnArgs {
                data,
                performance,
                out,
                verbose,
                config: common.config(),
            })?;
        }
        Command::Refute {
            data,
            network,
            out,
            dot,
            common,
        } => {
            cmd_refute(&RefuteArgs {
                data,
                network,
                out,
                dot,
                config: common.config(),
            })?;
        }
        Command::Effects {
            network,
            treatment,
            value,
            outcome,
            policy,
            out,
        } => {
            let result = cmd_effects(&EffectsArgs {
                network,
                treatment,
                value,
                outcome,
                policy: policy.into(),
            })?;
            let json = serde_json_pretty(&result)?;
            match out {
                Some(path) => std::fs::write(&path, json).map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    source: e,
                })?,
                None => print!("{json}"),
            }
        }
        Command::Path {
            network,
            mastery,
            weighting,
            out,
            dot,
        } => {
            let (plan, _) = cmd_path(&PathArgs {
                network,
                mastery,
                weighting: weighting.into(),
                out,
                dot,
            })?;
            eprintln!(
                "{} unmastered component(s), {} root problem(s), {} path(s)",
                plan.unmastered.len(),
                plan.roots.len(),
                plan.paths.len()
            );
        }
    }
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Capacity => 3,
            })
        }
    }
}
