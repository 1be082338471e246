use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use fmdp_core::environments::EnvSpec;
use fmdp_core::io::{model_from_str, model_to_string};
use fmdp_core::planner::{evi_solve, EviOptions};
use fmdp_harness::audit::audit_dir;
use fmdp_harness::config::{parse_seeds, ConfigOverrides};
use fmdp_harness::plot::render_plots;
use fmdp_harness::{run_experiment, AgentSpec, HarnessError, RunConfig};

/// Regret experiments on factored MDPs.
#[derive(Parser)]
#[command(name = "fmdp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every agent on every seed and write results.
    Run(RunArgs),
    /// Render regret and wrong-scope SVGs from a results directory.
    Plot { dir: PathBuf },
    /// Check the invariants recorded in a results directory.
    Audit { dir: PathBuf },
    /// Solve a serialized model and print its optimal gain and policy.
    Plan {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Write the model of an environment spec.
    Gen {
        env: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file; its values override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<String>,
    /// Repeatable, e.g. `--agent slf-ucrl4 --agent ucrl2`.
    #[arg(long = "agent")]
    agents: Vec<String>,
    #[arg(long)]
    horizon: Option<u64>,
    /// `0..10` or `1,2,3`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
}

impl RunArgs {
    fn config(self) -> Result<RunConfig, HarnessError> {
        let mut cfg = RunConfig {
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            ..RunConfig::default()
        };
        if let Some(v) = self.env {
            cfg.env = v;
        }
        if !self.agents.is_empty() {
            cfg.agents = self.agents.iter().map(|a| a.parse()).collect::<Result<Vec<AgentSpec>, _>>()?;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.seeds {
            cfg.seeds = parse_seeds(&v)?;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = self.out {
            cfg.out_dir = v;
        }
        if let Some(v) = self.jobs {
            cfg.parallelism = v;
        }
        if let Some(v) = self.grid {
            cfg.grid_points = v;
        }
        if let Some(path) = self.config {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            ConfigOverrides::from_toml(&text)?.apply(&mut cfg);
        }
        Ok(cfg)
    }
}

fn run(args: RunArgs) -> Result<ExitCode, HarnessError> {
    let cfg = args.config()?;
    let report = run_experiment(&cfg)?;
    println!("lambda* = {:.6}", report.lambda_star);
    for r in &report.runs {
        match r.status {
            fmdp_harness::experiment::RunStatus::Ok => println!(
                "{} seed={} regret={:.1} episodes={}",
                r.agent, r.seed, r.final_regret, r.episodes
            ),
            fmdp_harness::experiment::RunStatus::Failed => {
                eprintln!("{} seed={} FAILED: {}", r.agent, r.seed, r.error)
            }
        }
    }
    println!("results in {}", report.dir.display());
    Ok(if report.failures().next().is_some() {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn plan(model: PathBuf, tol: f64) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
    let fmdp = model_from_str(&text)?;
    let res = evi_solve(&fmdp.flatten()?, &EviOptions::with_tol(tol))?;
    println!("gain = {:.9}", res.gain);
    println!("span = {:.6}", res.span);
    println!("iterations = {}", res.iterations);
    let policy: Vec<String> = res.policy.iter().map(usize::to_string).collect();
    println!("policy = [{}]", policy.join(", "));
    Ok(())
}

fn gen(env: &str, out: Option<PathBuf>) -> anyhow::Result<()> {
    let spec: EnvSpec = env.parse()?;
    let text = model_to_string(&spec.build()?.model)?;
    match out {
        Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<ExitCode, (i32, String)> = match cli.command {
        Command::Run(args) => run(args).map_err(|e| (e.exit_code(), e.to_string())),
        Command::Plot { dir } => render_plots(&dir)
            .map(|paths| {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            })
            .map_err(|e| (e.exit_code(), e.to_string())),
        Command::Audit { dir } => match audit_dir(&dir) {
            Ok(report) => {
                println!("{report}");
                Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(4) })
            }
            Err(e) => Err((e.exit_code(), e.to_string())),
        },
        Command::Plan { model, tol } => plan(model, tol).map(|_| ExitCode::SUCCESS).map_err(|e| (3, format!("{e:#}"))),
        Command::Gen { env, out } => gen(&env, out).map(|_| ExitCode::SUCCESS).map_err(|e| (2, format!("{e:#}"))),
    };
    match result {
        Ok(code) => code,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
