#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alslq::systems::{CartPoleParams, PlanarMoverParams};
use alslq::{tasks, MpcConfig, Task, TaskKind};
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::{ConfigError, ExperimentConfig};
use output::ComparisonRow;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "alslq",
    version,
    about = "Constrained SLQ model predictive control experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `output_dir` from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop run of a single method.
    Run { config: PathBuf },
    /// Runs two or more methods on the same task and tabulates them.
    Compare { config: PathBuf },
}

fn load(path: &Path, cli: &Cli, min_methods: usize) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate(min_methods)?;
    Ok(cfg)
}

fn build_task(cfg: &ExperimentConfig) -> alslq::Result<Task> {
    let mut task = match cfg.task {
        TaskKind::CartpoleSwingup => tasks::cartpole_swingup(CartPoleParams::default(), cfg.u_max)?,
        TaskKind::PlanarMaze => tasks::planar_maze(&PlanarMoverParams::default_maze())?,
        TaskKind::LqSanity => tasks::lq_sanity()?,
        TaskKind::EqualityToy => tasks::equality_toy()?,
    };
    if cfg.x0_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let x0 = task.ocp.x0.map(|v| v + rng.random_range(-cfg.x0_noise..=cfg.x0_noise));
        task.ocp = task.ocp.reanchored(x0, task.ocp.horizon.clone());
    }
    Ok(task)
}

fn report(cli: &Cli, line: impl FnOnce() -> String) {
    if !cli.quiet {
        println!("{}", line());
    }
}

fn run(cli: &Cli, path: &Path) -> Result<ExitCode, ExitCode> {
    let cfg = load(path, cli, 1).map_err(config_failure)?;
    let methods = cfg.all_methods();
    if methods.len() != 1 {
        eprintln!(
            "error: `run` takes exactly one method, the config lists {}; use `compare`",
            methods.len()
        );
        return Err(ExitCode::from(EXIT_CONFIG));
    }
    let method = &methods[0];
    let hash = cfg.hash();
    let task = build_task(&cfg).map_err(config_failure)?;
    let mpc = cfg.mpc.with_method(method);
    let result = match alslq::run_mpc(&task.ocp, &task.completion, &mpc) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Err(ExitCode::from(EXIT_ABORT));
        }
    };
    let status = output::write_run(&cfg.output_dir, &cfg, &hash, &method.label(), &mpc, &result).map_err(io_failure)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let s = &result.summary;
    report(cli, || {
        format!(
            "{} / {}: {:?}, completion {}, mean violation {:.3e}, max applied violation {:.3e}, mean solve {:.1} ms",
            cfg.task.name(),
            method.label(),
            status,
            s.completion_time.map_or("none".into(), |t| format!("{t:.3} s")),
            s.mean_violation_l2,
            s.max_applied_violation,
            s.mean_solve_ms
        )
    });
    if let Some(reason) = &result.abort_reason {
        eprintln!("aborted: {reason}");
    }
    Ok(ExitCode::from(status.exit_code() as u8))
}

fn compare(cli: &Cli, path: &Path) -> Result<ExitCode, ExitCode> {
    let cfg = load(path, cli, 2).map_err(config_failure)?;
    let hash = cfg.hash();
    let task = build_task(&cfg).map_err(config_failure)?;
    let configs: Vec<(String, MpcConfig)> = cfg
        .all_methods()
        .iter()
        .map(|m| (m.label(), cfg.mpc.with_method(m)))
        .collect();
    let runs = alslq::compare_methods(&task.ocp, &task.completion, &configs).map_err(config_failure)?;
    let mut rows = Vec::with_capacity(runs.len());
    for run in &runs {
        if let Ok(result) = &run.result {
            output::write_run(
                &cfg.output_dir.join(&run.name),
                &cfg,
                &hash,
                &run.name,
                &run.config,
                result,
            )
            .map_err(io_failure)?;
        }
        rows.push(ComparisonRow::new(run, cfg.violation_tolerance));
    }
    output::write_comparison(&cfg.output_dir, &cfg, &hash, &runs, &rows).map_err(io_failure)?;
    report(cli, || {
        let mut table = format!(
            "{:<18} {:<13} {:>10} {:>12} {:>12} {:>10} {:>12}",
            "method", "status", "done [s]", "mean viol", "max applied", "solve ms", "final cost"
        );
        for r in &rows {
            table.push_str(&format!(
                "\n{:<18} {:<13} {:>10} {:>12.3e} {:>12.3e} {:>10.1} {:>12.4}",
                r.method,
                format!("{:?}", r.status),
                r.completion_time.map_or("-".into(), |t| format!("{t:.3}")),
                r.mean_violation_l2,
                r.max_applied_violation,
                r.mean_solve_ms,
                r.final_cost
            ));
        }
        table
    });
    Ok(ExitCode::SUCCESS)
}

fn config_failure(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn io_failure(e: std::io::Error) -> ExitCode {
    eprintln!("error: writing artifacts: {e}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => run(&cli, config),
        Command::Compare { config } => compare(&cli, config),
    };
    outcome.unwrap_or_else(|code| code)
}
