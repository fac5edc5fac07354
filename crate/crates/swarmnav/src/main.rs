use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmnav::commands::{
    cmd_evaluate, cmd_navmesh, cmd_replay, cmd_train, fixed_policy, parse_point, EvalCommand, NavmeshCommand,
    PolicySource, TrainOptions,
};
use swarmnav::{CliError, Result};
use swarmnav_core::eval::compare_reports;

/// Multi-agent navigation: navmesh planning plus a learned local policy.
#[derive(Parser)]
#[command(name = "swarmnav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy from a run configuration file.
    Train {
        config: PathBuf,
        /// Continue from the latest checkpoint in the output directory.
        #[arg(long)]
        resume: bool,
        /// Overrides SWARMNAV_SEED and the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worlds stepped side by side during rollouts.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        max_steps: Option<u64>,
        /// Overrides output_dir from the file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(short, long)]
        verbose: bool,
    },
    /// Evaluate a checkpoint or a fixed policy over a number of trials.
    Evaluate {
        /// Checkpoint file (omit with --policy).
        checkpoint: Option<PathBuf>,
        /// Fixed policy instead of a checkpoint: planner, uniform or dodge.
        #[arg(long, conflicts_with = "checkpoint")]
        policy: Option<String>,
        /// Preset name (basic, cross_road, four_wall, random_obstacle,
        /// circle_transport) or scenario file.
        #[arg(long, default_value = "basic")]
        scenario: String,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long)]
        agents: Option<usize>,
        /// Domain side, rescaling the preset.
        #[arg(long)]
        side: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pure-RL action space: no planner action, goal features added.
        #[arg(long)]
        baseline: bool,
        /// Sample actions instead of taking the most likely one.
        #[arg(long)]
        stochastic: bool,
        /// Per-trial step budget.
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long)]
        crowd_cap: Option<u64>,
        /// Directory for report.json, records.csv and crowdedness.csv.
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        /// Also write a replayable trajectory log.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Re-simulate a trajectory log and check it bit for bit.
    Replay {
        log: PathBuf,
        /// Print every record as it is verified.
        #[arg(long)]
        render: bool,
    },
    /// Dump the navigation mesh of a map, optionally with a channel query.
    Navmesh {
        map: Option<PathBuf>,
        /// Use a scenario's map instead of a map file.
        #[arg(long, conflicts_with = "map")]
        scenario: Option<String>,
        #[arg(long)]
        side: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Agent radius the obstacles are grown by.
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        /// Channel query start, as x,y.
        #[arg(long, requires = "to")]
        from: Option<String>,
        #[arg(long, requires = "from")]
        to: Option<String>,
    },
}

fn seed_env() -> Option<String> {
    std::env::var("SWARMNAV_SEED").ok()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            resume,
            seed,
            workers,
            max_steps,
            out,
            verbose,
        } => {
            let s = cmd_train(&TrainOptions {
                config,
                resume,
                seed,
                seed_env: seed_env(),
                workers,
                max_steps,
                output_dir: out,
                verbose,
            })?;
            println!(
                "trained {} updates, {} environment steps into {} (config {})",
                s.updates,
                s.env_steps,
                s.dir.display(),
                &s.config_hash[..12]
            );
            if let Some(c) = s.checkpoints.last() {
                println!("latest checkpoint: {}", c.display());
            }
        }
        Command::Evaluate {
            checkpoint,
            policy,
            scenario,
            trials,
            agents,
            side,
            seed,
            baseline,
            stochastic,
            max_steps,
            crowd_cap,
            out,
            trajectory,
        } => {
            let source = match (checkpoint, policy) {
                (Some(c), None) => PolicySource::Checkpoint(c),
                (None, Some(p)) => PolicySource::Fixed(fixed_policy(&p)?),
                _ => return Err(CliError::Config("give a checkpoint or --policy".into())),
            };
            let method = match &source {
                PolicySource::Checkpoint(p) => p.display().to_string(),
                PolicySource::Fixed(_) => "fixed".into(),
            };
            let cmd = EvalCommand {
                agents,
                side,
                seed,
                seed_env: seed_env(),
                baseline,
                stochastic,
                max_steps,
                crowd_cap,
                trajectory,
                ..EvalCommand::new(source, &scenario, trials, out)
            };
            let report = cmd_evaluate(&cmd)?;
            print!("{}", compare_reports(&[(method.as_str(), &report)]));
            println!("outputs in {}", cmd.out.display());
        }
        Command::Replay { log, render } => {
            if render {
                let t = swarmnav::formats::trajectory::load_trajectory(&log)?;
                for r in &t.records {
                    println!("{}", r.line());
                }
            }
            let s = cmd_replay(&log)?;
            match s.divergences.first() {
                None => println!("verified, 0 divergences ({} steps, {} records)", s.steps, s.records),
                Some(d) => {
                    let who = d.agent.map(|a| format!(" agent {a}")).unwrap_or_default();
                    return Err(CliError::Other(format!(
                        "{} divergences, first at step {}{who}: {}",
                        s.divergences.len(),
                        d.step,
                        d.what
                    )));
                }
            }
        }
        Command::Navmesh {
            map,
            scenario,
            side,
            seed,
            radius,
            from,
            to,
        } => {
            let cmd = NavmeshCommand {
                map,
                scenario,
                side,
                seed,
                radius,
                from: from.as_deref().map(parse_point).transpose()?,
                to: to.as_deref().map(parse_point).transpose()?,
            };
            print!("{}", cmd_navmesh(&cmd)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
