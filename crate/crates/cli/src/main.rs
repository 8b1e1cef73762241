//! `pacfit`: run synthetic experiments, fit the baseline model, score games
//! and search for baseline-like interface settings.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pacfit_core::experiment::{
    analyze, calibrate, cmd_fit, cmd_run, find_config, load_model, score_logs, write_report, ExperimentError,
    ExperimentPlan, Grid, PlanError, Profiles,
};
use pacfit_core::telemetry::write_metrics_csv;

#[derive(Parser)]
#[command(
    name = "pacfit",
    version,
    about = "Baseline gameplay model for Pac-Man input experiments"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Play the keyboard baseline and the spread x time-rate grid.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Output directory; overrides the plan's.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Games per grid cell; overrides the plan's.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Fit the reference model on every log below a directory.
    Fit {
        baseline_dir: PathBuf,
        /// Model file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-game LL and NLL for a log, a run or a directory of logs, as CSV.
    Score {
        path: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// CSV file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-condition summary, correlations and sampling periods of a run.
    Analyze {
        run_dir: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Report directory [default: <run_dir>/analysis].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank grid cells whose mean NLL lies within a tolerance of 1.
    FindConfig {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        setup: Setup,
        /// Games per cell.
        #[arg(long, default_value_t = 30)]
        seeds: usize,
        #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
        tolerance: f64,
    },
    /// Tune player profiles to the reference keyboard timing.
    Calibrate {
        #[command(flatten)]
        setup: Setup,
        /// Games per evaluation.
        #[arg(long, default_value_t = 24)]
        seeds: usize,
        /// Calibrated profile file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Where profiles, grid and master seed come from. Without a plan the
/// standard two-spread, three-rate plan applies.
#[derive(Args)]
struct Setup {
    /// Plan supplying profiles, grid and master seed.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Profile file; overrides the plan's profiles.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Grid such as `spread=0.1,0.4,trate=1/3,2/3,1`; overrides the plan's.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    master_seed: Option<u64>,
}

impl Setup {
    fn resolve(&self) -> Result<(Profiles, Grid, u64), ExperimentError> {
        let plan = match &self.plan {
            Some(p) => ExperimentPlan::load(p)?,
            None => ExperimentPlan::standard(),
        };
        let profiles = match &self.profile {
            Some(p) => Profiles::load(p)?,
            None => plan.profiles,
        };
        let grid = match &self.grid {
            Some(g) => Grid::parse(g)?,
            None => plan.grid(),
        };
        Ok((profiles, grid, self.master_seed.unwrap_or(plan.master_seed)))
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), ExperimentError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cmd: Cmd) -> Result<(), ExperimentError> {
    match cmd {
        Cmd::Run { plan, out, seeds } => {
            let mut p = ExperimentPlan::load(&plan)?;
            if let Some(n) = seeds {
                p.games_per_cell = n;
            }
            let dir = out.or_else(|| p.out_dir.clone()).ok_or(PlanError::OutputDir)?;
            let rows = cmd_run(&p, &dir)?;
            println!("wrote {} logs to {}", rows.len(), dir.display());
        }
        Cmd::Fit { baseline_dir, out } => {
            let model = cmd_fit(&baseline_dir)?;
            if model.meta.location_fallback {
                log::warn!("Gamma location fit fell back to mu = 0");
            }
            write_or_print(out.as_deref(), &(model.to_json() + "\n"))?;
        }
        Cmd::Score { path, model, out } => {
            let model = load_model(&model)?;
            let games = score_logs(&path, &model)?;
            let mut buf = Vec::new();
            write_metrics_csv(&mut buf, &games).map_err(|source| ExperimentError::Csv {
                path: out.clone().unwrap_or_else(|| "-".into()),
                source,
            })?;
            write_or_print(out.as_deref(), &String::from_utf8_lossy(&buf))?;
        }
        Cmd::Analyze { run_dir, model, out } => {
            let model = load_model(&model)?;
            let (report, games) = analyze(&run_dir, &model)?;
            let dir = out.unwrap_or_else(|| run_dir.join("analysis"));
            write_report(&report, &games, &dir)?;
            print!("{report}");
            println!("report written to {}", dir.display());
        }
        Cmd::FindConfig {
            model,
            setup,
            seeds,
            tolerance,
        } => {
            let model = load_model(&model)?;
            let (profiles, grid, seed) = setup.resolve()?;
            let cells = find_config(&model, &profiles, &grid, seeds, tolerance, seed)?;
            if cells.is_empty() {
                println!("no configuration within {tolerance} of unit NLL");
            } else {
                println!(
                    "{:>4} {:>8} {:>9} {:>9} {:>7} {:>10}",
                    "rank", "spread_m", "time_rate", "mean_nll", "sd_nll", "mean_score"
                );
                for (i, c) in cells.iter().enumerate() {
                    println!(
                        "{:>4} {:>8.3} {:>9.3} {:>9.3} {:>7.3} {:>10.1}",
                        i + 1,
                        c.spread_m,
                        c.time_rate,
                        c.mean_nll,
                        c.sd_nll,
                        c.mean_score
                    );
                }
            }
        }
        Cmd::Calibrate { setup, seeds, out } => {
            let (profiles, grid, seed) = setup.resolve()?;
            let report = calibrate(&profiles, &grid, seeds, seed)?;
            eprintln!(
                "keyboard IKI mean {:.2} sd {:.2} k {:.2}; reach IKI mean {:.2}",
                report.keyboard.mean, report.keyboard.sd, report.keyboard.k, report.reach_iki_mean
            );
            let text = serde_json::to_string_pretty(&report.profiles).expect("profiles serialise") + "\n";
            write_or_print(out.as_deref(), &text)?;
        }
    }
    std::io::stdout().flush().ok();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
