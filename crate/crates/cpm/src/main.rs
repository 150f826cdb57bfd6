use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cpm::config::{Format, ModelChoice, StateChoice};
use cpm::validation::{self, Report};
use cpm::{experiments, ConfigPatch, ExperimentConfig};
use serde_json::json;

/// Continuous photodetection experiments. Times are dimensionless λt.
#[derive(Parser, Debug)]
#[command(name = "cpm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Mean photocount number m̄_t for every state, n̄ ∈ {50, 100}.
    Figure1(Common),
    /// Normalised second factorial moment K_t, number and thermal states.
    Figure2(Common),
    /// Mean waiting time against the mean cavity photon number.
    Figure3(Common),
    /// Trajectory estimates of the count moments beside the analytic values.
    Trajectories {
        #[command(flatten)]
        common: Common,
        /// Also write every event as `trajectory_id<TAB>time<TAB>kind`.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Count distributions P_t(m), analytic and from trajectories.
    Counts(Common),
    /// Run the acceptance checks; exits with status 1 if any fails.
    Validate {
        /// Run only these criteria (repeatable).
        #[arg(long = "criterion", value_name = "ID")]
        criteria: Vec<u8>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON configuration file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelChoice>,
    #[arg(long, value_enum)]
    state: Option<StateChoice>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Dark-count rate in units of λ.
    #[arg(long)]
    dark: Option<f64>,
    /// Cavity damping rate in units of λ.
    #[arg(long)]
    cavity: Option<f64>,
    #[arg(long)]
    tmin: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Fock-space truncation.
    #[arg(long)]
    nmax: Option<usize>,
    /// Largest photocount number in count distributions.
    #[arg(long)]
    mmax: Option<usize>,
    /// Trajectories per ensemble.
    #[arg(long)]
    traj: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Common {
    fn resolve(&self) -> cpm::Result<ExperimentConfig> {
        let flags = ConfigPatch {
            model: self.model,
            state: self.state,
            nbar: self.nbar,
            eta: self.eta,
            dark: self.dark,
            cavity: self.cavity,
            tmin: self.tmin,
            tmax: self.tmax,
            points: self.points,
            nmax: self.nmax,
            mmax: self.mmax,
            traj: self.traj,
            seed: self.seed,
            out: self.out.clone(),
            format: self.format,
        };
        let base = match &self.config {
            Some(path) => ConfigPatch::from_file(path)?,
            None => ConfigPatch::default(),
        };
        ExperimentConfig::resolve(base.overlay(flags))
    }
}

fn report_json(reports: &[Report]) -> String {
    let items: Vec<_> = reports
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "name": r.name,
                "passed": r.passed,
                "measured": r.measured,
                "tolerance": r.tolerance,
                "details": r.details,
                "elapsed_s": r.elapsed,
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&json!({ "criteria": items })).expect("reports serialise");
    text.push('\n');
    text
}

fn validate(criteria: &[u8], format: Option<Format>, out: Option<PathBuf>) -> cpm::Result<bool> {
    let ids: Vec<u8> = if criteria.is_empty() {
        validation::CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        criteria.to_vec()
    };
    let mut reports = Vec::new();
    for id in ids {
        let report = validation::run(id)?;
        if format != Some(Format::Json) || out.is_some() {
            println!("{report}");
        }
        reports.push(report);
    }
    let passed = reports.iter().filter(|r| r.passed).count();
    if format == Some(Format::Json) {
        cpm::output::emit(&report_json(&reports), out.as_deref())?;
    } else {
        println!("{passed}/{} criteria passed", reports.len());
    }
    Ok(passed == reports.len())
}

fn run(cli: Cli) -> cpm::Result<bool> {
    match cli.command {
        Command::Figure1(c) => {
            let config = c.resolve()?;
            cpm::write_dataset(&config, &experiments::figure1(&config)?)?;
        }
        Command::Figure2(c) => {
            let config = c.resolve()?;
            cpm::write_dataset(&config, &experiments::figure2(&config)?)?;
        }
        Command::Figure3(c) => {
            let config = c.resolve()?;
            cpm::write_dataset(&config, &experiments::figure3(&config)?)?;
        }
        Command::Counts(c) => {
            let config = c.resolve()?;
            cpm::write_dataset(&config, &experiments::counts(&config)?)?;
        }
        Command::Trajectories { common, dump } => {
            let config = common.resolve()?;
            cpm::cmd_trajectories(&config, dump.as_deref())?;
        }
        Command::Validate { criteria, format, out } => return validate(&criteria, format, out),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
