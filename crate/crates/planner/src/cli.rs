//! Command-line front end.
//!
//! Outputs are plain CSV/JSON files:
//! `rate_validation.csv`, `trajectory.csv`, `convergence.csv`, `energy.json`,
//! `sweep.csv`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use irs_uav_core::rate::RateModel;
use irs_uav_core::sca::{build_subproblem, LocalPoint, ScaError};
use irs_uav_core::scenario::{default_scenario, rate_validation_scenario};
use irs_uav_core::trajectory::{initial_plan, Variant};
use irs_uav_core::ScenarioConfig;
use serde::Serialize;

use crate::experiment::{run_variant, sweep, RunError, RunOutput, RunSettings};
use crate::io::{self, EnergySummary, IoError};
use crate::montecarlo::{rate_validation, straight_track};

#[derive(Debug, Parser)]
#[command(
    name = "irs-uav",
    version,
    about = "Energy-minimal UAV trajectories with IRS-assisted links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form rate against Monte Carlo along the start-to-finish line.
    RateValidate(RateValidateArgs),
    /// Plan one variant and export its trajectory, trace and energy.
    Optimize(OptimizeArgs),
    /// Energy against a grid of per-UE data demands.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario JSON; a built-in scenario is used when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Relative energy decrease below which SCA stops.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Extra bits added to every demand.
    #[arg(long)]
    pub margin_bits: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RateValidateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 100_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 50)]
    pub track_points: usize,
    #[arg(long, default_value_t = 0)]
    pub ue: usize,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, value_parser = parse_variant)]
    pub variant: Variant,
    /// Sets every UE's demand (bits).
    #[arg(long)]
    pub q_bits: Option<f64>,
    /// Also write the first convex subproblem in CBF format.
    #[arg(long)]
    pub dump_cbf: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// Ascending per-UE demands (bits), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub q_bits: Vec<f64>,
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_variant,
        default_value = "mimu-general,mimu-matching,no-irs,heuristic"
    )]
    pub variant: Vec<Variant>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!(
            "unknown variant `{s}`; expected one of {}",
            names.join(", ")
        )
    })
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Usage(String),
}

/// Error document printed on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl CliError {
    pub fn report(&self) -> ErrorReport {
        let (error, field) = match self {
            CliError::Io(e) => (e.kind(), e.field().map(str::to_owned)),
            CliError::Run(RunError::Sca(
                ScaError::InfeasibleStart(_) | ScaError::InfeasibleSeed(_),
            )) => ("infeasible", None),
            CliError::Run(_) => ("planning", None),
            CliError::Usage(_) => ("usage", None),
        };
        ErrorReport {
            error,
            message: self.to_string(),
            field,
        }
    }
}

fn scenario(common: &Common, fallback: fn() -> ScenarioConfig) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &common.scenario {
        Some(p) => io::load_scenario(p)?,
        None => fallback(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn settings(plan: &PlanArgs) -> Result<RunSettings, CliError> {
    if !(plan.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    if plan.margin_bits.is_some_and(|m| !(m >= 0.0)) {
        return Err(CliError::Usage("--margin-bits must be nonnegative".into()));
    }
    Ok(RunSettings {
        max_iters: plan.max_iters,
        rel_decrease_threshold: plan.tol,
        margin_bits: plan.margin_bits,
        ..RunSettings::default()
    })
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::RateValidate(a) => cmd_rate_validate(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

pub fn cmd_rate_validate(a: &RateValidateArgs) -> Result<(), CliError> {
    let cfg = scenario(&a.common, rate_validation_scenario)?;
    if a.ue >= cfg.n_ues() {
        return Err(CliError::Usage(format!(
            "--ue {} out of range ({} UEs)",
            a.ue,
            cfg.n_ues()
        )));
    }
    if a.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let track = straight_track(&cfg, a.track_points);
    let rows = rate_validation(&cfg, &track, a.ue, a.samples, cfg.seed);
    io::create_dir(&a.common.out)?;
    io::write_rows(&rows, &a.common.out.join("rate_validation.csv"))?;
    log::info!("wrote {} track points", rows.len());
    Ok(())
}

pub fn cmd_optimize(a: &OptimizeArgs) -> Result<(), CliError> {
    let mut cfg = scenario(&a.common, default_scenario)?;
    if let Some(q) = a.q_bits {
        if !(q >= 0.0) {
            return Err(CliError::Usage("--q-bits must be nonnegative".into()));
        }
        cfg = cfg.with_uniform_demand(q);
    }
    let settings = settings(&a.plan)?;
    let out = &a.common.out;
    io::create_dir(out)?;
    if a.dump_cbf && a.variant != Variant::Heuristic {
        dump_first_subproblem(&cfg, a.variant, &settings, &out.join("subproblem.cbf"))?;
    }
    let result = run_variant(&cfg, a.variant, &settings)?;
    write_plan(&cfg, &settings, &result, out)?;
    log::info!("{}: {:.3} J", a.variant, result.total_j());
    Ok(())
}

fn dump_first_subproblem(
    cfg: &ScenarioConfig,
    variant: Variant,
    settings: &RunSettings,
    path: &Path,
) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    if let Some(m) = settings.margin_bits {
        cfg.channel.data_margin_bits = m;
    }
    let model = RateModel::new(&cfg);
    let mode = variant.service(cfg.n_irss());
    let seed = initial_plan(&cfg, &model, &mode, None).map_err(|e| RunError::Sca(e.into()))?;
    let local = LocalPoint::from_trajectory(&cfg, &model, &mode, &seed);
    let sub = build_subproblem(&cfg, &model, &mode, &local).map_err(RunError::Sca)?;
    io::write_text(&sub.program.to_cbf(), path)?;
    Ok(())
}

fn write_plan(
    cfg: &ScenarioConfig,
    settings: &RunSettings,
    result: &RunOutput,
    out: &Path,
) -> Result<(), CliError> {
    let sol = result.solution();
    let traj = &sol.trajectory;
    io::write_trajectory_csv(traj, &out.join("trajectory.csv"))?;
    if let RunOutput::Sca(o) = result {
        io::write_convergence_csv(&o.trace, &out.join("convergence.csv"))?;
    }
    let margin = settings.margin_bits.unwrap_or(cfg.channel.data_margin_bits);
    let summary = EnergySummary {
        variant: sol.variant.name().to_string(),
        energy: sol.energy,
        delivered_bits: sol.delivered_bits.clone(),
        demand_bits: cfg.ues.iter().map(|u| u.data_bits + margin).collect(),
        n_segments: traj.n_segments(),
        mission_time_s: traj.total_time(),
        path_length_m: traj.path_length(),
        iterations: result.iterations(),
        termination: result.termination(),
    };
    io::write_json(&summary, &out.join("energy.json"))?;
    Ok(())
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    let cfg = scenario(&a.common, default_scenario)?;
    let grid = &a.q_bits;
    if grid.is_empty() || grid.iter().any(|q| !(*q >= 0.0)) || grid.windows(2).any(|w| w[1] < w[0])
    {
        return Err(CliError::Usage(
            "--q-bits must be a nonempty ascending list of nonnegative values".into(),
        ));
    }
    let settings = settings(&a.plan)?;
    let rows = sweep(&cfg, grid, &a.variant, &settings);
    io::create_dir(&a.common.out)?;
    io::write_rows(&rows, &a.common.out.join("sweep.csv"))?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    log::info!("{} rows, {failed} failed", rows.len());
    Ok(())
}
