//! Single planning runs and data-constraint sweeps.

use irs_uav_core::heuristic::{self, HeuristicPlan};
use irs_uav_core::sca::{
    sca_optimize, sca_optimize_from, ScaError, ScaOptions, ScaOutcome, Termination,
};
use irs_uav_core::trajectory::{PlanError, PlanSolution, Variant};
use irs_uav_core::ScenarioConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::solver::ClarabelSolver;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub max_iters: usize,
    pub rel_decrease_threshold: f64,
    pub margin_bits: Option<f64>,
    pub solver_tol: f64,
    pub solver: ClarabelSolver,
}

impl Default for RunSettings {
    fn default() -> Self {
        let d = ScaOptions::default();
        RunSettings {
            max_iters: d.max_iters,
            rel_decrease_threshold: d.rel_decrease_threshold,
            margin_bits: None,
            solver_tol: d.solver_tol,
            solver: ClarabelSolver::default(),
        }
    }
}

impl RunSettings {
    pub fn sca_options(&self, variant: Variant) -> ScaOptions {
        ScaOptions {
            variant,
            max_iters: self.max_iters,
            rel_decrease_threshold: self.rel_decrease_threshold,
            margin_bits: self.margin_bits,
            solver_tol: self.solver_tol,
            n_segments: None,
        }
    }

    fn effective(&self, cfg: &ScenarioConfig) -> ScenarioConfig {
        let mut c = cfg.clone();
        if let Some(m) = self.margin_bits {
            c.channel.data_margin_bits = m;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Sca(ScaOutcome),
    Heuristic(HeuristicPlan),
}

impl RunOutput {
    pub fn solution(&self) -> &PlanSolution {
        match self {
            RunOutput::Sca(o) => &o.solution,
            RunOutput::Heuristic(h) => &h.solution,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            RunOutput::Sca(o) => o.trace.len().saturating_sub(1),
            RunOutput::Heuristic(_) => 0,
        }
    }

    pub fn termination(&self) -> Option<String> {
        match self {
            RunOutput::Sca(o) => Some(match o.termination {
                Termination::Converged => "converged".to_string(),
                Termination::MaxIterations => "max-iterations".to_string(),
                Termination::NoImprovement => "no-improvement".to_string(),
                Termination::Solver(s) => format!("solver-{s:?}").to_lowercase(),
            }),
            RunOutput::Heuristic(_) => None,
        }
    }

    pub fn total_j(&self) -> f64 {
        self.solution().energy.total_j
    }
}

/// Plans one variant from its own seed.
pub fn run_variant(
    cfg: &ScenarioConfig,
    variant: Variant,
    settings: &RunSettings,
) -> Result<RunOutput, RunError> {
    match variant {
        Variant::Heuristic => Ok(RunOutput::Heuristic(heuristic::plan(
            &settings.effective(cfg),
        )?)),
        _ => Ok(RunOutput::Sca(sca_optimize(
            cfg,
            &settings.sca_options(variant),
            &settings.solver,
        )?)),
    }
}

/// How much IRS help a variant may use; a plan of a lower or equal rank is
/// feasible for a variant of higher rank.
fn rank(v: Variant) -> u8 {
    match v {
        Variant::NoIrs => 0,
        Variant::MimuMatching | Variant::Heuristic => 1,
        Variant::MimuGeneral | Variant::Sisu => 2,
    }
}

/// Order in which a sweep point evaluates its variants.
fn chain_position(v: Variant) -> u8 {
    match v {
        Variant::Heuristic => 0,
        Variant::NoIrs => 1,
        Variant::MimuMatching => 2,
        Variant::Sisu => 3,
        Variant::MimuGeneral => 4,
    }
}

/// Runs `variants` on one configuration. Each SCA variant starts from its
/// own seed and also from every finished plan of a lower-or-equal rank; the
/// lowest-energy result is kept.
pub fn run_chained(
    cfg: &ScenarioConfig,
    variants: &[Variant],
    settings: &RunSettings,
) -> Vec<(Variant, Result<RunOutput, RunError>)> {
    let mut order: Vec<Variant> = variants.to_vec();
    order.sort_by_key(|&v| chain_position(v));
    order.dedup();
    let mut done: Vec<(Variant, Result<RunOutput, RunError>)> = Vec::new();
    for v in order {
        let mut best = run_variant(cfg, v, settings);
        if v != Variant::Heuristic {
            let opts = settings.sca_options(v);
            for (prev, res) in &done {
                let Ok(prev_out) = res else { continue };
                if rank(*prev) > rank(v) {
                    continue;
                }
                let start = prev_out.solution().trajectory.clone();
                if let Ok(o) = sca_optimize_from(cfg, &opts, &settings.solver, start) {
                    let better = match &best {
                        Ok(b) => o.solution.energy.total_j < b.total_j(),
                        Err(_) => true,
                    };
                    if better {
                        best = Ok(RunOutput::Sca(o));
                    }
                }
            }
        }
        done.push((v, best));
    }
    let mut out = Vec::with_capacity(variants.len());
    for v in variants {
        if let Some(pos) = done.iter().position(|(d, _)| d == v) {
            out.push(done.swap_remove(pos));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub q_bits: f64,
    pub variant: String,
    pub status: String,
    pub total_j: Option<f64>,
    pub flight_j: Option<f64>,
    pub comm_j: Option<f64>,
    pub iterations: Option<usize>,
    pub message: String,
}

/// Energy against uniform per-UE demand. Points run concurrently; rows come
/// out ordered by grid point, then by the order of `variants`.
pub fn sweep(
    cfg: &ScenarioConfig,
    grid: &[f64],
    variants: &[Variant],
    settings: &RunSettings,
) -> Vec<SweepRow> {
    let per_point: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .map(|&q| {
            let point = cfg.clone().with_uniform_demand(q);
            run_chained(&point, variants, settings)
                .into_iter()
                .map(|(v, res)| sweep_row(q, v, &res))
                .collect()
        })
        .collect();
    per_point.into_iter().flatten().collect()
}

fn sweep_row(q: f64, v: Variant, res: &Result<RunOutput, RunError>) -> SweepRow {
    match res {
        Ok(out) => {
            let e = out.solution().energy;
            SweepRow {
                q_bits: q,
                variant: v.name().to_string(),
                status: "ok".to_string(),
                total_j: Some(e.total_j),
                flight_j: Some(e.flight_j),
                comm_j: Some(e.comm_j),
                iterations: Some(out.iterations()),
                message: out.termination().unwrap_or_default(),
            }
        }
        Err(e) => SweepRow {
            q_bits: q,
            variant: v.name().to_string(),
            status: "error".to_string(),
            total_j: None,
            flight_j: None,
            comm_j: None,
            iterations: None,
            message: e.to_string(),
        },
    }
}
