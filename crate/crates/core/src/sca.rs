//! Successive convex approximation of the energy-minimisation problem.
//!
//! Each iteration convexifies the problem around the current plan (the
//! "local point") and hands the result to a [`ConicSolver`]. Units inside
//! the programs: meters, seconds, joules, Mbit and Mbit/s.
//!
//! Per segment `n` the program carries the end waypoint `q[n+1]`, the flight
//! time `T_n`, the path-length slack `delta_n >= ||q[n+1] - q[n]||` and the
//! induced-power slack `y_n`, and minimises
//!
//! `sum_n P0 T_n + P0 delta_b delta_n^2/T_n + delta_p delta_n^3/T_n^2 + Pi y_n
//!  + P_c sum_{n,k} tau_nk`
//!
//! with `T_n^4 / y_n^2 <= y_n^2 + ||q[n+1] - q[n]||^2 / v0^2` replaced by its
//! first-order restriction. Data constraints use `A_nk^2 <= tau_nk R_nk`,
//! with `R` replaced by its tangent plane in the distance slacks (a global
//! under-estimator) and `A^2` by its tangent line.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::conic::{ConicProgram, ConicSolver, LinExpr, SolveStatus, DEFAULT_TOL};
use crate::geometry::Vec2;
use crate::power::{induced_slack, total_energy, EnergyError};
use crate::rate::RateModel;
use crate::scenario::ScenarioConfig;
use crate::trajectory::{
    delivered_bits, initial_plan, validate, PlanError, PlanSolution, ServiceMode, Trajectory,
    Variant, DELIVERY_PAD,
};

const MEGA: f64 = 1e6;

/// Transmit times at or below this (s) are treated as unused.
pub const ACTIVE_TX_S: f64 = 1e-9;

/// Transmit times (s) below this are dropped between iterations.
pub const PRUNE_TX_S: f64 = 1e-6;

/// Matching times below this share of their transmit time are dropped
/// between iterations.
pub const PRUNE_MATCH_SHARE: f64 = 1e-4;

/// Relative tightening of the segment-length and speed limits in each
/// subproblem.
pub const BOUND_SHRINK: f64 = 1e-5;

/// Largest relative data shortfall that [`top_up`] repairs.
pub const DATA_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOptions {
    pub variant: Variant,
    pub max_iters: usize,
    /// Stop once an iteration lowers the energy by less than this fraction.
    pub rel_decrease_threshold: f64,
    /// Overrides the scenario's data margin (bits) when set.
    pub margin_bits: Option<f64>,
    pub solver_tol: f64,
    /// Segment count of the seed plan.
    pub n_segments: Option<usize>,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            variant: Variant::MimuGeneral,
            max_iters: 50,
            rel_decrease_threshold: 1e-3,
            margin_bits: None,
            solver_tol: DEFAULT_TOL,
            n_segments: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("inconsistent local point: {0}")]
    InconsistentLocal(&'static str),
    #[error("the seed plan is not feasible: {0}")]
    InfeasibleSeed(alloc::string::String),
    #[error("first subproblem is {0:?}; the configuration cannot be planned")]
    InfeasibleStart(SolveStatus),
    #[error("rel_decrease_threshold must be positive")]
    BadThreshold,
    #[error("malformed subproblem: {0}")]
    Program(#[from] crate::conic::ProgramError),
}

/// Current plan together with every anchor value used by the convexification.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPoint {
    pub trajectory: Trajectory,
    /// Segment lengths.
    pub lengths: Vec<f64>,
    /// Induced-power slack at equality.
    pub y: Vec<f64>,
    /// `[n][w]` UAV-IRS distances from the segment start.
    pub u: Vec<Vec<f64>>,
    /// `[n][k]` UAV-UE distances from the segment start.
    pub v: Vec<Vec<f64>>,
    /// `[n][k]` joint rates (Mbit/s) for the joint service mode.
    pub rate: Vec<Vec<f64>>,
    /// `[n][w][k]` single-IRS rates (Mbit/s) for matched service.
    pub rate_match: Vec<Vec<Vec<f64>>>,
    /// `[n][k]`: `sqrt(tau R)` under joint service.
    pub a: Vec<Vec<f64>>,
    /// `[n][w][k]`: `sqrt(eta R)` under matched service.
    pub a_match: Vec<Vec<Vec<f64>>>,
}

impl LocalPoint {
    pub fn from_trajectory(
        cfg: &ScenarioConfig,
        model: &RateModel,
        mode: &ServiceMode,
        traj: &Trajectory,
    ) -> Self {
        let n_seg = traj.n_segments();
        let (k_count, w_count) = (cfg.n_ues(), cfg.n_irss());
        let lengths: Vec<f64> = (0..n_seg).map(|n| traj.segment_length(n)).collect();
        let y = (0..n_seg)
            .map(|n| induced_slack(lengths[n], traj.flight_times[n], &cfg.power))
            .collect();
        let u: Vec<Vec<f64>> = (0..n_seg)
            .map(|n| {
                (0..w_count)
                    .map(|w| model.irs_distance(w, traj.waypoints[n]))
                    .collect()
            })
            .collect();
        let v: Vec<Vec<f64>> = (0..n_seg)
            .map(|n| {
                (0..k_count)
                    .map(|k| model.ue_distance(k, traj.waypoints[n]))
                    .collect()
            })
            .collect();
        let mut rate = vec![vec![0.0; k_count]; n_seg];
        let mut a = vec![vec![0.0; k_count]; n_seg];
        let mut rate_match = vec![vec![vec![0.0; k_count]; w_count]; n_seg];
        let mut a_match = vec![vec![vec![0.0; k_count]; w_count]; n_seg];
        for n in 0..n_seg {
            let q = traj.waypoints[n];
            match mode {
                ServiceMode::Joint(active) => {
                    for k in 0..k_count {
                        rate[n][k] = model.rate_at(k, active, q) / MEGA;
                        a[n][k] = (traj.tx_times[n][k].max(0.0) * rate[n][k]).sqrt();
                    }
                }
                ServiceMode::Matched => {
                    for w in 0..w_count {
                        for k in 0..k_count {
                            let r = model.rate_at(k, &[w], q) / MEGA;
                            rate_match[n][w][k] = r;
                            let eta = traj.match_times.as_ref().map_or(0.0, |m| m[n][w][k]);
                            a_match[n][w][k] = (eta.max(0.0) * r).sqrt();
                        }
                    }
                }
            }
        }
        LocalPoint {
            trajectory: traj.clone(),
            lengths,
            y,
            u,
            v,
            rate,
            rate_match,
            a,
            a_match,
        }
    }

    /// Checks the slack definitions against the stored trajectory.
    pub fn check(&self, model: &RateModel) -> Result<(), ScaError> {
        let t = &self.trajectory;
        let n_seg = t.n_segments();
        if t.waypoints.len() != n_seg + 1
            || self.y.len() != n_seg
            || self.u.len() != n_seg
            || self.v.len() != n_seg
        {
            return Err(ScaError::InconsistentLocal("array lengths"));
        }
        let tol = 1e-9;
        for n in 0..n_seg {
            let q = t.waypoints[n];
            if !(self.y[n] >= 0.0) || !t.flight_times[n].is_finite() || t.flight_times[n] < 0.0 {
                return Err(ScaError::InconsistentLocal("flight time or induced slack"));
            }
            for (w, &u) in self.u[n].iter().enumerate() {
                if u < model.irs_distance(w, q) * (1.0 - tol) {
                    return Err(ScaError::InconsistentLocal(
                        "IRS distance slack below distance",
                    ));
                }
            }
            for (k, &v) in self.v[n].iter().enumerate() {
                if v < model.ue_distance(k, q) * (1.0 - tol) {
                    return Err(ScaError::InconsistentLocal(
                        "UE distance slack below distance",
                    ));
                }
                let tau = t.tx_times[n][k];
                if self.a[n][k].powi(2) > tau * self.rate[n][k] * (1.0 + tol) + 1e-300 {
                    return Err(ScaError::InconsistentLocal("A^2 exceeds tau R"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Vars {
    /// Waypoint coordinates; the endpoints are constants.
    q: Vec<[LinExpr; 2]>,
    t: Vec<usize>,
    /// Per segment: `(delta, t1, t2)` with `delta >= |dq|`,
    /// `s t1 >= delta^2 / T`, `s^2 t2 >= delta^3 / T^2`.
    epi: Vec<[usize; 3]>,
    /// Speed `s` dividing the epigraph variables.
    epi_scale: f64,
    tau: Vec<Vec<Option<usize>>>,
    eta: Vec<Vec<Vec<Option<usize>>>>,
}

/// A convexified subproblem and the map back to a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub program: ConicProgram,
    /// The local point written as a program point; feasible by construction.
    pub anchor: Vec<f64>,
    vars: Vars,
}

impl Subproblem {
    /// Trajectory encoded by a program point.
    pub fn trajectory(&self, x: &[f64]) -> Trajectory {
        let vars = &self.vars;
        let waypoints: Vec<Vec2> = vars
            .q
            .iter()
            .map(|[a, b]| Vec2::new(a.eval(x), b.eval(x)))
            .collect();
        let flight_times: Vec<f64> = vars.t.iter().map(|&i| x[i]).collect();
        let pick = |o: &Option<usize>| o.map_or(0.0, |i| x[i].max(0.0));
        let tx_times: Vec<Vec<f64>> = vars
            .tau
            .iter()
            .map(|row| row.iter().map(pick).collect())
            .collect();
        let mut traj = Trajectory::new(waypoints, flight_times, tx_times);
        if !vars.eta.is_empty() {
            traj.match_times = Some(
                vars.eta
                    .iter()
                    .map(|m| m.iter().map(|row| row.iter().map(pick).collect()).collect())
                    .collect(),
            );
        }
        traj
    }

    /// Moves every segment epigraph variable onto the expression it bounds.
    /// The objective does not increase.
    pub fn polish(&self, x: &mut [f64]) {
        let vars = &self.vars;
        let s = vars.epi_scale;
        for (n, &[delta, t1, t2]) in vars.epi.iter().enumerate() {
            let dx = vars.q[n + 1][0].eval(x) - vars.q[n][0].eval(x);
            let dy = vars.q[n + 1][1].eval(x) - vars.q[n][1].eval(x);
            let (d, t) = (dx.hypot(dy), x[vars.t[n]]);
            x[delta] = d;
            if t > 0.0 {
                x[t1] = d * d / (s * t);
                x[t2] = d * d * d / (s * s * t * t);
            }
        }
    }

    /// Largest relative gap between a segment epigraph variable and the
    /// expression it bounds, at program point `x`.
    pub fn epigraph_gap(&self, x: &[f64]) -> f64 {
        let vars = &self.vars;
        let gap = |v: f64, e: f64| (v - e).abs() / v.abs().max(e.abs()).max(1e-9);
        let mut worst: f64 = 0.0;
        for (n, &[delta, t1, t2]) in vars.epi.iter().enumerate() {
            let dx = vars.q[n + 1][0].eval(x) - vars.q[n][0].eval(x);
            let dy = vars.q[n + 1][1].eval(x) - vars.q[n][1].eval(x);
            let (d, t) = (x[delta], x[vars.t[n]]);
            worst = worst.max(gap(d, dx.hypot(dy)));
            if t > 0.0 {
                let s = vars.epi_scale;
                worst = worst
                    .max(gap(s * x[t1], d * d / t))
                    .max(gap(s * s * x[t2], d * d * d / (t * t)));
            }
        }
        worst
    }
}

struct Builder<'a> {
    prog: ConicProgram,
    anchor: Vec<f64>,
    cfg: &'a ScenarioConfig,
}

impl Builder<'_> {
    fn var(&mut self, lower: Option<f64>, upper: Option<f64>, at: f64) -> usize {
        let i = self.prog.add_var(lower, upper);
        self.anchor.push(at);
        i
    }

    /// Records the anchor of variables created inside epigraph helpers.
    fn sync(&mut self, at: &[(usize, f64)]) {
        self.anchor.resize(self.prog.n_vars(), 0.0);
        for &(i, v) in at {
            self.anchor[i] = v;
        }
    }

    fn dist_slack(&mut self, q: &[LinExpr; 2], node: Vec2, h: f64, at: f64) -> usize {
        let s = self.var(Some(0.0), None, at);
        let dh = self.cfg.uav.altitude_m - h;
        self.prog.add_soc(
            LinExpr::var(s),
            vec![
                q[0].clone().offset(-node.x),
                q[1].clone().offset(-node.y),
                LinExpr::constant(dh),
            ],
        );
        s
    }

    /// `A^2 <= time * Rtilde(dists)`; returns `A`.
    fn rate_pair(
        &mut self,
        time: usize,
        time0: f64,
        a0: f64,
        rate: &crate::rate::AffineRate,
        dists: &[usize],
    ) -> usize {
        let a = self.var(Some(0.0), None, a0);
        let r0 = if time0 > 0.0 { a0 * a0 / time0 } else { 0.0 };
        let t = self
            .prog
            .add_quad_over_lin(LinExpr::var(a), LinExpr::var(time));
        self.sync(&[(t, r0)]);
        let mut rt = LinExpr::constant(rate.offset() / MEGA);
        for (&d, g) in dists.iter().zip(&rate.gradient) {
            rt.add_term(d, g / MEGA);
        }
        self.prog.add_le(&LinExpr::var(t), &rt);
        a
    }
}

/// Builds the convexified program around `local`.
pub fn build_subproblem(
    cfg: &ScenarioConfig,
    model: &RateModel,
    mode: &ServiceMode,
    local: &LocalPoint,
) -> Result<Subproblem, ScaError> {
    local.check(model)?;
    let traj = &local.trajectory;
    let n_seg = traj.n_segments();
    let (k_count, w_count) = (cfg.n_ues(), cfg.n_irss());
    let p = &cfg.power;
    let v0_sq = p.v0_mps * p.v0_mps;
    let mut b = Builder {
        prog: ConicProgram::new(),
        anchor: Vec::new(),
        cfg,
    };

    let mut q: Vec<[LinExpr; 2]> = Vec::with_capacity(n_seg + 1);
    for (n, w) in traj.waypoints.iter().enumerate() {
        if n == 0 || n == n_seg {
            q.push([LinExpr::constant(w.x), LinExpr::constant(w.y)]);
        } else {
            let x = b.var(None, None, w.x);
            let y = b.var(None, None, w.y);
            q.push([LinExpr::var(x), LinExpr::var(y)]);
        }
    }

    let mut t_vars = Vec::with_capacity(n_seg);
    let mut epi = Vec::with_capacity(n_seg);
    let s = cfg.uav.v_max_mps;
    for n in 0..n_seg {
        let t0 = traj.flight_times[n];
        let (d0, y0) = (local.lengths[n], local.y[n]);
        let t = b.var(Some(0.0), None, t0);
        let y = b.var(Some(0.0), None, y0);
        t_vars.push(t);
        let diff = [
            q[n + 1][0].clone().minus(&q[n][0]),
            q[n + 1][1].clone().minus(&q[n][1]),
        ];
        let delta = b.prog.add_norm_bound(diff.to_vec());
        b.sync(&[(delta, d0)]);
        let keep = 1.0 - BOUND_SHRINK;
        let seg_max = (cfg.uav.seg_max_m * keep).max(d0);
        let v_max = if t0 > 0.0 {
            (cfg.uav.v_max_mps * keep).max(d0 / t0)
        } else {
            cfg.uav.v_max_mps * keep
        };
        b.prog
            .add_le(&LinExpr::var(delta), &LinExpr::constant(seg_max));
        b.prog
            .add_le(&LinExpr::var(delta), &LinExpr::scaled_var(t, v_max));

        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let t1 = b
            .prog
            .add_quad_over_lin(LinExpr::var(delta), LinExpr::scaled_var(t, s));
        b.sync(&[(t1, ratio(d0 * d0, s * t0))]);
        let t2 = b
            .prog
            .add_cubic_over_square(LinExpr::var(delta), LinExpr::scaled_var(t, s));
        b.sync(&[(t2, ratio(d0 * d0 * d0, s * s * t0 * t0))]);
        epi.push([delta, t1, t2]);

        // y^2 + ||dq||^2 / v0^2 bounded below by its tangent at the anchor.
        let dq0 = traj.waypoints[n + 1] - traj.waypoints[n];
        let bound = LinExpr::scaled_var(y, 2.0 * y0)
            .offset(-y0 * y0 - dq0.dot(dq0) / v0_sq)
            .plus(&diff[0].scale(2.0 * dq0.x / v0_sq))
            .plus(&diff[1].scale(2.0 * dq0.y / v0_sq));
        // The helper's variable is w / c.
        let c = t0.max(1.0);
        let w = b.prog.add_quartic_over_square(
            LinExpr::scaled_var(t, 1.0 / c),
            LinExpr::scaled_var(y, 1.0 / c),
            bound.scale(1.0 / (c * c)),
        );
        b.sync(&[(w, ratio(t0 * t0, y0 * c))]);

        b.prog.add_cost(t, p.p0_w);
        b.prog.add_cost(t1, p.p0_w * p.delta_b() * s);
        b.prog.add_cost(t2, p.delta_p() * s * s);
        b.prog.add_cost(y, p.pi_w);
    }

    let mut tau = vec![vec![None; k_count]; n_seg];
    let mut eta = Vec::new();
    let mut data: Vec<LinExpr> = vec![LinExpr::default(); k_count];
    let active_pair =
        |n: usize, k: usize| traj.tx_times[n][k] > ACTIVE_TX_S && cfg.demand_bits(k) > 0.0;

    match mode {
        ServiceMode::Joint(active) => {
            for n in 0..n_seg {
                let mut u_vars: Vec<Option<usize>> = vec![None; w_count];
                for k in 0..k_count {
                    if !active_pair(n, k) {
                        continue;
                    }
                    let tau0 = traj.tx_times[n][k];
                    let tv = b.var(Some(0.0), None, tau0);
                    tau[n][k] = Some(tv);
                    let ue = &cfg.ues[k];
                    let v = b.dist_slack(&q[n], ue.xy_m, ue.height_m, local.v[n][k]);
                    let mut dists = vec![v];
                    let mut d0 = vec![local.v[n][k]];
                    for &w in active {
                        let u = match u_vars[w] {
                            Some(u) => u,
                            None => {
                                let irs = &cfg.irss[w];
                                let u = b.dist_slack(&q[n], irs.xy_m, irs.height_m, local.u[n][w]);
                                u_vars[w] = Some(u);
                                u
                            }
                        };
                        dists.push(u);
                        d0.push(local.u[n][w]);
                    }
                    let lin = model.taylor_lower_bound(k, active, &d0);
                    let a0 = local.a[n][k];
                    let a = b.rate_pair(tv, tau0, a0, &lin, &dists);
                    data[k].add_term(a, 2.0 * a0);
                    data[k].constant -= a0 * a0;
                }
            }
        }
        ServiceMode::Matched => {
            let m0 = traj
                .match_times
                .as_ref()
                .ok_or(ScaError::InconsistentLocal(
                    "matched service without matching times",
                ))?;
            eta = vec![vec![vec![None; k_count]; w_count]; n_seg];
            for n in 0..n_seg {
                let mut u_vars: Vec<Option<usize>> = vec![None; w_count];
                for k in 0..k_count {
                    if !active_pair(n, k) {
                        continue;
                    }
                    let tau0 = traj.tx_times[n][k];
                    let tv = b.var(Some(0.0), None, tau0);
                    tau[n][k] = Some(tv);
                    let ue = &cfg.ues[k];
                    let v = b.dist_slack(&q[n], ue.xy_m, ue.height_m, local.v[n][k]);
                    let mut eta_sum = LinExpr::default();
                    for w in 0..w_count {
                        let e0 = m0[n][w][k];
                        if !(e0 > ACTIVE_TX_S) {
                            continue;
                        }
                        let ev = b.var(Some(0.0), None, e0);
                        eta[n][w][k] = Some(ev);
                        eta_sum.add_term(ev, 1.0);
                        let u = match u_vars[w] {
                            Some(u) => u,
                            None => {
                                let irs = &cfg.irss[w];
                                let u = b.dist_slack(&q[n], irs.xy_m, irs.height_m, local.u[n][w]);
                                u_vars[w] = Some(u);
                                u
                            }
                        };
                        let lin =
                            model.taylor_lower_bound(k, &[w], &[local.v[n][k], local.u[n][w]]);
                        let a0 = local.a_match[n][w][k];
                        let a = b.rate_pair(ev, e0, a0, &lin, &[v, u]);
                        data[k].add_term(a, 2.0 * a0);
                        data[k].constant -= a0 * a0;
                    }
                    b.prog.add_le(&eta_sum, &LinExpr::var(tv));
                }
            }
        }
    }

    for n in 0..n_seg {
        let mut sum = LinExpr::default();
        for tv in tau[n].iter().flatten() {
            sum.add_term(*tv, 1.0);
            b.prog.add_cost(*tv, cfg.uav.tx_power_w);
        }
        if !sum.terms.is_empty() {
            b.prog.add_le(&sum, &LinExpr::var(t_vars[n]));
        }
    }
    for (k, d) in data.into_iter().enumerate() {
        let need = cfg.demand_bits(k) / MEGA;
        if need > 0.0 {
            // Row normalised to O(1).
            b.prog.add_le(&LinExpr::constant(1.0), &d.scale(1.0 / need));
        }
    }
    b.prog.check()?;
    b.anchor.resize(b.prog.n_vars(), 0.0);
    Ok(Subproblem {
        program: b.prog,
        anchor: b.anchor,
        vars: Vars {
            q,
            t: t_vars,
            epi,
            epi_scale: s,
            tau,
            eta,
        },
    })
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective_j: f64,
    pub max_constraint_violation: f64,
    /// `min_k delivered_k / (Q_k + margin)` over UEs with demand (1 if none).
    pub true_delivered_bits_min_ratio: f64,
    /// Fraction of the solver step taken (1 for a full step, 0 for the seed).
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Neither the solver step nor any shortened step improved the plan.
    NoImprovement,
    Solver(SolveStatus),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaOutcome {
    pub solution: PlanSolution,
    pub trace: Vec<IterationRecord>,
    pub termination: Termination,
    /// Iterations whose solve ended at a numerical limit.
    pub inexact_solves: usize,
}

/// Largest violation of the path, speed, TDMA and matching constraints.
pub fn constraint_violation(traj: &Trajectory, cfg: &ScenarioConfig) -> f64 {
    let mut worst: f64 = 0.0;
    let n_seg = traj.n_segments();
    worst = worst.max(traj.waypoints[0].distance(cfg.uav.start_xy_m));
    worst = worst.max(traj.waypoints[n_seg].distance(cfg.uav.finish_xy_m));
    for n in 0..n_seg {
        let (len, t) = (traj.segment_length(n), traj.flight_times[n]);
        worst = worst
            .max(-t)
            .max(len - cfg.uav.seg_max_m)
            .max(len - cfg.uav.v_max_mps * t);
        let tx: f64 = traj.tx_times[n].iter().sum();
        worst = worst.max(tx - t);
        for (k, &tau) in traj.tx_times[n].iter().enumerate() {
            worst = worst.max(-tau);
            if let Some(m) = &traj.match_times {
                let s: f64 = m[n].iter().map(|row| row[k]).sum();
                worst = worst.max(s - tau);
                worst = m[n].iter().fold(worst, |acc, row| acc.max(-row[k]));
            }
        }
    }
    worst
}

fn min_delivery_ratio(cfg: &ScenarioConfig, got: &[f64]) -> f64 {
    (0..cfg.n_ues())
        .filter(|&k| cfg.demand_bits(k) > 0.0)
        .map(|k| got[k] / cfg.demand_bits(k))
        .fold(1.0, f64::min)
}

/// Whether a plan meets every original constraint under the true rates.
pub fn is_feasible(cfg: &ScenarioConfig, traj: &Trajectory, got: &[f64]) -> bool {
    validate(traj, cfg).is_empty() && (0..cfg.n_ues()).all(|k| got[k] >= cfg.demand_bits(k))
}

fn effective_config(cfg: &ScenarioConfig, opts: &ScaOptions) -> ScenarioConfig {
    let mut c = cfg.clone();
    if let Some(m) = opts.margin_bits {
        c.channel.data_margin_bits = m;
    }
    c
}

fn check_variant(cfg: &ScenarioConfig, variant: Variant) -> Result<(), PlanError> {
    match variant {
        Variant::Heuristic => Err(PlanError::Unsupported {
            variant,
            need: "the heuristic planner, not SCA",
        }),
        Variant::Sisu if cfg.n_irss() != 1 || cfg.n_ues() != 1 => Err(PlanError::Unsupported {
            variant,
            need: "exactly one IRS and one UE",
        }),
        Variant::MimuMatching if cfg.n_irss() == 0 => Err(PlanError::Unsupported {
            variant,
            need: "at least one IRS",
        }),
        _ => Ok(()),
    }
}

/// Runs SCA from the variant's seed plan.
pub fn sca_optimize<S: ConicSolver>(
    cfg: &ScenarioConfig,
    opts: &ScaOptions,
    solver: &S,
) -> Result<ScaOutcome, ScaError> {
    let cfg = effective_config(cfg, opts);
    check_variant(&cfg, opts.variant)?;
    let model = RateModel::new(&cfg);
    let mode = opts.variant.service(cfg.n_irss());
    let seed = initial_plan(&cfg, &model, &mode, opts.n_segments)?;
    run(&cfg, &model, &mode, opts, solver, seed)
}

/// Runs SCA from a given feasible plan. A plan without matching times is
/// given an even split across IRSs when the variant needs one.
pub fn sca_optimize_from<S: ConicSolver>(
    cfg: &ScenarioConfig,
    opts: &ScaOptions,
    solver: &S,
    mut start: Trajectory,
) -> Result<ScaOutcome, ScaError> {
    let cfg = effective_config(cfg, opts);
    check_variant(&cfg, opts.variant)?;
    let model = RateModel::new(&cfg);
    let mode = opts.variant.service(cfg.n_irss());
    match mode {
        ServiceMode::Matched if start.match_times.is_none() => {
            let w_count = cfg.n_irss();
            start.match_times = Some(
                start
                    .tx_times
                    .iter()
                    .map(|row| vec![row.iter().map(|t| t / w_count as f64).collect(); w_count])
                    .collect(),
            );
        }
        ServiceMode::Joint(_) => start.match_times = None,
        _ => {}
    }
    run(&cfg, &model, &mode, opts, solver, start)
}

fn record(
    cfg: &ScenarioConfig,
    model: &RateModel,
    mode: &ServiceMode,
    traj: &Trajectory,
    iter: usize,
    energy: f64,
    step: f64,
) -> IterationRecord {
    let got = delivered_bits(traj, model, mode);
    IterationRecord {
        iter,
        objective_j: energy,
        max_constraint_violation: constraint_violation(traj, cfg),
        true_delivered_bits_min_ratio: min_delivery_ratio(cfg, &got),
        step,
    }
}

/// Stretches the transmit (and matching) times of every UE that misses its
/// demand by at most [`DATA_REL_TOL`], then lengthens segments to fit.
fn top_up(traj: &mut Trajectory, cfg: &ScenarioConfig, got: &[f64]) {
    for k in 0..cfg.n_ues() {
        let need = cfg.demand_bits(k);
        if got[k] >= need || got[k] < need * (1.0 - DATA_REL_TOL) {
            continue;
        }
        let f = need / got[k] * (1.0 + DELIVERY_PAD);
        for n in 0..traj.n_segments() {
            traj.tx_times[n][k] *= f;
            if let Some(m) = traj.match_times.as_mut() {
                for row in m[n].iter_mut() {
                    row[k] *= f;
                }
            }
        }
    }
    tidy(traj, cfg);
}

/// Cleans solver round-off by only ever lengthening times: each transmit
/// time covers its matching times, and each flight time covers its transmit
/// times and the time its length needs at maximum speed.
fn tidy(traj: &mut Trajectory, cfg: &ScenarioConfig) {
    for n in 0..traj.n_segments() {
        if let Some(m) = &traj.match_times {
            for k in 0..traj.tx_times[n].len() {
                let s: f64 = m[n].iter().map(|row| row[k]).sum();
                traj.tx_times[n][k] = traj.tx_times[n][k].max(s);
            }
        }
        let tx: f64 = traj.tx_times[n].iter().sum();
        let floor = traj.segment_length(n) / cfg.uav.v_max_mps;
        traj.flight_times[n] = traj.flight_times[n].max(floor).max(tx).max(0.0);
    }
}

/// Zeroes transmit times below [`PRUNE_TX_S`] and matching times below
/// [`PRUNE_MATCH_SHARE`] of their transmit time.
fn prune(traj: &Trajectory) -> Trajectory {
    let mut out = traj.clone();
    for (n, row) in out.tx_times.iter_mut().enumerate() {
        for (k, tau) in row.iter_mut().enumerate() {
            if *tau < PRUNE_TX_S {
                *tau = 0.0;
            }
            if let Some(m) = out.match_times.as_mut() {
                for eta in m[n].iter_mut() {
                    if eta[k] < PRUNE_MATCH_SHARE * *tau || *tau == 0.0 {
                        eta[k] = 0.0;
                    }
                }
            }
        }
    }
    out
}

fn blend(a: &Trajectory, b: &Trajectory, s: f64) -> Trajectory {
    let mix = |x: f64, y: f64| x + s * (y - x);
    let mut out = a.clone();
    for (o, (p, q)) in out
        .waypoints
        .iter_mut()
        .zip(a.waypoints.iter().zip(&b.waypoints))
    {
        *o = p.lerp(*q, s);
    }
    for (o, (&p, &q)) in out
        .flight_times
        .iter_mut()
        .zip(a.flight_times.iter().zip(&b.flight_times))
    {
        *o = mix(p, q);
    }
    for (orow, (prow, qrow)) in out
        .tx_times
        .iter_mut()
        .zip(a.tx_times.iter().zip(&b.tx_times))
    {
        for (o, (&p, &q)) in orow.iter_mut().zip(prow.iter().zip(qrow)) {
            *o = mix(p, q);
        }
    }
    if let (Some(om), Some(pm), Some(qm)) = (
        out.match_times.as_mut(),
        a.match_times.as_ref(),
        b.match_times.as_ref(),
    ) {
        for (on, (pn, qn)) in om.iter_mut().zip(pm.iter().zip(qm)) {
            for (ow, (pw, qw)) in on.iter_mut().zip(pn.iter().zip(qn)) {
                for (o, (&p, &q)) in ow.iter_mut().zip(pw.iter().zip(qw)) {
                    *o = mix(p, q);
                }
            }
        }
    }
    out
}

fn run<S: ConicSolver>(
    cfg: &ScenarioConfig,
    model: &RateModel,
    mode: &ServiceMode,
    opts: &ScaOptions,
    solver: &S,
    seed: Trajectory,
) -> Result<ScaOutcome, ScaError> {
    if !(opts.rel_decrease_threshold > 0.0) {
        return Err(ScaError::BadThreshold);
    }
    let p_c = cfg.uav.tx_power_w;
    let mut seed = seed;
    let got = delivered_bits(&seed, model, mode);
    top_up(&mut seed, cfg, &got);
    let got = delivered_bits(&seed, model, mode);
    if !is_feasible(cfg, &seed, &got) {
        let v = validate(&seed, cfg);
        let why = match v.first() {
            Some(v) => alloc::format!("{v}"),
            None => alloc::string::String::from("data constraint not met"),
        };
        return Err(ScaError::InfeasibleSeed(why));
    }
    let mut current = seed;
    let mut energy = total_energy(&current, p_c, &cfg.power)?.total_j;
    let mut trace = vec![record(cfg, model, mode, &current, 0, energy, 0.0)];
    let mut termination = Termination::MaxIterations;
    let mut inexact = 0;

    for iter in 1..=opts.max_iters {
        let pruned = prune(&current);
        if pruned != current && is_feasible(cfg, &pruned, &delivered_bits(&pruned, model, mode)) {
            if let Ok(e) = total_energy(&pruned, p_c, &cfg.power) {
                if e.total_j <= energy {
                    current = pruned;
                    energy = e.total_j;
                }
            }
        }
        let local = LocalPoint::from_trajectory(cfg, model, mode, &current);
        let sub = build_subproblem(cfg, model, mode, &local)?;
        let report = solver.solve(&sub.program, opts.solver_tol);
        match report.status {
            SolveStatus::Optimal => {}
            SolveStatus::NumericalLimit => inexact += 1,
            status if iter == 1 => return Err(ScaError::InfeasibleStart(status)),
            status => {
                termination = Termination::Solver(status);
                break;
            }
        }
        let mut x = report.x;
        sub.polish(&mut x);
        let mut candidate = sub.trajectory(&x);
        tidy(&mut candidate, cfg);

        let mut accepted = None;
        let mut step = 1.0;
        for _ in 0..8 {
            let mut trial = if step == 1.0 {
                candidate.clone()
            } else {
                blend(&current, &candidate, step)
            };
            let got = delivered_bits(&trial, model, mode);
            top_up(&mut trial, cfg, &got);
            let got = delivered_bits(&trial, model, mode);
            if is_feasible(cfg, &trial, &got) {
                if let Ok(e) = total_energy(&trial, p_c, &cfg.power) {
                    if e.total_j <= energy + 1e-9 * energy.abs().max(1.0) {
                        accepted = Some((trial, e.total_j));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        let Some((next, e_next)) = accepted else {
            termination = if report.status == SolveStatus::Optimal {
                Termination::NoImprovement
            } else {
                Termination::Solver(report.status)
            };
            break;
        };
        let decrease = (energy - e_next) / energy.abs().max(f64::MIN_POSITIVE);
        current = next;
        energy = e_next;
        trace.push(record(cfg, model, mode, &current, iter, energy, step));
        if decrease < opts.rel_decrease_threshold {
            termination = Termination::Converged;
            break;
        }
    }

    let breakdown = total_energy(&current, p_c, &cfg.power)?;
    let delivered = delivered_bits(&current, model, mode);
    Ok(ScaOutcome {
        solution: PlanSolution {
            variant: opts.variant,
            trajectory: current,
            energy: breakdown,
            delivered_bits: delivered,
            convergence: trace.iter().map(|r| r.objective_j).collect(),
        },
        trace,
        termination,
        inexact_solves: inexact,
    })
}

/// IRS chosen for one transmission of a matched plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchChoice {
    /// IRS with the highest expected rate (lowest index on ties).
    pub irs: usize,
    /// Share of the transmit time placed on that IRS.
    pub mass: f64,
    /// Time is split across IRSs whose rates are not tied.
    pub degenerate: bool,
}

/// Per `(n, k)` IRS choice of a matched plan; `None` where nothing is sent.
pub fn matching_extraction(
    cfg: &ScenarioConfig,
    traj: &Trajectory,
) -> Vec<Vec<Option<MatchChoice>>> {
    let model = RateModel::new(cfg);
    let w_count = cfg.n_irss();
    let zero = vec![vec![vec![0.0; cfg.n_ues()]; w_count]; traj.n_segments()];
    let eta = traj.match_times.as_ref().unwrap_or(&zero);
    (0..traj.n_segments())
        .map(|n| {
            (0..cfg.n_ues())
                .map(|k| {
                    let tau = traj.tx_times[n][k];
                    if !(tau > ACTIVE_TX_S) || w_count == 0 {
                        return None;
                    }
                    let rates: Vec<f64> = (0..w_count)
                        .map(|w| model.rate_at(k, &[w], traj.waypoints[n]))
                        .collect();
                    let best = (0..w_count).fold(0, |b, w| if rates[w] > rates[b] { w } else { b });
                    let tied: f64 = (0..w_count)
                        .filter(|&w| rates[w] >= rates[best] * (1.0 - 1e-12))
                        .map(|w| eta[n][w][k])
                        .sum();
                    let mass = eta[n][best][k] / tau;
                    Some(MatchChoice {
                        irs: best,
                        mass,
                        degenerate: tied / tau < 1.0 - 1e-3,
                    })
                })
                .collect()
        })
        .collect()
}
