//! Discretised UAV path with its timing and transmission schedule.
//!
//! Segment `n` runs from waypoint `n` to waypoint `n + 1`; the channel is
//! treated as constant over a segment and evaluated at its first waypoint.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::Vec2;
use crate::power::{energy_efficient_speed, EnergyBreakdown};
use crate::rate::RateModel;
use crate::scenario::ScenarioConfig;

/// Absolute slack used by [`validate`].
pub const VALIDATION_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Trajectory {
    /// `N + 1` waypoints, first at the start and last at the finish.
    pub waypoints: Vec<Vec2>,
    /// Flight time of each of the `N` segments.
    pub flight_times: Vec<f64>,
    /// `tx_times[n][k]`: time spent transmitting to UE `k` during segment `n`.
    pub tx_times: Vec<Vec<f64>>,
    /// `match_times[n][w][k]`: part of `tx_times[n][k]` served through IRS `w`.
    pub match_times: Option<Vec<Vec<Vec<f64>>>>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec2>, flight_times: Vec<f64>, tx_times: Vec<Vec<f64>>) -> Self {
        Trajectory {
            waypoints,
            flight_times,
            tx_times,
            match_times: None,
        }
    }

    pub fn n_segments(&self) -> usize {
        self.flight_times.len()
    }

    pub fn segment_length(&self, n: usize) -> f64 {
        self.waypoints[n].distance(self.waypoints[n + 1])
    }

    /// Speed on segment `n`; zero for a segment with no flight time.
    pub fn speed(&self, n: usize) -> f64 {
        let t = self.flight_times[n];
        if t > 0.0 {
            self.segment_length(n) / t
        } else {
            0.0
        }
    }

    pub fn total_time(&self) -> f64 {
        self.flight_times.iter().sum()
    }

    pub fn path_length(&self) -> f64 {
        (0..self.n_segments()).map(|n| self.segment_length(n)).sum()
    }
}

/// How transmissions are turned into delivered bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServiceMode {
    /// Every IRS in the list serves whichever UE is being scheduled.
    Joint(Vec<usize>),
    /// Each transmission uses a single IRS, given by the matching times.
    Matched,
}

/// Planning variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Single IRS, single UE; served by the general builder.
    Sisu,
    MimuGeneral,
    MimuMatching,
    NoIrs,
    Heuristic,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Sisu,
        Variant::MimuGeneral,
        Variant::MimuMatching,
        Variant::NoIrs,
        Variant::Heuristic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sisu => "sisu",
            Variant::MimuGeneral => "mimu-general",
            Variant::MimuMatching => "mimu-matching",
            Variant::NoIrs => "no-irs",
            Variant::Heuristic => "heuristic",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.iter().copied().find(|v| v.name() == s)
    }

    /// Service mode for a scenario with `n_irss` IRSs.
    pub fn service(self, n_irss: usize) -> ServiceMode {
        match self {
            Variant::Sisu | Variant::MimuGeneral => ServiceMode::Joint((0..n_irss).collect()),
            Variant::NoIrs => ServiceMode::Joint(Vec::new()),
            Variant::MimuMatching | Variant::Heuristic if n_irss > 0 => ServiceMode::Matched,
            Variant::MimuMatching | Variant::Heuristic => ServiceMode::Joint(Vec::new()),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finished plan.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PlanSolution {
    pub variant: Variant,
    pub trajectory: Trajectory,
    pub energy: EnergyBreakdown,
    /// Bits delivered to each UE under the expected-rate model.
    pub delivered_bits: Vec<f64>,
    /// Mission energy after each iteration (the seed plan first).
    pub convergence: Vec<f64>,
}

/// Bits delivered to every UE.
pub fn delivered_bits(traj: &Trajectory, model: &RateModel, mode: &ServiceMode) -> Vec<f64> {
    let k_count = model.n_ues();
    let mut out = vec![0.0; k_count];
    for n in 0..traj.n_segments() {
        let q = traj.waypoints[n];
        for (k, bits) in out.iter_mut().enumerate() {
            match mode {
                ServiceMode::Joint(active) => {
                    let tau = traj.tx_times[n][k];
                    if tau > 0.0 {
                        *bits += tau * model.rate_at(k, active, q);
                    }
                }
                ServiceMode::Matched => {
                    if let Some(eta) = &traj.match_times {
                        for (w, row) in eta[n].iter().enumerate() {
                            if row[k] > 0.0 {
                                *bits += row[k] * model.rate_at(k, &[w], q);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// A broken trajectory invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    Start,
    Finish,
    NegativeFlightTime {
        segment: usize,
    },
    SegmentLength {
        segment: usize,
        length_m: f64,
    },
    SpeedLimit {
        segment: usize,
        speed_mps: f64,
    },
    NegativeTxTime {
        segment: usize,
        ue: usize,
    },
    Tdma {
        segment: usize,
        tx_sum_s: f64,
        flight_s: f64,
    },
    NegativeMatchTime {
        segment: usize,
        irs: usize,
        ue: usize,
    },
    Matching {
        segment: usize,
        ue: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "shape: {s}"),
            Violation::Start => f.write_str("first waypoint is not the start location"),
            Violation::Finish => f.write_str("last waypoint is not the finish location"),
            Violation::NegativeFlightTime { segment } => write!(f, "segment {segment}: negative flight time"),
            Violation::SegmentLength { segment, length_m } => {
                write!(f, "segment {segment}: segment-length constraint violated ({length_m} m)")
            }
            Violation::SpeedLimit { segment, speed_mps } => {
                write!(f, "segment {segment}: speed limit violated ({speed_mps} m/s)")
            }
            Violation::NegativeTxTime { segment, ue } => {
                write!(f, "segment {segment}: negative transmit time for UE {ue}")
            }
            Violation::Tdma { segment, tx_sum_s, flight_s } => write!(
                f,
                "segment {segment}: TDMA constraint violated (transmit {tx_sum_s} s > flight {flight_s} s)"
            ),
            Violation::NegativeMatchTime { segment, irs, ue } => {
                write!(f, "segment {segment}: negative matching time for IRS {irs}, UE {ue}")
            }
            Violation::Matching { segment, ue } => {
                write!(f, "segment {segment}: matching times exceed transmit time for UE {ue}")
            }
        }
    }
}

/// Every invariant violated by `traj` (empty when it is valid), within
/// [`VALIDATION_SLACK`].
pub fn validate(traj: &Trajectory, cfg: &ScenarioConfig) -> Vec<Violation> {
    use alloc::format;
    let tol = VALIDATION_SLACK;
    let n_seg = traj.n_segments();
    let k_count = cfg.n_ues();
    let mut out = Vec::new();
    if traj.waypoints.len() != n_seg + 1 || n_seg == 0 {
        out.push(Violation::Shape(format!(
            "{} waypoints for {} segments",
            traj.waypoints.len(),
            n_seg
        )));
        return out;
    }
    if traj.tx_times.len() != n_seg || traj.tx_times.iter().any(|r| r.len() != k_count) {
        out.push(Violation::Shape(format!(
            "transmit times must be {n_seg} x {k_count}"
        )));
        return out;
    }
    if let Some(eta) = &traj.match_times {
        let w_count = cfg.n_irss();
        if eta.len() != n_seg
            || eta
                .iter()
                .any(|r| r.len() != w_count || r.iter().any(|c| c.len() != k_count))
        {
            out.push(Violation::Shape(format!(
                "matching times must be {n_seg} x {w_count} x {k_count}"
            )));
            return out;
        }
    }
    if traj.waypoints[0].distance(cfg.uav.start_xy_m) > tol {
        out.push(Violation::Start);
    }
    if traj.waypoints[n_seg].distance(cfg.uav.finish_xy_m) > tol {
        out.push(Violation::Finish);
    }
    for n in 0..n_seg {
        let t = traj.flight_times[n];
        let len = traj.segment_length(n);
        if !(t >= -tol) {
            out.push(Violation::NegativeFlightTime { segment: n });
        }
        if len > cfg.uav.seg_max_m + tol {
            out.push(Violation::SegmentLength {
                segment: n,
                length_m: len,
            });
        }
        if len > cfg.uav.v_max_mps * t.max(0.0) + tol {
            out.push(Violation::SpeedLimit {
                segment: n,
                speed_mps: if t > 0.0 { len / t } else { f64::INFINITY },
            });
        }
        let mut tx_sum = 0.0;
        for (k, &tau) in traj.tx_times[n].iter().enumerate() {
            if !(tau >= -tol) {
                out.push(Violation::NegativeTxTime { segment: n, ue: k });
            }
            tx_sum += tau;
        }
        if tx_sum > t + tol {
            out.push(Violation::Tdma {
                segment: n,
                tx_sum_s: tx_sum,
                flight_s: t,
            });
        }
        if let Some(eta) = &traj.match_times {
            for k in 0..k_count {
                let mut sum = 0.0;
                for (w, row) in eta[n].iter().enumerate() {
                    if !(row[k] >= -tol) {
                        out.push(Violation::NegativeMatchTime {
                            segment: n,
                            irs: w,
                            ue: k,
                        });
                    }
                    sum += row[k];
                }
                if sum > traj.tx_times[n][k] + tol {
                    out.push(Violation::Matching { segment: n, ue: k });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("UE {ue} cannot be served: expected rate above it is zero")]
    Unservable { ue: usize },
    #[error("invalid scenario: {0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("variant {variant} needs {need}")]
    Unsupported {
        variant: Variant,
        need: &'static str,
    },
    #[error(transparent)]
    Energy(#[from] crate::power::EnergyError),
}

/// Order in which to visit UEs: repeatedly the nearest unvisited one.
pub fn nearest_neighbor_order(start: Vec2, points: &[Vec2]) -> Vec<usize> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut order = Vec::with_capacity(points.len());
    let mut at = start;
    while !left.is_empty() {
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| {
                at.distance(points[*a.1])
                    .total_cmp(&at.distance(points[*b.1]))
            })
            .expect("non-empty");
        let next = left.remove(pos);
        at = points[next];
        order.push(next);
    }
    order
}

/// Rate used to size the schedule of UE `k` at `q` under `mode`. Matched
/// service splits time evenly across IRSs and uses the average single-IRS
/// rate.
fn schedule_rate(model: &RateModel, mode: &ServiceMode, k: usize, q: Vec2) -> f64 {
    match mode {
        ServiceMode::Joint(active) => model.rate_at(k, active, q),
        ServiceMode::Matched => {
            let w_count = model.n_irss();
            (0..w_count).map(|w| model.rate_at(k, &[w], q)).sum::<f64>() / w_count as f64
        }
    }
}

/// Default segment count: 1.5 times the seed path length over the
/// maximum segment length.
pub fn default_segment_count(path_length_m: f64, seg_max_m: f64) -> usize {
    (1.5 * path_length_m / seg_max_m).ceil() as usize
}

/// Shortest hover given to a seed-plan hover slot.
pub const MIN_HOVER_S: f64 = 1e-2;

/// Relative padding on computed service times.
pub const DELIVERY_PAD: f64 = 1e-12;

/// Polyline flight at the energy-efficient speed (capped at the maximum
/// speed) through `corners`.
///
/// Leg `j` (from corner `j` to `j + 1`) is split into equal segments, and
/// its flight time is shared evenly by the UEs in `leg_serve[j]`. A hover
/// segment is inserted at every corner with `hover_ue[j] = Some(k)`, long
/// enough to deliver whatever UE `k` still lacks at `rate(k, corner)` (and at
/// least `min_hover_s`). `n_moving` fixes the number of moving segments;
/// `None` uses the fewest allowed by the segment-length limit.
pub fn polyline_schedule(
    cfg: &ScenarioConfig,
    corners: &[Vec2],
    hover_ue: &[Option<usize>],
    leg_serve: &[Vec<usize>],
    n_moving: Option<usize>,
    min_hover_s: f64,
    rate: &dyn Fn(usize, Vec2) -> f64,
) -> Result<Trajectory, PlanError> {
    let k_count = cfg.n_ues();
    let legs: Vec<f64> = corners.windows(2).map(|w| w[0].distance(w[1])).collect();
    let total: f64 = legs.iter().sum();
    let seg_max = cfg.uav.seg_max_m;

    let mut per_leg: Vec<usize> = legs.iter().map(|l| (l / seg_max).ceil() as usize).collect();
    let min_moving: usize = per_leg.iter().sum();
    let mut spare = n_moving.unwrap_or(0).saturating_sub(min_moving);
    if total > 0.0 && spare > 0 {
        // Largest-remainder split of the extra segments across legs.
        let shares: Vec<f64> = legs.iter().map(|l| spare as f64 * l / total).collect();
        for (c, s) in per_leg.iter_mut().zip(&shares) {
            let whole = s.floor() as usize;
            *c += whole;
            spare -= whole;
        }
        let mut rema: Vec<(usize, f64)> =
            shares.iter().map(|s| s - s.floor()).enumerate().collect();
        rema.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for (leg, _) in rema.into_iter().take(spare) {
            per_leg[leg] += 1;
        }
        spare = 0;
    }

    let speed = energy_efficient_speed(&cfg.power).min(cfg.uav.v_max_mps);
    let mut waypoints = vec![corners[0]];
    let mut flight_times = Vec::new();
    let mut tx_times = Vec::new();
    let mut hovers = Vec::new();
    let mut push_hover =
        |k: usize, at: Vec2, wp: &mut Vec<Vec2>, ft: &mut Vec<f64>, tx: &mut Vec<Vec<f64>>| {
            hovers.push((ft.len(), k, at));
            wp.push(at);
            ft.push(0.0);
            tx.push(vec![0.0; k_count]);
        };
    if let Some(k) = hover_ue[0] {
        push_hover(
            k,
            corners[0],
            &mut waypoints,
            &mut flight_times,
            &mut tx_times,
        );
    }
    for (leg, &count) in per_leg.iter().enumerate() {
        let (a, b) = (corners[leg], corners[leg + 1]);
        for i in 0..count {
            let t = legs[leg] / count as f64 / speed;
            waypoints.push(a.lerp(b, (i + 1) as f64 / count as f64));
            flight_times.push(t);
            let mut row = vec![0.0; k_count];
            for &k in &leg_serve[leg] {
                row[k] = t / leg_serve[leg].len() as f64;
            }
            tx_times.push(row);
        }
        if let Some(k) = hover_ue[leg + 1] {
            push_hover(k, b, &mut waypoints, &mut flight_times, &mut tx_times);
        }
    }
    // Degenerate geometry (everything at one point) leaves spare segments.
    for _ in 0..spare {
        waypoints.push(*corners.last().expect("at least one corner"));
        flight_times.push(min_hover_s);
        tx_times.push(vec![0.0; k_count]);
    }

    let mut traj = Trajectory::new(waypoints, flight_times, tx_times);
    let mut got = vec![0.0; k_count];
    for n in 0..traj.n_segments() {
        for (k, bits) in got.iter_mut().enumerate() {
            let tau = traj.tx_times[n][k];
            if tau > 0.0 {
                *bits += tau * rate(k, traj.waypoints[n]);
            }
        }
    }
    for (slot, k, at) in hovers {
        let r = rate(k, at);
        let residual = (cfg.demand_bits(k) - got[k]).max(0.0);
        if residual > 0.0 && !(r > 0.0) {
            return Err(PlanError::Unservable { ue: k });
        }
        let t = if residual > 0.0 {
            residual / r * (1.0 + DELIVERY_PAD)
        } else {
            0.0
        };
        got[k] += t * r;
        traj.flight_times[slot] = t.max(min_hover_s);
        traj.tx_times[slot][k] = t.max(min_hover_s);
    }
    Ok(traj)
}

/// Seed plan for a service mode.
///
/// The straight flight from start to finish at the energy-efficient speed,
/// with its time shared evenly by UEs that have demand, is used when it
/// delivers every demand. Otherwise the UAV detours over each UE with
/// demand (nearest-neighbor order), sharing moving time the same way, and
/// hovers above each one for the remainder of its demand.
///
/// The plan is feasible for the requested service mode by construction.
/// Under matched service the time is split evenly across IRSs.
pub fn initial_plan(
    cfg: &ScenarioConfig,
    model: &RateModel,
    mode: &ServiceMode,
    n_segments_hint: Option<usize>,
) -> Result<Trajectory, PlanError> {
    cfg.validate()?;
    let k_count = cfg.n_ues();
    let demanding: Vec<usize> = (0..k_count).filter(|&k| cfg.demand_bits(k) > 0.0).collect();
    let rate = |k: usize, q: Vec2| schedule_rate(model, mode, k, q);
    let (start, finish) = (cfg.uav.start_xy_m, cfg.uav.finish_xy_m);

    let straight_len = start.distance(finish);
    let n =
        n_segments_hint.unwrap_or_else(|| default_segment_count(straight_len, cfg.uav.seg_max_m));
    let straight = polyline_schedule(
        cfg,
        &[start, finish],
        &[None, None],
        core::slice::from_ref(&demanding),
        Some(n),
        MIN_HOVER_S,
        &rate,
    )?;
    let got = delivered_bits_with(&straight, model, mode, k_count);
    let mut traj = if demanding.iter().all(|&k| got[k] >= cfg.demand_bits(k)) {
        straight
    } else {
        let pts: Vec<Vec2> = demanding.iter().map(|&k| cfg.ues[k].xy_m).collect();
        let order: Vec<usize> = nearest_neighbor_order(start, &pts)
            .into_iter()
            .map(|i| demanding[i])
            .collect();
        let mut corners = vec![start];
        corners.extend(order.iter().map(|&k| cfg.ues[k].xy_m));
        corners.push(finish);
        let mut hover_ue = vec![None];
        hover_ue.extend(order.iter().map(|&k| Some(k)));
        hover_ue.push(None);
        let serve = vec![demanding.clone(); corners.len() - 1];
        let length: f64 = corners.windows(2).map(|w| w[0].distance(w[1])).sum();
        let n = n_segments_hint.unwrap_or_else(|| default_segment_count(length, cfg.uav.seg_max_m));
        polyline_schedule(
            cfg,
            &corners,
            &hover_ue,
            &serve,
            Some(n.saturating_sub(order.len())),
            MIN_HOVER_S,
            &rate,
        )?
    };
    if *mode == ServiceMode::Matched {
        let w_count = cfg.n_irss();
        traj.match_times = Some(
            traj.tx_times
                .iter()
                .map(|row| vec![row.iter().map(|tau| tau / w_count as f64).collect(); w_count])
                .collect(),
        );
    }
    Ok(traj)
}

fn delivered_bits_with(
    traj: &Trajectory,
    model: &RateModel,
    mode: &ServiceMode,
    k_count: usize,
) -> Vec<f64> {
    let mut out = vec![0.0; k_count];
    for n in 0..traj.n_segments() {
        for (k, bits) in out.iter_mut().enumerate() {
            let tau = traj.tx_times[n][k];
            if tau > 0.0 {
                *bits += tau * schedule_rate(model, mode, k, traj.waypoints[n]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;
    use approx::assert_relative_eq;

    fn single_ue(bits: f64) -> ScenarioConfig {
        let mut cfg = default_scenario();
        cfg.ues.truncate(1);
        cfg.irss.truncate(1);
        cfg.ues[0].data_bits = bits;
        cfg
    }

    #[test]
    fn zero_demand_flies_straight() {
        let cfg = single_ue(0.0);
        let model = RateModel::new(&cfg);
        let traj = initial_plan(&cfg, &model, &ServiceMode::Joint(vec![0]), None).unwrap();
        assert!(validate(&traj, &cfg).is_empty());
        assert!(traj.tx_times.iter().flatten().all(|&t| t == 0.0));
        let expect = cfg.uav.start_xy_m.distance(cfg.uav.finish_xy_m);
        assert_relative_eq!(traj.path_length(), expect, max_relative = 1e-12);
        assert_eq!(traj.n_segments(), default_segment_count(expect, 1.0));
        let ve = energy_efficient_speed(&cfg.power);
        for n in 0..traj.n_segments() {
            assert_relative_eq!(traj.speed(n), ve, max_relative = 1e-12);
        }
    }

    #[test]
    fn small_demand_is_served_on_the_straight_line() {
        let cfg = single_ue(1e6);
        let model = RateModel::new(&cfg);
        let mode = ServiceMode::Joint(vec![0]);
        let traj = initial_plan(&cfg, &model, &mode, None).unwrap();
        assert!(traj.waypoints.iter().all(|w| (w.x - w.y).abs() < 1e-9));
        assert!(delivered_bits(&traj, &model, &mode)[0] >= 1e6);
    }

    #[test]
    fn hover_time_covers_the_residual() {
        let cfg = single_ue(5e9);
        let ue = cfg.ues[0].xy_m;
        let model = RateModel::new(&cfg);
        let mode = ServiceMode::Joint(vec![0]);
        let traj = initial_plan(&cfg, &model, &mode, None).unwrap();
        assert!(validate(&traj, &cfg).is_empty());
        let hover = (0..traj.n_segments())
            .find(|&n| traj.segment_length(n) == 0.0)
            .unwrap();
        assert_eq!(traj.waypoints[hover], ue);
        let en_route: f64 = (0..traj.n_segments())
            .filter(|&n| n != hover)
            .map(|n| traj.tx_times[n][0] * model.rate_at(0, &[0], traj.waypoints[n]))
            .sum();
        let overhead = model.rate_at(0, &[0], cfg.ues[0].xy_m);
        assert_relative_eq!(
            traj.flight_times[hover],
            (5e9 - en_route) / overhead * (1.0 + DELIVERY_PAD),
            max_relative = 1e-12
        );
        let got = delivered_bits(&traj, &model, &mode);
        assert_relative_eq!(got[0], 5e9, max_relative = 1e-12);
    }

    #[test]
    fn every_mode_is_feasible() {
        let cfg = default_scenario();
        let model = RateModel::new(&cfg);
        for v in [Variant::MimuGeneral, Variant::MimuMatching, Variant::NoIrs] {
            let mode = v.service(cfg.n_irss());
            let traj = initial_plan(&cfg, &model, &mode, None).unwrap();
            assert!(validate(&traj, &cfg).is_empty(), "{v}");
            for (k, bits) in delivered_bits(&traj, &model, &mode).iter().enumerate() {
                assert!(*bits >= cfg.demand_bits(k) * (1.0 - 1e-12), "{v} UE {k}");
            }
        }
    }

    #[test]
    fn validate_names_constraints() {
        let cfg = default_scenario();
        let model = RateModel::new(&cfg);
        let mut traj = initial_plan(&cfg, &model, &ServiceMode::Joint(vec![0, 1]), None).unwrap();
        let n = 3;
        let d = traj.waypoints[n + 1] - traj.waypoints[n];
        let stretch = d * (2.0 * cfg.uav.seg_max_m / d.norm());
        for w in traj.waypoints[n + 1..].iter_mut() {
            *w = *w + stretch - d;
        }
        let v = validate(&traj, &cfg);
        assert!(
            v.iter()
                .any(|x| matches!(x, Violation::SegmentLength { segment: 3, .. })),
            "{v:?}"
        );

        let mut traj = initial_plan(&cfg, &model, &ServiceMode::Joint(vec![0, 1]), None).unwrap();
        traj.tx_times[5][0] = traj.flight_times[5] * 2.0;
        let v = validate(&traj, &cfg);
        assert!(v
            .iter()
            .any(|x| matches!(x, Violation::Tdma { segment: 5, .. })));
        assert!(alloc::format!("{}", v[0]).contains("TDMA"));
    }

    #[test]
    fn segment_hint_is_respected_when_large_enough() {
        let cfg = default_scenario();
        let model = RateModel::new(&cfg);
        let traj = initial_plan(&cfg, &model, &ServiceMode::Joint(vec![]), Some(400)).unwrap();
        assert_eq!(traj.n_segments(), 400);
        let traj = initial_plan(&cfg, &model, &ServiceMode::Joint(vec![]), Some(10)).unwrap();
        assert!(traj.n_segments() > 10);
        assert!(validate(&traj, &cfg).is_empty());
    }

    #[test]
    fn nearest_neighbor() {
        let pts = [
            Vec2::new(10.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(5.0, 0.0),
        ];
        assert_eq!(nearest_neighbor_order(Vec2::ZERO, &pts), vec![1, 2, 0]);
    }
}
