//! Low-complexity planner.
//!
//! Each UE is paired with its nearest IRS and served from a fixed transmit
//! point between the best-rate point of that pair and the straight start to
//! finish line. The closer the straight flight comes to meeting a UE's demand
//! on its own, the closer its transmit point sits to that line. The transmit
//! points are visited in shortest-path order at the energy-efficient speed,
//! with a hover at each for whatever data is still missing. No conic solves
//! are involved.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::Vec2;
use crate::power::total_energy;
use crate::rate::RateModel;
use crate::scenario::ScenarioConfig;
use crate::trajectory::{
    delivered_bits, polyline_schedule, validate, PlanError, PlanSolution, Trajectory, Variant,
};

/// Grid step (m) of the best-rate search.
pub const SEARCH_STEP_M: f64 = 0.1;

/// Largest point count solved exactly by [`open_path_tsp`].
pub const EXACT_TSP_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicPlan {
    /// IRS paired with each UE (`None` without IRSs).
    pub pairing: Vec<Option<usize>>,
    pub q_hat: Vec<Vec2>,
    pub q_bar: Vec<Vec2>,
    /// Share of each demand met by the straight flight; infinite for zero demand.
    pub fractions: Vec<f64>,
    pub transmit_points: Vec<Vec2>,
    /// Visit order of the transmit points (empty for the straight flight).
    pub order: Vec<usize>,
    pub solution: PlanSolution,
}

/// Nearest IRS (3-D distance) for every UE; ties go to the lowest index.
pub fn pair_ues(cfg: &ScenarioConfig) -> Vec<Option<usize>> {
    (0..cfg.n_ues())
        .map(|k| {
            (0..cfg.n_irss()).fold(None, |best: Option<usize>, w| match best {
                Some(b) if cfg.irs_ue_distance(b, k) <= cfg.irs_ue_distance(w, k) => Some(b),
                _ => Some(w),
            })
        })
        .collect()
}

fn active(pair: Option<usize>) -> Vec<usize> {
    pair.into_iter().collect()
}

/// Position on the segment from UE `k` to IRS `irs` (horizontal coordinates)
/// maximising the single-IRS expected rate. Without an IRS this is the point
/// above the UE.
pub fn best_rate_point(
    cfg: &ScenarioConfig,
    model: &RateModel,
    k: usize,
    irs: Option<usize>,
) -> Vec2 {
    let a = cfg.ues[k].xy_m;
    let Some(w) = irs else { return a };
    let b = cfg.irss[w].xy_m;
    let len = a.distance(b);
    if len == 0.0 {
        return a;
    }
    let set = [w];
    let rate = |s: f64| model.rate_at(k, &set, a.lerp(b, s));
    let steps = (len / SEARCH_STEP_M).ceil() as usize;
    let mut best = (0usize, rate(0.0));
    for i in 1..=steps {
        let r = rate(i as f64 / steps as f64);
        if r > best.1 {
            best = (i, r);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 / steps as f64;
    let hi = (best.0 + 1).min(steps) as f64 / steps as f64;
    let s = golden_max(&rate, lo, hi, 1e-9 / len.max(1.0));
    if rate(s) > best.1 {
        a.lerp(b, s)
    } else {
        a.lerp(b, best.0 as f64 / steps as f64)
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Straight start-to-finish flight at the energy-efficient speed, its time
/// split evenly across all UEs, each served through its paired IRS.
pub fn toy_plan(
    cfg: &ScenarioConfig,
    model: &RateModel,
    pairing: &[Option<usize>],
) -> Result<Trajectory, PlanError> {
    let (start, finish) = (cfg.uav.start_xy_m, cfg.uav.finish_xy_m);
    let all: Vec<usize> = (0..cfg.n_ues()).collect();
    let rate = |k: usize, q: Vec2| model.rate_at(k, &active(pairing[k]), q);
    let mut traj = polyline_schedule(
        cfg,
        &[start, finish],
        &[None, None],
        &[all],
        None,
        0.0,
        &rate,
    )?;
    attach_matching(cfg, &mut traj, pairing);
    Ok(traj)
}

/// Share of each UE's demand the toy plan delivers; zero demand gives
/// `f64::INFINITY`.
pub fn toy_fractions(
    cfg: &ScenarioConfig,
    model: &RateModel,
    pairing: &[Option<usize>],
) -> Result<Vec<f64>, PlanError> {
    let toy = toy_plan(cfg, model, pairing)?;
    let got = delivered_bits(&toy, model, &Variant::Heuristic.service(cfg.n_irss()));
    Ok((0..cfg.n_ues())
        .map(|k| {
            let need = cfg.demand_bits(k);
            if need > 0.0 {
                got[k] / need
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

/// `q*_k = q_hat_k + min(f_k, 1) (q_bar_k - q_hat_k)`.
pub fn transmit_points(f: &[f64], q_hat: &[Vec2], q_bar: &[Vec2]) -> Vec<Vec2> {
    f.iter()
        .zip(q_hat.iter().zip(q_bar))
        .map(|(&f, (&h, &b))| h.lerp(b, f.min(1.0)))
        .collect()
}

/// Shortest path from `start` through every point to `end`, as a visit
/// order. Exact (Held-Karp) up to [`EXACT_TSP_MAX`] points, nearest
/// neighbor improved by 2-opt beyond.
pub fn open_path_tsp(points: &[Vec2], start: Vec2, end: Vec2) -> Vec<usize> {
    if points.len() <= EXACT_TSP_MAX {
        held_karp(points, start, end)
    } else {
        two_opt(
            points,
            start,
            end,
            crate::trajectory::nearest_neighbor_order(start, points),
        )
    }
}

/// Length of the path `start -> points[order] -> end`.
pub fn path_length(points: &[Vec2], start: Vec2, end: Vec2, order: &[usize]) -> f64 {
    let mut at = start;
    let mut len = 0.0;
    for &i in order {
        len += at.distance(points[i]);
        at = points[i];
    }
    len + at.distance(end)
}

fn held_karp(points: &[Vec2], start: Vec2, end: Vec2) -> Vec<usize> {
    let k = points.len();
    if k == 0 {
        return Vec::new();
    }
    let full = (1usize << k) - 1;
    let mut cost = vec![f64::INFINITY; (full + 1) * k];
    let mut parent = vec![usize::MAX; (full + 1) * k];
    for j in 0..k {
        cost[(1 << j) * k + j] = start.distance(points[j]);
    }
    for mask in 1..=full {
        for j in 0..k {
            let here = cost[mask * k + j];
            if mask & (1 << j) == 0 || !here.is_finite() {
                continue;
            }
            for nxt in 0..k {
                if mask & (1 << nxt) != 0 {
                    continue;
                }
                let m2 = mask | (1 << nxt);
                let c = here + points[j].distance(points[nxt]);
                if c < cost[m2 * k + nxt] {
                    cost[m2 * k + nxt] = c;
                    parent[m2 * k + nxt] = j;
                }
            }
        }
    }
    let mut last = 0;
    let mut best = f64::INFINITY;
    for j in 0..k {
        let c = cost[full * k + j] + points[j].distance(end);
        if c < best {
            best = c;
            last = j;
        }
    }
    let mut order = Vec::with_capacity(k);
    let mut mask = full;
    let mut j = last;
    while j != usize::MAX {
        order.push(j);
        let p = parent[mask * k + j];
        mask &= !(1 << j);
        j = p;
    }
    order.reverse();
    order
}

fn two_opt(points: &[Vec2], start: Vec2, end: Vec2, mut order: Vec<usize>) -> Vec<usize> {
    let k = order.len();
    let at = |order: &[usize], i: isize| -> Vec2 {
        if i < 0 {
            start
        } else if i as usize >= k {
            end
        } else {
            points[order[i as usize]]
        }
    };
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..k {
            for j in i + 1..k {
                // Reverse order[i..=j]: edges (i-1, i) and (j, j+1) change.
                let (a, b) = (at(&order, i as isize - 1), at(&order, i as isize));
                let (c, d) = (at(&order, j as isize), at(&order, j as isize + 1));
                let delta = a.distance(c) + b.distance(d) - a.distance(b) - c.distance(d);
                if delta < -1e-12 {
                    order[i..=j].reverse();
                    improved = true;
                }
            }
        }
    }
    order
}

fn attach_matching(cfg: &ScenarioConfig, traj: &mut Trajectory, pairing: &[Option<usize>]) {
    let w_count = cfg.n_irss();
    if w_count == 0 {
        return;
    }
    traj.match_times = Some(
        traj.tx_times
            .iter()
            .map(|row| {
                let mut m = vec![vec![0.0; row.len()]; w_count];
                for (k, &tau) in row.iter().enumerate() {
                    if let Some(w) = pairing[k] {
                        m[w][k] = tau;
                    }
                }
                m
            })
            .collect(),
    );
}

/// Runs the full heuristic.
pub fn plan(cfg: &ScenarioConfig) -> Result<HeuristicPlan, PlanError> {
    cfg.validate()?;
    let model = RateModel::new(cfg);
    let mode = Variant::Heuristic.service(cfg.n_irss());
    let k_count = cfg.n_ues();
    let (start, finish) = (cfg.uav.start_xy_m, cfg.uav.finish_xy_m);
    let pairing = pair_ues(cfg);
    let q_hat: Vec<Vec2> = (0..k_count)
        .map(|k| best_rate_point(cfg, &model, k, pairing[k]))
        .collect();
    let q_bar: Vec<Vec2> = q_hat
        .iter()
        .map(|q| q.project_onto_segment(start, finish))
        .collect();
    let fractions = toy_fractions(cfg, &model, &pairing)?;
    let q_star = transmit_points(&fractions, &q_hat, &q_bar);

    let (traj, order) = if fractions.iter().all(|&f| f >= 1.0) {
        (toy_plan(cfg, &model, &pairing)?, Vec::new())
    } else {
        let order = open_path_tsp(&q_star, start, finish);
        let mut corners = vec![start];
        corners.extend(order.iter().map(|&k| q_star[k]));
        corners.push(finish);
        let mut hover_ue = vec![None];
        hover_ue.extend(order.iter().map(|&k| Some(k)));
        hover_ue.push(None);
        let mut serve: Vec<Vec<usize>> = order.iter().map(|&k| vec![k]).collect();
        serve.push(Vec::new());
        let rate = |k: usize, q: Vec2| model.rate_at(k, &active(pairing[k]), q);
        let mut traj = polyline_schedule(cfg, &corners, &hover_ue, &serve, None, 0.0, &rate)?;
        attach_matching(cfg, &mut traj, &pairing);
        (traj, order)
    };
    debug_assert!(validate(&traj, cfg).is_empty());
    let energy = total_energy(&traj, cfg.uav.tx_power_w, &cfg.power)?;
    let delivered = delivered_bits(&traj, &model, &mode);
    Ok(HeuristicPlan {
        pairing,
        q_hat,
        q_bar,
        fractions,
        transmit_points: q_star,
        order,
        solution: PlanSolution {
            variant: Variant::Heuristic,
            trajectory: traj,
            energy,
            delivered_bits: delivered,
            convergence: vec![energy.total_j],
        },
    })
}
