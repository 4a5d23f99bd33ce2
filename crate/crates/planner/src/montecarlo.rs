//! Parallel Monte Carlo rate validation.
//!
//! Chunks run on the rayon pool; partial sums are merged in chunk order.
//! Output is identical for any thread count.

use irs_uav_core::channel::{monte_carlo_chunk, monte_carlo_chunks, McEstimate, McSums};
use irs_uav_core::rate::RateModel;
use irs_uav_core::{ScenarioConfig, Vec2};
use rayon::prelude::*;

use crate::io::RateRow;

pub fn monte_carlo_track_par(
    cfg: &ScenarioConfig,
    positions: &[Vec2],
    ue: usize,
    active: &[usize],
    n_samples: u64,
    seed: u64,
) -> Vec<McEstimate> {
    let chunks: Vec<_> = monte_carlo_chunks(n_samples).collect();
    let parts: Vec<Vec<McSums>> = chunks
        .into_par_iter()
        .map(|r| monte_carlo_chunk(cfg, positions, ue, active, seed, r))
        .collect();
    let mut total = vec![McSums::default(); positions.len()];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total.iter().map(McSums::estimate).collect()
}

/// `n` evenly spaced points from the mission start to its finish.
pub fn straight_track(cfg: &ScenarioConfig, n: usize) -> Vec<Vec2> {
    let (a, b) = (cfg.uav.start_xy_m, cfg.uav.finish_xy_m);
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a.lerp(b, i as f64 / (n - 1) as f64))
            .collect(),
    }
}

/// Closed-form and simulated rate of `ue`, all IRSs phase-aligned, at every
/// track position.
pub fn rate_validation(
    cfg: &ScenarioConfig,
    track: &[Vec2],
    ue: usize,
    n_samples: u64,
    seed: u64,
) -> Vec<RateRow> {
    let model = RateModel::new(cfg);
    let active: Vec<usize> = (0..cfg.n_irss()).collect();
    let mc = monte_carlo_track_par(cfg, track, ue, &active, n_samples, seed);
    track
        .iter()
        .zip(mc)
        .enumerate()
        .map(|(i, (&q, est))| RateRow::new(i, q, model.rate_at(ue, &active, q), est))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use irs_uav_core::channel::monte_carlo_track;
    use irs_uav_core::scenario::rate_validation_scenario;

    #[test]
    fn parallel_matches_sequential_bit_for_bit() {
        let cfg = rate_validation_scenario();
        let track = straight_track(&cfg, 5);
        let seq = monte_carlo_track(&cfg, &track, 0, &[0], 3000, 7);
        for threads in [1, 3] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let par = pool.install(|| monte_carlo_track_par(&cfg, &track, 0, &[0], 3000, 7));
            assert_eq!(par, seq);
        }
    }

    #[test]
    fn single_sample_has_a_stderr_column() {
        let cfg = rate_validation_scenario();
        let rows = rate_validation(&cfg, &straight_track(&cfg, 2), 0, 1, 0);
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.mc_stderr_bps == 0.0 && r.rate_mc_bps > 0.0));
    }

    #[test]
    fn track_endpoints() {
        let cfg = rate_validation_scenario();
        let t = straight_track(&cfg, 50);
        assert_eq!(t[0], cfg.uav.start_xy_m);
        assert_eq!(t[49], cfg.uav.finish_xy_m);
    }
}
