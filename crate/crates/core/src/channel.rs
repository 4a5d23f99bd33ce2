//! Link geometry, probabilistic line of sight, Rician fading draws, IRS phase
//! alignment and the Monte Carlo rate oracle.
//!
//! Monte Carlo draws come from counter-based substreams: sample `i` of a run
//! seeded with `s` always uses ChaCha8 stream `i` under key `s`. Estimates
//! are independent of evaluation order and thread split.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Range;
#[allow(unused_imports)]
use num_traits::Float;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::geometry::{distance_3d, Vec2};
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("UAV and node coincide; elevation undefined")]
    Degenerate,
    #[error("UAV altitude {uav_h} m must exceed node height {node_h} m")]
    BelowNode { uav_h: f64, node_h: f64 },
    #[error("zero-magnitude channel entry on IRS {irs} element {element}; phase undefined")]
    ZeroMagnitude { irs: usize, element: usize },
    #[error("IRS index {0} out of range")]
    NoSuchIrs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub elevation_deg: f64,
}

/// Distance and elevation angle between a ground node and the UAV.
pub fn link_geometry(
    node_xy: Vec2,
    node_h: f64,
    uav_xy: Vec2,
    uav_h: f64,
) -> Result<LinkGeometry, ChannelError> {
    if !(uav_h > node_h) {
        return Err(ChannelError::BelowNode { uav_h, node_h });
    }
    let d = distance_3d(node_xy, node_h, uav_xy, uav_h);
    if d == 0.0 {
        return Err(ChannelError::Degenerate);
    }
    let s = ((uav_h - node_h) / d).min(1.0);
    Ok(LinkGeometry {
        distance_m: d,
        elevation_deg: s.asin().to_degrees(),
    })
}

/// Sigmoid line-of-sight probability in the elevation angle (degrees).
pub fn los_probability(theta_deg: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * (-b * (theta_deg - a)).exp())
}

/// Which UAV links currently have a line of sight.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LosState {
    pub s_ue: bool,
    /// One entry per IRS in the draw.
    pub s_irs: Vec<bool>,
}

/// One realisation of every small-scale channel seen by a single UE.
///
/// Channels are stored before blockage; [`LosState`] says which UAV links
/// are in line of sight. IRS vectors are indexed like the IRS list the draw
/// was made for.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub h_ua_ue: Complex64,
    pub h_ua_irs: Vec<Vec<Complex64>>,
    pub h_irs_ue: Vec<Vec<Complex64>>,
    pub los: LosState,
}

/// Unit-second-moment Rician entries with K-factor `kappa`.
///
/// An infinite `kappa` gives pure unit-modulus line-of-sight entries.
pub fn sample_small_scale<R: Rng + ?Sized>(kappa: f64, len: usize, rng: &mut R) -> Vec<Complex64> {
    (0..len).map(|_| sample_rician(kappa, rng)).collect()
}

fn sample_rician<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> Complex64 {
    let (los_amp, nlos_amp) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    };
    let psi = rng.random::<f64>() * 2.0 * PI;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scatter = Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2;
    Complex64::from_polar(los_amp, psi) + scatter * nlos_amp
}

/// Phase shifts that align every cascaded path of IRS `irs_index` with the
/// direct UAV-UE path: `phi_m = arg h_U - arg h_I,m + arg h_m`.
pub fn optimal_phase_shifts(
    draw: &ChannelDraw,
    irs_index: usize,
) -> Result<Vec<f64>, ChannelError> {
    let to_irs = draw
        .h_ua_irs
        .get(irs_index)
        .ok_or(ChannelError::NoSuchIrs(irs_index))?;
    let to_ue = draw
        .h_irs_ue
        .get(irs_index)
        .ok_or(ChannelError::NoSuchIrs(irs_index))?;
    let reference = draw.h_ua_ue.arg();
    to_irs
        .iter()
        .zip(to_ue)
        .enumerate()
        .map(|(m, (hi, hm))| {
            if hi.norm_sqr() == 0.0 || hm.norm_sqr() == 0.0 {
                Err(ChannelError::ZeroMagnitude {
                    irs: irs_index,
                    element: m,
                })
            } else {
                Ok(reference - hi.arg() + hm.arg())
            }
        })
        .collect()
}

/// `sum_m conj(h_m) e^{j phi_m} h_I,m` for one IRS.
pub fn reflected_sum(to_irs: &[Complex64], to_ue: &[Complex64], phases: &[f64]) -> Complex64 {
    to_irs
        .iter()
        .zip(to_ue)
        .zip(phases)
        .map(|((hi, hm), &phi)| hm.conj() * Complex64::from_polar(1.0, phi) * hi)
        .sum()
}

/// Large-scale amplitude gains applied to the small-scale draw.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub ue: f64,
    /// Product of the UAV-IRS and IRS-UE amplitude gains, per IRS.
    pub cascade: Vec<f64>,
}

/// Overall complex channel `sum_w h_wk^H Phi_w h_Iw + h_U` with blocked UAV
/// links scaled by `nlos_attenuation`.
pub fn overall_channel(
    draw: &ChannelDraw,
    phases: &[Vec<f64>],
    gains: &LinkGains,
    nlos_attenuation: f64,
) -> Complex64 {
    let state = |los: bool| if los { 1.0 } else { nlos_attenuation };
    let mut h = draw.h_ua_ue * (gains.ue * state(draw.los.s_ue));
    for (w, phi) in phases.iter().enumerate() {
        let r = reflected_sum(&draw.h_ua_irs[w], &draw.h_irs_ue[w], phi);
        h += r * (gains.cascade[w] * state(draw.los.s_irs[w]));
    }
    h
}

/// Magnitude of the coherently combined channel:
/// `s_U |h_U| + sum_w s_w C_w` with `C_w = sum_m |h_I,m| |h_m|`.
pub fn combined_magnitude(los: &LosState, mag_ue: f64, cascade_sums: &[f64]) -> f64 {
    let direct = if los.s_ue { mag_ue } else { 0.0 };
    direct
        + los
            .s_irs
            .iter()
            .zip(cascade_sums)
            .filter(|(s, _)| **s)
            .map(|(_, c)| *c)
            .sum::<f64>()
}

/// Per-sample random number stream.
pub fn sample_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// Draws LoS states (frozen probabilities) and unit-power fades for UE `ue`
/// and the IRSs listed in `active`.
pub fn draw_channel(
    cfg: &ScenarioConfig,
    ue: usize,
    active: &[usize],
    seed: u64,
    sample_index: u64,
) -> ChannelDraw {
    let mut rng = sample_rng(seed, sample_index);
    let ch = &cfg.channel;
    let s_ue = rng.random::<f64>() < cfg.ues[ue].los_probability();
    let s_irs = active
        .iter()
        .map(|&w| rng.random::<f64>() < cfg.irss[w].los_probability())
        .collect();
    let h_ua_ue = sample_rician(ch.kappa_ua_ue, &mut rng);
    let mut h_ua_irs = Vec::with_capacity(active.len());
    let mut h_irs_ue = Vec::with_capacity(active.len());
    for &w in active {
        let m = cfg.irss[w].n_elements;
        h_ua_irs.push(sample_small_scale(ch.kappa_ua_irs, m, &mut rng));
        h_irs_ue.push(sample_small_scale(ch.kappa_irs_ue, m, &mut rng));
    }
    ChannelDraw {
        h_ua_ue,
        h_ua_irs,
        h_irs_ue,
        los: LosState { s_ue, s_irs },
    }
}

/// Large-scale gains for UE `ue` served from `uav_xy` through `active` IRSs.
pub fn link_gains(cfg: &ScenarioConfig, uav_xy: Vec2, ue: usize, active: &[usize]) -> LinkGains {
    let ch = &cfg.channel;
    let h_a = cfg.uav.altitude_m;
    let u = &cfg.ues[ue];
    let d_u = distance_3d(u.xy_m, u.height_m, uav_xy, h_a);
    let ue_gain = (ch.beta0 * d_u.powf(-ch.alpha_ua_ue)).sqrt();
    let cascade = active
        .iter()
        .map(|&w| {
            let irs = &cfg.irss[w];
            let d_i = distance_3d(irs.xy_m, irs.height_m, uav_xy, h_a);
            let d_wk = cfg.irs_ue_distance(w, ue);
            (ch.beta0 * d_i.powf(-ch.alpha_ua_irs)).sqrt()
                * (ch.beta0 * d_wk.powf(-ch.alpha_irs_ue)).sqrt()
        })
        .collect();
    LinkGains {
        ue: ue_gain,
        cascade,
    }
}

/// Mean rate and its standard error, in bits/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean_bps: f64,
    pub stderr_bps: f64,
    pub n_samples: u64,
}

/// Running sums for one evaluation position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McSums {
    pub sum: f64,
    pub sum_sq: f64,
    pub count: u64,
}

impl McSums {
    pub fn merge(&mut self, other: &McSums) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.count += other.count;
    }

    pub fn estimate(&self) -> McEstimate {
        let n = self.count as f64;
        let mean = self.sum / n;
        let stderr = if self.count > 1 {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean_bps: mean,
            stderr_bps: stderr,
            n_samples: self.count,
        }
    }
}

/// Samples per chunk. Chunk sums are merged in index order.
pub const MC_CHUNK: u64 = 1024;

/// Evaluates samples `range` of a Monte Carlo run at every position in
/// `positions` and returns one partial sum per position.
pub fn monte_carlo_chunk(
    cfg: &ScenarioConfig,
    positions: &[Vec2],
    ue: usize,
    active: &[usize],
    seed: u64,
    range: Range<u64>,
) -> Vec<McSums> {
    let ch = &cfg.channel;
    let snr_scale = cfg.uav.tx_power_w / (ch.bandwidth_hz * ch.noise_psd_w_per_hz());
    let gains: Vec<LinkGains> = positions
        .iter()
        .map(|&p| link_gains(cfg, p, ue, active))
        .collect();
    let mut sums = vec![McSums::default(); positions.len()];
    let nu = ch.nlos_attenuation;
    let state = |los: bool| if los { 1.0 } else { nu };
    for i in range {
        let draw = draw_channel(cfg, ue, active, seed, i);
        let reflected: Vec<Complex64> = (0..active.len())
            .map(|w| {
                let phi =
                    optimal_phase_shifts(&draw, w).expect("Rician draws are nonzero almost surely");
                reflected_sum(&draw.h_ua_irs[w], &draw.h_irs_ue[w], &phi) * state(draw.los.s_irs[w])
            })
            .collect();
        let direct = draw.h_ua_ue * state(draw.los.s_ue);
        for (acc, g) in sums.iter_mut().zip(&gains) {
            let mut h = direct * g.ue;
            for (r, c) in reflected.iter().zip(&g.cascade) {
                h += r * *c;
            }
            let rate =
                ch.bandwidth_hz * (snr_scale * h.norm_sqr()).ln_1p() / core::f64::consts::LN_2;
            acc.sum += rate;
            acc.sum_sq += rate * rate;
            acc.count += 1;
        }
    }
    sums
}

/// Chunk boundaries used by every Monte Carlo driver.
pub fn monte_carlo_chunks(n_samples: u64) -> impl Iterator<Item = Range<u64>> {
    (0..n_samples.div_ceil(MC_CHUNK))
        .map(move |c| c * MC_CHUNK..((c + 1) * MC_CHUNK).min(n_samples))
}

/// Monte Carlo estimate of the achievable rate along a list of positions.
///
/// Every position sees the same fading realisations; each per-position
/// estimate is unbiased on its own.
pub fn monte_carlo_track(
    cfg: &ScenarioConfig,
    positions: &[Vec2],
    ue: usize,
    active: &[usize],
    n_samples: u64,
    seed: u64,
) -> Vec<McEstimate> {
    let mut total = vec![McSums::default(); positions.len()];
    for range in monte_carlo_chunks(n_samples) {
        let part = monte_carlo_chunk(cfg, positions, ue, active, seed, range);
        for (t, p) in total.iter_mut().zip(&part) {
            t.merge(p);
        }
    }
    total.iter().map(McSums::estimate).collect()
}

/// Monte Carlo estimate of the achievable rate of UE `ue` with the UAV at
/// `uav_xy` and the IRSs in `active` phase-aligned to it.
pub fn monte_carlo_rate(
    cfg: &ScenarioConfig,
    uav_xy: Vec2,
    ue: usize,
    active: &[usize],
    n_samples: u64,
    seed: u64,
) -> McEstimate {
    monte_carlo_track(cfg, &[uav_xy], ue, active, n_samples, seed)[0]
}
