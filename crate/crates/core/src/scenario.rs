//! Mission configuration: geometry, channel constants, propulsion constants
//! and per-user data demands.
//!
//! Every physical constant consumed elsewhere in the crate is owned here.
//! Configurations are plain values and immutable once validated.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

use crate::channel::los_probability;
use crate::geometry::{distance_3d, Vec2};

/// Transmit power used when a scenario does not set one; a typical
/// small-cell figure.
pub const DEFAULT_TX_POWER_W: f64 = 0.1;
/// Fixed elevation angle used for UAV-UE line-of-sight probabilities.
pub const DEFAULT_UE_ELEVATION_DEG: f64 = 60.0;
/// Fixed elevation angle used for UAV-IRS line-of-sight probabilities.
pub const DEFAULT_IRS_ELEVATION_DEG: f64 = 54.2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Dotted path of the offending field, e.g. `channel.nlos_attenuation`.
    pub fn field(&self) -> &str {
        match self {
            ScenarioError::Invalid { field, .. } => field,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    /// Fixed flight altitude.
    pub altitude_m: f64,
    pub start_xy_m: Vec2,
    pub finish_xy_m: Vec2,
    pub v_max_mps: f64,
    /// Longest allowed path segment; channels are treated as constant within one.
    pub seg_max_m: f64,
    #[serde(default = "default_tx_power")]
    pub tx_power_w: f64,
}

fn default_tx_power() -> f64 {
    DEFAULT_TX_POWER_W
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsSpec {
    pub xy_m: Vec2,
    pub height_m: f64,
    pub n_elements: usize,
    pub los_a: f64,
    pub los_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_elevation_deg: Option<f64>,
}

impl IrsSpec {
    pub fn elevation_deg(&self) -> f64 {
        self.fixed_elevation_deg
            .unwrap_or(DEFAULT_IRS_ELEVATION_DEG)
    }

    /// Probability that the UAV-IRS link has a line of sight.
    pub fn los_probability(&self) -> f64 {
        los_probability(self.elevation_deg(), self.los_a, self.los_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub xy_m: Vec2,
    pub height_m: f64,
    pub data_bits: f64,
    pub los_a: f64,
    pub los_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_elevation_deg: Option<f64>,
}

impl UeSpec {
    pub fn elevation_deg(&self) -> f64 {
        self.fixed_elevation_deg.unwrap_or(DEFAULT_UE_ELEVATION_DEG)
    }

    /// Probability that the direct UAV-UE link has a line of sight.
    pub fn los_probability(&self) -> f64 {
        los_probability(self.elevation_deg(), self.los_a, self.los_b)
    }
}

/// Large- and small-scale channel constants.
///
/// The noise density is kept in dBm/Hz as written in scenario files;
/// [`ChannelParams::noise_psd_w_per_hz`] gives the linear value every
/// formula uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Path loss at the 1 m reference distance (linear).
    pub beta0: f64,
    pub alpha_ua_ue: f64,
    pub alpha_ua_irs: f64,
    pub alpha_irs_ue: f64,
    pub kappa_ua_ue: f64,
    pub kappa_ua_irs: f64,
    pub kappa_irs_ue: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    /// Amplitude factor applied to a UAV link that lost its line of sight.
    #[serde(default)]
    pub nlos_attenuation: f64,
    /// Extra bits added to every user's demand to absorb the optimism of the
    /// expected-rate bound.
    #[serde(default)]
    pub data_margin_bits: f64,
}

impl ChannelParams {
    pub fn noise_psd_w_per_hz(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz)
    }
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            beta0: 0.01,
            alpha_ua_ue: 2.5,
            alpha_ua_irs: 2.2,
            alpha_irs_ue: 3.0,
            kappa_ua_ue: 10.0,
            kappa_ua_irs: 30.0,
            kappa_irs_ue: 5.0,
            noise_psd_dbm_per_hz: -174.0,
            bandwidth_hz: 1e6,
            nlos_attenuation: 0.0,
            data_margin_bits: 0.0,
        }
    }
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerParams {
    /// Blade profile power in hover (W).
    pub p0_w: f64,
    /// Induced power in hover (W).
    pub pi_w: f64,
    pub u_tip_mps: f64,
    /// Mean rotor induced velocity in hover.
    pub v0_mps: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    pub rho: f64,
    pub solidity: f64,
    pub rotor_area_m2: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            p0_w: 79.86,
            pi_w: 88.63,
            u_tip_mps: 120.0,
            v0_mps: 4.03,
            d0: 0.6,
            rho: 1.225,
            solidity: 0.05,
            rotor_area_m2: 0.503,
        }
    }
}

impl PowerParams {
    /// Coefficient of the blade-profile speed term, `3 / U_tip^2`.
    pub fn delta_b(&self) -> f64 {
        3.0 / (self.u_tip_mps * self.u_tip_mps)
    }

    /// Coefficient of the parasite term, `d0 rho s A / 2`.
    pub fn delta_p(&self) -> f64 {
        0.5 * self.d0 * self.rho * self.solidity * self.rotor_area_m2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub uav: UavSpec,
    #[serde(default)]
    pub irss: Vec<IrsSpec>,
    pub ues: Vec<UeSpec>,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub power: PowerParams,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn n_irss(&self) -> usize {
        self.irss.len()
    }

    /// Demand of user `k` including the configured margin.
    pub fn demand_bits(&self, k: usize) -> f64 {
        self.ues[k].data_bits + self.channel.data_margin_bits
    }

    /// IRS-to-UE distance (fixed by the geometry).
    pub fn irs_ue_distance(&self, w: usize, k: usize) -> f64 {
        let irs = &self.irss[w];
        let ue = &self.ues[k];
        distance_3d(irs.xy_m, irs.height_m, ue.xy_m, ue.height_m)
    }

    pub fn with_uniform_demand(mut self, bits: f64) -> Self {
        for ue in &mut self.ues {
            ue.data_bits = bits;
        }
        self
    }

    pub fn without_irss(mut self) -> Self {
        self.irss.clear();
        self
    }

    /// Checks every invariant, reporting the first offending field.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let uav = &self.uav;
        positive("uav.altitude_m", uav.altitude_m)?;
        positive("uav.v_max_mps", uav.v_max_mps)?;
        positive("uav.seg_max_m", uav.seg_max_m)?;
        positive("uav.tx_power_w", uav.tx_power_w)?;
        finite_xy("uav.start_xy_m", uav.start_xy_m)?;
        finite_xy("uav.finish_xy_m", uav.finish_xy_m)?;

        for (w, irs) in self.irss.iter().enumerate() {
            let at = |f: &str| format!("irss[{w}].{f}");
            finite_xy(&at("xy_m"), irs.xy_m)?;
            if !(irs.height_m >= 0.0) || !irs.height_m.is_finite() {
                return Err(ScenarioError::invalid(
                    at("height_m"),
                    "must be finite and >= 0",
                ));
            }
            if irs.n_elements == 0 {
                return Err(ScenarioError::invalid(at("n_elements"), "must be >= 1"));
            }
            positive(&at("los_a"), irs.los_a)?;
            positive(&at("los_b"), irs.los_b)?;
            elevation(&at("fixed_elevation_deg"), irs.fixed_elevation_deg)?;
            probability(&at("los_probability"), irs.los_probability())?;
            if irs.height_m >= uav.altitude_m {
                return Err(ScenarioError::invalid(
                    at("height_m"),
                    "must be below the UAV altitude",
                ));
            }
        }

        if self.ues.is_empty() {
            return Err(ScenarioError::invalid("ues", "at least one UE is required"));
        }
        for (k, ue) in self.ues.iter().enumerate() {
            let at = |f: &str| format!("ues[{k}].{f}");
            finite_xy(&at("xy_m"), ue.xy_m)?;
            if !ue.height_m.is_finite() || ue.height_m >= uav.altitude_m {
                return Err(ScenarioError::invalid(
                    at("height_m"),
                    "must be below the UAV altitude",
                ));
            }
            if !(ue.data_bits >= 0.0) || !ue.data_bits.is_finite() {
                return Err(ScenarioError::invalid(
                    at("data_bits"),
                    "must be finite and >= 0",
                ));
            }
            positive(&at("los_a"), ue.los_a)?;
            positive(&at("los_b"), ue.los_b)?;
            elevation(&at("fixed_elevation_deg"), ue.fixed_elevation_deg)?;
            probability(&at("los_probability"), ue.los_probability())?;
        }

        let ch = &self.channel;
        positive("channel.beta0", ch.beta0)?;
        positive("channel.alpha_ua_ue", ch.alpha_ua_ue)?;
        positive("channel.alpha_ua_irs", ch.alpha_ua_irs)?;
        positive("channel.alpha_irs_ue", ch.alpha_irs_ue)?;
        positive("channel.kappa_ua_ue", ch.kappa_ua_ue)?;
        positive("channel.kappa_ua_irs", ch.kappa_ua_irs)?;
        positive("channel.kappa_irs_ue", ch.kappa_irs_ue)?;
        if !ch.noise_psd_dbm_per_hz.is_finite() {
            return Err(ScenarioError::invalid(
                "channel.noise_psd_dbm_per_hz",
                "must be finite",
            ));
        }
        positive("channel.bandwidth_hz", ch.bandwidth_hz)?;
        if !(0.0..1.0).contains(&ch.nlos_attenuation) {
            return Err(ScenarioError::invalid(
                "channel.nlos_attenuation",
                "must lie in [0, 1)",
            ));
        }
        if !(ch.data_margin_bits >= 0.0) || !ch.data_margin_bits.is_finite() {
            return Err(ScenarioError::invalid(
                "channel.data_margin_bits",
                "must be finite and >= 0",
            ));
        }

        let p = &self.power;
        positive("power.p0_w", p.p0_w)?;
        positive("power.pi_w", p.pi_w)?;
        positive("power.u_tip_mps", p.u_tip_mps)?;
        positive("power.v0_mps", p.v0_mps)?;
        positive("power.d0", p.d0)?;
        positive("power.rho", p.rho)?;
        positive("power.solidity", p.solidity)?;
        positive("power.rotor_area_m2", p.rotor_area_m2)?;
        Ok(())
    }
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn finite_xy(field: &str, v: Vec2) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::invalid(field, "coordinates must be finite"))
    }
}

fn elevation(field: &str, v: Option<f64>) -> Result<(), ScenarioError> {
    match v {
        Some(deg) if !(0.0..=90.0).contains(&deg) => {
            Err(ScenarioError::invalid(field, "must lie in [0, 90] degrees"))
        }
        _ => Ok(()),
    }
}

fn probability(field: &str, p: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ScenarioError::invalid(
            field,
            "derived probability outside [0, 1]",
        ))
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn default_irs(xy: Vec2) -> IrsSpec {
    IrsSpec {
        xy_m: xy,
        height_m: 20.0,
        n_elements: 500,
        los_a: 15.0,
        los_b: 0.18,
        fixed_elevation_deg: None,
    }
}

fn default_ue(xy: Vec2, data_bits: f64) -> UeSpec {
    UeSpec {
        xy_m: xy,
        height_m: 0.0,
        data_bits,
        los_a: 30.0,
        los_b: 0.15,
        fixed_elevation_deg: None,
    }
}

/// The reference two-IRS / two-UE mission.
///
/// Channel, propulsion and mission constants take their reference values.
/// Each UE has an IRS a few meters away; every demand is 100 Mbit.
pub fn default_scenario() -> ScenarioConfig {
    ScenarioConfig {
        uav: UavSpec {
            altitude_m: 100.0,
            start_xy_m: Vec2::new(0.0, 0.0),
            finish_xy_m: Vec2::new(100.0, 100.0),
            v_max_mps: 30.0,
            seg_max_m: 1.0,
            tx_power_w: DEFAULT_TX_POWER_W,
        },
        irss: vec![
            default_irs(Vec2::new(25.0, 60.0)),
            default_irs(Vec2::new(75.0, 40.0)),
        ],
        ues: vec![
            default_ue(Vec2::new(30.0, 55.0), 1e8),
            default_ue(Vec2::new(70.0, 45.0), 1e8),
        ],
        channel: ChannelParams::default(),
        power: PowerParams::default(),
        seed: 0,
    }
}

/// Single IRS / single UE track used for validating the closed-form rate:
/// the UAV flies along the x axis from 0 to 500 m, the UE sits at 250 m and
/// the IRS at 245 m.
pub fn rate_validation_scenario() -> ScenarioConfig {
    ScenarioConfig {
        uav: UavSpec {
            altitude_m: 100.0,
            start_xy_m: Vec2::new(0.0, 0.0),
            finish_xy_m: Vec2::new(500.0, 0.0),
            v_max_mps: 30.0,
            seg_max_m: 1.0,
            tx_power_w: DEFAULT_TX_POWER_W,
        },
        irss: vec![default_irs(Vec2::new(245.0, 0.0))],
        ues: vec![default_ue(Vec2::new(250.0, 0.0), 0.0)],
        channel: ChannelParams::default(),
        power: PowerParams::default(),
        seed: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        let cfg = default_scenario();
        cfg.validate().unwrap();
        rate_validation_scenario().validate().unwrap();
        assert_eq!(cfg.uav.altitude_m, 100.0);
        assert_eq!(cfg.irss[0].height_m, 20.0);
        assert_eq!(cfg.ues[0].height_m, 0.0);
        assert_eq!(cfg.irss[0].n_elements, 500);
        assert_eq!(cfg.channel.bandwidth_hz, 1e6);
        assert_eq!(cfg.uav.seg_max_m, 1.0);
        assert_eq!(cfg.power.p0_w, 79.86);
        assert_eq!(cfg.uav.tx_power_w, 0.1);
    }

    #[test]
    fn table_one_defaults() {
        let p = PowerParams::default();
        let got = [
            p.p0_w,
            p.pi_w,
            p.u_tip_mps,
            p.v0_mps,
            p.d0,
            p.rho,
            p.solidity,
            p.rotor_area_m2,
        ];
        assert_eq!(got, [79.86, 88.63, 120.0, 4.03, 0.6, 1.225, 0.05, 0.503]);
    }

    #[test]
    fn noise_conversion() {
        let w = dbm_to_watts(-174.0);
        assert!((w / 3.981_071_705_534_972e-21 - 1.0).abs() < 1e-12);
        assert!((watts_to_dbm(w) + 174.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_attenuation() {
        let mut cfg = default_scenario();
        cfg.channel.nlos_attenuation = 1.5;
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.field(), "channel.nlos_attenuation");
    }

    #[test]
    fn rejects_ue_above_uav() {
        let mut cfg = default_scenario();
        cfg.ues[1].height_m = 120.0;
        assert_eq!(cfg.validate().unwrap_err().field(), "ues[1].height_m");
    }

    #[test]
    fn rejects_empty_ues_and_zero_elements() {
        let mut cfg = default_scenario();
        cfg.irss[0].n_elements = 0;
        assert_eq!(cfg.validate().unwrap_err().field(), "irss[0].n_elements");
        let mut cfg = default_scenario();
        cfg.ues.clear();
        assert_eq!(cfg.validate().unwrap_err().field(), "ues");
    }

    #[test]
    fn empty_irs_list_is_valid() {
        default_scenario().without_irss().validate().unwrap();
    }
}
