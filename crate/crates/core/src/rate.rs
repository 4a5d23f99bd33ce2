//! Closed-form expected achievable rate.
//!
//! For UE `k` served through a set of IRSs the rate is a probability-weighted
//! sum over line-of-sight states of `log2(1 + snr_s)`, where each state SNR is
//! the expected channel gain of the coherently combined links:
//!
//! ```text
//! snr_s = sum_i c_i^2 g_i^2 d_i^-a_i + sum_i sum_{j != i} c_i c_j g'_i g'_j d_i^(-a_i/2) d_j^(-a_j/2)
//! ```
//!
//! with `c_i = 1` for a line-of-sight link and the NLoS attenuation
//! otherwise. Every state term has the shape handled by [`LogSnr`], which is
//! convex in the distances; the rate is therefore convex too and its first
//! order expansion is a global under-estimator.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};
#[allow(unused_imports)]
use num_traits::Float;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::geometry::{distance_3d, Vec2};
use crate::scenario::ScenarioConfig;

/// Mean envelope `E|g|` of a unit-second-moment Rician variable with
/// K-factor `kappa`:
/// `sqrt(pi / (4 (k+1))) e^{-k/2} [(1+k) I0(k/2) + k I1(k/2)]`.
///
/// The Bessel products are evaluated in exponentially scaled form.
pub fn rician_magnitude_mean(kappa: f64) -> f64 {
    if kappa.is_infinite() {
        return 1.0;
    }
    let x = 0.5 * kappa;
    (PI / (4.0 * (kappa + 1.0))).sqrt()
        * ((1.0 + kappa) * bessel_ie(0, x) + kappa * bessel_ie(1, x))
}

/// Exponentially scaled modified Bessel function `e^{-x} I_n(x)`, `n` in {0, 1}.
fn bessel_ie(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x > 700.0 {
        // Hankel asymptotic series.
        let mu = 4.0 * f64::from(n * n);
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..8 {
            let jf = f64::from(j);
            let odd = 2.0 * jf - 1.0;
            term *= -(mu - odd * odd) / (jf * 8.0 * x);
            sum += term;
        }
        return sum / (2.0 * PI * x).sqrt();
    }
    // e^{-x} I_n(x) = (1/pi) int_0^pi e^{x (cos t - 1)} cos(n t) dt by the
    // trapezoid rule.
    let nodes = 32 + (100.0 * x).sqrt().ceil() as usize;
    let h = PI / nodes as f64;
    let f = |t: f64| (x * (t.cos() - 1.0)).exp() * (f64::from(n) * t).cos();
    let mut acc = 0.5 * (f(0.0) + f(PI));
    for i in 1..nodes {
        acc += f(i as f64 * h);
    }
    acc * h / PI
}

/// How the second moment of the cascaded IRS amplitude is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondMoment {
    /// `E[C^2] = mu_I^2 + 1`, the central-limit closed form.
    #[default]
    Clt,
    /// `E[C^2] = M (1 - mu(k_I)^2 mu(k)^2) + mu_I^2`, exact for i.i.d. elements.
    Exact,
}

/// Rate constants of one (IRS, UE) pair together with the UE's direct link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSet {
    pub gamma_u: f64,
    pub gamma_u_prime: f64,
    pub gamma_i: f64,
    pub gamma_i_prime: f64,
    /// Mean cascaded amplitude `M mu(k_I) mu(k)`.
    pub mu_i: f64,
}

/// One UAV link as seen by the rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTerm {
    /// Line-of-sight probability.
    pub p: f64,
    /// Squared-gain constant for the self term.
    pub gamma_sq: f64,
    /// Mean-gain constant for cross terms.
    pub gamma_prime: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct NodeAt {
    xy: Vec2,
    h: f64,
}

/// Precomputed rate constants for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    bandwidth_hz: f64,
    nlos_attenuation: f64,
    altitude_m: f64,
    ue_links: Vec<LinkTerm>,
    /// `[w][k]`
    irs_links: Vec<Vec<LinkTerm>>,
    gammas: Vec<Vec<GammaSet>>,
    ue_at: Vec<NodeAt>,
    irs_at: Vec<NodeAt>,
}

impl RateModel {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self::with_second_moment(cfg, SecondMoment::Clt)
    }

    pub fn with_second_moment(cfg: &ScenarioConfig, moment: SecondMoment) -> Self {
        let ch = &cfg.channel;
        let snr_per_gain = cfg.uav.tx_power_w / (ch.bandwidth_hz * ch.noise_psd_w_per_hz());
        let gamma_u = (ch.beta0 * snr_per_gain).sqrt();
        let mu_u = rician_magnitude_mean(ch.kappa_ua_ue);
        let mu_a = rician_magnitude_mean(ch.kappa_ua_irs);
        let mu_b = rician_magnitude_mean(ch.kappa_irs_ue);

        let ue_links = cfg
            .ues
            .iter()
            .map(|ue| LinkTerm {
                p: ue.los_probability(),
                gamma_sq: gamma_u * gamma_u,
                gamma_prime: gamma_u * mu_u,
                alpha: ch.alpha_ua_ue,
            })
            .collect();

        let mut gammas = Vec::with_capacity(cfg.irss.len());
        let mut irs_links = Vec::with_capacity(cfg.irss.len());
        for (w, irs) in cfg.irss.iter().enumerate() {
            let m = irs.n_elements as f64;
            let mu_i = m * mu_a * mu_b;
            let second = match moment {
                SecondMoment::Clt => mu_i * mu_i + 1.0,
                SecondMoment::Exact => m * (1.0 - mu_a * mu_a * mu_b * mu_b) + mu_i * mu_i,
            };
            let mut row_g = Vec::with_capacity(cfg.ues.len());
            let mut row_l = Vec::with_capacity(cfg.ues.len());
            for k in 0..cfg.ues.len() {
                let d_wk = cfg.irs_ue_distance(w, k);
                let base =
                    (ch.beta0 * ch.beta0 * snr_per_gain * d_wk.powf(-ch.alpha_irs_ue)).sqrt();
                let g = GammaSet {
                    gamma_u,
                    gamma_u_prime: gamma_u * mu_u,
                    gamma_i: base * second.sqrt(),
                    gamma_i_prime: base * mu_i,
                    mu_i,
                };
                row_l.push(LinkTerm {
                    p: irs.los_probability(),
                    gamma_sq: g.gamma_i * g.gamma_i,
                    gamma_prime: g.gamma_i_prime,
                    alpha: ch.alpha_ua_irs,
                });
                row_g.push(g);
            }
            gammas.push(row_g);
            irs_links.push(row_l);
        }

        RateModel {
            bandwidth_hz: ch.bandwidth_hz,
            nlos_attenuation: ch.nlos_attenuation,
            altitude_m: cfg.uav.altitude_m,
            ue_links,
            irs_links,
            gammas,
            ue_at: cfg
                .ues
                .iter()
                .map(|u| NodeAt {
                    xy: u.xy_m,
                    h: u.height_m,
                })
                .collect(),
            irs_at: cfg
                .irss
                .iter()
                .map(|i| NodeAt {
                    xy: i.xy_m,
                    h: i.height_m,
                })
                .collect(),
        }
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn n_ues(&self) -> usize {
        self.ue_links.len()
    }

    pub fn n_irss(&self) -> usize {
        self.irs_links.len()
    }

    pub fn gamma_set(&self, irs: usize, ue: usize) -> GammaSet {
        self.gammas[irs][ue]
    }

    pub fn los_p_ue(&self, ue: usize) -> f64 {
        self.ue_links[ue].p
    }

    pub fn los_p_irs(&self, irs: usize) -> f64 {
        self.irs_links
            .get(irs)
            .and_then(|r| r.first())
            .map_or(0.0, |l| l.p)
    }

    /// Link terms for UE `ue` through `active`: the direct link first, then
    /// one entry per active IRS in the given order.
    pub fn links(&self, ue: usize, active: &[usize]) -> Vec<LinkTerm> {
        let mut out = Vec::with_capacity(active.len() + 1);
        out.push(self.ue_links[ue]);
        out.extend(active.iter().map(|&w| self.irs_links[w][ue]));
        out
    }

    /// UAV-UE distance from horizontal position `q`.
    pub fn ue_distance(&self, ue: usize, q: Vec2) -> f64 {
        let n = &self.ue_at[ue];
        distance_3d(n.xy, n.h, q, self.altitude_m)
    }

    /// UAV-IRS distance from horizontal position `q`.
    pub fn irs_distance(&self, irs: usize, q: Vec2) -> f64 {
        let n = &self.irs_at[irs];
        distance_3d(n.xy, n.h, q, self.altitude_m)
    }

    /// Distance vector in [`RateModel::links`] order.
    pub fn distances(&self, ue: usize, active: &[usize], q: Vec2) -> Vec<f64> {
        let mut d = Vec::with_capacity(active.len() + 1);
        d.push(self.ue_distance(ue, q));
        d.extend(active.iter().map(|&w| self.irs_distance(w, q)));
        d
    }

    /// Expected rate (bits/s) for UE `ue` given the direct distance and one
    /// distance per active IRS.
    pub fn expected_rate(
        &self,
        ue: usize,
        active: &[usize],
        dist_ue: f64,
        dists_irs: &[f64],
    ) -> f64 {
        assert_eq!(active.len(), dists_irs.len(), "one distance per active IRS");
        let mut d = Vec::with_capacity(active.len() + 1);
        d.push(dist_ue);
        d.extend_from_slice(dists_irs);
        self.bandwidth_hz * spectral_efficiency(&self.links(ue, active), &d, self.nlos_attenuation)
    }

    /// Expected rate (bits/s) with the UAV hovering over `q`.
    pub fn rate_at(&self, ue: usize, active: &[usize], q: Vec2) -> f64 {
        let d = self.distances(ue, active, q);
        self.bandwidth_hz * spectral_efficiency(&self.links(ue, active), &d, self.nlos_attenuation)
    }

    /// Gradient of the expected rate (bits/s per meter) with respect to the
    /// distance vector (direct link first).
    pub fn rate_gradient(&self, ue: usize, active: &[usize], dists: &[f64]) -> Vec<f64> {
        let mut g =
            spectral_efficiency_gradient(&self.links(ue, active), dists, self.nlos_attenuation);
        for v in &mut g {
            *v *= self.bandwidth_hz;
        }
        g
    }

    /// First-order expansion of the rate around `local_dists`.
    pub fn taylor_lower_bound(
        &self,
        ue: usize,
        active: &[usize],
        local_dists: &[f64],
    ) -> AffineRate {
        let links = self.links(ue, active);
        let value =
            self.bandwidth_hz * spectral_efficiency(&links, local_dists, self.nlos_attenuation);
        let gradient = self.rate_gradient(ue, active, local_dists);
        AffineRate {
            anchor: local_dists.to_vec(),
            value,
            gradient,
        }
    }

    /// Rate value and gradient together.
    pub fn rate_and_gradient(&self, ue: usize, active: &[usize], dists: &[f64]) -> (f64, Vec<f64>) {
        let a = self.taylor_lower_bound(ue, active, dists);
        (a.value, a.gradient)
    }
}

/// An affine function `value + gradient . (u - anchor)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRate {
    pub anchor: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl AffineRate {
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.value
            + self
                .gradient
                .iter()
                .zip(u.iter().zip(&self.anchor))
                .map(|(g, (x, x0))| g * (x - x0))
                .sum::<f64>()
    }

    /// Constant part when written as `constant + gradient . u`.
    pub fn offset(&self) -> f64 {
        self.value
            - self
                .gradient
                .iter()
                .zip(&self.anchor)
                .map(|(g, x0)| g * x0)
                .sum::<f64>()
    }
}

/// Enumerates LoS states as bit masks; bit `i` set means link `i` is in LoS.
/// Returns `(mask, probability)` for every state with nonzero mass.
fn states(links: &[LinkTerm]) -> impl Iterator<Item = (u32, f64)> + '_ {
    assert!(links.len() < 31, "too many links to enumerate");
    (0u32..1 << links.len()).filter_map(move |mask| {
        let w = links
            .iter()
            .enumerate()
            .map(|(i, l)| if mask >> i & 1 == 1 { l.p } else { 1.0 - l.p })
            .product::<f64>();
        (w > 0.0).then_some((mask, w))
    })
}

fn state_snr(links: &[LinkTerm], mask: u32, nu: f64, scratch: &mut LogSnr) {
    scratch.eps.clear();
    scratch.zeta.clear();
    scratch.alpha.clear();
    for (i, l) in links.iter().enumerate() {
        let c = if mask >> i & 1 == 1 { 1.0 } else { nu };
        scratch.eps.push(c * c * l.gamma_sq);
        scratch.zeta.push(c * l.gamma_prime);
        scratch.alpha.push(l.alpha);
    }
}

/// Expected spectral efficiency (bits/s/Hz).
pub fn spectral_efficiency(links: &[LinkTerm], dists: &[f64], nu: f64) -> f64 {
    let mut f = LogSnr::default();
    states(links)
        .map(|(mask, w)| {
            state_snr(links, mask, nu, &mut f);
            w * f.value(dists)
        })
        .sum()
}

pub fn spectral_efficiency_gradient(links: &[LinkTerm], dists: &[f64], nu: f64) -> Vec<f64> {
    let mut f = LogSnr::default();
    let mut grad = vec![0.0; links.len()];
    for (mask, w) in states(links) {
        state_snr(links, mask, nu, &mut f);
        for (g, d) in grad.iter_mut().zip(f.gradient(dists)) {
            *g += w * d;
        }
    }
    grad
}

/// `f(u) = log2(1 + sum_z eps_z u_z^-a_z + sum_z sum_{i != z} zeta_z zeta_i u_z^(-a_z/2) u_i^(-a_i/2))`
///
/// Convex on the open positive orthant for nonnegative constants: the
/// argument of the logarithm is a sum of log-convex terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogSnr {
    pub eps: Vec<f64>,
    pub zeta: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl LogSnr {
    pub fn new(eps: Vec<f64>, zeta: Vec<f64>, alpha: Vec<f64>) -> Self {
        assert!(eps.len() == zeta.len() && eps.len() == alpha.len());
        LogSnr { eps, zeta, alpha }
    }

    fn half_terms(&self, u: &[f64]) -> Vec<f64> {
        self.zeta
            .iter()
            .zip(&self.alpha)
            .zip(u)
            .map(|((z, a), x)| z * x.powf(-0.5 * a))
            .collect()
    }

    /// The SNR inside the logarithm (without the leading 1).
    pub fn snr(&self, u: &[f64]) -> f64 {
        let b = self.half_terms(u);
        let direct: f64 = self
            .eps
            .iter()
            .zip(&self.alpha)
            .zip(u)
            .map(|((e, a), x)| e * x.powf(-a))
            .sum();
        let total: f64 = b.iter().sum();
        let cross: f64 = b.iter().map(|bz| bz * (total - bz)).sum();
        direct + cross
    }

    pub fn value(&self, u: &[f64]) -> f64 {
        self.snr(u).ln_1p() / LN_2
    }

    /// Partial derivatives:
    /// `df/du_z = [-a_z eps_z u_z^(-a_z-1) - a_z b_z (S - b_z) / u_z] / (g ln 2)`
    /// with `b_z = zeta_z u_z^(-a_z/2)` and `S = sum b`.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let b = self.half_terms(u);
        let total: f64 = b.iter().sum();
        let g = 1.0 + self.snr(u);
        (0..u.len())
            .map(|z| {
                let a = self.alpha[z];
                let dg = -a * self.eps[z] * u[z].powf(-a - 1.0) - a * b[z] * (total - b[z]) / u[z];
                dg / (g * LN_2)
            })
            .collect()
    }

    /// Analytic Hessian.
    pub fn hessian(&self, u: &[f64]) -> DMatrix<f64> {
        let n = u.len();
        let b = self.half_terms(u);
        let total: f64 = b.iter().sum();
        let g = 1.0 + self.snr(u);
        let db: Vec<f64> = (0..n).map(|z| -0.5 * self.alpha[z] * b[z] / u[z]).collect();
        let grad_g: Vec<f64> = (0..n)
            .map(|z| {
                let a = self.alpha[z];
                -a * self.eps[z] * u[z].powf(-a - 1.0) + 2.0 * db[z] * (total - b[z])
            })
            .collect();
        let mut h = DMatrix::zeros(n, n);
        for z in 0..n {
            for i in 0..n {
                let hg = if z == i {
                    let a = self.alpha[z];
                    let ddb = 0.5 * a * (0.5 * a + 1.0) * b[z] / (u[z] * u[z]);
                    a * (a + 1.0) * self.eps[z] * u[z].powf(-a - 2.0) + 2.0 * ddb * (total - b[z])
                } else {
                    2.0 * db[z] * db[i]
                };
                h[(z, i)] = (hg / g - grad_g[z] * grad_g[i] / (g * g)) / LN_2;
            }
        }
        h
    }
}

/// Smallest eigenvalue of the Hessian of [`LogSnr`] at `point`; nonnegative
/// (up to rounding) whenever the function is convex there.
pub fn hessian_min_eigenvalue(eps: &[f64], zeta: &[f64], alpha: &[f64], point: &[f64]) -> f64 {
    let f = LogSnr::new(eps.to_vec(), zeta.to_vec(), alpha.to_vec());
    let h = f.hessian(point);
    if h.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_scenario, rate_validation_scenario};
    use approx::assert_relative_eq;

    /// Trapezoid integration of `r * pdf(r)` for the unit-power Rician
    /// envelope, done in log space to stay finite for large K.
    fn rician_mean_by_quadrature(kappa: f64) -> f64 {
        let s2 = 1.0 / (2.0 * (kappa + 1.0));
        let nu = (kappa / (kappa + 1.0)).sqrt();
        let n = 200_000;
        let r_max = nu + 12.0 * s2.sqrt();
        let h = r_max / n as f64;
        let mut acc = 0.0;
        for i in 1..=n {
            let r = i as f64 * h;
            // I0(z) e^{-z} by direct series for moderate z, asymptotics otherwise.
            let z = r * nu / s2;
            let ln_i0 = if z < 50.0 {
                let mut term = 1.0;
                let mut sum = 1.0;
                for k in 1..200 {
                    term *= (z / 2.0) * (z / 2.0) / ((k * k) as f64);
                    sum += term;
                }
                sum.ln()
            } else {
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..12 {
                    let odd = (2 * j - 1) as f64;
                    term *= odd * odd / (j as f64 * 8.0 * z);
                    sum += term;
                }
                z - 0.5 * (2.0 * PI * z).ln() + sum.ln()
            };
            let ln_pdf = r.ln() - s2.ln() - (r * r + nu * nu) / (2.0 * s2) + ln_i0;
            let w = if i == n { 0.5 } else { 1.0 };
            acc += w * r * ln_pdf.exp();
        }
        acc * h
    }

    #[test]
    fn rician_mean_examples() {
        assert_relative_eq!(
            rician_magnitude_mean(0.0),
            PI.sqrt() / 2.0,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            rician_magnitude_mean(0.0),
            rician_mean_by_quadrature(0.0),
            max_relative = 1e-7
        );
        for kappa in [0.5, 5.0, 10.0, 30.0, 400.0] {
            assert_relative_eq!(
                rician_magnitude_mean(kappa),
                rician_mean_by_quadrature(kappa),
                max_relative = 1e-6
            );
        }
        assert_eq!(rician_magnitude_mean(f64::INFINITY), 1.0);
        assert_relative_eq!(rician_magnitude_mean(1e9), 1.0, epsilon = 1e-8);
        let mut last = 0.0;
        for kappa in [0.0, 1.0, 10.0, 100.0, 699.0 * 2.0, 701.0 * 2.0, 1e5] {
            let m = rician_magnitude_mean(kappa);
            assert!(m > last && m <= 1.0, "kappa {kappa}: {m}");
            last = m;
        }
    }

    #[test]
    fn bessel_branches_agree() {
        for n in [0, 1] {
            let below = bessel_ie(n, 700.0);
            let above = bessel_ie(n, 700.0 + 1e-9);
            assert_relative_eq!(below, above, max_relative = 1e-12);
        }
    }

    /// Independent enumeration of the state sum, written directly from the
    /// formula with explicit pair loops.
    fn brute_force_rate(links: &[LinkTerm], d: &[f64], nu: f64, bandwidth: f64) -> f64 {
        let z = links.len();
        let mut total = 0.0;
        for mask in 0..(1usize << z) {
            let s: Vec<f64> = (0..z).map(|i| ((mask >> i) & 1) as f64).collect();
            let c: Vec<f64> = s.iter().map(|&si| si + (1.0 - si) * nu).collect();
            let mut weight = 1.0;
            for i in 0..z {
                weight *= links[i].p.powf(s[i]) * (1.0 - links[i].p).powf(1.0 - s[i]);
            }
            let mut snr = 0.0;
            for i in 0..z {
                snr += c[i] * c[i] * links[i].gamma_sq * d[i].powf(-links[i].alpha);
                for j in 0..z {
                    if j != i {
                        snr += c[i]
                            * c[j]
                            * links[i].gamma_prime
                            * links[j].gamma_prime
                            * d[i].powf(-links[i].alpha / 2.0)
                            * d[j].powf(-links[j].alpha / 2.0);
                    }
                }
            }
            total += weight * (1.0 + snr).log2();
        }
        bandwidth * total
    }

    #[test]
    fn two_irs_matches_enumeration() {
        let cfg = default_scenario();
        let model = RateModel::new(&cfg);
        for q in [
            Vec2::new(0.0, 0.0),
            Vec2::new(30.0, 55.0),
            Vec2::new(80.0, 20.0),
        ] {
            for ue in 0..2 {
                let d = model.distances(ue, &[0, 1], q);
                let got = model.expected_rate(ue, &[0, 1], d[0], &d[1..]);
                let want = brute_force_rate(&model.links(ue, &[0, 1]), &d, 0.0, 1e6);
                assert_relative_eq!(got, want, max_relative = 1e-12);
            }
        }
        let mut nlos = cfg.clone();
        nlos.channel.nlos_attenuation = 0.3;
        let model = RateModel::new(&nlos);
        let d = model.distances(1, &[0, 1], Vec2::new(50.0, 50.0));
        assert_relative_eq!(
            model.expected_rate(1, &[0, 1], d[0], &d[1..]),
            brute_force_rate(&model.links(1, &[0, 1]), &d, 0.3, 1e6),
            max_relative = 1e-12
        );
    }

    #[test]
    fn degenerate_probabilities() {
        let mut cfg = default_scenario();
        // los_a huge and b tiny drive p to ~0.
        for ue in &mut cfg.ues {
            ue.fixed_elevation_deg = Some(0.0);
            ue.los_a = 1e9;
        }
        for irs in &mut cfg.irss {
            irs.fixed_elevation_deg = Some(0.0);
            irs.los_a = 1e9;
        }
        let model = RateModel::new(&cfg);
        assert!(model.rate_at(0, &[0, 1], Vec2::new(30.0, 55.0)) < 1e-3);

        let mut cfg = default_scenario().without_irss();
        cfg.ues[0].fixed_elevation_deg = Some(90.0);
        cfg.ues[0].los_a = 1e-12;
        let model = RateModel::new(&cfg);
        let p = model.los_p_ue(0);
        assert!(p > 1.0 - 1e-10);
        let d = 120.0;
        let g2 = model.links(0, &[])[0].gamma_sq;
        assert_relative_eq!(
            model.expected_rate(0, &[], d, &[]),
            1e6 * (1.0 + g2 * d.powf(-2.5)).log2(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn single_irs_matches_two_state_formula() {
        let cfg = rate_validation_scenario();
        let model = RateModel::new(&cfg);
        let g = model.gamma_set(0, 0);
        let (pu, pi) = (model.los_p_ue(0), model.los_p_irs(0));
        for x in [0.0, 120.0, 245.0, 250.0, 400.0] {
            let q = Vec2::new(x, 0.0);
            let du = model.ue_distance(0, q);
            let di = model.irs_distance(0, q);
            let au = cfg.channel.alpha_ua_ue;
            let ai = cfg.channel.alpha_ua_irs;
            let snr = |su: f64, si: f64| {
                su * g.gamma_u.powi(2) * du.powf(-au)
                    + 2.0
                        * su
                        * si
                        * g.gamma_u_prime
                        * g.gamma_i_prime
                        * du.powf(-au / 2.0)
                        * di.powf(-ai / 2.0)
                    + si * g.gamma_i.powi(2) * di.powf(-ai)
            };
            let want = 1e6
                * (pu * pi * (1.0 + snr(1.0, 1.0)).log2()
                    + pu * (1.0 - pi) * (1.0 + snr(1.0, 0.0)).log2()
                    + (1.0 - pu) * pi * (1.0 + snr(0.0, 1.0)).log2());
            assert_relative_eq!(model.rate_at(0, &[0], q), want, max_relative = 1e-12);
        }
    }

    #[test]
    fn gamma_ordering() {
        let cfg = default_scenario();
        for moment in [SecondMoment::Clt, SecondMoment::Exact] {
            let model = RateModel::with_second_moment(&cfg, moment);
            for w in 0..2 {
                for k in 0..2 {
                    let g = model.gamma_set(w, k);
                    assert!(g.gamma_i >= g.gamma_i_prime);
                    assert!(g.gamma_u >= g.gamma_u_prime);
                }
            }
        }
    }

    #[test]
    fn gradient_hand_example() {
        let f = LogSnr::new(vec![1.0], vec![0.0], vec![2.0]);
        assert_relative_eq!(f.gradient(&[1.0])[0], -1.0 / LN_2, max_relative = 1e-14);
        let zero = LogSnr::new(vec![0.0; 3], vec![0.0; 3], vec![2.0, 3.0, 1.0]);
        assert!(zero.gradient(&[1.0, 2.0, 3.0]).iter().all(|&g| g == 0.0));
        assert_eq!(
            hessian_min_eigenvalue(&[0.0; 2], &[0.0; 2], &[2.0, 2.5], &[3.0, 4.0]),
            0.0
        );
        assert!(hessian_min_eigenvalue(&[1.0], &[0.0], &[2.0], &[1.0]) >= 0.0);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let f = LogSnr::new(
            vec![3.0, 0.5, 2.0],
            vec![1.5, 2.0, 0.7],
            vec![2.2, 3.0, 2.5],
        );
        let u = [1.3, 2.1, 0.9];
        let h = f.hessian(&u);
        for j in 0..3 {
            let step = 1e-6 * u[j];
            let mut up = u;
            let mut dn = u;
            up[j] += step;
            dn[j] -= step;
            let (gp, gm) = (f.gradient(&up), f.gradient(&dn));
            for i in 0..3 {
                let fd = (gp[i] - gm[i]) / (2.0 * step);
                assert_relative_eq!(h[(i, j)], fd, max_relative = 1e-5, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn taylor_anchor_is_exact() {
        let cfg = default_scenario();
        let model = RateModel::new(&cfg);
        let d = model.distances(0, &[0, 1], Vec2::new(40.0, 40.0));
        let t = model.taylor_lower_bound(0, &[0, 1], &d);
        assert_eq!(t.eval(&d), model.expected_rate(0, &[0, 1], d[0], &d[1..]));
        assert_eq!(t.gradient, model.rate_gradient(0, &[0, 1], &d));
        assert_relative_eq!(
            t.offset() + t.gradient.iter().zip(&d).map(|(g, x)| g * x).sum::<f64>(),
            t.value,
            max_relative = 1e-12
        );
    }
}
