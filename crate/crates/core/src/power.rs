//! Rotary-wing propulsion power and mission energy.

use crate::scenario::PowerParams;
use crate::trajectory::Trajectory;
#[allow(unused_imports)]
use num_traits::Float;

/// Propulsion power (W) in level flight at speed `v_mps`: blade profile,
/// induced and parasite terms.
pub fn flight_power(v_mps: f64, p: &PowerParams) -> f64 {
    let v2 = v_mps * v_mps;
    let v0_2 = p.v0_mps * p.v0_mps;
    let blade = p.p0_w * (1.0 + 3.0 * v2 / (p.u_tip_mps * p.u_tip_mps));
    let induced_ratio = ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2)).max(0.0);
    let induced = p.pi_w * induced_ratio.sqrt();
    let parasite = p.delta_p() * v2 * v_mps;
    blade + induced + parasite
}

/// Energy (J) of flying `length_m` in `time_s` at constant speed. A
/// zero-length segment is a hover.
pub fn segment_energy(length_m: f64, time_s: f64, p: &PowerParams) -> Result<f64, EnergyError> {
    if time_s <= 0.0 {
        return if length_m > 0.0 {
            Err(EnergyError::ZeroTimeMove { length_m })
        } else {
            Ok(0.0)
        };
    }
    Ok(time_s * flight_power(length_m / time_s, p))
}

/// Induced-power slack for a segment: `T (sqrt(1 + V^4/4v0^4) - V^2/2v0^2)^(1/2)`.
pub fn induced_slack(length_m: f64, time_s: f64, p: &PowerParams) -> f64 {
    if time_s <= 0.0 {
        return 0.0;
    }
    let v = length_m / time_s;
    let v2 = v * v;
    let v0_2 = p.v0_mps * p.v0_mps;
    time_s
        * ((1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2))
            .max(0.0)
            .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("segment of {length_m} m has zero flight time")]
    ZeroTimeMove { length_m: f64 },
}

/// Speed minimising energy per meter, `argmin P(V)/V`.
///
/// A 0.1 m/s grid scan locates the basin (and checks there is a single one),
/// then golden-section search refines it.
pub fn energy_efficient_speed(p: &PowerParams) -> f64 {
    let per_meter = |v: f64| flight_power(v, p) / v;
    let step = 0.1;
    let grid: alloc::vec::Vec<f64> = (1..=1000).map(|i| per_meter(i as f64 * step)).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    debug_assert!(
        grid[..best].windows(2).all(|w| w[1] <= w[0])
            && grid[best..].windows(2).all(|w| w[1] >= w[0]),
        "energy per meter is not unimodal on the scan grid"
    );
    let lo = (best as f64) * step;
    let hi = (best as f64 + 2.0) * step;
    golden_section(per_meter, lo.max(1e-6), hi, 1e-9)
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Mission energy split into propulsion and communication parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct EnergyBreakdown {
    pub flight_j: f64,
    pub comm_j: f64,
    pub total_j: f64,
}

/// `sum_n T_n P(Delta_n / T_n) + P_c sum_{n,k} tau_nk`.
pub fn total_energy(
    traj: &Trajectory,
    tx_power_w: f64,
    p: &PowerParams,
) -> Result<EnergyBreakdown, EnergyError> {
    let mut flight = 0.0;
    for n in 0..traj.n_segments() {
        flight += segment_energy(traj.segment_length(n), traj.flight_times[n], p)?;
    }
    let comm = tx_power_w * traj.tx_times.iter().flatten().sum::<f64>();
    Ok(EnergyBreakdown {
        flight_j: flight,
        comm_j: comm,
        total_j: flight + comm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use alloc::vec;
    use approx::assert_relative_eq;

    #[test]
    fn hover_power() {
        assert_relative_eq!(
            flight_power(0.0, &PowerParams::default()),
            168.49,
            epsilon = 1e-12
        );
    }

    #[test]
    fn power_at_ten() {
        // Independent evaluation of the three-term model at 10 m/s.
        assert_relative_eq!(
            flight_power(10.0, &PowerParams::default()),
            126.033_686_773_721_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn cubic_asymptote() {
        let p = PowerParams::default();
        assert_relative_eq!(p.delta_p(), 0.009_242_625, max_relative = 1e-12);
        let v = 1e4;
        assert_relative_eq!(
            flight_power(v, &p) / (v * v * v),
            p.delta_p(),
            max_relative = 1e-3
        );
    }

    #[test]
    fn efficient_speed() {
        let p = PowerParams::default();
        let ve = energy_efficient_speed(&p);
        assert!((ve - 18.3).abs() <= 0.1, "V_e = {ve}");
        let e = flight_power(ve, &p) / ve;
        for i in 1..=300 {
            let v = i as f64 * 0.1;
            assert!(e <= flight_power(v, &p) / v + 1e-12);
        }
        let draggy = PowerParams {
            d0: 2.0 * p.d0,
            ..p.clone()
        };
        assert!(energy_efficient_speed(&draggy) < ve);
    }

    #[test]
    fn energy_examples() {
        let p = PowerParams::default();
        let one = Trajectory::new(
            vec![Vec2::ZERO, Vec2::new(18.3, 0.0)],
            vec![1.0],
            vec![vec![0.0]],
        );
        let e = total_energy(&one, 0.1, &p).unwrap();
        assert_relative_eq!(e.flight_j, flight_power(18.3, &p), max_relative = 1e-12);
        assert_eq!(e.comm_j, 0.0);

        let hover = Trajectory::new(vec![Vec2::ZERO, Vec2::ZERO], vec![10.0], vec![vec![10.0]]);
        let e = total_energy(&hover, 0.1, &p).unwrap();
        assert_relative_eq!(e.comm_j, 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.flight_j, 1684.9, max_relative = 1e-12);
        assert_eq!(e.total_j, e.flight_j + e.comm_j);

        let bad = Trajectory::new(
            vec![Vec2::ZERO, Vec2::new(1.0, 0.0)],
            vec![0.0],
            vec![vec![0.0]],
        );
        assert!(total_energy(&bad, 0.1, &p).is_err());
    }

    #[test]
    fn induced_slack_satisfies_defining_equation() {
        let p = PowerParams::default();
        for (len, t) in [(0.0, 2.0), (1.0, 0.05), (0.7, 0.3)] {
            let y: f64 = induced_slack(len, t, &p);
            let lhs = t.powi(4) / (y * y);
            let rhs = y * y + len * len / (p.v0_mps * p.v0_mps);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }
}
