//! Interior-point backend for [`ConicProgram`]s, built on Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use irs_uav_core::conic::{Cone, ConicProgram, ConicSolver, LinExpr, SolveReport, SolveStatus};

/// Clarabel-backed solver, single-threaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    /// Print the interior-point log to stdout.
    pub verbose: bool,
    /// Encode cube-over-square power cones with second-order cones.
    pub power_as_soc: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        ClarabelSolver {
            max_iter: 200,
            verbose: false,
            power_as_soc: true,
        }
    }
}

/// `A x + s = b`, `s` in the listed cones.
struct Lowered {
    rows: usize,
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Lowered {
    fn new() -> Self {
        Lowered {
            rows: 0,
            i: Vec::new(),
            j: Vec::new(),
            v: Vec::new(),
            b: Vec::new(),
            cones: Vec::new(),
        }
    }

    /// Appends the slack row `s = e(x)`.
    fn row(&mut self, e: &LinExpr) {
        for &(var, c) in &e.terms {
            self.i.push(self.rows);
            self.j.push(var);
            self.v.push(-c);
        }
        self.b.push(e.constant);
        self.rows += 1;
    }
}

fn lower(prog: &ConicProgram, power_as_soc: bool, next_var: &mut usize) -> Lowered {
    let mut out = Lowered::new();
    let zero: Vec<&LinExpr> = prog
        .blocks
        .iter()
        .filter(|b| b.cone == Cone::Zero)
        .flat_map(|b| b.rows.iter())
        .collect();
    if !zero.is_empty() {
        for e in &zero {
            out.row(e);
        }
        out.cones.push(SupportedConeT::ZeroConeT(zero.len()));
    }

    let mut nonneg = 0;
    for (var, upper, bound) in prog.bounds() {
        let e = if upper {
            LinExpr::scaled_var(var, -1.0).offset(bound)
        } else {
            LinExpr::var(var).offset(-bound)
        };
        out.row(&e);
        nonneg += 1;
    }
    for block in prog.blocks.iter().filter(|b| b.cone == Cone::Nonneg) {
        for e in &block.rows {
            out.row(e);
            nonneg += 1;
        }
    }
    if nonneg > 0 {
        out.cones.push(SupportedConeT::NonnegativeConeT(nonneg));
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for block in &prog.blocks {
        match block.cone {
            Cone::Zero | Cone::Nonneg => {}
            Cone::Soc => {
                for e in &block.rows {
                    out.row(e);
                }
                out.cones
                    .push(SupportedConeT::SecondOrderConeT(block.rows.len()));
            }
            Cone::RotatedSoc => {
                // 2ab >= ||c||^2  <=>  (a + b, a - b, sqrt2 c) in the standard cone.
                let (a, b) = (&block.rows[0], &block.rows[1]);
                out.row(&a.clone().plus(b));
                out.row(&a.clone().minus(b));
                for e in &block.rows[2..] {
                    out.row(&e.scale(sqrt2));
                }
                out.cones
                    .push(SupportedConeT::SecondOrderConeT(block.rows.len()));
            }
            Cone::Power(alpha) if power_as_soc && (alpha - 1.0 / 3.0).abs() < 1e-12 => {
                // t^(1/3) T^(2/3) >= |d|  <=>  (t T T |d|)^(1/4) >= |d|:
                // a^2 <= t T, b^2 <= T s, d^2 <= a b, s >= |d|.
                let (t, tt, d) = (&block.rows[0], &block.rows[1], &block.rows[2]);
                let a = LinExpr::var(*next_var);
                let b = LinExpr::var(*next_var + 1);
                let sabs = LinExpr::var(*next_var + 2);
                *next_var += 3;
                let mut rot = |x: &LinExpr, y: &LinExpr, z: &LinExpr| {
                    out.row(&x.clone().plus(y));
                    out.row(&x.clone().minus(y));
                    out.row(&z.scale(2.0));
                    out.cones.push(SupportedConeT::SecondOrderConeT(3));
                };
                // 4xy >= (2z)^2 after the rotation used above, i.e. xy >= z^2.
                rot(t, tt, &a);
                rot(tt, &sabs, &b);
                rot(&a, &b, &sabs);
                out.row(&sabs.clone().minus(d));
                out.row(&sabs.clone().plus(d));
                out.cones.push(SupportedConeT::NonnegativeConeT(2));
            }
            Cone::Power(alpha) => {
                for e in &block.rows {
                    out.row(e);
                }
                out.cones.push(SupportedConeT::PowerConeT(alpha));
            }
        }
    }
    out
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, prog: &ConicProgram, tol: f64) -> SolveReport {
        let n = prog.n_vars();
        let failed = |status| SolveReport {
            status,
            x: vec![0.0; n],
            objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            iterations: 0,
        };
        if prog.check().is_err() {
            return failed(SolveStatus::NumericalLimit);
        }
        let mut total = n;
        let low = lower(prog, self.power_as_soc, &mut total);
        let p = CscMatrix::<f64>::zeros((total, total));
        let a = CscMatrix::new_from_triplets(low.rows, total, low.i, low.j, low.v);
        let mut cost = prog.objective.clone();
        cost.resize(total, 0.0);
        let settings = match DefaultSettingsBuilder::default()
            .verbose(self.verbose)
            .max_iter(self.max_iter)
            .max_threads(1)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .build()
        {
            Ok(s) => s,
            Err(_) => return failed(SolveStatus::NumericalLimit),
        };
        let mut solver = match DefaultSolver::new(&p, &cost, &a, &low.b, &low.cones, settings) {
            Ok(s) => s,
            Err(_) => return failed(SolveStatus::NumericalLimit),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => SolveStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SolveStatus::Unbounded
            }
            _ => SolveStatus::NumericalLimit,
        };
        SolveReport {
            status,
            x: sol.x[..n].to_vec(),
            objective: sol.obj_val + prog.objective_constant,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            iterations: sol.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn solve(p: &ConicProgram) -> SolveReport {
        let r = ClarabelSolver::default().solve(p, 1e-9);
        assert_eq!(r.status, SolveStatus::Optimal);
        r
    }

    #[test]
    fn linear_program() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_cost(x, 1.0);
        p.add_nonneg(LinExpr::var(x).offset(-3.0));
        assert_relative_eq!(solve(&p).x[x], 3.0, epsilon = 1e-7);
    }

    #[test]
    fn power_cone_cube() {
        // min t  s.t. (t, 1, x) in Pow(1/3), x = 2  ->  t = 8
        let mut p = ConicProgram::new();
        let t = p.add_free();
        let x = p.add_free();
        p.add_cost(t, 1.0);
        p.add_power(
            LinExpr::var(t),
            LinExpr::constant(1.0),
            LinExpr::var(x),
            1.0 / 3.0,
        );
        p.add_eq(LinExpr::var(x).offset(-2.0));
        assert_relative_eq!(solve(&p).x[t], 8.0, max_relative = 1e-6);
        let native = ClarabelSolver {
            power_as_soc: false,
            ..Default::default()
        };
        let r = native.solve(&p, 1e-9);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.x[t], 8.0, max_relative = 1e-6);
        assert_eq!(r.x.len(), p.n_vars());
    }

    #[test]
    fn power_lowering_handles_negative_base() {
        // |x| enters the cone: x = -2 also needs t = 8.
        let mut p = ConicProgram::new();
        let t = p.add_cubic_over_square(LinExpr::constant(-2.0), LinExpr::constant(1.0));
        p.add_cost(t, 1.0);
        assert_relative_eq!(solve(&p).x[t], 8.0, max_relative = 1e-6);
    }

    #[test]
    fn rotated_cone_convention() {
        // Raw cone: 2 t y >= A^2 with A = 2, y = 4 gives t = 0.5.
        let mut p = ConicProgram::new();
        let t = p.add_free();
        p.add_cost(t, 1.0);
        p.add_rotated_soc(
            LinExpr::var(t),
            LinExpr::constant(4.0),
            vec![LinExpr::constant(2.0)],
        );
        assert_relative_eq!(solve(&p).x[t], 0.5, max_relative = 1e-6);
        // Helper: t >= A^2 / tau gives 1.
        let mut p = ConicProgram::new();
        let t = p.add_quad_over_lin(LinExpr::constant(2.0), LinExpr::constant(4.0));
        p.add_cost(t, 1.0);
        assert_relative_eq!(solve(&p).x[t], 1.0, max_relative = 1e-6);
    }

    #[test]
    fn epigraph_helpers() {
        let mut p = ConicProgram::new();
        let t = p.add_quad_over_lin(LinExpr::constant(0.0), LinExpr::constant(1.0));
        p.add_cost(t, 1.0);
        assert!(solve(&p).x[t].abs() < 1e-7);

        let mut p = ConicProgram::new();
        let t = p.add_cubic_over_square(LinExpr::constant(2.0), LinExpr::constant(1.0));
        p.add_cost(t, 1.0);
        assert_relative_eq!(solve(&p).x[t], 8.0, max_relative = 1e-6);

        // T = 2, y = 1, bound 16 sits on the boundary and must be feasible.
        let mut p = ConicProgram::new();
        let w = p.add_quartic_over_square(
            LinExpr::constant(2.0),
            LinExpr::constant(1.0),
            LinExpr::constant(16.0),
        );
        p.add_cost(w, 1.0);
        let r = ClarabelSolver::default().solve(&p, 1e-9);
        assert_ne!(r.status, SolveStatus::Infeasible);
        assert_relative_eq!(r.x[w], 4.0, max_relative = 1e-4);
        // Slightly tighter bound is infeasible.
        let mut p = ConicProgram::new();
        let w = p.add_quartic_over_square(
            LinExpr::constant(2.0),
            LinExpr::constant(1.0),
            LinExpr::constant(15.0),
        );
        p.add_cost(w, 1.0);
        assert_eq!(
            ClarabelSolver::default().solve(&p, 1e-9).status,
            SolveStatus::Infeasible
        );

        let mut p = ConicProgram::new();
        let d = p.add_norm_bound(vec![LinExpr::constant(3.0), LinExpr::constant(4.0)]);
        p.add_cost(d, 1.0);
        assert_relative_eq!(solve(&p).x[d], 5.0, max_relative = 1e-7);
    }

    #[test]
    fn infeasible_and_unbounded_are_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_var(Some(0.0), None);
        p.add_nonneg(LinExpr::scaled_var(x, -1.0).offset(-1.0));
        assert_eq!(
            ClarabelSolver::default().solve(&p, 1e-8).status,
            SolveStatus::Infeasible
        );
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_cost(x, 1.0);
        assert_eq!(
            ClarabelSolver::default().solve(&p, 1e-8).status,
            SolveStatus::Unbounded
        );
    }
}
