//! Canonical conic programs and the solver contract.
//!
//! A program minimises `c^T x + c0` subject to cone memberships of affine
//! expressions. Cone conventions, for rows `e_0, e_1, ...` of a block:
//!
//! | cone              | membership                                        |
//! |-------------------|---------------------------------------------------|
//! | `Zero`            | `e_i = 0`                                         |
//! | `Nonneg`          | `e_i >= 0`                                        |
//! | `Soc`             | `e_0 >= ||(e_1, ...)||`                           |
//! | `RotatedSoc`      | `2 e_0 e_1 >= ||(e_2, ...)||^2`, `e_0, e_1 >= 0`  |
//! | `Power(a)`        | `e_0^a e_1^(1-a) >= |e_2|`, `e_0, e_1 >= 0`       |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;
#[allow(unused_imports)]
use num_traits::Float;

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Sparse affine expression `sum coef * x[var] + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        LinExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        }
    }

    pub fn scaled_var(v: usize, coef: f64) -> Self {
        LinExpr {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn minus(self, other: &LinExpr) -> Self {
        self.plus(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        LinExpr {
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() + self.constant
    }

    /// Terms with duplicate variables merged and zeros dropped, sorted by index.
    pub fn compact(&self) -> LinExpr {
        let mut t = self.terms.clone();
        t.sort_by_key(|p| p.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (v, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => out.push((v, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        LinExpr {
            terms: out,
            constant: self.constant,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cone {
    Zero,
    Nonneg,
    Soc,
    RotatedSoc,
    /// Three-dimensional power cone with exponent in (0, 1).
    Power(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub cone: Cone,
    pub rows: Vec<LinExpr>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProgramError {
    #[error("block {block}: variable {var} out of range ({n_vars} variables)")]
    VariableOutOfRange {
        block: usize,
        var: usize,
        n_vars: usize,
    },
    #[error("block {block}: cone {cone:?} cannot have {rows} rows")]
    ConeDimension {
        block: usize,
        cone: Cone,
        rows: usize,
    },
    #[error("power cone exponent {0} outside (0, 1)")]
    PowerExponent(f64),
    #[error("objective has {got} coefficients for {n_vars} variables")]
    ObjectiveLength { got: usize, n_vars: usize },
    #[error("non-finite coefficient in block {block}")]
    NonFinite { block: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub blocks: Vec<ConeBlock>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, lower: Option<f64>, upper: Option<f64>) -> usize {
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_free(&mut self) -> usize {
        self.add_var(None, None)
    }

    pub fn add_nonneg_var(&mut self) -> usize {
        self.add_var(Some(0.0), None)
    }

    pub fn add_cost(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn add_cost_expr(&mut self, e: &LinExpr) {
        for &(v, c) in &e.terms {
            self.objective[v] += c;
        }
        self.objective_constant += e.constant;
    }

    pub fn push(&mut self, cone: Cone, rows: Vec<LinExpr>) {
        self.blocks.push(ConeBlock { cone, rows });
    }

    /// `e = 0`.
    pub fn add_eq(&mut self, e: LinExpr) {
        self.push(Cone::Zero, vec![e]);
    }

    /// `e >= 0`.
    pub fn add_nonneg(&mut self, e: LinExpr) {
        self.push(Cone::Nonneg, vec![e]);
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: &LinExpr, rhs: &LinExpr) {
        self.add_nonneg(rhs.clone().minus(lhs));
    }

    /// `head >= ||tail||`.
    pub fn add_soc(&mut self, head: LinExpr, tail: Vec<LinExpr>) {
        let mut rows = vec![head];
        rows.extend(tail);
        self.push(Cone::Soc, rows);
    }

    /// `2 a b >= ||tail||^2`, `a, b >= 0`.
    pub fn add_rotated_soc(&mut self, a: LinExpr, b: LinExpr, tail: Vec<LinExpr>) {
        let mut rows = vec![a, b];
        rows.extend(tail);
        self.push(Cone::RotatedSoc, rows);
    }

    /// `a^alpha b^(1-alpha) >= |c|`, `a, b >= 0`.
    pub fn add_power(&mut self, a: LinExpr, b: LinExpr, c: LinExpr, alpha: f64) {
        self.push(Cone::Power(alpha), vec![a, b, c]);
    }

    /// Fresh `t` with `t >= a^2 / tau`, encoded as `(t, tau/2, a)` rotated.
    pub fn add_quad_over_lin(&mut self, a: LinExpr, tau: LinExpr) -> usize {
        let t = self.add_nonneg_var();
        self.add_rotated_soc(LinExpr::var(t), tau.scale(0.5), vec![a]);
        t
    }

    /// Fresh `t` with `t >= delta^3 / time^2`, encoded as `(t, time, delta)`
    /// in the power cone with exponent 1/3.
    pub fn add_cubic_over_square(&mut self, delta: LinExpr, time: LinExpr) -> usize {
        let t = self.add_nonneg_var();
        self.add_power(LinExpr::var(t), time, delta, 1.0 / 3.0);
        t
    }

    /// Fresh `w` with `w >= time^2 / y` and `w^2 <= bound`, which together
    /// give `time^4 / y^2 <= bound`.
    pub fn add_quartic_over_square(&mut self, time: LinExpr, y: LinExpr, bound: LinExpr) -> usize {
        let w = self.add_nonneg_var();
        self.add_rotated_soc(LinExpr::var(w), y.scale(0.5), vec![time]);
        self.add_rotated_soc(
            bound.scale(0.5),
            LinExpr::constant(1.0),
            vec![LinExpr::var(w)],
        );
        w
    }

    /// Fresh `delta` with `delta >= ||diff||`.
    pub fn add_norm_bound(&mut self, diff: Vec<LinExpr>) -> usize {
        let d = self.add_nonneg_var();
        self.add_soc(LinExpr::var(d), diff);
        d
    }

    pub fn check(&self) -> Result<(), ProgramError> {
        let n = self.n_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(ProgramError::ObjectiveLength {
                got: self.lower.len(),
                n_vars: n,
            });
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let rows = block.rows.len();
            let ok = match block.cone {
                Cone::Zero | Cone::Nonneg => rows >= 1,
                Cone::Soc => rows >= 1,
                Cone::RotatedSoc => rows >= 2,
                Cone::Power(a) => {
                    if !(a > 0.0 && a < 1.0) {
                        return Err(ProgramError::PowerExponent(a));
                    }
                    rows == 3
                }
            };
            if !ok {
                return Err(ProgramError::ConeDimension {
                    block: b,
                    cone: block.cone,
                    rows,
                });
            }
            for row in &block.rows {
                if !row.constant.is_finite() {
                    return Err(ProgramError::NonFinite { block: b });
                }
                for &(v, c) in &row.terms {
                    if v >= n {
                        return Err(ProgramError::VariableOutOfRange {
                            block: b,
                            var: v,
                            n_vars: n,
                        });
                    }
                    if !c.is_finite() {
                        return Err(ProgramError::NonFinite { block: b });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.objective_constant
    }

    /// Largest violation of any bound or cone at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, &v) in x.iter().enumerate() {
            if let Some(l) = self.lower[i] {
                worst = worst.max(l - v);
            }
            if let Some(u) = self.upper[i] {
                worst = worst.max(v - u);
            }
        }
        for block in &self.blocks {
            worst = worst.max(block_violation(block, x));
        }
        worst
    }

    /// Variable bounds as `(var, is_upper, value)` triples.
    pub fn bounds(&self) -> impl Iterator<Item = (usize, bool, f64)> + '_ {
        let lo = self
            .lower
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|v| (i, false, v)));
        let hi = self
            .upper
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.map(|v| (i, true, v)));
        lo.chain(hi)
    }

    /// The program in Conic Benchmark Format (version 3).
    pub fn to_cbf(&self) -> String {
        let mut s = String::new();
        let n = self.n_vars();
        let mut blocks: Vec<(String, Vec<LinExpr>)> = Vec::new();
        let mut pow_alphas: Vec<f64> = Vec::new();
        for (i, up, v) in self.bounds() {
            let e = if up {
                LinExpr {
                    terms: vec![(i, -1.0)],
                    constant: v,
                }
            } else {
                LinExpr {
                    terms: vec![(i, 1.0)],
                    constant: -v,
                }
            };
            blocks.push((String::from("L+"), vec![e]));
        }
        for b in &self.blocks {
            let tag = match b.cone {
                Cone::Zero => String::from("L="),
                Cone::Nonneg => String::from("L+"),
                Cone::Soc => String::from("Q"),
                Cone::RotatedSoc => String::from("QR"),
                Cone::Power(a) => {
                    pow_alphas.push(a);
                    format!("@{}:POW", pow_alphas.len() - 1)
                }
            };
            blocks.push((tag, b.rows.clone()));
        }
        let m: usize = blocks.iter().map(|b| b.1.len()).sum();
        let _ = write!(s, "VER\n3\n\nOBJSENSE\nMIN\n\n");
        if !pow_alphas.is_empty() {
            let _ = write!(
                s,
                "POWCONES\n{} {}\n",
                pow_alphas.len(),
                2 * pow_alphas.len()
            );
            for a in &pow_alphas {
                let _ = write!(s, "2\n{:e}\n{:e}\n", a, 1.0 - a);
            }
            s.push('\n');
        }
        let _ = write!(s, "VAR\n{n} 1\nF {n}\n\n");
        let _ = writeln!(s, "CON\n{m} {}", blocks.len());
        for (tag, rows) in &blocks {
            let _ = writeln!(s, "{tag} {}", rows.len());
        }
        s.push('\n');
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .copied()
            .enumerate()
            .filter(|p| p.1 != 0.0)
            .collect();
        let _ = writeln!(s, "OBJACOORD\n{}", obj.len());
        for (i, c) in obj {
            let _ = writeln!(s, "{i} {c:e}");
        }
        if self.objective_constant != 0.0 {
            let _ = write!(s, "\nOBJBCOORD\n{:e}\n", self.objective_constant);
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut r = 0;
        for (_, rows) in &blocks {
            for row in rows {
                for (v, c) in row.compact().terms {
                    a.push((r, v, c));
                }
                if row.constant != 0.0 {
                    b.push((r, row.constant));
                }
                r += 1;
            }
        }
        let _ = writeln!(s, "\nACOORD\n{}", a.len());
        for (r, v, c) in a {
            let _ = writeln!(s, "{r} {v} {c:e}");
        }
        let _ = writeln!(s, "\nBCOORD\n{}", b.len());
        for (r, c) in b {
            let _ = writeln!(s, "{r} {c:e}");
        }
        s
    }
}

fn block_violation(block: &ConeBlock, x: &[f64]) -> f64 {
    let e: Vec<f64> = block.rows.iter().map(|r| r.eval(x)).collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    match block.cone {
        Cone::Zero => e.iter().fold(0.0, |m, v| m.max(v.abs())),
        Cone::Nonneg => e.iter().fold(0.0, |m, v| m.max(-v)),
        Cone::Soc => (norm(&e[1..]) - e[0]).max(0.0),
        Cone::RotatedSoc => {
            // Rotate to the standard cone: (a + b, a - b, sqrt2 * tail).
            let (a, b) = (e[0], e[1]);
            let mut tail: Vec<f64> = e[2..]
                .iter()
                .map(|v| v * core::f64::consts::SQRT_2)
                .collect();
            tail.push(a - b);
            ((norm(&tail) - (a + b)) / core::f64::consts::SQRT_2).max(0.0)
        }
        Cone::Power(alpha) => {
            let (a, b, c) = (e[0], e[1], e[2]);
            let neg = (-a).max(0.0).max(-b);
            let geo = a.max(0.0).powf(alpha) * b.max(0.0).powf(1.0 - alpha);
            neg.max(c.abs() - geo)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
}

/// A backend able to solve [`ConicProgram`]s.
pub trait ConicSolver {
    fn solve(&self, prog: &ConicProgram, tol: f64) -> SolveReport;
}

impl<S: ConicSolver + ?Sized> ConicSolver for &S {
    fn solve(&self, prog: &ConicProgram, tol: f64) -> SolveReport {
        (**self).solve(prog, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn violation_of_each_cone() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        let y = p.add_free();
        let z = p.add_free();
        p.add_soc(LinExpr::var(x), vec![LinExpr::var(y), LinExpr::var(z)]);
        assert_eq!(p.max_violation(&[5.0, 3.0, 4.0]), 0.0);
        assert!((p.max_violation(&[4.0, 3.0, 4.0]) - 1.0).abs() < 1e-12);

        let mut p = ConicProgram::new();
        let (a, b, c) = (p.add_free(), p.add_free(), p.add_free());
        p.add_rotated_soc(LinExpr::var(a), LinExpr::var(b), vec![LinExpr::var(c)]);
        // 2 * 1 * 2 = 4 = 2^2: boundary.
        assert!(p.max_violation(&[1.0, 2.0, 2.0]) < 1e-12);
        assert!(p.max_violation(&[1.0, 2.0, 2.1]) > 0.0);

        let mut p = ConicProgram::new();
        let (a, b, c) = (p.add_free(), p.add_free(), p.add_free());
        p.add_power(LinExpr::var(a), LinExpr::var(b), LinExpr::var(c), 1.0 / 3.0);
        // 8^(1/3) * 1^(2/3) = 2.
        assert!(p.max_violation(&[8.0, 1.0, 2.0]) < 1e-12);
        assert!(p.max_violation(&[7.9, 1.0, 2.0]) > 0.0);
    }

    #[test]
    fn quartic_helper_boundary() {
        let mut p = ConicProgram::new();
        let t = p.add_free();
        let y = p.add_free();
        let w =
            p.add_quartic_over_square(LinExpr::var(t), LinExpr::var(y), LinExpr::constant(16.0));
        let mut x = vec![0.0; p.n_vars()];
        x[t] = 2.0;
        x[y] = 1.0;
        x[w] = 4.0;
        assert!(p.max_violation(&x) < 1e-12);
        x[y] = 0.99;
        x[w] = 4.0 / 0.99;
        assert!(p.max_violation(&x) > 0.0);
    }

    #[test]
    fn check_rejects_bad_programs() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_nonneg(LinExpr::var(x + 1));
        assert!(matches!(
            p.check(),
            Err(ProgramError::VariableOutOfRange { .. })
        ));
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.push(Cone::Power(0.5), vec![LinExpr::var(x)]);
        assert!(matches!(p.check(), Err(ProgramError::ConeDimension { .. })));
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.push(Cone::Power(1.5), vec![LinExpr::var(x); 3]);
        assert!(matches!(p.check(), Err(ProgramError::PowerExponent(_))));
    }

    #[test]
    fn cbf_lists_every_cone() {
        let mut p = ConicProgram::new();
        let x = p.add_nonneg_var();
        p.add_cost(x, 1.0);
        let t = p.add_cubic_over_square(LinExpr::constant(2.0), LinExpr::constant(1.0));
        p.add_quad_over_lin(LinExpr::var(t), LinExpr::var(x));
        p.add_eq(LinExpr::var(x).offset(-3.0));
        let s = p.to_cbf();
        for tag in [
            "VER\n3", "POWCONES", "@0:POW 3", "QR 3", "L= 1", "L+ 1", "ACOORD", "BCOORD",
        ] {
            assert!(s.contains(tag), "missing {tag}:\n{s}");
        }
    }

    #[test]
    fn compact_merges_terms() {
        let e = LinExpr {
            terms: vec![(2, 1.0), (0, 1.0), (2, -1.0), (0, 2.0)],
            constant: 1.0,
        };
        assert_eq!(e.compact().terms, vec![(0, 3.0)]);
    }
}
