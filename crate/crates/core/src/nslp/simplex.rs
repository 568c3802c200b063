//! Dense two-phase simplex with Bland's rule.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
            Relation::Ge => Relation::Le,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
    pub label: String,
}

/// `max c·x` subject to the rows and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<Constraint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LPSolution {
    pub status: Status,
    pub value: f64,
    pub primal: Vec<f64>,
    /// One multiplier per row: `≥ 0` for `≤` rows, `≤ 0` for `≥` rows.
    pub dual: Vec<f64>,
}

impl LinearProgram {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Result<Self> {
        if objective.len() != num_vars {
            return Err(Error::Domain("objective length differs from variable count".into()));
        }
        Ok(Self { num_vars, objective, rows: Vec::new() })
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64, label: impl Into<String>) -> Result<()> {
        if coeffs.len() != self.num_vars {
            return Err(Error::Domain(format!(
                "row has {} coefficients, program has {} variables",
                coeffs.len(),
                self.num_vars
            )));
        }
        self.rows.push(Constraint { coeffs, relation, rhs, label: label.into() });
        Ok(())
    }

    /// Plain-text dump: one line per row, non-zero coefficients only.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vars {}", self.num_vars);
        let _ = write!(s, "max");
        for (j, c) in self.objective.iter().enumerate().filter(|(_, c)| **c != 0.0) {
            let _ = write!(s, " {c:+.9}*x{j}");
        }
        let _ = writeln!(s);
        for r in &self.rows {
            let _ = write!(s, "{:<16}", r.label);
            for (j, c) in r.coeffs.iter().enumerate().filter(|(_, c)| **c != 0.0) {
                let _ = write!(s, " {c:+.9}*x{j}");
            }
            let _ = writeln!(s, " {} {:.9}", r.relation.symbol(), r.rhs);
        }
        s
    }

    /// Objective value and maximal constraint violation at `x`.
    pub fn evaluate(&self, x: &[f64]) -> (f64, f64) {
        let value = dot(&self.objective, x);
        let mut viol = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for r in &self.rows {
            let lhs = dot(&r.coeffs, x);
            let v = match r.relation {
                Relation::Le => lhs - r.rhs,
                Relation::Ge => r.rhs - lhs,
                Relation::Eq => (lhs - r.rhs).abs(),
            };
            viol = viol.max(v);
        }
        (value, viol)
    }

    /// Dual objective `b·y`.
    pub fn dual_value(&self, y: &[f64]) -> f64 {
        self.rows.iter().zip(y).map(|(r, v)| r.rhs * v).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pv = self.rows[r][c];
        self.rows[r].iter_mut().for_each(|v| *v /= pv);
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                d.iter_mut().zip(&self.rows[i]).for_each(|(dj, a)| *dj -= cb * a);
            }
        }
        d
    }

    /// Maximise `cost` over the columns allowed to enter. Returns false if
    /// unbounded.
    fn optimise(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool, pivots: &mut usize) -> Result<bool> {
        loop {
            let d = self.reduced_costs(cost);
            let Some(enter) = (0..self.cols).find(|&j| allowed(j) && d[j] > TOL) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > TOL {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - TOL || (ratio <= best + TOL && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Solver("stopped after the pivot limit (cycling guard)".into()));
            }
        }
    }
}

/// Solve `lp` to optimality, reporting duals read off the final basis.
pub fn solve(lp: &LinearProgram) -> Result<LPSolution> {
    let n = lp.num_vars;
    let m = lp.rows.len();
    // Orient rows so every right-hand side is non-negative.
    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, r) in lp.rows.iter().enumerate() {
        if r.rhs < 0.0 {
            sign[i] = -1.0;
            rel.push(r.relation.flipped());
        } else {
            rel.push(r.relation);
        }
    }
    let slack_count = rel.iter().filter(|r| **r != Relation::Eq).count();
    let art_count = rel.iter().filter(|r| **r != Relation::Le).count();
    let cols = n + slack_count + art_count;
    let art_start = n + slack_count;

    let mut rows = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    // Column whose original entry is e_i; its final column holds B⁻¹e_i.
    let mut unit_col = vec![0; m];
    let mut next_slack = n;
    let mut next_art = art_start;
    for i in 0..m {
        let r = &lp.rows[i];
        for j in 0..n {
            rows[i][j] = sign[i] * r.coeffs[j];
        }
        rows[i][cols] = sign[i] * r.rhs;
        match rel[i] {
            Relation::Le => {
                rows[i][next_slack] = 1.0;
                basis[i] = next_slack;
                unit_col[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                rows[i][next_slack] = -1.0;
                next_slack += 1;
                rows[i][next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                rows[i][next_art] = 1.0;
                basis[i] = next_art;
                unit_col[i] = next_art;
                next_art += 1;
            }
        }
    }
    let mut t = Tableau { rows, basis, cols };
    let mut pivots = 0;

    if art_count > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|v| *v = -1.0);
        t.optimise(&phase1, &|_| true, &mut pivots)?;
        let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= art_start).map(|i| t.rhs(i)).sum();
        if infeas > 1e-7 {
            return Ok(LPSolution { status: Status::Infeasible, value: f64::NAN, primal: vec![], dual: vec![] });
        }
        // Drive remaining zero-level artificials out of the basis when possible.
        for i in 0..m {
            if t.basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| t.rows[i][j].abs() > TOL) {
                    t.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    if !t.optimise(&cost, &|j| j < art_start, &mut pivots)? {
        return Ok(LPSolution { status: Status::Unbounded, value: f64::INFINITY, primal: vec![], dual: vec![] });
    }

    let mut primal = vec![0.0; n];
    for (i, &bj) in t.basis.iter().enumerate() {
        if bj < n {
            primal[bj] = t.rhs(i);
        }
    }
    let dual = (0..m)
        .map(|i| {
            let y: f64 = t.basis.iter().enumerate().map(|(k, &bj)| cost[bj] * t.rows[k][unit_col[i]]).sum();
            sign[i] * y
        })
        .collect();
    Ok(LPSolution { status: Status::Optimal, value: dot(&lp.objective, &primal), primal, dual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable() {
        let mut lp = LinearProgram::new(1, vec![1.0]).unwrap();
        lp.add_row(vec![1.0], Relation::Le, 1.0, "cap").unwrap();
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.dual[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_program() {
        let mut lp = LinearProgram::new(1, vec![1.0]).unwrap();
        lp.add_row(vec![1.0], Relation::Le, -1.0, "neg").unwrap();
        assert_eq!(solve(&lp).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn unbounded_program() {
        let mut lp = LinearProgram::new(2, vec![1.0, 1.0]).unwrap();
        lp.add_row(vec![1.0, -1.0], Relation::Le, 1.0, "r").unwrap();
        assert_eq!(solve(&lp).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn textbook_program_with_duals() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), value 36, y* = (0, 3/2, 1).
        let mut lp = LinearProgram::new(2, vec![3.0, 5.0]).unwrap();
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0, "a").unwrap();
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0, "b").unwrap();
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0, "c").unwrap();
        let s = solve(&lp).unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 6.0).abs() < 1e-9);
        let expect = [0.0, 1.5, 1.0];
        for (u, v) in s.dual.iter().zip(expect) {
            assert!((u - v).abs() < 1e-9);
        }
        assert!((lp.dual_value(&s.dual) - s.value).abs() < 1e-9);
    }

    #[test]
    fn mixed_relations_and_negative_rhs() {
        // max x + y, x + y = 2, x ≥ 0.5, −y ≤ −0.5 (y ≥ 0.5) → value 2.
        let mut lp = LinearProgram::new(2, vec![1.0, 2.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 2.0, "sum").unwrap();
        lp.add_row(vec![1.0, 0.0], Relation::Ge, 0.5, "xlo").unwrap();
        lp.add_row(vec![0.0, -1.0], Relation::Le, -0.5, "ylo").unwrap();
        let s = solve(&lp).unwrap();
        assert!((s.value - 3.5).abs() < 1e-9);
        assert!((lp.dual_value(&s.dual) - s.value).abs() < 1e-9);
        assert!(s.dual[1] <= 1e-12);
        assert!(s.dual[2] >= -1e-12);
    }

    #[test]
    fn text_export_lists_rows() {
        let mut lp = LinearProgram::new(2, vec![1.0, 0.0]).unwrap();
        lp.add_row(vec![1.0, 1.0], Relation::Le, 1.0, "cap").unwrap();
        let txt = lp.to_text();
        assert!(txt.contains("cap"));
        assert!(txt.contains("<= 1.000000000"));
        assert_eq!(txt.lines().count(), 3);
    }
}
