//! Linear programs for the non-signalling value of a game, the program with
//! relaxed signalling constraints, and the dual certificate that bounds
//! how much relaxation can help.
//!
//! Variables are the entries `P(a,b|x,y)` in box order. Signalling rows are
//! written through the Sig measure of the `O = Q·P` distribution, so they
//! carry the `q` weights. Positivity is enforced by the solver's `x ≥ 0`.

pub mod simplex;

pub use simplex::{solve, Constraint, LPSolution, LinearProgram, Relation, Status};

use serde::Serialize;

use crate::boxes::{Alphabets, Game, InputDistribution};
use crate::error::{Error, Result};

/// Coefficients of `Sig^(A→B, x, y, b)` on the table `P`.
fn sig_row_a_to_b(al: &Alphabets, q: &InputDistribution, x: usize, y: usize, b: usize) -> Vec<f64> {
    let mut row = vec![0.0; al.len()];
    let qy = q.marginal_y(y);
    let cond = q.get(x, y) / qy;
    for xp in 0..al.x_size {
        let w = q.get(xp, y) * (f64::from(xp == x) - cond);
        for a in 0..al.a_size {
            row[al.index(a, b, xp, y)] += w;
        }
    }
    row
}

/// Coefficients of `Sig^(B→A, x, y, a)` on the table `P`.
fn sig_row_b_to_a(al: &Alphabets, q: &InputDistribution, x: usize, y: usize, a: usize) -> Vec<f64> {
    let mut row = vec![0.0; al.len()];
    let qx = q.marginal_x(x);
    let cond = q.get(x, y) / qx;
    for yp in 0..al.y_size {
        let w = q.get(x, yp) * (f64::from(yp == y) - cond);
        for b in 0..al.b_size {
            row[al.index(a, b, x, yp)] += w;
        }
    }
    row
}

/// Signalling rows (A→B first, then B→A) as `(label, coefficients)`.
fn sig_rows(game: &Game) -> Vec<(String, Vec<f64>)> {
    let al = game.alphabets();
    let q = game.q();
    let mut out = Vec::with_capacity(al.signalling_count());
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            for b in 0..al.b_size {
                out.push((format!("sigAB_{x}{y}{b}"), sig_row_a_to_b(al, q, x, y, b)));
            }
        }
    }
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            for a in 0..al.a_size {
                out.push((format!("sigBA_{x}{y}{a}"), sig_row_b_to_a(al, q, x, y, a)));
            }
        }
    }
    out
}

fn build(game: &Game, relation: Relation, slack: f64) -> Result<LinearProgram> {
    let al = game.alphabets();
    let q = game.q();
    if !q.has_complete_support() {
        return Err(Error::IncompleteSupport);
    }
    let mut objective = vec![0.0; al.len()];
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            for a in 0..al.a_size {
                for b in 0..al.b_size {
                    if game.win(a, b, x, y) {
                        objective[al.index(a, b, x, y)] = q.get(x, y);
                    }
                }
            }
        }
    }
    let mut lp = LinearProgram::new(al.len(), objective)?;
    for (label, row) in sig_rows(game) {
        lp.add_row(row, relation, slack, label)?;
    }
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            let mut row = vec![0.0; al.len()];
            for a in 0..al.a_size {
                for b in 0..al.b_size {
                    row[al.index(a, b, x, y)] = 1.0;
                }
            }
            lp.add_row(row, Relation::Eq, 1.0, format!("norm_{x}{y}"))?;
        }
    }
    Ok(lp)
}

/// Program with every Sig row an equality; the first `d` rows are the
/// signalling rows.
pub fn build_ns_lp(game: &Game) -> Result<LinearProgram> {
    build(game, Relation::Eq, 0.0)
}

/// Program with every Sig row relaxed to `Sig ≤ slack`.
pub fn build_relaxed_ns_lp(game: &Game, slack: f64) -> Result<LinearProgram> {
    if !(slack >= 0.0) {
        return Err(Error::Domain(format!("slack {slack} must be non-negative")));
    }
    build(game, Relation::Le, slack)
}

fn solve_optimal(lp: &LinearProgram) -> Result<LPSolution> {
    let s = solve(lp)?;
    match s.status {
        Status::Optimal => Ok(s),
        Status::Infeasible => Err(Error::Solver("infeasible".into())),
        Status::Unbounded => Err(Error::Solver("unbounded".into())),
    }
}

/// Non-signalling value with its dual certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsValue {
    pub value: f64,
    /// Dual multipliers of the relaxed (`Sig ≤ 0`) program, one per row;
    /// the first `d` belong to the signalling rows and are non-negative.
    pub dual: Vec<f64>,
    /// Number of signalling rows `d`.
    pub d: usize,
    /// `Σ |y_j|` over the signalling rows.
    pub kappa: f64,
}

/// Optimal non-signalling winning probability.
///
/// Solved in the relaxed form `Sig ≤ 0`, which has the same optimum as the
/// equality form because the Sig rows of each group sum to zero; its duals
/// on the Sig rows are sign-constrained and therefore certify the
/// perturbation bound.
pub fn ns_value(game: &Game) -> Result<NsValue> {
    let lp = build_relaxed_ns_lp(game, 0.0)?;
    let s = solve_optimal(&lp)?;
    let d = game.alphabets().signalling_count();
    let dual = min_kappa_dual(&lp, d, s.value).unwrap_or(s.dual);
    let kappa = dual[..d].iter().map(|v| v.abs()).sum();
    Ok(NsValue { value: s.value, dual, d, kappa })
}

/// Among the optimal duals of `lp` (first `d` rows `≤`, the rest `=`), one
/// with the smallest `Σ y_j` over the first `d` rows. Solved as
/// `min Σ y` over `Aᵀ(y,z) ≥ c`, `y ≥ 0`, `bᵀz ≤ value`, with `z = z⁺ − z⁻`.
fn min_kappa_dual(lp: &LinearProgram, d: usize, value: f64) -> Option<Vec<f64>> {
    let r = lp.rows.len() - d;
    let nv = d + 2 * r;
    let mut objective = vec![0.0; nv];
    objective[..d].iter_mut().for_each(|c| *c = -1.0);
    let mut dual_lp = LinearProgram::new(nv, objective).ok()?;
    for i in 0..lp.num_vars {
        let mut row = vec![0.0; nv];
        for (j, c) in lp.rows.iter().enumerate() {
            let a = c.coeffs[i];
            if j < d {
                row[j] = a;
            } else {
                row[d + (j - d)] = a;
                row[d + r + (j - d)] = -a;
            }
        }
        dual_lp.add_row(row, Relation::Ge, lp.objective[i], format!("col_{i}")).ok()?;
    }
    let mut budget = vec![0.0; nv];
    for (j, c) in lp.rows[d..].iter().enumerate() {
        budget[d + j] = c.rhs;
        budget[d + r + j] = -c.rhs;
    }
    dual_lp.add_row(budget, Relation::Le, value + simplex::TOL, "value").ok()?;
    let s = solve(&dual_lp).ok().filter(|s| s.status == Status::Optimal)?;
    let mut dual: Vec<f64> = s.primal[..d].iter().map(|v| v.max(0.0)).collect();
    dual.extend((0..r).map(|j| s.primal[d + j] - s.primal[d + r + j]));
    // Clamping round-off can break feasibility; keep the result only if it
    // still certifies the optimum.
    let feasible = (0..lp.num_vars).all(|i| {
        let lhs: f64 = lp.rows.iter().zip(&dual).map(|(c, y)| c.coeffs[i] * y).sum();
        lhs >= lp.objective[i] - simplex::TOL
    });
    (feasible && lp.dual_value(&dual) <= value + 2.0 * simplex::TOL).then_some(dual)
}

/// Optimum of the program with all Sig rows relaxed to `≤ slack`.
pub fn perturbed_value(game: &Game, slack: f64) -> Result<f64> {
    Ok(solve_optimal(&build_relaxed_ns_lp(game, slack)?)?.value)
}

/// `κ = Σ_j |y*_j|` over the signalling rows.
pub fn dual_kappa(game: &Game) -> Result<f64> {
    Ok(ns_value(game)?.kappa)
}

/// `ns_val + slack·κ`.
pub fn sensitivity_bound(ns_val: f64, slack: f64, kappa_or_d: f64) -> f64 {
    ns_val + slack * kappa_or_d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boxes::{chsh_game, classical_value, extended_chsh_game};

    #[test]
    fn chsh_program_shape() {
        let lp = build_ns_lp(&chsh_game()).unwrap();
        assert_eq!(lp.num_vars, 16);
        assert_eq!(lp.rows.len(), 16 + 4);
        let e = build_ns_lp(&extended_chsh_game()).unwrap();
        assert_eq!(e.rows.iter().filter(|r| r.label.starts_with("sig")).count(), 24);
    }

    #[test]
    fn chsh_values() {
        let v = ns_value(&chsh_game()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-9);
        assert_eq!(v.d, 16);
        assert!(v.kappa <= 16.0 + 1e-9);
        let eq = solve(&build_ns_lp(&chsh_game()).unwrap()).unwrap();
        assert!((eq.value - 1.0).abs() < 1e-9);
        assert!((perturbed_value(&chsh_game(), 0.01).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn extended_chsh_is_above_classical() {
        let g = extended_chsh_game();
        let v = ns_value(&g).unwrap().value;
        assert!(v >= classical_value(&g).unwrap() - 1e-9);
        assert!(v <= 1.0 + 1e-9);
    }

    #[test]
    fn trivial_games() {
        let al = Alphabets::new(1, 1, 1, 1).unwrap();
        let yes = Game::new(al, InputDistribution::uniform(1, 1), |_, _, _, _| true).unwrap();
        let no = Game::new(al, InputDistribution::uniform(1, 1), |_, _, _, _| false).unwrap();
        assert!((ns_value(&yes).unwrap().value - 1.0).abs() < 1e-12);
        assert!(ns_value(&no).unwrap().value.abs() < 1e-12);
        let nb = Game::new(Alphabets::binary(), InputDistribution::uniform(2, 2), |_, _, _, _| false).unwrap();
        let v = ns_value(&nb).unwrap();
        assert!(v.value.abs() < 1e-12);
        assert!(v.kappa.abs() < 1e-12);
    }

    #[test]
    fn incomplete_support_rejected() {
        let q = InputDistribution::new(2, 2, vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let g = Game::new(Alphabets::binary(), q, |a, b, x, y| a ^ b == x & y).unwrap();
        assert!(matches!(build_ns_lp(&g), Err(Error::IncompleteSupport)));
    }

    #[test]
    fn sensitivity_arithmetic() {
        assert_eq!(sensitivity_bound(0.75, 0.0, 16.0), 0.75);
        assert!((sensitivity_bound(0.75, 0.01, 16.0) - 0.91).abs() < 1e-15);
    }
}
