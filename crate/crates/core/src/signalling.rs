//! Signalling measure and test, Sanov's bound, guessing-game values and the
//! non-signalling threshold bound.

use serde::{Deserialize, Serialize};

use crate::boxes::{frequency_box, Alphabets, winning_probability, Game, InputDistribution, ObservedData, SingleRoundBox};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    AtoB,
    BtoA,
}

/// Target `(direction, x, y, outcome)`; `outcome` is Bob's output for
/// `AtoB` and Alice's for `BtoA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigTarget {
    pub direction: Direction,
    pub x: usize,
    pub y: usize,
    pub outcome: usize,
}

impl SigTarget {
    pub fn a_to_b(x: usize, y: usize, b: usize) -> Self {
        Self { direction: Direction::AtoB, x, y, outcome: b }
    }

    pub fn b_to_a(x: usize, y: usize, a: usize) -> Self {
        Self { direction: Direction::BtoA, x, y, outcome: a }
    }

    /// Every target for the given alphabets, A→B first.
    pub fn all(al: &Alphabets) -> Vec<Self> {
        let mut out = Vec::with_capacity(al.signalling_count());
        for x in 0..al.x_size {
            for y in 0..al.y_size {
                out.extend((0..al.b_size).map(|b| Self::a_to_b(x, y, b)));
            }
        }
        for x in 0..al.x_size {
            for y in 0..al.y_size {
                out.extend((0..al.a_size).map(|a| Self::b_to_a(x, y, a)));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestParams {
    pub zeta: f64,
    pub eps: f64,
    pub n: usize,
}

impl TestParams {
    pub fn new(zeta: f64, eps: f64, n: usize) -> Result<Self> {
        if !(eps > 0.0 && zeta >= 7.0 * eps) {
            return Err(Error::Domain(format!("need zeta >= 7 eps > 0, got zeta={zeta}, eps={eps}")));
        }
        if n == 0 || n % 2 != 0 {
            return Err(Error::Domain(format!("round count {n} must be even and positive")));
        }
        Ok(Self { zeta, eps, n })
    }
}

/// `O_BY(b,y)·[O_{X|BY}(x|b,y) − Q_{X|Y}(x|y)]` with `O = q·box`, or the
/// mirror for `BtoA`. Works on non-normalised tables such as frequency
/// boxes.
pub fn sig_measure(bx: &SingleRoundBox, q: &InputDistribution, t: SigTarget) -> Result<f64> {
    let al = bx.alphabets();
    if q.x_size() != al.x_size || q.y_size() != al.y_size {
        return Err(Error::AlphabetMismatch("input distribution does not match the box".into()));
    }
    if !q.has_complete_support() {
        return Err(Error::IncompleteSupport);
    }
    let (x, y) = (t.x, t.y);
    if x >= al.x_size || y >= al.y_size {
        return Err(Error::Domain(format!("input pair ({x},{y}) out of range")));
    }
    let o = |a, b, x, y| q.get(x, y) * bx.get(a, b, x, y);
    match t.direction {
        Direction::AtoB => {
            let b = t.outcome;
            if b >= al.b_size {
                return Err(Error::Domain(format!("outcome {b} out of range")));
            }
            let joint: f64 = (0..al.a_size).map(|a| o(a, b, x, y)).sum();
            let o_by: f64 = (0..al.x_size).flat_map(|xp| (0..al.a_size).map(move |a| (a, xp))).map(|(a, xp)| o(a, b, xp, y)).sum();
            Ok(joint - o_by * q.get(x, y) / q.marginal_y(y))
        }
        Direction::BtoA => {
            let a = t.outcome;
            if a >= al.a_size {
                return Err(Error::Domain(format!("outcome {a} out of range")));
            }
            let joint: f64 = (0..al.b_size).map(|b| o(a, b, x, y)).sum();
            let o_ax: f64 = (0..al.y_size).flat_map(|yp| (0..al.b_size).map(move |b| (b, yp))).map(|(b, yp)| o(a, b, x, yp)).sum();
            Ok(joint - o_ax * q.get(x, y) / q.marginal_x(x))
        }
    }
}

/// `(n+1)^{cells−1} e^{−nε²/2}`.
pub fn sanov_delta(n: u64, eps: f64, cells: usize) -> f64 {
    let ln = (cells as f64 - 1.0) * (n as f64 + 1.0).ln() - n as f64 * eps * eps / 2.0;
    ln.exp()
}

/// Frequency box of the second half of `data`, or `None` if some input
/// pair is missing from either half.
pub fn frequency_box_second_half(data: &ObservedData, alphabets: &Alphabets, q: &InputDistribution) -> Result<Option<SingleRoundBox>> {
    let half = data.len() / 2;
    let mut seen = vec![false; alphabets.inputs()];
    for i in 0..half {
        seen[data.x[i] * alphabets.y_size + data.y[i]] = true;
    }
    if seen.contains(&false) {
        return Ok(None);
    }
    match frequency_box(&data.slice(half..data.len()), alphabets, q) {
        Ok(f) => Ok(Some(f)),
        Err(Error::MissingInputPair { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the test on the second half of `data`. Returns `true` when
/// signalling is detected. If some input pair is missing from either half
/// the test rejects.
pub fn run_signalling_test(data: &ObservedData, q: &InputDistribution, params: &TestParams, t: SigTarget, alphabets: &Alphabets) -> Result<bool> {
    if data.len() != params.n {
        return Err(Error::Domain(format!("data has {} rounds, params say {}", data.len(), params.n)));
    }
    match frequency_box_second_half(data, alphabets, q)? {
        Some(freq) => Ok(sig_measure(&freq, q, t)? >= params.zeta - 2.0 * params.eps),
        None => Ok(false),
    }
}

/// Best non-signalling value of guessing `x` given `y`: `Q_{X|Y}(x|y)`.
pub fn guessing_value(q: &InputDistribution, x: usize, y: usize) -> Result<f64> {
    if x >= q.x_size() || y >= q.y_size() {
        return Err(Error::Domain(format!("input pair ({x},{y}) out of range")));
    }
    let qy = q.marginal_y(y);
    if qy <= 0.0 {
        return Err(Error::Domain(format!("q_Y({y}) is zero")));
    }
    Ok(q.get(x, y) / qy)
}

/// `(1−√cδ)(ν/O_BY + W_ns)`.
pub fn boosted_guessing_bound(w_ns: f64, nu: f64, o_by: f64, cdelta: f64) -> Result<f64> {
    if !(o_by > 0.0) || !(0.0..=1.0).contains(&cdelta) || nu < 0.0 || !(0.0..=1.0).contains(&w_ns) {
        return Err(Error::Domain("need o_by > 0, cdelta and w_ns in [0,1], nu >= 0".into()));
    }
    Ok((1.0 - cdelta.sqrt()) * (nu / o_by + w_ns))
}

fn precondition_constant(eps: f64, cells: usize) -> f64 {
    20.0 * cells as f64 * (2.0 / eps).ln() / (eps * eps)
}

/// `n/ln n > 20|X||Y||A||B| ln(2/ε)/ε²`.
pub fn threshold_precondition(n: u64, eps: f64, a_size: usize, b_size: usize, x_size: usize, y_size: usize) -> bool {
    if n < 3 || !(eps > 0.0) {
        return false;
    }
    let nf = n as f64;
    nf / nf.ln() > precondition_constant(eps, a_size * b_size * x_size * y_size)
}

/// Smallest `n` with `n/ln n > k`, saturating at `u64::MAX`.
fn required_rounds(k: f64) -> u64 {
    let ok = |n: f64| n / n.ln() > k;
    let mut hi = 3.0f64;
    while !ok(hi) {
        hi *= 2.0;
        if hi > u64::MAX as f64 {
            return u64::MAX;
        }
    }
    let mut lo = (hi / 2.0).max(2.0);
    while hi - lo > 1.0 {
        let mid = ((lo + hi) / 2.0).floor();
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi as u64
}

/// `exp(−nβ²(30d)⁻²)` for `d = |X||Y|(|A|+|B|)`. With `β = 0` the bound is
/// the trivial 1. Otherwise errors with the smallest admissible `n` when
/// the round count is too small for `ε = β/(10d)`, and rejects question
/// distributions with an entry at or below `β/(10d)`.
pub fn threshold_bound(game: &Game, n: u64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta {beta} outside [0,1]")));
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    let al = game.alphabets();
    let d = al.signalling_count() as f64;
    let eps = beta / (10.0 * d);
    if game.q().min_entry() <= eps {
        return Err(Error::Precondition {
            reason: format!("min q = {} must exceed beta/(10d) = {eps}", game.q().min_entry()),
            required_n: 0,
        });
    }
    if !threshold_precondition(n, eps, al.a_size, al.b_size, al.x_size, al.y_size) {
        return Err(Error::Precondition {
            reason: format!("n/ln(n) too small for eps = {eps}"),
            required_n: required_rounds(precondition_constant(eps, al.len())),
        });
    }
    Ok((-(n as f64) * beta * beta / (30.0 * d).powi(2)).exp())
}

/// Largest `n` accepted by [`iid_threshold_probability`].
pub const MAX_EXACT_ROUNDS: u64 = 10_000_000;

/// Exact and Hoeffding values of the probability that `n` IID copies of
/// `single` win at least `(ω+β)n` rounds, `ω` being the single-round
/// winning probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IidThreshold {
    pub omega: f64,
    pub min_wins: u64,
    pub exact: f64,
    pub hoeffding: f64,
}

/// `Pr[Bin(n,p) ≥ k]`, summed in log space.
pub fn binomial_upper_tail(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n || p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    // log C(n,k) built up from C(n,0)
    let mut lc = 0.0;
    for i in 0..k {
        lc += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    let mut terms = Vec::with_capacity((n - k + 1) as usize);
    for j in k..=n {
        terms.push(lc + j as f64 * lp + (n - j) as f64 * lq);
        if j < n {
            lc += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
        }
    }
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()).exp().min(1.0)
}

pub fn iid_threshold_probability(single: &SingleRoundBox, game: &Game, n: u64, beta: f64) -> Result<IidThreshold> {
    if n == 0 || n > MAX_EXACT_ROUNDS {
        return Err(Error::SizeLimit(format!("n = {n} outside 1..={MAX_EXACT_ROUNDS}")));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("beta {beta} outside [0,1]")));
    }
    let omega = winning_probability(single, game)?.clamp(0.0, 1.0);
    let target = (omega + beta) * n as f64;
    let min_wins = (target - 1e-9 * target.max(1.0)).ceil().max(0.0) as u64;
    Ok(IidThreshold {
        omega,
        min_wins,
        exact: binomial_upper_tail(n, omega, min_wins),
        hoeffding: (-2.0 * n as f64 * beta * beta).exp(),
    })
}
