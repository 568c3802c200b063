//! Finite-size key length of the CHSH-based DIQKD protocol, for the
//! per-round protocol and the block variant, plus the outer optimisation over
//! protocol parameters used to draw rate curves.

use rayon::prelude::*;
use serde::Serialize;

use crate::eat::{self, golden_max, BlockSpec, EatEpsilons, MuOpt};
use crate::entropy::{h_unchecked, OMEGA_CLASSICAL, OMEGA_QUANTUM};
use crate::error::{domain, Error, Result};

/// Honest statistics of a Werner state with noise `nu`: `(ω_exp, Q)`.
pub fn honest_werner(nu: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&nu) {
        return domain(format!("Werner parameter {nu} not in [0,1]"));
    }
    let omega = (2.0 + std::f64::consts::SQRT_2 * (1.0 - nu)) / 4.0;
    Ok((omega, nu / 2.0))
}

/// Winning probability of the Werner state with bit error rate `qber`.
pub fn werner_omega(qber: f64) -> Result<f64> {
    Ok(honest_werner(2.0 * qber)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// Number of rounds (expected number `n̄` in block mode).
    pub n: f64,
    pub gamma: f64,
    pub omega_exp: f64,
    pub delta_est: f64,
    pub qber: f64,
}

impl ProtocolParams {
    pub fn new(n: f64, gamma: f64, omega_exp: f64, delta_est: f64, qber: f64) -> Result<Self> {
        if !(n >= 1.0 && n.is_finite()) {
            return domain(format!("round count {n} must be finite and at least 1"));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return domain(format!("test probability {gamma} not in (0,1]"));
        }
        if !(delta_est > 0.0 && delta_est < 1.0) {
            return domain(format!("delta_est {delta_est} not in (0,1)"));
        }
        if !(OMEGA_CLASSICAL..=OMEGA_QUANTUM + 1e-12).contains(&omega_exp) {
            return domain(format!("omega_exp {omega_exp} outside the quantum CHSH regime"));
        }
        if !(0.0..=0.5).contains(&qber) {
            return domain(format!("QBER {qber} not in [0, 1/2]"));
        }
        Ok(Self { n, gamma, omega_exp, delta_est, qber })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonBudget {
    pub eps_ec: f64,
    pub eps_ec_complete: f64,
    pub eps_s: f64,
    pub eps_ea: f64,
    pub eps_pa: f64,
    /// Round-count tail probability, block mode only.
    pub eps_t: Option<f64>,
}

impl EpsilonBudget {
    /// `ε'_EC = ε_EC^c − ε_EC`.
    pub fn eps_ec_prime(&self) -> f64 {
        self.eps_ec_complete - self.eps_ec
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("eps_ec", self.eps_ec),
            ("eps_ec_complete", self.eps_ec_complete),
            ("eps_ec_prime", self.eps_ec_prime()),
            ("eps_s", self.eps_s),
            ("eps_ea", self.eps_ea),
            ("eps_pa", self.eps_pa),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v < 1.0) {
                return domain(format!("{name} = {v} not in (0,1)"));
            }
        }
        if let Some(t) = self.eps_t {
            if !(t > 0.0 && t < 1.0) {
                return domain(format!("eps_t = {t} not in (0,1)"));
            }
        }
        Ok(())
    }
}

/// Signed contributions to the key length; `key_length` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakdown {
    pub entropy: f64,
    pub leak_ec: f64,
    pub smoothing: f64,
    pub max_entropy: f64,
    pub privacy_amplification: f64,
}

impl Breakdown {
    pub fn total(&self) -> f64 {
        self.entropy + self.leak_ec + self.smoothing + self.max_entropy + self.privacy_amplification
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub key_length: f64,
    /// `ℓ/n` (or `ℓ/n̄` in block mode).
    pub rate: f64,
    pub breakdown: Breakdown,
    pub soundness_error: f64,
    pub completeness_error: f64,
    pub params: ProtocolParams,
    pub budget: EpsilonBudget,
    pub entropy_rate: MuOpt,
    /// Block length, block mode only.
    pub s_max: Option<u32>,
    /// Round-count excess `t`, block mode only.
    pub round_tail: Option<f64>,
}

/// Error-correction leakage for `n_eff` rounds.
pub fn leak_ec(n_eff: f64, params: &ProtocolParams, eps_ec_prime: f64, eps_ec: f64) -> Result<f64> {
    leak_ec_inner(n_eff, params, eps_ec_prime, eps_ec, 0.0)
}

/// Block-mode leakage; the second-order term uses `ε' − 2√ε_t`.
pub fn leak_ec_block(
    n_eff: f64,
    params: &ProtocolParams,
    eps_ec_prime: f64,
    eps_ec: f64,
    eps_t: f64,
) -> Result<f64> {
    leak_ec_inner(n_eff, params, eps_ec_prime, eps_ec, 2.0 * eps_t.sqrt())
}

fn leak_ec_inner(n_eff: f64, p: &ProtocolParams, eps_prime: f64, eps_ec: f64, shift: f64) -> Result<f64> {
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return domain(format!("eps_ec_prime = {eps_prime} not in (0,1)"));
    }
    if !(eps_ec > 0.0 && eps_ec < 1.0) {
        return domain(format!("eps_ec = {eps_ec} not in (0,1)"));
    }
    let shifted = eps_prime - shift;
    if shifted <= 0.0 {
        return domain("eps_ec_prime must exceed 2√eps_t");
    }
    let first = n_eff * ((1.0 - p.gamma) * h_unchecked(p.qber) + p.gamma * h_unchecked(p.omega_exp));
    let second = n_eff.sqrt()
        * 4.0
        * (2.0 * std::f64::consts::SQRT_2 + 1.0).log2()
        * (2.0 * (8.0 / (shifted * shifted)).log2()).sqrt();
    let third = (8.0 / (eps_prime * eps_prime) + 2.0 / (2.0 - eps_prime)).log2();
    Ok(first + second + third + (1.0 / eps_ec).log2())
}

pub fn soundness_error(budget: &EpsilonBudget) -> f64 {
    2.0 * budget.eps_ec + budget.eps_pa + budget.eps_s + budget.eps_ea
}

pub fn completeness_error(params: &ProtocolParams, budget: &EpsilonBudget) -> f64 {
    budget.eps_ec_complete + budget.eps_ec + (-2.0 * params.n * params.delta_est.powi(2)).exp()
}

/// `−3 log(1 − √(1 − (ε_s/4)²))`, positive.
fn smoothing_term(eps_s: f64) -> f64 {
    let e = eps_s / 4.0;
    // 1 − √(1 − e²) computed without cancellation.
    let gap = e * e / (1.0 + (1.0 - e * e).sqrt());
    -3.0 * gap.log2()
}

fn max_entropy_second_order(n: f64, eps_smooth: f64, eps_e: f64) -> f64 {
    n.sqrt() * 2.0 * 7f64.log2() * (1.0 - 2.0 * (eps_smooth * eps_e).log2()).sqrt()
}

/// Key length of the per-round protocol.
pub fn key_length(params: &ProtocolParams, budget: &EpsilonBudget) -> Result<RateReport> {
    budget.validate()?;
    let eps = EatEpsilons::new(budget.eps_s / 4.0, budget.eps_ea + budget.eps_ec)?;
    let mu = eat::mu_opt(params.omega_exp, params.delta_est, params.gamma, params.n, &eps)?;
    let n = params.n;
    let breakdown = Breakdown {
        entropy: eat::entropy_lower_bound(n, mu.value),
        leak_ec: -leak_ec(n, params, budget.eps_ec_prime(), budget.eps_ec)?,
        smoothing: smoothing_term(budget.eps_s),
        max_entropy: -eat::max_entropy_upper(n, params.gamma, budget.eps_s, budget.eps_ea, budget.eps_ec),
        privacy_amplification: -2.0 * (1.0 / budget.eps_pa).log2(),
    };
    Ok(report(params, budget, breakdown, mu, None, None))
}

/// Key length of the block protocol with blocks of at most `s_max` rounds.
///
/// The round-count excess uses the block-length range `s_max − 1` as the
/// Hoeffding width; it equals `(1−γ)/γ` when `1/γ` is an integer and vanishes
/// for `s_max = 1`.
pub fn key_length_block(params: &ProtocolParams, budget: &EpsilonBudget, s_max: u32) -> Result<RateReport> {
    budget.validate()?;
    let eps_t = budget
        .eps_t
        .ok_or_else(|| Error::Domain("block mode needs eps_t".into()))?;
    let shifted = budget.eps_s / 4.0 - eps_t.sqrt();
    if shifted <= 0.0 {
        return domain("√eps_t must be smaller than eps_s/4");
    }
    let block = BlockSpec::new(params.gamma, s_max)?;
    let m = params.n / block.expected_length();
    let width = (s_max - 1) as f64;
    let t = (-m * width * width * eps_t.ln() / 2.0).sqrt();
    let n_eff = params.n + t;

    let eps = EatEpsilons::new(budget.eps_s / 4.0, budget.eps_ea + budget.eps_ec)?;
    let mu = eat::mu_block_opt(params.omega_exp, params.delta_est, &block, m, &eps)?;
    let breakdown = Breakdown {
        entropy: m * mu.value,
        leak_ec: -leak_ec_block(n_eff, params, budget.eps_ec_prime(), budget.eps_ec, eps_t)?,
        smoothing: smoothing_term(budget.eps_s),
        max_entropy: -(params.gamma * n_eff
            + max_entropy_second_order(n_eff, shifted, budget.eps_ea + budget.eps_ec)),
        privacy_amplification: -2.0 * (1.0 / budget.eps_pa).log2(),
    };
    Ok(report(params, budget, breakdown, mu, Some(s_max), Some(t)))
}

fn report(
    params: &ProtocolParams,
    budget: &EpsilonBudget,
    breakdown: Breakdown,
    mu: MuOpt,
    s_max: Option<u32>,
    round_tail: Option<f64>,
) -> RateReport {
    let key_length = breakdown.total();
    RateReport {
        key_length,
        rate: key_length / params.n,
        breakdown,
        soundness_error: soundness_error(budget),
        completeness_error: completeness_error(params, budget),
        params: *params,
        budget: *budget,
        entropy_rate: mu,
        s_max,
        round_tail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    PerRound,
    Block,
}

/// Error caps shared by all points of a rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Caps {
    pub soundness: f64,
    pub completeness: f64,
    pub eps_ec: f64,
}

impl Caps {
    fn validate(&self) -> Result<()> {
        if !(self.eps_ec > 0.0 && 2.0 * self.eps_ec < self.soundness && self.soundness < 1.0) {
            return Err(Error::Infeasible("soundness cap must exceed 2·eps_ec".into()));
        }
        if !(2.0 * self.eps_ec < self.completeness && self.completeness < 1.0) {
            return Err(Error::Infeasible("completeness cap must exceed 2·eps_ec".into()));
        }
        Ok(())
    }
}

const GAMMA_DECADES: (f64, f64) = (-4.0, 0.0);
const DELTA_MAX_LOG: f64 = -1.0;
const GRID_PER_DECADE: f64 = 8.0;
const SPLIT_RANGE: f64 = 3.0;
const SPLIT_PER_DECADE: f64 = 3.0;
const TAIL_LOG_RANGE: (f64, f64) = (-15.0, -1e-3);

/// Search point: log10 γ, log10 δ, log10 u (√ε_t as a fraction of its
/// ceiling), log10(ε_s/ε_PA), log10(ε_EA/ε_PA).
type Point = [f64; 5];

struct Objective {
    n: f64,
    qber: f64,
    omega: f64,
    caps: Caps,
    mode: Mode,
    delta_min_log: f64,
}

impl Objective {
    fn new(n: f64, qber: f64, caps: Caps, mode: Mode) -> Result<Self> {
        caps.validate()?;
        if !(0.0..0.5).contains(&qber) {
            return domain(format!("QBER {qber} not in [0, 1/2)"));
        }
        // exp(−2nδ²) has to leave room for ε'_EC > 0 under the completeness cap.
        let room = caps.completeness - 2.0 * caps.eps_ec;
        let delta_min = ((1.0 / room).ln() / (2.0 * n)).sqrt() * (1.0 + 1e-6);
        Ok(Self {
            n,
            qber,
            omega: werner_omega(qber)?,
            caps,
            mode,
            delta_min_log: delta_min.log10().max(-12.0),
        })
    }

    fn budget(&self, z: &Point) -> Option<(ProtocolParams, EpsilonBudget, u32)> {
        let gamma = 10f64.powf(z[0].min(0.0));
        let delta = 10f64.powf(z[1]);
        let params = ProtocolParams::new(self.n, gamma, self.omega, delta, self.qber).ok()?;
        let spare = self.caps.soundness - 2.0 * self.caps.eps_ec;
        let (ws, wea) = (10f64.powf(z[3]), 10f64.powf(z[4]));
        let total = 1.0 + ws + wea;
        let eps_ec_complete =
            self.caps.completeness - self.caps.eps_ec - (-2.0 * self.n * delta * delta).exp();
        let mut budget = EpsilonBudget {
            eps_ec: self.caps.eps_ec,
            eps_ec_complete,
            eps_s: spare * ws / total,
            eps_ea: spare * wea / total,
            eps_pa: spare / total,
            eps_t: None,
        };
        let s_max = BlockSpec::recommended(gamma).ok()?.s_max;
        if self.mode == Mode::Block {
            let ceiling = (budget.eps_s / 4.0).min(budget.eps_ec_prime() / 2.0);
            let root = ceiling * 10f64.powf(z[2]);
            budget.eps_t = Some(root * root);
        }
        Some((params, budget, s_max))
    }

    fn evaluate(&self, z: &Point) -> Option<RateReport> {
        let (params, budget, s_max) = self.budget(z)?;
        let r = match self.mode {
            Mode::PerRound => key_length(&params, &budget),
            Mode::Block => key_length_block(&params, &budget, s_max),
        };
        r.ok().filter(|r| r.rate.is_finite())
    }

    fn rate(&self, z: &Point) -> f64 {
        self.evaluate(z).map_or(f64::NEG_INFINITY, |r| r.rate)
    }

    fn bounds(&self, k: usize) -> (f64, f64) {
        match k {
            0 => GAMMA_DECADES,
            1 => (self.delta_min_log, DELTA_MAX_LOG),
            2 => TAIL_LOG_RANGE,
            _ => (-SPLIT_RANGE, SPLIT_RANGE),
        }
    }

    fn active(&self) -> Vec<usize> {
        match self.mode {
            Mode::PerRound => vec![0, 1, 3, 4],
            Mode::Block => vec![0, 1, 2, 3, 4],
        }
    }
}

fn log_grid(lo: f64, hi: f64, per_decade: f64) -> Vec<f64> {
    let steps = ((hi - lo) * per_decade).ceil().max(1.0) as usize;
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

fn search(obj: &Objective) -> Result<RateReport> {
    let mut best: Point = [0.0, obj.delta_min_log.max(-4.0), -1.0, 0.0, 0.0];
    let mut best_rate = f64::NEG_INFINITY;

    let (g_lo, g_hi) = obj.bounds(0);
    let (d_lo, d_hi) = obj.bounds(1);
    let gammas = log_grid(g_lo, g_hi, GRID_PER_DECADE);
    let deltas = log_grid(d_lo, d_hi, GRID_PER_DECADE);
    for &lg in &gammas {
        for &ld in &deltas {
            let z = [lg, ld, best[2], 0.0, 0.0];
            let r = obj.rate(&z);
            if r > best_rate {
                best_rate = r;
                best = z;
            }
        }
    }
    if obj.mode == Mode::Block {
        for lt in log_grid(TAIL_LOG_RANGE.0, TAIL_LOG_RANGE.1, 1.0) {
            let z = [best[0], best[1], lt, best[3], best[4]];
            let r = obj.rate(&z);
            if r > best_rate {
                best_rate = r;
                best = z;
            }
        }
    }
    let split = log_grid(-SPLIT_RANGE, SPLIT_RANGE, SPLIT_PER_DECADE);
    let base = best;
    for &a in &split {
        for &b in &split {
            let z = [base[0], base[1], base[2], a, b];
            let r = obj.rate(&z);
            if r > best_rate {
                best_rate = r;
                best = z;
            }
        }
    }
    if !best_rate.is_finite() {
        return Err(Error::Infeasible(format!(
            "no admissible parameters for n = {}, Q = {}",
            obj.n, obj.qber
        )));
    }

    // Cyclic coordinate refinement with shrinking brackets.
    let mut width = 1.0 / GRID_PER_DECADE;
    for _ in 0..12 {
        let before = best_rate;
        for &k in &obj.active() {
            let (lo, hi) = obj.bounds(k);
            let a = (best[k] - width).max(lo);
            let b = (best[k] + width).min(hi);
            let probe = |v: f64| {
                let mut z = best;
                z[k] = v;
                obj.rate(&z)
            };
            let (v, r) = golden_max(probe, a, b, 1e-7);
            if r > best_rate {
                best_rate = r;
                best[k] = v;
            }
        }
        if best_rate - before < 1e-12 {
            width *= 0.5;
            if width < 1e-4 {
                break;
            }
        }
    }
    obj.evaluate(&best)
        .ok_or_else(|| Error::Infeasible("optimum became inadmissible".into()))
}

/// Maximise `ℓ/n` for the honest Werner device with bit error rate `qber`.
///
/// Searches γ, δ_est, the split of the soundness cap between ε_s, ε_EA,
/// ε_PA and, in block mode, ε_t with `s_max = ⌈1/γ⌉`. The completeness
/// cap is saturated through `ε_EC^c`.
pub fn optimize_rate(n: f64, qber: f64, caps: &Caps, mode: Mode) -> Result<RateReport> {
    let obj = Objective::new(n, qber, *caps, mode)?;
    search(&obj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axis {
    /// Sweep the bit error rate at fixed round count.
    Qber,
    /// Sweep the round count at fixed bit error rate.
    Rounds,
}

/// One optimised point per grid value, in grid order.
pub fn rate_curve(axis: Axis, grid: &[f64], fixed: f64, caps: &Caps, mode: Mode) -> Vec<Result<RateReport>> {
    grid.par_iter()
        .map(|&v| match axis {
            Axis::Qber => optimize_rate(fixed, v, caps, mode),
            Axis::Rounds => optimize_rate(v, fixed, caps, mode),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> EpsilonBudget {
        EpsilonBudget {
            eps_ec: 1e-10,
            eps_ec_complete: 1e-3,
            eps_s: 3e-6,
            eps_ea: 3e-6,
            eps_pa: 3e-6,
            eps_t: None,
        }
    }

    #[test]
    fn werner_values() {
        let (w, q) = honest_werner(0.0).unwrap();
        assert!((w - OMEGA_QUANTUM).abs() < 1e-15 && q == 0.0);
        let (w, q) = honest_werner(1.0).unwrap();
        assert!((w - 0.5).abs() < 1e-15 && q == 0.5);
        let (w, q) = honest_werner(0.1).unwrap();
        assert!((w - 0.81820).abs() < 1e-5 && q == 0.05);
        assert!(honest_werner(1.5).is_err());
    }

    #[test]
    fn completeness_terms() {
        let p = ProtocolParams::new(1e4, 0.1, 0.84, 0.01, 0.01).unwrap();
        let b = budget();
        let c = completeness_error(&p, &b);
        assert!((c - (1e-3 + 1e-10 + (-2f64).exp())).abs() < 1e-15);
        assert!((soundness_error(&b) - (2e-10 + 9e-6)).abs() < 1e-18);
    }

    #[test]
    fn leak_first_order() {
        let p = ProtocolParams::new(1e10, 1e-9, 0.84, 0.01, 0.025).unwrap();
        let l = leak_ec(1e10, &p, 1e-10, 1e-10).unwrap();
        let first = 1e10 * h_unchecked(0.025);
        assert!(l > first && (l - first) / first < 1e-2);
        let p0 = ProtocolParams::new(1e10, 1e-9, 0.84, 0.01, 0.0).unwrap();
        assert!(leak_ec(1e10, &p0, 1e-10, 1e-10).unwrap() / 1e10 < 1e-2);
        assert!(leak_ec(1e10, &p0, 0.0, 1e-10).is_err());
    }

    #[test]
    fn breakdown_sums() {
        let p = ProtocolParams::new(1e10, 0.05, werner_omega(0.01).unwrap(), 1e-5, 0.01).unwrap();
        let r = key_length(&p, &budget()).unwrap();
        assert!((r.breakdown.total() - r.key_length).abs() <= 1e-9 * r.key_length.abs().max(1.0));
        assert!(r.breakdown.smoothing > 0.0);
        assert!(r.rate > 0.5, "{r:?}");
    }

    #[test]
    fn block_needs_eps_t() {
        let p = ProtocolParams::new(1e8, 0.1, 0.84, 1e-3, 0.01).unwrap();
        assert!(key_length_block(&p, &budget(), 10).is_err());
        let mut b = budget();
        b.eps_t = Some(1e-10);
        assert!(key_length_block(&p, &b, 10).is_err());
        b.eps_t = Some(1e-14);
        let r = key_length_block(&p, &b, 10).unwrap();
        assert!(r.round_tail.unwrap() > 0.0);
    }

    #[test]
    fn smoothing_term_is_stable() {
        let e: f64 = 1e-6 / 4.0;
        let naive = -3.0 * (1.0 - (1.0 - e * e).sqrt()).log2();
        assert!((naive - smoothing_term(1e-6)).abs() < 0.1);
        let tiny = smoothing_term(1e-12);
        assert!(tiny.is_finite() && tiny > 200.0);
    }
}
