//! Min-tradeoff functions for the CHSH test and the resulting finite-size
//! entropy rates, for the per-round protocol and its block variant.
//!
//! Test statistics are represented by `p(1)`, the probability of a tested and
//! won round; `p(0) + p(1) = γ` is implicit.

use serde::Serialize;

use crate::entropy::{secrecy_bound, secrecy_bound_derivative, OMEGA_CLASSICAL, OMEGA_QUANTUM};
use crate::error::{domain, Error, Result};

const DOMAIN_SLACK: f64 = 1e-12;
const CUT_GRID: usize = 256;
const GOLDEN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeoffSpec {
    pub gamma: f64,
    pub p_cut1: f64,
}

impl TradeoffSpec {
    pub fn new(gamma: f64, p_cut1: f64) -> Result<Self> {
        check_gamma(gamma)?;
        let w = p_cut1 / gamma;
        if !(w > OMEGA_CLASSICAL && w < OMEGA_QUANTUM) {
            return domain(format!("cut {p_cut1} gives p_cut/γ = {w}, outside (3/4, (2+√2)/4)"));
        }
        Ok(Self { gamma, p_cut1 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EatEpsilons {
    pub eps_s: f64,
    pub eps_e: f64,
}

impl EatEpsilons {
    pub fn new(eps_s: f64, eps_e: f64) -> Result<Self> {
        for (name, v) in [("eps_s", eps_s), ("eps_e", eps_e)] {
            if !(v > 0.0 && v < 1.0) {
                return domain(format!("{name} = {v} not in (0,1)"));
            }
        }
        Ok(Self { eps_s, eps_e })
    }

    /// `√(1 − 2 log(ε_s ε_e))`.
    pub fn confidence_factor(&self) -> f64 {
        (1.0 - 2.0 * (self.eps_s * self.eps_e).log2()).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSpec {
    pub gamma: f64,
    pub s_max: u32,
}

impl BlockSpec {
    pub fn new(gamma: f64, s_max: u32) -> Result<Self> {
        check_gamma(gamma)?;
        if s_max == 0 {
            return domain("s_max must be at least 1");
        }
        Ok(Self { gamma, s_max })
    }

    /// Block length recommended for test probability γ, `⌈1/γ⌉`.
    pub fn recommended(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Self::new(gamma, (1.0 / gamma).ceil() as u32)
    }

    /// Probability that a block contains a test round, `1 − (1−γ)^s_max`.
    pub fn test_probability(&self) -> f64 {
        -(self.s_max as f64 * (-self.gamma).ln_1p()).exp_m1()
    }

    /// Expected block length `s̄`.
    pub fn expected_length(&self) -> f64 {
        self.test_probability() / self.gamma
    }

    /// `log(1 + 2·2^s·3^s)`, the output-dimension constant of a block.
    pub fn dimension_constant(&self) -> f64 {
        let s = self.s_max as f64;
        if self.s_max <= 300 {
            (1.0 + 2.0 * 6f64.powi(self.s_max as i32)).log2()
        } else {
            1.0 + s * 6f64.log2()
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("test probability {gamma} not in (0,1]"));
    }
    Ok(())
}

/// `scale · secrecy(p/norm)`, cut at a point and continued along its tangent.
/// The per-round function has `scale = 1, norm = γ`; the block function has
/// `scale = s̄, norm = 1 − (1−γ)^s_max`.
#[derive(Debug, Clone, Copy)]
struct Glued {
    scale: f64,
    norm: f64,
    gamma: f64,
    d_o: f64,
}

impl Glued {
    fn per_round(gamma: f64) -> Self {
        Self { scale: 1.0, norm: gamma, gamma, d_o: 13f64.log2() }
    }

    fn block(b: &BlockSpec) -> Self {
        Self {
            scale: b.expected_length(),
            norm: b.test_probability(),
            gamma: b.gamma,
            d_o: b.dimension_constant(),
        }
    }

    fn check_point(&self, p: f64) -> Result<f64> {
        let w = p / self.norm;
        if w.is_nan() || w < OMEGA_CLASSICAL - DOMAIN_SLACK || w > 1.0 + DOMAIN_SLACK {
            return domain(format!("normalised statistic {w} outside [3/4, 1]"));
        }
        Ok(w)
    }

    fn g(&self, p: f64) -> Result<f64> {
        let w = self.check_point(p)?;
        Ok(self.scale * secrecy_bound(w)?)
    }

    fn slope(&self, cut: f64) -> Result<f64> {
        let w = cut / self.norm;
        if !(w > OMEGA_CLASSICAL - DOMAIN_SLACK && w < OMEGA_QUANTUM) {
            return domain(format!("cut {cut} not in the open interior of the quantum regime"));
        }
        Ok(self.scale * secrecy_bound_derivative(w)? / self.norm)
    }

    fn f_min(&self, p: f64, cut: f64) -> Result<f64> {
        self.check_point(p)?;
        if p <= cut {
            self.g(p)
        } else {
            Ok(self.g(cut)? + self.slope(cut)? * (p - cut))
        }
    }

    fn mu(&self, p: f64, cut: f64, eps: &EatEpsilons, count: f64) -> Result<MuTerms> {
        let f = self.f_min(p, cut)?;
        let slope = self.slope(cut)?;
        let penalty = 2.0 / count.sqrt() * (self.d_o + slope) * eps.confidence_factor();
        Ok(MuTerms { value: f - penalty, f_min: f, slope, penalty })
    }

    fn cut_interval(&self) -> (f64, f64) {
        let shrink = 1e-9 * self.gamma;
        (OMEGA_CLASSICAL * self.norm + shrink, OMEGA_QUANTUM * self.norm - shrink)
    }

    fn optimize(&self, p: f64, eps: &EatEpsilons, count: f64) -> Result<MuOpt> {
        self.check_point(p)
            .map_err(|e| Error::Infeasible(format!("empty cut interval: {e}")))?;
        let (lo, hi) = self.cut_interval();
        let eval = |c: f64| self.mu(p, c, eps, count).map(|t| t.value).unwrap_or(f64::NEG_INFINITY);

        let step = (hi - lo) / (CUT_GRID - 1) as f64;
        let grid = |i: usize| if i + 1 == CUT_GRID { hi } else { lo + step * i as f64 };
        let mut best_i = 0;
        let mut best = f64::NEG_INFINITY;
        for i in 0..CUT_GRID {
            let v = eval(grid(i));
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let a = grid(best_i.saturating_sub(1));
        let b = grid((best_i + 1).min(CUT_GRID - 1));
        let (c_ref, v_ref) = golden_max(eval, a, b, GOLDEN_TOL * (hi - lo));
        let cut = if v_ref > best { c_ref } else { grid(best_i) };
        let terms = self.mu(p, cut, eps, count)?;
        Ok(MuOpt {
            value: terms.value,
            best_cut: cut,
            f_min: terms.f_min,
            slope: terms.slope,
            penalty: terms.penalty,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct MuTerms {
    value: f64,
    f_min: f64,
    slope: f64,
    penalty: f64,
}

/// Result of optimising the entropy rate over the cut point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuOpt {
    pub value: f64,
    /// Optimal cut as a value of `p(1)` (or `p̃(1)` in block mode).
    pub best_cut: f64,
    /// Min-tradeoff function at the observed statistic.
    pub f_min: f64,
    /// Slope of the min-tradeoff function above the cut.
    pub slope: f64,
    /// Second-order penalty subtracted from `f_min`.
    pub penalty: f64,
}

/// Golden-section maximisation of a function on `[a, b]`.
pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `g(p) = secrecy(p(1)/γ)`, flat at 1 above the Tsirelson bound.
pub fn g(p1: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Glued::per_round(gamma).g(p1)
}

/// Derivative of `g` in `p(1)` at the cut.
pub fn g_slope(p_cut1: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Glued::per_round(gamma).slope(p_cut1)
}

pub fn f_min(p1: f64, spec: &TradeoffSpec) -> Result<f64> {
    Glued::per_round(spec.gamma).f_min(p1, spec.p_cut1)
}

/// `f_min − (2/√n)(log 13 + a)·√(1 − 2 log(ε_s ε_e))`.
pub fn mu(p1: f64, spec: &TradeoffSpec, eps: &EatEpsilons, n: f64) -> Result<f64> {
    Ok(Glued::per_round(spec.gamma).mu(p1, spec.p_cut1, eps, n)?.value)
}

/// Maximise `mu(ω_exp·γ − δ_est, ·)` over the cut.
pub fn mu_opt(omega_exp: f64, delta_est: f64, gamma: f64, n: f64, eps: &EatEpsilons) -> Result<MuOpt> {
    check_gamma(gamma)?;
    Glued::per_round(gamma).optimize(omega_exp * gamma - delta_est, eps, n)
}

pub fn entropy_lower_bound(n: f64, mu_opt_value: f64) -> f64 {
    n * mu_opt_value
}

/// Upper bound on the smooth max-entropy of the test-round transcript.
pub fn max_entropy_upper(n: f64, gamma: f64, eps_s: f64, eps_ea: f64, eps_ec: f64) -> f64 {
    let inner = (1.0 - 2.0 * ((eps_s / 4.0) * (eps_ea + eps_ec)).log2()).sqrt();
    gamma * n + n.sqrt() * 2.0 * 7f64.log2() * inner
}

pub fn expected_block_length(block: &BlockSpec) -> f64 {
    block.expected_length()
}

/// Block min-tradeoff function at `p̃(1)`, cut at `cut` (same scale).
pub fn f_min_block(p1_tilde: f64, block: &BlockSpec, cut: f64) -> Result<f64> {
    Glued::block(block).f_min(p1_tilde, cut)
}

pub fn mu_block(p1_tilde: f64, block: &BlockSpec, cut: f64, eps: &EatEpsilons, m_blocks: f64) -> Result<f64> {
    Ok(Glued::block(block).mu(p1_tilde, cut, eps, m_blocks)?.value)
}

/// Per-block entropy rate optimised over the cut, evaluated at
/// `ω_exp(1−(1−γ)^s_max) − δ_est`.
pub fn mu_block_opt(
    omega_exp: f64,
    delta_est: f64,
    block: &BlockSpec,
    m_blocks: f64,
    eps: &EatEpsilons,
) -> Result<MuOpt> {
    let glued = Glued::block(block);
    glued.optimize(omega_exp * glued.norm - delta_est, eps, m_blocks)
}

/// Deviation `t` such that more than `n̄ + t` rounds occur with probability
/// at most `ε_t`.
pub fn round_count_tail(m_blocks: f64, gamma: f64, eps_t: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(eps_t > 0.0 && eps_t < 1.0) {
        return domain(format!("eps_t = {eps_t} not in (0,1)"));
    }
    if gamma == 1.0 {
        return Ok(0.0);
    }
    let r = (1.0 - gamma) / gamma;
    Ok((-m_blocks * r * r * eps_t.ln() / 2.0).sqrt())
}
