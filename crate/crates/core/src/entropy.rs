//! Scalar entropies and single-round entropy bounds for the CHSH game.
//!
//! All logarithms are base 2.

use crate::error::{domain, Result};

/// Slack allowed when clamping probabilities that drift just outside `[0,1]`.
pub const CLAMP_SLACK: f64 = 1e-12;

/// Classical CHSH value as a winning probability.
pub const OMEGA_CLASSICAL: f64 = 0.75;

/// Tsirelson bound as a winning probability, `(2+√2)/4`.
pub const OMEGA_QUANTUM: f64 = (2.0 + std::f64::consts::SQRT_2) / 4.0;

/// A CHSH winning probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinningProbability {
    pub omega: f64,
}

impl WinningProbability {
    pub fn new(omega: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return domain(format!("winning probability {omega} not in [0,1]"));
        }
        Ok(Self { omega })
    }

    pub fn in_quantum_regime(&self) -> bool {
        (OMEGA_CLASSICAL..=OMEGA_QUANTUM).contains(&self.omega)
    }
}

/// Parameters of the quantum asymptotic equipartition bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AepParams {
    pub n: f64,
    pub eps: f64,
    pub hmax_single: f64,
}

impl AepParams {
    pub fn new(n: f64, eps: f64, hmax_single: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return domain(format!("smoothing parameter {eps} not in (0,1)"));
        }
        if !(n >= 1.0) {
            return domain(format!("round count {n} must be at least 1"));
        }
        Ok(Self { n, eps, hmax_single })
    }

    pub fn nu(&self) -> f64 {
        2.0 * 2f64.powf(self.hmax_single).sqrt() + 1.0
    }

    /// Second-order width `δ(ε,ν) = 4 log ν √(log(2/ε²))`.
    pub fn delta(&self) -> f64 {
        4.0 * self.nu().log2() * (2.0 / (self.eps * self.eps)).log2().sqrt()
    }
}

fn clamp_unit(p: f64) -> Result<f64> {
    if p.is_nan() || p < -CLAMP_SLACK || p > 1.0 + CLAMP_SLACK {
        return domain(format!("probability {p} not in [0,1]"));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `h(p) = -p log p - (1-p) log(1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    let p = clamp_unit(p)?;
    Ok(h_unchecked(p))
}

pub(crate) fn h_unchecked(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Lower bound on H(A|X,E) for a single round winning CHSH with probability
/// `omega`. Outside the quantum regime the curve is continued flat
/// (0 below 3/4, 1 above the Tsirelson bound).
pub fn secrecy_bound(omega: f64) -> Result<f64> {
    let omega = clamp_unit(omega)?;
    if omega <= OMEGA_CLASSICAL {
        return Ok(0.0);
    }
    if omega >= OMEGA_QUANTUM {
        return Ok(1.0);
    }
    Ok(secrecy_raw(omega))
}

/// [`secrecy_bound`] restricted to `[3/4, (2+√2)/4]`; errors elsewhere.
pub fn secrecy_bound_strict(omega: f64) -> Result<f64> {
    check_quantum_regime(omega)?;
    Ok(secrecy_raw(omega.clamp(OMEGA_CLASSICAL, OMEGA_QUANTUM)))
}

fn check_quantum_regime(omega: f64) -> Result<()> {
    if omega.is_nan()
        || omega < OMEGA_CLASSICAL - CLAMP_SLACK
        || omega > OMEGA_QUANTUM + CLAMP_SLACK
    {
        return domain(format!("winning probability {omega} outside [3/4, (2+√2)/4]"));
    }
    Ok(())
}

fn radicand(omega: f64) -> f64 {
    (16.0 * omega * (omega - 1.0) + 3.0).clamp(0.0, 1.0)
}

fn secrecy_raw(omega: f64) -> f64 {
    1.0 - h_unchecked(0.5 + 0.5 * radicand(omega).sqrt())
}

/// Derivative of the secrecy curve in ω on the open quantum regime.
///
/// Written as `8(2ω-1)·atanh(s)/(s ln 2)` with `s = √(16ω(ω-1)+3)`, which stays
/// accurate as `s → 0` at the classical end.
pub fn secrecy_bound_derivative(omega: f64) -> Result<f64> {
    check_quantum_regime(omega)?;
    let s = radicand(omega).sqrt();
    if omega >= OMEGA_QUANTUM || s >= 1.0 {
        return domain("secrecy curve has infinite slope at the Tsirelson bound");
    }
    let ratio = if s < 1e-8 { 1.0 + s * s / 3.0 } else { s.atanh() / s };
    Ok(8.0 * (2.0 * omega - 1.0) * ratio / std::f64::consts::LN_2)
}

/// Upper bound on H(Q_A|Q_B) for Bell-diagonal states with winning
/// probability `omega`: `2h(1/2 - (2ω-1)/√2) - 1`.
pub fn bell_diag_bound(omega: f64) -> Result<f64> {
    check_quantum_regime(omega)?;
    let arg = 0.5 - (2.0 * omega - 1.0) / std::f64::consts::SQRT_2;
    Ok(2.0 * h_unchecked(arg.clamp(0.0, 1.0)) - 1.0)
}

/// Eigenvalues (Φ+, Ψ+, Φ-, Ψ-) of the Bell-diagonal state maximising the
/// conditional entropy at CHSH value `beta`.
pub fn bell_opt_eigenvalues(beta: f64) -> Result<[f64; 4]> {
    let tsirelson = 2.0 * std::f64::consts::SQRT_2;
    if beta.is_nan() || beta < 2.0 - CLAMP_SLACK || beta > tsirelson + CLAMP_SLACK {
        return domain(format!("CHSH value {beta} outside [2, 2√2]"));
    }
    let c = beta.clamp(2.0, tsirelson) / (4.0 * std::f64::consts::SQRT_2);
    let lo = 0.5 - c;
    let hi = 0.5 + c;
    Ok([lo * lo, hi * hi, lo * hi, lo * hi])
}

/// Shannon entropy (bits) of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// `n·h − √n·δ(ε,ν)`.
pub fn aep_min_lower(params: &AepParams, h_single: f64) -> f64 {
    params.n * h_single - params.n.sqrt() * params.delta()
}

/// `n·h + √n·δ(ε,ν)`.
pub fn aep_max_upper(params: &AepParams, h_single: f64) -> f64 {
    params.n * h_single + params.n.sqrt() * params.delta()
}

/// Asymptotic one-way key rate `H(A|E) − H(A|B)`.
pub fn dw_rate(h_ae: f64, h_ab: f64) -> f64 {
    h_ae - h_ab
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.838048).unwrap() - 0.63896).abs() < 1e-5);
        assert!(binary_entropy(1.0 + 1e-13).is_ok());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(-0.01).is_err());
    }

    #[test]
    fn secrecy_endpoints() {
        assert!(secrecy_bound(0.75).unwrap().abs() < 1e-12);
        assert!((secrecy_bound(OMEGA_QUANTUM).unwrap() - 1.0).abs() < 1e-12);
        assert!((secrecy_bound(0.801777).unwrap() - 0.361042).abs() < 1e-4);
        assert_eq!(secrecy_bound(0.6).unwrap(), 0.0);
        assert_eq!(secrecy_bound(0.9).unwrap(), 1.0);
        assert!(secrecy_bound_strict(0.6).is_err());
        assert!(secrecy_bound_strict(0.9).is_err());
    }

    #[test]
    fn secrecy_derivative_matches_differences() {
        for i in 1..100 {
            let w = OMEGA_CLASSICAL + (OMEGA_QUANTUM - OMEGA_CLASSICAL) * i as f64 / 100.0;
            let e = 1e-7;
            let fd = (secrecy_raw(w + e) - secrecy_raw(w - e)) / (2.0 * e);
            let an = secrecy_bound_derivative(w).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "w={w} fd={fd} an={an}");
        }
        let near = secrecy_bound_derivative(0.75 + 1e-14).unwrap();
        assert!((near - 4.0 / std::f64::consts::LN_2).abs() < 1e-4);
        assert!(secrecy_bound_derivative(OMEGA_QUANTUM).is_err());
    }

    #[test]
    fn bell_diag_values() {
        assert!((bell_diag_bound(OMEGA_QUANTUM).unwrap() + 1.0).abs() < 1e-12);
        let v = bell_diag_bound(0.75).unwrap();
        assert!((v - 0.2018).abs() < 1e-3, "{v}");
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let w = OMEGA_CLASSICAL + (OMEGA_QUANTUM - OMEGA_CLASSICAL) * i as f64 / 200.0;
            let v = bell_diag_bound(w).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn bell_eigenvalues() {
        let l = bell_opt_eigenvalues(2.0 * std::f64::consts::SQRT_2).unwrap();
        assert!(l[0].abs() < 1e-15 && (l[1] - 1.0).abs() < 1e-15 && l[2].abs() < 1e-15);
        let l = bell_opt_eigenvalues(2.0).unwrap();
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(bell_opt_eigenvalues(1.9).is_err());
    }

    #[test]
    fn aep_example() {
        let p = AepParams::new(1e6, 1e-5, 1.0).unwrap();
        assert!((p.nu() - (2.0 * std::f64::consts::SQRT_2 + 1.0)).abs() < 1e-14);
        let delta = 4.0 * (2.0 * 2f64.sqrt() + 1.0).log2() * (2.0 / 1e-10f64).log2().sqrt();
        assert!((aep_min_lower(&p, 0.5) - (5e5 - 1e3 * delta)).abs() < 1e-6);
        assert!((aep_max_upper(&p, 0.5) - (5e5 + 1e3 * delta)).abs() < 1e-6);
        assert!(AepParams::new(10.0, std::f64::consts::SQRT_2, 1.0).is_err());
    }

    #[test]
    fn dw_values() {
        assert_eq!(dw_rate(0.3, 0.3), 0.0);
        let r = dw_rate(secrecy_bound(OMEGA_QUANTUM).unwrap(), binary_entropy(0.0).unwrap());
        assert!((r - 1.0).abs() < 1e-12);
    }
}
