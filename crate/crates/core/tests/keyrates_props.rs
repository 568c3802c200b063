use proptest::prelude::*;

use di_toolkit::entropy::{binary_entropy, secrecy_bound};
use di_toolkit::keyrates::{
    completeness_error, key_length, key_length_block, optimize_rate, soundness_error, werner_omega, Caps, EpsilonBudget,
    Mode, ProtocolParams,
};

fn budget(eps_s: f64, eps_ea: f64, eps_pa: f64, eps_t: Option<f64>) -> EpsilonBudget {
    EpsilonBudget { eps_ec: 1e-10, eps_ec_complete: 1e-2, eps_s, eps_ea, eps_pa, eps_t }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn breakdown_sums_to_key_length(
        log_n in 6.0f64..13.0,
        gamma in 0.01f64..=1.0,
        omega in 0.8f64..0.853,
        frac in 0.05f64..0.9,
        qber in 0.0f64..0.08,
        log_eps in prop::array::uniform3(-10.0f64..-3.0),
        s_max in 1u32..20,
    ) {
        let n = 10f64.powf(log_n);
        let p = ProtocolParams::new(n, gamma, omega, frac * gamma * (omega - 0.75), qber).unwrap();
        let e = log_eps.map(|v| 10f64.powf(v));
        let r = key_length(&p, &budget(e[0], e[1], e[2], None)).unwrap();
        prop_assert!((r.breakdown.total() - r.key_length).abs() <= 1e-9 * r.key_length.abs().max(1.0));
        prop_assert!((r.rate * n - r.key_length).abs() <= 1e-9 * r.key_length.abs().max(1.0));
        if let Ok(b) = key_length_block(&p, &budget(e[0], e[1], e[2], Some(1e-30)), s_max) {
            prop_assert!((b.breakdown.total() - b.key_length).abs() <= 1e-9 * b.key_length.abs().max(1.0));
        }
    }

    /// Error terms written out independently of the library.
    #[test]
    fn error_formulas(
        log_eps in prop::array::uniform5(-12.0f64..-2.0),
        n in 1e3f64..1e12,
        delta in 1e-4f64..0.05,
    ) {
        let e = log_eps.map(|v| 10f64.powf(v));
        let b = EpsilonBudget { eps_ec: e[0], eps_ec_complete: 0.5, eps_s: e[1], eps_ea: e[2], eps_pa: e[3], eps_t: Some(e[4]) };
        let p = ProtocolParams::new(n, 0.5, 0.84, delta, 0.01).unwrap();
        let sound = e[3] + e[1] + e[2] + 2.0 * e[0];
        let complete = 0.5 + e[0] + (-2.0 * n * delta * delta).exp();
        prop_assert!((soundness_error(&b) - sound).abs() <= 1e-15 * sound);
        prop_assert!((completeness_error(&p, &b) - complete).abs() <= 1e-15);
    }

    #[test]
    fn block_with_unit_blocks_matches_per_round(
        log_n in 6.0f64..13.0,
        gamma in 0.01f64..=1.0,
        omega in 0.8f64..0.853,
        frac in 0.05f64..0.9,
        qber in 0.0f64..0.08,
        log_eps in prop::array::uniform3(-10.0f64..-3.0),
    ) {
        let n = 10f64.powf(log_n);
        let p = ProtocolParams::new(n, gamma, omega, frac * gamma * (omega - 0.75), qber).unwrap();
        let e = log_eps.map(|v| 10f64.powf(v));
        let a = key_length(&p, &budget(e[0], e[1], e[2], None)).unwrap();
        let b = key_length_block(&p, &budget(e[0], e[1], e[2], Some(1e-300)), 1).unwrap();
        prop_assert!((a.rate - b.rate).abs() <= 1e-9);
    }
}

#[test]
fn large_n_approaches_asymptotic_rate() {
    let caps = Caps { soundness: 1e-5, completeness: 1e-2, eps_ec: 1e-10 };
    for q in [0.0, 0.01, 0.025] {
        let r = optimize_rate(1e15, q, &caps, Mode::Block).unwrap();
        let asym = secrecy_bound(werner_omega(q).unwrap()).unwrap() - binary_entropy(q).unwrap();
        assert!(r.rate <= asym + 1e-9, "Q={q}: {} above {asym}", r.rate);
        assert!(asym - r.rate < 0.005, "Q={q}: gap {}", asym - r.rate);
    }
}
