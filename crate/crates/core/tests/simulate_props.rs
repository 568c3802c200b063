use proptest::prelude::*;

use di_toolkit::eat::BlockSpec;
use di_toolkit::simulate::{
    estimate_abort_probability, estimate_abort_probability_blocks, round_count_statistics, run_protocol, run_protocol_blocks,
    BlockConfig, HonestDevice, ProtocolConfig,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn disagreement_rate_tracks_qber(qber in 0.0f64..0.1, seed in any::<u64>()) {
        let dev = HonestDevice::werner(qber).unwrap();
        let cfg = ProtocolConfig::honest(20_000, 0.05, 0.01, dev).unwrap();
        let t = run_protocol(&cfg, seed);
        let g = t.generation_rounds as f64;
        let rate = t.disagreements as f64 / g;
        let sigma = (qber * (1.0 - qber) / g).sqrt();
        prop_assert!((rate - qber).abs() <= 3.0 * sigma + 1.0 / g);
    }

    #[test]
    fn mean_block_length_tracks_expectation(gamma in 0.05f64..=1.0, seed in any::<u64>()) {
        let block = BlockSpec::recommended(gamma).unwrap();
        let dev = HonestDevice::werner(0.01).unwrap();
        let m = 5_000u64;
        let cfg = BlockConfig::honest(m, block, 0.01, dev).unwrap();
        let t = run_protocol_blocks(&cfg, seed);
        let blocks = t.blocks.unwrap();
        prop_assert_eq!(blocks.len() as u64, m);
        let lens: Vec<f64> = blocks.iter().map(|b| b.len as f64).collect();
        let mean = lens.iter().sum::<f64>() / m as f64;
        let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let s_bar = block.expected_length();
        prop_assert!((mean - s_bar).abs() <= 3.0 * (var / m as f64).sqrt() + 1e-12);
        prop_assert_eq!(t.rounds.len() as f64, lens.iter().sum::<f64>());
    }

    #[test]
    fn reruns_are_identical(seed in any::<u64>()) {
        let dev = HonestDevice::werner(0.02).unwrap();
        let cfg = ProtocolConfig::honest(2_000, 0.3, 0.02, dev).unwrap();
        prop_assert_eq!(run_protocol(&cfg, seed), run_protocol(&cfg, seed));
        let bcfg = BlockConfig::honest(500, BlockSpec::recommended(0.3).unwrap(), 0.02, dev).unwrap();
        prop_assert_eq!(run_protocol_blocks(&bcfg, seed), run_protocol_blocks(&bcfg, seed));
    }
}

#[test]
fn abort_frequency_within_hoeffding_envelope() {
    for (n, gamma, delta) in [(10_000u64, 0.5, 0.02), (20_000, 0.2, 0.015), (5_000, 1.0, 0.03)] {
        let dev = HonestDevice::new(0.81, 0.0).unwrap();
        let cfg = ProtocolConfig::honest(n, gamma, delta, dev).unwrap();
        let e = estimate_abort_probability(&cfg, 300, n).unwrap();
        let limit = e.hoeffding_bound + 3.0 * e.frequency.sigma_at(e.hoeffding_bound);
        assert!(e.frequency.freq <= limit, "n={n}: {} > {limit}", e.frequency.freq);
    }
    let dev = HonestDevice::new(0.81, 0.0).unwrap();
    let bcfg = BlockConfig::honest(4_000, BlockSpec::recommended(0.5).unwrap(), 0.03, dev).unwrap();
    let e = estimate_abort_probability_blocks(&bcfg, 300, 1).unwrap();
    assert!(e.frequency.freq <= e.hoeffding_bound + 3.0 * e.frequency.sigma_at(e.hoeffding_bound));
}

#[test]
fn round_count_tail_below_eps_t() {
    let block = BlockSpec::recommended(0.25).unwrap();
    let dev = HonestDevice::werner(0.0).unwrap();
    let s = round_count_statistics(2_000, &block, &dev, 0.05, 400, 9).unwrap();
    assert!(s.tail.freq <= s.eps_t + 3.0 * s.tail.sigma_at(s.eps_t));
    let sigma: f64 = ((1.0f64 - 0.25) / (0.25 * 0.25) * 2_000.0 / 400.0).sqrt();
    assert!((s.mean_rounds - s.expected_rounds).abs() <= 3.0 * sigma);
}
