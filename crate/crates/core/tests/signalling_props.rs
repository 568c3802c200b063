use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use di_toolkit::boxes::{chsh_game, l1_distance, Alphabets, InputDistribution, ObservedData, SingleRoundBox};
use di_toolkit::signalling::{
    binomial_upper_tail, iid_threshold_probability, run_signalling_test, sig_measure, threshold_bound, SigTarget, TestParams,
};

fn random_alphabets(rng: &mut ChaCha8Rng) -> Alphabets {
    Alphabets::new(rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=3)).unwrap()
}

fn random_q(al: &Alphabets, rng: &mut ChaCha8Rng) -> InputDistribution {
    let w: Vec<f64> = (0..al.inputs()).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    InputDistribution::new(al.x_size, al.y_size, w.into_iter().map(|v| v / s).collect()).unwrap()
}

/// Upper tail of `Bin(n,p)` by direct summation of the mass function.
fn tail_oracle(n: u64, p: f64, k: u64) -> f64 {
    let mut total = 0.0;
    for j in k..=n {
        let mut c = 1.0f64;
        for i in 0..j {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        total += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ns_boxes_do_not_signal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let al = random_alphabets(&mut rng);
        let q = random_q(&al, &mut rng);
        let bx = SingleRoundBox::random_nonsignalling(al, &mut rng);
        for t in SigTarget::all(&al) {
            prop_assert!(sig_measure(&bx, &q, t).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn sig_is_two_lipschitz(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let al = random_alphabets(&mut rng);
        let q = random_q(&al, &mut rng);
        let b1 = SingleRoundBox::random(al, &mut rng);
        let b2 = SingleRoundBox::random(al, &mut rng);
        let dist = l1_distance(&b1, &b2, &q).unwrap();
        for t in SigTarget::all(&al) {
            let d = (sig_measure(&b1, &q, t).unwrap() - sig_measure(&b2, &q, t).unwrap()).abs();
            prop_assert!(d <= 2.0 * dist + 1e-12);
        }
    }

    #[test]
    fn exact_tail_below_hoeffding(n in 1u64..3000, beta in 0.0f64..0.5, omega in 0.0f64..1.0) {
        let bx = SingleRoundBox::from_fn(Alphabets::binary(), |a, b, x, y| {
            let win = (a ^ b) == (x & y);
            0.5 * if win { omega } else { 1.0 - omega }
        }).unwrap();
        let t = iid_threshold_probability(&bx, &chsh_game(), n, beta).unwrap();
        prop_assert!((t.omega - omega).abs() < 1e-12);
        prop_assert!(t.exact <= t.hoeffding * (1.0 + 1e-12));
    }

    #[test]
    fn binomial_tail_matches_direct_sum(n in 1u64..60, p in 0.01f64..0.99, k in 0u64..60) {
        let k = k.min(n);
        let got = binomial_upper_tail(n, p, k);
        let want = tail_oracle(n, p, k);
        prop_assert!((got - want).abs() <= 1e-12 + 1e-10 * want);
    }

    #[test]
    fn threshold_bound_at_most_one(beta in 0.0f64..=1.0, scale in 1u64..100) {
        let g = chsh_game();
        if let Ok(v) = threshold_bound(&g, 5_000_000_000 * scale, beta) {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn signalling_data_detected_and_ns_data_passes() {
    let al = Alphabets::binary();
    let q = InputDistribution::uniform(2, 2);
    let params = TestParams::new(0.06, 0.008, 2000).unwrap();
    let t = SigTarget::a_to_b(0, 0, 0);
    let b_eq_x = SingleRoundBox::from_fn(al, |_, b, x, _| if b == x { 0.5 } else { 0.0 }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut detected = 0;
    let mut false_alarms = 0;
    for _ in 0..50 {
        let d = ObservedData::sample_iid(&b_eq_x, &q, 2000, &mut rng).unwrap();
        detected += usize::from(run_signalling_test(&d, &q, &params, t, &al).unwrap());
        let d = ObservedData::sample_iid(&SingleRoundBox::pr_box(), &q, 2000, &mut rng).unwrap();
        false_alarms += usize::from(run_signalling_test(&d, &q, &params, t, &al).unwrap());
    }
    assert_eq!(detected, 50);
    assert_eq!(false_alarms, 0);
}

#[test]
fn missing_pairs_reject() {
    let al = Alphabets::binary();
    let q = InputDistribution::uniform(2, 2);
    let params = TestParams::new(0.06, 0.008, 2).unwrap();
    let d = ObservedData::new(&al, vec![0, 0], vec![0, 1], vec![0, 1], vec![0, 0]).unwrap();
    assert!(!run_signalling_test(&d, &q, &params, SigTarget::a_to_b(0, 0, 0), &al).unwrap());
}
