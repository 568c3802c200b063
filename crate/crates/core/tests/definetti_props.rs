use std::collections::HashSet;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use di_toolkit::boxes::Alphabets;
use di_toolkit::definetti::{perm_upper_bound, tau_box, tau_entry_exact, tau_lower_bound, TypeCounts};

/// Every way to put at most `max_total` balls into `cells` cells.
fn compositions(cells: usize, max_total: u64) -> Vec<Vec<u64>> {
    fn rec(cells: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == cells {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(cells, left - v, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(cells, max_total, &mut Vec::new(), &mut out);
    out
}

#[test]
fn lower_bound_below_exact_up_to_six_rounds() {
    let mut checked = 0;
    for (l, m) in [(1, 2), (1, 3), (2, 2), (2, 3), (1, 4), (4, 4)] {
        for counts in compositions(l * m, 6) {
            let c = TypeCounts::new(l, m, counts).unwrap();
            assert!(tau_lower_bound(&c) <= tau_entry_exact(&c), "{c:?}");
            checked += 1;
        }
    }
    assert!(checked > 70_000);
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Orbit of the output string under round permutations that fix the
    /// input string.
    #[test]
    fn perm_upper_bound_is_inverse_orbit_size(
        n in 1usize..=4,
        l in 1usize..=4,
        m in 2usize..=4,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs: Vec<usize> = (0..n).map(|_| rng.random_range(0..l)).collect();
        let outputs: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let mut orbit = HashSet::new();
        for p in permutations(n) {
            if (0..n).all(|i| inputs[p[i]] == inputs[i]) {
                orbit.insert(p.iter().map(|&i| outputs[i]).collect::<Vec<_>>());
            }
        }
        let mut counts = vec![0u64; l * m];
        for i in 0..n {
            counts[inputs[i] * m + outputs[i]] += 1;
        }
        let c = TypeCounts::new(l, m, counts).unwrap();
        prop_assert_eq!(perm_upper_bound(&c), BigRational::new(1.into(), orbit.len().into()));
    }
}

/// Stick-breaking weights `(t₀, (1−t₀)t₁, …)` with independent uniform sticks.
fn stick_breaking(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut rest = 1.0;
    let mut w = Vec::with_capacity(m);
    for _ in 0..m - 1 {
        let t: f64 = rng.random();
        w.push(rest * t);
        rest *= 1.0 - t;
    }
    w.push(rest);
    w
}

#[test]
fn tau_matches_stick_breaking_monte_carlo() {
    let cases: [(usize, usize, Vec<u64>); 6] = [
        (1, 2, vec![1, 1]),
        (1, 4, vec![1, 0, 2, 0]),
        (2, 2, vec![2, 0, 1, 1]),
        (2, 3, vec![0, 1, 1, 1, 0, 0]),
        (4, 4, vec![1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0]),
        (1, 3, vec![0, 0, 3]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = 200_000;
    for (l, m, counts) in cases {
        let c = TypeCounts::new(l, m, counts.clone()).unwrap();
        let exact = tau_entry_exact(&c).to_f64().unwrap();
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let mut v = 1.0;
            for j in 0..l {
                let w = stick_breaking(m, &mut rng);
                for k in 0..m {
                    v *= w[k].powi(counts[j * m + k] as i32);
                }
            }
            s += v;
            s2 += v * v;
        }
        let mean = s / samples as f64;
        let se = ((s2 / samples as f64 - mean * mean) / samples as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se, "{counts:?}: MC {mean} ± {se}, exact {exact}");
    }
}

#[test]
fn tau_box_normalised_and_invariant() {
    for n in 1..=3 {
        let t = tau_box(n, Alphabets::binary()).unwrap();
        assert!(t.is_normalized(1e-12), "n={n}");
        assert!(t.is_permutation_invariant(1e-15), "n={n}");
    }
}
