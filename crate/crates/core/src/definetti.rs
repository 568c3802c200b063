//! The de Finetti box τ, the bounds used in the reduction, and exact
//! verification of `P ≤ (n+1)^{l(m−1)} τ` on permutation-invariant boxes.
//!
//! Input pairs and output pairs are flattened canonically as
//! `j = x·|Y| + y` and `k = a·|B| + b`. The stick-breaking order follows `k`,
//! so τ is not symmetric in the outputs: at `n = 1` the entries are
//! `(1/2, 1/4, 1/8, 1/8)` for binary alphabets.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::boxes::multi::{decode, table_len};
use crate::boxes::{Alphabets, MultiRoundBox, LOAD_TOL};
use crate::error::{Error, Result};

/// Joint counts `n_{j,k}` of the rounds of one table entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TypeCounts {
    l: usize,
    m: usize,
    /// Row-major `l × m`.
    counts: Vec<u64>,
}

impl TypeCounts {
    pub fn new(l: usize, m: usize, counts: Vec<u64>) -> Result<Self> {
        if l == 0 || m == 0 {
            return Err(Error::Domain("need at least one input and one output pair".into()));
        }
        if counts.len() != l * m {
            return Err(Error::Domain(format!("expected {} counts, got {}", l * m, counts.len())));
        }
        Ok(Self { l, m, counts })
    }

    pub fn from_nested(rows: &[Vec<u64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Domain("ragged count table".into()));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    /// Counts of the rounds `(a_i, b_i, x_i, y_i)`.
    pub fn from_strings(al: &Alphabets, a: &[usize], b: &[usize], x: &[usize], y: &[usize]) -> Result<Self> {
        let n = a.len();
        if b.len() != n || x.len() != n || y.len() != n {
            return Err(Error::Domain("strings have different lengths".into()));
        }
        let (l, m) = (al.inputs(), al.outputs());
        let mut counts = vec![0u64; l * m];
        for i in 0..n {
            if a[i] >= al.a_size || b[i] >= al.b_size || x[i] >= al.x_size || y[i] >= al.y_size {
                return Err(Error::Domain(format!("round {i} outside the alphabets")));
            }
            let j = x[i] * al.y_size + y[i];
            let k = a[i] * al.b_size + b[i];
            counts[j * m + k] += 1;
        }
        Ok(Self { l, m, counts })
    }

    /// Counts of the entry at flat `index` of `bx`.
    pub fn of_entry(bx: &MultiRoundBox, index: usize) -> Self {
        let al = bx.alphabets();
        let n = bx.rounds();
        let (ca, cb, cx, cy) = bx.codes_of_index(index);
        let a = decode(ca, al.a_size, n);
        let b = decode(cb, al.b_size, n);
        let x = decode(cx, al.x_size, n);
        let y = decode(cy, al.y_size, n);
        Self::from_strings(al, &a, &b, &x, &y).expect("decoded strings are in range")
    }

    pub fn input_pairs(&self) -> usize {
        self.l
    }

    pub fn output_pairs(&self) -> usize {
        self.m
    }

    pub fn row(&self, j: usize) -> &[u64] {
        &self.counts[j * self.m..(j + 1) * self.m]
    }

    /// `n_j`.
    pub fn occurrences(&self, j: usize) -> u64 {
        self.row(j).iter().sum()
    }

    pub fn rounds(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn multinomial(row: &[u64]) -> BigUint {
    let mut r: u64 = row.iter().sum();
    let mut acc = BigUint::one();
    for &c in row {
        acc *= binomial(r, c);
        r -= c;
    }
    acc
}

fn ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(num.into(), den.into())
}

/// Exact τ entry: per input pair, `Π_k C(r_k, n_{j,k})⁻¹ / (r_k + 1)` over
/// `k < m` with `r_k` the count not yet assigned.
pub fn tau_entry_exact(c: &TypeCounts) -> BigRational {
    let mut den = BigUint::one();
    for j in 0..c.l {
        let row = c.row(j);
        let mut r: u64 = row.iter().sum();
        for &nk in &row[..c.m - 1] {
            den *= binomial(r, nk) * (r + 1);
            r -= nk;
        }
    }
    ratio(BigUint::one(), den)
}

/// `Π_j multinomial(n_j; n_{j,·})⁻¹ (n_j+1)^{−(m−1)}`.
pub fn tau_lower_bound(c: &TypeCounts) -> BigRational {
    let mut den = BigUint::one();
    for j in 0..c.l {
        let nj = c.occurrences(j);
        den *= multinomial(c.row(j)) * BigUint::from(nj + 1).pow((c.m - 1) as u32);
    }
    ratio(BigUint::one(), den)
}

/// `Π_j multinomial(n_j; n_{j,·})⁻¹`.
pub fn perm_upper_bound(c: &TypeCounts) -> BigRational {
    let den = (0..c.l).fold(BigUint::one(), |acc, j| acc * multinomial(c.row(j)));
    ratio(BigUint::one(), den)
}

/// `(n+1)^{l(m−1)}`.
pub fn reduction_factor(n: u64, l: usize, m: usize) -> BigUint {
    BigUint::from(n + 1).pow((l * m.saturating_sub(1)) as u32)
}

/// The full `n`-round table of τ.
pub fn tau_box(n: usize, alphabets: Alphabets) -> Result<MultiRoundBox> {
    let len = table_len(&alphabets, n)?;
    let shell = MultiRoundBox::from_parts_unchecked(n, alphabets, Vec::new());
    let mut cache: HashMap<TypeCounts, f64> = HashMap::new();
    let p = (0..len)
        .map(|i| {
            let c = TypeCounts::of_entry(&shell, i);
            *cache.entry(c).or_insert_with_key(|c| tau_entry_exact(c).to_f64().unwrap_or(0.0))
        })
        .collect();
    Ok(MultiRoundBox::from_parts_unchecked(n, alphabets, p))
}

/// Outcome of checking one box against the reduction inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionCheck {
    /// `max P/τ` over all entries.
    pub max_ratio: f64,
    /// `(n+1)^{l(m−1)}` as a float.
    pub factor: f64,
    /// Whether every entry satisfies `P ≤ factor·τ` in exact arithmetic.
    pub holds: bool,
}

/// Largest f64 not above `r`.
fn floor_f64(r: &BigRational) -> f64 {
    let mut f = r.to_f64().unwrap_or(f64::MAX);
    while f > 0.0 && BigRational::from_float(f).is_some_and(|v| &v > r) {
        f = f64::from_bits(f.to_bits() - 1);
    }
    f
}

/// Exact per-entry bounds `factor·τ`, cached by type.
pub struct ReductionVerifier {
    n: usize,
    alphabets: Alphabets,
    factor: BigUint,
    /// `(exact bound, largest float below it, τ as float)` per entry.
    bounds: Vec<(usize, f64, f64)>,
    exact: Vec<BigRational>,
}

impl ReductionVerifier {
    pub fn new(n: usize, alphabets: Alphabets) -> Result<Self> {
        let len = table_len(&alphabets, n)?;
        let factor = reduction_factor(n as u64, alphabets.inputs(), alphabets.outputs());
        let shell = MultiRoundBox::from_parts_unchecked(n, alphabets, Vec::new());
        let mut ids: HashMap<TypeCounts, usize> = HashMap::new();
        let mut exact = Vec::new();
        let mut info = Vec::new();
        let bounds = (0..len)
            .map(|i| {
                let c = TypeCounts::of_entry(&shell, i);
                let id = *ids.entry(c).or_insert_with_key(|c| {
                    let tau = tau_entry_exact(c);
                    let b = &tau * BigRational::from_integer(factor.clone().into());
                    info.push((floor_f64(&b), tau.to_f64().unwrap_or(0.0)));
                    exact.push(b);
                    exact.len() - 1
                });
                (id, info[id].0, info[id].1)
            })
            .collect();
        Ok(Self { n, alphabets, factor, bounds, exact })
    }

    pub fn factor(&self) -> &BigUint {
        &self.factor
    }

    /// Checks `bx` entrywise; the box must be permutation invariant.
    pub fn check(&self, bx: &MultiRoundBox) -> Result<ReductionCheck> {
        if bx.rounds() != self.n || bx.alphabets() != &self.alphabets {
            return Err(Error::AlphabetMismatch("box does not match the verifier".into()));
        }
        if !bx.is_permutation_invariant(LOAD_TOL) {
            return Err(Error::NotPermutationInvariant);
        }
        let mut max_ratio = 0.0f64;
        let mut holds = true;
        for (&p, &(id, fl, tau)) in bx.table().iter().zip(&self.bounds) {
            max_ratio = max_ratio.max(p / tau);
            if p > fl {
                let pr = BigRational::from_float(p).unwrap_or_else(BigRational::zero);
                holds &= pr <= self.exact[id];
            }
        }
        Ok(ReductionCheck { max_ratio, factor: self.factor.to_f64().unwrap_or(f64::INFINITY), holds })
    }
}

/// Checks one permutation-invariant box against `(n+1)^{l(m−1)} τ`.
pub fn verify_reduction(bx: &MultiRoundBox) -> Result<ReductionCheck> {
    ReductionVerifier::new(bx.rounds(), *bx.alphabets())?.check(bx)
}

/// Whether `weight·element ≤ parent + tol` entrywise.
pub fn partition_feasible(weight: f64, element: &MultiRoundBox, parent: &MultiRoundBox, tol: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::Domain(format!("weight {weight} outside [0,1]")));
    }
    if element.rounds() != parent.rounds() || element.alphabets() != parent.alphabets() {
        return Err(Error::AlphabetMismatch("element and parent differ in shape".into()));
    }
    Ok(element.table().iter().zip(parent.table()).all(|(e, p)| weight * e <= p + tol))
}
