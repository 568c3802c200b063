//! Single- and multi-round boxes, games, and observed input/output data.
//!
//! Single-round tables are dense and row-major in `[x][y][a][b]` order.

pub(crate) mod multi;

pub use multi::{MultiRoundBox, MAX_MULTI_ENTRIES, MAX_SYMMETRIZE_ROUNDS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating normalisation of loaded tables.
pub const LOAD_TOL: f64 = 1e-9;

/// Largest number of deterministic strategy pairs `classical_value` enumerates.
pub const MAX_STRATEGY_PAIRS: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabets {
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
}

impl Alphabets {
    pub fn new(a_size: usize, b_size: usize, x_size: usize, y_size: usize) -> Result<Self> {
        if a_size == 0 || b_size == 0 || x_size == 0 || y_size == 0 {
            return Err(Error::Domain("alphabet sizes must be at least 1".into()));
        }
        Ok(Self { a_size, b_size, x_size, y_size })
    }

    pub fn binary() -> Self {
        Self { a_size: 2, b_size: 2, x_size: 2, y_size: 2 }
    }

    /// Number of table entries `|A||B||X||Y|`.
    pub fn len(&self) -> usize {
        self.a_size * self.b_size * self.x_size * self.y_size
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn outputs(&self) -> usize {
        self.a_size * self.b_size
    }

    pub fn inputs(&self) -> usize {
        self.x_size * self.y_size
    }

    /// Number of signalling tests `d = |X||Y|(|A|+|B|)`.
    pub fn signalling_count(&self) -> usize {
        self.x_size * self.y_size * (self.a_size + self.b_size)
    }

    #[inline]
    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.y_size + y) * self.a_size + a) * self.b_size + b
    }

    fn check_same(&self, other: &Alphabets) -> Result<()> {
        if self != other {
            return Err(Error::AlphabetMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Distribution `Q_XY` over question pairs, stored `[x][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    x_size: usize,
    y_size: usize,
    q: Vec<f64>,
}

impl InputDistribution {
    pub fn new(x_size: usize, y_size: usize, q: Vec<f64>) -> Result<Self> {
        if x_size == 0 || y_size == 0 || q.len() != x_size * y_size {
            return Err(Error::Domain("input distribution has wrong shape".into()));
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("input distribution has negative entries".into()));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > LOAD_TOL {
            return Err(Error::Domain(format!("input distribution sums to {total}")));
        }
        Ok(Self { x_size, y_size, q })
    }

    pub fn uniform(x_size: usize, y_size: usize) -> Self {
        let v = 1.0 / (x_size * y_size) as f64;
        Self { x_size, y_size, q: vec![v; x_size * y_size] }
    }

    pub fn from_nested(rows: &[Vec<f64>]) -> Result<Self> {
        let x_size = rows.len();
        let y_size = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != y_size) {
            return Err(Error::Parse("ragged input distribution".into()));
        }
        Self::new(x_size, y_size, rows.concat())
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.y_size).map(|r| r.to_vec()).collect()
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.q[x * self.y_size + y]
    }

    pub fn has_complete_support(&self) -> bool {
        self.q.iter().all(|&v| v > 0.0)
    }

    pub fn min_entry(&self) -> f64 {
        self.q.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn marginal_x(&self, x: usize) -> f64 {
        (0..self.y_size).map(|y| self.get(x, y)).sum()
    }

    pub fn marginal_y(&self, y: usize) -> f64 {
        (0..self.x_size).map(|x| self.get(x, y)).sum()
    }

    fn check_alphabets(&self, alph: &Alphabets) -> Result<()> {
        if self.x_size != alph.x_size || self.y_size != alph.y_size {
            return Err(Error::AlphabetMismatch(format!(
                "input distribution is {}x{}, box inputs are {}x{}",
                self.x_size, self.y_size, alph.x_size, alph.y_size
            )));
        }
        Ok(())
    }

    /// Draw a question pair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let i = sample_index(&self.q, rng);
        (i / self.y_size, i % self.y_size)
    }
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Uniformly random point of the probability simplex of dimension `k`.
pub(crate) fn random_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|e| *e /= s);
    v
}

/// Conditional distribution `P(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRoundBox {
    alphabets: Alphabets,
    p: Vec<f64>,
}

impl SingleRoundBox {
    /// Validated box: entries in `[0,1]` and normalised per `(x,y)` within
    /// [`LOAD_TOL`].
    pub fn new(alphabets: Alphabets, p: Vec<f64>) -> Result<Self> {
        let b = Self::from_raw(alphabets, p)?;
        if b.p.iter().any(|&v| v > 1.0 + LOAD_TOL) {
            return Err(Error::Domain("box entries must not exceed 1".into()));
        }
        if !b.is_normalized(LOAD_TOL) {
            return Err(Error::Domain("box is not normalised for every input pair".into()));
        }
        Ok(b)
    }

    /// Table that is only required to be finite and non-negative. Frequency
    /// boxes are built this way since they need not be normalised.
    pub fn from_raw(alphabets: Alphabets, p: Vec<f64>) -> Result<Self> {
        if p.len() != alphabets.len() {
            return Err(Error::Domain(format!(
                "table has {} entries, alphabets need {}",
                p.len(),
                alphabets.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("box entries must be finite and non-negative".into()));
        }
        Ok(Self { alphabets, p })
    }

    pub fn from_fn(alphabets: Alphabets, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = vec![0.0; alphabets.len()];
        for x in 0..alphabets.x_size {
            for y in 0..alphabets.y_size {
                for a in 0..alphabets.a_size {
                    for b in 0..alphabets.b_size {
                        p[alphabets.index(a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self::new(alphabets, p)
    }

    /// Local deterministic strategy `a = fa(x)`, `b = fb(y)`.
    pub fn deterministic(alphabets: Alphabets, fa: &[usize], fb: &[usize]) -> Result<Self> {
        if fa.len() != alphabets.x_size || fb.len() != alphabets.y_size {
            return Err(Error::AlphabetMismatch("strategy length differs from input size".into()));
        }
        Self::from_fn(alphabets, |a, b, x, y| f64::from(fa[x] == a && fb[y] == b))
    }

    pub fn uniform(alphabets: Alphabets) -> Self {
        let v = 1.0 / alphabets.outputs() as f64;
        Self { alphabets, p: vec![v; alphabets.len()] }
    }

    /// Binary box with uniform outputs and `a ⊕ b = x·y`.
    pub fn pr_box() -> Self {
        Self::from_fn(Alphabets::binary(), |a, b, x, y| if a ^ b == x & y { 0.5 } else { 0.0 })
            .expect("valid table")
    }

    /// Box drawn with independent uniform-simplex rows; generally signalling.
    pub fn random<R: Rng + ?Sized>(alphabets: Alphabets, rng: &mut R) -> Self {
        let mut p = Vec::with_capacity(alphabets.len());
        for _ in 0..alphabets.inputs() {
            p.extend(random_simplex(alphabets.outputs(), rng));
        }
        Self { alphabets, p }
    }

    /// Random non-signalling box: a convex mixture of random local
    /// deterministic strategies and, for binary alphabets, the PR box.
    pub fn random_nonsignalling<R: Rng + ?Sized>(alphabets: Alphabets, rng: &mut R) -> Self {
        let k = 4;
        let mut weights = random_simplex(k + 1, rng);
        let mut p = vec![0.0; alphabets.len()];
        for w in weights.drain(..k) {
            let fa: Vec<usize> = (0..alphabets.x_size).map(|_| rng.random_range(0..alphabets.a_size)).collect();
            let fb: Vec<usize> = (0..alphabets.y_size).map(|_| rng.random_range(0..alphabets.b_size)).collect();
            let d = Self::deterministic(alphabets, &fa, &fb).expect("valid strategy");
            p.iter_mut().zip(&d.p).for_each(|(t, v)| *t += w * v);
        }
        let rest = weights[0];
        let extra = if alphabets == Alphabets::binary() { Self::pr_box() } else { Self::uniform(alphabets) };
        p.iter_mut().zip(&extra.p).for_each(|(t, v)| *t += rest * v);
        Self { alphabets, p }
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.alphabets.index(a, b, x, y)]
    }

    pub fn row_sum(&self, x: usize, y: usize) -> f64 {
        let start = self.alphabets.index(0, 0, x, y);
        self.p[start..start + self.alphabets.outputs()].iter().sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (0..self.alphabets.x_size)
            .all(|x| (0..self.alphabets.y_size).all(|y| (self.row_sum(x, y) - 1.0).abs() <= tol))
    }

    /// Copy with every `(x,y)` row rescaled to sum to one.
    pub fn renormalized(&self) -> Result<Self> {
        let mut p = self.p.clone();
        let k = self.alphabets.outputs();
        for row in p.chunks_mut(k) {
            let s: f64 = row.iter().sum();
            if s <= 0.0 {
                return Err(Error::Domain("cannot renormalise an empty row".into()));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Self { alphabets: self.alphabets, p })
    }

    /// Alice's marginal `P(a|x,y)`.
    pub fn marginal_a(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.alphabets.b_size).map(|b| self.get(a, b, x, y)).sum()
    }

    /// Bob's marginal `P(b|x,y)`.
    pub fn marginal_b(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.alphabets.a_size).map(|a| self.get(a, b, x, y)).sum()
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let al = &self.alphabets;
        (0..al.x_size)
            .map(|x| {
                (0..al.y_size)
                    .map(|y| (0..al.a_size).map(|a| (0..al.b_size).map(|b| self.get(a, b, x, y)).collect()).collect())
                    .collect()
            })
            .collect()
    }

    pub fn from_nested(alphabets: Alphabets, nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let mut p = Vec::with_capacity(alphabets.len());
        let shape_err = || Error::Parse("box table shape does not match alphabets".into());
        if nested.len() != alphabets.x_size {
            return Err(shape_err());
        }
        for xs in nested {
            if xs.len() != alphabets.y_size {
                return Err(shape_err());
            }
            for ys in xs {
                if ys.len() != alphabets.a_size {
                    return Err(shape_err());
                }
                for row in ys {
                    if row.len() != alphabets.b_size {
                        return Err(shape_err());
                    }
                    p.extend_from_slice(row);
                }
            }
        }
        Self::new(alphabets, p)
    }
}

/// True iff Alice's marginal does not depend on `y` and Bob's does not
/// depend on `x`, entrywise within `tol`.
pub fn is_nonsignalling(bx: &SingleRoundBox, tol: f64) -> bool {
    let al = bx.alphabets;
    let alice = (0..al.x_size).all(|x| {
        (0..al.a_size).all(|a| {
            let first = bx.marginal_a(a, x, 0);
            (1..al.y_size).all(|y| (bx.marginal_a(a, x, y) - first).abs() <= tol)
        })
    });
    let bob = (0..al.y_size).all(|y| {
        (0..al.b_size).all(|b| {
            let first = bx.marginal_b(b, 0, y);
            (1..al.x_size).all(|x| (bx.marginal_b(b, x, y) - first).abs() <= tol)
        })
    });
    alice && bob
}

/// Two-player game: question distribution and winning predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    alphabets: Alphabets,
    q: InputDistribution,
    /// Stored in box order `[x][y][a][b]`.
    win: Vec<bool>,
}

impl Game {
    pub fn new(
        alphabets: Alphabets,
        q: InputDistribution,
        predicate: impl Fn(usize, usize, usize, usize) -> bool,
    ) -> Result<Self> {
        q.check_alphabets(&alphabets)?;
        let mut win = vec![false; alphabets.len()];
        for x in 0..alphabets.x_size {
            for y in 0..alphabets.y_size {
                for a in 0..alphabets.a_size {
                    for b in 0..alphabets.b_size {
                        win[alphabets.index(a, b, x, y)] = predicate(a, b, x, y);
                    }
                }
            }
        }
        Ok(Self { alphabets, q, win })
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn q(&self) -> &InputDistribution {
        &self.q
    }

    /// Winning predicate `R(a,b,x,y)`.
    #[inline]
    pub fn win(&self, a: usize, b: usize, x: usize, y: usize) -> bool {
        self.win[self.alphabets.index(a, b, x, y)]
    }

    /// Predicate table in box order `[x][y][a][b]`.
    pub fn win_table(&self) -> &[bool] {
        &self.win
    }

    /// Random game with `q` uniform-simplex and each predicate entry a fair coin.
    pub fn random<R: Rng + ?Sized>(alphabets: Alphabets, rng: &mut R) -> Self {
        let q = InputDistribution {
            x_size: alphabets.x_size,
            y_size: alphabets.y_size,
            q: random_simplex(alphabets.inputs(), rng),
        };
        let win = (0..alphabets.len()).map(|_| rng.random_bool(0.5)).collect();
        Self { alphabets, q, win }
    }
}

/// Binary CHSH game with uniform questions, won iff `a ⊕ b = x·y`.
pub fn chsh_game() -> Game {
    Game::new(Alphabets::binary(), InputDistribution::uniform(2, 2), |a, b, x, y| a ^ b == x & y)
        .expect("valid game")
}

/// CHSH variant with a third input for Bob used for key generation. Questions
/// are uniform over all six pairs.
pub fn extended_chsh_game() -> Game {
    let alph = Alphabets::new(2, 2, 2, 3).expect("valid alphabets");
    Game::new(alph, InputDistribution::uniform(2, 3), |a, b, x, y| match (x, y) {
        (_, 0 | 1) => a ^ b == x & y,
        (0, 2) => a == b,
        _ => true,
    })
    .expect("valid game")
}

/// `Σ Q(x,y) P(a,b|x,y) R(a,b,x,y)`.
pub fn winning_probability(bx: &SingleRoundBox, game: &Game) -> Result<f64> {
    bx.alphabets.check_same(&game.alphabets)?;
    let al = bx.alphabets;
    let mut total = 0.0;
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            let q = game.q.get(x, y);
            for a in 0..al.a_size {
                for b in 0..al.b_size {
                    if game.win(a, b, x, y) {
                        total += q * bx.get(a, b, x, y);
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Best winning probability over deterministic local strategies.
pub fn classical_value(game: &Game) -> Result<f64> {
    let al = game.alphabets;
    let count = (al.a_size as f64).powi(al.x_size as i32) * (al.b_size as f64).powi(al.y_size as i32);
    if count > MAX_STRATEGY_PAIRS {
        return Err(Error::SizeLimit(format!("{count} deterministic strategy pairs")));
    }
    let mut fa = vec![0usize; al.x_size];
    let mut best = f64::NEG_INFINITY;
    loop {
        // For a fixed Alice strategy Bob's best response decouples over y.
        let mut value = 0.0;
        for y in 0..al.y_size {
            let mut best_b = f64::NEG_INFINITY;
            for b in 0..al.b_size {
                let v: f64 = (0..al.x_size)
                    .filter(|&x| game.win(fa[x], b, x, y))
                    .map(|x| game.q.get(x, y))
                    .sum();
                best_b = best_b.max(v);
            }
            value += best_b;
        }
        best = best.max(value);
        if !increment(&mut fa, al.a_size) {
            break;
        }
    }
    Ok(best)
}

/// Mixed-radix odometer; returns false after wrapping around.
pub(crate) fn increment(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Recorded inputs and outputs of `n` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedData {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

impl ObservedData {
    pub fn new(alphabets: &Alphabets, a: Vec<usize>, b: Vec<usize>, x: Vec<usize>, y: Vec<usize>) -> Result<Self> {
        let n = a.len();
        if b.len() != n || x.len() != n || y.len() != n {
            return Err(Error::Domain("data vectors have different lengths".into()));
        }
        let in_range = |v: &[usize], k: usize| v.iter().all(|&e| e < k);
        if !(in_range(&a, alphabets.a_size)
            && in_range(&b, alphabets.b_size)
            && in_range(&x, alphabets.x_size)
            && in_range(&y, alphabets.y_size))
        {
            return Err(Error::Domain("data entry outside its alphabet".into()));
        }
        Ok(Self { a, b, x, y })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Rounds `range` as a new data set.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            a: self.a[range.clone()].to_vec(),
            b: self.b[range.clone()].to_vec(),
            x: self.x[range.clone()].to_vec(),
            y: self.y[range].to_vec(),
        }
    }

    /// `n` IID rounds with questions from `q` and answers from `bx`.
    pub fn sample_iid<R: Rng + ?Sized>(bx: &SingleRoundBox, q: &InputDistribution, n: usize, rng: &mut R) -> Result<Self> {
        q.check_alphabets(&bx.alphabets)?;
        let al = bx.alphabets;
        let k = al.outputs();
        let mut d = Self { a: Vec::with_capacity(n), b: Vec::with_capacity(n), x: Vec::with_capacity(n), y: Vec::with_capacity(n) };
        for _ in 0..n {
            let (x, y) = q.sample(rng);
            let start = al.index(0, 0, x, y);
            let o = sample_index(&bx.p[start..start + k], rng);
            d.a.push(o / al.b_size);
            d.b.push(o % al.b_size);
            d.x.push(x);
            d.y.push(y);
        }
        Ok(d)
    }
}

/// Frequency box `O(a,b,x,y)/Q(x,y)` where `O` is the empirical joint
/// distribution. Rows are normalised only if the empirical question
/// frequencies match `q`.
pub fn frequency_box(data: &ObservedData, alphabets: &Alphabets, q: &InputDistribution) -> Result<SingleRoundBox> {
    q.check_alphabets(alphabets)?;
    if !q.has_complete_support() {
        return Err(Error::IncompleteSupport);
    }
    let n = data.len();
    let mut counts = vec![0usize; alphabets.len()];
    let mut seen = vec![false; alphabets.inputs()];
    for i in 0..n {
        counts[alphabets.index(data.a[i], data.b[i], data.x[i], data.y[i])] += 1;
        seen[data.x[i] * alphabets.y_size + data.y[i]] = true;
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(Error::MissingInputPair { x: j / alphabets.y_size, y: j % alphabets.y_size });
    }
    let mut p = vec![0.0; alphabets.len()];
    for x in 0..alphabets.x_size {
        for y in 0..alphabets.y_size {
            let qxy = q.get(x, y);
            for a in 0..alphabets.a_size {
                for b in 0..alphabets.b_size {
                    let i = alphabets.index(a, b, x, y);
                    p[i] = counts[i] as f64 / n as f64 / qxy;
                }
            }
        }
    }
    SingleRoundBox::from_raw(*alphabets, p)
}

/// `E_{(x,y)~q} Σ_{a,b} |P1 − P2|`.
pub fn l1_distance(b1: &SingleRoundBox, b2: &SingleRoundBox, q: &InputDistribution) -> Result<f64> {
    b1.alphabets.check_same(&b2.alphabets)?;
    q.check_alphabets(&b1.alphabets)?;
    let al = b1.alphabets;
    let k = al.outputs();
    let mut total = 0.0;
    for x in 0..al.x_size {
        for y in 0..al.y_size {
            let s = al.index(0, 0, x, y);
            let row: f64 = (s..s + k).map(|i| (b1.p[i] - b2.p[i]).abs()).sum();
            total += q.get(x, y) * row;
        }
    }
    Ok(total)
}

/// Fraction of rounds won.
pub fn threshold_win_fraction(data: &ObservedData, game: &Game) -> Result<f64> {
    let al = &game.alphabets;
    ObservedData::new(al, data.a.clone(), data.b.clone(), data.x.clone(), data.y.clone())?;
    if data.is_empty() {
        return Err(Error::Domain("no rounds recorded".into()));
    }
    let wins = (0..data.len())
        .filter(|&i| game.win(data.a[i], data.b[i], data.x[i], data.y[i]))
        .count();
    Ok(wins as f64 / data.len() as f64)
}
