use rand::Rng;

use super::{increment, random_simplex, Alphabets, Game, SingleRoundBox, LOAD_TOL};
use crate::error::{Error, Result};

/// Largest multi-round table that will be materialised.
pub const MAX_MULTI_ENTRIES: usize = 1 << 24;

/// `symmetrize` enumerates all `n!` permutations up to this many rounds.
pub const MAX_SYMMETRIZE_ROUNDS: usize = 6;

/// Box over `n`-round strings. Strings are encoded little-endian: round 1 is
/// the least significant digit. The table is `[x⃗][y⃗][a⃗][b⃗]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRoundBox {
    n: usize,
    alphabets: Alphabets,
    p: Vec<f64>,
}

fn checked_pow(base: usize, n: usize) -> Option<usize> {
    (0..n).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

/// Number of entries of an `n`-round table, if below the size limit.
pub(crate) fn table_len(alphabets: &Alphabets, n: usize) -> Result<usize> {
    checked_pow(alphabets.len(), n)
        .filter(|&l| l <= MAX_MULTI_ENTRIES)
        .ok_or_else(|| Error::SizeLimit(format!("{n}-round table over {alphabets:?}")))
}

/// Little-endian digits of `code` in base `radix`.
pub(crate) fn decode(mut code: usize, radix: usize, n: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(code % radix);
        code /= radix;
    }
    out
}

pub(crate) fn encode(digits: &[usize], radix: usize) -> usize {
    digits.iter().rev().fold(0, |acc, &d| acc * radix + d)
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::Domain(format!("permutation has length {}, expected {n}", perm.len())));
    }
    for &i in perm {
        if i >= n || seen[i] {
            return Err(Error::Domain(format!("{perm:?} is not a permutation")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

impl MultiRoundBox {
    pub fn new(n: usize, alphabets: Alphabets, p: Vec<f64>) -> Result<Self> {
        let len = table_len(&alphabets, n)?;
        if p.len() != len {
            return Err(Error::Domain(format!("table has {} entries, expected {len}", p.len())));
        }
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain("entries must be finite and non-negative".into()));
        }
        let b = Self { n, alphabets, p };
        if !b.is_normalized(LOAD_TOL) {
            return Err(Error::Domain("multi-round box is not normalised per input string".into()));
        }
        Ok(b)
    }

    pub(crate) fn from_parts_unchecked(n: usize, alphabets: Alphabets, p: Vec<f64>) -> Self {
        Self { n, alphabets, p }
    }

    /// Independent uniform-simplex distribution per input string.
    pub fn random<R: Rng + ?Sized>(n: usize, alphabets: Alphabets, rng: &mut R) -> Result<Self> {
        let len = table_len(&alphabets, n)?;
        let k = checked_pow(alphabets.outputs(), n).expect("bounded by table size");
        let mut p = Vec::with_capacity(len);
        for _ in 0..len / k {
            p.extend(random_simplex(k, rng));
        }
        Ok(Self { n, alphabets, p })
    }

    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// String-space sizes `(|X|^n, |Y|^n, |A|^n, |B|^n)`.
    pub fn string_sizes(&self) -> (usize, usize, usize, usize) {
        let al = &self.alphabets;
        let n = self.n;
        let pw = |k| checked_pow(k, n).expect("bounded by table size");
        (pw(al.x_size), pw(al.y_size), pw(al.a_size), pw(al.b_size))
    }

    #[inline]
    pub fn index_of_codes(&self, ca: usize, cb: usize, cx: usize, cy: usize) -> usize {
        let (_, ny, na, nb) = self.string_sizes();
        ((cx * ny + cy) * na + ca) * nb + cb
    }

    /// Codes `(a⃗, b⃗, x⃗, y⃗)` of a flat table index.
    pub fn codes_of_index(&self, i: usize) -> (usize, usize, usize, usize) {
        let (_, ny, na, nb) = self.string_sizes();
        let cb = i % nb;
        let r = i / nb;
        let ca = r % na;
        let r = r / na;
        (ca, cb, r / ny, r % ny)
    }

    pub fn get(&self, a: &[usize], b: &[usize], x: &[usize], y: &[usize]) -> f64 {
        let al = &self.alphabets;
        self.p[self.index_of_codes(
            encode(a, al.a_size),
            encode(b, al.b_size),
            encode(x, al.x_size),
            encode(y, al.y_size),
        )]
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        let (_, _, na, nb) = self.string_sizes();
        self.p.chunks(na * nb).all(|row| (row.iter().sum::<f64>() - 1.0).abs() <= tol)
    }

    /// Product of `n` copies of `single`.
    pub fn iid(single: &SingleRoundBox, n: usize) -> Result<Self> {
        let al = *single.alphabets();
        let len = table_len(&al, n)?;
        let mut p = vec![0.0; len];
        let shell = Self::from_parts_unchecked(n, al, Vec::new());
        let (nx, ny, na, nb) = shell.string_sizes();
        let mut a = vec![0; n];
        let mut b = vec![0; n];
        let mut x = vec![0; n];
        let mut y = vec![0; n];
        for cx in 0..nx {
            for cy in 0..ny {
                for ca in 0..na {
                    for cb in 0..nb {
                        let mut v = 1.0;
                        for i in 0..n {
                            v *= single.get(a[i], b[i], x[i], y[i]);
                        }
                        p[shell.index_of_codes(ca, cb, cx, cy)] = v;
                        increment(&mut b, al.b_size);
                    }
                    increment(&mut a, al.a_size);
                }
                increment(&mut y, al.y_size);
            }
            increment(&mut x, al.x_size);
        }
        Ok(Self { n, alphabets: al, p })
    }

    /// For each string code, the code of the same string with its rounds
    /// reordered by `perm` (`out_i = s_{perm[i]}`).
    fn permuted_codes(&self, perm: &[usize], radix: usize, count: usize) -> Vec<usize> {
        (0..count)
            .map(|c| {
                let s = decode(c, radix, self.n);
                let t: Vec<usize> = perm.iter().map(|&j| s[j]).collect();
                encode(&t, radix)
            })
            .collect()
    }

    /// `(P∘π)(a⃗,b⃗|x⃗,y⃗) = P(π(a⃗),π(b⃗)|π(x⃗),π(y⃗))`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n)?;
        let al = self.alphabets;
        let (nx, ny, na, nb) = self.string_sizes();
        let px = self.permuted_codes(perm, al.x_size, nx);
        let py = self.permuted_codes(perm, al.y_size, ny);
        let pa = self.permuted_codes(perm, al.a_size, na);
        let pb = self.permuted_codes(perm, al.b_size, nb);
        let mut p = vec![0.0; self.p.len()];
        for (i, v) in p.iter_mut().enumerate() {
            let (ca, cb, cx, cy) = self.codes_of_index(i);
            *v = self.p[self.index_of_codes(pa[ca], pb[cb], px[cx], py[cy])];
        }
        Ok(Self { n: self.n, alphabets: al, p })
    }

    /// Average of `P∘π` over all permutations of the rounds.
    pub fn symmetrize(&self) -> Result<Self> {
        if self.n > MAX_SYMMETRIZE_ROUNDS {
            return Err(Error::SizeLimit(format!(
                "symmetrize enumerates n! permutations; n = {} exceeds {MAX_SYMMETRIZE_ROUNDS}",
                self.n
            )));
        }
        let perms = all_permutations(self.n);
        let mut acc = vec![0.0; self.p.len()];
        for perm in &perms {
            let q = self.permute(perm)?;
            acc.iter_mut().zip(&q.p).for_each(|(t, v)| *t += v);
        }
        let k = perms.len() as f64;
        acc.iter_mut().for_each(|v| *v /= k);
        Ok(Self { n: self.n, alphabets: self.alphabets, p: acc })
    }

    /// Invariance under every adjacent transposition, which generate all
    /// permutations.
    pub fn is_permutation_invariant(&self, tol: f64) -> bool {
        (1..self.n).all(|i| {
            let mut perm: Vec<usize> = (0..self.n).collect();
            perm.swap(i - 1, i);
            let q = self.permute(&perm).expect("valid transposition");
            self.p.iter().zip(&q.p).all(|(u, v)| (u - v).abs() <= tol)
        })
    }

    /// Alice's string marginal independent of `y⃗` and Bob's of `x⃗`.
    pub fn is_nonsignalling_between_parties(&self, tol: f64) -> bool {
        let (nx, ny, na, nb) = self.string_sizes();
        let alice = |ca: usize, cx: usize, cy: usize| -> f64 {
            (0..nb).map(|cb| self.p[self.index_of_codes(ca, cb, cx, cy)]).sum()
        };
        let bob = |cb: usize, cx: usize, cy: usize| -> f64 {
            (0..na).map(|ca| self.p[self.index_of_codes(ca, cb, cx, cy)]).sum()
        };
        let a_ok = (0..nx).all(|cx| {
            (0..na).all(|ca| {
                let first = alice(ca, cx, 0);
                (1..ny).all(|cy| (alice(ca, cx, cy) - first).abs() <= tol)
            })
        });
        let b_ok = (0..ny).all(|cy| {
            (0..nb).all(|cb| {
                let first = bob(cb, 0, cy);
                (1..nx).all(|cx| (bob(cb, cx, cy) - first).abs() <= tol)
            })
        });
        a_ok && b_ok
    }

    /// Probability of winning at least `min_wins` of the `n` rounds of `game`
    /// with questions drawn IID from the game's distribution.
    pub fn threshold_win_probability(&self, game: &Game, min_wins: usize) -> Result<f64> {
        if game.alphabets() != &self.alphabets {
            return Err(Error::AlphabetMismatch("game and box alphabets differ".into()));
        }
        let al = self.alphabets;
        let mut total = 0.0;
        for (i, &v) in self.p.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let (ca, cb, cx, cy) = self.codes_of_index(i);
            let a = decode(ca, al.a_size, self.n);
            let b = decode(cb, al.b_size, self.n);
            let x = decode(cx, al.x_size, self.n);
            let y = decode(cy, al.y_size, self.n);
            let wins = (0..self.n).filter(|&r| game.win(a[r], b[r], x[r], y[r])).count();
            if wins >= min_wins {
                let q: f64 = (0..self.n).map(|r| game.q().get(x[r], y[r])).product();
                total += q * v;
            }
        }
        Ok(total)
    }

    /// Nested `[x⃗][y⃗][a⃗][b⃗]` table with string indices flattened.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        let (nx, ny, na, nb) = self.string_sizes();
        (0..nx)
            .map(|cx| {
                (0..ny)
                    .map(|cy| {
                        (0..na)
                            .map(|ca| (0..nb).map(|cb| self.p[self.index_of_codes(ca, cb, cx, cy)]).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn from_nested(n: usize, alphabets: Alphabets, nested: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let flat: Vec<f64> = nested.iter().flatten().flatten().flatten().copied().collect();
        let shell = Self::from_parts_unchecked(n, alphabets, Vec::new());
        let (nx, ny, na, nb) = shell.string_sizes();
        let shape_ok = nested.len() == nx
            && nested.iter().all(|r| r.len() == ny && r.iter().all(|s| s.len() == na && s.iter().all(|t| t.len() == nb)));
        if !shape_ok {
            return Err(Error::Parse("multi-round table shape does not match alphabets".into()));
        }
        Self::new(n, alphabets, flat)
    }
}
