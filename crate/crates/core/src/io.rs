//! JSON file formats for boxes, games, multi-round boxes and observed data.
//! Schemas for each live in `schemas/` at the repository root.
//!
//! Single-round tables are nested `[x][y][a][b]`; the winning table of a game
//! is nested `[a][b][x][y]` with 0/1 entries. Multi-round tables use the same
//! `[x⃗][y⃗][a⃗][b⃗]` nesting, each string flattened mixed-radix little-endian
//! (round 1 is the least significant digit).

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::boxes::{Alphabets, Game, InputDistribution, MultiRoundBox, ObservedData, SingleRoundBox, LOAD_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub q: Vec<Vec<f64>>,
    pub win: Vec<Vec<Vec<Vec<u8>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiBoxFile {
    pub n: usize,
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Observed rounds together with the alphabets and question distribution
/// they were drawn under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    pub a_size: usize,
    pub b_size: usize,
    pub x_size: usize,
    pub y_size: usize,
    pub q: Vec<Vec<f64>>,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

fn alphabets(a: usize, b: usize, x: usize, y: usize) -> Result<Alphabets> {
    Alphabets::new(a, b, x, y)
}

impl BoxFile {
    pub fn from_box(bx: &SingleRoundBox) -> Self {
        let al = bx.alphabets();
        Self { a_size: al.a_size, b_size: al.b_size, x_size: al.x_size, y_size: al.y_size, p: bx.to_nested() }
    }

    /// With `renormalize`, each row is rescaled to sum to one before the
    /// normalisation check.
    pub fn to_box(&self, renormalize: bool) -> Result<SingleRoundBox> {
        let al = alphabets(self.a_size, self.b_size, self.x_size, self.y_size)?;
        if !renormalize {
            return SingleRoundBox::from_nested(al, &self.p);
        }
        let flat: Vec<f64> = self.p.iter().flatten().flatten().flatten().copied().collect();
        SingleRoundBox::from_nested(al, &self.p).or_else(|_| SingleRoundBox::from_raw(al, flat)?.renormalized())
    }
}

impl GameFile {
    pub fn from_game(g: &Game) -> Self {
        let al = g.alphabets();
        let win = (0..al.a_size)
            .map(|a| {
                (0..al.b_size)
                    .map(|b| (0..al.x_size).map(|x| (0..al.y_size).map(|y| u8::from(g.win(a, b, x, y))).collect()).collect())
                    .collect()
            })
            .collect();
        Self { a_size: al.a_size, b_size: al.b_size, x_size: al.x_size, y_size: al.y_size, q: g.q().to_nested(), win }
    }

    pub fn to_game(&self) -> Result<Game> {
        let al = alphabets(self.a_size, self.b_size, self.x_size, self.y_size)?;
        let shape_ok = self.win.len() == al.a_size
            && self.win.iter().all(|r| {
                r.len() == al.b_size && r.iter().all(|s| s.len() == al.x_size && s.iter().all(|t| t.len() == al.y_size))
            });
        if !shape_ok {
            return Err(Error::Parse("win table shape does not match alphabets".into()));
        }
        if self.win.iter().flatten().flatten().flatten().any(|&v| v > 1) {
            return Err(Error::Parse("win entries must be 0 or 1".into()));
        }
        let q = InputDistribution::from_nested(&self.q)?;
        Game::new(al, q, |a, b, x, y| self.win[a][b][x][y] == 1)
    }
}

impl MultiBoxFile {
    pub fn from_box(bx: &MultiRoundBox) -> Self {
        let al = bx.alphabets();
        Self {
            n: bx.rounds(),
            a_size: al.a_size,
            b_size: al.b_size,
            x_size: al.x_size,
            y_size: al.y_size,
            p: bx.to_nested(),
        }
    }

    pub fn to_box(&self) -> Result<MultiRoundBox> {
        let al = alphabets(self.a_size, self.b_size, self.x_size, self.y_size)?;
        MultiRoundBox::from_nested(self.n, al, &self.p)
    }
}

impl DataFile {
    pub fn new(al: &Alphabets, q: &InputDistribution, d: &ObservedData) -> Self {
        Self {
            a_size: al.a_size,
            b_size: al.b_size,
            x_size: al.x_size,
            y_size: al.y_size,
            q: q.to_nested(),
            a: d.a.clone(),
            b: d.b.clone(),
            x: d.x.clone(),
            y: d.y.clone(),
        }
    }

    pub fn parts(&self) -> Result<(Alphabets, InputDistribution, ObservedData)> {
        let al = alphabets(self.a_size, self.b_size, self.x_size, self.y_size)?;
        let q = InputDistribution::from_nested(&self.q)?;
        if q.x_size() != al.x_size || q.y_size() != al.y_size {
            return Err(Error::Parse("q shape does not match alphabets".into()));
        }
        let d = ObservedData::new(&al, self.a.clone(), self.b.clone(), self.x.clone(), self.y.clone())?;
        Ok((al, q, d))
    }
}

pub fn from_json_str<T: DeserializeOwned>(s: &str) -> Result<T> {
    serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let s = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json_str(&s)
}

pub fn to_json_string<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

/// Loads a single-round box; rows must sum to one within the load tolerance
/// unless `renormalize` is set.
pub fn load_box(path: impl AsRef<Path>, renormalize: bool) -> Result<SingleRoundBox> {
    let b = read_json::<BoxFile>(path)?.to_box(renormalize)?;
    debug_assert!(b.is_normalized(LOAD_TOL));
    Ok(b)
}

pub fn load_game(path: impl AsRef<Path>) -> Result<Game> {
    read_json::<GameFile>(path)?.to_game()
}

pub fn load_multi_box(path: impl AsRef<Path>) -> Result<MultiRoundBox> {
    read_json::<MultiBoxFile>(path)?.to_box()
}

pub fn load_data(path: impl AsRef<Path>) -> Result<(Alphabets, InputDistribution, ObservedData)> {
    read_json::<DataFile>(path)?.parts()
}
