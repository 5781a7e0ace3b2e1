use std::fmt;

use super::spec::{FractalSpec, Kind};
use super::word::{Word, MAX_WORD_LEN};
use crate::error::{Error, Result};

/// The point `F_w(q_k)` in canonical form: the shortest word that reaches
/// it, and among those the lexicographically smallest `(w, k)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    word: Word,
    k: usize,
}

impl Vertex {
    pub fn new(spec: &FractalSpec, word: Word, k: usize) -> Result<Vertex> {
        if k >= spec.n0 {
            return Err(Error::UnsupportedAddress(format!("boundary index {k} >= n0 = {}", spec.n0)));
        }
        if word.letters().iter().any(|&l| l as usize >= spec.j()) {
            return Err(Error::UnsupportedAddress(format!("word {word} uses a letter above J")));
        }
        if word.len() > MAX_WORD_LEN {
            return Err(Error::UnsupportedAddress(format!("word longer than {MAX_WORD_LEN}")));
        }
        Ok(canonicalize(spec, word, k))
    }

    pub fn boundary(k: usize) -> Vertex {
        Vertex { word: Word::empty(), k }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Smallest m with the vertex in V_m.
    pub fn level(&self) -> usize {
        self.word.len()
    }

    /// Every (word, index) pair at the vertex's own level naming this point,
    /// smallest first.
    pub fn siblings(&self, spec: &FractalSpec) -> Vec<(Word, usize)> {
        let Some(last) = self.word.last() else {
            return vec![(Word::empty(), self.k)];
        };
        let id = spec.gluing[last][self.k];
        let stem = self.word.prefix(self.word.len() - 1);
        let mut out = Vec::new();
        for (j, row) in spec.gluing.iter().enumerate() {
            for (k, &g) in row.iter().enumerate() {
                if g == id {
                    let mut w = stem.clone();
                    w.push(j);
                    out.push((w, k));
                }
            }
        }
        out
    }

    /// Parses `"<letters>:<k>"`, e.g. `"12:0"` for `F_1 F_2 (q_0)` or `":1"`.
    pub fn parse(spec: &FractalSpec, s: &str) -> Result<Vertex> {
        let (w, k) = s
            .split_once(':')
            .ok_or_else(|| Error::UnsupportedAddress(format!("{s:?}: expected <word>:<k>")))?;
        let word = Word::parse(w, spec.j())?;
        let k: usize = k
            .trim()
            .trim_start_matches('q')
            .parse()
            .map_err(|_| Error::UnsupportedAddress(format!("{s:?}: bad boundary index")))?;
        Vertex::new(spec, word, k)
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_empty() {
            write!(f, ":{}", self.k)
        } else {
            write!(f, "{}:{}", self.word, self.k)
        }
    }
}

/// Strips letters that map onto a boundary point, then picks the smallest
/// sibling at the remaining level.
pub fn canonicalize(spec: &FractalSpec, mut word: Word, mut k: usize) -> Vertex {
    while let Some(j) = word.last() {
        let id = spec.gluing[j][k];
        if id < spec.n0 {
            word.pop();
            k = id;
        } else {
            break;
        }
    }
    let Some(j) = word.last() else {
        return Vertex { word, k };
    };
    let id = spec.gluing[j][k];
    'search: for (jj, row) in spec.gluing.iter().enumerate() {
        for (kk, &g) in row.iter().enumerate() {
            if g == id {
                word.pop();
                word.push(jj);
                k = kk;
                break 'search;
            }
        }
    }
    Vertex { word, k }
}

/// A point of the fractal: a junction vertex, or a real coordinate on the
/// interval preset.
#[derive(Clone, Debug, PartialEq)]
pub enum Address {
    Vertex(Vertex),
    Real(f64),
}

impl Address {
    /// Accepts `"<word>:<k>"` for vertices and, on the interval, plain reals.
    pub fn parse(spec: &FractalSpec, s: &str) -> Result<Address> {
        if s.contains(':') {
            return Ok(Address::Vertex(Vertex::parse(spec, s)?));
        }
        if spec.kind != Kind::Interval {
            return Err(Error::UnsupportedAddress(format!(
                "{s:?}: real coordinates exist only on the interval; use <word>:<k>"
            )));
        }
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::UnsupportedAddress(format!("{s:?} is not a number")))?;
        Address::real(x)
    }

    pub fn real(x: f64) -> Result<Address> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::UnsupportedAddress(format!("{x} outside [0,1]")));
        }
        Ok(Address::Real(x))
    }

    pub fn is_boundary(&self) -> bool {
        match self {
            Address::Vertex(v) => v.level() == 0,
            Address::Real(x) => *x == 0.0 || *x == 1.0,
        }
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Address::Vertex(v) => write!(f, "{v}"),
            Address::Real(x) => write!(f, "{x}"),
        }
    }
}

/// Interval coordinate of a vertex (exact for dyadics).
pub fn interval_coordinate(v: &Vertex) -> f64 {
    let mut x = v.k as f64;
    for &l in v.word.letters().iter().rev() {
        x = 0.5 * (x + l as f64);
    }
    x
}

/// The dyadic vertex at `x`, if `x` has at most MAX_WORD_LEN binary digits.
pub fn interval_vertex(spec: &FractalSpec, x: f64) -> Option<Vertex> {
    let mut word = Word::empty();
    let mut t = x;
    for _ in 0..=MAX_WORD_LEN {
        if t == 0.0 || t == 1.0 {
            return Some(canonicalize(spec, word, t as usize));
        }
        t *= 2.0;
        if t >= 1.0 {
            word.push(1);
            t -= 1.0;
        } else {
            word.push(0);
        }
    }
    None
}

/// Cells of level `m` containing `x`, each with the local address
/// `F_w^{-1} x`, sorted by word.
pub fn locate(spec: &FractalSpec, x: &Address, m: usize) -> Result<Vec<(Word, Address)>> {
    match x {
        Address::Vertex(v) => Ok(locate_vertex(spec, v, m)
            .into_iter()
            .map(|(w, lv)| (w, Address::Vertex(lv)))
            .collect()),
        Address::Real(t) => {
            if spec.kind != Kind::Interval {
                return Err(Error::UnsupportedAddress("real coordinate off the interval".into()));
            }
            Ok(locate_real(*t, m)
                .into_iter()
                .map(|(w, s)| (w, Address::Real(s)))
                .collect())
        }
    }
}

pub(crate) fn locate_vertex(spec: &FractalSpec, v: &Vertex, m: usize) -> Vec<(Word, Vertex)> {
    let lvl = v.level();
    let mut out: Vec<(Word, Vertex)> = Vec::new();
    for (w, k) in v.siblings(spec) {
        if m >= lvl {
            let cell = w.extended(spec.fixed_map(k), m - lvl);
            out.push((cell, Vertex::boundary(k)));
        } else {
            let cell = w.prefix(m);
            if out.iter().any(|(c, _)| *c == cell) {
                continue;
            }
            let local = canonicalize(spec, w.suffix(m), k);
            out.push((cell, local));
        }
    }
    out.sort();
    out
}

pub(crate) fn locate_real(x: f64, m: usize) -> Vec<(Word, f64)> {
    let scale = (m as f64).exp2();
    let s = x * scale;
    let n = scale as u64;
    let mut idx = vec![];
    let fl = s.floor();
    if fl == s {
        let i = s as u64;
        if i > 0 {
            idx.push(i - 1);
        }
        if i < n {
            idx.push(i);
        }
    } else {
        idx.push(fl as u64);
    }
    idx.into_iter()
        .map(|i| {
            let mut w = Word::empty();
            for b in (0..m).rev() {
                w.push(((i >> b) & 1) as usize);
            }
            (w, s - i as f64)
        })
        .collect()
}
