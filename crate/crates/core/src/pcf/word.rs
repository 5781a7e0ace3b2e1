use std::fmt;

use crate::error::{Error, Result};

/// Longest word accepted from user input or requested as a series depth.
pub const MAX_WORD_LEN: usize = 32;

/// A finite word over the map indices. Letters are stored 0-based and
/// printed 1-based, so `Word::from(vec![0, 2])` prints as `13`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, letter: usize) {
        self.0.push(letter as u8);
    }

    pub fn pop(&mut self) -> Option<usize> {
        self.0.pop().map(usize::from)
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().map(|&l| usize::from(l))
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n].to_vec())
    }

    pub fn suffix(&self, n: usize) -> Word {
        Word(self.0[n..].to_vec())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `self` followed by `letter` repeated `n` times.
    pub fn extended(&self, letter: usize, n: usize) -> Word {
        let mut v = self.0.clone();
        v.extend(std::iter::repeat_n(letter as u8, n));
        Word(v)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Parses 1-based letters, either as plain digits (`"132"`) or dot
    /// separated (`"10.3.1"`). `j` is the alphabet size.
    pub fn parse(s: &str, j: usize) -> Result<Word> {
        let bad = |why: &str| Error::UnsupportedAddress(format!("word {s:?}: {why}"));
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        let parts: Vec<&str> = if s.contains('.') {
            s.split('.').collect()
        } else {
            s.split("").filter(|p| !p.is_empty()).collect()
        };
        let mut letters = Vec::with_capacity(parts.len());
        for p in parts {
            let l: usize = p.parse().map_err(|_| bad("letters must be integers"))?;
            if l == 0 || l > j {
                return Err(bad(&format!("letter {l} outside 1..={j}")));
            }
            letters.push((l - 1) as u8);
        }
        if letters.len() > MAX_WORD_LEN {
            return Err(bad(&format!("longer than {MAX_WORD_LEN} letters")));
        }
        Ok(Word(letters))
    }
}

impl From<Vec<u8>> for Word {
    fn from(v: Vec<u8>) -> Self {
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let wide = self.0.iter().any(|&l| l >= 9);
        for (i, l) in self.0.iter().enumerate() {
            if wide && i > 0 {
                write!(f, ".")?;
            }
            write!(f, "{}", l + 1)?;
        }
        Ok(())
    }
}

/// All words of length `n` over `j` letters, in lexicographic order.
pub fn words_of_length(j: usize, n: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * j);
        for w in &out {
            for l in 0..j {
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out = next;
    }
    out
}
