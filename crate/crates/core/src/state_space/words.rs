//! Reduced words over tree/free-group alphabets, packed into `u64` handles.
//!
//! A word `l_1 l_2 ... l_r` over an alphabet of size `b` is stored as the
//! base-`b` number with digits `1 l_1 l_2 ... l_r` (most significant first).
//! The root is `1`. Appending a letter is `v * b + l`, dropping the last
//! letter is `v / b`, and the last letter is `v % b`. Words of length `r` live
//! in `[b^r, 2 b^r)`, so handles sort by length first and then
//! lexicographically.

use crate::error::{BmcError, Result};

/// Letters are printed `a`, `b`, ... and the root as `o`, so at most 14
/// letters are available.
pub const MAX_LETTERS: u8 = 14;

/// Generator alphabet of a Cayley tree.
///
/// `Involutions(d)` is the free product of `d` copies of Z/2, whose Cayley
/// graph is the homogeneous tree of degree `d`. `FreeGroup(k)` has letters
/// `2i` (generator `i`) and `2i + 1` (its inverse).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alphabet {
    Involutions(u8),
    FreeGroup(u8),
}

impl Alphabet {
    pub fn new_tree(degree: u8) -> Result<Self> {
        if !(2..=MAX_LETTERS).contains(&degree) {
            return Err(BmcError::InvalidKernel(format!(
                "tree degree must lie in 2..={MAX_LETTERS}, got {degree}"
            )));
        }
        Ok(Alphabet::Involutions(degree))
    }

    pub fn new_free_group(rank: u8) -> Result<Self> {
        if rank == 0 || 2 * rank > MAX_LETTERS {
            return Err(BmcError::InvalidKernel(format!(
                "free group rank must lie in 1..={}, got {rank}",
                MAX_LETTERS / 2
            )));
        }
        Ok(Alphabet::FreeGroup(rank))
    }

    /// Number of letters, which is also the vertex degree.
    #[inline]
    pub fn size(&self) -> u8 {
        match *self {
            Alphabet::Involutions(d) => d,
            Alphabet::FreeGroup(k) => 2 * k,
        }
    }

    #[inline]
    pub fn base(&self) -> u64 {
        self.size() as u64
    }

    #[inline]
    pub fn inverse(&self, letter: u8) -> u8 {
        match self {
            Alphabet::Involutions(_) => letter,
            Alphabet::FreeGroup(_) => letter ^ 1,
        }
    }

    /// Longest word whose packed handle fits in a `u64`.
    pub fn max_len(&self) -> usize {
        let b = self.base() as u128;
        let mut r = 0usize;
        let mut pow: u128 = 1;
        while 2 * pow * b <= u64::MAX as u128 + 1 {
            pow *= b;
            r += 1;
        }
        r
    }

    pub fn letter_name(&self, letter: u8) -> String {
        match self {
            Alphabet::Involutions(_) => ((b'a' + letter) as char).to_string(),
            Alphabet::FreeGroup(_) => {
                let g = b'a' + letter / 2;
                if letter % 2 == 0 {
                    (g as char).to_string()
                } else {
                    (g.to_ascii_uppercase() as char).to_string()
                }
            }
        }
    }

    /// Cancel adjacent inverse pairs until none remain.
    pub fn reduce(&self, letters: &[u8]) -> Vec<u8> {
        let mut out: Vec<u8> = Vec::with_capacity(letters.len());
        for &l in letters {
            match out.last() {
                Some(&prev) if prev == self.inverse(l) => {
                    out.pop();
                }
                _ => out.push(l),
            }
        }
        out
    }

    pub fn is_reduced(&self, letters: &[u8]) -> bool {
        letters.windows(2).all(|w| w[1] != self.inverse(w[0]))
    }

    /// Pack a reduced word.
    pub fn pack(&self, letters: &[u8]) -> Result<u64> {
        let b = self.base();
        if letters.len() > self.max_len() {
            return Err(BmcError::VertexOverflow { len: letters.len(), max: self.max_len() });
        }
        if letters.iter().any(|&l| l >= self.size()) || !self.is_reduced(letters) {
            return Err(BmcError::MalformedVertex(format!("{letters:?}")));
        }
        Ok(letters.iter().fold(1u64, |v, &l| v * b + l as u64))
    }

    /// Word length of a packed handle (no validation).
    #[inline]
    pub fn len(&self, mut v: u64) -> usize {
        let b = self.base();
        let mut r = 0;
        while v >= b {
            v /= b;
            r += 1;
        }
        r
    }

    pub fn unpack(&self, mut v: u64) -> Vec<u8> {
        let b = self.base();
        let mut out = Vec::new();
        while v >= b {
            out.push((v % b) as u8);
            v /= b;
        }
        out.reverse();
        out
    }

    /// Check that `v` encodes a reduced word.
    pub fn is_valid(&self, v: u64) -> bool {
        if v == 0 {
            return false;
        }
        let b = self.base();
        let mut t = v;
        while t >= b {
            t /= b;
        }
        t == 1 && self.is_reduced(&self.unpack(v))
    }

    #[inline]
    pub fn last(&self, v: u64) -> Option<u8> {
        let b = self.base();
        (v >= b).then(|| (v % b) as u8)
    }

    #[inline]
    pub fn parent(&self, v: u64) -> Option<u64> {
        let b = self.base();
        (v >= b).then(|| v / b)
    }

    /// Right multiplication by one letter, with cancellation.
    #[inline]
    pub fn mul_letter(&self, v: u64, letter: u8) -> Result<u64> {
        let b = self.base();
        if v >= b && (v % b) as u8 == self.inverse(letter) {
            return Ok(v / b);
        }
        v.checked_mul(b)
            .and_then(|w| w.checked_add(letter as u64))
            .filter(|&w| w <= u64::MAX / 2 + 1 || w / b == v)
            .ok_or(BmcError::VertexOverflow { len: self.len(v) + 1, max: self.max_len() })
            .and_then(|w| {
                if self.len(v) + 1 > self.max_len() {
                    Err(BmcError::VertexOverflow { len: self.len(v) + 1, max: self.max_len() })
                } else {
                    Ok(w)
                }
            })
    }

    /// Length of the common prefix of two words.
    pub fn common_prefix(&self, x: &[u8], y: &[u8]) -> usize {
        x.iter().zip(y).take_while(|(a, b)| a == b).count()
    }

    pub fn format(&self, v: u64) -> String {
        let letters = self.unpack(v);
        if letters.is_empty() {
            return "o".to_string();
        }
        letters.iter().map(|&l| self.letter_name(l)).collect()
    }

    /// Parse a word. Accepts `o`/`e`/empty for the root, lowercase letters for
    /// generators and, for free groups, uppercase letters or a trailing `⁻¹`
    /// / `^-1` for inverses. The result is reduced.
    pub fn parse(&self, s: &str) -> Result<u64> {
        let s = s.trim();
        if s.is_empty() || s == "o" || s == "e" {
            return Ok(1);
        }
        let bad = || BmcError::MalformedVertex(s.to_string());
        let chars: Vec<char> = s.chars().collect();
        let mut letters = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            i += 1;
            let (idx, mut inverse) = if c.is_ascii_lowercase() {
                (c as u8 - b'a', false)
            } else if c.is_ascii_uppercase() && matches!(self, Alphabet::FreeGroup(_)) {
                (c as u8 - b'A', true)
            } else {
                return Err(bad());
            };
            let rest: String = chars[i..].iter().collect();
            if rest.starts_with("⁻¹") {
                inverse = !inverse;
                i += 2;
            } else if rest.starts_with("^-1") {
                inverse = !inverse;
                i += 3;
            }
            let letter = match self {
                Alphabet::Involutions(_) => idx,
                Alphabet::FreeGroup(_) => 2 * idx + inverse as u8,
            };
            if letter >= self.size() || (inverse && matches!(self, Alphabet::Involutions(_))) {
                return Err(bad());
            }
            letters.push(letter);
        }
        self.pack(&self.reduce(&letters))
    }
}
