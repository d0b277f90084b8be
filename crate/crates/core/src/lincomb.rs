//! Finite linear combinations keyed by term strings.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::qlinalg::{format_rational, parse_rational, Rational};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinComb {
    terms: BTreeMap<String, Rational>,
}

impl LinComb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(key: impl Into<String>, c: Rational) -> Self {
        let mut l = Self::new();
        l.add(key, c);
        l
    }

    pub fn add(&mut self, key: impl Into<String>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let key = key.into();
        let e = self.terms.entry(key.clone()).or_insert_with(Rational::zero);
        *e += c;
        if e.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add_scaled(&mut self, other: &LinComb, a: &Rational) {
        for (k, v) in &other.terms {
            self.add(k.clone(), v * a);
        }
    }

    pub fn get(&self, key: &str) -> Rational {
        self.terms.get(key).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Rational)> {
        self.terms.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.terms.keys()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scaled(&self, a: &Rational) -> LinComb {
        let mut out = LinComb::new();
        out.add_scaled(self, a);
        out
    }

    /// Parses `c*term + c*term - ...`; a bare term has coefficient 1 and
    /// `0` is the empty combination. Keys are stored as written.
    pub fn parse(text: &str) -> Result<LinComb> {
        let text = text.trim();
        let mut out = LinComb::new();
        if text.is_empty() || text == "0" {
            return Ok(out);
        }
        let mut depth = 0i32;
        let mut sign = Rational::one();
        let mut start = 0usize;
        let mut pieces: Vec<(Rational, usize, usize)> = Vec::new();
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        for &(i, ch) in &chars {
            match ch {
                '(' | '{' | '[' => depth += 1,
                ')' | '}' | ']' => depth -= 1,
                '+' | '-' | '\u{2212}' if depth == 0 => {
                    let chunk = text[start..i].trim();
                    if !chunk.is_empty() {
                        pieces.push((sign.clone(), start, i));
                        sign = Rational::one();
                    }
                    if ch != '+' {
                        sign = -sign;
                    }
                    start = i + ch.len_utf8();
                }
                _ => {}
            }
            if depth < 0 {
                return Err(Error::Parse { pos: i, msg: "unbalanced bracket".into() });
            }
        }
        pieces.push((sign, start, text.len()));
        for (sign, a, b) in pieces {
            let chunk = text[a..b].trim();
            if chunk.is_empty() {
                return Err(Error::Parse { pos: a, msg: "missing term".into() });
            }
            let (coeff, term) = match chunk.split_once('*') {
                Some((c, t)) => {
                    let q = parse_rational(c).ok_or(Error::Parse { pos: a, msg: format!("bad coefficient `{c}`") })?;
                    (q, t.trim())
                }
                None => (Rational::one(), chunk),
            };
            out.add(term.to_string(), sign * coeff);
        }
        Ok(out)
    }
}

impl fmt::Display for LinComb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (k, v)) in self.terms.iter().enumerate() {
            match (i, v.is_negative()) {
                (0, _) => write!(f, "{}*{k}", format_rational(v))?,
                (_, false) => write!(f, " + {}*{k}", format_rational(v))?,
                (_, true) => write!(f, " - {}*{k}", format_rational(&-v))?,
            }
        }
        Ok(())
    }
}

impl FromIterator<(String, Rational)> for LinComb {
    fn from_iter<I: IntoIterator<Item = (String, Rational)>>(iter: I) -> Self {
        let mut out = LinComb::new();
        for (k, v) in iter {
            out.add(k, v);
        }
        out
    }
}
