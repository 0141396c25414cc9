//! Ordinals below ω^ω in Cantor normal form.
//!
//! An ordinal is stored as its list of CNF terms `ω^e · c`, exponents strictly
//! decreasing and coefficients positive. Zero is the empty list. Since the
//! representation is canonical, structural equality is ordinal equality.
//!
//! Text syntax: terms `w^E.C` joined by `+`. `w` abbreviates `w^1.1`, `w.C`
//! abbreviates `w^1.C`, `w^E` abbreviates `w^E.1`, and a bare natural `n`
//! abbreviates `w^0.n`. Example: `w^2+w.3+4`.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdinalError {
    #[error("zero has no predecessor decomposition")]
    ZeroHasNoPred,
    #[error("invalid ordinal literal `{0}`: {1}")]
    Parse(String, &'static str),
}

/// Zero, successor or limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Zero,
    Successor,
    Limit,
}

/// One CNF term `ω^exp · coeff`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub exp: u32,
    pub coeff: u64,
}

#[derive(Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Ordinal {
    terms: Vec<Term>,
}

impl Ordinal {
    pub const fn zero() -> Self {
        Ordinal { terms: Vec::new() }
    }

    pub fn nat(n: u64) -> Self {
        Self::monomial(0, n)
    }

    pub fn omega() -> Self {
        Self::monomial(1, 1)
    }

    /// `ω^exp · coeff`; zero when `coeff == 0`.
    pub fn monomial(exp: u32, coeff: u64) -> Self {
        if coeff == 0 {
            Self::zero()
        } else {
            Ordinal { terms: vec![Term { exp, coeff }] }
        }
    }

    /// `ω · k`.
    pub fn omega_times(k: u64) -> Self {
        Self::monomial(1, k)
    }

    /// Builds an ordinal from arbitrary terms, normalising to CNF by summing
    /// them left to right.
    pub fn from_terms<I: IntoIterator<Item = (u32, u64)>>(terms: I) -> Self {
        terms.into_iter().fold(Self::zero(), |acc, (e, c)| acc.add(&Self::monomial(e, c)))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.exp == 0)
    }

    /// The natural number this ordinal denotes, if it is finite.
    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [Term { exp: 0, coeff }] => Some(*coeff),
            _ => None,
        }
    }

    pub fn kind(&self) -> Kind {
        match self.terms.last() {
            None => Kind::Zero,
            Some(t) if t.exp == 0 => Kind::Successor,
            Some(_) => Kind::Limit,
        }
    }

    pub fn is_limit(&self) -> bool {
        self.kind() == Kind::Limit
    }

    /// Ordinal sum `self + rhs`. Terms of `self` below the leading exponent
    /// of `rhs` are absorbed.
    pub fn add(&self, rhs: &Ordinal) -> Ordinal {
        let Some(lead) = rhs.terms.first() else {
            return self.clone();
        };
        let mut terms: Vec<Term> = self.terms.iter().copied().take_while(|t| t.exp >= lead.exp).collect();
        let mut rest = rhs.terms.iter().copied();
        match terms.last_mut() {
            Some(last) if last.exp == lead.exp => {
                last.coeff += lead.coeff;
                rest.next();
            }
            _ => {}
        }
        terms.extend(rest);
        Ordinal { terms }
    }

    pub fn succ(&self) -> Ordinal {
        self.add(&Ordinal::nat(1))
    }

    /// The exponent `η` of the last monomial `ω^η`.
    pub fn last_exponent(&self) -> Option<u32> {
        self.terms.last().map(|t| t.exp)
    }

    /// Least `β < self` with `self = β + ω^η`: one copy of the last monomial
    /// is removed, so `pred(ω·4) = ω·3` and `pred(ω²) = 0`.
    pub fn pred(&self) -> Result<Ordinal, OrdinalError> {
        let mut terms = self.terms.clone();
        let last = terms.last_mut().ok_or(OrdinalError::ZeroHasNoPred)?;
        if last.coeff == 1 {
            terms.pop();
        } else {
            last.coeff -= 1;
        }
        Ok(Ordinal { terms })
    }

    /// `β` such that `self = β + 1`, if `self` is a successor.
    pub fn predecessor(&self) -> Option<Ordinal> {
        match self.kind() {
            Kind::Successor => self.pred().ok(),
            _ => None,
        }
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        // CNF order is lexicographic on terms, with (exp, coeff) compared
        // lexicographically and a proper prefix being smaller.
        for (a, b) in self.terms.iter().zip(&other.terms) {
            match a.exp.cmp(&b.exp).then(a.coeff.cmp(&b.coeff)) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("+")?;
            }
            match (t.exp, t.coeff) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => f.write_str("w")?,
                (1, c) => write!(f, "w.{c}")?,
                (e, 1) => write!(f, "w^{e}")?,
                (e, c) => write!(f, "w^{e}.{c}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_term(s: &str) -> Result<(u32, u64), &'static str> {
    let s = s.trim();
    if s.is_empty() {
        return Err("empty term");
    }
    let Some(rest) = s.strip_prefix('w') else {
        let n = s.parse::<u64>().map_err(|_| "expected natural or `w` term")?;
        return Ok((0, n));
    };
    let (exp, rest) = match rest.strip_prefix('^') {
        Some(r) => {
            let end = r.find('.').unwrap_or(r.len());
            let e = r[..end].parse::<u32>().map_err(|_| "bad exponent")?;
            (e, &r[end..])
        }
        None => (1, rest),
    };
    let coeff = match rest.strip_prefix('.') {
        Some(c) => c.parse::<u64>().map_err(|_| "bad coefficient")?,
        None if rest.is_empty() => 1,
        None => return Err("trailing characters in term"),
    };
    if coeff == 0 {
        return Err("coefficient must be positive");
    }
    Ok((exp, coeff))
}

impl FromStr for Ordinal {
    type Err = OrdinalError;

    /// Parses a sum of terms. The sum is evaluated as ordinal addition, so
    /// non-canonical input such as `1+w` is accepted and normalised to `w`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut acc = Ordinal::zero();
        for part in s.split('+') {
            let (e, c) = parse_term(part).map_err(|m| OrdinalError::Parse(s.to_string(), m))?;
            acc = acc.add(&Ordinal::monomial(e, c));
        }
        Ok(acc)
    }
}

impl From<Ordinal> for String {
    fn from(o: Ordinal) -> String {
        o.to_string()
    }
}

impl TryFrom<String> for Ordinal {
    type Error = OrdinalError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
