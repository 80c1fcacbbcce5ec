//! Clause guards shared by map rules and weight rules.

use std::collections::BTreeSet;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::primes::{self, PrimePosition};

/// Which prime class a `prime_pos` guard looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ClassSelector {
    Any,
    Class(u32),
}

impl ClassSelector {
    pub fn admits(self, class: u32) -> bool {
        match self {
            ClassSelector::Any => true,
            ClassSelector::Class(c) => c == class,
        }
    }
}

impl Serialize for ClassSelector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClassSelector::Any => s.serialize_str("any"),
            ClassSelector::Class(c) => s.serialize_u32(*c),
        }
    }
}

impl<'de> Deserialize<'de> for ClassSelector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(i) => Ok(ClassSelector::Class(i)),
            Raw::Word(w) if w == "any" => Ok(ClassSelector::Any),
            Raw::Word(w) => Err(de::Error::custom(format!(
                "expected \"any\" or a class index, got {w:?}"
            ))),
        }
    }
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidueGuard {
    #[serde(rename = "mod")]
    pub modulus: u64,
    pub rem: u64,
    #[serde(default = "one")]
    pub min: u64,
}

/// `n = P_i(j)` with `j ≡ pos_rem (mod pos_mod)` and `j >= pos_min`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimePosGuard {
    pub i: ClassSelector,
    pub pos_mod: u64,
    pub pos_rem: u64,
    #[serde(default = "one")]
    pub pos_min: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Guard {
    Set(BTreeSet<u64>),
    Residue(ResidueGuard),
    PrimePos(PrimePosGuard),
}

/// A point of ℕ with its prime-class position computed on demand.
pub struct Point {
    pub n: u64,
    loc: Option<PrimePosition>,
}

impl Point {
    pub fn new(n: u64) -> Self {
        Point { n, loc: None }
    }

    pub fn location(&mut self) -> Result<PrimePosition> {
        if let Some(loc) = self.loc {
            return Ok(loc);
        }
        let loc = primes::global().locate(self.n)?;
        self.loc = Some(loc);
        Ok(loc)
    }
}

impl Guard {
    pub fn residue(modulus: u64, rem: u64, min: u64) -> Self {
        Guard::Residue(ResidueGuard { modulus, rem, min })
    }

    pub fn prime_pos(i: ClassSelector, pos_mod: u64, pos_rem: u64, pos_min: u64) -> Self {
        Guard::PrimePos(PrimePosGuard {
            i,
            pos_mod,
            pos_rem,
            pos_min,
        })
    }

    pub fn set(members: impl IntoIterator<Item = u64>) -> Self {
        Guard::Set(members.into_iter().collect())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Guard::Set(s) if s.contains(&0) => {
                Err(Error::MalformedRule("set guard contains 0".into()))
            }
            Guard::Residue(g) if g.modulus == 0 => {
                Err(Error::MalformedRule("residue guard with modulus 0".into()))
            }
            Guard::PrimePos(g) if g.pos_mod == 0 => {
                Err(Error::MalformedRule("prime_pos guard with pos_mod 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn matches(&self, point: &mut Point) -> Result<bool> {
        Ok(match self {
            Guard::Set(s) => s.contains(&point.n),
            Guard::Residue(g) => point.n >= g.min && point.n % g.modulus == g.rem % g.modulus,
            Guard::PrimePos(g) => {
                let loc = point.location()?;
                g.i.admits(loc.class)
                    && loc.pos >= g.pos_min
                    && loc.pos % g.pos_mod == g.pos_rem % g.pos_mod
            }
        })
    }

    pub fn uses_primes(&self) -> bool {
        matches!(self, Guard::PrimePos(_))
    }
}
