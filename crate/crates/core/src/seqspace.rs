//! Finitely supported sequences, their norms, and the action of `wC_φ` and
//! its right inverse `S` on them.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{ExactNumber, Scalar};
use crate::selfmap::SelfMapRule;
use crate::weights::{forward_product, forward_product_exact, WeightRule};

/// Default bound for preimage scans when inverting `phi^n`.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceSpec {
    Lp(f64),
    C0,
}

impl SpaceSpec {
    pub fn lp(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(SpaceSpec::Lp(p))
        } else {
            Err(Error::InvalidArgument(format!("p must be finite and >= 1, got {p}")))
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpaceSpec::Lp(p) => SpaceSpec::lp(p).map(|_| ()),
            SpaceSpec::C0 => Ok(()),
        }
    }

    /// Norm of a vector given the logs of its entries' magnitudes.
    pub fn norm_from_logs(&self, logs: impl Iterator<Item = f64>) -> f64 {
        let logs: Vec<f64> = logs.filter(|l| *l > f64::NEG_INFINITY).collect();
        let Some(top) = logs.iter().copied().reduce(f64::max) else { return 0.0 };
        match *self {
            SpaceSpec::C0 => top.exp(),
            SpaceSpec::Lp(p) => {
                let s: f64 = logs.iter().map(|l| (p * (l - top)).exp()).sum();
                (top + s.ln() / p).exp()
            }
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Lp(p) => write!(f, "l^{p}"),
            SpaceSpec::C0 => write!(f, "c0"),
        }
    }
}

impl Serialize for SpaceSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpaceSpec::Lp(p) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("lp", p)?;
                m.end()
            }
            SpaceSpec::C0 => s.serialize_str("c0"),
        }
    }
}

impl<'de> Deserialize<'de> for SpaceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Lp { lp: f64 },
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "c0" => Ok(SpaceSpec::C0),
            Raw::Word(w) => Err(de::Error::custom(format!("unknown space {w:?}"))),
            Raw::Lp { lp } => SpaceSpec::lp(lp).map_err(de::Error::custom),
        }
    }
}

/// A finitely supported sequence on ℕ; zero entries are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct FinSeq<S: Scalar> {
    entries: BTreeMap<u64, S>,
}

impl<S: Scalar> Default for FinSeq<S> {
    fn default() -> Self {
        FinSeq {
            entries: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> FinSeq<S> {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `e_k`.
    pub fn unit(k: u64) -> Result<Self> {
        let mut x = Self::zero();
        x.set(k, S::one())?;
        Ok(x)
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (u64, S)>) -> Result<Self> {
        let mut x = Self::zero();
        for (k, v) in entries {
            x.add_at(k, v)?;
        }
        Ok(x)
    }

    pub fn get(&self, k: u64) -> S {
        self.entries.get(&k).cloned().unwrap_or_else(S::zero)
    }

    pub fn set(&mut self, k: u64, v: S) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidArgument("sequences are indexed from 1".into()));
        }
        if v.is_zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, v);
        }
        Ok(())
    }

    pub fn add_at(&mut self, k: u64, v: S) -> Result<()> {
        let sum = self.get(k) + v;
        self.set(k, sum)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &S)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn support(&self) -> Vec<u64> {
        self.entries.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> Option<u64> {
        self.entries.keys().next_back().copied()
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = Self::zero();
        for (k, v) in &self.entries {
            let _ = out.set(*k, v.clone() * c.clone());
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            let _ = out.add_at(*k, v.clone());
        }
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(&(-S::one())))
    }

    /// The entries at indices satisfying `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(u64) -> bool) -> Self {
        FinSeq {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(**k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
        }
    }

    pub fn norm(&self, space: SpaceSpec) -> f64 {
        space.norm_from_logs(self.entries.values().map(Scalar::ln_abs))
    }

    pub fn to_f64(&self) -> FinSeq<f64> {
        FinSeq {
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (*k, v.to_f64()))
                .filter(|(_, v)| *v != 0.0)
                .collect(),
        }
    }
}

pub fn norm<S: Scalar>(x: &FinSeq<S>, space: SpaceSpec) -> f64 {
    x.norm(space)
}

/// Scalars that can be written to and read from report JSON.
pub trait JsonScalar: Scalar {
    fn to_json(&self) -> serde_json::Value;
    fn from_json(v: &serde_json::Value) -> std::result::Result<Self, String>;
}

impl JsonScalar for f64 {
    fn to_json(&self) -> serde_json::Value {
        serde_json::Number::from_f64(*self).map_or(serde_json::Value::Null, serde_json::Value::Number)
    }
    fn from_json(v: &serde_json::Value) -> std::result::Result<Self, String> {
        match v {
            serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| "bad number".to_string()),
            serde_json::Value::String(s) => s
                .parse::<ExactNumber>()
                .map(|e| e.to_f64()),
            other => Err(format!("expected a number, got {other}")),
        }
    }
}

impl JsonScalar for BigRational {
    fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ExactNumber(self.clone())).unwrap_or(serde_json::Value::Null)
    }
    fn from_json(v: &serde_json::Value) -> std::result::Result<Self, String> {
        serde_json::from_value::<ExactNumber>(v.clone())
            .map(|e| e.0)
            .map_err(|e| e.to_string())
    }
}

impl<S: JsonScalar> Serialize for FinSeq<S> {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        let entries: serde_json::Map<String, serde_json::Value> = self
            .entries
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_json()))
            .collect();
        let mut m = s.serialize_map(Some(1))?;
        m.serialize_entry("entries", &entries)?;
        m.end()
    }
}

impl<'de, S: JsonScalar> Deserialize<'de> for FinSeq<S> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            entries: BTreeMap<String, serde_json::Value>,
        }
        let raw = Raw::deserialize(d)?;
        let mut out = FinSeq::zero();
        for (k, v) in raw.entries {
            let k: u64 = k
                .parse()
                .map_err(|_| de::Error::custom(format!("bad index {k:?}")))?;
            let v = S::from_json(&v).map_err(de::Error::custom)?;
            out.add_at(k, v).map_err(de::Error::custom)?;
        }
        Ok(out)
    }
}

/// `W_n(k)` in the scalar field `S`.
pub fn product_in<S: Scalar>(map: &SelfMapRule, rule: &WeightRule, k: u64, n: u64) -> Result<S> {
    if S::EXACT {
        Ok(S::from_ratio(&forward_product_exact(map, rule, k, n)?))
    } else {
        Ok(S::from_f64(forward_product(map, rule, k, n)?.value()))
    }
}

/// `(wC_φ)^n x`: `y_k = W_n(k) · x_{phi^n(k)}`.
pub fn apply_operator<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    x: &FinSeq<S>,
    n: u64,
    horizon: u64,
) -> Result<FinSeq<S>> {
    if n == 0 {
        return Ok(x.clone());
    }
    let mut y = FinSeq::zero();
    for (s, v) in x.iter() {
        let pre = map.backward_iterate(s, n, horizon)?;
        if pre.hit_sentinel {
            continue;
        }
        let w: S = product_in(map, rule, pre.value, n)?;
        y.add_at(pre.value, w * v.clone())?;
    }
    Ok(y)
}

/// `S^n x` with `S(e_k) = e_{phi(k)} / w_k`.
pub fn s_map<S: Scalar>(map: &SelfMapRule, rule: &WeightRule, x: &FinSeq<S>, n: u64) -> Result<FinSeq<S>> {
    if n == 0 {
        return Ok(x.clone());
    }
    let mut y = FinSeq::zero();
    for (k, v) in x.iter() {
        let target = map.iterate(k, n)?;
        let w: S = product_in(map, rule, k, n)?;
        y.add_at(target, v.clone() / w)?;
    }
    Ok(y)
}

/// A weighted pseudo-shift with a fixed preimage scan horizon.
#[derive(Clone, Debug)]
pub struct Operator {
    pub map: SelfMapRule,
    pub weights: WeightRule,
    pub horizon: u64,
}

impl Operator {
    pub fn new(map: SelfMapRule, weights: WeightRule) -> Self {
        Operator {
            map,
            weights,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn apply<S: Scalar>(&self, x: &FinSeq<S>, n: u64) -> Result<FinSeq<S>> {
        apply_operator(&self.map, &self.weights, x, n, self.horizon)
    }

    pub fn s_map<S: Scalar>(&self, x: &FinSeq<S>, n: u64) -> Result<FinSeq<S>> {
        s_map(&self.map, &self.weights, x, n)
    }
}
