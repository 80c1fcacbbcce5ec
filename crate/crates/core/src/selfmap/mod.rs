//! Self-maps of ℕ described by guarded clause lists.
//!
//! Indices are 1-based. Index 0 is only ever produced as the sentinel for
//! "no preimage": `phi^{-n}(k) = 0` when `k` has no `n`-fold preimage.

mod chart;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guard::{Guard, Point};
use crate::primes;
use crate::verdict::{Evidence, Verdict, VerdictKind};

pub use chart::{BackStep, Chart, ChartKind, Drift, ForwardStep};

/// Right-hand side of a map clause.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MapExpr {
    /// `a·n + b`
    Affine { a: i64, b: i64 },
    /// a fixed value
    Value(u64),
    /// `P_i(j) ↦ P_i(j + delta)`
    PrimeShift { delta: i64 },
}

impl MapExpr {
    fn eval(&self, point: &mut Point) -> Result<u64> {
        let n = point.n;
        match *self {
            MapExpr::Affine { a, b } => {
                let v = a as i128 * n as i128 + b as i128;
                if v < 1 {
                    return Err(Error::MalformedRule(format!(
                        "affine clause {a}·n + {b} sends {n} to {v}"
                    )));
                }
                u64::try_from(v).map_err(|_| Error::ValueOverflow(format!("{a}·{n} + {b}")))
            }
            MapExpr::Value(v) => {
                if v == 0 {
                    return Err(Error::MalformedRule("value clause yields 0".into()));
                }
                Ok(v)
            }
            MapExpr::PrimeShift { delta } => {
                let loc = point.location()?;
                let pos = loc.pos as i128 + delta as i128;
                if pos < 1 {
                    return Err(Error::MalformedRule(format!(
                        "prime shift by {delta} moves {n} = P_{}({}) below position 1",
                        loc.class, loc.pos
                    )));
                }
                primes::global().element(loc.class, pos as u64)
            }
        }
    }

    /// Whether every value has finitely many, computable preimages under
    /// this expression.
    fn invertible(&self) -> bool {
        match self {
            MapExpr::Affine { a, .. } => *a != 0,
            MapExpr::Value(_) => false,
            MapExpr::PrimeShift { .. } => true,
        }
    }

    /// Candidates `l` with `expr(l) = k`, ignoring guards.
    fn invert(&self, k: u64) -> Result<Vec<u64>> {
        match *self {
            MapExpr::Affine { a, b } => {
                let num = k as i128 - b as i128;
                let a = a as i128;
                if a == 0 || num % a != 0 {
                    return Ok(vec![]);
                }
                let l = num / a;
                Ok(if l >= 1 && l <= u64::MAX as i128 {
                    vec![l as u64]
                } else {
                    vec![]
                })
            }
            MapExpr::Value(_) => Ok(vec![]),
            MapExpr::PrimeShift { delta } => {
                let loc = primes::global().locate(k)?;
                let pos = loc.pos as i128 - delta as i128;
                if pos < 1 {
                    return Ok(vec![]);
                }
                Ok(vec![primes::global().element(loc.class, pos as u64)?])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapClause {
    pub guard: Guard,
    pub expr: MapExpr,
}

/// `phi(n)`: the first clause whose guard matches `n`, else `default`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfMapRule {
    #[serde(default)]
    pub clauses: Vec<MapClause>,
    pub default: MapExpr,
}

/// Result of a single preimage query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preimage {
    /// The preimage, or 0 when none was found.
    pub value: u64,
    /// False when the answer came from a bounded scan that could have
    /// missed preimages beyond the horizon.
    pub exhaustive: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationResult {
    pub value: u64,
    pub steps_taken: u64,
    pub hit_sentinel: bool,
}

impl SelfMapRule {
    pub fn new(clauses: Vec<MapClause>, default: MapExpr) -> Result<Self> {
        let rule = SelfMapRule { clauses, default };
        rule.validate()?;
        Ok(rule)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rule: SelfMapRule =
            serde_json::from_str(text).map_err(|e| Error::MalformedRule(e.to_string()))?;
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.clauses {
            c.guard.validate()?;
        }
        Ok(())
    }

    pub fn clause(guard: Guard, expr: MapExpr) -> MapClause {
        MapClause { guard, expr }
    }

    pub fn uses_primes(&self) -> bool {
        self.clauses
            .iter()
            .any(|c| c.guard.uses_primes() || matches!(c.expr, MapExpr::PrimeShift { .. }))
            || matches!(self.default, MapExpr::PrimeShift { .. })
    }

    /// `phi(n)`.
    pub fn apply(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::InvalidArgument("apply: n must be >= 1".into()));
        }
        let mut point = Point::new(n);
        for clause in &self.clauses {
            if clause.guard.matches(&mut point)? {
                return clause.expr.eval(&mut point);
            }
        }
        self.default.eval(&mut point)
    }

    /// `phi^j(n)`.
    pub fn iterate(&self, n: u64, j: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::InvalidArgument("iterate: n must be >= 1".into()));
        }
        let mut x = n;
        for _ in 0..j {
            x = self.apply(x)?;
        }
        Ok(x)
    }

    /// True when preimages can be found by inverting clause expressions.
    pub fn symbolically_invertible(&self) -> bool {
        self.clauses
            .iter()
            .all(|c| matches!(c.guard, Guard::Set(_)) || c.expr.invertible())
            && self.default.invertible()
    }

    /// Every `l` with `phi(l) = k`, found by clause inversion.
    fn symbolic_preimages(&self, k: u64) -> Result<BTreeSet<u64>> {
        let mut out = BTreeSet::new();
        let consider = |l: u64, out: &mut BTreeSet<u64>| {
            if let Ok(v) = self.apply(l) {
                if v == k {
                    out.insert(l);
                }
            }
        };
        for clause in &self.clauses {
            match &clause.guard {
                Guard::Set(members) => {
                    for &m in members {
                        consider(m, &mut out);
                    }
                }
                _ => {
                    for l in clause.expr.invert(k)? {
                        consider(l, &mut out);
                    }
                }
            }
        }
        for l in self.default.invert(k)? {
            consider(l, &mut out);
        }
        Ok(out)
    }

    /// The unique `l` with `phi(l) = k`, or 0.
    ///
    /// Symbolic inversion is used when every clause allows it; otherwise
    /// `1..=horizon` is scanned and the answer is flagged non-exhaustive.
    pub fn preimage(&self, k: u64, horizon: u64) -> Result<Preimage> {
        if k == 0 {
            return Err(Error::InvalidArgument("preimage: k must be >= 1".into()));
        }
        if self.symbolically_invertible() {
            let found = self.symbolic_preimages(k)?;
            let mut it = found.iter();
            return match (it.next(), it.next()) {
                (None, _) => Ok(Preimage {
                    value: 0,
                    exhaustive: true,
                }),
                (Some(&l), None) => Ok(Preimage {
                    value: l,
                    exhaustive: true,
                }),
                (Some(&a), Some(&b)) => Err(Error::NotInjectiveWitness {
                    first: a,
                    second: b,
                    image: k,
                }),
            };
        }
        let mut found: Option<u64> = None;
        for l in 1..=horizon.max(k) {
            if self.apply(l)? == k {
                if let Some(first) = found {
                    return Err(Error::NotInjectiveWitness {
                        first,
                        second: l,
                        image: k,
                    });
                }
                found = Some(l);
            }
        }
        Ok(Preimage {
            value: found.unwrap_or(0),
            exhaustive: false,
        })
    }

    /// `phi^{-j}(k)` with sentinel absorption.
    ///
    /// A missing preimage that could lie beyond the scan horizon is an error,
    /// so `value == 0` always means the sentinel was reached for certain.
    pub fn backward_iterate(&self, k: u64, j: u64, horizon: u64) -> Result<IterationResult> {
        if k == 0 || j == 0 {
            return Err(Error::InvalidArgument(
                "backward_iterate: k and j must be >= 1".into(),
            ));
        }
        let mut x = k;
        for step in 1..=j {
            let pre = self.preimage(x, horizon.max(x))?;
            if pre.value == 0 {
                if !pre.exhaustive {
                    return Err(Error::PreimageHorizonExceeded { target: x, horizon });
                }
                return Ok(IterationResult {
                    value: 0,
                    steps_taken: step,
                    hit_sentinel: true,
                });
            }
            x = pre.value;
        }
        Ok(IterationResult {
            value: x,
            steps_taken: j,
            hit_sentinel: false,
        })
    }

    /// Scans `phi(1..=horizon)` for a collision; falls back on a residue-class
    /// argument for an exact answer when the rule is translation-like.
    pub fn check_injective(&self, horizon: u64) -> Result<Verdict> {
        let horizon = horizon.max(2);
        let mut seen: HashMap<u64, u64> = HashMap::new();
        for n in 1..=horizon {
            let image = self.apply(n)?;
            if let Some(&first) = seen.get(&image) {
                return Ok(Verdict::new(
                    VerdictKind::Refuted,
                    Evidence::Collision {
                        first,
                        second: n,
                        image,
                    },
                    horizon,
                ));
            }
            seen.insert(image, n);
        }
        match chart::symbolic_injectivity(self)? {
            Some(Ok(evidence)) => Ok(Verdict::new(VerdictKind::ExactTailBound, evidence, horizon)),
            Some(Err((first, second, image))) => Ok(Verdict::new(
                VerdictKind::Refuted,
                Evidence::Collision {
                    first,
                    second,
                    image,
                },
                horizon,
            )),
            None => Ok(Verdict::new(
                VerdictKind::SatisfiedAtHorizon,
                Evidence::Scan { upto: horizon },
                horizon,
            )),
        }
    }

    /// Smallest `(k, n)` in lexicographic order with `phi^n(k) = k`.
    /// Orbits that leave the representable range are abandoned.
    pub fn find_periodic_point(&self, max_period: u64, max_start: u64) -> Result<Option<(u64, u64)>> {
        for k in 1..=max_start {
            let mut x = k;
            for n in 1..=max_period {
                x = match self.apply(x) {
                    Ok(v) => v,
                    Err(e) if e.is_soft() => break,
                    Err(e) => return Err(e),
                };
                if x == k {
                    return Ok(Some((k, n)));
                }
            }
        }
        Ok(None)
    }

    /// Periodic-point check graded as a verdict: `Refuted` with the point
    /// when one is found, `ExactTailBound` when a residue-class argument
    /// excludes periodic points everywhere, `SatisfiedAtHorizon` otherwise.
    pub fn periodic_verdict(&self, max_period: u64, max_start: u64) -> Result<Verdict> {
        let horizon = max_start.max(max_period);
        if let Some((start, period)) = self.find_periodic_point(max_period, max_start)? {
            return Ok(Verdict::new(
                VerdictKind::Refuted,
                Evidence::PeriodicPoint { start, period },
                horizon,
            ));
        }
        if let Some(evidence) = chart::symbolic_aperiodicity(self)? {
            return Ok(Verdict::new(VerdictKind::ExactTailBound, evidence, horizon));
        }
        Ok(Verdict::new(
            VerdictKind::SatisfiedAtHorizon,
            Evidence::Scan { upto: max_start },
            horizon,
        ))
    }
}
