//! Weight sequences and weight products along orbits.

mod series;
mod trend;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guard::{Guard, Point};
use crate::scalar::{ratio_ln_abs, ratio_pow, ExactNumber, Scalar};
use crate::selfmap::SelfMapRule;

pub use series::{
    backward_p_series, forward_growth, forward_inverse_series, forward_product_limits,
    LimitReport, SeriesReport, TailKind, HYPERCYCLIC_THRESHOLDS, PLATEAU_RUN, PLATEAU_TOL,
};
pub use trend::{Trend, TrendDirection};

/// Exact weights are refused once `|exponent · log2 base|` passes this many bits.
const MAX_EXACT_BITS: f64 = (1u64 << 22) as f64;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometric {
    pub base: ExactNumber,
    pub exp_sign: i8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightExpr {
    Const(ExactNumber),
    /// `base^(exp_sign · n)`
    Geometric(Geometric),
    Table(BTreeMap<u64, ExactNumber>),
}

impl WeightExpr {
    pub fn constant(c: i64) -> Self {
        WeightExpr::Const(ExactNumber::from_integer(c))
    }

    pub fn geometric(base: i64, exp_sign: i8) -> Self {
        WeightExpr::Geometric(Geometric {
            base: ExactNumber::from_integer(base),
            exp_sign,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            WeightExpr::Const(c) if c.is_zero() => {
                Err(Error::MalformedRule("constant weight 0".into()))
            }
            WeightExpr::Geometric(g) if g.base.is_zero() => {
                Err(Error::MalformedRule("geometric weight with base 0".into()))
            }
            WeightExpr::Geometric(g) if g.exp_sign != 1 && g.exp_sign != -1 => Err(
                Error::MalformedRule(format!("exp_sign must be ±1, got {}", g.exp_sign)),
            ),
            WeightExpr::Table(t) => match t.iter().find(|(n, v)| **n == 0 || v.is_zero()) {
                Some((n, _)) => Err(Error::MalformedRule(format!(
                    "weight table entry at {n} is invalid"
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    fn table_entry(t: &BTreeMap<u64, ExactNumber>, n: u64) -> Result<&ExactNumber> {
        t.get(&n)
            .ok_or_else(|| Error::MalformedRule(format!("weight table has no entry for {n}")))
    }

    fn log_abs(&self, n: u64) -> Result<(f64, i8)> {
        Ok(match self {
            WeightExpr::Const(c) => (ratio_ln_abs(c.ratio()), sign_of(c.ratio())),
            WeightExpr::Geometric(g) => {
                let ln = g.exp_sign as f64 * n as f64 * ratio_ln_abs(g.base.ratio());
                let sign = if g.base.ratio().is_negative() && n % 2 == 1 {
                    -1
                } else {
                    1
                };
                (ln, sign)
            }
            WeightExpr::Table(t) => {
                let v = Self::table_entry(t, n)?;
                (ratio_ln_abs(v.ratio()), sign_of(v.ratio()))
            }
        })
    }

    fn exact(&self, n: u64) -> Result<BigRational> {
        match self {
            WeightExpr::Const(c) => Ok(c.ratio().clone()),
            WeightExpr::Geometric(g) => {
                let bits = n as f64 * ratio_ln_abs(g.base.ratio()).abs() / std::f64::consts::LN_2;
                if bits > MAX_EXACT_BITS || n > i64::MAX as u64 {
                    return Err(Error::ValueOverflow(format!(
                        "exact weight {}^{}",
                        g.base, n
                    )));
                }
                Ok(ratio_pow(g.base.ratio(), g.exp_sign as i64 * n as i64))
            }
            WeightExpr::Table(t) => Ok(Self::table_entry(t, n)?.ratio().clone()),
        }
    }

    /// `(|c|, |b|, s)` with `|w(n)| = |c| · |b|^(s·n)` on every `n` the
    /// expression covers, or `None` for tables.
    fn log_model(&self) -> Option<LogModel> {
        match self {
            WeightExpr::Const(c) => Some(LogModel {
                constant: c.ratio().abs(),
                base: BigRational::one(),
                power_sign: 0,
            }),
            WeightExpr::Geometric(g) => Some(LogModel {
                constant: BigRational::one(),
                base: g.base.ratio().abs(),
                power_sign: g.exp_sign,
            }),
            WeightExpr::Table(_) => None,
        }
    }
}

fn sign_of(r: &BigRational) -> i8 {
    if r.is_negative() {
        -1
    } else {
        1
    }
}

/// `|w(n)| = constant · base^(power_sign · n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogModel {
    pub constant: BigRational,
    pub base: BigRational,
    pub power_sign: i8,
}

impl LogModel {
    pub fn alpha(&self) -> f64 {
        ratio_ln_abs(&self.constant)
    }

    pub fn beta(&self) -> f64 {
        self.power_sign as f64 * ratio_ln_abs(&self.base)
    }

    pub fn ln_at(&self, n: u64) -> f64 {
        self.alpha() + self.beta() * n as f64
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightClause {
    pub guard: Guard,
    pub expr: WeightExpr,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRule {
    #[serde(default)]
    pub clauses: Vec<WeightClause>,
    pub default: WeightExpr,
}

impl WeightRule {
    pub fn new(clauses: Vec<WeightClause>, default: WeightExpr) -> Result<Self> {
        let rule = WeightRule { clauses, default };
        rule.validate()?;
        Ok(rule)
    }

    pub fn constant(c: i64) -> Result<Self> {
        WeightRule::new(vec![], WeightExpr::constant(c))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rule: WeightRule =
            serde_json::from_str(text).map_err(|e| Error::MalformedRule(e.to_string()))?;
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.clauses {
            c.guard.validate()?;
            c.expr.validate()?;
        }
        self.default.validate()
    }

    pub fn clause(guard: Guard, expr: WeightExpr) -> WeightClause {
        WeightClause { guard, expr }
    }

    pub fn guards(&self) -> Vec<&Guard> {
        self.clauses.iter().map(|c| &c.guard).collect()
    }

    fn expr_for(&self, n: u64) -> Result<&WeightExpr> {
        let mut point = Point::new(n);
        for clause in &self.clauses {
            if clause.guard.matches(&mut point)? {
                return Ok(&clause.expr);
            }
        }
        Ok(&self.default)
    }

    /// `w_n` exactly; `w_0 = 0`.
    pub fn weight_exact(&self, n: u64) -> Result<BigRational> {
        if n == 0 {
            return Ok(BigRational::zero());
        }
        self.expr_for(n)?.exact(n)
    }

    /// `(ln |w_n|, sign w_n)`; `w_0` gives `(-inf, 0)`.
    pub fn log_weight(&self, n: u64) -> Result<(f64, i8)> {
        if n == 0 {
            return Ok((f64::NEG_INFINITY, 0));
        }
        self.expr_for(n)?.log_abs(n)
    }

    /// `w_n` in the requested scalar field.
    pub fn weight<S: Scalar>(&self, n: u64) -> Result<S> {
        if S::EXACT {
            return Ok(S::from_ratio(&self.weight_exact(n)?));
        }
        Ok(S::from_f64(self.weight_f64(n)?))
    }

    /// `w_n` as `f64`.
    pub fn weight_f64(&self, n: u64) -> Result<f64> {
        let (ln, sign) = self.log_weight(n)?;
        Ok(sign as f64 * ln.exp())
    }

    /// Model of `|w|` on coordinates `c >= T` of `chart` with `c ≡ residue`.
    pub fn tail_model(&self, chart: &crate::selfmap::Chart, residue: u64) -> Option<LogModel> {
        self.clauses
            .iter()
            .find(|c| chart.guard_holds(&c.guard, residue))
            .map_or(&self.default, |c| &c.expr)
            .log_model()
    }
}

/// A product of weights kept as `sign · exp(log_magnitude)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogProduct {
    pub log_magnitude: f64,
    pub sign: i8,
    pub is_zero: bool,
}

impl LogProduct {
    pub fn one() -> Self {
        LogProduct {
            log_magnitude: 0.0,
            sign: 1,
            is_zero: false,
        }
    }

    pub fn zero() -> Self {
        LogProduct {
            log_magnitude: f64::NEG_INFINITY,
            sign: 0,
            is_zero: true,
        }
    }

    pub fn times(self, (ln, sign): (f64, i8)) -> Self {
        if self.is_zero || sign == 0 {
            return LogProduct::zero();
        }
        LogProduct {
            log_magnitude: self.log_magnitude + ln,
            sign: self.sign * sign,
            is_zero: false,
        }
    }

    /// The product as `f64` (saturating).
    pub fn value(&self) -> f64 {
        if self.is_zero {
            0.0
        } else {
            self.sign as f64 * self.log_magnitude.exp()
        }
    }
}

/// `W_n(k) = w_k w_{phi(k)} ⋯ w_{phi^{n-1}(k)}`.
pub fn forward_product(map: &SelfMapRule, rule: &WeightRule, k: u64, n: u64) -> Result<LogProduct> {
    let mut acc = LogProduct::one();
    let mut x = k;
    for j in 0..n {
        acc = acc.times(rule.log_weight(x)?);
        if j + 1 < n {
            x = map.apply(x)?;
        }
    }
    Ok(acc)
}

pub fn forward_product_exact(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    n: u64,
) -> Result<BigRational> {
    let mut acc = BigRational::one();
    let mut x = k;
    for j in 0..n {
        acc *= rule.weight_exact(x)?;
        if j + 1 < n {
            x = map.apply(x)?;
        }
    }
    Ok(acc)
}

/// `B_n(k) = w_{phi^{-1}(k)} ⋯ w_{phi^{-n}(k)}`, zero once the sentinel is hit.
pub fn backward_product(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    n: u64,
    horizon: u64,
) -> Result<LogProduct> {
    let mut acc = LogProduct::one();
    let mut y = k;
    for _ in 0..n {
        y = step_back(map, y, horizon)?;
        if y == 0 {
            return Ok(LogProduct::zero());
        }
        acc = acc.times(rule.log_weight(y)?);
    }
    Ok(acc)
}

pub fn backward_product_exact(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    n: u64,
    horizon: u64,
) -> Result<BigRational> {
    let mut acc = BigRational::one();
    let mut y = k;
    for _ in 0..n {
        y = step_back(map, y, horizon)?;
        if y == 0 {
            return Ok(BigRational::zero());
        }
        acc *= rule.weight_exact(y)?;
    }
    Ok(acc)
}

/// One backward step; 0 only when the sentinel is certain.
pub(crate) fn step_back(map: &SelfMapRule, y: u64, horizon: u64) -> Result<u64> {
    Ok(map.backward_iterate(y, 1, horizon)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn weight_examples() {
        let c2 = WeightRule::constant(2).unwrap();
        assert_eq!(c2.weight_exact(17).unwrap(), q(2, 1));
        let lp = catalog::closing_lp_weights(2);
        assert_eq!(lp.weight_exact(5).unwrap(), q(1, 32));
        assert_eq!(lp.weight_exact(4).unwrap(), q(16, 1));
        assert_eq!(lp.weight_exact(1).unwrap(), q(2, 1));
        assert!(lp.weight_exact(0).unwrap().is_zero());
        assert_eq!(lp.log_weight(0).unwrap(), (f64::NEG_INFINITY, 0));
        assert_eq!(lp.weight_f64(5).unwrap(), 1.0 / 32.0);
    }

    #[test]
    fn zero_weights_are_rejected() {
        assert!(WeightRule::constant(0).is_err());
        assert!(WeightRule::new(vec![], WeightExpr::geometric(0, 1)).is_err());
        assert!(WeightRule::new(vec![], WeightExpr::geometric(2, 2)).is_err());
        assert!(WeightRule::from_json(r#"{"default":{"table":{"1":0}}}"#).is_err());
        let t = WeightRule::from_json(r#"{"default":{"table":{"1":"1/3","2":-2}}}"#).unwrap();
        assert_eq!(t.weight_exact(1).unwrap(), q(1, 3));
        assert_eq!(t.weight_exact(2).unwrap(), q(-2, 1));
        assert!(matches!(t.weight_exact(3), Err(Error::MalformedRule(_))));
    }

    #[test]
    fn product_examples() {
        let s = catalog::successor();
        let c2 = WeightRule::constant(2).unwrap();
        for k in [1, 7, 100] {
            assert_eq!(forward_product(&s, &c2, k, 0).unwrap(), LogProduct::one());
        }
        assert!((forward_product(&s, &c2, 1, 3).unwrap().value() - 8.0).abs() < 1e-12);

        let m = catalog::closing_lp_map();
        let w = catalog::closing_lp_weights(2);
        // oracle: walk the orbit explicitly and multiply exactly
        let orbit: Vec<u64> = (0..4).map(|j| m.iterate(1, j).unwrap()).collect();
        assert_eq!(orbit, vec![1, 2, 3, 4]);
        let oracle: BigRational = orbit.iter().map(|&i| w.weight_exact(i).unwrap()).product();
        assert_eq!(oracle, q(1024, 1));
        assert_eq!(forward_product_exact(&m, &w, 1, 4).unwrap(), oracle);
        let lp = forward_product(&m, &w, 1, 4).unwrap();
        assert!((lp.log_magnitude - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn backward_product_examples() {
        let s = catalog::successor();
        let c2 = WeightRule::constant(2).unwrap();
        assert!(backward_product(&s, &c2, 1, 1, 10).unwrap().is_zero);
        assert_eq!(backward_product_exact(&s, &c2, 5, 3, 10).unwrap(), q(8, 1));
        assert!(backward_product(&s, &c2, 5, 5, 10).unwrap().is_zero);
        assert!(!backward_product(&s, &c2, 5, 4, 10).unwrap().is_zero);

        let m = catalog::single_orbit_map();
        let b = backward_product(&m, &c2, 1, 3, 1000).unwrap();
        assert!(!b.is_zero);
        assert!((b.value() - 8.0).abs() < 1e-12);
        let exact = backward_product_exact(&m, &catalog::closing_lp_weights(2), 1, 3, 1000).unwrap();
        // 1 <- 6 <- 11 <- 16
        let oracle = [6u64, 11, 16]
            .iter()
            .map(|&i| catalog::closing_lp_weights(2).weight_exact(i).unwrap())
            .product::<BigRational>();
        assert_eq!(exact, oracle);
        assert!(crate::scalar::ratio_to_f64(&exact) > 0.0);
    }

    #[test]
    fn negative_bases_alternate_sign() {
        let w = WeightRule::new(vec![], WeightExpr::geometric(-2, 1)).unwrap();
        assert_eq!(w.weight_exact(3).unwrap(), q(-8, 1));
        assert_eq!(w.log_weight(3).unwrap().1, -1);
        assert_eq!(w.log_weight(4).unwrap().1, 1);
    }

    #[test]
    fn json_round_trip() {
        for (name, rule) in catalog::all_weights() {
            let text = serde_json::to_string(&rule).unwrap();
            assert_eq!(WeightRule::from_json(&text).unwrap(), rule, "{name}");
        }
        let w = WeightRule::from_json(
            r#"{"clauses":[{"guard":{"residue":{"mod":4,"rem":1,"min":5}},"expr":{"geometric":{"base":2,"exp_sign":-1}}}],"default":{"geometric":{"base":2,"exp_sign":1}}}"#,
        )
        .unwrap();
        assert_eq!(w, catalog::closing_lp_weights(2));
    }
}
