//! Series and limit quantities built from weight products.

use serde::{Deserialize, Serialize};

use super::trend::{Trend, TrendDirection};
use super::{step_back, WeightRule};
use crate::error::{Error, Result};
use crate::selfmap::SelfMapRule;
use crate::verdict::{Evidence, Verdict, VerdictKind};

/// Relative increment below which a partial sum counts as stalled.
pub const PLATEAU_TOL: f64 = 1e-12;
/// Consecutive stalled terms needed for a plateau verdict.
pub const PLATEAU_RUN: usize = 20;
/// Levels `|W_m(k)|` has to exceed for the hypercyclicity condition.
pub const HYPERCYCLIC_THRESHOLDS: [f64; 8] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8];

const ANCHOR_ATTEMPTS: usize = 256;
const EXTENSION_CAP: usize = 1_000_000;
const SAMPLES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    /// Blocks of terms shrink geometrically from some onset on.
    Geometric,
    /// The series stops at the sentinel.
    Sentinel,
    Plateau,
    Divergent,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    /// Positive grades mean the series converges.
    pub verdict: Verdict,
    /// `(m, S_m)` at sampled `m`.
    pub partial_sums: Vec<(usize, f64)>,
    pub terms: usize,
    /// `S_terms`.
    pub sum: f64,
    pub tail_kind: TailKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_ratio: Option<f64>,
    /// Upper bound for `Σ_{n > terms}`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_bound: Option<f64>,
    pub precision_loss: bool,
    /// `ln` of every term `1..=terms` (`-inf` for exact zeros).
    #[serde(skip)]
    pub log_terms: Vec<f64>,
}

impl SeriesReport {
    /// All partial sums `S_1..S_terms`.
    pub fn all_partial_sums(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.log_terms
            .iter()
            .map(|l| {
                acc += l.exp();
                acc
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    /// Grade of `|W_n(k)| → ∞`.
    pub forward: Verdict,
    /// Grade of `|B_n(k)| → 0`.
    pub backward: Verdict,
    /// `(n, ln|W_n(k)|)` at sampled `n`.
    pub forward_log: Vec<(usize, f64)>,
    /// `(n, ln|B_n(k)|)` at sampled `n`; `-inf` past the sentinel.
    pub backward_log: Vec<(usize, f64)>,
}

fn check_args(k: u64, p: f64, terms: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be finite and >= 1, got {p}")));
    }
    if terms == 0 {
        return Err(Error::InvalidArgument("terms must be >= 1".into()));
    }
    Ok(())
}

fn sample_indices(n: usize) -> Vec<usize> {
    let step = (n / SAMPLES).max(1);
    let mut out: Vec<usize> = (1..=n).filter(|&i| i <= 10 || i % step == 0).collect();
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

/// `Λ_0..Λ_m` of the forward product and the point `z_m`, where `m` is
/// `terms` unless the orbit leaves the 64-bit range first.
fn forward_lambda(map: &SelfMapRule, rule: &WeightRule, k: u64, terms: usize) -> Result<(Vec<f64>, u64)> {
    let mut lambda = Vec::with_capacity(terms + 1);
    lambda.push(0.0);
    let mut x = k;
    for n in 1..=terms {
        lambda.push(lambda[n - 1] + rule.log_weight(x)?.0);
        if n < terms {
            x = match map.apply(x) {
                Ok(v) => v,
                Err(e) if e.is_soft() => break,
                Err(e) => return Err(e),
            };
        }
    }
    Ok((lambda, x))
}

/// Anchors a forward trend at the end of `lambda`, walking on (and
/// extending `lambda`) until a certified path is found.
fn forward_trend(map: &SelfMapRule, rule: &WeightRule, lambda: &mut Vec<f64>, mut x: u64) -> Result<Option<Trend>> {
    for _ in 0..ANCHOR_ATTEMPTS {
        let s = lambda.len() - 1;
        if let Some(t) = Trend::forward(map, rule, x, s)? {
            return Ok(Some(t));
        }
        x = match map.apply(x) {
            Ok(v) => v,
            Err(e) if e.is_soft() => return Ok(None),
            Err(e) => return Err(e),
        };
        let ln = match rule.log_weight(x) {
            Ok((ln, _)) => ln,
            Err(e) if e.is_soft() => return Ok(None),
            Err(e) => return Err(e),
        };
        lambda.push(lambda[s] + ln);
    }
    Ok(None)
}

struct Backward {
    lambda: Vec<f64>,
    sentinel: Option<usize>,
    trend: Option<Trend>,
    /// The walk stopped early because a preimage could not be settled.
    stalled: bool,
}

/// `Λ_0..Λ_terms` of the backward product, then a trend or the sentinel.
fn backward_walk(map: &SelfMapRule, rule: &WeightRule, k: u64, terms: usize, horizon: u64) -> Result<Backward> {
    let mut lambda = vec![0.0];
    let mut y = k;
    let walk = |lambda: &mut Vec<f64>, y: &mut u64| -> Result<Option<bool>> {
        match step_back(map, *y, horizon) {
            Ok(0) => Ok(Some(false)),
            Ok(prev) => {
                *y = prev;
                let s = lambda.len() - 1;
                lambda.push(lambda[s] + rule.log_weight(prev)?.0);
                Ok(Some(true))
            }
            Err(e) if e.is_soft() => Ok(None),
            Err(e) => Err(e),
        }
    };
    let anchored = |lambda: &mut Vec<f64>, y: u64| -> Result<Option<Backward>> {
        let s = lambda.len() - 1;
        if s == 0 {
            return Ok(None);
        }
        let Some(t) = Trend::backward(map, rule, y, s)? else { return Ok(None) };
        if let Some(at) = t.sentinel_at() {
            while lambda.len() < at {
                let n = lambda.len();
                let u = t.log_increment(n).expect("terminal path covers the remaining points");
                lambda.push(lambda[n - 1] + u);
            }
            return Ok(Some(Backward { lambda: std::mem::take(lambda), sentinel: Some(at), trend: None, stalled: false }));
        }
        let mut ext = Vec::new();
        for n in lambda.len()..=terms {
            let Some(u) = t.log_increment(n) else { break };
            ext.push(ext.last().copied().unwrap_or(lambda[n - 1]) + u);
        }
        lambda.extend(ext);
        Ok(Some(Backward { lambda: std::mem::take(lambda), sentinel: None, trend: Some(t), stalled: false }))
    };
    loop {
        let s = lambda.len() - 1;
        if s >= terms {
            if let Some(done) = anchored(&mut lambda, y)? {
                return Ok(done);
            }
            if s >= terms + ANCHOR_ATTEMPTS {
                return Ok(Backward { lambda, sentinel: None, trend: None, stalled: false });
            }
        }
        match walk(&mut lambda, &mut y)? {
            Some(true) => {}
            Some(false) => {
                let at = lambda.len();
                return Ok(Backward { lambda, sentinel: Some(at), trend: None, stalled: false });
            }
            None => {
                if let Some(done) = anchored(&mut lambda, y)? {
                    return Ok(done);
                }
                return Ok(Backward { lambda, sentinel: None, trend: None, stalled: s < terms });
            }
        }
    }
}

/// Geometric bound on `Σ_{n > terms} exp(-p·f·Λ_n)` from a trend that sends
/// `f·Λ` to `+∞`. Returns `(explicit part, geometric part, onset, ratio)`.
fn geometric_tail(
    lambda: &mut Vec<f64>,
    trend: &Trend,
    p: f64,
    dir: TrendDirection,
    terms: usize,
) -> Option<(f64, f64, usize, f64)> {
    let f = match dir {
        TrendDirection::Up => 1.0,
        TrendDirection::Down => -1.0,
    };
    let term = |l: f64| (-p * f * l).exp();
    let l = trend.block;
    let start = lambda.len();
    let mut m = lambda.len() - 1;
    loop {
        if m + 1 >= trend.from + l {
            let mut g = f64::INFINITY;
            for n in m + 1 - l..=m {
                g = g.min(trend.window_bound(n, dir)?);
            }
            let g = g - 1e-9 * (1.0 + g.abs());
            if g > 0.0 {
                let r = (-p * g).exp();
                let block: f64 = (m + 1 - l..=m).map(|n| term(lambda[n])).sum();
                let extra: f64 = (terms + 1..=m).map(|n| term(lambda[n])).sum();
                return Some((extra, block * r / (1.0 - r), m, r));
            }
        }
        if lambda.len() - start > EXTENSION_CAP {
            return None;
        }
        let u = trend.log_increment(m + 1)?;
        lambda.push(lambda[m] + u);
        m += 1;
    }
}

/// Grades `Σ_n exp(-p·f·Λ_n)` given `Λ_0..` (at least `terms + 1` values),
/// an optional trend and an optional sentinel index.
fn grade_series(
    mut lambda: Vec<f64>,
    terms: usize,
    p: f64,
    dir: TrendDirection,
    trend: Option<Trend>,
    sentinel: Option<usize>,
) -> SeriesReport {
    let f = match dir {
        TrendDirection::Up => 1.0,
        TrendDirection::Down => -1.0,
    };
    let log_term = |n: usize, lambda: &[f64]| -> f64 {
        if sentinel.is_some_and(|s| n >= s) {
            f64::NEG_INFINITY
        } else {
            -p * f * lambda[n]
        }
    };
    let log_terms: Vec<f64> = (1..=terms).map(|n| log_term(n, &lambda)).collect();
    let mut partial = Vec::with_capacity(terms);
    let mut acc = 0.0;
    for l in &log_terms {
        acc += l.exp();
        partial.push(acc);
    }
    let precision_loss = log_terms.iter().any(|l| *l > 700.0) || !acc.is_finite();
    let sampled = sample_indices(terms)
        .into_iter()
        .map(|n| (n, partial[n - 1]))
        .collect();
    let mut report = SeriesReport {
        verdict: Verdict::new(VerdictKind::Inconclusive, Evidence::Scan { upto: terms as u64 }, terms as u64),
        partial_sums: sampled,
        terms,
        sum: acc,
        tail_kind: TailKind::Unknown,
        tail_ratio: None,
        tail_bound: None,
        precision_loss,
        log_terms,
    };

    if let Some(at) = sentinel {
        let rest: f64 = (terms + 1..at.min(lambda.len()))
            .map(|n| log_term(n, &lambda).exp())
            .sum();
        report.verdict = Verdict::new(VerdictKind::ExactTailBound, Evidence::Sentinel { at }, terms as u64);
        report.tail_kind = TailKind::Sentinel;
        report.tail_bound = Some(rest);
        return report;
    }
    if let Some(trend) = &trend {
        match trend.tends(dir) {
            Some(true) => {
                if let Some((extra, tail, onset, r)) = geometric_tail(&mut lambda, trend, p, dir, terms) {
                    report.verdict = Verdict::new(
                        VerdictKind::ExactTailBound,
                        Evidence::Tail { onset, block: trend.block, ratio: r },
                        onset as u64,
                    );
                    report.tail_kind = TailKind::Geometric;
                    report.tail_ratio = Some(r);
                    report.tail_bound = Some(extra + tail);
                    return report;
                }
            }
            Some(false) => {
                report.verdict = Verdict::new(
                    VerdictKind::Refuted,
                    Evidence::Bounded { onset: trend.from, block: trend.block },
                    terms as u64,
                );
                report.tail_kind = TailKind::Divergent;
                return report;
            }
            None => {}
        }
    }
    let mut run = 0;
    for (i, l) in report.log_terms.iter().enumerate() {
        if l.exp() <= PLATEAU_TOL * partial[i] {
            run += 1;
            if run >= PLATEAU_RUN {
                let at = i + 2 - run;
                report.verdict = Verdict::new(VerdictKind::SatisfiedAtHorizon, Evidence::Plateau { at }, terms as u64);
                report.tail_kind = TailKind::Plateau;
                return report;
            }
        } else {
            run = 0;
        }
    }
    report
}

/// `Σ_{n=1}^{terms} |W_n(k)|^{-p}` with a graded verdict on convergence.
pub fn forward_inverse_series(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    p: f64,
    terms: usize,
) -> Result<SeriesReport> {
    check_args(k, p, terms)?;
    let (mut lambda, x) = forward_lambda(map, rule, k, terms)?;
    let terms = lambda.len() - 1;
    let trend = forward_trend(map, rule, &mut lambda, x)?;
    Ok(grade_series(lambda, terms, p, TrendDirection::Up, trend, None))
}

/// `Σ_{n=1}^{terms} |B_n(k)|^p` with a graded verdict on convergence.
pub fn backward_p_series(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    p: f64,
    terms: usize,
    horizon: u64,
) -> Result<SeriesReport> {
    check_args(k, p, terms)?;
    let back = backward_walk(map, rule, k, terms, horizon)?;
    if back.stalled {
        let mut report = grade_series(
            pad(back.lambda, terms),
            terms,
            p,
            TrendDirection::Down,
            None,
            None,
        );
        report.verdict = Verdict::note(
            VerdictKind::Inconclusive,
            "a preimage beyond the scan horizon could not be ruled out",
            horizon,
        );
        report.tail_kind = TailKind::Unknown;
        return Ok(report);
    }
    let terms = match back.sentinel {
        Some(_) => terms,
        None => terms.min(back.lambda.len() - 1),
    };
    Ok(grade_series(back.lambda, terms, p, TrendDirection::Down, back.trend, back.sentinel))
}

fn pad(mut lambda: Vec<f64>, terms: usize) -> Vec<f64> {
    while lambda.len() <= terms {
        lambda.push(f64::NEG_INFINITY);
    }
    lambda
}

fn sampled_log(lambda: &[f64], n: usize, sentinel: Option<usize>) -> Vec<(usize, f64)> {
    sample_indices(n)
        .into_iter()
        .map(|i| {
            let v = if sentinel.is_some_and(|s| i >= s) || i >= lambda.len() {
                f64::NEG_INFINITY
            } else {
                lambda[i]
            };
            (i, v)
        })
        .collect()
}

fn limit_verdict(
    lambda: &mut Vec<f64>,
    trend: Option<&Trend>,
    dir: TrendDirection,
    terms: usize,
) -> Verdict {
    if let Some(t) = trend {
        match t.tends(dir) {
            Some(true) => {
                if let Some((_, _, onset, r)) = geometric_tail(lambda, t, 1.0, dir, terms) {
                    return Verdict::new(
                        VerdictKind::ExactTailBound,
                        Evidence::Tail { onset, block: t.block, ratio: r },
                        onset as u64,
                    );
                }
            }
            Some(false) => {
                return Verdict::new(
                    VerdictKind::Refuted,
                    Evidence::Bounded { onset: t.from, block: t.block },
                    terms as u64,
                )
            }
            None => {}
        }
    }
    let last = lambda[terms.min(lambda.len() - 1)];
    let level = HYPERCYCLIC_THRESHOLDS[HYPERCYCLIC_THRESHOLDS.len() - 1].ln();
    let reached = match dir {
        TrendDirection::Up => last >= level,
        TrendDirection::Down => last <= -level,
    };
    if reached {
        Verdict::new(VerdictKind::SatisfiedAtHorizon, Evidence::Scan { upto: terms as u64 }, terms as u64)
    } else {
        Verdict::new(VerdictKind::Inconclusive, Evidence::Scan { upto: terms as u64 }, terms as u64)
    }
}

/// Grades `|W_n(k)| → ∞` and `|B_n(k)| → 0`.
pub fn forward_product_limits(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    terms: usize,
    horizon: u64,
) -> Result<LimitReport> {
    check_args(k, 1.0, terms)?;
    let (mut lambda, x) = forward_lambda(map, rule, k, terms)?;
    let forward_terms = lambda.len() - 1;
    let trend = forward_trend(map, rule, &mut lambda, x)?;
    let forward = limit_verdict(&mut lambda, trend.as_ref(), TrendDirection::Up, forward_terms);
    let forward_log = sampled_log(&lambda, forward_terms, None);

    let mut back = backward_walk(map, rule, k, terms, horizon)?;
    let terms = match back.sentinel {
        Some(_) => terms,
        None => terms.min(back.lambda.len() - 1),
    };
    let backward = if let Some(at) = back.sentinel {
        Verdict::new(VerdictKind::ExactTailBound, Evidence::Sentinel { at }, terms as u64)
    } else if back.stalled {
        Verdict::note(
            VerdictKind::Inconclusive,
            "a preimage beyond the scan horizon could not be ruled out",
            horizon,
        )
    } else {
        limit_verdict(&mut back.lambda, back.trend.as_ref(), TrendDirection::Down, terms)
    };
    let backward_log = sampled_log(&back.lambda, terms, back.sentinel);
    Ok(LimitReport {
        forward,
        backward,
        forward_log,
        backward_log,
    })
}

/// Grades "`|W_m(k)|` exceeds every level" for the hypercyclicity condition:
/// a certificate that `ln|W_n(k)|` is unbounded gives `ExactTailBound`, one
/// that it is bounded gives `Refuted`, otherwise crossing every level of
/// [`HYPERCYCLIC_THRESHOLDS`] within `terms` gives `SatisfiedAtHorizon`.
pub fn forward_growth(map: &SelfMapRule, rule: &WeightRule, k: u64, terms: usize) -> Result<Verdict> {
    check_args(k, 1.0, terms)?;
    let (mut lambda, x) = forward_lambda(map, rule, k, terms)?;
    let terms = lambda.len() - 1;
    let crossings: Vec<(f64, Option<usize>)> = HYPERCYCLIC_THRESHOLDS
        .iter()
        .map(|&t| (t, (1..=terms).find(|&n| lambda[n] > t.ln())))
        .collect();
    let all = crossings.iter().all(|(_, m)| m.is_some());
    let trend = forward_trend(map, rule, &mut lambda, x)?;
    let evidence = Evidence::Thresholds { crossings };
    if let Some(t) = &trend {
        match t.unbounded(TrendDirection::Up) {
            Some(true) => return Ok(Verdict::new(VerdictKind::ExactTailBound, evidence, terms as u64)),
            Some(false) => {
                return Ok(Verdict::new(
                    VerdictKind::Refuted,
                    Evidence::Bounded { onset: t.from, block: t.block },
                    terms as u64,
                ))
            }
            None => {}
        }
    }
    let kind = if all {
        VerdictKind::SatisfiedAtHorizon
    } else {
        VerdictKind::Inconclusive
    };
    Ok(Verdict::new(kind, evidence, terms as u64))
}
