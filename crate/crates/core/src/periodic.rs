//! Periodic points `x_{N,k}`, approximation of finitely supported targets by
//! combinations of them, and finite prefixes of hypercyclic vectors.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::criteria::Horizons;
use crate::error::{Error, Result};
use crate::orbits::{escape_threshold, generator};
use crate::scalar::Scalar;
use crate::selfmap::SelfMapRule;
use crate::seqspace::{apply_operator, product_in, s_map, FinSeq, JsonScalar, SpaceSpec};
use crate::verdict::Verdict;
use crate::weights::{backward_p_series, forward_inverse_series, forward_product, SeriesReport, WeightRule};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificates {
    /// Convergence grade of the series bounding the dropped forward terms.
    pub forward: Option<Verdict>,
    /// Same for the backward terms; absent when the sentinel was reached.
    pub backward: Option<Verdict>,
    /// `g_N(k)` as computed, and whether it is certified.
    pub generator: u64,
    pub generator_exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "S: JsonScalar"))]
pub struct PeriodicPointReport<S: Scalar> {
    pub k: u64,
    #[serde(rename = "N")]
    pub period: u64,
    #[serde(flatten)]
    pub vector: FinSeq<S>,
    /// `phi^{nN}(k)` kept, in order.
    pub forward: Vec<u64>,
    /// `phi^{-nN}(k)` kept, in order.
    pub backward: Vec<u64>,
    pub sentinel: bool,
    /// Bound on the norm of everything dropped; `None` without a certificate.
    pub tail_bound: Option<f64>,
    /// Residual off the boundary ring.
    pub residual: f64,
    pub boundary_residual: f64,
    /// Indices where truncation bites.
    pub ring: Vec<u64>,
    pub certificates: Certificates,
}

impl<S: Scalar> PeriodicPointReport<S> {
    /// `x_{N,k} - e_k` as stored.
    pub fn deviation(&self) -> FinSeq<S> {
        self.vector.restrict(|i| i != self.k)
    }
}

fn lp_exponent(space: SpaceSpec) -> f64 {
    match space {
        SpaceSpec::Lp(p) => p,
        SpaceSpec::C0 => 1.0,
    }
}

/// `(Σ_{m > from} term_m)` from a series report, or `None` without a tail certificate.
fn tail_after(report: &SeriesReport, from: usize) -> Option<f64> {
    let tail = report.tail_bound?;
    let explicit: f64 = report.log_terms.iter().skip(from).map(|l| l.exp()).sum();
    Some(explicit + tail)
}

fn root(sum: f64, space: SpaceSpec) -> f64 {
    match space {
        SpaceSpec::Lp(p) => sum.powf(1.0 / p),
        SpaceSpec::C0 => sum,
    }
}

/// `‖(wC_φ)^N x − x‖` over all indices except `ring`.
pub fn residual_excluding<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    x: &FinSeq<S>,
    n: u64,
    space: SpaceSpec,
    horizon: u64,
    ring: &BTreeSet<u64>,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    let mut image: FinSeq<S> = FinSeq::zero();
    let mut boundary: FinSeq<f64> = x.restrict(|i| ring.contains(&i)).to_f64().scale(&-1.0);
    for (s, v) in x.iter() {
        let pre = map.backward_iterate(s, n, horizon)?;
        if pre.hit_sentinel {
            continue;
        }
        if ring.contains(&pre.value) {
            let w = forward_product(map, rule, pre.value, n)?;
            let w = if w.is_zero { 0.0 } else { f64::from(w.sign) * w.log_magnitude.exp() };
            boundary.add_at(pre.value, w * v.to_f64())?;
        } else {
            let w: S = product_in(map, rule, pre.value, n)?;
            image.add_at(pre.value, w * v.clone())?;
        }
    }
    let inner = image.minus(x).restrict(|i| !ring.contains(&i)).norm(space);
    Ok((inner, boundary.norm(space)))
}

/// `‖(wC_φ)^N x − x‖` over every index, and whether it is within `tol`.
pub fn verify_periodic<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    x: &FinSeq<S>,
    n: u64,
    space: SpaceSpec,
    tol: f64,
) -> Result<(f64, bool)> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let (r, _) = residual_excluding(map, rule, x, n, space, crate::seqspace::DEFAULT_HORIZON, &BTreeSet::new())?;
    Ok((r, r <= tol))
}

/// Truncation of `x_{N,k}`: coefficients are kept while their magnitude is at
/// least `tail_eps`, for at most `h.series_terms` terms per direction.
pub fn build_periodic_point<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    k: u64,
    n: u64,
    space: SpaceSpec,
    tail_eps: f64,
    h: &Horizons,
) -> Result<PeriodicPointReport<S>> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k and N must be >= 1".into()));
    }
    if !(tail_eps > 0.0) {
        return Err(Error::InvalidArgument("tail_eps must be positive".into()));
    }
    space.validate()?;
    let cut = tail_eps.ln();
    let budget = h.series_terms;
    let mut vector = FinSeq::unit(k)?;
    let mut ring = BTreeSet::new();

    let mut forward = Vec::new();
    let mut point = k;
    let mut ln_w = 0.0;
    let mut coef = S::one();
    let mut decayed = false;
    for _ in 0..budget {
        let step = forward_product(map, rule, point, n)?;
        ln_w += step.log_magnitude;
        if -ln_w < cut {
            decayed = true;
            break;
        }
        coef = coef / product_in::<S>(map, rule, point, n)?;
        point = map.iterate(point, n)?;
        vector.set(point, coef.clone())?;
        forward.push(point);
    }
    if !decayed {
        return Err(Error::NonDecayingTail { k, eps: tail_eps, horizon: budget });
    }
    ring.insert(point);

    let mut backward = Vec::new();
    let mut y = k;
    let mut ln_b = 0.0;
    let mut coef = S::one();
    let mut sentinel = false;
    decayed = false;
    for _ in 0..budget {
        let r = map.backward_iterate(y, n, h.preimage_scan)?;
        if r.hit_sentinel {
            sentinel = true;
            break;
        }
        let pre = r.value;
        ln_b += forward_product(map, rule, pre, n)?.log_magnitude;
        if ln_b < cut {
            decayed = true;
            ring.insert(pre);
            break;
        }
        coef = coef * product_in::<S>(map, rule, pre, n)?;
        vector.set(pre, coef.clone())?;
        backward.push(pre);
        y = pre;
    }
    if !sentinel && !decayed {
        return Err(Error::NonDecayingTail { k, eps: tail_eps, horizon: budget });
    }

    let p = lp_exponent(space);
    // Dropped terms start at index `N·(kept + 1)`.
    let kept = (forward.len() + 1) * n as usize - 1;
    let fwd_series = forward_inverse_series(map, rule, k, p, budget.max(kept + 1))?;
    let fwd_tail = tail_after(&fwd_series, kept).map(|s| root(s, space));
    let (bwd_verdict, bwd_tail) = if sentinel {
        (None, Some(0.0))
    } else {
        let kept = (backward.len() + 1) * n as usize - 1;
        let s = backward_p_series(map, rule, k, p, budget.max(kept + 1), h.preimage_scan)?;
        let t = tail_after(&s, kept).map(|v| root(v, space));
        (Some(s.verdict), t)
    };
    let tail_bound = fwd_tail.zip(bwd_tail).map(|(a, b)| a + b);

    let (residual, boundary_residual) = residual_excluding(map, rule, &vector, n, space, h.preimage_scan, &ring)?;
    let (g, exact) = generator(map, k, n, h.preimage_scan)?;
    Ok(PeriodicPointReport {
        k,
        period: n,
        vector,
        forward,
        backward,
        sentinel,
        tail_bound,
        residual,
        boundary_residual,
        ring: ring.into_iter().collect(),
        certificates: Certificates {
            forward: Some(fwd_series.verdict),
            backward: bwd_verdict,
            generator: g,
            generator_exact: exact,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "S: JsonScalar"))]
pub struct Approximation<S: Scalar> {
    #[serde(rename = "N")]
    pub period: u64,
    /// `Σ_k y_k x̃_{N,k}`.
    pub x: FinSeq<S>,
    /// `‖x − y‖` recomputed from the stored entries.
    pub achieved: f64,
    /// Bound on `‖Σ_k y_k x_{N,k} − y‖` for the untruncated periodic point.
    pub bound: f64,
    pub components: Vec<PeriodicPointReport<S>>,
}

/// Periodic approximation of a finitely supported `y` to within `eps`.
///
/// `N` is the least value past every escape threshold of `supp(y)` against
/// `F = [1, max supp(y)]` at which each `x_{N,k} − e_k` is smaller than
/// `eps / (2 |supp y| max|y_k|)` on both sides of `k`.
pub fn approximate_by_periodic<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    y: &FinSeq<S>,
    eps: f64,
    space: SpaceSpec,
    h: &Horizons,
) -> Result<Approximation<S>> {
    if y.is_empty() {
        return Err(Error::InvalidArgument("target must be nonzero".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive".into()));
    }
    let support = y.support();
    let top = *support.last().expect("nonempty");
    let f: BTreeSet<u64> = (1..=top).collect();
    let n_max = 2 * top + 64;
    let mut start = 1;
    for &k in &support {
        start = start.max(escape_threshold(map, k, &f, n_max, h.preimage_scan)? + 1);
    }
    let y0 = support.iter().map(|&k| y.get(k).to_f64().abs()).fold(0.0, f64::max);
    let share = eps / (2.0 * support.len() as f64 * y0);
    let tail_eps = share * 1e-6;
    'search: for n in start..=n_max {
        let mut components = Vec::new();
        let mut bound = 0.0;
        for &k in &support {
            let c: PeriodicPointReport<S> = match build_periodic_point(map, rule, k, n, space, tail_eps, h) {
                Ok(c) => c,
                Err(Error::NonDecayingTail { .. }) => continue 'search,
                Err(e) => return Err(e),
            };
            let Some(tail) = c.tail_bound else { continue 'search };
            let fwd = c.vector.restrict(|i| c.forward.contains(&i)).norm(space);
            let bwd = c.vector.restrict(|i| c.backward.contains(&i)).norm(space);
            // The tail bound covers both sides at once, so each side gets all of it.
            if fwd + tail >= share || bwd + tail >= share {
                continue 'search;
            }
            bound += y.get(k).to_f64().abs() * (fwd + bwd + tail);
            components.push(c);
        }
        let mut x = FinSeq::zero();
        for c in &components {
            x = x.plus(&c.vector.scale(&y.get(c.k)));
        }
        let achieved = x.minus(y).norm(space);
        if achieved < eps && bound < eps {
            return Ok(Approximation {
                period: n,
                x,
                achieved,
                bound,
                components,
            });
        }
    }
    Err(Error::NonDecayingTail {
        k: top,
        eps,
        horizon: n_max as usize,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Visit {
    pub m: u64,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound(serialize = "S: JsonScalar"))]
pub struct Prefix<S: Scalar> {
    pub x: FinSeq<S>,
    pub visits: Vec<Visit>,
}

/// `x = Σ_j S^{m_j} y_j` with increasing `m_j <= h.orbit` chosen so that
/// `‖(wC_φ)^{m_j} x − y_j‖ < δ_j` for every `j`; each error is recomputed
/// from `x` before returning.
pub fn construct_hypercyclic_prefix<S: Scalar>(
    map: &SelfMapRule,
    rule: &WeightRule,
    targets: &[FinSeq<S>],
    deltas: &[f64],
    space: SpaceSpec,
    h: &Horizons,
) -> Result<Prefix<S>> {
    if targets.len() != deltas.len() {
        return Err(Error::InvalidArgument("one delta per target is required".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument("deltas must be positive".into()));
    }
    let mut x: FinSeq<S> = FinSeq::zero();
    let mut chosen: Vec<u64> = Vec::new();
    for (j, (y, &delta)) in targets.iter().zip(deltas).enumerate() {
        let level = (j + 1) as i32;
        let from = chosen.last().copied().unwrap_or(0) + 1;
        let mut found = None;
        for m in from..=h.orbit {
            if s_map(map, rule, y, m)?.norm(space) >= delta / 2f64.powi(level) {
                continue;
            }
            if apply_operator(map, rule, &x, m, h.preimage_scan)?.norm(space) >= delta / 2.0 {
                continue;
            }
            let mut ok = true;
            for (l, &ml) in chosen.iter().enumerate() {
                let budget = deltas[l] * 2f64.powi(-((j - l) as i32) - 1);
                if s_map(map, rule, y, m - ml)?.norm(space) >= budget {
                    ok = false;
                    break;
                }
            }
            if ok {
                found = Some(m);
                break;
            }
        }
        let Some(m) = found else {
            return Err(Error::BudgetExceeded(format!(
                "no power m <= {} meets the bounds for target {}",
                h.orbit,
                j + 1
            )));
        };
        x = x.plus(&s_map(map, rule, y, m)?);
        chosen.push(m);
    }
    let mut visits = Vec::new();
    for ((y, &delta), &m) in targets.iter().zip(deltas).zip(&chosen) {
        let error = apply_operator(map, rule, &x, m, h.preimage_scan)?.minus(y).norm(space);
        if !(error < delta) {
            return Err(Error::BudgetExceeded(format!("visit at m = {m} misses by {error}")));
        }
        visits.push(Visit { m, error });
    }
    Ok(Prefix { x, visits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use num_rational::BigRational;
    use num_traits::{One, Zero};

    fn h() -> Horizons {
        Horizons {
            orbit: 400,
            series_terms: 200,
            preimage_scan: 10_000,
        }
    }

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rolewicz_periodic_point() {
        let ex = catalog::rolewicz(SpaceSpec::Lp(1.0));
        let r: PeriodicPointReport<BigRational> =
            build_periodic_point(&ex.map, &ex.weights, 1, 1, ex.space, 1e-6, &h()).unwrap();
        assert!(r.sentinel);
        assert!(r.backward.is_empty());
        for (i, &p) in r.forward.iter().enumerate() {
            assert_eq!(p, i as u64 + 2);
            assert_eq!(r.vector.get(p), q(1, 1 << (i + 1)));
        }
        assert!(r.residual.is_zero());
        let tail = r.tail_bound.unwrap();
        let dropped = 0.5f64.powi(r.forward.len() as i32);
        assert!(tail >= dropped * (1.0 - 1e-9) && tail <= 2.0 * dropped);
    }

    #[test]
    fn raw_verification() {
        let ex = catalog::rolewicz(SpaceSpec::Lp(2.0));
        let e1: FinSeq<BigRational> = FinSeq::unit(1).unwrap();
        assert_eq!(verify_periodic(&ex.map, &ex.weights, &e1, 1, ex.space, 1e-12).unwrap(), (1.0, false));
        let zero: FinSeq<f64> = FinSeq::zero();
        assert_eq!(verify_periodic(&ex.map, &ex.weights, &zero, 3, ex.space, 0.0).unwrap(), (0.0, true));
    }

    #[test]
    fn closing_lp_periodic_point() {
        let ex = catalog::closing_lp();
        let r: PeriodicPointReport<f64> = build_periodic_point(&ex.map, &ex.weights, 1, 2, ex.space, 1e-12, &h()).unwrap();
        assert!(r.residual <= 1e-10);
        assert!(r.tail_bound.is_some());
        let exact: PeriodicPointReport<BigRational> =
            build_periodic_point(&ex.map, &ex.weights, 1, 2, ex.space, 1e-12, &h()).unwrap();
        assert!(exact.residual.is_zero());
    }

    #[test]
    fn combinations_of_generators_stay_periodic() {
        let ex = catalog::closing_lp();
        let a: PeriodicPointReport<BigRational> =
            build_periodic_point(&ex.map, &ex.weights, 1, 2, ex.space, 1e-9, &h()).unwrap();
        let b: PeriodicPointReport<BigRational> =
            build_periodic_point(&ex.map, &ex.weights, 2, 2, ex.space, 1e-9, &h()).unwrap();
        assert!(a.certificates.generator_exact && b.certificates.generator_exact);
        let sa: BTreeSet<u64> = a.vector.support().into_iter().collect();
        assert!(b.vector.support().iter().all(|i| !sa.contains(i)));
        let x = a.vector.scale(&q(3, 1)).plus(&b.vector.scale(&q(-1, 2)));
        let ring: BTreeSet<u64> = a.ring.iter().chain(&b.ring).copied().collect();
        let (r, _) = residual_excluding(&ex.map, &ex.weights, &x, 2, ex.space, 10_000, &ring).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn tail_bound_covers_extra_terms() {
        let ex = catalog::closing_lp();
        let r: PeriodicPointReport<f64> = build_periodic_point(&ex.map, &ex.weights, 3, 1, ex.space, 1e-4, &h()).unwrap();
        let finer: PeriodicPointReport<f64> =
            build_periodic_point(&ex.map, &ex.weights, 3, 1, ex.space, 1e-30, &h()).unwrap();
        let dropped = finer.vector.minus(&r.vector).norm(ex.space);
        assert!(dropped <= r.tail_bound.unwrap());
    }

    #[test]
    fn approximation_examples() {
        let ex = catalog::rolewicz(SpaceSpec::Lp(1.0));
        let y: FinSeq<f64> = FinSeq::unit(1).unwrap();
        let a = approximate_by_periodic(&ex.map, &ex.weights, &y, 0.1, ex.space, &h()).unwrap();
        assert!(a.achieved < 0.1);
        assert!(a.x.minus(&y).norm(ex.space) < 0.1);
        assert!(matches!(
            approximate_by_periodic(&ex.map, &ex.weights, &FinSeq::<f64>::zero(), 0.1, ex.space, &h()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn prefix_examples() {
        let ex = catalog::rolewicz(SpaceSpec::Lp(2.0));
        let e1: FinSeq<BigRational> = FinSeq::unit(1).unwrap();
        let p = construct_hypercyclic_prefix(&ex.map, &ex.weights, std::slice::from_ref(&e1), &[0.1], ex.space, &h()).unwrap();
        assert_eq!(p.visits.len(), 1);
        assert!(0.5f64.powi(p.visits[0].m as i32) < 0.05);
        assert!(p.visits[0].error < 0.1);
        let empty = construct_hypercyclic_prefix::<f64>(&ex.map, &ex.weights, &[], &[], ex.space, &h()).unwrap();
        assert!(empty.x.is_empty() && empty.visits.is_empty());

        let lp = catalog::closing_lp();
        let e12 = FinSeq::from_entries([(1, BigRational::one()), (2, BigRational::one())]).unwrap();
        let p = construct_hypercyclic_prefix(&lp.map, &lp.weights, &[e1, e12], &[0.25, 0.25], lp.space, &h()).unwrap();
        assert!(p.visits.iter().all(|v| v.error < 0.25));
        assert!(p.visits[0].m < p.visits[1].m);
    }
}
