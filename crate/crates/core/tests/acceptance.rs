//! End-to-end acceptance run: one line per criterion, non-zero exit on failure.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use pseudoshift::catalog::{self, Example};
use pseudoshift::criteria::{check_chaotic, check_hypercyclic, Horizons, Part, SampleSpec};
use pseudoshift::orbits::{generator, generator_set, partition};
use pseudoshift::periodic::{
    approximate_by_periodic, build_periodic_point, construct_hypercyclic_prefix, residual_excluding,
    PeriodicPointReport,
};
use pseudoshift::primes::is_prime;
use pseudoshift::scalar::ratio_ln_abs;
use pseudoshift::selfmap::SelfMapRule;
use pseudoshift::seqspace::{apply_operator, s_map, FinSeq, SpaceSpec};
use pseudoshift::verdict::{Evidence, VerdictKind};
use pseudoshift::weights::{
    backward_product, backward_product_exact, forward_product, forward_product_exact, WeightRule,
};
use pseudoshift::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const COVER: u64 = 1000;
const FLOAT_RESIDUAL_TOL: f64 = 1e-10;
const LEFT_INVERSE_TOL: f64 = 1e-10;
const LOG_EXACT_TOL: f64 = 1e-10;
const APPROX_EPS: f64 = 1e-3;
const VISIT_DELTA: f64 = 0.25;
const RANDOM_VECTORS: usize = 100;
const SCAN: u64 = 100_000;
const F64_LOG_RANGE: f64 = 600.0;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn horizons() -> Horizons {
    Horizons {
        orbit: COVER,
        series_terms: 200,
        preimage_scan: SCAN,
    }
}

fn structural_refutations() -> Outcome {
    let map = catalog::first_example_map();
    let report = check_hypercyclic(
        &map,
        &catalog::constant_weights(2),
        SpaceSpec::Lp(2.0),
        &SampleSpec::default(),
        &horizons(),
    )
    .map_err(err)?;
    ensure(report.overall.kind == VerdictKind::Refuted, || format!("overall {:?}", report.overall.kind))?;
    let Evidence::Collision { first, second, image } = report.structural.injective.evidence.clone() else {
        return Err(format!("injectivity evidence {:?}", report.structural.injective));
    };
    ensure((first, second) == (4, 5), || format!("collision witness ({first}, {second})"))?;
    ensure(
        first != second && map.apply(first).map_err(err)? == image && map.apply(second).map_err(err)? == image,
        || "collision does not re-verify".into(),
    )?;
    let Evidence::PeriodicPoint { start, period } = report.structural.periodic.evidence.clone() else {
        return Err(format!("periodic evidence {:?}", report.structural.periodic));
    };
    ensure((start, period) == (1, 3), || format!("periodic witness ({start}, {period})"))?;
    ensure(map.iterate(start, period).map_err(err)? == start, || "periodic point does not re-verify".into())?;
    Ok("collision phi(4) = phi(5) = 4, periodic point 1 of period 3".into())
}

fn orbit_lemmas() -> Outcome {
    let primes: BTreeSet<u64> = std::iter::once(1).chain((2..=COVER).filter(|&n| is_prime(n))).collect();
    let expected: Vec<(&str, SelfMapRule, BTreeSet<u64>)> = vec![
        ("successor", catalog::successor(), BTreeSet::from([1])),
        ("single_orbit", catalog::single_orbit_map(), BTreeSet::from([1])),
        ("two_orbit", catalog::two_orbit_map(), BTreeSet::from([1, 2])),
        ("prime_chain", catalog::prime_chain_map(), primes.clone()),
        ("prime_triple", catalog::prime_triple_map(), primes),
    ];
    for (name, map, want) in expected {
        let mut previous: Option<BTreeSet<u64>> = None;
        for n in 1..=3 {
            let groups = partition(&map, n, COVER, SCAN).map_err(err)?;
            let mut seen = BTreeSet::new();
            for g in &groups {
                ensure(g.exact, || format!("{name}: generator {} of G_{n} not certified", g.generator))?;
                for &m in &g.members {
                    ensure(seen.insert(m), || format!("{name}: {m} in two groups for n = {n}"))?;
                }
            }
            ensure(seen == (1..=COVER).collect(), || format!("{name}: partition for n = {n} not total"))?;
            let gens = generator_set(&map, n, COVER, SCAN).map_err(err)?;
            ensure(gens.all_exact(), || format!("{name}: inexact generators for n = {n}"))?;
            let gens = gens.values();
            if n == 1 {
                ensure(gens == want, || format!("{name}: G = {gens:?}"))?;
            }
            if let Some(prev) = &previous {
                ensure(prev.is_subset(&gens), || format!("{name}: G_{} not inside G_{n}", n - 1))?;
            }
            previous = Some(gens);
        }
    }
    Ok("5 maps, n = 1..3, cover 1000: total, disjoint, exact generator sets, nested".into())
}

fn classifications() -> Outcome {
    let h = horizons();
    let samples = SampleSpec::default();
    let mut lines = Vec::new();

    let lp = catalog::closing_lp();
    let r = check_chaotic(&lp.map, &lp.weights, lp.space, &samples, &h).map_err(err)?;
    ensure(r.overall.kind.is_positive(), || format!("closing_lp overall {:?}", r.overall))?;
    for s in &r.samples {
        let (g, exact) = generator(&lp.map, s.k, 1, SCAN).map_err(err)?;
        if g != s.k || !exact {
            continue;
        }
        for part in std::iter::once(&s.forward).chain(s.backward.as_ref()) {
            ensure(part.verdict().kind == VerdictKind::ExactTailBound, || {
                format!("closing_lp generator {}: {:?}", s.k, part.verdict())
            })?;
        }
    }
    lines.push(format!("closing_lp {:?}", r.overall.kind));

    let c0 = catalog::closing_c0();
    let r = check_chaotic(&c0.map, &c0.weights, c0.space, &samples, &h).map_err(err)?;
    ensure(r.overall.kind.is_positive(), || format!("closing_c0 overall {:?}", r.overall))?;
    ensure(r.samples.iter().all(|s| matches!(s.forward, Part::Limit { .. })), || "closing_c0 lacks limit evidence".into())?;
    lines.push(format!("closing_c0 {:?} over {} samples", r.overall.kind, r.samples.len()));

    for space in [SpaceSpec::Lp(1.0), SpaceSpec::C0] {
        let ex = catalog::rolewicz(space);
        let r = check_chaotic(&ex.map, &ex.weights, space, &samples, &h).map_err(err)?;
        ensure(r.overall.kind.is_positive(), || format!("successor/2 on {space}: {:?}", r.overall))?;
        lines.push(format!("successor/2 on {space} {:?}", r.overall.kind));
    }

    let unit = catalog::unit_weights();
    let r = check_hypercyclic(&unit.map, &unit.weights, unit.space, &samples, &h).map_err(err)?;
    ensure(r.overall.kind == VerdictKind::Refuted, || format!("constant 1: {:?}", r.overall))?;
    ensure(matches!(r.overall.evidence, Evidence::Bounded { .. }), || format!("constant 1 evidence {:?}", r.overall.evidence))?;
    lines.push("constant 1 refuted (bounded products)".into());
    Ok(lines.join("; "))
}

fn chaotic_configs() -> Vec<Example> {
    catalog::chaotic_examples()
}

fn periodic_exactness() -> Outcome {
    let h = Horizons {
        series_terms: 120,
        ..horizons()
    };
    let mut built = 0;
    for ex in chaotic_configs() {
        for n in 1..=3 {
            for k in 1..=10 {
                let (g, exact) = generator(&ex.map, k, n, SCAN).map_err(err)?;
                if g != k || !exact {
                    continue;
                }
                let exact_report: PeriodicPointReport<BigRational> =
                    build_periodic_point(&ex.map, &ex.weights, k, n, ex.space, 1e-12, &h).map_err(err)?;
                let ring: BTreeSet<u64> = exact_report.ring.iter().copied().collect();
                let (residual, _) =
                    residual_excluding(&ex.map, &ex.weights, &exact_report.vector, n, ex.space, SCAN, &ring)
                        .map_err(err)?;
                ensure(residual == 0.0 && exact_report.residual == 0.0, || {
                    format!("{} k={k} N={n}: exact residual {residual}", ex.name)
                })?;
                let float_report: PeriodicPointReport<f64> =
                    build_periodic_point(&ex.map, &ex.weights, k, n, ex.space, 1e-12, &h).map_err(err)?;
                ensure(float_report.residual <= FLOAT_RESIDUAL_TOL, || {
                    format!("{} k={k} N={n}: float residual {}", ex.name, float_report.residual)
                })?;
                built += 1;
            }
        }
    }
    ensure(built > 0, || "no exact generators".into())?;
    Ok(format!("{built} periodic points: exact residual 0, float residual <= {FLOAT_RESIDUAL_TOL:e}"))
}

fn random_vector(rng: &mut StdRng) -> FinSeq<BigRational> {
    let len = rng.gen_range(1..=8);
    let entries: Vec<(u64, BigRational)> = (0..len)
        .map(|_| {
            let den: i64 = rng.gen_range(1..=16);
            let num: i64 = rng.gen_range(-10 * den..=10 * den);
            (rng.gen_range(1..=50), BigRational::new(num.into(), den.into()))
        })
        .collect();
    FinSeq::from_entries(entries).expect("indices are positive")
}

fn unrepresentable(e: &Error) -> bool {
    e.is_soft()
}

/// Whether every `W_j` on the support of `x` is a normal `f64`.
fn float_range(ex: &Example, x: &FinSeq<BigRational>, j: u64) -> pseudoshift::Result<bool> {
    for k in x.support() {
        let w = forward_product(&ex.map, &ex.weights, k, j)?;
        if w.is_zero || w.log_magnitude.abs() > F64_LOG_RANGE {
            return Ok(false);
        }
    }
    Ok(true)
}

fn left_inverse() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let (mut checked, mut skipped, mut float_skipped) = (0usize, 0usize, 0usize);
    for ex in catalog::all_examples() {
        for _ in 0..RANDOM_VECTORS {
            let x = random_vector(&mut rng);
            let xf = x.to_f64();
            for j in 1..=10 {
                let exact = s_map(&ex.map, &ex.weights, &x, j)
                    .and_then(|s| apply_operator(&ex.map, &ex.weights, &s, j, SCAN));
                let back = match exact {
                    Ok(v) => v,
                    Err(e) if unrepresentable(&e) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(err(e)),
                };
                ensure(back == x, || format!("{} j={j}: exact left inverse fails", ex.name))?;
                if !float_range(&ex, &x, j).map_err(err)? {
                    float_skipped += 1;
                    checked += 1;
                    continue;
                }
                let back = s_map(&ex.map, &ex.weights, &xf, j)
                    .and_then(|s| apply_operator(&ex.map, &ex.weights, &s, j, SCAN))
                    .map_err(err)?;
                let rel = back.minus(&xf).norm(SpaceSpec::Lp(2.0)) / xf.norm(SpaceSpec::Lp(2.0));
                ensure(rel <= LEFT_INVERSE_TOL, || format!("{} j={j}: float relative error {rel}", ex.name))?;
                checked += 1;
            }
        }
    }
    ensure(checked > 0, || "nothing checked".into())?;
    Ok(format!(
        "{checked} (vector, j) pairs exact, {} also in f64; {skipped} beyond exact range skipped",
        checked - float_skipped
    ))
}

fn product_identities() -> Outcome {
    let (mut checked, mut skipped) = (0usize, 0usize);
    for ex in catalog::all_examples() {
        for k in 1..=20u64 {
            for n in 1..=40u64 {
                let step = || -> pseudoshift::Result<()> {
                    let w_n = forward_product_exact(&ex.map, &ex.weights, k, n)?;
                    let w_next = forward_product_exact(&ex.map, &ex.weights, k, n + 1)?;
                    let w_at = ex.weights.weight_exact(ex.map.iterate(k, n)?)?;
                    if w_next != w_n * w_at {
                        return Err(Error::InvalidArgument(format!("recurrence k={k} n={n}")));
                    }
                    let pre = ex.map.backward_iterate(k, n, SCAN)?;
                    if !pre.hit_sentinel {
                        let b = backward_product_exact(&ex.map, &ex.weights, k, n, SCAN)?;
                        if b != forward_product_exact(&ex.map, &ex.weights, pre.value, n)? {
                            return Err(Error::InvalidArgument(format!("consistency k={k} n={n}")));
                        }
                    } else if !backward_product_exact(&ex.map, &ex.weights, k, n, SCAN)?.is_zero() {
                        return Err(Error::InvalidArgument(format!("sentinel k={k} n={n}")));
                    }
                    Ok(())
                };
                match step() {
                    Ok(()) => checked += 1,
                    Err(e) if unrepresentable(&e) => skipped += 1,
                    Err(e) => return Err(format!("{}: {e}", ex.name)),
                }
            }
        }
    }
    Ok(format!("{checked} (k, n) pairs exact; {skipped} beyond exact range skipped"))
}

fn denseness() -> Outcome {
    let ex = catalog::closing_lp();
    let y: FinSeq<BigRational> = FinSeq::from_entries((1..=5).map(|k| (k, BigRational::from_integer(1.into()))))
        .map_err(err)?;
    let a = approximate_by_periodic(&ex.map, &ex.weights, &y, APPROX_EPS, ex.space, &horizons()).map_err(err)?;
    let mut recomputed = 0.0;
    for i in a.x.support().into_iter().chain(y.support()).collect::<BTreeSet<_>>() {
        let d = (a.x.get(i) - y.get(i)).abs();
        recomputed += num_traits::ToPrimitive::to_f64(&d).unwrap_or(f64::INFINITY).powi(2);
    }
    let recomputed = recomputed.sqrt();
    ensure(recomputed < APPROX_EPS, || format!("||x - y|| = {recomputed}"))?;
    let ring: BTreeSet<u64> = a.components.iter().flat_map(|c| c.ring.iter().copied()).collect();
    let (residual, _) =
        residual_excluding(&ex.map, &ex.weights, &a.x, a.period, ex.space, SCAN, &ring).map_err(err)?;
    ensure(residual == 0.0, || format!("interior residual {residual}"))?;
    Ok(format!("N = {}, ||x - y||_2 = {recomputed:.3e}, interior residual 0", a.period))
}

fn visitation() -> Outcome {
    let ex = catalog::rolewicz(SpaceSpec::Lp(2.0));
    let one = || BigRational::from_integer(1.into());
    let targets = vec![
        FinSeq::unit(1).map_err(err)?,
        FinSeq::from_entries([(1, one()), (2, one())]).map_err(err)?,
        FinSeq::from_entries([(3, BigRational::from_integer(3.into()))]).map_err(err)?,
    ];
    let deltas = vec![VISIT_DELTA; targets.len()];
    let p = construct_hypercyclic_prefix(&ex.map, &ex.weights, &targets, &deltas, ex.space, &horizons())
        .map_err(err)?;
    let mut errors = Vec::new();
    for (y, v) in targets.iter().zip(&p.visits) {
        let e = apply_operator(&ex.map, &ex.weights, &p.x, v.m, SCAN)
            .map_err(err)?
            .minus(y)
            .norm(ex.space);
        ensure(e < VISIT_DELTA, || format!("visit m={} error {e}", v.m))?;
        errors.push(format!("m={} err={e:.3e}", v.m));
    }
    Ok(errors.join(", "))
}

fn log_exact_agreement() -> Outcome {
    let (mut checked, mut skipped) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    let mut compare = |name: &str, log: pseudoshift::Result<f64>, exact: pseudoshift::Result<BigRational>| -> Result<(), String> {
        match (log, exact) {
            (Ok(l), Ok(e)) => {
                if e.is_zero() {
                    ensure(l == f64::NEG_INFINITY, || format!("{name}: zero product has log {l}"))?;
                } else {
                    let x = ratio_ln_abs(&e);
                    let d = (l - x).abs() / x.abs().max(1.0);
                    worst = worst.max(d);
                    ensure(d <= LOG_EXACT_TOL, || format!("{name}: log {l} vs exact {x}"))?;
                }
                checked += 1;
            }
            (Err(e), _) | (_, Err(e)) if unrepresentable(&e) => skipped += 1,
            (Err(e), _) | (_, Err(e)) => return Err(format!("{name}: {e}")),
        }
        Ok(())
    };
    let configs: Vec<(String, SelfMapRule, WeightRule)> = catalog::all_examples()
        .into_iter()
        .map(|e| (e.name.to_string(), e.map, e.weights))
        .collect();
    for (name, map, rule) in &configs {
        for k in 1..=20u64 {
            for n in 1..=60u64 {
                compare(
                    name,
                    forward_product(map, rule, k, n).map(|p| p.log_magnitude),
                    forward_product_exact(map, rule, k, n),
                )?;
                compare(
                    name,
                    backward_product(map, rule, k, n, SCAN).map(|p| if p.is_zero { f64::NEG_INFINITY } else { p.log_magnitude }),
                    backward_product_exact(map, rule, k, n, SCAN),
                )?;
            }
        }
    }
    Ok(format!("{checked} products agree (worst {worst:.1e}); {skipped} beyond exact range skipped"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("structural refutations", structural_refutations),
        ("orbit lemma suite", orbit_lemmas),
        ("criterion classifications", classifications),
        ("periodic-point exactness", periodic_exactness),
        ("left-inverse law", left_inverse),
        ("product identities", product_identities),
        ("denseness construction", denseness),
        ("visitation", visitation),
        ("log-vs-exact agreement", log_exact_agreement),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
