//! Bi-orbits `A_{n,k} = {phi^{in}(k) : i ∈ ℤ} − {0}`, their generators
//! `g_n(k) = min A_{n,k}`, and the partition of an initial segment of ℕ.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::primes;
use crate::selfmap::{BackStep, Chart, ChartKind, ForwardStep, SelfMapRule};

/// `phi` steps walked in each direction before a generator is given up as
/// approximate.
pub const WALK_BUDGET: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitSlice {
    pub base: u64,
    pub stride: u64,
    /// `phi^{in}(k)` for `i = 1..`.
    pub forward: Vec<u64>,
    /// `phi^{-in}(k)` for `i = 1..` while nonzero.
    pub backward: Vec<u64>,
    /// The backward walk ended at a point without preimage.
    pub generator_found: bool,
}

impl OrbitSlice {
    pub fn points(&self) -> impl Iterator<Item = u64> + '_ {
        std::iter::once(self.base)
            .chain(self.forward.iter().copied())
            .chain(self.backward.iter().copied())
    }

    pub fn min(&self) -> u64 {
        self.points().min().unwrap_or(self.base)
    }
}

fn check_args(k: u64, n: u64) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidArgument("k and n must be >= 1".into()));
    }
    Ok(())
}

fn record(seen: &mut HashSet<u64>, start: u64, stride: u64, value: u64) -> Result<()> {
    if seen.insert(value) {
        Ok(())
    } else {
        Err(Error::PeriodicOrbitDetected { start, stride, value })
    }
}

/// Walks `fwd_len` stride steps forward and up to `horizon` stride steps
/// backward (stopping at the sentinel). `horizon` also bounds preimage scans.
/// Both lists end early if a value leaves the 64-bit range.
pub fn bi_orbit(map: &SelfMapRule, k: u64, n: u64, fwd_len: usize, horizon: u64) -> Result<OrbitSlice> {
    slice(map, k, n, fwd_len, horizon as usize, horizon)
}

fn slice(map: &SelfMapRule, k: u64, n: u64, fwd_len: usize, back_len: usize, horizon: u64) -> Result<OrbitSlice> {
    check_args(k, n)?;
    let mut seen = HashSet::from([k]);
    let mut forward = Vec::with_capacity(fwd_len);
    let mut x = k;
    for _ in 0..fwd_len {
        x = match map.iterate(x, n) {
            Ok(v) => v,
            Err(e) if e.is_soft() => break,
            Err(e) => return Err(e),
        };
        record(&mut seen, k, n, x)?;
        forward.push(x);
    }
    let mut backward = Vec::new();
    let mut y = k;
    let mut generator_found = false;
    for _ in 0..back_len {
        let r = match map.backward_iterate(y, n, horizon) {
            Ok(r) => r,
            Err(e) if e.is_soft() => break,
            Err(e) => return Err(e),
        };
        if r.hit_sentinel {
            generator_found = true;
            break;
        }
        y = r.value;
        record(&mut seen, k, n, y)?;
        backward.push(y);
    }
    Ok(OrbitSlice {
        base: k,
        stride: n,
        forward,
        backward,
        generator_found,
    })
}

/// Charts of one map, built on demand.
struct Atlas<'a> {
    map: &'a SelfMapRule,
    natural: Option<Option<Chart>>,
    classes: HashMap<u32, Option<Chart>>,
}

impl<'a> Atlas<'a> {
    fn new(map: &'a SelfMapRule) -> Self {
        Atlas {
            map,
            natural: None,
            classes: HashMap::new(),
        }
    }

    fn chart_at(&mut self, x: u64) -> Result<Option<(&Chart, u64)>> {
        if self.natural.is_none() {
            self.natural = Some(Chart::build(self.map, ChartKind::Natural, &[])?);
        }
        if let Some(Some(chart)) = &self.natural {
            return Ok(Some((chart, x)));
        }
        if !self.map.uses_primes() {
            return Ok(None);
        }
        let Ok(loc) = primes::global().locate(x) else { return Ok(None) };
        if !self.classes.contains_key(&loc.class) {
            let chart = Chart::build(self.map, ChartKind::PrimeClass(loc.class), &[])?;
            self.classes.insert(loc.class, chart);
        }
        Ok(self.classes[&loc.class].as_ref().map(|c| (c, loc.pos)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Goal {
    /// Certify that no later point undercuts the running minimum.
    Min,
    /// Certify that no later point is `<= bound`.
    Above(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum End {
    Sentinel,
    Certified,
    Truncated,
}

struct DirWalk {
    points: Vec<u64>,
    end: End,
}

impl DirWalk {
    fn complete(&self) -> bool {
        self.end != End::Truncated
    }
}

fn checkpoint(t: usize) -> bool {
    t < 4 || t.is_power_of_two()
}

struct Walker<'a> {
    map: &'a SelfMapRule,
    atlas: Atlas<'a>,
    horizon: u64,
}

impl<'a> Walker<'a> {
    fn new(map: &'a SelfMapRule, horizon: u64) -> Self {
        Walker {
            map,
            atlas: Atlas::new(map),
            horizon,
        }
    }

    /// Stride points of one direction, until the sentinel, a chart
    /// certificate for `goal`, or the budget.
    fn walk(&mut self, k: u64, n: u64, forward: bool, goal: Goal, seen: &mut HashSet<u64>) -> Result<DirWalk> {
        let mut points = Vec::new();
        let mut low = k;
        let mut x = k;
        let mut t = 0usize;
        loop {
            let needed = match goal {
                Goal::Min => low,
                Goal::Above(b) => b.saturating_add(1),
            };
            if checkpoint(t) {
                if let Some((chart, c)) = self.atlas.chart_at(x)? {
                    let drift = if forward { chart.forward_drift(c) } else { chart.backward_drift(c) };
                    if let Some(d) = drift {
                        if d.terminal {
                            let values: Option<Vec<u64>> =
                                d.coords[1..].iter().map(|&c| chart.kind.value(c).ok()).collect();
                            if let Some(values) = values {
                                for (j, v) in values.into_iter().enumerate() {
                                    if ((t + j + 1) as u64).is_multiple_of(n) {
                                        record(seen, k, n, v)?;
                                        points.push(v);
                                    }
                                }
                                return Ok(DirWalk { points, end: End::Sentinel });
                            }
                        } else if chart.kind.value_floor(d.min_coord()) >= needed {
                            return Ok(DirWalk { points, end: End::Certified });
                        }
                    }
                }
            }
            if t >= WALK_BUDGET {
                return Ok(DirWalk { points, end: End::Truncated });
            }
            let next = if forward {
                self.map.apply(x)
            } else {
                self.map.backward_iterate(x, 1, self.horizon).map(|r| r.value)
            };
            x = match next {
                Ok(0) => return Ok(DirWalk { points, end: End::Sentinel }),
                Ok(v) => v,
                Err(e) if e.is_soft() => {
                    let end = self.coordinate_walk(x, t, k, n, forward, goal, low, &mut points, seen)?;
                    return Ok(DirWalk { points, end });
                }
                Err(e) => return Err(e),
            };
            t += 1;
            if (t as u64).is_multiple_of(n) {
                record(seen, k, n, x)?;
                points.push(x);
                low = low.min(x);
            }
        }
    }

    /// Continues a walk whose next value left `u64` by stepping chart
    /// coordinates from `x` instead.
    #[allow(clippy::too_many_arguments)]
    fn coordinate_walk(
        &mut self,
        x: u64,
        mut t: usize,
        k: u64,
        n: u64,
        forward: bool,
        goal: Goal,
        mut low: u64,
        points: &mut Vec<u64>,
        seen: &mut HashSet<u64>,
    ) -> Result<End> {
        let Some((chart, mut c)) = self.atlas.chart_at(x)? else { return Ok(End::Truncated) };
        let chart = chart.clone();
        while t < WALK_BUDGET {
            c = if forward {
                match chart.step_forward(c) {
                    ForwardStep::To(next) => next,
                    ForwardStep::Leaves => return Ok(End::Truncated),
                }
            } else {
                match chart.step_backward(c) {
                    BackStep::From(prev) => prev,
                    BackStep::Sentinel => return Ok(End::Sentinel),
                    _ => return Ok(End::Truncated),
                }
            };
            t += 1;
            if (t as u64).is_multiple_of(n) {
                match chart.kind.value(c) {
                    Ok(v) => {
                        record(seen, k, n, v)?;
                        points.push(v);
                        low = low.min(v);
                    }
                    Err(e) if e.is_soft() => {}
                    Err(e) => return Err(e),
                }
            }
            if checkpoint(t) {
                let needed = match goal {
                    Goal::Min => low,
                    Goal::Above(b) => b.saturating_add(1),
                };
                let drift = if forward { chart.forward_drift(c) } else { chart.backward_drift(c) };
                if drift.is_some_and(|d| !d.terminal && chart.kind.value_floor(d.min_coord()) >= needed) {
                    return Ok(End::Certified);
                }
            }
        }
        Ok(End::Truncated)
    }

    fn generator(&mut self, k: u64, n: u64) -> Result<GenWalk> {
        check_args(k, n)?;
        let mut seen = HashSet::from([k]);
        let fwd = self.walk(k, n, true, Goal::Min, &mut seen)?;
        let back = self.walk(k, n, false, Goal::Min, &mut seen)?;
        let g = fwd.points.iter().chain(&back.points).copied().fold(k, u64::min);
        let exact = fwd.complete() && back.complete();
        Ok(GenWalk { g, exact, fwd, back })
    }

    /// Whether `B_{n,k}` provably avoids `f`; `None` if not decidable here.
    fn avoids(&mut self, k: u64, n: u64, f: &BTreeSet<u64>) -> Result<Option<bool>> {
        let bound = *f.iter().next_back().expect("nonempty");
        let mut seen = HashSet::from([k]);
        let mut certain = true;
        for forward in [true, false] {
            let w = self.walk(k, n, forward, Goal::Above(bound), &mut seen)?;
            if w.points.iter().any(|p| f.contains(p)) {
                return Ok(Some(false));
            }
            certain &= w.complete();
        }
        Ok(certain.then_some(true))
    }
}

struct GenWalk {
    g: u64,
    exact: bool,
    fwd: DirWalk,
    back: DirWalk,
}

impl GenWalk {
    fn points(&self) -> impl Iterator<Item = u64> + '_ {
        self.fwd.points.iter().chain(&self.back.points).copied()
    }
}

/// `g_n(k)` and whether the minimum is certified over the whole bi-orbit.
pub fn generator(map: &SelfMapRule, k: u64, n: u64, horizon: u64) -> Result<(u64, bool)> {
    let w = Walker::new(map, horizon).generator(k, n)?;
    Ok((w.g, w.exact))
}

/// `G_n` restricted to `k <= cover`: each generator with its exactness.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct GeneratorSet {
    pub generators: BTreeMap<u64, bool>,
}

impl GeneratorSet {
    pub fn values(&self) -> BTreeSet<u64> {
        self.generators.keys().copied().collect()
    }

    pub fn all_exact(&self) -> bool {
        self.generators.values().all(|&e| e)
    }

    pub fn exact_values(&self) -> BTreeSet<u64> {
        self.generators.iter().filter(|(_, e)| **e).map(|(g, _)| *g).collect()
    }
}

pub fn generator_set(map: &SelfMapRule, n: u64, cover: u64, horizon: u64) -> Result<GeneratorSet> {
    Ok(partition(map, n, cover, horizon)?
        .into_iter()
        .fold(GeneratorSet::default(), |mut acc, g| {
            acc.generators.insert(g.generator, g.exact);
            acc
        }))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct OrbitGroup {
    pub generator: u64,
    /// Every member's generator was certified.
    pub exact: bool,
    pub members: Vec<u64>,
}

/// Groups `1..=cover` by `g_n`. Every walked orbit point inside the cover is
/// cross-checked against the group of the walk's start.
pub fn partition(map: &SelfMapRule, n: u64, cover: u64, horizon: u64) -> Result<Vec<OrbitGroup>> {
    if n == 0 || cover == 0 {
        return Err(Error::InvalidArgument("n and cover must be >= 1".into()));
    }
    let mut walker = Walker::new(map, horizon);
    let mut owner: Vec<u64> = vec![0; cover as usize + 1];
    let mut groups: BTreeMap<u64, OrbitGroup> = BTreeMap::new();
    for k in 1..=cover {
        let w = walker.generator(k, n)?;
        for p in std::iter::once(k).chain(w.points()).chain(std::iter::once(w.g)) {
            if p > cover {
                continue;
            }
            let slot = &mut owner[p as usize];
            if *slot == 0 {
                *slot = w.g;
            } else if *slot != w.g {
                return Err(Error::PartitionViolation {
                    index: p,
                    first: (*slot).min(w.g),
                    second: (*slot).max(w.g),
                });
            }
        }
        let group = groups.entry(w.g).or_insert(OrbitGroup {
            generator: w.g,
            exact: true,
            members: Vec::new(),
        });
        group.exact &= w.exact;
        group.members.push(k);
    }
    Ok(groups.into_values().collect())
}

/// Checks `A_k = ⊔_{i<n} A_{n,phi^i(k)}` on the exponent window `[-b, f]`
/// walked for `A_k`, with `f, b <= sample_len`.
pub fn orbit_refinement_check(map: &SelfMapRule, k: u64, n: u64, sample_len: usize, horizon: u64) -> Result<bool> {
    check_args(k, n)?;
    let whole = slice(map, k, 1, sample_len, sample_len, horizon)?;
    let f = whole.forward.len() as i64;
    let b = whole.backward.len() as i64;
    let at = |e: i64| -> u64 {
        match e {
            0 => k,
            e if e > 0 => whole.forward[e as usize - 1],
            e => whole.backward[(-e) as usize - 1],
        }
    };
    let expected: BTreeSet<u64> = (-b..=f).map(at).collect();
    let mut union = BTreeSet::new();
    let stride = n as i64;
    for i in 0..stride.min(f + 1) {
        let start = at(i);
        let fwd_len = ((f - i) / stride) as usize;
        let back_len = ((i + b) / stride) as usize;
        let part = slice(map, start, n, fwd_len, back_len, horizon)?;
        if part.backward.len() < back_len && !whole.generator_found {
            return Ok(false);
        }
        for p in part.points() {
            if !union.insert(p) {
                return Ok(false);
            }
        }
    }
    if stride > f + 1 {
        // Residues past the forward window start behind k.
        for i in (f + 1)..stride {
            let e = i - stride;
            if e < -b {
                continue;
            }
            let start = at(e);
            let back_len = ((e + b) / stride) as usize;
            let part = slice(map, start, n, 0, back_len, horizon)?;
            for p in part.points() {
                if !union.insert(p) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(union == expected)
}

/// Least `N <= n_max` such that `B_{n,k} ∩ F = ∅` is certified for every
/// `N < n <= n_max`.
pub fn escape_threshold(map: &SelfMapRule, k: u64, f: &BTreeSet<u64>, n_max: u64, horizon: u64) -> Result<u64> {
    check_args(k, n_max)?;
    if f.is_empty() {
        return Err(Error::InvalidArgument("F must be nonempty".into()));
    }
    let mut walker = Walker::new(map, horizon);
    let mut threshold = n_max;
    for n in (1..=n_max).rev() {
        if walker.avoids(k, n, f)? == Some(true) {
            threshold = n - 1;
        } else {
            break;
        }
    }
    if threshold == n_max {
        return Err(Error::EscapeNotFound { k, n_max });
    }
    Ok(threshold)
}

/// Graphviz rendering of the forward chains of `starts`, `len` steps each.
pub fn orbit_dot(map: &SelfMapRule, starts: &[u64], len: usize) -> Result<String> {
    let mut edges = BTreeSet::new();
    for &s in starts {
        let mut x = s;
        for _ in 0..len {
            let y = map.apply(x)?;
            if !edges.insert((x, y)) {
                break;
            }
            x = y;
        }
    }
    let mut out = String::from("digraph orbits {\n");
    for (a, b) in edges {
        let _ = writeln!(out, "  {a} -> {b};");
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    /// Generator by brute force: walk both ways within `len` steps.
    fn brute_generator(map: &SelfMapRule, k: u64, n: u64, len: usize) -> u64 {
        let s = slice(map, k, n, len, len, 100_000).unwrap();
        s.min()
    }

    #[test]
    fn bi_orbit_examples() {
        let s = bi_orbit(&catalog::successor(), 5, 1, 3, 100).unwrap();
        assert_eq!(s.backward, vec![4, 3, 2, 1]);
        assert_eq!(s.forward, vec![6, 7, 8]);
        assert!(s.generator_found);
        let s = bi_orbit(&catalog::single_orbit_map(), 1, 1, 3, 200).unwrap();
        assert!(!s.generator_found);
        assert_eq!(s.backward.len(), 200);
        assert!(matches!(
            bi_orbit(&catalog::first_example_map(), 1, 1, 10, 100),
            Err(Error::PeriodicOrbitDetected { start: 1, .. })
        ));
        assert!(bi_orbit(&catalog::successor(), 0, 1, 3, 100).is_err());
    }

    #[test]
    fn generator_examples() {
        for k in 1..40 {
            assert_eq!(generator(&catalog::successor(), k, 1, 1000).unwrap(), (1, true));
        }
        assert_eq!(generator(&catalog::two_orbit_map(), 7, 1, 1000).unwrap(), (2, true));
        assert_eq!(generator(&catalog::prime_chain_map(), 8, 1, 1000).unwrap(), (2, true));
        assert_eq!(generator(&catalog::single_orbit_map(), 11, 1, 1000).unwrap(), (1, true));
        assert_eq!(generator(&catalog::prime_triple_map(), 5, 1, 1000).unwrap(), (5, true));
    }

    #[test]
    fn generators_agree_with_brute_force() {
        for (name, map) in catalog::all_maps().into_iter().skip(1) {
            for n in 1..4 {
                for k in 1..60 {
                    let (g, exact) = generator(&map, k, n, 10_000).unwrap();
                    assert!(exact, "{name} k={k} n={n}");
                    assert_eq!(g, brute_generator(&map, k, n, 300), "{name} k={k} n={n}");
                }
            }
        }
    }

    #[test]
    fn generator_set_examples() {
        let s = generator_set(&catalog::successor(), 1, 100, 1000).unwrap();
        assert_eq!(s.values(), BTreeSet::from([1]));
        assert!(s.all_exact());
        let p = generator_set(&catalog::prime_chain_map(), 1, 30, 1000).unwrap();
        assert_eq!(
            p.values(),
            BTreeSet::from([1, 2, 3, 5, 7, 11, 13, 17, 19, 23, 29])
        );
        let s2 = generator_set(&catalog::successor(), 2, 100, 1000).unwrap();
        assert_eq!(s2.values(), BTreeSet::from([1, 2]));
    }

    #[test]
    fn partition_examples() {
        let p = partition(&catalog::successor(), 1, 50, 1000).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].members, (1..=50).collect::<Vec<_>>());
        let p = partition(&catalog::two_orbit_map(), 1, 50, 1000).unwrap();
        assert_eq!(p.iter().map(|g| g.generator).collect::<Vec<_>>(), vec![1, 2]);
        let first: Vec<u64> = (1..=50).filter(|&x| x == 1 || (x >= 5 && x % 5 <= 1)).collect();
        assert_eq!(p[0].members, first);
        let p = partition(&catalog::successor(), 3, 30, 1000).unwrap();
        assert_eq!(p.len(), 3);
        for g in &p {
            assert!(g.members.iter().all(|m| m % 3 == g.generator % 3));
        }
    }

    #[test]
    fn refinement_examples() {
        assert!(orbit_refinement_check(&catalog::successor(), 1, 2, 50, 1000).unwrap());
        assert!(orbit_refinement_check(&catalog::single_orbit_map(), 1, 3, 60, 1000).unwrap());
        for (_, map) in catalog::all_maps().into_iter().skip(1) {
            for n in 1..5 {
                for k in [1, 2, 7, 20] {
                    assert!(orbit_refinement_check(&map, k, n, 50, 10_000).unwrap());
                }
            }
        }
    }

    #[test]
    fn escape_examples() {
        let f: BTreeSet<u64> = (1..=10).collect();
        assert_eq!(escape_threshold(&catalog::successor(), 3, &f, 20, 1000).unwrap(), 7);
        let n = escape_threshold(&catalog::single_orbit_map(), 2, &f, 40, 1000).unwrap();
        for m in n + 1..=40 {
            let s = slice(&catalog::single_orbit_map(), 2, m, 200, 200, 1000).unwrap();
            assert!(s.forward.iter().chain(&s.backward).all(|p| !f.contains(p)), "n={m}");
        }
        let odd = BTreeSet::from([3]);
        assert_eq!(escape_threshold(&catalog::prime_chain_map(), 2, &odd, 5, 1000).unwrap(), 0);
    }

    #[test]
    fn dot_output() {
        let d = orbit_dot(&catalog::successor(), &[1], 2).unwrap();
        assert_eq!(d, "digraph orbits {\n  1 -> 2;\n  2 -> 3;\n}\n");
    }
}
