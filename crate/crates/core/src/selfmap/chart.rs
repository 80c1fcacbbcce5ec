//! Translation charts: a coordinate system on (part of) ℕ in which the map
//! acts as `c ↦ c + step(c mod M)` for every `c >= T`.
//!
//! On the natural chart the coordinate is `n` itself and every non-set
//! clause must be a unit-slope affine map. On the chart of a prime class
//! `P_i` the coordinate is the position `j` of `n = P_i(j)` and every
//! non-set clause must be a prime shift. Points below `T` are evaluated
//! directly and kept as an explicit exception table.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_integer::Integer;

use super::{MapExpr, SelfMapRule};
use crate::error::{Error, Result};
use crate::guard::{ClassSelector, Guard};
use crate::primes;
use crate::verdict::Evidence;

const MAX_MODULUS: u64 = 1 << 16;
const MAX_THRESHOLD: u64 = 1 << 16;
const APERIODIC_WALK: usize = 100_000;
const FALLING_WALK: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    Natural,
    PrimeClass(u32),
}

impl ChartKind {
    /// The integer at coordinate `c`.
    pub fn value(self, c: u64) -> Result<u64> {
        match self {
            ChartKind::Natural => Ok(c),
            ChartKind::PrimeClass(i) => primes::global().element(i, c),
        }
    }

    /// A lower bound for [`ChartKind::value`] that never fails.
    pub fn value_floor(self, c: u64) -> u64 {
        match self {
            ChartKind::Natural => c,
            ChartKind::PrimeClass(i) => primes::global().element_floor(i, c),
        }
    }

    /// Coordinate of `n`, or `None` if `n` lies outside this chart.
    pub fn coordinate(self, n: u64) -> Result<Option<u64>> {
        match self {
            ChartKind::Natural => Ok(Some(n)),
            ChartKind::PrimeClass(i) => {
                let loc = primes::global().locate(n)?;
                Ok((loc.class == i).then_some(loc.pos))
            }
        }
    }

    /// Smallest coordinate whose value is at least `min`.
    fn first_at_least(self, min: u64) -> Option<u64> {
        (1..=MAX_THRESHOLD).find(|&c| self.value_floor(c) >= min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForwardStep {
    To(u64),
    /// The image lies in another chart.
    Leaves,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackStep {
    From(u64),
    /// The only preimage lies in another chart; its value is given.
    Leaves(u64),
    Sentinel,
    /// Two or more preimages (coordinates in this chart, then foreign values).
    Ambiguous(Vec<u64>, Vec<u64>),
}

/// A certified coordinate path: `coords[t + L] = coords[t] + shift` for
/// `t >= preperiod`, where `L = coords.len() - preperiod`. A terminal path
/// ends at a coordinate with no preimage instead.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Drift {
    pub coords: Vec<u64>,
    pub preperiod: usize,
    pub shift: u64,
    pub terminal: bool,
}

impl Drift {
    pub fn cycle_len(&self) -> usize {
        self.coords.len() - self.preperiod
    }

    fn after(mut self, mut lead: Vec<u64>) -> Drift {
        self.preperiod += lead.len();
        lead.append(&mut self.coords);
        self.coords = lead;
        self
    }

    pub fn min_coord(&self) -> u64 {
        self.coords.iter().copied().min().unwrap_or(0)
    }

    /// Coordinate after `t` steps, or `None` past the end of a terminal path.
    pub fn coord_at(&self, t: usize) -> Option<u64> {
        if t < self.coords.len() {
            return Some(self.coords[t]);
        }
        if self.terminal {
            return None;
        }
        let l = self.cycle_len();
        let q = ((t - self.preperiod) / l) as u64;
        let base = self.coords[self.preperiod + (t - self.preperiod) % l];
        base.checked_add(q.checked_mul(self.shift)?)
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub kind: ChartKind,
    pub modulus: u64,
    pub threshold: u64,
    steps: Vec<i64>,
    back: Vec<Vec<u64>>,
    /// `low[c - 1]` is the image of the exceptional coordinate `c < T`.
    low: Vec<ForwardStep>,
    incoming: BTreeMap<u64, Vec<u64>>,
    foreign: BTreeMap<u64, Vec<u64>>,
    ceiling: u64,
}

fn is_unit_affine(e: &MapExpr) -> bool {
    matches!(e, MapExpr::Affine { a: 1, .. })
}

fn expr_step(e: &MapExpr) -> i64 {
    match *e {
        MapExpr::Affine { b, .. } => b,
        MapExpr::PrimeShift { delta } => delta,
        MapExpr::Value(_) => unreachable!("value clauses are never translations"),
    }
}

impl Chart {
    /// Builds the chart of `kind` for `map`; `extra` guards (from a weight
    /// rule, say) are folded into the modulus and threshold so that they
    /// are constant on residue classes as well.
    pub fn build(map: &SelfMapRule, kind: ChartKind, extra: &[&Guard]) -> Result<Option<Chart>> {
        let mut modulus = 1u64;
        let mut threshold = 1u64;
        let clauses = map.clauses.iter().map(|c| (&c.guard, Some(&c.expr)));
        for (guard, expr) in clauses.chain(extra.iter().map(|g| (*g, None))) {
            match (kind, guard) {
                (_, Guard::Set(members)) => {
                    for &m in members {
                        match kind.coordinate(m) {
                            Ok(Some(c)) => threshold = threshold.max(c + 1),
                            Ok(None) => {}
                            Err(_) => return Ok(None),
                        }
                    }
                }
                (ChartKind::Natural, Guard::Residue(g)) => {
                    if expr.is_some_and(|e| !is_unit_affine(e)) {
                        return Ok(None);
                    }
                    modulus = modulus.lcm(&g.modulus);
                    threshold = threshold.max(g.min);
                }
                (ChartKind::Natural, Guard::PrimePos(_)) => return Ok(None),
                (ChartKind::PrimeClass(_), Guard::Residue(g)) => {
                    if g.modulus != 1
                        || expr.is_some_and(|e| !matches!(e, MapExpr::PrimeShift { .. }))
                    {
                        return Ok(None);
                    }
                    match kind.first_at_least(g.min) {
                        Some(c) => threshold = threshold.max(c),
                        None => return Ok(None),
                    }
                }
                (ChartKind::PrimeClass(i), Guard::PrimePos(g)) => {
                    if expr.is_some_and(|e| !matches!(e, MapExpr::PrimeShift { .. })) {
                        return Ok(None);
                    }
                    if g.i.admits(i) {
                        modulus = modulus.lcm(&g.pos_mod);
                        threshold = threshold.max(g.pos_min);
                    }
                }
            }
            if modulus > MAX_MODULUS || threshold > MAX_THRESHOLD {
                return Ok(None);
            }
        }
        let default_ok = match kind {
            ChartKind::Natural => is_unit_affine(&map.default),
            ChartKind::PrimeClass(_) => matches!(map.default, MapExpr::PrimeShift { .. }),
        };
        if !default_ok {
            return Ok(None);
        }

        let mut chart = Chart {
            kind,
            modulus,
            threshold,
            steps: Vec::with_capacity(modulus as usize),
            back: vec![Vec::new(); modulus as usize],
            low: Vec::new(),
            incoming: BTreeMap::new(),
            foreign: BTreeMap::new(),
            ceiling: 0,
        };
        for r in 0..modulus {
            let expr = map
                .clauses
                .iter()
                .find(|c| chart.guard_holds(&c.guard, r))
                .map_or(&map.default, |c| &c.expr);
            chart.steps.push(expr_step(expr));
        }
        for r in 0..modulus {
            let image = (r as i128 + chart.steps[r as usize] as i128).rem_euclid(modulus as i128);
            chart.back[image as usize].push(r);
        }

        for c in 1..threshold {
            let Ok(v) = kind.value(c) else { return Ok(None) };
            let image = match map.apply(v) {
                Ok(image) => image,
                Err(Error::MalformedRule(m)) => return Err(Error::MalformedRule(m)),
                Err(_) => return Ok(None),
            };
            match kind.coordinate(image) {
                Ok(Some(ic)) => {
                    chart.low.push(ForwardStep::To(ic));
                    chart.incoming.entry(ic).or_default().push(c);
                }
                Ok(None) => chart.low.push(ForwardStep::Leaves),
                Err(_) => return Ok(None),
            }
        }
        if let ChartKind::PrimeClass(_) = kind {
            for clause in &map.clauses {
                let Guard::Set(members) = &clause.guard else { continue };
                for &m in members {
                    if matches!(kind.coordinate(m), Ok(Some(_))) {
                        continue;
                    }
                    let Ok(image) = map.apply(m) else { return Ok(None) };
                    match kind.coordinate(image) {
                        Ok(Some(ic)) => {
                            let sources = chart.foreign.entry(ic).or_default();
                            if !sources.contains(&m) {
                                sources.push(m);
                            }
                        }
                        Ok(None) => {}
                        Err(_) => return Ok(None),
                    }
                }
            }
        }
        chart.ceiling = chart
            .incoming
            .keys()
            .chain(chart.foreign.keys())
            .copied()
            .max()
            .unwrap_or(0);
        Ok(Some(chart))
    }

    /// The natural chart if it exists, else the prime-class chart holding `n`.
    /// Returns the chart with the coordinate of `n`.
    pub fn around(map: &SelfMapRule, n: u64, extra: &[&Guard]) -> Result<Option<(Chart, u64)>> {
        if let Some(chart) = Chart::build(map, ChartKind::Natural, extra)? {
            return Ok(Some((chart, n)));
        }
        let Ok(loc) = primes::global().locate(n) else { return Ok(None) };
        Ok(Chart::build(map, ChartKind::PrimeClass(loc.class), extra)?.map(|c| (c, loc.pos)))
    }

    /// Whether `guard` holds at every coordinate `c >= T` with `c ≡ residue`.
    pub fn guard_holds(&self, guard: &Guard, residue: u64) -> bool {
        match (self.kind, guard) {
            (_, Guard::Set(_)) => false,
            (ChartKind::Natural, Guard::Residue(g)) => residue % g.modulus == g.rem % g.modulus,
            (ChartKind::Natural, Guard::PrimePos(_)) => false,
            (ChartKind::PrimeClass(_), Guard::Residue(_)) => true,
            (ChartKind::PrimeClass(i), Guard::PrimePos(g)) => {
                g.i.admits(i) && residue % g.pos_mod == g.pos_rem % g.pos_mod
            }
        }
    }

    pub fn step(&self, residue: u64) -> i64 {
        self.steps[residue as usize]
    }

    /// Largest coordinate reached by an exceptional point or a foreign point.
    pub fn ceiling(&self) -> u64 {
        self.ceiling
    }

    pub fn step_forward(&self, c: u64) -> ForwardStep {
        if c < self.threshold {
            return self.low[c as usize - 1];
        }
        let next = c as i128 + self.steps[(c % self.modulus) as usize] as i128;
        ForwardStep::To(next as u64)
    }

    fn regime_preimages(&self, c: u64) -> Vec<u64> {
        self.back[(c % self.modulus) as usize]
            .iter()
            .filter_map(|&r| {
                let pre = c as i128 - self.steps[r as usize] as i128;
                (pre >= self.threshold as i128).then_some(pre as u64)
            })
            .collect()
    }

    pub fn step_backward(&self, c: u64) -> BackStep {
        let mut inside = self.regime_preimages(c);
        if let Some(low) = self.incoming.get(&c) {
            inside.extend(low);
        }
        let outside = self.foreign.get(&c).cloned().unwrap_or_default();
        match (inside.len(), outside.len()) {
            (0, 0) => BackStep::Sentinel,
            (1, 0) => BackStep::From(inside[0]),
            (0, 1) => BackStep::Leaves(outside[0]),
            _ => BackStep::Ambiguous(inside, outside),
        }
    }

    /// Residue path of the forward orbit from `c0`, certified to stay in the
    /// regime and to grow by `shift > 0` per cycle.
    pub fn forward_drift(&self, c0: u64) -> Option<Drift> {
        if c0 < self.threshold {
            return None;
        }
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut c = c0 as i128;
        loop {
            let r = c as u64 % self.modulus;
            if let Some(&p) = seen.get(&r) {
                let shift = c - coords[p] as i128;
                if shift <= 0 {
                    return None;
                }
                return Some(Drift {
                    coords,
                    preperiod: p,
                    shift: shift as u64,
                    terminal: false,
                });
            }
            seen.insert(r, coords.len());
            coords.push(c as u64);
            c += self.steps[r as usize] as i128;
            if c < self.threshold as i128 || c > (u64::MAX / 4) as i128 {
                return None;
            }
        }
    }

    /// Residue path of the backward orbit from `c0`: either it provably ends
    /// at a point without preimage, or it grows by `shift > 0` per cycle.
    pub fn backward_drift(&self, c0: u64) -> Option<Drift> {
        let floor = self.threshold.max(self.ceiling + 1);
        if c0 < floor {
            return None;
        }
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut coords = Vec::new();
        let mut c = c0 as i128;
        // Once a shrinking residue cycle is found the path can only fall out
        // of the regime, so it is walked to its end.
        let mut falling = false;
        loop {
            let r = c as u64 % self.modulus;
            if !falling {
                if let Some(&p) = seen.get(&r) {
                    let shift = c - coords[p] as i128;
                    if shift == 0 {
                        return None;
                    }
                    if shift > 0 {
                        return Some(Drift {
                            coords,
                            preperiod: p,
                            shift: shift as u64,
                            terminal: false,
                        });
                    }
                    falling = true;
                } else {
                    seen.insert(r, coords.len());
                }
            }
            if coords.len() >= FALLING_WALK {
                return None;
            }
            coords.push(c as u64);
            let terminal = || Drift {
                preperiod: coords.len(),
                coords: coords.clone(),
                shift: 0,
                terminal: true,
            };
            match self.back[r as usize].as_slice() {
                [] => return Some(terminal()),
                [r_prev] => {
                    let pre = c - self.steps[*r_prev as usize] as i128;
                    if pre < self.threshold as i128 {
                        return Some(terminal());
                    }
                    if pre < floor as i128 || pre > (u64::MAX / 4) as i128 {
                        return None;
                    }
                    c = pre;
                }
                _ => return None,
            }
        }
    }

    /// [`Chart::forward_drift`] after stepping through exceptional
    /// coordinates first.
    pub fn forward_path(&self, c0: u64) -> Option<Drift> {
        let mut lead = Vec::new();
        let mut c = c0;
        loop {
            if let Some(d) = self.forward_drift(c) {
                return Some(d.after(lead));
            }
            if lead.len() as u64 > self.threshold.max(self.ceiling) + self.modulus {
                return None;
            }
            lead.push(c);
            c = match self.step_forward(c) {
                ForwardStep::To(next) => next,
                ForwardStep::Leaves => return None,
            };
        }
    }

    /// [`Chart::backward_drift`] after stepping through exceptional
    /// coordinates first.
    pub fn backward_path(&self, c0: u64) -> Option<Drift> {
        let mut lead = Vec::new();
        let mut c = c0;
        loop {
            if let Some(d) = self.backward_drift(c) {
                return Some(d.after(lead));
            }
            if lead.len() as u64 > self.threshold.max(self.ceiling) + self.modulus {
                return None;
            }
            lead.push(c);
            c = match self.step_backward(c) {
                BackStep::From(prev) => prev,
                BackStep::Sentinel => {
                    return Some(Drift {
                        preperiod: lead.len(),
                        coords: lead,
                        shift: 0,
                        terminal: true,
                    })
                }
                _ => return None,
            };
        }
    }

    fn residue_permutation(&self) -> std::result::Result<(), (u64, u64)> {
        for targets in &self.back {
            if targets.len() > 1 {
                return Err((targets[0], targets[1]));
            }
        }
        Ok(())
    }

    /// Two regime points with distinct residues `r1, r2` but equal images.
    fn collision_from_residues(&self, r1: u64, r2: u64) -> Option<(u64, u64)> {
        let (s1, s2) = (self.steps[r1 as usize] as i128, self.steps[r2 as usize] as i128);
        let m = self.modulus as i128;
        let t = self.threshold as i128;
        let mut c1 = r1 as i128 + ((t - r1 as i128).max(0) + m - 1) / m * m;
        let mut c2 = c1 + s1 - s2;
        while c2 < t {
            c1 += m;
            c2 += m;
        }
        Some((u64::try_from(c1).ok()?, u64::try_from(c2).ok()?))
    }

    fn no_balanced_cycle(&self) -> bool {
        let m = self.modulus as usize;
        let mut state = vec![0u8; m];
        for start in 0..m {
            if state[start] != 0 {
                continue;
            }
            let mut stack = Vec::new();
            let mut r = start;
            while state[r] == 0 {
                state[r] = 1;
                stack.push(r);
                r = (r as i128 + self.steps[r] as i128).rem_euclid(m as i128) as usize;
            }
            if state[r] == 1 {
                let from = stack.iter().position(|&x| x == r).unwrap();
                let drift: i128 = stack[from..].iter().map(|&x| self.steps[x] as i128).sum();
                if drift == 0 {
                    return false;
                }
            }
            for x in stack {
                state[x] = 2;
            }
        }
        true
    }
}

/// Charts covering every point of ℕ, or `None` if the map is not
/// translation-like. Prime classes that behave alike are represented by a
/// single chart.
fn covering_charts(map: &SelfMapRule) -> Result<Option<Vec<Chart>>> {
    if let Some(chart) = Chart::build(map, ChartKind::Natural, &[])? {
        return Ok(Some(vec![chart]));
    }
    if !map.uses_primes() {
        return Ok(None);
    }
    let table = primes::global();
    let mut classes: BTreeSet<u32> = BTreeSet::from([0]);
    let mut floor_value = 0u64;
    for clause in &map.clauses {
        match &clause.guard {
            Guard::Set(members) => {
                for &m in members {
                    let Ok(loc) = table.locate(m) else { return Ok(None) };
                    classes.insert(loc.class);
                    let Ok(image) = map.apply(m) else { return Ok(None) };
                    let Ok(loc) = table.locate(image) else { return Ok(None) };
                    classes.insert(loc.class);
                }
            }
            Guard::Residue(g) => floor_value = floor_value.max(g.min),
            Guard::PrimePos(g) => {
                if let ClassSelector::Class(i) = g.i {
                    classes.insert(i);
                }
            }
        }
    }
    // Classes whose primes fall below a residue guard's minimum see the
    // guard switch on at a class-specific position.
    let mut generic = 1u32;
    loop {
        let Ok(p) = table.prime(generic) else { return Ok(None) };
        if p < floor_value {
            classes.insert(generic);
        } else if !classes.contains(&generic) {
            break;
        }
        generic += 1;
    }
    classes.insert(generic);
    let mut charts = Vec::new();
    for class in classes {
        match Chart::build(map, ChartKind::PrimeClass(class), &[])? {
            Some(chart) => charts.push(chart),
            None => return Ok(None),
        }
    }
    Ok(Some(charts))
}

fn symbolic_note(charts: &[Chart], text: &str) -> Evidence {
    Evidence::Symbolic {
        modulus: charts.iter().map(|c| c.modulus).max().unwrap_or(1),
        threshold: charts.iter().map(|c| c.threshold).max().unwrap_or(1),
        note: text.into(),
    }
}

/// `Some(Ok(evidence))` when injectivity holds on all of ℕ, `Some(Err(w))`
/// with a verified collision, `None` when no chart argument applies.
pub(super) fn symbolic_injectivity(
    map: &SelfMapRule,
) -> Result<Option<std::result::Result<Evidence, (u64, u64, u64)>>> {
    let Some(charts) = covering_charts(map)? else { return Ok(None) };
    for chart in &charts {
        if let Err((r1, r2)) = chart.residue_permutation() {
            let Some((c1, c2)) = chart.collision_from_residues(r1, r2) else {
                return Ok(None);
            };
            let (Ok(v1), Ok(v2)) = (chart.kind.value(c1), chart.kind.value(c2)) else {
                return Ok(None);
            };
            let image = map.apply(v1)?;
            if v1 != v2 && map.apply(v2)? == image {
                return Ok(Some(Err((v1.min(v2), v1.max(v2), image))));
            }
            return Ok(None);
        }
        let targets: BTreeSet<u64> = chart
            .incoming
            .keys()
            .chain(chart.foreign.keys())
            .copied()
            .collect();
        for target in targets {
            if let BackStep::Ambiguous(inside, outside) = chart.step_backward(target) {
                let mut values = outside;
                for c in inside {
                    let Ok(v) = chart.kind.value(c) else { return Ok(None) };
                    values.push(v);
                }
                values.sort_unstable();
                let image = chart.kind.value(target)?;
                if map.apply(values[0])? == image && map.apply(values[1])? == image {
                    return Ok(Some(Err((values[0], values[1], image))));
                }
                return Ok(None);
            }
        }
    }
    Ok(Some(Ok(symbolic_note(
        &charts,
        "residue map is a permutation and every exceptional image has one preimage",
    ))))
}

/// Evidence that no point of ℕ is periodic, when a chart argument applies.
pub(super) fn symbolic_aperiodicity(map: &SelfMapRule) -> Result<Option<Evidence>> {
    let Some(charts) = covering_charts(map)? else { return Ok(None) };
    if !charts.iter().all(Chart::no_balanced_cycle) {
        return Ok(None);
    }
    for chart in &charts {
        for c in 1..chart.threshold {
            let start = chart.kind.value(c)?;
            if !escapes(map, start)? {
                return Ok(None);
            }
        }
    }
    Ok(Some(symbolic_note(
        &charts,
        "no residue cycle is balanced and every exceptional orbit escapes",
    )))
}

/// Whether the forward orbit of `start` provably never returns to `start`.
fn escapes(map: &SelfMapRule, start: u64) -> Result<bool> {
    let mut x = start;
    for _ in 0..APERIODIC_WALK {
        x = map.apply(x)?;
        if x == start {
            return Ok(false);
        }
        if let Some((chart, c)) = Chart::around(map, x, &[])? {
            if let Some(drift) = chart.forward_drift(c) {
                // The certified orbit never drops below the path minimum.
                let own = chart.kind.coordinate(start)?;
                if own.is_none_or(|s| s < drift.min_coord()) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}
