//! Closed-form behaviour of log-products along a certified orbit path.
//!
//! Write `z_1, z_2, ...` for the points a product runs over and
//! `Λ_n = Σ_{t<=n} ln|w(z_t)|`. Once `z_s` sits on a certified chart path,
//! every later `ln|w(z_t)|` is `α + β·value(z_t)` with `(α, β)` fixed per
//! residue. On the natural chart this makes the block sums
//! `Λ_{n+L} - Λ_n` affine in the number of completed cycles, so the fate of
//! `Λ` along every residue of `n mod L` is decided exactly. On a prime-class
//! chart values grow geometrically and only per-step sign bounds are used.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::One;

use super::{LogModel, WeightRule};
use crate::error::Result;
use crate::scalar::ratio_pow;
use crate::selfmap::{Chart, ChartKind, Drift, SelfMapRule};

/// Exact sign checks are skipped once a window product needs more bits.
const MAX_SIGN_BITS: f64 = 4.0e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrendDirection {
    /// `Λ_n → +∞`
    Up,
    /// `Λ_n → -∞`
    Down,
}

impl TrendDirection {
    fn factor(self) -> f64 {
        match self {
            TrendDirection::Up => 1.0,
            TrendDirection::Down => -1.0,
        }
    }
}

#[derive(Clone, Debug)]
enum Shape {
    /// Block sums `W(n0 + ρ + qL) = windows[ρ] + q·growth`.
    Windows {
        windows: Vec<f64>,
        window_signs: Vec<Option<Ordering>>,
        growth: f64,
        growth_sign: Ordering,
    },
    /// Every increment from the anchor on lies in `[lo, hi]`.
    Steps { lo: f64, hi: f64 },
}

#[derive(Clone, Debug)]
pub struct Trend {
    /// Index `s` of the anchor point `z_s`.
    pub anchor: usize,
    /// Statements about `Λ_{n+block} - Λ_n` hold for `n >= from`.
    pub from: usize,
    pub block: usize,
    kind: ChartKind,
    drift: Drift,
    models: Vec<LogModel>,
    shape: Shape,
}

impl Trend {
    /// Trend of `W_n(k)` anchored at `z_anchor = phi^{anchor-1}(k) = point`.
    pub fn forward(map: &SelfMapRule, rule: &WeightRule, point: u64, anchor: usize) -> Result<Option<Trend>> {
        Self::build(map, rule, point, anchor, true)
    }

    /// Trend of `B_n(k)` anchored at `z_anchor = phi^{-anchor}(k) = point`.
    pub fn backward(map: &SelfMapRule, rule: &WeightRule, point: u64, anchor: usize) -> Result<Option<Trend>> {
        Self::build(map, rule, point, anchor, false)
    }

    fn build(
        map: &SelfMapRule,
        rule: &WeightRule,
        point: u64,
        anchor: usize,
        forward: bool,
    ) -> Result<Option<Trend>> {
        let guards = rule.guards();
        let Some((chart, c)) = Chart::around(map, point, &guards)? else { return Ok(None) };
        let drift = if forward {
            chart.forward_path(c)
        } else {
            chart.backward_path(c)
        };
        let Some(drift) = drift else { return Ok(None) };
        let mut models = Vec::with_capacity(drift.coords.len());
        for &x in &drift.coords {
            match rule.tail_model(&chart, x % chart.modulus) {
                Some(m) => models.push(m),
                None => return Ok(None),
            }
        }
        let block = if drift.terminal { 1 } else { drift.cycle_len() };
        let (from, shape) = match chart.kind {
            ChartKind::Natural if !drift.terminal => {
                let from = anchor + drift.preperiod - 1;
                (from, natural_shape(&drift, &models))
            }
            _ => {
                let v_min = chart.kind.value_floor(drift.min_coord()) as f64;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for m in &models {
                    let (alpha, beta) = (m.alpha(), m.beta());
                    let at_min = alpha + beta * v_min;
                    lo = lo.min(if beta >= 0.0 { at_min } else { f64::NEG_INFINITY });
                    hi = hi.max(if beta <= 0.0 { at_min } else { f64::INFINITY });
                }
                (anchor - 1, Shape::Steps { lo, hi })
            }
        };
        Ok(Some(Trend {
            anchor,
            from,
            block,
            kind: chart.kind,
            drift,
            models,
            shape,
        }))
    }

    fn model_index(&self, j: usize) -> usize {
        if j < self.drift.coords.len() {
            j
        } else {
            let l = self.drift.cycle_len();
            self.drift.preperiod + (j - self.drift.preperiod) % l
        }
    }

    /// `ln|w(z_t)|` for `t >= anchor`, `None` past a sentinel or when the
    /// point no longer fits in 64 bits.
    pub fn log_increment(&self, t: usize) -> Option<f64> {
        let j = t.checked_sub(self.anchor)?;
        let c = self.drift.coord_at(j)?;
        let value = self.kind.value(c).ok()?;
        Some(self.models[self.model_index(j)].ln_at(value))
    }

    /// Number of points in the product before the sentinel, if it is hit.
    pub fn sentinel_at(&self) -> Option<usize> {
        self.drift
            .terminal
            .then(|| self.anchor + self.drift.coords.len())
    }

    /// `Some(true)` if `Λ` tends to `±∞` along every residue of `n`,
    /// `Some(false)` if along some residue it provably does not.
    pub fn tends(&self, dir: TrendDirection) -> Option<bool> {
        if self.drift.terminal {
            return None;
        }
        match &self.shape {
            Shape::Windows { window_signs, growth_sign, .. } => {
                let want = match dir {
                    TrendDirection::Up => Ordering::Greater,
                    TrendDirection::Down => Ordering::Less,
                };
                if *growth_sign != Ordering::Equal {
                    return Some(*growth_sign == want);
                }
                let mut all = true;
                for s in window_signs {
                    match s {
                        Some(s) if *s == want => {}
                        Some(_) => return Some(false),
                        None => all = false,
                    }
                }
                all.then_some(true)
            }
            Shape::Steps { lo, hi } => match dir {
                TrendDirection::Up if *lo > 0.0 => Some(true),
                TrendDirection::Up if *hi <= 0.0 => Some(false),
                TrendDirection::Down if *hi < 0.0 => Some(true),
                TrendDirection::Down if *lo >= 0.0 => Some(false),
                _ => None,
            },
        }
    }

    /// `Some(true)` if `Λ` is unbounded in direction `dir`, `Some(false)` if
    /// it is provably bounded there.
    pub fn unbounded(&self, dir: TrendDirection) -> Option<bool> {
        if self.drift.terminal {
            return None;
        }
        match &self.shape {
            Shape::Windows { window_signs, growth_sign, .. } => {
                let want = match dir {
                    TrendDirection::Up => Ordering::Greater,
                    TrendDirection::Down => Ordering::Less,
                };
                if *growth_sign != Ordering::Equal {
                    return Some(*growth_sign == want);
                }
                if window_signs.contains(&Some(want)) {
                    return Some(true);
                }
                window_signs.iter().all(Option::is_some).then_some(false)
            }
            Shape::Steps { .. } => self.tends(dir),
        }
    }

    /// A lower bound on `dir·(Λ_{n'+L} - Λ_{n'})` valid for every `n' >= n`
    /// with `n' ≡ n (mod L)`, or `None` if no such bound follows.
    pub fn window_bound(&self, n: usize, dir: TrendDirection) -> Option<f64> {
        if n < self.from || self.drift.terminal {
            return None;
        }
        let f = dir.factor();
        match &self.shape {
            Shape::Windows { windows, growth, .. } => {
                let g = f * growth;
                if g < 0.0 {
                    return None;
                }
                let k = n - self.from;
                let rho = k % self.block;
                let q = (k / self.block) as f64;
                Some(f * windows[rho] + q * g)
            }
            Shape::Steps { lo, hi } => Some(match dir {
                TrendDirection::Up => *lo,
                TrendDirection::Down => -hi,
            }),
        }
    }
}

fn natural_shape(drift: &Drift, models: &[LogModel]) -> Shape {
    let p = drift.preperiod;
    let l = drift.cycle_len();
    let cycle = &models[p..];
    let growth = drift.shift as f64 * cycle.iter().map(LogModel::beta).sum::<f64>();
    let mut factor = BigRational::one();
    for m in cycle {
        factor *= ratio_pow(&m.base, m.power_sign as i64);
    }
    let growth_sign = factor.cmp(&BigRational::one());
    let mut windows = Vec::with_capacity(l);
    let mut window_signs = Vec::with_capacity(l);
    for rho in 0..l {
        let idx: Vec<usize> = (0..l).map(|i| p + (rho + i) % l).collect();
        let coords: Vec<u64> = (0..l)
            .map(|i| drift.coord_at(p + rho + i).expect("cycle coordinates are finite"))
            .collect();
        let w: f64 = idx
            .iter()
            .zip(&coords)
            .map(|(&j, &x)| models[j].ln_at(x))
            .sum();
        windows.push(w);
        window_signs.push(if growth_sign == Ordering::Equal {
            exact_window_sign(idx.iter().map(|&j| &models[j]), &coords)
        } else {
            None
        });
    }
    Shape::Windows {
        windows,
        window_signs,
        growth,
        growth_sign,
    }
}

/// Sign of `Σ ln|w|` over a window, decided with exact rationals.
fn exact_window_sign<'a>(
    models: impl Iterator<Item = &'a LogModel> + Clone,
    coords: &[u64],
) -> Option<Ordering> {
    let bits: f64 = models
        .clone()
        .zip(coords)
        .map(|(m, &x)| (m.beta().abs() * x as f64 + m.alpha().abs()) / std::f64::consts::LN_2)
        .sum();
    if bits > MAX_SIGN_BITS {
        return None;
    }
    let mut product = BigRational::one();
    for (m, &x) in models.zip(coords) {
        product *= m.constant.clone();
        product *= ratio_pow(&m.base, m.power_sign as i64 * x as i64);
    }
    Some(product.cmp(&BigRational::one()))
}
