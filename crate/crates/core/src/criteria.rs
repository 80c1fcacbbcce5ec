//! Horizon-bounded decision procedures for hypercyclicity and chaos of
//! `wC_φ` on `ℓ^p` and `c₀`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::orbits;
use crate::selfmap::SelfMapRule;
use crate::seqspace::SpaceSpec;
use crate::verdict::{Verdict, VerdictKind};
use crate::weights::{
    backward_p_series, forward_growth, forward_inverse_series, forward_product, forward_product_limits,
    LimitReport, SeriesReport, WeightRule,
};

/// Always sampled on top of the generators.
pub const SAFETY_SAMPLE: u64 = 10;
/// Orbit points per sample used for the generator-sufficiency identity.
pub const SUFFICIENCY_POINTS: u64 = 3;
pub const SUFFICIENCY_TOL: f64 = 1e-8;
const MAX_PERIOD: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Horizons {
    /// Scan bound for the structural checks and default generator cover.
    pub orbit: u64,
    pub series_terms: usize,
    /// Bound on preimage scans for rules without a symbolic inverse.
    pub preimage_scan: u64,
}

impl Default for Horizons {
    fn default() -> Self {
        Horizons {
            orbit: 1000,
            series_terms: 200,
            preimage_scan: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SampleSpec {
    Explicit(Vec<u64>),
    /// Exact generators `g(k)`, `k <= cover`, plus `1..=10`.
    Generators { cover: u64 },
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec::Generators { cover: 1000 }
    }
}

impl std::str::FromStr for SampleSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if let Some(cover) = s.strip_prefix("generators:") {
            let cover = cover.trim().parse().map_err(|_| format!("bad cover in {s:?}"))?;
            return Ok(SampleSpec::Generators { cover });
        }
        s.split(',')
            .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad sample index {t:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(SampleSpec::Explicit)
    }
}

impl SampleSpec {
    pub fn resolve(&self, map: &SelfMapRule, h: &Horizons) -> Result<Vec<u64>> {
        let mut ks = match self {
            SampleSpec::Explicit(ks) => ks.clone(),
            SampleSpec::Generators { cover } => {
                let gens = orbits::generator_set(map, 1, *cover, h.preimage_scan)?;
                let mut ks: Vec<u64> = gens.exact_values().into_iter().collect();
                ks.extend(1..=SAFETY_SAMPLE);
                ks
            }
        };
        ks.retain(|&k| k >= 1);
        ks.sort_unstable();
        ks.dedup();
        Ok(ks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Structural {
    pub injective: Verdict,
    pub periodic: Verdict,
}

impl Structural {
    pub fn check(map: &SelfMapRule, h: &Horizons) -> Result<Self> {
        Ok(Structural {
            injective: map.check_injective(h.orbit)?,
            periodic: map.periodic_verdict(MAX_PERIOD.min(h.orbit.max(1)), h.orbit)?,
        })
    }

    pub fn kind(&self) -> VerdictKind {
        self.injective.kind.and(self.periodic.kind)
    }
}

/// One side of a per-sample check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Part {
    Series(SeriesReport),
    Limit { verdict: Verdict, log: Vec<(usize, f64)> },
    Growth(Verdict),
}

impl Part {
    pub fn verdict(&self) -> &Verdict {
        match self {
            Part::Series(r) => &r.verdict,
            Part::Limit { verdict, .. } => verdict,
            Part::Growth(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub k: u64,
    pub forward: Part,
    pub backward: Option<Part>,
    /// Largest relative error of the orbit-tail identity, when checked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sufficiency_error: Option<f64>,
}

impl Sample {
    pub fn kind(&self) -> VerdictKind {
        let mut kind = self.forward.verdict().kind;
        if let Some(b) = &self.backward {
            kind = kind.and(b.verdict().kind);
        }
        if self.sufficiency_error.is_some_and(|e| !(e <= SUFFICIENCY_TOL)) {
            kind = kind.and(VerdictKind::Inconclusive);
        }
        kind
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: String,
    pub space: SpaceSpec,
    pub structural: Structural,
    pub samples: Vec<Sample>,
    pub overall: Verdict,
}

impl CriterionReport {
    fn assemble(criterion: &str, space: SpaceSpec, structural: Structural, samples: Vec<Sample>, h: &Horizons) -> Self {
        let overall = if structural.injective.kind == VerdictKind::Refuted {
            structural.injective.clone()
        } else if structural.periodic.kind == VerdictKind::Refuted {
            structural.periodic.clone()
        } else if let Some(bad) = samples.iter().find(|s| s.kind() == VerdictKind::Refuted) {
            let v = if bad.forward.verdict().kind == VerdictKind::Refuted {
                bad.forward.verdict()
            } else {
                bad.backward.as_ref().map(Part::verdict).unwrap_or(bad.forward.verdict())
            };
            Verdict::new(VerdictKind::Refuted, v.evidence.clone(), v.horizon)
        } else {
            let kind = samples.iter().map(Sample::kind).fold(structural.kind(), VerdictKind::and);
            let kind = if samples.is_empty() { kind.and(VerdictKind::Inconclusive) } else { kind };
            Verdict::note(
                kind,
                format!("weakest of the structural checks and {} sampled points", samples.len()),
                h.series_terms as u64,
            )
        };
        CriterionReport {
            criterion: criterion.into(),
            space,
            structural,
            samples,
            overall,
        }
    }

    pub fn holds(&self) -> bool {
        self.overall.kind.is_positive()
    }
}

fn run(
    criterion: &str,
    map: &SelfMapRule,
    space: SpaceSpec,
    samples: &SampleSpec,
    h: &Horizons,
    mut per_k: impl FnMut(u64) -> Result<Sample>,
) -> Result<CriterionReport> {
    space.validate()?;
    let structural = Structural::check(map, h)?;
    let mut out = Vec::new();
    if structural.kind() != VerdictKind::Refuted {
        for k in samples.resolve(map, h)? {
            out.push(per_k(k)?);
        }
    }
    Ok(CriterionReport::assemble(criterion, space, structural, out, h))
}

/// Injectivity, no periodic points, and `sup_m |W_m(k)| = ∞` at each sample.
pub fn check_hypercyclic(
    map: &SelfMapRule,
    rule: &WeightRule,
    space: SpaceSpec,
    samples: &SampleSpec,
    h: &Horizons,
) -> Result<CriterionReport> {
    run("hypercyclic", map, space, samples, h, |k| {
        Ok(Sample {
            k,
            forward: Part::Growth(forward_growth(map, rule, k, h.series_terms)?),
            backward: None,
            sufficiency_error: None,
        })
    })
}

/// Largest relative deviation from
/// `Σ_n |W_n(φ^j k)|^{-p} = |W_j(k)|^p Σ_{n>j} |W_n(k)|^{-p}` over `j = 1..=3`,
/// both sides truncated to the same terms.
fn sufficiency_error(map: &SelfMapRule, rule: &WeightRule, k: u64, p: f64, terms: usize) -> Result<f64> {
    let base = forward_inverse_series(map, rule, k, p, terms + SUFFICIENCY_POINTS as usize)?;
    let mut worst: f64 = 0.0;
    for j in 1..=SUFFICIENCY_POINTS {
        let kj = map.iterate(k, j)?;
        let shifted = forward_inverse_series(map, rule, kj, p, terms)?;
        let scale = p * forward_product(map, rule, k, j)?.log_magnitude;
        let n = shifted.log_terms.len().min(base.log_terms.len().saturating_sub(j as usize));
        let lhs: f64 = shifted.log_terms[..n].iter().map(|l| l.exp()).sum();
        let rhs: f64 = base.log_terms[j as usize..j as usize + n]
            .iter()
            .map(|l| (l + scale).exp())
            .sum();
        let err = if lhs == rhs { 0.0 } else { (lhs - rhs).abs() / lhs.abs().max(rhs.abs()) };
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Structural checks plus convergence of `Σ |W_n(k)|^{-p}` and `Σ |B_n(k)|^p`.
pub fn check_chaotic_lp(
    map: &SelfMapRule,
    rule: &WeightRule,
    p: f64,
    samples: &SampleSpec,
    h: &Horizons,
) -> Result<CriterionReport> {
    let space = SpaceSpec::lp(p)?;
    run("chaotic", map, space, samples, h, |k| {
        let forward = forward_inverse_series(map, rule, k, p, h.series_terms)?;
        let backward = backward_p_series(map, rule, k, p, h.series_terms, h.preimage_scan)?;
        Ok(Sample {
            k,
            forward: Part::Series(forward),
            backward: Some(Part::Series(backward)),
            sufficiency_error: Some(sufficiency_error(map, rule, k, p, h.series_terms)?),
        })
    })
}

/// Structural checks plus `|W_n(k)| → ∞` and `|B_n(k)| → 0`.
pub fn check_chaotic_c0(
    map: &SelfMapRule,
    rule: &WeightRule,
    samples: &SampleSpec,
    h: &Horizons,
) -> Result<CriterionReport> {
    run("chaotic", map, SpaceSpec::C0, samples, h, |k| {
        let LimitReport {
            forward,
            backward,
            forward_log,
            backward_log,
        } = forward_product_limits(map, rule, k, h.series_terms, h.preimage_scan)?;
        Ok(Sample {
            k,
            forward: Part::Limit { verdict: forward, log: forward_log },
            backward: Some(Part::Limit { verdict: backward, log: backward_log }),
            sufficiency_error: None,
        })
    })
}

/// Dispatches on the space.
pub fn check_chaotic(
    map: &SelfMapRule,
    rule: &WeightRule,
    space: SpaceSpec,
    samples: &SampleSpec,
    h: &Horizons,
) -> Result<CriterionReport> {
    match space {
        SpaceSpec::Lp(p) => check_chaotic_lp(map, rule, p, samples, h),
        SpaceSpec::C0 => check_chaotic_c0(map, rule, samples, h),
    }
}
