//! Ready-made maps, weights and configurations.

use crate::guard::{ClassSelector, Guard};
use crate::selfmap::{MapExpr, SelfMapRule};
use crate::seqspace::SpaceSpec;
use crate::weights::{WeightExpr, WeightRule};

fn affine(b: i64) -> MapExpr {
    MapExpr::Affine { a: 1, b }
}

fn rule(clauses: Vec<(Guard, MapExpr)>, default: MapExpr) -> SelfMapRule {
    SelfMapRule::new(
        clauses
            .into_iter()
            .map(|(g, e)| SelfMapRule::clause(g, e))
            .collect(),
        default,
    )
    .expect("catalog maps are well formed")
}

/// `1 → 2 → 3 → 1`, everything else `→ 4`. Neither injective nor free of
/// periodic points.
pub fn first_example_map() -> SelfMapRule {
    rule(
        vec![
            (Guard::set([1]), MapExpr::Value(2)),
            (Guard::set([2]), MapExpr::Value(3)),
            (Guard::set([3]), MapExpr::Value(1)),
        ],
        MapExpr::Value(4),
    )
}

/// `n ↦ n + 1`.
pub fn successor() -> SelfMapRule {
    rule(vec![], affine(1))
}

/// `5k+1 ↦ 5k-4` and `5k ↦ 5k+2` for `k >= 1`, else `n ↦ n + 1`.
/// A single orbit in which every point has a preimage.
pub fn single_orbit_map() -> SelfMapRule {
    rule(
        vec![
            (Guard::residue(5, 1, 6), affine(-5)),
            (Guard::residue(5, 0, 5), affine(2)),
        ],
        affine(1),
    )
}

/// `1 ↦ 5`, `5k-1 ↦ 5k+3`, `5k ↦ 5k+5`, `5k+1 ↦ 5k-4`, `5k+2 ↦ 5k-3`
/// (`k >= 1`), else `n ↦ n + 1`. Two orbits: `{1, 5k, 5k+1}` and the rest.
pub fn two_orbit_map() -> SelfMapRule {
    rule(
        vec![
            (Guard::set([1]), MapExpr::Value(5)),
            (Guard::residue(5, 4, 4), affine(4)),
            (Guard::residue(5, 0, 5), affine(5)),
            (Guard::residue(5, 1, 6), affine(-5)),
            (Guard::residue(5, 2, 7), affine(-5)),
        ],
        affine(1),
    )
}

/// `P_i(j) ↦ P_i(j + 1)` on every class.
pub fn prime_chain_map() -> SelfMapRule {
    rule(vec![], MapExpr::PrimeShift { delta: 1 })
}

/// On every class: position `1 ↦ 2`, `3k-1 ↦ 3k`, `3k ↦ 3k+2`,
/// `3k+1 ↦ 3k-2` (`k >= 1`).
pub fn prime_triple_map() -> SelfMapRule {
    rule(
        vec![
            (
                Guard::prime_pos(ClassSelector::Any, 3, 1, 4),
                MapExpr::PrimeShift { delta: -3 },
            ),
            (
                Guard::prime_pos(ClassSelector::Any, 3, 0, 1),
                MapExpr::PrimeShift { delta: 2 },
            ),
        ],
        MapExpr::PrimeShift { delta: 1 },
    )
}

/// `4k ↦ 4k+2`, `4k+1 ↦ 4k-3` (`k >= 1`), else `n ↦ n + 1`.
pub fn closing_lp_map() -> SelfMapRule {
    rule(
        vec![
            (Guard::residue(4, 0, 4), affine(2)),
            (Guard::residue(4, 1, 5), affine(-4)),
        ],
        affine(1),
    )
}

/// `w_n = w^{-n}` for `n = 4k+1` (`k >= 1`), else `w^n`.
pub fn closing_lp_weights(w: i64) -> WeightRule {
    WeightRule::new(
        vec![WeightRule::clause(
            Guard::residue(4, 1, 5),
            WeightExpr::geometric(w, -1),
        )],
        WeightExpr::geometric(w, 1),
    )
    .expect("catalog weights are well formed")
}

/// `w_n = w^{-n}` for `n = P_i(3k+1)` (`k >= 1`), else `w^n`.
pub fn closing_c0_weights(w: i64) -> WeightRule {
    WeightRule::new(
        vec![WeightRule::clause(
            Guard::prime_pos(ClassSelector::Any, 3, 1, 4),
            WeightExpr::geometric(w, -1),
        )],
        WeightExpr::geometric(w, 1),
    )
    .expect("catalog weights are well formed")
}

pub fn constant_weights(c: i64) -> WeightRule {
    WeightRule::constant(c).expect("nonzero constant")
}

pub fn all_maps() -> Vec<(&'static str, SelfMapRule)> {
    vec![
        ("first_example", first_example_map()),
        ("successor", successor()),
        ("single_orbit", single_orbit_map()),
        ("two_orbit", two_orbit_map()),
        ("prime_chain", prime_chain_map()),
        ("prime_triple", prime_triple_map()),
        ("closing_lp", closing_lp_map()),
    ]
}

pub fn all_weights() -> Vec<(&'static str, WeightRule)> {
    vec![
        ("const_1", constant_weights(1)),
        ("const_2", constant_weights(2)),
        ("closing_lp_2", closing_lp_weights(2)),
        ("closing_c0_2", closing_c0_weights(2)),
    ]
}

/// A map, a weight rule and a space.
#[derive(Clone, Debug)]
pub struct Example {
    pub name: &'static str,
    pub map: SelfMapRule,
    pub weights: WeightRule,
    pub space: SpaceSpec,
}

pub fn rolewicz(space: SpaceSpec) -> Example {
    Example {
        name: "successor_const_2",
        map: successor(),
        weights: constant_weights(2),
        space,
    }
}

pub fn closing_lp() -> Example {
    Example {
        name: "closing_lp",
        map: closing_lp_map(),
        weights: closing_lp_weights(2),
        space: SpaceSpec::Lp(2.0),
    }
}

pub fn closing_c0() -> Example {
    Example {
        name: "closing_c0",
        map: prime_triple_map(),
        weights: closing_c0_weights(2),
        space: SpaceSpec::C0,
    }
}

pub fn unit_weights() -> Example {
    Example {
        name: "successor_const_1",
        map: successor(),
        weights: constant_weights(1),
        space: SpaceSpec::Lp(2.0),
    }
}

/// The configurations classified as chaotic.
pub fn chaotic_examples() -> Vec<Example> {
    vec![
        closing_lp(),
        closing_c0(),
        rolewicz(SpaceSpec::Lp(1.0)),
        rolewicz(SpaceSpec::C0),
    ]
}

/// Every configuration with an injective map.
pub fn all_examples() -> Vec<Example> {
    let mut out = chaotic_examples();
    out.push(unit_weights());
    out.push(Example {
        name: "single_orbit_const_2",
        map: single_orbit_map(),
        weights: constant_weights(2),
        space: SpaceSpec::Lp(2.0),
    });
    out.push(Example {
        name: "two_orbit_const_2",
        map: two_orbit_map(),
        weights: constant_weights(2),
        space: SpaceSpec::Lp(2.0),
    });
    out.push(Example {
        name: "prime_chain_const_2",
        map: prime_chain_map(),
        weights: constant_weights(2),
        space: SpaceSpec::C0,
    });
    out
}
