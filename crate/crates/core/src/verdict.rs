//! Horizon-bounded answers.

use serde::{Deserialize, Serialize};

/// Grade of an answer, ordered from weakest to strongest.
///
/// `Refuted` is a definite negative backed by a re-checkable witness;
/// `ExactTailBound` is a definite positive backed by a symbolic certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictKind {
    Refuted,
    Inconclusive,
    SatisfiedAtHorizon,
    ExactTailBound,
}

impl VerdictKind {
    /// Conjunction of two graded answers.
    pub fn and(self, other: VerdictKind) -> VerdictKind {
        self.min(other)
    }

    pub fn is_positive(self) -> bool {
        matches!(self, VerdictKind::SatisfiedAtHorizon | VerdictKind::ExactTailBound)
    }

    /// CLI exit status for this grade.
    pub fn exit_code(self) -> i32 {
        match self {
            VerdictKind::SatisfiedAtHorizon | VerdictKind::ExactTailBound => 0,
            VerdictKind::Refuted => 1,
            VerdictKind::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Evidence {
    /// `phi(first) = phi(second) = image` with `first != second`.
    Collision { first: u64, second: u64, image: u64 },
    /// `phi^period(start) = start`.
    PeriodicPoint { start: u64, period: u64 },
    /// Exhaustive scan of `1..=upto` found nothing.
    Scan { upto: u64 },
    /// Residue-class analysis of the rule beyond `threshold`.
    Symbolic {
        modulus: u64,
        threshold: u64,
        note: String,
    },
    /// Window sums of log-weights past `onset` are bounded away from zero;
    /// consecutive blocks of `block` terms shrink by at least `ratio`.
    Tail { onset: usize, block: usize, ratio: f64 },
    /// The product hit the sentinel `w_0 = 0` at step `at`.
    Sentinel { at: usize },
    /// Partial sums stalled from step `at`.
    Plateau { at: usize },
    /// Log-products stay bounded past `onset`.
    Bounded { onset: usize, block: usize },
    /// `(threshold, first m crossing it)` pairs.
    Thresholds { crossings: Vec<(f64, Option<usize>)> },
    Note { text: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub evidence: Evidence,
    /// Largest index or step count the answer looked at.
    pub horizon: u64,
}

impl Verdict {
    pub fn new(kind: VerdictKind, evidence: Evidence, horizon: u64) -> Self {
        Verdict {
            kind,
            evidence,
            horizon,
        }
    }

    pub fn note(kind: VerdictKind, text: impl Into<String>, horizon: u64) -> Self {
        Verdict::new(kind, Evidence::Note { text: text.into() }, horizon)
    }
}
