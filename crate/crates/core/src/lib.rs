//! Weighted pseudo-shifts `wC_φ` on sequence spaces over ℕ: symbolic maps,
//! weight rules, orbit partitions, dynamical criteria and periodic points.

pub mod catalog;
pub mod criteria;
pub mod error;
pub mod guard;
pub mod orbits;
pub mod periodic;
pub mod primes;
pub mod scalar;
pub mod selfmap;
pub mod seqspace;
pub mod verdict;
pub mod weights;

pub use error::{Error, Result};
