//! Entropic Ruzsa calculus over F_2^n.
//!
//! Distributions on F_2^n and its small powers, entropies and Ruzsa
//! distances, checkers for the standard entropic sumset inequalities, the
//! fibring identity, a greedy descent on the tau functional, and a pipeline
//! turning a set of small doubling into an explicit coset cover.

pub mod bsg;
pub mod cover;
pub mod descent;
pub mod dist;
pub mod endgame;
pub mod error;
pub mod fibring;
pub mod fixtures;
pub mod group;
pub mod io;
pub mod joint;
pub mod random;
pub mod ruzsa;
pub mod suites;
mod table;
pub mod wht;

pub use dist::Dist;
pub use error::{PfrError, Result};
pub use group::{GroupElem, LinearMap, SubgroupBasis};
pub use joint::{AxisMap, CondDist, JointDist};
