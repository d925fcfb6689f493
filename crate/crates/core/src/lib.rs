//! Analysis toolkit for stochastic reaction networks modeled as continuous-time
//! Markov chains.
//!
//! The crate decides structural properties of a reaction network (deficiency,
//! weak reversibility, conservativity), decides first-order endotacticity via
//! the monomerization construction, synthesizes linear Lyapunov certificates of
//! exponential ergodicity from the net flow matrix, decomposes communicating
//! classes on truncated state lattices, and validates certificates by exact
//! truncated-generator solves and Gillespie simulation.
//!
//! Structural decisions (ranks, deficiency, Hurwitz tests, endotacticity) run
//! in exact rational arithmetic; floating point only enters where quantities
//! are genuinely numeric (propensities, stationary distributions, traces).

pub mod endotactic;
pub mod exact;
pub mod graph;
pub mod model;
pub mod parser;
pub mod poly;
pub mod sim;
pub mod stability;
pub mod statespace;

pub use model::{Complex, RateLaw, Reaction, ReactionNetwork};
