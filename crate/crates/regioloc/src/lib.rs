//! Solver toolkit for continuous multifacility location with demand regions
//! and regional preference constraints.

pub mod bnb;
pub mod conic;
pub mod geometry;
pub mod harness;
pub mod instances;
pub mod model;
pub mod oracle;
pub(crate) mod par;
pub mod prefs;
pub mod rng;
pub mod socp;
