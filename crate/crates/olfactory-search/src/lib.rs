//! Solvers and a benchmark harness for the olfactory search POMDP.
//!
//! A searcher on a finite grid must find a hidden odor source using sparse
//! stochastic detections ("hits") whose statistics follow odor dispersion in
//! a turbulent medium. The searcher maintains an exact Bayesian belief over
//! source locations; solving the problem means mapping beliefs to moves so
//! the source is found as quickly as possible.
//!
//! The crate provides:
//!
//! - the grid environment and the turbulence-based hit model ([`env`]),
//! - exact belief filtering and successor-belief enumeration ([`belief`]),
//! - heuristic baselines: infotaxis and a greedy tracker ([`policy`]),
//! - a Perseus-style point-based value-iteration solver with potential-based
//!   reward shaping ([`pbvi`]),
//! - a model-based deep value learner over beliefs ([`drl`]) backed by an
//!   in-repo feedforward network with analytic gradients ([`net`]),
//! - an episode/benchmark harness with reproducible seeding ([`eval`]),
//! - canonical benchmark cases, artifact formats, config parsing, and plot
//!   emission ([`cases`], [`artifact`], [`config`], [`plot`]).
//!
//! The narrative guide lives in `book/`; its code snippets compile and run
//! as doc-tests of this crate.

pub mod artifact;
pub mod belief;
pub mod bessel;
pub mod cases;
pub mod config;
pub mod drl;
pub mod env;
mod error;
pub mod eval;
pub mod net;
pub mod pbvi;
pub mod plot;
pub mod policy;
pub mod symmetry;
pub mod util;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book;
