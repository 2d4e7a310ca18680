//! Decoding toolkit for LDPC codes in the error-floor regime.
//!
//! The crate bundles the standard decoders (sum-product belief propagation,
//! large-polytope linear-programming decoding) together with the machinery
//! needed to understand and repair their high-SNR failures:
//!
//! - a pseudo-codeword search engine that walks LP failures down to the
//!   low-weight troublemakers and their instanton noise configurations,
//! - loop-series evaluation around BP fixed points, with a triad-threshold
//!   search for the critical loop explaining a given failure,
//! - the enhanced decoders built on those diagnostics: LP-erasure,
//!   Bit Guessing, Facet Guessing and Loop Guided Guessing,
//! - a Monte Carlo frame-error-rate harness with deterministic seeding.
//!
//! All algorithms operate on any alist-loaded code; the (3,5)-regular
//! [155,64,20] quasi-cyclic code used throughout the experiments is built in
//! ([`tanner::build_tanner_155`]).

pub mod bp;
pub mod channel;
pub mod decoders;
pub mod exact;
pub mod harness;
pub mod loops;
pub mod lp;
pub mod outcome;
pub mod tanner;

pub use tanner::{BitVector, ParityCheckMatrix};
