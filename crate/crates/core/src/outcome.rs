//! Common decode-outcome record shared by the BP, LP and guessing decoders.

use serde::{Deserialize, Serialize};

use crate::tanner::{BitVector, ParityCheckMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Bp,
    Lp,
    LpErasure,
    BitGuessing,
    FacetGuessing,
    Lgg,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Method::Bp => "bp",
            Method::Lp => "lp",
            Method::LpErasure => "erasure",
            Method::BitGuessing => "bg",
            Method::FacetGuessing => "fg",
            Method::Lgg => "lgg",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub enum DecodeResult {
    Integral(BitVector),
    Fractional(Vec<f64>),
}

#[derive(Debug, Clone, Default)]
pub struct WorkCounters {
    pub lp_solves: usize,
    pub bp_iterations: usize,
    pub loops_searched: usize,
}

/// Outcome of one decoding attempt. `is_codeword` is the complement of the
/// error indicator counted by the FER harness: true only when the result is
/// integral with zero syndrome.
#[derive(Debug, Clone)]
pub struct DecodeOutcome {
    pub method: Method,
    pub result: DecodeResult,
    pub is_codeword: bool,
    pub objective: f64,
    pub work: WorkCounters,
    /// Ordered record of the modifications the decoder attempted.
    pub trace: Vec<String>,
}

impl DecodeOutcome {
    pub fn new(
        method: Method,
        result: DecodeResult,
        h: &ParityCheckMatrix,
        objective: f64,
        work: WorkCounters,
        trace: Vec<String>,
    ) -> Self {
        let is_codeword = match &result {
            DecodeResult::Integral(w) => h.syndrome(w).map(|s| s.is_zero()).unwrap_or(false),
            DecodeResult::Fractional(_) => false,
        };
        DecodeOutcome {
            method,
            result,
            is_codeword,
            objective,
            work,
            trace,
        }
    }

    /// The hard-decision word when integral, rounding when fractional.
    pub fn hard_decision(&self) -> BitVector {
        match &self.result {
            DecodeResult::Integral(w) => w.clone(),
            DecodeResult::Fractional(v) => {
                BitVector(v.iter().map(|&b| (b >= 0.5) as u8).collect())
            }
        }
    }

    /// True when the decoder returned the transmitted all-zero codeword.
    pub fn decoded_zero(&self) -> bool {
        self.is_codeword && matches!(&self.result, DecodeResult::Integral(w) if w.is_zero())
    }
}
