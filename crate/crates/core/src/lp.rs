//! Large-polytope LP decoding: minimize the linear self-energy over bit and
//! check beliefs subject to normalization, marginalization and box
//! constraints, then classify the optimum as an integral codeword or a
//! fractional pseudo-codeword.
//!
//! One variable per bit (b_i(1)) and one per (check, local codeword) pair.
//! The simplex backend returns basic (vertex) solutions, which is what the
//! facet-guessing logic reasons about.

use microlp::{ComparisonOp, OptimizationDirection, Problem as MicroProblem};
use thiserror::Error;

use crate::channel::LlrVector;
use crate::tanner::{BitVector, ParityCheckMatrix, TannerError};

/// Default tolerance separating integral from fractional variable values;
/// two orders of magnitude above the solver residual contract (1e-8).
pub const DEFAULT_INTEGRALITY_TOL: f64 = 1e-6;

/// Primal feasibility contract for an Optimal solution.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LpError {
    #[error(transparent)]
    Tanner(#[from] TannerError),
    #[error("length mismatch between code and log-likelihoods")]
    LengthMismatch,
    #[error("bit {0} out of range")]
    BitOutOfRange(usize),
    #[error("check variable ({0}, {1}) out of range")]
    CheckVarOutOfRange(usize, usize),
    #[error("erasure strength {0} outside [0,1]")]
    BadErasureStrength(f64),
    #[error("pin value {0} is not 0 or 1")]
    BadPinValue(u8),
}

/// The decoding LP for one (code, log-likelihood) pair, with optional bit
/// pins and erasures layered on top.
#[derive(Debug, Clone)]
pub struct LpProblem<'a> {
    code: &'a ParityCheckMatrix,
    /// Objective coefficient per bit variable (the working log-likelihoods,
    /// after any erasure).
    objective: Vec<f64>,
    /// Extra equalities b_i(1) = v.
    pinned_bits: Vec<(usize, u8)>,
    /// Extra equalities on check-belief variables, (check, local codeword
    /// index, value).
    pinned_check_vars: Vec<(usize, usize, u8)>,
}

impl<'a> LpProblem<'a> {
    pub fn code(&self) -> &ParityCheckMatrix {
        self.code
    }

    pub fn objective_coefficients(&self) -> &[f64] {
        &self.objective
    }

    pub fn pinned_bits(&self) -> &[(usize, u8)] {
        &self.pinned_bits
    }

    /// Adds the single equality b_i(1) = v.
    pub fn pin_bit(&mut self, i: usize, v: u8) -> Result<(), LpError> {
        if i >= self.code.n_bits() {
            return Err(LpError::BitOutOfRange(i));
        }
        if v > 1 {
            return Err(LpError::BadPinValue(v));
        }
        self.pinned_bits.push((i, v));
        Ok(())
    }

    /// Adds the equality w_{alpha,k} = v on one check-belief variable,
    /// forcing one of its box facets active.
    pub fn pin_check_var(&mut self, alpha: usize, k: usize, v: u8) -> Result<(), LpError> {
        if alpha >= self.code.n_checks()
            || k >= 1usize << (self.code.check_degree(alpha) - 1)
        {
            return Err(LpError::CheckVarOutOfRange(alpha, k));
        }
        if v > 1 {
            return Err(LpError::BadPinValue(v));
        }
        self.pinned_check_vars.push((alpha, k, v));
        Ok(())
    }

    /// Attenuates the log-likelihoods of `bits` by (1 - gamma); gamma = 1 is
    /// a full erasure.
    pub fn erase_bits(&mut self, bits: &[usize], gamma: f64) -> Result<(), LpError> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(LpError::BadErasureStrength(gamma));
        }
        for &i in bits {
            if i >= self.code.n_bits() {
                return Err(LpError::BitOutOfRange(i));
            }
            self.objective[i] *= 1.0 - gamma;
        }
        Ok(())
    }

    /// Total LP variable count: one per bit plus one per local codeword.
    pub fn num_variables(&self) -> usize {
        self.code.n_bits()
            + (0..self.code.n_checks())
                .map(|a| 1usize << (self.code.check_degree(a) - 1))
                .sum::<usize>()
    }

    /// Serializes the program in CPLEX LP text format for cross-checking
    /// against external solvers.
    pub fn dump_lp_format(&self) -> String {
        use std::fmt::Write;
        let h = self.code;
        let mut out = String::from("Minimize\n obj:");
        for (i, &c) in self.objective.iter().enumerate() {
            write!(out, " {} {} b{}", if c < 0.0 { "-" } else { "+" }, c.abs(), i).unwrap();
        }
        out.push_str("\nSubject To\n");
        for alpha in 0..h.n_checks() {
            let lcs = h.local_codewords(alpha).expect("degree within cap");
            let terms: Vec<String> = (0..lcs.len()).map(|k| format!("w{alpha}_{k}")).collect();
            writeln!(out, " norm{}: {} = 1", alpha, terms.join(" + ")).unwrap();
            for (slot, &i) in h.row(alpha).iter().enumerate() {
                let terms: Vec<String> = lcs
                    .iter()
                    .enumerate()
                    .filter(|(_, &lc)| lc >> slot & 1 == 1)
                    .map(|(k, _)| format!("w{alpha}_{k}"))
                    .collect();
                writeln!(out, " marg{}_{}: {} - b{} = 0", alpha, slot, terms.join(" + "), i)
                    .unwrap();
            }
        }
        for (k, &(i, v)) in self.pinned_bits.iter().enumerate() {
            writeln!(out, " pin{}: b{} = {}", k, i, v).unwrap();
        }
        for (n, &(alpha, k, v)) in self.pinned_check_vars.iter().enumerate() {
            writeln!(out, " cpin{}: w{}_{} = {}", n, alpha, k, v).unwrap();
        }
        out.push_str("Bounds\n");
        for i in 0..h.n_bits() {
            writeln!(out, " 0 <= b{i} <= 1").unwrap();
        }
        for alpha in 0..h.n_checks() {
            let count = 1usize << (h.check_degree(alpha) - 1);
            for k in 0..count {
                writeln!(out, " 0 <= w{alpha}_{k} <= 1").unwrap();
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    IntegralCodeword,
    FractionalPseudoCodeword,
}

/// Optimal beliefs of one LP solve. `check_values[alpha]` is indexed like
/// `local_codewords(alpha)`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub bit_values: Vec<f64>,
    pub check_values: Vec<Vec<f64>>,
    pub objective: f64,
    pub status: LpStatus,
    pub classification: Classification,
}

impl LpSolution {
    fn failed(status: LpStatus) -> Self {
        LpSolution {
            bit_values: Vec::new(),
            check_values: Vec::new(),
            objective: f64::NAN,
            status,
            classification: Classification::FractionalPseudoCodeword,
        }
    }

    /// Rounds the bit values to the nearest integers.
    pub fn rounded(&self) -> BitVector {
        BitVector(self.bit_values.iter().map(|&b| (b >= 0.5) as u8).collect())
    }
}

/// Builds the decoding LP: objective sum_i h_i b_i(1); per check one
/// normalization equality and one marginalization equality per incident bit;
/// all variables boxed to [0,1].
pub fn build_lp<'a>(
    code: &'a ParityCheckMatrix,
    llr: &LlrVector,
) -> Result<LpProblem<'a>, LpError> {
    if llr.len() != code.n_bits() {
        return Err(LpError::LengthMismatch);
    }
    // reject degrees beyond the enumeration cap up front
    for alpha in 0..code.n_checks() {
        code.local_codewords(alpha)?;
    }
    Ok(LpProblem {
        code,
        objective: llr.h.clone(),
        pinned_bits: Vec::new(),
        pinned_check_vars: Vec::new(),
    })
}

/// Solves the LP. Optimal solutions satisfy the primal feasibility contract
/// ([`FEASIBILITY_TOL`]); anything worse is reported as NumericalFailure.
pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let h = problem.code;
    let mut lp = MicroProblem::new(OptimizationDirection::Minimize);
    let bit_vars: Vec<_> = problem
        .objective
        .iter()
        .map(|&c| lp.add_var(c, (0.0, 1.0)))
        .collect();
    let mut check_vars = Vec::with_capacity(h.n_checks());
    for alpha in 0..h.n_checks() {
        let lcs = h.local_codewords(alpha).expect("validated in build_lp");
        let vars: Vec<_> = lcs.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let norm: Vec<_> = vars.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(&norm[..], ComparisonOp::Eq, 1.0);
        for (slot, &i) in h.row(alpha).iter().enumerate() {
            let mut terms = vec![(bit_vars[i], -1.0)];
            for (k, &lc) in lcs.iter().enumerate() {
                if lc >> slot & 1 == 1 {
                    terms.push((vars[k], 1.0));
                }
            }
            lp.add_constraint(&terms[..], ComparisonOp::Eq, 0.0);
        }
        check_vars.push(vars);
    }
    for &(i, v) in &problem.pinned_bits {
        lp.add_constraint(&[(bit_vars[i], 1.0)][..], ComparisonOp::Eq, v as f64);
    }
    for &(alpha, k, v) in &problem.pinned_check_vars {
        lp.add_constraint(&[(check_vars[alpha][k], 1.0)][..], ComparisonOp::Eq, v as f64);
    }

    let sol = match lp.solve() {
        Ok(sol) => sol,
        Err(microlp::Error::Infeasible) => return LpSolution::failed(LpStatus::Infeasible),
        Err(_) => return LpSolution::failed(LpStatus::NumericalFailure),
    };

    let bit_values: Vec<f64> = bit_vars.iter().map(|&v| sol[v].clamp(0.0, 1.0)).collect();
    let check_values: Vec<Vec<f64>> = check_vars
        .iter()
        .map(|vars| vars.iter().map(|&v| sol[v].clamp(0.0, 1.0)).collect())
        .collect();

    // feasibility residual of the (unclamped) solver point
    let mut residual = 0.0f64;
    for alpha in 0..h.n_checks() {
        let lcs = h.local_codewords(alpha).expect("validated");
        let dist = &check_values[alpha];
        residual = residual.max((dist.iter().sum::<f64>() - 1.0).abs());
        for (slot, &i) in h.row(alpha).iter().enumerate() {
            let mass: f64 = lcs
                .iter()
                .zip(dist)
                .filter(|(lc, _)| *lc >> slot & 1 == 1)
                .map(|(_, v)| v)
                .sum();
            residual = residual.max((mass - bit_values[i]).abs());
        }
    }
    for &(i, v) in &problem.pinned_bits {
        residual = residual.max((bit_values[i] - v as f64).abs());
    }
    for &(alpha, k, v) in &problem.pinned_check_vars {
        residual = residual.max((check_values[alpha][k] - v as f64).abs());
    }
    if residual > FEASIBILITY_TOL {
        return LpSolution::failed(LpStatus::NumericalFailure);
    }

    let objective: f64 = problem
        .objective
        .iter()
        .zip(&bit_values)
        .map(|(c, b)| c * b)
        .sum();
    let mut solution = LpSolution {
        bit_values,
        check_values,
        objective,
        status: LpStatus::Optimal,
        classification: Classification::FractionalPseudoCodeword,
    };
    solution.classification = classify(h, &solution, DEFAULT_INTEGRALITY_TOL);
    solution
}

/// IntegralCodeword iff every bit value is within `tol` of {0,1} and the
/// rounding has zero syndrome.
pub fn classify(h: &ParityCheckMatrix, sol: &LpSolution, tol: f64) -> Classification {
    let integral = sol
        .bit_values
        .iter()
        .all(|&b| b <= tol || b >= 1.0 - tol);
    if integral && h.syndrome(&sol.rounded()).map(|s| s.is_zero()).unwrap_or(false) {
        Classification::IntegralCodeword
    } else {
        Classification::FractionalPseudoCodeword
    }
}

/// Inactive variable-bound facets of a solution: the facets the guessing
/// decoders may force active.
#[derive(Debug, Clone)]
pub struct FacetStatus {
    /// Bits with tol < b_i(1) < 1 - tol.
    pub fractional_bits: Vec<usize>,
    /// (check, local codeword index) pairs strictly inside (0,1).
    pub interior_check_vars: Vec<(usize, usize)>,
}

impl FacetStatus {
    pub fn interior_check_var_count(&self) -> usize {
        self.interior_check_vars.len()
    }
}

pub fn facet_status(sol: &LpSolution, tol: f64) -> FacetStatus {
    let fractional_bits = sol
        .bit_values
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > tol && b < 1.0 - tol)
        .map(|(i, _)| i)
        .collect();
    let mut interior_check_vars = Vec::new();
    for (alpha, dist) in sol.check_values.iter().enumerate() {
        for (k, &v) in dist.iter().enumerate() {
            if v > tol && v < 1.0 - tol {
                interior_check_vars.push((alpha, k));
            }
        }
    }
    FacetStatus {
        fractional_bits,
        interior_check_vars,
    }
}

/// Bare LP plus the single equality b_i(1) = v.
pub fn lp_with_pinned_bit(
    code: &ParityCheckMatrix,
    llr: &LlrVector,
    i: usize,
    v: u8,
) -> Result<LpSolution, LpError> {
    let mut problem = build_lp(code, llr)?;
    problem.pin_bit(i, v)?;
    Ok(solve_lp(&problem))
}

/// Bare LP with log-likelihoods attenuated by (1 - gamma) on `bits`.
pub fn lp_with_erasure(
    code: &ParityCheckMatrix,
    llr: &LlrVector,
    bits: &[usize],
    gamma: f64,
) -> Result<LpSolution, LpError> {
    let mut problem = build_lp(code, llr)?;
    problem.erase_bits(bits, gamma)?;
    Ok(solve_lp(&problem))
}
