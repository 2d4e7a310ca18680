//! Sum-product message passing, belief reconstruction, and the Bethe free
//! energy F = E - S whose stationary points the messages solve.
//!
//! Messages are full log-likelihood ratios on the Tanner-graph edges, updated
//! by parallel flooding with damping (the fixed-point set does not depend on
//! the schedule). Checks combine messages through the tanh product rule; the
//! product is saturated just inside +-1 so the atanh never overflows.

use thiserror::Error;

use crate::channel::LlrVector;
use crate::outcome::{DecodeOutcome, DecodeResult, Method, WorkCounters};
use crate::tanner::{BitVector, ParityCheckMatrix};

pub const DEFAULT_DAMPING: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;

/// Saturation bound for the tanh product before atanh.
const TANH_SAT: f64 = 1.0 - 1e-12;

/// Floor for beliefs inside logarithms.
const LOG_CLIP: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum BpError {
    #[error("state has {got} edges, code has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("belief {value} at {what} outside [0,1] beyond tolerance")]
    InvalidBelief { what: String, value: f64 },
}

/// Both message families, one value per directed Tanner-graph edge, indexed
/// by the flat edge ids of [`ParityCheckMatrix`].
#[derive(Debug, Clone)]
pub struct MessageState {
    pub check_to_bit: Vec<f64>,
    pub bit_to_check: Vec<f64>,
    pub iteration: usize,
}

impl MessageState {
    /// Standard initialization: no check information, bits report their
    /// channel log-likelihoods.
    pub fn init(h: &ParityCheckMatrix, llr: &LlrVector) -> Self {
        let ne = h.num_edges();
        let mut bit_to_check = vec![0.0; ne];
        for alpha in 0..h.n_checks() {
            for (slot, &i) in h.row(alpha).iter().enumerate() {
                bit_to_check[h.edge_index(alpha, slot)] = llr.h[i];
            }
        }
        MessageState {
            check_to_bit: vec![0.0; ne],
            bit_to_check,
            iteration: 0,
        }
    }

    /// Max-norm distance between two states.
    pub fn max_change(&self, other: &MessageState) -> f64 {
        self.check_to_bit
            .iter()
            .zip(&other.check_to_bit)
            .chain(self.bit_to_check.iter().zip(&other.bit_to_check))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One full flooding sweep: all check-to-bit messages from the current
/// bit-to-check family, then all bit-to-check messages from the fresh
/// check-to-bit family. `new = (1 - damping) * raw + damping * old`.
pub fn bp_iterate(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    state: &MessageState,
    damping: f64,
) -> Result<MessageState, BpError> {
    let ne = h.num_edges();
    if state.check_to_bit.len() != ne || state.bit_to_check.len() != ne {
        return Err(BpError::DimensionMismatch {
            expected: ne,
            got: state.check_to_bit.len(),
        });
    }
    let mut check_to_bit = vec![0.0; ne];
    for alpha in 0..h.n_checks() {
        let deg = h.check_degree(alpha);
        let base = h.edge_index(alpha, 0);
        let t: Vec<f64> = (0..deg)
            .map(|s| (state.bit_to_check[base + s] / 2.0).tanh())
            .collect();
        // leave-one-out products via prefix/suffix (safe with zero factors)
        let mut prefix = vec![1.0; deg + 1];
        for s in 0..deg {
            prefix[s + 1] = prefix[s] * t[s];
        }
        let mut suffix = vec![1.0; deg + 1];
        for s in (0..deg).rev() {
            suffix[s] = suffix[s + 1] * t[s];
        }
        for s in 0..deg {
            let prod = (prefix[s] * suffix[s + 1]).clamp(-TANH_SAT, TANH_SAT);
            let raw = 2.0 * prod.atanh();
            check_to_bit[base + s] =
                (1.0 - damping) * raw + damping * state.check_to_bit[base + s];
        }
    }
    let mut bit_to_check = vec![0.0; ne];
    for i in 0..h.n_bits() {
        let edges = h.col_edges(i);
        let total: f64 = edges.iter().map(|&(_, e)| check_to_bit[e]).sum();
        for &(_, e) in edges {
            let raw = llr.h[i] + total - check_to_bit[e];
            bit_to_check[e] = (1.0 - damping) * raw + damping * state.bit_to_check[e];
        }
    }
    Ok(MessageState {
        check_to_bit,
        bit_to_check,
        iteration: state.iteration + 1,
    })
}

/// Trial marginals for bits and checks, plus the magnetizations
/// m_i = b_i(0) - b_i(1) the loop series is written in.
#[derive(Debug, Clone)]
pub struct BeliefState {
    /// (b_i(0), b_i(1)) per bit.
    pub bit_beliefs: Vec<[f64; 2]>,
    /// Per check, a distribution over its local codewords, indexed like
    /// `ParityCheckMatrix::local_codewords`.
    pub check_beliefs: Vec<Vec<f64>>,
    pub magnetizations: Vec<f64>,
}

impl BeliefState {
    /// Largest violation of the marginalization constraints: for every
    /// incident (bit, check) pair, b_i(1) must equal the mass of the local
    /// codewords with that bit set.
    pub fn compatibility_residual(&self, h: &ParityCheckMatrix) -> f64 {
        let mut worst = 0.0f64;
        for alpha in 0..h.n_checks() {
            let lcs = h.local_codewords(alpha).expect("degree within cap");
            for (slot, &i) in h.row(alpha).iter().enumerate() {
                let mass: f64 = lcs
                    .iter()
                    .zip(&self.check_beliefs[alpha])
                    .filter(|(lc, _)| *lc >> slot & 1 == 1)
                    .map(|(_, b)| b)
                    .sum();
                worst = worst.max((mass - self.bit_beliefs[i][1]).abs());
            }
        }
        worst
    }

    /// Beliefs read off an LP solution: bit values and check distributions
    /// are taken as-is (clipped into [0,1]).
    pub fn from_lp(h: &ParityCheckMatrix, sol: &crate::lp::LpSolution) -> Self {
        let bit_beliefs: Vec<[f64; 2]> = sol
            .bit_values
            .iter()
            .map(|&b| {
                let b1 = b.clamp(0.0, 1.0);
                [1.0 - b1, b1]
            })
            .collect();
        let magnetizations = bit_beliefs.iter().map(|b| b[0] - b[1]).collect();
        let check_beliefs = (0..h.n_checks())
            .map(|alpha| {
                sol.check_values[alpha]
                    .iter()
                    .map(|&v| v.clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        BeliefState {
            bit_beliefs,
            check_beliefs,
            magnetizations,
        }
    }
}

/// Reconstructs beliefs from messages: bit marginals from the posterior
/// log-likelihood, check beliefs from the exponential family over local
/// codewords weighted by the incoming bit-to-check messages.
pub fn beliefs_from_messages(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    state: &MessageState,
) -> BeliefState {
    let mut bit_beliefs = Vec::with_capacity(h.n_bits());
    let mut magnetizations = Vec::with_capacity(h.n_bits());
    for i in 0..h.n_bits() {
        let posterior: f64 = llr.h[i]
            + h.col_edges(i)
                .iter()
                .map(|&(_, e)| state.check_to_bit[e])
                .sum::<f64>();
        let m = (posterior / 2.0).tanh();
        bit_beliefs.push([(1.0 + m) / 2.0, (1.0 - m) / 2.0]);
        magnetizations.push(m);
    }
    let mut check_beliefs = Vec::with_capacity(h.n_checks());
    for alpha in 0..h.n_checks() {
        let deg = h.check_degree(alpha);
        let base = h.edge_index(alpha, 0);
        let half: Vec<f64> = (0..deg).map(|s| state.bit_to_check[base + s] / 2.0).collect();
        let lcs = h.local_codewords(alpha).expect("degree within cap");
        let exponents: Vec<f64> = lcs
            .iter()
            .map(|&lc| {
                (0..deg)
                    .map(|s| if lc >> s & 1 == 1 { -half[s] } else { half[s] })
                    .sum()
            })
            .collect();
        let peak = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exponents.iter().map(|&e| (e - peak).exp()).collect();
        let z: f64 = weights.iter().sum();
        check_beliefs.push(weights.into_iter().map(|w| w / z).collect());
    }
    BeliefState {
        bit_beliefs,
        check_beliefs,
        magnetizations,
    }
}

/// The Bethe functional split into its two parts; F = E - S.
#[derive(Debug, Clone, Copy)]
pub struct BetheEnergy {
    pub self_energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.max(LOG_CLIP).ln()
    }
}

/// E = sum_i h_i b_i(1); S = sum_alpha H(b_alpha) - sum_i (q_i - 1) H(b_i)
/// with q_i the bit degree and the 0 ln 0 = 0 convention.
pub fn bethe_free_energy(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    beliefs: &BeliefState,
) -> Result<BetheEnergy, BpError> {
    const TOL: f64 = 1e-9;
    for (i, b) in beliefs.bit_beliefs.iter().enumerate() {
        for v in b {
            if !(-TOL..=1.0 + TOL).contains(v) {
                return Err(BpError::InvalidBelief {
                    what: format!("bit {i}"),
                    value: *v,
                });
            }
        }
    }
    for (alpha, dist) in beliefs.check_beliefs.iter().enumerate() {
        for v in dist {
            if !(-TOL..=1.0 + TOL).contains(v) {
                return Err(BpError::InvalidBelief {
                    what: format!("check {alpha}"),
                    value: *v,
                });
            }
        }
    }
    let self_energy: f64 = beliefs
        .bit_beliefs
        .iter()
        .zip(&llr.h)
        .map(|(b, &hi)| hi * b[1])
        .sum();
    let check_entropy: f64 = beliefs
        .check_beliefs
        .iter()
        .map(|dist| -dist.iter().map(|&p| plogp(p)).sum::<f64>())
        .sum();
    let bit_entropy_excess: f64 = beliefs
        .bit_beliefs
        .iter()
        .enumerate()
        .map(|(i, b)| {
            (h.bit_degree(i) as f64 - 1.0) * -(plogp(b[0]) + plogp(b[1]))
        })
        .sum();
    let entropy = check_entropy - bit_entropy_excess;
    Ok(BetheEnergy {
        self_energy,
        entropy,
        free_energy: self_energy - entropy,
    })
}

/// Result of running BP to (attempted) convergence.
pub struct BpRun {
    pub outcome: DecodeOutcome,
    pub converged: bool,
    pub state: MessageState,
}

/// Iterates flooding BP until the messages move less than `tol` in max-norm
/// or `max_iter` sweeps elapse, then hardens the bit marginals.
/// Non-convergence is an outcome, not an error.
pub fn bp_decode_full(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    max_iter: usize,
    tol: f64,
) -> BpRun {
    bp_decode_damped(h, llr, max_iter, tol, DEFAULT_DAMPING)
}

pub fn bp_decode_damped(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    max_iter: usize,
    tol: f64,
    damping: f64,
) -> BpRun {
    let mut state = MessageState::init(h, llr);
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..max_iter {
        let next = bp_iterate(h, llr, &state, damping).expect("state built from this code");
        let change = next.max_change(&state);
        state = next;
        iterations += 1;
        if change < tol {
            converged = true;
            break;
        }
    }
    let beliefs = beliefs_from_messages(h, llr, &state);
    let word = BitVector(
        beliefs
            .magnetizations
            .iter()
            .map(|&m| (m < 0.0) as u8)
            .collect(),
    );
    let objective: f64 = word
        .0
        .iter()
        .zip(&llr.h)
        .map(|(&s, &hi)| s as f64 * hi)
        .sum();
    let trace = vec![if converged {
        format!("converged after {iterations} iterations")
    } else {
        format!("no convergence in {iterations} iterations")
    }];
    let outcome = DecodeOutcome::new(
        Method::Bp,
        DecodeResult::Integral(word),
        h,
        objective,
        WorkCounters {
            bp_iterations: iterations,
            ..Default::default()
        },
        trace,
    );
    BpRun {
        outcome,
        converged,
        state,
    }
}

/// Convenience wrapper returning just the outcome.
pub fn bp_decode(h: &ParityCheckMatrix, llr: &LlrVector, max_iter: usize, tol: f64) -> DecodeOutcome {
    bp_decode_full(h, llr, max_iter, tol).outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LlrVector;
    use crate::exact;
    use crate::tanner;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn converge(h: &ParityCheckMatrix, llr: &LlrVector) -> (MessageState, BeliefState) {
        let run = bp_decode_full(h, llr, 2000, 1e-12);
        assert!(run.converged, "BP failed to converge");
        let beliefs = beliefs_from_messages(h, llr, &run.state);
        (run.state, beliefs)
    }

    /// Two bits on one check with h = (1, 1): solvable by hand. The
    /// bit-to-check and check-to-bit messages both converge to 1, and the
    /// marginal matches the 2-state enumeration, m = tanh(1).
    #[test]
    fn single_check_fixed_point_by_hand() {
        let h = tanner::single_parity_check(2);
        let llr = LlrVector { h: vec![1.0, 1.0] };
        let (state, beliefs) = converge(&h, &llr);
        for e in 0..2 {
            assert!((state.bit_to_check[e] - 1.0).abs() < 1e-9);
            assert!((state.check_to_bit[e] - 1.0).abs() < 1e-9);
        }
        // enumeration over the local codewords {00, 11}:
        // m = (1 - e^{-2}) / (1 + e^{-2}) = tanh(1)
        let exact_m = 1.0f64.tanh();
        assert!((beliefs.magnetizations[0] - exact_m).abs() < 1e-9);
        let oracle = exact::map_marginals(&h, &llr).unwrap();
        assert!((beliefs.bit_beliefs[0][0] - oracle[0][0]).abs() < 1e-9);
    }

    #[test]
    fn tree_marginals_match_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(2..=16);
            let h = tanner::random_tree_code(n, &mut rng);
            let llr = LlrVector {
                h: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            let (_, beliefs) = converge(&h, &llr);
            let oracle = exact::map_marginals(&h, &llr).unwrap();
            for (b, o) in beliefs.bit_beliefs.iter().zip(&oracle) {
                assert!((b[1] - o[1]).abs() < 1e-10, "{} vs {}", b[1], o[1]);
            }
        }
    }

    #[test]
    fn tree_check_beliefs_match_enumeration() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let h = tanner::random_tree_code(10, &mut rng);
        let llr = LlrVector {
            h: (0..10).map(|_| rng.random_range(-1.5..1.5)).collect(),
        };
        let (_, beliefs) = converge(&h, &llr);
        for alpha in 0..h.n_checks() {
            let oracle = exact::check_marginals(&h, &llr, alpha).unwrap();
            for (b, o) in beliefs.check_beliefs[alpha].iter().zip(&oracle) {
                assert!((b - o).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn strong_likelihoods_freeze_bits() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector { h: vec![50.0; 7] };
        let (_, beliefs) = converge(&h, &llr);
        assert!(beliefs.magnetizations.iter().all(|&m| m > 0.999999));
    }

    #[test]
    fn uniform_messages_give_uniform_beliefs() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector { h: vec![0.0; 7] };
        let state = MessageState::init(&h, &llr);
        let beliefs = beliefs_from_messages(&h, &llr, &state);
        for b in &beliefs.bit_beliefs {
            assert!((b[0] - 0.5).abs() < 1e-12);
        }
        for alpha in 0..h.n_checks() {
            let dist = &beliefs.check_beliefs[alpha];
            let uniform = 1.0 / dist.len() as f64;
            assert!(dist.iter().all(|&p| (p - uniform).abs() < 1e-12));
        }
    }

    #[test]
    fn saturated_messages_give_indicator_check_beliefs() {
        let h = tanner::hamming_7_4();
        // messages consistent with the codeword 1110000
        let word = [1u8, 1, 1, 0, 0, 0, 0];
        let llr = LlrVector { h: vec![0.0; 7] };
        let mut state = MessageState::init(&h, &llr);
        for alpha in 0..h.n_checks() {
            for (slot, &i) in h.row(alpha).iter().enumerate() {
                let sign = if word[i] == 1 { -1.0 } else { 1.0 };
                state.bit_to_check[h.edge_index(alpha, slot)] = 200.0 * sign;
            }
        }
        let beliefs = beliefs_from_messages(&h, &llr, &state);
        for alpha in 0..h.n_checks() {
            let lcs = h.local_codewords(alpha).unwrap();
            let expected_mask = h
                .row(alpha)
                .iter()
                .enumerate()
                .fold(0u32, |m, (slot, &i)| m | (word[i] as u32) << slot);
            for (lc, &b) in lcs.iter().zip(&beliefs.check_beliefs[alpha]) {
                if *lc == expected_mask {
                    assert!(b > 1.0 - 1e-9);
                } else {
                    assert!(b < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bethe_exact_on_trees() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let n = rng.random_range(3..=14);
            let h = tanner::random_tree_code(n, &mut rng);
            let llr = LlrVector {
                h: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            let (_, beliefs) = converge(&h, &llr);
            let f = bethe_free_energy(&h, &llr, &beliefs).unwrap();
            assert!((f.free_energy - (f.self_energy - f.entropy)).abs() < 1e-12);
            let z = exact::partition_function(&h, &llr).unwrap();
            let z0 = (-f.free_energy).exp();
            assert!(
                ((z - z0) / z).abs() < 1e-8,
                "tree Z mismatch: {z} vs {z0}"
            );
        }
    }

    #[test]
    fn bethe_integral_beliefs() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector {
            h: vec![0.4, -0.3, 0.2, 0.9, -0.5, 0.1, 0.6],
        };
        let word = [1u8, 1, 1, 0, 0, 0, 0];
        let bit_beliefs: Vec<[f64; 2]> = word
            .iter()
            .map(|&s| if s == 1 { [0.0, 1.0] } else { [1.0, 0.0] })
            .collect();
        let check_beliefs = (0..h.n_checks())
            .map(|alpha| {
                let lcs = h.local_codewords(alpha).unwrap();
                let mask = h
                    .row(alpha)
                    .iter()
                    .enumerate()
                    .fold(0u32, |m, (slot, &i)| m | (word[i] as u32) << slot);
                lcs.iter().map(|&lc| (lc == mask) as u8 as f64).collect()
            })
            .collect();
        let beliefs = BeliefState {
            magnetizations: bit_beliefs.iter().map(|b| b[0] - b[1]).collect(),
            bit_beliefs,
            check_beliefs,
        };
        let f = bethe_free_energy(&h, &llr, &beliefs).unwrap();
        let e_expected: f64 = word
            .iter()
            .zip(&llr.h)
            .map(|(&s, &hi)| s as f64 * hi)
            .sum();
        assert!((f.self_energy - e_expected).abs() < 1e-12);
        assert!(f.entropy.abs() < 1e-12);
    }

    /// One degree-3 check at h = 0: uniform beliefs over the 4 local
    /// codewords give exp(-F) = Z = 4 exactly.
    #[test]
    fn bethe_single_check_closed_form() {
        let h = tanner::single_parity_check(3);
        let llr = LlrVector { h: vec![0.0; 3] };
        let (_, beliefs) = converge(&h, &llr);
        let f = bethe_free_energy(&h, &llr, &beliefs).unwrap();
        let z = exact::partition_function(&h, &llr).unwrap();
        assert!((z - 4.0).abs() < 1e-12);
        assert!(((-f.free_energy).exp() - z).abs() < 1e-9);
    }

    #[test]
    fn bethe_rejects_invalid_beliefs() {
        let h = tanner::single_parity_check(2);
        let llr = LlrVector { h: vec![0.0; 2] };
        let state = MessageState::init(&h, &llr);
        let mut beliefs = beliefs_from_messages(&h, &llr, &state);
        beliefs.bit_beliefs[0] = [1.5, -0.5];
        assert!(bethe_free_energy(&h, &llr, &beliefs).is_err());
    }

    #[test]
    fn fixed_point_residual_and_compatibility() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let h = tanner::hamming_7_4();
        let llr = LlrVector {
            h: (0..7).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let (state, beliefs) = converge(&h, &llr);
        // substituting the messages into an undamped sweep reproduces them
        let raw = bp_iterate(&h, &llr, &state, 0.0).unwrap();
        assert!(raw.max_change(&state) < 1e-9);
        assert!(beliefs.compatibility_residual(&h) < 1e-8);
    }

    /// A state converged under damping 0.5 satisfies the undamped fixed-point
    /// equations: damping moves the iterates, not the fixed points.
    #[test]
    fn damping_preserves_fixed_points() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector {
            h: vec![0.7, 0.2, -0.4, 0.5, 0.1, -0.2, 0.9],
        };
        let run = bp_decode_damped(&h, &llr, 2000, 1e-12, 0.5);
        assert!(run.converged);
        let undamped = bp_iterate(&h, &llr, &run.state, 0.0).unwrap();
        assert!(undamped.max_change(&run.state) < 1e-9);
    }

    #[test]
    fn decode_zero_noise() {
        let h = tanner::build_tanner_155();
        let llr = LlrVector { h: vec![2.0; 155] };
        let run = bp_decode_full(&h, &llr, 200, 1e-9);
        assert!(run.outcome.decoded_zero());
        // damping 0.5 closes the gap geometrically; well under the budget
        assert!(run.converged);
        assert!(run.outcome.work.bp_iterations <= 60);
    }

    #[test]
    fn decode_tree_matches_symbol_map() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..10 {
            let n = rng.random_range(4..=12);
            let h = tanner::random_tree_code(n, &mut rng);
            let llr = LlrVector {
                h: (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
            };
            let outcome = bp_decode(&h, &llr, 500, 1e-11);
            let oracle = exact::map_marginals(&h, &llr).unwrap();
            let expected: Vec<u8> = oracle.iter().map(|b| (b[1] > 0.5) as u8).collect();
            assert_eq!(outcome.hard_decision().0, expected);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector { h: vec![0.0; 7] };
        let other = MessageState::init(&tanner::single_parity_check(2), &LlrVector { h: vec![0.0; 2] });
        assert!(bp_iterate(&h, &llr, &other, 0.5).is_err());
    }
}
