//! Brute-force reference computations on small codes: codeword enumeration,
//! exact partition functions, MAP marginals and ML decoding.
//!
//! Everything here enumerates the 2^k codewords of the code, so it only
//! applies at desk scale (dimension capped at [`ENUMERATION_DIMENSION_CAP`]).
//! These routines are the independent oracles the iterative and LP paths are
//! tested against; they share no code with those paths.

use thiserror::Error;

use crate::channel::LlrVector;
use crate::tanner::{BitVector, ParityCheckMatrix};

pub const ENUMERATION_DIMENSION_CAP: usize = 24;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("code dimension {0} exceeds enumeration cap {ENUMERATION_DIMENSION_CAP}")]
    DimensionCap(usize),
    #[error("length mismatch between code and log-likelihoods")]
    LengthMismatch,
}

/// All 2^k codewords, via the nullspace basis.
pub fn enumerate_codewords(h: &ParityCheckMatrix) -> Result<Vec<BitVector>, ExactError> {
    let basis = h.nullspace_basis();
    let k = basis.len();
    if k > ENUMERATION_DIMENSION_CAP {
        return Err(ExactError::DimensionCap(k));
    }
    let n = h.n_bits();
    let mut words = Vec::with_capacity(1 << k);
    for mask in 0u64..(1 << k) {
        let mut w = BitVector::zeros(n);
        for (j, b) in basis.iter().enumerate() {
            if mask >> j & 1 == 1 {
                w.add_assign(b);
            }
        }
        words.push(w);
    }
    Ok(words)
}

fn energy(h: &LlrVector, word: &BitVector) -> f64 {
    word.0
        .iter()
        .zip(&h.h)
        .map(|(&s, &hi)| s as f64 * hi)
        .sum()
}

/// Z = sum over codewords of exp(-sum_i h_i sigma_i).
pub fn partition_function(h: &ParityCheckMatrix, llr: &LlrVector) -> Result<f64, ExactError> {
    if llr.len() != h.n_bits() {
        return Err(ExactError::LengthMismatch);
    }
    Ok(enumerate_codewords(h)?
        .iter()
        .map(|w| (-energy(llr, w)).exp())
        .sum())
}

/// Exact symbol-MAP marginals (b_i(0), b_i(1)) under the codeword-constrained
/// Gibbs distribution.
pub fn map_marginals(h: &ParityCheckMatrix, llr: &LlrVector) -> Result<Vec<[f64; 2]>, ExactError> {
    if llr.len() != h.n_bits() {
        return Err(ExactError::LengthMismatch);
    }
    let mut acc = vec![[0.0f64; 2]; h.n_bits()];
    let mut z = 0.0;
    for w in enumerate_codewords(h)? {
        let p = (-energy(llr, &w)).exp();
        z += p;
        for (i, &s) in w.0.iter().enumerate() {
            acc[i][s as usize] += p;
        }
    }
    for pair in &mut acc {
        pair[0] /= z;
        pair[1] /= z;
    }
    Ok(acc)
}

/// Exact joint distribution of check `alpha`'s bits, indexed like
/// `h.local_codewords(alpha)`.
pub fn check_marginals(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    alpha: usize,
) -> Result<Vec<f64>, ExactError> {
    let lcs = h
        .local_codewords(alpha)
        .map_err(|_| ExactError::DimensionCap(usize::MAX))?;
    let row = h.row(alpha);
    let mut acc = vec![0.0f64; lcs.len()];
    let mut z = 0.0;
    for w in enumerate_codewords(h)? {
        let p = (-energy(llr, &w)).exp();
        z += p;
        let mask = row
            .iter()
            .enumerate()
            .fold(0u32, |m, (slot, &i)| m | (w[i] as u32) << slot);
        let idx = lcs.iter().position(|&lc| lc == mask).expect("codeword restricts to a local codeword");
        acc[idx] += p;
    }
    for v in &mut acc {
        *v /= z;
    }
    Ok(acc)
}

/// Block-ML decoding: the codeword of minimum energy. Ties resolved toward
/// the lexicographically smallest word (enumeration order).
pub fn ml_decode(h: &ParityCheckMatrix, llr: &LlrVector) -> Result<BitVector, ExactError> {
    if llr.len() != h.n_bits() {
        return Err(ExactError::LengthMismatch);
    }
    let words = enumerate_codewords(h)?;
    let best = words
        .into_iter()
        .map(|w| (energy(llr, &w), w))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least the zero codeword");
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tanner;

    #[test]
    fn hamming_has_16_codewords() {
        let h = tanner::hamming_7_4();
        let words = enumerate_codewords(&h).unwrap();
        assert_eq!(words.len(), 16);
        for w in &words {
            assert!(h.syndrome(w).unwrap().is_zero());
        }
        let distinct: std::collections::HashSet<_> = words.iter().collect();
        assert_eq!(distinct.len(), 16);
    }

    #[test]
    fn partition_function_single_check() {
        // one check over 2 bits, h = 0: two codewords, each weight 1
        let h = tanner::single_parity_check(2);
        let llr = LlrVector { h: vec![0.0, 0.0] };
        assert!((partition_function(&h, &llr).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ml_zero_noise_is_zero_codeword() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector { h: vec![1.5; 7] };
        assert!(ml_decode(&h, &llr).unwrap().is_zero());
    }

    #[test]
    fn marginals_sum_to_one() {
        let h = tanner::hamming_7_4();
        let llr = LlrVector {
            h: vec![0.3, -0.2, 0.8, 0.0, -1.1, 0.5, 0.2],
        };
        for pair in map_marginals(&h, &llr).unwrap() {
            assert!((pair[0] + pair[1] - 1.0).abs() < 1e-12);
        }
        for alpha in 0..h.n_checks() {
            let cm = check_marginals(&h, &llr, alpha).unwrap();
            assert!((cm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
