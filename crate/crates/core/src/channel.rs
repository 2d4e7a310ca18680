//! AWGN channel model, log-likelihoods, pseudo-weights and instanton noise.
//!
//! Conventions: the SNR parameter is `s2` with E_c/N_0 = 2 s2; the bit
//! transition density is proportional to exp(-2 s2 (x - sigma)^2), i.e. the
//! noise has variance 1/(4 s2), which makes the log-likelihood exactly
//! h_i = s2 (1 - 2 x_i).

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::tanner::BitVector;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("snr parameter must be positive, got {0}")]
    NonpositiveSnr(f64),
    #[error("zero vector has no pseudo-weight")]
    ZeroVector,
}

/// Received values for one transmitted frame, with the SNR parameter they
/// were (or are to be interpreted as) produced at.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ChannelOutput {
    pub x: Vec<f64>,
    pub snr_param: f64,
}

/// Per-bit log-likelihoods h; positive favors the 0 value of the bit.
#[derive(Debug, Clone)]
pub struct LlrVector {
    pub h: Vec<f64>,
}

impl LlrVector {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }
}

/// Transmits `word` over the AWGN channel: x_i = sigma_i + g_i with g_i
/// zero-mean Gaussian of variance 1/(4 s2).
pub fn sample_awgn(
    word: &BitVector,
    s2: f64,
    rng: &mut impl Rng,
) -> Result<ChannelOutput, ChannelError> {
    if !(s2 > 0.0) {
        return Err(ChannelError::NonpositiveSnr(s2));
    }
    let sigma = (1.0 / (4.0 * s2)).sqrt();
    let x = word
        .0
        .iter()
        .map(|&b| b as f64 + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ChannelOutput { x, snr_param: s2 })
}

/// Zero-noise injection: x equals the transmitted word exactly.
pub fn noiseless(word: &BitVector, s2: f64) -> Result<ChannelOutput, ChannelError> {
    if !(s2 > 0.0) {
        return Err(ChannelError::NonpositiveSnr(s2));
    }
    Ok(ChannelOutput {
        x: word.0.iter().map(|&b| b as f64).collect(),
        snr_param: s2,
    })
}

/// h_i = s2 (1 - 2 x_i).
pub fn llr_from_output(out: &ChannelOutput) -> LlrVector {
    let s2 = out.snr_param;
    LlrVector {
        h: out.x.iter().map(|&x| s2 * (1.0 - 2.0 * x)).collect(),
    }
}

/// AWGN pseudo-weight (effective distance) of a pseudo-codeword:
/// (sum omega)^2 / (sum omega^2). Equals the Hamming weight for integral
/// vectors and is invariant under positive scaling.
pub fn effective_distance(omega: &[f64]) -> Result<f64, ChannelError> {
    let s: f64 = omega.iter().sum();
    let s2: f64 = omega.iter().map(|w| w * w).sum();
    if s2 <= 0.0 {
        return Err(ChannelError::ZeroVector);
    }
    Ok(s * s / s2)
}

/// The minimum-norm noise on the decision boundary between the zero codeword
/// and `omega`: x_i = lambda omega_i with lambda = (sum omega)/(2 sum omega^2),
/// obtained by minimizing sum x_i^2 subject to sum (1 - 2 x_i) omega_i = 0.
/// At this x the LP energies of 0 and omega tie exactly, for any s2.
pub fn instanton_noise(omega: &[f64], s2: f64) -> Result<ChannelOutput, ChannelError> {
    instanton_noise_with_margin(omega, s2, 0.0)
}

/// As [`instanton_noise`] but with lambda scaled by (1 + margin), pushing the
/// noise strictly past the decision boundary so that the pseudo-codeword wins
/// regardless of solver tie-breaking.
pub fn instanton_noise_with_margin(
    omega: &[f64],
    s2: f64,
    margin: f64,
) -> Result<ChannelOutput, ChannelError> {
    if !(s2 > 0.0) {
        return Err(ChannelError::NonpositiveSnr(s2));
    }
    let sum: f64 = omega.iter().sum();
    let sum_sq: f64 = omega.iter().map(|w| w * w).sum();
    if sum_sq <= 0.0 {
        return Err(ChannelError::ZeroVector);
    }
    let lambda = sum / (2.0 * sum_sq) * (1.0 + margin);
    Ok(ChannelOutput {
        x: omega.iter().map(|&w| lambda * w).collect(),
        snr_param: s2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn awgn_noise_variance() {
        let s2 = 2.0;
        let n = 1_000_000;
        let word = BitVector::zeros(n);
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let out = sample_awgn(&word, s2, &mut rng).unwrap();
        let mean: f64 = out.x.iter().sum::<f64>() / n as f64;
        let var: f64 = out.x.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let expected = 1.0 / (4.0 * s2); // 0.125
        assert!((var - expected).abs() / expected < 0.01, "var = {var}");
        // mean within 3 standard errors of the transmitted value
        let se = (expected / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean = {mean}, se = {se}");
    }

    #[test]
    fn noiseless_is_exact() {
        let word = BitVector(vec![0, 1, 1, 0]);
        let out = noiseless(&word, 2.0).unwrap();
        assert_eq!(out.x, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_snr() {
        let word = BitVector::zeros(3);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(sample_awgn(&word, 0.0, &mut rng).is_err());
        assert!(sample_awgn(&word, -1.0, &mut rng).is_err());
    }

    #[test]
    fn llr_plug_in_values() {
        let out = ChannelOutput {
            x: vec![0.0, 0.5, 1.0],
            snr_param: 2.4,
        };
        let h = llr_from_output(&out).h;
        assert_eq!(h[0], 2.4);
        assert_eq!(h[1], 0.0); // erased bit
        assert_eq!(h[2], -2.4);
    }

    #[test]
    fn llr_sign_flips_under_reflection() {
        let out = ChannelOutput {
            x: vec![0.3, -0.2, 1.4],
            snr_param: 1.7,
        };
        let reflected = ChannelOutput {
            x: out.x.iter().map(|&x| 1.0 - x).collect(),
            snr_param: 1.7,
        };
        let h = llr_from_output(&out).h;
        let hr = llr_from_output(&reflected).h;
        for (a, b) in h.iter().zip(&hr) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_distance_basics() {
        let mut w = vec![0.0; 155];
        for v in w.iter_mut().take(20) {
            *v = 1.0;
        }
        assert!((effective_distance(&w).unwrap() - 20.0).abs() < 1e-12);
        let e1 = {
            let mut v = vec![0.0; 10];
            v[0] = 1.0;
            v
        };
        assert!((effective_distance(&e1).unwrap() - 1.0).abs() < 1e-12);
        assert!(effective_distance(&vec![0.0; 4]).is_err());
    }

    #[test]
    fn effective_distance_scale_invariant() {
        let w = vec![0.2, 0.7, 0.0, 1.0, 0.33];
        let d = effective_distance(&w).unwrap();
        for c in [0.1, 2.0, 1e6] {
            let scaled: Vec<f64> = w.iter().map(|&v| c * v).collect();
            assert!((effective_distance(&scaled).unwrap() - d).abs() < 1e-9 * d);
        }
    }

    /// The lambda formula comes from minimizing sum x^2 subject to
    /// sum (1 - 2x_i) omega_i = 0; cross-check the KKT solution against a
    /// dense grid search on a 2-component toy.
    #[test]
    fn instanton_lambda_matches_grid_search() {
        let omega = [0.8, 0.3];
        let inst = instanton_noise(&omega, 1.0).unwrap();
        let analytic: f64 = inst.x.iter().map(|&x| x * x).sum();
        let mut best = f64::INFINITY;
        let steps = 4000;
        for i in 0..=steps {
            // parameterize x0 on a grid, solve the tie constraint for x1
            let x0 = 2.0 * i as f64 / steps as f64;
            // omega0 (1 - 2 x0) + omega1 (1 - 2 x1) = 0
            let x1 = (omega[0] + omega[1] - 2.0 * x0 * omega[0]) / (2.0 * omega[1]);
            let norm = x0 * x0 + x1 * x1;
            if norm < best {
                best = norm;
            }
        }
        assert!((analytic - best).abs() < 1e-5, "{analytic} vs {best}");
    }

    #[test]
    fn instanton_ties_lp_energies() {
        let omega: Vec<f64> = (0..40).map(|i| (i % 5) as f64 / 4.0).collect();
        let out = instanton_noise(&omega, 2.3).unwrap();
        let h = llr_from_output(&out).h;
        let tie: f64 = h.iter().zip(&omega).map(|(hi, wi)| hi * wi).sum();
        assert!(tie.abs() < 1e-12, "tie residual {tie}");
    }

    #[test]
    fn instanton_norm_gives_effective_distance() {
        let omega: Vec<f64> = vec![0.9, 0.1, 0.5, 0.0, 1.0, 0.25];
        let out = instanton_noise(&omega, 1.0).unwrap();
        let norm: f64 = out.x.iter().map(|&x| x * x).sum();
        let d = effective_distance(&omega).unwrap();
        assert!((4.0 * norm - d).abs() < 1e-12);
    }

    #[test]
    fn instanton_integral_word_is_halfway() {
        let mut omega = vec![0.0; 12];
        for v in omega.iter_mut().take(6) {
            *v = 1.0;
        }
        let out = instanton_noise(&omega, 1.0).unwrap();
        for (xi, wi) in out.x.iter().zip(&omega) {
            if *wi == 1.0 {
                assert!((xi - 0.5).abs() < 1e-12);
            } else {
                assert_eq!(*xi, 0.0);
            }
        }
        // h vanishes on the support: the half-way noise erases those bits
        let h = llr_from_output(&out).h;
        assert!(omega
            .iter()
            .zip(&h)
            .all(|(w, hi)| *w == 0.0 || hi.abs() < 1e-12));
    }
}
