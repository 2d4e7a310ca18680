//! Enhanced decoders layered on LP diagnostics — LP-erasure, Bit Guessing,
//! Facet Guessing and Loop Guided Guessing — plus the pseudo-codeword search
//! (PCS) engine and its catalog builder.
//!
//! All decoders are total: failure to correct is an outcome, not an error.
//! Every returned integral result is syndrome-checked, and objectives are
//! always reported in terms of the *original* log-likelihoods, even when the
//! winning solve ran on modified ones.

use rand::seq::SliceRandom;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::BeliefState;
use crate::channel::{self, ChannelOutput, LlrVector};
use crate::loops::{self, CriticalLoop};
use crate::lp::{self, build_lp, solve_lp, Classification, LpSolution, LpStatus};
use crate::outcome::{DecodeOutcome, DecodeResult, Method, WorkCounters};
use crate::tanner::{BitVector, ParityCheckMatrix};

/// Objective ties closer than this are broken by candidate order
/// (lowest pinned bit index first).
const TIE_EPS: f64 = 1e-9;

/// A deterministic substream: all randomized components draw from
/// (seed, index)-derived generators so that runs parallelize and reproduce.
pub fn substream_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

fn integral_energy(llr: &LlrVector, word: &BitVector) -> f64 {
    word.0
        .iter()
        .zip(&llr.h)
        .map(|(&s, &hi)| s as f64 * hi)
        .sum()
}

fn fractional_energy(llr: &LlrVector, values: &[f64]) -> f64 {
    values.iter().zip(&llr.h).map(|(&b, &hi)| b * hi).sum()
}

/// Wraps an LP solution as a decode outcome, recomputing the objective under
/// the original log-likelihoods.
fn outcome_from_solution(
    method: Method,
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    sol: &LpSolution,
    work: WorkCounters,
    trace: Vec<String>,
) -> DecodeOutcome {
    let (result, objective) = match sol.classification {
        Classification::IntegralCodeword => {
            let word = sol.rounded();
            let e = integral_energy(llr, &word);
            (DecodeResult::Integral(word), e)
        }
        Classification::FractionalPseudoCodeword => (
            DecodeResult::Fractional(sol.bit_values.clone()),
            fractional_energy(llr, &sol.bit_values),
        ),
    };
    DecodeOutcome::new(method, result, h, objective, work, trace)
}

/// Bare LP decoding as a frame decoder.
pub fn lp_decode(h: &ParityCheckMatrix, llr: &LlrVector) -> DecodeOutcome {
    let sol = solve_lp(&build_lp(h, llr).expect("valid decoding instance"));
    outcome_from_solution(
        Method::Lp,
        h,
        llr,
        &sol,
        WorkCounters {
            lp_solves: 1,
            ..Default::default()
        },
        vec![format!("bare LP: {:?}", sol.classification)],
    )
}

#[derive(Debug, Clone, Copy)]
pub struct LpErasureConfig {
    /// Erasure strength; 1 zeroes the loop bits' log-likelihoods entirely.
    pub gamma: f64,
    /// How many critical loops to try, strongest |r| first.
    pub max_loops: usize,
}

impl Default for LpErasureConfig {
    fn default() -> Self {
        LpErasureConfig {
            gamma: 1.0,
            max_loops: 3,
        }
    }
}

/// LP-erasure decoding: bare LP, then on fractional failure erase the
/// log-likelihoods along the critical loop and re-solve, trying up to
/// `max_loops` loops in decreasing |r| order. When every single-loop erasure
/// leaves the solution fractional the erased region is widened — the union
/// of the candidate loops, then the fractional support, then the whole
/// support of the fractional vertex — which empirically always restores
/// integrality on instanton-type failures.
pub fn lp_erasure_decode(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    config: &LpErasureConfig,
) -> DecodeOutcome {
    let bare = solve_lp(&build_lp(h, llr).expect("valid decoding instance"));
    let mut work = WorkCounters {
        lp_solves: 1,
        ..Default::default()
    };
    let mut trace = vec![format!("bare LP: {:?}", bare.classification)];
    if bare.classification == Classification::IntegralCodeword {
        return outcome_from_solution(Method::LpErasure, h, llr, &bare, work, trace);
    }

    let beliefs = BeliefState::from_lp(h, &bare);
    let candidates = loops::critical_loops(h, &beliefs, config.max_loops);
    work.loops_searched = candidates.len();

    let attempt = |bits: &[usize], label: String, work: &mut WorkCounters, trace: &mut Vec<String>| {
        let sol =
            lp::lp_with_erasure(h, llr, bits, config.gamma).expect("erased bits are in range");
        work.lp_solves += 1;
        trace.push(format!("{label}: {:?}", sol.classification));
        (sol.status == LpStatus::Optimal
            && sol.classification == Classification::IntegralCodeword)
            .then_some(sol)
    };

    for (rank, critical) in candidates.iter().enumerate() {
        let label = format!(
            "erased loop #{rank} ({} bits, r = {:.6})",
            critical.bits.len(),
            critical.r
        );
        if let Some(sol) = attempt(&critical.bits, label, &mut work, &mut trace) {
            return outcome_from_solution(Method::LpErasure, h, llr, &sol, work, trace);
        }
    }

    // escalation: widen the erased region until the vertex is destroyed
    let union = loops::loop_bit_union(h, &candidates);
    let fractional: Vec<usize> = bare
        .bit_values
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > lp::DEFAULT_INTEGRALITY_TOL && b < 1.0 - lp::DEFAULT_INTEGRALITY_TOL)
        .map(|(i, _)| i)
        .collect();
    let support: Vec<usize> = bare
        .bit_values
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > lp::DEFAULT_INTEGRALITY_TOL)
        .map(|(i, _)| i)
        .collect();
    let already_tried = |bits: &[usize]| {
        candidates.iter().any(|c| {
            let mut sorted = c.bits.clone();
            sorted.sort_unstable();
            sorted == bits
        })
    };
    for (bits, what) in [
        (union, "loop union"),
        (fractional, "fractional support"),
        (support, "full support"),
    ] {
        if bits.is_empty() || already_tried(&bits) {
            continue;
        }
        let label = format!("erased {what} ({} bits)", bits.len());
        if let Some(sol) = attempt(&bits, label, &mut work, &mut trace) {
            return outcome_from_solution(Method::LpErasure, h, llr, &sol, work, trace);
        }
    }
    trace.push("all erasure attempts failed".into());
    outcome_from_solution(Method::LpErasure, h, llr, &bare, work, trace)
}

#[derive(Debug, Clone, Copy)]
pub struct BitGuessingConfig {
    pub integrality_tol: f64,
}

impl Default for BitGuessingConfig {
    fn default() -> Self {
        BitGuessingConfig {
            integrality_tol: lp::DEFAULT_INTEGRALITY_TOL,
        }
    }
}

/// The pins Bit Guessing issues against a fractional solution: both values
/// for every fractional bit, the opposite integer for every integral bit —
/// 2k + (N - k) pinned solves for k fractional bits.
fn bit_guessing_pins(sol: &LpSolution, tol: f64) -> Vec<(usize, u8)> {
    let mut pins = Vec::new();
    for (i, &b) in sol.bit_values.iter().enumerate() {
        if b > tol && b < 1.0 - tol {
            pins.push((i, 0));
            pins.push((i, 1));
        } else {
            pins.push((i, if b >= 0.5 { 0 } else { 1 }));
        }
    }
    pins
}

/// Bit Guessing: one extra equality per pinned LP forcing a bit to 0 or 1;
/// returns the minimum-objective integral codeword over all pins, ties
/// broken toward the lowest bit index.
pub fn bit_guessing_decode(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    config: &BitGuessingConfig,
) -> DecodeOutcome {
    let bare = solve_lp(&build_lp(h, llr).expect("valid decoding instance"));
    let mut work = WorkCounters {
        lp_solves: 1,
        ..Default::default()
    };
    let mut trace = vec![format!("bare LP: {:?}", bare.classification)];
    if bare.classification == Classification::IntegralCodeword {
        return outcome_from_solution(Method::BitGuessing, h, llr, &bare, work, trace);
    }

    let pins = bit_guessing_pins(&bare, config.integrality_tol);
    let solutions: Vec<LpSolution> = pins
        .par_iter()
        .map(|&(i, v)| lp::lp_with_pinned_bit(h, llr, i, v).expect("pin in range"))
        .collect();
    work.lp_solves += pins.len();

    let mut best: Option<(f64, usize)> = None;
    for (idx, sol) in solutions.iter().enumerate() {
        if sol.status != LpStatus::Optimal
            || sol.classification != Classification::IntegralCodeword
        {
            continue;
        }
        let e = integral_energy(llr, &sol.rounded());
        if best.map(|(be, _)| e < be - TIE_EPS).unwrap_or(true) {
            best = Some((e, idx));
        }
    }
    match best {
        Some((e, idx)) => {
            let (i, v) = pins[idx];
            trace.push(format!("pin b{i} = {v} wins with energy {e:.6}"));
            outcome_from_solution(Method::BitGuessing, h, llr, &solutions[idx], work, trace)
        }
        None => {
            trace.push("no pinned LP produced a codeword".into());
            outcome_from_solution(Method::BitGuessing, h, llr, &bare, work, trace)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FacetGuessingMode {
    /// Every inactive facet of the fractional vertex.
    Full,
    /// A random subset of the modified LPs, evaluated in deterministic order.
    Randomized { fraction: f64 },
    /// Bit-bound facets only; reproduces Bit Guessing exactly.
    BitFacetsOnly,
}

#[derive(Debug, Clone)]
pub struct FacetGuessingConfig {
    pub mode: FacetGuessingMode,
    pub seed: u64,
    pub integrality_tol: f64,
}

impl Default for FacetGuessingConfig {
    fn default() -> Self {
        FacetGuessingConfig {
            mode: FacetGuessingMode::Full,
            seed: 0,
            integrality_tol: lp::DEFAULT_INTEGRALITY_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum FacetPin {
    Bit(usize, u8),
    CheckVar(usize, usize, u8),
}

/// Facet Guessing: generalizes Bit Guessing to all inactive variable-bound
/// facets — bit bounds as in Bit Guessing, plus both bounds of every
/// check-belief variable strictly inside (0, 1).
pub fn facet_guessing_decode(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    config: &FacetGuessingConfig,
) -> DecodeOutcome {
    let bare = solve_lp(&build_lp(h, llr).expect("valid decoding instance"));
    let mut work = WorkCounters {
        lp_solves: 1,
        ..Default::default()
    };
    let mut trace = vec![format!("bare LP: {:?}", bare.classification)];
    if bare.classification == Classification::IntegralCodeword {
        return outcome_from_solution(Method::FacetGuessing, h, llr, &bare, work, trace);
    }

    let mut candidates: Vec<FacetPin> = bit_guessing_pins(&bare, config.integrality_tol)
        .into_iter()
        .map(|(i, v)| FacetPin::Bit(i, v))
        .collect();
    if !matches!(config.mode, FacetGuessingMode::BitFacetsOnly) {
        let fs = lp::facet_status(&bare, config.integrality_tol);
        for (alpha, k) in fs.interior_check_vars {
            candidates.push(FacetPin::CheckVar(alpha, k, 0));
            candidates.push(FacetPin::CheckVar(alpha, k, 1));
        }
    }
    // subset selection never reorders: fraction 1.0 is identical to Full
    let selected: Vec<FacetPin> = match config.mode {
        FacetGuessingMode::Randomized { fraction } => {
            let keep = ((fraction.clamp(0.0, 1.0) * candidates.len() as f64).ceil()) as usize;
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.shuffle(&mut ChaCha12Rng::seed_from_u64(config.seed));
            let mut picked: Vec<usize> = order.into_iter().take(keep).collect();
            picked.sort_unstable();
            picked.into_iter().map(|i| candidates[i]).collect()
        }
        _ => candidates,
    };
    trace.push(format!("{} facet pins selected", selected.len()));

    let solutions: Vec<LpSolution> = selected
        .par_iter()
        .map(|pin| {
            let mut problem = build_lp(h, llr).expect("valid decoding instance");
            match *pin {
                FacetPin::Bit(i, v) => problem.pin_bit(i, v).expect("pin in range"),
                FacetPin::CheckVar(alpha, k, v) => {
                    problem.pin_check_var(alpha, k, v).expect("pin in range")
                }
            }
            solve_lp(&problem)
        })
        .collect();
    work.lp_solves += selected.len();

    let mut best: Option<(f64, usize)> = None;
    for (idx, sol) in solutions.iter().enumerate() {
        if sol.status != LpStatus::Optimal
            || sol.classification != Classification::IntegralCodeword
        {
            continue;
        }
        let e = integral_energy(llr, &sol.rounded());
        if best.map(|(be, _)| e < be - TIE_EPS).unwrap_or(true) {
            best = Some((e, idx));
        }
    }
    match best {
        Some((e, idx)) => {
            trace.push(format!("facet pin #{idx} wins with energy {e:.6}"));
            outcome_from_solution(Method::FacetGuessing, h, llr, &solutions[idx], work, trace)
        }
        None => {
            trace.push("no facet pin produced a codeword".into());
            outcome_from_solution(Method::FacetGuessing, h, llr, &bare, work, trace)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LggConfig {
    pub seed: u64,
    /// Pinned-bit attempts before giving up; `None` lets every candidate
    /// loop's bits be tried.
    pub max_attempts: Option<usize>,
    /// Alternative loops to fall back to after the first is exhausted.
    pub max_loops: usize,
}

impl Default for LggConfig {
    fn default() -> Self {
        LggConfig {
            seed: 0,
            max_attempts: None,
            max_loops: 3,
        }
    }
}

/// Loop Guided Guessing: bare LP, then pin bits of the critical loop in
/// random order, two LPs per bit, accepting the first (lower-objective)
/// integral result.
pub fn loop_guided_decode(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
    config: &LggConfig,
) -> DecodeOutcome {
    let bare = solve_lp(&build_lp(h, llr).expect("valid decoding instance"));
    let mut work = WorkCounters {
        lp_solves: 1,
        ..Default::default()
    };
    let mut trace = vec![format!("bare LP: {:?}", bare.classification)];
    if bare.classification == Classification::IntegralCodeword {
        return outcome_from_solution(Method::Lgg, h, llr, &bare, work, trace);
    }

    let beliefs = BeliefState::from_lp(h, &bare);
    let candidates = loops::critical_loops(h, &beliefs, config.max_loops);
    work.loops_searched = candidates.len();
    if candidates.is_empty() {
        trace.push("no critical loop found".into());
        return outcome_from_solution(Method::Lgg, h, llr, &bare, work, trace);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let budget = config
        .max_attempts
        .unwrap_or_else(|| candidates.iter().map(|c| c.bits.len()).sum());
    let mut attempts = 0usize;
    for (rank, critical) in candidates.iter().enumerate() {
        let mut order = critical.bits.clone();
        order.shuffle(&mut rng);
        for &i in &order {
            if attempts >= budget {
                trace.push(format!("attempt budget {budget} exhausted"));
                return outcome_from_solution(Method::Lgg, h, llr, &bare, work, trace);
            }
            attempts += 1;
            let pair = [
                lp::lp_with_pinned_bit(h, llr, i, 0).expect("pin in range"),
                lp::lp_with_pinned_bit(h, llr, i, 1).expect("pin in range"),
            ];
            work.lp_solves += 2;
            let winner = pair
                .iter()
                .filter(|s| {
                    s.status == LpStatus::Optimal
                        && s.classification == Classification::IntegralCodeword
                })
                .min_by(|a, b| {
                    integral_energy(llr, &a.rounded())
                        .partial_cmp(&integral_energy(llr, &b.rounded()))
                        .unwrap()
                });
            trace.push(format!(
                "loop #{rank}, pin b{i}: {}",
                if winner.is_some() { "corrected" } else { "still fractional" }
            ));
            if let Some(sol) = winner {
                return outcome_from_solution(Method::Lgg, h, llr, sol, work, trace);
            }
        }
    }
    trace.push("all loop bits exhausted".into());
    outcome_from_solution(Method::Lgg, h, llr, &bare, work, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcSource {
    Pcs,
    MonteCarlo,
}

/// A pseudo-codeword together with its instanton noise, as persisted in the
/// JSON-lines catalog.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoCodeword {
    pub omega: Vec<f64>,
    pub d_eff: f64,
    pub instanton: Vec<f64>,
    pub snr_param: f64,
    pub source: PcSource,
    pub critical_loop: Option<CriticalLoop>,
    pub seed: u64,
}

impl PseudoCodeword {
    pub fn instanton_output(&self) -> ChannelOutput {
        ChannelOutput {
            x: self.instanton.clone(),
            snr_param: self.snr_param,
        }
    }

    pub fn instanton_llr(&self) -> LlrVector {
        channel::llr_from_output(&self.instanton_output())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PcsConfig {
    /// Stop when d_eff moves less than this between iterations.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative scaling past the decision boundary for the stored instanton.
    pub margin: f64,
    pub integrality_tol: f64,
}

impl Default for PcsConfig {
    fn default() -> Self {
        PcsConfig {
            tol: 1e-6,
            max_iter: 50,
            margin: 1e-6,
            integrality_tol: lp::DEFAULT_INTEGRALITY_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PcsResult {
    Found(PseudoCodeword),
    /// The walk fell back to the transmitted codeword: the start was too weak.
    ConvergedToCodeword {
        iterations: usize,
    },
}

#[derive(Debug, Clone)]
pub struct PcsRun {
    pub result: PcsResult,
    /// Effective distance after each LP solve.
    pub d_eff_history: Vec<f64>,
    /// True when the history is non-increasing (up to 1e-9); the midpoint
    /// update should never climb, violations are worth logging upstream.
    pub monotonic: bool,
}

/// Pseudo-codeword search: alternate LP decoding with the instanton-midpoint
/// noise update until the effective distance stalls.
pub fn pcs_search(
    h: &ParityCheckMatrix,
    s2: f64,
    x_init: &ChannelOutput,
    config: &PcsConfig,
) -> PcsRun {
    let mut x = ChannelOutput {
        x: x_init.x.clone(),
        snr_param: s2,
    };
    let mut history: Vec<f64> = Vec::new();
    let mut last: Option<(Vec<f64>, LpSolution)> = None;
    for iter in 0..config.max_iter {
        let llr = channel::llr_from_output(&x);
        let sol = solve_lp(&build_lp(h, &llr).expect("valid decoding instance"));
        if sol.status != LpStatus::Optimal {
            break;
        }
        if sol.classification == Classification::IntegralCodeword && sol.rounded().is_zero() {
            return PcsRun {
                result: PcsResult::ConvergedToCodeword { iterations: iter },
                monotonic: is_monotonic(&history),
                d_eff_history: history,
            };
        }
        let omega = sol.bit_values.clone();
        let d = channel::effective_distance(&omega).expect("nonzero LP output");
        let stalled = history.last().is_some_and(|&p| (p - d).abs() < config.tol);
        history.push(d);
        x = channel::instanton_noise_with_margin(&omega, s2, config.margin)
            .expect("nonzero omega");
        last = Some((omega, sol));
        if stalled {
            break;
        }
    }
    let Some((omega, sol)) = last else {
        return PcsRun {
            result: PcsResult::ConvergedToCodeword { iterations: 0 },
            monotonic: true,
            d_eff_history: history,
        };
    };
    let beliefs = BeliefState::from_lp(h, &sol);
    let critical_loop = loops::find_critical_loop(h, &beliefs);
    let instanton = channel::instanton_noise_with_margin(&omega, s2, config.margin)
        .expect("nonzero omega");
    let pc = PseudoCodeword {
        d_eff: channel::effective_distance(&omega).expect("nonzero omega"),
        omega,
        instanton: instanton.x,
        snr_param: s2,
        source: PcSource::Pcs,
        critical_loop,
        seed: 0,
    };
    PcsRun {
        result: PcsResult::Found(pc),
        monotonic: is_monotonic(&history),
        d_eff_history: history,
    }
}

fn is_monotonic(history: &[f64]) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + 1e-9)
}

/// Strong-noise restart distribution: one AWGN frame at an effective
/// s^2 drawn uniformly from [0.5, 1.0].
fn restart_noise(n: usize, rng: &mut impl Rng) -> ChannelOutput {
    let s2_eff = rng.random_range(0.5..1.0);
    channel::sample_awgn(&BitVector::zeros(n), s2_eff, rng).expect("positive snr")
}

/// Repeated PCS from random strong-noise starts; the catalog is deduplicated
/// (omega within 1e-4 in max-norm) and sorted by effective distance.
pub fn pcs_catalog(
    h: &ParityCheckMatrix,
    restarts: usize,
    seed: u64,
    config: &PcsConfig,
) -> Vec<PseudoCodeword> {
    let found: Vec<PseudoCodeword> = (0..restarts)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = substream_rng(seed, r as u64);
            let x_init = restart_noise(h.n_bits(), &mut rng);
            match pcs_search(h, 1.0, &x_init, config).result {
                PcsResult::Found(mut pc) => {
                    pc.seed = r as u64;
                    Some(pc)
                }
                PcsResult::ConvergedToCodeword { .. } => None,
            }
        })
        .collect();
    dedup_catalog(found)
}

const CATALOG_DEDUP_TOL: f64 = 1e-4;

fn dedup_catalog(mut found: Vec<PseudoCodeword>) -> Vec<PseudoCodeword> {
    found.sort_by(|a, b| a.d_eff.partial_cmp(&b.d_eff).unwrap());
    let mut kept: Vec<PseudoCodeword> = Vec::new();
    'next: for pc in found {
        for other in &kept {
            let dist = pc
                .omega
                .iter()
                .zip(&other.omega)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if dist <= CATALOG_DEDUP_TOL {
                continue 'next;
            }
        }
        kept.push(pc);
    }
    kept
}

/// Result of the successful-bit scan for one pseudo-codeword.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuccessfulBits {
    pub bits: Vec<usize>,
    /// True when the bare LP already decodes the instanton to the
    /// transmitted codeword, making the notion vacuous.
    pub vacuous: bool,
}

/// The bits whose pinned LP (to the transmitted value 0) decodes the
/// pseudo-codeword's instanton back to the zero codeword.
pub fn successful_bits(h: &ParityCheckMatrix, pc: &PseudoCodeword) -> SuccessfulBits {
    let llr = pc.instanton_llr();
    let bare = solve_lp(&build_lp(h, &llr).expect("valid decoding instance"));
    if bare.classification == Classification::IntegralCodeword && bare.rounded().is_zero() {
        return SuccessfulBits {
            bits: Vec::new(),
            vacuous: true,
        };
    }
    let bits = (0..h.n_bits())
        .into_par_iter()
        .filter(|&i| {
            let sol = lp::lp_with_pinned_bit(h, &llr, i, 0).expect("pin in range");
            sol.status == LpStatus::Optimal
                && sol.classification == Classification::IntegralCodeword
                && sol.rounded().is_zero()
        })
        .collect();
    SuccessfulBits {
        bits,
        vacuous: false,
    }
}
