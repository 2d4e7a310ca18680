//! Loop-series machinery: generalized loops, the loop term r(C) around a set
//! of trial beliefs, check-local triad weights, and the critical-loop search
//! used to explain individual LP failures.
//!
//! The series is Z = Z_0 (1 + sum_C r(C)) over generalized loops C, with Z_0
//! the Bethe value exp(-F). A generalized loop is a non-empty subset of
//! Tanner-graph edges in which every touched vertex (bit or check) keeps
//! degree at least 2. Each loop's term factorizes over its vertices:
//!
//!   r(C) = prod_{i in C} E_{b_i}[(s_i - m_i)^{q_i}] / (1 - m_i^2)^{q_i}
//!        * prod_{a in C} E_{b_a}[prod_{i in C cap a} (s_i - m_i)]
//!
//! where s = 1 - 2 sigma is the spin, m_i = b_i(0) - b_i(1) and q_i is the
//! bit's degree within the loop.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{self, BeliefState, BpError};
use crate::channel::LlrVector;
use crate::exact::{self, ExactError};
use crate::tanner::{ParityCheckMatrix, TannerError};

/// Exhaustive loop enumeration walks all 2^E edge subsets; refuse anything
/// beyond desk scale.
pub const EDGE_ENUMERATION_CAP: usize = 20;

/// Triad magnitudes tried in turn by the critical-loop search, strongest
/// correlations first.
pub const TRIAD_THRESHOLDS: [f64; 7] = [0.999, 0.95, 0.9, 0.8, 0.7, 0.5, 0.3];

/// Cap on cycles collected per threshold during the critical-loop search.
const CYCLE_CAP: usize = 50;

/// Cap on DFS expansions per threshold, guarding against dense triad graphs.
const DFS_EXPANSION_CAP: usize = 200_000;

/// A bit variance below this is treated as frozen; correlations through a
/// frozen bit are reported as zero rather than 0/0.
const VARIANCE_FLOOR: f64 = 1e-24;

#[derive(Debug, Error)]
pub enum LoopsError {
    #[error(transparent)]
    Tanner(#[from] TannerError),
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("graph has {0} edges, exhaustive loop enumeration capped at {EDGE_ENUMERATION_CAP}")]
    EdgeCap(usize),
    #[error("edge {0} out of range")]
    EdgeOutOfRange(usize),
}

/// A generalized loop, stored as the sorted set of participating edge ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralizedLoop {
    pub edges: Vec<usize>,
}

impl GeneralizedLoop {
    /// Validates the degree condition: every touched bit and check must be
    /// incident to at least two of the subset's edges.
    pub fn new(h: &ParityCheckMatrix, mut edges: Vec<usize>) -> Result<Self, LoopsError> {
        edges.sort_unstable();
        edges.dedup();
        for &e in &edges {
            if e >= h.num_edges() {
                return Err(LoopsError::EdgeOutOfRange(e));
            }
        }
        let lp = GeneralizedLoop { edges };
        let bits = lp.bit_degrees(h);
        let checks = lp.check_slots(h);
        if lp.edges.is_empty()
            || bits.values().any(|&q| q < 2)
            || checks.values().any(|s| s.len() < 2)
        {
            return Err(LoopsError::Tanner(TannerError::Invalid(
                "edge subset is not a generalized loop".into(),
            )));
        }
        Ok(lp)
    }

    /// Loop degree q_i of every touched bit.
    pub fn bit_degrees(&self, h: &ParityCheckMatrix) -> BTreeMap<usize, usize> {
        let mut deg = BTreeMap::new();
        for &e in &self.edges {
            let (alpha, slot) = edge_endpoints(h, e);
            *deg.entry(h.row(alpha)[slot]).or_insert(0) += 1;
        }
        deg
    }

    /// The slots (within each check's row) the loop occupies.
    pub fn check_slots(&self, h: &ParityCheckMatrix) -> BTreeMap<usize, Vec<usize>> {
        let mut slots: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &e in &self.edges {
            let (alpha, slot) = edge_endpoints(h, e);
            slots.entry(alpha).or_default().push(slot);
        }
        slots
    }

    pub fn bits(&self, h: &ParityCheckMatrix) -> Vec<usize> {
        self.bit_degrees(h).into_keys().collect()
    }

    pub fn checks(&self, h: &ParityCheckMatrix) -> Vec<usize> {
        self.check_slots(h).into_keys().collect()
    }

    /// True when every vertex has loop degree exactly 2 (a simple cycle or
    /// disjoint union of cycles).
    pub fn is_single_connected(&self, h: &ParityCheckMatrix) -> bool {
        self.bit_degrees(h).values().all(|&q| q == 2)
            && self.check_slots(h).values().all(|s| s.len() == 2)
    }
}

/// Inverts `ParityCheckMatrix::edge_index`.
fn edge_endpoints(h: &ParityCheckMatrix, e: usize) -> (usize, usize) {
    // edges are laid out row after row; binary-search the owning check
    let mut lo = 0usize;
    let mut hi = h.n_checks();
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if h.edge_index(mid, 0) <= e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, e - h.edge_index(lo, 0))
}

/// The loop term r(C) of the series around `beliefs`. Loops through a frozen
/// bit (vanishing variance) contribute zero.
pub fn loop_term(h: &ParityCheckMatrix, beliefs: &BeliefState, lp: &GeneralizedLoop) -> f64 {
    let mut r = 1.0f64;
    for (i, q) in lp.bit_degrees(h) {
        let m = beliefs.magnetizations[i];
        let var = 1.0 - m * m;
        if var < VARIANCE_FLOOR {
            return 0.0;
        }
        let [b0, b1] = beliefs.bit_beliefs[i];
        let q = q as i32;
        let moment = b0 * (1.0 - m).powi(q) + b1 * (-1.0 - m).powi(q);
        r *= moment / var.powi(q);
    }
    for (alpha, slots) in lp.check_slots(h) {
        let lcs = h.local_codewords(alpha).expect("degree within cap");
        let row = h.row(alpha);
        let mut expectation = 0.0;
        for (k, &lc) in lcs.iter().enumerate() {
            let p = beliefs.check_beliefs[alpha][k];
            let mut prod = 1.0;
            for &slot in &slots {
                let s = 1.0 - 2.0 * (lc >> slot & 1) as f64;
                prod *= s - beliefs.magnetizations[row[slot]];
            }
            expectation += p * prod;
        }
        r *= expectation;
    }
    r
}

/// Check-local correlation of two of a check's bits under its belief:
/// Cov(s_i, s_j) / sqrt(Var(s_i) Var(s_j)), all moments taken under b_alpha.
/// Bounded by 1 in magnitude; zero when either bit is frozen. For beliefs
/// satisfying the marginalization constraints, the product of triad weights
/// around a simple cycle equals that cycle's loop term.
pub fn triad_weight(h: &ParityCheckMatrix, beliefs: &BeliefState, alpha: usize, i: usize, j: usize) -> f64 {
    let (Some(si), Some(sj)) = (h.slot_of(alpha, i), h.slot_of(alpha, j)) else {
        return 0.0;
    };
    let lcs = h.local_codewords(alpha).expect("degree within cap");
    let dist = &beliefs.check_beliefs[alpha];
    let (mut ei, mut ej, mut eij) = (0.0f64, 0.0f64, 0.0f64);
    for (k, &lc) in lcs.iter().enumerate() {
        let p = dist[k];
        let a = 1.0 - 2.0 * (lc >> si & 1) as f64;
        let b = 1.0 - 2.0 * (lc >> sj & 1) as f64;
        ei += p * a;
        ej += p * b;
        eij += p * a * b;
    }
    let vi = 1.0 - ei * ei;
    let vj = 1.0 - ej * ej;
    if vi < VARIANCE_FLOOR || vj < VARIANCE_FLOOR {
        return 0.0;
    }
    ((eij - ei * ej) / (vi * vj).sqrt()).clamp(-1.0, 1.0)
}

/// A simple alternating cycle of strong triads: `checks[k]` joins `bits[k]`
/// to `bits[(k + 1) % len]`. `r` is the cycle's loop term, computed as the
/// product of its triad weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLoop {
    pub bits: Vec<usize>,
    pub checks: Vec<usize>,
    pub r: f64,
}

impl CriticalLoop {
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The cycle as a generalized loop over edge ids.
    pub fn generalized(&self, h: &ParityCheckMatrix) -> Result<GeneralizedLoop, LoopsError> {
        let n = self.bits.len();
        let mut edges = Vec::with_capacity(2 * n);
        for k in 0..n {
            let alpha = self.checks[k];
            for &i in &[self.bits[k], self.bits[(k + 1) % n]] {
                let slot = h
                    .slot_of(alpha, i)
                    .ok_or(LoopsError::Tanner(TannerError::Invalid(
                        "critical loop references a non-incident pair".into(),
                    )))?;
                edges.push(h.edge_index(alpha, slot));
            }
        }
        GeneralizedLoop::new(h, edges)
    }
}

/// Searches for simple cycles of strongly correlated triads around `beliefs`,
/// relaxing the magnitude threshold through [`TRIAD_THRESHOLDS`] until
/// `max_loops` distinct cycles are collected (or the thresholds run out).
/// Returns up to `max_loops` cycles, strongest |r| first.
pub fn critical_loops(
    h: &ParityCheckMatrix,
    beliefs: &BeliefState,
    max_loops: usize,
) -> Vec<CriticalLoop> {
    let mut collected: Vec<CriticalLoop> = Vec::new();
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    for &threshold in TRIAD_THRESHOLDS.iter() {
        for cycle in cycles_at_threshold(h, beliefs, threshold) {
            let mut key_bits = cycle.bits.clone();
            let mut key_checks = cycle.checks.clone();
            key_bits.sort_unstable();
            key_checks.sort_unstable();
            if seen.insert((key_bits, key_checks)) {
                collected.push(cycle);
            }
        }
        if collected.len() >= max_loops {
            break;
        }
    }
    collected.sort_by(|a, b| b.r.abs().partial_cmp(&a.r.abs()).unwrap());
    collected.truncate(max_loops);
    collected
}

/// The strongest critical loop, if any threshold yields one.
pub fn find_critical_loop(h: &ParityCheckMatrix, beliefs: &BeliefState) -> Option<CriticalLoop> {
    critical_loops(h, beliefs, 1).into_iter().next()
}

fn cycles_at_threshold(
    h: &ParityCheckMatrix,
    beliefs: &BeliefState,
    threshold: f64,
) -> Vec<CriticalLoop> {
    // bit-to-bit adjacency through strong triads
    let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); h.n_bits()];
    for alpha in 0..h.n_checks() {
        let row = h.row(alpha);
        for a in 0..row.len() {
            for b in a + 1..row.len() {
                let (i, j) = (row[a], row[b]);
                let w = triad_weight(h, beliefs, alpha, i, j);
                if w.abs() >= threshold {
                    adj[i].push((j, alpha, w));
                    adj[j].push((i, alpha, w));
                }
            }
        }
    }

    let mut cycles = Vec::new();
    let mut seen: HashSet<(Vec<usize>, Vec<usize>)> = HashSet::new();
    let mut expansions = 0usize;
    // DFS rooted at each bit, visiting only larger-indexed bits so every
    // cycle is found from its smallest bit
    for start in 0..h.n_bits() {
        if adj[start].is_empty() {
            continue;
        }
        let mut path_bits = vec![start];
        let mut path_checks: Vec<usize> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        dfs_cycles(
            &adj,
            start,
            &mut path_bits,
            &mut path_checks,
            &mut weights,
            &mut cycles,
            &mut seen,
            &mut expansions,
        );
        if cycles.len() >= CYCLE_CAP || expansions >= DFS_EXPANSION_CAP {
            break;
        }
    }
    cycles
}

#[allow(clippy::too_many_arguments)]
fn dfs_cycles(
    adj: &[Vec<(usize, usize, f64)>],
    start: usize,
    path_bits: &mut Vec<usize>,
    path_checks: &mut Vec<usize>,
    weights: &mut Vec<f64>,
    cycles: &mut Vec<CriticalLoop>,
    seen: &mut HashSet<(Vec<usize>, Vec<usize>)>,
    expansions: &mut usize,
) {
    if cycles.len() >= CYCLE_CAP || *expansions >= DFS_EXPANSION_CAP {
        return;
    }
    *expansions += 1;
    let current = *path_bits.last().unwrap();
    for &(next, alpha, w) in &adj[current] {
        if path_checks.contains(&alpha) {
            continue;
        }
        if next == start {
            if path_bits.len() >= 2 {
                let mut key_bits = path_bits.clone();
                let mut key_checks = path_checks.clone();
                key_checks.push(alpha);
                key_bits.sort_unstable();
                key_checks.sort_unstable();
                if seen.insert((key_bits, key_checks)) {
                    let mut checks = path_checks.clone();
                    checks.push(alpha);
                    let r = weights.iter().product::<f64>() * w;
                    cycles.push(CriticalLoop {
                        bits: path_bits.clone(),
                        checks,
                        r,
                    });
                }
            }
            continue;
        }
        if next <= start || path_bits.contains(&next) {
            continue;
        }
        path_bits.push(next);
        path_checks.push(alpha);
        weights.push(w);
        dfs_cycles(adj, start, path_bits, path_checks, weights, cycles, seen, expansions);
        path_bits.pop();
        path_checks.pop();
        weights.pop();
    }
}

/// All generalized loops of the graph, by exhaustion over edge subsets.
pub fn enumerate_generalized_loops(
    h: &ParityCheckMatrix,
) -> Result<Vec<GeneralizedLoop>, LoopsError> {
    let ne = h.num_edges();
    if ne > EDGE_ENUMERATION_CAP {
        return Err(LoopsError::EdgeCap(ne));
    }
    let endpoints: Vec<(usize, usize)> = (0..ne)
        .map(|e| {
            let (alpha, slot) = edge_endpoints(h, e);
            (h.row(alpha)[slot], alpha)
        })
        .collect();
    let mut loops = Vec::new();
    'mask: for mask in 1u64..(1 << ne) {
        let mut bit_deg: BTreeMap<usize, usize> = BTreeMap::new();
        let mut check_deg: BTreeMap<usize, usize> = BTreeMap::new();
        for (e, &(i, alpha)) in endpoints.iter().enumerate() {
            if mask >> e & 1 == 1 {
                *bit_deg.entry(i).or_insert(0) += 1;
                *check_deg.entry(alpha).or_insert(0) += 1;
            }
        }
        if bit_deg.values().any(|&q| q < 2) || check_deg.values().any(|&q| q < 2) {
            continue 'mask;
        }
        loops.push(GeneralizedLoop {
            edges: (0..ne).filter(|&e| mask >> e & 1 == 1).collect(),
        });
    }
    Ok(loops)
}

/// One exactness check of the loop series on a small code: BP is run to a
/// fixed point, the full series is summed, and both the bare Bethe estimate
/// and the resummed value are compared against exact enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopSeriesReport {
    pub n_bits: usize,
    pub n_checks: usize,
    pub loop_count: usize,
    pub bp_converged: bool,
    pub z_exact: f64,
    pub z_bethe: f64,
    pub z_loop: f64,
    pub series_sum: f64,
    pub bethe_relative_error: f64,
    pub loop_relative_error: f64,
}

pub fn verify_loop_series(
    h: &ParityCheckMatrix,
    llr: &LlrVector,
) -> Result<LoopSeriesReport, LoopsError> {
    let run = bp::bp_decode_full(h, llr, 5000, 1e-13);
    let beliefs = bp::beliefs_from_messages(h, llr, &run.state);
    let bethe = bp::bethe_free_energy(h, llr, &beliefs)?;
    let z_bethe = (-bethe.free_energy).exp();
    let loops = enumerate_generalized_loops(h)?;
    let series_sum: f64 = loops.iter().map(|lp| loop_term(h, &beliefs, lp)).sum();
    let z_loop = z_bethe * (1.0 + series_sum);
    let z_exact = exact::partition_function(h, llr)?;
    Ok(LoopSeriesReport {
        n_bits: h.n_bits(),
        n_checks: h.n_checks(),
        loop_count: loops.len(),
        bp_converged: run.converged,
        z_exact,
        z_bethe,
        z_loop,
        series_sum,
        bethe_relative_error: (z_bethe - z_exact).abs() / z_exact,
        loop_relative_error: (z_loop - z_exact).abs() / z_exact,
    })
}

/// Beliefs assembled from exact enumeration; by construction they satisfy
/// the marginalization constraints to machine precision.
pub fn exact_beliefs(h: &ParityCheckMatrix, llr: &LlrVector) -> Result<BeliefState, LoopsError> {
    let bit_beliefs: Vec<[f64; 2]> = exact::map_marginals(h, llr)?
        .into_iter()
        .map(|p| [p[0], p[1]])
        .collect();
    let magnetizations = bit_beliefs.iter().map(|b| b[0] - b[1]).collect();
    let check_beliefs = (0..h.n_checks())
        .map(|alpha| exact::check_marginals(h, llr, alpha))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BeliefState {
        bit_beliefs,
        check_beliefs,
        magnetizations,
    })
}

/// Sorted, deduplicated bit set of a collection of loops; used by the guided
/// decoders to know which bits to manipulate.
pub fn loop_bit_union(h: &ParityCheckMatrix, loops: &[CriticalLoop]) -> Vec<usize> {
    let set: BTreeSet<usize> = loops.iter().flat_map(|c| c.bits.iter().copied()).collect();
    let _ = h;
    set.into_iter().collect()
}
