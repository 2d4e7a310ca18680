//! Code and graph representation: sparse parity-check matrices, Tanner-graph
//! adjacency, alist I/O, and builders for the codes used throughout the crate.
//!
//! A parity-check matrix is stored as two mutually consistent adjacency lists
//! (per-check bit indices and per-bit check indices). All indices are 0-based
//! internally; the alist format converts from/to 1-based on the way in and out.

use std::fmt::Write as _;

use thiserror::Error;

/// Checks with degree above this are refused by [`ParityCheckMatrix::local_codewords`];
/// the enumeration is exponential in the degree.
pub const LOCAL_CODEWORD_DEGREE_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum TannerError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid matrix: {0}")]
    Invalid(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("check {check} has degree {degree}, above the enumeration cap {cap}")]
    DegreeCap {
        check: usize,
        degree: usize,
        cap: usize,
    },
}

/// A binary word of length `n_bits`, over {0, 1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector(pub Vec<u8>);

impl BitVector {
    pub fn zeros(n: usize) -> Self {
        BitVector(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// In-place GF(2) addition.
    pub fn add_assign(&mut self, other: &BitVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }
}

impl std::ops::Index<usize> for BitVector {
    type Output = u8;
    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

/// Sparse binary M x N parity-check matrix with bipartite Tanner-graph
/// adjacency. Immutable after construction; shareable across decoding trials.
#[derive(Debug, Clone)]
pub struct ParityCheckMatrix {
    n_bits: usize,
    n_checks: usize,
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
    /// Prefix sums of row degrees; edge (check, slot) gets the flat id
    /// `row_offsets[check] + slot`.
    row_offsets: Vec<usize>,
    /// Per bit: (check, flat edge id) pairs, aligned with `cols`.
    col_edges: Vec<Vec<(usize, usize)>>,
}

impl ParityCheckMatrix {
    /// Builds a matrix from per-check bit lists, validating the invariants:
    /// indices in range, no duplicates within a row, every bit used at least
    /// once, every check of degree at least 2.
    pub fn new(n_bits: usize, rows: Vec<Vec<usize>>) -> Result<Self, TannerError> {
        let n_checks = rows.len();
        let mut sorted_rows = Vec::with_capacity(n_checks);
        for (alpha, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(TannerError::Invalid(format!(
                    "check {alpha} has a repeated bit index"
                )));
            }
            if row.len() < 2 {
                return Err(TannerError::Invalid(format!(
                    "check {alpha} has degree {} < 2",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&i| i >= n_bits) {
                return Err(TannerError::Invalid(format!(
                    "check {alpha} references bit {bad} >= {n_bits}"
                )));
            }
            sorted_rows.push(row);
        }
        let mut cols = vec![Vec::new(); n_bits];
        for (alpha, row) in sorted_rows.iter().enumerate() {
            for &i in row {
                cols[i].push(alpha);
            }
        }
        if let Some(i) = cols.iter().position(|c| c.is_empty()) {
            return Err(TannerError::Invalid(format!("bit {i} has degree 0")));
        }
        let mut row_offsets = Vec::with_capacity(n_checks + 1);
        let mut acc = 0;
        for row in &sorted_rows {
            row_offsets.push(acc);
            acc += row.len();
        }
        row_offsets.push(acc);
        let mut col_edges = vec![Vec::new(); n_bits];
        for (alpha, row) in sorted_rows.iter().enumerate() {
            for (slot, &i) in row.iter().enumerate() {
                col_edges[i].push((alpha, row_offsets[alpha] + slot));
            }
        }
        Ok(ParityCheckMatrix {
            n_bits,
            n_checks,
            rows: sorted_rows,
            cols,
            row_offsets,
            col_edges,
        })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn n_checks(&self) -> usize {
        self.n_checks
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn cols(&self) -> &[Vec<usize>] {
        &self.cols
    }

    pub fn row(&self, alpha: usize) -> &[usize] {
        &self.rows[alpha]
    }

    pub fn col(&self, i: usize) -> &[usize] {
        &self.cols[i]
    }

    pub fn bit_degree(&self, i: usize) -> usize {
        self.cols[i].len()
    }

    pub fn check_degree(&self, alpha: usize) -> usize {
        self.rows[alpha].len()
    }

    pub fn num_edges(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    /// Flat id of the edge at `slot` within check `alpha`'s row.
    pub fn edge_index(&self, alpha: usize, slot: usize) -> usize {
        self.row_offsets[alpha] + slot
    }

    /// Per-bit adjacency with flat edge ids, aligned with `cols`.
    pub fn col_edges(&self, i: usize) -> &[(usize, usize)] {
        &self.col_edges[i]
    }

    /// Position of bit `i` within check `alpha`'s row, if incident.
    pub fn slot_of(&self, alpha: usize, i: usize) -> Option<usize> {
        self.rows[alpha].binary_search(&i).ok()
    }

    /// Mod-2 syndrome of `word`: component alpha is the parity of `word`
    /// restricted to check alpha.
    pub fn syndrome(&self, word: &BitVector) -> Result<BitVector, TannerError> {
        if word.len() != self.n_bits {
            return Err(TannerError::LengthMismatch {
                expected: self.n_bits,
                got: word.len(),
            });
        }
        let s = self
            .rows
            .iter()
            .map(|row| row.iter().fold(0u8, |acc, &i| acc ^ word[i]))
            .collect();
        Ok(BitVector(s))
    }

    /// All even-weight configurations on the bits of check `alpha`, as slot
    /// bitmasks in the order of `row(alpha)`. Exactly `2^(deg-1)` entries.
    pub fn local_codewords(&self, alpha: usize) -> Result<Vec<u32>, TannerError> {
        let deg = self.check_degree(alpha);
        if deg > LOCAL_CODEWORD_DEGREE_CAP {
            return Err(TannerError::DegreeCap {
                check: alpha,
                degree: deg,
                cap: LOCAL_CODEWORD_DEGREE_CAP,
            });
        }
        Ok((0u32..(1 << deg))
            .filter(|w| w.count_ones() % 2 == 0)
            .collect())
    }

    /// Shortest cycle length in the Tanner graph, or `None` for a forest.
    /// Cycle lengths are even (bipartite), counted in edges.
    pub fn girth(&self) -> Option<usize> {
        // BFS from every bit node; a cycle through the root is detected when
        // two BFS branches meet.
        let nv = self.n_bits + self.n_checks;
        let mut best: Option<usize> = None;
        let mut dist = vec![usize::MAX; nv];
        let mut parent = vec![usize::MAX; nv];
        for root in 0..self.n_bits {
            dist.iter_mut().for_each(|d| *d = usize::MAX);
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            dist[root] = 0;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                if let Some(b) = best {
                    if 2 * dist[v] >= b {
                        continue;
                    }
                }
                let neighbors: Vec<usize> = if v < self.n_bits {
                    self.cols[v].iter().map(|&a| self.n_bits + a).collect()
                } else {
                    self.rows[v - self.n_bits].clone()
                };
                for w in neighbors {
                    if w == parent[v] {
                        continue;
                    }
                    if dist[w] == usize::MAX {
                        dist[w] = dist[v] + 1;
                        parent[w] = v;
                        queue.push_back(w);
                    } else {
                        let len = dist[v] + dist[w] + 1;
                        if best.is_none_or(|b| len < b) {
                            best = Some(len);
                        }
                    }
                }
            }
        }
        best
    }

    /// GF(2) rank, by Gaussian elimination on bit-packed rows.
    pub fn gf2_rank(&self) -> usize {
        let words = self.n_bits.div_ceil(64);
        let mut mat: Vec<Vec<u64>> = self
            .rows
            .iter()
            .map(|row| {
                let mut r = vec![0u64; words];
                for &i in row {
                    r[i / 64] |= 1 << (i % 64);
                }
                r
            })
            .collect();
        let mut rank = 0;
        for col in 0..self.n_bits {
            let (w, b) = (col / 64, col % 64);
            let Some(pivot) = (rank..mat.len()).find(|&r| mat[r][w] >> b & 1 == 1) else {
                continue;
            };
            mat.swap(rank, pivot);
            let pivot_row = mat[rank].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r != rank && row[w] >> b & 1 == 1 {
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// Basis of the code (nullspace of H over GF(2)), one `BitVector` per
    /// dimension.
    pub fn nullspace_basis(&self) -> Vec<BitVector> {
        let n = self.n_bits;
        let mut mat: Vec<Vec<u8>> = self
            .rows
            .iter()
            .map(|row| {
                let mut r = vec![0u8; n];
                for &i in row {
                    r[i] = 1;
                }
                r
            })
            .collect();
        let mut pivot_col_of_row = Vec::new();
        let mut rank = 0;
        for col in 0..n {
            let Some(p) = (rank..mat.len()).find(|&r| mat[r][col] == 1) else {
                continue;
            };
            mat.swap(rank, p);
            for r in 0..mat.len() {
                if r != rank && mat[r][col] == 1 {
                    let (head, tail) = mat.split_at_mut(rank.max(r));
                    let (a, b) = if r < rank {
                        (&mut head[r], &tail[0])
                    } else {
                        (&mut tail[0], &head[rank])
                    };
                    for (x, y) in a.iter_mut().zip(b.iter()) {
                        *x ^= y;
                    }
                }
            }
            pivot_col_of_row.push(col);
            rank += 1;
        }
        let pivot_set: std::collections::HashSet<usize> = pivot_col_of_row.iter().copied().collect();
        let mut basis = Vec::new();
        for free in (0..n).filter(|c| !pivot_set.contains(c)) {
            let mut v = vec![0u8; n];
            v[free] = 1;
            for (r, &pc) in pivot_col_of_row.iter().enumerate() {
                if mat[r][free] == 1 {
                    v[pc] = 1;
                }
            }
            basis.push(BitVector(v));
        }
        basis
    }
}

/// Parses the MacKay alist format. Zero entries in adjacency lines are
/// padding and are dropped.
pub fn parse_alist(text: &str) -> Result<ParityCheckMatrix, TannerError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let mut next_line = |what: &str| -> Result<(usize, Vec<i64>), TannerError> {
        let (idx, line) = lines.next().ok_or(TannerError::Parse {
            line: 0,
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        let nums: Result<Vec<i64>, _> = line.split_whitespace().map(str::parse).collect();
        match nums {
            Ok(v) => Ok((idx + 1, v)),
            Err(_) => Err(TannerError::Parse {
                line: idx + 1,
                msg: format!("expected integers ({what})"),
            }),
        }
    };

    let (lno, header) = next_line("header \"N M\"")?;
    let [n, m] = header[..] else {
        return Err(TannerError::Parse {
            line: lno,
            msg: "malformed header, expected exactly \"N M\"".into(),
        });
    };
    if n <= 0 || m <= 0 {
        return Err(TannerError::Parse {
            line: lno,
            msg: format!("nonpositive dimensions {n} {m}"),
        });
    }
    let (n, m) = (n as usize, m as usize);

    let (lno, maxdeg) = next_line("max degrees")?;
    if maxdeg.len() != 2 {
        return Err(TannerError::Parse {
            line: lno,
            msg: "expected \"max_col_deg max_row_deg\"".into(),
        });
    }
    let (lno, col_degs) = next_line("column degrees")?;
    if col_degs.len() != n {
        return Err(TannerError::Parse {
            line: lno,
            msg: format!("expected {n} column degrees, got {}", col_degs.len()),
        });
    }
    let (lno, row_degs) = next_line("row degrees")?;
    if row_degs.len() != m {
        return Err(TannerError::Parse {
            line: lno,
            msg: format!("expected {m} row degrees, got {}", row_degs.len()),
        });
    }

    // Column adjacency: validated against the declared degrees, then
    // discarded; rows are authoritative and cross-checked below.
    let mut col_adj: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let (lno, entries) = next_line("column adjacency")?;
        let checks: Vec<usize> = entries
            .iter()
            .filter(|&&e| e != 0)
            .map(|&e| {
                if e < 1 || e > m as i64 {
                    Err(TannerError::Parse {
                        line: lno,
                        msg: format!("check index {e} out of range 1..={m}"),
                    })
                } else {
                    Ok(e as usize - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        if checks.len() != col_degs[i] as usize {
            return Err(TannerError::Parse {
                line: lno,
                msg: format!(
                    "bit {} lists {} checks but declares degree {}",
                    i + 1,
                    checks.len(),
                    col_degs[i]
                ),
            });
        }
        col_adj.push(checks);
    }

    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m);
    for alpha in 0..m {
        let (lno, entries) = next_line("row adjacency")?;
        let bits: Vec<usize> = entries
            .iter()
            .filter(|&&e| e != 0)
            .map(|&e| {
                if e < 1 || e > n as i64 {
                    Err(TannerError::Parse {
                        line: lno,
                        msg: format!("bit index {e} out of range 1..={n}"),
                    })
                } else {
                    Ok(e as usize - 1)
                }
            })
            .collect::<Result<_, _>>()?;
        if bits.len() != row_degs[alpha] as usize {
            return Err(TannerError::Parse {
                line: lno,
                msg: format!(
                    "check {} lists {} bits but declares degree {}",
                    alpha + 1,
                    bits.len(),
                    row_degs[alpha]
                ),
            });
        }
        rows.push(bits);
    }

    let h = ParityCheckMatrix::new(n, rows)?;
    // Cross-check the two adjacency halves.
    for (i, mut declared) in col_adj.into_iter().enumerate() {
        declared.sort_unstable();
        if declared != h.cols[i] {
            return Err(TannerError::Parse {
                line: 0,
                msg: format!("column and row adjacency disagree at bit {}", i + 1),
            });
        }
    }
    Ok(h)
}

/// Emits the MacKay alist representation; `parse_alist` on the output
/// reconstructs an identical matrix.
pub fn emit_alist(h: &ParityCheckMatrix) -> String {
    let max_col = (0..h.n_bits).map(|i| h.bit_degree(i)).max().unwrap_or(0);
    let max_row = (0..h.n_checks)
        .map(|a| h.check_degree(a))
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "{} {}", h.n_bits, h.n_checks).unwrap();
    writeln!(out, "{max_col} {max_row}").unwrap();
    let degs: Vec<String> = (0..h.n_bits).map(|i| h.bit_degree(i).to_string()).collect();
    writeln!(out, "{}", degs.join(" ")).unwrap();
    let degs: Vec<String> = (0..h.n_checks)
        .map(|a| h.check_degree(a).to_string())
        .collect();
    writeln!(out, "{}", degs.join(" ")).unwrap();
    for i in 0..h.n_bits {
        let mut entries: Vec<String> = h.cols[i].iter().map(|&a| (a + 1).to_string()).collect();
        entries.resize(max_col, "0".into());
        writeln!(out, "{}", entries.join(" ")).unwrap();
    }
    for alpha in 0..h.n_checks {
        let mut entries: Vec<String> = h.rows[alpha].iter().map(|&i| (i + 1).to_string()).collect();
        entries.resize(max_row, "0".into());
        writeln!(out, "{}", entries.join(" ")).unwrap();
    }
    out
}

/// The (3,5)-regular quasi-cyclic [155,64,20] code: a 3x5 array of 31x31
/// circulant permutation blocks, block (a,b) shifted by 5^a * 2^b mod 31
/// (2 has order 5 and 5 has order 3 modulo 31, so the 15 shifts are distinct).
pub fn build_tanner_155() -> ParityCheckMatrix {
    let mut rows = vec![Vec::new(); 93];
    for a in 0..3usize {
        for b in 0..5usize {
            let mut shift = 1usize;
            (0..a).for_each(|_| shift = shift * 5 % 31);
            (0..b).for_each(|_| shift = shift * 2 % 31);
            for r in 0..31 {
                rows[a * 31 + r].push(b * 31 + (r + shift) % 31);
            }
        }
    }
    ParityCheckMatrix::new(155, rows).expect("fixed construction is valid")
}

/// The [7,4] Hamming code, 3 checks of degree 4.
pub fn hamming_7_4() -> ParityCheckMatrix {
    ParityCheckMatrix::new(
        7,
        vec![vec![0, 2, 4, 6], vec![1, 2, 5, 6], vec![3, 4, 5, 6]],
    )
    .unwrap()
}

/// A single parity check over `n` bits.
pub fn single_parity_check(n: usize) -> ParityCheckMatrix {
    ParityCheckMatrix::new(n, vec![(0..n).collect()]).unwrap()
}

/// Two bits joined by two degree-2 checks: the smallest Tanner graph with a
/// cycle (one 4-cycle, a single generalized loop).
pub fn four_cycle() -> ParityCheckMatrix {
    ParityCheckMatrix::new(2, vec![vec![0, 1], vec![0, 1]]).unwrap()
}

/// Two disjoint 4-cycles on 4 bits; has exactly 3 generalized loops.
pub fn double_four_cycle() -> ParityCheckMatrix {
    ParityCheckMatrix::new(4, vec![vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]]).unwrap()
}

/// A random cycle-free Tanner graph on `n_bits >= 2` bits: checks of degree
/// 2 or 3 are attached one at a time, each joining one existing bit to new
/// bits, so the graph stays a tree.
use rand::RngExt as _;

pub fn random_tree_code(n_bits: usize, rng: &mut impl rand::Rng) -> ParityCheckMatrix {
    assert!(n_bits >= 2, "a tree code needs at least 2 bits");
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut grown = 1usize; // bit 0 exists
    while grown < n_bits {
        let anchor = rng.random_range(0..grown);
        let fresh = (1 + rng.random_range(0..2usize)).min(n_bits - grown);
        let mut row = vec![anchor];
        row.extend(grown..grown + fresh);
        grown += fresh;
        rows.push(row);
    }
    ParityCheckMatrix::new(n_bits, rows).expect("tree construction is valid")
}

/// Randomized low-weight codeword probe (information-set style): repeatedly
/// picks a random information set, reduces the generator accordingly, and
/// scans rows and row pairs for low-weight words. Returns the best word found.
pub fn probe_low_weight_codeword(
    h: &ParityCheckMatrix,
    iterations: usize,
    rng: &mut impl rand::Rng,
) -> Option<BitVector> {
    let basis = h.nullspace_basis();
    if basis.is_empty() {
        return None;
    }
    let n = h.n_bits;
    let k = basis.len();
    let mut best: Option<BitVector> = None;
    let consider = |w: &BitVector, best: &mut Option<BitVector>| {
        if !w.is_zero() && best.as_ref().is_none_or(|b| w.weight() < b.weight()) {
            *best = Some(w.clone());
        }
    };
    for _ in 0..iterations {
        // Random column order, then RREF of the generator in that order.
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut gen: Vec<Vec<u8>> = basis.iter().map(|b| b.0.clone()).collect();
        let mut rank = 0;
        for &col in &perm {
            if rank == k {
                break;
            }
            let Some(p) = (rank..k).find(|&r| gen[r][col] == 1) else {
                continue;
            };
            gen.swap(rank, p);
            for r in 0..k {
                if r != rank && gen[r][col] == 1 {
                    let pivot = gen[rank].clone();
                    for (x, y) in gen[r].iter_mut().zip(&pivot) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        for r in 0..k {
            consider(&BitVector(gen[r].clone()), &mut best);
            for r2 in r + 1..k {
                let mut w = BitVector(gen[r].clone());
                w.add_assign(&BitVector(gen[r2].clone()));
                consider(&w, &mut best);
            }
        }
    }
    best
}
