//! Row-stochastic network matrices and their digraph structure.
//!
//! The network matrix `G = [g_ij]` stores interaction weights: row `i` holds
//! the weights agent `i` places on its in-neighbors, so the network graph has
//! an edge `j -> i` exactly when `g_ij > 0`. All reachability code in this
//! module uses that orientation.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::Scalar;

/// Errors from matrix validation, generation, and file parsing.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("matrix has no rows")]
    Empty,
    #[error("matrix is not square: {rows} rows but row {row} has {cols} columns")]
    NonSquare { rows: usize, row: usize, cols: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSumViolation { row: usize, sum: f64 },
    #[error("entry index ({row}, {col}) out of range for n={n}")]
    EntryOutOfRange { row: usize, col: usize, n: usize },
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("connection probability {p} is outside [0, 1]")]
    InvalidProbability { p: f64 },
    #[error("matrix file line {line}: {msg}")]
    FileFormat { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Connectivity summary of the network graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphDiagnostics {
    pub strongly_connected: bool,
    pub aperiodic: bool,
    /// Conjunction of the other two flags.
    pub ergodic: bool,
}

/// Validated row-stochastic matrix.
///
/// Rows store only strictly positive entries, sorted by column. Every row
/// sums to 1 within `T::ROW_SUM_TOL`; entries at or below `T::STRUCTURAL_ZERO`
/// are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkMatrix<T> {
    n: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> NetworkMatrix<T> {
    /// Checks a dense nonnegative array for row-stochasticity and builds the
    /// sparse representation.
    pub fn validate(raw: &[Vec<T>]) -> Result<Self, GraphError> {
        let n = raw.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in raw.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::NonSquare {
                    rows: n,
                    row: i,
                    cols: row.len(),
                });
            }
            let mut sum = T::zero();
            let mut entries = Vec::new();
            for (j, &w) in row.iter().enumerate() {
                if w.is_nan() || w < T::zero() {
                    return Err(GraphError::NegativeEntry {
                        row: i,
                        col: j,
                        value: w.to_f64_lossy(),
                    });
                }
                sum += w;
                if w > T::STRUCTURAL_ZERO {
                    entries.push((j, w));
                }
            }
            if (sum - T::one()).abs() > T::ROW_SUM_TOL {
                return Err(GraphError::RowSumViolation {
                    row: i,
                    sum: sum.to_f64_lossy(),
                });
            }
            rows.push(entries);
        }
        Ok(Self { n, rows })
    }

    /// Builds from `(row, col, weight)` triplets, rejecting duplicates and
    /// out-of-range indices before running the usual row checks.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        for (i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(GraphError::EntryOutOfRange { row: i, col: j, n });
            }
            if w.is_nan() || w < T::zero() {
                return Err(GraphError::NegativeEntry {
                    row: i,
                    col: j,
                    value: w.to_f64_lossy(),
                });
            }
            rows[i].push((j, w));
        }
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(GraphError::DuplicateEntry {
                        row: i,
                        col: pair[0].0,
                    });
                }
            }
            let sum: T = row.iter().map(|&(_, w)| w).sum();
            if (sum - T::one()).abs() > T::ROW_SUM_TOL {
                return Err(GraphError::RowSumViolation {
                    row: i,
                    sum: sum.to_f64_lossy(),
                });
            }
            row.retain(|&(_, w)| w > T::STRUCTURAL_ZERO);
        }
        Ok(Self { n, rows })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored (strictly positive) entries.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(usize, T)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Dot product of row `i` with a dense vector.
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        self.rows[i].iter().map(|&(j, w)| w * x[j]).sum()
    }

    /// Dense product `G x`.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row_dot(i, x)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                out[i][j] = w;
            }
        }
        out
    }

    /// True when `g_ij > 0` implies `g_ji > 0`.
    pub fn symmetric_support(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().all(|&(j, _)| self.get(j, i) > T::zero()))
    }

    /// Out-neighbor lists: `out[j]` holds every `i` with an edge `j -> i`.
    pub(crate) fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                out[j].push(i);
            }
        }
        out
    }

    /// In-neighbor lists, i.e., row supports.
    fn in_adjacency(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, _)| j).collect())
            .collect()
    }

    /// True iff every vertex reaches every vertex along directed edges.
    pub fn is_strongly_connected(&self) -> bool {
        bfs_covers_all(&self.out_adjacency(), 0, self.n) && bfs_covers_all(&self.in_adjacency(), 0, self.n)
    }

    /// True iff the gcd of all directed cycle lengths is 1.
    ///
    /// Works per strongly connected component: within each component the gcd
    /// of `level(u) + 1 - level(v)` over internal edges `u -> v` (levels from
    /// a breadth-first search) equals the component's cycle gcd. Graphs with
    /// no cycles at all are reported as periodic; validated row-stochastic
    /// matrices always contain a cycle.
    pub fn is_aperiodic(&self) -> bool {
        let out = self.out_adjacency();
        let mut overall: u64 = 0;
        for comp in strongly_connected_components(&out, &self.in_adjacency()) {
            if let Some(p) = component_cycle_gcd(&out, &comp) {
                overall = gcd(overall, p);
                if overall == 1 {
                    return true;
                }
            }
        }
        overall == 1
    }

    pub fn diagnostics(&self) -> GraphDiagnostics {
        let strongly_connected = self.is_strongly_connected();
        let aperiodic = self.is_aperiodic();
        GraphDiagnostics {
            strongly_connected,
            aperiodic,
            ergodic: strongly_connected && aperiodic,
        }
    }

    /// Writes the plain-text matrix format: first line `n`, then one line
    /// `i j g_ij` per stored entry in row-major order.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.n)?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, weight) in row {
                writeln!(w, "{} {} {}", i, j, weight)?;
            }
        }
        Ok(())
    }

    pub fn write_matrix_file<P: AsRef<Path>>(&self, path: P) -> Result<(), GraphError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses the plain-text matrix format and validates the result.
    pub fn from_reader<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut n: Option<usize> = None;
        let mut triplets = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            match n {
                None => {
                    n = Some(text.parse().map_err(|_| GraphError::FileFormat {
                        line: lineno,
                        msg: format!("expected agent count, got {text:?}"),
                    })?);
                }
                Some(_) => {
                    let mut parts = text.split_whitespace();
                    let mut field = |name: &str| {
                        parts.next().ok_or_else(|| GraphError::FileFormat {
                            line: lineno,
                            msg: format!("missing {name}"),
                        })
                    };
                    let i = field("row index")?;
                    let j = field("column index")?;
                    let w = field("weight")?;
                    if parts.next().is_some() {
                        return Err(GraphError::FileFormat {
                            line: lineno,
                            msg: "trailing fields after i j g_ij".into(),
                        });
                    }
                    let parse_idx = |s: &str| {
                        s.parse::<usize>().map_err(|_| GraphError::FileFormat {
                            line: lineno,
                            msg: format!("bad index {s:?}"),
                        })
                    };
                    let weight: f64 = w.parse().map_err(|_| GraphError::FileFormat {
                        line: lineno,
                        msg: format!("bad weight {w:?}"),
                    })?;
                    triplets.push((parse_idx(i)?, parse_idx(j)?, T::from_f64_lossy(weight)));
                }
            }
        }
        let n = n.ok_or(GraphError::Empty)?;
        Self::from_triplets(n, triplets)
    }

    pub fn read_matrix_file<P: AsRef<Path>>(path: P) -> Result<Self, GraphError> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }
}

/// Undirected Erdős–Rényi graph with symmetric per-edge weights.
///
/// Each unordered pair is connected independently with probability `p`. A
/// connected pair `{i, j}` gets the weight `1 / (1 + max(d_i, d_j))` in both
/// directions, where `d_i` is the degree of vertex `i`; the self-loop absorbs
/// the remainder of the row. The self-loop weight is at least
/// `1 / (1 + d_i) > 0`, so every connected instance is automatically
/// aperiodic, and the matrix is symmetric, not just symmetric in support.
/// Isolated vertices get self-loop weight 1 (such instances are not strongly
/// connected; callers resample).
pub fn erdos_renyi_network<T: Scalar>(
    n: usize,
    p: f64,
    seed: u64,
) -> Result<NetworkMatrix<T>, GraphError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidProbability { p });
    }
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen::<f64>() < p {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let degree: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    let mut triplets = Vec::new();
    for i in 0..n {
        let mut off_diagonal = 0.0f64;
        for &j in &neighbors[i] {
            let w = 1.0 / (1.0 + degree[i].max(degree[j]) as f64);
            off_diagonal += w;
            triplets.push((i, j, T::from_f64_lossy(w)));
        }
        triplets.push((i, i, T::from_f64_lossy(1.0 - off_diagonal)));
    }
    NetworkMatrix::from_triplets(n, triplets)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bfs_covers_all(adj: &[Vec<usize>], start: usize, n: usize) -> bool {
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// Kosaraju with explicit stacks; recursion depth is unbounded otherwise.
fn strongly_connected_components(out: &[Vec<usize>], inc: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = out.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < out[u].len() {
                let v = out[u][*next];
                *next += 1;
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                order.push(u);
                stack.pop();
            }
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for &root in order.iter().rev() {
        if comp[root] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![root];
        comp[root] = id;
        let mut stack = vec![root];
        while let Some(u) = stack.pop() {
            for &v in &inc[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        comps.push(members);
    }
    comps
}

/// Cycle gcd of one strongly connected component, `None` when it has no
/// internal edge (a single vertex without a self-loop).
fn component_cycle_gcd(out: &[Vec<usize>], comp: &[usize]) -> Option<u64> {
    let n = out.len();
    let mut in_comp = vec![false; n];
    for &u in comp {
        in_comp[u] = true;
    }
    let root = comp[0];
    let mut level = vec![i64::MIN; n];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let mut g: u64 = 0;
    let mut has_edge = false;
    while let Some(u) = queue.pop_front() {
        for &v in &out[u] {
            if !in_comp[v] {
                continue;
            }
            has_edge = true;
            if level[v] == i64::MIN {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, (level[u] + 1 - level[v]).unsigned_abs());
            }
        }
    }
    // Tree edges contribute gcd(g, 0) = g; a component that is one pure cycle
    // ends with g equal to its length via the closing edge.
    has_edge.then_some(g.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::five_agent_matrix;
    use approx::assert_abs_diff_eq;

    #[test]
    fn five_agent_matrix_validates_with_17_entries() {
        let g = five_agent_matrix();
        assert_eq!(g.n(), 5);
        assert_eq!(g.nnz(), 17);
        assert_eq!(g.get(0, 0), 0.4);
        assert_eq!(g.get(3, 0), 0.0);
        assert_eq!(g.get(4, 4), 0.8);
        for i in 0..5 {
            let sum: f64 = g.row(i).iter().map(|&(_, w)| w).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_self_loop_is_valid() {
        let g = NetworkMatrix::validate(&[vec![1.0]]).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.nnz(), 1);
        assert_eq!(g.get(0, 0), 1.0);
    }

    #[test]
    fn row_sum_violation_is_reported_with_row_and_sum() {
        let err = NetworkMatrix::validate(&[vec![0.5, 0.4], vec![0.5, 0.5]]).unwrap_err();
        match err {
            GraphError::RowSumViolation { row, sum } => {
                assert_eq!(row, 0);
                assert_abs_diff_eq!(sum, 0.9, epsilon = 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negative_entry_rejected() {
        let err = NetworkMatrix::validate(&[vec![1.5, -0.5], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, GraphError::NegativeEntry { row: 0, col: 1, .. }));
    }

    #[test]
    fn non_square_rejected() {
        let err = NetworkMatrix::validate(&[vec![1.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, GraphError::NonSquare { rows: 2, row: 1, cols: 1 }));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(
            NetworkMatrix::<f64>::validate(&[]),
            Err(GraphError::Empty)
        ));
    }

    #[test]
    fn structural_zeros_are_dropped() {
        let g = NetworkMatrix::validate(&[vec![1e-16, 1.0 - 1e-16], vec![0.5, 0.5]]).unwrap();
        assert_eq!(g.nnz(), 3);
        assert_eq!(g.get(0, 0), 0.0);
    }

    #[test]
    fn from_triplets_rejects_duplicates_and_bad_indices() {
        let dup = NetworkMatrix::from_triplets(2, [(0, 1, 0.5), (0, 1, 0.5), (1, 0, 1.0)]);
        assert!(matches!(dup, Err(GraphError::DuplicateEntry { row: 0, col: 1 })));
        let oob = NetworkMatrix::from_triplets(2, [(0, 2, 1.0)]);
        assert!(matches!(oob, Err(GraphError::EntryOutOfRange { .. })));
    }

    #[test]
    fn strong_connectivity_examples() {
        assert!(five_agent_matrix().is_strongly_connected());
        let isolated = NetworkMatrix::validate(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(!isolated.is_strongly_connected());
        let single = NetworkMatrix::validate(&[vec![1.0]]).unwrap();
        assert!(single.is_strongly_connected());
    }

    #[test]
    fn aperiodicity_examples() {
        assert!(five_agent_matrix().is_aperiodic());
        let two_cycle = NetworkMatrix::validate(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(!two_cycle.is_aperiodic());
        // Directed 3-cycle 0 -> 1 -> 2 -> 0 plus a self-loop at 0: gcd(3, 1) = 1.
        let looped = NetworkMatrix::validate(&[
            vec![0.5, 0.0, 0.5],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(looped.is_aperiodic());
        let pure_cycle = NetworkMatrix::validate(&[
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ])
        .unwrap();
        assert!(!pure_cycle.is_aperiodic());
    }

    #[test]
    fn diagnostics_is_conjunction() {
        let d = five_agent_matrix().diagnostics();
        assert!(d.strongly_connected && d.aperiodic && d.ergodic);
        let two_cycle = NetworkMatrix::validate(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let d = two_cycle.diagnostics();
        assert!(d.strongly_connected && !d.aperiodic && !d.ergodic);
    }

    #[test]
    fn erdos_renyi_single_vertex() {
        let g: NetworkMatrix<f64> = erdos_renyi_network(1, 0.7, 3).unwrap();
        assert_eq!(g.to_dense(), vec![vec![1.0]]);
    }

    #[test]
    fn erdos_renyi_complete_graph_is_uniform() {
        let g: NetworkMatrix<f64> = erdos_renyi_network(3, 1.0, 9).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(g.get(i, j), 1.0 / 3.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn erdos_renyi_invariants_and_determinism() {
        let a: NetworkMatrix<f64> = erdos_renyi_network(20, 0.2, 42).unwrap();
        let b: NetworkMatrix<f64> = erdos_renyi_network(20, 0.2, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.symmetric_support());
        for i in 0..20 {
            let sum: f64 = a.row(i).iter().map(|&(_, w)| w).sum();
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            assert!(a.get(i, i) > 0.0);
            for &(j, w) in a.row(i) {
                assert_abs_diff_eq!(w, a.get(j, i), epsilon = 1e-15);
            }
        }
        let c: NetworkMatrix<f64> = erdos_renyi_network(20, 0.2, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn erdos_renyi_rejects_bad_probability() {
        assert!(matches!(
            erdos_renyi_network::<f64>(4, 1.5, 0),
            Err(GraphError::InvalidProbability { .. })
        ));
        assert!(matches!(
            erdos_renyi_network::<f64>(4, f64::NAN, 0),
            Err(GraphError::InvalidProbability { .. })
        ));
    }

    #[test]
    fn matrix_file_round_trip() {
        let g = five_agent_matrix();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let back = NetworkMatrix::<f64>::from_reader(buf.as_slice()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn matrix_file_parse_errors_carry_line_numbers() {
        let bad_n = NetworkMatrix::<f64>::from_reader("x\n".as_bytes());
        assert!(matches!(bad_n, Err(GraphError::FileFormat { line: 1, .. })));
        let bad_weight = NetworkMatrix::<f64>::from_reader("1\n0 0 one\n".as_bytes());
        assert!(matches!(bad_weight, Err(GraphError::FileFormat { line: 2, .. })));
        let missing = NetworkMatrix::<f64>::from_reader("1\n0 0\n".as_bytes());
        assert!(matches!(missing, Err(GraphError::FileFormat { line: 2, .. })));
        let oob = NetworkMatrix::<f64>::from_reader("1\n0 1 1.0\n".as_bytes());
        assert!(matches!(oob, Err(GraphError::EntryOutOfRange { .. })));
        let dup = NetworkMatrix::<f64>::from_reader("1\n0 0 0.5\n0 0 0.5\n".as_bytes());
        assert!(matches!(dup, Err(GraphError::DuplicateEntry { .. })));
        let bad_sum = NetworkMatrix::<f64>::from_reader("2\n0 0 0.5\n1 1 1.0\n".as_bytes());
        assert!(matches!(bad_sum, Err(GraphError::RowSumViolation { row: 0, .. })));
    }
}
