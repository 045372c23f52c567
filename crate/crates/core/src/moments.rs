//! Exact first- and second-moment recursion of the opinion process.
//!
//! The expected extended opinion vector `[E(x ⊗ x); E(x)]` evolves by one
//! linear map per step. Its matrix has the block form `[[G2, G21], [0, G]]`
//! where row `(i, j)` of the second-moment block depends only on agent types:
//!
//! * `i != j`, or `i == j` for an averager: the Kronecker row `g_i ⊗ g_j`,
//! * `i == j` for a copier: weight `g_iz` at column `(z, z)` for every `z`,
//! * `i == j` for a voter: zero, with the cross block row equal to `g_i`
//!   (a binary opinion satisfies `x² = x`).
//!
//! Pair `(i, j)` maps to index `i·n + j`, 0-based. Rows are generated lazily
//! from `G`; nothing of size `n² × n²` is ever materialized, and one
//! application costs two sparse `n × n` matrix products.

use std::io::{self, Write};

use crate::graph::NetworkMatrix;
use crate::model::{AgentType, Hman, OpinionVector};
use crate::scalar::Scalar;

/// Lazy-row view of the extended recursion matrix for one model.
#[derive(Debug, Clone)]
pub struct ExtendedRecursion<T> {
    model: Hman<T>,
}

/// Expected extended opinion vector at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedEov<T> {
    n: usize,
    second: Vec<T>,
    first: Vec<T>,
}

impl<T: Scalar> ExpectedEov<T> {
    /// Initial condition for a deterministic `x0`: second block `x0 ⊗ x0`.
    pub fn initial(x0: &OpinionVector<T>) -> Self {
        let n = x0.len();
        let xs = x0.values();
        let mut second = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                second.push(xs[i] * xs[j]);
            }
        }
        Self {
            n,
            second,
            first: xs.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `E(x_i x_j)`.
    pub fn second_moment(&self, i: usize, j: usize) -> T {
        self.second[i * self.n + j]
    }

    /// `E(x_i)`.
    pub fn first_moment(&self, i: usize) -> T {
        self.first[i]
    }

    pub fn second_moments(&self) -> &[T] {
        &self.second
    }

    pub fn first_moments(&self) -> &[T] {
        &self.first
    }

    /// `E((x_i - x_j)^2)` assembled from three second moments.
    pub fn mean_square_deviation(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        self.second_moment(i, i) - self.second_moment(i, j) - self.second_moment(j, i)
            + self.second_moment(j, j)
    }

    /// Larger of the max-minus-min spreads of the two moment blocks. Each
    /// block converges to its own constant vector under consensus, and the
    /// constants differ unless the consensus value is binary, so the blocks
    /// must not be pooled.
    pub fn spread(&self) -> T {
        let block = |vals: &[T]| {
            let mut lo = vals[0];
            let mut hi = vals[0];
            for &v in vals {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            hi - lo
        };
        block(&self.second).max(block(&self.first))
    }
}

impl<T: Scalar> ExtendedRecursion<T> {
    pub fn new(model: &Hman<T>) -> Self {
        Self {
            model: model.clone(),
        }
    }

    pub fn model(&self) -> &Hman<T> {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    /// Dimension of the full block matrix, `n² + n`.
    pub fn dim(&self) -> usize {
        let n = self.n();
        n * n + n
    }

    fn g(&self) -> &NetworkMatrix<T> {
        self.model.g()
    }

    /// Second-moment-block row `q = i·n + j`, sorted by column.
    pub fn g2_row(&self, q: usize) -> Vec<(usize, T)> {
        let n = self.n();
        let (i, j) = (q / n, q % n);
        let g = self.g();
        if i != j {
            return kronecker_row(g, i, j, n);
        }
        match self.model.roster().agent_type(i) {
            AgentType::Averager => kronecker_row(g, i, j, n),
            AgentType::Copier => g.row(i).iter().map(|&(z, w)| (z * n + z, w)).collect(),
            AgentType::Voter => Vec::new(),
        }
    }

    /// Cross-block row `q`: the matching row of `G` for a voter diagonal
    /// pair, empty otherwise.
    pub fn g21_row(&self, q: usize) -> Vec<(usize, T)> {
        let n = self.n();
        let (i, j) = (q / n, q % n);
        if i == j && self.model.roster().agent_type(i) == AgentType::Voter {
            self.g().row(i).to_vec()
        } else {
            Vec::new()
        }
    }

    /// Applies the second-moment block to an `n²` vector.
    ///
    /// Viewing the input as an `n × n` matrix `S`, the generic rows are
    /// `vec(G S Gᵀ)`; copier and voter diagonal entries are then overwritten.
    pub fn apply_g2(&self, s: &[T]) -> Vec<T> {
        let n = self.n();
        assert_eq!(s.len(), n * n);
        let g = self.g();
        let mut t1 = vec![T::zero(); n * n];
        for z in 0..n {
            let s_row = &s[z * n..(z + 1) * n];
            for (j, slot) in t1[z * n..(z + 1) * n].iter_mut().enumerate() {
                *slot = g.row_dot(j, s_row);
            }
        }
        let mut out = vec![T::zero(); n * n];
        for i in 0..n {
            let (head, tail) = out.split_at_mut(i * n);
            debug_assert!(head.len() == i * n);
            let dst = &mut tail[..n];
            for &(z, w) in g.row(i) {
                let src = &t1[z * n..(z + 1) * n];
                for (d, &s_val) in dst.iter_mut().zip(src) {
                    *d += w * s_val;
                }
            }
        }
        for i in 0..n {
            match self.model.roster().agent_type(i) {
                AgentType::Averager => {}
                AgentType::Copier => {
                    out[i * n + i] = g.row(i).iter().map(|&(z, w)| w * s[z * n + z]).sum();
                }
                AgentType::Voter => out[i * n + i] = T::zero(),
            }
        }
        out
    }

    /// One application of the full block matrix.
    pub fn step(&self, eov: &ExpectedEov<T>) -> ExpectedEov<T> {
        let n = self.n();
        assert_eq!(eov.n, n);
        let g = self.g();
        let mut second = self.apply_g2(&eov.second);
        for i in 0..n {
            if self.model.roster().agent_type(i) == AgentType::Voter {
                second[i * n + i] = g.row_dot(i, &eov.first);
            }
        }
        ExpectedEov {
            n,
            second,
            first: g.matvec(&eov.first),
        }
    }

    /// Full sequence of expected extended vectors for `k = 0..=horizon`.
    pub fn iterate(&self, x0: &OpinionVector<T>, horizon: usize) -> Vec<ExpectedEov<T>> {
        let mut out = Vec::with_capacity(horizon + 1);
        out.push(ExpectedEov::initial(x0));
        for _ in 0..horizon {
            let next = self.step(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// True iff pair vertex `(0, 0)` reaches every pair vertex along the
    /// digraph induced by the second-moment block (edge `r -> q` iff entry
    /// `(q, r)` is nonzero, matching the network-matrix orientation).
    pub fn gamma2_reachability(&self) -> bool {
        let n2 = self.n() * self.n();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n2];
        for q in 0..n2 {
            for (r, _) in self.g2_row(q) {
                adj[r].push(q);
            }
        }
        let mut seen = vec![false; n2];
        seen[0] = true;
        let mut count = 1;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n2
    }

    /// Dense copy of the full block matrix, for eigensolvers on small models.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.n();
        let n2 = n * n;
        let dim = self.dim();
        let mut rows = vec![vec![T::zero(); dim]; dim];
        for (q, row) in rows.iter_mut().enumerate().take(n2) {
            for (c, w) in self.g2_row(q) {
                row[c] = w;
            }
            for (c, w) in self.g21_row(q) {
                row[n2 + c] = w;
            }
        }
        for i in 0..n {
            for &(j, w) in self.g().row(i) {
                rows[n2 + i][n2 + j] = w;
            }
        }
        rows
    }
}

fn kronecker_row<T: Scalar>(
    g: &NetworkMatrix<T>,
    i: usize,
    j: usize,
    n: usize,
) -> Vec<(usize, T)> {
    let mut out = Vec::with_capacity(g.row(i).len() * g.row(j).len());
    for &(z, wi) in g.row(i) {
        for &(w, wj) in g.row(j) {
            out.push((z * n + w, wi * wj));
        }
    }
    out
}

/// CSV with header `k,pair,value`; pairs are labeled `i:j`, 0-based.
pub fn write_second_moments_csv<T: Scalar, W: Write>(
    seq: &[ExpectedEov<T>],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "k,pair,value")?;
    for (k, eov) in seq.iter().enumerate() {
        let n = eov.n();
        for i in 0..n {
            for j in 0..n {
                writeln!(w, "{k},{i}:{j},{}", eov.second_moment(i, j))?;
            }
        }
    }
    Ok(())
}

/// CSV with header `k,agent,value`.
pub fn write_first_moments_csv<T: Scalar, W: Write>(
    seq: &[ExpectedEov<T>],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "k,agent,value")?;
    for (k, eov) in seq.iter().enumerate() {
        for i in 0..eov.n() {
            writeln!(w, "{k},{i},{}", eov.first_moment(i))?;
        }
    }
    Ok(())
}

/// CSV with header `k,i,j,msd` for the requested pairs.
pub fn write_msd_csv<T: Scalar, W: Write>(
    seq: &[ExpectedEov<T>],
    pairs: &[(usize, usize)],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "k,i,j,msd")?;
    for (k, eov) in seq.iter().enumerate() {
        for &(i, j) in pairs {
            writeln!(w, "{k},{i},{j},{}", eov.mean_square_deviation(i, j))?;
        }
    }
    Ok(())
}
