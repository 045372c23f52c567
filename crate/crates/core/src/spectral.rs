//! Eigenstructure of the network matrix and the extended recursion.
//!
//! The subdominant eigenvalue (largest magnitude strictly inside the unit
//! circle) of the extended recursion matrix governs the worst-case mean
//! consensus time `1 / |1 - lambda_s|`. With at least one voter present, that
//! eigenvalue equals the dominant eigenvalue of the second-moment block, which
//! a sparse power iteration reaches without any dense assembly; dense Schur
//! decomposition covers full spectra at small dimension.

use std::cmp::Ordering;
use std::io::{self, Write};

use nalgebra::linalg::Schur;
use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::Float;
use thiserror::Error;

use crate::graph::NetworkMatrix;
use crate::model::{AgentRoster, Hman};
use crate::moments::ExtendedRecursion;
use crate::scalar::Scalar;

/// Separation used to exclude unit-circle eigenvalues when picking the
/// subdominant one.
pub const DEFAULT_GAP_TOL: f64 = 1e-8;
/// Residual tolerance of the sparse power iteration.
pub const DEFAULT_POWER_TOL: f64 = 1e-12;
/// Slack for rate-ordering comparisons.
pub const ORDERING_SLACK: f64 = 1e-9;
/// Largest dimension handed to the dense eigensolver.
pub const DENSE_DIM_LIMIT: usize = 4000;

const POWER_MAX_ITER: usize = 200_000;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("eigensolver did not converge: {context}")]
    ConvergenceFailure { context: String },
    #[error("no eigenvalue strictly inside the unit circle")]
    NoSubdominant,
    #[error("subdominant eigenvalue is not simple")]
    DegenerateEigenvector,
    #[error("roster has no voters")]
    NoVoters,
    #[error("invalid roster: {0}")]
    InvalidRoster(String),
    #[error("dimension {dim} exceeds the dense eigensolver limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
}

fn fabs<T: Scalar>(x: T) -> T {
    Float::abs(x)
}

fn fmax<T: Scalar>(a: T, b: T) -> T {
    Float::max(a, b)
}

/// All eigenvalues with multiplicity, sorted by descending
/// (magnitude, real part, imaginary part).
pub fn spectrum<T: Scalar + RealField>(rows: &[Vec<T>]) -> Result<Vec<Complex<T>>, SpectralError> {
    let dim = rows.len();
    assert!(dim >= 1, "spectrum needs a nonempty matrix");
    for row in rows {
        assert_eq!(row.len(), dim, "spectrum needs a square matrix");
    }
    let m = DMatrix::from_fn(dim, dim, |r, c| rows[r][c]);
    // Machine-precision deflation can stall on tightly clustered eigenvalues,
    // so retry with a slightly relaxed threshold. The threshold perturbs
    // eigenvalues by about its own size times the matrix scale, which stays
    // far below every tolerance consumers apply.
    let eps = T::epsilon();
    let hundred = T::from_f64_lossy(100.0);
    let mut schur = None;
    let mut max_iter = 0;
    for (relax, cap) in [
        (T::one(), 50 * dim + 1000),
        (hundred, 100 * dim + 2000),
        (hundred * hundred, 200 * dim + 4000),
    ] {
        max_iter = cap;
        schur = Schur::try_new(m.clone(), eps * relax, cap);
        if schur.is_some() {
            break;
        }
    }
    let schur = schur.ok_or_else(|| SpectralError::ConvergenceFailure {
        context: format!("Schur iteration cap {max_iter} exceeded at dimension {dim}"),
    })?;
    let mut eigs: Vec<Complex<T>> = schur.complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| compare_eigenvalues(b, a));
    Ok(eigs)
}

fn compare_eigenvalues<T: Scalar>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    (a.norm(), a.re, a.im)
        .partial_cmp(&(b.norm(), b.re, b.im))
        .unwrap_or(Ordering::Equal)
}

fn pick_subdominant<T: Scalar>(sorted: &[Complex<T>], gap_tol: T) -> Option<Complex<T>> {
    let cutoff = T::one() - gap_tol;
    sorted.iter().find(|z| z.norm() < cutoff).copied()
}

/// Largest-magnitude eigenvalue with magnitude below `1 - gap_tol`; ties go
/// to the largest real part, then the largest imaginary part.
pub fn subdominant<T: Scalar + RealField>(
    rows: &[Vec<T>],
    gap_tol: T,
) -> Result<Complex<T>, SpectralError> {
    let eigs = spectrum(rows)?;
    pick_subdominant(&eigs, gap_tol).ok_or(SpectralError::NoSubdominant)
}

/// Power iteration on a nonnegative sparse operator.
///
/// Iterates the shifted operator `A + I/2`: the shift turns the Perron root
/// into the strictly dominant eigenvalue even for periodic structures, while
/// the Rayleigh estimate and residual are taken on `A` itself. The returned
/// value carries residual accuracy `tol` in the infinity norm.
fn shifted_power_iteration<T: Scalar>(
    dim: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    tol: T,
    context: &str,
) -> Result<T, SpectralError> {
    let half = T::from_f64_lossy(0.5);
    let mut x = vec![T::one(); dim];
    for _ in 0..POWER_MAX_ITER {
        let ax = apply(&x);
        let mut xx = T::zero();
        let mut xax = T::zero();
        for q in 0..dim {
            xx += x[q] * x[q];
            xax += x[q] * ax[q];
        }
        let estimate = xax / xx;
        let mut residual = T::zero();
        let mut x_norm = T::zero();
        for q in 0..dim {
            residual = fmax(residual, fabs(ax[q] - estimate * x[q]));
            x_norm = fmax(x_norm, fabs(x[q]));
        }
        if residual <= tol * x_norm {
            return Ok(estimate);
        }
        let mut next = ax;
        let mut norm = T::zero();
        for q in 0..dim {
            next[q] += half * x[q];
            norm = fmax(norm, fabs(next[q]));
        }
        // The shift bounds the image away from zero: norm >= x_norm / 2.
        for v in &mut next {
            *v /= norm;
        }
        x = next;
    }
    Err(SpectralError::ConvergenceFailure {
        context: format!("power iteration cap {POWER_MAX_ITER} exceeded for {context}"),
    })
}

/// Perron root of a nonnegative operator. Power iteration carries the load;
/// when a near-tied dominant pair starves it of its gap, the exact dense
/// spectrum takes over for dimensions it can afford.
fn perron_root<T: Scalar + RealField>(
    dim: usize,
    apply: impl Fn(&[T]) -> Vec<T>,
    tol: T,
    context: &str,
) -> Result<T, SpectralError> {
    match shifted_power_iteration(dim, &apply, tol, context) {
        Ok(v) => Ok(v),
        Err(stalled @ SpectralError::ConvergenceFailure { .. }) => {
            if dim > DENSE_DIM_LIMIT {
                return Err(stalled);
            }
            let mut rows = vec![vec![T::zero(); dim]; dim];
            let mut basis = vec![T::zero(); dim];
            for j in 0..dim {
                basis[j] = T::one();
                let col = apply(&basis);
                basis[j] = T::zero();
                for i in 0..dim {
                    rows[i][j] = col[i];
                }
            }
            // The Perron root is real and maximal in magnitude; the sort
            // breaks magnitude ties toward the largest real part, so it is
            // the first entry.
            let eigs = spectrum(&rows)?;
            Ok(eigs[0].re)
        }
        Err(e) => Err(e),
    }
}

/// Dominant eigenvalue of the second-moment block, real and nonnegative by
/// Frobenius-Perron.
pub fn dominant_of_g2<T: Scalar + RealField>(
    rec: &ExtendedRecursion<T>,
    tol: T,
) -> Result<T, SpectralError> {
    let n = rec.n();
    perron_root(n * n, |s| rec.apply_g2(s), tol, "second-moment block")
}

/// Dominant eigenvalue via the principal submatrix that drops voter
/// identical-pair rows and columns. Voter-averager rosters only; equal to
/// [`dominant_of_g2`] because the deleted rows are zero.
pub fn dominant_of_ghat2<T: Scalar + RealField>(
    rec: &ExtendedRecursion<T>,
    tol: T,
) -> Result<T, SpectralError> {
    let model = rec.model();
    if model.roster().m_c() != 0 {
        return Err(SpectralError::InvalidRoster(
            "principal-submatrix route requires a voter-averager roster".into(),
        ));
    }
    if model.roster().m_v() == 0 {
        return Err(SpectralError::NoVoters);
    }
    let n = rec.n();
    let masked: Vec<usize> = (0..n)
        .filter(|&i| model.roster().agent_type(i) == crate::model::AgentType::Voter)
        .map(|i| i * n + i)
        .collect();
    let apply = |s: &[T]| {
        let mut input = s.to_vec();
        for &q in &masked {
            input[q] = T::zero();
        }
        // Output rows at masked coordinates are already zero for voters.
        rec.apply_g2(&input)
    };
    perron_root(n * n, apply, tol, "principal submatrix")
}

/// Right eigenvector by inverse iteration with a slightly detuned shift.
fn eigenvector<T: Scalar + RealField>(
    rows: &[Vec<T>],
    lambda: Complex<T>,
) -> Result<DVector<Complex<T>>, SpectralError> {
    let dim = rows.len();
    let a = DMatrix::from_fn(dim, dim, |r, c| Complex::new(rows[r][c], T::zero()));
    let mut detune = 1e-10;
    for _ in 0..4 {
        let sigma = lambda + Complex::new(T::from_f64_lossy(detune), T::from_f64_lossy(detune));
        let shifted = &a - DMatrix::from_diagonal_element(dim, dim, sigma);
        let lu = shifted.lu();
        let mut v = DVector::from_iterator(
            dim,
            (1..=dim).map(|k| Complex::new(T::from_usize(k).unwrap(), T::zero())),
        );
        let mut ok = true;
        for _ in 0..8 {
            match lu.solve(&v) {
                Some(next) => {
                    let pivot = next
                        .iter()
                        .copied()
                        .max_by(|p, q| p.norm().partial_cmp(&q.norm()).unwrap_or(Ordering::Equal))
                        .unwrap();
                    if pivot.norm() == T::zero() {
                        ok = false;
                        break;
                    }
                    v = next.map(|c| c / pivot);
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let residual = (&a * &v - v.map(|c| c * lambda))
                .iter()
                .map(|c| c.norm())
                .fold(T::zero(), fmax);
            if residual <= T::from_f64_lossy(1e-10) {
                return Ok(v);
            }
        }
        detune *= 100.0;
    }
    Err(SpectralError::ConvergenceFailure {
        context: "inverse iteration for the subdominant eigenvector".into(),
    })
}

/// Verifies that the network's subdominant eigenvalue survives into the
/// second-moment block.
///
/// Builds `v = 1 ⊗ v2 - v2 ⊗ 1` from the eigenvector `v2` of the subdominant
/// eigenvalue `lambda2` of `G`; entries at identical pairs cancel exactly, so
/// `v` must be an eigenvector of the second-moment block for any roster.
/// Returns whether the residual stays within `tol` times the vector norm.
pub fn check_lambda2_embedding<T: Scalar + RealField>(
    g: &NetworkMatrix<T>,
    rec: &ExtendedRecursion<T>,
    tol: T,
) -> Result<bool, SpectralError> {
    let n = g.n();
    let dense = g.to_dense();
    let eigs = spectrum(&dense)?;
    let lambda2 = pick_subdominant(&eigs, T::from_f64_lossy(DEFAULT_GAP_TOL))
        .ok_or(SpectralError::NoSubdominant)?;
    let cluster = eigs
        .iter()
        .filter(|z| (**z - lambda2).norm() <= T::from_f64_lossy(1e-8))
        .count();
    if cluster != 1 {
        return Err(SpectralError::DegenerateEigenvector);
    }
    let v2 = eigenvector(&dense, lambda2)?;

    let mut v_re = vec![T::zero(); n * n];
    let mut v_im = vec![T::zero(); n * n];
    let mut v_norm = T::zero();
    for i in 0..n {
        for j in 0..n {
            let val = v2[j] - v2[i];
            v_re[i * n + j] = val.re;
            v_im[i * n + j] = val.im;
            v_norm = fmax(v_norm, val.norm());
        }
    }
    if v_norm == T::zero() {
        return Err(SpectralError::DegenerateEigenvector);
    }
    let image_re = rec.apply_g2(&v_re);
    let image_im = rec.apply_g2(&v_im);
    let mut residual = T::zero();
    for q in 0..n * n {
        let image = Complex::new(image_re[q], image_im[q]);
        let expected = lambda2 * Complex::new(v_re[q], v_im[q]);
        residual = fmax(residual, (image - expected).norm());
    }
    Ok(residual <= tol * v_norm)
}

/// Closed-form lower bounds induced by `m_v` voters among `n` agents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusBound<T> {
    /// Lower bound on the subdominant eigenvalue, `1 - m_v/(n² - m_v)`,
    /// clipped at zero.
    pub bound_lambda: T,
    /// Lower bound on the mean consensus time, `n²/m_v - 1`.
    pub bound_time: T,
    /// Set when `n² <= 2 m_v` forces clipping; the closed form assumes
    /// `n² >= 2 m_v`.
    pub degenerate: bool,
}

pub fn consensus_time_bound<T: Scalar>(
    n: usize,
    m_v: usize,
) -> Result<ConsensusBound<T>, SpectralError> {
    if m_v == 0 {
        return Err(SpectralError::NoVoters);
    }
    if m_v > n {
        return Err(SpectralError::InvalidRoster(format!(
            "voter count {m_v} exceeds agent count {n}"
        )));
    }
    let n2 = (n * n) as f64;
    let mv = m_v as f64;
    let (lambda, degenerate) = if n2 - mv <= 0.0 {
        (0.0, true)
    } else {
        let raw = 1.0 - mv / (n2 - mv);
        if raw < 0.0 {
            (0.0, true)
        } else {
            (raw, false)
        }
    };
    Ok(ConsensusBound {
        bound_lambda: T::from_f64_lossy(lambda),
        bound_time: T::from_f64_lossy((n2 / mv - 1.0).max(0.0)),
        degenerate,
    })
}

/// Subdominant eigenvalue of the extended recursion matrix.
///
/// With voters present this is the dominant eigenvalue of the second-moment
/// block, computed sparsely at any size; otherwise a dense solve of the full
/// block matrix is required and the dimension is capped.
pub fn lambda_s<T: Scalar + RealField>(
    rec: &ExtendedRecursion<T>,
) -> Result<Complex<T>, SpectralError> {
    if rec.model().roster().m_v() >= 1 {
        let rho = dominant_of_g2(rec, T::from_f64_lossy(DEFAULT_POWER_TOL))?;
        return Ok(Complex::new(rho, T::zero()));
    }
    let dim = rec.dim();
    if dim > DENSE_DIM_LIMIT {
        return Err(SpectralError::DimensionTooLarge {
            dim,
            limit: DENSE_DIM_LIMIT,
        });
    }
    subdominant(&rec.to_dense(), T::from_f64_lossy(DEFAULT_GAP_TOL))
}

/// One roster's convergence rate.
#[derive(Debug, Clone)]
pub struct RosterRate<T> {
    pub roster: AgentRoster,
    pub lambda_s: Complex<T>,
}

impl<T: Scalar> RosterRate<T> {
    pub fn magnitude(&self) -> T {
        self.lambda_s.norm()
    }
}

/// Rates for several rosters on one network, sorted by magnitude, plus any
/// violations of the expected ordering.
#[derive(Debug, Clone)]
pub struct RateOrderingReport<T> {
    pub entries: Vec<RosterRate<T>>,
    /// Human-readable descriptions of ordering violations; empty when the
    /// averager-fastest and voter-slowest relations hold within slack.
    pub violations: Vec<String>,
}

fn roster_label(roster: &AgentRoster) -> String {
    format!("a{}c{}v{}", roster.m_a(), roster.m_c(), roster.m_v())
}

/// Computes per-roster subdominant eigenvalues on a shared network and checks
/// the consensus-rate ordering: no roster beats all-averagers, and mixed
/// rosters containing a voter are at least as slow as the all-voter model.
pub fn rate_ordering_report<T: Scalar + RealField>(
    g: &NetworkMatrix<T>,
    rosters: &[AgentRoster],
) -> Result<RateOrderingReport<T>, SpectralError> {
    let mut entries = Vec::with_capacity(rosters.len());
    for roster in rosters {
        let model = Hman::new(g.clone(), roster.clone())
            .map_err(|e| SpectralError::InvalidRoster(e.to_string()))?;
        let rec = ExtendedRecursion::new(&model);
        entries.push(RosterRate {
            roster: roster.clone(),
            lambda_s: lambda_s(&rec)?,
        });
    }
    entries.sort_by(|a, b| {
        a.magnitude()
            .partial_cmp(&b.magnitude())
            .unwrap_or(Ordering::Equal)
    });
    let slack = T::from_f64_lossy(ORDERING_SLACK);
    let n = g.n();
    let mut violations = Vec::new();
    for a in &entries {
        if a.roster.m_a() == n {
            for e in &entries {
                if a.magnitude() > e.magnitude() + slack {
                    violations.push(format!(
                        "all-averager magnitude {} exceeds {} of roster {}",
                        a.magnitude(),
                        e.magnitude(),
                        roster_label(&e.roster)
                    ));
                }
            }
        }
        if a.roster.m_v() == n {
            for e in &entries {
                if e.roster.m_v() >= 1 && a.magnitude() > e.magnitude() + slack {
                    violations.push(format!(
                        "all-voter magnitude {} exceeds {} of roster {}",
                        a.magnitude(),
                        e.magnitude(),
                        roster_label(&e.roster)
                    ));
                }
            }
        }
    }
    Ok(RateOrderingReport {
        entries,
        violations,
    })
}

/// Spectrum summary of one model.
#[derive(Debug, Clone)]
pub struct SpectralReport<T> {
    pub n: usize,
    pub m_a: usize,
    pub m_c: usize,
    pub m_v: usize,
    /// Subdominant eigenvalue of the network matrix itself.
    pub lambda2_of_g: Complex<T>,
    /// Subdominant eigenvalue of the extended recursion matrix.
    pub lambda_s: Complex<T>,
    /// Dominant eigenvalue of the second-moment block.
    pub dominant_g2: T,
    /// `1 / |1 - lambda_s|`.
    pub mean_consensus_time: T,
    /// Closed-form bounds; present when the roster has voters.
    pub bound: Option<ConsensusBound<T>>,
}

pub fn spectral_report<T: Scalar + RealField>(
    model: &Hman<T>,
) -> Result<SpectralReport<T>, SpectralError> {
    let rec = ExtendedRecursion::new(model);
    let lambda2_of_g = subdominant(&model.g().to_dense(), T::from_f64_lossy(DEFAULT_GAP_TOL))?;
    let lambda_s = lambda_s(&rec)?;
    let dominant_g2 = dominant_of_g2(&rec, T::from_f64_lossy(DEFAULT_POWER_TOL))?;
    let one = Complex::new(T::one(), T::zero());
    let mean_consensus_time = T::one() / (one - lambda_s).norm();
    let roster = model.roster();
    let bound = if roster.m_v() >= 1 {
        Some(consensus_time_bound(model.n(), roster.m_v())?)
    } else {
        None
    };
    Ok(SpectralReport {
        n: model.n(),
        m_a: roster.m_a(),
        m_c: roster.m_c(),
        m_v: roster.m_v(),
        lambda2_of_g,
        lambda_s,
        dominant_g2,
        mean_consensus_time,
        bound,
    })
}

/// Renders a complex number as `re+imi` / `re-imi`.
pub fn format_complex<T: Scalar>(z: Complex<T>) -> String {
    if z.im < T::zero() {
        format!("{}-{}i", z.re, fabs(z.im))
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

impl<T: Scalar> SpectralReport<T> {
    /// Structured text: one `key=value` per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        line("n", self.n.to_string());
        line("m_a", self.m_a.to_string());
        line("m_c", self.m_c.to_string());
        line("m_v", self.m_v.to_string());
        line("lambda2_of_g", format_complex(self.lambda2_of_g));
        line("lambda2_of_g_abs", format!("{}", self.lambda2_of_g.norm()));
        line("lambda_s", format_complex(self.lambda_s));
        line("lambda_s_abs", format!("{}", self.lambda_s.norm()));
        line("dominant_g2", format!("{}", self.dominant_g2));
        line(
            "mean_consensus_time",
            format!("{}", self.mean_consensus_time),
        );
        if let Some(bound) = &self.bound {
            line("bound_lambda", format!("{}", bound.bound_lambda));
            line("bound_time", format!("{}", bound.bound_time));
            line("bound_degenerate", bound.degenerate.to_string());
        }
        out
    }
}

/// One row of a bound-tightness sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRecord<T> {
    pub n: usize,
    pub m_v: usize,
    pub lambda_s: T,
    pub bound_lambda: T,
    pub time: T,
    pub bound_time: T,
    pub ratio: T,
}

/// CSV with header `n,m_v,lambda_s,bound_lambda,time,bound_time,ratio`.
pub fn write_sweep_csv<T: Scalar, W: Write>(
    records: &[SweepRecord<T>],
    mut w: W,
) -> io::Result<()> {
    writeln!(w, "n,m_v,lambda_s,bound_lambda,time,bound_time,ratio")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n, r.m_v, r.lambda_s, r.bound_lambda, r.time, r.bound_time, r.ratio
        )?;
    }
    Ok(())
}
