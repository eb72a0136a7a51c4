//! Dense linear-algebra kernel: real Schur form, eigenvalues, numerical rank
//! over the complex field, Lyapunov solves and matrix norms.
//!
//! Everything operates on `nalgebra::DMatrix<f64>`; values are immutable once
//! built and all functions are pure.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

/// Iteration budgets and tolerances shared by the solvers.
///
/// The defaults are tuned for well-scaled problems up to a few hundred states;
/// every field can be overridden per call site.
#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Schur iteration budget, in QR sweeps per matrix row.
    pub schur_sweeps_per_dim: usize,
    /// Rank decision tolerance; `None` selects
    /// `max(rows, cols) * eps * largest_column_norm`.
    pub rank_tol: Option<f64>,
    /// Lyapunov residual bound, relative to the max-norm of the constant term.
    pub lyapunov_rel_tol: f64,
    /// Riccati residual bound, relative to `max(1, |A|_max)`.
    pub are_rel_tol: f64,
    /// Iteration cap for the matrix sign function.
    pub sign_max_iter: usize,
    /// Iteration cap for Newton refinement of Riccati solutions.
    pub newton_max_iter: usize,
    /// Hamiltonian eigenvalues closer to the imaginary axis than this
    /// (relative to the operator norm) abort the Riccati solve.
    pub imag_axis_rel_tol: f64,
    /// Absolute distance under which two eigenvalues are tested once.
    pub eig_dedup_tol: f64,
    /// Eigenvalues with real part above `-stab_margin` count as unstable.
    pub stab_margin: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            schur_sweeps_per_dim: 100,
            rank_tol: None,
            lyapunov_rel_tol: 1e-10,
            are_rel_tol: 1e-11,
            sign_max_iter: 100,
            newton_max_iter: 30,
            imag_axis_rel_tol: 1e-9,
            eig_dedup_tol: 1e-8,
            stab_margin: 1e-10,
        }
    }
}

/// Real Schur form `a = q * t * q^T` with orthogonal `q` and
/// quasi-upper-triangular `t` (1x1 and 2x2 diagonal blocks).
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
}

fn require_square(a: &DMatrix<f64>) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NonSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

fn require_finite(a: &DMatrix<f64>) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Max-norm `max_ij |a_ij|`.
pub fn max_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Operator (spectral) norm: the largest singular value, computed from the
/// symmetric eigenproblem of the Gram matrix on the smaller side.
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    let lambda_max = symmetric_eigenvalues(&gram)
        .iter()
        .fold(0.0f64, |acc, &l| acc.max(l));
    lambda_max.max(0.0).sqrt()
}

/// Eigenvalues of a symmetric matrix, ascending order not guaranteed.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    a.clone().symmetric_eigenvalues()
}

/// Real Schur decomposition via Hessenberg reduction and shifted QR sweeps
/// with accumulated orthogonal transforms.
pub fn real_schur(a: &DMatrix<f64>, settings: &SolverSettings) -> Result<SchurForm> {
    let n = require_square(a)?;
    require_finite(a)?;
    let budget = settings.schur_sweeps_per_dim.saturating_mul(n).max(1);
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, budget)
        .ok_or(Error::SchurNoConvergence {
            sweeps: budget,
            residual: f64::NAN,
        })?;
    let (q, t) = schur.unpack();
    // Convergence inside the QR iteration does not guarantee a usable
    // factorization on badly scaled input; verify the reconstruction.
    let scale = max_norm(a).max(1.0);
    let residual = max_norm(&(&q * &t * q.transpose() - a));
    if residual > 1e-9 * scale {
        return Err(Error::SchurNoConvergence {
            sweeps: budget,
            residual,
        });
    }
    Ok(SchurForm { q, t })
}

/// Splits the quasi-triangular factor into diagonal block offsets of size 1/2.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

fn block_eigenvalues(t: &DMatrix<f64>, start: usize, size: usize) -> Vec<Complex<f64>> {
    if size == 1 {
        return vec![Complex::new(t[(start, start)], 0.0)];
    }
    let p = t[(start, start)];
    let q = t[(start, start + 1)];
    let r = t[(start + 1, start)];
    let s = t[(start + 1, start + 1)];
    let mean = 0.5 * (p + s);
    let disc = 0.25 * (p - s) * (p - s) + q * r;
    if disc < 0.0 {
        let im = (-disc).sqrt();
        vec![Complex::new(mean, im), Complex::new(mean, -im)]
    } else {
        let root = disc.sqrt();
        vec![Complex::new(mean + root, 0.0), Complex::new(mean - root, 0.0)]
    }
}

/// Eigenvalue multiset of a square matrix, complex pairs conjugate.
pub fn eigenvalues(a: &DMatrix<f64>, settings: &SolverSettings) -> Result<Vec<Complex<f64>>> {
    let schur = real_schur(a, settings)?;
    Ok(eigenvalues_of_schur(&schur.t))
}

/// Eigenvalues read off an already computed quasi-triangular factor.
pub fn eigenvalues_of_schur(t: &DMatrix<f64>) -> Vec<Complex<f64>> {
    schur_blocks(t)
        .iter()
        .flat_map(|&(start, size)| block_eigenvalues(t, start, size))
        .collect()
}

/// Largest eigenvalue real part of a square matrix.
pub fn max_real_eigenvalue(a: &DMatrix<f64>, settings: &SolverSettings) -> Result<f64> {
    Ok(eigenvalues(a, settings)?
        .iter()
        .fold(f64::NEG_INFINITY, |acc, l| acc.max(l.re)))
}

/// Outcome of a column-pivoted QR rank decision, with the margin information
/// needed to flag near-tolerance calls.
#[derive(Debug, Clone, Copy)]
pub struct RankDecision {
    pub rank: usize,
    pub tol: f64,
    /// Smallest retained `|r_ii|`; infinite when the rank is zero.
    pub smallest_accepted: f64,
    /// Largest discarded `|r_ii|`; zero when the matrix has full rank.
    pub largest_rejected: f64,
}

impl RankDecision {
    /// True when the accept/reject boundary sits within a factor `band` of
    /// the tolerance, i.e. the decision is sensitive to the tolerance choice.
    pub fn near_tolerance(&self, band: f64) -> bool {
        (self.smallest_accepted.is_finite() && self.smallest_accepted < band * self.tol)
            || self.largest_rejected * band > self.tol
    }
}

/// Numerical rank over the reals by column-pivoted QR.
pub fn rank_real(a: &DMatrix<f64>, tol: Option<f64>) -> Result<RankDecision> {
    require_finite(a)?;
    let max_col_norm = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(0.0f64, f64::max);
    let tol = tol.unwrap_or_else(|| {
        a.nrows().max(a.ncols()) as f64 * f64::EPSILON * max_col_norm
    });
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let k = r.nrows().min(r.ncols());
    let mut rank = 0;
    let mut smallest_accepted = f64::INFINITY;
    let mut largest_rejected = 0.0f64;
    for i in 0..k {
        let d = r[(i, i)].abs();
        if d > tol {
            rank += 1;
            smallest_accepted = smallest_accepted.min(d);
        } else {
            largest_rejected = largest_rejected.max(d);
        }
    }
    Ok(RankDecision {
        rank,
        tol,
        smallest_accepted,
        largest_rejected,
    })
}

/// Numerical rank over the complex field of `m_re + i m_im`, computed as
/// half the real rank of the doubled embedding `[[Re, -Im], [Im, Re]]`.
pub fn rank_complex(m_re: &DMatrix<f64>, m_im: &DMatrix<f64>, tol: Option<f64>) -> Result<usize> {
    Ok(rank_complex_decision(m_re, m_im, tol)?.rank)
}

/// As [`rank_complex`], returning the full decision record. The reported
/// `rank` is already halved; `tol` applies to the embedding's QR diagonal.
pub fn rank_complex_decision(
    m_re: &DMatrix<f64>,
    m_im: &DMatrix<f64>,
    tol: Option<f64>,
) -> Result<RankDecision> {
    if m_re.shape() != m_im.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", m_re.nrows(), m_re.ncols()),
            got: format!("{}x{}", m_im.nrows(), m_im.ncols()),
        });
    }
    let (r, c) = m_re.shape();
    let mut embed = DMatrix::<f64>::zeros(2 * r, 2 * c);
    embed.view_mut((0, 0), (r, c)).copy_from(m_re);
    embed.view_mut((r, c), (r, c)).copy_from(m_re);
    embed.view_mut((0, c), (r, c)).copy_from(&(-m_im));
    embed.view_mut((r, 0), (r, c)).copy_from(m_im);
    let real = rank_real(&embed, tol)?;
    // Singular values of the embedding come in pairs, so the real rank is
    // even in exact arithmetic; floor the division for borderline splits.
    Ok(RankDecision {
        rank: real.rank / 2,
        ..real
    })
}

fn require_symmetric(w: &DMatrix<f64>) -> Result<()> {
    let asym = max_norm(&(w - w.transpose()));
    let tol = 1e-10 * max_norm(w).max(1e-300);
    if asym > tol {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tol,
        });
    }
    Ok(())
}

/// `(m + m^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Solves `f^T x + x f + w = 0` for symmetric `w` and stable `f` by the
/// Schur-form substitution method.
///
/// Fails when `f` has an eigenvalue with nonnegative real part, or when the
/// achieved residual exceeds `lyapunov_rel_tol * |w|_max`.
pub fn solve_lyapunov(
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
    settings: &SolverSettings,
) -> Result<DMatrix<f64>> {
    let n = require_square(f)?;
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n}x{n}"),
            got: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    require_symmetric(w)?;
    let schur = real_schur(f, settings)?;
    for lambda in eigenvalues_of_schur(&schur.t) {
        if lambda.re >= 0.0 {
            return Err(Error::NotStable {
                re: lambda.re,
                im: lambda.im,
            });
        }
    }
    let w_sym = symmetrize(w);
    let c = -(schur.q.transpose() * &w_sym * &schur.q);
    let y = solve_quasi_sylvester(&schur.t, &c)?;
    let x = symmetrize(&(&schur.q * y * schur.q.transpose()));
    let residual = max_norm(&(f.transpose() * &x + &x * f + &w_sym));
    let tol = settings.lyapunov_rel_tol * max_norm(&w_sym).max(1e-300);
    if residual > tol {
        return Err(Error::ResidualTooLarge { residual, tol });
    }
    Ok(x)
}

/// Solves `t^T y + y t = c` for quasi-upper-triangular `t` by block forward
/// substitution over the 1x1/2x2 diagonal blocks.
fn solve_quasi_sylvester(t: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    let blocks = schur_blocks(t);
    let mut y = DMatrix::<f64>::zeros(n, n);
    for &(cj, sj) in &blocks {
        for &(ri, si) in &blocks {
            // rhs = c_IJ - sum_{k<I} t_kI^T y_kJ - sum_{k<J} y_Ik t_kJ
            let mut rhs = c.view((ri, cj), (si, sj)).clone_owned();
            if ri > 0 {
                let t_above = t.view((0, ri), (ri, si));
                let y_above = y.view((0, cj), (ri, sj));
                rhs -= t_above.transpose() * y_above;
            }
            if cj > 0 {
                let y_left = y.view((ri, 0), (si, cj));
                let t_left = t.view((0, cj), (cj, sj));
                rhs -= y_left * t_left;
            }
            let tii = t.view((ri, ri), (si, si)).clone_owned();
            let tjj = t.view((cj, cj), (sj, sj)).clone_owned();
            // Small Sylvester block: (I (x) tii^T + tjj^T (x) I) vec(y) = vec(rhs).
            let dim = si * sj;
            let mut small = DMatrix::<f64>::zeros(dim, dim);
            for a in 0..sj {
                for b in 0..si {
                    let row = a * si + b;
                    for bb in 0..si {
                        small[(row, a * si + bb)] += tii[(bb, b)];
                    }
                    for aa in 0..sj {
                        small[(row, aa * si + b)] += tjj[(aa, a)];
                    }
                }
            }
            let mut vec_rhs = DVector::<f64>::zeros(dim);
            for a in 0..sj {
                for b in 0..si {
                    vec_rhs[a * si + b] = rhs[(b, a)];
                }
            }
            let sol = small
                .lu()
                .solve(&vec_rhs)
                .ok_or(Error::Singular("Lyapunov block solve"))?;
            for a in 0..sj {
                for b in 0..si {
                    y[(ri + b, cj + a)] = sol[a * si + b];
                }
            }
        }
    }
    Ok(y)
}

/// `ln |det a|` from an LU factorization, avoiding overflow of the raw
/// determinant. Returns `None` for (numerically) singular input.
pub fn log_abs_det(a: &DMatrix<f64>) -> Option<f64> {
    let lu = a.clone().lu();
    let u = lu.u();
    let mut acc = 0.0;
    for i in 0..u.nrows().min(u.ncols()) {
        let d = u[(i, i)].abs();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    Some(acc)
}
