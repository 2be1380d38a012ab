//! Dense matrix primitives with explicit rank and definiteness tolerances.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};

use crate::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const MAX_DECOMP_ITERATIONS: usize = 100_000;

/// Tolerances used for every rank, definiteness and convergence decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Singular values below `rank_rel_tol * sigma_max * max(rows, cols)` count as zero.
    pub rank_rel_tol: f64,
    /// Relative eigenvalue margin for semidefinite and definite decisions.
    pub psd_tol: f64,
    /// Relative stopping threshold for Riccati iterations.
    pub convergence_tol: f64,
    pub max_iterations: usize,
    /// Eigenvalues with modulus in `[1 - margin, 1 + margin]` are treated as marginal.
    pub spectral_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank_rel_tol: 1e-10,
            psd_tol: 1e-9,
            convergence_tol: 1e-11,
            max_iterations: 10_000,
            spectral_margin: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rank_rel_tol) {
            return Err(Error::InvalidTolerance("rank_rel_tol must be positive"));
        }
        if !positive(self.psd_tol) {
            return Err(Error::InvalidTolerance("psd_tol must be positive"));
        }
        if !positive(self.convergence_tol) {
            return Err(Error::InvalidTolerance("convergence_tol must be positive"));
        }
        if !positive(self.spectral_margin) {
            return Err(Error::InvalidTolerance("spectral_margin must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidTolerance("max_iterations must be at least 1"));
        }
        Ok(())
    }

    /// Bound used to accept an equation residual (or kernel defect) of a
    /// quantity whose magnitude is `scale`: `1e3 * convergence_tol * (1 + scale)`.
    pub fn residual_bound(&self, scale: f64) -> f64 {
        1e3 * self.convergence_tol * (1.0 + scale)
    }

    pub fn is_schur_stable(&self, radius: f64) -> bool {
        radius < 1.0 - self.spectral_margin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    PositiveDefinite,
    PositiveSemiDefinite,
    Indefinite,
    NegativeSemiDefinite,
    NegativeDefinite,
}

impl Definiteness {
    pub fn is_psd(self) -> bool {
        matches!(self, Definiteness::PositiveDefinite | Definiteness::PositiveSemiDefinite)
    }

    pub fn is_pd(self) -> bool {
        self == Definiteness::PositiveDefinite
    }
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(what))
    }
}

pub fn ensure_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() == rows && m.ncols() == cols {
        Ok(())
    } else {
        Err(Error::InvalidDimensions(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest entry of `|M - M^T|` relative to `max(1, max |M_ij|)`.
pub fn relative_asymmetry(m: &Matrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let scale = m.amax().max(1.0);
    (m - m.transpose()).amax() / scale
}

pub fn is_symmetric(m: &Matrix, tol: &Tolerances) -> bool {
    relative_asymmetry(m) <= tol.psd_tol
}

/// `m = sum_j sigma_j u_j v_j^T`. `v` is a full orthogonal `cols x cols`
/// matrix; `u` has one column per column of `m`, zero where `sigma_j = 0`.
/// Singular values are not sorted.
struct Svd {
    u: Matrix,
    sigma: Vector,
    v: Matrix,
}

const MAX_JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi (Hestenes) SVD: plane rotations applied to the columns
/// of `m` until they are mutually orthogonal. Small singular values come out
/// with high relative accuracy, which the rank decisions rely on.
fn svd(m: &Matrix) -> Result<Svd> {
    let c = m.ncols();
    let mut w = m.clone();
    let mut v = Matrix::identity(c, c);
    // Columns below this squared norm are treated as already zero.
    let negligible = {
        let e = f64::EPSILON * m.norm();
        e * e
    };
    // Columns count as orthogonal once their cosine is below this.
    let orthogonal = 4.0 * f64::EPSILON * m.nrows().max(1) as f64;
    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut worst: f64 = 0.0;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                let gamma = w.column(p).dot(&w.column(q));
                let cosine = gamma.abs() / libm::sqrt(alpha * beta);
                worst = worst.max(cosine);
                if cosine <= orthogonal {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::hypot(1.0, zeta));
                let cs = 1.0 / libm::hypot(1.0, t);
                let sn = cs * t;
                rotate_columns(&mut w, p, q, cs, sn);
                rotate_columns(&mut v, p, q, cs, sn);
            }
        }
        if worst <= orthogonal {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure("singular value decomposition did not converge"));
    }
    let mut sigma = Vector::zeros(c);
    let mut u = Matrix::zeros(m.nrows(), c);
    for j in 0..c {
        let norm = w.column(j).norm();
        sigma[j] = norm;
        if norm > 0.0 {
            u.set_column(j, &(w.column(j) / norm));
        }
    }
    Ok(Svd { u, sigma, v })
}

fn rotate_columns(m: &mut Matrix, p: usize, q: usize, cs: f64, sn: f64) {
    for i in 0..m.nrows() {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = cs * a - sn * b;
        m[(i, q)] = sn * a + cs * b;
    }
}

fn rank_cutoff(sigma: &Vector, rows: usize, cols: usize, tol: &Tolerances) -> f64 {
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    tol.rank_rel_tol * smax * rows.max(cols) as f64
}

/// Moore-Penrose pseudo-inverse by SVD with relative truncation.
pub fn pseudo_inverse(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    Ok(pseudo_inverse_with_kernel(m, tol)?.0)
}

/// `(M^+, Z)` from one SVD, with `Z` an orthonormal basis of `ker M`, so
/// that `I - M^+ M = Z Z^T` up to round-off.
pub fn pseudo_inverse_with_kernel(m: &Matrix, tol: &Tolerances) -> Result<(Matrix, Matrix)> {
    ensure_finite(m, "matrix")?;
    let (r, c) = m.shape();
    if c == 0 {
        return Ok((Matrix::zeros(0, r), Matrix::zeros(0, 0)));
    }
    if r == 0 || m.amax() == 0.0 {
        return Ok((Matrix::zeros(c, r), Matrix::identity(c, c)));
    }
    let s = svd(m)?;
    let cutoff = rank_cutoff(&s.sigma, r, c, tol);
    let mut pinv = Matrix::zeros(c, r);
    let mut kernel = Vec::new();
    for (i, &sv) in s.sigma.iter().enumerate() {
        if sv > cutoff {
            pinv += (s.v.column(i) * s.u.column(i).transpose()) / sv;
        } else {
            kernel.push(s.v.column(i).into_owned());
        }
    }
    let z = if kernel.is_empty() { Matrix::zeros(c, 0) } else { Matrix::from_columns(&kernel) };
    Ok((pinv, z))
}

pub fn numerical_rank(m: &Matrix, tol: &Tolerances) -> Result<usize> {
    ensure_finite(m, "matrix")?;
    let (r, c) = m.shape();
    if r == 0 || c == 0 || m.amax() == 0.0 {
        return Ok(0);
    }
    let s = svd(m)?;
    let cutoff = rank_cutoff(&s.sigma, r, c, tol);
    Ok(s.sigma.iter().filter(|&&v| v > cutoff).count())
}

/// Orthonormal basis of the kernel of `m` (a `cols x k` matrix, `k` possibly 0).
pub fn null_space_basis(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    Ok(pseudo_inverse_with_kernel(m, tol)?.1)
}

/// Orthogonal projector `I - M^+ M` onto the kernel of `m`.
pub fn kernel_projector(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let z = null_space_basis(m, tol)?;
    Ok(&z * z.transpose())
}

/// Eigenvalues of the symmetrized matrix, ascending.
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vector> {
    ensure_finite(m, "matrix")?;
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vector::zeros(0));
    }
    let eig = SymmetricEigen::try_new(symmetrize(m), f64::EPSILON, MAX_DECOMP_ITERATIONS)
        .ok_or(Error::NumericalFailure("symmetric eigenvalue iteration did not converge"))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    Ok(Vector::from_vec(vals))
}

/// Smallest and largest eigenvalue of the symmetrized matrix. Empty matrices give `(0, 0)`.
pub fn eigen_extremes(m: &Matrix) -> Result<(f64, f64)> {
    let ev = symmetric_eigenvalues(m)?;
    if ev.is_empty() {
        return Ok((0.0, 0.0));
    }
    Ok((ev[0], ev[ev.len() - 1]))
}

pub fn definiteness(m: &Matrix, tol: &Tolerances) -> Result<Definiteness> {
    ensure_finite(m, "matrix")?;
    if m.nrows() != m.ncols() || relative_asymmetry(m) > tol.psd_tol {
        return Err(Error::NotSymmetric("matrix"));
    }
    let (lo, hi) = eigen_extremes(m)?;
    Ok(classify_eigenvalues(lo, hi, tol))
}

/// Classification from the extreme eigenvalues, with margin `psd_tol * max(1, |lambda|_max)`.
pub fn classify_eigenvalues(lo: f64, hi: f64, tol: &Tolerances) -> Definiteness {
    let margin = tol.psd_tol * lo.abs().max(hi.abs()).max(1.0);
    if lo >= margin {
        Definiteness::PositiveDefinite
    } else if lo >= -margin {
        Definiteness::PositiveSemiDefinite
    } else if hi <= -margin {
        Definiteness::NegativeDefinite
    } else if hi <= margin {
        Definiteness::NegativeSemiDefinite
    } else {
        Definiteness::Indefinite
    }
}

/// Moduli of the (possibly complex) eigenvalues of a square matrix.
pub fn eigenvalue_moduli(m: &Matrix) -> Result<Vec<f64>> {
    ensure_finite(m, "matrix")?;
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidDimensions(format!(
            "eigenvalues need a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, MAX_DECOMP_ITERATIONS)
        .ok_or(Error::NumericalFailure("eigenvalue iteration did not converge"))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| libm::hypot(z.re, z.im))
        .collect())
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalue_moduli(m)?.into_iter().fold(0.0, f64::max))
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    ensure_finite(m, "matrix")?;
    if m.is_empty() || m.amax() == 0.0 {
        return Ok(0.0);
    }
    let s = svd(m)?;
    Ok(s.sigma.iter().cloned().fold(0.0, f64::max))
}

/// Ratio of largest to smallest singular value; infinite for singular or empty input.
pub fn condition_number(m: &Matrix) -> Result<f64> {
    ensure_finite(m, "matrix")?;
    if m.is_empty() || m.amax() == 0.0 {
        return Ok(f64::INFINITY);
    }
    let s = svd(m)?;
    let hi = s.sigma.iter().cloned().fold(0.0, f64::max);
    let lo = s.sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo == 0.0 || m.nrows() != m.ncols() {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}

/// Left singular vectors of `m` whose singular values exceed `cutoff`.
pub(crate) fn dominant_left_vectors(m: &Matrix, cutoff: f64) -> Result<Matrix> {
    if m.is_empty() || m.amax() == 0.0 {
        return Ok(Matrix::zeros(m.nrows(), 0));
    }
    let s = svd(m)?;
    let cols: Vec<Vector> = s
        .sigma
        .iter()
        .enumerate()
        .filter(|(_, &sv)| sv > cutoff)
        .map(|(i, _)| s.u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        Ok(Matrix::zeros(m.nrows(), 0))
    } else {
        Ok(Matrix::from_columns(&cols))
    }
}

/// Assembles `[[q, s^T], [s, r]]`.
pub fn assemble_h(q: &Matrix, s: &Matrix, r: &Matrix) -> Matrix {
    let n = q.nrows();
    let m = r.nrows();
    let mut h = Matrix::zeros(n + m, n + m);
    h.view_mut((0, 0), (n, n)).copy_from(q);
    h.view_mut((n, 0), (m, n)).copy_from(s);
    h.view_mut((0, n), (n, m)).copy_from(&s.transpose());
    h.view_mut((n, n), (m, m)).copy_from(r);
    h
}

/// Solves the Stein (discrete Lyapunov) equation `X = A^T X A + W` for Schur-stable `A`.
pub fn solve_stein(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    ensure_finite(a, "A")?;
    ensure_finite(w, "W")?;
    let n = a.nrows();
    ensure_shape(a, n, n, "A")?;
    ensure_shape(w, n, n, "W")?;
    if spectral_radius(a)? >= 1.0 {
        return Err(Error::NumericalFailure("Stein equation needs a Schur-stable matrix"));
    }
    let x = smith_doubling(a, w)?;
    // One correction pass recovers digits lost in the doubling sums.
    let defect = w + a.transpose() * &x * a - &x;
    let x = x + smith_doubling(a, &defect)?;
    Ok(symmetrize_if_square_sym(&x, w))
}

fn symmetrize_if_square_sym(x: &Matrix, w: &Matrix) -> Matrix {
    if relative_asymmetry(w) == 0.0 {
        symmetrize(x)
    } else {
        x.clone()
    }
}

fn smith_doubling(a: &Matrix, w: &Matrix) -> Result<Matrix> {
    let mut x = w.clone();
    let mut ak = a.clone();
    for _ in 0..80 {
        let step = ak.transpose() * &x * &ak;
        x += &step;
        ak = &ak * &ak;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NumericalFailure("Stein iteration produced non-finite values"));
        }
        if step.norm() <= f64::EPSILON * x.norm() || ak.amax() < 1e-300 {
            return Ok(x);
        }
    }
    Err(Error::NumericalFailure("Stein iteration did not converge"))
}

/// Solves `X - L X R = C` for `X` (`L` is p x p, `R` is q x q, `C` is p x q)
/// through the Kronecker form. Intended for small blocks.
pub fn solve_stein_sylvester(l: &Matrix, r: &Matrix, c: &Matrix) -> Result<Matrix> {
    let p = l.nrows();
    let q = r.nrows();
    ensure_shape(c, p, q, "right-hand side")?;
    if p == 0 || q == 0 {
        return Ok(Matrix::zeros(p, q));
    }
    // vec(L X R) = (R^T kron L) vec(X) for column-major vec.
    let k = Matrix::identity(p * q, p * q) - r.transpose().kronecker(l);
    let rhs = Vector::from_column_slice(c.as_slice());
    let sol = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::NumericalFailure("Stein-Sylvester equation is singular"))?;
    if !sol.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalFailure("Stein-Sylvester equation is singular"));
    }
    Ok(Matrix::from_column_slice(p, q, sol.as_slice()))
}

/// Detects an iteration whose step size has stopped shrinking: round-off
/// keeps it above the convergence tolerance, though it is already small.
#[derive(Default)]
pub(crate) struct Stall {
    best: f64,
    since_best: usize,
}

impl Stall {
    const PATIENCE: usize = 200;

    pub(crate) fn stalled(&mut self, change: f64, bound: f64) -> bool {
        if self.since_best == 0 && self.best == 0.0 || change < 0.5 * self.best {
            self.best = change;
            self.since_best = 0;
            return false;
        }
        self.since_best += 1;
        self.since_best >= Self::PATIENCE && self.best <= bound
    }
}
