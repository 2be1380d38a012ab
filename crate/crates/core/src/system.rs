//! Plant and stage cost, controllability analysis and pre-stabilization.

use alloc::format;

use crate::matkit::{
    self, assemble_h, condition_number, dominant_left_vectors, ensure_finite, ensure_shape,
    null_space_basis, spectral_norm, spectral_radius, symmetrize, Matrix, Stall, Tolerances, Vector,
};
use crate::{Error, Result};

/// Discrete-time plant `x+ = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
}

impl LtiSystem {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self> {
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidDimensions("A must have at least one row".into()));
        }
        ensure_shape(&a, n, n, "A")?;
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::InvalidDimensions(format!(
                "B is {}x{}, expected {n} rows and at least one column",
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(LtiSystem { a, b })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    /// Closed loop `A - B K`.
    pub fn closed_loop(&self, k: &Matrix) -> Matrix {
        &self.a - &self.b * k
    }
}

/// Quadratic stage cost `[x; u]^T [[Q, S^T], [S, R]] [x; u]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCost {
    q: Matrix,
    r: Matrix,
    s: Matrix,
}

impl StageCost {
    /// Checks shapes and symmetry of `Q` and `R` (to `psd_tol`), then stores
    /// the exactly symmetrized blocks.
    pub fn new(q: Matrix, r: Matrix, s: Matrix, tol: &Tolerances) -> Result<Self> {
        ensure_finite(&q, "Q")?;
        ensure_finite(&r, "R")?;
        ensure_finite(&s, "S")?;
        let n = q.nrows();
        let m = r.nrows();
        ensure_shape(&q, n, n, "Q")?;
        ensure_shape(&r, m, m, "R")?;
        ensure_shape(&s, m, n, "S")?;
        if !matkit::is_symmetric(&q, tol) {
            return Err(Error::NotSymmetric("Q"));
        }
        if !matkit::is_symmetric(&r, tol) {
            return Err(Error::NotSymmetric("R"));
        }
        Ok(Self::from_parts(q, r, s))
    }

    /// Cost with `S = 0`.
    pub fn without_cross_term(q: Matrix, r: Matrix, tol: &Tolerances) -> Result<Self> {
        let s = Matrix::zeros(r.nrows(), q.nrows());
        Self::new(q, r, s, tol)
    }

    pub(crate) fn from_parts(q: Matrix, r: Matrix, s: Matrix) -> Self {
        StageCost { q: symmetrize(&q), r: symmetrize(&r), s }
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    pub fn h(&self) -> Matrix {
        assemble_h(&self.q, &self.s, &self.r)
    }

    pub fn stage(&self, x: &Vector, u: &Vector) -> f64 {
        let qx = (x.transpose() * &self.q * x)[(0, 0)];
        let ux = (u.transpose() * &self.s * x)[(0, 0)];
        let ru = (u.transpose() * &self.r * u)[(0, 0)];
        qx + 2.0 * ux + ru
    }

    pub fn check_compatible(&self, sys: &LtiSystem) -> Result<()> {
        if self.n() != sys.n() || self.m() != sys.m() {
            return Err(Error::InvalidDimensions(format!(
                "cost is for n={}, m={} but system has n={}, m={}",
                self.n(),
                self.m(),
                sys.n(),
                sys.m()
            )));
        }
        Ok(())
    }
}

/// Orthonormal controllability decomposition. With `x = T z`, `z = [z_u; z_c]`:
/// `T^T A T = [[A11, 0], [A21, A22]]` and `T^T B = [0; B2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanDecomposition {
    pub transform: Matrix,
    pub controllable_dim: usize,
    pub a11: Matrix,
    pub a21: Matrix,
    pub a22: Matrix,
    pub b2: Matrix,
    /// Spectral radius of `A11` (0 when everything is controllable).
    pub uncontrollable_radius: f64,
    pub stabilizable: bool,
    /// Some uncontrollable eigenvalue lies within `spectral_margin` of the unit circle.
    pub marginal: bool,
}

impl KalmanDecomposition {
    pub fn uncontrollable_dim(&self) -> usize {
        self.transform.ncols() - self.controllable_dim
    }

    pub fn is_controllable(&self) -> bool {
        self.uncontrollable_dim() == 0
    }

    /// Controllable subsystem `(A22, B2)`.
    pub fn controllable_system(&self) -> Result<LtiSystem> {
        LtiSystem::new(self.a22.clone(), self.b2.clone())
    }
}

/// Orthonormal basis of the controllable subspace (staircase construction).
fn controllable_basis(sys: &LtiSystem, tol: &Tolerances) -> Result<Matrix> {
    let n = sys.n();
    let a = sys.a();
    let a_norm = spectral_norm(a)?;
    let mut basis = Matrix::zeros(n, 0);
    let mut block = sys.b().clone();
    let mut cutoff = tol.rank_rel_tol * spectral_norm(&block)? * n.max(block.ncols()) as f64;
    while basis.ncols() < n {
        for _ in 0..2 {
            let proj = &basis * (basis.transpose() * &block);
            block -= proj;
        }
        let fresh = dominant_left_vectors(&block, cutoff)?;
        if fresh.ncols() == 0 {
            break;
        }
        let take = fresh.ncols().min(n - basis.ncols());
        let k = basis.ncols();
        basis = basis.insert_columns(k, take, 0.0);
        basis.view_mut((0, k), (n, take)).copy_from(&fresh.columns(0, take));
        block = a * fresh.columns(0, take);
        cutoff = tol.rank_rel_tol * a_norm * n.max(take) as f64;
    }
    Ok(basis)
}

/// Dimension of the controllable subspace, i.e. the numerical rank of `[B, AB, ..., A^{n-1}B]`.
pub fn controllability_rank(sys: &LtiSystem, tol: &Tolerances) -> Result<usize> {
    Ok(controllable_basis(sys, tol)?.ncols())
}

pub fn kalman_decompose(sys: &LtiSystem, tol: &Tolerances) -> Result<KalmanDecomposition> {
    let n = sys.n();
    let basis = controllable_basis(sys, tol)?;
    let nc = basis.ncols();
    let transform = if nc == n {
        Matrix::identity(n, n)
    } else {
        let complement = null_space_basis(&basis.transpose(), tol)?;
        if complement.ncols() != n - nc {
            return Err(Error::NumericalFailure("controllable subspace complement has wrong size"));
        }
        let mut t = Matrix::zeros(n, n);
        t.view_mut((0, 0), (n, n - nc)).copy_from(&complement);
        t.view_mut((0, n - nc), (n, nc)).copy_from(&basis);
        t
    };
    let nu = n - nc;
    let at = transform.transpose() * sys.a() * &transform;
    let bt = transform.transpose() * sys.b();
    let a11 = at.view((0, 0), (nu, nu)).into_owned();
    let a21 = at.view((nu, 0), (nc, nu)).into_owned();
    let a22 = at.view((nu, nu), (nc, nc)).into_owned();
    let b2 = bt.view((nu, 0), (nc, sys.m())).into_owned();
    let moduli = matkit::eigenvalue_moduli(&a11)?;
    let uncontrollable_radius = moduli.iter().cloned().fold(0.0, f64::max);
    let marginal = moduli.iter().any(|&r| (r - 1.0).abs() <= tol.spectral_margin);
    Ok(KalmanDecomposition {
        transform,
        controllable_dim: nc,
        a11,
        a21,
        a22,
        b2,
        uncontrollable_radius,
        stabilizable: tol.is_schur_stable(uncontrollable_radius),
        marginal,
    })
}

/// Plant and cost after the input change `u = -K_hat x + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreStabilizedProblem {
    pub k_hat: Matrix,
    pub system: LtiSystem,
    pub cost: StageCost,
}

pub fn prestabilize(
    sys: &LtiSystem,
    cost: &StageCost,
    k_hat: &Matrix,
    tol: &Tolerances,
) -> Result<PreStabilizedProblem> {
    cost.check_compatible(sys)?;
    ensure_finite(k_hat, "K_hat")?;
    ensure_shape(k_hat, sys.m(), sys.n(), "K_hat")?;
    let a_cl = sys.closed_loop(k_hat);
    if !tol.is_schur_stable(spectral_radius(&a_cl)?) {
        return Err(Error::NotStabilizing);
    }
    let (q, r, s) = (cost.q(), cost.r(), cost.s());
    let q_hat = q - s.transpose() * k_hat - k_hat.transpose() * s + k_hat.transpose() * r * k_hat;
    let s_hat = s - r * k_hat;
    Ok(PreStabilizedProblem {
        k_hat: k_hat.clone(),
        system: LtiSystem::new(a_cl, sys.b().clone())?,
        cost: StageCost::from_parts(q_hat, r.clone(), s_hat),
    })
}

/// Infinite-horizon LQR for a positive definite `R` by value iteration from `P = Q`.
/// Returns `(P, K)` with `K = (R + B^T P B)^{-1} B^T P A`.
pub fn lqr(sys: &LtiSystem, q: &Matrix, r: &Matrix, tol: &Tolerances) -> Result<(Matrix, Matrix)> {
    let (a, b) = (sys.a(), sys.b());
    let gain = |p: &Matrix| -> Result<Matrix> {
        let rp = r + b.transpose() * p * b;
        let bpa = b.transpose() * p * a;
        rp.lu()
            .solve(&bpa)
            .ok_or(Error::NumericalFailure("LQR gain system is singular"))
    };
    let mut p = q.clone();
    let mut stall = Stall::default();
    for it in 0..tol.max_iterations {
        let k = gain(&p)?;
        let next = symmetrize(&(q + a.transpose() * &p * a - a.transpose() * &p * b * &k));
        let change = (&next - &p).norm();
        p = next;
        if !p.iter().all(|v| v.is_finite()) || p.norm() > 1e12 {
            return Err(Error::NotStabilizable);
        }
        if change <= tol.convergence_tol * (1.0 + p.norm())
            || stall.stalled(change, tol.residual_bound(p.norm()))
        {
            let k = gain(&p)?;
            return Ok((p, k));
        }
        if it + 1 == tol.max_iterations {
            return Err(Error::NotConverged { iterations: it + 1, last_change: change });
        }
    }
    unreachable!("max_iterations is at least one")
}

/// Condition number above which a state matrix is considered too close to
/// singular for the time-reversed construction.
pub(crate) fn reverse_condition_limit(tol: &Tolerances) -> f64 {
    1.0 / libm::sqrt(tol.rank_rel_tol)
}

/// A feedback `F` making `A - B F` Schur stable and well conditioned.
///
/// Returns `0` when `A` already qualifies. Otherwise solves an LQR with
/// `Q = I` and `R = rho I` for a few `rho`; if every closed loop is singular,
/// small deterministic gain perturbations are tried.
pub fn default_prestabilizer(sys: &LtiSystem, tol: &Tolerances) -> Result<Matrix> {
    let (n, m) = (sys.n(), sys.m());
    let limit = reverse_condition_limit(tol);
    let acceptable = |f: &Matrix| -> Result<bool> {
        let cl = sys.closed_loop(f);
        Ok(tol.is_schur_stable(spectral_radius(&cl)?) && condition_number(&cl)? < limit)
    };
    let zero = Matrix::zeros(m, n);
    if acceptable(&zero)? {
        return Ok(zero);
    }
    if !kalman_decompose(sys, tol)?.stabilizable {
        return Err(Error::NotStabilizable);
    }
    let q = Matrix::identity(n, n);
    let mut first = None;
    for rho in [1.0, 2.0, 0.5, 4.0, 0.25, 10.0, 0.1] {
        let (_, f) = lqr(sys, &q, &(Matrix::identity(m, m) * rho), tol)?;
        if acceptable(&f)? {
            return Ok(f);
        }
        first.get_or_insert(f);
    }
    let f0 = first.expect("at least one LQR solve");
    let cl_norm = spectral_norm(&sys.closed_loop(&f0))?.max(1.0);
    let b_norm = spectral_norm(sys.b())?;
    if b_norm == 0.0 {
        return Err(Error::NumericalFailure("cannot make A - BF nonsingular"));
    }
    let mut shift = Matrix::zeros(n, n);
    for i in 0..n {
        shift[((i + 1) % n, i)] = 1.0;
    }
    let directions = [
        sys.b().transpose(),
        sys.b().transpose() * &shift,
        sys.b().transpose() * &shift * &shift,
    ];
    for dir in directions.iter() {
        for eps in [0.05, -0.05, 0.1, -0.1, 0.2, -0.2, 0.3, -0.3] {
            let f = &f0 - dir * (eps * cl_norm / (b_norm * b_norm));
            if acceptable(&f)? {
                return Ok(f);
            }
        }
    }
    Err(Error::NumericalFailure("cannot make A - BF nonsingular"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LtiSystem::new(Matrix::zeros(2, 3), Matrix::zeros(2, 1)).is_err());
        assert!(LtiSystem::new(Matrix::zeros(2, 2), Matrix::zeros(3, 1)).is_err());
        let t = tol();
        assert!(matches!(
            StageCost::new(dmatrix![1.0, 2.0; 0.0, 1.0], dmatrix![1.0], Matrix::zeros(1, 2), &t),
            Err(Error::NotSymmetric("Q"))
        ));
    }

    #[test]
    fn controllability_examples() {
        let t = tol();
        let s = LtiSystem::new(dmatrix![2.0, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]).unwrap();
        assert_eq!(controllability_rank(&s, &t).unwrap(), 2);
        let s = LtiSystem::new(Matrix::identity(2, 2), Matrix::zeros(2, 1)).unwrap();
        assert_eq!(controllability_rank(&s, &t).unwrap(), 0);
        let s = LtiSystem::new(dmatrix![0.0, 1.0; 0.0, 0.0], dmatrix![0.0; 1.0]).unwrap();
        assert_eq!(controllability_rank(&s, &t).unwrap(), 2);
    }

    #[test]
    fn kalman_blocks() {
        let t = tol();
        let s = LtiSystem::new(dmatrix![0.5, 0.0; 0.0, 2.0], dmatrix![0.0; 1.0]).unwrap();
        let kd = kalman_decompose(&s, &t).unwrap();
        assert_eq!(kd.controllable_dim, 1);
        assert_relative_eq!(kd.uncontrollable_radius, 0.5, epsilon = 1e-12);
        assert!(kd.stabilizable);
        let s = LtiSystem::new(dmatrix![2.0, 0.0; 0.0, 0.5], dmatrix![0.0; 1.0]).unwrap();
        let kd = kalman_decompose(&s, &t).unwrap();
        assert_relative_eq!(kd.uncontrollable_radius, 2.0, epsilon = 1e-12);
        assert!(!kd.stabilizable);
        let s = LtiSystem::new(dmatrix![0.3, 0.0; 0.0, 1.0], dmatrix![1.0; 0.0]).unwrap();
        assert!(kalman_decompose(&s, &t).unwrap().marginal);
    }

    #[test]
    fn prestabilize_section6_example_keeps_cost() {
        let t = tol();
        let s = LtiSystem::new(dmatrix![1.0, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]).unwrap();
        let c = StageCost::without_cross_term(dmatrix![0.0, 0.0; 0.0, 1.0], Matrix::zeros(2, 2), &t).unwrap();
        let p = prestabilize(&s, &c, &(Matrix::identity(2, 2) * 0.5), &t).unwrap();
        assert_eq!(p.cost.q(), c.q());
        assert_eq!(p.cost.s(), c.s());
        assert_relative_eq!(p.system.a().clone(), dmatrix![0.0, 1.0; -0.5, 0.5], epsilon = 1e-15);
        assert!(matches!(prestabilize(&s, &c, &Matrix::zeros(2, 2), &t), Err(Error::NotStabilizing)));
    }

    #[test]
    fn default_prestabilizer_cases() {
        let t = tol();
        let s = LtiSystem::new(dmatrix![0.5, 0.1; 0.0, -0.4], dmatrix![1.0; 1.0]).unwrap();
        assert_eq!(default_prestabilizer(&s, &t).unwrap(), Matrix::zeros(1, 2));
        for (a, b) in [
            (dmatrix![2.0, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]),
            (dmatrix![0.0, 0.0; 0.0, 0.5], Matrix::identity(2, 2)),
        ] {
            let s = LtiSystem::new(a, b).unwrap();
            let f = default_prestabilizer(&s, &t).unwrap();
            let cl = s.closed_loop(&f);
            assert!(spectral_radius(&cl).unwrap() < 1.0);
            assert!(cl.determinant().abs() > 1e-6);
        }
        let s = LtiSystem::new(dmatrix![2.0, 0.0; 0.0, 0.5], dmatrix![0.0; 1.0]).unwrap();
        assert!(matches!(default_prestabilizer(&s, &t), Err(Error::NotStabilizable)));
    }
}
