//! Constrained generalized, regularized and reverse discrete algebraic
//! Riccati equations, and the generalized Riccati recursion.
//!
//! For a symmetric `P` the rotated blocks are
//! `Q_P = Q + A^T P A - P`, `S_P = S + B^T P A`, `R_P = R + B^T P B`.
//! `P` solves the constrained generalized equation when
//! `Q_P = S_P^T R_P^+ S_P` and `ker R_P` is contained in `ker S_P^T`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::matkit::{
    self, Stall, assemble_h, condition_number, ensure_finite, ensure_shape, kernel_projector,
    pseudo_inverse_with_kernel, solve_stein, solve_stein_sylvester, spectral_radius, symmetrize, Matrix,
    Tolerances,
};
use crate::system::{kalman_decompose, lqr, LtiSystem, StageCost};
use crate::{Error, Result};

/// Divergence cutoff on the Frobenius norm of Riccati iterates.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// `(Q_P, S_P, R_P)` for some symmetric `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedCost {
    pub q: Matrix,
    pub s: Matrix,
    pub r: Matrix,
}

impl RotatedCost {
    pub fn h(&self) -> Matrix {
        assemble_h(&self.q, &self.s, &self.r)
    }

    pub fn to_stage_cost(&self) -> StageCost {
        StageCost::from_parts(self.q.clone(), self.r.clone(), self.s.clone())
    }
}

/// Rotates the cost by `lambda` (symmetrized first).
pub fn rotate_cost(sys: &LtiSystem, cost: &StageCost, lambda: &Matrix) -> Result<RotatedCost> {
    cost.check_compatible(sys)?;
    ensure_shape(lambda, sys.n(), sys.n(), "Lambda")?;
    ensure_finite(lambda, "Lambda")?;
    let l = symmetrize(lambda);
    let (a, b) = (sys.a(), sys.b());
    let la = &l * a;
    Ok(RotatedCost {
        q: symmetrize(&(cost.q() + a.transpose() * &la - &l)),
        s: cost.s() + b.transpose() * &la,
        r: symmetrize(&(cost.r() + b.transpose() * &l * b)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Stabilizing,
    Antistabilizing,
    Other,
}

pub fn classify_gain(sys: &LtiSystem, k: &Matrix, tol: &Tolerances) -> Result<(Classification, f64)> {
    let moduli = matkit::eigenvalue_moduli(&sys.closed_loop(k))?;
    let radius = moduli.iter().cloned().fold(0.0, f64::max);
    let smallest = moduli.iter().cloned().fold(f64::INFINITY, f64::min);
    let class = if tol.is_schur_stable(radius) {
        Classification::Stabilizing
    } else if smallest > 1.0 + tol.spectral_margin {
        Classification::Antistabilizing
    } else {
        Classification::Other
    };
    Ok((class, radius))
}

/// Defect of the constrained generalized equation at a candidate `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgdareCheck {
    /// `||Q_P - S_P^T K||_F`.
    pub residual: f64,
    /// `K = R_P^+ S_P`.
    pub k: Matrix,
    /// `G = I - R_P^+ R_P`.
    pub g: Matrix,
    pub kernel_ok: bool,
    /// `||S_P^T Z||_F` with `Z` an orthonormal basis of `ker R_P`.
    pub kernel_defect: f64,
    pub rotated: RotatedCost,
}

impl CgdareCheck {
    pub fn solves(&self, p: &Matrix, tol: &Tolerances) -> bool {
        self.kernel_ok && self.residual <= tol.residual_bound(p.norm())
    }
}

pub fn cgdare_residual(
    sys: &LtiSystem,
    cost: &StageCost,
    p: &Matrix,
    tol: &Tolerances,
) -> Result<CgdareCheck> {
    let rotated = rotate_cost(sys, cost, p)?;
    let (r_pinv, z) = pseudo_inverse_with_kernel(&rotated.r, tol)?;
    let k = &r_pinv * &rotated.s;
    let g = &z * z.transpose();
    let residual = (&rotated.q - rotated.s.transpose() * &k).norm();
    let kernel_defect = (rotated.s.transpose() * z).norm();
    let kernel_ok = kernel_defect <= tol.residual_bound(rotated.s.norm());
    Ok(CgdareCheck { residual, k, g, kernel_ok, kernel_defect, rotated })
}

/// A solution candidate together with its checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Matrix,
    /// Feedback; the regularized gain `(R_P + G)^{-1} S_P` for regularized
    /// solves, `R_P^+ S_P` otherwise.
    pub k: Matrix,
    /// Kernel projector `I - R_P^+ R_P` at `P`.
    pub g: Matrix,
    /// Defect of the constrained generalized equation at `P`.
    pub residual: f64,
    pub kernel_ok: bool,
    pub classification: Classification,
    pub closed_loop_spectral_radius: f64,
    /// Regularizer used by a regularized solve.
    pub regularizer: Option<Matrix>,
    /// Defect of the regularized equation, for regularized solves.
    pub rdare_residual: Option<f64>,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

impl RiccatiSolution {
    /// True when `P` satisfies the constrained generalized equation to tolerance.
    pub fn solves_cgdare(&self, tol: &Tolerances) -> bool {
        self.kernel_ok && self.residual <= tol.residual_bound(self.p.norm())
    }
}

/// `||B G||_F` is treated as zero below `psd_tol * (1 + ||B||_F)`.
pub fn bg_is_zero(b: &Matrix, g: &Matrix, tol: &Tolerances) -> bool {
    (b * g).norm() <= tol.psd_tol * (1.0 + b.norm())
}

fn check_regularizer(sys: &LtiSystem, g: &Matrix, tol: &Tolerances) -> Result<()> {
    ensure_shape(g, sys.m(), sys.m(), "G")?;
    ensure_finite(g, "G")?;
    if !matkit::is_symmetric(g, tol) {
        return Err(Error::NotSymmetric("G"));
    }
    Ok(())
}

fn regularized_gain(rot: &RotatedCost, g: &Matrix) -> Result<Matrix> {
    let k = (&rot.r + g)
        .lu()
        .solve(&rot.s)
        .ok_or(Error::NumericalFailure("R_P + G is singular"))?;
    if k.iter().all(|v| v.is_finite()) {
        Ok(k)
    } else {
        Err(Error::NumericalFailure("R_P + G is singular"))
    }
}

/// One step of the regularized recursion. Returns `(P_next, K, defect of P)`.
fn rdare_step(
    sys: &LtiSystem,
    cost: &StageCost,
    g: &Matrix,
    p: &Matrix,
) -> Result<(Matrix, Matrix, f64)> {
    let rot = rotate_cost(sys, cost, p)?;
    let k = regularized_gain(&rot, g)?;
    let defect = &rot.q - rot.s.transpose() * &k;
    let next = symmetrize(&(p + &defect));
    Ok((next, k, defect.norm()))
}

/// Cost of the policy `u = -K x` under the cost with `R` replaced by `R + G`,
/// for Schur-stable `A - B K`.
fn policy_cost(sys: &LtiSystem, cost: &StageCost, g: &Matrix, k: &Matrix) -> Result<Matrix> {
    let (q, s) = (cost.q(), cost.s());
    let rg = cost.r() + g;
    let w = symmetrize(&(q - s.transpose() * k - k.transpose() * s + k.transpose() * rg * k));
    solve_stein(&sys.closed_loop(k), &w)
}

/// Stabilizing solution of the regularized equation
/// `P = Q + A^T P A - S_P^T (R_P + G)^{-1} S_P`.
///
/// The recursion starts from the cost of an LQR-stabilized policy, which
/// bounds the stabilizing solution from above, and finishes with Newton steps.
pub fn rdare_solve_stabilizing(
    sys: &LtiSystem,
    cost: &StageCost,
    g: &Matrix,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    cost.check_compatible(sys)?;
    check_regularizer(sys, g, tol)?;
    tol.validate()?;
    if !kalman_decompose(sys, tol)?.stabilizable {
        return Err(Error::NotStabilizable);
    }
    let (n, m) = (sys.n(), sys.m());
    let (_, f) = lqr(sys, &Matrix::identity(n, n), &Matrix::identity(m, m), tol)?;
    let p0 = policy_cost(sys, cost, g, &f)?;
    rdare_solve_stabilizing_from(sys, cost, g, &p0, tol)
}

/// As [`rdare_solve_stabilizing`] but iterating from a caller-chosen `p0`.
pub fn rdare_solve_stabilizing_from(
    sys: &LtiSystem,
    cost: &StageCost,
    g: &Matrix,
    p0: &Matrix,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    cost.check_compatible(sys)?;
    check_regularizer(sys, g, tol)?;
    ensure_shape(p0, sys.n(), sys.n(), "P0")?;
    ensure_finite(p0, "P0")?;
    let g = symmetrize(g);
    let mut p = symmetrize(p0);
    let mut iterations = 0;
    let mut stall = Stall::default();
    loop {
        let (next, _, _) = rdare_step(sys, cost, &g, &p)?;
        iterations += 1;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { iterations });
        }
        let change = (&next - &p).norm();
        let converged = change <= tol.convergence_tol * (1.0 + p.norm())
            || stall.stalled(change, tol.residual_bound(p.norm()));
        p = next;
        if converged {
            break;
        }
        if iterations % NEWTON_PERIOD == 0 {
            p = newton_polish(sys, cost, &g, p, 1)?;
        }
        if iterations >= tol.max_iterations {
            return Err(Error::NotConverged { iterations, last_change: change });
        }
    }
    let p = newton_polish(sys, cost, &g, p, 3)?;
    finish_regularized(sys, cost, &g, p, iterations, tol)
}

/// Value-iteration steps between Newton acceleration attempts.
const NEWTON_PERIOD: usize = 20;

/// Up to `steps` Kleinman steps; each is kept only if it lowers the defect.
fn newton_polish(sys: &LtiSystem, cost: &StageCost, g: &Matrix, mut p: Matrix, steps: usize) -> Result<Matrix> {
    let (_, mut k, mut defect) = rdare_step(sys, cost, g, &p)?;
    for _ in 0..steps {
        if spectral_radius(&sys.closed_loop(&k))? >= 1.0 {
            break;
        }
        let Ok(candidate) = policy_cost(sys, cost, g, &k) else { break };
        let Ok((_, k_new, d_new)) = rdare_step(sys, cost, g, &candidate) else { break };
        if !(d_new < defect) {
            break;
        }
        p = candidate;
        k = k_new;
        defect = d_new;
    }
    Ok(p)
}

fn finish_regularized(
    sys: &LtiSystem,
    cost: &StageCost,
    g: &Matrix,
    p: Matrix,
    iterations: usize,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    let (_, k, rdare_residual) = rdare_step(sys, cost, g, &p)?;
    let check = cgdare_residual(sys, cost, &p, tol)?;
    let (classification, radius) = classify_gain(sys, &k, tol)?;
    let mut diagnostics = Vec::new();
    let r_psd = matkit::definiteness(&check.rotated.r, tol).map(|d| d.is_psd()).unwrap_or(false);
    if bg_is_zero(sys.b(), g, tol) && r_psd && !check.solves(&p, tol) {
        diagnostics.push(format!(
            "regularized solution does not solve the constrained equation although BG = 0 (residual {:e})",
            check.residual
        ));
    }
    Ok(RiccatiSolution {
        p,
        k,
        g: check.g,
        residual: check.residual,
        kernel_ok: check.kernel_ok,
        classification,
        closed_loop_spectral_radius: radius,
        regularizer: Some(g.clone()),
        rdare_residual: Some(rdare_residual),
        iterations,
        diagnostics,
    })
}

/// Time-reversed problem built from `A^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseProblem {
    pub a_bar: Matrix,
    pub b_bar: Matrix,
    pub q_bar: Matrix,
    pub s_bar: Matrix,
    pub r_bar: Matrix,
}

impl ReverseProblem {
    pub fn h_bar(&self) -> Matrix {
        assemble_h(&self.q_bar, &self.s_bar, &self.r_bar)
    }
}

pub fn build_reverse(sys: &LtiSystem, cost: &StageCost, tol: &Tolerances) -> Result<ReverseProblem> {
    cost.check_compatible(sys)?;
    if condition_number(sys.a())? >= 1.0 / tol.rank_rel_tol {
        return Err(Error::SingularA);
    }
    let a_bar = sys.a().clone().try_inverse().ok_or(Error::SingularA)?;
    let b_bar = &a_bar * sys.b();
    let (q, s, r) = (cost.q(), cost.s(), cost.r());
    let q_bar = symmetrize(&-(a_bar.transpose() * q * &a_bar));
    let s_bar = s * &a_bar - b_bar.transpose() * q * &a_bar;
    let sb = s * &b_bar;
    let r_bar = symmetrize(&(-r + &sb + sb.transpose() - b_bar.transpose() * q * &b_bar));
    Ok(ReverseProblem { a_bar, b_bar, q_bar, s_bar, r_bar })
}

/// Stabilizing solution of the reverse equation, reported in original
/// coordinates together with reverse-time data.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseSolution {
    /// `P_bar` with gain, projector and checks evaluated on the forward problem.
    pub solution: RiccatiSolution,
    /// Gain of the reverse closed loop `A_bar - B_bar K_bar`.
    pub reverse_gain: Matrix,
    pub reverse_spectral_radius: f64,
    /// Regularizer used on the reverse problem.
    pub reverse_regularizer: Matrix,
    /// When `R - S A^{-1} B` is nonsingular: whether `P_bar` is the
    /// antistabilizing forward solution. `None` otherwise.
    pub antistabilizing_cross_check: Option<bool>,
}

/// Stabilizing reverse solution, with the reverse regularizer discovered
/// automatically (equal to the forward one when `BG = 0`).
pub fn rcgdare_solve_stabilizing(
    sys: &LtiSystem,
    cost: &StageCost,
    tol: &Tolerances,
) -> Result<ReverseSolution> {
    let forward = discover_null_projector(sys, cost, None, tol)?;
    rcgdare_solve_stabilizing_with(sys, cost, Some(&forward.g), tol)
}

/// Stabilizing reverse solution. `g` is the forward kernel projector if
/// known; it is reused on the reverse problem when `B g = 0`.
pub fn rcgdare_solve_stabilizing_with(
    sys: &LtiSystem,
    cost: &StageCost,
    g: Option<&Matrix>,
    tol: &Tolerances,
) -> Result<ReverseSolution> {
    let rev = build_reverse(sys, cost, tol)?;
    // The reverse value function is a maximum; negating the reverse cost
    // turns it into an ordinary minimization whose solution is -P_bar.
    let rsys = LtiSystem::new(rev.a_bar.clone(), rev.b_bar.clone())?;
    let rcost = StageCost::from_parts(-&rev.q_bar, -&rev.r_bar, -&rev.s_bar);
    let g_bar = match g {
        Some(g) if bg_is_zero(sys.b(), g, tol) => symmetrize(g),
        _ => discover_null_projector(&rsys, &rcost, None, tol)?.g,
    };
    let neg = rdare_solve_stabilizing(&rsys, &rcost, &g_bar, tol)?;
    let p_bar = match g {
        Some(g) if bg_is_zero(sys.b(), g, tol) => refine_forward(sys, cost, &symmetrize(g), -&neg.p, tol)?,
        _ => -&neg.p,
    };
    let check = cgdare_residual(sys, cost, &p_bar, tol)?;
    let (classification, radius) = classify_gain(sys, &check.k, tol)?;
    let mut diagnostics = neg.diagnostics.clone();
    let nonsingular = {
        let a_inv_b = &rev.b_bar;
        let d = cost.r() - cost.s() * a_inv_b;
        condition_number(&d)? < 1.0 / tol.rank_rel_tol
    };
    let cross = if nonsingular {
        let ok = check.solves(&p_bar, tol) && classification == Classification::Antistabilizing;
        if !ok {
            diagnostics.push(String::from(
                "reverse stabilizing solution is not the antistabilizing forward solution",
            ));
        }
        Some(ok)
    } else {
        None
    };
    let solution = RiccatiSolution {
        p: p_bar,
        k: check.k,
        g: check.g,
        residual: check.residual,
        kernel_ok: check.kernel_ok,
        classification,
        closed_loop_spectral_radius: radius,
        regularizer: None,
        rdare_residual: None,
        iterations: neg.iterations,
        diagnostics,
    };
    Ok(ReverseSolution {
        solution,
        reverse_gain: neg.k,
        reverse_spectral_radius: neg.closed_loop_spectral_radius,
        reverse_regularizer: g_bar,
        antistabilizing_cross_check: cross,
    })
}

/// Newton steps on the forward equation (regularized by `g`) from `p`,
/// each kept only if it lowers the constrained residual. Needed when `R_P`
/// is nearly singular: the residual then magnifies the round-off left by
/// the reverse-time solve.
fn refine_forward(sys: &LtiSystem, cost: &StageCost, g: &Matrix, mut p: Matrix, tol: &Tolerances) -> Result<Matrix> {
    let mut best = cgdare_residual(sys, cost, &p, tol)?.residual;
    for _ in 0..20 {
        let rot = rotate_cost(sys, cost, &p)?;
        let Ok(k) = regularized_gain(&rot, g) else { break };
        let a_k = sys.closed_loop(&k);
        let (q, s, rg) = (cost.q(), cost.s(), cost.r() + g);
        let w = symmetrize(&(q - s.transpose() * &k - k.transpose() * s + k.transpose() * rg * &k));
        let Ok(x) = solve_stein_sylvester(&a_k.transpose(), &a_k, &w) else { break };
        let x = symmetrize(&x);
        let res = cgdare_residual(sys, cost, &x, tol)?.residual;
        if !(res < best) {
            break;
        }
        p = x;
        best = res;
    }
    Ok(p)
}

/// Output of the generalized Riccati recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionRun {
    /// `P_0, ..., P_N` (shorter if the run hit non-finite values).
    pub p: Vec<Matrix>,
    /// `k[i] = K_{i+1} = R_{P_i}^+ S_{P_i}`.
    pub k: Vec<Matrix>,
    /// `g[i] = I - R_{P_i}^+ R_{P_i}`, the free input directions paired with `k[i]`.
    pub g: Vec<Matrix>,
    /// Steps `i` at which `g[i]` differs from `g[i-1]`.
    pub kernel_changes: Vec<usize>,
    /// First step whose iterate exceeded the divergence cutoff.
    pub diverged_at: Option<usize>,
}

impl RecursionRun {
    pub fn kernel_constant(&self) -> bool {
        self.kernel_changes.is_empty()
    }

    pub fn last_p(&self) -> &Matrix {
        self.p.last().expect("recursion keeps P_0")
    }
}

fn pinv_step(sys: &LtiSystem, cost: &StageCost, p: &Matrix, tol: &Tolerances) -> Result<(Matrix, Matrix, Matrix)> {
    let rot = rotate_cost(sys, cost, p)?;
    let (r_pinv, z) = pseudo_inverse_with_kernel(&rot.r, tol)?;
    let k = &r_pinv * &rot.s;
    let g = &z * z.transpose();
    let next = symmetrize(&(p + &rot.q - rot.s.transpose() * &k));
    Ok((next, k, g))
}

/// `steps` iterations of `P_{i+1} = Q + A^T P_i A - (S^T + A^T P_i B) K_{i+1}`
/// with `K_{i+1} = R_{P_i}^+ S_{P_i}`, starting at `p0`.
pub fn riccati_recursion(
    sys: &LtiSystem,
    cost: &StageCost,
    p0: &Matrix,
    steps: usize,
    tol: &Tolerances,
) -> Result<RecursionRun> {
    cost.check_compatible(sys)?;
    ensure_shape(p0, sys.n(), sys.n(), "P0")?;
    ensure_finite(p0, "P0")?;
    let mut run = RecursionRun {
        p: Vec::with_capacity(steps + 1),
        k: Vec::with_capacity(steps),
        g: Vec::with_capacity(steps),
        kernel_changes: Vec::new(),
        diverged_at: None,
    };
    run.p.push(symmetrize(p0));
    for i in 0..steps {
        let (next, k, g) = match pinv_step(sys, cost, run.last_p(), tol) {
            Ok(v) => v,
            Err(Error::NumericalFailure(_)) | Err(Error::InvalidMatrix(_)) => {
                run.diverged_at.get_or_insert(i);
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(prev) = run.g.last() {
            if (prev - &g).norm() > 1e-8 {
                run.kernel_changes.push(i);
            }
        }
        let finite = next.iter().all(|v| v.is_finite());
        if run.diverged_at.is_none() && (!finite || next.norm() > DIVERGENCE_LIMIT) {
            run.diverged_at = Some(i + 1);
        }
        run.k.push(k);
        run.g.push(g);
        if !finite {
            break;
        }
        run.p.push(next);
    }
    Ok(run)
}

/// Runs the generalized recursion from `p0` to a fixed point and returns it
/// as a solution candidate of the constrained generalized equation.
pub fn find_cgdare_solution(
    sys: &LtiSystem,
    cost: &StageCost,
    p0: &Matrix,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    cost.check_compatible(sys)?;
    ensure_shape(p0, sys.n(), sys.n(), "P0")?;
    let mut p = symmetrize(p0);
    let mut iterations = 0;
    let mut stall = Stall::default();
    loop {
        let (next, _, _) = pinv_step(sys, cost, &p, tol)?;
        iterations += 1;
        if !next.iter().all(|v| v.is_finite()) || next.norm() > DIVERGENCE_LIMIT {
            return Err(Error::Diverged { iterations });
        }
        let change = (&next - &p).norm();
        let converged = change <= tol.convergence_tol * (1.0 + p.norm())
            || stall.stalled(change, tol.residual_bound(p.norm()));
        p = next;
        if converged {
            break;
        }
        if iterations >= tol.max_iterations {
            return Err(Error::NotConverged { iterations, last_change: change });
        }
    }
    solution_from_candidate(sys, cost, p, iterations, tol)
}

/// Checks an arbitrary symmetric candidate `p`.
pub fn solution_from_candidate(
    sys: &LtiSystem,
    cost: &StageCost,
    p: Matrix,
    iterations: usize,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    let check = cgdare_residual(sys, cost, &p, tol)?;
    let (classification, radius) = classify_gain(sys, &check.k, tol)?;
    Ok(RiccatiSolution {
        p,
        k: check.k,
        g: check.g,
        residual: check.residual,
        kernel_ok: check.kernel_ok,
        classification,
        closed_loop_spectral_radius: radius,
        regularizer: None,
        rdare_residual: None,
        iterations,
        diagnostics: Vec::new(),
    })
}

/// Projector onto the inputs that neither move the state nor enter the cost,
/// i.e. onto `ker [B; R; S^T]`.
pub fn free_input_projector(sys: &LtiSystem, cost: &StageCost, tol: &Tolerances) -> Result<Matrix> {
    cost.check_compatible(sys)?;
    let (n, m) = (sys.n(), sys.m());
    let mut stacked = Matrix::zeros(2 * n + m, m);
    stacked.view_mut((0, 0), (n, m)).copy_from(sys.b());
    stacked.view_mut((n, 0), (m, m)).copy_from(cost.r());
    stacked.view_mut((n + m, 0), (n, m)).copy_from(&cost.s().transpose());
    kernel_projector(&stacked, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectorSource {
    /// Taken from a solution of the constrained generalized equation.
    CgdareSolution,
    /// Fallback: projector onto the free inputs `ker [B; R; S^T]`.
    FreeInputs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullProjector {
    pub g: Matrix,
    pub source: ProjectorSource,
    pub solution: Option<RiccatiSolution>,
}

/// Kernel projector `G` shared by the solutions of the constrained
/// generalized equation. The recursion is run from `hint` (default `0`);
/// if it reaches a solution with `R_P >= 0`, its projector is used.
pub fn discover_null_projector(
    sys: &LtiSystem,
    cost: &StageCost,
    hint: Option<&Matrix>,
    tol: &Tolerances,
) -> Result<NullProjector> {
    let zero = Matrix::zeros(sys.n(), sys.n());
    let p0 = hint.unwrap_or(&zero);
    if let Ok(sol) = find_cgdare_solution(sys, cost, p0, tol) {
        let r_psd = rotate_cost(sys, cost, &sol.p)
            .and_then(|rot| matkit::definiteness(&rot.r, tol))
            .map(|d| d.is_psd())
            .unwrap_or(false);
        if sol.solves_cgdare(tol) && r_psd {
            return Ok(NullProjector {
                g: sol.g.clone(),
                source: ProjectorSource::CgdareSolution,
                solution: Some(sol),
            });
        }
    }
    Ok(NullProjector {
        g: free_input_projector(sys, cost, tol)?,
        source: ProjectorSource::FreeInputs,
        solution: None,
    })
}
