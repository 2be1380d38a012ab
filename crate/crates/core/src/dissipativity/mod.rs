//! Quadratic pre-dissipativity certificates.
//!
//! A symmetric `Lambda` rotates the stage cost into
//! `H_Lambda = H + [[A^T L A - L, A^T L B], [B^T L A, B^T L B]]`.
//! The problem is pre-dissipative when some rotation makes `H_Lambda`
//! positive semidefinite, and strictly so when two rotations `L1 - L2 > 0`
//! both do (equivalently: `R_L >= 0` and `Q_L - S_L^T R_L^+ S_L > 0` for one `L`).

mod sdp;

pub use sdp::{export_sdp, SdpEntry, SdpExport, SdpKind, SdpVariable};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::matkit::{
    self, classify_eigenvalues, eigen_extremes, pseudo_inverse, solve_stein, solve_stein_sylvester,
    symmetrize, Matrix, Tolerances,
};
use crate::riccati::{
    self, bg_is_zero, cgdare_residual, discover_null_projector, rdare_solve_stabilizing,
    rotate_cost, Classification, ProjectorSource, RiccatiSolution,
};
use crate::system::{
    default_prestabilizer, kalman_decompose, prestabilize, reverse_condition_limit,
    KalmanDecomposition, LtiSystem, StageCost,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tier {
    None,
    PreDissipative,
    StrictPreDissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateMethod {
    RiccatiPair,
    UserSupplied,
    ExternalSdp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreDissipativityCheck {
    pub holds: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Whether `H_Lambda` is positive semidefinite.
pub fn check_pre_dissipativity(
    sys: &LtiSystem,
    cost: &StageCost,
    lambda: &Matrix,
    tol: &Tolerances,
) -> Result<PreDissipativityCheck> {
    let h = rotate_cost(sys, cost, lambda)?.h();
    let (lo, hi) = eigen_extremes(&h)?;
    Ok(PreDissipativityCheck {
        holds: classify_eigenvalues(lo, hi, tol).is_psd(),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrictCheck {
    pub holds: bool,
    pub r_psd: bool,
    pub complement_pd: bool,
    pub r_min_eigenvalue: f64,
    /// Smallest eigenvalue of `Q_L - S_L^T R_L^+ S_L`.
    pub complement_min_eigenvalue: f64,
}

/// `R_L >= 0` and `Q_L - S_L^T R_L^+ S_L > 0`.
pub fn check_strict_schur(
    sys: &LtiSystem,
    cost: &StageCost,
    lambda: &Matrix,
    tol: &Tolerances,
) -> Result<StrictCheck> {
    let rot = rotate_cost(sys, cost, lambda)?;
    let (r_lo, r_hi) = eigen_extremes(&rot.r)?;
    let r_psd = classify_eigenvalues(r_lo, r_hi, tol).is_psd();
    let complement = symmetrize(&(&rot.q - rot.s.transpose() * pseudo_inverse(&rot.r, tol)? * &rot.s));
    let (c_lo, c_hi) = eigen_extremes(&complement)?;
    let complement_pd = classify_eigenvalues(c_lo, c_hi, tol).is_pd();
    Ok(StrictCheck {
        holds: r_psd && complement_pd,
        r_psd,
        complement_pd,
        r_min_eigenvalue: r_lo,
        complement_min_eigenvalue: c_lo,
    })
}

/// Eigenvalue margins backing each inequality of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WitnessEigenvalues {
    /// `lambda_min(H_Lambda)` for the pre-dissipativity witness.
    pub h_lambda_min: Option<f64>,
    pub h_lambda1_min: Option<f64>,
    pub h_lambda2_min: Option<f64>,
    /// `lambda_min(Lambda1 - Lambda2)`.
    pub gap_min: Option<f64>,
    pub schur_r_min: Option<f64>,
    pub schur_complement_min: Option<f64>,
}

/// Scaling used to extend the reverse solution over uncontrollable states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftInfo {
    /// Factor `c` in `Lambda2_11 = -c Y` with `A11^T Y A11 - Y = -I`.
    pub scale: f64,
    pub doublings: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityCertificate {
    pub tier: Tier,
    /// Witness for pre-dissipativity (and for the Schur-complement form when strict).
    pub lambda: Option<Matrix>,
    pub lambda1: Option<Matrix>,
    pub lambda2: Option<Matrix>,
    pub witness: WitnessEigenvalues,
    pub method: Option<CertificateMethod>,
    pub null_projector: Matrix,
    pub projector_source: ProjectorSource,
    pub bg_norm: f64,
    pub bg_zero: bool,
    pub kalman: KalmanDecomposition,
    pub lift: Option<LiftInfo>,
    /// The controllable block was pre-stabilized before the reverse solve.
    pub prestabilized_reverse: bool,
    /// Stabilizing solution of the regularized equation on the full system.
    pub stabilizing: Option<RiccatiSolution>,
    /// Reverse (antistabilizing) solution of the controllable block, in
    /// Kalman coordinates of that block.
    pub antistabilizing_controllable: Option<Matrix>,
    /// Solution of the constrained generalized equation reached from the hint.
    pub cgdare_solution: Option<RiccatiSolution>,
    pub diagnostics: Vec<String>,
}

pub fn certify_strict(sys: &LtiSystem, cost: &StageCost, tol: &Tolerances) -> Result<DissipativityCertificate> {
    certify_strict_with_hint(sys, cost, None, tol)
}

struct StrictParts {
    lambda1: Matrix,
    lambda2: Matrix,
    lambda: Matrix,
    witness: WitnessEigenvalues,
    lift: Option<LiftInfo>,
    prestabilized: bool,
    pbar_c: Matrix,
}

/// Builds a certificate. `hint` is a candidate rotation: it starts the
/// recursion that discovers the kernel projector, and is accepted as a
/// pre-dissipativity witness when `H_hint >= 0`.
pub fn certify_strict_with_hint(
    sys: &LtiSystem,
    cost: &StageCost,
    hint: Option<&Matrix>,
    tol: &Tolerances,
) -> Result<DissipativityCertificate> {
    cost.check_compatible(sys)?;
    tol.validate()?;
    let kalman = kalman_decompose(sys, tol)?;
    if !kalman.stabilizable {
        return Err(Error::NotStabilizable);
    }
    let mut diagnostics = Vec::new();
    if kalman.uncontrollable_dim() > 0 {
        diagnostics.push(format!(
            "{} uncontrollable state direction(s); uncontrollable spectral radius {:.6}",
            kalman.uncontrollable_dim(),
            kalman.uncontrollable_radius
        ));
    }
    let np = discover_null_projector(sys, cost, hint, tol)?;
    if np.source == ProjectorSource::FreeInputs {
        diagnostics.push(String::from(
            "no solution of the constrained equation reached from the hint; G taken as the free-input projector",
        ));
    }
    let g = np.g.clone();
    let bg_norm = (sys.b() * &g).norm();
    let bg_zero = bg_is_zero(sys.b(), &g, tol);

    let stabilizing = match rdare_solve_stabilizing(sys, cost, &g, tol) {
        Ok(s) => Some(s),
        Err(e) => {
            diagnostics.push(format!("stabilizing regularized solve failed: {e}"));
            None
        }
    };

    // Pre-dissipativity evidence: hint first, then any solution found.
    let mut pre: Option<(Matrix, CertificateMethod, f64)> = None;
    if let Some(h) = hint {
        let c = check_pre_dissipativity(sys, cost, h, tol)?;
        if c.holds {
            pre = Some((symmetrize(h), CertificateMethod::UserSupplied, c.min_eigenvalue));
        } else {
            diagnostics.push(format!("supplied Lambda gives lambda_min(H_Lambda) = {:e}", c.min_eigenvalue));
        }
    }
    let mut candidates: Vec<&RiccatiSolution> = Vec::new();
    if let Some(s) = np.solution.as_ref() {
        candidates.push(s);
    }
    if let Some(s) = stabilizing.as_ref() {
        if s.solves_cgdare(tol) {
            candidates.push(s);
        }
    }
    for sol in candidates {
        if pre.is_some() {
            break;
        }
        let c = check_pre_dissipativity(sys, cost, &sol.p, tol)?;
        if c.holds {
            pre = Some((sol.p.clone(), CertificateMethod::RiccatiPair, c.min_eigenvalue));
        }
    }

    let mut cert = DissipativityCertificate {
        tier: Tier::None,
        lambda: None,
        lambda1: None,
        lambda2: None,
        witness: WitnessEigenvalues::default(),
        method: None,
        null_projector: g.clone(),
        projector_source: np.source,
        bg_norm,
        bg_zero,
        kalman,
        lift: None,
        prestabilized_reverse: false,
        stabilizing,
        antistabilizing_controllable: None,
        cgdare_solution: np.solution.clone(),
        diagnostics,
    };

    let strict = if !bg_zero {
        Err(format!("BG = 0 fails (||BG||_F = {bg_norm:e}); strict pre-dissipativity is impossible"))
    } else {
        match cert.stabilizing.as_ref() {
            Some(ps) => strict_parts(sys, cost, &cert.kalman, &g, ps, tol),
            None => Err(String::from("no stabilizing solution")),
        }
    };
    match strict {
        Ok(parts) => {
            cert.tier = Tier::StrictPreDissipative;
            cert.method = Some(CertificateMethod::RiccatiPair);
            cert.lambda = Some(parts.lambda);
            cert.lambda1 = Some(parts.lambda1);
            cert.lambda2 = Some(parts.lambda2);
            cert.witness = parts.witness;
            cert.lift = parts.lift;
            cert.prestabilized_reverse = parts.prestabilized;
            cert.antistabilizing_controllable = Some(parts.pbar_c);
            if parts.prestabilized {
                cert.diagnostics.push(String::from(
                    "controllable block was pre-stabilized to build the reverse problem; solutions are reported in original coordinates",
                ));
            }
            if parts.lift.is_some() {
                cert.diagnostics.push(String::from(
                    "Lambda2 extended over uncontrollable states by a scaled Lyapunov block",
                ));
            }
        }
        Err(reason) => {
            cert.diagnostics.push(format!("strict certificate not established: {reason}"));
            if let Some((l, method, lo)) = pre {
                cert.tier = Tier::PreDissipative;
                cert.method = Some(method);
                cert.lambda = Some(l);
                cert.witness.h_lambda_min = Some(lo);
            }
        }
    }
    Ok(cert)
}

fn block(m: &Matrix, r0: usize, c0: usize, nr: usize, nc: usize) -> Matrix {
    m.view((r0, c0), (nr, nc)).into_owned()
}

fn strict_parts(
    sys: &LtiSystem,
    cost: &StageCost,
    kd: &KalmanDecomposition,
    g: &Matrix,
    ps: &RiccatiSolution,
    tol: &Tolerances,
) -> core::result::Result<StrictParts, String> {
    let err = |e: Error| format!("{e}");
    if ps.classification != Classification::Stabilizing {
        return Err(String::from("regularized solution is not stabilizing"));
    }
    if !ps.solves_cgdare(tol) {
        return Err(format!(
            "stabilizing regularized solution does not solve the constrained equation (residual {:e})",
            ps.residual
        ));
    }
    if !check_pre_dissipativity(sys, cost, &ps.p, tol).map_err(err)?.holds {
        return Err(String::from("H at the stabilizing solution is not positive semidefinite"));
    }
    let n = sys.n();
    let m = sys.m();
    let nc = kd.controllable_dim;
    let nu = n - nc;
    let t = &kd.transform;
    let qz = t.transpose() * cost.q() * t;
    let sz = cost.s() * t;

    // Reverse solution of the controllable block.
    let mut prestabilized = false;
    let (pbar_c, kbar_c) = if nc == 0 {
        (Matrix::zeros(0, 0), Matrix::zeros(m, 0))
    } else {
        let csys = kd.controllable_system().map_err(err)?;
        let ccost = StageCost::from_parts(block(&qz, nu, nu, nc, nc), cost.r().clone(), block(&sz, 0, nu, m, nc));
        let cond = matkit::condition_number(csys.a()).map_err(err)?;
        let rev = if cond < reverse_condition_limit(tol) {
            riccati::rcgdare_solve_stabilizing_with(&csys, &ccost, Some(g), tol).map_err(err)?
        } else {
            prestabilized = true;
            let f = default_prestabilizer(&csys, tol).map_err(err)?;
            let pre = prestabilize(&csys, &ccost, &f, tol).map_err(err)?;
            riccati::rcgdare_solve_stabilizing_with(&pre.system, &pre.cost, Some(g), tol).map_err(err)?
        };
        let pbar = rev.solution.p;
        let check = cgdare_residual(&csys, &ccost, &pbar, tol).map_err(err)?;
        if !check.solves(&pbar, tol) {
            return Err(format!(
                "reverse solution does not solve the constrained equation (residual {:e})",
                check.residual
            ));
        }
        (pbar, check.k)
    };

    let ps_z = t.transpose() * &ps.p * t;
    let (lambda2, lift) = if nu == 0 {
        (t * &pbar_c * t.transpose(), None)
    } else {
        let a_cl = &kd.a22 - &kd.b2 * &kbar_c;
        let q21 = block(&qz, nu, 0, nc, nu);
        let s1 = block(&sz, 0, 0, m, nu);
        let rhs = q21 - kbar_c.transpose() * s1 + a_cl.transpose() * &pbar_c * &kd.a21;
        let x21 = solve_stein_sylvester(&a_cl.transpose(), &kd.a11, &rhs).map_err(err)?;
        let y = solve_stein(&kd.a11, &Matrix::identity(nu, nu)).map_err(err)?;
        let assemble = |c: f64| -> Matrix {
            let mut lz = Matrix::zeros(n, n);
            lz.view_mut((0, 0), (nu, nu)).copy_from(&(&y * -c));
            lz.view_mut((nu, 0), (nc, nu)).copy_from(&x21);
            lz.view_mut((0, nu), (nu, nc)).copy_from(&x21.transpose());
            lz.view_mut((nu, nu), (nc, nc)).copy_from(&pbar_c);
            symmetrize(&(t * lz * t.transpose()))
        };
        let c0 = initial_lift_scale(sys, cost, &assemble(0.0), &ps_z, t, nu, tol).map_err(err)?;
        let mut c = c0;
        let mut found = None;
        for doublings in 0..=12 {
            let l2 = assemble(c);
            let h_ok = check_pre_dissipativity(sys, cost, &l2, tol).map_err(err)?.holds;
            let gap_ok = matkit::definiteness(&(&ps.p - &l2), tol).map_err(err)?.is_pd();
            if h_ok && gap_ok {
                found = Some((l2, LiftInfo { scale: c, doublings }));
                break;
            }
            c *= 2.0;
        }
        let (l2, info) = found.ok_or_else(|| String::from("uncontrollable-block scaling failed after 12 doublings"))?;
        (l2, Some(info))
    };

    let lambda1 = ps.p.clone();
    let h1 = check_pre_dissipativity(sys, cost, &lambda1, tol).map_err(err)?;
    let h2 = check_pre_dissipativity(sys, cost, &lambda2, tol).map_err(err)?;
    let gap = &lambda1 - &lambda2;
    let (gap_lo, gap_hi) = eigen_extremes(&gap).map_err(err)?;
    if !h1.holds || !h2.holds || !classify_eigenvalues(gap_lo, gap_hi, tol).is_pd() {
        return Err(format!(
            "rotation pair check failed: lambda_min(H1) = {:e}, lambda_min(H2) = {:e}, lambda_min(L1 - L2) = {:e}",
            h1.min_eigenvalue, h2.min_eigenvalue, gap_lo
        ));
    }

    let (lambda, schur, h_min) = schur_complement_witness(sys, cost, ps, tol).map_err(err)?
        .ok_or_else(|| String::from("no rotation P_s - aV passed the Schur-complement test"))?;
    Ok(StrictParts {
        lambda1,
        lambda2,
        lambda,
        witness: WitnessEigenvalues {
            h_lambda_min: Some(h_min),
            h_lambda1_min: Some(h1.min_eigenvalue),
            h_lambda2_min: Some(h2.min_eigenvalue),
            gap_min: Some(gap_lo),
            schur_r_min: Some(schur.r_min_eigenvalue),
            schur_complement_min: Some(schur.complement_min_eigenvalue),
        },
        lift,
        prestabilized,
        pbar_c,
    })
}

/// Starting scale for the uncontrollable block, from the Schur complement
/// of the scale-free rotation and from the gap to `P_s`.
fn initial_lift_scale(
    sys: &LtiSystem,
    cost: &StageCost,
    lambda2_0: &Matrix,
    ps_z: &Matrix,
    t: &Matrix,
    nu: usize,
    tol: &Tolerances,
) -> Result<f64> {
    let n = sys.n();
    let m = sys.m();
    let nc = n - nu;
    // H in coordinates [z_u, z_c, u].
    let h = rotate_cost(sys, cost, lambda2_0)?.h();
    let mut tt = Matrix::identity(n + m, n + m);
    tt.view_mut((0, 0), (n, n)).copy_from(t);
    let hz = tt.transpose() * h * &tt;
    let omega = block(&hz, 0, 0, nu, nu);
    let mixed = block(&hz, nu, 0, nc + m, nu);
    let rest = block(&hz, nu, nu, nc + m, nc + m);
    let comp = &omega - mixed.transpose() * pseudo_inverse(&rest, tol)? * &mixed;
    let need_h = (-eigen_extremes(&comp)?.0).max(0.0);
    let lz0 = t.transpose() * lambda2_0 * t;
    let d = ps_z - lz0;
    let d11 = block(&d, 0, 0, nu, nu);
    let d21 = block(&d, nu, 0, nc, nu);
    let d22 = block(&d, nu, nu, nc, nc);
    let gap_comp = &d11 - d21.transpose() * pseudo_inverse(&d22, tol)? * &d21;
    let need_gap = (-eigen_extremes(&gap_comp)?.0).max(0.0);
    Ok((1.0 + need_h + need_gap) / 64.0)
}

/// Searches `Lambda = P_s - a V` (with `V` the closed-loop Lyapunov matrix)
/// over `a = 1, 1/2, 1/4, ...` for one that passes [`check_strict_schur`].
/// Returns the rotation, its check, and `lambda_min(H_Lambda)`.
fn schur_complement_witness(
    sys: &LtiSystem,
    cost: &StageCost,
    ps: &RiccatiSolution,
    tol: &Tolerances,
) -> Result<Option<(Matrix, StrictCheck, f64)>> {
    let n = sys.n();
    let v = solve_stein(&sys.closed_loop(&ps.k), &Matrix::identity(n, n))?;
    let mut a = 1.0;
    for _ in 0..60 {
        let lambda = &ps.p - &v * a;
        let c = check_strict_schur(sys, cost, &lambda, tol)?;
        if c.holds {
            let h = check_pre_dissipativity(sys, cost, &lambda, tol)?;
            if h.holds {
                return Ok(Some((lambda, c, h.min_eigenvalue)));
            }
        }
        a *= 0.5;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedCheck {
    pub holds: bool,
    pub lambda: Option<Matrix>,
    /// `lambda_min(H_Lambda + diag(0, G))` for the returned `lambda`.
    pub min_eigenvalue: Option<f64>,
    pub diagnostics: Vec<String>,
}

/// Looks for `Lambda` with `H_Lambda + diag(0, G) > 0`, using the stabilizing
/// solution of the cost with `R` replaced by `R + G`.
pub fn check_regularized(
    sys: &LtiSystem,
    cost: &StageCost,
    g: &Matrix,
    tol: &Tolerances,
) -> Result<RegularizedCheck> {
    cost.check_compatible(sys)?;
    matkit::ensure_shape(g, sys.m(), sys.m(), "G")?;
    let reg = StageCost::from_parts(cost.q().clone(), cost.r() + g, cost.s().clone());
    let mut out = RegularizedCheck { holds: false, lambda: None, min_eigenvalue: None, diagnostics: Vec::new() };
    let zero = Matrix::zeros(sys.m(), sys.m());
    let ps = match rdare_solve_stabilizing(sys, &reg, &zero, tol) {
        Ok(p) => p,
        Err(e) => {
            out.diagnostics.push(format!("regularized stabilizing solve failed: {e}"));
            return Ok(out);
        }
    };
    if ps.classification != Classification::Stabilizing {
        out.diagnostics.push(String::from("regularized solution is not stabilizing"));
        return Ok(out);
    }
    let v = solve_stein(&sys.closed_loop(&ps.k), &Matrix::identity(sys.n(), sys.n()))?;
    let mut a = 1.0;
    let mut best = f64::NEG_INFINITY;
    for _ in 0..60 {
        let lambda = &ps.p - &v * a;
        let h = rotate_cost(sys, &reg, &lambda)?.h();
        let (lo, hi) = eigen_extremes(&h)?;
        best = best.max(lo);
        if classify_eigenvalues(lo, hi, tol).is_pd() {
            out.holds = true;
            out.lambda = Some(lambda);
            out.min_eigenvalue = Some(lo);
            return Ok(out);
        }
        a *= 0.5;
    }
    out.diagnostics.push(format!("no rotation found; best lambda_min = {best:e}"));
    Ok(out)
}
