mod common;

use elqr_core::dissipativity::certify_strict;
use elqr_core::matkit::{definiteness, eigen_extremes, null_space_basis, pseudo_inverse};
use elqr_core::riccati::{
    build_reverse, cgdare_residual, rcgdare_solve_stabilizing, rcgdare_solve_stabilizing_with,
    rdare_solve_stabilizing, riccati_recursion, rotate_cost, Classification,
};
use elqr_core::{Error, LtiSystem, Matrix, StageCost, Tolerances};
use nalgebra::dmatrix;
use rand::Rng;

/// `Q_P`, `S_P`, `R_P` written out directly.
fn rotated(sys: &LtiSystem, cost: &StageCost, p: &Matrix) -> (Matrix, Matrix, Matrix) {
    let (a, b) = (sys.a(), sys.b());
    (
        cost.q() + a.transpose() * p * a - p,
        cost.s() + b.transpose() * p * a,
        cost.r() + b.transpose() * p * b,
    )
}

/// Defect of `P = Q + A^T P A - S_P^T (R_P + G)^{-1} S_P`.
fn rdare_defect(sys: &LtiSystem, cost: &StageCost, g: &Matrix, p: &Matrix) -> f64 {
    let (q, s, r) = rotated(sys, cost, p);
    let inv = (r + g).try_inverse().expect("R_P + G invertible");
    (q - s.transpose() * inv * s).norm()
}

struct Solved {
    inst: common::StrictInstance,
    g: Matrix,
    ps: Matrix,
    pbar: Matrix,
    /// Solution reached by the recursion from zero.
    p0: Option<Matrix>,
}

fn solved_instances(seed: u64, count: usize) -> Vec<Solved> {
    let tol = Tolerances::default();
    let mut rng = common::rng(seed);
    (0..count)
        .map(|_| {
            let (n, m) = common::dims(&mut rng);
            let inst = common::strict_instance(&mut rng, n, m);
            let cert = certify_strict(&inst.sys, &inst.cost, &tol).unwrap();
            let g = cert.null_projector.clone();
            let ps = cert.stabilizing.as_ref().expect("stabilizing solution").p.clone();
            let rev = rcgdare_solve_stabilizing_with(&inst.sys, &inst.cost, Some(&g), &tol).unwrap();
            let p0 = cert.cgdare_solution.as_ref().map(|s| s.p.clone());
            Solved { inst, g, ps, pbar: rev.solution.p, p0 }
        })
        .collect()
}

fn solutions(s: &Solved) -> Vec<&Matrix> {
    let mut out = vec![&s.ps, &s.pbar];
    if let Some(p) = s.p0.as_ref() {
        out.push(p);
    }
    out
}

#[test]
fn projector_is_kernel_basis_product() {
    let tol = Tolerances::default();
    for s in solved_instances(21, 200) {
        for p in solutions(&s) {
            let chk = cgdare_residual(&s.inst.sys, &s.inst.cost, p, &tol).unwrap();
            assert!(chk.solves(p, &tol), "residual {:e}", chk.residual);
            let r = &chk.rotated.r;
            let m = r.nrows();
            let g = Matrix::identity(m, m) - pseudo_inverse(r, &tol).unwrap() * r;
            let z = null_space_basis(r, &tol).unwrap();
            assert!((&g - &z * z.transpose()).norm() <= 1e-9);
            assert!((&chk.g - &g).norm() <= 1e-9);
        }
    }
}

#[test]
fn regularized_inverse_matches_pseudo_inverse() {
    let tol = Tolerances::default();
    for s in solved_instances(22, 200) {
        for p in solutions(&s) {
            let (_, sp, rp) = rotated(&s.inst.sys, &s.inst.cost, p);
            let chk = cgdare_residual(&s.inst.sys, &s.inst.cost, p, &tol).unwrap();
            let g = &chk.g;
            let inv = (&rp + g).try_inverse().unwrap();
            let pinv = pseudo_inverse(&rp, &tol).unwrap();
            let scale = 1.0 + pinv.norm();
            // Relative to the size of the pseudo-inverse: R_P may be
            // ill-conditioned on its range.
            assert!((&inv - (&pinv + g)).norm() <= 1e-8 * scale);
            assert!((&inv * &sp - &pinv * &sp).norm() <= 1e-8 * scale);
        }
    }
}

#[test]
fn constrained_and_regularized_solutions_coincide() {
    let tol = Tolerances::default();
    for s in solved_instances(23, 200) {
        let (sys, cost) = (&s.inst.sys, &s.inst.cost);
        assert!((sys.b() * &s.g).norm() <= 1e-9);
        // rDARE fixed point => constrained solution.
        let chk = cgdare_residual(sys, cost, &s.ps, &tol).unwrap();
        assert!(chk.kernel_ok && chk.residual <= 1e-8 * (1.0 + s.ps.norm()));
        // Constrained solutions => rDARE fixed points.
        for p in solutions(&s) {
            assert!(rdare_defect(sys, cost, &s.g, p) <= 1e-8 * (1.0 + p.norm()));
        }
    }
}

#[test]
fn constrained_and_regularized_coincide_on_examples() {
    let tol = Tolerances::default();
    let b = dmatrix![2.0, 0.0; 1.0, 1.0];
    let cost = StageCost::without_cross_term(dmatrix![0.0, 0.0; 0.0, 1.0], Matrix::zeros(2, 2), &tol).unwrap();
    let g = dmatrix![0.5, -0.5; -0.5, 0.5];
    let p = dmatrix![0.0, 0.0; 0.0, 1.0];
    // Example 2: the constrained solution solves the regularized equation.
    let ex2 = LtiSystem::new(dmatrix![0.9, 1.0; 0.0, 1.0], b.clone()).unwrap();
    assert!(rdare_defect(&ex2, &cost, &g, &p) <= 1e-12);
    // Prestabilized example: BG = 0 after the input change, both directions.
    let ex6 = LtiSystem::new(dmatrix![1.0, 1.0; 0.0, 1.0], b).unwrap();
    let pre = elqr_core::system::prestabilize(&ex6, &cost, &(Matrix::identity(2, 2) * 0.5), &tol).unwrap();
    let sol = rdare_solve_stabilizing(&pre.system, &pre.cost, &g, &tol).unwrap();
    assert!(sol.solves_cgdare(&tol));
    assert!((&sol.p - &p).norm() <= 1e-8);
    assert!(rdare_defect(&pre.system, &pre.cost, &g, &p) <= 1e-10);
}

#[test]
fn projector_survives_rotation() {
    let tol = Tolerances::default();
    let mut rng = common::rng(26);
    for s in solved_instances(24, 200) {
        let n = s.inst.sys.n();
        let lambda = common::random_symmetric(&mut rng, n, 2.0);
        let rot = rotate_cost(&s.inst.sys, &s.inst.cost, &lambda).unwrap().to_stage_cost();
        for p in solutions(&s) {
            let g = cgdare_residual(&s.inst.sys, &s.inst.cost, p, &tol).unwrap().g;
            let shifted = p - &lambda;
            let chk = cgdare_residual(&s.inst.sys, &rot, &shifted, &tol).unwrap();
            assert!((&chk.g - &g).norm() <= 1e-9);
            // The shifted point still solves the rotated equation, up to
            // round-off in blocks of size |P| + |Lambda|.
            assert!(chk.kernel_ok);
            assert!(chk.residual <= 10.0 * tol.residual_bound(p.norm() + lambda.norm()));
        }
    }
}

#[test]
fn reverse_projector_matches() {
    let tol = Tolerances::default();
    for s in solved_instances(25, 200) {
        let (sys, cost) = (&s.inst.sys, &s.inst.cost);
        let rev = build_reverse(sys, cost, &tol).unwrap();
        let rsys = LtiSystem::new(rev.a_bar.clone(), rev.b_bar.clone()).unwrap();
        let rcost = StageCost::new(rev.q_bar.clone(), rev.r_bar.clone(), rev.s_bar.clone(), &tol).unwrap();
        // Projector of the reverse equation at its own solution.
        let g_bar = cgdare_residual(&rsys, &rcost, &s.pbar, &tol).unwrap().g;
        assert!((&g_bar - &s.g).norm() <= 1e-9, "{:e}", (&g_bar - &s.g).norm());
        // Discovering the reverse projector independently agrees as well.
        let auto = rcgdare_solve_stabilizing(sys, cost, &tol).unwrap();
        assert!((&auto.reverse_regularizer - &s.g).norm() <= 1e-9);
    }
}

#[test]
fn solutions_are_ordered() {
    let tol = Tolerances::default();
    for s in solved_instances(27, 200) {
        let gap = &s.ps - &s.pbar;
        let (lo, hi) = eigen_extremes(&gap).unwrap();
        assert!(lo >= tol.psd_tol * hi.abs().max(1.0), "gap {lo:e}");
        if let Some(p) = s.p0.as_ref() {
            let scale = 1e-7 * (1.0 + s.ps.norm());
            assert!(eigen_extremes(&(&s.ps - p)).unwrap().0 >= -scale);
            assert!(eigen_extremes(&(p - &s.pbar)).unwrap().0 >= -scale);
        }
        // The reverse solution is negative semidefinite in the generating
        // rotation's coordinates.
        let shifted = &s.pbar - &s.inst.lambda;
        assert!(eigen_extremes(&shifted).unwrap().1 <= 1e-7 * (1.0 + shifted.norm()));
    }
}

#[test]
fn stabilizing_solution_shifts_with_rotation() {
    let tol = Tolerances::default();
    let mut rng = common::rng(28);
    for s in solved_instances(29, 200) {
        let n = s.inst.sys.n();
        let lambda = common::random_symmetric(&mut rng, n, 2.0);
        let rot = rotate_cost(&s.inst.sys, &s.inst.cost, &lambda).unwrap().to_stage_cost();
        let sol = rdare_solve_stabilizing(&s.inst.sys, &rot, &s.g, &tol).unwrap();
        assert_eq!(sol.classification, Classification::Stabilizing);
        let err = (&sol.p - (&s.ps - &lambda)).norm();
        assert!(err <= 1e-8 * (1.0 + s.ps.norm()), "{err:e}");
    }
}

/// Both roots of `b^2 p^2 + (r - q b^2 - a^2 r) p - q r = 0`, the scalar
/// equation with `s = 0`, larger first.
fn scalar_roots(a: f64, b: f64, q: f64, r: f64) -> (f64, f64) {
    let (qa, qb, qc) = (b * b, r - q * b * b - a * a * r, -q * r);
    let disc = (qb * qb - 4.0 * qa * qc).sqrt();
    ((-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa))
}

#[test]
fn scalar_solutions_match_quadratic_formula() {
    let tol = Tolerances::default();
    let check = |a: f64, b: f64, q: f64, r: f64| {
        let sys = LtiSystem::new(dmatrix![a], dmatrix![b]).unwrap();
        let cost = StageCost::without_cross_term(dmatrix![q], dmatrix![r], &tol).unwrap();
        let (hi, lo) = scalar_roots(a, b, q, r);
        let ps = rdare_solve_stabilizing(&sys, &cost, &Matrix::zeros(1, 1), &tol).unwrap();
        assert!((ps.p[(0, 0)] - hi).abs() <= 1e-9 * (1.0 + hi.abs()), "{} vs {hi}", ps.p[(0, 0)]);
        // Closed-loop factors classify the roots.
        assert!((a - b * (a * b * hi / (r + b * b * hi))).abs() < 1.0);
        let rev = rcgdare_solve_stabilizing(&sys, &cost, &tol).unwrap();
        assert!((rev.solution.p[(0, 0)] - lo).abs() <= 1e-9 * (1.0 + lo.abs()));
    };
    check(2.0, 1.0, 1.0, 1.0);
    assert!((scalar_roots(2.0, 1.0, 1.0, 1.0).0 - (2.0 + 5f64.sqrt())).abs() < 1e-12);
    let mut rng = common::rng(30);
    for _ in 0..200 {
        let a = rng.random_range(0.2..2.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        check(a, rng.random_range(0.3..2.0), rng.random_range(0.1..3.0), rng.random_range(0.1..3.0));
    }
}

#[test]
fn scalar_recursion_matches_hand_iteration() {
    let tol = Tolerances::default();
    let mut rng = common::rng(31);
    for _ in 0..50 {
        let (a, b, q, r) = (
            rng.random_range(-2.0..2.0),
            rng.random_range(0.3..2.0),
            rng.random_range(-1.0..2.0),
            rng.random_range(0.5..2.0),
        );
        let s = rng.random_range(-0.3..0.3);
        let sys = LtiSystem::new(dmatrix![a], dmatrix![b]).unwrap();
        let cost = StageCost::new(dmatrix![q], dmatrix![r], dmatrix![s], &tol).unwrap();
        let p0 = rng.random_range(0.0..3.0);
        let run = riccati_recursion(&sys, &cost, &dmatrix![p0], 10, &tol).unwrap();
        let mut p = p0;
        for k in 1..=10 {
            let rp = r + b * b * p;
            if rp.abs() < 1e-6 {
                break;
            }
            let sp = s + b * p * a;
            p = q + a * a * p - sp * sp / rp;
            assert!((run.p[k][(0, 0)] - p).abs() <= 1e-9 * (1.0 + p.abs()), "step {k}");
        }
    }
}

#[test]
fn reverse_of_example2_by_hand() {
    let tol = Tolerances::default();
    let sys = LtiSystem::new(dmatrix![0.9, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]).unwrap();
    let cost = StageCost::without_cross_term(dmatrix![0.0, 0.0; 0.0, 1.0], Matrix::zeros(2, 2), &tol).unwrap();
    let rev = build_reverse(&sys, &cost, &tol).unwrap();
    let c = 1.0 / 0.9;
    assert!((&rev.a_bar - dmatrix![c, -c; 0.0, 1.0]).norm() < 1e-14);
    assert!((&rev.b_bar - dmatrix![c, -c; 1.0, 1.0]).norm() < 1e-14);
    assert!((&rev.q_bar - dmatrix![0.0, 0.0; 0.0, -1.0]).norm() < 1e-14);
    assert!((&rev.s_bar - dmatrix![0.0, -1.0; 0.0, -1.0]).norm() < 1e-14);
    assert!((&rev.r_bar - dmatrix![-1.0, -1.0; -1.0, -1.0]).norm() < 1e-14);
}

#[test]
fn reverse_of_uncontrolled_stable_plant_is_not_stabilizable() {
    let tol = Tolerances::default();
    let sys = LtiSystem::new(dmatrix![0.5, 0.0; 0.1, 0.3], Matrix::zeros(2, 1)).unwrap();
    let cost = StageCost::without_cross_term(Matrix::identity(2, 2), dmatrix![1.0], &tol).unwrap();
    let err = rcgdare_solve_stabilizing_with(&sys, &cost, Some(&Matrix::identity(1, 1)), &tol).unwrap_err();
    assert_eq!(err, Error::NotStabilizable);
}

#[test]
fn necessity_on_converged_solves() {
    // A solution with R_P >= 0 makes H_P positive semidefinite.
    let tol = Tolerances::default();
    for s in solved_instances(32, 100) {
        for p in solutions(&s) {
            let rot = rotate_cost(&s.inst.sys, &s.inst.cost, p).unwrap();
            if definiteness(&rot.r, &tol).unwrap().is_psd() {
                let (lo, hi) = eigen_extremes(&rot.h()).unwrap();
                assert!(lo >= -1e-7 * (1.0 + hi.abs()), "{lo:e}");
            }
        }
    }
}
