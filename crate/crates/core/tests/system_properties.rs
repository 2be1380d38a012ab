mod common;

use elqr_core::matkit::spectral_radius;
use elqr_core::system::{controllability_rank, default_prestabilizer, kalman_decompose, lqr, prestabilize};
use elqr_core::{LtiSystem, Matrix, Tolerances, Vector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Plant with a known split: `nu` uncontrollable states with spectral radius
/// below 0.9, hidden behind a random orthogonal change of coordinates.
fn hidden_uncontrollable(rng: &mut ChaCha8Rng, nu: usize, nc: usize, m: usize) -> LtiSystem {
    let ctrl = common::random_controllable(rng, nc, m, false);
    let mut a11 = common::uniform(rng, nu, nu, -1.0, 1.0);
    let r = spectral_radius(&a11).unwrap();
    if r > 0.0 {
        a11 *= rng.random_range(0.1..0.9) / r;
    }
    let n = nu + nc;
    let mut a = Matrix::zeros(n, n);
    a.view_mut((0, 0), (nu, nu)).copy_from(&a11);
    a.view_mut((nu, 0), (nc, nu)).copy_from(&common::uniform(rng, nc, nu, -1.0, 1.0));
    a.view_mut((nu, nu), (nc, nc)).copy_from(ctrl.a());
    let mut b = Matrix::zeros(n, m);
    b.view_mut((nu, 0), (nc, m)).copy_from(ctrl.b());
    let u = common::random_orthogonal(rng, n);
    LtiSystem::new(&u * a * u.transpose(), &u * b).unwrap()
}

#[test]
fn kalman_blocks_vanish() {
    let tol = Tolerances::default();
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let nu = rng.random_range(0..=2);
        let nc = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let sys = hidden_uncontrollable(&mut rng, nu, nc, m);
        let kd = kalman_decompose(&sys, &tol).unwrap();
        assert_eq!(kd.controllable_dim, nc);
        assert!(kd.stabilizable);
        let t = &kd.transform;
        let n = nu + nc;
        assert!((t.transpose() * t - Matrix::identity(n, n)).norm() < 1e-10);
        let az = t.transpose() * sys.a() * t;
        let bz = t.transpose() * sys.b();
        let upper_right = az.view((0, nu), (nu, nc)).norm();
        let top = bz.view((0, 0), (nu, m)).norm();
        assert!(upper_right <= 1e-8 * sys.a().norm(), "{upper_right:e}");
        assert!(top <= 1e-8 * sys.b().norm(), "{top:e}");
        assert!((az.view((nu, nu), (nc, nc)) - &kd.a22).norm() < 1e-10);
        assert!((bz.view((nu, 0), (nc, m)) - &kd.b2).norm() < 1e-10);
    }
}

#[test]
fn controllability_rank_is_similarity_invariant() {
    let tol = Tolerances::default();
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let nu = rng.random_range(0..=2);
        let nc = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let sys = hidden_uncontrollable(&mut rng, nu, nc, m);
        let n = nu + nc;
        // Well-conditioned nonsingular transform.
        let t = common::random_orthogonal(&mut rng, n)
            * Matrix::from_diagonal(&Vector::from_fn(n, |_, _| rng.random_range(0.5..2.0)));
        let ti = t.clone().try_inverse().unwrap();
        let moved = LtiSystem::new(&ti * sys.a() * &t, &ti * sys.b()).unwrap();
        assert_eq!(controllability_rank(&sys, &tol).unwrap(), nc);
        assert_eq!(controllability_rank(&moved, &tol).unwrap(), nc);
    }
}

#[test]
fn prestabilized_stage_cost_matches() {
    let tol = Tolerances::default();
    let mut rng = common::rng(13);
    for _ in 0..200 {
        let (n, m) = common::dims(&mut rng);
        let sys = common::random_controllable(&mut rng, n, m, false);
        let cost = common::random_cost(&mut rng, n, m);
        let (_, k_hat) = lqr(&sys, &Matrix::identity(n, n), &Matrix::identity(m, m), &tol).unwrap();
        let pre = prestabilize(&sys, &cost, &k_hat, &tol).unwrap();
        assert_eq!(pre.system.a(), &sys.closed_loop(&k_hat));
        for _ in 0..5 {
            let x = Vector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
            let w = Vector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
            let u = -(&k_hat * &x) + &w;
            let original = cost.stage(&x, &u);
            let shifted = pre.cost.stage(&x, &w);
            assert!((original - shifted).abs() <= 1e-9 * (1.0 + original.abs()));
            let next = sys.step(&x, &u);
            assert!((next - pre.system.step(&x, &w)).norm() <= 1e-12 * (1.0 + x.norm()));
        }
    }
}

#[test]
fn default_prestabilizer_gives_stable_nonsingular_loops() {
    let tol = Tolerances::default();
    let mut rng = common::rng(14);
    for _ in 0..100 {
        let (n, m) = common::dims(&mut rng);
        let mut sys = common::random_controllable(&mut rng, n, m, false);
        if rng.random_bool(0.3) {
            // Force a singular A.
            let mut a = sys.a().clone();
            a.row_mut(0).fill(0.0);
            sys = LtiSystem::new(a, sys.b().clone()).unwrap();
            if controllability_rank(&sys, &tol).unwrap() < n {
                continue;
            }
        }
        let f = default_prestabilizer(&sys, &tol).unwrap();
        let cl = sys.closed_loop(&f);
        assert!(spectral_radius(&cl).unwrap() < 1.0);
        assert!(cl.determinant().abs() > 1e-8);
    }
}
