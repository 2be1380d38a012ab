//! Random problem generators shared by the integration tests.
#![allow(dead_code)]

use elqr_core::matkit::{eigenvalue_moduli, spectral_radius};
use elqr_core::{LtiSystem, Matrix, StageCost, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Matrix {
    let l = uniform(rng, n, n, -scale, scale);
    (&l + l.transpose()) * 0.5
}

pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    uniform(rng, n, n, -1.0, 1.0).qr().q()
}

/// Smallest singular value of the controllability matrix.
pub fn controllability_margin(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = Matrix::zeros(n, n * m);
    let mut blk = b.clone();
    for k in 0..n {
        c.view_mut((0, k * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    let sv = c.svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// A random plant with spectral radius in [0.5, 1.3], eigenvalues bounded
/// away from zero and a controllability margin of at least 0.05. With
/// `dead_input` the last input column of `B` is zero.
pub fn random_controllable(rng: &mut ChaCha8Rng, n: usize, m: usize, dead_input: bool) -> LtiSystem {
    loop {
        let mut a = uniform(rng, n, n, -1.0, 1.0);
        let rho = spectral_radius(&a).unwrap();
        if rho < 1e-3 {
            continue;
        }
        a *= rng.random_range(0.5..1.3) / rho;
        let smallest = eigenvalue_moduli(&a).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        if smallest < 0.1 {
            continue;
        }
        let mut b = uniform(rng, n, m, -1.0, 1.0);
        if dead_input {
            b.column_mut(m - 1).fill(0.0);
        }
        if controllability_margin(&a, &b) > 0.05 {
            return LtiSystem::new(a, b).unwrap();
        }
    }
}

/// Strictly pre-dissipative instance obtained by choosing `Lambda` and a
/// positive definite rotated cost `H_Lambda`, then undoing the rotation.
/// With a dead input, its row and column of `H_Lambda` are zero.
pub struct StrictInstance {
    pub sys: LtiSystem,
    pub cost: StageCost,
    pub lambda: Matrix,
    pub dead_input: bool,
}

pub fn strict_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> StrictInstance {
    let dead_input = m > 1 && rng.random_bool(0.4);
    let sys = random_controllable(rng, n, m, dead_input);
    let mut inst = strict_instance_for(rng, &sys);
    inst.dead_input = dead_input;
    inst
}

/// Strictly pre-dissipative cost for a given plant. Inputs whose column of
/// `B` is zero get a zero row and column in `H_Lambda`.
pub fn strict_instance_for(rng: &mut ChaCha8Rng, sys: &LtiSystem) -> StrictInstance {
    let (n, m) = (sys.n(), sys.m());
    let lambda = random_symmetric(rng, n, 1.0);
    let k = n + m;
    let f = uniform(rng, k, k, -1.0, 1.0);
    let mut h = &f * f.transpose() / k as f64 + Matrix::identity(k, k) * 0.2;
    let mut dead_input = false;
    for j in 0..m {
        if sys.b().column(j).amax() == 0.0 {
            dead_input = true;
            h.row_mut(n + j).fill(0.0);
            h.column_mut(n + j).fill(0.0);
        }
    }
    let (a, b) = (sys.a(), sys.b());
    let q = h.view((0, 0), (n, n)) - a.transpose() * &lambda * a + &lambda;
    let s = h.view((n, 0), (m, n)) - b.transpose() * &lambda * a;
    let r = h.view((n, n), (m, m)) - b.transpose() * &lambda * b;
    let q = (&q + q.transpose()) * 0.5;
    let r = (&r + r.transpose()) * 0.5;
    let cost = StageCost::new(q, r, s, &Tolerances::default()).unwrap();
    StrictInstance { sys: sys.clone(), cost, lambda, dead_input }
}

/// Random cost with indefinite blocks (no dissipativity structure).
pub fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> StageCost {
    let q = random_symmetric(rng, n, 1.0);
    let r = random_symmetric(rng, m, 1.0);
    let s = uniform(rng, m, n, -1.0, 1.0);
    StageCost::new(q, r, s, &Tolerances::default()).unwrap()
}

pub fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=4), rng.random_range(1..=4))
}
