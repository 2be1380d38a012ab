mod common;

use elqr_core::dissipativity::certify_strict;
use elqr_core::matkit::eigen_extremes;
use elqr_core::mpc::{
    optimal_rollout, rotated_value_defect, rotation_value_check, simulate, solve_rhocp, RhConfig, VPolicy,
};
use elqr_core::riccati::{rcgdare_solve_stabilizing_with, riccati_recursion};
use elqr_core::{LtiSystem, Matrix, StageCost, Tolerances, Vector};
use nalgebra::dmatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

struct Pair {
    inst: common::StrictInstance,
    ps: Matrix,
    pbar: Matrix,
    p0: Option<Matrix>,
}

fn pairs(seed: u64, count: usize) -> Vec<Pair> {
    let tol = Tolerances::default();
    let mut rng = common::rng(seed);
    (0..count)
        .map(|_| {
            let (n, m) = common::dims(&mut rng);
            let inst = common::strict_instance(&mut rng, n, m);
            let cert = certify_strict(&inst.sys, &inst.cost, &tol).unwrap();
            let ps = cert.stabilizing.as_ref().unwrap().p.clone();
            let pbar = rcgdare_solve_stabilizing_with(&inst.sys, &inst.cost, Some(&cert.null_projector), &tol)
                .unwrap()
                .solution
                .p;
            let p0 = cert.cgdare_solution.as_ref().map(|s| s.p.clone());
            Pair { inst, ps, pbar, p0 }
        })
        .collect()
}

#[test]
fn constrained_solutions_are_fixed_points() {
    let tol = Tolerances::default();
    for pair in pairs(51, 100) {
        // The reverse solution repels the recursion: its one-step change is
        // its residual, and later steps amplify that by the antistabilizing
        // loop. It is checked for one step.
        let mut starts = vec![(pair.ps.clone(), 50), (pair.pbar.clone(), 1)];
        starts.extend(pair.p0.clone().map(|p| (p, 50)));
        for (which, (p, steps)) in starts.into_iter().enumerate() {
            let run = riccati_recursion(&pair.inst.sys, &pair.inst.cost, &p, steps, &tol).unwrap();
            for (k, pk) in run.p.iter().enumerate() {
                let err = (pk - &p).norm();
                assert!(err <= 1e-8 * (1.0 + p.norm()), "start {which} step {k}: {err:e}");
            }
        }
    }
}

#[test]
fn recursion_from_above_the_reverse_solution_converges() {
    let tol = Tolerances::default();
    for pair in pairs(52, 100) {
        let n = pair.inst.sys.n();
        let pf = &pair.pbar + Matrix::identity(n, n) * 1e-3;
        let run = riccati_recursion(&pair.inst.sys, &pair.inst.cost, &pf, 5000, &tol).unwrap();
        let last = run.last_p();
        assert!((last - &pair.ps).norm() <= 1e-8 * (1.0 + pair.ps.norm()));
        // Eventually bounded above by P_s.
        let scale = tol.psd_tol * (1.0 + pair.ps.norm()) * 10.0;
        for pk in &run.p[4500..] {
            assert!(eigen_extremes(&(&pair.ps - pk)).unwrap().0 >= -scale);
        }
    }
}

#[test]
fn open_loop_cost_equals_value() {
    // Applying the optimal time-varying gains and adding the terminal cost
    // reproduces x0^T P_N x0.
    let tol = Tolerances::default();
    let mut rng = common::rng(53);
    for pair in pairs(54, 50) {
        let n = pair.inst.sys.n();
        let horizon = rng.random_range(1..=30);
        let pf = &pair.pbar + Matrix::identity(n, n) * 0.1;
        let cfg = RhConfig::new(horizon, pf, VPolicy::Zero);
        let x0 = random_vector(&mut rng, n);
        let sol = solve_rhocp(&pair.inst.sys, &pair.inst.cost, &cfg, &tol).unwrap();
        let (traj, terminal) = optimal_rollout(&pair.inst.sys, &pair.inst.cost, &cfg, &x0, &tol).unwrap();
        let total = traj.total_cost + terminal;
        let value = sol.value(&x0);
        assert!((total - value).abs() <= 1e-8 * (1.0 + value.abs()), "{total} vs {value}");
    }
}

#[test]
fn rotation_changes_value_by_the_initial_term() {
    let tol = Tolerances::default();
    let mut rng = common::rng(55);
    for pair in pairs(56, 50) {
        let (sys, cost) = (&pair.inst.sys, &pair.inst.cost);
        let (n, m) = (sys.n(), sys.m());
        let lambda = common::random_symmetric(&mut rng, n, 2.0);
        let pf = common::random_symmetric(&mut rng, n, 1.0);
        // Arbitrary trajectory of length 5.
        let mut states = vec![random_vector(&mut rng, n)];
        let mut inputs = Vec::new();
        for _ in 0..5 {
            let u = random_vector(&mut rng, m);
            states.push(sys.step(states.last().unwrap(), &u));
            inputs.push(u);
        }
        let chk = rotated_value_defect(sys, cost, &lambda, &pf, &states, &inputs).unwrap();
        assert!(chk.defect.abs() <= 1e-9 * (1.0 + chk.value.abs()));
        // Along the optimal trajectory, with Lambda = P_s.
        let cfg = RhConfig::new(10, &pair.pbar + Matrix::identity(n, n), VPolicy::Zero);
        let chk = rotation_value_check(sys, cost, &pair.ps, &cfg, &states[0], &tol).unwrap();
        assert!(chk.defect.abs() <= 1e-9 * (1.0 + chk.value.abs()));
    }
    let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0]).unwrap();
    let cost = StageCost::without_cross_term(dmatrix![1.0], dmatrix![1.0], &tol).unwrap();
    let cfg = RhConfig::new(5, dmatrix![1.0], VPolicy::Zero);
    let chk = rotation_value_check(&sys, &cost, &dmatrix![0.0], &cfg, &dmatrix![1.0].column(0).into(), &tol).unwrap();
    assert_eq!(chk.defect, 0.0);
}

#[test]
fn trajectories_follow_the_dynamics() {
    let tol = Tolerances::default();
    let mut rng = common::rng(57);
    for pair in pairs(58, 30) {
        let (sys, cost) = (&pair.inst.sys, &pair.inst.cost);
        let (n, m) = (sys.n(), sys.m());
        let l = common::uniform(&mut rng, m, n, -0.5, 0.5);
        let cfg = RhConfig::new(20, &pair.pbar + Matrix::identity(n, n) * 1e-2, VPolicy::Feedback(l));
        let traj = simulate(sys, cost, &cfg, &random_vector(&mut rng, n), 15, &tol).unwrap();
        assert_eq!(traj.states.len(), 16);
        for k in 0..traj.steps() {
            let next = sys.step(&traj.states[k], &traj.inputs[k]);
            assert!((next - &traj.states[k + 1]).norm() <= 1e-12 * (1.0 + traj.states[k].norm()));
            assert!((cost.stage(&traj.states[k], &traj.inputs[k]) - traj.stage_costs[k]).abs() < 1e-12);
        }
        let cum = traj.cumulative_costs();
        assert!((cum.last().unwrap() - traj.total_cost).abs() <= 1e-9 * (1.0 + traj.total_cost.abs()));
    }
}

#[test]
fn zero_state_gives_zero_trajectory() {
    let tol = Tolerances::default();
    let sys = LtiSystem::new(dmatrix![0.9, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]).unwrap();
    let cost = StageCost::without_cross_term(dmatrix![0.0, 0.0; 0.0, 1.0], Matrix::zeros(2, 2), &tol).unwrap();
    let cfg = RhConfig::new(5, Matrix::identity(2, 2), VPolicy::Sequence(vec![Vector::zeros(2); 3]));
    let traj = simulate(&sys, &cost, &cfg, &Vector::zeros(2), 8, &tol).unwrap();
    assert!(traj.states.iter().all(|x| x.norm() == 0.0));
    assert_eq!(traj.total_cost, 0.0);
}
