//! Finite-horizon receding-horizon control without terminal constraints.
//!
//! The horizon-`N` optimal inputs are `u = -K_N x + G_N v` with `v` arbitrary,
//! where `K_N` and `G_N` come from `N` steps of the generalized Riccati
//! recursion started at the terminal cost.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dissipativity::{certify_strict, Tier};
use crate::matkit::{self, ensure_finite, ensure_shape, spectral_radius, symmetrize, Matrix, Tolerances, Vector};
use crate::riccati::{bg_is_zero, riccati_recursion, rotate_cost, RecursionRun};
use crate::system::{LtiSystem, StageCost};
use crate::{Error, Result};

/// How the free input `v` is chosen at each step.
#[derive(Debug, Clone, PartialEq)]
pub enum VPolicy {
    Zero,
    /// `v = -L x` with `L` of size `m x n`.
    Feedback(Matrix),
    /// `v_k` from the list; steps past its end use `v = 0`.
    Sequence(Vec<Vector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhConfig {
    pub horizon: usize,
    pub terminal_cost: Matrix,
    pub v_policy: VPolicy,
}

impl RhConfig {
    pub fn new(horizon: usize, terminal_cost: Matrix, v_policy: VPolicy) -> Self {
        RhConfig { horizon, terminal_cost, v_policy }
    }

    pub fn validate(&self, sys: &LtiSystem, tol: &Tolerances) -> Result<()> {
        let (n, m) = (sys.n(), sys.m());
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        ensure_shape(&self.terminal_cost, n, n, "P_f")?;
        ensure_finite(&self.terminal_cost, "P_f")?;
        if !matkit::is_symmetric(&self.terminal_cost, tol) {
            return Err(Error::NotSymmetric("P_f"));
        }
        match &self.v_policy {
            VPolicy::Zero => {}
            VPolicy::Feedback(l) => {
                ensure_shape(l, m, n, "L")?;
                ensure_finite(l, "L")?;
            }
            VPolicy::Sequence(vs) => {
                for (k, v) in vs.iter().enumerate() {
                    if v.len() != m {
                        return Err(Error::InvalidDimensions(format!(
                            "v[{k}] has length {}, expected {m}",
                            v.len()
                        )));
                    }
                    if !v.iter().all(|x| x.is_finite()) {
                        return Err(Error::InvalidMatrix("v sequence"));
                    }
                }
            }
        }
        Ok(())
    }

    fn v_at(&self, k: usize, x: &Vector, m: usize) -> Vector {
        match &self.v_policy {
            VPolicy::Zero => Vector::zeros(m),
            VPolicy::Feedback(l) => -(l * x),
            VPolicy::Sequence(vs) => vs.get(k).cloned().unwrap_or_else(|| Vector::zeros(m)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhSolution {
    pub k_n: Matrix,
    /// Free input directions of the first stage, `I - R_{P_{N-1}}^+ R_{P_{N-1}}`.
    pub g_n: Matrix,
    pub p_n: Matrix,
    pub run: RecursionRun,
}

impl RhSolution {
    /// Optimal horizon-`N` cost `x0^T P_N x0`.
    pub fn value(&self, x0: &Vector) -> f64 {
        (x0.transpose() * &self.p_n * x0)[(0, 0)]
    }
}

pub fn solve_rhocp(sys: &LtiSystem, cost: &StageCost, cfg: &RhConfig, tol: &Tolerances) -> Result<RhSolution> {
    cost.check_compatible(sys)?;
    cfg.validate(sys, tol)?;
    let n_steps = cfg.horizon;
    let run = riccati_recursion(sys, cost, &cfg.terminal_cost, n_steps, tol)?;
    if run.p.len() != n_steps + 1 {
        return Err(Error::NumericalFailure("Riccati recursion produced non-finite values"));
    }
    Ok(RhSolution {
        k_n: run.k[n_steps - 1].clone(),
        g_n: run.g[n_steps - 1].clone(),
        p_n: run.p[n_steps].clone(),
        run,
    })
}

/// Terminal cost `P_f` whose controllable block exceeds the reverse
/// (antistabilizing) solution by `margin * I`; uncontrollable blocks are zero.
pub fn design_terminal_cost(sys: &LtiSystem, cost: &StageCost, margin: f64, tol: &Tolerances) -> Result<Matrix> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be positive, got {margin}")));
    }
    let cert = certify_strict(sys, cost, tol)?;
    if cert.tier != Tier::StrictPreDissipative {
        return Err(Error::NotStrictlyDissipative);
    }
    let pbar_c = cert.antistabilizing_controllable.ok_or(Error::NotStrictlyDissipative)?;
    let n = sys.n();
    let nc = cert.kalman.controllable_dim;
    let nu = n - nc;
    let mut pz = Matrix::zeros(n, n);
    let block = &pbar_c + Matrix::identity(nc, nc) * margin;
    pz.view_mut((nu, nu), (nc, nc)).copy_from(&block);
    let t = &cert.kalman.transform;
    let pf = symmetrize(&(t * pz * t.transpose()));
    let back = t.transpose() * &pf * t;
    let gap = back.view((nu, nu), (nc, nc)).into_owned() - &pbar_c;
    if nc > 0 && !matkit::definiteness(&gap, tol)?.is_pd() {
        return Err(Error::NumericalFailure("designed terminal cost does not exceed the reverse solution"));
    }
    Ok(pf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `x_0, ..., x_T`.
    pub states: Vec<Vector>,
    pub inputs: Vec<Vector>,
    pub v_values: Vec<Vector>,
    pub stage_costs: Vec<f64>,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }

    pub fn cumulative_costs(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.stage_costs
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect()
    }
}

fn check_x0(sys: &LtiSystem, x0: &Vector) -> Result<()> {
    if x0.len() != sys.n() {
        return Err(Error::InvalidDimensions(format!("x0 has length {}, expected {}", x0.len(), sys.n())));
    }
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidMatrix("x0"));
    }
    Ok(())
}

/// Receding-horizon closed loop `x+ = A x + B(-K_N x + G_N v)` for `steps`
/// steps. Costs use the original stage cost.
pub fn simulate(
    sys: &LtiSystem,
    cost: &StageCost,
    cfg: &RhConfig,
    x0: &Vector,
    steps: usize,
    tol: &Tolerances,
) -> Result<Trajectory> {
    check_x0(sys, x0)?;
    let sol = solve_rhocp(sys, cost, cfg, tol)?;
    Ok(roll(sys, cost, cfg, x0, steps, |_| (&sol.k_n, &sol.g_n)))
}

fn roll<'a>(
    sys: &LtiSystem,
    cost: &StageCost,
    cfg: &RhConfig,
    x0: &Vector,
    steps: usize,
    gains: impl Fn(usize) -> (&'a Matrix, &'a Matrix),
) -> Trajectory {
    let m = sys.m();
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps + 1),
        inputs: Vec::with_capacity(steps),
        v_values: Vec::with_capacity(steps),
        stage_costs: Vec::with_capacity(steps),
        total_cost: 0.0,
    };
    let mut x = x0.clone();
    for k in 0..steps {
        let (kk, gg) = gains(k);
        let v = cfg.v_at(k, &x, m);
        let u = -(kk * &x) + gg * &v;
        let c = cost.stage(&x, &u);
        traj.total_cost += c;
        traj.stage_costs.push(c);
        let next = sys.step(&x, &u);
        traj.states.push(x);
        traj.inputs.push(u);
        traj.v_values.push(v);
        x = next;
    }
    traj.states.push(x);
    traj
}

/// Open-loop optimal trajectory of the horizon-`N` problem from `x0`
/// (time-varying gains `K_N, K_{N-1}, ..., K_1`), with `v` from the policy.
/// Returns the trajectory and its terminal cost `x_N^T P_f x_N`.
pub fn optimal_rollout(
    sys: &LtiSystem,
    cost: &StageCost,
    cfg: &RhConfig,
    x0: &Vector,
    tol: &Tolerances,
) -> Result<(Trajectory, f64)> {
    check_x0(sys, x0)?;
    let sol = solve_rhocp(sys, cost, cfg, tol)?;
    let n_steps = cfg.horizon;
    let run = &sol.run;
    let traj = roll(sys, cost, cfg, x0, n_steps, |k| (&run.k[n_steps - 1 - k], &run.g[n_steps - 1 - k]));
    let xn = traj.states.last().expect("rollout keeps x0");
    let terminal = (xn.transpose() * &cfg.terminal_cost * xn)[(0, 0)];
    Ok((traj, terminal))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationValueCheck {
    pub value: f64,
    pub value_rotated: f64,
    /// `value - (value_rotated + x0^T Lambda x0)`.
    pub defect: f64,
}

/// Cost of a given state-input sequence twice: with `(H, P_f)` and with
/// `(H_Lambda, P_f - Lambda)`. `states` has one more entry than `inputs`.
pub fn rotated_value_defect(
    sys: &LtiSystem,
    cost: &StageCost,
    lambda: &Matrix,
    terminal_cost: &Matrix,
    states: &[Vector],
    inputs: &[Vector],
) -> Result<RotationValueCheck> {
    if states.len() != inputs.len() + 1 {
        return Err(Error::InvalidDimensions("states must have one more entry than inputs".into()));
    }
    ensure_shape(terminal_cost, sys.n(), sys.n(), "P_f")?;
    let rot = rotate_cost(sys, cost, lambda)?.to_stage_cost();
    let lambda = symmetrize(lambda);
    let quad = |p: &Matrix, x: &Vector| (x.transpose() * p * x)[(0, 0)];
    let mut value = 0.0;
    let mut value_rotated = 0.0;
    for (x, u) in states.iter().zip(inputs) {
        value += cost.stage(x, u);
        value_rotated += rot.stage(x, u);
    }
    let xn = states.last().expect("non-empty");
    value += quad(terminal_cost, xn);
    value_rotated += quad(&(terminal_cost - &lambda), xn);
    let defect = value - (value_rotated + quad(&lambda, &states[0]));
    Ok(RotationValueCheck { value, value_rotated, defect })
}

/// [`rotated_value_defect`] along the optimal open-loop trajectory from `x0`.
pub fn rotation_value_check(
    sys: &LtiSystem,
    cost: &StageCost,
    lambda: &Matrix,
    cfg: &RhConfig,
    x0: &Vector,
    tol: &Tolerances,
) -> Result<RotationValueCheck> {
    let (traj, _) = optimal_rollout(sys, cost, cfg, x0, tol)?;
    rotated_value_defect(sys, cost, lambda, &cfg.terminal_cost, &traj.states, &traj.inputs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub label: String,
    pub l: Matrix,
    /// Spectral radius of `A - B K - B G L`.
    pub spectral_radius: f64,
}

/// Deterministic probes `L` (`m x n`): `I`, `-I` (rectangular identities)
/// and `+-e_i e_j^T` for every entry.
pub fn probe_set(m: usize, n: usize) -> Vec<(String, Matrix)> {
    let mut out = Vec::new();
    out.push((String::from("I"), Matrix::identity(m, n)));
    out.push((String::from("-I"), -Matrix::identity(m, n)));
    for i in 0..m {
        for j in 0..n {
            let mut e = Matrix::zeros(m, n);
            e[(i, j)] = 1.0;
            out.push((format!("+E({},{})", i + 1, j + 1), e.clone()));
            out.push((format!("-E({},{})", i + 1, j + 1), -e));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// Nominal loop Schur and `BG = 0`: every optimal input gives the same stable trajectory.
    ExponentiallyStable,
    /// Nominal loop Schur, `BG != 0`, every probe also Schur.
    StableNonUnique,
    /// Nominal loop Schur but some optimal inputs destabilize it.
    StabilizingOnlyForSomeOptimalInputs,
    /// Nominal loop not Schur, but some probe choice of optimal inputs is.
    UnstableSomeOptimalInputsStabilize,
    Unstable,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::ExponentiallyStable => "exponentially stable",
            Verdict::StableNonUnique => "stable; closed-loop behavior is not unique (BG != 0)",
            Verdict::StabilizingOnlyForSomeOptimalInputs => "stabilizing only for some optimal inputs",
            Verdict::UnstableSomeOptimalInputsStabilize => {
                "nominal loop unstable; some optimal inputs stabilize"
            }
            Verdict::Unstable => "unstable",
        }
    }
}

/// Stability of `x+ = (A - B K)x + B G v` for `v = 0` and the probe feedbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopAnalysis {
    pub nominal_spectral_radius: f64,
    pub nominal_stable: bool,
    pub bg_norm: f64,
    pub bg_zero: bool,
    pub probes: Vec<ProbeResult>,
    pub worst_probe: Option<ProbeResult>,
    pub verdict: Verdict,
}

pub fn closed_loop_analysis(sys: &LtiSystem, k: &Matrix, g: &Matrix, tol: &Tolerances) -> Result<ClosedLoopAnalysis> {
    ensure_shape(k, sys.m(), sys.n(), "K")?;
    ensure_shape(g, sys.m(), sys.m(), "G")?;
    let a_cl = sys.closed_loop(k);
    let nominal = spectral_radius(&a_cl)?;
    let nominal_stable = tol.is_schur_stable(nominal);
    let bg = sys.b() * g;
    let bg_zero = bg_is_zero(sys.b(), g, tol);
    let mut probes = Vec::new();
    for (label, l) in probe_set(sys.m(), sys.n()) {
        let r = spectral_radius(&(&a_cl - &bg * &l))?;
        probes.push(ProbeResult { label, l, spectral_radius: r });
    }
    let worst = probes
        .iter()
        .cloned()
        .max_by(|a, b| a.spectral_radius.total_cmp(&b.spectral_radius));
    let any_probe_stable = probes.iter().any(|p| tol.is_schur_stable(p.spectral_radius));
    let all_probes_stable = probes.iter().all(|p| tol.is_schur_stable(p.spectral_radius));
    let verdict = match (nominal_stable, bg_zero) {
        (true, true) => Verdict::ExponentiallyStable,
        (true, false) if all_probes_stable => Verdict::StableNonUnique,
        (true, false) => Verdict::StabilizingOnlyForSomeOptimalInputs,
        (false, false) if any_probe_stable => Verdict::UnstableSomeOptimalInputsStabilize,
        (false, _) => Verdict::Unstable,
    };
    Ok(ClosedLoopAnalysis {
        nominal_spectral_radius: nominal,
        nominal_stable,
        bg_norm: bg.norm(),
        bg_zero,
        probes,
        worst_probe: worst,
        verdict,
    })
}

/// Largest horizon tried by the doubling search.
pub const MAX_SEARCH_HORIZON: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub horizon: usize,
    pub closed_loop: ClosedLoopAnalysis,
    /// First `N` in `1, 2, 4, ..., 2^14` whose nominal loop is Schur.
    pub min_stable_horizon: Option<usize>,
}

pub fn stability_report(sys: &LtiSystem, cost: &StageCost, cfg: &RhConfig, tol: &Tolerances) -> Result<StabilityReport> {
    let sol = solve_rhocp(sys, cost, cfg, tol)?;
    let closed_loop = closed_loop_analysis(sys, &sol.k_n, &sol.g_n, tol)?;
    Ok(StabilityReport {
        horizon: cfg.horizon,
        closed_loop,
        min_stable_horizon: min_stable_horizon(sys, cost, &cfg.terminal_cost, tol)?,
    })
}

/// Doubling search for the shortest horizon with a Schur nominal loop.
pub fn min_stable_horizon(sys: &LtiSystem, cost: &StageCost, terminal_cost: &Matrix, tol: &Tolerances) -> Result<Option<usize>> {
    let mut p = terminal_cost.clone();
    let mut done = 0;
    let mut target = 1;
    while target <= MAX_SEARCH_HORIZON {
        let run = riccati_recursion(sys, cost, &p, target - done, tol)?;
        if run.p.len() != target - done + 1 {
            return Ok(None);
        }
        let k = run.k.last().expect("at least one step");
        if tol.is_schur_stable(spectral_radius(&sys.closed_loop(k))?) {
            return Ok(Some(target));
        }
        p = run.last_p().clone();
        done = target;
        target *= 2;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn example2() -> (LtiSystem, StageCost) {
        let sys = LtiSystem::new(dmatrix![0.9, 1.0; 0.0, 1.0], dmatrix![2.0, 0.0; 1.0, 1.0]).unwrap();
        let cost = StageCost::without_cross_term(dmatrix![0.0, 0.0; 0.0, 1.0], Matrix::zeros(2, 2), &tol()).unwrap();
        (sys, cost)
    }

    #[test]
    fn example2_closed_loops() {
        let (sys, cost) = example2();
        let cfg = RhConfig::new(5, Matrix::zeros(2, 2), VPolicy::Zero);
        let sol = solve_rhocp(&sys, &cost, &cfg, &tol()).unwrap();
        assert_relative_eq!(sol.k_n, dmatrix![0.0, 0.5; 0.0, 0.5], epsilon = 1e-12);
        let rep = stability_report(&sys, &cost, &cfg, &tol()).unwrap();
        assert_relative_eq!(rep.closed_loop.nominal_spectral_radius, 0.9, epsilon = 1e-12);
        assert_eq!(rep.closed_loop.verdict, Verdict::StabilizingOnlyForSomeOptimalInputs);
        let minus_i = rep.closed_loop.probes.iter().find(|p| p.label == "-I").unwrap();
        assert_relative_eq!(minus_i.spectral_radius, 1.9, epsilon = 1e-12);
    }

    #[test]
    fn zero_state_gives_zero_trajectory() {
        let (sys, cost) = example2();
        let cfg = RhConfig::new(3, Matrix::zeros(2, 2), VPolicy::Sequence(vec![Vector::zeros(2); 2]));
        let t = simulate(&sys, &cost, &cfg, &Vector::zeros(2), 6, &tol()).unwrap();
        assert_eq!(t.total_cost, 0.0);
        assert!(t.states.iter().all(|x| x.norm() == 0.0));
        assert_eq!(t.states.len(), 7);
    }

    #[test]
    fn zero_rotation_has_no_defect() {
        let (sys, cost) = example2();
        let cfg = RhConfig::new(4, Matrix::identity(2, 2), VPolicy::Zero);
        let c = rotation_value_check(&sys, &cost, &Matrix::zeros(2, 2), &cfg, &dvector![1.0, -2.0], &tol()).unwrap();
        assert_eq!(c.defect, 0.0);
    }

    #[test]
    fn config_validation() {
        let (sys, _) = example2();
        assert!(RhConfig::new(0, Matrix::zeros(2, 2), VPolicy::Zero).validate(&sys, &tol()).is_err());
        assert!(RhConfig::new(1, Matrix::zeros(2, 2), VPolicy::Feedback(Matrix::zeros(1, 2)))
            .validate(&sys, &tol())
            .is_err());
    }

    #[test]
    fn margin_must_be_positive() {
        let sys = LtiSystem::new(dmatrix![0.5], dmatrix![1.0]).unwrap();
        let cost = StageCost::without_cross_term(dmatrix![1.0], dmatrix![1.0], &tol()).unwrap();
        assert!(design_terminal_cost(&sys, &cost, 0.0, &tol()).is_err());
        let pf = design_terminal_cost(&sys, &cost, 1e-3, &tol()).unwrap();
        let pbar = (0.25 - (0.0625f64 + 4.0).sqrt()) / 2.0;
        assert_relative_eq!(pf[(0, 0)], pbar + 1e-3, epsilon = 1e-9);
    }
}
