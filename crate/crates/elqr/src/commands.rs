//! Command implementations. Each returns the report and, for commands that
//! produce a data file, the file contents when no output path was given.

use std::path::{Path, PathBuf};

use elqr_core::dissipativity::{
    certify_strict_with_hint, check_pre_dissipativity, check_regularized, check_strict_schur, export_sdp,
    DissipativityCertificate, SdpKind, Tier,
};
use elqr_core::mpc::{
    closed_loop_analysis, design_terminal_cost, simulate, solve_rhocp, stability_report, RhConfig, VPolicy, Verdict,
};
use elqr_core::riccati::{
    cgdare_residual, classify_gain, discover_null_projector, rcgdare_solve_stabilizing_with, rdare_solve_stabilizing,
};
use elqr_core::system::{kalman_decompose, prestabilize};
use elqr_core::{Error, LtiSystem, Matrix, StageCost, Tolerances, Vector};

use crate::error::{write_file, CliError, Result};
use crate::problem::{Problem, ToleranceOverrides};
use crate::report::{
    classification_name, tier_name, vec_of, ClosedLoopReport, LambdaCheckReport, MpcReport,
    PrestabilizationReport, RegularizedReport, Report, ReverseReport, SdpReport, SolutionReport, TrajectoryReport,
    VerifyReport,
};
use crate::sdpa::write_sdpa;
use crate::textmat::{parse_inline_matrix, parse_vector, read_matrix, write_matrix};
use crate::trajectory::trajectory_csv;

/// Options shared by every command.
#[derive(Debug, Clone, Default)]
pub struct GlobalOptions {
    pub tolerances: ToleranceOverrides,
    /// The report will be printed as JSON; data that would otherwise go to
    /// standard output is embedded in it.
    pub json: bool,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Report,
    /// Data to print instead of the report (CSV or SDPA text).
    pub data: Option<String>,
}

impl CommandOutput {
    pub fn exit_code(&self) -> i32 {
        self.report.outcome.exit_code
    }
}

/// Loaded problem after the optional input change `u = -K_hat x + w`.
struct Working {
    problem: Problem,
    sys: LtiSystem,
    cost: StageCost,
    tol: Tolerances,
    report: Report,
}

fn prepare(command: &str, path: &Path, opts: &GlobalOptions, regularized_checks: bool) -> Result<Working> {
    let loaded = Problem::load(path, &opts.tolerances)?;
    let problem = loaded.problem;
    let tol = problem.tolerances;
    let (n, m) = (problem.system.n(), problem.system.m());
    let mut report = Report::new(command, &path.display().to_string(), n, m, &tol);
    report.warnings = loaded.warnings;
    let (sys, cost) = match &problem.k_hat {
        None => (problem.system.clone(), problem.cost.clone()),
        Some(k_hat) => {
            let pre = prestabilize(&problem.system, &problem.cost, k_hat, &tol).map_err(|e| match e {
                Error::NotStabilizing => CliError::field("hints.k_hat", "A - B K_hat is not Schur stable"),
                other => other.into(),
            })?;
            let mut section = PrestabilizationReport {
                k_hat: k_hat.into(),
                a: pre.system.a().into(),
                q: pre.cost.q().into(),
                r: pre.cost.r().into(),
                s: pre.cost.s().into(),
                regularized_before: None,
                regularized_after: None,
            };
            if regularized_checks {
                section.regularized_before = regularized(&problem.system, &problem.cost, &tol, &mut report.diagnostics);
                section.regularized_after = regularized(&pre.system, &pre.cost, &tol, &mut report.diagnostics);
            }
            report.prestabilization = Some(section);
            (pre.system, pre.cost)
        }
    };
    Ok(Working { problem, sys, cost, tol, report })
}

fn regularized(sys: &LtiSystem, cost: &StageCost, tol: &Tolerances, diag: &mut Vec<String>) -> Option<RegularizedReport> {
    let run = || -> elqr_core::Result<RegularizedReport> {
        let np = discover_null_projector(sys, cost, None, tol)?;
        Ok((&check_regularized(sys, cost, &np.g, tol)?).into())
    };
    run().map_err(|e| diag.push(format!("regularized check: {e}"))).ok()
}

fn finish(mut report: Report, exit_code: i32, summary: impl Into<String>) -> CommandOutput {
    report.outcome.exit_code = exit_code;
    report.outcome.summary = summary.into();
    CommandOutput { report, data: None }
}

fn certify(w: &mut Working) -> Option<DissipativityCertificate> {
    match certify_strict_with_hint(&w.sys, &w.cost, w.problem.lambda.as_ref(), &w.tol) {
        Ok(cert) => {
            w.report.certificate = Some((&cert).into());
            Some(cert)
        }
        Err(e) => {
            w.report.diagnostics.push(format!("certificate: {e}"));
            None
        }
    }
}

fn tier_exit(tier: Tier) -> i32 {
    match tier {
        Tier::StrictPreDissipative => 0,
        Tier::PreDissipative => 2,
        Tier::None => 3,
    }
}

pub fn analyze(path: &Path, opts: &GlobalOptions) -> Result<CommandOutput> {
    let mut w = prepare("analyze", path, opts, true)?;
    let b = w.sys.b().clone();
    w.report.controllability = Some((&kalman_decompose(&w.sys, &w.tol)?).into());
    let Some(cert) = certify(&mut w) else {
        return Ok(finish(w.report, 3, "no certificate could be built"));
    };
    let tol = w.tol;
    w.report.stabilizing = cert.stabilizing.as_ref().map(|s| SolutionReport::new(s, &b, &tol));
    w.report.cgdare_solution = cert.cgdare_solution.as_ref().map(|s| SolutionReport::new(s, &b, &tol));
    match rcgdare_solve_stabilizing_with(&w.sys, &w.cost, Some(&cert.null_projector), &tol) {
        Ok(rev) => w.report.antistabilizing = Some(ReverseReport::new(&rev, &b, &tol)),
        Err(e) => w.report.diagnostics.push(format!("antistabilizing solution: {e}")),
    }
    if !cert.bg_zero {
        w.report.diagnostics.push("BG != 0: optimal inputs are not unique and may drive different state trajectories".into());
    }

    // The optimal closed loop is governed by a solution of the constrained
    // equation; prefer the stabilizing one.
    let governing = match (&cert.stabilizing, &cert.cgdare_solution) {
        (Some(s), _) if s.solves_cgdare(&tol) => Some(("stabilizing solution", s.k.clone(), s.g.clone())),
        (_, Some(c)) if c.solves_cgdare(&tol) => Some(("constrained equation solution", c.k.clone(), c.g.clone())),
        (Some(s), _) => Some(("regularized stabilizing solution", s.k.clone(), cert.null_projector.clone())),
        _ => None,
    };
    let mut verdict = None;
    if let Some((label, k, g)) = governing {
        match closed_loop_analysis(&w.sys, &k, &g, &tol) {
            Ok(cl) => {
                verdict = Some(cl.verdict);
                w.report.closed_loop = Some(ClosedLoopReport::new(label, &k, &g, &cl));
            }
            Err(e) => w.report.diagnostics.push(format!("closed loop: {e}")),
        }
    }
    let stable = verdict == Some(Verdict::ExponentiallyStable);
    let code = match cert.tier {
        Tier::StrictPreDissipative if stable => 0,
        Tier::None => 3,
        _ => 2,
    };
    let summary = format!(
        "{}; optimal closed loop: {}",
        tier_name(cert.tier).replace('_', " "),
        verdict.map_or("not determined", |v| v.describe())
    );
    Ok(finish(w.report, code, summary))
}

#[derive(Debug, Clone)]
pub enum DareMode {
    Stabilizing,
    Antistabilizing,
    Verify(PathBuf),
}

pub fn dare(path: &Path, mode: &DareMode, opts: &GlobalOptions) -> Result<CommandOutput> {
    let name = match mode {
        DareMode::Stabilizing => "dare stabilizing",
        DareMode::Antistabilizing => "dare antistabilizing",
        DareMode::Verify(_) => "dare verify",
    };
    let mut w = prepare(name, path, opts, false)?;
    let tol = w.tol;
    let b = w.sys.b().clone();
    match mode {
        DareMode::Verify(p_path) => {
            let p = read_matrix(p_path)?;
            let n = w.sys.n();
            if p.nrows() != n || p.ncols() != n {
                return Err(CliError::field(
                    p_path.display().to_string(),
                    format!("expected {n}x{n}, got {}x{}", p.nrows(), p.ncols()),
                ));
            }
            let chk = cgdare_residual(&w.sys, &w.cost, &p, &tol)?;
            let (classification, radius) = classify_gain(&w.sys, &chk.k, &tol)?;
            let solves = chk.solves(&p, &tol);
            w.report.verification = Some(VerifyReport {
                p: (&p).into(),
                residual: chk.residual,
                residual_bound: tol.residual_bound(p.norm()),
                kernel_ok: chk.kernel_ok,
                kernel_defect: chk.kernel_defect,
                solves_cgdare: solves,
                k: (&chk.k).into(),
                g: (&chk.g).into(),
                bg: (&(&b * &chk.g)).into(),
                classification: classification_name(classification),
                closed_loop_spectral_radius: radius,
            });
            let (code, summary) = if solves {
                (0, "P solves the constrained generalized Riccati equation")
            } else if !chk.kernel_ok {
                (2, "P does not solve the constrained generalized Riccati equation (kernel condition fails)")
            } else {
                (2, "P does not solve the constrained generalized Riccati equation (residual too large)")
            };
            Ok(finish(w.report, code, summary))
        }
        DareMode::Stabilizing => {
            let np = match discover_null_projector(&w.sys, &w.cost, w.problem.lambda.as_ref(), &tol) {
                Ok(np) => np,
                Err(e) => {
                    w.report.diagnostics.push(format!("kernel projector: {e}"));
                    return Ok(finish(w.report, 3, format!("solver failed: {e}")));
                }
            };
            w.report.cgdare_solution = np.solution.as_ref().map(|s| SolutionReport::new(s, &b, &tol));
            match rdare_solve_stabilizing(&w.sys, &w.cost, &np.g, &tol) {
                Ok(sol) => {
                    let ok = sol.classification == elqr_core::riccati::Classification::Stabilizing;
                    w.report.stabilizing = Some(SolutionReport::new(&sol, &b, &tol));
                    if ok {
                        Ok(finish(w.report, 0, "stabilizing solution found"))
                    } else {
                        Ok(finish(w.report, 3, "regularized solution is not stabilizing"))
                    }
                }
                Err(e) => {
                    w.report.diagnostics.push(format!("stabilizing solution: {e}"));
                    Ok(finish(w.report, 3, format!("solver failed: {e}")))
                }
            }
        }
        DareMode::Antistabilizing => {
            let g = discover_null_projector(&w.sys, &w.cost, w.problem.lambda.as_ref(), &tol).ok().map(|np| np.g);
            match rcgdare_solve_stabilizing_with(&w.sys, &w.cost, g.as_ref(), &tol) {
                Ok(rev) => {
                    w.report.antistabilizing = Some(ReverseReport::new(&rev, &b, &tol));
                    Ok(finish(w.report, 0, "stabilizing solution of the reverse equation found"))
                }
                Err(e) => {
                    w.report.diagnostics.push(format!("antistabilizing solution: {e}"));
                    Ok(finish(w.report, 3, format!("solver failed: {e}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MpcMode {
    Design,
    Simulate,
    Report,
}

#[derive(Debug, Clone)]
pub struct MpcOptions {
    pub horizon: usize,
    pub margin: f64,
    pub steps: usize,
    pub x0: Option<String>,
    /// `zero`, `feedback:<matrix>` or `file:<path>`.
    pub v: String,
    pub out: Option<PathBuf>,
}

impl Default for MpcOptions {
    fn default() -> Self {
        MpcOptions { horizon: 20, margin: 1e-3, steps: 20, x0: None, v: "zero".into(), out: None }
    }
}

fn parse_v_policy(spec: &str, m: usize, n: usize) -> Result<VPolicy> {
    if spec == "zero" {
        return Ok(VPolicy::Zero);
    }
    if let Some(l) = spec.strip_prefix("feedback:") {
        return Ok(VPolicy::Feedback(parse_inline_matrix(l, m, n, "--v feedback")?));
    }
    if let Some(file) = spec.strip_prefix("file:") {
        let path = PathBuf::from(file);
        let vs = read_matrix(&path)?;
        if vs.ncols() != m {
            return Err(CliError::field(
                path.display().to_string(),
                format!("each row is one v_k and needs {m} entries, got {}", vs.ncols()),
            ));
        }
        return Ok(VPolicy::Sequence(vs.row_iter().map(|r| r.transpose()).collect()));
    }
    Err(CliError::Usage(format!("--v must be `zero`, `feedback:<matrix>` or `file:<path>`, got `{spec}`")))
}

/// Terminal cost: `hints.p_f`, else the designed one, else zero.
fn terminal_cost(w: &mut Working, margin: f64) -> (Matrix, String) {
    if let Some(pf) = &w.problem.p_f {
        return (pf.clone(), "hints.p_f".into());
    }
    match design_terminal_cost(&w.sys, &w.cost, margin, &w.tol) {
        Ok(pf) => (pf, "designed".into()),
        Err(e) => {
            w.report.warnings.push(format!("no terminal cost could be designed ({e}); using P_f = 0"));
            let n = w.sys.n();
            (Matrix::zeros(n, n), "zero".into())
        }
    }
}

fn empty_mpc(horizon: usize, pf: &Matrix, source: String, margin: Option<f64>) -> MpcReport {
    MpcReport {
        horizon,
        terminal_cost: pf.into(),
        terminal_cost_source: source,
        margin,
        k_n: None,
        g_n: None,
        p_n: None,
        min_stable_horizon: None,
        closed_loop: None,
    }
}

pub fn mpc(path: &Path, mode: MpcMode, mo: &MpcOptions, opts: &GlobalOptions) -> Result<CommandOutput> {
    let name = match mode {
        MpcMode::Design => "mpc design",
        MpcMode::Simulate => "mpc simulate",
        MpcMode::Report => "mpc report",
    };
    let mut w = prepare(name, path, opts, false)?;
    let tol = w.tol;
    let (n, m) = (w.sys.n(), w.sys.m());
    if mo.horizon == 0 {
        return Err(CliError::Usage("--horizon must be positive".into()));
    }
    if !(mo.margin.is_finite() && mo.margin > 0.0) {
        return Err(CliError::Usage(format!("--margin must be positive, got {}", mo.margin)));
    }
    match mode {
        MpcMode::Design => match design_terminal_cost(&w.sys, &w.cost, mo.margin, &tol) {
            Ok(pf) => {
                if let Some(out) = &mo.out {
                    write_matrix(out, &pf)?;
                }
                w.report.mpc = Some(empty_mpc(mo.horizon, &pf, "designed".into(), Some(mo.margin)));
                Ok(finish(w.report, 0, "terminal cost designed"))
            }
            Err(e) => {
                w.report.diagnostics.push(format!("terminal cost design: {e}"));
                Ok(finish(w.report, 3, format!("no terminal cost: {e}")))
            }
        },
        MpcMode::Simulate => {
            let x0 = match &mo.x0 {
                Some(s) => parse_vector(s, "--x0")?,
                None => Vector::from_element(n, 1.0),
            };
            if x0.len() != n {
                return Err(CliError::field("--x0", format!("expected {n} entries, got {}", x0.len())));
            }
            let policy = parse_v_policy(&mo.v, m, n)?;
            let (pf, source) = terminal_cost(&mut w, mo.margin);
            let cfg = RhConfig::new(mo.horizon, pf.clone(), policy);
            let sol = solve_rhocp(&w.sys, &w.cost, &cfg, &tol)?;
            let traj = simulate(&w.sys, &w.cost, &cfg, &x0, mo.steps, &tol)?;
            let csv = trajectory_csv(&traj, n, m)?;
            let mut section = empty_mpc(mo.horizon, &pf, source, None);
            section.k_n = Some((&sol.k_n).into());
            section.g_n = Some((&sol.g_n).into());
            section.p_n = Some((&sol.p_n).into());
            w.report.mpc = Some(section);
            let mut tr = TrajectoryReport {
                steps: traj.steps(),
                x0: vec_of(&x0),
                v_policy: mo.v.clone(),
                final_state: vec_of(traj.states.last().expect("trajectory keeps x0")),
                total_cost: traj.total_cost,
                output: None,
                csv: None,
            };
            let mut data = None;
            match &mo.out {
                Some(out) => {
                    write_file(out, &csv)?;
                    tr.output = Some(out.display().to_string());
                }
                None if opts.json => tr.csv = Some(csv),
                None => data = Some(csv),
            }
            w.report.trajectory = Some(tr);
            let mut out = finish(w.report, 0, format!("simulated {} steps", traj.steps()));
            out.data = data;
            Ok(out)
        }
        MpcMode::Report => {
            let (pf, source) = terminal_cost(&mut w, mo.margin);
            let cfg = RhConfig::new(mo.horizon, pf.clone(), VPolicy::Zero);
            let sol = solve_rhocp(&w.sys, &w.cost, &cfg, &tol)?;
            let rep = stability_report(&w.sys, &w.cost, &cfg, &tol)?;
            let mut section = empty_mpc(mo.horizon, &pf, source, None);
            section.k_n = Some((&sol.k_n).into());
            section.g_n = Some((&sol.g_n).into());
            section.p_n = Some((&sol.p_n).into());
            section.min_stable_horizon = rep.min_stable_horizon;
            section.closed_loop = Some(ClosedLoopReport::new(
                format!("horizon-{} receding-horizon feedback", mo.horizon),
                &sol.k_n,
                &sol.g_n,
                &rep.closed_loop,
            ));
            w.report.mpc = Some(section);
            let v = rep.closed_loop.verdict;
            let code = match v {
                Verdict::ExponentiallyStable | Verdict::StableNonUnique => 0,
                Verdict::StabilizingOnlyForSomeOptimalInputs => 2,
                Verdict::UnstableSomeOptimalInputsStabilize | Verdict::Unstable => 3,
            };
            Ok(finish(w.report, code, format!("receding-horizon closed loop: {}", v.describe())))
        }
    }
}

#[derive(Debug, Clone)]
pub enum DissipativityMode {
    Check { lambda: Option<PathBuf> },
    ExportSdp { kind: SdpKind, bound: Option<f64>, out: Option<PathBuf> },
}

pub fn parse_sdp_kind(s: &str) -> Result<SdpKind> {
    match s {
        "trace" => Ok(SdpKind::TraceObjective),
        "slack" => Ok(SdpKind::SlackObjective),
        other => Err(CliError::Usage(format!("--kind must be `trace` or `slack`, got `{other}`"))),
    }
}

pub fn dissipativity(path: &Path, mode: &DissipativityMode, opts: &GlobalOptions) -> Result<CommandOutput> {
    match mode {
        DissipativityMode::Check { lambda } => {
            let mut w = prepare("dissipativity check", path, opts, false)?;
            let tol = w.tol;
            if let Some(p) = lambda {
                let l = read_matrix(p)?;
                let n = w.sys.n();
                if l.nrows() != n || l.ncols() != n {
                    return Err(CliError::field(
                        p.display().to_string(),
                        format!("expected {n}x{n}, got {}x{}", l.nrows(), l.ncols()),
                    ));
                }
                w.problem.lambda = Some(elqr_core::matkit::symmetrize(&l));
            }
            w.report.controllability = Some((&kalman_decompose(&w.sys, &tol)?).into());
            if let Some(l) = w.problem.lambda.clone() {
                let pre = check_pre_dissipativity(&w.sys, &w.cost, &l, &tol)?;
                let strict = check_strict_schur(&w.sys, &w.cost, &l, &tol)?;
                w.report.supplied_lambda = Some(LambdaCheckReport::new(&l, &pre, &strict));
            }
            let Some(cert) = certify(&mut w) else {
                return Ok(finish(w.report, 3, "no certificate could be built"));
            };
            let summary = tier_name(cert.tier).replace('_', " ");
            Ok(finish(w.report, tier_exit(cert.tier), summary))
        }
        DissipativityMode::ExportSdp { kind, bound, out } => {
            let mut w = prepare("dissipativity export-sdp", path, opts, false)?;
            let sdp = export_sdp(&w.sys, &w.cost, *kind, *bound, &w.tol)?;
            if sdp.bound_defaulted {
                w.report.warnings.push(format!(
                    "(A, B) is not controllable, so the certificate SDP is unbounded without an upper bound; \
                     added L1 - L2 <= {:e} I (override with --bound)",
                    sdp.bound.expect("defaulted bound is set")
                ));
            }
            let text = write_sdpa(&sdp);
            let mut section = SdpReport {
                kind: match kind {
                    SdpKind::TraceObjective => "trace",
                    SdpKind::SlackObjective => "slack",
                },
                num_variables: sdp.num_variables(),
                block_sizes: sdp.block_sizes.clone(),
                bound: sdp.bound,
                bound_defaulted: sdp.bound_defaulted,
                output: None,
                sdpa: None,
            };
            let mut data = None;
            match out {
                Some(p) => {
                    write_file(p, &text)?;
                    section.output = Some(p.display().to_string());
                }
                None if opts.json => section.sdpa = Some(text),
                None => data = Some(text),
            }
            w.report.sdp = Some(section);
            let mut res = finish(w.report, 0, "SDP exported");
            res.data = data;
            Ok(res)
        }
    }
}
