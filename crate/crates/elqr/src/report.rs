//! Report document. `--json` prints it as JSON; the human-readable form
//! is rendered from the same serialized value.

use elqr_core::dissipativity::{
    CertificateMethod, DissipativityCertificate, PreDissipativityCheck, RegularizedCheck, StrictCheck, Tier,
};
use elqr_core::mpc::{ClosedLoopAnalysis, ProbeResult, Verdict};
use elqr_core::riccati::{Classification, ProjectorSource, ReverseSolution, RiccatiSolution};
use elqr_core::system::KalmanDecomposition;
use elqr_core::{Matrix, Tolerances, Vector};
use serde::Serialize;
use serde_json::Value;

/// Dense matrix as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Mat(pub Vec<Vec<f64>>);

impl From<&Matrix> for Mat {
    fn from(m: &Matrix) -> Self {
        Mat((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect())
    }
}

impl Mat {
    pub fn to_matrix(&self) -> Matrix {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        Matrix::from_fn(rows, cols, |i, j| self.0[i][j])
    }
}

pub fn vec_of(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn opt_mat(m: &Option<Matrix>) -> Option<Mat> {
    m.as_ref().map(Mat::from)
}

pub fn tier_name(t: Tier) -> &'static str {
    match t {
        Tier::None => "none",
        Tier::PreDissipative => "pre_dissipative",
        Tier::StrictPreDissipative => "strict_pre_dissipative",
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::ExponentiallyStable => "exponentially_stable",
        Verdict::StableNonUnique => "stable_non_unique",
        Verdict::StabilizingOnlyForSomeOptimalInputs => "stabilizing_only_for_some_optimal_inputs",
        Verdict::UnstableSomeOptimalInputsStabilize => "unstable_some_optimal_inputs_stabilize",
        Verdict::Unstable => "unstable",
    }
}

pub fn classification_name(c: Classification) -> &'static str {
    match c {
        Classification::Stabilizing => "stabilizing",
        Classification::Antistabilizing => "antistabilizing",
        Classification::Other => "other",
    }
}

fn method_name(m: CertificateMethod) -> &'static str {
    match m {
        CertificateMethod::RiccatiPair => "riccati_pair",
        CertificateMethod::UserSupplied => "user_supplied",
        CertificateMethod::ExternalSdp => "external_sdp",
    }
}

fn source_name(s: ProjectorSource) -> &'static str {
    match s {
        ProjectorSource::CgdareSolution => "cgdare_solution",
        ProjectorSource::FreeInputs => "free_inputs",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dimensions {
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceReport {
    pub rank_rel_tol: f64,
    pub psd_tol: f64,
    pub convergence_tol: f64,
    pub max_iterations: usize,
    pub spectral_margin: f64,
}

impl From<&Tolerances> for ToleranceReport {
    fn from(t: &Tolerances) -> Self {
        ToleranceReport {
            rank_rel_tol: t.rank_rel_tol,
            psd_tol: t.psd_tol,
            convergence_tol: t.convergence_tol,
            max_iterations: t.max_iterations,
            spectral_margin: t.spectral_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllabilityReport {
    pub controllable_dim: usize,
    pub uncontrollable_dim: usize,
    pub controllable: bool,
    pub stabilizable: bool,
    pub marginal: bool,
    pub uncontrollable_spectral_radius: f64,
    /// Orthogonal `T` with `T^T A T` block lower triangular.
    pub transform: Mat,
}

impl From<&KalmanDecomposition> for ControllabilityReport {
    fn from(k: &KalmanDecomposition) -> Self {
        ControllabilityReport {
            controllable_dim: k.controllable_dim,
            uncontrollable_dim: k.uncontrollable_dim(),
            controllable: k.is_controllable(),
            stabilizable: k.stabilizable,
            marginal: k.marginal,
            uncontrollable_spectral_radius: k.uncontrollable_radius,
            transform: (&k.transform).into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularizedReport {
    pub holds: bool,
    pub lambda: Option<Mat>,
    pub min_eigenvalue: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl From<&RegularizedCheck> for RegularizedReport {
    fn from(c: &RegularizedCheck) -> Self {
        RegularizedReport {
            holds: c.holds,
            lambda: opt_mat(&c.lambda),
            min_eigenvalue: c.min_eigenvalue,
            diagnostics: c.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrestabilizationReport {
    pub k_hat: Mat,
    /// `A - B K_hat`.
    pub a: Mat,
    pub q: Mat,
    pub r: Mat,
    pub s: Mat,
    pub regularized_before: Option<RegularizedReport>,
    pub regularized_after: Option<RegularizedReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    pub p: Mat,
    pub k: Mat,
    pub g: Mat,
    /// `B` times the regularizer for regularized solves, `B G` otherwise.
    pub bg: Mat,
    pub bg_zero: bool,
    pub residual: f64,
    pub residual_bound: f64,
    pub kernel_ok: bool,
    pub solves_cgdare: bool,
    pub classification: &'static str,
    pub closed_loop_spectral_radius: f64,
    pub regularizer: Option<Mat>,
    pub rdare_residual: Option<f64>,
    pub iterations: usize,
    pub diagnostics: Vec<String>,
}

impl SolutionReport {
    pub fn new(s: &RiccatiSolution, b: &Matrix, tol: &Tolerances) -> Self {
        let g_eff = s.regularizer.as_ref().unwrap_or(&s.g);
        let bg = b * g_eff;
        SolutionReport {
            p: (&s.p).into(),
            k: (&s.k).into(),
            g: (&s.g).into(),
            bg_zero: elqr_core::riccati::bg_is_zero(b, g_eff, tol),
            bg: (&bg).into(),
            residual: s.residual,
            residual_bound: tol.residual_bound(s.p.norm()),
            kernel_ok: s.kernel_ok,
            solves_cgdare: s.solves_cgdare(tol),
            classification: classification_name(s.classification),
            closed_loop_spectral_radius: s.closed_loop_spectral_radius,
            regularizer: opt_mat(&s.regularizer),
            rdare_residual: s.rdare_residual,
            iterations: s.iterations,
            diagnostics: s.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseReport {
    pub solution: SolutionReport,
    pub reverse_gain: Mat,
    pub reverse_spectral_radius: f64,
    pub reverse_regularizer: Mat,
    pub antistabilizing_cross_check: Option<bool>,
}

impl ReverseReport {
    pub fn new(r: &ReverseSolution, b: &Matrix, tol: &Tolerances) -> Self {
        ReverseReport {
            solution: SolutionReport::new(&r.solution, b, tol),
            reverse_gain: (&r.reverse_gain).into(),
            reverse_spectral_radius: r.reverse_spectral_radius,
            reverse_regularizer: (&r.reverse_regularizer).into(),
            antistabilizing_cross_check: r.antistabilizing_cross_check,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub p: Mat,
    pub residual: f64,
    pub residual_bound: f64,
    pub kernel_ok: bool,
    pub kernel_defect: f64,
    pub solves_cgdare: bool,
    pub k: Mat,
    pub g: Mat,
    pub bg: Mat,
    pub classification: &'static str,
    pub closed_loop_spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub h_lambda_min: Option<f64>,
    pub h_lambda1_min: Option<f64>,
    pub h_lambda2_min: Option<f64>,
    pub gap_min: Option<f64>,
    pub schur_r_min: Option<f64>,
    pub schur_complement_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftReport {
    pub scale: f64,
    pub doublings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub tier: &'static str,
    pub method: Option<&'static str>,
    pub lambda: Option<Mat>,
    pub lambda1: Option<Mat>,
    pub lambda2: Option<Mat>,
    pub witness: WitnessReport,
    pub null_projector: Mat,
    pub projector_source: &'static str,
    pub bg_norm: f64,
    pub bg_zero: bool,
    pub lift: Option<LiftReport>,
    pub prestabilized_reverse: bool,
    pub diagnostics: Vec<String>,
}

impl From<&DissipativityCertificate> for CertificateReport {
    fn from(c: &DissipativityCertificate) -> Self {
        let w = &c.witness;
        CertificateReport {
            tier: tier_name(c.tier),
            method: c.method.map(method_name),
            lambda: opt_mat(&c.lambda),
            lambda1: opt_mat(&c.lambda1),
            lambda2: opt_mat(&c.lambda2),
            witness: WitnessReport {
                h_lambda_min: w.h_lambda_min,
                h_lambda1_min: w.h_lambda1_min,
                h_lambda2_min: w.h_lambda2_min,
                gap_min: w.gap_min,
                schur_r_min: w.schur_r_min,
                schur_complement_min: w.schur_complement_min,
            },
            null_projector: (&c.null_projector).into(),
            projector_source: source_name(c.projector_source),
            bg_norm: c.bg_norm,
            bg_zero: c.bg_zero,
            lift: c.lift.map(|l| LiftReport { scale: l.scale, doublings: l.doublings }),
            prestabilized_reverse: c.prestabilized_reverse,
            diagnostics: c.diagnostics.clone(),
        }
    }
}

/// Checks of a user-supplied rotation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCheckReport {
    pub lambda: Mat,
    pub pre_dissipative: bool,
    pub h_min_eigenvalue: f64,
    pub strict_schur_form: bool,
    pub r_min_eigenvalue: f64,
    pub complement_min_eigenvalue: f64,
}

impl LambdaCheckReport {
    pub fn new(lambda: &Matrix, pre: &PreDissipativityCheck, strict: &StrictCheck) -> Self {
        LambdaCheckReport {
            lambda: lambda.into(),
            pre_dissipative: pre.holds,
            h_min_eigenvalue: pre.min_eigenvalue,
            strict_schur_form: strict.holds,
            r_min_eigenvalue: strict.r_min_eigenvalue,
            complement_min_eigenvalue: strict.complement_min_eigenvalue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub label: String,
    pub l: Mat,
    pub spectral_radius: f64,
}

impl From<&ProbeResult> for ProbeReport {
    fn from(p: &ProbeResult) -> Self {
        ProbeReport { label: p.label.clone(), l: (&p.l).into(), spectral_radius: p.spectral_radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopReport {
    /// Which feedback was analyzed.
    pub feedback: String,
    pub k: Mat,
    pub g: Mat,
    pub nominal_spectral_radius: f64,
    pub nominal_stable: bool,
    pub bg_norm: f64,
    pub bg_zero: bool,
    pub worst_probe: Option<ProbeReport>,
    pub probes: Vec<ProbeReport>,
    pub verdict: &'static str,
    pub verdict_text: &'static str,
}

impl ClosedLoopReport {
    pub fn new(feedback: impl Into<String>, k: &Matrix, g: &Matrix, a: &ClosedLoopAnalysis) -> Self {
        ClosedLoopReport {
            feedback: feedback.into(),
            k: k.into(),
            g: g.into(),
            nominal_spectral_radius: a.nominal_spectral_radius,
            nominal_stable: a.nominal_stable,
            bg_norm: a.bg_norm,
            bg_zero: a.bg_zero,
            worst_probe: a.worst_probe.as_ref().map(ProbeReport::from),
            probes: a.probes.iter().map(ProbeReport::from).collect(),
            verdict: verdict_name(a.verdict),
            verdict_text: a.verdict.describe(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpcReport {
    pub horizon: usize,
    pub terminal_cost: Mat,
    /// `hints.p_f`, `designed` or `zero`.
    pub terminal_cost_source: String,
    pub margin: Option<f64>,
    pub k_n: Option<Mat>,
    pub g_n: Option<Mat>,
    pub p_n: Option<Mat>,
    pub min_stable_horizon: Option<usize>,
    pub closed_loop: Option<ClosedLoopReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryReport {
    pub steps: usize,
    pub x0: Vec<f64>,
    pub v_policy: String,
    pub final_state: Vec<f64>,
    pub total_cost: f64,
    pub output: Option<String>,
    /// CSV text, when no output file was given and the report is JSON.
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdpReport {
    pub kind: &'static str,
    pub num_variables: usize,
    pub block_sizes: Vec<usize>,
    pub bound: Option<f64>,
    pub bound_defaulted: bool,
    pub output: Option<String>,
    /// SDPA text, when no output file was given and the report is JSON.
    pub sdpa: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub problem: String,
    pub dimensions: Dimensions,
    pub tolerances: ToleranceReport,
    pub outcome: Outcome,
    pub warnings: Vec<String>,
    pub controllability: Option<ControllabilityReport>,
    pub prestabilization: Option<PrestabilizationReport>,
    pub certificate: Option<CertificateReport>,
    pub supplied_lambda: Option<LambdaCheckReport>,
    pub stabilizing: Option<SolutionReport>,
    pub antistabilizing: Option<ReverseReport>,
    pub cgdare_solution: Option<SolutionReport>,
    pub verification: Option<VerifyReport>,
    pub closed_loop: Option<ClosedLoopReport>,
    pub mpc: Option<MpcReport>,
    pub trajectory: Option<TrajectoryReport>,
    pub sdp: Option<SdpReport>,
    pub diagnostics: Vec<String>,
}

impl Report {
    pub fn new(command: &str, problem: &str, n: usize, m: usize, tol: &Tolerances) -> Self {
        Report {
            command: command.to_string(),
            problem: problem.to_string(),
            dimensions: Dimensions { n, m },
            tolerances: tol.into(),
            outcome: Outcome { exit_code: 0, summary: String::new() },
            warnings: Vec::new(),
            controllability: None,
            prestabilization: None,
            certificate: None,
            supplied_lambda: None,
            stabilizing: None,
            antistabilizing: None,
            cgdare_solution: None,
            verification: None,
            closed_loop: None,
            mpc: None,
            trajectory: None,
            sdp: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut out = String::new();
        render(&value, 0, &mut out);
        out
    }
}

/// Six significant digits, trailing zeros removed.
pub fn fmt_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        let s = format!("{v:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(if *b { "yes" } else { "no" }.into()),
        Value::Number(n) => Some(match n.as_f64() {
            Some(f) if n.is_f64() => fmt_number(f),
            _ => n.to_string(),
        }),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn as_matrix(v: &Value) -> Option<Vec<Vec<String>>> {
    let rows = v.as_array()?;
    if rows.is_empty() {
        return None;
    }
    rows.iter()
        .map(|r| {
            let r = r.as_array()?;
            r.iter().map(|x| if x.is_number() || x.is_null() { scalar(x) } else { None }).collect()
        })
        .collect()
}

fn render(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let Value::Object(map) = v else { return };
    for (key, val) in map {
        if val.is_null() {
            continue;
        }
        let label = key.replace('_', " ");
        if let Some(s) = scalar(val) {
            if s.contains('\n') {
                out.push_str(&format!("{pad}{label}:\n"));
                for line in s.lines() {
                    out.push_str(&format!("{pad}  {line}\n"));
                }
            } else {
                out.push_str(&format!("{pad}{label}: {s}\n"));
            }
        } else if let Some(rows) = as_matrix(val) {
            out.push_str(&format!("{pad}{label}:\n"));
            let width = rows.iter().flatten().map(String::len).max().unwrap_or(1);
            for r in rows {
                let cells: Vec<String> = r.iter().map(|c| format!("{c:>width$}")).collect();
                out.push_str(&format!("{pad}  [ {} ]\n", cells.join("  ")));
            }
        } else if let Value::Array(items) = val {
            if items.is_empty() {
                continue;
            }
            if items.iter().all(|x| scalar(x).is_some()) {
                let cells: Vec<String> = items.iter().filter_map(scalar).collect();
                let joined = cells.join(", ");
                if items.iter().all(Value::is_string) {
                    out.push_str(&format!("{pad}{label}:\n"));
                    for c in cells {
                        out.push_str(&format!("{pad}  - {c}\n"));
                    }
                } else {
                    out.push_str(&format!("{pad}{label}: [{joined}]\n"));
                }
            } else {
                out.push_str(&format!("{pad}{label}:\n"));
                for item in items {
                    let mut inner = String::new();
                    render(item, indent + 2, &mut inner);
                    let trimmed = inner.trim_start();
                    out.push_str(&format!("{pad}  - {trimmed}"));
                }
            }
        } else {
            out.push_str(&format!("{pad}{label}:\n"));
            render(val, indent + 1, out);
        }
    }
}
