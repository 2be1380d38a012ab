//! TOML problem files.
//!
//! ```toml
//! # x+ = A x + B u, stage cost [x; u]^T [Q S^T; S R] [x; u]
//! [system]
//! a = [[2.0, 1.0], [0.0, 1.0]]
//! b = { rows = 2, cols = 2, data = [2.0, 0.0, 1.0, 1.0] }
//!
//! [cost]
//! q = [[0.0, 0.0], [0.0, 1.0]]
//! r = [[0.0, 0.0], [0.0, 0.0]]
//! # s defaults to zero (m x n)
//!
//! [hints]          # all optional
//! lambda = ...     # candidate rotation (n x n)
//! p_f = ...        # terminal cost (n x n)
//! k_hat = ...      # prestabilizing feedback (m x n)
//!
//! [tolerances]     # all optional
//! psd_tol = 1e-9
//! ```
//!
//! A matrix is either a list of rows or a table with explicit `rows`,
//! `cols` and row-major `data`.

use std::path::Path;

use elqr_core::matkit::{relative_asymmetry, symmetrize};
use elqr_core::{LtiSystem, Matrix, StageCost, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<f64>>),
    Dense { rows: usize, cols: usize, data: Vec<f64> },
}

impl MatrixSpec {
    pub fn from_matrix(m: &Matrix) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        MatrixSpec::Dense { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self, field: &str) -> Result<Matrix> {
        let m = match self {
            MatrixSpec::Rows(rows) => {
                let cols = rows.first().map_or(0, Vec::len);
                if rows.is_empty() || cols == 0 {
                    return Err(CliError::field(field, "matrix is empty"));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != cols {
                        return Err(CliError::field(
                            field,
                            format!("ragged matrix: row {} has {} entries, row 1 has {cols}", i + 1, row.len()),
                        ));
                    }
                }
                Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
            }
            MatrixSpec::Dense { rows, cols, data } => {
                if *rows == 0 || *cols == 0 {
                    return Err(CliError::field(field, "matrix is empty"));
                }
                if data.len() != rows * cols {
                    return Err(CliError::field(
                        field,
                        format!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len()),
                    ));
                }
                Matrix::from_row_slice(*rows, *cols, data)
            }
        };
        if !m.iter().all(|v| v.is_finite()) {
            return Err(CliError::field(field, "non-finite entry"));
        }
        Ok(m)
    }
}

/// Tolerance settings that override the defaults. Also used for the
/// command-line `--tol-*` flags, which take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank_rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_margin: Option<f64>,
}

impl ToleranceOverrides {
    pub fn apply(&self, tol: &mut Tolerances) {
        if let Some(v) = self.rank_rel_tol {
            tol.rank_rel_tol = v;
        }
        if let Some(v) = self.psd_tol {
            tol.psd_tol = v;
        }
        if let Some(v) = self.convergence_tol {
            tol.convergence_tol = v;
        }
        if let Some(v) = self.max_iterations {
            tol.max_iterations = v;
        }
        if let Some(v) = self.spectral_margin {
            tol.spectral_margin = v;
        }
    }

    pub fn is_empty(&self) -> bool {
        self == &ToleranceOverrides::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    a: MatrixSpec,
    b: MatrixSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCost {
    q: MatrixSpec,
    r: MatrixSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_f: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k_hat: Option<MatrixSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    system: RawSystem,
    cost: RawCost,
    #[serde(default)]
    hints: RawHints,
    #[serde(default, skip_serializing_if = "ToleranceOverrides::is_empty")]
    tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub system: LtiSystem,
    pub cost: StageCost,
    pub lambda: Option<Matrix>,
    pub p_f: Option<Matrix>,
    pub k_hat: Option<Matrix>,
    /// Overrides stored in the file (not including command-line flags).
    pub file_tolerances: ToleranceOverrides,
    /// Defaults, then the file, then the command line.
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub problem: Problem,
    pub warnings: Vec<String>,
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, field: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(CliError::field(
            field,
            format!("expected {rows}x{cols}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// Symmetric fields are symmetrized; a warning is recorded when the
/// asymmetry is above `psd_tol`.
fn symmetric(m: Matrix, field: &str, tol: &Tolerances, warnings: &mut Vec<String>) -> Matrix {
    let asym = relative_asymmetry(&m);
    if asym > tol.psd_tol {
        warnings.push(format!("{field} is not symmetric (relative asymmetry {asym:e}); using (M + M^T)/2"));
    }
    symmetrize(&m)
}

impl Problem {
    pub fn load(path: &Path, cli: &ToleranceOverrides) -> Result<Loaded> {
        let text = read_file(path)?;
        Self::parse(&text, cli).map_err(|e| match e {
            CliError::Parse { message, .. } => CliError::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn parse(text: &str, cli: &ToleranceOverrides) -> Result<Loaded> {
        let raw: RawProblem = toml::from_str(text).map_err(|e| CliError::Parse {
            path: "<input>".into(),
            message: e.to_string().trim_end().to_string(),
        })?;
        let mut tolerances = Tolerances::default();
        raw.tolerances.apply(&mut tolerances);
        cli.apply(&mut tolerances);
        tolerances.validate()?;

        let mut warnings = Vec::new();
        let a = raw.system.a.to_matrix("system.a")?;
        let n = a.nrows();
        check_shape(&a, n, n, "system.a")?;
        let b = raw.system.b.to_matrix("system.b")?;
        if b.nrows() != n {
            return Err(CliError::field("system.b", format!("expected {n} rows, got {}", b.nrows())));
        }
        let m = b.ncols();

        let q = raw.cost.q.to_matrix("cost.q")?;
        check_shape(&q, n, n, "cost.q")?;
        let q = symmetric(q, "cost.q", &tolerances, &mut warnings);
        let r = raw.cost.r.to_matrix("cost.r")?;
        check_shape(&r, m, m, "cost.r")?;
        let r = symmetric(r, "cost.r", &tolerances, &mut warnings);
        let s = match &raw.cost.s {
            Some(spec) => {
                let s = spec.to_matrix("cost.s")?;
                check_shape(&s, m, n, "cost.s")?;
                s
            }
            None => Matrix::zeros(m, n),
        };

        let square_hint = |spec: &Option<MatrixSpec>, field: &str, warnings: &mut Vec<String>| -> Result<Option<Matrix>> {
            spec.as_ref()
                .map(|s| {
                    let mat = s.to_matrix(field)?;
                    check_shape(&mat, n, n, field)?;
                    Ok(symmetric(mat, field, &tolerances, warnings))
                })
                .transpose()
        };
        let lambda = square_hint(&raw.hints.lambda, "hints.lambda", &mut warnings)?;
        let p_f = square_hint(&raw.hints.p_f, "hints.p_f", &mut warnings)?;
        let k_hat = raw
            .hints
            .k_hat
            .as_ref()
            .map(|s| {
                let mat = s.to_matrix("hints.k_hat")?;
                check_shape(&mat, m, n, "hints.k_hat")?;
                Ok::<_, CliError>(mat)
            })
            .transpose()?;

        let system = LtiSystem::new(a, b)?;
        let cost = StageCost::new(q, r, s, &tolerances)?;
        Ok(Loaded {
            problem: Problem { system, cost, lambda, p_f, k_hat, file_tolerances: raw.tolerances, tolerances },
            warnings,
        })
    }

    /// TOML text that loads back to the same matrices.
    pub fn to_toml(&self) -> String {
        let spec = MatrixSpec::from_matrix;
        let raw = RawProblem {
            system: RawSystem { a: spec(self.system.a()), b: spec(self.system.b()) },
            cost: RawCost { q: spec(self.cost.q()), r: spec(self.cost.r()), s: Some(spec(self.cost.s())) },
            hints: RawHints {
                lambda: self.lambda.as_ref().map(spec),
                p_f: self.p_f.as_ref().map(spec),
                k_hat: self.k_hat.as_ref().map(spec),
            },
            tolerances: self.file_tolerances.clone(),
        };
        toml::to_string(&raw).expect("problem data is always representable in TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
        # comment
        [system]
        a = [[2, 1], [0, 1]]
        b = { rows = 2, cols = 2, data = [2.0, 0.0, 1.0, 1.0] }
        [cost]
        q = [[0.0, 0.0], [0.0, 1.0]]
        r = [[0.0, 0.0], [0.0, 0.0]]
    "#;

    #[test]
    fn integers_and_dense_tables_load() {
        let p = Problem::parse(EXAMPLE, &ToleranceOverrides::default()).unwrap().problem;
        assert_eq!(p.system.a()[(0, 0)], 2.0);
        assert_eq!(p.system.b()[(1, 0)], 1.0);
        assert_eq!(p.system.b()[(0, 1)], 0.0);
        assert_eq!(p.cost.s(), &Matrix::zeros(2, 2));
    }

    #[test]
    fn ragged_rows_name_the_field() {
        let text = EXAMPLE.replace("q = [[0.0, 0.0], [0.0, 1.0]]", "q = [[0.0, 0.0], [0.0]]");
        let err = Problem::parse(&text, &ToleranceOverrides::default()).unwrap_err();
        assert!(err.to_string().contains("cost.q"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn wrong_shape_names_the_field() {
        let text = EXAMPLE.replace("data = [2.0, 0.0, 1.0, 1.0]", "data = [2.0, 0.0, 1.0]");
        let err = Problem::parse(&text, &ToleranceOverrides::default()).unwrap_err();
        assert!(err.to_string().contains("system.b"), "{err}");
    }

    #[test]
    fn asymmetric_cost_is_symmetrized_with_warning() {
        let text = EXAMPLE.replace("q = [[0.0, 0.0], [0.0, 1.0]]", "q = [[0.0, 0.2], [0.0, 1.0]]");
        let loaded = Problem::parse(&text, &ToleranceOverrides::default()).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert_eq!(loaded.problem.cost.q()[(0, 1)], 0.1);
    }

    #[test]
    fn command_line_overrides_the_file() {
        let text = format!("{EXAMPLE}\n[tolerances]\npsd_tol = 1e-6\nmax_iterations = 5\n");
        let cli = ToleranceOverrides { psd_tol: Some(1e-7), ..Default::default() };
        let p = Problem::parse(&text, &cli).unwrap().problem;
        assert_eq!(p.tolerances.psd_tol, 1e-7);
        assert_eq!(p.tolerances.max_iterations, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = EXAMPLE.replace("[cost]", "[cost]\nt = 1");
        assert!(Problem::parse(&text, &ToleranceOverrides::default()).is_err());
    }
}
