//! Semidefinite programs whose optimum certifies strict pre-dissipativity,
//! in the block/sparse data layout used by SDPA-style solvers:
//! minimize `c^T x` subject to `sum_k x_k F_k - F_0 >= 0`.

use alloc::vec::Vec;

use crate::matkit::{Matrix, Tolerances};
use crate::system::{controllability_rank, LtiSystem, StageCost};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpKind {
    /// Maximize `tr(L1 - L2)` subject to `H_L1 >= 0`, `H_L2 >= 0`.
    TraceObjective,
    /// Maximize `a` subject to `H_L1 >= 0`, `H_L2 >= 0`, `L1 - L2 >= a I`.
    SlackObjective,
}

/// Meaning of one scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpVariable {
    /// Entry `(i, j)`, `i <= j`, of `Lambda1` (0-based).
    Lambda1(usize, usize),
    Lambda2(usize, usize),
    Slack,
}

/// One nonzero upper-triangular coefficient. `matrix` 0 is the constant
/// `F_0`; `block`, `row` and `col` are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpEntry {
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpExport {
    pub kind: SdpKind,
    pub n: usize,
    pub m: usize,
    pub variables: Vec<SdpVariable>,
    pub block_sizes: Vec<usize>,
    pub objective: Vec<f64>,
    /// Sorted by `(matrix, block, row, col)`.
    pub entries: Vec<SdpEntry>,
    /// Upper bound `b` in `L1 - L2 <= b I`, if that block is present.
    pub bound: Option<f64>,
    /// The bound was added automatically because the pair is not controllable.
    pub bound_defaulted: bool,
}

impl SdpExport {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    /// Dense symmetric matrices `[F_0, F_1, ...]`, each as a list of blocks.
    pub fn assemble(&self) -> Vec<Vec<Matrix>> {
        let mut out: Vec<Vec<Matrix>> = (0..=self.num_variables())
            .map(|_| self.block_sizes.iter().map(|&s| Matrix::zeros(s, s)).collect())
            .collect();
        for e in &self.entries {
            let blk = &mut out[e.matrix][e.block - 1];
            blk[(e.row - 1, e.col - 1)] = e.value;
            blk[(e.col - 1, e.row - 1)] = e.value;
        }
        out
    }
}

fn unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Change of `H_L` per unit change of `L` along the symmetric direction `e`.
fn rotation_direction(sys: &LtiSystem, e: &Matrix) -> Matrix {
    let (a, b) = (sys.a(), sys.b());
    let (n, m) = (sys.n(), sys.m());
    let mut d = Matrix::zeros(n + m, n + m);
    let ea = e * a;
    d.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * &ea - e));
    let bea = b.transpose() * &ea;
    d.view_mut((n, 0), (m, n)).copy_from(&bea);
    d.view_mut((0, n), (n, m)).copy_from(&bea.transpose());
    d.view_mut((n, n), (m, m)).copy_from(&(b.transpose() * e * b));
    d
}

fn push_block(entries: &mut Vec<SdpEntry>, matrix: usize, block: usize, m: &Matrix) {
    for r in 0..m.nrows() {
        for c in r..m.ncols() {
            let v = m[(r, c)];
            if v != 0.0 {
                entries.push(SdpEntry { matrix, block, row: r + 1, col: c + 1, value: v });
            }
        }
    }
}

/// Exports the certificate SDP. When the pair is not controllable and no
/// bound is given, `L1 - L2 <= b I` is added with `b = 1e6 ||H||_F`, since
/// the program is otherwise unbounded.
pub fn export_sdp(
    sys: &LtiSystem,
    cost: &StageCost,
    kind: SdpKind,
    bound: Option<f64>,
    tol: &Tolerances,
) -> Result<SdpExport> {
    cost.check_compatible(sys)?;
    if let Some(b) = bound {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("SDP bound must be positive, got {b}")));
        }
    }
    let (n, m) = (sys.n(), sys.m());
    let h = cost.h();
    let controllable = controllability_rank(sys, tol)? == n;
    let (bound, bound_defaulted) = match bound {
        Some(b) => (Some(b), false),
        None if !controllable => {
            let hn = h.norm();
            (Some(1e6 * if hn > 0.0 { hn } else { 1.0 }), true)
        }
        None => (None, false),
    };

    let mut variables = Vec::new();
    let mut directions = Vec::new();
    for which in 0..2 {
        for i in 0..n {
            for j in i..n {
                variables.push(if which == 0 { SdpVariable::Lambda1(i, j) } else { SdpVariable::Lambda2(i, j) });
                directions.push(unit(n, i, j));
            }
        }
    }
    let per = n * (n + 1) / 2;
    let slack = kind == SdpKind::SlackObjective;
    if slack {
        variables.push(SdpVariable::Slack);
    }

    let mut block_sizes = alloc::vec![n + m, n + m];
    let gap_block = if slack {
        block_sizes.push(n);
        Some(block_sizes.len())
    } else {
        None
    };
    let bound_block = bound.map(|_| {
        block_sizes.push(n);
        block_sizes.len()
    });

    let mut objective = alloc::vec![0.0; variables.len()];
    match kind {
        SdpKind::SlackObjective => *objective.last_mut().expect("slack variable") = -1.0,
        SdpKind::TraceObjective => {
            for (k, v) in variables.iter().enumerate() {
                match v {
                    SdpVariable::Lambda1(i, j) if i == j => objective[k] = -1.0,
                    SdpVariable::Lambda2(i, j) if i == j => objective[k] = 1.0,
                    _ => {}
                }
            }
        }
    }

    let mut entries = Vec::new();
    push_block(&mut entries, 0, 1, &-&h);
    push_block(&mut entries, 0, 2, &-&h);
    if let (Some(bb), Some(b)) = (bound_block, bound) {
        push_block(&mut entries, 0, bb, &(Matrix::identity(n, n) * -b));
    }
    for (k, e) in directions.iter().enumerate() {
        let var = k + 1;
        let first = k < per;
        let d = rotation_direction(sys, e);
        push_block(&mut entries, var, if first { 1 } else { 2 }, &d);
        let signed = if first { e.clone() } else { -e };
        if let Some(gb) = gap_block {
            push_block(&mut entries, var, gb, &signed);
        }
        if let Some(bb) = bound_block {
            push_block(&mut entries, var, bb, &-&signed);
        }
    }
    if let Some(gb) = gap_block {
        push_block(&mut entries, variables.len(), gb, &-Matrix::identity(n, n));
    }
    entries.sort_by(|x, y| (x.matrix, x.block, x.row, x.col).cmp(&(y.matrix, y.block, y.row, y.col)));

    Ok(SdpExport { kind, n, m, variables, block_sizes, objective, entries, bound, bound_defaulted })
}
