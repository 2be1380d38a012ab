//! SDPA sparse text format. See `docs/sdpa-format.md` for the exact layout.

use elqr_core::dissipativity::{SdpEntry, SdpExport, SdpKind, SdpVariable};

use crate::error::{CliError, Result};

/// Contents of an SDPA sparse file.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaData {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<f64>,
    pub entries: Vec<SdpEntry>,
}

fn variable_name(v: &SdpVariable) -> String {
    match *v {
        SdpVariable::Lambda1(i, j) => format!("L1({},{})", i + 1, j + 1),
        SdpVariable::Lambda2(i, j) => format!("L2({},{})", i + 1, j + 1),
        SdpVariable::Slack => "a".to_string(),
    }
}

pub fn write_sdpa(sdp: &SdpExport) -> String {
    let kind = match sdp.kind {
        SdpKind::TraceObjective => "trace",
        SdpKind::SlackObjective => "slack",
    };
    let mut out = String::new();
    out.push_str(&format!("* elqr pre-dissipativity certificate SDP, kind {kind}, n {}, m {}\n", sdp.n, sdp.m));
    let names: Vec<String> = sdp.variables.iter().enumerate().map(|(k, v)| format!("x{}={}", k + 1, variable_name(v))).collect();
    out.push_str(&format!("* variables: {}\n", names.join(" ")));
    if let Some(b) = sdp.bound {
        out.push_str(&format!("* bound: L1 - L2 <= {b:e} I\n"));
    }
    out.push_str(&format!("{}\n", sdp.num_variables()));
    out.push_str(&format!("{}\n", sdp.block_sizes.len()));
    let sizes: Vec<String> = sdp.block_sizes.iter().map(|s| s.to_string()).collect();
    out.push_str(&format!("{}\n", sizes.join(" ")));
    let c: Vec<String> = sdp.objective.iter().map(|v| format!("{v:e}")).collect();
    out.push_str(&format!("{}\n", c.join(" ")));
    for e in &sdp.entries {
        out.push_str(&format!("{} {} {} {} {:e}\n", e.matrix, e.block, e.row, e.col, e.value));
    }
    out
}

fn bad(line: usize, msg: impl Into<String>) -> CliError {
    CliError::field(format!("SDPA line {line}"), msg)
}

/// Reads a file in the layout written by [`write_sdpa`]. Header comment
/// lines start with `*` or `"`; `{`, `}`, `(`, `)` and `,` count as spaces.
pub fn parse_sdpa(text: &str) -> Result<SdpaData> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .skip_while(|(_, l)| l.starts_with('*') || l.starts_with('"'))
        .filter(|(_, l)| !l.is_empty());
    let mut fields = |what: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| CliError::field("SDPA", format!("missing {what}")))?;
        let cleaned: String = line.chars().map(|c| if "{}(),".contains(c) { ' ' } else { c }).collect();
        Ok((no, cleaned.split_whitespace().map(str::to_string).collect()))
    };
    let num = |no: usize, t: &str| t.parse::<f64>().map_err(|_| bad(no, format!("`{t}` is not a number")));
    let int = |no: usize, t: &str| t.parse::<usize>().map_err(|_| bad(no, format!("`{t}` is not a non-negative integer")));

    let (no, f) = fields("variable count")?;
    let m_dim = int(no, f.first().ok_or_else(|| bad(no, "empty"))?)?;
    let (no, f) = fields("block count")?;
    let n_block = int(no, f.first().ok_or_else(|| bad(no, "empty"))?)?;
    let (no, f) = fields("block sizes")?;
    if f.len() < n_block {
        return Err(bad(no, format!("expected {n_block} block sizes")));
    }
    let block_sizes = f[..n_block].iter().map(|t| int(no, t)).collect::<Result<Vec<_>>>()?;
    let (no, f) = fields("objective")?;
    if f.len() < m_dim {
        return Err(bad(no, format!("expected {m_dim} objective coefficients")));
    }
    let objective = f[..m_dim].iter().map(|t| num(no, t)).collect::<Result<Vec<_>>>()?;

    let mut entries = Vec::new();
    while let Ok((no, f)) = fields("entry") {
        if f.len() < 5 {
            return Err(bad(no, "expected `matrix block row col value`"));
        }
        let e = SdpEntry {
            matrix: int(no, &f[0])?,
            block: int(no, &f[1])?,
            row: int(no, &f[2])?,
            col: int(no, &f[3])?,
            value: num(no, &f[4])?,
        };
        if e.matrix > m_dim || e.block == 0 || e.block > n_block {
            return Err(bad(no, "matrix or block index out of range"));
        }
        let size = block_sizes[e.block - 1];
        if e.row == 0 || e.col == 0 || e.row > size || e.col > size {
            return Err(bad(no, "row or column index out of range"));
        }
        entries.push(e);
    }
    Ok(SdpaData { block_sizes, objective, entries })
}
