//! CSV export of simulated trajectories.
//!
//! Columns: `step, x0..x{n-1}, u0..u{m-1}, v0..v{m-1}, stage_cost,
//! cumulative_cost`; one row per applied input, so `steps = 0` gives only
//! the header.

use elqr_core::mpc::Trajectory;

use crate::error::{CliError, Result};

pub fn header(n: usize, m: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..n).map(|i| format!("x{i}")));
    h.extend((0..m).map(|i| format!("u{i}")));
    h.extend((0..m).map(|i| format!("v{i}")));
    h.push("stage_cost".into());
    h.push("cumulative_cost".into());
    h
}

pub fn trajectory_csv(traj: &Trajectory, n: usize, m: usize) -> Result<String> {
    let csv_err = |e: csv::Error| CliError::Usage(format!("CSV encoding failed: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header(n, m)).map_err(csv_err)?;
    let cumulative = traj.cumulative_costs();
    for k in 0..traj.steps() {
        let mut row = vec![k.to_string()];
        row.extend(traj.states[k].iter().map(|v| format!("{v:e}")));
        row.extend(traj.inputs[k].iter().map(|v| format!("{v:e}")));
        row.extend(traj.v_values[k].iter().map(|v| format!("{v:e}")));
        row.push(format!("{:e}", traj.stage_costs[k]));
        row.push(format!("{:e}", cumulative[k]));
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(format!("CSV encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is ASCII"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use elqr_core::Vector;

    #[test]
    fn empty_trajectory_is_header_only() {
        let traj = Trajectory {
            states: vec![Vector::from_vec(vec![1.0, 1.0])],
            inputs: vec![],
            v_values: vec![],
            stage_costs: vec![],
            total_cost: 0.0,
        };
        let text = trajectory_csv(&traj, 2, 1).unwrap();
        assert_eq!(text, "step,x0,x1,u0,v0,stage_cost,cumulative_cost\n");
    }
}
