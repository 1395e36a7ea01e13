use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{SimError, StepOutcome};
use crate::num::Scalar;

/// One row of an episode trace CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub charger_id: usize,
    pub action_kw: f64,
    pub g2v: f64,
    pub pvev: f64,
    pub pvg: f64,
    /// State of charge after the slot as a fraction of capacity (0 when empty).
    pub soc: f64,
    pub r_cost: f64,
    pub r_user: f64,
    pub r_grid: f64,
}

/// Trace rows for the transition that started at slot `t`.
///
/// The reported SOC is the post-update value, taken before the departing
/// vehicle is detached.
pub fn trace_rows<F: Scalar>(t: usize, out: &StepOutcome<F>, soc_after: &[F]) -> Vec<TraceRow> {
    let r = &out.rewards;
    let d = &out.dispatch;
    (0..d.action.len())
        .map(|i| TraceRow {
            t,
            charger_id: i,
            action_kw: d.action[i].as_f64(),
            g2v: d.g2v[i].as_f64(),
            pvev: d.pvev[i].as_f64(),
            pvg: d.pvg.as_f64(),
            soc: soc_after[i].as_f64(),
            r_cost: r.r_cost[i].as_f64(),
            r_user: r.r_user[i].as_f64(),
            r_grid: if r.connected[i] { r.r_grid.as_f64() } else { 0.0 },
        })
        .collect()
}

pub fn write_trace_csv<W: Write>(w: W, rows: &[TraceRow]) -> Result<(), SimError> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| SimError::Io(e.to_string()))?;
    Ok(())
}
