use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;

use anyhow::{anyhow, Context};
use evmarl::marl::{median_iqr, write_atomic};
use serde::Serialize;

use crate::evaluate::{MetricsFile, MetricsRow, METRICS_JSON};
use crate::{CmdResult, Failure, ReportArgs};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub variant: String,
    pub weather: String,
    pub mode: String,
    pub runs: usize,
    pub energy_cost_median: f64,
    pub energy_cost_iqr: f64,
    pub unfinished_median: f64,
    pub unfinished_iqr: f64,
}

/// Groups rows by variant, weather and mode; most expensive group first.
pub fn aggregate(rows: &[MetricsRow]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<(String, String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.variant.clone(), r.weather.clone(), r.mode.clone()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<ReportRow> = groups
        .into_iter()
        .map(|((variant, weather, mode), rs)| {
            let cost: Vec<f64> = rs.iter().map(|r| r.energy_cost).collect();
            let unf: Vec<f64> = rs.iter().map(|r| r.unfinished_demand).collect();
            let (cm, ci) = median_iqr(&cost);
            let (um, ui) = median_iqr(&unf);
            ReportRow {
                variant,
                weather,
                mode,
                runs: rs.len(),
                energy_cost_median: cm,
                energy_cost_iqr: ci,
                unfinished_median: um,
                unfinished_iqr: ui,
            }
        })
        .collect();
    out.sort_by(|a, b| b.energy_cost_median.total_cmp(&a.energy_cost_median));
    out
}

pub fn render(rows: &[ReportRow]) -> String {
    let mut s = format!(
        "{:<20} {:<7} {:<7} {:>4} {:>12} {:>10} {:>12} {:>10}\n",
        "variant", "weather", "mode", "runs", "cost_median", "cost_iqr", "unf_median", "unf_iqr"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:<7} {:<7} {:>4} {:>12.3} {:>10.3} {:>12.3} {:>10.3}",
            r.variant,
            r.weather,
            r.mode,
            r.runs,
            r.energy_cost_median,
            r.energy_cost_iqr,
            r.unfinished_median,
            r.unfinished_iqr
        );
    }
    s
}

pub fn run(a: ReportArgs) -> CmdResult {
    let mut rows = Vec::new();
    for dir in &a.runs {
        let path = dir.join(METRICS_JSON);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("{} is not an evaluated run", dir.display()))
            .map_err(Failure::runtime)?;
        let f: MetricsFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(Failure::runtime)?;
        rows.extend(f.rows);
    }
    if rows.is_empty() {
        return Err(Failure::runtime(anyhow!("no metrics rows in the given runs")));
    }
    let table = aggregate(&rows);
    if let Some(out) = &a.out {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in &table {
                w.serialize(r).map_err(Failure::runtime)?;
            }
            w.flush().map_err(Failure::runtime)?;
        }
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(Failure::runtime)?;
        }
        write_atomic(out, &buf).map_err(Failure::runtime)?;
    }
    print!("{}", render(&table));
    Ok(())
}
