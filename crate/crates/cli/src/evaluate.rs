use std::fmt::Write as _;

use anyhow::anyhow;
use evmarl::data::Weather;
use evmarl::faults::{robustness_compare, write_fault_trace_csv, FaultModel};
use evmarl::marl::{charging_in_high_pv, evaluate, write_trace_csv, Checkpoint, EvalReport};
use evmarl::scenario::{DataConfig, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::manifest::{input, Emitter, MANIFEST_FILE};
use crate::overrides::{load_config, parse_sets};
use crate::train::{marl_failure, scenario_failure};
use crate::{CmdResult, EvaluateArgs, Failure, Switch, WeatherArg};

pub const METRICS_JSON: &str = "metrics.json";

/// Quantile defining the high-PV slots reported with each row.
const HIGH_PV_QUANTILE: f64 = 0.75;

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: String,
    pub algorithm: String,
    pub seed: u64,
    /// `base`, `sunny` or `cloudy`.
    pub weather: String,
    /// `normal`, or `faulty` when the rollout used corrupted observations.
    pub mode: String,
    pub episodes: usize,
    pub energy_cost: f64,
    pub unfinished_demand: f64,
    pub objective: f64,
    pub total_demand: f64,
    pub high_pv_charging_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub manifest: String,
    pub variant: String,
    pub rows: Vec<MetricsRow>,
}

fn weather_name(w: Option<WeatherArg>) -> &'static str {
    match w {
        None => "base",
        Some(WeatherArg::Sunny) => "sunny",
        Some(WeatherArg::Cloudy) => "cloudy",
    }
}

/// Config for one evaluation seed: it re-draws synthetic data, the cloudy
/// fixture and the fault values.
fn seeded(cfg: &ScenarioConfig, seed: u64) -> ScenarioConfig {
    let mut c = cfg.clone();
    if let DataConfig::Synthetic(s) = &mut c.data {
        s.seed = seed;
    }
    c.eval.fault_seed = seed;
    c.eval.weather_seed = seed;
    c
}

pub fn run(a: EvaluateArgs) -> CmdResult {
    let ck = Checkpoint::<f64>::load(&a.checkpoint).map_err(Failure::runtime)?;
    let sets = parse_sets(&a.sets)?;
    let cfg = load_config(&a.config, &sets)?;
    if ck.n_chargers != cfg.station.n_chargers {
        return Err(Failure::runtime(anyhow!(
            "checkpoint controls {} chargers but the config has {}",
            ck.n_chargers,
            cfg.station.n_chargers
        )));
    }
    let weather = a.weather.map(|w| match w {
        WeatherArg::Sunny => Weather::Sunny,
        WeatherArg::Cloudy => Weather::Cloudy,
    });
    let wname = weather_name(a.weather);
    let seeds = if a.seeds.is_empty() { vec![None] } else { a.seeds.iter().copied().map(Some).collect() };
    let variant = ck.variant();
    let mut em = Emitter::new(&a.out).map_err(Failure::runtime)?;
    let mut rows = Vec::new();
    for seed in seeds {
        let c = seed.map(|s| seeded(&cfg, s)).unwrap_or_else(|| cfg.clone());
        let s = seed.unwrap_or(c.eval.fault_seed);
        let sc = c.build::<f64>(weather).map_err(scenario_failure)?;
        let eps = sc.eval_episodes();
        let dt = sc.station.dt;
        let row = |mode: &str, r: &EvalReport<f64>| MetricsRow {
            variant: variant.clone(),
            algorithm: ck.algorithm.name().to_string(),
            seed: s,
            weather: wname.to_string(),
            mode: mode.to_string(),
            episodes: r.episodes.len(),
            energy_cost: r.ledger.energy_cost,
            unfinished_demand: r.ledger.unfinished_demand,
            objective: r.ledger.objective,
            total_demand: r.episodes.iter().map(|e| e.total_demand).sum(),
            high_pv_charging_kwh: charging_in_high_pv(&r.traces, dt, HIGH_PV_QUANTILE),
        };
        let normal = evaluate(&ck.policy, eps, &sc.station, None).map_err(marl_failure)?;
        rows.push(row("normal", &normal));
        let mut trace = Vec::new();
        write_trace_csv(&mut trace, &normal.traces).map_err(Failure::runtime)?;
        em.write(&format!("trace-{wname}-seed{s}.csv"), &trace).map_err(Failure::runtime)?;

        if a.faults == Switch::On {
            let fm = FaultModel::random(c.eval.fault_count, c.station.n_chargers, s)
                .map_err(marl_failure)?
                .with_mode(c.eval.fault_mode);
            let faulty = evaluate(&ck.policy, eps, &sc.station, Some(&fm)).map_err(marl_failure)?;
            rows.push(row("faulty", &faulty));
            let (report, frows) = robustness_compare(&ck.policy, eps, &sc.station, &fm).map_err(marl_failure)?;
            let mut json = serde_json::to_value(&report).map_err(Failure::runtime)?;
            json["manifest"] = MANIFEST_FILE.into();
            let bytes = serde_json::to_vec_pretty(&json).map_err(Failure::runtime)?;
            em.write(&format!("robustness-{wname}-seed{s}.json"), &bytes).map_err(Failure::runtime)?;
            let mut ft = Vec::new();
            write_fault_trace_csv(&mut ft, &frows).map_err(Failure::runtime)?;
            em.write(&format!("fault-trace-{wname}-seed{s}.csv"), &ft).map_err(Failure::runtime)?;
        }
    }

    let mut csv_buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut csv_buf);
        for r in &rows {
            w.serialize(r).map_err(Failure::runtime)?;
        }
        w.flush().map_err(Failure::runtime)?;
    }
    em.write("metrics.csv", &csv_buf).map_err(Failure::runtime)?;
    let file = MetricsFile {
        manifest: MANIFEST_FILE.into(),
        variant: variant.clone(),
        rows: rows.clone(),
    };
    let json = serde_json::to_vec_pretty(&file).map_err(Failure::runtime)?;
    em.write(METRICS_JSON, &json).map_err(Failure::runtime)?;
    let inputs = vec![input(&a.checkpoint).map_err(Failure::runtime)?];
    let snapshot = cfg.to_toml_string();
    em.finish("evaluate", a.seeds.first().copied().unwrap_or(cfg.eval.fault_seed), snapshot, inputs)
        .map_err(Failure::runtime)?;
    print!("{}", table(&rows));
    Ok(())
}

fn table(rows: &[MetricsRow]) -> String {
    let mut s = format!(
        "{:<20} {:>6} {:<7} {:<7} {:>12} {:>12}\n",
        "variant", "seed", "weather", "mode", "energy_cost", "unfinished"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>6} {:<7} {:<7} {:>12.3} {:>12.3}",
            r.variant, r.seed, r.weather, r.mode, r.energy_cost, r.unfinished_demand
        );
    }
    s
}
