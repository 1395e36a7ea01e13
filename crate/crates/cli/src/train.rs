use anyhow::anyhow;
use evmarl::marl::{self, Algorithm, Checkpoint, MarlError};
use evmarl::scenario::{ScenarioConfig, ScenarioError};

use crate::manifest::Emitter;
use crate::overrides::{load_config, parse_sets};
use crate::{CmdResult, Failure, RewardArg, TrainArgs};

pub fn scenario_failure(e: ScenarioError) -> Failure {
    if e.is_config() {
        Failure::config(e)
    } else {
        Failure::runtime(e)
    }
}

pub fn marl_failure(e: MarlError) -> Failure {
    match e {
        MarlError::Config(_) => Failure::config(e),
        e => Failure::runtime(e),
    }
}

/// Report label: the algorithm plus the reward variant for learned actor-critics.
pub fn variant_label(cfg: &ScenarioConfig) -> String {
    match cfg.train.algorithm {
        Algorithm::LstmMaddpg | Algorithm::Maddpg => {
            let reward = if cfg.station.dense_reward { "dense" } else { "sparse" };
            format!("{}-{reward}", cfg.train.algorithm)
        }
        a => a.name().to_string(),
    }
}

pub fn apply_flags(cfg: &mut ScenarioConfig, a: &TrainArgs) -> Result<(), Failure> {
    if let Some(n) = a.episodes {
        cfg.train.episodes = n;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(alg) = &a.algorithm {
        cfg.train.algorithm = alg.parse().map_err(|e: String| Failure::config(anyhow!("--algorithm: {e}")))?;
    }
    match a.reward {
        Some(RewardArg::Dense) => cfg.station.dense_reward = true,
        Some(RewardArg::Sparse) => cfg.station = cfg.station.clone().sparse(),
        None => {}
    }
    cfg.validate().map_err(scenario_failure)
}

pub fn run(a: TrainArgs) -> CmdResult {
    let sets = parse_sets(&a.sets)?;
    let mut cfg = load_config(&a.config, &sets)?;
    apply_flags(&mut cfg, &a)?;
    let sc = cfg.build::<f64>(None).map_err(scenario_failure)?;
    let seed = cfg.train.seed;
    let out = marl::train(&cfg.train, &sc.station, sc.scale, |e| sc.train_env(e, seed)).map_err(marl_failure)?;
    let label = variant_label(&cfg);
    let ck = Checkpoint::new(cfg.train.algorithm, cfg.station.n_chargers, out.policy).with_label(&label);

    let mut em = Emitter::new(&a.out).map_err(Failure::runtime)?;
    let snapshot = cfg.to_toml_string();
    let mut run = || -> anyhow::Result<()> {
        em.write("checkpoint.json", ck.to_json()?.as_bytes())?;
        let mut curves = Vec::new();
        marl::write_curves_csv(&mut curves, &out.curves)?;
        em.write("curves.csv", &curves)?;
        em.write("config.toml", snapshot.as_bytes())?;
        Ok(())
    };
    run().map_err(Failure::runtime)?;
    let m = em.finish("train", seed, snapshot, Vec::new()).map_err(Failure::runtime)?;
    let last = out.curves.last().map(|c| c.mean_reward);
    println!(
        "trained {label} for {} episodes (run {}){}",
        out.curves.len(),
        m.run_id,
        last.map(|r| format!(", final episode reward {r:.3}")).unwrap_or_default()
    );
    Ok(())
}
