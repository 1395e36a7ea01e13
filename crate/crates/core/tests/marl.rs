use evmarl::marl::*;
use evmarl::neural::{soft_update, Activation, Adam, AdamConfig, Dense, Mlp, ParamSet, Tensor};
use evmarl::scenario::ScenarioConfig;
use evmarl::sim::{BatteryDefaults, EvSession, ExogenousSeries, StationConfig};
use evmarl::data::EpisodeSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small_shape() -> NetShape {
    NetShape {
        lstm_hidden: Some(4),
        actor_hidden: vec![6],
        critic_hidden: vec![8],
    }
}

fn map22() -> ActionMap<f64> {
    ActionMap { p_ch: 22.0, p_disch: 22.0 }
}

fn unit_scale() -> FeatureScale<f64> {
    FeatureScale { energy: 60.0, time: 24.0, price: 0.3, pv: 32.0 }
}

/// Actor whose output layer is forced to `tanh(bias)`.
fn constant_actor(bias: f64) -> ActorNet<f64> {
    let mut a = ActorNet::new(&small_shape(), &mut rng(1)).unwrap();
    let last = a.mlp.layers_mut().last_mut().unwrap();
    last.w.fill(0.0);
    last.b.fill(bias);
    a
}

fn obs(n: usize) -> GlobalObs<f64> {
    GlobalObs {
        t: 3,
        locals: (0..n)
            .map(|i| LocalObs { e_remaining: 5.0 + i as f64, t_remaining: 4.0, soc: 0.3, connected: 1.0 })
            .collect(),
        window: vec![[0.12, 0.08, 10.0], [0.3, 0.08, 20.0]],
    }
}

fn one_hot_features(state: usize) -> Features<f64> {
    let mut locals = vec![0.0; 4];
    locals[state] = 1.0;
    Features { window: vec![0.0; 3], locals }
}

fn linear_critic(n_in: usize, w: f64, b: f64) -> CriticNet<f64> {
    let mlp = Mlp::from_layers(vec![Dense {
        w: Tensor::from_vec(vec![1, n_in], vec![w; n_in]).unwrap(),
        b: Tensor::from_vec(vec![1], vec![b]).unwrap(),
        act: Activation::Identity,
    }])
    .unwrap();
    CriticNet::from_parts(Encoder::Last, mlp, 1).unwrap()
}

#[test]
fn noise_free_action_is_deterministic() {
    let a = ActorNet::new(&small_shape(), &mut rng(3)).unwrap();
    let o = obs(2);
    let x = actor_act(&a, o.view(0), &unit_scale(), &map22(), 0.0, &mut rng(1)).unwrap();
    let y = actor_act(&a, o.view(0), &unit_scale(), &map22(), 0.0, &mut rng(99)).unwrap();
    assert_eq!(x.to_bits(), y.to_bits());
}

#[test]
fn saturated_outputs_hit_the_power_limits() {
    let o = obs(1);
    let map = ActionMap { p_ch: 22.0, p_disch: 11.0 };
    let up = actor_act(&constant_actor(50.0), o.view(0), &unit_scale(), &map, 0.0, &mut rng(0)).unwrap();
    let down = actor_act(&constant_actor(-50.0), o.view(0), &unit_scale(), &map, 0.0, &mut rng(0)).unwrap();
    assert_eq!(up, 22.0);
    assert_eq!(down, -11.0);
}

#[test]
fn noisy_actions_stay_in_range() {
    let o = obs(1);
    let a = constant_actor(0.0);
    let mut r = rng(5);
    for _ in 0..500 {
        let x = actor_act(&a, o.view(0), &unit_scale(), &map22(), 2.0, &mut r).unwrap();
        assert!((-22.0..=22.0).contains(&x));
    }
}

fn transition(s: usize, s2: usize, r: f64, done: bool) -> Transition<f64> {
    Transition { s: one_hot_features(s), a: vec![0.0], r: vec![r], s_next: one_hot_features(s2), done: vec![done] }
}

#[test]
fn td_loss_vanishes_when_q_equals_reward() {
    let mut critic = linear_critic(8, 0.0, 1.0);
    let target = critic.clone();
    let mut opt = Adam::new(&critic, AdamConfig::default());
    let batch = [transition(0, 1, 1.0, false), transition(1, 2, 1.0, false)];
    let refs: Vec<_> = batch.iter().collect();
    let loss = update_critic(&mut critic, &mut opt, &target, &refs, &[vec![0.0], vec![0.0]], 0, 0.0, &map22()).unwrap();
    assert_eq!(loss, 0.0);
}

#[test]
fn terminal_transitions_do_not_bootstrap() {
    // Q = 1 everywhere, target Q = 100. With done set, y = r = 3 so loss = 4.
    let mut critic = linear_critic(8, 0.0, 1.0);
    let target = linear_critic(8, 0.0, 100.0);
    let mut opt = Adam::new(&critic, AdamConfig::default());
    let batch = [transition(0, 1, 3.0, true)];
    let refs: Vec<_> = batch.iter().collect();
    let loss = update_critic(&mut critic, &mut opt, &target, &refs, &[vec![0.0]], 0, 0.9, &map22()).unwrap();
    assert!((loss - 4.0).abs() < 1e-12);
}

#[test]
fn td_fixed_point_matches_value_iteration() {
    // Deterministic 3-state cycle under a fixed policy.
    let next = [1usize, 2, 0];
    let reward = [1.0, 0.0, 2.0];
    let gamma = 0.9;
    let mut v = [0.0f64; 3];
    for _ in 0..2000 {
        v = [0, 1, 2].map(|s| reward[s] + gamma * v[next[s]]);
    }

    let mut critic = linear_critic(8, 0.0, 0.0);
    let mut target = critic.clone();
    let mut opt = Adam::new(&critic, AdamConfig::with_lr(0.02));
    let batch: Vec<_> = (0..3).map(|s| transition(s, next[s], reward[s], false)).collect();
    let refs: Vec<_> = batch.iter().collect();
    let a_next = vec![vec![0.0]; 3];
    for k in 0..20_000 {
        if k == 12_000 {
            opt.cfg.lr = 1e-3;
        }
        update_critic(&mut critic, &mut opt, &target, &refs, &a_next, 0, gamma, &map22()).unwrap();
        soft_update(&mut target, &critic, 0.05).unwrap();
    }
    for s in 0..3 {
        let q = critic.q(&one_hot_features(s), &[0.0]).unwrap();
        assert!((q - v[s]).abs() < 1e-3, "state {s}: {q} vs {}", v[s]);
    }
}

/// Q(a) = sign * (a - c)^2 + slope * a over agent 0's normalized action.
struct ToyCritic {
    curvature: f64,
    centre: f64,
    slope: f64,
}

impl ActionValue<f64> for ToyCritic {
    fn value_and_action_grad(&self, _s: &Features<f64>, a: &[f64], i: usize) -> Result<(f64, f64), evmarl::neural::NeuralError> {
        let x = a[i] - self.centre;
        Ok((self.curvature * x * x + self.slope * a[i], 2.0 * self.curvature * x + self.slope))
    }
}

fn actor_batch() -> Vec<Transition<f64>> {
    let f = Features { window: vec![0.2; 3 * 2], locals: vec![0.5, 0.3, 0.2, 1.0] };
    vec![Transition { s: f.clone(), a: vec![0.0], r: vec![0.0], s_next: f, done: vec![false] }]
}

#[test]
fn stationary_critic_gives_zero_actor_gradient() {
    let mut actor = constant_actor(0.0);
    actor.mlp.layers_mut().last_mut().unwrap().w.fill(0.0);
    let before = actor.clone();
    let mut opt = Adam::new(&actor, AdamConfig::default());
    let b = actor_batch();
    let refs: Vec<_> = b.iter().collect();
    let critic = ToyCritic { curvature: -1.0, centre: 0.0, slope: 0.0 };
    update_actor(&mut actor, &mut opt, &critic, &refs, 0, &map22(), 0.0).unwrap();
    assert_eq!(actor, before);
}

#[test]
fn linear_critic_pushes_action_up() {
    let mut actor = ActorNet::new(&small_shape(), &mut rng(8)).unwrap();
    let b = actor_batch();
    let u0 = actor.forward(&b[0].s.window, b[0].s.local(0)).unwrap();
    let mut opt = Adam::new(&actor, AdamConfig::with_lr(1e-3));
    let refs: Vec<_> = b.iter().collect();
    update_actor(&mut actor, &mut opt, &ToyCritic { curvature: 0.0, centre: 0.0, slope: 1.0 }, &refs, 0, &map22(), 0.0).unwrap();
    let u1 = actor.forward(&b[0].s.window, b[0].s.local(0)).unwrap();
    assert!(u1 > u0, "{u0} -> {u1}");
}

#[test]
fn quadratic_bowl_actor_converges_to_argmax() {
    let centre = 0.4;
    let mut actor = ActorNet::new(&small_shape(), &mut rng(12)).unwrap();
    let mut opt = Adam::new(&actor, AdamConfig::with_lr(0.01));
    let b = actor_batch();
    let refs: Vec<_> = b.iter().collect();
    let critic = ToyCritic { curvature: -1.0, centre, slope: 0.0 };
    for _ in 0..200 {
        update_actor(&mut actor, &mut opt, &critic, &refs, 0, &map22(), 0.0).unwrap();
    }
    let u = actor.forward(&b[0].s.window, b[0].s.local(0)).unwrap();
    assert!((map22().normalize(map22().to_kw(u)) - centre).abs() < 1e-2, "u = {u}");
}

#[test]
fn disconnected_samples_leave_the_actor_alone() {
    let mut actor = ActorNet::new(&small_shape(), &mut rng(8)).unwrap();
    let before = actor.clone();
    let mut b = actor_batch();
    b[0].s.locals[3] = 0.0;
    let refs: Vec<_> = b.iter().collect();
    let mut opt = Adam::new(&actor, AdamConfig::default());
    update_actor(&mut actor, &mut opt, &ToyCritic { curvature: 0.0, centre: 0.0, slope: 1.0 }, &refs, 0, &map22(), 0.0).unwrap();
    assert_eq!(actor, before);
}

#[test]
fn eleven_levels_span_the_power_range() {
    let l = action_levels(11, &map22());
    let expected: Vec<f64> = (0..11).map(|j| -22.0 + 4.4 * j as f64).collect();
    for (a, b) in l.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(l[0], -22.0);
    assert_eq!(l[10], 22.0);
    assert!(l[5].abs() < 1e-12);
}

fn small_madqn(n: usize, seed: u64) -> Madqn<f64> {
    let mut r = rng(seed);
    Madqn::new(n, 11, &small_shape(), unit_scale(), &map22(), AdamConfig::default(), &mut r).unwrap()
}

#[test]
fn full_exploration_is_uniform() {
    let m = small_madqn(1, 0);
    let o = obs(1);
    let mut r = rng(4);
    let mut counts = [0usize; 11];
    let draws = 22_000;
    for _ in 0..draws {
        counts[m.act(&o, 1.0, &mut r).unwrap()[0]] += 1;
    }
    let expected = draws as f64 / 11.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 10 degrees of freedom; 29.6 is the 0.1 % tail.
    assert!(chi2 < 29.6, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn zero_exploration_is_greedy() {
    let m = small_madqn(3, 2);
    let o = obs(3);
    let g = m.greedy(&m.scale.features(&o)).unwrap();
    assert_eq!(m.act(&o, 0.0, &mut rng(0)).unwrap(), g);
}

#[test]
fn centralized_heads_react_to_other_chargers() {
    let o = obs(4);
    let mut seen = false;
    for seed in 0..20 {
        let m = small_madqn(4, seed);
        let base = m.greedy(&m.scale.features(&o)).unwrap();
        let mut bad = o.clone();
        bad.locals[3] = LocalObs { e_remaining: 55.0, t_remaining: 1.0, soc: 0.9, connected: 0.3 };
        let moved = m.greedy(&m.scale.features(&bad)).unwrap();
        if base[..3] != moved[..3] {
            seen = true;
            break;
        }
    }
    assert!(seen, "no healthy head changed under corruption");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_ignores_positive_rescaling(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let mut m = small_madqn(2, seed);
        let o = obs(2);
        let f = m.scale.features(&o);
        let g = m.greedy(&f).unwrap();
        let last = m.online.mlp.layers_mut().last_mut().unwrap();
        last.w.data_mut().iter_mut().for_each(|x| *x *= scale);
        last.b.data_mut().iter_mut().for_each(|x| *x *= scale);
        prop_assert_eq!(m.greedy(&f).unwrap(), g);
    }

    #[test]
    fn replay_evicts_exactly_the_oldest(cap in 1usize..40, extra in 0usize..40) {
        let mut b = ReplayBuffer::new(cap, 0);
        for i in 0..cap + extra {
            b.push(i);
        }
        let kept: Vec<usize> = b.iter().copied().collect();
        prop_assert_eq!(kept, (extra..cap + extra).collect::<Vec<_>>());
        prop_assert!(b.len() <= b.capacity());
    }

    #[test]
    fn replay_sampling_reproducible(seed in any::<u64>(), k in 0usize..50) {
        let draw = || {
            let mut b = ReplayBuffer::new(16, seed);
            (0..20).for_each(|i| b.push(i));
            b.sample(k).into_iter().copied().collect::<Vec<usize>>()
        };
        prop_assert_eq!(draw(), draw());
    }

    #[test]
    fn targets_stay_inside_online_history_envelope(seed in 0u64..500, tau in 0.0f64..=1.0, steps in 1usize..12) {
        let mut r = rng(seed);
        let mut online = ActorNet::<f64>::new(&small_shape(), &mut r).unwrap();
        let mut target = online.clone();
        let mut lo = online.flat();
        let mut hi = lo.clone();
        let mut opt = Adam::new(&online, AdamConfig::with_lr(0.05));
        let b = actor_batch();
        let refs: Vec<_> = b.iter().collect();
        for k in 0..steps {
            let critic = ToyCritic { curvature: 0.0, centre: 0.0, slope: if k % 2 == 0 { 1.0 } else { -1.0 } };
            update_actor(&mut online, &mut opt, &critic, &refs, 0, &map22(), 0.0).unwrap();
            for ((l, h), x) in lo.iter_mut().zip(hi.iter_mut()).zip(online.flat()) {
                *l = l.min(x);
                *h = h.max(x);
            }
            soft_update(&mut target, &online, tau).unwrap();
            for ((l, h), x) in lo.iter().zip(&hi).zip(target.flat()) {
                prop_assert!(*l - 1e-12 <= x && x <= *h + 1e-12);
            }
        }
    }

    #[test]
    fn decentralized_action_ignores_other_chargers(
        seed in 0u64..200,
        others in proptest::collection::vec((0.0f64..60.0, 0.0f64..24.0, 0.0f64..1.0, 0.0f64..1.0), 3),
    ) {
        let mut r = rng(seed);
        let m = Maddpg::new(4, &small_shape(), unit_scale(), map22(), AdamConfig::default(), AdamConfig::default(), &mut r).unwrap();
        let p = Policy::Maddpg(m);
        let base = obs(4);
        let a0 = p.act(&base, &base).unwrap();
        let mut moved = base.clone();
        for (k, &(e, t, s, c)) in others.iter().enumerate() {
            moved.locals[k + 1] = LocalObs { e_remaining: e, t_remaining: t, soc: s, connected: c };
        }
        let a1 = p.act(&moved, &moved).unwrap();
        prop_assert_eq!(a0[0].to_bits(), a1[0].to_bits());
    }
}

fn tiny_cfg(episodes: usize, algorithm: &str) -> ScenarioConfig {
    ScenarioConfig::from_toml_str(&format!(
        r#"
[station]
n_chargers = 3
g_max = 40.0
[data]
source = "synthetic"
days = 3
eval_days = 1
seed = 5
[episodes]
history_len = 4
[train]
algorithm = "{algorithm}"
episodes = {episodes}
batch_size = 16
warmup = 16
update_every = 4
[train.shape]
lstm_hidden = 4
actor_hidden = [8]
critic_hidden = [8]
"#
    ))
    .unwrap()
}

fn run(cfg: &ScenarioConfig) -> TrainOutcome<f64> {
    let sc = cfg.build::<f64>(None).unwrap();
    let seed = cfg.train.seed;
    train(&cfg.train, &sc.station, sc.scale, |e| sc.train_env(e, seed)).unwrap()
}

#[test]
fn zero_episodes_returns_untrained_nets() {
    let cfg = tiny_cfg(0, "lstm-maddpg");
    let out = run(&cfg);
    assert!(out.curves.is_empty());
    let Policy::Maddpg(m) = &out.policy else { panic!("wrong policy") };
    for ag in &m.agents {
        assert_eq!(ag.actor, ag.actor_target);
        assert_eq!(ag.actor_opt.steps(), 0);
    }
}

#[test]
fn training_is_reproducible() {
    for alg in ["lstm-maddpg", "maddpg", "madqn"] {
        let cfg = tiny_cfg(4, alg);
        let (a, b) = (run(&cfg), run(&cfg));
        assert_eq!(a.curves.len(), 4);
        assert_eq!(a, b, "{alg}");
        let mut other = cfg.clone();
        other.train.seed = 1;
        assert_ne!(run(&other).curves, a.curves, "{alg}");
    }
}

#[test]
fn trained_policies_update_their_parameters() {
    let cfg = tiny_cfg(4, "lstm-maddpg");
    let untrained = run(&tiny_cfg(0, "lstm-maddpg"));
    let trained = run(&cfg);
    let (Policy::Maddpg(u), Policy::Maddpg(t)) = (&untrained.policy, &trained.policy) else { panic!() };
    assert!(t.agents[0].critic_opt.steps() > 0);
    assert_ne!(u.agents[0].critic, t.agents[0].critic);
    assert_ne!(t.agents[0].critic, t.agents[0].critic_target);
}

#[test]
fn invalid_train_config_is_rejected() {
    let mut cfg = tiny_cfg(1, "maddpg").train;
    cfg.gamma = 1.0;
    assert!(matches!(cfg.validate(), Err(MarlError::Config(_))));
    cfg.gamma = 0.9;
    cfg.batch_size = cfg.buffer_capacity + 1;
    assert!(cfg.validate().is_err());
}

fn single_session_episode(demand: f64) -> (EpisodeSpec<f64>, StationConfig<f64>) {
    let b = BatteryDefaults::default();
    let s = EvSession::new(0, 1, 5, demand, 12.0, &b);
    let spec = EpisodeSpec {
        start_slot: 0,
        length: 6,
        sessions: vec![s],
        exo: ExogenousSeries { price_buy: vec![0.2; 6], price_sell: vec![0.08; 6], pv_gen: vec![3.0; 6], history_len: 3 },
    };
    (spec, StationConfig::new(2))
}

#[test]
fn zero_policy_leaves_all_demand_unmet() {
    let cfg = tiny_cfg(0, "zero");
    let sc = cfg.build::<f64>(None).unwrap();
    let rep = evaluate(&Policy::Zero, &sc.eval, &sc.station, None).unwrap();
    let total: f64 = sc.eval.iter().map(|e| e.total_demand()).sum();
    assert!(total > 0.0);
    assert!((rep.ledger.unfinished_demand - total).abs() < 1e-9);
}

#[test]
fn greedy_policy_meets_a_feasible_session() {
    let (spec, st) = single_session_episode(40.0);
    let rep = evaluate(&Policy::Greedy { p_ch: 22.0 }, &[spec], &st, None).unwrap();
    assert_eq!(rep.ledger.unfinished_demand, 0.0);
    assert_eq!(rep.traces.len(), 12);
    assert!(rep.traces.iter().all(|r| r.soc <= 1.0));
}

#[test]
fn checkpoints_round_trip_bit_exactly() {
    let cfg = tiny_cfg(3, "lstm-maddpg");
    let out = run(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    let ck = Checkpoint::new(Algorithm::LstmMaddpg, 3, out.policy.clone());
    ck.save(&path).unwrap();
    let back = Checkpoint::<f64>::load(&path).unwrap();
    assert_eq!(back, ck);
    let (Policy::Maddpg(a), Policy::Maddpg(b)) = (&ck.policy, &back.policy) else { panic!() };
    for (x, y) in a.agents.iter().zip(&b.agents) {
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        assert_eq!(bits(x.actor.flat()), bits(y.actor.flat()));
        assert_eq!(bits(x.critic_target.flat()), bits(y.critic_target.flat()));
    }
    assert!(matches!(Checkpoint::<f32>::load(&path), Err(MarlError::Checkpoint(_))));
    std::fs::write(&path, "{\"format\":\"other\",\"version\":1,\"scalar\":\"f64\"}").unwrap();
    assert!(Checkpoint::<f64>::load(&path).is_err());
}

#[test]
fn charging_in_high_pv_counts_only_bright_slots() {
    let row = |slot, pv_kw, realized_kw| EvalTraceRow {
        episode: 0, slot, charger: 0, action_kw: realized_kw, realized_kw, g2v: 0.0, pvev: 0.0, pv_kw, soc: 0.0, connected: true,
    };
    let rows = vec![row(0, 0.0, 10.0), row(1, 5.0, 4.0), row(2, 20.0, 6.0), row(3, 30.0, -3.0)];
    assert_eq!(charging_in_high_pv(&rows, 1.0, 0.75), 6.0);
    assert_eq!(charging_in_high_pv(&rows, 1.0, 1.0), 0.0);
    assert_eq!(charging_in_high_pv(&rows, 2.0, 0.0), 20.0);
}

#[test]
fn median_and_iqr() {
    assert_eq!(median_iqr(&[3.0, 1.0, 2.0]), (2.0, 1.0));
    assert_eq!(median_iqr(&[5.0, 5.0]), (5.0, 0.0));
}
