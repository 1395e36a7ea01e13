use evmarl::neural::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mlp(seed: u64, sizes: &[usize]) -> Mlp<f64> {
    let acts = vec![Activation::Tanh; sizes.len() - 1];
    Mlp::new(sizes, &acts, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_deterministic(seed in any::<u64>(), x in prop::collection::vec(-3.0f64..3.0, 4)) {
        let m = mlp(seed, &[4, 6, 2]);
        let (y, _) = m.forward(&x).unwrap();
        prop_assert_eq!(&y, &m.predict(&x).unwrap());
        prop_assert_eq!(y, m.clone().predict(&x).unwrap());
        let l = Lstm::new(3, 5, &mut ChaCha8Rng::seed_from_u64(seed));
        let seq: Vec<f64> = x.iter().chain(&x).take(6).copied().collect();
        prop_assert_eq!(l.encode(&seq).unwrap(), l.encode(&seq).unwrap());
    }

    #[test]
    fn soft_update_is_a_convex_blend(a in any::<u64>(), b in any::<u64>(), tau in 0.0f64..=1.0) {
        let online = mlp(a, &[3, 4, 1]);
        let target0 = mlp(b, &[3, 4, 1]);
        let mut target = target0.clone();
        soft_update(&mut target, &online, tau).unwrap();
        for ((t, t0), o) in target.flat().iter().zip(target0.flat()).zip(online.flat()) {
            prop_assert!(*t >= t0.min(o) - 1e-15 && *t <= t0.max(o) + 1e-15);
        }
    }

    #[test]
    fn lstm_states_stay_bounded(seed in any::<u64>(), x in prop::collection::vec(-100.0f64..100.0, 0..40)) {
        let l = Lstm::new(2, 4, &mut ChaCha8Rng::seed_from_u64(seed));
        let n = x.len() / 2 * 2;
        let (seq, fin, _) = l.forward(&x[..n], &LstmState::zeros(4)).unwrap();
        prop_assert!(seq.iter().chain(&fin.h).all(|h| h.is_finite() && h.abs() <= 1.0));
        prop_assert!(fin.c.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn zero_gradient_adam_step_is_a_no_op(seed in any::<u64>(), lr in 1e-5f64..1e-1) {
        let mut p = mlp(seed, &[2, 3, 1]);
        let before = p.flat();
        let mut opt = Adam::new(&p, AdamConfig::with_lr(lr));
        let z = p.zeros_like();
        opt.step(&mut p, &z).unwrap();
        prop_assert_eq!(p.flat(), before);
    }
}

#[test]
fn adam_descends_a_quadratic() {
    // each parameter pulled toward 0.5 by the gradient of 0.5 * (w - 0.5)^2
    let mut p = mlp(1, &[2, 2]);
    let mut opt = Adam::new(&p, AdamConfig::with_lr(0.05));
    for _ in 0..500 {
        let mut g = p.zeros_like();
        for (gt, pt) in g.tensors_mut().into_iter().zip(p.tensors()) {
            for (gv, pv) in gt.data_mut().iter_mut().zip(pt.data()) {
                *gv = pv - 0.5;
            }
        }
        opt.step(&mut p, &g).unwrap();
    }
    assert!(p.flat().iter().all(|w| (w - 0.5).abs() < 1e-3), "{:?}", p.flat());
}
