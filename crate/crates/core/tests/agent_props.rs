use irsa_rl::agent::{
    extract_policy, q_update, select_action, Level, LearningParams, LearningRate, ObservationHistory, QTable,
};
use irsa_rl::environment::{train, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn history_strategy(w: usize, capacity: Level) -> impl Strategy<Value = ObservationHistory> {
    prop::collection::vec(0..=capacity, w).prop_map(|l| ObservationHistory::new(l).unwrap())
}

fn table_strategy(d: usize) -> impl Strategy<Value = QTable<f64>> {
    prop::collection::vec((history_strategy(3, 5), 1..=d, -50.0f64..0.0, 0u64..20), 0..40).prop_map(
        move |rows| {
            let mut q = QTable::new(d);
            for (h, a, v, n) in rows {
                let e = q.entry_mut(&h, a);
                e.value = v;
                e.visits = n;
            }
            q
        },
    )
}

fn frequencies(samples: impl Iterator<Item = usize>, d: usize) -> (Vec<usize>, usize) {
    let mut counts = vec![0; d + 1];
    let mut n = 0;
    for a in samples {
        counts[a] += 1;
        n += 1;
    }
    (counts, n)
}

#[test]
fn full_exploration_is_uniform() {
    let params = LearningParams::<f64> { epsilon: 1.0, ..Default::default() };
    let mut q = QTable::new(8);
    let h = ObservationHistory::filled(2, 4);
    q.entry_mut(&h, 5).value = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (counts, n) = frequencies((0..100_000).map(|_| select_action(&q, &h, &params, &mut rng)), 8);
    assert_eq!(counts[0], 0);
    let se = (0.125f64 * 0.875 / n as f64).sqrt();
    for c in &counts[1..] {
        assert!((*c as f64 / n as f64 - 0.125).abs() <= 3.0 * se, "{counts:?}");
    }
}

#[test]
fn zero_table_ties_break_uniformly() {
    let params = LearningParams::<f64> { epsilon: 0.0, ..Default::default() };
    let q = QTable::new(8);
    let h = ObservationHistory::filled(3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let (counts, n) = frequencies((0..100_000).map(|_| select_action(&q, &h, &params, &mut rng)), 8);
    let se = (0.125f64 * 0.875 / n as f64).sqrt();
    for c in &counts[1..] {
        assert!((*c as f64 / n as f64 - 0.125).abs() <= 3.0 * se, "{counts:?}");
    }
}

#[test]
fn zero_reward_myopic_update_settles_at_zero() {
    let params = LearningParams::<f64> { gamma: 0.0, ..Default::default() };
    let mut q = QTable::new(8);
    let h = ObservationHistory::filled(1, 4);
    q.entry_mut(&h, 4).value = -7.0;
    for _ in 0..200 {
        q_update(&mut q, &h, 4, 0.0, &h.shifted(2), &params);
    }
    assert!(q.value(&h, 4).abs() < 1e-9);
}

#[test]
fn polynomial_schedule_keeps_a_divergent_sum() {
    let poly = LearningRate::Polynomial { exponent: 0.8 };
    let geo = LearningRate::<f64>::Geometric { base: 1.111, decay: 0.9 };
    let poly_sum: f64 = (0..100_000).map(|n| poly.rate(n)).sum();
    let geo_sum: f64 = (0..100_000).map(|n| geo.rate(n)).sum();
    assert!(poly_sum > 40.0);
    assert!(geo_sum < 11.0);
    assert!((0..50).all(|n| poly.rate(n + 1) <= poly.rate(n) && geo.rate(n + 1) <= geo.rate(n)));
}

#[test]
fn q_values_stay_in_the_reward_envelope_after_training() {
    for (load, virtual_experience) in [(0.3, false), (0.7, false), (0.7, true), (1.0, true)] {
        let config = TrainConfig::<f64> {
            load,
            virtual_experience,
            episodes: 10,
            seed: 99,
            ..Default::default()
        };
        let out = train(&config).unwrap();
        let b = f64::from(config.params.capacity);
        let floor = -b / (1.0 - config.params.gamma);
        for node in &out.network.nodes {
            for (_, _, e) in node.q.entries() {
                assert!(e.value <= 1e-12 && e.value >= floor - 1e-9, "{}", e.value);
            }
        }
    }
}

proptest! {
    #[test]
    fn selected_actions_are_in_range(
        d in 1usize..=12,
        epsilon in 0.0f64..=1.0,
        seed in any::<u64>(),
        h in history_strategy(3, 5),
        values in prop::collection::vec(-10.0f64..10.0, 12),
    ) {
        let params = LearningParams::<f64> { epsilon, max_degree: d, window: 3, ..Default::default() };
        let mut q = QTable::new(d);
        for (a, v) in values.iter().take(d).enumerate() {
            q.entry_mut(&h, a + 1).value = *v;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..32 {
            let a = select_action(&q, &h, &params, &mut rng);
            prop_assert!((1..=d).contains(&a));
        }
    }

    #[test]
    fn extracted_policy_is_normalized_and_scale_free(q in table_strategy(8), scale in 0.01f64..100.0) {
        match extract_policy(&q, 8) {
            Ok(policy) => {
                let sum: f64 = policy.coeffs().iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(policy.coeffs().iter().all(|&c| c >= 0.0));
                let mut scaled = q.clone();
                let pairs: Vec<_> = q.entries().map(|(h, a, e)| (h.clone(), a, e)).collect();
                for (h, a, e) in pairs {
                    scaled.entry_mut(&h, a).value = e.value * scale;
                }
                let again = extract_policy(&scaled, 8).unwrap();
                for (x, y) in policy.coeffs().iter().zip(again.coeffs()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
            Err(_) => prop_assert_eq!(q.entries().map(|(_, _, e)| e.visits).sum::<u64>(), 0),
        }
    }

    #[test]
    fn text_format_roundtrips(q in table_strategy(6)) {
        let back = QTable::from_text(&q.to_text(), 6).unwrap();
        let a: Vec<_> = q.entries().map(|(h, k, e)| (h.clone(), k, e)).collect();
        let b: Vec<_> = back.entries().map(|(h, k, e)| (h.clone(), k, e)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn visits_only_grow(h in history_strategy(4, 5), a in 1usize..=8, r in -5.0f64..0.0, steps in 1usize..30) {
        let params = LearningParams::<f64>::default();
        let mut q = QTable::new(8);
        let mut last = 0;
        for _ in 0..steps {
            q_update(&mut q, &h, a, r, &h.shifted(1), &params);
            prop_assert_eq!(q.visits(&h, a), last + 1);
            last += 1;
        }
    }
}
