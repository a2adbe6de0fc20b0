use awi_core::belief::{Belief, ChannelParams, ObservationLevel};
use awi_core::index::{
    affine_value, approx_action_values, approx_whittle, beta_bound, expansion_coeffs,
    first_crossing_time, imperfect_whittle, CrossingTime, Discount, IndexKind, IterationDepth,
};
use awi_core::oracle::suites::brute_force_crossing;
use awi_core::oracle::{Oracle, ThresholdScan};
use awi_core::policy::{select, BeliefVector, PolicySpec};
use awi_core::sim::{run_episode, stream_rng, InitialBelief, StreamTag, SystemConfig};
use proptest::prelude::*;

fn transitions() -> impl Strategy<Value = (f64, f64)> {
    (0.02f64..0.98, 0.02f64..0.98).prop_filter("p01 != p11", |(a, b)| (a - b).abs() >= 0.01)
}

/// Level likelihoods as `(P(i|poor), P(i|good))`, each column summing to 1.
fn observation_model() -> impl Strategy<Value = Vec<ObservationLevel>> {
    prop_oneof![
        Just(vec![ObservationLevel::new(1.0, 1.0)]),
        (0.01f64..0.99, 0.01f64..0.99).prop_map(|(a, b)| vec![
            ObservationLevel::new(a, b),
            ObservationLevel::new(1.0 - a, 1.0 - b),
        ]),
        (0.05f64..0.9, 0.05f64..0.9, 0.05f64..0.9, 0.05f64..0.9).prop_map(|(a, b, c, d)| {
            let (a, c) = (a * 0.5, c * 0.5);
            let (b, d) = (b * 0.5, d * 0.5);
            vec![
                ObservationLevel::new(a, c),
                ObservationLevel::new(b, d),
                ObservationLevel::new(1.0 - a - b, 1.0 - c - d),
            ]
        }),
    ]
}

fn channel() -> impl Strategy<Value = ChannelParams> {
    (transitions(), observation_model(), 0.1f64..2.0)
        .prop_map(|((p01, p11), obs, b)| ChannelParams::new(p01, p11, obs, b).unwrap())
}

fn informative_channel() -> impl Strategy<Value = ChannelParams> {
    (transitions(), 0.01f64..0.49, 0.51f64..0.99, 0.1f64..2.0).prop_map(|((p01, p11), a, b, t)| {
        let obs = vec![
            ObservationLevel::new(1.0 - a, 1.0 - b),
            ObservationLevel::new(a, b),
        ];
        ChannelParams::new(p01, p11, obs, t).unwrap()
    })
}

fn belief() -> impl Strategy<Value = Belief> {
    (0.0f64..=1.0).prop_map(|w| Belief::new(w).unwrap())
}

fn discount() -> impl Strategy<Value = Discount> {
    (0.01f64..0.99).prop_map(|b| Discount::new(b).unwrap())
}

fn depth() -> impl Strategy<Value = IterationDepth> {
    (0u32..=4).prop_map(|n| IterationDepth::new(n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn observation_probabilities_sum_to_one(ch in channel(), w in belief()) {
        let total: f64 = (1..=ch.levels()).map(|i| ch.observation_prob(w, i).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_active_update_is_passive_update(ch in channel(), w in belief()) {
        // Averaging the posterior over the CQI report recovers the prior drift.
        let mean: f64 = (1..=ch.levels())
            .map(|i| ch.observation_prob(w, i).unwrap() * ch.active_update(w, i).unwrap().value())
            .sum();
        prop_assert!((mean - ch.passive_update(w).value()).abs() < 1e-12);
    }

    #[test]
    fn updates_stay_between_transition_probabilities(ch in channel(), w in belief(), k in 1u64..50) {
        let lo = ch.p01().min(ch.p11()) - 1e-12;
        let hi = ch.p01().max(ch.p11()) + 1e-12;
        for x in [ch.passive_update(w), ch.passive_update_k(w, k)] {
            prop_assert!(x.value() >= lo && x.value() <= hi);
        }
        for i in 1..=ch.levels() {
            let x = ch.active_update(w, i).unwrap().value();
            prop_assert!(x >= lo && x <= hi);
        }
    }

    #[test]
    fn k_step_update_composes(ch in channel(), w in belief(), a in 0u64..60, b in 0u64..60) {
        let split = ch.passive_update_k(ch.passive_update_k(w, a), b);
        let whole = ch.passive_update_k(w, a + b);
        prop_assert!((split.value() - whole.value()).abs() < 1e-12);
    }

    #[test]
    fn steady_state_is_fixed_point(ch in channel()) {
        let s = ch.steady_state();
        prop_assert!((ch.passive_update(s).value() - s.value()).abs() < 1e-12);
        prop_assert!((ch.passive_update_k(Belief::ZERO, 5000).value() - s.value()).abs() < 1e-12);
    }

    #[test]
    fn crossing_time_matches_definition(ch in channel(), w in belief(), t in belief()) {
        prop_assert_eq!(first_crossing_time(&ch, w, t), brute_force_crossing(&ch, w, t));
    }

    #[test]
    fn continuation_weights_sum_to_discounted_activation(
        ch in channel(), beta in discount(), w in belief(), t in belief()
    ) {
        let e = expansion_coeffs(&ch, beta, w, t);
        let b = beta.value();
        match e.crossing {
            CrossingTime::Infinite => {
                prop_assert_eq!(e.b1, 1.0 / (1.0 - b));
                prop_assert!(e.b3.iter().all(|&x| x == 0.0));
            }
            CrossingTime::Finite(l) => {
                let sum: f64 = e.b3.iter().sum();
                prop_assert!((sum - b.powi(l as i32 + 1)).abs() < 1e-12);
                prop_assert!((e.b1 + e.b2 / (1.0 - b) - 1.0 / (1.0 - b)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn one_more_unrolling_moves_estimate_by_at_most_beta(
        ch in channel(), beta in discount(), w in belief(), t in belief()
    ) {
        let k0 = affine_value(&ch, beta, w, t, IterationDepth::ZERO);
        let k1 = affine_value(&ch, beta, w, t, IterationDepth::new(1).unwrap());
        let b = beta.value();
        prop_assert!((k1.k - k0.k).abs() <= b * k0.k.abs().max(1.0 / (1.0 - b)) + 1e-12);
        prop_assert!((k1.a - k0.a).abs() <= b + 1e-12);
    }

    #[test]
    fn solved_index_equalizes_approximate_action_values(
        ch in channel(), beta in discount(), w in belief(), n in depth()
    ) {
        let r = approx_whittle(&ch, beta, w, n);
        if r.kind == IndexKind::ApproxWhittle {
            let (idle, used) = approx_action_values(&ch, beta, w, n, r.value);
            prop_assert!((idle - used).abs() <= 1e-9 * (1.0 + idle.abs()));
        } else {
            prop_assert_eq!(r.value, w.value() * ch.throughput());
        }
    }

    #[test]
    fn depth_zero_is_the_imperfect_index(ch in channel(), beta in discount(), w in belief()) {
        let a = approx_whittle(&ch, beta, w, IterationDepth::ZERO);
        let b = imperfect_whittle(&ch, beta, w);
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        prop_assert_eq!(a.kind, b.kind);
    }

    #[test]
    fn uninformative_index_is_expected_reward(
        (p01, p11) in transitions(), tp in 0.1f64..2.0, beta in discount(), w in belief(), n in depth()
    ) {
        let ch = ChannelParams::uninformative(p01, p11, tp).unwrap();
        let r = approx_whittle(&ch, beta, w, n);
        prop_assert!((r.value - w.value() * tp).abs() < 1e-12);
    }

    #[test]
    fn index_is_scale_equivariant(
        ch in channel(), beta in discount(), u in belief(), v in belief(), n in depth(), c in 0.1f64..10.0
    ) {
        let scaled = ch.with_throughput(ch.throughput() * c).unwrap();
        let (iu, iv) = (approx_whittle(&ch, beta, u, n), approx_whittle(&ch, beta, v, n));
        let (su, sv) = (approx_whittle(&scaled, beta, u, n), approx_whittle(&scaled, beta, v, n));
        let tol = 1e-12 * (1.0 + iu.value.abs().max(iv.value.abs())) * c;
        prop_assert!((su.value - c * iu.value).abs() <= tol);
        prop_assert!((sv.value - c * iv.value).abs() <= tol);
        if (iu.value - iv.value).abs() > 1e-9 {
            prop_assert_eq!(iu.value > iv.value, su.value > sv.value);
        }
    }

    #[test]
    fn index_evaluation_is_deterministic(ch in channel(), beta in discount(), w in belief(), n in depth()) {
        let a = approx_whittle(&ch, beta, w, n);
        let b = approx_whittle(&ch, beta, w, n);
        prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn belief_zero_index_within_one_throughput(
        ch in informative_channel(), w_frac in 0.05f64..1.0, n in depth()
    ) {
        prop_assume!(ch.correlation() > 0.0);
        let beta = Discount::new(beta_bound(&ch) * w_frac).unwrap();
        let r = approx_whittle(&ch, beta, Belief::ZERO, n);
        prop_assert!(r.value >= -1e-12 && r.value <= ch.throughput() + 1e-12, "{:?}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn horizon_value_is_max_of_actions(
        ch in informative_channel(), beta in discount(), m in -1.0f64..2.0, w in belief(), t in 0u32..7
    ) {
        let v = Oracle::default().finite_horizon_value(&ch, beta, m, w, t).unwrap();
        prop_assert_eq!(v.total, v.passive.max(v.active));
    }

    #[test]
    fn passive_time_is_bounded(
        ch in informative_channel(), beta in discount(), m in -1.0f64..2.0, w in belief(), t in 0u32..7
    ) {
        let d = Oracle::default().passive_time(&ch, beta, m, w, t).unwrap().passive_t;
        let b = beta.value();
        prop_assert!(d >= 0.0 && d <= (1.0 - b.powi(t as i32)) / (1.0 - b) + 1e-12);
    }

    #[test]
    fn extreme_subsidies_fix_the_action(ch in informative_channel(), beta in discount(), t in 1u32..6) {
        let oracle = Oracle::default();
        let span = ch.throughput() / (1.0 - beta.value());
        let high = oracle.threshold_scan(&ch, beta, 1.01 * span, t, 21).unwrap();
        let low = oracle.threshold_scan(&ch, beta, -0.01, t, 21).unwrap();
        prop_assert!(high.threshold.unwrap() >= 1.0);
        prop_assert!(low.threshold.unwrap() <= 0.0);
    }

    #[test]
    fn scan_threshold_separates_actions(pattern in prop::collection::vec(any::<bool>(), 3..30)) {
        let scan = ThresholdScan::from_actions(0.0, &pattern);
        let h = 1.0 / (pattern.len() - 1) as f64;
        if let Some(th) = scan.threshold {
            for (j, &active) in pattern.iter().enumerate() {
                prop_assert_eq!(active, j as f64 * h > th);
            }
        } else {
            prop_assert!(scan.structure_violation);
        }
    }
}

fn system() -> impl Strategy<Value = (Vec<ChannelParams>, Vec<Belief>)> {
    prop::collection::vec((informative_channel(), belief()), 2..7).prop_map(|v| v.into_iter().unzip())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selection_picks_exactly_m_distinct_channels(
        (channels, beliefs) in system(), m_frac in 0.0f64..1.0, n in depth(), beta in discount(), seed in any::<u64>()
    ) {
        let active = 1 + ((channels.len() - 1) as f64 * m_frac) as usize % (channels.len() - 1);
        let bv = BeliefVector::new(&channels, beliefs).unwrap();
        let mut rng = stream_rng(seed, 0, StreamTag::Policy);
        for policy in [PolicySpec::myopic(), PolicySpec::awi(n), PolicySpec::random()] {
            let chosen = select(&policy, &channels, &bv, active, beta, &mut rng).unwrap();
            let ids = chosen.channels();
            prop_assert_eq!(ids.len(), active);
            prop_assert!(ids.windows(2).all(|p| p[0] < p[1]));
            prop_assert!(ids.iter().all(|&c| c < channels.len()));
        }
    }

    #[test]
    fn selection_ignores_common_throughput_scale(
        (channels, beliefs) in system(), n in depth(), beta in discount(), c in 0.1f64..10.0
    ) {
        let scaled: Vec<ChannelParams> = channels
            .iter()
            .map(|ch| ch.with_throughput(ch.throughput() * c).unwrap())
            .collect();
        let bv = BeliefVector::new(&channels, beliefs).unwrap();
        let mut rng = stream_rng(0, 0, StreamTag::Policy);
        for policy in [PolicySpec::myopic(), PolicySpec::awi(n)] {
            let a = select(&policy, &channels, &bv, 1, beta, &mut rng).unwrap();
            let b = select(&policy, &scaled, &bv, 1, beta, &mut rng).unwrap();
            // Scaling can only reorder channels whose indices agree to rounding.
            if a != b {
                let idx = |chs: &[ChannelParams], k: usize| match policy.iterations() {
                    Some(n) => approx_whittle(&chs[k], beta, bv.as_slice()[k], IterationDepth::new(n).unwrap()).value,
                    None => bv.as_slice()[k].value() * chs[k].throughput(),
                };
                let (x, y) = (a.channels()[0], b.channels()[0]);
                prop_assert!((idx(&channels, x) - idx(&channels, y)).abs() < 1e-12 * (1.0 + idx(&channels, x).abs()));
            }
        }
    }

    #[test]
    fn single_myopic_choice_is_argmax((channels, beliefs) in system(), beta in discount()) {
        let bv = BeliefVector::new(&channels, beliefs.clone()).unwrap();
        let mut rng = stream_rng(0, 0, StreamTag::Policy);
        let chosen = select(&PolicySpec::myopic(), &channels, &bv, 1, beta, &mut rng).unwrap();
        let rewards: Vec<f64> = channels.iter().zip(&beliefs).map(|(c, w)| w.value() * c.throughput()).collect();
        let best = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first_best = rewards.iter().position(|&r| r == best).unwrap();
        prop_assert_eq!(chosen.channels(), &[first_best]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn discounted_return_is_bounded(
        (channels, _) in system(), m_frac in 0.0f64..1.0, beta in discount(), horizon in 1u32..40, n in depth(), run in 0u32..4
    ) {
        let active = 1 + ((channels.len() - 1) as f64 * m_frac) as usize % (channels.len() - 1);
        let mut best: Vec<f64> = channels.iter().map(ChannelParams::throughput).collect();
        best.sort_by(|a, b| b.total_cmp(a));
        let b = beta.value();
        let cap = best[..active].iter().sum::<f64>() * (1.0 - b.powi(horizon as i32)) / (1.0 - b);
        let config = SystemConfig {
            channels,
            active,
            beta,
            horizon,
            initial_belief: InitialBelief::SteadyState,
            runs: 4,
            master_seed: 9,
        };
        for policy in [PolicySpec::myopic(), PolicySpec::awi(n)] {
            let g = run_episode(&config, &policy, run, false).unwrap().discounted_return;
            prop_assert!(g >= 0.0 && g <= cap + 1e-12, "G={} cap={}", g, cap);
        }
    }
}
