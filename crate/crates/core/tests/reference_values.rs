use awi_core::belief::{Belief, ChannelParams, ObservationLevel};
use awi_core::index::{approx_whittle, imperfect_whittle, Discount, IndexKind, IterationDepth};
use awi_core::policy::{select, BeliefVector, PolicySpec};
use awi_core::presets::SystemPreset;
use awi_core::sim::{
    run_episode, run_experiment, sample_cqi, sample_initial, step_state, stream_rng,
    ChannelState, InitialBelief, StreamTag, SystemConfig,
};

fn binary_cqi(p01: f64, p11: f64, throughput: f64) -> ChannelParams {
    ChannelParams::new(
        p01,
        p11,
        vec![
            ObservationLevel::new(0.9, 0.1),
            ObservationLevel::new(0.1, 0.9),
        ],
        throughput,
    )
    .unwrap()
}

/// `|count − n·p| ≤ 3·sqrt(n·p·(1−p))`.
fn within_three_sigma(count: u64, n: u64, p: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= 3.0 * sd
}

#[test]
fn imperfect_index_at_steady_state_by_hand() {
    // p01 = 0.1, p11 = 0.9, β = 0.2, ω = ω_s = 0.5, threshold at ω.
    // Idle: T(0.5) = 0.5 never exceeds 0.5, so V̂(T(ω)) = m/(1−β).
    // Used: CQI 1 (prob 0.5) leads to 0.18, again never above 0.5;
    //       CQI 2 (prob 0.5) leads to 0.82, used at once, V̂ = 0.82.
    // m + β·m/(1−β) = 0.5 + β·(0.5·m/(1−β) + 0.5·0.82)
    //   ⇒ m·(1 − 0.5β)/(1−β) = 0.5 + 0.41β
    let beta = 0.2;
    let expected = (0.5 + 0.41 * beta) * (1.0 - beta) / (1.0 - 0.5 * beta);
    let ch = binary_cqi(0.1, 0.9, 1.0);
    let r = imperfect_whittle(&ch, Discount::new(beta).unwrap(), Belief::new(0.5).unwrap());
    assert_eq!(r.kind, IndexKind::ApproxWhittle);
    assert!((r.value - expected).abs() < 1e-12, "{} vs {expected}", r.value);
    assert!((expected - 0.517_333_333_333_333_3).abs() < 1e-15);
}

#[test]
fn first_slot_choice_matches_exhaustive_evaluation() {
    let channels = SystemPreset::by_name("system-1").unwrap().channels();
    let beta = Discount::new(0.2304).unwrap();
    let depth = IterationDepth::new(2).unwrap();
    let beliefs = BeliefVector::steady_state(&channels);
    let mut best = (0, f64::NEG_INFINITY);
    for (n, (ch, &w)) in channels.iter().zip(beliefs.as_slice()).enumerate() {
        let v = approx_whittle(ch, beta, w, depth).value;
        if v > best.1 {
            best = (n, v);
        }
    }
    let mut rng = stream_rng(0, 0, StreamTag::Policy);
    let chosen = select(&PolicySpec::awi(depth), &channels, &beliefs, 1, beta, &mut rng).unwrap();
    assert_eq!(chosen.channels(), &[best.0]);
}

#[test]
fn initial_state_frequency_matches_steady_state() {
    let ch = binary_cqi(0.3, 0.7, 1.0);
    let s = ch.steady_state();
    let mut rng = stream_rng(1, 0, StreamTag::State);
    let n = 100_000;
    let good = (0..n)
        .filter(|_| sample_initial(s, &mut rng).0 == ChannelState::Good)
        .count() as u64;
    assert!(within_three_sigma(good, n, s.value()), "{good}");
}

#[test]
fn sticky_good_state_rarely_flips() {
    let ch = binary_cqi(0.5, 0.999_999, 1.0);
    let mut rng = stream_rng(2, 0, StreamTag::State);
    let flips = (0..1_000_000)
        .filter(|_| step_state(&ch, ChannelState::Good, &mut rng) == ChannelState::Poor)
        .count();
    // Poisson(1): more than 10 flips has probability below 1e-7.
    assert!(flips <= 10, "{flips}");
}

#[test]
fn poor_state_transition_frequency() {
    let ch = binary_cqi(0.5, 0.8, 1.0);
    let mut rng = stream_rng(3, 0, StreamTag::State);
    let n = 1_000_000;
    let good = (0..n)
        .filter(|_| step_state(&ch, ChannelState::Poor, &mut rng).is_good())
        .count() as u64;
    assert!(within_three_sigma(good, n, 0.5), "{good}");
}

#[test]
fn long_chain_occupancy_matches_steady_state() {
    let ch = binary_cqi(0.2, 0.6, 1.0);
    let s = ch.steady_state().value();
    let mut rng = stream_rng(4, 0, StreamTag::State);
    let n = 1_000_000u64;
    let mut state = ChannelState::Poor;
    let mut good = 0u64;
    for _ in 0..n {
        state = step_state(&ch, state, &mut rng);
        good += state.is_good() as u64;
    }
    // Lag correlations inflate the variance of the occupancy by (1+p_d)/(1−p_d).
    let pd = ch.correlation();
    let sd = (n as f64 * s * (1.0 - s) * (1.0 + pd) / (1.0 - pd)).sqrt();
    assert!((good as f64 - n as f64 * s).abs() <= 3.0 * sd, "{good}");
}

#[test]
fn cqi_frequencies_follow_the_observation_column() {
    let ch = binary_cqi(0.2, 0.6, 1.0);
    let mut rng = stream_rng(5, 0, StreamTag::Observation);
    let n = 100_000;
    let level2 = (0..n)
        .filter(|_| sample_cqi(&ch, ChannelState::Good, &mut rng) == 2)
        .count() as u64;
    assert!(within_three_sigma(level2, n, 0.9), "{level2}");
}

fn config(channels: Vec<ChannelParams>, beta: f64, horizon: u32, runs: u32) -> SystemConfig {
    SystemConfig {
        channels,
        active: 1,
        beta: Discount::new(beta).unwrap(),
        horizon,
        initial_belief: InitialBelief::SteadyState,
        runs,
        master_seed: 2024,
    }
}

#[test]
fn pinned_good_channels_earn_a_geometric_sum() {
    let ch = binary_cqi(0.5, 0.999_999, 1.0);
    let mut c = config(vec![ch.clone(), ch], 0.5, 3, 1);
    c.initial_belief = InitialBelief::Explicit(vec![Belief::ONE, Belief::ONE]);
    for policy in [PolicySpec::myopic(), PolicySpec::awi(IterationDepth::new(2).unwrap())] {
        let g = run_episode(&c, &policy, 0, false).unwrap().discounted_return;
        assert_eq!(g, 1.75);
    }
}

#[test]
fn single_slot_return_is_chosen_channel_reward() {
    let channels = SystemPreset::by_name("system-4").unwrap().channels();
    let c = config(channels, 0.5, 1, 50);
    for run in 0..50 {
        let ep = run_episode(&c, &PolicySpec::myopic(), run, true).unwrap();
        let slot = &ep.trace.unwrap().slots[0];
        let n = slot.actions[0];
        let expected = if slot.states[n].is_good() {
            c.channels[n].throughput()
        } else {
            0.0
        };
        assert_eq!(ep.discounted_return, expected);
    }
}

#[test]
fn idle_channels_keep_evolving() {
    let channels = SystemPreset::by_name("system-2").unwrap().channels();
    let c = config(channels.clone(), 0.3968, 60, 200);
    // Transition counts on idle channels, split by the starting state.
    let (mut from_good, mut good_good, mut from_poor, mut poor_good) = (0u64, 0u64, 0u64, 0u64);
    let target = 0;
    for run in 0..c.runs {
        let trace = run_episode(&c, &PolicySpec::myopic(), run, true)
            .unwrap()
            .trace
            .unwrap();
        for pair in trace.slots.windows(2) {
            if pair[0].actions.contains(&target) {
                continue;
            }
            let (now, next) = (pair[0].states[target], pair[1].states[target]);
            if now.is_good() {
                from_good += 1;
                good_good += next.is_good() as u64;
            } else {
                from_poor += 1;
                poor_good += next.is_good() as u64;
            }
        }
    }
    let ch = &channels[target];
    assert!(from_good > 1000 && from_poor > 1000);
    assert!(within_three_sigma(good_good, from_good, ch.p11()), "{good_good}/{from_good}");
    assert!(within_three_sigma(poor_good, from_poor, ch.p01()), "{poor_good}/{from_poor}");
}

#[test]
fn channel_realisation_does_not_depend_on_policy() {
    let channels = SystemPreset::by_name("system-3").unwrap().channels();
    let c = config(channels, 0.5, 40, 5);
    for run in 0..c.runs {
        let a = run_episode(&c, &PolicySpec::myopic(), run, true).unwrap().trace.unwrap();
        let b = run_episode(&c, &PolicySpec::random(), run, true).unwrap().trace.unwrap();
        let states = |t: &awi_core::sim::EpisodeTrace| {
            t.slots.iter().map(|s| s.states.clone()).collect::<Vec<_>>()
        };
        assert_eq!(states(&a), states(&b));
    }
}

#[test]
fn statistics_do_not_depend_on_thread_count() {
    let channels = SystemPreset::by_name("system-1").unwrap().channels();
    let c = config(channels, 0.2304, 30, 64);
    let policies = [PolicySpec::myopic(), PolicySpec::awi(IterationDepth::new(2).unwrap())];
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&c, &policies).unwrap())
    };
    let one = run_with(1);
    let many = run_with(4);
    assert_eq!(one, many);
    for (a, b) in one.iter().zip(&many) {
        assert_eq!(a.mean_return.to_bits(), b.mean_return.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }
}
