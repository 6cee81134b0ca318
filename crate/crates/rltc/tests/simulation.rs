//! Cross-module checks: the Monte Carlo engine against the exact
//! distribution oracle on several instances, and determinism of greedy
//! evaluation trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rltc::engine::{run_episode, run_timestep, EpisodeConfig, FailureModel, Roster};
use rltc::harness::{run_repetition, ExperimentConfig};
use rltc::oracle::{expected_success_curve, TrustSchedule};
use rltc::policy::{PolicyKind, PolicySet};
use rltc::topology::Topology;

struct Scenario {
    kind: PolicyKind,
    failure: FailureModel,
    p: f64,
    horizon: usize,
    episodes: usize,
    seed: u64,
}

/// Monte Carlo per-timestep mean success and its standard error.
fn mc_success_curve(
    topology: &Topology,
    roster: &Roster,
    scenario: &Scenario,
) -> (Vec<f64>, Vec<f64>) {
    let mut policy = PolicySet::new(scenario.kind, topology, roster);
    let cfg = EpisodeConfig {
        horizon: scenario.horizon,
        p: scenario.p,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut sums = vec![0.0; scenario.horizon];
    let mut sq_sums = vec![0.0; scenario.horizon];
    for _ in 0..scenario.episodes {
        let (metrics, _) = run_episode(
            topology,
            roster,
            scenario.failure,
            &mut policy,
            None,
            &cfg,
            &mut rng,
        )
        .unwrap();
        for (t, s) in metrics.samples.iter().enumerate() {
            sums[t] += s.success_rate;
            sq_sums[t] += s.success_rate * s.success_rate;
        }
    }
    let n = scenario.episodes as f64;
    let means: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let ses: Vec<f64> = means
        .iter()
        .zip(&sq_sums)
        .map(|(m, sq)| (((sq - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
        .collect();
    (means, ses)
}

fn assert_curves_close(mc: &[f64], ses: &[f64], exact: &[f64], label: &str) {
    for (t, ((m, se), e)) in mc.iter().zip(ses).zip(exact).enumerate() {
        let slack = 3.0 * se.max(1e-9);
        assert!(
            (m - e).abs() <= slack,
            "{label}: t={} mc {m} vs exact {e} (3se {slack})",
            t + 1
        );
    }
}

#[test]
fn engine_matches_oracle_on_mixed_roster_grid() {
    // 3x3 grid with a fixed roster holding two unreliable nodes
    let topology = Topology::grid(3).unwrap();
    let mut flags = vec![true; 9];
    flags[1] = false; // node 2
    flags[6] = false; // node 7
    let roster = Roster::from_reliable_flags(flags).unwrap();
    let horizon = 20;
    let episodes = 30_000;

    for (kind, failure, p, seed) in [
        (PolicyKind::TrustAll, FailureModel::AlwaysZero, 0.9, 11),
        (PolicyKind::Oracle, FailureModel::AlwaysZero, 0.7, 12),
        (PolicyKind::TrustAll, FailureModel::RandomFlip, 0.8, 13),
    ] {
        let schedule = TrustSchedule::for_policy(kind, &topology, &roster, horizon);
        let exact =
            expected_success_curve(&topology, &roster, p, failure, &schedule, horizon).unwrap();
        let scenario = Scenario {
            kind,
            failure,
            p,
            horizon,
            episodes,
            seed,
        };
        let (mc, ses) = mc_success_curve(&topology, &roster, &scenario);
        assert_curves_close(&mc, &ses, &exact, &format!("{kind}/{failure}/p={p}"));
    }
}

#[test]
fn engine_matches_oracle_on_path_graph() {
    // 3-node path with the middle node unreliable
    let topology = Topology::custom(&[(1, 2), (2, 3)], 3).unwrap();
    let roster = Roster::from_reliable_flags(vec![true, false, true]).unwrap();
    let horizon = 15;
    let schedule = TrustSchedule::for_policy(PolicyKind::TrustAll, &topology, &roster, horizon);
    let exact = expected_success_curve(
        &topology,
        &roster,
        0.85,
        FailureModel::AlwaysZero,
        &schedule,
        horizon,
    )
    .unwrap();
    let scenario = Scenario {
        kind: PolicyKind::TrustAll,
        failure: FailureModel::AlwaysZero,
        p: 0.85,
        horizon,
        episodes: 30_000,
        seed: 21,
    };
    let (mc, ses) = mc_success_curve(&topology, &roster, &scenario);
    assert_curves_close(&mc, &ses, &exact, "path3");
}

#[test]
fn greedy_evaluation_trajectories_are_identical_across_episodes() {
    // train briefly, then check that every evaluation episode walks the
    // same trust trajectory even though value draws differ
    let config = ExperimentConfig {
        grid_dim: 3,
        frac_reliable: 0.75,
        noise: 0.2,
        train_episodes: 200,
        eval_episodes: 1,
        seeds: vec![3],
        ..ExperimentConfig::default()
    };
    let trained = run_repetition(&config, 3, false).unwrap();
    let tables = trained.qtables.expect("rltc has tables");

    let topology = Topology::grid(3).unwrap();
    let mut roster_rng = ChaCha8Rng::seed_from_u64(3);
    let roster = Roster::assign(&topology, 0.75, &mut roster_rng);

    let trajectory = |seed: u64| -> Vec<Vec<u32>> {
        let mut policy = PolicySet::with_tables(tables.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state =
            rltc::engine::init_episode(&topology, &roster, 0.8, FailureModel::AlwaysZero, &mut rng);
        let mut masks = Vec::new();
        for _ in 0..30 {
            run_timestep(
                &mut state,
                &topology,
                &roster,
                FailureModel::AlwaysZero,
                &mut policy,
                None,
                &mut rng,
            )
            .unwrap();
            masks.push(topology.nodes().map(|i| state.trust_mask(i)).collect());
        }
        masks
    };

    let a = trajectory(100);
    let b = trajectory(200);
    let c = trajectory(300);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn lockstep_update_is_order_free() {
    // with all trusted sources unanimous the update is certain regardless
    // of rng; mixing in a disagreeing but untrusted source changes nothing
    let topology = Topology::grid(2).unwrap();
    let roster = Roster::all_reliable(4);
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = rltc::engine::SimState::with_full_trust(&topology, vec![1, 1, 1, 0]);
        // nobody trusts node 4 (and node 4 trusts nobody)
        state.set_trust_masks(vec![0b01, 0b01, 0b01, 0b00]);
        let buffers = rltc::engine::receive_phase(&state, &topology, &roster);
        rltc::engine::value_update_phase(
            &mut state,
            &buffers,
            &roster,
            FailureModel::AlwaysZero,
            &mut rng,
        );
        assert_eq!(state.value(1), 1);
        assert_eq!(state.value(2), 1);
        assert_eq!(state.value(3), 1);
        assert_eq!(state.value(4), 0);
    }
}
