use precedence_bandit::instances::{
    bernoulli_pair, markov_walk, one_arm_per_group, super_efficiency, PAIR_TRUE, SUPER_B, SUPER_D,
};
use precedence_bandit::markov::sample_transition;
use precedence_bandit::sim::{
    monte_carlo, run_episode, super_efficiency_check, switching_report, Instance, PolicyKind, SimError,
};
use precedence_bandit::strategy::{Action, LikelihoodModel, PaperStrategy, Stage, StrategyConfig, StrategyError};
use precedence_bandit::{ArmId, ParameterGrid};

const POLICIES: [PolicyKind; 3] = [PolicyKind::Paper, PolicyKind::Greedy, PolicyKind::Uniform];

fn config(horizon: u64, n0: usize, n1: usize) -> StrategyConfig {
    StrategyConfig { horizon, n0, n1, delta: 0.5, prior_weights: None }
}

#[test]
fn estimation_can_use_the_whole_budget() {
    let inst = Instance::new(bernoulli_pair()).unwrap();
    let e = run_episode(&inst, PAIR_TRUE, &config(10, 5, 2), PolicyKind::Paper, 1).unwrap();
    assert_eq!(e.counts, vec![5, 5]);
    assert!(e.stage_log.iter().all(|&s| s == Stage::Estimation));
    assert_eq!(e.estimation_switches, 1);
}

#[test]
fn single_arm_has_no_regret_or_switches() {
    let inst = Instance::new(markov_walk()).unwrap();
    for policy in POLICIES {
        let e = run_episode(&inst, 1, &StrategyConfig::with_default_schedules(500, 1), policy, 2).unwrap();
        assert_eq!(e.regret, 0.0);
        assert_eq!(e.switches, 0);
        assert_eq!(e.counts, vec![500]);
    }
}

#[test]
fn episodes_replay_and_satisfy_invariants() {
    for model in [bernoulli_pair(), one_arm_per_group(), super_efficiency()] {
        let inst = Instance::new(model).unwrap();
        let j1 = inst.grid.arms_per_group()[0];
        for theta in 0..inst.grid.point_count() {
            for policy in POLICIES {
                for seed in 0..6 {
                    let n = 400 + 100 * seed;
                    let cfg = StrategyConfig::with_default_schedules(n, j1);
                    let e = run_episode(&inst, theta, &cfg, policy, seed).unwrap();
                    assert_eq!(e, run_episode(&inst, theta, &cfg, policy, seed).unwrap());
                    assert_eq!(e.counts.iter().sum::<u64>(), n);
                    assert!(e.regret >= 0.0);
                    assert!(e.switches < n);
                    assert!(e.respects_precedence(), "{policy} at point {theta}");
                    if policy == PolicyKind::Paper {
                        assert_eq!(e.stage_log.len() as u64, n);
                        if let Some(first) = e.stage_log.iter().position(|&s| s == Stage::Final) {
                            assert!(e.stage_log[first..].iter().all(|&s| s == Stage::Final));
                        }
                    }
                }
            }
        }
    }
}

/// Drives the rule by hand and checks that rejections are never undone.
#[test]
fn rejections_are_permanent() {
    let model = super_efficiency();
    let grid = ParameterGrid::from_model(&model).unwrap();
    let lik = LikelihoodModel::new(&model);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5);
    for theta in 0..grid.point_count() {
        let arms = lik.arms().to_vec();
        let mut states = vec![0usize; arms.len()];
        let mut p = PaperStrategy::new(&grid, &lik, StrategyConfig::with_default_schedules(5_000, 1), &states).unwrap();
        let mut rejected = p.state().rejected_params.clone();
        let mut alive = p.state().unrejected.clone();
        while let Action::Pull(arm) = p.next_action().unwrap() {
            let idx = lik.index(arm).unwrap();
            let kernel = model.arm(arm).kernel(theta).unwrap();
            states[idx] = sample_transition(kernel, states[idx], &mut rng);
            p.observe(arm, states[idx]).unwrap();
            let s = p.state();
            assert!(s.rejected_params.is_superset(&rejected));
            assert!(s.unrejected.iter().zip(&alive).all(|(now, before)| now.is_subset(before)));
            rejected = s.rejected_params.clone();
            alive = s.unrejected.clone();
        }
    }
}

#[test]
fn protocol_misuse_is_an_error() {
    let model = bernoulli_pair();
    let grid = ParameterGrid::from_model(&model).unwrap();
    let lik = LikelihoodModel::new(&model);
    let mut p = PaperStrategy::new(&grid, &lik, config(100, 3, 1), &[0, 0]).unwrap();
    let Action::Pull(arm) = p.next_action().unwrap() else { panic!("budget left") };
    assert_eq!(p.next_action(), Err(StrategyError::AwaitingObservation(arm)));
    let other = ArmId::new(0, 1 - arm.arm);
    assert!(matches!(p.observe(other, 0), Err(StrategyError::UnexpectedObservation { .. })));
    assert!(matches!(p.observe(arm, 7), Err(StrategyError::UnknownState { .. })));
    p.observe(arm, 1).unwrap();
    assert!(matches!(
        PaperStrategy::new(&grid, &lik, config(100, 1, 2), &[0, 0]),
        Err(StrategyError::InvalidConfig(_))
    ));
}

#[test]
fn standard_errors_shrink_with_replications() {
    let inst = Instance::new(bernoulli_pair()).unwrap();
    let se =
        |reps| monte_carlo(&inst, PAIR_TRUE, &[2_000], reps, PolicyKind::Uniform, 3).unwrap().curve.rows[0].se_regret;
    let ratio = se(400) / se(100);
    assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
}

#[test]
fn four_stage_rule_beats_uniform_and_switches_less() {
    for (model, theta) in [(bernoulli_pair(), PAIR_TRUE), (super_efficiency(), SUPER_B), (one_arm_per_group(), 1)] {
        let inst = Instance::new(model).unwrap();
        let horizons = [1_000, 10_000];
        let paper = monte_carlo(&inst, theta, &horizons, 100, PolicyKind::Paper, 4).unwrap();
        let uniform = monte_carlo(&inst, theta, &horizons, 100, PolicyKind::Uniform, 4).unwrap();
        let (p, u) = (paper.curve.rows.last().unwrap(), uniform.curve.rows.last().unwrap());
        assert!(p.regret_per_log < u.regret_per_log, "{} vs {}", p.regret_per_log, u.regret_per_log);
        // round-robin only alternates when some group has two arms
        if inst.grid.arms_per_group().iter().any(|&j| j > 1) {
            for (p, u) in paper.curve.rows.iter().zip(&uniform.curve.rows) {
                assert!(p.mean_switches < u.mean_switches, "N = {}", p.horizon);
            }
        }
        assert!(paper.curve.rows.iter().all(|r| r.mean_regret >= 0.0 && r.se_regret >= 0.0));
    }
}

#[test]
fn single_arm_switching_cost_is_zero() {
    let inst = Instance::new(markov_walk()).unwrap();
    let run = monte_carlo(&inst, 0, &[100, 1_000], 20, PolicyKind::Paper, 1).unwrap();
    assert!(switching_report(&run.curve, 2.5).rows.iter().all(|&(_, c)| c == 0.0));
}

#[test]
fn super_efficiency_needs_an_empty_bad_set() {
    let inst = Instance::new(super_efficiency()).unwrap();
    let err = super_efficiency_check(&inst, SUPER_D, &[100, 1_000], 10, 0).unwrap_err();
    assert!(matches!(err, SimError::NonEmptyBadSet { theta: SUPER_D, .. }));
    let inst = Instance::new(one_arm_per_group()).unwrap();
    for theta in 0..inst.grid.point_count() {
        assert!(super_efficiency_check(&inst, theta, &[100, 200], 4, 0).is_ok());
    }
}

#[test]
fn harness_rejects_bad_setups() {
    let inst = Instance::new(bernoulli_pair()).unwrap();
    assert!(matches!(monte_carlo(&inst, PAIR_TRUE, &[100], 1, PolicyKind::Paper, 0), Err(SimError::Setup(_))));
    assert!(matches!(monte_carlo(&inst, PAIR_TRUE, &[100, 100], 5, PolicyKind::Paper, 0), Err(SimError::Setup(_))));
    assert!(matches!(monte_carlo(&inst, 99, &[100], 5, PolicyKind::Paper, 0), Err(SimError::UnknownPoint(99))));
}
