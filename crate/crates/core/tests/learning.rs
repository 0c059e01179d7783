mod common;

use lanechange::config::AppConfig;
use lanechange::dqn::{argmax, select_action, AgentKind, Checkpoint, DqnAgent, TrainConfig};
use lanechange::harness::{evaluate, train};
use lanechange::planners::{Planner, PlannerParams};
use lanechange::sim::{observe, Action, SimConfig, SimState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn analytic_gradients_match_finite_differences() {
    let check = common::gradient_check(12, 1e-5, 7);
    assert!(check.params_checked >= 12 * 348);
    assert!(check.max_rel_error < 1e-4, "max relative error {}", check.max_rel_error);
}

#[test]
fn reported_q_values_pick_the_reported_actions() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(select_action(&[0.851f32, 0.841, 0.829, 0.844], 0.0, &mut rng), Action::Accelerate.index());
    assert_eq!(select_action(&[1.030f32, 1.042, 1.043, 1.036], 0.0, &mut rng), Action::Decelerate.index());
}

proptest! {
    #[test]
    fn greedy_choice_ignores_a_common_shift(
        steps in proptest::collection::vec(-40i32..40, 4..=5),
        shift in -800i32..800,
        seed in any::<u64>(),
    ) {
        // Multiples of 1/8 keep every sum exact, so ties survive the shift.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q: Vec<f64> = steps.iter().map(|&s| s as f64 / 8.0).collect();
        let shifted: Vec<f64> = q.iter().map(|x| x + shift as f64 / 8.0).collect();
        prop_assert_eq!(select_action(&q, 0.0, &mut rng), select_action(&shifted, 0.0, &mut rng));
        prop_assert_eq!(select_action(&q, 0.0, &mut rng), argmax(&q));
    }
}

struct Idle;

impl Planner for Idle {
    fn suggest(&mut self, _: &SimState) -> Action {
        Action::NoAction
    }
}

fn small_train_config() -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16, 16],
        learn_start: 64,
        ..TrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn option_head_is_transparent_when_unused(
        indices in proptest::collection::vec(0usize..4, 1..300),
        seed in 0u64..1000,
    ) {
        let cfg = SimConfig::default();
        let mut four = DqnAgent::new(AgentKind::Primitive, small_train_config(), PlannerParams::default(), 1).unwrap();
        let mut five = DqnAgent::new(AgentKind::OursP1, small_train_config(), PlannerParams::default(), 1).unwrap();
        five.set_planner(Some(Box::new(Idle)));
        let mut a = SimState::reset(&cfg, seed).unwrap();
        let mut b = a.clone();
        for &i in &indices {
            let out_a = a.step(four.resolve_action(i, &a).unwrap()).unwrap();
            let out_b = b.step(five.resolve_action(i, &b).unwrap()).unwrap();
            prop_assert_eq!(out_a.reward.to_bits(), out_b.reward.to_bits());
            prop_assert_eq!(&a, &b);
            if out_a.done {
                break;
            }
        }
        prop_assert_eq!(five.resolve_action(4, &b).unwrap(), Action::NoAction);
    }
}

fn small_app() -> AppConfig {
    AppConfig {
        train: small_train_config(),
        ..AppConfig::default()
    }
}

#[test]
fn training_is_deterministic_for_a_seed() {
    let app = small_app();
    for kind in [AgentKind::Primitive, AgentKind::OursP1] {
        let a = train(&app, kind, 5, 20, None).unwrap();
        let b = train(&app, kind, 5, 20, None).unwrap();
        assert!(a.agent.grad_steps() > 0);
        assert_eq!(a.metrics, b.metrics);
        let bits = |r: &lanechange::harness::TrainResult| r.agent.online().flat().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = train(&app, kind, 6, 20, None).unwrap();
        assert_ne!(a.metrics, c.metrics);
    }
}

#[test]
fn checkpoint_round_trip_preserves_greedy_behavior() {
    let app = small_app();
    let dir = tempfile::tempdir().unwrap();
    let trained = train(&app, AgentKind::OursP1, 2, 15, Some(dir.path())).unwrap();
    let mut original = trained.agent;
    let mut loaded = Checkpoint::load(&dir.path().join("final.json")).unwrap().restore().unwrap();
    for seed in 0..100 {
        let state = common::rollout_scene(seed);
        let grid = observe(&state);
        let q0 = original.q_values(&grid);
        let q1 = loaded.q_values(&grid);
        assert_eq!(q0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), q1.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        original.begin_episode();
        loaded.begin_episode();
        let i = argmax(&q0);
        assert_eq!(original.resolve_action(i, &state).unwrap(), loaded.resolve_action(i, &state).unwrap());
    }
    let e0 = evaluate(&app.sim, &mut original, 10, 3).unwrap();
    let e1 = evaluate(&app.sim, &mut loaded, 10, 3).unwrap();
    assert_eq!(e0, e1);
}

#[test]
fn training_writes_metrics_curve_and_checkpoints() {
    let mut app = small_app();
    app.train.checkpoint_every = 5;
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = train(&app, AgentKind::Primitive, 0, 12, Some(&out)).unwrap();
    let metrics = std::fs::read_to_string(out.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 12);
    let first: lanechange::harness::EpisodeMetrics = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    assert_eq!(first, r.metrics[0]);
    for name in ["checkpoint_5.json", "checkpoint_10.json", "final.json", "curve.tsv"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert!(!out.join("checkpoint_15.json").exists());
}

#[test]
fn zero_episode_run_writes_an_empty_metrics_file() {
    let dir = tempfile::tempdir().unwrap();
    let r = train(&small_app(), AgentKind::OursP1, 0, 0, Some(dir.path())).unwrap();
    assert!(r.episodes.is_empty());
    assert_eq!(std::fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap(), "");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("file");
    std::fs::write(&file, "x").unwrap();
    let err = train(&small_app(), AgentKind::Primitive, 0, 1, Some(&file.join("sub"))).err().unwrap();
    assert_eq!(err.category(), "io");
}
