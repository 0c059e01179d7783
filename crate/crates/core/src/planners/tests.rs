use super::*;
use crate::sim::{kmh_to_ms, SimConfig, Vehicle, VehicleKind};

fn params() -> PlannerParams {
    PlannerParams::default()
}

fn lane(front_gap: f64, back_gap: f64, front_speed: Option<f64>, back_speed: Option<f64>) -> LaneGaps {
    LaneGaps {
        front_gap,
        back_gap,
        front_speed,
        back_speed,
    }
}

fn view(ego_speed: f64, ego_lane: usize, current: LaneGaps, right: Option<LaneGaps>) -> PlannerView {
    PlannerView {
        ego_speed,
        ego_lane,
        n_lanes: 4,
        lane_changing: false,
        speed_limit: kmh_to_ms(80.0),
        safety_gap: 2.0,
        dt: 0.016,
        current,
        right,
    }
}

fn car(id: u32, cfg: &SimConfig, lane: usize, long_pos: f64, speed: f64) -> Vehicle {
    Vehicle {
        id,
        kind: VehicleKind::Car,
        lane,
        lateral_pos: cfg.lane_center(lane),
        long_pos,
        speed,
        lane_change: None,
        adversarial: false,
    }
}

#[test]
fn quantize_examples() {
    assert_eq!(quantize_accel(2.0, 0.5), Action::Accelerate);
    assert_eq!(quantize_accel(-3.0, 0.5), Action::Decelerate);
    assert_eq!(quantize_accel(0.3, 0.5), Action::NoAction);
    assert_eq!(quantize_accel(0.5, 0.5), Action::NoAction);
}

#[test]
fn p1_switches_right_with_sufficient_gaps() {
    let v = 12.0;
    let gaps = lane(20.0, 20.0, Some(v), Some(v));
    let view = view(v, 1, gaps, Some(gaps));
    assert_eq!(p1_action(&view, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p1_accelerates_to_the_limit_with_empty_lane_ahead() {
    let current = lane(100.0, 100.0, None, None);
    let right = lane(0.0, 0.0, Some(11.0), Some(11.0));
    let view = view(kmh_to_ms(40.0), 1, current, Some(right));
    assert_eq!(p1_action(&view, &params(), &mut PidState::default()), Action::Accelerate);
}

#[test]
fn p1_holds_speed_behind_equal_speed_leader() {
    let v = 12.0;
    let view = view(v, 1, lane(3.0, 100.0, Some(v), None), Some(lane(0.0, 0.0, Some(v), Some(v))));
    assert_eq!(p1_action(&view, &params(), &mut PidState::default()), Action::NoAction);
}

#[test]
fn p1_never_switches_when_a_gap_test_fails() {
    let v = 12.0;
    let ok = 20.0;
    for (cf, rf, rb) in [(5.9, ok, ok), (ok, 5.9, ok), (ok, ok, 5.9)] {
        let view = view(v, 1, lane(cf, ok, Some(v), None), Some(lane(rf, rb, Some(v), Some(v))));
        assert_ne!(p1_action(&view, &params(), &mut PidState::default()), Action::SwitchRight);
    }
    // Rightmost lane: no right neighbor at all.
    let view = view(v, 3, lane(ok, ok, None, None), None);
    assert_ne!(p1_action(&view, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p2_rejects_fast_rear_car() {
    // 8 m gaps pass P1, but a car 30 km/h faster behind closes 16.7 m in 2 s.
    let v = kmh_to_ms(50.0);
    let right = lane(8.0, 8.0, Some(v), Some(v + kmh_to_ms(30.0)));
    let view = view(v, 1, lane(50.0, 50.0, None, None), Some(right));
    assert!(p1_admits(&view, &params()));
    let encroachment = kmh_to_ms(30.0) * 2.0;
    assert!((encroachment - 16.666_666_666_666_668).abs() < 1e-9);
    assert!(8.0 - encroachment < 2.0);
    assert!(!p2_admits(&view, &params()));
    assert_ne!(p2_action(&view, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p2_equals_p1_at_zero_relative_speed() {
    let v = kmh_to_ms(50.0);
    let right = lane(8.0, 8.0, Some(v), Some(v));
    let view = view(v, 1, lane(50.0, 50.0, Some(v), None), Some(right));
    assert_eq!(p2_action(&view, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p2_brakes_behind_slower_leader_when_right_is_blocked() {
    let v = kmh_to_ms(60.0);
    let view = view(
        v,
        1,
        lane(30.0, 100.0, Some(kmh_to_ms(30.0)), None),
        Some(lane(0.0, 0.0, Some(v), Some(v))),
    );
    assert_eq!(p2_action(&view, &params(), &mut PidState::default()), Action::Decelerate);
}

#[test]
fn p2_admitted_set_is_within_p1_admitted_set() {
    let p = params();
    let gaps = [0.0, 2.0, 5.0, 6.0, 7.0, 10.0, 20.0, 50.0, 100.0];
    let speeds = [None, Some(0.0), Some(6.0), Some(12.0), Some(18.0), Some(22.0)];
    let mut admitted_p1 = 0;
    let mut admitted_p2 = 0;
    for &ego in &[0.0, 8.0, 16.0, 22.0] {
        for &cf in &gaps {
            for &rf in &gaps {
                for &rb in &gaps {
                    for &fs in &speeds {
                        for &bs in &speeds {
                            let right = lane(rf, rb, fs, bs);
                            let v = view(ego, 1, lane(cf, 100.0, None, None), Some(right));
                            let a1 = p1_admits(&v, &p);
                            let a2 = p2_admits(&v, &p);
                            assert!(!a2 || a1);
                            admitted_p1 += a1 as usize;
                            admitted_p2 += a2 as usize;
                        }
                    }
                }
            }
        }
    }
    assert!(admitted_p2 > 0 && admitted_p2 < admitted_p1);
}

#[test]
fn planners_are_deterministic() {
    let cfg = SimConfig::default();
    for seed in 0..20 {
        let state = crate::sim::SimState::reset(&cfg, seed).unwrap();
        for kind in [PlannerKind::P1, PlannerKind::P2, PlannerKind::P3] {
            let mut a = ClassicalPlanner::new(kind, params());
            let mut b = ClassicalPlanner::new(kind, params());
            assert_eq!(a.suggest(&state), b.suggest(&state));
            assert_eq!(a.pid(), b.pid());
        }
    }
}

#[test]
fn lane_gaps_are_edge_to_edge() {
    let cfg = SimConfig::default();
    let ego = car(0, &cfg, 1, 0.0, 12.0);
    let others = vec![
        car(1, &cfg, 1, 14.0, 10.0),
        car(2, &cfg, 1, 30.0, 9.0),
        car(3, &cfg, 2, -9.0, 15.0),
        car(4, &cfg, 2, 2.0, 13.0),
    ];
    let state = crate::sim::SimState::from_parts(&cfg, 0, ego, others).unwrap();
    let view = PlannerView::from_state(&state);
    assert_eq!(view.current.front_gap, 10.0);
    assert_eq!(view.current.front_speed, Some(10.0));
    assert_eq!(view.current.back_gap, cfg.range_half);
    let right = view.right.unwrap();
    assert_eq!(right.front_gap, 0.0);
    assert_eq!(right.back_gap, 5.0);
    assert_eq!(right.back_speed, Some(15.0));
}

#[test]
fn p3_switches_right_on_empty_road() {
    let cfg = SimConfig::empty_road();
    let state = crate::sim::SimState::reset(&cfg, 0).unwrap();
    assert_eq!(p3_action(&state, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p3_stays_when_right_lane_is_congested() {
    let cfg = SimConfig::default();
    let ego = car(0, &cfg, 0, 0.0, 12.0);
    // Right lane packed beside the ego; current lane clear.
    let others = (0..5).map(|i| car(i + 1, &cfg, 1, -8.0 + 4.0 * i as f64, 12.0)).collect();
    let state = crate::sim::SimState::from_parts(&cfg, 0, ego, others).unwrap();
    let scene = risk::RiskScene::from_state(&state);
    let graph = risk::TimeGraph::build(&scene, &params());
    assert!(!graph.shortest_path(0).first_move_right());
    assert_ne!(p3_action(&state, &params(), &mut PidState::default()), Action::SwitchRight);
}

#[test]
fn p3_single_lane_matches_p1_follow() {
    let cfg = SimConfig {
        n_lanes: 1,
        ..SimConfig::default()
    };
    // Leaders far enough that the risk field is flat over candidate speeds.
    for (gap, lead_speed, ego_speed) in [(60.0, 10.0, 15.0), (80.0, 20.0, 12.0), (70.0, 14.0, 14.0)] {
        let ego = car(0, &cfg, 0, 0.0, ego_speed);
        let others = vec![car(1, &cfg, 0, gap, lead_speed)];
        let state = crate::sim::SimState::from_parts(&cfg, 0, ego, others.clone()).unwrap();
        let mut pid1 = PidState::default();
        let mut pid3 = PidState::default();
        let p1 = p1_action(&PlannerView::from_state(&state), &params(), &mut pid1);
        let p3 = p3_action(&state, &params(), &mut pid3);
        assert_eq!(p1, p3);
        assert_eq!(pid1, pid3);
    }
    let empty = crate::sim::SimState::from_parts(&cfg, 0, car(0, &cfg, 0, 0.0, 10.0), vec![]).unwrap();
    assert_eq!(
        p3_action(&empty, &params(), &mut PidState::default()),
        p1_action(&PlannerView::from_state(&empty), &params(), &mut PidState::default())
    );
}

#[test]
fn p3_brakes_for_a_close_slow_leader() {
    let cfg = SimConfig::default();
    let ego = car(0, &cfg, 3, 0.0, 20.0);
    let others = vec![car(1, &cfg, 3, 9.0, 8.0)];
    let state = crate::sim::SimState::from_parts(&cfg, 0, ego, others).unwrap();
    assert_eq!(p3_action(&state, &params(), &mut PidState::default()), Action::Decelerate);
}

#[test]
fn planner_kind_parses() {
    assert_eq!("P3".parse::<PlannerKind>().unwrap(), PlannerKind::P3);
    assert!("p9".parse::<PlannerKind>().is_err());
}
