//! Closed-loop landings against rendered frames.

use landpad::config::Config;
use landpad::lander::{simulate, DroneState, LandingPhase, SimScene, SimulationResult, TickRecord};

fn half_res() -> Config {
    let mut cfg = Config::default();
    cfg.camera = cfg.camera.scaled(0.5);
    cfg
}

fn logged() -> SimScene {
    SimScene {
        keep_log: true,
        ..SimScene::default()
    }
}

fn assert_landed(r: &SimulationResult) {
    assert!(r.landed, "phases {:?}", r.phases);
    assert!(r.final_ground_error_m() <= 0.10, "{}", r.final_ground_error_m());
    assert!(r.final_yaw_error_deg().abs() <= 10.0, "{}", r.final_yaw_error_deg());
    assert!(r.cutoff_altitude_m.is_some_and(|c| c <= 0.15), "{:?}", r.cutoff_altitude_m);
}

#[test]
fn lands_from_directly_above() {
    let r = simulate(DroneState::at(0.0, 0.0, 1.5, 0.0), &half_res(), &SimScene::default(), 1).unwrap();
    assert_landed(&r);
    assert!(r.final_ground_error_m() < 0.05);
    assert_eq!(
        r.phases,
        [
            LandingPhase::Search,
            LandingPhase::Align,
            LandingPhase::Orient,
            LandingPhase::Descend,
            LandingPhase::Touchdown,
            LandingPhase::Done
        ]
    );
}

#[test]
fn lands_from_an_offset_with_yaw() {
    let r = simulate(DroneState::at(0.5, -0.3, 1.8, -60.0), &half_res(), &logged(), 2).unwrap();
    assert_landed(&r);
    let first_cutoff = r.log.iter().position(|t| t.command.motors_off).unwrap();
    assert!(r.log[..first_cutoff].iter().all(|t| !t.command.motors_off));
    assert!(r.log[first_cutoff..].iter().all(|t| t.command.motors_off));
}

#[test]
fn losing_the_marker_aborts_and_never_touches_down() {
    let mut cfg = half_res();
    cfg.lander.timeout_s = 15.0;
    let scene = SimScene {
        marker_removed_at_s: Some(2.0),
        ..logged()
    };
    let r = simulate(DroneState::at(0.2, 0.1, 1.6, 30.0), &cfg, &scene, 3).unwrap();
    assert!(!r.landed);
    assert!(r.cutoff_altitude_m.is_none());
    assert!(!r.phases.contains(&LandingPhase::Touchdown));
    let abort = r.phases.iter().position(|&p| p == LandingPhase::Abort).expect("abort");
    assert_eq!(r.phases.get(abort + 1), Some(&LandingPhase::Search));
    assert!(r.log.iter().filter(|t| t.time_s >= 2.0).all(|t| t.pose.is_none()));
    assert_eq!(r.ticks as f64, (15.0 / cfg.lander.control_period_s).ceil());
    assert!(r.final_state.altitude >= cfg.lander.abort_altitude_m - 0.1);
}

#[test]
fn rejects_start_outside_the_envelope() {
    assert!(simulate(DroneState::at(0.0, 0.0, 0.5, 0.0), &half_res(), &SimScene::default(), 0).is_err());
    assert!(simulate(DroneState::at(0.0, 0.0, 3.0, 0.0), &half_res(), &SimScene::default(), 0).is_err());
}

fn timing_free(log: &[TickRecord]) -> Vec<TickRecord> {
    log.iter()
        .map(|t| TickRecord {
            latency_ms: 0.0,
            overrun: false,
            ..t.clone()
        })
        .collect()
}

#[test]
fn same_seed_same_trajectory() {
    let cfg = half_res();
    let start = DroneState::at(-0.2, 0.25, 1.7, 100.0);
    let a = simulate(start, &cfg, &logged(), 11).unwrap();
    let b = simulate(start, &cfg, &logged(), 11).unwrap();
    assert_eq!(timing_free(&a.log), timing_free(&b.log));
    assert_eq!(a.final_state, b.final_state);
    let c = simulate(start, &cfg, &logged(), 12).unwrap();
    assert_ne!(timing_free(&a.log), timing_free(&c.log));
}
