use super::*;
use crate::agents::{Cruise, HumanDriverParams, HumanDriverSettings, SoftYield, SoftYieldParams, StrategySpec};
use crate::mixture::{GaussianComponent, GaussianMixture, TruncationBox};

fn one_pedestrian(time: f64, side: Side) -> ArrivalSchedule {
    ArrivalSchedule::new(vec![time], vec![side])
}

fn cruise(config: &SimConfig, schedule: &ArrivalSchedule, speeds: Vec<f64>) -> EpisodeResult {
    run_episode(config, &mut Cruise, schedule, &WalkSource::replay(speeds), false).unwrap()
}

fn model() -> GaussianMixture {
    #[rustfmt::skip]
    let cov = [
        0.0009, -0.02, 0.0,   0.0,
       -0.02,    2.0,  -0.05, 0.0,
        0.0,    -0.05,  0.04, 0.0,
        0.0,     0.0,   0.0,  0.25,
    ];
    GaussianMixture::new(
        vec![1.0],
        vec![GaussianComponent::from_slices(&[0.05, 4.5, 1.4, 0.5], &cov).unwrap()],
        Some(TruncationBox::positive_orthant(4)),
    )
    .unwrap()
}

#[test]
fn free_flow_passing_time() {
    let config = SimConfig::default();
    let r = cruise(&config, &ArrivalSchedule::default(), vec![]);
    assert_eq!(r.outcome, Outcome::Cleared);
    let expected = (config.r0 + 2.0 * config.vehicle_half_length) / config.v0;
    assert!((r.passing_time - expected).abs() <= config.dt, "{}", r.passing_time);
}

#[test]
fn halving_dt_barely_moves_free_flow_time() {
    let coarse = SimConfig::default();
    let fine = SimConfig { dt: coarse.dt / 2.0, ..coarse };
    let a = cruise(&coarse, &ArrivalSchedule::default(), vec![]).passing_time;
    let b = cruise(&fine, &ArrivalSchedule::default(), vec![]).passing_time;
    assert!((a - b).abs() < fine.dt);
}

#[test]
fn zero_acceleration_is_exact_kinematics() {
    let (x, v) = integrate(12.0, 3.0, 0.0, 0.05);
    assert_eq!(v, 3.0);
    assert_eq!(x, 12.0 - 3.0 * 0.05);
    // braking through zero stops at v = 0
    let (x, v) = integrate(10.0, 1.0, -4.0, 0.5);
    assert_eq!(v, 0.0);
    assert!((x - (10.0 - 0.125)).abs() < 1e-15);
}

#[test]
fn slow_pedestrian_is_hit_by_never_braking_vehicle() {
    // starts at lateral −4.5 at t=0; front reaches the line at t=6 when the
    // pedestrian is at −4.5 + 0.7·6 = −0.3, inside the 1 m half-width strip
    let config = SimConfig::default();
    let r = cruise(&config, &one_pedestrian(0.0, Side::Near), vec![0.7]);
    assert_eq!(r.outcome, Outcome::Crashed);
    let t = r.crash_time.unwrap();
    assert!((t - 6.0).abs() <= config.dt + 1e-9, "{t}");
}

#[test]
fn pedestrian_clearing_strip_just_before_vehicle_is_safe() {
    // needs 5.5 m to leave the strip and does so at t = 5.95, one step before the front reaches the line
    let config = SimConfig::default();
    let r = cruise(&config, &one_pedestrian(0.0, Side::Near), vec![5.5 / 5.95]);
    assert_eq!(r.outcome, Outcome::Cleared);
    assert!(r.crash_time.is_none());
}

#[test]
fn crash_geometry() {
    let config = SimConfig::default();
    let ped = |progress| Pedestrian { id: 0, arrival_time: 0.0, side: Side::Near, walk_speed: 1.0, progress };
    let state = |x, p| WorldState { t: 0.0, vehicle_position: x, vehicle_v: 5.0, pedestrians: vec![ped(p)] };
    // lateral +5 is outside any 1 m strip
    for x in [10.0, 0.0, -1.0, -5.0] {
        assert!(!detect_crash(&state(x, 9.5), &config));
    }
    // on the path line
    assert!(detect_crash(&state(0.0, 4.5), &config));
    assert!(detect_crash(&state(-2.5, 4.5), &config));
    assert!(detect_crash(&state(-5.0, 4.5), &config));
    assert!(!detect_crash(&state(0.01, 4.5), &config));
    assert!(!detect_crash(&state(-5.01, 4.5), &config));
    // strip edges are inclusive
    assert!(detect_crash(&state(-1.0, 3.5), &config));
    assert!(!detect_crash(&state(-1.0, 3.49), &config));
}

#[test]
fn mirrored_schedules_give_identical_outcomes() {
    let config = SimConfig::default();
    for (i, speed) in [0.5, 0.7, 0.9, 1.2, 1.6, 2.5].into_iter().enumerate() {
        let schedule = ArrivalSchedule::new(vec![0.3 * i as f64, 0.5 + 0.3 * i as f64], vec![Side::Near, Side::Far]);
        for spec in [StrategySpec::Cruise, StrategySpec::SoftYield(SoftYieldParams::default())] {
            let a = run_episode(&config, spec.build().as_mut(), &schedule, &WalkSource::replay(vec![speed, 1.1]), false).unwrap();
            let b = run_episode(&config, spec.build().as_mut(), &schedule.mirrored(), &WalkSource::replay(vec![speed, 1.1]), false)
                .unwrap();
            assert_eq!(a, b);
        }
    }
}

#[test]
fn episodes_are_deterministic() {
    let config = SimConfig { arrivals: ArrivalMode::Poisson, lambda: 0.3, ..SimConfig::default() };
    let walk = Arc::new(WalkSpeedModel::new(&model()).unwrap());
    let schedule = config.schedule(11);
    let run = || {
        let mut s = SoftYield::new(SoftYieldParams::default());
        run_episode(&config, &mut s, &schedule, &WalkSource::decide(Arc::clone(&walk), 5), true).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn pedestrian_progress_and_removal() {
    let config = SimConfig::default();
    let mut s = SoftYield::new(SoftYieldParams::default());
    let r = run_episode(&config, &mut s, &one_pedestrian(0.0, Side::Near), &WalkSource::replay(vec![1.5]), true).unwrap();
    let rows: Vec<_> = r.trajectory.unwrap().into_iter().filter(|row| row.pedestrian_id == Some(0)).collect();
    assert!(!rows.is_empty());
    // lateral runs −4.5 → +4.5: L falls then rises by v_p·dt per step
    let lateral: Vec<f64> = rows.iter().map(|row| row.t * 1.5 - 4.5).collect();
    for (row, lat) in rows.iter().zip(&lateral) {
        assert!((row.l.unwrap() - lat.abs()).abs() < 1e-9);
    }
    let last = rows.last().unwrap();
    assert!(last.t * 1.5 < config.l0 && (last.t + config.dt) * 1.5 >= config.l0 - 1e-9);
}

#[test]
fn soft_yield_balanced_case_coasts_through() {
    // arrival at R0 with v_p = 1.5: T1 = 0, the vehicle keeps v0 and the pedestrian is off the crossing as it arrives
    let config = SimConfig::default();
    let mut s = SoftYield::new(SoftYieldParams::default());
    let r = run_episode(&config, &mut s, &one_pedestrian(0.0, Side::Far), &WalkSource::replay(vec![1.5]), false).unwrap();
    assert_eq!(r.outcome, Outcome::Cleared);
    assert!((r.passing_time - 7.0).abs() <= config.dt);
}

#[test]
fn soft_yield_avoids_slow_pedestrian() {
    let config = SimConfig::default();
    let mut s = SoftYield::new(SoftYieldParams::default());
    let r = run_episode(&config, &mut s, &one_pedestrian(0.0, Side::Near), &WalkSource::replay(vec![0.7]), false).unwrap();
    assert_eq!(r.outcome, Outcome::Cleared);
    assert!(r.passing_time > 7.0);
}

#[test]
fn timeout_is_distinct_from_crash() {
    struct Stop;
    impl Strategy for Stop {
        fn decide(&mut self, p: &Perception<'_>) -> crate::agents::StrategyDecision {
            crate::agents::StrategyDecision::new(if p.r < 25.0 { -3.0 } else { 0.0 })
        }
    }
    let config = SimConfig { horizon: 10.0, ..SimConfig::default() };
    let r = run_episode(&config, &mut Stop, &ArrivalSchedule::default(), &WalkSource::replay(vec![]), false).unwrap();
    assert_eq!(r.outcome, Outcome::TimedOut);
    assert!(r.crash_time.is_none());
}

#[test]
fn missing_walk_speed_is_an_error() {
    let config = SimConfig::default();
    let r = run_episode(&config, &mut Cruise, &one_pedestrian(0.0, Side::Near), &WalkSource::replay(vec![]), false);
    assert!(matches!(r, Err(SimError::NoWalkSpeed(0))));
}

fn human_spec() -> StrategySpec {
    StrategySpec::Human(Arc::new(HumanDriverParams::new(model(), HumanDriverSettings::default()).unwrap()))
}

#[test]
fn self_comparison_pairs_are_identical() {
    let config = SimConfig::default();
    let walk = Arc::new(WalkSpeedModel::new(&model()).unwrap());
    let spec = StrategySpec::SoftYield(SoftYieldParams::default());
    let pairs = run_paired_experiments(&config, &spec, &spec, walk, 20, 3).unwrap();
    for p in &pairs {
        assert_eq!(p.av.passing_time, p.human.passing_time);
        assert_eq!(p.av.walk_speeds, p.human.walk_speeds);
    }
}

#[test]
fn paired_runs_reproduce_across_thread_counts() {
    let config = SimConfig::default();
    let walk = Arc::new(WalkSpeedModel::new(&model()).unwrap());
    let av = StrategySpec::SoftYield(SoftYieldParams::default());
    let human = human_spec();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_paired_experiments(&config, &av, &human, Arc::clone(&walk), 16, 42).unwrap())
    };
    let serial = run(1);
    assert_eq!(serial, run(4));
    for p in &serial {
        // both passes meet the same pedestrians with the same speeds
        let n = p.av.walk_speeds.len().min(p.human.walk_speeds.len());
        assert_eq!(p.av.walk_speeds[..n], p.human.walk_speeds[..n]);
        assert_eq!(p.schedule.len(), 1);
    }
}

#[test]
fn config_validation() {
    assert!(SimConfig::default().validate().is_ok());
    assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig { speed_bounds: (2.0, 1.0), ..SimConfig::default() }.validate().is_err());
    assert!(SimConfig::default().check_update_interval(1.0).is_ok());
    assert!(SimConfig { dt: 0.2, ..SimConfig::default() }.check_update_interval(1.0).is_err());
}
