use proptest::prelude::*;

use inav_core::geometry::{Pose, Vec2};
use inav_core::metrics::{effort_efficiency, ins, path_efficiency, EffortLedger};
use inav_core::physics::{step, twist_to_wheels, Twist, PhysicsConfig, RobotPreset, WheelCommand, WorldState};
use inav_core::scene::{generate_scene, load_scene, GenConfig, Scene};

fn ledger_strategy() -> impl Strategy<Value = (EffortLedger, f64)> {
    (prop::collection::vec((0.1f64..100.0, 0.0f64..20.0), 1..6), 0u64..1000, 0.0f64..1e5, 0.1f64..30.0).prop_map(
        |(bodies, steps, force, l_star)| {
            let mut ledger = EffortLedger::new(bodies.iter().map(|b| b.0).collect());
            ledger.path_lengths = bodies.iter().map(|b| b.1).collect();
            ledger.steps = steps;
            ledger.force_sum = force;
            (ledger, l_star)
        },
    )
}

proptest! {
    #[test]
    fn metrics_stay_in_unit_interval((ledger, l_star) in ledger_strategy(), success: bool, alpha in 0.0f64..=1.0) {
        let p = match path_efficiency(&ledger, l_star, success) {
            Ok(p) => p,
            // success with zero robot path is rejected
            Err(_) => { prop_assert!(success && ledger.path_lengths[0] == 0.0); return Ok(()); }
        };
        let terms = effort_efficiency(&ledger);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((0.0..=1.0).contains(&terms.e_eff));
        prop_assert!((0.0..=1.0).contains(&terms.kinematic));
        prop_assert!((0.0..=1.0).contains(&terms.dynamic));
        let v = ins(p, terms.e_eff, alpha).unwrap();
        prop_assert!(v >= p.min(terms.e_eff) - 1e-15 && v <= p.max(terms.e_eff) + 1e-15);
    }

    #[test]
    fn more_force_never_raises_effort_efficiency((ledger, _) in ledger_strategy(), extra in 0.0f64..1e4) {
        let mut heavier = ledger.clone();
        heavier.force_sum += extra;
        prop_assert!(effort_efficiency(&heavier).e_eff <= effort_efficiency(&ledger).e_eff);
    }

    #[test]
    fn wheel_commands_respect_limits(v in -3.0f64..3.0, w in -10.0f64..10.0, fetch: bool) {
        let preset = if fetch { RobotPreset::fetch() } else { RobotPreset::turtlebot() };
        let cmd = twist_to_wheels(Twist { v, omega: w }, &preset);
        prop_assert!(cmd.left.abs() <= preset.max_wheel_speed + 1e-12);
        prop_assert!(cmd.right.abs() <= preset.max_wheel_speed + 1e-12);
    }

    #[test]
    fn robot_stays_inside_walls(x in 0.5f64..5.5, y in 0.5f64..5.5, th in -3.2f64..3.2, l in -13.0f64..13.0, r in -13.0f64..13.0) {
        let scene = Scene::empty_room("box", 6.0, 6.0);
        let preset = RobotPreset::turtlebot();
        let mut state = WorldState::initial(&scene, Pose::new(x, y, th));
        for _ in 0..40 {
            state = step(&scene, &preset, &PhysicsConfig::default(), &state, WheelCommand::new(l, r)).unwrap().state;
        }
        let p = state.robot.position();
        let inner = preset.body_radius - 0.02;
        prop_assert!(p.x > inner && p.x < 6.0 - inner && p.y > inner && p.y < 6.0 - inner, "{:?}", p);
    }

    #[test]
    fn generated_scenes_round_trip(seed in 0u64..200, rooms in 1usize..6) {
        let config = GenConfig { rooms, ..GenConfig::default() };
        if let Ok(scene) = generate_scene(&config, seed) {
            let again = load_scene(&scene.to_json()).unwrap();
            prop_assert_eq!(&again, &scene);
            prop_assert_eq!(generate_scene(&config, seed).unwrap(), scene);
        }
    }
}

#[test]
fn pose_helpers_are_consistent() {
    let p = Pose::new(1.0, 2.0, 0.5);
    assert_eq!(p.position(), Vec2::new(1.0, 2.0));
}
