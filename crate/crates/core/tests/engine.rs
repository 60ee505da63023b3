use swarm_core::constraints::{max_safety_margin, safety_margin};
use swarm_core::engine::{init_world, run, BoidState, Engine, PredatorState, World};
use swarm_core::{AgentMode, Point2, Vec2, WorldConfig};

fn short(duration: f64) -> WorldConfig {
    WorldConfig {
        duration,
        ..WorldConfig::default()
    }
}

#[test]
fn head_on_wall_approach_never_crosses() {
    let cfg = WorldConfig {
        flocking_enabled: false,
        v_star: 0.3,
        duration: 100.0,
        ..WorldConfig::default()
    };
    let engine = Engine::new(cfg.clone()).unwrap();
    let wall = engine.domain().walls()[0];
    let mut world = World {
        step_index: 0,
        boids: vec![
            BoidState {
                velocity: Vec2::new(0.3, 0.0),
                ..BoidState::at_rest(0, Point2::new(2.0, 0.0))
            },
            BoidState::at_rest(1, Point2::new(-2.0, 0.0)),
        ],
        predator: PredatorState::disabled(),
    };
    let mut slowed = false;
    for _ in 0..2000 {
        let (next, trace) = engine.step(&world).unwrap();
        let b = &next.boids[0];
        assert!(safety_margin(b.position, b.velocity, &wall, engine.safety()) <= 0.0);
        assert!(b.position.x < 3.0);
        slowed |= trace.boids[0].control.x < 0.0;
        world = next;
    }
    assert!(slowed);
}

#[test]
fn default_run_is_contained_and_bounded() {
    let cfg = WorldConfig::default();
    let engine = Engine::new(cfg.clone()).unwrap();
    let mut count = 0;
    for step in run(&cfg).unwrap() {
        let step = step.unwrap();
        assert_eq!(step.boids.len(), 15);
        for b in &step.boids {
            assert!(b.control.norm_inf() <= cfg.u_max + 1e-12);
            assert!(b.g_max <= 1e-9);
            assert!(engine.domain().contains(b.position, 1e-6));
            assert!(b.safe_set_nonempty);
            assert!(b.predator_offset.is_none());
            assert_ne!(b.mode, AgentMode::Evasive);
        }
        count += 1;
    }
    assert_eq!(count, 2400);
}

#[test]
fn same_seed_same_run() {
    let cfg = WorldConfig {
        predator_enabled: true,
        seed: 9,
        ..short(20.0)
    };
    let a: Vec<_> = run(&cfg).unwrap().map(Result::unwrap).collect();
    let b: Vec<_> = run(&cfg).unwrap().map(Result::unwrap).collect();
    assert_eq!(a, b);
    let c: Vec<_> = run(&WorldConfig { seed: 10, ..cfg })
        .unwrap()
        .map(Result::unwrap)
        .collect();
    assert_ne!(a, c);
}

#[test]
fn predator_turns_exactly_on_schedule() {
    let cfg = WorldConfig {
        predator_enabled: true,
        ..short(60.0)
    };
    let period = cfg.predator_turn_steps();
    assert_eq!(period, 160);
    let positions: Vec<Point2> = run(&cfg).unwrap().map(|s| s.unwrap().predator.unwrap()).collect();
    let headings: Vec<Vec2> = positions
        .windows(2)
        .map(|w| (w[1] - w[0]).normalized().unwrap())
        .collect();
    for (k, w) in headings.windows(2).enumerate() {
        // headings[k] is the move made during step k.
        let turned = (w[1] - w[0]).norm() > 1e-9;
        assert_eq!(turned, (k + 1) % period == 0, "step {}", k + 1);
    }
    let speed = (positions[1] - positions[0]).norm() / cfg.dt;
    assert!((speed - 1.2 * cfg.v_star).abs() < 1e-12);
}

#[test]
fn initial_flock_is_spread_and_inside() {
    let cfg = WorldConfig::default();
    let world = init_world(&cfg).unwrap();
    let engine = Engine::new(cfg.clone()).unwrap();
    for (i, a) in world.boids.iter().enumerate() {
        assert_eq!(a.velocity, Vec2::zero());
        assert!(max_safety_margin(a.position, a.velocity, engine.domain(), engine.safety()) <= -cfg.activation_margin);
        for b in &world.boids[i + 1..] {
            assert!(a.position.distance(b.position) >= 0.05);
        }
    }
}

#[test]
fn predator_starts_in_the_far_corner_aimed_at_the_flock() {
    let cfg = WorldConfig {
        predator_enabled: true,
        ..WorldConfig::default()
    };
    let world = init_world(&cfg).unwrap();
    let centroid = world.centroid();
    let p = &world.predator;
    assert_eq!(p.position.x.abs(), 3.0);
    assert_eq!(p.position.y.abs(), 3.0);
    for cx in [-3.0, 3.0] {
        for cy in [-3.0, 3.0] {
            assert!(p.position.distance(centroid) >= Point2::new(cx, cy).distance(centroid));
        }
    }
    let aim = (centroid - p.position).normalized().unwrap();
    assert!((p.heading - aim).norm() < 1e-12);
    assert_eq!(p.speed, 0.15);
}
