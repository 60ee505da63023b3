use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarm_core::behavior::select_mode;
use swarm_core::constraints::{
    box_constraints, feasible_vertices, flocking_constraint, lemma3_infeasible, lemma3_slack, predator_constraint,
    wall_control_constraints, ConstraintTag,
};
use swarm_core::oracle::random_lemma_case;
use swarm_core::{AgentMode, ControlConstraint, Vec2};

fn row(t: f64, c: f64, tag: ConstraintTag) -> ControlConstraint {
    ControlConstraint {
        a: Vec2::new(t.cos(), t.sin()),
        c,
        tag,
    }
}

fn nonempty(rows: &[ControlConstraint]) -> bool {
    !feasible_vertices(&rows.iter().map(|r| (r.a, r.c)).collect::<Vec<_>>()).is_empty()
}

proptest! {
    #[test]
    fn cascade_relaxes_only_when_needed_and_keeps_safety_rows(
        wall in prop::option::of((0.0..6.3f64, -0.1..0.05f64)),
        flock in prop::option::of((0.0..6.3f64, -0.15..0.1f64)),
        pred in prop::option::of((0.0..6.3f64, -0.15..0.1f64)),
    ) {
        let u_max = 0.1;
        let walls: Vec<ControlConstraint> = wall.map(|(t, c)| row(t, c, ConstraintTag::Wall(0))).into_iter().collect();
        let flock = flock.map(|(t, c)| row(t, c, ConstraintTag::Flocking));
        let pred = pred.map(|(t, c)| row(t, c, ConstraintTag::Predator));
        let sel = select_mode(&walls, flock, pred, u_max).unwrap();
        let again = select_mode(&walls, flock, pred, u_max).unwrap();
        prop_assert_eq!(&sel, &again);

        for r in walls.iter().chain(box_constraints(u_max).iter()) {
            prop_assert!(sel.active.contains(r));
        }
        let mut base = box_constraints(u_max).to_vec();
        base.extend(walls.iter().copied());
        let with = |extra: &[Option<ControlConstraint>]| {
            let mut rows = base.clone();
            rows.extend(extra.iter().flatten().copied());
            rows
        };
        let nominal_ok = nonempty(&with(&[flock, pred]));
        let strained_ok = nonempty(&with(&[pred]));
        let expected = if nominal_ok {
            AgentMode::Nominal
        } else if strained_ok {
            AgentMode::Strained
        } else {
            AgentMode::Evasive
        };
        prop_assert_eq!(sel.mode, expected);
        for v in &sel.vertices {
            prop_assert!(sel.active.iter().all(|r| r.is_satisfied(*v, 1e-9)));
        }
    }
}

#[test]
fn joint_corner_conflict_is_never_nominal() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut hits = 0;
    for _ in 0..2000 {
        let case = random_lemma_case(&mut rng);
        let c = &case.corner;
        if !lemma3_infeasible(c, &case.flock, &case.predator).unwrap()
            || lemma3_slack(c, &case.flock, &case.predator).unwrap().abs() <= 1e-6
        {
            continue;
        }
        hits += 1;
        let u_max = c.params.u_max;
        let walls = wall_control_constraints(c.position, c.velocity, &case.domain, &c.params).unwrap();
        let flock = flocking_constraint(case.flock.offset, case.flock.rate, u_max);
        let pred = predator_constraint(case.predator.offset, case.predator.rate, u_max);
        let sel = select_mode(&walls, flock, pred, u_max).unwrap();
        assert_ne!(sel.mode, AgentMode::Nominal);
    }
    assert!(hits > 100, "{hits}");
}
