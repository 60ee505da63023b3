//! World state, initialization and the synchronous step pipeline:
//! triangulate, summarize, constrain, select a mode, solve, integrate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::{select_mode, AgentMode, BehaviorError};
use crate::constraints::{
    flocking_constraint, max_safety_margin, polytope_vertices, predator_constraint, wall_control_constraints,
    ConstraintError, SAFETY_TOLERANCE,
};
use crate::geometry::{delaunay_edges, summarize, GeometryError};
use crate::solver::{solve_control, SolverError};
use crate::{Point2, RectDomain, SafetyParams, SolverConfig, SpeedObjective, Vec2};

/// Positions may leave the domain by at most this much (m) to absorb roundoff.
pub const CONTAINMENT_SLACK: f64 = 1e-6;

/// Rejections allowed while placing the initial flock.
pub const MAX_PACKING_ATTEMPTS: usize = 10_000;

/// RNG stream for initial positions. Each consumer of randomness gets its
/// own stream of the master seed so toggling one feature cannot shift
/// another's draws.
const INIT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid config: {field} {reason}")]
    Invalid { field: &'static str, reason: &'static str },
}

fn invalid(field: &'static str, reason: &'static str) -> ConfigError {
    ConfigError::Invalid { field, reason }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("could not place {n_boids} non-overlapping boids (placed {placed})")]
    PackingFailed { placed: usize, n_boids: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("boid {id} at step {step}: wall margin {margin} violates safety")]
    SafetyViolation { id: usize, step: usize, margin: f64 },
    #[error("boid {id} at step {step}: safe action set empty")]
    Infeasible { id: usize, step: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Run parameters. Missing JSON fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_boids: usize,
    /// Side of the square arena, m. The arena is centered on the origin.
    pub domain_length: f64,
    /// Preferred cruising speed, m/s.
    pub v_star: f64,
    /// Per-axis acceleration limit, m/s².
    pub u_max: f64,
    /// Flocking disk radius, m.
    #[serde(rename = "R")]
    pub flock_radius: f64,
    /// Predator ball radius, m.
    #[serde(rename = "Gamma")]
    pub predator_radius: f64,
    pub alpha: f64,
    pub dt: f64,
    pub duration: f64,
    pub boid_diameter: f64,
    pub predator_enabled: bool,
    /// Seconds between predator re-aims.
    pub predator_period: f64,
    pub seed: u64,
    /// Wall rows engage within this margin, m.
    pub activation_margin: f64,
    /// Set to false to drop the flocking rows entirely.
    pub flocking_enabled: bool,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_boids: 15,
            domain_length: 6.0,
            v_star: 0.125,
            u_max: 0.1,
            flock_radius: 0.025,
            predator_radius: 0.25,
            alpha: 1.0,
            dt: 0.05,
            duration: 120.0,
            boid_diameter: 0.05,
            predator_enabled: false,
            predator_period: 8.0,
            seed: 0,
            activation_margin: 0.01,
            flocking_enabled: true,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = [
            ("domain_length", self.domain_length),
            ("v_star", self.v_star),
            ("u_max", self.u_max),
            ("R", self.flock_radius),
            ("Gamma", self.predator_radius),
            ("alpha", self.alpha),
            ("dt", self.dt),
            ("duration", self.duration),
            ("boid_diameter", self.boid_diameter),
            ("predator_period", self.predator_period),
            ("activation_margin", self.activation_margin),
        ];
        if let Some((field, _)) = finite.iter().find(|(_, x)| !x.is_finite()) {
            return Err(invalid(field, "must be finite"));
        }
        if self.n_boids < 2 {
            return Err(invalid("n_boids", "must be at least 2"));
        }
        if self.alpha < 1.0 {
            return Err(invalid("alpha", "must be at least 1"));
        }
        if self.dt <= 0.0 {
            return Err(invalid("dt", "must be positive"));
        }
        if self.u_max <= 0.0 {
            return Err(invalid("u_max", "must be positive"));
        }
        if self.v_star < 0.0 {
            return Err(invalid("v_star", "must be nonnegative"));
        }
        if !(0.0 < self.flock_radius && self.flock_radius < self.predator_radius) {
            return Err(invalid("R", "must satisfy 0 < R < Gamma"));
        }
        if self.predator_radius >= self.domain_length {
            return Err(invalid("Gamma", "must be smaller than the domain length"));
        }
        if self.duration < 0.0 {
            return Err(invalid("duration", "must be nonnegative"));
        }
        if self.boid_diameter < 0.0 {
            return Err(invalid("boid_diameter", "must be nonnegative"));
        }
        if self.predator_period <= 0.0 {
            return Err(invalid("predator_period", "must be positive"));
        }
        if !(0.0..self.domain_length / 2.0).contains(&self.activation_margin) {
            return Err(invalid("activation_margin", "must lie in [0, domain_length / 2)"));
        }
        Ok(())
    }

    pub fn domain(&self) -> RectDomain {
        RectDomain::square(self.domain_length).expect("validated domain length")
    }

    /// Wall parameters, including the integration step.
    pub fn safety_params(&self) -> SafetyParams {
        SafetyParams::new(self.alpha, self.u_max, self.activation_margin)
            .and_then(|p| p.with_step(self.dt))
            .expect("validated safety parameters")
    }

    /// Number of whole steps that fit in `duration`.
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    /// Steps between predator re-aims, `⌈predator_period / dt⌉`.
    pub fn predator_turn_steps(&self) -> usize {
        ((self.predator_period / self.dt - 1e-9).ceil() as usize).max(1)
    }

    pub fn predator_speed(&self) -> f64 {
        1.2 * self.v_star
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoidState {
    pub id: usize,
    pub position: Point2,
    pub velocity: Vec2,
    pub last_control: Vec2,
    pub mode: AgentMode,
}

impl BoidState {
    pub fn at_rest(id: usize, position: Point2) -> Self {
        Self {
            id,
            position,
            velocity: Vec2::zero(),
            last_control: Vec2::zero(),
            mode: AgentMode::Nominal,
        }
    }
}

/// Scripted predator: straight legs at constant speed, re-aimed at the flock
/// centroid at a fixed period. It ignores walls and actuation limits.
#[derive(Debug, Clone, PartialEq)]
pub struct PredatorState {
    pub position: Point2,
    pub heading: Vec2,
    pub speed: f64,
    pub time_since_turn: f64,
    pub steps_since_turn: usize,
    pub enabled: bool,
}

impl PredatorState {
    pub fn disabled() -> Self {
        Self {
            position: Point2::zero(),
            heading: Vec2::new(1.0, 0.0),
            speed: 0.0,
            time_since_turn: 0.0,
            steps_since_turn: 0,
            enabled: false,
        }
    }

    pub fn velocity(&self) -> Vec2 {
        self.heading * self.speed
    }

    fn aim_at(&mut self, target: Point2) {
        if let Some(h) = (target - self.position).normalized() {
            self.heading = h;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub step_index: usize,
    pub boids: Vec<BoidState>,
    pub predator: PredatorState,
}

impl World {
    pub fn time(&self, cfg: &WorldConfig) -> f64 {
        self.step_index as f64 * cfg.dt
    }

    pub fn centroid(&self) -> Point2 {
        Vec2::mean(self.boids.iter().map(|b| b.position)).unwrap_or_else(Vec2::zero)
    }
}

/// What happened to one boid during one step. `position`, `velocity`,
/// `g_max` and the relative vectors describe the state at the start of the
/// step; `control` and `mode` are what was applied over it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoidRecord {
    pub id: usize,
    pub position: Point2,
    pub velocity: Vec2,
    pub control: Vec2,
    pub mode: AgentMode,
    pub degree: usize,
    /// Worst wall margin.
    pub g_max: f64,
    pub rel_pos: Vec2,
    pub rel_vel: Vec2,
    /// Offset from the predator and its rate, when a predator exists.
    pub predator_offset: Option<Vec2>,
    pub predator_rate: Option<Vec2>,
    /// Whether box and wall rows alone admitted a control.
    pub safe_set_nonempty: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub t: f64,
    pub boids: Vec<BoidRecord>,
    pub predator: Option<Point2>,
}

fn corners(length: f64) -> [Point2; 4] {
    let h = length / 2.0;
    [
        Point2::new(-h, -h),
        Point2::new(h, -h),
        Point2::new(h, h),
        Point2::new(-h, h),
    ]
}

/// Boids at rest at uniformly random, non-overlapping positions inside the
/// domain shrunk by the activation margin. With a predator, it starts in the
/// corner farthest from the flock centroid, heading for the centroid.
pub fn init_world(cfg: &WorldConfig) -> Result<World, EngineError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(INIT_STREAM);
    let (lo, hi) = cfg.domain().shrunk_bounds(cfg.activation_margin);

    let mut positions: Vec<Point2> = Vec::with_capacity(cfg.n_boids);
    let mut rejections = 0;
    while positions.len() < cfg.n_boids {
        let p = Point2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if positions.iter().all(|q| q.distance(p) >= cfg.boid_diameter) {
            positions.push(p);
        } else {
            rejections += 1;
            if rejections >= MAX_PACKING_ATTEMPTS {
                return Err(EngineError::PackingFailed {
                    placed: positions.len(),
                    n_boids: cfg.n_boids,
                });
            }
        }
    }

    let boids: Vec<BoidState> = positions
        .into_iter()
        .enumerate()
        .map(|(id, p)| BoidState::at_rest(id, p))
        .collect();
    let mut world = World {
        step_index: 0,
        boids,
        predator: PredatorState::disabled(),
    };
    if cfg.predator_enabled {
        let centroid = world.centroid();
        let start = corners(cfg.domain_length)
            .into_iter()
            .fold(None::<Point2>, |best, c| match best {
                Some(b) if b.distance(centroid) >= c.distance(centroid) => Some(b),
                _ => Some(c),
            })
            .expect("four corners");
        let mut predator = PredatorState {
            position: start,
            speed: cfg.predator_speed(),
            enabled: true,
            ..PredatorState::disabled()
        };
        predator.aim_at(centroid);
        world.predator = predator;
    }
    Ok(world)
}

/// Precomputed per-run quantities around a validated config.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: WorldConfig,
    domain: RectDomain,
    safety: SafetyParams,
    solver: SolverConfig,
}

impl Engine {
    pub fn new(cfg: WorldConfig) -> Result<Self, EngineError> {
        cfg.validate()?;
        Ok(Self {
            domain: cfg.domain(),
            safety: cfg.safety_params(),
            solver: SolverConfig::for_actuation(cfg.u_max),
            cfg,
        })
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn safety(&self) -> &SafetyParams {
        &self.safety
    }

    /// Advances every boid by one step using only the current snapshot.
    pub fn step(&self, world: &World) -> Result<(World, StepTrace), EngineError> {
        let cfg = &self.cfg;
        let step = world.step_index;
        let positions: Vec<Point2> = world.boids.iter().map(|b| b.position).collect();
        let velocities: Vec<Vec2> = world.boids.iter().map(|b| b.velocity).collect();
        let graph = delaunay_edges(&positions)?;
        let predator = world.predator.enabled.then_some(&world.predator);

        let mut records = Vec::with_capacity(world.boids.len());
        for (i, boid) in world.boids.iter().enumerate() {
            let (p, v) = (boid.position, boid.velocity);
            let summary = summarize(i, &positions, &velocities, &graph)?;
            let g_max = max_safety_margin(p, v, &self.domain, &self.safety);
            let walls = wall_control_constraints(p, v, &self.domain, &self.safety).map_err(|e| match e {
                ConstraintError::StateUnsafe { margin, .. } => EngineError::SafetyViolation {
                    id: boid.id,
                    step,
                    margin,
                },
                other => unreachable!("validated parameters: {other}"),
            })?;
            let safe_set_nonempty = !polytope_vertices(&walls, cfg.u_max).is_empty();

            let flocking = (cfg.flocking_enabled && summary.rel_pos.norm() > cfg.flock_radius)
                .then(|| flocking_constraint(summary.rel_pos, summary.rel_vel, cfg.u_max))
                .flatten();
            let (offset, rate) = match predator {
                Some(o) => (Some(p - o.position), Some(v - o.velocity())),
                None => (None, None),
            };
            let avoid = match (offset, rate) {
                (Some(d), Some(d_dot)) if d.norm() < cfg.predator_radius => predator_constraint(d, d_dot, cfg.u_max),
                _ => None,
            };

            let selection = select_mode(&walls, flocking, avoid, cfg.u_max).map_err(|e| match e {
                BehaviorError::Infeasible => EngineError::Infeasible { id: boid.id, step },
            })?;
            let objective = SpeedObjective {
                v_current: v,
                v_star: cfg.v_star,
                dt: cfg.dt,
            };
            let control = solve_control(&objective, &selection.vertices, &self.solver, Some(boid.last_control))?;

            records.push(BoidRecord {
                id: boid.id,
                position: p,
                velocity: v,
                control,
                mode: selection.mode,
                degree: summary.degree,
                g_max,
                rel_pos: summary.rel_pos,
                rel_vel: summary.rel_vel,
                predator_offset: offset,
                predator_rate: rate,
                safe_set_nonempty,
            });
        }

        let boids: Vec<BoidState> = world
            .boids
            .iter()
            .zip(&records)
            .map(|(b, r)| {
                let velocity = b.velocity + r.control * cfg.dt;
                BoidState {
                    id: b.id,
                    position: b.position + velocity * cfg.dt,
                    velocity,
                    last_control: r.control,
                    mode: r.mode,
                }
            })
            .collect();
        for b in &boids {
            let margin = max_safety_margin(b.position, b.velocity, &self.domain, &self.safety);
            if !(margin <= SAFETY_TOLERANCE) || !self.domain.contains(b.position, CONTAINMENT_SLACK) {
                return Err(EngineError::SafetyViolation { id: b.id, step, margin });
            }
        }

        let mut next = World {
            step_index: step + 1,
            boids,
            predator: world.predator.clone(),
        };
        if next.predator.enabled {
            let centroid = next.centroid();
            let pred = &mut next.predator;
            pred.position += pred.velocity() * cfg.dt;
            pred.steps_since_turn += 1;
            if pred.steps_since_turn >= cfg.predator_turn_steps() {
                pred.aim_at(centroid);
                pred.steps_since_turn = 0;
            }
            pred.time_since_turn = pred.steps_since_turn as f64 * cfg.dt;
        }

        let trace = StepTrace {
            t: world.time(cfg),
            boids: records,
            predator: predator.map(|o| o.position),
        };
        Ok((next, trace))
    }
}

/// Lazily stepped run; yields one [`StepTrace`] per step and stops at the
/// first error.
#[derive(Debug, Clone)]
pub struct Simulation {
    engine: Engine,
    world: World,
    remaining: usize,
    failed: bool,
}

impl Simulation {
    pub fn new(engine: Engine, world: World) -> Self {
        let remaining = engine.config().n_steps().saturating_sub(world.step_index);
        Self {
            engine,
            world,
            remaining,
            failed: false,
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }
}

impl Iterator for Simulation {
    type Item = Result<StepTrace, EngineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 || self.failed {
            return None;
        }
        match self.engine.step(&self.world) {
            Ok((world, trace)) => {
                self.world = world;
                self.remaining -= 1;
                Some(Ok(trace))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Initializes a world from `cfg` and returns its step stream.
pub fn run(cfg: &WorldConfig) -> Result<Simulation, EngineError> {
    let engine = Engine::new(cfg.clone())?;
    let world = init_world(cfg)?;
    Ok(Simulation::new(engine, world))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> WorldConfig {
        WorldConfig {
            duration,
            ..WorldConfig::default()
        }
    }

    #[test]
    fn defaults_validate() {
        let cfg = WorldConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_steps(), 2400);
        assert_eq!(cfg.predator_turn_steps(), 160);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let bad = [
            WorldConfig {
                alpha: 0.5,
                ..Default::default()
            },
            WorldConfig {
                n_boids: 1,
                ..Default::default()
            },
            WorldConfig {
                dt: 0.0,
                ..Default::default()
            },
            WorldConfig {
                flock_radius: 0.3,
                ..Default::default()
            },
            WorldConfig {
                predator_radius: 7.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn init_is_deterministic_and_at_rest() {
        let cfg = WorldConfig {
            n_boids: 2,
            ..Default::default()
        };
        let a = init_world(&cfg).unwrap();
        assert_eq!(a, init_world(&cfg).unwrap());
        assert!(a.boids.iter().all(|b| b.velocity == Vec2::zero()));
    }

    #[test]
    fn predator_toggle_keeps_initial_positions() {
        let off = init_world(&WorldConfig::default()).unwrap();
        let on = init_world(&WorldConfig {
            predator_enabled: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(off.boids, on.boids);
        assert!(on.predator.enabled && !off.predator.enabled);
        assert!((on.predator.heading.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crowded_domain_fails_to_pack() {
        let cfg = WorldConfig {
            n_boids: 50,
            domain_length: 0.3,
            predator_radius: 0.2,
            boid_diameter: 0.1,
            ..Default::default()
        };
        assert!(matches!(init_world(&cfg), Err(EngineError::PackingFailed { .. })));
    }

    #[test]
    fn zero_length_run_has_no_steps() {
        let mut sim = run(&short(0.01)).unwrap();
        let before = sim.world().clone();
        assert!(sim.next().is_none());
        assert_eq!(sim.world(), &before);
    }

    #[test]
    fn short_run_emits_one_trace_per_step() {
        let traces: Vec<StepTrace> = run(&short(1.0)).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(traces.len(), 20);
        assert!(traces.iter().all(|t| t.boids.len() == 15 && t.predator.is_none()));
        assert_eq!(traces[3].t, 3.0 * 0.05);
    }
}
