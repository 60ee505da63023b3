//! Linear control constraints: wall stopping-distance barriers, the
//! flocking disk, the predator ball and the actuation box.

mod lemmas;
mod polytope;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lemmas::{
    lemma1_infeasible, lemma1_slack, lemma2_infeasible, lemma2_slack, lemma3_infeasible, lemma3_slack, CornerState,
    RelativeState,
};
pub use polytope::{feasible_vertices, polytope_vertices, DEDUP_TOLERANCE, FEASIBILITY_TOLERANCE};

use crate::geometry::{Point2, Vector2};
use crate::scalar::Scalar;

/// Largest wall margin accepted as safe, in meters.
pub const SAFETY_TOLERANCE: f64 = 1e-9;

/// Normal speeds at or below this magnitude (m/s) count as parallel to a wall.
pub const PARALLEL_SPEED: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConstraintError {
    #[error("half-plane normal must be a finite unit vector, got norm {0}")]
    NonUnitNormal(f64),
    #[error("invalid rectangular domain: {0}")]
    InvalidDomain(&'static str),
    #[error("invalid safety parameters: {0}")]
    InvalidParams(&'static str),
    #[error("wall {wall} margin {margin} exceeds the safety tolerance")]
    StateUnsafe { wall: usize, margin: f64 },
    #[error("lemma premise violated: {0}")]
    PremiseViolated(&'static str),
}

/// `{ p : p·normal + offset <= 0 }`, with the normal pointing out of the
/// feasible side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane<T> {
    normal: Vector2<T>,
    offset: T,
}

impl<T: Scalar> HalfPlane<T> {
    pub fn new(normal: Vector2<T>, offset: T) -> Result<Self, ConstraintError> {
        let norm = normal.norm();
        if !offset.is_finite() || !((norm - T::one()).abs() <= T::lit(1e-12)) {
            return Err(ConstraintError::NonUnitNormal(norm.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(Self { normal, offset })
    }

    pub fn normal(&self) -> Vector2<T> {
        self.normal
    }

    pub fn offset(&self) -> T {
        self.offset
    }

    /// Positive outside, zero on the boundary.
    pub fn signed_distance(&self, p: Point2<T>) -> T {
        p.dot(self.normal) + self.offset
    }
}

/// Axis-aligned rectangle as four walls: `+x`, `+y`, `-x`, `-y`, so that
/// `walls[0] = -walls[2]` and `walls[1] = -walls[3]` in normal direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectDomain<T> {
    walls: [HalfPlane<T>; 4],
}

impl<T: Scalar> RectDomain<T> {
    pub fn new(x_min: T, x_max: T, y_min: T, y_max: T) -> Result<Self, ConstraintError> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(ConstraintError::InvalidDomain("empty interior"));
        }
        let (o, i) = (T::zero(), T::one());
        Self::from_walls([
            HalfPlane::new(Vector2::new(i, o), -x_max)?,
            HalfPlane::new(Vector2::new(o, i), -y_max)?,
            HalfPlane::new(Vector2::new(-i, o), x_min)?,
            HalfPlane::new(Vector2::new(o, -i), y_min)?,
        ])
    }

    /// Square of side `length` centered on the origin.
    pub fn square(length: T) -> Result<Self, ConstraintError> {
        let h = length * T::half();
        Self::new(-h, h, -h, h)
    }

    /// Validates opposing and perpendicular normals and a nonempty interior.
    pub fn from_walls(walls: [HalfPlane<T>; 4]) -> Result<Self, ConstraintError> {
        let tol = T::lit(1e-12);
        let n: [Vector2<T>; 4] = walls.map(|w| w.normal());
        if (n[0] + n[2]).norm() > tol || (n[1] + n[3]).norm() > tol {
            return Err(ConstraintError::InvalidDomain(
                "opposite walls must have opposite normals",
            ));
        }
        if n[0].dot(n[1]).abs() > tol {
            return Err(ConstraintError::InvalidDomain("adjacent walls must be perpendicular"));
        }
        // Opposite offsets must leave a positive width.
        if !(walls[0].offset() + walls[2].offset() < T::zero() && walls[1].offset() + walls[3].offset() < T::zero()) {
            return Err(ConstraintError::InvalidDomain("empty interior"));
        }
        Ok(Self { walls })
    }

    pub fn walls(&self) -> &[HalfPlane<T>; 4] {
        &self.walls
    }

    /// Whether `p` lies in the domain grown by `inflate` on every side.
    pub fn contains(&self, p: Point2<T>, inflate: T) -> bool {
        self.walls.iter().all(|w| w.signed_distance(p) <= inflate)
    }

    /// Opposite corners `(min, max)` of the domain shrunk by `margin`.
    pub fn shrunk_bounds(&self, margin: T) -> (Point2<T>, Point2<T>) {
        let support = |w: &HalfPlane<T>| -w.offset();
        let hi = Vector2::new(support(&self.walls[0]), support(&self.walls[1]));
        let lo = Vector2::new(-support(&self.walls[2]), -support(&self.walls[3]));
        (lo + Vector2::new(margin, margin), hi - Vector2::new(margin, margin))
    }
}

/// Which physical requirement a control row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintTag {
    /// Index into [`RectDomain::walls`].
    Wall(usize),
    Flocking,
    Predator,
    Box,
}

/// `a · u <= c` on the control input `u` (m/s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlConstraint<T> {
    pub a: Vector2<T>,
    pub c: T,
    pub tag: ConstraintTag,
}

impl<T: Scalar> ControlConstraint<T> {
    pub fn new(a: Vector2<T>, c: T, tag: ConstraintTag) -> Self {
        Self { a, c, tag }
    }

    /// `a·u − c`; nonpositive when satisfied.
    pub fn residual(&self, u: Vector2<T>) -> T {
        self.a.dot(u) - self.c
    }

    pub fn is_satisfied(&self, u: Vector2<T>, tol: T) -> bool {
        self.residual(u) <= tol
    }
}

/// The actuation limit `‖u‖∞ <= u_max` as four rows.
pub fn box_constraints<T: Scalar>(u_max: T) -> [ControlConstraint<T>; 4] {
    let (o, i) = (T::zero(), T::one());
    [
        ControlConstraint::new(Vector2::new(i, o), u_max, ConstraintTag::Box),
        ControlConstraint::new(Vector2::new(o, i), u_max, ConstraintTag::Box),
        ControlConstraint::new(Vector2::new(-i, o), u_max, ConstraintTag::Box),
        ControlConstraint::new(Vector2::new(o, -i), u_max, ConstraintTag::Box),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams<T> {
    /// Stopping-distance multiplier, at least 1.
    pub alpha: T,
    pub u_max: T,
    /// Walls engage once their margin rises above `-activation_margin`.
    pub activation_margin: T,
    /// Integration step. When set, wall rows also bound the next Euler step
    /// so the margin cannot grow between samples.
    pub step: Option<T>,
}

impl<T: Scalar> SafetyParams<T> {
    pub fn new(alpha: T, u_max: T, activation_margin: T) -> Result<Self, ConstraintError> {
        if !(alpha >= T::one()) {
            return Err(ConstraintError::InvalidParams("alpha must be at least 1"));
        }
        if !(u_max > T::zero()) || !u_max.is_finite() {
            return Err(ConstraintError::InvalidParams("u_max must be positive"));
        }
        if !(activation_margin >= T::zero()) {
            return Err(ConstraintError::InvalidParams("activation margin must be nonnegative"));
        }
        Ok(Self {
            alpha,
            u_max,
            activation_margin,
            step: None,
        })
    }

    pub fn with_step(mut self, dt: T) -> Result<Self, ConstraintError> {
        if !(dt > T::zero()) {
            return Err(ConstraintError::InvalidParams("step must be positive"));
        }
        self.step = Some(dt);
        Ok(self)
    }

    /// Guaranteed deceleration `u_max / alpha`.
    pub fn braking(&self) -> T {
        self.u_max / self.alpha
    }
}

/// Stopping-distance margin of one wall: signed distance plus the braking
/// distance at deceleration `u_max / alpha`. Nonpositive means safe.
pub fn safety_margin<T: Scalar>(p: Point2<T>, v: Vector2<T>, wall: &HalfPlane<T>, params: &SafetyParams<T>) -> T {
    let s = v.dot(wall.normal());
    wall.signed_distance(p) + params.alpha * s * s / (T::two() * params.u_max)
}

/// Worst wall margin over the domain.
pub fn max_safety_margin<T: Scalar>(
    p: Point2<T>,
    v: Vector2<T>,
    domain: &RectDomain<T>,
    params: &SafetyParams<T>,
) -> T {
    domain
        .walls()
        .iter()
        .map(|w| safety_margin(p, v, w, params))
        .fold(T::neg_infinity(), T::max)
}

/// Margin after one semi-implicit Euler step with normal acceleration `u_n`.
fn next_margin<T: Scalar>(distance: T, s: T, u_n: T, dt: T, params: &SafetyParams<T>) -> T {
    let s_next = s + dt * u_n;
    distance + dt * s_next + params.alpha * s_next * s_next / (T::two() * params.u_max)
}

/// Interval of normal accelerations for which one Euler step does not
/// increase the margin: roots of `x² + 2(a + s/dt)x + 2as/dt`, with `a` the
/// guaranteed deceleration.
fn nonincreasing_interval<T: Scalar>(s: T, dt: T, braking: T) -> (T, T) {
    let q = s / dt;
    let b = braking + q;
    let disc = (braking * braking + q * q).sqrt();
    let product = T::two() * braking * q;
    if b >= T::zero() {
        let lo = -(b + disc);
        (lo, product / lo)
    } else {
        let hi = disc - b;
        (product / hi, hi)
    }
}

/// Control rows that keep every engaged wall's margin from increasing.
///
/// A wall engages when its margin is at least `-activation_margin`. Moving
/// toward it (`v·n > 0`) demands `u·n <= -u_max/alpha`; moving away demands
/// `u·n >= -u_max/alpha`; moving parallel demands nothing. With
/// [`SafetyParams::step`] set, a wall also engages when the worst admissible
/// control could lift its margin above `-activation_margin` in one step, and
/// each engaged wall gets the exact discrete-time rows as well.
pub fn wall_control_constraints<T: Scalar>(
    p: Point2<T>,
    v: Vector2<T>,
    domain: &RectDomain<T>,
    params: &SafetyParams<T>,
) -> Result<Vec<ControlConstraint<T>>, ConstraintError> {
    let margins: Vec<T> = domain.walls().iter().map(|w| safety_margin(p, v, w, params)).collect();
    if let Some((wall, &g)) = margins
        .iter()
        .enumerate()
        .find(|(_, &g)| !(g <= T::lit(SAFETY_TOLERANCE)))
    {
        return Err(ConstraintError::StateUnsafe {
            wall,
            margin: g.to_f64().unwrap_or(f64::NAN),
        });
    }

    let braking = params.braking();
    let mut rows = Vec::new();
    for (k, (wall, &g)) in domain.walls().iter().zip(&margins).enumerate() {
        let n = wall.normal();
        let s = v.dot(n);
        let mut engaged = g >= -params.activation_margin;
        if let Some(dt) = params.step {
            let reach = params.u_max * (n.x.abs() + n.y.abs());
            let d = wall.signed_distance(p);
            let worst = next_margin(d, s, reach, dt, params).max(next_margin(d, s, -reach, dt, params));
            engaged = engaged || worst >= -params.activation_margin;
        }
        if !engaged {
            continue;
        }
        let tag = ConstraintTag::Wall(k);
        let parallel = T::lit(PARALLEL_SPEED);
        if s > parallel {
            rows.push(ControlConstraint::new(n, -braking, tag));
        } else if s < -parallel {
            rows.push(ControlConstraint::new(-n, braking, tag));
        }
        if let Some(dt) = params.step {
            let (lo, hi) = nonincreasing_interval(s, dt, braking);
            rows.push(ControlConstraint::new(n, hi, tag));
            rows.push(ControlConstraint::new(-n, -lo, tag));
        }
    }
    Ok(rows)
}

/// Flocking row for an agent outside its neighborhood disk:
/// `(‖ṙ‖/u_max) u·r + ṙ·r <= 0`. `None` when `ṙ = 0`, where the condition
/// holds for every control.
pub fn flocking_constraint<T: Scalar>(r: Vector2<T>, r_dot: Vector2<T>, u_max: T) -> Option<ControlConstraint<T>> {
    let speed = r_dot.norm();
    (speed > T::zero()).then(|| ControlConstraint::new(r * (speed / u_max), -r_dot.dot(r), ConstraintTag::Flocking))
}

/// Predator-repulsion row for an agent inside the predator ball:
/// `-(‖ḋ‖/u_max) u·d − ḋ·d <= 0`. `None` when `ḋ = 0`.
pub fn predator_constraint<T: Scalar>(d: Vector2<T>, d_dot: Vector2<T>, u_max: T) -> Option<ControlConstraint<T>> {
    let speed = d_dot.norm();
    (speed > T::zero()).then(|| ControlConstraint::new(-d * (speed / u_max), d_dot.dot(d), ConstraintTag::Predator))
}
