//! Per-agent control synthesis: keep the next-step speed as close as
//! possible to the preferred speed, over the active constraint polygon.
//!
//! The cost `(‖v + dt·u‖ − v*)²` is not convex in `u` (its minimizers form a
//! circle), so projected gradient descent is restarted from the origin, the
//! previous control and every polygon vertex, and the best end point wins.

use thiserror::Error;

use crate::constraints::{box_constraints, ControlConstraint};
use crate::geometry::Vector2;
use crate::scalar::Scalar;

/// Row slack accepted by [`grid_oracle`].
pub const GRID_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("control polygon is empty")]
    EmptyPolytope,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedObjective<T> {
    pub v_current: Vector2<T>,
    /// Preferred speed, m/s.
    pub v_star: T,
    /// Lookahead step, s.
    pub dt: T,
}

impl<T: Scalar> SpeedObjective<T> {
    /// Velocity after applying `u` for one step.
    pub fn lookahead(&self, u: Vector2<T>) -> Vector2<T> {
        self.v_current + u * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub max_iters: usize,
    /// First trial step length in control space, m/s².
    pub initial_step: T,
    pub shrink_factor: T,
    /// Steps or moves shorter than this end a descent.
    pub stall_tol: T,
    /// Lookahead speeds at or below this use the fixed direction `(1, 0)`.
    pub zero_speed_eps: T,
}

impl<T: Scalar> SolverConfig<T> {
    pub fn for_actuation(u_max: T) -> Self {
        Self {
            max_iters: 100,
            initial_step: u_max,
            shrink_factor: T::half(),
            stall_tol: T::lit(1e-10),
            zero_speed_eps: T::lit(1e-9),
        }
    }
}

pub fn objective<T: Scalar>(u: Vector2<T>, obj: &SpeedObjective<T>) -> T {
    let e = obj.lookahead(u).norm() - obj.v_star;
    e * e
}

/// `2(‖w‖ − v*)·dt·ŵ` with `w` the lookahead velocity.
pub fn gradient<T: Scalar>(u: Vector2<T>, obj: &SpeedObjective<T>, zero_speed_eps: T) -> Vector2<T> {
    let w = obj.lookahead(u);
    let speed = w.norm();
    let dir = if speed <= zero_speed_eps {
        Vector2::new(T::one(), T::zero())
    } else {
        w / speed
    };
    dir * (T::two() * (speed - obj.v_star) * obj.dt)
}

fn closest_on_segment<T: Scalar>(u: Vector2<T>, a: Vector2<T>, b: Vector2<T>) -> Vector2<T> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == T::zero() {
        return a;
    }
    let t = ((u - a).dot(ab) / len2).max(T::zero()).min(T::one());
    a + ab * t
}

/// Euclidean projection onto the convex polygon with counterclockwise
/// `vertices` (a segment or a single point are allowed).
pub fn project_onto_polytope<T: Scalar>(u: Vector2<T>, vertices: &[Vector2<T>]) -> Result<Vector2<T>, SolverError> {
    match vertices {
        [] => Err(SolverError::EmptyPolytope),
        [p] => Ok(*p),
        [a, b] => Ok(closest_on_segment(u, *a, *b)),
        _ => {
            let n = vertices.len();
            let edges = (0..n).map(|i| (vertices[i], vertices[(i + 1) % n]));
            if edges.clone().all(|(a, b)| (b - a).cross(u - a) >= T::zero()) {
                return Ok(u);
            }
            let mut best = vertices[0];
            let mut best_d = T::infinity();
            for (a, b) in edges {
                let q = closest_on_segment(u, a, b);
                let d = (q - u).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
            Ok(best)
        }
    }
}

/// Lower cost wins; equal costs prefer larger `u_x`, then larger `u_y`.
fn improves<T: Scalar>(cand: (Vector2<T>, T), best: (Vector2<T>, T)) -> bool {
    let ((u, f), (b, g)) = (cand, best);
    f < g || (f == g && (u.x > b.x || (u.x == b.x && u.y > b.y)))
}

fn descend<T: Scalar>(
    start: Vector2<T>,
    obj: &SpeedObjective<T>,
    vertices: &[Vector2<T>],
    cfg: &SolverConfig<T>,
) -> Result<(Vector2<T>, T), SolverError> {
    let mut x = project_onto_polytope(start, vertices)?;
    let mut fx = objective(x, obj);
    let mut step = cfg.initial_step;
    'outer: for _ in 0..cfg.max_iters {
        let g = gradient(x, obj, cfg.zero_speed_eps);
        let Some(dir) = g.normalized() else { break };
        let (cand, fc) = loop {
            // Follow the projected direction at full step length, so that
            // progress along a face is not throttled by the blocked component.
            let probe = project_onto_polytope(x - dir * step, vertices)? - x;
            let Some(along) = probe.normalized() else { break 'outer };
            let cand = project_onto_polytope(x + along * step, vertices)?;
            let fc = objective(cand, obj);
            if fc < fx {
                break (cand, fc);
            }
            step = step * cfg.shrink_factor;
            if step < cfg.stall_tol {
                break 'outer;
            }
        };
        let moved = (cand - x).norm();
        x = cand;
        fx = fc;
        if moved < cfg.stall_tol {
            break;
        }
        step = (step / cfg.shrink_factor).min(cfg.initial_step);
    }
    Ok((x, fx))
}

/// Control minimizing [`objective`] over the polygon, by multi-start
/// projected gradient descent. Deterministic in its inputs.
pub fn solve_control<T: Scalar>(
    obj: &SpeedObjective<T>,
    vertices: &[Vector2<T>],
    cfg: &SolverConfig<T>,
    prev_u: Option<Vector2<T>>,
) -> Result<Vector2<T>, SolverError> {
    if vertices.is_empty() {
        return Err(SolverError::EmptyPolytope);
    }
    let starts = std::iter::once(Vector2::zero())
        .chain(prev_u)
        .chain(vertices.iter().copied());
    let mut best: Option<(Vector2<T>, T)> = None;
    for start in starts {
        let cand = descend(start, obj, vertices, cfg)?;
        if best.is_none_or(|b| improves(cand, b)) {
            best = Some(cand);
        }
    }
    Ok(best.expect("at least one start").0)
}

/// Exhaustive search over a `resolution × resolution` grid on the actuation
/// box, keeping points that satisfy every row within [`GRID_TOLERANCE`].
/// `None` when no grid point is feasible.
pub fn grid_oracle<T: Scalar>(
    obj: &SpeedObjective<T>,
    constraints: &[ControlConstraint<T>],
    u_max: T,
    resolution: usize,
) -> Option<(Vector2<T>, T)> {
    assert!(resolution >= 3, "grid resolution must be at least 3");
    let tol = T::lit(GRID_TOLERANCE);
    let rows: Vec<ControlConstraint<T>> = box_constraints(u_max)
        .into_iter()
        .chain(constraints.iter().copied())
        .collect();
    let last = T::from_usize(resolution - 1).unwrap();
    let coord = |k: usize| u_max * (T::two() * T::from_usize(k).unwrap() / last - T::one());
    let mut best: Option<(Vector2<T>, T)> = None;
    for i in 0..resolution {
        for j in 0..resolution {
            let u = Vector2::new(coord(i), coord(j));
            if rows.iter().all(|c| c.is_satisfied(u, tol)) {
                let cand = (u, objective(u, obj));
                if best.is_none_or(|b| improves(cand, b)) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}
