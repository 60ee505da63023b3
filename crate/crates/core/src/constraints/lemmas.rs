//! Closed-form incompatibility tests for a boid pinned in a corner.
//!
//! The state must sit exactly on two perpendicular walls' stopping-distance
//! boundaries while moving toward (or along) both. Admissible controls are
//! then `u = -u1·n1 - u2·n2` with `u_max/alpha <= u1, u2 <= u_max`, and each
//! test asks whether the flocking and/or predator rows leave any such pair.

use super::{feasible_vertices, safety_margin, ConstraintError, HalfPlane, SafetyParams};
use crate::geometry::{Point2, Vector2};
use crate::scalar::Scalar;

/// Agent state at a corner of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerState<T> {
    pub position: Point2<T>,
    pub velocity: Vector2<T>,
    pub walls: [HalfPlane<T>; 2],
    pub params: SafetyParams<T>,
}

/// Relative vector, its rate, and the radius gating its constraint
/// (`R` for flocking, `Gamma` for the predator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeState<T> {
    pub offset: Vector2<T>,
    pub rate: Vector2<T>,
    pub radius: T,
}

impl<T: Scalar> CornerState<T> {
    fn normals(&self) -> Result<(Vector2<T>, Vector2<T>), ConstraintError> {
        let (n1, n2) = (self.walls[0].normal(), self.walls[1].normal());
        if n1.dot(n2).abs() > T::lit(1e-12) {
            return Err(ConstraintError::PremiseViolated("walls must be perpendicular"));
        }
        for wall in &self.walls {
            if safety_margin(self.position, self.velocity, wall, &self.params).abs() > T::lit(1e-9) {
                return Err(ConstraintError::PremiseViolated("both wall margins must be zero"));
            }
            if self.velocity.dot(wall.normal()) < -T::lit(1e-12) {
                return Err(ConstraintError::PremiseViolated(
                    "velocity must not recede from either wall",
                ));
            }
        }
        Ok((n1, n2))
    }

    /// `(u1, u2) / u_max` corners in the order the conditions are listed.
    fn weight_corners(&self) -> [(T, T); 4] {
        let (one, inv) = (T::one(), T::one() / self.params.alpha);
        [(one, one), (inv, one), (one, inv), (inv, inv)]
    }
}

/// Projections of the unit offset onto both normals, and the rate's norm
/// and radial component.
fn project<T: Scalar>(rel: &RelativeState<T>, n1: Vector2<T>, n2: Vector2<T>) -> (T, T, T, T) {
    let unit = rel.offset.normalized().unwrap_or_else(Vector2::zero);
    (unit.dot(n1), unit.dot(n2), rel.rate.norm(), rel.rate.dot(unit))
}

fn require_outside<T: Scalar>(rel: &RelativeState<T>, what: &'static str) -> Result<(), ConstraintError> {
    if rel.offset.norm() > rel.radius {
        Ok(())
    } else {
        Err(ConstraintError::PremiseViolated(what))
    }
}

/// Largest slack of the flocking condition over the corner weights;
/// negative iff no admissible corner control satisfies it.
pub fn lemma1_slack<T: Scalar>(corner: &CornerState<T>, flock: &RelativeState<T>) -> Result<T, ConstraintError> {
    let (n1, n2) = corner.normals()?;
    require_outside(flock, "flocking offset must exceed R")?;
    let (p1, p2, speed, radial) = project(flock, n1, n2);
    Ok(corner
        .weight_corners()
        .iter()
        .map(|&(w1, w2)| speed * (w1 * p1 + w2 * p2) - radial)
        .fold(T::neg_infinity(), T::max))
}

/// Flocking conflict: no admissible corner control satisfies the flocking row.
pub fn lemma1_infeasible<T: Scalar>(
    corner: &CornerState<T>,
    flock: &RelativeState<T>,
) -> Result<bool, ConstraintError> {
    lemma1_slack(corner, flock).map(|s| s < T::zero())
}

/// Largest slack of the predator condition over the corner weights.
pub fn lemma2_slack<T: Scalar>(corner: &CornerState<T>, predator: &RelativeState<T>) -> Result<T, ConstraintError> {
    let (n1, n2) = corner.normals()?;
    require_outside(predator, "predator offset must exceed Gamma")?;
    let (p1, p2, speed, radial) = project(predator, n1, n2);
    Ok(corner
        .weight_corners()
        .iter()
        .map(|&(w1, w2)| radial - speed * (w1 * p1 + w2 * p2))
        .fold(T::neg_infinity(), T::max))
}

/// Predator conflict: no admissible corner control satisfies the predator row.
pub fn lemma2_infeasible<T: Scalar>(
    corner: &CornerState<T>,
    predator: &RelativeState<T>,
) -> Result<bool, ConstraintError> {
    lemma2_slack(corner, predator).map(|s| s < T::zero())
}

/// Coefficients of both conditions as `g·x >= h` in `x = (u1, u2)/u_max`.
fn joint_rows<T: Scalar>(
    corner: &CornerState<T>,
    flock: &RelativeState<T>,
    predator: &RelativeState<T>,
) -> Result<[(Vector2<T>, T); 2], ConstraintError> {
    let (n1, n2) = corner.normals()?;
    require_outside(flock, "flocking offset must exceed R")?;
    require_outside(predator, "predator offset must exceed Gamma")?;
    let (r1, r2, r_speed, r_radial) = project(flock, n1, n2);
    let (d1, d2, d_speed, d_radial) = project(predator, n1, n2);
    Ok([
        (Vector2::new(r1, r2) * r_speed, r_radial),
        (-Vector2::new(d1, d2) * d_speed, -d_radial),
    ])
}

/// Best worst-case slack of the joint system over the admissible square:
/// `max_x min_k (g_k·x − h_k)`. The maximum of this concave piecewise-linear
/// function sits at a square corner or where the crease meets an edge.
pub fn lemma3_slack<T: Scalar>(
    corner: &CornerState<T>,
    flock: &RelativeState<T>,
    predator: &RelativeState<T>,
) -> Result<T, ConstraintError> {
    let rows = joint_rows(corner, flock, predator)?;
    let (lo, hi) = (T::one() / corner.params.alpha, T::one());
    let worst = |x: Vector2<T>| rows.iter().map(|&(g, h)| g.dot(x) - h).fold(T::infinity(), T::min);
    let mut candidates = vec![
        Vector2::new(lo, lo),
        Vector2::new(hi, lo),
        Vector2::new(lo, hi),
        Vector2::new(hi, hi),
    ];
    // Crease: (g0 − g1)·x = h0 − h1.
    let (dg, dh) = (rows[0].0 - rows[1].0, rows[0].1 - rows[1].1);
    for fixed in [lo, hi] {
        if dg.y != T::zero() {
            let y = (dh - dg.x * fixed) / dg.y;
            if y >= lo && y <= hi {
                candidates.push(Vector2::new(fixed, y));
            }
        }
        if dg.x != T::zero() {
            let x = (dh - dg.y * fixed) / dg.x;
            if x >= lo && x <= hi {
                candidates.push(Vector2::new(x, fixed));
            }
        }
    }
    Ok(candidates.into_iter().map(worst).fold(T::neg_infinity(), T::max))
}

/// Joint conflict: the flocking and predator conditions admit no common
/// corner control.
pub fn lemma3_infeasible<T: Scalar>(
    corner: &CornerState<T>,
    flock: &RelativeState<T>,
    predator: &RelativeState<T>,
) -> Result<bool, ConstraintError> {
    let [(g1, h1), (g2, h2)] = joint_rows(corner, flock, predator)?;
    let (lo, hi) = (T::one() / corner.params.alpha, T::one());
    let (o, i) = (T::zero(), T::one());
    let rows = [
        (-g1, -h1),
        (-g2, -h2),
        (Vector2::new(i, o), hi),
        (Vector2::new(o, i), hi),
        (Vector2::new(-i, o), -lo),
        (Vector2::new(o, -i), -lo),
    ];
    Ok(feasible_vertices(&rows).is_empty())
}

#[cfg(test)]
mod tests {
    use super::super::{flocking_constraint, polytope_vertices, wall_control_constraints, RectDomain};
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    /// Corner at (+3, +3) of a 6 m square, moving with `vel`.
    fn corner(vel: Vector2<f64>, alpha: f64) -> CornerState<f64> {
        let params = SafetyParams::new(alpha, 0.1, 0.01).unwrap();
        let stop = |s: f64| alpha * s * s / (2.0 * 0.1);
        CornerState {
            position: v(3.0 - stop(vel.x), 3.0 - stop(vel.y)),
            velocity: vel,
            walls: [
                HalfPlane::new(v(1.0, 0.0), -3.0).unwrap(),
                HalfPlane::new(v(0.0, 1.0), -3.0).unwrap(),
            ],
            params,
        }
    }

    #[test]
    fn opposing_offset_with_outward_rate_is_infeasible() {
        let c = corner(v(0.05, 0.04), 2.0);
        // r̂ opposes the corner direction and the agent is receding from its
        // center, so every admissible control pushes the wrong way.
        let flock = RelativeState {
            offset: v(-0.3, -0.3),
            rate: v(-0.2, -0.2),
            radius: 0.025,
        };
        assert!(lemma1_infeasible(&c, &flock).unwrap());
    }

    #[test]
    fn strongly_inward_rate_is_feasible() {
        let c = corner(v(0.05, 0.04), 2.0);
        let r = v(-0.3, -0.3);
        let unit = r / r.norm();
        // ṙ·r̂ <= -‖ṙ‖·2/alpha
        let flock = RelativeState {
            offset: r,
            rate: -unit * 0.1,
            radius: 0.025,
        };
        assert!(!lemma1_infeasible(&c, &flock).unwrap());
    }

    #[test]
    fn alpha_one_reduces_to_a_single_check() {
        let c = corner(v(0.05, 0.05), 1.0);
        let flock = RelativeState {
            offset: v(-0.2, 0.1),
            rate: v(0.03, -0.07),
            radius: 0.025,
        };
        let slack = lemma1_slack(&c, &flock).unwrap();
        let unit = flock.offset / flock.offset.norm();
        let direct = flock.rate.norm() * (unit.x + unit.y) - flock.rate.dot(unit);
        assert!((slack - direct).abs() < 1e-15);
    }

    #[test]
    fn premises_are_enforced() {
        let mut c = corner(v(0.05, 0.04), 1.0);
        let flock = RelativeState {
            offset: v(0.01, 0.0),
            rate: v(0.1, 0.0),
            radius: 0.025,
        };
        assert!(matches!(
            lemma1_infeasible(&c, &flock),
            Err(ConstraintError::PremiseViolated(_))
        ));
        c.position.x -= 0.1;
        let flock = RelativeState {
            offset: v(1.0, 0.0),
            ..flock
        };
        assert!(matches!(
            lemma1_infeasible(&c, &flock),
            Err(ConstraintError::PremiseViolated(_))
        ));
        let pred = RelativeState {
            offset: v(0.1, 0.0),
            rate: v(0.1, 0.0),
            radius: 0.25,
        };
        let c = corner(v(0.05, 0.04), 1.0);
        assert!(matches!(
            lemma2_infeasible(&c, &pred),
            Err(ConstraintError::PremiseViolated(_))
        ));
    }

    #[test]
    fn lemma1_matches_polytope_emptiness() {
        // Map the flocking row into (u1, u2) space and compare with vertex enumeration.
        let c = corner(v(0.07, 0.02), 1.5);
        let (n1, n2) = (c.walls[0].normal(), c.walls[1].normal());
        for k in 0..64 {
            let theta = k as f64 * 0.1;
            let flock = RelativeState {
                offset: v(theta.cos(), theta.sin()) * 0.4,
                rate: v((1.7 * theta).sin(), (0.3 * theta).cos()) * 0.15,
                radius: 0.025,
            };
            let slack = lemma1_slack(&c, &flock).unwrap();
            if slack.abs() < 1e-6 {
                continue;
            }
            let row = flocking_constraint(flock.offset, flock.rate, 0.1).unwrap();
            let u_max = c.params.u_max;
            let lo = u_max / c.params.alpha;
            let rows = [
                (v(-row.a.dot(n1), -row.a.dot(n2)), row.c),
                (v(1.0, 0.0), u_max),
                (v(0.0, 1.0), u_max),
                (v(-1.0, 0.0), -lo),
                (v(0.0, -1.0), -lo),
            ];
            let empty = feasible_vertices(&rows).is_empty();
            assert_eq!(empty, lemma1_infeasible(&c, &flock).unwrap(), "k={k}");
        }
    }

    #[test]
    fn joint_slack_and_polygon_agree() {
        let c = corner(v(0.03, 0.06), 3.0);
        for k in 0..100 {
            let t = k as f64 * 0.37;
            let flock = RelativeState {
                offset: v(t.cos(), t.sin()) * 0.5,
                rate: v((2.1 * t).cos(), (1.3 * t).sin()) * 0.1,
                radius: 0.025,
            };
            let pred = RelativeState {
                offset: v((0.7 * t + 1.0).cos(), (0.7 * t + 1.0).sin()) * 0.6,
                rate: v((1.1 * t).sin(), (2.3 * t).cos()) * 0.2,
                radius: 0.25,
            };
            let slack = lemma3_slack(&c, &flock, &pred).unwrap();
            if slack.abs() < 1e-6 {
                continue;
            }
            assert_eq!(slack < 0.0, lemma3_infeasible(&c, &flock, &pred).unwrap(), "k={k}");
        }
    }

    #[test]
    fn corner_candidate_control_is_wall_feasible() {
        let c = corner(v(0.05, 0.04), 1.0);
        let domain = RectDomain::square(6.0).unwrap();
        let rows = wall_control_constraints(c.position, c.velocity, &domain, &c.params).unwrap();
        let verts = polytope_vertices(&rows, 0.1);
        assert_eq!(verts, vec![v(-0.1, -0.1)]);
    }
}
