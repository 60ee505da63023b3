//! Vertex enumeration for small bounded 2D polygons given as `a·u <= c` rows.

use super::{box_constraints, ControlConstraint};
use crate::geometry::Vector2;
use crate::scalar::Scalar;

/// Slack, per unit of `max(1, ‖a‖)`, within which a row counts as satisfied.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Vertices closer than this are merged.
pub const DEDUP_TOLERANCE: f64 = 1e-10;

/// Vertices of the control polygon cut from the actuation box by
/// `constraints`, counterclockwise. Empty iff the polygon is empty within
/// [`FEASIBILITY_TOLERANCE`]. Degenerate polygons come back as one or two
/// vertices.
pub fn polytope_vertices<T: Scalar>(constraints: &[ControlConstraint<T>], u_max: T) -> Vec<Vector2<T>> {
    let rows: Vec<(Vector2<T>, T)> = box_constraints(u_max)
        .iter()
        .chain(constraints)
        .map(|c| (c.a, c.c))
        .collect();
    feasible_vertices(&rows)
}

/// Vertices of `{ u : a·u <= c for all rows }`, which must be bounded when
/// nonempty. Rows with `a = 0` are kept as pure feasibility checks.
pub fn feasible_vertices<T: Scalar>(rows: &[(Vector2<T>, T)]) -> Vec<Vector2<T>> {
    let tol = T::lit(FEASIBILITY_TOLERANCE);
    let satisfied = |u: Vector2<T>| rows.iter().all(|&(a, c)| a.dot(u) - c <= tol * a.norm().max(T::one()));

    let lines: Vec<(Vector2<T>, T)> = rows
        .iter()
        .filter_map(|&(a, c)| {
            let n = a.norm();
            (n > T::epsilon()).then(|| (a / n, c / n))
        })
        .collect();
    if rows.iter().any(|&(a, c)| a.norm() <= T::epsilon() && c < -tol) {
        return Vec::new();
    }

    let mut candidates = Vec::new();
    for i in 0..lines.len() {
        for j in (i + 1)..lines.len() {
            let ((ni, ci), (nj, cj)) = (lines[i], lines[j]);
            let det = ni.cross(nj);
            if det.abs() <= T::lit(1e-12) {
                continue;
            }
            let u = Vector2::new((ci * nj.y - cj * ni.y) / det, (ni.x * cj - nj.x * ci) / det);
            if u.is_finite() && satisfied(u) {
                candidates.push(u);
            }
        }
    }
    convex_hull(candidates)
}

/// Andrew's monotone chain; collinear and coincident points are dropped.
fn convex_hull<T: Scalar>(mut points: Vec<Vector2<T>>) -> Vec<Vector2<T>> {
    points.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .expect("finite")
            .then(a.y.partial_cmp(&b.y).expect("finite"))
    });
    let dedup = T::lit(DEDUP_TOLERANCE);
    points.dedup_by(|a, b| a.distance(*b) <= dedup);
    if points.len() <= 2 {
        if points.len() == 2 && points[0].distance(points[1]) <= dedup {
            points.pop();
        }
        return points;
    }

    let turn = |o: Vector2<T>, a: Vector2<T>, b: Vector2<T>| (a - o).cross(b - o);
    let chain = |pts: &mut dyn Iterator<Item = Vector2<T>>| {
        let mut out: Vec<Vector2<T>> = Vec::new();
        for p in pts {
            while out.len() >= 2 && turn(out[out.len() - 2], out[out.len() - 1], p) <= T::zero() {
                out.pop();
            }
            out.push(p);
        }
        out.pop();
        out
    };
    let mut hull = chain(&mut points.iter().copied());
    hull.extend(chain(&mut points.iter().rev().copied()));
    // Far-apart but near-duplicate survivors of the two chains.
    hull.dedup_by(|a, b| a.distance(*b) <= dedup);
    if hull.len() > 1 && hull[0].distance(hull[hull.len() - 1]) <= dedup {
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::super::ConstraintTag;
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    fn row(ax: f64, ay: f64, c: f64) -> ControlConstraint<f64> {
        ControlConstraint::new(v(ax, ay), c, ConstraintTag::Flocking)
    }

    #[test]
    fn box_only_has_four_corners() {
        let verts = polytope_vertices::<f64>(&[], 0.1);
        assert_eq!(verts, vec![v(-0.1, -0.1), v(0.1, -0.1), v(0.1, 0.1), v(-0.1, 0.1)]);
    }

    #[test]
    fn face_of_the_box() {
        let verts = polytope_vertices(&[row(1.0, 0.0, -0.1)], 0.1);
        assert_eq!(verts, vec![v(-0.1, -0.1), v(-0.1, 0.1)]);
    }

    #[test]
    fn contradictory_rows_are_empty() {
        let verts = polytope_vertices(&[row(1.0, 0.0, -0.1), row(-1.0, 0.0, -0.1)], 0.1);
        assert!(verts.is_empty());
    }

    #[test]
    fn single_point_polygon() {
        let verts = polytope_vertices(&[row(1.0, 0.0, -0.1), row(0.0, 1.0, -0.1)], 0.1);
        assert_eq!(verts, vec![v(-0.1, -0.1)]);
    }

    #[test]
    fn zero_rows_only_check_their_constant() {
        assert_eq!(polytope_vertices(&[row(0.0, 0.0, 0.0)], 0.1).len(), 4);
        assert!(polytope_vertices(&[row(0.0, 0.0, -1.0)], 0.1).is_empty());
    }

    #[test]
    fn diagonal_cut_is_counterclockwise() {
        let verts = polytope_vertices(&[row(1.0, 1.0, 0.0)], 0.1);
        assert_eq!(verts.len(), 3);
        let area: f64 = (0..3).map(|i| verts[i].cross(verts[(i + 1) % 3])).sum();
        assert!(area > 0.0);
    }
}
