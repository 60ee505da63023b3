//! Delaunay adjacency of agent positions.
//!
//! Incremental Bowyer–Watson insertion seeded with a super-triangle whose
//! corners sit symbolically at infinity, so hull edges are never lost to a
//! finite bounding triangle. Cocircular ties are broken by lifting each point
//! by an infinitesimal that shrinks with its index: of four cocircular
//! points, the one with the lowest index decides the sign.

use std::collections::BTreeSet;

use super::{GeometryError, Point2};
use crate::scalar::Scalar;

/// Minimum separation between two agents, in meters.
pub const MIN_SEPARATION: f64 = 1e-9;

/// Maximum perpendicular spread, in meters, below which a point set is
/// treated as collinear.
pub const COLLINEAR_TOLERANCE: f64 = 1e-9;

/// Undirected Delaunay adjacency between agents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    n_agents: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborGraph {
    /// Builds a graph from unordered pairs. Self-loops are dropped and each
    /// pair is stored once as `(min, max)`.
    pub fn from_edges<I>(n_agents: usize, pairs: I) -> Result<Self, GeometryError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut edges = BTreeSet::new();
        for (i, j) in pairs {
            let n = n_agents;
            if i >= n || j >= n {
                return Err(GeometryError::IndexOutOfRange {
                    index: i.max(j),
                    n_agents: n,
                });
            }
            if i != j {
                edges.insert((i.min(j), i.max(j)));
            }
        }
        let mut adjacency = vec![Vec::new(); n_agents];
        for &(i, j) in &edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n_agents,
            edges,
            adjacency,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    /// Sorted neighbor indices of agent `i`.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], GeometryError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GeometryError::IndexOutOfRange {
                index: i,
                n_agents: self.n_agents,
            })
    }

    pub fn degree(&self, i: usize) -> Result<usize, GeometryError> {
        self.neighbors(i).map(<[usize]>::len)
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        if self.n_agents == 0 {
            return true;
        }
        let mut seen = vec![false; self.n_agents];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &self.adjacency[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Checks the preconditions shared by every neighbor-graph builder.
pub fn validate_points<T: Scalar>(points: &[Point2<T>]) -> Result<(), GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    if let Some(index) = points.iter().position(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite(index));
    }
    let min_sep = T::lit(MIN_SEPARATION);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if points[i].distance(points[j]) <= min_sep {
                return Err(GeometryError::DuplicatePoints(i, j));
            }
        }
    }
    Ok(())
}

/// If every point lies within [`COLLINEAR_TOLERANCE`] of one line, returns
/// the path graph obtained by sorting along that line.
pub fn collinear_path<T: Scalar>(points: &[Point2<T>]) -> Option<Vec<(usize, usize)>> {
    let origin = points[0];
    let far = points
        .iter()
        .copied()
        .max_by(|a, b| {
            a.distance(origin)
                .partial_cmp(&b.distance(origin))
                .expect("finite points")
        })
        .expect("nonempty");
    let dir = (far - origin).normalized()?;
    let tol = T::lit(COLLINEAR_TOLERANCE);
    if points.iter().any(|p| dir.cross(*p - origin).abs() > tol) {
        return None;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (pi, pj) = ((points[i] - origin).dot(dir), (points[j] - origin).dot(dir));
        pi.partial_cmp(&pj).expect("finite").then(i.cmp(&j))
    });
    Some(order.windows(2).map(|w| (w[0], w[1])).collect())
}

/// Delaunay edges of `points`: `(i, j)` is present iff the Voronoi cells of
/// agents `i` and `j` share an edge (after the index tie-break).
pub fn delaunay_edges<T: Scalar>(points: &[Point2<T>]) -> Result<NeighborGraph, GeometryError> {
    validate_points(points)?;
    let n = points.len();
    if n == 2 {
        return NeighborGraph::from_edges(2, [(0, 1)]);
    }
    if let Some(path) = collinear_path(points) {
        return NeighborGraph::from_edges(n, path);
    }
    let triangles = Triangulator::new(points).run()?;
    let mut pairs = Vec::with_capacity(3 * triangles.len());
    for tri in &triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            if a < n && b < n {
                pairs.push((a, b));
            }
        }
    }
    NeighborGraph::from_edges(n, pairs)
}

/// Agents adjacent to `i`.
pub fn neighborhood(i: usize, graph: &NeighborGraph) -> Result<&[usize], GeometryError> {
    let list = graph.neighbors(i)?;
    if list.is_empty() {
        return Err(GeometryError::EmptyNeighborhood(i));
    }
    Ok(list)
}

fn error_bound<T: Scalar>(magnitude: T) -> T {
    T::epsilon() * T::lit(4096.0) * magnitude
}

/// Twice the signed area of `(a, b, c)`; zero within roundoff is reported as zero.
pub(crate) fn orient<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> T {
    let (l, r) = ((b.x - a.x) * (c.y - a.y), (b.y - a.y) * (c.x - a.x));
    let det = l - r;
    if det.abs() <= error_bound(l.abs() + r.abs()) {
        T::zero()
    } else {
        det
    }
}

/// Perturbed in-circle test: `true` iff `d` lies strictly inside the
/// circumcircle of the counterclockwise triangle `(a, b, c)`.
///
/// Exact ties are resolved by the point with the smallest index, whose lift
/// dominates; a lifted point moves outside the circle of the other three.
pub(crate) fn in_circle<T: Scalar>(pts: &[Point2<T>], ids: [usize; 4]) -> bool {
    let [a, b, c, d] = ids.map(|i| pts[i]);
    let (ad, bd, cd) = (a - d, b - d, c - d);
    let (la, lb, lc) = (ad.norm_squared(), bd.norm_squared(), cd.norm_squared());
    let (ca, cb, cc) = (bd.cross(cd), -ad.cross(cd), ad.cross(bd));
    let det = la * ca + lb * cb + lc * cc;
    let perm = la * ((bd.x * cd.y).abs() + (bd.y * cd.x).abs())
        + lb * ((ad.x * cd.y).abs() + (ad.y * cd.x).abs())
        + lc * ((ad.x * bd.y).abs() + (ad.y * bd.x).abs());
    if det.abs() > error_bound(perm) {
        return det > T::zero();
    }
    // Coefficient of each point's lift in the determinant.
    let cd_coef = -(ca + cb + cc);
    let mut terms = [(ids[0], ca), (ids[1], cb), (ids[2], cc), (ids[3], cd_coef)];
    terms.sort_by_key(|&(id, _)| id);
    terms
        .iter()
        .find(|(_, coef)| *coef != T::zero())
        .is_some_and(|&(_, coef)| coef > T::zero())
}

/// Bowyer–Watson state. Vertex ids `n`, `n + 1`, `n + 2` are the symbolic
/// super-triangle corners.
struct Triangulator<'a, T> {
    points: &'a [Point2<T>],
    directions: [Point2<T>; 3],
    triangles: Vec<[usize; 3]>,
}

impl<'a, T: Scalar> Triangulator<'a, T> {
    fn new(points: &'a [Point2<T>]) -> Self {
        let n = points.len();
        // Offset keeps the directions clear of axis-aligned and diagonal input.
        let base = T::lit(0.261_799_387_799_149_4 + 0.013);
        let third = T::lit(2.0 * std::f64::consts::PI / 3.0);
        let dir = |k: f64| {
            let angle = base + third * T::lit(k);
            Point2::new(angle.cos(), angle.sin())
        };
        Self {
            points,
            directions: [dir(0.0), dir(1.0), dir(2.0)],
            triangles: vec![[n, n + 1, n + 2]],
        }
    }

    fn is_super(&self, v: usize) -> bool {
        v >= self.points.len()
    }

    fn direction(&self, v: usize) -> Point2<T> {
        self.directions[v - self.points.len()]
    }

    fn contains(&self, tri: [usize; 3], d: usize) -> bool {
        let supers = tri.iter().filter(|&&v| self.is_super(v)).count();
        match supers {
            0 => in_circle(self.points, [tri[0], tri[1], tri[2], d]),
            1 => {
                // Rotate so the super vertex is last: the circle degenerates
                // to the open half-plane left of the real edge, plus the
                // edge's relative interior.
                let k = tri.iter().position(|&v| self.is_super(v)).unwrap();
                let a = self.points[tri[(k + 1) % 3]];
                let b = self.points[tri[(k + 2) % 3]];
                let p = self.points[d];
                let o = orient(a, b, p);
                if o != T::zero() {
                    o > T::zero()
                } else {
                    (p - a).dot(b - a) > T::zero() && (p - b).dot(a - b) > T::zero()
                }
            }
            2 => {
                // The circle through one real vertex and two far corners
                // flattens to a half-plane bounded by the tangent at the
                // real vertex, opening toward the limit circumcenter.
                let k = tri.iter().position(|&v| !self.is_super(v)).unwrap();
                let a = self.points[tri[k]];
                let u = self.direction(tri[(k + 1) % 3]);
                let w = self.direction(tri[(k + 2) % 3]);
                let center = Point2::new(w.y - u.y, u.x - w.x) / (T::two() * u.cross(w));
                let delta = self.points[d] - a;
                let s = delta.dot(center);
                s > error_bound(delta.norm() * center.norm())
            }
            _ => true,
        }
    }

    fn insert(&mut self, d: usize) -> Result<(), GeometryError> {
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
            self.triangles.iter().partition(|&&tri| self.contains(tri, d));
        if bad.is_empty() {
            return Err(GeometryError::Degenerate(d));
        }
        let directed: BTreeSet<(usize, usize)> = bad
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .collect();
        self.triangles = keep;
        for &(a, b) in &directed {
            if !directed.contains(&(b, a)) {
                self.triangles.push([a, b, d]);
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<Vec<[usize; 3]>, GeometryError> {
        for d in 0..self.points.len() {
            self.insert(d)?;
        }
        Ok(self.triangles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(raw: &[(f64, f64)]) -> Vec<Point2<f64>> {
        raw.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn triangle_is_its_own_triangulation() {
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 0.2), (0.3, 0.9)])).unwrap();
        assert_eq!(g.edge_count(), 3);
    }

    #[test]
    fn two_points_share_one_edge() {
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 1.0)])).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        assert_eq!(neighborhood(0, &g).unwrap(), &[1]);
    }

    #[test]
    fn unit_square_gets_four_sides_and_one_diagonal() {
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(g.edge_count(), 5);
        for side in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            assert!(g.contains(side.0, side.1));
        }
        assert!(g.contains(0, 2) ^ g.contains(1, 3));
    }

    #[test]
    fn star_center_sees_all_four_arms() {
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)])).unwrap();
        assert_eq!(neighborhood(0, &g).unwrap(), &[1, 2, 3, 4]);
        assert!(!g.contains(1, 3));
        assert!(!g.contains(2, 4));
    }

    #[test]
    fn collinear_points_form_a_sorted_path() {
        let g = delaunay_edges(&pts(&[(2.0, 2.0), (0.0, 0.0), (3.0, 3.0), (1.0, 1.0)])).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 2), (0, 3), (1, 3)]);
    }

    #[test]
    fn midpoint_on_hull_edge_splits_it() {
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0), (1.0, 1.5)])).unwrap();
        assert!(!g.contains(0, 1));
        assert!(g.contains(0, 2) && g.contains(1, 2));
        assert_eq!(g.edge_count(), 5);
    }

    #[test]
    fn errors_on_bad_input() {
        assert!(matches!(
            delaunay_edges(&pts(&[(0.0, 0.0)])),
            Err(GeometryError::TooFewPoints(1))
        ));
        assert!(matches!(
            delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0)])),
            Err(GeometryError::DuplicatePoints(0, 2))
        ));
        let g = delaunay_edges(&pts(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
        assert!(matches!(
            neighborhood(5, &g),
            Err(GeometryError::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn single_precision_triangulates() {
        let p: Vec<Point2<f32>> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.4)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y))
            .collect();
        let g = delaunay_edges(&p).unwrap();
        assert_eq!(g.degree(4).unwrap(), 4);
        assert_eq!(g.edge_count(), 8);
    }
}
