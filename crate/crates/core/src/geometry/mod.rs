//! Voronoi neighborhoods: Delaunay adjacency, neighborhood centers and
//! relative state vectors.

mod delaunay;
mod vector;

use thiserror::Error;

pub use delaunay::{
    collinear_path, delaunay_edges, neighborhood, validate_points, NeighborGraph, COLLINEAR_TOLERANCE, MIN_SEPARATION,
};
pub use vector::{Point2, Vector2};

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("agent index {index} out of range for {n_agents} agents")]
    IndexOutOfRange { index: usize, n_agents: usize },
    #[error("agent {0} has no neighbors")]
    EmptyNeighborhood(usize),
    #[error("triangulation lost point {0} to an inconsistent predicate")]
    Degenerate(usize),
}

/// What one agent knows about its Voronoi neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodSummary<T> {
    /// Mean neighbor position.
    pub center: Point2<T>,
    /// Own position minus `center`.
    pub rel_pos: Vector2<T>,
    /// Own velocity minus the mean neighbor velocity.
    pub rel_vel: Vector2<T>,
    pub degree: usize,
}

/// Neighborhood center and relative vectors for agent `i`.
///
/// The center's rate of change uses the neighbor set frozen at the current
/// snapshot, so `rel_vel` is the agent's velocity minus the mean velocity of
/// its current neighbors.
pub fn summarize<T: Scalar>(
    i: usize,
    positions: &[Point2<T>],
    velocities: &[Vector2<T>],
    graph: &NeighborGraph,
) -> Result<NeighborhoodSummary<T>, GeometryError> {
    let n = graph.n_agents();
    if i >= n || positions.len() != n || velocities.len() != n {
        return Err(GeometryError::IndexOutOfRange {
            index: i,
            n_agents: n.min(positions.len()),
        });
    }
    let neighbors = graph.neighbors(i)?;
    let center = Vector2::mean(neighbors.iter().map(|&j| positions[j])).ok_or(GeometryError::EmptyNeighborhood(i))?;
    let mean_vel =
        Vector2::mean(neighbors.iter().map(|&j| velocities[j])).ok_or(GeometryError::EmptyNeighborhood(i))?;
    Ok(NeighborhoodSummary {
        center,
        rel_pos: positions[i] - center,
        rel_vel: velocities[i] - mean_vel,
        degree: neighbors.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> Vector2<f64> {
        Vector2::new(x, y)
    }

    #[test]
    fn center_is_mean_of_neighbors() {
        let g = NeighborGraph::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let p = [v(1.0, 1.0), v(0.0, 0.0), v(2.0, 0.0)];
        let vel = [v(0.0, 0.0), v(1.0, 0.0), v(0.0, 1.0)];
        let s = summarize(0, &p, &vel, &g).unwrap();
        assert_eq!(s.center, v(1.0, 0.0));
        assert_eq!(s.rel_pos, v(0.0, 1.0));
        assert_eq!(s.rel_vel, v(-0.5, -0.5));
        assert_eq!(s.degree, 2);
    }

    #[test]
    fn single_neighbor() {
        let g = NeighborGraph::from_edges(2, [(0, 1)]).unwrap();
        let p = [v(0.0, 0.0), v(3.0, 4.0)];
        let s = summarize(0, &p, &[v(0.0, 0.0); 2], &g).unwrap();
        assert_eq!(s.center, v(3.0, 4.0));
        assert_eq!(s.rel_pos, v(-3.0, -4.0));
    }

    #[test]
    fn isolated_agent_is_an_error() {
        let g = NeighborGraph::from_edges(3, [(0, 1)]).unwrap();
        let p = [v(0.0, 0.0), v(1.0, 0.0), v(2.0, 2.0)];
        assert_eq!(
            summarize(2, &p, &[v(0.0, 0.0); 3], &g),
            Err(GeometryError::EmptyNeighborhood(2))
        );
    }
}
