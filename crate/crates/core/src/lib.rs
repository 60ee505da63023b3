//! Constraint-driven flocking.
//!
//! Each agent is a double integrator confined to a rectangular arena. Every
//! step it looks at its Voronoi neighbors, builds linear constraints on its
//! acceleration (wall stopping distance, flocking disk, predator ball),
//! relaxes the lower-priority ones when they cannot be met together, and
//! picks the control that keeps its next-step speed closest to a preferred
//! cruising speed.
//!
//! The math modules are generic over [`Scalar`]; the aliases below fix them
//! to `f64`, which is what the simulation engine uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod constraints;
pub mod engine;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod scalar;
pub mod solver;

pub use scalar::Scalar;

pub type Vec2 = geometry::Vector2<f64>;
pub type Point2 = geometry::Point2<f64>;
pub type NeighborhoodSummary = geometry::NeighborhoodSummary<f64>;
pub type HalfPlane = constraints::HalfPlane<f64>;
pub type RectDomain = constraints::RectDomain<f64>;
pub type ControlConstraint = constraints::ControlConstraint<f64>;
pub type SafetyParams = constraints::SafetyParams<f64>;
pub type CornerState = constraints::CornerState<f64>;
pub type RelativeState = constraints::RelativeState<f64>;
pub type ModeSelection = behavior::ModeSelection<f64>;
pub type SpeedObjective = solver::SpeedObjective<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;

pub use behavior::AgentMode;
pub use constraints::ConstraintTag;
pub use engine::{BoidState, PredatorState, StepTrace, World, WorldConfig};
pub use geometry::NeighborGraph;
pub use metrics::RunMetrics;
