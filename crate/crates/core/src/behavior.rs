//! Per-agent mode selection by constraint relaxation.
//!
//! Every step each agent re-checks which of its constraints can be met
//! together. Flocking is dropped first, then predator avoidance; the
//! actuation box and wall rows are never dropped.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{box_constraints, feasible_vertices, ControlConstraint};
use crate::geometry::Vector2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgentMode {
    /// Walls, flocking and predator avoidance all enforced.
    Nominal,
    /// Flocking relaxed.
    Strained,
    /// Flocking and predator avoidance relaxed.
    Evasive,
}

impl AgentMode {
    pub const ALL: [AgentMode; 3] = [AgentMode::Nominal, AgentMode::Strained, AgentMode::Evasive];

    /// One-letter code used in trace files.
    pub fn code(self) -> char {
        match self {
            AgentMode::Nominal => 'N',
            AgentMode::Strained => 'S',
            AgentMode::Evasive => 'E',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "N" => Some(AgentMode::Nominal),
            "S" => Some(AgentMode::Strained),
            "E" => Some(AgentMode::Evasive),
            _ => None,
        }
    }
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BehaviorError {
    /// The box and wall rows alone are empty. Recursive feasibility rules
    /// this out for a safe state, so it points at an integration bug.
    #[error("safe action set is empty")]
    Infeasible,
}

/// The chosen mode, the rows handed to the solver (box included), and the
/// vertices of their feasible polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSelection<T> {
    pub mode: AgentMode,
    pub active: Vec<ControlConstraint<T>>,
    pub vertices: Vec<Vector2<T>>,
}

pub fn select_mode<T: Scalar>(
    wall_constraints: &[ControlConstraint<T>],
    flocking: Option<ControlConstraint<T>>,
    predator: Option<ControlConstraint<T>>,
    u_max: T,
) -> Result<ModeSelection<T>, BehaviorError> {
    let cascade = [
        (
            AgentMode::Nominal,
            flocking.iter().chain(predator.iter()).copied().collect::<Vec<_>>(),
        ),
        (AgentMode::Strained, predator.iter().copied().collect()),
        (AgentMode::Evasive, Vec::new()),
    ];
    for (mode, optional) in cascade {
        let active: Vec<ControlConstraint<T>> = box_constraints(u_max)
            .into_iter()
            .chain(wall_constraints.iter().copied())
            .chain(optional)
            .collect();
        let rows: Vec<_> = active.iter().map(|c| (c.a, c.c)).collect();
        let vertices = feasible_vertices(&rows);
        if !vertices.is_empty() {
            if mode != AgentMode::Nominal {
                log::trace!("relaxed to {mode:?}");
            }
            return Ok(ModeSelection { mode, active, vertices });
        }
    }
    Err(BehaviorError::Infeasible)
}
