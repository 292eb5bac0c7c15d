//! Domain types shared across the planner: fleets, task trees, utilities and
//! tree validation.

mod fleet;
mod tree;
mod utility;
mod validate;

pub use fleet::{Fleet, RobotSpec};
pub use tree::{
    name_key, normalize_name, Constraint, NodeId, NodeKind, PrimitiveAction, TaskNode, TaskTree,
};
pub use utility::{compute_utility, ActionProfile, UtilityModel, UtilityTriple, UtilityWeights};
pub use validate::{validate_tree, NodeRef, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid fleet: {0}")]
    InvalidFleet(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("unknown robot type '{0}'")]
    UnknownRobotType(String),
    #[error("robot type '{robot_type}' has no capability '{capability}'")]
    UnknownCapability {
        robot_type: String,
        capability: String,
    },
    #[error("invalid utility configuration: {0}")]
    InvalidWeights(String),
}
