//! Experience-based, asymptotically improving motion planning.
//!
//! The crate is organised around a handful of modules:
//!
//! - [`cspace`]: configuration spaces, robot models, obstacle scenes and
//!   state/motion validity checks.
//! - [`experience`]: experience paths, the path library, retrieval and the
//!   affine mapping of an experience onto a new query.
//! - [`planner`]: the bidirectional experience-driven planner with
//!   shortcutting, rewiring, informed rejection and pruning.
//! - [`baselines`]: RRT-Connect and RRT* used for dataset generation and
//!   comparison.
//! - [`scenegen`]: randomized scene templates, query generation and dataset
//!   construction.

pub mod baselines;
pub mod clock;
pub mod cspace;
pub mod error;
pub mod experience;
pub mod planner;
pub mod scenegen;

pub use clock::{Budget, Clock, Stopwatch};
pub use cspace::{ConfigSpace, Obstacle, RobotModel, Scene};
pub use error::{Error, Result};
pub use experience::{ExperiencePath, PathLibrary};
pub use planner::{plan, plan_observed, PlanEvent, PlanResult, PlanStatus, PlannerConfig, Query};
