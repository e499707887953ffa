pub mod edges;
pub mod error;
pub mod model;
pub mod objectives;

pub use edges::{Edge, Gain, GainEdge, HyperEdge};
pub use error::{Error, Result};
pub use model::{IncidenceMap, NodeIndex, Problem};
pub use objectives::{EdgeObjectiveAtom, ObjectiveAtom};
pub mod cli;
pub mod diagnostics;
pub mod generate;
pub mod io;
pub mod solver;

pub use solver::{solve, Mode, SolveResult, SolverConfig, Status};
