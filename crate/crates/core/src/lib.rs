//! Topology optimization for parts made by multi-axis milling.
//!
//! The design variable is a void field on a structured grid. It is filtered
//! into a fictitious material field, projected so that every void is reachable
//! by a tool along at least one milling direction, and the resulting physical
//! density drives a SIMP finite-element compliance analysis.

pub mod config;
pub mod error;
pub mod fea;
pub mod filter;
pub mod grid;
pub mod io;
pub mod machining;
pub mod optimizer;
pub mod runner;

pub use error::{Error, Result};
pub use fea::{FeaProblem, MaterialModel, SolveResult, SolverKind, SolverSettings};
pub use filter::FilterKernel;
pub use grid::StructuredGrid;
pub use machining::{HeavisideParams, MachiningProjection, MillingDirection};
pub use optimizer::{IterationRecord, Mode, OptimizationConfig, Optimizer};
