//! Analysis and synthesis of scientific workflow instances.
//!
//! Instances are task DAGs with runtimes and file sizes. From a set of
//! instances of one application, [`recipe::build_recipe`] finds repeating
//! sub-graphs and fits per-type distributions; [`generator::generate`]
//! replicates those sub-graphs to build larger synthetic instances. The
//! [`metrics`] and [`simulator`] modules compare synthetic and real instances.
//!
//! Numeric code in [`stats`], [`metrics`] and [`simulator`] is generic over
//! [`num::Real`]; the aliases below fix the scalar to `f64` or `f32`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod corpus;
pub mod dag;
pub mod generator;
pub mod graph;
pub mod metrics;
pub mod num;
pub mod patterns;
pub mod recipe;
pub mod simulator;
pub mod stats;
pub mod wfformat;

pub use generator::{generate, GenError, GenRequest};
pub use graph::{compute_type_hashes, HashedWorkflow, TypeHash};
pub use num::Real;
pub use patterns::{find_pattern_occurrences, PatternCatalog, PatternOccurrence};
pub use recipe::{build_recipe, load_recipe, save_recipe, Recipe, TypeStats};
pub use wfformat::{parse_instance, serialize_instance, validate_instance, Task, WorkflowInstance};

pub type FitResult = stats::FitResult<f64>;
pub type FitResultF32 = stats::FitResult<f32>;
pub type Sample = stats::Sample<f64>;
pub type SampleF32 = stats::Sample<f32>;
pub type ThfScore = metrics::ThfScore<f64>;
pub type ThfScoreF32 = metrics::ThfScore<f32>;
pub type Platform = simulator::Platform<f64>;
pub type PlatformF32 = simulator::Platform<f32>;
pub type SimReport = simulator::SimReport<f64>;
pub type SimReportF32 = simulator::SimReport<f32>;
