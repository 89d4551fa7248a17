//! Terrain-aware wireless deployment planning.
//!
//! The crate is organised as a pipeline: [`geodata`] turns rasters and tower
//! lists into demand nodes and candidate sites, [`propagation`] computes the
//! link budget for every node/site pair, [`optimizer`] selects the cheapest
//! set of sites that meets every node's rate floor, and [`verifier`]
//! recomputes achieved rates for any plan. [`agent`] exposes these stages as
//! function-calling tools driven by a ReAct loop.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod agent;
pub mod geodata;
pub mod optimizer;
pub mod pipeline;
pub mod propagation;
pub mod scenario;
pub mod synth;
pub mod verifier;

pub use geodata::{CandidateSite, DemandNode, GeoGrid, GeoPoint, Region, SiteKind};
pub use optimizer::{DeploymentPlan, OptimizerConfig, SolverStatus};
pub use propagation::{LinkRecord, RadioConfig};
pub use scenario::Scenario;
pub use verifier::VerificationReport;
