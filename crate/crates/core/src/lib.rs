//! Multi-order generative models (MOGen) for path data and centrality
//! measures computed on networks, observed paths and MOGen models.
//!
//! The crate covers the whole pipeline: reading path corpora or extracting
//! time-respecting paths from temporal networks, fitting models, computing
//! betweenness, closeness, path end probability, path continuation
//! probability and path reach, and evaluating how well each model predicts
//! influential nodes and node sequences in held-out paths.

pub mod absorbing;
pub mod centrality;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod format;
pub mod mogen_model;
pub mod network_model;
pub mod path_data;
pub mod state;

pub use centrality::{CentralityVector, Measure, ModelKind};
pub use error::{Error, Result};
pub use mogen_model::{fit, FundamentalMatrix, MogenModel, VisitStatistics};
pub use network_model::{build_network, DistanceMatrix, NetworkModel};
pub use path_data::{Path, PathDataset, SplitSpec, TemporalNetwork};
pub use state::State;
