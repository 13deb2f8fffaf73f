//! Discovery of causes and effect modifiers of a recurring binary outcome
//! from observational event logs.
//!
//! The pipeline: reduce per-unit event timelines to a flat binary sample
//! (`events`), learn candidate structures with an ensemble of constraint- and
//! score-based algorithms (`learn`), orient leftovers with temporal
//! first-occurrence evidence and aggregate ancestry into per-variable cause
//! support (`ensemble`), then estimate adjusted total effects and candidate
//! effect modifiers per graph (`effects`). `synth` generates ground-truth
//! models for calibration and `eval` scores discovery output against them.

pub mod dataset;
pub mod effects;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod events;
pub mod graph;
pub mod learn;
pub mod report;
pub mod scores;
pub mod stats;
pub mod synth;

pub use dataset::BinaryDataset;
pub use error::{Error, Result};
pub use graph::{MixedGraph, RelativeSet, StructuralConstraints};
