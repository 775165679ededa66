//! Reliability scoring for multi-model annotation ensembles.
//!
//! Two uncertainty signals are computed per case: the Shannon entropy of the
//! labels the models produced (disagreement) and the mean confidence derived
//! from each model's self-reported risk. The crate standardizes and fuses them
//! into a quality score, searches signal weights that best track observed
//! accuracy, and plans a cost-optimal three-tier human verification triage.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, reports and the
//! command line live in the `dualsig` companion crate.

#![no_std]
#![deny(rustdoc::broken_intra_doc_links)]

extern crate alloc;

pub mod error;
pub mod model;
pub mod optimize;
mod rng;
pub mod signal;
pub mod simulate;
mod special;
pub mod stats;
pub mod triage;

pub use error::{Error, Result};
pub use model::{
    AccuracyMode, CaseAggregate, CorrelationResult, CostParams, LabelUniverse, PredictionRecord,
    StandardizedCase, Tier, TierPlan, TierReport, TierTriple, WeightConfig,
};
pub use optimize::{GridSpec, Strategy, StrategyRow, StrategyTable, TransferMatrix, TransferResult};
pub use simulate::SimulationConfig;
pub use triage::{CostBreakdown, ThresholdSearch, TierAssignment};
