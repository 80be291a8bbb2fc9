//! Diagnosis-and-treatment decision models over two-layer noisy-OR belief
//! networks, with per-pair treatment thresholds and patient-specific model
//! reduction.

pub mod consult;
pub mod decision;
pub mod error;
pub mod formulation;
pub mod generate;
pub mod harness;
pub mod inference;
pub mod kb;
pub mod network;

pub use consult::{Consult, FindingsDelta, SessionEvent, SessionState, SessionView, WhatIfResult};
pub use decision::{ThresholdTable, TreatmentAssignment};
pub use error::{Error, Result};
pub use formulation::{Policy, ReducedModel, Recommendation};
pub use generate::{generate_kb, GeneratorSpec};
pub use harness::{SoundnessReport, SoundnessSpec, UnsoundCase};
pub use inference::{Method, Posterior, PosteriorReport, SampleBudget};
pub use kb::{Findings, KnowledgeBase};
pub use network::{Evidence, Network};
