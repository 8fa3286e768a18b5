//! Numerical laboratory for shift operators `(x_n) -> (S_{n+1} x_{n+1})`
//! generated by bounded two-sided sequences of invertible matrices.
//!
//! The crate computes weights and frames of such sequences, decides whether
//! the shift is conjugate to a product of weighted backward shifts, evaluates
//! the growth-rate conditions for shadowing and solves for shadowing orbits.

pub mod analysis;
pub mod classify;
pub mod dissipative;
pub mod error;
pub mod linalg;
pub mod opseq;
pub mod scenarios;
pub mod seqspace;
pub mod shadow;

pub use analysis::{analyze, Report, RunOptions, Status};
pub use classify::{ClassificationVerdict, Criterion};
pub use error::{Error, Result};
pub use linalg::{Mat, NormSpec, Vector};
pub use opseq::{Frame, Generator, IndexRange, OperatorSequence, Seed};
pub use scenarios::{Scenario, ScenarioConfig};
pub use seqspace::{SeqPoint, WeightSeq};
pub use shadow::ShadowingCertificate;
