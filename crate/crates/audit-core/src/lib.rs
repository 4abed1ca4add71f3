//! Reliability diagnostics for LLM-judged benchmarks.
//!
//! The library audits pairwise-judgment datasets along three axes:
//!
//! * **schematic adherence** — how much of a judge's overall verdict is
//!   explained by its own per-criterion scores (linear and quadratic
//!   variance decomposition, weight disparity/entropy, context stability);
//! * **psychometric validity** — internal consistency (Cronbach's alpha),
//!   discriminant validity (cross-loading ratios, HTMT), and a unified
//!   score with a sensitivity reading on the judgment scale;
//! * **ranking collapse** — weighted Bradley-Terry ratings with bootstrap
//!   intervals, and the regression showing how rating aggregation drives
//!   overall-on-factor R^2 to near unity regardless of upstream noise.
//!
//! A seeded synthetic generator with known ground truth serves as the
//! validation oracle for every diagnostic.

pub use nalgebra;

pub mod canon;
pub mod error;
pub mod exec;
pub mod impute;
pub mod judgment;
pub mod psychometric;
pub mod ranking;
pub mod report;
pub mod schematic;
pub mod stats;
pub mod synth;

pub use error::{AuditError, ErrorKind, Result};
