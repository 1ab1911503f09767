//! Evaluation toolkit for hierarchical text detection (paragraphs, lines and
//! words) and end-to-end word recognition.
//!
//! Entities are rasterized to run-length masks, matched greedily by IoU and
//! scored with panoptic quality. Task 1 ranks by the harmonic mean of the
//! word, line and paragraph PQ (H-PQ); Task 2 ranks by word F1 with exact
//! transcription matching.

pub mod annotation;
pub mod cli;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod geometry;
pub mod leaderboard;
pub mod matching;
pub mod metrics;

pub use error::{Error, Result};
pub use eval::{evaluate_task1, evaluate_task1_file, evaluate_task2, evaluate_task2_file, EvalOptions, Task1Report, Task2Report};
pub use metrics::{h_pq, HpqScore, MatchCounts, MetricBundle};
