//! Gaze events as interpretable concepts for eye-tracking sequence models.
//!
//! The crate turns positional gaze recordings into velocity windows,
//! detects fixations and saccades, dissects saccades into phases and
//! measures how strongly each event concept overlaps the top-k steps of a
//! feature-attribution map (concept influence).
//!
//! ## Modules
//! - [`io`]: gaze CSV, attribution maps, manifests, event and report tables
//! - [`preprocess`]: Savitzky-Golay velocities, clamping, windowing, z-scoring
//! - [`detect`]: I-VT fixations, Engbert-Kliegl saccades, validity filters
//! - [`dissect`]: pre/rise/peak/fall/post saccade phases
//! - [`influence`]: top-k and concept segmentations, concept influence
//! - [`binning`]: per-property bins and their influence
//! - [`report`]: JSON summary, output directory, SVG charts
//! - [`synth`]: seeded synthetic scanpaths and proxy attributions
//! - [`pipeline`], [`config`]: end-to-end orchestration

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binning;
pub mod config;
pub mod detect;
pub mod dissect;
pub mod error;
pub mod influence;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod synth;

pub use config::PipelineConfig;
pub use detect::{DetectionParams, EventKind, GazeEvent};
pub use dissect::{Dissection, Phase, SubEvent};
pub use error::{Error, Result};
pub use influence::{ConceptSegmentation, InfluenceResult, TopKSegmentation};
pub use io::{AttributionMap, GazeRecording, GazeSample, RunManifest};
pub use pipeline::{run_pipeline, RunResults};
pub use preprocess::VelocityWindow;
