//! Root-cause analysis engine for cloud platform incidents.
//!
//! The pipeline turns raw telemetry into a ranked root-cause diagnosis:
//!
//! 1. [`data`] — load and validate metrics, logs, topology, and labeled
//!    incident windows.
//! 2. [`detect`] — decompose each metric window and screen it for spikes,
//!    variance changes, mean shifts, and long-running trends.
//! 3. [`template`] — reduce raw log lines to a small set of message
//!    templates.
//! 4. [`cluster`] — embed templates and merge near-duplicates into log
//!    patterns.
//! 5. [`features`] — combine metric findings and log patterns into binary
//!    feature vectors per incident window, with TF-IDF selection.
//! 6. [`bayesnet`] — learn a layered Bayesian network over features,
//!    modules, and cause types; infer the most likely (module, type) pair
//!    for a new window.
//! 7. [`eval`] — scoring, ablations, and cross-platform transfer.
//! 8. [`synth`] — synthetic benchmark generator with known ground truth.
//! 9. [`pipeline`] — end-to-end orchestration used by the CLI.

pub mod bayesnet;
pub mod cluster;
pub mod data;
pub mod detect;
pub mod eval;
pub mod features;
pub mod synth;
pub mod template;

pub use data::DataError;
pub use detect::DetectError;
