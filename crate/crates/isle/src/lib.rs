//! ISLE: intelligent streaming of resolution-scalable image codestreams.
//!
//! Images are losslessly encoded into an ordered sequence of decomposition
//! segments (`.islc`), so a byte prefix of the payload reconstructs the
//! image at a reduced resolution. A stream optimizer picks the smallest
//! decomposition whose scorer performance is statistically equivalent to
//! full resolution, and the client/server pair then moves only the bytes
//! that decomposition needs.
//!
//! Modules follow the pipeline:
//!
//! * [`image_io`] — PGM rasters and label CSVs
//! * [`wavelet`] — reversible 5/3 integer transform and pyramid
//! * [`codestream`] — the `.islc` format: encode, parse, truncate, partial decode
//! * [`stats`] — AUROC, paired one-tailed t-test, Shapiro-Wilk
//! * [`scorer`] — pluggable per-label scorers and the synthetic corpus
//! * [`optimizer`] — AUROC-gated decomposition selection
//! * [`service`] — TCP streaming server/client and the benchmark harness

pub mod codestream;
pub mod image_io;
pub mod optimizer;
pub mod rng;
pub mod scorer;
pub mod service;
pub mod stats;
pub mod wavelet;
