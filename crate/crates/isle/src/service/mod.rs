//! Provider-to-vendor streaming: a TCP server storing full codestreams and
//! a client that fetches only the byte prefix a chosen decomposition needs.
//!
//! The wire format is a custom length-prefixed binary framing (see
//! [`protocol`]); every multi-byte integer is big-endian and every response
//! frame costs exactly [`protocol::RESPONSE_FRAME_OVERHEAD`] bytes beyond
//! its payload, which keeps transfer accounting exact.

mod client;
mod protocol;
mod server;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

use crate::codestream::CodestreamError;
use crate::scorer::ScorerError;

pub use client::{fetch, run_benchmark, BenchError, Connection};
pub use protocol::{
    Opcode, Request, Response, Status, MAX_RESPONSE_PAYLOAD, RESPONSE_FRAME_OVERHEAD, WIRE_MAGIC,
    WIRE_VERSION,
};
pub use server::{serve, ServerHandle};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad wire magic")]
    BadMagic,
    #[error("unsupported wire version {0}")]
    BadVersion(u8),
    #[error("unknown opcode {0:#04x}")]
    BadOpcode(u8),
    #[error("asset id is not valid UTF-8")]
    BadUtf8,
    #[error("asset id required for this opcode")]
    EmptyAssetId,
    #[error("invalid decomposition {0} (must be >= -1)")]
    BadD(i8),
    #[error("unknown status byte {0:#04x}")]
    BadStatus(u8),
    #[error("frame length mismatch: expected {expected} bytes, got {actual}")]
    FrameLength { expected: usize, actual: usize },
    #[error("response payload of {0} bytes exceeds the protocol limit")]
    PayloadTooLarge(u64),
    #[error("server returned status {status:?}")]
    Status { status: Status },
    #[error("store file `{path}` failed to parse: {source}")]
    Store { path: PathBuf, source: CodestreamError },
    #[error("store file `{path}` is truncated; the server stores full codestreams")]
    StoreNotFull { path: PathBuf },
    #[error(transparent)]
    Codestream(#[from] CodestreamError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

/// The quantities of the benchmark harness: bytes on the wire, decoder
/// seconds summed across images, and end-to-end images per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferMetrics {
    pub bytes_transferred: u64,
    pub decode_time: f64,
    pub images_processed: u64,
    pub throughput: f64,
}
