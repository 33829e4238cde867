//! Client side: fetch codestreams (full or truncated) and run the
//! fetch -> decode -> score benchmark pipeline.

use std::io::Write;
use std::net::TcpStream;
use std::time::Instant;

use thiserror::Error;

use crate::codestream::{self, Codestream};
use crate::scorer::ScorerSpec;

use super::protocol::{Request, Response, Status};
use super::{ServiceError, TransferMetrics};

/// One reusable connection; many request frames per connection.
pub struct Connection {
    stream: TcpStream,
}

impl Connection {
    pub fn connect(addr: &str) -> Result<Self, ServiceError> {
        Ok(Self { stream: TcpStream::connect(addr)? })
    }

    pub fn request(&mut self, req: &Request) -> Result<Response, ServiceError> {
        self.stream.write_all(&req.encode())?;
        self.stream.flush()?;
        Response::read_from(&mut self.stream)
    }

    /// Asset ids available on the server, sorted.
    pub fn list(&mut self) -> Result<Vec<String>, ServiceError> {
        let resp = self.request(&Request::list())?;
        if resp.status != Status::Ok {
            return Err(ServiceError::Status { status: resp.status });
        }
        let text = String::from_utf8(resp.payload).map_err(|_| ServiceError::BadUtf8)?;
        Ok(text.lines().map(str::to_owned).collect())
    }

    /// Header + full segment index of an asset, plus bytes transferred.
    /// Reveals full-stream costs without moving any payload.
    pub fn head(
        &mut self,
        asset_id: &str,
    ) -> Result<(codestream::CodestreamHeader, codestream::SegmentIndex, u64), ServiceError> {
        let resp = self.request(&Request::head(asset_id))?;
        if resp.status != Status::Ok {
            return Err(ServiceError::Status { status: resp.status });
        }
        let wire = resp.wire_len();
        let (header, index) = codestream::parse_prefix(&resp.payload)?;
        Ok((header, index, wire))
    }

    /// Fetch decomposition `d` (-1 = full stream) of an asset. Returns the
    /// parsed stream and the exact wire bytes received (payload + frame).
    pub fn fetch(&mut self, asset_id: &str, d: i8) -> Result<(Codestream, u64), ServiceError> {
        let resp = self.request(&Request::fetch(asset_id, d))?;
        if resp.status != Status::Ok {
            return Err(ServiceError::Status { status: resp.status });
        }
        let wire = resp.wire_len();
        let cs = codestream::parse(&resp.payload)?;
        Ok((cs, wire))
    }
}

/// One-shot fetch over a fresh connection.
pub fn fetch(addr: &str, asset_id: &str, d: i8) -> Result<(Codestream, u64), ServiceError> {
    Connection::connect(addr)?.fetch(asset_id, d)
}

/// A benchmark failure carries the metrics accumulated before the abort.
#[derive(Debug, Error)]
#[error("benchmark aborted on asset `{asset_id}`: {source}")]
pub struct BenchError {
    pub asset_id: String,
    #[source]
    pub source: Box<ServiceError>,
    pub partial: TransferMetrics,
}

/// Fetch, decode, and score every asset at decomposition `d` (-1 = full)
/// with `workers` concurrent pipelines.
///
/// Accounting: `bytes_transferred` sums exact wire bytes; `decode_time`
/// sums wall time spent strictly inside entropy decode + inverse transform
/// (network and scoring excluded); `throughput` is assets per wall-clock
/// second across the whole run.
pub fn run_benchmark(
    addr: &str,
    assets: &[String],
    d: i8,
    spec: &ScorerSpec,
    workers: usize,
) -> Result<TransferMetrics, BenchError> {
    struct WorkerTally {
        bytes: u64,
        decode_secs: f64,
        images: u64,
        failure: Option<(String, ServiceError)>,
    }

    let workers = workers.clamp(1, assets.len().max(1));
    let started = Instant::now();
    let mut tallies: Vec<WorkerTally> = Vec::with_capacity(workers);

    std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let worker_assets: Vec<&String> = assets.iter().skip(w).step_by(workers).collect();
            handles.push(scope.spawn(move || {
                let mut tally =
                    WorkerTally { bytes: 0, decode_secs: 0.0, images: 0, failure: None };
                let mut conn = match Connection::connect(addr) {
                    Ok(c) => c,
                    Err(e) => {
                        let first = worker_assets.first().map(|s| s.as_str()).unwrap_or("");
                        tally.failure = Some((first.to_owned(), e));
                        return tally;
                    }
                };
                for asset in worker_assets {
                    match pipeline_one(&mut conn, asset, d, spec) {
                        Ok((bytes, decode_secs)) => {
                            tally.bytes += bytes;
                            tally.decode_secs += decode_secs;
                            tally.images += 1;
                        }
                        Err(e) => {
                            tally.failure = Some((asset.clone(), e));
                            return tally;
                        }
                    }
                }
                tally
            }));
        }
        for handle in handles {
            tallies.push(handle.join().expect("benchmark worker panicked"));
        }
    });

    let elapsed = started.elapsed().as_secs_f64();
    let bytes_transferred: u64 = tallies.iter().map(|t| t.bytes).sum();
    let decode_time: f64 = tallies.iter().map(|t| t.decode_secs).sum();
    let images_processed: u64 = tallies.iter().map(|t| t.images).sum();
    let metrics = TransferMetrics {
        bytes_transferred,
        decode_time,
        images_processed,
        throughput: images_processed as f64 / elapsed.max(f64::MIN_POSITIVE),
    };

    if let Some((asset_id, source)) = tallies.into_iter().find_map(|t| t.failure) {
        return Err(BenchError { asset_id, source: Box::new(source), partial: metrics });
    }
    Ok(metrics)
}

fn pipeline_one(
    conn: &mut Connection,
    asset: &str,
    d: i8,
    spec: &ScorerSpec,
) -> Result<(u64, f64), ServiceError> {
    let (cs, bytes) = conn.fetch(asset, d)?;
    let target_d = if d < 0 { cs.n_levels() } else { d as u8 };
    let decode_started = Instant::now();
    let img = codestream::decode_partial(&cs, target_d)?;
    let decode_secs = decode_started.elapsed().as_secs_f64();
    spec.score(&img, asset, target_d)?;
    Ok((bytes, decode_secs))
}
