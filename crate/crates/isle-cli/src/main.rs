//! `isle` — encode, inspect, truncate, stream, and benchmark
//! resolution-scalable codestreams.
//!
//! Exit codes: 0 success, 1 I/O or network failure, 2 validation failure
//! (malformed input, out-of-range arguments). Output files are written to
//! a temporary sibling and renamed, so failures never leave partial files.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use isle::codestream::{self, Codestream};
use isle::image_io;
use isle::optimizer;
use isle::scorer::{self, ScoreMatrix, ScorerSpec};
use isle::service::{self, ServiceError, Status};

#[derive(Parser)]
#[command(name = "isle", version, about = "Resolution-scalable image streaming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerArg {
    #[value(name = "linear_probe")]
    LinearProbe,
    #[value(name = "precomputed")]
    Precomputed,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a binary PGM into an .islc codestream
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Smallest sub-resolution lower bound
        #[arg(long, env = "ISLE_ALPHA", default_value_t = codestream::DEFAULT_ALPHA)]
        alpha: u16,
    },
    /// Decode an .islc codestream (optionally partially) into a PGM
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Decomposition to reconstruct; defaults to the highest available
        #[arg(long)]
        d: Option<u8>,
    },
    /// Print header, ladder, and per-segment byte layout of a codestream
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
        /// Emit machine-readable JSON instead of text
        #[arg(long)]
        json: bool,
    },
    /// Drop segments above decomposition d, keeping the full index
    Truncate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long)]
        d: u8,
    },
    /// Pick the smallest decomposition with no significant AUROC drop
    Optimize {
        /// Directory of full .islc validation streams
        #[arg(long = "val-dir")]
        val_dir: PathBuf,
        /// Ground-truth labels CSV (asset_id,<label>,...)
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_enum)]
        scorer: ScorerArg,
        /// Model input resolution (architecture floor)
        #[arg(long = "input-size")]
        input_size: u32,
        #[arg(long, default_value_t = 0.05)]
        significance: f64,
        /// Seed for the linear probe
        #[arg(long, default_value_t = scorer::DEFAULT_PROBE_SEED)]
        seed: u64,
        /// Precomputed scores CSV (asset_id,d,<label>,...)
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Write the full evaluation report as JSON
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve a directory of full .islc streams
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        bind: String,
    },
    /// Fetch one asset at decomposition d (-1 = full stream)
    Fetch {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        asset: String,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        d: i8,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Fetch + decode + score a list of assets, reporting transfer metrics
    Bench {
        #[arg(long)]
        addr: String,
        /// File with one asset id per line
        #[arg(long)]
        assets: PathBuf,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        d: i8,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Input resolution for the pipeline's linear probe
        #[arg(long = "input-size", default_value_t = 64)]
        input_size: u32,
        #[arg(long, default_value_t = scorer::DEFAULT_PROBE_SEED)]
        seed: u64,
        /// Number of probe heads in the pipeline scorer
        #[arg(long = "labels-count", default_value_t = 6)]
        labels_count: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a deterministic synthetic corpus (PGM + .islc + labels.csv)
    GenSynthetic {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        size: u32,
        #[arg(long)]
        labels: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[arg(long, env = "ISLE_ALPHA", default_value_t = codestream::DEFAULT_ALPHA)]
        alpha: u16,
    },
}

enum CliError {
    /// Missing files, unreachable hosts, failed writes: exit 1.
    Io(String),
    /// Malformed inputs or out-of-range arguments: exit 2.
    Validation(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Validation(m) => m,
        }
    }

    fn from_parts(code: u8, message: String) -> Self {
        if code == 1 {
            CliError::Io(message)
        } else {
            CliError::Validation(message)
        }
    }
}

fn io_err(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {e}"))
}

fn invalid(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Encode { input, output, alpha } => cmd_encode(&input, &output, alpha),
        Command::Decode { input, output, d } => cmd_decode(&input, &output, d),
        Command::Inspect { input, json } => cmd_inspect(&input, json),
        Command::Truncate { input, output, d } => cmd_truncate(&input, &output, d),
        Command::Optimize {
            val_dir,
            labels,
            scorer,
            input_size,
            significance,
            seed,
            scores,
            report,
        } => cmd_optimize(&val_dir, &labels, scorer, input_size, significance, seed, scores, report),
        Command::Serve { store, bind } => cmd_serve(&store, &bind),
        Command::Fetch { addr, asset, d, output } => cmd_fetch(&addr, &asset, d, &output),
        Command::Bench { addr, assets, d, workers, input_size, seed, labels_count, report } => {
            cmd_bench(&addr, &assets, d, workers, input_size, seed, labels_count, report)
        }
        Command::GenSynthetic { n, size, labels, seed, out_dir, alpha } => {
            cmd_gen_synthetic(n, size, labels, seed, &out_dir, alpha)
        }
    }
}

/// Write via a temporary sibling + rename so failures leave no partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| io_err(&format!("creating temporary file in `{}`", dir.display()), e))?;
    tmp.write_all(bytes).map_err(|e| io_err(&format!("writing `{}`", path.display()), e))?;
    tmp.persist(path).map_err(|e| io_err(&format!("renaming into `{}`", path.display()), e))?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| io_err(&format!("reading `{}`", path.display()), e))
}

fn parse_stream(path: &Path, bytes: &[u8]) -> Result<Codestream, CliError> {
    codestream::parse(bytes).map_err(|e| invalid(&format!("parsing `{}`", path.display()), e))
}

fn cmd_encode(input: &Path, output: &Path, alpha: u16) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let img = image_io::read_pgm(&bytes)
        .map_err(|e| invalid(&format!("parsing `{}`", input.display()), e))?;
    let cs = codestream::encode(&img, alpha).map_err(|e| invalid("encoding", e))?;
    let out_bytes = codestream::serialize(&cs);
    write_atomic(output, &out_bytes)?;
    println!(
        "encoded {}x{}@{} -> {} ({} levels, {} bytes)",
        img.width(),
        img.height(),
        img.bit_depth(),
        output.display(),
        cs.n_levels(),
        out_bytes.len(),
    );
    Ok(())
}

fn cmd_decode(input: &Path, output: &Path, d: Option<u8>) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let cs = parse_stream(input, &bytes)?;
    let d = d.unwrap_or_else(|| cs.max_decomposition());
    let img = codestream::decode_partial(&cs, d).map_err(|e| invalid("decoding", e))?;
    write_atomic(output, &image_io::write_pgm(&img))?;
    println!("decoded d={} -> {} ({}x{})", d, output.display(), img.width(), img.height());
    Ok(())
}

fn cmd_inspect(input: &Path, json: bool) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let cs = parse_stream(input, &bytes)?;
    let h = *cs.header();
    let plan = h.plan().map_err(|e| invalid("computing plan", e))?;
    let fixed = codestream::HEADER_LEN + h.segment_count() * codestream::INDEX_ENTRY_LEN;

    if json {
        let segments: Vec<serde_json::Value> = (0..=h.n_levels)
            .map(|d| {
                let entry = cs.index().entries()[d as usize];
                let (w, hh) = plan.rung(d);
                serde_json::json!({
                    "d": d,
                    "width": w,
                    "height": hh,
                    "offset": entry.offset,
                    "length": entry.length,
                    "present": d < h.present_segments,
                    "prefix_bytes": fixed as u64 + cs.index().prefix_len(d),
                })
            })
            .collect();
        let value = serde_json::json!({
            "alpha": h.alpha,
            "bit_depth": h.bit_depth,
            "width": h.width,
            "height": h.height,
            "n_levels": h.n_levels,
            "present_segments": h.present_segments,
            "header_index_bytes": fixed as u64,
            "payload_bytes": cs.payload().len() as u64,
            "segments": segments,
        });
        println!("{}", serde_json::to_string_pretty(&value).expect("report is valid JSON"));
    } else {
        println!("{}x{} {}-bit, alpha {}", h.width, h.height, h.bit_depth, h.alpha);
        println!(
            "{} levels, {}/{} segments present, header+index {} bytes, payload {} bytes",
            h.n_levels,
            h.present_segments,
            h.segment_count(),
            fixed,
            cs.payload().len(),
        );
        println!("  d  resolution   segment bytes  prefix bytes  present");
        for d in 0..=h.n_levels {
            let entry = cs.index().entries()[d as usize];
            let (w, hh) = plan.rung(d);
            println!(
                "  {d}  {:>5}x{:<5}  {:>13}  {:>12}  {}",
                w,
                hh,
                entry.length,
                fixed as u64 + cs.index().prefix_len(d),
                if d < h.present_segments { "yes" } else { "no" },
            );
        }
    }
    Ok(())
}

fn cmd_truncate(input: &Path, output: &Path, d: u8) -> Result<(), CliError> {
    let bytes = read_file(input)?;
    let cs = parse_stream(input, &bytes)?;
    let truncated = codestream::truncate(&cs, d).map_err(|e| invalid("truncating", e))?;
    write_atomic(output, &codestream::serialize(&truncated))?;
    println!(
        "kept segments 0..={} -> {} ({} of {} payload bytes)",
        d,
        output.display(),
        truncated.payload().len(),
        cs.payload().len(),
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    val_dir: &Path,
    labels_path: &Path,
    scorer_arg: ScorerArg,
    input_size: u32,
    significance: f64,
    seed: u64,
    scores: Option<PathBuf>,
    report_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let labels = image_io::read_labels_csv(&read_file(labels_path)?)
        .map_err(|e| invalid(&format!("parsing `{}`", labels_path.display()), e))?;

    let mut paths: Vec<PathBuf> = std::fs::read_dir(val_dir)
        .map_err(|e| io_err(&format!("reading `{}`", val_dir.display()), e))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "islc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Validation(format!("no .islc files under `{}`", val_dir.display())));
    }
    let mut streams = Vec::with_capacity(paths.len());
    for path in &paths {
        let cs = parse_stream(path, &read_file(path)?)?;
        let asset_id =
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        streams.push((asset_id, cs));
    }

    let header = *streams[0].1.header();
    let plan = codestream::plan_decompositions(header.width, header.height, header.alpha)
        .map_err(|e| invalid("computing plan", e))?;

    let spec = match scorer_arg {
        ScorerArg::LinearProbe => ScorerSpec::linear_probe(input_size, seed, labels.n_labels()),
        ScorerArg::Precomputed => {
            let scores_path = scores.ok_or_else(|| {
                CliError::Validation("--scores is required with --scorer precomputed".into())
            })?;
            let matrix = ScoreMatrix::parse_csv(&read_file(&scores_path)?)
                .map_err(|e| invalid(&format!("parsing `{}`", scores_path.display()), e))?;
            if matrix.label_names() != labels.label_names() {
                return Err(CliError::Validation(
                    "label names in --scores do not match --labels".into(),
                ));
            }
            ScorerSpec::precomputed(input_size, matrix)
        }
    };

    let report = optimizer::select_optimal(&streams, &labels, &spec, &plan, significance)
        .map_err(|e| invalid("optimizing", e))?;

    println!(
        "chosen_d: {} (architecture floor {}, N {})",
        report.chosen_d, report.d_min_architecture, plan.n_levels
    );
    println!(
        "reference mean AUROC: {:.4} (+/- {:.4})",
        report.reference.mean, report.reference.std
    );
    if !report.dropped_labels.is_empty() {
        eprintln!("warning: dropped single-class labels: {}", report.dropped_labels.join(", "));
    }
    for (d, eval) in &report.per_decomposition {
        let gate = match &eval.test {
            optimizer::GateTest::TTest { result } => {
                format!("t={:+.3} p={:.4}", result.t_statistic, result.p_value)
            }
            optimizer::GateTest::Degenerate { all_nonnegative } => {
                format!("degenerate (all_nonnegative={all_nonnegative})")
            }
        };
        println!(
            "  d={d}: mean AUROC {:.4}  {}  -> {}",
            eval.auroc.mean,
            gate,
            if eval.passed { "pass" } else { "fail" },
        );
    }

    if let Some(path) = report_path {
        let value = serde_json::to_value(&report).expect("report serializes");
        let pretty = serde_json::to_string_pretty(&value).expect("report is valid JSON");
        write_atomic(&path, pretty.as_bytes())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_serve(store: &Path, bind: &str) -> Result<(), CliError> {
    let handle = service::serve(store, bind).map_err(service_error)?;
    println!("serving {} on {}", store.display(), handle.local_addr());
    handle.wait();
    Ok(())
}

fn cmd_fetch(addr: &str, asset: &str, d: i8, output: &Path) -> Result<(), CliError> {
    let (cs, bytes_transferred) = service::fetch(addr, asset, d).map_err(service_error)?;
    write_atomic(output, &codestream::serialize(&cs))?;
    println!(
        "fetched {asset} d={d} -> {} ({bytes_transferred} bytes on the wire)",
        output.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    addr: &str,
    assets_path: &Path,
    d: i8,
    workers: usize,
    input_size: u32,
    seed: u64,
    labels_count: usize,
    report_path: Option<PathBuf>,
) -> Result<(), CliError> {
    let listing = String::from_utf8(read_file(assets_path)?)
        .map_err(|e| invalid(&format!("reading `{}`", assets_path.display()), e))?;
    let assets: Vec<String> =
        listing.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_owned).collect();
    if assets.is_empty() {
        return Err(CliError::Validation(format!("`{}` lists no assets", assets_path.display())));
    }

    let spec = ScorerSpec::linear_probe(input_size, seed, labels_count);
    let metrics = service::run_benchmark(addr, &assets, d, &spec, workers).map_err(|e| {
        let mapped = service_error(*e.source);
        CliError::from_parts(
            mapped.exit_code(),
            format!(
                "benchmark aborted on `{}` after {} images: {}",
                e.asset_id,
                e.partial.images_processed,
                mapped.message()
            ),
        )
    })?;

    println!("assets: {}  d: {}  workers: {}", metrics.images_processed, d, workers);
    println!("data transferred (bytes): {}", metrics.bytes_transferred);
    println!("decode time (s): {:.6}", metrics.decode_time);
    println!("throughput (images/s): {:.3}", metrics.throughput);

    if let Some(path) = report_path {
        let value = serde_json::json!({
            "assets": metrics.images_processed,
            "bytes_transferred": metrics.bytes_transferred,
            "d": d,
            "decode_time_s": metrics.decode_time,
            "images_per_second": metrics.throughput,
            "workers": workers,
        });
        let pretty = serde_json::to_string_pretty(&value).expect("report is valid JSON");
        write_atomic(&path, pretty.as_bytes())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_gen_synthetic(
    n: usize,
    size: u32,
    labels: usize,
    seed: u64,
    out_dir: &Path,
    alpha: u16,
) -> Result<(), CliError> {
    let corpus = scorer::make_synthetic_corpus(n, size, labels, seed)
        .map_err(|e| invalid("generating corpus", e))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| io_err(&format!("creating `{}`", out_dir.display()), e))?;

    for (asset_id, img) in &corpus.images {
        write_atomic(&out_dir.join(format!("{asset_id}.pgm")), &image_io::write_pgm(img))?;
        let cs = codestream::encode(img, alpha).map_err(|e| invalid("encoding corpus", e))?;
        write_atomic(&out_dir.join(format!("{asset_id}.islc")), &codestream::serialize(&cs))?;
    }
    write_atomic(&out_dir.join("labels.csv"), &image_io::write_labels_csv(&corpus.labels))?;
    println!(
        "wrote {} images ({}x{}, {} labels) + labels.csv under {}",
        n,
        size,
        size,
        labels,
        out_dir.display()
    );
    Ok(())
}

/// Map service-layer failures onto exit classes: connectivity problems and
/// missing assets behave like missing files (1); protocol misuse and
/// malformed data are validation failures (2).
fn service_error(e: ServiceError) -> CliError {
    match &e {
        ServiceError::Io(_) => CliError::Io(e.to_string()),
        ServiceError::Status { status: Status::NotFound } => CliError::Io(e.to_string()),
        _ => CliError::Validation(e.to_string()),
    }
}
