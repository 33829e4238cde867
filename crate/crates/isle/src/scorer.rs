//! Pluggable scoring: anything that maps a decoded image to per-label
//! scores in [0, 1].
//!
//! Two built-ins keep end-to-end runs desk-scale:
//!
//! * `linear_probe` — deterministic seeded linear heads over a resized,
//!   normalized, flattened image. Each head concentrates its
//!   pseudo-random weights on one label's canonical blob location (the
//!   layout below, shared with the synthetic generator), playing the role
//!   a trained classifier head would.
//! * `precomputed` — per-(asset, decomposition) score rows from a CSV, for
//!   plugging in real model outputs.

use std::collections::HashMap;

use thiserror::Error;

use crate::image_io::{Image, LabelTable};
use crate::rng::SplitMix64;

#[derive(Debug, Error, PartialEq)]
pub enum ScorerError {
    #[error("no precomputed scores for asset `{asset_id}` at decomposition {d}")]
    MissingPrecomputedRow { asset_id: String, d: u8 },
    #[error("synthetic corpus needs n >= 20, got {0}")]
    CorpusTooSmall(usize),
    #[error("synthetic corpus needs size >= 64, got {0}")]
    CorpusSizeTooSmall(u32),
    #[error("synthetic corpus needs at least 1 label, got {0}")]
    CorpusNoLabels(usize),
    #[error("scores CSV is not valid UTF-8")]
    NotUtf8,
    #[error("scores CSV header must start with `asset_id,d` and name at least one label")]
    BadHeader,
    #[error("scores CSV row {row}: expected {expected} cells, got {actual}")]
    RaggedRow { row: usize, expected: usize, actual: usize },
    #[error("scores CSV row {row}: `{cell}` is not a score in [0, 1]")]
    BadScore { row: usize, cell: String },
    #[error("scores CSV row {row}: `{cell}` is not a decomposition index")]
    BadDecomposition { row: usize, cell: String },
    #[error("scores CSV has duplicate row for asset `{asset_id}` at d={d}")]
    DuplicateRow { asset_id: String, d: u8 },
    #[error("scores CSV has no data rows")]
    Empty,
    #[error(transparent)]
    Image(#[from] crate::image_io::ImageError),
}

/// Canonical blob layout shared by the synthetic corpus generator and the
/// linear probe. Coordinates and scales are normalized to image size, so
/// the same layout describes any resolution.
pub mod layout {
    /// Background level, as a fraction of full scale.
    pub const BG_LEVEL: f64 = 0.30;
    /// Additive noise amplitude (uniform in +/- this), fraction of full scale.
    pub const NOISE_LEVEL: f64 = 4.0 / 255.0;
    /// Blob centers sit on a ring of this radius around the image center.
    pub const RING_RADIUS: f64 = 0.30;

    /// Center of label `l`'s blob, in normalized [0, 1) coordinates.
    pub fn blob_center(l: usize, n_labels: usize) -> (f64, f64) {
        let angle = 2.0 * std::f64::consts::PI * l as f64 / n_labels.max(1) as f64;
        (0.5 + RING_RADIUS * angle.cos(), 0.5 + RING_RADIUS * angle.sin())
    }

    /// Spatial scale of label `l`'s blob (normalized). Strictly decreasing
    /// in `l`: high-index labels carry fine detail that only survives
    /// high-resolution decodes.
    pub fn blob_sigma(l: usize) -> f64 {
        match l {
            0 => 0.060,
            1 => 0.030,
            _ => 0.002637 * 0.88f64.powi(l as i32 - 2),
        }
    }

    /// Peak amplitude of label `l`'s blob, as a fraction of full scale.
    /// Coarse blobs are strong. Fine blobs hold a constant small total
    /// mass (referenced to the 512-pixel validation scale), so their
    /// detectability hinges on how faithfully fine structure survives
    /// decoding.
    pub fn blob_amplitude(l: usize) -> f64 {
        if l < 2 {
            26.0 / 255.0
        } else {
            let sigma_px = blob_sigma(l) * 512.0;
            42.0 / (2.0 * std::f64::consts::PI * sigma_px * sigma_px) / 255.0
        }
    }
}

/// Per-(asset, decomposition) score vectors parsed from a CSV with header
/// `asset_id,d,<label1>,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    label_names: Vec<String>,
    rows: HashMap<(String, u8), Vec<f64>>,
}

impl ScoreMatrix {
    pub fn parse_csv(bytes: &[u8]) -> Result<Self, ScorerError> {
        let text = std::str::from_utf8(bytes).map_err(|_| ScorerError::NotUtf8)?;
        let mut lines = text.split('\n');
        let header = lines.next().ok_or(ScorerError::BadHeader)?;
        let mut cells = header.split(',');
        if cells.next() != Some("asset_id") || cells.next() != Some("d") {
            return Err(ScorerError::BadHeader);
        }
        let label_names: Vec<String> = cells.map(str::to_owned).collect();
        if label_names.is_empty() || label_names.iter().any(String::is_empty) {
            return Err(ScorerError::BadHeader);
        }
        let expected = label_names.len() + 2;
        let mut rows = HashMap::new();
        for (i, line) in lines.enumerate() {
            let row = i + 2;
            if line.is_empty() {
                continue; // trailing newline
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != expected {
                return Err(ScorerError::RaggedRow { row, expected, actual: cells.len() });
            }
            let d: u8 = cells[1]
                .parse()
                .map_err(|_| ScorerError::BadDecomposition { row, cell: cells[1].to_owned() })?;
            let mut scores = Vec::with_capacity(label_names.len());
            for cell in &cells[2..] {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| ScorerError::BadScore { row, cell: cell.to_string() })?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(ScorerError::BadScore { row, cell: cell.to_string() });
                }
                scores.push(v);
            }
            let key = (cells[0].to_owned(), d);
            if rows.insert(key, scores).is_some() {
                return Err(ScorerError::DuplicateRow { asset_id: cells[0].to_owned(), d });
            }
        }
        if rows.is_empty() {
            return Err(ScorerError::Empty);
        }
        Ok(Self { label_names, rows })
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn get(&self, asset_id: &str, d: u8) -> Option<&[f64]> {
        self.rows.get(&(asset_id.to_owned(), d)).map(Vec::as_slice)
    }
}

/// Default seed for the built-in linear probe.
pub const DEFAULT_PROBE_SEED: u64 = 1514;

#[derive(Debug, Clone, PartialEq)]
pub enum ScorerKind {
    LinearProbe { seed: u64, n_labels: usize },
    Precomputed(ScoreMatrix),
}

/// A scorer plus the input resolution the model expects.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSpec {
    pub input_size: u32,
    pub kind: ScorerKind,
}

const PROBE_STREAM_TAG: u64 = 0x70726f6265; // "probe"
const LABEL_STREAM_TAG: u64 = 0x6c61626c73; // "labls"
const NOISE_STREAM_TAG: u64 = 0x6e6f697365; // "noise"

impl ScorerSpec {
    pub fn linear_probe(input_size: u32, seed: u64, n_labels: usize) -> Self {
        Self { input_size, kind: ScorerKind::LinearProbe { seed, n_labels } }
    }

    pub fn precomputed(input_size: u32, matrix: ScoreMatrix) -> Self {
        Self { input_size, kind: ScorerKind::Precomputed(matrix) }
    }

    pub fn n_labels(&self) -> usize {
        match &self.kind {
            ScorerKind::LinearProbe { n_labels, .. } => *n_labels,
            ScorerKind::Precomputed(m) => m.label_names().len(),
        }
    }

    /// Score one decoded image. `asset_id` and `d` identify the row for
    /// precomputed scorers; the linear probe depends only on pixels.
    pub fn score(&self, img: &Image, asset_id: &str, d: u8) -> Result<Vec<f64>, ScorerError> {
        match &self.kind {
            ScorerKind::LinearProbe { seed, n_labels } => {
                Ok(linear_probe_scores(img, self.input_size, *seed, *n_labels))
            }
            ScorerKind::Precomputed(matrix) => matrix
                .get(asset_id, d)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| ScorerError::MissingPrecomputedRow {
                    asset_id: asset_id.to_owned(),
                    d,
                }),
        }
    }
}

/// Area-average `img` to the model input: downsample preserving aspect
/// ratio (the larger dimension maps onto `input_size`), normalize to
/// [0, 1], then zero-pad to square at the top-left corner. Averaging
/// happens before padding, never after.
pub fn resize_to_input(img: &Image, input_size: u32) -> Vec<f64> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let s = input_size as usize;
    let (tw, th) = if w >= h {
        (s, (((h as u64 * s as u64) + w as u64 / 2) / w as u64).max(1) as usize)
    } else {
        ((((w as u64 * s as u64) + h as u64 / 2) / h as u64).max(1) as usize, s)
    };

    let scale = 1.0 / f64::from(img.max_sample());
    // Horizontal pass (w -> tw), rows unchanged.
    let mut horiz = vec![0.0f64; tw * h];
    for y in 0..h {
        let row = &img.pixels()[y * w..(y + 1) * w];
        box_resample_row(row, &mut horiz[y * tw..(y + 1) * tw], scale);
    }
    // Vertical pass (h -> th) column by column.
    let mut resized = vec![0.0f64; tw * th];
    let mut col = vec![0.0f64; h];
    let mut out_col = vec![0.0f64; th];
    for x in 0..tw {
        for y in 0..h {
            col[y] = horiz[y * tw + x];
        }
        box_resample_f64(&col, &mut out_col);
        for y in 0..th {
            resized[y * tw + x] = out_col[y];
        }
    }
    // Zero-pad to input_size x input_size.
    let mut out = vec![0.0f64; s * s];
    for y in 0..th {
        out[y * s..y * s + tw].copy_from_slice(&resized[y * tw..(y + 1) * tw]);
    }
    out
}

fn box_resample_row(src: &[u16], dst: &mut [f64], scale: f64) {
    let tmp: Vec<f64> = src.iter().map(|&p| f64::from(p) * scale).collect();
    box_resample_f64(&tmp, dst);
}

/// Exact box (area) resampling of a 1D signal onto `dst.len()` samples.
fn box_resample_f64(src: &[f64], dst: &mut [f64]) {
    let sn = src.len() as f64;
    let dn = dst.len() as f64;
    let span = sn / dn;
    for (j, out) in dst.iter_mut().enumerate() {
        let lo = j as f64 * span;
        let hi = (j as f64 + 1.0) * span;
        let first = lo.floor() as usize;
        let last = ((hi.ceil() as usize).min(src.len())).max(first + 1);
        let mut acc = 0.0;
        for (i, &v) in src.iter().enumerate().take(last).skip(first) {
            let cell_lo = (i as f64).max(lo);
            let cell_hi = ((i + 1) as f64).min(hi);
            if cell_hi > cell_lo {
                acc += v * (cell_hi - cell_lo);
            }
        }
        *out = acc / span;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One pseudo-random linear head per label: weights are a seeded random
/// modulation over a kernel at the label's canonical location, scaled so a
/// nominal blob response lands the sigmoid mid-range. score_l =
/// sigmoid(w_l . v + b_l) over the resized, normalized, flattened image.
fn linear_probe_scores(img: &Image, input_size: u32, seed: u64, n_labels: usize) -> Vec<f64> {
    let v = resize_to_input(img, input_size);
    let s = input_size as usize;
    let mut scores = Vec::with_capacity(n_labels);
    for l in 0..n_labels {
        let (weights, bias) = probe_head(input_size, seed, l, n_labels);
        let mut acc = bias;
        for i in 0..s * s {
            acc += weights[i] * v[i];
        }
        scores.push(sigmoid(acc));
    }
    scores
}

/// Build head `l`: weights plus bias. Deterministic in (input_size, seed,
/// l, n_labels).
fn probe_head(input_size: u32, seed: u64, l: usize, n_labels: usize) -> (Vec<f64>, f64) {
    let s = input_size as usize;
    let (cx, cy) = layout::blob_center(l, n_labels);
    let sigma = layout::blob_sigma(l);
    let amplitude = layout::blob_amplitude(l);

    // Kernel scale floored to ~3/4 pixel so sub-pixel blobs still get a
    // usable receptive field; the response normalizer uses a slightly
    // fatter template to keep sigmoid arguments out of saturation.
    let tau = sigma.max(0.75 / input_size as f64);
    let tau_r = sigma.max(1.25 / input_size as f64);

    let mut rng = SplitMix64::derive(seed, PROBE_STREAM_TAG, l as u64);
    let mut weights = vec![0.0f64; s * s];
    let mut response = 0.0f64; // expected raw response to a nominal blob
    let mut wsum = 0.0f64;
    for y in 0..s {
        for x in 0..s {
            let nx = (x as f64 + 0.5) / s as f64;
            let ny = (y as f64 + 0.5) / s as f64;
            let d2 = (nx - cx) * (nx - cx) + (ny - cy) * (ny - cy);
            let kernel = (-d2 / (2.0 * tau * tau)).exp();
            let w = kernel * (0.75 + 0.5 * rng.next_f64());
            weights[y * s + x] = w;
            response += w * amplitude * (-d2 / (2.0 * tau_r * tau_r)).exp();
            wsum += w;
        }
    }

    // Rescale so the head reads sigmoid(-3) on background and sigmoid(+3)
    // on background + nominal blob.
    let gain = 6.0 / response;
    for w in &mut weights {
        *w *= gain;
    }
    let bias = -gain * (wsum * layout::BG_LEVEL) - 3.0;
    (weights, bias)
}

/// A deterministic synthetic validation corpus: each label is the presence
/// of a Gaussian blob at its canonical location and scale, over a flat
/// background with seeded additive noise. 8-bit images.
pub struct SyntheticCorpus {
    pub images: Vec<(String, Image)>,
    pub labels: LabelTable,
}

pub fn make_synthetic_corpus(
    n: usize,
    size: u32,
    n_labels: usize,
    seed: u64,
) -> Result<SyntheticCorpus, ScorerError> {
    if n < 20 {
        return Err(ScorerError::CorpusTooSmall(n));
    }
    if size < 64 {
        return Err(ScorerError::CorpusSizeTooSmall(size));
    }
    if n_labels == 0 {
        return Err(ScorerError::CorpusNoLabels(n_labels));
    }

    let centers: Vec<(f64, f64)> = (0..n_labels).map(|l| layout::blob_center(l, n_labels)).collect();
    let sigmas: Vec<f64> = (0..n_labels).map(layout::blob_sigma).collect();
    let amplitudes: Vec<f64> = (0..n_labels).map(layout::blob_amplitude).collect();

    let max = 255.0f64;
    let side = size as usize;
    let mut images = Vec::with_capacity(n);
    let mut rows = Vec::with_capacity(n);

    for i in 0..n {
        let mut label_rng = SplitMix64::derive(seed, LABEL_STREAM_TAG, i as u64);
        let present: Vec<bool> = (0..n_labels).map(|_| label_rng.next_f64() < 0.5).collect();
        let mut noise_rng = SplitMix64::derive(seed, NOISE_STREAM_TAG, i as u64);

        let mut pixels = Vec::with_capacity(side * side);
        for y in 0..side {
            let ny = (y as f64 + 0.5) / size as f64;
            for x in 0..side {
                let nx = (x as f64 + 0.5) / size as f64;
                let mut value = layout::BG_LEVEL;
                for l in 0..n_labels {
                    if !present[l] {
                        continue;
                    }
                    let (cx, cy) = centers[l];
                    let d2 = (nx - cx) * (nx - cx) + (ny - cy) * (ny - cy);
                    let s2 = 2.0 * sigmas[l] * sigmas[l];
                    // Skip far tails; the cutoff is part of the definition,
                    // not an approximation knob.
                    if d2 < 36.0 * sigmas[l] * sigmas[l] {
                        value += amplitudes[l] * (-d2 / s2).exp();
                    }
                }
                value += layout::NOISE_LEVEL * (2.0 * noise_rng.next_f64() - 1.0);
                pixels.push((value * max).round().clamp(0.0, max) as u16);
            }
        }
        let asset_id = format!("img{i:05}");
        images.push((asset_id.clone(), Image::new(size, size, 8, pixels)?));
        rows.push((asset_id, present));
    }

    let label_names = (0..n_labels).map(|l| format!("label{l}")).collect();
    let labels = LabelTable::new(label_names, rows).expect("generated ids are unique and valid");
    Ok(SyntheticCorpus { images, labels })
}
