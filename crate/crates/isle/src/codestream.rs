//! The `.islc` codestream: a resolution-scalable, losslessly compressed
//! byte format whose payload is prefix-truncatable at decomposition
//! boundaries.
//!
//! Layout (all multi-byte integers big-endian):
//!
//! ```text
//! header   18 bytes   magic "ISLC", version u8, width u32, height u32,
//!                     bit_depth u8, alpha u16, n_levels u8, present_segments u8
//! index    (n_levels+1) * 16 bytes   per segment: offset u64, length u64
//!                     (offsets relative to payload start; always describes
//!                     ALL segments, even in truncated streams)
//! payload  first `present_segments` segments, entropy-coded
//! ```
//!
//! Segment 0 holds the base LL; segment k (1..=N) holds the level-(N-k+1)
//! detail group, entropy-coded as one stream over HL, LH, HH concatenated
//! row-major. Truncating to decomposition d keeps segments 0..=d verbatim
//! and rewrites only the `present_segments` header byte, so the truncated
//! serialization is a byte prefix of the full one apart from that byte.

use thiserror::Error;

use crate::image_io::Image;
use crate::wavelet::{self, DetailBands, Subband, SubbandKind, WaveletError};

pub const MAGIC: [u8; 4] = *b"ISLC";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;
pub const INDEX_ENTRY_LEN: usize = 16;

/// Default lower bound for the smallest sub-resolution.
pub const DEFAULT_ALPHA: u16 = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EntropyError {
    #[error("varint truncated at byte {offset}")]
    TruncatedVarint { offset: usize },
    #[error("varint exceeds 64 bits at byte {offset}")]
    VarintOverflow { offset: usize },
    #[error("zero-run of length zero at byte {offset}")]
    EmptyRun { offset: usize },
    #[error("zero-run overruns expected count {expected}")]
    RunOverrun { expected: usize },
    #[error("token stream ended after {got} of {expected} coefficients")]
    TooFewCoefficients { expected: usize, got: usize },
    #[error("{extra} bytes left after {expected} coefficients")]
    TrailingTokens { expected: usize, extra: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodestreamError {
    #[error("alpha must be at least 1")]
    InvalidAlpha,
    #[error("{width}x{height} image too small for any decomposition at alpha {alpha}")]
    ImageTooSmall { width: u32, height: u32, alpha: u16 },
    #[error("bad magic: not an ISLC stream")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u8),
    #[error("stream shorter than the {HEADER_LEN}-byte header")]
    HeaderTruncated,
    #[error("bit depth must be 8 or 16, got {0}")]
    BadBitDepth(u8),
    #[error("n_levels must be at least 1")]
    ZeroLevels,
    #[error("header n_levels {header} inconsistent with dimensions/alpha (expected {expected})")]
    InconsistentLevels { header: u8, expected: u8 },
    #[error("present_segments {present} outside 1..={max}")]
    BadPresentSegments { present: u8, max: u16 },
    #[error("segment index truncated")]
    IndexTruncated,
    #[error("segment index not contiguous at segment {segment}")]
    IndexNotContiguous { segment: usize },
    #[error("segment index lengths overflow")]
    IndexOverflow,
    #[error("payload truncated in segment {segment}: {missing} bytes missing")]
    PayloadTruncated { segment: usize, missing: u64 },
    #[error("{extra} trailing bytes after declared payload")]
    TrailingData { extra: u64 },
    #[error("decomposition {d} out of range 0..={n_levels}")]
    DecompositionOutOfRange { d: u8, n_levels: u8 },
    #[error("decomposition {d} needs segment {d} but only {present} segments are present")]
    SegmentUnavailable { d: u8, present: u8 },
    #[error("segment {segment}: {source}")]
    Entropy { segment: usize, source: EntropyError },
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error(transparent)]
    Image(#[from] crate::image_io::ImageError),
}

/// The resolution ladder implied by (width, height, alpha):
/// `n_levels = floor(log2(min(width, height) / alpha))`, with rung d at the
/// dimensions reached by ceil-halving (n_levels - d) times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecompositionPlan {
    pub alpha: u16,
    pub n_levels: u8,
    /// `ladder[d]` = (width, height) reconstructed by decomposition d;
    /// `ladder[n_levels]` is the full resolution.
    pub ladder: Vec<(u32, u32)>,
}

impl DecompositionPlan {
    pub fn rung(&self, d: u8) -> (u32, u32) {
        self.ladder[d as usize]
    }

    pub fn min_dim(&self, d: u8) -> u32 {
        let (w, h) = self.rung(d);
        w.min(h)
    }

    pub fn full_resolution(&self) -> (u32, u32) {
        self.ladder[self.n_levels as usize]
    }
}

/// Compute the decomposition plan for an image.
pub fn plan_decompositions(
    width: u32,
    height: u32,
    alpha: u16,
) -> Result<DecompositionPlan, CodestreamError> {
    if alpha == 0 {
        return Err(CodestreamError::InvalidAlpha);
    }
    let min_dim = width.min(height) as u64;
    if min_dim < 2 * alpha as u64 {
        return Err(CodestreamError::ImageTooSmall { width, height, alpha });
    }
    // Largest n with alpha * 2^n <= min_dim.
    let mut n_levels: u8 = 1;
    while (alpha as u64) << (n_levels + 1) <= min_dim {
        n_levels += 1;
    }
    let ladder = (0..=n_levels)
        .map(|d| {
            let times = n_levels - d;
            (wavelet::halved_dim(width, times), wavelet::halved_dim(height, times))
        })
        .collect();
    Ok(DecompositionPlan { alpha, n_levels, ladder })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodestreamHeader {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub alpha: u16,
    pub n_levels: u8,
    pub present_segments: u8,
}

impl CodestreamHeader {
    /// Total segment count of the full stream (`n_levels + 1`).
    pub fn segment_count(&self) -> usize {
        self.n_levels as usize + 1
    }

    pub fn plan(&self) -> Result<DecompositionPlan, CodestreamError> {
        plan_decompositions(self.width, self.height, self.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentEntry {
    pub offset: u64,
    pub length: u64,
}

/// Byte extents of every segment, relative to payload start. Present even
/// for segments a truncated stream does not carry, so a header+index read
/// reveals full-stream costs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentIndex {
    entries: Vec<SegmentEntry>,
}

impl SegmentIndex {
    pub fn from_lengths(lengths: &[u64]) -> Result<Self, CodestreamError> {
        let mut entries = Vec::with_capacity(lengths.len());
        let mut offset: u64 = 0;
        for &length in lengths {
            entries.push(SegmentEntry { offset, length });
            offset = offset.checked_add(length).ok_or(CodestreamError::IndexOverflow)?;
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SegmentEntry] {
        &self.entries
    }

    /// Payload bytes covered by segments `0..=d`.
    pub fn prefix_len(&self, d: u8) -> u64 {
        let e = &self.entries[d as usize];
        e.offset + e.length
    }

    /// Payload bytes of the complete stream.
    pub fn total_len(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.offset + e.length)
    }
}

/// A parsed ISLC stream: header, full segment index, and the payload bytes
/// of the segments actually present. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codestream {
    header: CodestreamHeader,
    index: SegmentIndex,
    payload: Vec<u8>,
}

impl Codestream {
    pub fn header(&self) -> &CodestreamHeader {
        &self.header
    }

    pub fn index(&self) -> &SegmentIndex {
        &self.index
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn n_levels(&self) -> u8 {
        self.header.n_levels
    }

    pub fn present_segments(&self) -> u8 {
        self.header.present_segments
    }

    /// Highest decodable decomposition index.
    pub fn max_decomposition(&self) -> u8 {
        self.header.present_segments - 1
    }

    /// Raw bytes of segment `k` (must be present).
    pub fn segment(&self, k: u8) -> &[u8] {
        let e = self.index.entries()[k as usize];
        &self.payload[e.offset as usize..(e.offset + e.length) as usize]
    }
}

// --- entropy coder ---------------------------------------------------------

/// Token stream over signed coefficients: a nonzero coefficient c becomes
/// `varint(zigzag(c) + 1)`; a maximal run of r >= 1 zeros becomes
/// `varint(0), varint(r)`. Varints are little-endian base-128.
pub fn entropy_encode(coeffs: &[i64]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < coeffs.len() {
        let c = coeffs[i];
        if c == 0 {
            let start = i;
            while i < coeffs.len() && coeffs[i] == 0 {
                i += 1;
            }
            push_varint(&mut out, 0);
            push_varint(&mut out, (i - start) as u64);
        } else {
            debug_assert_ne!(c, i64::MIN, "coefficient outside encodable range");
            push_varint(&mut out, zigzag(c) + 1);
            i += 1;
        }
    }
    out
}

/// Decode exactly `expected_count` coefficients; the whole byte slice must
/// be consumed.
pub fn entropy_decode(bytes: &[u8], expected_count: usize) -> Result<Vec<i64>, EntropyError> {
    let mut out = Vec::with_capacity(expected_count.min(1 << 22));
    let mut pos = 0;
    while out.len() < expected_count {
        if pos == bytes.len() {
            return Err(EntropyError::TooFewCoefficients {
                expected: expected_count,
                got: out.len(),
            });
        }
        let token_at = pos;
        let token = read_varint(bytes, &mut pos)?;
        if token == 0 {
            let run = read_varint(bytes, &mut pos)?;
            if run == 0 {
                return Err(EntropyError::EmptyRun { offset: token_at });
            }
            let remaining = (expected_count - out.len()) as u64;
            if run > remaining {
                return Err(EntropyError::RunOverrun { expected: expected_count });
            }
            out.resize(out.len() + run as usize, 0);
        } else {
            out.push(unzigzag(token - 1));
        }
    }
    if pos != bytes.len() {
        return Err(EntropyError::TrailingTokens {
            expected: expected_count,
            extra: bytes.len() - pos,
        });
    }
    Ok(out)
}

fn zigzag(c: i64) -> u64 {
    ((c << 1) ^ (c >> 63)) as u64
}

fn unzigzag(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

fn push_varint(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let b = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn read_varint(bytes: &[u8], pos: &mut usize) -> Result<u64, EntropyError> {
    let start = *pos;
    let mut value: u64 = 0;
    for i in 0..10 {
        let Some(&b) = bytes.get(*pos) else {
            return Err(EntropyError::TruncatedVarint { offset: start });
        };
        *pos += 1;
        let payload = u64::from(b & 0x7f);
        if i == 9 && payload > 1 {
            return Err(EntropyError::VarintOverflow { offset: start });
        }
        value |= payload << (7 * i);
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(EntropyError::VarintOverflow { offset: start })
}

// --- encode / serialize / parse --------------------------------------------

/// Encode an image into a complete codestream (`present_segments = N + 1`).
/// Deterministic: identical pixels and alpha produce identical bytes.
pub fn encode(img: &Image, alpha: u16) -> Result<Codestream, CodestreamError> {
    let plan = plan_decompositions(img.width(), img.height(), alpha)?;
    let pyr = wavelet::forward_2d(img, plan.n_levels)?;

    let mut payload = Vec::new();
    let mut lengths = Vec::with_capacity(plan.n_levels as usize + 1);

    let seg0 = entropy_encode(&pyr.base_ll.coeffs);
    lengths.push(seg0.len() as u64);
    payload.extend_from_slice(&seg0);

    for group in &pyr.details {
        let mut coeffs =
            Vec::with_capacity(group.hl.coeffs.len() + group.lh.coeffs.len() + group.hh.coeffs.len());
        coeffs.extend_from_slice(&group.hl.coeffs);
        coeffs.extend_from_slice(&group.lh.coeffs);
        coeffs.extend_from_slice(&group.hh.coeffs);
        let seg = entropy_encode(&coeffs);
        lengths.push(seg.len() as u64);
        payload.extend_from_slice(&seg);
    }

    Ok(Codestream {
        header: CodestreamHeader {
            width: img.width(),
            height: img.height(),
            bit_depth: img.bit_depth(),
            alpha,
            n_levels: plan.n_levels,
            present_segments: plan.n_levels + 1,
        },
        index: SegmentIndex::from_lengths(&lengths)?,
        payload,
    })
}

/// Serialize to the exact on-disk/wire byte layout.
pub fn serialize(cs: &Codestream) -> Vec<u8> {
    let h = &cs.header;
    let mut out = Vec::with_capacity(
        HEADER_LEN + h.segment_count() * INDEX_ENTRY_LEN + cs.payload.len(),
    );
    out.extend_from_slice(&MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&h.width.to_be_bytes());
    out.extend_from_slice(&h.height.to_be_bytes());
    out.push(h.bit_depth);
    out.extend_from_slice(&h.alpha.to_be_bytes());
    out.push(h.n_levels);
    out.push(h.present_segments);
    for e in cs.index.entries() {
        out.extend_from_slice(&e.offset.to_be_bytes());
        out.extend_from_slice(&e.length.to_be_bytes());
    }
    out.extend_from_slice(&cs.payload);
    out
}

/// Parse and validate a serialized stream. Every structural defect is
/// detected here, before any pixel is produced; trailing garbage after the
/// declared payload is an error.
pub fn parse(bytes: &[u8]) -> Result<Codestream, CodestreamError> {
    let (header, index, consumed) = parse_header_and_index(bytes)?;

    let available = (bytes.len() - consumed) as u64;
    let expected = index.prefix_len(header.present_segments - 1);
    if available < expected {
        // Name the segment the shortfall lands in.
        for (k, e) in index.entries()[..header.present_segments as usize].iter().enumerate() {
            let end = e.offset + e.length;
            if available < end {
                return Err(CodestreamError::PayloadTruncated {
                    segment: k,
                    missing: end - available,
                });
            }
        }
        unreachable!("shortfall must fall inside a present segment");
    }
    if available > expected {
        return Err(CodestreamError::TrailingData { extra: available - expected });
    }

    Ok(Codestream { header, index, payload: bytes[consumed..].to_vec() })
}

/// Parse exactly a header + full index with no payload, as served by a
/// HEAD request.
pub fn parse_prefix(bytes: &[u8]) -> Result<(CodestreamHeader, SegmentIndex), CodestreamError> {
    let (header, index, consumed) = parse_header_and_index(bytes)?;
    if bytes.len() != consumed {
        return Err(CodestreamError::TrailingData { extra: (bytes.len() - consumed) as u64 });
    }
    Ok((header, index))
}

fn parse_header_and_index(
    bytes: &[u8],
) -> Result<(CodestreamHeader, SegmentIndex, usize), CodestreamError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(CodestreamError::BadMagic);
        }
        return Err(CodestreamError::HeaderTruncated);
    }
    if bytes[..4] != MAGIC {
        return Err(CodestreamError::BadMagic);
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(CodestreamError::BadVersion(bytes[4]));
    }
    let width = u32::from_be_bytes(bytes[5..9].try_into().unwrap());
    let height = u32::from_be_bytes(bytes[9..13].try_into().unwrap());
    let bit_depth = bytes[13];
    let alpha = u16::from_be_bytes(bytes[14..16].try_into().unwrap());
    let n_levels = bytes[16];
    let present_segments = bytes[17];

    if bit_depth != 8 && bit_depth != 16 {
        return Err(CodestreamError::BadBitDepth(bit_depth));
    }
    if n_levels == 0 {
        return Err(CodestreamError::ZeroLevels);
    }
    // The level count is fully determined by (width, height, alpha); a
    // mismatch means a corrupt or hand-mangled header.
    let plan = plan_decompositions(width, height, alpha)?;
    if plan.n_levels != n_levels {
        return Err(CodestreamError::InconsistentLevels {
            header: n_levels,
            expected: plan.n_levels,
        });
    }
    let segment_count = n_levels as usize + 1;
    if present_segments == 0 || present_segments as usize > segment_count {
        return Err(CodestreamError::BadPresentSegments {
            present: present_segments,
            max: segment_count as u16,
        });
    }

    let index_end = HEADER_LEN + segment_count * INDEX_ENTRY_LEN;
    if bytes.len() < index_end {
        return Err(CodestreamError::IndexTruncated);
    }
    let mut entries = Vec::with_capacity(segment_count);
    let mut expected_offset: u64 = 0;
    for k in 0..segment_count {
        let at = HEADER_LEN + k * INDEX_ENTRY_LEN;
        let offset = u64::from_be_bytes(bytes[at..at + 8].try_into().unwrap());
        let length = u64::from_be_bytes(bytes[at + 8..at + 16].try_into().unwrap());
        if offset != expected_offset {
            return Err(CodestreamError::IndexNotContiguous { segment: k });
        }
        expected_offset =
            offset.checked_add(length).ok_or(CodestreamError::IndexOverflow)?;
        entries.push(SegmentEntry { offset, length });
    }

    Ok((
        CodestreamHeader { width, height, bit_depth, alpha, n_levels, present_segments },
        SegmentIndex { entries },
        index_end,
    ))
}

/// Keep only the segments needed for decomposition `d`. The index stays
/// complete; only the `present_segments` header byte changes.
pub fn truncate(cs: &Codestream, d: u8) -> Result<Codestream, CodestreamError> {
    if d > cs.header.n_levels {
        return Err(CodestreamError::DecompositionOutOfRange { d, n_levels: cs.header.n_levels });
    }
    if d >= cs.header.present_segments {
        return Err(CodestreamError::SegmentUnavailable { d, present: cs.header.present_segments });
    }
    let keep = cs.index.prefix_len(d) as usize;
    let mut header = cs.header;
    header.present_segments = d + 1;
    Ok(Codestream { header, index: cs.index.clone(), payload: cs.payload[..keep].to_vec() })
}

/// Decode decomposition `d` as an unclamped integer plane.
pub fn decode_partial_plane(cs: &Codestream, d: u8) -> Result<Subband, CodestreamError> {
    let h = &cs.header;
    if d > h.n_levels {
        return Err(CodestreamError::DecompositionOutOfRange { d, n_levels: h.n_levels });
    }
    if d >= h.present_segments {
        return Err(CodestreamError::SegmentUnavailable { d, present: h.present_segments });
    }
    let n = h.n_levels;

    let ll_dims = |depth: u8| -> (u32, u32) {
        (wavelet::halved_dim(h.width, depth), wavelet::halved_dim(h.height, depth))
    };

    let (bw, bh) = ll_dims(n);
    let base_count = bw as usize * bh as usize;
    let base_coeffs = entropy_decode(cs.segment(0), base_count)
        .map_err(|source| CodestreamError::Entropy { segment: 0, source })?;
    let base = Subband { kind: SubbandKind::Ll, level: n, width: bw, height: bh, coeffs: base_coeffs };

    let mut groups = Vec::with_capacity(d as usize);
    for k in 1..=d {
        let level = n - k + 1; // segment k carries the level-(N-k+1) detail group
        let (pw, ph) = ll_dims(level - 1);
        let (lw, lh) = ll_dims(level);
        let (hw, hh_h) = (pw - lw, ph - lh);
        let counts = [
            hw as usize * lh as usize,
            lw as usize * hh_h as usize,
            hw as usize * hh_h as usize,
        ];
        let total: usize = counts.iter().sum();
        let coeffs = entropy_decode(cs.segment(k), total)
            .map_err(|source| CodestreamError::Entropy { segment: k as usize, source })?;
        let (hl_c, rest) = coeffs.split_at(counts[0]);
        let (lh_c, hh_c) = rest.split_at(counts[1]);
        groups.push(DetailBands {
            hl: Subband { kind: SubbandKind::Hl, level, width: hw, height: lh, coeffs: hl_c.to_vec() },
            lh: Subband { kind: SubbandKind::Lh, level, width: lw, height: hh_h, coeffs: lh_c.to_vec() },
            hh: Subband { kind: SubbandKind::Hh, level, width: hw, height: hh_h, coeffs: hh_c.to_vec() },
        });
    }

    Ok(wavelet::reconstruct_ll(base, &groups)?)
}

/// Decode decomposition `d` as an image, clamped into the nominal sample
/// range. With `d == n_levels` this reproduces the encoded image exactly.
pub fn decode_partial(cs: &Codestream, d: u8) -> Result<Image, CodestreamError> {
    let plane = decode_partial_plane(cs, d)?;
    Ok(plane.to_image_clamped(cs.header.bit_depth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_image(rng: &mut SplitMix64, w: u32, h: u32, bit_depth: u8) -> Image {
        let max = if bit_depth == 8 { 255u64 } else { 65535 };
        let pixels = (0..w as usize * h as usize)
            .map(|_| (rng.next_u64() % (max + 1)) as u16)
            .collect();
        Image::new(w, h, bit_depth, pixels).unwrap()
    }

    #[test]
    fn plan_matches_worked_examples() {
        let plan = plan_decompositions(1024, 1024, 32).unwrap();
        assert_eq!(plan.n_levels, 5);
        let min_dims: Vec<u32> = (0..=5).map(|d| plan.min_dim(d)).collect();
        assert_eq!(min_dims, vec![32, 64, 128, 256, 512, 1024]);

        let plan = plan_decompositions(256, 256, 32).unwrap();
        assert_eq!(plan.n_levels, 3);
        assert_eq!(plan.ladder, vec![(32, 32), (64, 64), (128, 128), (256, 256)]);

        // min() governs Eq. (1)
        let plan = plan_decompositions(64, 4096, 32).unwrap();
        assert_eq!(plan.n_levels, 1);
    }

    #[test]
    fn plan_rejects_small_images() {
        assert!(matches!(
            plan_decompositions(63, 4096, 32),
            Err(CodestreamError::ImageTooSmall { .. })
        ));
        assert!(matches!(plan_decompositions(64, 64, 0), Err(CodestreamError::InvalidAlpha)));
    }

    #[test]
    fn entropy_tokens() {
        assert_eq!(entropy_encode(&[0, 0, 0]), vec![0x00, 0x03]);
        assert_eq!(entropy_encode(&[-1]), vec![0x02]);
        assert_eq!(entropy_decode(&[0x00, 0x03], 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(entropy_decode(&[0x02], 1).unwrap(), vec![-1]);
    }

    #[test]
    fn entropy_roundtrip_sparse_vectors() {
        let mut rng = SplitMix64::new(5);
        for _ in 0..500 {
            let n = (rng.next_u64() % 300) as usize;
            let v: Vec<i64> = (0..n)
                .map(|_| {
                    if rng.next_f64() < 0.8 {
                        0
                    } else {
                        (rng.next_u64() % 200_001) as i64 - 100_000
                    }
                })
                .collect();
            let bytes = entropy_encode(&v);
            assert_eq!(entropy_decode(&bytes, n).unwrap(), v);
        }
    }

    #[test]
    fn entropy_error_paths() {
        // truncated varint (continuation bit set, no next byte)
        assert!(matches!(
            entropy_decode(&[0x80], 1),
            Err(EntropyError::TruncatedVarint { .. })
        ));
        // run token missing its length
        assert!(matches!(entropy_decode(&[0x00], 1), Err(EntropyError::TruncatedVarint { .. })));
        // run of zero zeros
        assert!(matches!(entropy_decode(&[0x00, 0x00], 1), Err(EntropyError::EmptyRun { .. })));
        // run longer than the remaining count
        assert!(matches!(entropy_decode(&[0x00, 0x05], 3), Err(EntropyError::RunOverrun { .. })));
        // clean end but too few coefficients
        assert!(matches!(
            entropy_decode(&[0x02], 2),
            Err(EntropyError::TooFewCoefficients { expected: 2, got: 1 })
        ));
        // trailing bytes after the expected count
        assert!(matches!(
            entropy_decode(&[0x02, 0x02], 1),
            Err(EntropyError::TrailingTokens { .. })
        ));
        // varint spilling past 64 bits
        let too_long = [0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0x7f];
        assert!(matches!(
            entropy_decode(&too_long, 1),
            Err(EntropyError::VarintOverflow { .. })
        ));
    }

    #[test]
    fn zigzag_is_a_bijection_near_extremes() {
        for c in [0i64, 1, -1, 2, -2, i64::MAX, i64::MIN + 1] {
            assert_eq!(unzigzag(zigzag(c)), c);
        }
    }

    #[test]
    fn constant_image_detail_segment_is_one_run() {
        let img = Image::new(64, 64, 8, vec![128; 64 * 64]).unwrap();
        let cs = encode(&img, 32).unwrap();
        assert_eq!(cs.n_levels(), 1);
        assert_eq!(cs.present_segments(), 2);
        // 3 * 32 * 32 = 3072 zero detail coefficients -> varint(0), varint(3072)
        assert_eq!(cs.segment(1), &[0x00, 0x80, 0x18]);
    }

    #[test]
    fn encode_is_deterministic() {
        let mut rng = SplitMix64::new(11);
        let img = random_image(&mut rng, 96, 80, 8);
        let a = serialize(&encode(&img, 32).unwrap());
        let b = serialize(&encode(&img, 32).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn full_decode_roundtrip() {
        let mut rng = SplitMix64::new(23);
        for &(w, h, depth) in &[(64u32, 64u32, 8u8), (97, 65, 8), (64, 150, 16)] {
            let img = random_image(&mut rng, w, h, depth);
            let cs = encode(&img, 32).unwrap();
            let back = decode_partial(&cs, cs.n_levels()).unwrap();
            assert_eq!(back, img);
        }
    }

    #[test]
    fn header_layout_is_exact() {
        let mut rng = SplitMix64::new(31);
        let img = random_image(&mut rng, 1024, 1024, 8);
        let cs = encode(&img, 32).unwrap();
        let bytes = serialize(&cs);
        assert_eq!(&bytes[..4], b"ISLC");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &[0x00, 0x00, 0x04, 0x00]); // width 1024 BE
        assert_eq!(&bytes[9..13], &[0x00, 0x00, 0x04, 0x00]);
        assert_eq!(bytes[13], 8);
        assert_eq!(&bytes[14..16], &[0x00, 0x20]); // alpha 32 BE
        assert_eq!(bytes[16], 5);
        assert_eq!(bytes[17], 6);
        // N = 5: payload starts after 18 + 6 * 16 = 114 bytes
        assert_eq!(HEADER_LEN + cs.header().segment_count() * INDEX_ENTRY_LEN, 114);
    }

    #[test]
    fn parse_roundtrip_and_rejections() {
        let mut rng = SplitMix64::new(37);
        let img = random_image(&mut rng, 80, 64, 8);
        let cs = encode(&img, 32).unwrap();
        let bytes = serialize(&cs);
        assert_eq!(parse(&bytes).unwrap(), cs);

        // present_segments = 0
        let mut bad = bytes.clone();
        bad[17] = 0;
        assert!(matches!(parse(&bad), Err(CodestreamError::BadPresentSegments { present: 0, .. })));

        // payload one byte short names the last segment
        let short = &bytes[..bytes.len() - 1];
        match parse(short) {
            Err(CodestreamError::PayloadTruncated { segment, missing: 1 }) => {
                assert_eq!(segment, cs.n_levels() as usize);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }

        // trailing garbage
        let mut long = bytes.clone();
        long.push(0xaa);
        assert!(matches!(parse(&long), Err(CodestreamError::TrailingData { extra: 1 })));

        // magic / version
        let mut m = bytes.clone();
        m[0] = b'X';
        assert!(matches!(parse(&m), Err(CodestreamError::BadMagic)));
        let mut v = bytes.clone();
        v[4] = 9;
        assert!(matches!(parse(&v), Err(CodestreamError::BadVersion(9))));

        // inconsistent level count
        let mut lv = bytes.clone();
        lv[16] = 7;
        assert!(matches!(parse(&lv), Err(CodestreamError::InconsistentLevels { header: 7, .. })));
    }

    #[test]
    fn truncate_keeps_prefix_and_index() {
        let mut rng = SplitMix64::new(43);
        let img = random_image(&mut rng, 128, 128, 8);
        let cs = encode(&img, 32).unwrap();
        let full = serialize(&cs);
        for d in 0..=cs.n_levels() {
            let t = truncate(&cs, d).unwrap();
            assert_eq!(t.present_segments(), d + 1);
            assert_eq!(t.index(), cs.index());
            let bytes = serialize(&t);
            // differs from the full prefix only in the present_segments byte
            assert_eq!(bytes[17], d + 1);
            let mut prefix = full[..bytes.len()].to_vec();
            prefix[17] = d + 1;
            assert_eq!(bytes, prefix);
            // reparses cleanly
            assert_eq!(parse(&bytes).unwrap(), t);
        }
        // no-op truncation equals the source apart from nothing at all
        let t = truncate(&cs, cs.n_levels()).unwrap();
        assert_eq!(t, cs);

        assert!(matches!(
            truncate(&cs, cs.n_levels() + 1),
            Err(CodestreamError::DecompositionOutOfRange { .. })
        ));
        let t0 = truncate(&cs, 0).unwrap();
        assert_eq!(t0.payload().len() as u64, t0.index().entries()[0].length);
        assert!(matches!(
            truncate(&t0, 1),
            Err(CodestreamError::SegmentUnavailable { d: 1, present: 1 })
        ));
    }

    #[test]
    fn partial_decode_equals_full_stream_decode() {
        let mut rng = SplitMix64::new(47);
        let img = random_image(&mut rng, 150, 90, 16);
        let cs = encode(&img, 32).unwrap();
        for d in 0..=cs.n_levels() {
            let from_truncated = decode_partial(&truncate(&cs, d).unwrap(), d).unwrap();
            let from_full = decode_partial(&cs, d).unwrap();
            assert_eq!(from_truncated, from_full);
        }
    }

    #[test]
    fn decode_beyond_available_is_a_clean_error() {
        let mut rng = SplitMix64::new(53);
        let img = random_image(&mut rng, 64, 64, 8);
        let cs = encode(&img, 32).unwrap();
        let t = truncate(&cs, 0).unwrap();
        assert!(matches!(
            decode_partial(&t, 1),
            Err(CodestreamError::SegmentUnavailable { d: 1, present: 1 })
        ));
        assert!(matches!(
            decode_partial(&cs, cs.n_levels() + 1),
            Err(CodestreamError::DecompositionOutOfRange { .. })
        ));
    }

    #[test]
    fn base_decomposition_is_clamped_ll() {
        let mut rng = SplitMix64::new(59);
        let img = random_image(&mut rng, 70, 64, 8);
        let cs = encode(&img, 32).unwrap();
        let n = cs.n_levels();
        let base = decode_partial(&cs, 0).unwrap();
        let pyr = wavelet::forward_2d(&img, n).unwrap();
        assert_eq!(base, pyr.base_ll.to_image_clamped(8).unwrap());
    }
}
