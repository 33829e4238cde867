//! Reversible multi-level 2D integer wavelet transform (CDF 5/3 lifting).
//!
//! The forward transform splits an image into a low-pass approximation (LL)
//! and three detail bands (HL, LH, HH) per level, recursing on LL. All
//! arithmetic is integer lifting with whole-sample symmetric extension, so
//! inverse(forward(x)) reproduces x bit-exactly. Coefficients are stored as
//! i64, which leaves far more headroom than any level count reachable from
//! u32 dimensions can consume.

use thiserror::Error;

use crate::image_io::Image;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WaveletError {
    #[error("cannot transform an empty signal")]
    EmptySignal,
    #[error("approximation length {approx} incompatible with detail length {detail}")]
    LengthMismatch { approx: usize, detail: usize },
    #[error("levels must be at least 1")]
    ZeroLevels,
    #[error("{levels} levels exceed what a {width}x{height} image supports")]
    LevelsTooLarge { levels: u8, width: u32, height: u32 },
    #[error("cannot apply {requested} levels to a {available}-level pyramid")]
    DepthOutOfRange { requested: usize, available: u8 },
    #[error("detail bands do not tile the parent plane")]
    BandGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubbandKind {
    Ll,
    Hl,
    Lh,
    Hh,
}

/// One subband of coefficients. `level` counts decomposition levels with
/// 1 = finest; the base LL sits at `level == pyramid.levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subband {
    pub kind: SubbandKind,
    pub level: u8,
    pub width: u32,
    pub height: u32,
    pub coeffs: Vec<i64>,
}

impl Subband {
    fn new(kind: SubbandKind, level: u8, width: u32, height: u32, coeffs: Vec<i64>) -> Self {
        debug_assert_eq!(coeffs.len() as u64, width as u64 * height as u64);
        Self { kind, level, width, height, coeffs }
    }

    /// Materialize as an image, clamping samples into `[0, 2^bit_depth - 1]`.
    /// Intermediate-depth LL planes can exceed the nominal range; clamping
    /// happens only here so the raw integer path stays available.
    pub fn to_image_clamped(&self, bit_depth: u8) -> Result<Image, crate::image_io::ImageError> {
        let max: i64 = if bit_depth == 8 { 0xff } else { 0xffff };
        let pixels = self.coeffs.iter().map(|&c| c.clamp(0, max) as u16).collect();
        Image::new(self.width, self.height, bit_depth, pixels)
    }
}

/// The three detail bands of one decomposition level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetailBands {
    pub hl: Subband,
    pub lh: Subband,
    pub hh: Subband,
}

/// Full decomposition pyramid of an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pyramid {
    pub levels: u8,
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    pub base_ll: Subband,
    /// Detail groups in reconstruction order: `details[0]` is the coarsest
    /// level (level = `levels`), applied first when rebuilding.
    pub details: Vec<DetailBands>,
}

/// `ceil(dim / 2^times)`, the LL extent after `times` ceil-halvings.
pub fn halved_dim(dim: u32, times: u8) -> u32 {
    if times >= 32 {
        return if dim > 0 { 1 } else { 0 };
    }
    let step = 1u64 << times;
    ((dim as u64 + step - 1) / step) as u32
}

/// One 5/3 lifting pass over `signal`, split into (approximation, detail).
///
/// d[i] = x[2i+1] - floor((x[2i] + x[2i+2]) / 2)
/// s[i] = x[2i]   + floor((d[i-1] + d[i] + 2) / 4)
///
/// with whole-sample symmetric extension at both ends. Even-index samples
/// count ceil(n/2), odd-index floor(n/2).
pub fn forward_1d(signal: &[i64]) -> Result<(Vec<i64>, Vec<i64>), WaveletError> {
    if signal.is_empty() {
        return Err(WaveletError::EmptySignal);
    }
    let n = signal.len();
    if n == 1 {
        return Ok((vec![signal[0]], Vec::new()));
    }
    let mut x = signal.to_vec();
    lift_forward(&mut x);
    let mut approx = Vec::with_capacity(n.div_ceil(2));
    let mut detail = Vec::with_capacity(n / 2);
    for (i, v) in x.into_iter().enumerate() {
        if i % 2 == 0 {
            approx.push(v);
        } else {
            detail.push(v);
        }
    }
    Ok((approx, detail))
}

/// Exact inverse of [`forward_1d`].
pub fn inverse_1d(approx: &[i64], detail: &[i64]) -> Result<Vec<i64>, WaveletError> {
    let (la, ld) = (approx.len(), detail.len());
    if la == 0 && ld == 0 {
        return Err(WaveletError::EmptySignal);
    }
    if la != ld && la != ld + 1 {
        return Err(WaveletError::LengthMismatch { approx: la, detail: ld });
    }
    let n = la + ld;
    let mut x = vec![0i64; n];
    for (i, &v) in approx.iter().enumerate() {
        x[2 * i] = v;
    }
    for (i, &v) in detail.iter().enumerate() {
        x[2 * i + 1] = v;
    }
    if n > 1 {
        lift_inverse(&mut x);
    }
    Ok(x)
}

// In-place lifting over interleaved samples (even = approx, odd = detail).
fn lift_forward(x: &mut [i64]) {
    let n = x.len();
    let mut i = 1;
    while i < n {
        let left = x[i - 1];
        let right = if i + 1 < n { x[i + 1] } else { x[i - 1] };
        x[i] -= (left + right) >> 1;
        i += 2;
    }
    let mut i = 0;
    while i < n {
        let left = if i > 0 { x[i - 1] } else { x[1] };
        let right = if i + 1 < n { x[i + 1] } else { x[i - 1] };
        x[i] += (left + right + 2) >> 2;
        i += 2;
    }
}

fn lift_inverse(x: &mut [i64]) {
    let n = x.len();
    let mut i = 0;
    while i < n {
        let left = if i > 0 { x[i - 1] } else { x[1] };
        let right = if i + 1 < n { x[i + 1] } else { x[i - 1] };
        x[i] -= (left + right + 2) >> 2;
        i += 2;
    }
    let mut i = 1;
    while i < n {
        let left = x[i - 1];
        let right = if i + 1 < n { x[i + 1] } else { x[i - 1] };
        x[i] += (left + right) >> 1;
        i += 2;
    }
}

/// Decompose `img` into an N-level pyramid: rows then columns per level,
/// recursing on LL.
pub fn forward_2d(img: &Image, levels: u8) -> Result<Pyramid, WaveletError> {
    if levels == 0 {
        return Err(WaveletError::ZeroLevels);
    }
    let (w, h) = (img.width(), img.height());
    // Every level must split a dimension of at least 2, or the ladder
    // stops doubling.
    let min_dim = w.min(h);
    if levels > 31 || halved_dim(min_dim, levels - 1) < 2 {
        return Err(WaveletError::LevelsTooLarge { levels, width: w, height: h });
    }

    let mut current: Vec<i64> = img.pixels().iter().map(|&p| i64::from(p)).collect();
    let (mut cw, mut ch) = (w as usize, h as usize);
    let mut groups_fine_to_coarse = Vec::with_capacity(levels as usize);

    for level in 1..=levels {
        let (plane, lw, lh) = split_level(&current, cw, ch);
        let (hw, hh_h) = (cw - lw, ch - lh);

        let mut ll = Vec::with_capacity(lw * lh);
        let mut hl = Vec::with_capacity(hw * lh);
        let mut lh_band = Vec::with_capacity(lw * hh_h);
        let mut hh = Vec::with_capacity(hw * hh_h);
        for y in 0..ch {
            for x in 0..cw {
                let v = plane[y * cw + x];
                match (x < lw, y < lh) {
                    (true, true) => ll.push(v),
                    (false, true) => hl.push(v),
                    (true, false) => lh_band.push(v),
                    (false, false) => hh.push(v),
                }
            }
        }

        groups_fine_to_coarse.push(DetailBands {
            hl: Subband::new(SubbandKind::Hl, level, hw as u32, lh as u32, hl),
            lh: Subband::new(SubbandKind::Lh, level, lw as u32, hh_h as u32, lh_band),
            hh: Subband::new(SubbandKind::Hh, level, hw as u32, hh_h as u32, hh),
        });
        current = ll;
        cw = lw;
        ch = lh;
    }

    groups_fine_to_coarse.reverse();
    Ok(Pyramid {
        levels,
        width: w,
        height: h,
        bit_depth: img.bit_depth(),
        base_ll: Subband::new(SubbandKind::Ll, levels, cw as u32, ch as u32, current),
        details: groups_fine_to_coarse,
    })
}

/// One analysis level over a `cw` x `ch` plane. Returns the transformed
/// plane with subbands laid out in quadrants (LL top-left) plus LL dims.
fn split_level(plane: &[i64], cw: usize, ch: usize) -> (Vec<i64>, usize, usize) {
    let lw = cw.div_ceil(2);
    let lh = ch.div_ceil(2);
    let mut out = vec![0i64; cw * ch];

    // Row pass: approx to columns [0, lw), detail to [lw, cw).
    for y in 0..ch {
        let row = &plane[y * cw..(y + 1) * cw];
        let (a, d) = forward_1d(row).expect("row is nonempty");
        out[y * cw..y * cw + lw].copy_from_slice(&a);
        out[y * cw + lw..(y + 1) * cw].copy_from_slice(&d);
    }

    // Column pass: approx to rows [0, lh), detail to [lh, ch).
    let mut col = vec![0i64; ch];
    for x in 0..cw {
        for y in 0..ch {
            col[y] = out[y * cw + x];
        }
        let (a, d) = forward_1d(&col).expect("column is nonempty");
        for (y, &v) in a.iter().enumerate() {
            out[y * cw + x] = v;
        }
        for (y, &v) in d.iter().enumerate() {
            out[(lh + y) * cw + x] = v;
        }
    }
    (out, lw, lh)
}

/// Rebuild the LL plane at depth `levels - levels_to_apply` by applying the
/// first `levels_to_apply` detail groups to the base LL. With
/// `levels_to_apply == pyr.levels` this is the source image, exactly.
/// Samples are returned unclamped; see [`Subband::to_image_clamped`].
pub fn inverse_2d(pyr: &Pyramid, levels_to_apply: usize) -> Result<Subband, WaveletError> {
    if levels_to_apply > pyr.levels as usize {
        return Err(WaveletError::DepthOutOfRange {
            requested: levels_to_apply,
            available: pyr.levels,
        });
    }
    reconstruct_ll(pyr.base_ll.clone(), &pyr.details[..levels_to_apply])
}

/// Fold detail groups (coarsest first) into an LL plane.
pub fn reconstruct_ll(base: Subband, groups: &[DetailBands]) -> Result<Subband, WaveletError> {
    let mut current = base;
    for group in groups {
        current = combine_level(&current, group)?;
    }
    Ok(current)
}

/// One synthesis level: columns then rows, inverting [`split_level`].
fn combine_level(ll: &Subband, group: &DetailBands) -> Result<Subband, WaveletError> {
    let (lw, lh) = (ll.width as usize, ll.height as usize);
    let DetailBands { hl, lh: lh_band, hh } = group;
    if hl.height != ll.height
        || lh_band.width != ll.width
        || hh.width != hl.width
        || hh.height != lh_band.height
    {
        return Err(WaveletError::BandGeometry);
    }
    let cw = lw + hl.width as usize;
    let ch = lh + lh_band.height as usize;

    // Lay subbands back out in quadrants.
    let mut plane = vec![0i64; cw * ch];
    for y in 0..ch {
        for x in 0..cw {
            let v = match (x < lw, y < lh) {
                (true, true) => ll.coeffs[y * lw + x],
                (false, true) => hl.coeffs[y * hl.width as usize + (x - lw)],
                (true, false) => lh_band.coeffs[(y - lh) * lw + x],
                (false, false) => hh.coeffs[(y - lh) * hl.width as usize + (x - lw)],
            };
            plane[y * cw + x] = v;
        }
    }

    // Column synthesis.
    let mut col_a = vec![0i64; lh];
    let mut col_d = vec![0i64; ch - lh];
    for x in 0..cw {
        for y in 0..lh {
            col_a[y] = plane[y * cw + x];
        }
        for y in lh..ch {
            col_d[y - lh] = plane[y * cw + x];
        }
        let full = inverse_1d(&col_a, &col_d)?;
        for (y, &v) in full.iter().enumerate() {
            plane[y * cw + x] = v;
        }
    }

    // Row synthesis.
    let mut out = vec![0i64; cw * ch];
    for y in 0..ch {
        let row = &plane[y * cw..(y + 1) * cw];
        let full = inverse_1d(&row[..lw], &row[lw..])?;
        out[y * cw..(y + 1) * cw].copy_from_slice(&full);
    }

    Ok(Subband::new(
        SubbandKind::Ll,
        ll.level.saturating_sub(1),
        cw as u32,
        ch as u32,
        out,
    ))
}
