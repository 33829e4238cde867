//! Raster and label-table I/O: binary PGM (P5) and a minimal 0/1 label CSV.
//!
//! PGM is the only raster interchange format: it holds 8- and 16-bit
//! grayscale losslessly and parses the same everywhere. 16-bit samples are
//! big-endian per Netpbm convention. The CSV dialect is deliberately tiny:
//! comma-separated, `\n` line endings, no quoting; asset ids are restricted
//! to `[A-Za-z0-9_.-]`.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be nonzero")]
    EmptyImage,
    #[error("bit depth must be 8 or 16, got {0}")]
    UnsupportedBitDepth(u8),
    #[error("pixel buffer holds {actual} samples, expected {expected}")]
    PixelCountMismatch { expected: u64, actual: usize },
    #[error("sample {value} exceeds the {bit_depth}-bit range")]
    SampleOutOfRange { value: u16, bit_depth: u8 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a binary PGM: missing P5 magic")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    MalformedHeader(&'static str),
    #[error("maxval {0} outside 1..=65535")]
    BadMaxval(u64),
    #[error("pixel payload truncated: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: u64, actual: usize },
    #[error("{extra} trailing bytes after pixel payload")]
    TrailingData { extra: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelCsvError {
    #[error("labels CSV is not valid UTF-8")]
    NotUtf8,
    #[error("header must start with `asset_id` and name at least one label")]
    BadHeader,
    #[error("row {row} has {actual} cells, expected {expected}")]
    RaggedRow { row: usize, expected: usize, actual: usize },
    #[error("row {row}: cell `{cell}` is not 0 or 1")]
    NonBinaryCell { row: usize, cell: String },
    #[error("row {row}: invalid asset id `{id}`")]
    BadAssetId { row: usize, id: String },
    #[error("duplicate asset id `{0}`")]
    DuplicateAssetId(String),
    #[error("labels CSV has no data rows")]
    Empty,
}

/// A 2D grayscale image: row-major integer samples at 8 or 16 bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    bit_depth: u8,
    pixels: Vec<u16>,
}

impl Image {
    pub fn new(width: u32, height: u32, bit_depth: u8, pixels: Vec<u16>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyImage);
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(ImageError::UnsupportedBitDepth(bit_depth));
        }
        let expected = width as u64 * height as u64;
        if pixels.len() as u64 != expected {
            return Err(ImageError::PixelCountMismatch { expected, actual: pixels.len() });
        }
        if bit_depth == 8 {
            if let Some(&value) = pixels.iter().find(|&&value| value > 0xff) {
                return Err(ImageError::SampleOutOfRange { value, bit_depth });
            }
        }
        Ok(Self { width, height, bit_depth, pixels })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    /// Largest representable sample: `2^bit_depth - 1`.
    pub fn max_sample(&self) -> u16 {
        if self.bit_depth == 8 {
            0xff
        } else {
            0xffff
        }
    }
}

/// Parse a binary PGM (`P5`). Comments (`#` to end of line) are allowed
/// anywhere whitespace separates header tokens. Trailing bytes after the
/// pixel payload are rejected.
pub fn read_pgm(bytes: &[u8]) -> Result<Image, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let width = read_header_int(bytes, &mut pos)?;
    let height = read_header_int(bytes, &mut pos)?;
    let maxval = read_header_int(bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::BadMaxval(maxval));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if is_pgm_whitespace(*b) => pos += 1,
        _ => return Err(PgmError::MalformedHeader("missing whitespace before payload")),
    }

    let width = u32::try_from(width).map_err(|_| PgmError::MalformedHeader("width overflow"))?;
    let height = u32::try_from(height).map_err(|_| PgmError::MalformedHeader("height overflow"))?;
    let bit_depth: u8 = if maxval <= 255 { 8 } else { 16 };
    let bytes_per_sample = u64::from(bit_depth / 8);
    let expected = width as u64 * height as u64 * bytes_per_sample;
    let payload = &bytes[pos..];
    if (payload.len() as u64) < expected {
        return Err(PgmError::TruncatedPayload { expected, actual: payload.len() });
    }
    if payload.len() as u64 > expected {
        return Err(PgmError::TrailingData { extra: payload.len() - expected as usize });
    }

    let pixels = if bit_depth == 8 {
        payload.iter().map(|&b| u16::from(b)).collect()
    } else {
        payload.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    Ok(Image::new(width, height, bit_depth, pixels)?)
}

/// Emit the canonical binary PGM: `P5\n<w> <h>\n<maxval>\n` followed by the
/// payload. Byte-identical output for identical images.
pub fn write_pgm(img: &Image) -> Vec<u8> {
    let maxval: u32 = if img.bit_depth() == 8 { 255 } else { 65535 };
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    let mut out = header.into_bytes();
    if img.bit_depth() == 8 {
        out.extend(img.pixels().iter().map(|&p| p as u8));
    } else {
        for &p in img.pixels() {
            out.extend_from_slice(&p.to_be_bytes());
        }
    }
    out
}

fn is_pgm_whitespace(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

/// Skip whitespace and comments, then read one decimal token. At least one
/// separator byte must precede the token.
fn read_header_int(bytes: &[u8], pos: &mut usize) -> Result<u64, PgmError> {
    let start = *pos;
    loop {
        match bytes.get(*pos) {
            Some(b) if is_pgm_whitespace(*b) => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    if *pos == start {
        return Err(PgmError::MalformedHeader("expected whitespace between tokens"));
    }
    let digits_start = *pos;
    let mut value: u64 = 0;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u64::from(b - b'0')))
            .ok_or(PgmError::MalformedHeader("header value overflow"))?;
        *pos += 1;
    }
    if *pos == digits_start {
        return Err(PgmError::MalformedHeader("expected decimal value"));
    }
    Ok(value)
}

/// Ground-truth binary labels keyed by asset id, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    label_names: Vec<String>,
    rows: Vec<(String, Vec<bool>)>,
    by_asset: HashMap<String, usize>,
}

impl LabelTable {
    pub fn new(label_names: Vec<String>, rows: Vec<(String, Vec<bool>)>) -> Result<Self, LabelCsvError> {
        if label_names.is_empty() {
            return Err(LabelCsvError::BadHeader);
        }
        let mut by_asset = HashMap::with_capacity(rows.len());
        for (i, (id, values)) in rows.iter().enumerate() {
            if !is_valid_asset_id(id) {
                return Err(LabelCsvError::BadAssetId { row: i + 2, id: id.clone() });
            }
            if values.len() != label_names.len() {
                return Err(LabelCsvError::RaggedRow {
                    row: i + 2,
                    expected: label_names.len() + 1,
                    actual: values.len() + 1,
                });
            }
            if by_asset.insert(id.clone(), i).is_some() {
                return Err(LabelCsvError::DuplicateAssetId(id.clone()));
            }
        }
        Ok(Self { label_names, rows, by_asset })
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn rows(&self) -> &[(String, Vec<bool>)] {
        &self.rows
    }

    pub fn get(&self, asset_id: &str) -> Option<&[bool]> {
        self.by_asset.get(asset_id).map(|&i| self.rows[i].1.as_slice())
    }
}

pub fn is_valid_asset_id(id: &str) -> bool {
    !id.is_empty()
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'-'))
}

/// Parse a labels CSV: header `asset_id,<label1>,...`, cells 0/1.
pub fn read_labels_csv(bytes: &[u8]) -> Result<LabelTable, LabelCsvError> {
    let text = std::str::from_utf8(bytes).map_err(|_| LabelCsvError::NotUtf8)?;
    let mut lines = text.split('\n');
    let header = lines.next().ok_or(LabelCsvError::BadHeader)?;
    let mut cells = header.split(',');
    if cells.next() != Some("asset_id") {
        return Err(LabelCsvError::BadHeader);
    }
    let label_names: Vec<String> = cells.map(str::to_owned).collect();
    if label_names.is_empty() || label_names.iter().any(String::is_empty) {
        return Err(LabelCsvError::BadHeader);
    }

    let expected = label_names.len() + 1;
    let total_lines = text.split('\n').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2; // 1-based, after the header
        if line.is_empty() {
            // Only a trailing newline may leave an empty final line.
            if text.ends_with('\n') && row == total_lines {
                continue;
            }
            return Err(LabelCsvError::RaggedRow { row, expected, actual: 1 });
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != expected {
            return Err(LabelCsvError::RaggedRow { row, expected, actual: cells.len() });
        }
        let mut values = Vec::with_capacity(label_names.len());
        for cell in &cells[1..] {
            match *cell {
                "0" => values.push(false),
                "1" => values.push(true),
                other => {
                    return Err(LabelCsvError::NonBinaryCell { row, cell: other.to_owned() })
                }
            }
        }
        if !is_valid_asset_id(cells[0]) {
            return Err(LabelCsvError::BadAssetId { row, id: cells[0].to_owned() });
        }
        rows.push((cells[0].to_owned(), values));
    }
    if rows.is_empty() {
        return Err(LabelCsvError::Empty);
    }
    LabelTable::new(label_names, rows)
}

/// Emit the canonical CSV for a label table; inverse of [`read_labels_csv`].
pub fn write_labels_csv(table: &LabelTable) -> Vec<u8> {
    let mut out = String::from("asset_id");
    for name in table.label_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (id, values) in table.rows() {
        out.push_str(id);
        for &v in values {
            out.push(',');
            out.push(if v { '1' } else { '0' });
        }
        out.push('\n');
    }
    out.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_wellformed_pgm() {
        let bytes = b"P5 2 2 255 \x00\x01\x02\x03";
        // The canonical form uses newlines; any single whitespace works.
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 1, 2, 3]);
        let img = read_pgm(&data).unwrap();
        assert_eq!((img.width(), img.height(), img.bit_depth()), (2, 2, 8));
        assert_eq!(img.pixels(), &[0, 1, 2, 3]);
        let img2 = read_pgm(bytes).unwrap();
        assert_eq!(img, img2);
    }

    #[test]
    fn sixteen_bit_samples_are_big_endian() {
        let mut data = b"P5\n1 1\n65535\n".to_vec();
        data.extend_from_slice(&[0x01, 0x00]);
        let img = read_pgm(&data).unwrap();
        assert_eq!(img.bit_depth(), 16);
        assert_eq!(img.pixels(), &[256]);
    }

    #[test]
    fn write_is_canonical() {
        let img = Image::new(1, 1, 8, vec![7]).unwrap();
        let mut expected = b"P5\n1 1\n255\n".to_vec();
        expected.push(7);
        assert_eq!(write_pgm(&img), expected);

        let img = Image::new(2, 1, 16, vec![256, 1]).unwrap();
        let bytes = write_pgm(&img);
        assert_eq!(&bytes[bytes.len() - 4..], &[0x01, 0x00, 0x00, 0x01]);
    }

    #[test]
    fn comments_are_skipped() {
        let mut data = b"P5\n# a comment\n2 1 # trailing\n255\n".to_vec();
        data.extend_from_slice(&[9, 10]);
        let img = read_pgm(&data).unwrap();
        assert_eq!(img.pixels(), &[9, 10]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let mut data = b"P5\n2 2\n255\n".to_vec();
        data.extend_from_slice(&[0, 1, 2]);
        assert!(matches!(read_pgm(&data), Err(PgmError::TruncatedPayload { expected: 4, actual: 3 })));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut data = b"P5\n1 1\n255\n".to_vec();
        data.extend_from_slice(&[0, 1]);
        assert!(matches!(read_pgm(&data), Err(PgmError::TrailingData { extra: 1 })));
    }

    #[test]
    fn maxval_bounds() {
        assert!(matches!(read_pgm(b"P5\n1 1\n0\n\x00"), Err(PgmError::BadMaxval(0))));
        assert!(matches!(read_pgm(b"P5\n1 1\n65536\n\x00"), Err(PgmError::BadMaxval(65536))));
    }

    #[test]
    fn missing_separator_after_magic() {
        assert!(read_pgm(b"P52 2 255 \x00").is_err());
    }

    #[test]
    fn labels_roundtrip_and_errors() {
        let t = read_labels_csv(b"asset_id,a\nx,1\n").unwrap();
        assert_eq!(t.label_names(), &["a".to_owned()]);
        assert_eq!(t.get("x"), Some(&[true][..]));

        let t = read_labels_csv(b"asset_id,a,b\nx,1,0\ny,0,1\n").unwrap();
        assert_eq!(t.rows().len(), 2);
        assert_eq!(t.get("y"), Some(&[false, true][..]));

        let back = read_labels_csv(&write_labels_csv(&t)).unwrap();
        assert_eq!(back, t);

        assert!(matches!(
            read_labels_csv(b"asset_id,a\nx,1,0\n"),
            Err(LabelCsvError::RaggedRow { .. })
        ));
        assert!(matches!(
            read_labels_csv(b"asset_id,a\nx,2\n"),
            Err(LabelCsvError::NonBinaryCell { .. })
        ));
        assert!(matches!(
            read_labels_csv(b"asset_id,a\nx,1\nx,0\n"),
            Err(LabelCsvError::DuplicateAssetId(_))
        ));
        assert!(matches!(read_labels_csv(b"asset_id,a\n"), Err(LabelCsvError::Empty)));
        assert!(matches!(read_labels_csv(b"id,a\nx,1\n"), Err(LabelCsvError::BadHeader)));
    }
}
