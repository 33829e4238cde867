//! Fuzz the labels-CSV reader: no panics, and accepted tables round-trip
//! through the writer.
//!
//! cargo fuzz run read_labels_csv

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::image_io;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = image_io::read_labels_csv(data) else { return };
    let canonical = image_io::write_labels_csv(&table);
    assert_eq!(image_io::read_labels_csv(&canonical).expect("canonical form parses"), table);
});
