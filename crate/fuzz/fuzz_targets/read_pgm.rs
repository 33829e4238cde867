//! Fuzz the PGM reader: no panics on arbitrary bytes, and every accepted
//! image survives a write/read round trip exactly.
//!
//! cargo fuzz run read_pgm

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::image_io;

fuzz_target!(|data: &[u8]| {
    let Ok(img) = image_io::read_pgm(data) else { return };
    let canonical = image_io::write_pgm(&img);
    assert_eq!(image_io::read_pgm(&canonical).expect("canonical form parses"), img);
});
