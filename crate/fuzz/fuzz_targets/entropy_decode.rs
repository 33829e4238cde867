//! Fuzz the entropy decoder. The first two input bytes pick the expected
//! coefficient count; the rest is the token stream. Anything the decoder
//! accepts must re-encode and decode to the same coefficients.
//!
//! cargo fuzz run entropy_decode

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::codestream;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let count = (u16::from_le_bytes([data[0], data[1]]) % 4096) as usize;
    let Ok(coeffs) = codestream::entropy_decode(&data[2..], count) else { return };
    assert_eq!(coeffs.len(), count);
    let canonical = codestream::entropy_encode(&coeffs);
    assert_eq!(codestream::entropy_decode(&canonical, count).expect("canonical stream decodes"), coeffs);
});
