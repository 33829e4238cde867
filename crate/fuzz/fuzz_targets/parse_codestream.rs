//! Fuzz `codestream::parse` and the decode paths behind it.
//!
//! Accepted inputs must reserialize byte-for-byte, and partial decode must
//! agree between the full stream and its truncation at every d.
//!
//! cargo fuzz run parse_codestream

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::codestream;

fuzz_target!(|data: &[u8]| {
    let Ok(cs) = codestream::parse(data) else { return };

    // parse . serialize is the identity on valid streams
    assert_eq!(codestream::serialize(&cs), data);

    // keep decode work bounded: segment counts scale with pixel count
    let h = *cs.header();
    if h.width as u64 * h.height as u64 > 1 << 16 {
        return;
    }
    for d in 0..cs.present_segments() {
        let from_full = codestream::decode_partial(&cs, d);
        let truncated = codestream::truncate(&cs, d).expect("segment is present");
        let from_truncated = codestream::decode_partial(&truncated, d);
        match (from_full, from_truncated) {
            (Ok(a), Ok(b)) => assert_eq!(a, b, "decode diverges at d={d}"),
            (Err(_), Err(_)) => {}
            (a, b) => panic!("decode outcome diverges at d={d}: {a:?} vs {b:?}"),
        }
    }
});
