//! Fuzz the response-frame parser: no panics, and accepted frames are in
//! canonical form (re-encoding reproduces the input bytes).
//!
//! cargo fuzz run wire_response

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::service::Response;

fuzz_target!(|data: &[u8]| {
    let Ok(resp) = Response::decode(data) else { return };
    assert_eq!(resp.encode(), data);
});
