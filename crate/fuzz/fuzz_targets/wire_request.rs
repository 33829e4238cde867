//! Fuzz the request-frame parser: no panics, and accepted frames are in
//! canonical form (re-encoding reproduces the input bytes).
//!
//! cargo fuzz run wire_request

#![no_main]

use libfuzzer_sys::fuzz_target;

use isle::service::Request;

fuzz_target!(|data: &[u8]| {
    let Ok(req) = Request::decode(data) else { return };
    assert_eq!(req.encode(), data);
});
