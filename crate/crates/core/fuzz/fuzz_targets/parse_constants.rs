#![no_main]

use graphcond::config::{parse_constants, write_constants};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_constants(text) {
        assert_eq!(parse_constants(&write_constants(&c)).expect("re-parse"), c);
    }
});
