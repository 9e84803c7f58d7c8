#![no_main]

use graphcond::calibrate::{parse_references, write_references};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_references(text) {
        let again = parse_references(&write_references(&points)).expect("re-parse");
        assert_eq!(again, points);
    }
});
