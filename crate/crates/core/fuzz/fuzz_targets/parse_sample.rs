#![no_main]

use graphcond::sample::Sample;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Sample::parse(text) {
        // accepted documents survive a write/read cycle
        let again = Sample::parse(&s.to_text()).expect("re-parse");
        assert_eq!(again.inclusions.len(), s.inclusions.len());
    }
});
