#![no_main]

use graphcond::graph::CircuitGraph;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(g) = CircuitGraph::parse(text) {
        let again = CircuitGraph::parse(&g.to_text()).expect("re-parse");
        assert_eq!(again, g);
    }
});
