#![no_main]

use graphcond::voxel::{parse_pgm, write_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = parse_pgm(data) {
        assert_eq!(img.pixels.len(), img.width * img.height);
        assert_eq!(parse_pgm(&write_pgm(&img)).expect("re-parse"), img);
    }
});
