#![no_main]

use graphcond::voxel::load_voxel_raw;
use libfuzzer_sys::fuzz_target;

// Byte 0..3 pick dims in 1..=16, byte 3 the threshold, the rest is volume.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let dims = [0, 1, 2].map(|i| usize::from(data[i] % 16) + 1);
    if let Ok(g) = load_voxel_raw(&data[4..], dims, data[3]) {
        assert_eq!(g.dims(), dims);
        assert!(g.occupied_count() <= g.len());
    }
});
