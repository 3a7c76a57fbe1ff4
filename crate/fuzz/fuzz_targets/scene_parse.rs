#![no_main]

use libfuzzer_sys::fuzz_target;
use nfsar_core::formats::{parse_scene, write_scene};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(scene) = parse_scene(text) else {
        return;
    };
    // Huge phases can overflow on the way back to degrees.
    if scene.scatterers.iter().any(|s| !s.phase_rad.to_degrees().is_finite()) {
        return;
    }
    let again = parse_scene(&write_scene(&scene)).expect("written scene parses");
    assert_eq!(again.len(), scene.len());
    assert_eq!(again.label, scene.label);
    for (a, b) in again.scatterers.iter().zip(&scene.scatterers) {
        assert_eq!(a.azimuth_m, b.azimuth_m);
        assert_eq!(a.range_m, b.range_m);
        assert_eq!(a.amplitude_dbsm, b.amplitude_dbsm);
    }
});
