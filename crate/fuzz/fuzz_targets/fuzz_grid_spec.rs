#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = funssn::dataio::parse_grid_spec(text) {
            // exercising the derived grid must also be panic-free
            let _ = spec.to_grid(16);
        }
    }
});
