#![no_main]

use libfuzzer_sys::fuzz_target;

// The wide-CSV decoder must reject malformed input with an error, never
// panic or loop.
fuzz_target!(|data: &[u8]| {
    let _ = funssn::dataio::parse_matrix_csv(data, "fuzz");
});
