#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ckpt) = funssn::model::Checkpoint::parse(text) {
            // a parsed checkpoint may still describe an invalid model
            let _ = ckpt.into_model();
        }
    }
});
