#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(samples) = cavmem::cli::parse_mode_csv(text) {
            assert!(samples.iter().all(|s| s.re.is_finite() && s.im.is_finite()));
        }
    }
});
