#![no_main]

use anderson_spectra::model::parse_distribution;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match parse_distribution(text) {
        Ok(dist) => {
            // the canonical form parses back to the same law
            let again = parse_distribution(&dist.to_string()).expect("canonical form parses");
            assert_eq!(again, dist);
        }
        Err(e) => assert!(e.position <= text.len()),
    }
});
