#![no_main]

use anderson_spectra::config::{parse_entries, Experiment, ExperimentConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_entries(text);
    let exp = Experiment::ALL[data.first().map_or(0, |b| *b as usize) % Experiment::ALL.len()];
    if let Ok(cfg) = ExperimentConfig::from_sources(exp, Some(text), &[]) {
        let again = ExperimentConfig::from_sources(exp, Some(&cfg.normalized()), &[]).expect("normalized config parses");
        assert_eq!(again.normalized(), cfg.normalized());
    }
});
