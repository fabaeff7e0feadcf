#![no_main]

use anderson_spectra::config::parse_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = parse_grid(text) {
        let points = grid.points();
        assert_eq!(points.len(), grid.count);
        assert_eq!(parse_grid(&grid.to_string()).expect("display form parses"), grid);
    }
});
