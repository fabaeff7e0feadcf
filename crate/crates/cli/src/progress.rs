use std::sync::Mutex;
use std::time::{Duration, Instant};

use anderson_spectra::ensemble::Progress;

const INTERVAL: Duration = Duration::from_millis(500);

/// Writes `done/total` lines to stderr, at most one per half second.
pub struct StderrProgress {
    quiet: bool,
    last: Mutex<Option<Instant>>,
    latest: Mutex<(usize, usize)>,
}

impl StderrProgress {
    pub fn new(quiet: bool) -> Self {
        Self { quiet, last: Mutex::new(None), latest: Mutex::new((0, 0)) }
    }

    /// Emits the final count if anything was reported.
    pub fn finish(&self) {
        let (done, total) = *self.latest.lock().unwrap();
        if !self.quiet && total > 0 {
            eprintln!("{done}/{total}");
        }
    }
}

impl Progress for StderrProgress {
    fn update(&self, done: usize, total: usize) {
        if self.quiet {
            return;
        }
        *self.latest.lock().unwrap() = (done, total);
        let mut last = self.last.lock().unwrap();
        let now = Instant::now();
        if last.is_none_or(|t| now.duration_since(t) >= INTERVAL) {
            *last = Some(now);
            eprintln!("{done}/{total}");
        }
    }
}
