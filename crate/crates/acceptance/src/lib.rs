//! Shared helpers for the acceptance suite.

use std::io::Write;
use std::time::Instant;

/// One criterion outcome. The line goes straight to the process stdout, so it shows even when
/// the test harness captures `print!` output.
pub fn report(label: &str, pass: bool, detail: &str) -> bool {
    let line = format!("ACCEPTANCE {label}: {} | {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    pass
}

/// Runs `f` and returns its value with the elapsed wall time in seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

/// Relative deviation |x/target − 1|.
pub fn rel(x: f64, target: f64) -> f64 {
    (x / target - 1.0).abs()
}
