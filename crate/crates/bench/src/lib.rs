//! Shared fixtures for the benchmark suite.

use num_bigint::BigInt;
use sevencubes::rational::{frac, rat};
use sevencubes::sieve::{Window, WindowFamily};

/// A three-window family with period 515955 — large enough to exercise
/// the sieve kernel, small enough to iterate in a benchmark loop.
pub fn desk_family() -> WindowFamily {
    let windows = [159, 165, 177]
        .into_iter()
        .map(|m| Window::new(BigInt::from(m), rat(0), frac(1, 10)).expect("valid window"))
        .collect();
    WindowFamily::new(windows).expect("valid family")
}
