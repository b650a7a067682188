//! Exact-arithmetic machinery for certifying that every integer in a target
//! range is a sum of seven positive cubes.
//!
//! The library is organised around a single object: for a modulus `m` and a
//! pair of rational thresholds `0 <= eps < delta <= 1`, the *bad set* of a
//! window `(m, eps, delta)` is the set of real `x` whose remainder `R(x, m)`
//! falls outside `[eps * m, delta * m)`. Numbers whose bad sets (intersected
//! over a family of windows) cluster tightly around rational points `a/q` can
//! be certified representable by seven cubes; the remaining machinery builds
//! explicit representations, plans window families for a target range, and
//! runs the interval sieve that computes bad sets exactly.
//!
//! All certification arithmetic is exact: rationals everywhere, with real
//! constants (exponentials, cube roots) replaced by two-sided rational
//! enclosures that are always rounded outward.
//!
//! Modules:
//! - [`rational`]: exact rational helpers (floor division, cube comparisons).
//! - [`enclosure`]: two-sided rational bounds for real quantities.
//! - [`intervals`]: canonical sets of half-open rational intervals.
//! - [`sieve`]: residue windows and the jump sieve that computes bad sets.
//! - [`tower`]: lifting bad sets through a chain of enlarged window families.
//! - [`criterion`]: the covering criterion, certificates, and re-verification.
//! - [`construct`]: explicit seven-cube representations for single integers.
//! - [`bands`]: predicted bad-set bands near rational points, and audits.
//! - [`params`]: range plans, window selection, and scaling-factor search.
//! - [`primes`]: primality, factorisation, and integer roots.
//! - [`pipeline`]: chunked, resumable runs and their manifests.

pub mod bands;
pub mod construct;
pub mod criterion;
pub mod enclosure;
mod error;
pub mod intervals;
pub mod params;
pub mod pipeline;
pub mod primes;
pub mod rational;
pub mod sieve;
pub mod tower;

pub use enclosure::Enclosure;
pub use error::{Error, Result};
pub use intervals::{Interval, IntervalSet};
pub use rational::Rational;
pub use sieve::{Window, WindowFamily};
