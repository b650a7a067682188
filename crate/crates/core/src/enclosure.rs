//! Two-sided rational enclosures of real quantities.
//!
//! Real constants enter the machinery only as ordered pairs of rationals
//! `[lower, upper]` guaranteed to bracket the true value. Arithmetic on
//! enclosures always rounds outward, so any comparison made against an
//! endpoint is conservative: a range bottom is compared through its lower
//! endpoint, a range top through its upper endpoint, and a decision is made
//! only when it holds for every value inside the bracket.
//!
//! Exponentials are built from a truncated power series with an explicit
//! rational bound on the discarded tail (valid because the reduced argument
//! is at most one half), then squared back up, with outward dyadic rounding
//! after every squaring to keep the representation small. Cube roots come
//! from integer cube roots of scaled numerators, refined by extra binary
//! digits until the requested relative width is met.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Default relative-width target for exponential enclosures: 10^-30,
/// comfortably finer than any threshold decision downstream depends on.
pub fn default_exp_target() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(10u32).pow(30))
}

/// A closed rational bracket `[lower, upper]` around a real value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    lo: Rational,
    hi: Rational,
}

impl Enclosure {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::domain(format!(
                "enclosure bounds out of order: {} > {}",
                rational::format_rational(&lo),
                rational::format_rational(&hi)
            )));
        }
        Ok(Enclosure { lo, hi })
    }

    /// Degenerate enclosure of an exactly known rational.
    pub fn exact(x: Rational) -> Self {
        Enclosure { lo: x.clone(), hi: x }
    }

    pub fn lower(&self) -> &Rational {
        &self.lo
    }

    pub fn upper(&self) -> &Rational {
        &self.hi
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    /// Width relative to the lower endpoint; `None` unless `lower > 0`.
    pub fn relative_width(&self) -> Option<Rational> {
        if self.lo.is_positive() {
            Some(self.width() / &self.lo)
        } else {
            None
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    /// True when every value in the bracket is `>= x`.
    pub fn certainly_ge(&self, x: &Rational) -> bool {
        self.lo >= *x
    }

    /// True when every value in the bracket is `<= x`.
    pub fn certainly_le(&self, x: &Rational) -> bool {
        self.hi <= *x
    }

    /// Product enclosure (any signs).
    pub fn mul(&self, other: &Enclosure) -> Enclosure {
        let products = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = products.iter().min().unwrap().clone();
        let hi = products.iter().max().unwrap().clone();
        Enclosure { lo, hi }
    }

    pub fn square(&self) -> Enclosure {
        self.mul(self)
    }

    /// Scale by an exact rational (any sign).
    pub fn scale(&self, c: &Rational) -> Enclosure {
        let a = &self.lo * c;
        let b = &self.hi * c;
        if a <= b {
            Enclosure { lo: a, hi: b }
        } else {
            Enclosure { lo: b, hi: a }
        }
    }

    /// Round both endpoints outward onto a dyadic grid with roughly `bits`
    /// significant bits, shrinking the representation without ever shrinking
    /// the bracket. Requires a positive lower endpoint.
    fn round_outward(&self, bits: u32) -> Enclosure {
        debug_assert!(self.lo.is_positive());
        let magnitude = self.hi.numer().bits() as i64 - self.hi.denom().bits() as i64;
        let shift = bits as i64 - magnitude;
        let lo = dyadic_floor(&self.lo, shift);
        let hi = dyadic_ceil(&self.hi, shift);
        debug_assert!(lo <= self.lo && self.hi <= hi);
        Enclosure { lo, hi }
    }

    /// Enclosure of `exp(exponent)` for `exponent >= 0`, with relative width
    /// at most `target_rel_width`.
    ///
    /// The argument is halved until it is at most one half, the series
    /// `sum y^k / k!` is summed with the exact tail bound
    /// `2 * y^(K+1) / (K+1)!`, and the bracket is squared back up with
    /// outward rounding. Terms and precision are increased until the target
    /// width is met; failure to converge within the iteration cap is an
    /// error, never a silently wide result.
    pub fn exp(exponent: &Rational, target_rel_width: &Rational) -> Result<Self> {
        if exponent.is_negative() {
            return Err(Error::domain(format!(
                "exp enclosure: exponent {} must be non-negative",
                rational::format_rational(exponent)
            )));
        }
        if !target_rel_width.is_positive() {
            return Err(Error::domain("exp enclosure: target width must be positive"));
        }
        if exponent.is_zero() {
            return Ok(Enclosure::exact(Rational::one()));
        }
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut halvings = 0u32;
        let mut reduced = exponent.clone();
        while reduced > half {
            reduced /= Rational::from_integer(BigInt::from(2));
            halvings += 1;
        }
        // Bits needed to resolve the target width, plus one per squaring
        // (each squaring doubles relative width) and slack for rounding.
        let target_bits =
            (target_rel_width.denom().bits() as i64 - target_rel_width.numer().bits() as i64).max(8)
                as u32;
        const MAX_ATTEMPTS: u32 = 8;
        let mut last_width = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            let terms = 20 + 14 * attempt;
            let bits = target_bits + halvings + 24 + 16 * attempt;
            let mut enc = exp_series_bracket(&reduced, terms).round_outward(bits);
            for _ in 0..halvings {
                enc = enc.square().round_outward(bits);
            }
            let rel = enc.relative_width().expect("exp enclosure is positive");
            if rel <= *target_rel_width {
                return Ok(enc);
            }
            last_width = rational::format_rational(&rel);
        }
        Err(Error::Refinement {
            achieved: last_width,
            target: rational::format_rational(target_rel_width),
            iterations: MAX_ATTEMPTS,
        })
    }

    /// Enclosure of `exp(exponent)` at the default target width.
    pub fn exp_default(exponent: &Rational) -> Result<Self> {
        Self::exp(exponent, &default_exp_target())
    }

    /// Enclosure of the real cube root, for brackets with `lower > 0`.
    ///
    /// The output satisfies `out.lower^3 <= self.lower` and
    /// `out.upper^3 >= self.upper` exactly, with relative width at most
    /// `target_rel_width` (an error if the input bracket itself is too wide
    /// to allow that).
    pub fn cube_root(&self, target_rel_width: &Rational) -> Result<Self> {
        if !self.lo.is_positive() {
            return Err(Error::domain(
                "cube root enclosure requires a positive lower endpoint",
            ));
        }
        if !target_rel_width.is_positive() {
            return Err(Error::domain("cube root: target width must be positive"));
        }
        const MAX_ATTEMPTS: u32 = 10;
        let mut extra_bits: u32 = 4;
        let mut last_width = String::new();
        for _ in 0..MAX_ATTEMPTS {
            let lo = cbrt_lower(&self.lo, extra_bits);
            let hi = cbrt_upper(&self.hi, extra_bits);
            let enc = Enclosure { lo, hi };
            debug_assert!(rational::cube_cmp(&enc.lo, &self.lo) != std::cmp::Ordering::Greater);
            debug_assert!(rational::cube_cmp(&enc.hi, &self.hi) != std::cmp::Ordering::Less);
            let rel = enc
                .relative_width()
                .ok_or_else(|| Error::internal("cube root bracket lost positivity"))?;
            if rel <= *target_rel_width {
                return Ok(enc);
            }
            last_width = rational::format_rational(&rel);
            // Each extra bit halves the grid; jump far enough to close the
            // remaining gap in one or two attempts.
            let deficit = (rel.numer().bits() as i64 - rel.denom().bits() as i64)
                - (target_rel_width.numer().bits() as i64
                    - target_rel_width.denom().bits() as i64);
            extra_bits = extra_bits.saturating_add(deficit.max(4) as u32 + 2);
        }
        Err(Error::Refinement {
            achieved: last_width,
            target: rational::format_rational(target_rel_width),
            iterations: MAX_ATTEMPTS,
        })
    }

    /// Canonical text form: `lo_num/lo_den hi_num/hi_den`.
    pub fn format(&self) -> String {
        format!(
            "{} {}",
            rational::format_rational(&self.lo),
            rational::format_rational(&self.hi)
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let lo = parts
            .next()
            .ok_or_else(|| Error::parse(format!("enclosure missing lower bound: {text:?}")))?;
        let hi = parts
            .next()
            .ok_or_else(|| Error::parse(format!("enclosure missing upper bound: {text:?}")))?;
        if parts.next().is_some() {
            return Err(Error::parse(format!("trailing tokens in enclosure: {text:?}")));
        }
        Enclosure::new(rational::parse_rational(lo)?, rational::parse_rational(hi)?)
    }
}

impl fmt::Display for Enclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.format())
    }
}

/// `[S, S + tail]` bracketing `exp(y)` for `0 < y <= 1/2`, where `S` is the
/// series truncated after `terms` terms and the tail bound uses
/// `sum_{k>K} y^k/k! <= y^(K+1)/(K+1)! * 1/(1-y) <= 2 y^(K+1)/(K+1)!`.
fn exp_series_bracket(y: &Rational, terms: u32) -> Enclosure {
    let mut sum = Rational::one();
    let mut term = Rational::one();
    for k in 1..=terms {
        term = term * y / Rational::from_integer(BigInt::from(k));
        sum += &term;
    }
    let tail = term * y * Rational::from_integer(BigInt::from(2))
        / Rational::from_integer(BigInt::from(terms + 1));
    let hi = &sum + tail;
    Enclosure { lo: sum, hi }
}

fn dyadic_floor(x: &Rational, shift: i64) -> Rational {
    if shift >= 0 {
        let scaled = (x.numer() << shift as u64).div_floor(x.denom());
        Rational::new(scaled, BigInt::one() << shift as u64)
    } else {
        let scaled = x.numer().div_floor(&(x.denom() << (-shift) as u64));
        Rational::from_integer(scaled << (-shift) as u64)
    }
}

fn dyadic_ceil(x: &Rational, shift: i64) -> Rational {
    if shift >= 0 {
        let scaled = (x.numer() << shift as u64).div_ceil(x.denom());
        Rational::new(scaled, BigInt::one() << shift as u64)
    } else {
        let scaled = x.numer().div_ceil(&(x.denom() << (-shift) as u64));
        Rational::from_integer(scaled << (-shift) as u64)
    }
}

/// Largest grid rational `r` with denominator `den = v.denom() << extra_bits`
/// such that `r^3 <= v`: cubing `r/den <= v^(1/3)` gives
/// `r^3 <= v.numer() * v.denom()^2 * 2^(3*extra_bits)`.
fn cbrt_lower(v: &Rational, extra_bits: u32) -> Rational {
    let den = v.denom() << extra_bits;
    let n = (v.numer() * &den * &den) << extra_bits;
    let r = n.cbrt();
    Rational::new(r, den)
}

/// Smallest grid rational `r` with `r^3 >= v`.
fn cbrt_upper(v: &Rational, extra_bits: u32) -> Rational {
    let den = v.denom() << extra_bits;
    let n = (v.numer() * &den * &den) << extra_bits;
    let r = n.cbrt();
    let r3 = &r * &r * &r;
    let up = if r3 == n { r } else { r + BigInt::one() };
    Rational::new(up, den)
}
