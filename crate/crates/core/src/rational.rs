//! Exact rational arithmetic helpers.
//!
//! Everything downstream (windows, sieves, certificates) works over
//! arbitrary-precision rationals kept in lowest terms with positive
//! denominators; this module adds the handful of operations the rest of the
//! crate needs beyond plain field arithmetic: floor division with remainder
//! against an integer modulus, comparisons through exact cubing (so cube
//! roots never have to be extracted), and the canonical `num/den` text form
//! used by every serialised artifact.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Arbitrary-precision rational, always in lowest terms.
pub type Rational = BigRational;

/// `x` as a rational.
pub fn rat(x: i64) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

/// `n / d` as a rational; `d` must be non-zero.
pub fn frac(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer `n` as a rational.
pub fn big(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

/// Floor quotient and remainder of `x` by a positive integer modulus:
/// `x = q * m + r` with `q` integral and `0 <= r < m`.
pub fn quo_rem(x: &Rational, modulus: &BigInt) -> Result<(BigInt, Rational)> {
    if !modulus.is_positive() {
        return Err(Error::domain(format!(
            "quo_rem: modulus {modulus} must be positive"
        )));
    }
    let q = x.numer().div_floor(&(x.denom() * modulus));
    let r = x - big(&(&q * modulus));
    debug_assert!(!r.is_negative() && r < big(modulus));
    Ok((q, r))
}

/// Check the scaling identity for `kappa | m`: dividing both the argument
/// and the modulus by `kappa` preserves the quotient and scales the
/// remainder, i.e. `Q(x/k, m/k) = Q(x, m)` and `R(x/k, m/k) = R(x, m)/k`.
pub fn scaled_quo_rem_agrees(x: &Rational, modulus: &BigInt, kappa: &BigInt) -> Result<bool> {
    if !kappa.is_positive() || !modulus.mod_floor(kappa).is_zero() {
        return Err(Error::domain(format!(
            "scaled_quo_rem_agrees: kappa {kappa} must be a positive divisor of {modulus}"
        )));
    }
    let (q, r) = quo_rem(x, modulus)?;
    let scaled_x = x / big(kappa);
    let scaled_m = modulus / kappa;
    let (q2, r2) = quo_rem(&scaled_x, &scaled_m)?;
    Ok(q == q2 && r2 * big(kappa) == r)
}

/// Ordering of `lhs^3` against `rhs` (which is already a cube-scale value).
/// Cubing is strictly monotone over the reals, so this decides `lhs` against
/// the real cube root of `rhs` without extracting any root.
pub fn cube_cmp(lhs: &Rational, rhs: &Rational) -> Ordering {
    let lhs3 = lhs * lhs * lhs;
    lhs3.cmp(rhs)
}

/// Canonical text form `num/den`, always with an explicit denominator.
pub fn format_rational(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parse `num/den` (or a bare integer) into a rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n, d),
        None => (text, "1"),
    };
    let num: BigInt = num
        .parse()
        .map_err(|_| Error::parse(format!("bad rational numerator in {text:?}")))?;
    let den: BigInt = den
        .parse()
        .map_err(|_| Error::parse(format!("bad rational denominator in {text:?}")))?;
    if den.is_zero() {
        return Err(Error::parse(format!("zero denominator in {text:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Scientific-notation approximation with `sig` significant digits, e.g.
/// `1.85e-1`. Diagnostic only: computed with integer arithmetic, rounding
/// half away from zero, never used in any certification decision.
pub fn approx_sci(x: &Rational, sig: u32) -> String {
    assert!(sig >= 1);
    if x.is_zero() {
        return "0".to_string();
    }
    let neg = x.is_negative();
    let ax = x.abs();
    // Locate e with 10^e <= |x| < 10^(e+1), starting from digit counts.
    let mut e = ax.numer().to_string().len() as i64 - ax.denom().to_string().len() as i64;
    while ax >= pow10(e + 1) {
        e += 1;
    }
    while ax < pow10(e) {
        e -= 1;
    }
    // mantissa = round(|x| * 10^(sig-1-e)) has exactly `sig` digits,
    // except when rounding carries it to 10^sig.
    let shift = sig as i64 - 1 - e;
    let scaled = ax * pow10(shift);
    let two = BigInt::from(2);
    let mut mant = (scaled.numer() * &two + scaled.denom()).div_floor(&(scaled.denom() * &two));
    if mant == BigInt::from(10u32).pow(sig) {
        mant = BigInt::from(10u32).pow(sig - 1);
        e += 1;
    }
    let digits = mant.to_string();
    let mantissa = if sig == 1 {
        digits
    } else {
        format!("{}.{}", &digits[..1], &digits[1..])
    };
    format!("{}{}e{}", if neg { "-" } else { "" }, mantissa, e)
}

fn pow10(e: i64) -> Rational {
    let p = BigInt::from(10u32).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rational::from_integer(p)
    } else {
        Rational::new(BigInt::one(), p)
    }
}
