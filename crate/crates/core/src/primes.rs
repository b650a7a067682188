//! Primality testing, factorisation, and integer roots.
//!
//! Primality is decided deterministically for inputs that fit in 64 bits
//! (Miller-Rabin with a base set proven complete for that range) and
//! probabilistically above, with 64 fixed witness rounds; results for wide
//! integers are cached. Factorisation is trial division by a shared table of
//! small primes with a Pollard rho fallback for 64-bit cofactors, which
//! covers every modulus this crate constructs (smooth products of small
//! primes times at most one larger prime).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

const TRIAL_DIVISION_BOUND: u64 = 1_000_000;

/// Primes below `limit`, ascending.
pub fn small_primes(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    if limit < 2 {
        return Vec::new();
    }
    let mut is_comp = vec![false; limit];
    let mut out = Vec::new();
    for n in 2..limit {
        if !is_comp[n] {
            out.push(n as u64);
            let mut k = n * n;
            while k < limit {
                is_comp[k] = true;
                k += n;
            }
        }
    }
    out
}

fn shared_prime_table() -> &'static [u64] {
    static TABLE: OnceLock<Vec<u64>> = OnceLock::new();
    TABLE.get_or_init(|| small_primes(TRIAL_DIVISION_BOUND))
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc: u64 = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    // Base set proven sufficient for all n < 3.3 * 10^24.
    let d = n - 1;
    let s = d.trailing_zeros();
    let d = d >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn miller_rabin_bigint(n: &BigInt, bases: &[u64]) -> bool {
    let one = BigInt::one();
    let two = BigInt::from(2);
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d: BigInt = &n_minus_1 >> s;
    'witness: for &a in bases {
        let a = BigInt::from(a) % n;
        if a.is_zero() {
            continue;
        }
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn wide_prime_cache() -> &'static Mutex<HashMap<BigInt, bool>> {
    static CACHE: OnceLock<Mutex<HashMap<BigInt, bool>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Primality for arbitrary-size integers: deterministic when the input fits
/// in 64 bits, otherwise 64 fixed Miller-Rabin rounds with the result cached.
pub fn is_prime(n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    if let Some(&hit) = wide_prime_cache().lock().unwrap().get(n) {
        return hit;
    }
    static WIDE_BASES: OnceLock<Vec<u64>> = OnceLock::new();
    let bases = WIDE_BASES.get_or_init(|| small_primes(10_000).into_iter().take(64).collect());
    let verdict = miller_rabin_bigint(n, bases);
    wide_prime_cache().lock().unwrap().insert(n.clone(), verdict);
    verdict
}

fn pollard_rho_u64(n: u64) -> u64 {
    // Brent's cycle variant; n must be odd, composite, and not a prime power
    // handled by the caller's trial division.
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut c: u64 = 1;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let mut x: u64 = 2;
        let mut y: u64 = 2;
        let mut d: u64 = 1;
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd_u64(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Factor `n > 0` into ascending `(prime, exponent)` pairs.
///
/// Trial division by all primes below one million, then a deterministic
/// primality check on the cofactor, then Pollard rho while the remaining
/// composite fits in 64 bits. Wider composite cofactors are a domain error.
pub fn factorize(n: &BigInt) -> Result<Vec<(BigInt, u32)>> {
    if !n.is_positive() {
        return Err(Error::domain(format!("factorize: n = {n} must be positive")));
    }
    let mut rest = n.clone();
    let mut out: Vec<(BigInt, u32)> = Vec::new();
    for &p in shared_prime_table() {
        if rest.is_one() {
            break;
        }
        let pb = BigInt::from(p);
        if (&pb * &pb) > rest {
            break;
        }
        let mut exp = 0u32;
        loop {
            let (q, r) = rest.div_rem(&pb);
            if r.is_zero() {
                rest = q;
                exp += 1;
            } else {
                break;
            }
        }
        if exp > 0 {
            out.push((pb, exp));
        }
    }
    if !rest.is_one() {
        let mut stack = vec![rest];
        while let Some(m) = stack.pop() {
            if is_prime(&m) {
                push_factor(&mut out, m);
                continue;
            }
            match m.to_u64() {
                Some(small) => {
                    let d = pollard_rho_u64(small);
                    stack.push(BigInt::from(d));
                    stack.push(BigInt::from(small / d));
                }
                None => {
                    return Err(Error::domain(format!(
                        "factorize: composite cofactor {m} exceeds 64 bits"
                    )))
                }
            }
        }
        out.sort();
    }
    Ok(out)
}

fn push_factor(out: &mut Vec<(BigInt, u32)>, p: BigInt) {
    if let Some(entry) = out.iter_mut().find(|(q, _)| *q == p) {
        entry.1 += 1;
    } else {
        out.push((p, 1));
    }
}

/// True when `n > 0` has no repeated prime factor.
pub fn is_squarefree(n: &BigInt) -> Result<bool> {
    Ok(factorize(n)?.iter().all(|(_, e)| *e == 1))
}

/// Ascending primes congruent to 5 modulo 6, starting at `from` inclusive.
pub fn primes_5_mod_6_from(from: u64) -> impl Iterator<Item = u64> {
    let start = from.max(5);
    (start..).filter(|n| n % 6 == 5 && is_prime_u64(*n))
}

/// Largest integer `r` with `r^3 <= n`; requires `n >= 0`.
pub fn cbrt_floor(n: &BigInt) -> Result<BigInt> {
    if n.is_negative() {
        return Err(Error::domain(format!("cbrt_floor: n = {n} must be non-negative")));
    }
    Ok(n.cbrt())
}

/// Largest integer `r` with `r^2 <= n`; requires `n >= 0`.
pub fn sqrt_floor(n: &BigInt) -> Result<BigInt> {
    if n.is_negative() {
        return Err(Error::domain(format!("sqrt_floor: n = {n} must be non-negative")));
    }
    Ok(n.sqrt())
}

/// Euler's totient of `n >= 1`.
pub fn euler_phi(n: &BigInt) -> Result<BigInt> {
    if n < &BigInt::one() {
        return Err(Error::domain(format!("euler_phi: n = {n} must be >= 1")));
    }
    let mut phi = BigInt::one();
    for (p, e) in factorize(n)? {
        phi *= (&p - BigInt::one()) * p.pow(e - 1);
    }
    Ok(phi)
}

/// Inverse of `a` modulo `m > 0`, if `gcd(a, m) = 1`.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let (g, x, _) = extended_gcd(&a.mod_floor(m), m);
    if g.is_one() {
        Some(x.mod_floor(m))
    } else {
        None
    }
}

fn extended_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    if b.is_zero() {
        return (a.clone(), BigInt::one(), BigInt::zero());
    }
    let (g, x, y) = extended_gcd(b, &a.mod_floor(b));
    let q = a.div_floor(b);
    (g, y.clone(), x - q * y)
}
