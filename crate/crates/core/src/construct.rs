//! Explicit decomposition of an integer into seven non-negative cubes.
//!
//! Everything here rests on one identity. Write the modulus as `m = 6r + 3`
//! and pair cube roots symmetrically around `r + 1/2`:
//!
//! ```text
//! (r+1+x)³ + (r−x)³ = (m/3)·(r² + r + 1 + 3(x² + x)).
//! ```
//!
//! Summing three such pairs and one even cube `(2t)³` gives
//!
//! ```text
//! N = 8t³ + m·(r² + r + 1 + x(x+1) + y(y+1) + z(z+1)),
//! ```
//!
//! so finding seven cubes for `N` reduces to two classical problems:
//! choose `t` with `8t³ ≡ N (mod m)` — unique when cubing is a bijection
//! modulo `m`, which is exactly why the moduli are built from 3 and primes
//! `≡ 5 (mod 6)` — and then write `k = (N − 8t³)/m − (r² + r + 1)` as
//! `x(x+1) + y(y+1) + z(z+1)`, which is possible for every even `k ≥ 0`
//! because every integer is a sum of three triangular numbers.
//!
//! The two sides of the band/range bookkeeping meet here exactly:
//! `k ≥ 0` is equivalent to `N − 8t³ ≥ m³/36 + (3/4)m`, and
//! `k ≤ r² + r` to `N − 8t³ ≤ m³/18 + m/2`. Those are precisely the range
//! bounds enforced per window, with `8t³` estimated through the band
//! `t ∈ [ε·m, δ·m)`. When `t` lands in the band and `N` lies in the
//! window's admissible range, the construction cannot fail; a `t` outside
//! the band is reported as a structured miss so callers can fall through
//! to another window.
//!
//! The module also carries a small exact oracle (minimum number of
//! positive cubes by dynamic programming) and a bounded descending search,
//! both used to cross-check the constructive path and to exhibit the
//! classical exceptional set below 455.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::primes;
use crate::rational;
use crate::sieve::{self, Window};

/// The unique `t ∈ [0, m)` with `8t³ ≡ n (mod m)`, for `m` squarefree,
/// divisible by 3, with every other prime factor `≡ 5 (mod 6)`.
///
/// Cubing is a bijection modulo every prime factor (modulo 3 because
/// `t³ ≡ t`, modulo `p ≡ 5 (mod 6)` because `gcd(3, p−1) = 1`), so the
/// congruence is solved prime by prime and recombined.
pub fn cube_root_mod(n: &BigInt, m: &BigInt) -> Result<BigInt> {
    sieve::check_modulus_structure(m)?;
    let n = n.mod_floor(m);
    let three = BigInt::from(3);
    let eight = BigInt::from(8);

    let invert = |a: &BigInt, md: &BigInt| -> Result<BigInt> {
        primes::mod_inverse(a, md)
            .ok_or_else(|| Error::internal(format!("{a} has no inverse modulo {md}")))
    };

    let mut t = BigInt::zero();
    let mut modulus = BigInt::one();
    for (p, _) in primes::factorize(m)? {
        let tp = if p == three {
            // 8t³ ≡ 2t (mod 3), and 2 is its own inverse.
            (BigInt::from(2) * &n).mod_floor(&three)
        } else {
            // t = (n/8)^(3⁻¹ mod p−1) mod p.
            let c = (&n * invert(&eight, &p)?).mod_floor(&p);
            let e = invert(&three, &(&p - BigInt::one()))?;
            c.modpow(&e, &p)
        };
        // Chinese remainder step: keep t ≡ previous (mod modulus) while
        // forcing t ≡ tp (mod p).
        let inv = invert(&modulus, &p)?;
        let shift = ((&tp - &t) * inv).mod_floor(&p);
        t += &modulus * shift;
        modulus *= &p;
    }
    Ok(t)
}

/// Write an even `k ≥ 0` as `x(x+1) + y(y+1) + z(z+1)` with
/// `x ≥ y ≥ z ≥ 0` — twice a sum of three triangular numbers, which
/// exists for every such `k`. The search walks `x` downward from the
/// largest admissible value and is expected to succeed within a few
/// iterations; exhaustion would contradict the three-triangle theorem and
/// is reported as an internal error.
pub fn three_triangular(k: &BigInt) -> Result<(BigInt, BigInt, BigInt)> {
    if k.is_negative() {
        return Err(Error::domain(format!("triangular target must be >= 0, got {k}")));
    }
    if k.is_odd() {
        return Err(Error::domain(format!("triangular target must be even, got {k}")));
    }

    // Largest x with x(x+1) <= v.
    let cap = |v: &BigInt| -> Result<BigInt> {
        let x = (primes::sqrt_floor(&(BigInt::from(4) * v + BigInt::one()))? - BigInt::one())
            .div_floor(&BigInt::from(2));
        Ok(x)
    };

    let mut x = cap(k)?;
    while !x.is_negative() {
        let px = &x * (&x + BigInt::one());
        let rem1 = k - &px;
        if rem1 > BigInt::from(2) * &px {
            // Even y = z = x cannot reach k; smaller x only makes it worse.
            break;
        }
        let mut y = cap(&rem1)?.min(x.clone());
        while !y.is_negative() {
            let py = &y * (&y + BigInt::one());
            let rem2 = &rem1 - &py;
            if rem2 > py {
                break;
            }
            let z = cap(&rem2)?;
            if &z * (&z + BigInt::one()) == rem2 && z <= y {
                return Ok((x, y, z));
            }
            y -= BigInt::one();
        }
        x -= BigInt::one();
    }
    Err(Error::internal(format!("no three-triangular decomposition found for {k}")))
}

/// Seven non-negative cube roots summing to a target when cubed. The root
/// order is preserved from construction; zeros are legitimate entries (the
/// target is then a sum of fewer positive cubes).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeRepresentation {
    n: BigInt,
    roots: Vec<BigInt>,
}

impl CubeRepresentation {
    /// Validates the arithmetic: exactly seven roots, all non-negative,
    /// cubes summing to `n`.
    pub fn new(n: BigInt, roots: Vec<BigInt>) -> Result<Self> {
        if roots.len() != 7 {
            return Err(Error::domain(format!("expected 7 roots, got {}", roots.len())));
        }
        if let Some(bad) = roots.iter().find(|r| r.is_negative()) {
            return Err(Error::domain(format!("negative cube root {bad}")));
        }
        let sum: BigInt = roots.iter().map(|r| r * r * r).sum();
        if sum != n {
            return Err(Error::internal(format!(
                "cube sum mismatch: roots give {sum}, expected {n}"
            )));
        }
        Ok(CubeRepresentation { n, roots })
    }

    pub fn target(&self) -> &BigInt {
        &self.n
    }

    pub fn roots(&self) -> &[BigInt] {
        &self.roots
    }

    /// Number of strictly positive cubes in the sum.
    pub fn nonzero_count(&self) -> usize {
        self.roots.iter().filter(|r| r.is_positive()).count()
    }
}

impl fmt::Display for CubeRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.n)?;
        for (i, r) in self.roots.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{r}^3")?;
        }
        Ok(())
    }
}

/// Shared core of the two construction entry points: given `t`, runs the
/// identity and reports `k`-range violations through `reject`.
fn build_from_root(
    n: &BigInt,
    m: &BigInt,
    t: &BigInt,
    reject: impl Fn(String) -> Error,
) -> Result<CubeRepresentation> {
    let r = (m - BigInt::from(3)).div_floor(&BigInt::from(6));
    let rr = &r * (&r + BigInt::one());
    let base = &rr + BigInt::one();
    let quotient = (n - BigInt::from(8) * t * t * t).div_floor(m);
    let k = &quotient - &base;
    if k.is_negative() || k > rr {
        return Err(reject(format!(
            "offset {k} for t={t} lies outside [0, {rr}]: the target is outside \
             the range this modulus can serve"
        )));
    }
    if k.is_odd() {
        return Err(reject(format!("offset {k} for t={t} is odd; the target must be odd")));
    }
    let (x, y, z) = three_triangular(&k)?;
    let one = BigInt::one();
    let roots = vec![
        &r + &one + &x,
        &r - &x,
        &r + &one + &y,
        &r - &y,
        &r + &one + &z,
        &r - &z,
        BigInt::from(2) * t,
    ];
    CubeRepresentation::new(n.clone(), roots)
}

/// Construct seven cubes for `n` through a window. The cube root of
/// `n/8 (mod m)` must land inside the window's band — that is what the
/// sieve certifies for all but the bad residues — and the structured
/// [`Error::WindowMiss`] reports when it does not. With the band hit and
/// `n` in the window's admissible range, failure is impossible; any
/// `k`-range violation therefore reports as an internal error.
pub fn seven_cubes_from_window(n: &BigInt, w: &Window) -> Result<CubeRepresentation> {
    let m = w.modulus();
    let t = cube_root_mod(n, m)?;
    let tq = rational::big(&t);
    if tq < w.band_lo() || tq >= w.band_hi() {
        return Err(Error::WindowMiss {
            n: n.to_string(),
            modulus: m.to_string(),
            t: t.to_string(),
            lo: rational::format_rational(&w.band_lo()),
            hi: rational::format_rational(&w.band_hi()),
        });
    }
    build_from_root(n, m, &t, Error::internal)
}

/// Construct seven cubes for `n` directly from a structured modulus, with
/// no band requirement. Unlike the window path there is no guarantee the
/// identity applies, so an inadmissible target reports as a domain error
/// rather than an internal one.
pub fn seven_cubes_direct(n: &BigInt, m: &BigInt) -> Result<CubeRepresentation> {
    let t = cube_root_mod(n, m)?;
    build_from_root(n, m, &t, Error::domain)
}

/// Minimum number of positive cubes summing to each `n ≤ limit`, by
/// dynamic programming; entry 0 is 0. Every positive integer needs at
/// most nine.
pub fn min_cubes_table(limit: usize) -> Vec<u8> {
    let mut cubes = Vec::new();
    let mut c = 1usize;
    while c * c * c <= limit {
        cubes.push(c * c * c);
        c += 1;
    }
    let mut dp = vec![u8::MAX; limit + 1];
    dp[0] = 0;
    for n in 1..=limit {
        let mut best = u8::MAX;
        for &cube in &cubes {
            if cube > n {
                break;
            }
            let prev = dp[n - cube];
            if prev != u8::MAX && prev + 1 < best {
                best = prev + 1;
            }
        }
        dp[n] = best;
    }
    dp
}

/// Every `n ≥ 1` up to `limit` needing eight or more positive cubes.
/// The list is classical and finite — seventeen values, the largest 454 —
/// which is why `limit` must reach at least 455 for the scan to be
/// meaningful.
pub fn exceptions_scan(limit: usize) -> Result<Vec<usize>> {
    if limit < 455 {
        return Err(Error::domain(format!(
            "exception scan limit must be at least 455, got {limit}"
        )));
    }
    let dp = min_cubes_table(limit);
    Ok((1..=limit).filter(|&n| dp[n] >= 8).collect())
}

/// Outcome of the bounded seven-cube search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SearchOutcome {
    /// A representation was found.
    Found(CubeRepresentation),
    /// The whole search space was exhausted: no representation exists.
    Exhausted,
    /// The node budget ran out before the space was covered.
    BudgetExceeded,
}

/// Depth-first search for at most seven positive cubes summing to `n`,
/// trying larger roots first and pruning branches that cannot reach the
/// remainder. `max_nodes` bounds the number of recursive extensions, so
/// the search always terminates quickly even on adversarial inputs.
pub fn seven_cubes_search(n: &BigInt, max_nodes: u64) -> Result<SearchOutcome> {
    if !n.is_positive() {
        return Err(Error::domain(format!("search target must be positive, got {n}")));
    }

    enum Step {
        Found,
        NotFound,
        OutOfBudget,
    }

    fn descend(
        n: &BigInt,
        parts_left: u32,
        max_root: &BigInt,
        budget: &mut u64,
        stack: &mut Vec<BigInt>,
    ) -> Result<Step> {
        if n.is_zero() {
            return Ok(Step::Found);
        }
        if parts_left == 0 {
            return Ok(Step::NotFound);
        }
        let mut root = primes::cbrt_floor(n)?.min(max_root.clone());
        while root.is_positive() {
            // parts_left roots of at most `root` cannot reach n; smaller
            // roots fail the same way, so stop descending.
            let reach = BigInt::from(parts_left) * &root * &root * &root;
            if reach < *n {
                return Ok(Step::NotFound);
            }
            if *budget == 0 {
                return Ok(Step::OutOfBudget);
            }
            *budget -= 1;
            let rest = n - &root * &root * &root;
            stack.push(root.clone());
            match descend(&rest, parts_left - 1, &root, budget, stack)? {
                Step::Found => return Ok(Step::Found),
                Step::OutOfBudget => return Ok(Step::OutOfBudget),
                Step::NotFound => {}
            }
            stack.pop();
            root -= BigInt::one();
        }
        Ok(Step::NotFound)
    }

    let mut budget = max_nodes;
    let mut stack = Vec::new();
    let max_root = primes::cbrt_floor(n)?;
    match descend(n, 7, &max_root, &mut budget, &mut stack)? {
        Step::Found => {
            while stack.len() < 7 {
                stack.push(BigInt::zero());
            }
            Ok(SearchOutcome::Found(CubeRepresentation::new(n.clone(), stack)?))
        }
        Step::NotFound => Ok(SearchOutcome::Exhausted),
        Step::OutOfBudget => Ok(SearchOutcome::BudgetExceeded),
    }
}
