//! Range planning: turning a target range `[K1, K2]` into a sieve-ready
//! window family, and the searches that keep a descending tower of ranges
//! supplied with moduli.
//!
//! Window selection comes in two modes. Standard mode fixes the band
//! `(eps, delta) = (0, 1/10)` and admits any modulus in
//! `[263/100·K2^{1/3}, 292/100·K2^{1/3}]`; within that range the size
//! conditions of `check_range_fit` hold automatically once `K2 ≥ 10^5`.
//! Variable mode instead derives the band from the range: for a modulus `m`
//! it takes the largest `delta' ≤ 1000` and smallest `eps' ≥ 0` in
//! thousandths compatible with
//!
//! ```text
//! K1 ≥ (8·delta³ + 1/36)·m³ + (3/4)·m,
//! K2 ≤ (8·eps³   + 1/18)·m³ + (1/2)·m,
//! ```
//!
//! and accepts when `delta − eps ≥ 1/20`. This admits moduli across the
//! wider range `[12/5·K^{1/3}, 16/5·K^{1/3}]`, which is what makes the last
//! few tower levels workable when the standard interval runs out of
//! admissible divisors.
//!
//! A bad set computed once for a family `W` can be reused at any scale:
//! `Bad(κ·m, eps, delta) = κ·Bad(m, eps, delta)`, so multiplying every
//! modulus by a scaling factor `κ` multiplies the bad set pointwise. The
//! factor must keep the scaled moduli admissible — `κ` squarefree, `3 | κ`,
//! all other primes `≡ 5 (mod 6)` and larger than any prime used by the
//! base moduli — and land them in the window interval, which pins
//! `κ ∈ [263/265·K^{1/3}/10^{11}, 292/290·K^{1/3}/10^{11}]` against the
//! base decade `[265·10^9, 290·10^9]`. `find_kappa` searches that interval
//! by brute enumeration when it is small, and otherwise factors it through
//! a product `τ` of consecutive admissible primes so that only a bounded
//! multiplier needs scanning.
//!
//! Ranges descend geometrically: level `n` covers
//! `[(9/10)^{n+1}·T, (9/10)^n·T]` from the tower top `T = e^{524}` down to
//! the floor `e^{787/10}`, crossed at level 4226. Each time the bad-set
//! period must grow, the plan adjoins the smallest admissible prime `p` not
//! yet in the period and enough new moduli divisible by `3p` to compensate
//! densification — `ceil(3·log p / log(10/9))` of them, evaluated exactly
//! as the smallest `T` with `10^T ≥ 9^T·p³`.

use std::fmt;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::intervals::IntervalSet;
use crate::primes;
use crate::rational::{self, Rational};
use crate::sieve::{Window, WindowFamily};

/// How a plan chooses window bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    /// Fixed band `(0, 1/10)`, moduli in `[263/100·K2^{1/3}, 292/100·K2^{1/3}]`.
    Standard,
    /// Per-modulus bands in thousandths, moduli in `[12/5·K^{1/3}, 16/5·K^{1/3}]`.
    Variable,
}

impl PlanMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanMode::Standard => "standard",
            PlanMode::Variable => "variable",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "standard" => Ok(PlanMode::Standard),
            "variable" => Ok(PlanMode::Variable),
            other => Err(Error::parse(format!("unknown plan mode {other:?}"))),
        }
    }
}

impl fmt::Display for PlanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A fully specified sieving plan for one range of the tower.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangePlan {
    /// Level index within the descending tower.
    pub n: u64,
    pub k1: Enclosure,
    pub k2: Enclosure,
    /// Scaling factor applied to a precomputed base bad set, when used.
    pub kappa: Option<BigInt>,
    pub family: WindowFamily,
    pub mode: PlanMode,
}

/// Largest integer `t ≥ 0` with `t³ ≤ x`. Domain error for `x < 0`.
fn cbrt_floor_rational(x: &Rational) -> Result<BigInt> {
    if x.is_negative() {
        return Err(Error::domain(format!(
            "cube root of negative value {}",
            rational::format_rational(x)
        )));
    }
    let mut t = primes::cbrt_floor(&x.floor().to_integer())?;
    while rational::big(&(&t + 1)).pow(3) <= *x {
        t += 1;
    }
    while t.is_positive() && rational::big(&t).pow(3) > *x {
        t -= 1;
    }
    Ok(t)
}

/// Smallest integer `t ≥ 0` with `t³ ≥ x`. Yields `0` for `x ≤ 0`.
fn cbrt_ceil_rational(x: &Rational) -> Result<BigInt> {
    if !x.is_positive() {
        return Ok(BigInt::zero());
    }
    let mut t = cbrt_floor_rational(x)?;
    if rational::big(&t).pow(3) < *x {
        t += 1;
    }
    Ok(t)
}

/// Inclusive integer bracket `[lo, hi]` of moduli provably inside
/// `[a/c·K^{1/3}, b/c·K^{1/3}]` for every `K` in the enclosure, via the
/// exact cubed forms `c³·m³ ≥ a³·K.upper` and `c³·m³ ≤ b³·K.lower`.
fn modulus_bracket(k: &Enclosure, a: i64, b: i64, c: i64) -> Result<(BigInt, BigInt)> {
    let c3 = rational::rat(c * c * c);
    let lo = cbrt_ceil_rational(&(rational::rat(a * a * a) * k.upper() / &c3))?;
    let hi = cbrt_floor_rational(&(rational::rat(b * b * b) * k.lower() / &c3))?;
    Ok((lo, hi))
}

impl RangePlan {
    /// Check the mode's invariants: band shape and modulus interval in
    /// standard mode, band width and the wider interval in variable mode.
    /// Interval membership is verified conservatively against the enclosure.
    pub fn validate(&self) -> Result<()> {
        if self.k1.upper() > self.k2.lower() {
            return Err(Error::domain(format!(
                "plan range is empty or uncertain: K1 enclosure {} vs K2 enclosure {}",
                self.k1.format(),
                self.k2.format()
            )));
        }
        if let Some(kappa) = &self.kappa {
            if !kappa.is_positive() {
                return Err(Error::domain(format!("scaling factor {kappa} must be positive")));
            }
        }
        let (lo, hi) = match self.mode {
            PlanMode::Standard => modulus_bracket(&self.k2, 263, 292, 100)?,
            PlanMode::Variable => modulus_bracket(&self.k2, 12, 16, 5)?,
        };
        for w in self.family.windows() {
            if *w.modulus() < lo || *w.modulus() > hi {
                return Err(Error::domain(format!(
                    "window modulus {} outside the {} interval [{lo}, {hi}]",
                    w.modulus(),
                    self.mode
                )));
            }
            match self.mode {
                PlanMode::Standard => {
                    if !w.eps().is_zero() || *w.delta() != rational::frac(1, 10) {
                        return Err(Error::domain(format!(
                            "standard plan requires band (0, 1/10), window {} has ({}, {})",
                            w.modulus(),
                            rational::format_rational(w.eps()),
                            rational::format_rational(w.delta())
                        )));
                    }
                }
                PlanMode::Variable => {
                    if w.delta() - w.eps() < rational::frac(1, 20) {
                        return Err(Error::domain(format!(
                            "variable plan requires delta - eps >= 1/20, window {} has {}",
                            w.modulus(),
                            rational::format_rational(&(w.delta() - w.eps()))
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Serialize as a plan manifest: headers, then one `m eps delta` line
    /// per window.
    pub fn write_text(&self, out: &mut dyn Write) -> Result<()> {
        writeln!(out, "#n {}", self.n)?;
        writeln!(out, "#k1 {}", self.k1.format())?;
        writeln!(out, "#k2 {}", self.k2.format())?;
        match &self.kappa {
            Some(k) => writeln!(out, "#kappa {k}")?,
            None => writeln!(out, "#kappa -")?,
        }
        writeln!(out, "#mode {}", self.mode)?;
        writeln!(out, "#windows {}", self.family.windows().len())?;
        for w in self.family.windows() {
            writeln!(
                out,
                "{}\t{}\t{}",
                w.modulus(),
                rational::format_rational(w.eps()),
                rational::format_rational(w.delta())
            )?;
        }
        Ok(())
    }

    /// Parse a plan manifest and validate it.
    pub fn read_text(reader: &mut dyn BufRead) -> Result<RangePlan> {
        fn header(it: &mut impl Iterator<Item = std::io::Result<String>>, key: &str) -> Result<String> {
            let line = it
                .next()
                .ok_or_else(|| Error::parse(format!("missing header {key}")))??;
            line.strip_prefix(&format!("{key} "))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(format!("expected header {key}, got {line:?}")))
        }
        let mut lines = reader.lines();
        let n = header(&mut lines, "#n")?
            .parse::<u64>()
            .map_err(|e| Error::parse(format!("bad level index: {e}")))?;
        let k1 = Enclosure::parse(&header(&mut lines, "#k1")?)?;
        let k2 = Enclosure::parse(&header(&mut lines, "#k2")?)?;
        let kappa_text = header(&mut lines, "#kappa")?;
        let kappa = match kappa_text.as_str() {
            "-" => None,
            text => Some(
                text.parse::<BigInt>()
                    .map_err(|e| Error::parse(format!("bad scaling factor: {e}")))?,
            ),
        };
        let mode = PlanMode::parse(&header(&mut lines, "#mode")?)?;
        let count = header(&mut lines, "#windows")?
            .parse::<usize>()
            .map_err(|e| Error::parse(format!("bad window count: {e}")))?;
        let mut windows = Vec::with_capacity(count);
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse("missing window line".to_string()))??;
            let mut parts = line.split('\t');
            let mut field = |name: &str| {
                parts
                    .next()
                    .ok_or_else(|| Error::parse(format!("window line missing {name}: {line:?}")))
            };
            let m = field("modulus")?
                .parse::<BigInt>()
                .map_err(|e| Error::parse(format!("bad modulus: {e}")))?;
            let eps = rational::parse_rational(field("eps")?)?;
            let delta = rational::parse_rational(field("delta")?)?;
            windows.push(Window::new(m, eps, delta)?);
        }
        let plan = RangePlan {
            n,
            k1,
            k2,
            kappa,
            family: WindowFamily::new(windows)?,
            mode,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Windows accepted from a candidate modulus list, with the rejects and
/// the reason each was turned away.
#[derive(Debug, Clone)]
pub struct WindowSelection {
    pub accepted: Vec<Window>,
    pub rejected: Vec<(BigInt, String)>,
}

/// Standard-mode selection: keep each candidate modulus provably inside
/// `[263/100·K2^{1/3}, 292/100·K2^{1/3}]` as a window `(m, 0, 1/10)`.
/// Needs `K2 ≥ 10^5`; below that the fixed band has no size guarantee.
pub fn standard_windows(k2: &Enclosure, moduli: &[BigInt]) -> Result<WindowSelection> {
    if !k2.certainly_ge(&rational::rat(100_000)) {
        return Err(Error::domain(format!(
            "standard windows need K2 >= 100000, got enclosure {}",
            k2.format()
        )));
    }
    let (lo, hi) = modulus_bracket(k2, 263, 292, 100)?;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for m in moduli {
        if *m < lo {
            rejected.push((m.clone(), format!("below the window interval [{lo}, {hi}]")));
        } else if *m > hi {
            rejected.push((m.clone(), format!("above the window interval [{lo}, {hi}]")));
        } else {
            accepted.push(Window::new(m.clone(), Rational::zero(), rational::frac(1, 10))?);
        }
    }
    Ok(WindowSelection { accepted, rejected })
}

/// Variable-mode window for one modulus: the widest band in thousandths
/// whose size conditions still cover `[K1, K2]`. The band top is the
/// largest `delta' ≤ 1000` with
/// `K1 ≥ (8·(delta'/1000)³ + 1/36)·m³ + (3/4)·m` and the band bottom is
/// the smallest `eps' ≥ 0` with
/// `K2 ≤ (8·(eps'/1000)³ + 1/18)·m³ + (1/2)·m`; the window is accepted
/// when `delta' − eps' ≥ 50`. Rejections name the failed bound.
pub fn variable_window(m: &BigInt, k1: &Enclosure, k2: &Enclosure) -> Result<Window> {
    let m_rat = rational::big(m);
    let m3 = &m_rat * &m_rat * &m_rat;
    let cubes_scale = &rational::rat(8) * &m3 / rational::rat(1_000_000_000);

    let floor_room = k1.lower() - &m3 * rational::frac(1, 36) - &m_rat * rational::frac(3, 4);
    if !floor_room.is_positive() {
        return Err(Error::domain(format!(
            "modulus {m} rejected: range floor {} is below (1/36)m^3 + (3/4)m",
            rational::format_rational(k1.lower())
        )));
    }
    let delta_k = cbrt_floor_rational(&(&floor_room / &cubes_scale))?;
    if delta_k > BigInt::from(1000) {
        return Err(Error::domain(format!(
            "modulus {m} rejected: band top {delta_k}/1000 exceeds 1 (modulus too small for the range)"
        )));
    }

    let ceil_gap = k2.upper() - &m3 * rational::frac(1, 18) - &m_rat * rational::frac(1, 2);
    let eps_k = cbrt_ceil_rational(&(&ceil_gap / &cubes_scale))?;

    if &delta_k - &eps_k < BigInt::from(50) {
        return Err(Error::domain(format!(
            "modulus {m} rejected: band width (delta' - eps')/1000 = ({delta_k} - {eps_k})/1000 \
             is below the 50/1000 minimum"
        )));
    }
    let delta_k = delta_k.to_i64().expect("band top fits i64");
    let eps_k = eps_k.to_i64().expect("band bottom fits i64");
    Window::new(m.clone(), rational::frac(eps_k, 1000), rational::frac(delta_k, 1000))
}

/// Structural admissibility of a scaling factor: `3 | κ`, and `κ/3` a
/// squarefree product of primes `≡ 5 (mod 6)`, all larger than 167.
fn scaling_factor_admissible(kappa: &BigInt) -> Result<bool> {
    let three = BigInt::from(3);
    if !(kappa % &three).is_zero() {
        return Ok(false);
    }
    let mu = kappa / &three;
    if mu < BigInt::one() {
        return Ok(false);
    }
    for (p, e) in primes::factorize(&mu)? {
        if e > 1 || (&p % BigInt::from(6)) != BigInt::from(5) || p <= BigInt::from(167) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Full re-verification of a scaling factor against a range constant:
/// the structural conditions plus provable membership in
/// `[263/265·K^{1/3}/10^{11}, 292/290·K^{1/3}/10^{11}]`, via the cubed
/// comparisons `265³·10³³·κ³ ≥ 263³·K` and `290³·10³³·κ³ ≤ 292³·K`.
pub fn verify_scaling_factor(kappa: &BigInt, k: &Enclosure) -> Result<()> {
    if !scaling_factor_admissible(kappa)? {
        return Err(Error::domain(format!(
            "scaling factor {kappa} is not 3 times a squarefree product of primes \
             congruent to 5 mod 6 exceeding 167"
        )));
    }
    let cube = rational::big(&(kappa * kappa * kappa));
    let ten33 = rational::big(&BigInt::from(10u32).pow(33));
    if rational::rat(265i64.pow(3)) * &ten33 * &cube < rational::rat(263i64.pow(3)) * k.upper() {
        return Err(Error::domain(format!(
            "scaling factor {kappa} below the admissible interval for K = {}",
            k.format()
        )));
    }
    if rational::rat(290i64.pow(3)) * &ten33 * &cube > rational::rat(292i64.pow(3)) * k.lower() {
        return Err(Error::domain(format!(
            "scaling factor {kappa} above the admissible interval for K = {}",
            k.format()
        )));
    }
    Ok(())
}

/// Find a scaling factor in `[263/265·K^{1/3}/10^{11}, 292/290·K^{1/3}/10^{11}]`.
///
/// When the integer bracket tops out below `10^7` every candidate is tried
/// directly. Otherwise a product `τ` of consecutive primes `≡ 5 (mod 6)`
/// starting at 173 absorbs the bulk — extended until `upper/τ < 10^7` —
/// and only the multiplier `μ` in `κ = 3·μ·τ` is scanned, ascending.
pub fn find_kappa(k: &Enclosure) -> Result<BigInt> {
    let ten33 = rational::big(&BigInt::from(10u32).pow(33));
    let lo = cbrt_ceil_rational(
        &(rational::rat(263i64.pow(3)) * k.upper() / (rational::rat(265i64.pow(3)) * &ten33)),
    )?;
    let hi = cbrt_floor_rational(
        &(rational::rat(292i64.pow(3)) * k.lower() / (rational::rat(290i64.pow(3)) * &ten33)),
    )?;
    let not_found = || Error::NoScalingFactor {
        lower: lo.to_string(),
        upper: hi.to_string(),
    };
    if lo > hi {
        return Err(not_found());
    }

    let brute_cap = BigInt::from(10_000_000u64);
    if hi < brute_cap {
        let mut kappa = lo.clone().max(BigInt::from(3));
        while kappa <= hi {
            if scaling_factor_admissible(&kappa)? {
                return Ok(kappa);
            }
            kappa += 1;
        }
        return Err(not_found());
    }

    let mut tau = BigInt::one();
    let mut tau_primes = Vec::new();
    for p in primes::primes_5_mod_6_from(173) {
        if &hi / &tau < brute_cap {
            break;
        }
        tau_primes.push(p);
        tau *= p;
    }
    let three_tau = BigInt::from(3) * &tau;
    let mu_lo = lo.div_ceil(&three_tau).max(BigInt::one());
    let mu_hi = hi.div_floor(&three_tau);
    let mut mu = mu_lo;
    while mu <= mu_hi {
        let mut ok = true;
        for (p, e) in primes::factorize(&mu)? {
            let small = p.to_u64();
            if e > 1
                || (&p % BigInt::from(6)) != BigInt::from(5)
                || p <= BigInt::from(167)
                || small.is_some_and(|p| tau_primes.contains(&p))
            {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(BigInt::from(3) * &tau * mu);
        }
        mu += 1;
    }
    Err(not_found())
}

/// All divisors of a squarefree integer inside `[lo, hi]`, ascending.
/// Depth-first over the prime factors, pruning branches that already
/// exceed `hi` or cannot reach `lo` with everything that remains.
pub fn divisors_in_range(big_m: &BigInt, lo: &BigInt, hi: &BigInt) -> Result<Vec<BigInt>> {
    let factors = primes::factorize(big_m)?;
    if let Some((p, _)) = factors.iter().find(|(_, e)| *e > 1) {
        return Err(Error::domain(format!(
            "divisor enumeration needs a squarefree integer; {big_m} is divisible by {p}^2"
        )));
    }
    // Largest primes first so pruning bites early.
    let mut ps: Vec<BigInt> = factors.into_iter().map(|(p, _)| p).collect();
    ps.sort();
    ps.reverse();
    // suffix[i] = product of ps[i..]; the most a partial product can still grow.
    let mut suffix = vec![BigInt::one(); ps.len() + 1];
    for i in (0..ps.len()).rev() {
        suffix[i] = &suffix[i + 1] * &ps[i];
    }
    let mut out = Vec::new();
    fn walk(
        ps: &[BigInt],
        suffix: &[BigInt],
        i: usize,
        cur: &BigInt,
        lo: &BigInt,
        hi: &BigInt,
        out: &mut Vec<BigInt>,
    ) {
        if cur > hi || cur * &suffix[i] < *lo {
            return;
        }
        if i == ps.len() {
            if cur >= lo {
                out.push(cur.clone());
            }
            return;
        }
        walk(ps, suffix, i + 1, cur, lo, hi, out);
        walk(ps, suffix, i + 1, &(cur * &ps[i]), lo, hi, out);
    }
    walk(&ps, &suffix, 0, &BigInt::one(), lo, hi, &mut out);
    out.sort();
    Ok(out)
}

/// Rescale a family and its bad set together by `κ`: every modulus becomes
/// `κ·m` (same band) and every bad endpoint is multiplied by `κ`. Expects
/// `bad` to be the family's bad set over one period `[0, M)`; the result is
/// then the scaled family's bad set over `[0, κ·M)` — the mechanism that
/// lets one sieve serve thousands of ranges.
pub fn scale_family(
    family: &WindowFamily,
    bad: &IntervalSet,
    kappa: &BigInt,
) -> Result<(WindowFamily, IntervalSet)> {
    if !kappa.is_positive() {
        return Err(Error::domain(format!("scaling factor {kappa} must be positive")));
    }
    Ok((family.scale_by(kappa)?, bad.scale(&rational::big(kappa))?))
}

/// Moduli growth needed to absorb a new prime `p`: the smallest `T` with
/// `10^T ≥ 9^T·p³`, the exact integer form of `ceil(3·log p / log(10/9))`.
pub fn growth_target(p: &BigInt) -> u64 {
    let mut t = 0u64;
    let mut ten = BigInt::one();
    let mut nine_p3 = p * p * p;
    while ten < nine_p3 {
        t += 1;
        ten *= 10;
        nine_p3 *= 9;
    }
    t
}

/// One step of period growth: the prime being adjoined, how many moduli
/// the step wants, and the moduli actually available.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrowthStep {
    pub prime: BigInt,
    pub target: u64,
    /// Chosen moduli (at most `target`, smallest first).
    pub moduli: Vec<BigInt>,
    /// Total admissible moduli discovered before truncation.
    pub found: usize,
}

impl GrowthStep {
    pub fn shortfall(&self) -> u64 {
        self.target.saturating_sub(self.found as u64)
    }
}

/// Plan the next period-growth step for a family: adjoin the smallest
/// prime `p ≡ 5 (mod 6)` not dividing the period `M`, and collect up to
/// `growth_target(p)` new moduli `m | p·M` with `3p | m` inside the mode's
/// modulus interval for `K2`. Fewer available moduli are reported as a
/// shortfall, not an error.
pub fn tower_growth_plan(
    current: &WindowFamily,
    k2: &Enclosure,
    mode: PlanMode,
) -> Result<GrowthStep> {
    let period = current.period();
    let p = primes::primes_5_mod_6_from(5)
        .map(BigInt::from)
        .find(|p| !(period % p).is_zero())
        .expect("prime iterator is unbounded");
    let target = growth_target(&p);
    let (lo, hi) = match mode {
        PlanMode::Standard => modulus_bracket(k2, 263, 292, 100)?,
        PlanMode::Variable => modulus_bracket(k2, 12, 16, 5)?,
    };
    // m = 3p·e with 3e | M, i.e. e ranges over divisors of M/3.
    let three = BigInt::from(3);
    let moduli = if (period % &three).is_zero() {
        let three_p = &three * &p;
        let e_lo = lo.div_ceil(&three_p);
        let e_hi = hi.div_floor(&three_p);
        divisors_in_range(&(period / &three), &e_lo, &e_hi)?
            .into_iter()
            .map(|e| &three_p * e)
            .collect()
    } else {
        Vec::new()
    };
    let found = moduli.len();
    let take = usize::try_from(target).unwrap_or(usize::MAX).min(found);
    Ok(GrowthStep {
        prime: p,
        target,
        moduli: moduli.into_iter().take(take).collect(),
        found,
    })
}

/// The tower's starting range constant, `e^{524}`.
pub fn tower_top() -> Result<Enclosure> {
    Enclosure::exp_default(&rational::rat(524))
}

/// The range constant below which the tower stops, `e^{787/10}`.
pub fn tower_floor() -> Result<Enclosure> {
    Enclosure::exp_default(&rational::frac(787, 10))
}

/// Range bounds `(K1, K2)` at tower level `n`:
/// `K2 = (9/10)^n·e^{524}` and `K1 = (9/10)·K2`.
pub fn level_bounds(n: u64) -> Result<(Enclosure, Enclosure)> {
    let n_u32 = u32::try_from(n)
        .map_err(|_| Error::domain(format!("tower level {n} out of range")))?;
    let shrink = Rational::new(BigInt::from(9).pow(n_u32), BigInt::from(10).pow(n_u32));
    let k2 = tower_top()?.scale(&shrink);
    let k1 = k2.scale(&rational::frac(9, 10));
    Ok((k1, k2))
}

/// The last level the tower needs: the smallest `n` whose range floor
/// `K1(n)` provably sits at or below the stopping constant `e^{787/10}`.
pub fn final_level() -> Result<u64> {
    let floor = tower_floor()?;
    let reaches = |n: u64| -> Result<bool> {
        let (k1, _) = level_bounds(n)?;
        Ok(k1.upper() <= floor.lower())
    };
    let mut hi = 1u64;
    while !reaches(hi)? {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // Invariant: !reaches(lo), reaches(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Advisory quality gates for a plan: the sieve stays sparse enough when
/// `∏(1 − delta + eps) ≤ 1/5`, and the period stays tractable relative to
/// the range when `M ≤ 10^{7.5}·K2^{1/3}`, checked exactly as
/// `M⁶ ≤ 10^{45}·K2²` against the provable side of the enclosure.
/// Returns one warning line per violated gate.
pub fn plan_quality(plan: &RangePlan) -> Vec<String> {
    let mut warnings = Vec::new();
    let mut survive = Rational::one();
    for w in plan.family.windows() {
        survive *= Rational::one() - w.delta() + w.eps();
    }
    if survive > rational::frac(1, 5) {
        warnings.push(format!(
            "uncovered-density product {} exceeds 1/5; the bad set may dominate the period",
            rational::format_rational(&survive)
        ));
    }
    let m = rational::big(plan.family.period());
    let m6 = (&m * &m * &m).pow(2);
    let bound = rational::big(&BigInt::from(10u32).pow(45)) * plan.k2.lower() * plan.k2.lower();
    if m6 > bound {
        warnings.push(format!(
            "period {} exceeds 10^7.5 times the cube root of K2; chunked sieving may be impractical",
            plan.family.period()
        ));
    }
    warnings
}
