//! Predicted structure of the bad set near low-denominator anchors.
//!
//! The bad set is far from random: it clusters around the rational anchors
//! `a·M/q`. The mechanism is visible in a single window `(m, 0, 1/10)`,
//! which covers the residue stripes `[j·m, j·m + m/10)`. Walk away from an
//! anchor whose residue against `m` is the class `c` and the stripes of `m`
//! appear at predictable offsets `~ (c/q)·m`. When every modulus of the
//! family lies in the narrow band `[263·L/100, 292·L/100]`, those offsets
//! are pinned to within about 11% across the whole family, so the stripes
//! of all windows bunch together and leave guaranteed uncovered gaps
//! between consecutive bunches.
//!
//! Quantitatively, for a reduced anchor `a/q` the `c`-th stripe of window
//! `m` ends, below the anchor, at offset `(c/q)·m ≤ (292/100)(c/q)·L` and
//! the next begins at `((c+1)/q − 1/10)·m ≥ (263/100)((c+1)/q − 1/10)·L`.
//! Everything strictly between those two bounds is covered by no window at
//! all, which proves the open interval
//!
//! ```text
//! ( a·M/q − Π·L,  a·M/q − π·L ),   π = (292/100)(s/q),
//!                                  Π = (263/100)((s+1)/q − 1/10)
//! ```
//!
//! lies inside the bad set whenever `π < Π`. Mirrimage bookkeeping above
//! the anchor gives intervals `(a·M/q + ψ·L, a·M/q + Ψ·L)` with
//! `ψ_k = (292/100)(k/q + 1/10)` and `Ψ_k = (263/100)(k+1)/q`. For
//! denominators `q ≤ 9` the constraint `π < Π` (equivalently `ψ < Ψ`)
//! admits exactly `10 − q` offsets on each side, a total of 103 predicted
//! intervals per direction over all reduced anchors, with combined length
//! `(261707/10500)·L` above the anchors.
//!
//! Two refinements use the residue image `{a·(M/m) mod q : m ∈ family}`.
//! First, a run of `d` consecutive residues `s+1, …, s+d` absent from the
//! image removes the stripes that would interrupt a longer stretch, fusing
//! `d+1` consecutive gaps into one wide predicted interval (`band_from_gap`).
//! Second, if the image is dense — longest absent run `d` strictly below
//! `(q − 10)/10` — the stripes near the anchor overlap so tightly that a
//! whole neighborhood `(a·M/q ± μ·L)` is covered, hence disjoint from the
//! bad set (`gap_exclusion`).
//!
//! Predictions are consistency probes for the sieve: `audit` checks every
//! predicted interval is contained in a computed bad interval and every
//! exclusion neighborhood misses the bad set. A failed audit means a sieve
//! bug, so pipelines treat it as fatal; predictions never feed into
//! certificates.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::criterion::Fraction;
use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::rational::{self, Rational};
use crate::sieve::WindowFamily;

/// Which side of the anchor `a·M/q` a prediction sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Above,
    Below,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Above => "above",
            Direction::Below => "below",
        }
    }
}

/// Bad intervals predicted near one anchor, all on the same side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPrediction {
    pub fraction: Fraction,
    pub direction: Direction,
    pub intervals: IntervalSet,
    pub scale: Rational,
}

/// A neighborhood of an anchor proven disjoint from the bad set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapExclusion {
    pub fraction: Fraction,
    /// Longest absent run in the anchor's residue image.
    pub defect: u64,
    /// Neighborhood radius in units of the scale `L`.
    pub radius: Rational,
    pub excluded: Interval,
}

/// Largest modulus allowed by the band recipe at scale `L`, i.e. `292·L/100`.
fn modulus_upper(scale: &Rational) -> Rational {
    rational::frac(292, 100) * scale
}

/// Smallest modulus allowed by the band recipe at scale `L`, i.e. `263·L/100`.
fn modulus_lower(scale: &Rational) -> Rational {
    rational::frac(263, 100) * scale
}

/// Check that every window has the band shape the predictions assume:
/// `eps = 0`, `delta = 1/10`, and modulus within `[263·L/100, 292·L/100]`.
pub fn validate_band_scale(family: &WindowFamily, scale: &Rational) -> Result<()> {
    if !scale.is_positive() {
        return Err(Error::domain(format!(
            "band scale must be positive, got {}",
            rational::format_rational(scale)
        )));
    }
    let lo = modulus_lower(scale);
    let hi = modulus_upper(scale);
    for w in family.windows() {
        if !w.eps().is_zero() {
            return Err(Error::domain(format!(
                "band predictions need eps = 0, window {} has eps = {}",
                w.modulus(),
                rational::format_rational(w.eps())
            )));
        }
        if *w.delta() != rational::frac(1, 10) {
            return Err(Error::domain(format!(
                "band predictions need delta = 1/10, window {} has delta = {}",
                w.modulus(),
                rational::format_rational(w.delta())
            )));
        }
        let m = rational::big(w.modulus());
        if m < lo || m > hi {
            return Err(Error::domain(format!(
                "window modulus {} outside the band scale range [{}, {}]",
                w.modulus(),
                rational::format_rational(&lo),
                rational::format_rational(&hi)
            )));
        }
    }
    Ok(())
}

/// Offsets `(ψ_k, Ψ_k)` of the `k`-th predicted interval above an anchor
/// with denominator `q`, in units of the scale `L`.
pub fn band_offsets_above(q: u64, k: u64) -> (Rational, Rational) {
    let q = i64::try_from(q).expect("denominator fits i64");
    let k = i64::try_from(k).expect("offset index fits i64");
    let psi = rational::frac(292, 100) * (rational::frac(k, q) + rational::frac(1, 10));
    let cap = rational::frac(263, 100) * rational::frac(k + 1, q);
    (psi, cap)
}

/// Offsets `(π_s, Π_s)` of the `s`-th predicted interval below an anchor
/// with denominator `q`, in units of the scale `L`. These are `gap_offsets`
/// with an empty run (`d = 0`).
pub fn band_offsets_below(q: u64, s: u64) -> (Rational, Rational) {
    gap_offsets(q, s, 0)
}

/// Offsets `(π, Π)` of the interval predicted below an anchor by an absent
/// run of `d` residues starting after `s` present ones:
/// `π = (292/100)(s/q)`, `Π = (263/100)((s+d+1)/q − 1/10)`.
pub fn gap_offsets(q: u64, s: u64, d: u64) -> (Rational, Rational) {
    let q = i64::try_from(q).expect("denominator fits i64");
    let s = i64::try_from(s).expect("run start fits i64");
    let d = i64::try_from(d).expect("run length fits i64");
    let pi = rational::frac(292, 100) * rational::frac(s, q);
    let cap = rational::frac(263, 100) * (rational::frac(s + d + 1, q) - rational::frac(1, 10));
    (pi, cap)
}

/// Exclusion radius `μ = (38398/725)·(1/20 − (d+1)/(2q))` in units of `L`.
/// Positive exactly when `d < (q − 10)/10`; non-positive values mean the
/// defect is too large to force coverage near the anchor.
pub fn exclusion_radius(q: u64, d: u64) -> Rational {
    let q = i64::try_from(q).expect("denominator fits i64");
    let d = i64::try_from(d).expect("defect fits i64");
    rational::frac(38398, 725) * (rational::frac(1, 20) - rational::frac(d + 1, 2 * q))
}

/// All reduced fractions `a/q` with `0 ≤ a < q` for `1 ≤ q ≤ 9`.
fn shallow_fractions() -> Vec<Fraction> {
    let mut out = Vec::new();
    for q in 1u64..=9 {
        for a in 0..q {
            if a.gcd(&q) == 1 {
                let f = Fraction::new(BigInt::from(a), BigInt::from(q))
                    .expect("small reduced fraction is valid");
                out.push(f);
            }
        }
    }
    out
}

fn require_scale_fits(big_m: &BigInt, scale: &Rational) -> Result<()> {
    if !scale.is_positive() {
        return Err(Error::domain(format!(
            "band scale must be positive, got {}",
            rational::format_rational(scale)
        )));
    }
    if rational::big(big_m) < rational::rat(2000) * scale {
        return Err(Error::domain(format!(
            "band predictions need period >= 2000 * scale; got period {} at scale {}",
            big_m,
            rational::format_rational(scale)
        )));
    }
    Ok(())
}

/// Predicted bad intervals above every anchor `a·M/q` with `q ≤ 9`:
/// for `0 ≤ k ≤ 9 − q` the open interval
/// `(a·M/q + ψ_k·L, a·M/q + Ψ_k·L)`. Exactly `10 − q` intervals per
/// anchor, 103 in total, with combined length `(261707/10500)·L`.
pub fn above_anchor_bands(big_m: &BigInt, scale: &Rational) -> Result<Vec<BandPrediction>> {
    require_scale_fits(big_m, scale)?;
    let mut out = Vec::new();
    for f in shallow_fractions() {
        let anchor = f.anchor(big_m);
        let q = f.denominator().to_u64().expect("shallow denominator");
        let mut raw = Vec::new();
        for k in 0..=(9 - q) {
            let (psi, cap) = band_offsets_above(q, k);
            let lo = &anchor + psi * scale;
            let hi = &anchor + cap * scale;
            debug_assert!(lo < hi && !lo.is_negative() && hi <= rational::big(big_m));
            raw.push(Interval::new(lo, hi)?);
        }
        out.push(BandPrediction {
            fraction: f,
            direction: Direction::Above,
            intervals: IntervalSet::normalize(raw),
            scale: scale.clone(),
        });
    }
    Ok(out)
}

/// Predicted bad intervals below every anchor `a·M/q` with `q ≤ 9`:
/// for each `s ≥ 0` with `290·s < 263·(10 − q)` the open interval
/// `(a·M/q − Π_s·L, a·M/q − π_s·L)`, wrapped into `[0, M)` for the anchor
/// at zero. The admissible `s` again number `10 − q` per anchor.
pub fn below_anchor_bands(big_m: &BigInt, scale: &Rational) -> Result<Vec<BandPrediction>> {
    require_scale_fits(big_m, scale)?;
    let period = rational::big(big_m);
    let mut out = Vec::new();
    for f in shallow_fractions() {
        let anchor = f.anchor(big_m);
        let q = f.denominator().to_u64().expect("shallow denominator");
        let mut raw = Vec::new();
        let mut s = 0u64;
        while 290 * s < 263 * (10 - q) {
            let (pi, cap) = band_offsets_below(q, s);
            let mut lo = &anchor - cap * scale;
            let mut hi = &anchor - pi * scale;
            if lo.is_negative() {
                lo += &period;
                hi += &period;
            }
            debug_assert!(lo < hi && hi <= period);
            raw.push(Interval::new(lo, hi)?);
            s += 1;
        }
        out.push(BandPrediction {
            fraction: f,
            direction: Direction::Below,
            intervals: IntervalSet::normalize(raw),
            scale: scale.clone(),
        });
    }
    Ok(out)
}

/// Presence bitmap of the residue image `{a·(M/m) mod q : m ∈ family}`.
fn residue_image(family: &WindowFamily, fraction: &Fraction) -> Result<Vec<bool>> {
    let q = fraction
        .denominator()
        .to_usize()
        .filter(|q| *q <= 5_000_000)
        .ok_or_else(|| {
            Error::domain(format!(
                "residue image scan supports denominators up to 5000000, got {}",
                fraction.denominator()
            ))
        })?;
    let big_q = BigInt::from(q);
    let mut present = vec![false; q];
    for w in family.windows() {
        let cofactor = family.period() / w.modulus();
        let value = (fraction.numerator() * cofactor).mod_floor(&big_q);
        present[value.to_usize().expect("residue below q")] = true;
    }
    Ok(present)
}

/// Length of the longest circular run of `false` entries. An all-`false`
/// bitmap yields the full length.
pub fn longest_absent_run(present: &[bool]) -> u64 {
    let q = present.len();
    let Some(start) = present.iter().position(|p| *p) else {
        return q as u64;
    };
    let mut best = 0u64;
    let mut run = 0u64;
    for i in 1..=q {
        if present[(start + i) % q] {
            run = 0;
        } else {
            run += 1;
            best = best.max(run);
        }
    }
    best
}

/// The defect of an anchor against a family: the longest circular run of
/// residues of `Z/q` absent from the image `{a·(M/m) mod q : m ∈ family}`.
pub fn defect(family: &WindowFamily, fraction: &Fraction) -> Result<u64> {
    Ok(longest_absent_run(&residue_image(family, fraction)?))
}

/// The predicted interval below `a·M/q` obtained from an absent run of `d`
/// residues `s+1, …, s+d` in the anchor's residue image. Every precondition
/// is checked and a violation names the failed inequality.
pub fn band_from_gap(
    family: &WindowFamily,
    fraction: &Fraction,
    s: u64,
    d: u64,
    scale: &Rational,
) -> Result<Interval> {
    validate_band_scale(family, scale)?;
    let q = fraction
        .denominator()
        .to_u64()
        .ok_or_else(|| Error::domain("gap band denominator does not fit u64".to_string()))?;
    if q < 11 {
        return Err(Error::domain(format!(
            "gap band requires q >= 11; got q = {q}"
        )));
    }
    if 10 * d <= q - 10 {
        return Err(Error::domain(format!(
            "gap band requires 10*d > q - 10; got d = {d}, q = {q}"
        )));
    }
    if d + 1 >= q {
        return Err(Error::domain(format!(
            "gap band requires d < q - 1; got d = {d}, q = {q}"
        )));
    }
    if s + d + 1 >= q {
        return Err(Error::domain(format!(
            "gap band requires s < q - d - 1; got s = {s}, d = {d}, q = {q}"
        )));
    }
    if 290 * s >= 263 * (10 * d + 10 - q) {
        return Err(Error::domain(format!(
            "gap band requires 290*s < 263*(10*d + 10 - q); got s = {s}, d = {d}, q = {q}"
        )));
    }
    let present = residue_image(family, fraction)?;
    for r in (s + 1)..=(s + d) {
        if present[r as usize] {
            return Err(Error::domain(format!(
                "gap band requires residues {}..={} absent from the image at denominator {q}; \
                 residue {r} is hit",
                s + 1,
                s + d
            )));
        }
    }
    let (pi, cap) = gap_offsets(q, s, d);
    let anchor = fraction.anchor(family.period());
    Interval::new(&anchor - cap * scale, &anchor - pi * scale)
}

/// Every admissible `(s, d)` pair for one anchor, with the predicted
/// interval each produces. Runs the same checks as `band_from_gap`.
pub fn gap_band_candidates(
    family: &WindowFamily,
    fraction: &Fraction,
    scale: &Rational,
) -> Result<Vec<(u64, u64, Interval)>> {
    validate_band_scale(family, scale)?;
    let q = fraction
        .denominator()
        .to_u64()
        .ok_or_else(|| Error::domain("gap band denominator does not fit u64".to_string()))?;
    if q < 11 {
        return Ok(Vec::new());
    }
    let present = residue_image(family, fraction)?;
    let anchor = fraction.anchor(family.period());
    let mut out = Vec::new();
    for d in (q - 10).div_ceil(10).max(1)..=(q - 2) {
        if 10 * d <= q - 10 {
            continue;
        }
        for s in 0..(q - d - 1) {
            if 290 * s >= 263 * (10 * d + 10 - q) {
                break;
            }
            if ((s + 1)..=(s + d)).any(|r| present[r as usize]) {
                continue;
            }
            let (pi, cap) = gap_offsets(q, s, d);
            let iv = Interval::new(&anchor - cap * scale, &anchor - pi * scale)?;
            out.push((s, d, iv));
        }
    }
    Ok(out)
}

/// The coverage guarantee of a dense residue image: when the defect `d`
/// satisfies `d < (q − 10)/10`, the open neighborhood `(a·M/q ± μ·L)` with
/// `μ = (38398/725)(1/20 − (d+1)/(2q))` contains no bad point at all.
/// Returns `None` when the defect is too large for any exclusion.
pub fn gap_exclusion(
    family: &WindowFamily,
    fraction: &Fraction,
    scale: &Rational,
) -> Result<Option<GapExclusion>> {
    validate_band_scale(family, scale)?;
    let q = fraction
        .denominator()
        .to_u64()
        .ok_or_else(|| Error::domain("exclusion denominator does not fit u64".to_string()))?;
    let d = defect(family, fraction)?;
    let radius = exclusion_radius(q, d);
    if !radius.is_positive() {
        return Ok(None);
    }
    let anchor = fraction.anchor(family.period());
    let offset = &radius * scale;
    let excluded = Interval::new(&anchor - &offset, &anchor + &offset)?;
    Ok(Some(GapExclusion {
        fraction: fraction.clone(),
        defect: d,
        radius,
        excluded,
    }))
}

/// One audited claim: either a predicted interval that must sit inside the
/// bad set, or an excluded neighborhood that must miss it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub fraction: Fraction,
    pub direction: Option<Direction>,
    pub subject: Interval,
    /// `None` when the claim holds; otherwise a description of the mismatch.
    pub failure: Option<String>,
}

/// Outcome of auditing predictions and exclusions against a sieved bad set.
/// Any failure indicates a bug in the sieve or in the prediction inputs, so
/// callers should treat `pass = false` as fatal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
    pub pass: bool,
}

impl AuditReport {
    pub fn failures(&self) -> impl Iterator<Item = &AuditEntry> {
        self.entries.iter().filter(|e| e.failure.is_some())
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let side = e.direction.map_or("exclusion", Direction::as_str);
            let lo = rational::format_rational(e.subject.lo());
            let hi = rational::format_rational(e.subject.hi());
            match &e.failure {
                None => writeln!(f, "ok {side} {} ({lo}, {hi})", e.fraction)?,
                Some(msg) => writeln!(f, "FAIL {side} {} ({lo}, {hi}): {msg}", e.fraction)?,
            }
        }
        writeln!(f, "audit: {}", if self.pass { "pass" } else { "FAIL" })
    }
}

/// Check every predicted interval is contained in some bad interval and
/// every exclusion neighborhood is disjoint from the bad set.
pub fn audit(
    bad: &IntervalSet,
    predictions: &[BandPrediction],
    exclusions: &[GapExclusion],
) -> AuditReport {
    let mut entries = Vec::new();
    for p in predictions {
        for iv in p.intervals.intervals() {
            let failure = if bad.covering_interval(iv.lo(), iv.hi()).is_some() {
                None
            } else {
                Some(format!(
                    "predicted band ({}, {}) {} anchor {} is not contained in any bad interval",
                    rational::format_rational(iv.lo()),
                    rational::format_rational(iv.hi()),
                    p.direction.as_str(),
                    p.fraction
                ))
            };
            entries.push(AuditEntry {
                fraction: p.fraction.clone(),
                direction: Some(p.direction),
                subject: iv.clone(),
                failure,
            });
        }
    }
    for x in exclusions {
        let iv = &x.excluded;
        let failure = if bad.intersects_open(iv.lo(), iv.hi()) {
            Some(format!(
                "excluded neighborhood ({}, {}) around anchor {} meets the bad set",
                rational::format_rational(iv.lo()),
                rational::format_rational(iv.hi()),
                x.fraction
            ))
        } else {
            None
        };
        entries.push(AuditEntry {
            fraction: x.fraction.clone(),
            direction: None,
            subject: iv.clone(),
            failure,
        });
    }
    let pass = entries.iter().all(|e| e.failure.is_none());
    AuditReport { entries, pass }
}
