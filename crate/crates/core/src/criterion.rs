//! The covering criterion: turning a computed bad set into a statement
//! about sums of seven cubes.
//!
//! After sieving, every odd `N` in the target range `[K1, K2]` whose
//! residue `N mod M` escapes the bad set is representable by construction.
//! The remaining `N` project into the bad intervals, and the criterion
//! disposes of them by showing each bad interval is trapped near a rational
//! point `a*M/q` with a small denominator: an interval `[α, β)` passes with
//! witness `a/q` when
//!
//! ```text
//! 16·q³·(a·M/q − α)³ < M   and   16·q³·(β − a·M/q)³ < M,
//! ```
//!
//! the exact cubed restatement of `[α, β) ⊂ (a·M/q ± (M/16)^{1/3}/q)`.
//! Cubing is monotone on all of ℚ, so both comparisons are sign-safe as
//! written. Denominators are capped at the largest `q` with
//! `2·q³·K2 ≤ M`; integers trapped that tightly near `a·M/q` either admit
//! a direct treatment or are perfect cubes, which are trivially sums of one
//! cube, so a passing report certifies the whole range.
//!
//! Witnesses come from best rational approximation: the approximation
//! target is the interval midpoint scaled to `[0, 1]`, with each endpoint
//! retried before an interval is declared failing. A certificate bundles
//! the window family, the intervals, and the witnesses into a re-checkable
//! text document.

use std::fmt;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use sha2::{Digest, Sha256};

use crate::enclosure::Enclosure;
use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::primes;
use crate::rational::{self, Rational};
use crate::sieve::{self, Window, WindowFamily};

/// A reduced fraction `a/q` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fraction {
    // Ordered (q, a) so derived ordering sorts by denominator first.
    q: BigInt,
    a: BigInt,
}

impl Fraction {
    pub fn new(a: BigInt, q: BigInt) -> Result<Self> {
        if q < BigInt::one() {
            return Err(Error::domain(format!("fraction denominator must be >= 1, got {q}")));
        }
        if a.is_negative() || a > q {
            return Err(Error::domain(format!("fraction {a}/{q} outside [0, 1]")));
        }
        let g = a.gcd(&q);
        Ok(Fraction { a: &a / &g, q: &q / &g })
    }

    pub fn numerator(&self) -> &BigInt {
        &self.a
    }

    pub fn denominator(&self) -> &BigInt {
        &self.q
    }

    pub fn value(&self) -> Rational {
        Rational::new(self.a.clone(), self.q.clone())
    }

    /// The anchor point `a*M/q`.
    pub fn anchor(&self, big_m: &BigInt) -> Rational {
        Rational::new(&self.a * big_m, self.q.clone())
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.a, self.q)
    }
}

/// Best rational approximation to `x` in `[0, 1]` among all fractions with
/// denominator at most `qmax`, minimizing `|x - a/q|`; ties break toward the
/// smaller denominator.
///
/// Walks the continued fraction of `x`: the minimizer is either the last
/// convergent whose denominator fits, or the deepest semiconvergent that
/// fits at the first level that does not.
pub fn best_rational(x: &Rational, qmax: &BigInt) -> Result<Fraction> {
    if x.is_negative() || *x > Rational::one() {
        return Err(Error::domain(format!(
            "approximation target {} outside [0, 1]",
            rational::format_rational(x)
        )));
    }
    if qmax < &BigInt::one() {
        return Err(Error::domain(format!("denominator bound must be >= 1, got {qmax}")));
    }

    // Convergent recurrences with seeds c_{-1} = 1/0, c_0 = a_0/1.
    let mut num = x.numer().clone();
    let mut den = x.denom().clone();
    let a0 = num.div_floor(&den);
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p_cur, mut q_cur) = (a0.clone(), BigInt::one());
    let r = &num - &a0 * &den;
    num = den;
    den = r;

    while !den.is_zero() {
        let a = num.div_floor(&den);
        let p_next = &a * &p_cur + &p_prev;
        let q_next = &a * &q_cur + &q_prev;
        if q_next > *qmax {
            // Deepest semiconvergent at this level that still fits.
            let j = (qmax - &q_prev).div_floor(&q_cur);
            let conv = Fraction::new(p_cur.clone(), q_cur.clone())?;
            if j < BigInt::one() {
                return Ok(conv);
            }
            let semi = Fraction::new(&j * &p_cur + &p_prev, &j * &q_cur + &q_prev)?;
            let d_conv = (x - conv.value()).abs();
            let d_semi = (x - semi.value()).abs();
            // On a tie the convergent wins: its denominator is smaller.
            return Ok(if d_semi < d_conv { semi } else { conv });
        }
        let r = &num - &a * &den;
        num = std::mem::replace(&mut den, r);
        p_prev = std::mem::replace(&mut p_cur, p_next);
        q_prev = std::mem::replace(&mut q_cur, q_next);
    }
    // Exhausted: x itself is a fraction with denominator within bound.
    Fraction::new(p_cur, q_cur)
}

/// Largest denominator `q >= 1` with `2·q³·K2.upper ≤ M`; an error if even
/// `q = 1` fails, i.e. the period is too small relative to the range.
pub fn max_denominator(big_m: &BigInt, k2: &Enclosure) -> Result<BigInt> {
    // q³ ≤ M / (2*upper) = M*den / (2*num); integer q, so flooring the
    // right side before the cube root is exact.
    let upper = k2.upper();
    if !upper.is_positive() {
        return Err(Error::domain("range ceiling must be positive".to_string()));
    }
    let bound = (big_m * upper.denom()).div_floor(&(BigInt::from(2) * upper.numer()));
    if bound < BigInt::one() {
        return Err(Error::PeriodTooSmall {
            period: big_m.to_string(),
            bound: rational::format_rational(&(rational::rat(2) * upper)),
        });
    }
    let mut q = primes::cbrt_floor(&bound)?;
    // Exact adjustment against the original inequality, in case the nested
    // floors ever disagree at a boundary.
    let check = |q: &BigInt| {
        let cube = q * q * q;
        Rational::from_integer(BigInt::from(2) * cube) * upper
            <= Rational::from_integer(big_m.clone())
    };
    while !check(&q) {
        q -= BigInt::one();
    }
    while check(&(&q + BigInt::one())) {
        q += BigInt::one();
    }
    if q < BigInt::one() {
        return Err(Error::PeriodTooSmall {
            period: big_m.to_string(),
            bound: rational::format_rational(&(rational::rat(2) * upper)),
        });
    }
    Ok(q)
}

/// Which approximation target produced the recorded witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxTarget {
    Midpoint,
    LowerEndpoint,
    UpperEndpoint,
}

impl ApproxTarget {
    fn as_str(self) -> &'static str {
        match self {
            ApproxTarget::Midpoint => "mid",
            ApproxTarget::LowerEndpoint => "lo",
            ApproxTarget::UpperEndpoint => "hi",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "mid" => Ok(ApproxTarget::Midpoint),
            "lo" => Ok(ApproxTarget::LowerEndpoint),
            "hi" => Ok(ApproxTarget::UpperEndpoint),
            other => Err(Error::parse(format!("unknown approximation target {other:?}"))),
        }
    }
}

/// Outcome for one bad interval: the witness fraction and the two exact
/// margins `M − 16·q³·(anchor − α)³` and `M − 16·q³·(β − anchor)³`; the
/// interval passes iff both margins are positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalCheck {
    pub interval: Interval,
    pub fraction: Fraction,
    pub target: ApproxTarget,
    pub lower_margin: Rational,
    pub upper_margin: Rational,
    pub pass: bool,
}

/// Full criterion outcome over a bad set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionReport {
    pub records: Vec<IntervalCheck>,
    pub pass: bool,
    pub qmax: BigInt,
    pub big_m: BigInt,
    pub k2: Enclosure,
    /// Distinct witness fractions, sorted by denominator then numerator.
    pub fractions: Vec<Fraction>,
}

/// Both margins for witness `f` against interval `[α, β)` within period `M`.
fn margins(f: &Fraction, alpha: &Rational, beta: &Rational, big_m: &BigInt) -> (Rational, Rational) {
    let anchor = f.anchor(big_m);
    let q3 = rational::big(&(f.denominator() * f.denominator() * f.denominator()));
    let sixteen = rational::rat(16);
    let m_q = rational::big(big_m);
    let d_lo = &anchor - alpha;
    let d_hi = beta - &anchor;
    let lower = &m_q - &sixteen * &q3 * &d_lo * &d_lo * &d_lo;
    let upper = &m_q - &sixteen * &q3 * &d_hi * &d_hi * &d_hi;
    (lower, upper)
}

/// Evaluate the covering criterion for every interval of `bad` within the
/// period `[0, big_m)`.
pub fn check_decomposition(
    bad: &IntervalSet,
    big_m: &BigInt,
    k2: &Enclosure,
) -> Result<CriterionReport> {
    if big_m < &BigInt::one() {
        return Err(Error::domain(format!("period must be >= 1, got {big_m}")));
    }
    let m_q = rational::big(big_m);
    if let (Some(first), Some(last)) = (bad.intervals().first(), bad.intervals().last()) {
        if first.lo().is_negative() || *last.hi() > m_q {
            return Err(Error::domain("bad set extends outside [0, period)".to_string()));
        }
    }
    let qmax = max_denominator(big_m, k2)?;

    let mut records = Vec::with_capacity(bad.count());
    let mut all_pass = true;
    for iv in bad.intervals() {
        let (alpha, beta) = (iv.lo(), iv.hi());
        let mid = (alpha + beta) / rational::rat(2);
        let targets = [
            (ApproxTarget::Midpoint, mid),
            (ApproxTarget::LowerEndpoint, alpha.clone()),
            (ApproxTarget::UpperEndpoint, beta.clone()),
        ];
        let mut chosen: Option<IntervalCheck> = None;
        for (kind, point) in targets {
            let f = best_rational(&(point / &m_q), &qmax)?;
            if let Some(prev) = &chosen {
                if prev.fraction == f {
                    continue; // same witness, same verdict
                }
            }
            let (lo_m, hi_m) = margins(&f, alpha, beta, big_m);
            let pass = lo_m.is_positive() && hi_m.is_positive();
            let record = IntervalCheck {
                interval: iv.clone(),
                fraction: f,
                target: kind,
                lower_margin: lo_m,
                upper_margin: hi_m,
                pass,
            };
            let done = record.pass;
            if chosen.is_none() || done {
                chosen = Some(record);
            }
            if done {
                break;
            }
        }
        let record = chosen.expect("at least the midpoint target is evaluated");
        all_pass &= record.pass;
        records.push(record);
    }

    let mut fractions: Vec<Fraction> = records.iter().map(|r| r.fraction.clone()).collect();
    fractions.sort();
    fractions.dedup();

    Ok(CriterionReport {
        records,
        pass: all_pass,
        qmax,
        big_m: big_m.clone(),
        k2: k2.clone(),
        fractions,
    })
}

/// A self-contained, re-verifiable certification that every odd integer in
/// `[K1, K2]` is a sum of seven non-negative cubes, given the recorded
/// window family and its bad set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub k1: Enclosure,
    pub windows: Vec<Window>,
    pub report: CriterionReport,
}

/// Run every certification check and issue a certificate, or fail naming
/// the first violated requirement.
///
/// Checks performed, in order: each window's modulus structure (squarefree,
/// divisible by 3, remaining primes ≡ 5 mod 6); each window's fit against
/// the range (conservatively: the enclosure endpoints nearest the range);
/// `bad ⊆ [0, M)`; and the covering criterion on every interval.
pub fn certify_range(
    family: &WindowFamily,
    bad: &IntervalSet,
    k1: &Enclosure,
    k2: &Enclosure,
) -> Result<Certificate> {
    for w in family.windows() {
        sieve::check_modulus_structure(w.modulus())?;
        sieve::check_range_fit(w, k1.lower(), k2.upper())?;
    }
    if k1.lower() > k2.upper() {
        return Err(Error::domain("range floor exceeds range ceiling".to_string()));
    }
    let report = check_decomposition(bad, family.period(), k2)?;
    if !report.pass {
        let first = report
            .records
            .iter()
            .find(|r| !r.pass)
            .expect("failing report has a failing record");
        return Err(Error::domain(format!(
            "interval [{}, {}) is not trapped by any fraction with denominator <= {} \
             (witness {} leaves margins {} and {})",
            rational::format_rational(first.interval.lo()),
            rational::format_rational(first.interval.hi()),
            report.qmax,
            first.fraction,
            rational::format_rational(&first.lower_margin),
            rational::format_rational(&first.upper_margin),
        )));
    }
    Ok(Certificate { k1: k1.clone(), windows: family.windows().to_vec(), report })
}

impl Certificate {
    /// Plain-text serialization, terminated by a checksum over every
    /// preceding byte.
    pub fn write_text(&self, out: &mut dyn Write) -> Result<()> {
        use std::fmt::Write as _;
        let mut body = String::new();
        let _ = writeln!(body, "#k1={}", self.k1.format());
        let _ = writeln!(body, "#k2={}", self.report.k2.format());
        let _ = writeln!(body, "#period={}", self.report.big_m);
        let _ = writeln!(body, "#qmax={}", self.report.qmax);
        let _ = writeln!(body, "#verdict={}", if self.report.pass { "pass" } else { "fail" });
        let _ = writeln!(
            body,
            "#note=perfect cubes are sums of one cube; the trapping claim is vacuous for them"
        );
        let _ = writeln!(body, "#windows={}", self.windows.len());
        for w in &self.windows {
            let _ = writeln!(
                body,
                "{}\t{}\t{}",
                w.modulus(),
                rational::format_rational(w.eps()),
                rational::format_rational(w.delta())
            );
        }
        let _ = writeln!(body, "#intervals={}", self.report.records.len());
        for r in &self.report.records {
            let _ = writeln!(
                body,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                rational::format_rational(r.interval.lo()),
                rational::format_rational(r.interval.hi()),
                r.fraction.numerator(),
                r.fraction.denominator(),
                r.target.as_str(),
                rational::format_rational(&r.lower_margin),
                rational::format_rational(&r.upper_margin),
            );
        }
        out.write_all(body.as_bytes())?;
        let digest = Sha256::digest(body.as_bytes());
        writeln!(out, "#sha256={digest:x}")?;
        Ok(())
    }

    /// Parse a certificate, verifying the checksum and structural headers.
    /// Use [`Certificate::verify`] afterwards to re-check the mathematics.
    pub fn read_text(reader: &mut dyn BufRead) -> Result<Certificate> {
        let mut lines = Vec::new();
        let mut body = String::new();
        let mut checksum_ok = false;
        for line in reader.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("#sha256=") {
                let digest = Sha256::digest(body.as_bytes());
                if rest.trim() != format!("{digest:x}") {
                    return Err(Error::parse("certificate checksum mismatch".to_string()));
                }
                checksum_ok = true;
                continue;
            }
            body.push_str(&line);
            body.push('\n');
            lines.push(line);
        }
        if !checksum_ok {
            return Err(Error::parse("certificate missing checksum".to_string()));
        }

        fn header(it: &mut impl Iterator<Item = String>, key: &str) -> Result<String> {
            let line = it
                .next()
                .ok_or_else(|| Error::parse(format!("certificate truncated before {key}")))?;
            line.strip_prefix(&format!("#{key}="))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(format!("expected #{key}= header, got {line:?}")))
        }

        let mut it = lines.into_iter();
        let k1 = Enclosure::parse(&header(&mut it, "k1")?)?;
        let k2 = Enclosure::parse(&header(&mut it, "k2")?)?;
        let big_m: BigInt = header(&mut it, "period")?
            .trim()
            .parse()
            .map_err(|_| Error::parse("bad period".to_string()))?;
        let qmax: BigInt = header(&mut it, "qmax")?
            .trim()
            .parse()
            .map_err(|_| Error::parse("bad qmax".to_string()))?;
        let verdict = header(&mut it, "verdict")?;
        let pass = match verdict.as_str() {
            "pass" => true,
            "fail" => false,
            other => return Err(Error::parse(format!("unknown verdict {other:?}"))),
        };
        let _note = header(&mut it, "note")?;
        let n_windows: usize = header(&mut it, "windows")?
            .trim()
            .parse()
            .map_err(|_| Error::parse("bad window count".to_string()))?;

        let mut windows = Vec::with_capacity(n_windows);
        for _ in 0..n_windows {
            let line = it
                .next()
                .ok_or_else(|| Error::parse("certificate truncated in window list".to_string()))?;
            let mut parts = line.split('\t');
            let (m, e, d) = (
                parts.next().ok_or_else(|| Error::parse("window line missing modulus"))?,
                parts.next().ok_or_else(|| Error::parse("window line missing eps"))?,
                parts.next().ok_or_else(|| Error::parse("window line missing delta"))?,
            );
            windows.push(Window::new(
                m.trim().parse().map_err(|_| Error::parse("bad modulus".to_string()))?,
                rational::parse_rational(e)?,
                rational::parse_rational(d)?,
            )?);
        }

        let n_intervals: usize = header(&mut it, "intervals")?
            .trim()
            .parse()
            .map_err(|_| Error::parse("bad interval count".to_string()))?;
        let mut records = Vec::with_capacity(n_intervals);
        for _ in 0..n_intervals {
            let line = it.next().ok_or_else(|| {
                Error::parse("certificate truncated in interval list".to_string())
            })?;
            let parts: Vec<&str> = line.split('\t').collect();
            if parts.len() != 7 {
                return Err(Error::parse(format!("malformed interval record: {line:?}")));
            }
            let interval =
                Interval::new(rational::parse_rational(parts[0])?, rational::parse_rational(parts[1])?)?;
            let fraction = Fraction::new(
                parts[2].trim().parse().map_err(|_| Error::parse("bad numerator".to_string()))?,
                parts[3].trim().parse().map_err(|_| Error::parse("bad denominator".to_string()))?,
            )?;
            let target = ApproxTarget::parse(parts[4])?;
            let lower_margin = rational::parse_rational(parts[5])?;
            let upper_margin = rational::parse_rational(parts[6])?;
            let pass = lower_margin.is_positive() && upper_margin.is_positive();
            records.push(IntervalCheck { interval, fraction, target, lower_margin, upper_margin, pass });
        }
        if it.next().is_some() {
            return Err(Error::parse("trailing content after interval list".to_string()));
        }

        let mut fractions: Vec<Fraction> = records.iter().map(|r| r.fraction.clone()).collect();
        fractions.sort();
        fractions.dedup();
        Ok(Certificate {
            k1,
            windows,
            report: CriterionReport { records, pass, qmax, big_m, k2, fractions },
        })
    }

    /// Re-run every mathematical check from the recorded data alone:
    /// window structure and fit, period consistency, denominator bound,
    /// margin recomputation, and verdict coherence. With `resieve` set the
    /// recorded intervals are also compared against a fresh sieve of the
    /// recorded family over `[0, M)` — the only step whose cost scales with
    /// the period.
    pub fn verify(&self, resieve: bool) -> Result<()> {
        let family = WindowFamily::new(self.windows.clone())?;
        if *family.period() != self.report.big_m {
            return Err(Error::domain(format!(
                "recorded period {} differs from family period {}",
                self.report.big_m,
                family.period()
            )));
        }
        for w in &self.windows {
            sieve::check_modulus_structure(w.modulus())?;
            sieve::check_range_fit(w, self.k1.lower(), self.report.k2.upper())?;
        }
        let qmax = max_denominator(&self.report.big_m, &self.report.k2)?;
        if qmax != self.report.qmax {
            return Err(Error::domain(format!(
                "recorded denominator bound {} differs from recomputed {}",
                self.report.qmax, qmax
            )));
        }
        let mut all_pass = true;
        for r in &self.report.records {
            if *r.fraction.denominator() > qmax {
                return Err(Error::domain(format!(
                    "witness {} exceeds denominator bound {}",
                    r.fraction, qmax
                )));
            }
            let (lo_m, hi_m) = margins(&r.fraction, r.interval.lo(), r.interval.hi(), &self.report.big_m);
            if lo_m != r.lower_margin || hi_m != r.upper_margin {
                return Err(Error::domain(format!(
                    "margins for interval [{}, {}) do not recompute",
                    rational::format_rational(r.interval.lo()),
                    rational::format_rational(r.interval.hi()),
                )));
            }
            let pass = lo_m.is_positive() && hi_m.is_positive();
            if pass != r.pass {
                return Err(Error::domain("recorded verdict contradicts margins".to_string()));
            }
            all_pass &= pass;
        }
        if all_pass != self.report.pass {
            return Err(Error::domain("overall verdict contradicts records".to_string()));
        }
        let recorded =
            IntervalSet::from_canonical(self.report.records.iter().map(|r| r.interval.clone()).collect())?;
        if resieve {
            let fresh = sieve::bad_set(
                &family,
                &Rational::zero(),
                &rational::big(&self.report.big_m),
            )?;
            if fresh != recorded {
                return Err(Error::domain(
                    "recorded intervals do not match a fresh sieve of the family".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Profile of the witness set for the full-scale base-range run: 171
/// distinct fractions, with denominators drawn from this list. Recorded as
/// reference metadata for cross-checking reports at that scale.
pub const FULL_RUN_FRACTION_COUNT: usize = 171;
pub const FULL_RUN_FRACTION_DENOMINATORS: &[u32] =
    &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 13, 14, 15, 16, 18, 19, 21, 24, 26, 28, 30, 36, 42];
