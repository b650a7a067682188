//! Canonical sets of half-open rational intervals.
//!
//! Every sieve result is a finite union of half-open intervals `[lo, hi)`
//! with rational endpoints. The canonical form keeps intervals non-empty,
//! sorted, and separated (`prev.hi < next.lo`), so set equality is plain
//! structural equality and byte-identical files mean identical sets. Chunked
//! runs produce per-chunk lists whose concatenation may touch exactly at
//! chunk boundaries; the merge helpers fuse those touching pairs and report
//! how many fused, since per-chunk interval counts (which count a straddling
//! interval once per side) are part of recorded run statistics.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use num_bigint::BigInt;
use num_traits::Zero;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Half-open interval `[lo, hi)`; `lo == hi` denotes the empty interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::domain(format!(
                "interval endpoints out of order: {} > {}",
                rational::format_rational(&lo),
                rational::format_rational(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo == self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        self.lo <= *x && *x < self.hi
    }
}

/// Canonical finite union of half-open intervals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    items: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { items: Vec::new() }
    }

    /// Canonicalize an arbitrary list: drop empties, sort by left endpoint,
    /// fuse overlapping or touching intervals.
    pub fn normalize(mut raw: Vec<Interval>) -> Self {
        raw.retain(|iv| !iv.is_empty());
        raw.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut items: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match items.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => items.push(iv),
            }
        }
        IntervalSet { items }
    }

    /// Accept a list that must already be canonical; used when reading files
    /// so that any disorder in the input is an explicit error.
    pub fn from_canonical(items: Vec<Interval>) -> Result<Self> {
        for pair in items.windows(2) {
            if pair[0].hi >= pair[1].lo {
                return Err(Error::domain(format!(
                    "interval list not canonical: [{}, {}) then [{}, {})",
                    rational::format_rational(&pair[0].lo),
                    rational::format_rational(&pair[0].hi),
                    rational::format_rational(&pair[1].lo),
                    rational::format_rational(&pair[1].hi),
                )));
            }
        }
        if items.iter().any(Interval::is_empty) {
            return Err(Error::domain("interval list not canonical: empty member"));
        }
        Ok(IntervalSet { items })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.items
    }

    pub fn count(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn total_length(&self) -> Rational {
        let mut acc = Rational::zero();
        for iv in &self.items {
            acc += iv.length();
        }
        acc
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        // Last interval starting at or before x.
        let idx = self.items.partition_point(|iv| iv.lo <= *x);
        idx > 0 && self.items[idx - 1].contains_point(x)
    }

    /// The member interval containing `[lo, hi)` entirely, if any.
    pub fn covering_interval(&self, lo: &Rational, hi: &Rational) -> Option<&Interval> {
        let idx = self.items.partition_point(|iv| iv.lo <= *lo);
        if idx == 0 {
            return None;
        }
        let candidate = &self.items[idx - 1];
        (*hi <= candidate.hi).then_some(candidate)
    }

    /// Whether any member meets the open interval `(lo, hi)`.
    pub fn intersects_open(&self, lo: &Rational, hi: &Rational) -> bool {
        self.items.iter().any(|iv| iv.lo < *hi && iv.hi > *lo)
    }

    /// Exact intersection of two canonical sets.
    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (mut i, mut j) = (0usize, 0usize);
        let mut out = Vec::new();
        while i < self.items.len() && j < other.items.len() {
            let a = &self.items[i];
            let b = &other.items[j];
            let lo = if a.lo >= b.lo { a.lo.clone() } else { b.lo.clone() };
            let hi = if a.hi <= b.hi { a.hi.clone() } else { b.hi.clone() };
            if lo < hi {
                out.push(Interval { lo, hi });
            }
            if a.hi <= b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { items: out }
    }

    /// Translate every interval by `offset`.
    pub fn translate(&self, offset: &Rational) -> IntervalSet {
        IntervalSet {
            items: self
                .items
                .iter()
                .map(|iv| Interval { lo: &iv.lo + offset, hi: &iv.hi + offset })
                .collect(),
        }
    }

    /// Scale every endpoint by a positive factor.
    pub fn scale(&self, factor: &Rational) -> Result<IntervalSet> {
        if factor <= &Rational::zero() {
            return Err(Error::domain("interval scale factor must be positive"));
        }
        Ok(IntervalSet {
            items: self
                .items
                .iter()
                .map(|iv| Interval { lo: &iv.lo * factor, hi: &iv.hi * factor })
                .collect(),
        })
    }

    /// Intersection with a single interval `[lo, hi)`.
    pub fn clip(&self, lo: &Rational, hi: &Rational) -> IntervalSet {
        let mut out = Vec::new();
        for iv in &self.items {
            let a = if iv.lo >= *lo { iv.lo.clone() } else { lo.clone() };
            let b = if iv.hi <= *hi { iv.hi.clone() } else { hi.clone() };
            if a < b {
                out.push(Interval { lo: a, hi: b });
            }
        }
        IntervalSet { items: out }
    }

    /// Merge per-chunk results whose chunks are contiguous: `sets[k]` must
    /// lie within `[boundaries[k-1], boundaries[k])` (with open ends for the
    /// outer chunks). Intervals touching exactly at a chunk boundary are
    /// fused; the returned count is the number of fused pairs.
    pub fn merge_boundary_pairs(
        sets: &[IntervalSet],
        boundaries: &[Rational],
    ) -> Result<(IntervalSet, usize)> {
        if sets.is_empty() {
            return Ok((IntervalSet::empty(), 0));
        }
        if boundaries.len() + 1 != sets.len() {
            return Err(Error::domain(format!(
                "merge_boundary_pairs: {} sets need {} boundaries, got {}",
                sets.len(),
                sets.len() - 1,
                boundaries.len()
            )));
        }
        for pair in boundaries.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::domain("chunk boundaries not strictly increasing"));
            }
        }
        for (k, set) in sets.iter().enumerate() {
            if k > 0 {
                if let Some(first) = set.items.first() {
                    if first.lo < boundaries[k - 1] {
                        return Err(Error::domain(format!(
                            "chunk {k} starts before its boundary"
                        )));
                    }
                }
            }
            if k < boundaries.len() {
                if let Some(last) = set.items.last() {
                    if last.hi > boundaries[k] {
                        return Err(Error::domain(format!("chunk {k} ends past its boundary")));
                    }
                }
            }
        }
        let mut items: Vec<Interval> = Vec::new();
        let mut fused = 0usize;
        for set in sets {
            for iv in &set.items {
                match items.last_mut() {
                    Some(last) if last.hi == iv.lo => {
                        last.hi = iv.hi.clone();
                        fused += 1;
                    }
                    _ => items.push(iv.clone()),
                }
            }
        }
        Ok((IntervalSet { items }, fused))
    }

    /// Merge per-chunk results that interleave across the full period (as
    /// lifted chunks do): global sort, then fuse pairs touching exactly.
    /// Overlap between chunks indicates corrupted state and is an error.
    pub fn merge_scattered(sets: Vec<IntervalSet>) -> Result<(IntervalSet, usize)> {
        let mut all: Vec<Interval> = Vec::new();
        for set in sets {
            all.extend(set.items);
        }
        all.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut items: Vec<Interval> = Vec::new();
        let mut fused = 0usize;
        for iv in all {
            match items.last_mut() {
                Some(last) if last.hi > iv.lo => {
                    return Err(Error::internal(format!(
                        "scattered chunk results overlap near {}",
                        rational::format_rational(&iv.lo)
                    )));
                }
                Some(last) if last.hi == iv.lo => {
                    last.hi = iv.hi;
                    fused += 1;
                }
                _ => items.push(iv),
            }
        }
        Ok((IntervalSet { items }, fused))
    }
}

/// Parsed interval file: the set plus its recorded metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalFile {
    pub set: IntervalSet,
    pub scale: BigInt,
    pub range: (Rational, Rational),
    /// Present and true when the file carried a checksum that verified.
    pub checksummed: bool,
}

/// Serialize a set with its metadata headers. When `with_checksum` is set, a
/// trailing `#sha256=` line covers every preceding byte.
pub fn write_interval_file(
    out: &mut dyn Write,
    set: &IntervalSet,
    scale: &BigInt,
    range: (&Rational, &Rational),
    with_checksum: bool,
) -> Result<()> {
    let mut body = String::new();
    let _ = writeln!(body, "#scale={scale}");
    let _ = writeln!(
        body,
        "#range={}..{}",
        rational::format_rational(range.0),
        rational::format_rational(range.1)
    );
    let _ = writeln!(body, "#count={}", set.count());
    let _ = writeln!(body, "#length={}", rational::format_rational(&set.total_length()));
    for iv in set.intervals() {
        let _ = writeln!(
            body,
            "{}\t{}",
            rational::format_rational(&iv.lo),
            rational::format_rational(&iv.hi)
        );
    }
    out.write_all(body.as_bytes())?;
    if with_checksum {
        let digest = Sha256::digest(body.as_bytes());
        writeln!(out, "#sha256={digest:x}")?;
    }
    Ok(())
}

/// Read and validate an interval file: canonical order, headers consistent
/// with the contents, checksum verified when present.
pub fn read_interval_file(reader: &mut dyn BufRead) -> Result<IntervalFile> {
    let mut scale: Option<BigInt> = None;
    let mut range: Option<(Rational, Rational)> = None;
    let mut count: Option<usize> = None;
    let mut length: Option<Rational> = None;
    let mut items: Vec<Interval> = Vec::new();
    let mut body = String::new();
    let mut checksummed = false;

    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("#sha256=") {
            let digest = Sha256::digest(body.as_bytes());
            let expect = format!("{digest:x}");
            if rest.trim() != expect {
                return Err(Error::internal(format!(
                    "interval file checksum mismatch: recorded {}, computed {}",
                    rest.trim(),
                    expect
                )));
            }
            checksummed = true;
            continue;
        }
        body.push_str(&line);
        body.push('\n');
        if let Some(rest) = line.strip_prefix('#') {
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| Error::parse(format!("malformed header line: {line:?}")))?;
            match key {
                "scale" => {
                    scale = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(format!("bad scale: {value:?}")))?,
                    )
                }
                "range" => {
                    let (a, b) = value
                        .split_once("..")
                        .ok_or_else(|| Error::parse(format!("bad range: {value:?}")))?;
                    range = Some((rational::parse_rational(a)?, rational::parse_rational(b)?));
                }
                "count" => {
                    count = Some(
                        value
                            .trim()
                            .parse()
                            .map_err(|_| Error::parse(format!("bad count: {value:?}")))?,
                    )
                }
                "length" => length = Some(rational::parse_rational(value)?),
                _ => {} // tolerate unknown headers
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (lo, hi) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(format!("malformed interval line: {line:?}")))?;
        items.push(Interval::new(
            rational::parse_rational(lo)?,
            rational::parse_rational(hi)?,
        )?);
    }

    let scale = scale.ok_or_else(|| Error::parse("interval file missing #scale"))?;
    let range = range.ok_or_else(|| Error::parse("interval file missing #range"))?;
    let count = count.ok_or_else(|| Error::parse("interval file missing #count"))?;
    let length = length.ok_or_else(|| Error::parse("interval file missing #length"))?;

    let set = IntervalSet::from_canonical(items)?;
    if set.count() != count {
        return Err(Error::parse(format!(
            "interval file count mismatch: header {count}, found {}",
            set.count()
        )));
    }
    if set.total_length() != length {
        return Err(Error::parse("interval file length header does not match contents"));
    }
    if let Some(first) = set.intervals().first() {
        let last = set.intervals().last().unwrap();
        if *first.lo() < range.0 || *last.hi() > range.1 {
            return Err(Error::parse("interval file contents outside recorded range"));
        }
    }
    Ok(IntervalFile { set, scale, range, checksummed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, rat};

    fn iv(lo: i64, hi: i64) -> Interval {
        Interval::new(rat(lo), rat(hi)).unwrap()
    }

    fn set(pairs: &[(i64, i64)]) -> IntervalSet {
        IntervalSet::normalize(pairs.iter().map(|&(a, b)| iv(a, b)).collect())
    }

    #[test]
    fn normalize_sorts_fuses_drops() {
        let s = IntervalSet::normalize(vec![iv(5, 7), iv(1, 3), iv(3, 4), iv(9, 9), iv(6, 8)]);
        assert_eq!(s, set(&[(1, 4), (5, 8)]));
        // Idempotent.
        assert_eq!(IntervalSet::normalize(s.intervals().to_vec()), s);
    }

    #[test]
    fn canonical_validation() {
        assert!(IntervalSet::from_canonical(vec![iv(0, 2), iv(2, 3)]).is_err()); // touching
        assert!(IntervalSet::from_canonical(vec![iv(0, 2), iv(1, 3)]).is_err()); // overlap
        assert!(IntervalSet::from_canonical(vec![iv(0, 2), iv(4, 4)]).is_err()); // empty member
        assert!(IntervalSet::from_canonical(vec![iv(0, 2), iv(3, 4)]).is_ok());
    }

    #[test]
    fn intersection_and_length() {
        let a = set(&[(0, 10), (20, 30)]);
        let b = set(&[(5, 25)]);
        let c = a.intersect(&b);
        assert_eq!(c, set(&[(5, 10), (20, 25)]));
        assert_eq!(c.total_length(), rat(10));
        assert_eq!(a.intersect(&b), b.intersect(&a));
    }

    #[test]
    fn point_queries() {
        let s = set(&[(1, 3), (5, 8)]);
        assert!(s.contains_point(&rat(1)));
        assert!(!s.contains_point(&rat(3)));
        assert!(s.contains_point(&frac(11, 2)));
        assert!(!s.contains_point(&rat(0)));
        assert!(s.covering_interval(&rat(6), &rat(8)).is_some());
        assert!(s.covering_interval(&rat(6), &frac(17, 2)).is_none());
        assert!(s.intersects_open(&rat(2), &rat(4)));
        assert!(!s.intersects_open(&rat(3), &rat(5)));
    }

    #[test]
    fn boundary_merge_counts_fused_pairs() {
        let chunks = vec![set(&[(0, 5)]), set(&[(5, 8)]), set(&[(9, 10)])];
        let bounds = vec![rat(5), rat(8)];
        let (merged, fused) = IntervalSet::merge_boundary_pairs(&chunks, &bounds).unwrap();
        assert_eq!(merged, set(&[(0, 8), (9, 10)]));
        assert_eq!(fused, 1);
        // Length is preserved exactly.
        assert_eq!(merged.total_length(), rat(9));
    }

    #[test]
    fn boundary_merge_validates() {
        let chunks = vec![set(&[(0, 6)]), set(&[(5, 8)])];
        assert!(IntervalSet::merge_boundary_pairs(&chunks, &[rat(5)]).is_err());
        assert!(IntervalSet::merge_boundary_pairs(&chunks, &[]).is_err());
    }

    #[test]
    fn scattered_merge() {
        let a = set(&[(0, 2), (10, 12)]);
        let b = set(&[(2, 3), (20, 21)]);
        let (merged, fused) = IntervalSet::merge_scattered(vec![a, b]).unwrap();
        assert_eq!(merged, set(&[(0, 3), (10, 12), (20, 21)]));
        assert_eq!(fused, 1);
        let c = set(&[(0, 2)]);
        let d = set(&[(1, 3)]);
        assert!(IntervalSet::merge_scattered(vec![c, d]).is_err());
    }

    #[test]
    fn file_roundtrip_bit_exact() {
        let s = IntervalSet::normalize(vec![
            Interval::new(frac(3, 1), frac(6, 1)).unwrap(),
            Interval::new(frac(91, 10), rat(10)).unwrap(),
        ]);
        let mut buf = Vec::new();
        write_interval_file(&mut buf, &s, &BigInt::from(10), (&rat(0), &rat(30)), true).unwrap();
        let parsed = read_interval_file(&mut buf.as_slice()).unwrap();
        assert_eq!(parsed.set, s);
        assert_eq!(parsed.scale, BigInt::from(10));
        assert!(parsed.checksummed);
        let mut buf2 = Vec::new();
        write_interval_file(
            &mut buf2,
            &parsed.set,
            &parsed.scale,
            (&parsed.range.0, &parsed.range.1),
            true,
        )
        .unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn file_detects_corruption() {
        let s = set(&[(3, 6)]);
        let mut buf = Vec::new();
        write_interval_file(&mut buf, &s, &BigInt::from(1), (&rat(0), &rat(30)), true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replace("3/1\t6/1", "3/1\t7/1");
        assert!(read_interval_file(&mut tampered.as_bytes()).is_err());

        // Without a checksum the header consistency checks still catch lies.
        let mut plain = Vec::new();
        write_interval_file(&mut plain, &s, &BigInt::from(1), (&rat(0), &rat(30)), false).unwrap();
        let plain = String::from_utf8(plain).unwrap();
        let bad_count = plain.replace("#count=1", "#count=2");
        assert!(read_interval_file(&mut bad_count.as_bytes()).is_err());
        let bad_length = plain.replace("#length=3/1", "#length=4/1");
        assert!(read_interval_file(&mut bad_length.as_bytes()).is_err());
        let ok = read_interval_file(&mut plain.as_bytes()).unwrap();
        assert!(!ok.checksummed);
    }
}
