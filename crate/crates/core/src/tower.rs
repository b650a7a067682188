//! Level-by-level refinement of bad sets.
//!
//! Adding windows to a family can only shrink its bad set, but it multiplies
//! the period: sieving the enlarged family directly over its full period
//! repeats work inside stretches the smaller family already ruled out. The
//! tower exploits the factorization
//!
//! ```text
//! Bad(W ∪ V) ∩ [0, p*M) = ⋃_{k<p} ( (k*M + (Bad(W) ∩ [0, M))) ∩ Bad(V) )
//! ```
//!
//! where `M` is the period of `W` and `p*M` the period of `W ∪ V`: each
//! translate of the level-`i` bad set is intersected with the bad set of the
//! *added* windows only. Processing translates in order of `k` and intervals
//! in order within each translate yields the next level's set already
//! sorted; adjacent survivors can touch only across a translate boundary and
//! are fused on the fly.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::rational::{self, Rational};
use crate::sieve::{self, SieveStats, Window, WindowFamily};

/// Reduction of a point into `[0, period)`.
pub fn project(x: &Rational, period: &BigInt) -> Result<Rational> {
    let (_, r) = rational::quo_rem(x, period)?;
    Ok(r)
}

/// Counters for one lifting step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiftStats {
    /// Intervals in the incoming level.
    pub input_intervals: usize,
    /// Intervals in the outgoing level (after fusing).
    pub output_intervals: usize,
    /// Pairs fused across translate boundaries.
    pub fused: usize,
    /// Accumulated sieve counters over all interval restrictions.
    pub sieve: SieveStats,
}

/// Intersect the translates `k*prev_period + base` (for `0 <= k < lift`)
/// with the bad set of `added`, producing the refined set on
/// `[0, lift*prev_period)`.
///
/// `base` must lie within `[0, prev_period]`; `added` are the windows being
/// introduced at this level (not the combined family).
pub fn lift_once(
    base: &IntervalSet,
    prev_period: &BigInt,
    added: &WindowFamily,
    lift: &BigInt,
) -> Result<(IntervalSet, LiftStats)> {
    if prev_period < &BigInt::one() {
        return Err(Error::domain(format!("period must be >= 1, got {prev_period}")));
    }
    if lift < &BigInt::one() {
        return Err(Error::domain(format!("lift multiplier must be >= 1, got {lift}")));
    }
    let period_q = rational::big(prev_period);
    if let (Some(first), Some(last)) = (base.intervals().first(), base.intervals().last()) {
        if first.lo().is_negative() || *last.hi() > period_q {
            return Err(Error::domain(
                "base set extends outside one period".to_string(),
            ));
        }
    }

    let mut stats = LiftStats { input_intervals: base.count(), ..LiftStats::default() };
    let mut out: Vec<Interval> = Vec::new();
    let mut k = BigInt::zero();
    while &k < lift {
        let offset = rational::big(&(&k * prev_period));
        for iv in base.intervals() {
            let lo = iv.lo() + &offset;
            let hi = iv.hi() + &offset;
            let s = sieve::sieve_streaming(added, &lo, &hi, &mut |piece| {
                match out.last_mut() {
                    Some(last) if *last.hi() == *piece.lo() => {
                        *last = Interval::new(last.lo().clone(), piece.hi().clone())?;
                        stats.fused += 1;
                    }
                    _ => out.push(piece),
                }
                Ok(())
            })?;
            stats.sieve.emitted += s.emitted;
            stats.sieve.cover_jumps += s.cover_jumps;
            stats.sieve.steps += s.steps;
        }
        k += BigInt::one();
    }
    let set = IntervalSet::from_canonical(out)?;
    stats.output_intervals = set.count();
    Ok((set, stats))
}

/// A base family plus the windows introduced at each later level.
#[derive(Debug, Clone)]
pub struct Tower {
    base: WindowFamily,
    stages: Vec<Vec<Window>>,
}

/// One computed level: the combined family, its bad set over one period,
/// and the counters of the step that produced it.
#[derive(Debug, Clone)]
pub struct TowerLevel {
    pub family: WindowFamily,
    pub bad: IntervalSet,
    pub stats: LiftStats,
}

impl Tower {
    pub fn new(base: WindowFamily, stages: Vec<Vec<Window>>) -> Result<Self> {
        if stages.iter().any(Vec::is_empty) {
            return Err(Error::domain("tower stage with no added windows".to_string()));
        }
        Ok(Tower { base, stages })
    }

    pub fn base(&self) -> &WindowFamily {
        &self.base
    }

    pub fn stages(&self) -> &[Vec<Window>] {
        &self.stages
    }

    /// The combined family after `level` stages (level 0 is the base).
    pub fn family_at(&self, level: usize) -> Result<WindowFamily> {
        if level > self.stages.len() {
            return Err(Error::domain(format!(
                "tower has {} levels, asked for {level}",
                self.stages.len()
            )));
        }
        let mut windows = self.base.windows().to_vec();
        for stage in &self.stages[..level] {
            windows.extend(stage.iter().cloned());
        }
        WindowFamily::new(windows)
    }

    /// Compute every level's bad set over its own full period, refining
    /// level by level. Level 0 is sieved directly; each later level is a
    /// lift of the previous one.
    pub fn run(&self) -> Result<Vec<TowerLevel>> {
        let zero = Rational::zero();
        let base_hi = rational::big(self.base.period());
        let mut levels = Vec::with_capacity(self.stages.len() + 1);

        let mut base_stats = LiftStats::default();
        let mut items = Vec::new();
        base_stats.sieve = sieve::sieve_streaming(&self.base, &zero, &base_hi, &mut |iv| {
            items.push(iv);
            Ok(())
        })?;
        let bad = IntervalSet::from_canonical(items)?;
        base_stats.output_intervals = bad.count();
        levels.push(TowerLevel { family: self.base.clone(), bad, stats: base_stats });

        for (i, stage) in self.stages.iter().enumerate() {
            let prev_family = levels[i].family.clone();
            let family = self.family_at(i + 1)?;
            let prev_period = prev_family.period().clone();
            let lift = family.period() / &prev_period;
            if &lift * &prev_period != *family.period() {
                return Err(Error::internal(
                    "combined period is not a multiple of the previous period".to_string(),
                ));
            }
            let added = WindowFamily::new(stage.clone())?;
            let (bad, stats) = lift_once(&levels[i].bad, &prev_period, &added, &lift)?;
            levels.push(TowerLevel { family, bad, stats });
        }
        Ok(levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn w(m: i64, e: i64, d: i64, den: i64) -> Window {
        Window::from_parts(m, e, d, den).unwrap()
    }

    #[test]
    fn lift_matches_direct_sieve() {
        let base = WindowFamily::new(vec![w(6, 0, 5, 10)]).unwrap();
        let tower = Tower::new(base, vec![vec![w(10, 0, 3, 10)]]).unwrap();
        let levels = tower.run().unwrap();
        assert_eq!(levels.len(), 2);

        let combined = tower.family_at(1).unwrap();
        assert_eq!(*combined.period(), BigInt::from(30));
        let direct = sieve::bad_set(&combined, &rat(0), &rat(30)).unwrap();
        assert_eq!(levels[1].bad, direct);
        assert_eq!(levels[1].stats.input_intervals, 1);
        assert_eq!(levels[1].stats.output_intervals, 5);
    }

    #[test]
    fn three_level_tower_matches_direct() {
        let base = WindowFamily::new(vec![w(6, 0, 1, 2)]).unwrap();
        let tower = Tower::new(
            base,
            vec![vec![w(10, 0, 3, 10)], vec![w(7, 1, 3, 7), w(9, 0, 2, 9)]],
        )
        .unwrap();
        let levels = tower.run().unwrap();
        assert_eq!(levels.len(), 3);
        let combined = tower.family_at(2).unwrap();
        let period = rational::big(combined.period());
        assert_eq!(*combined.period(), BigInt::from(630));
        let direct = sieve::bad_set(&combined, &Rational::zero(), &period).unwrap();
        assert_eq!(levels[2].bad, direct);
        // Refinement shrinks measure.
        assert!(levels[2].bad.total_length() <= levels[1].bad.total_length() * rat(21));
    }

    #[test]
    fn projection_of_lifted_points_lands_in_base() {
        let base = WindowFamily::new(vec![w(6, 0, 5, 10)]).unwrap();
        let tower = Tower::new(base, vec![vec![w(10, 0, 3, 10)]]).unwrap();
        let levels = tower.run().unwrap();
        let base_period = levels[0].family.period().clone();
        for iv in levels[1].bad.intervals() {
            let mid = (iv.lo() + iv.hi()) / rat(2);
            let back = project(&mid, &base_period).unwrap();
            assert!(levels[0].bad.contains_point(&back), "midpoint {mid} projects outside");
        }
    }

    #[test]
    fn lift_validates_inputs() {
        let base = IntervalSet::normalize(vec![Interval::new(rat(3), rat(7)).unwrap()]);
        let added = WindowFamily::new(vec![w(10, 0, 3, 10)]).unwrap();
        // Base set leaks past one period of length 6.
        assert!(lift_once(&base, &BigInt::from(6), &added, &BigInt::from(5)).is_err());
        assert!(lift_once(&base, &BigInt::from(8), &added, &BigInt::zero()).is_err());
    }

    #[test]
    fn boundary_fusion_across_translates() {
        // Base band [1, 2) mod 3: bad set within one period is
        // [0,1) ∪ [2,3), which touches both ends of the period, so the
        // translates [2,3) and [3,4) meet at 3. The added window's band
        // [0,1) mod 5 leaves [1,5) uncovered, killing [0,1) and [5,6) but
        // keeping both halves around 3 — they must come back fused.
        let base_fam = WindowFamily::new(vec![w(3, 1, 2, 3)]).unwrap();
        let bad0 = sieve::bad_set(&base_fam, &rat(0), &rat(3)).unwrap();
        assert_eq!(bad0.count(), 2);
        let added = WindowFamily::new(vec![w(5, 0, 1, 5)]).unwrap();
        let (lifted, stats) =
            lift_once(&bad0, &BigInt::from(3), &added, &BigInt::from(2)).unwrap();
        let expect = IntervalSet::normalize(vec![Interval::new(rat(2), rat(4)).unwrap()]);
        assert_eq!(lifted, expect);
        assert_eq!(stats.fused, 1);
        assert_eq!(stats.input_intervals, 2);
        assert_eq!(stats.output_intervals, 1);

        // The same set falls out of a direct sieve of the combined family
        // restricted to [0, 6).
        let combined = WindowFamily::new(vec![w(3, 1, 2, 3), w(5, 0, 1, 5)]).unwrap();
        let direct = sieve::bad_set(&combined, &rat(0), &rat(6)).unwrap();
        assert_eq!(lifted, direct);
    }
}
