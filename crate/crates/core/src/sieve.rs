//! Window families and the exact interval sieve.
//!
//! A *window* is a triple `(m, eps, delta)` with integer modulus `m >= 1`
//! and rational band fractions `0 <= eps < delta <= 1`. The window *covers*
//! a rational `x` when the remainder `r = x mod m` (taken in `[0, m)`) lies
//! in the band `[eps*m, delta*m)`. Covered numbers are the ones the cube
//! construction can discharge with this modulus; everything else has to be
//! handled some other way.
//!
//! For a family `W` of windows, the *bad set* is the set of `x` covered by
//! no window at all:
//!
//! ```text
//! Bad(W) = { x : for every (m, eps, delta) in W,  x mod m not in [eps*m, delta*m) }
//! ```
//!
//! It is periodic with period `lcm(m_i)` and is a finite union of half-open
//! intervals whose endpoints are rationals with denominators dividing a
//! common scaling factor `S` (the lcm of the denominators of all band edges
//! `eps*m`, `delta*m`). The sieve below walks a range `[lo, hi)` once in
//! scaled-integer arithmetic and emits that union exactly, jumping over
//! whole covered and uncovered stretches instead of stepping pointwise:
//!
//! * at a covered point, every covering window stays in band until its exit
//!   `(q + delta) * m`, so the walk may jump to the **latest** such exit;
//! * at an uncovered point, every window stays out of band until its entry
//!   `(q + eps) * m` (or one period later if the band was already passed),
//!   so the uncovered run ends exactly at the **earliest** entry.
//!
//! Both jumps land on the `1/S` grid, every jump strictly advances, and the
//! emitted intervals are separated by covered stretches of positive length,
//! so the output is already in canonical form.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::intervals::{Interval, IntervalSet};
use crate::primes;
use crate::rational::{self, Rational};

/// A residue window `(m, eps, delta)`: modulus plus half-open band
/// `[eps*m, delta*m)` for the remainder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    modulus: BigInt,
    eps: Rational,
    delta: Rational,
}

impl Window {
    pub fn new(modulus: BigInt, eps: Rational, delta: Rational) -> Result<Self> {
        if modulus < BigInt::one() {
            return Err(Error::domain(format!("window modulus must be >= 1, got {modulus}")));
        }
        if eps.is_negative() || eps >= delta || delta > Rational::one() {
            return Err(Error::domain(format!(
                "window band fractions must satisfy 0 <= eps < delta <= 1, got eps={}, delta={}",
                rational::format_rational(&eps),
                rational::format_rational(&delta)
            )));
        }
        Ok(Window { modulus, eps, delta })
    }

    /// Convenience constructor from small integers: modulus `m`, band
    /// fractions `eps_num/den` and `delta_num/den`.
    pub fn from_parts(m: i64, eps_num: i64, delta_num: i64, den: i64) -> Result<Self> {
        Window::new(BigInt::from(m), rational::frac(eps_num, den), rational::frac(delta_num, den))
    }

    pub fn modulus(&self) -> &BigInt {
        &self.modulus
    }

    pub fn eps(&self) -> &Rational {
        &self.eps
    }

    pub fn delta(&self) -> &Rational {
        &self.delta
    }

    /// Lower band edge `eps * m`.
    pub fn band_lo(&self) -> Rational {
        &self.eps * rational::big(&self.modulus)
    }

    /// Upper band edge `delta * m`.
    pub fn band_hi(&self) -> Rational {
        &self.delta * rational::big(&self.modulus)
    }

    /// Whether the window covers `x`, i.e. `x mod m` falls in the band.
    pub fn covers(&self, x: &Rational) -> bool {
        let (_, r) = rational::quo_rem(x, &self.modulus)
            .expect("window modulus is validated positive");
        r >= self.band_lo() && r < self.band_hi()
    }
}

/// A finite family of windows with its common period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowFamily {
    windows: Vec<Window>,
    period: BigInt,
}

impl WindowFamily {
    pub fn new(windows: Vec<Window>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::domain("window family must contain at least one window"));
        }
        let mut period = BigInt::one();
        for w in &windows {
            period = period.lcm(&w.modulus);
        }
        Ok(WindowFamily { windows, period })
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// `lcm` of all moduli; the bad set repeats with this period.
    pub fn period(&self) -> &BigInt {
        &self.period
    }

    /// The family with every modulus multiplied by `factor` and the band
    /// fractions unchanged. Its bad set is the original bad set scaled by
    /// `factor`.
    pub fn scale_by(&self, factor: &BigInt) -> Result<WindowFamily> {
        if factor < &BigInt::one() {
            return Err(Error::domain(format!("scale factor must be >= 1, got {factor}")));
        }
        WindowFamily::new(
            self.windows
                .iter()
                .map(|w| Window {
                    modulus: &w.modulus * factor,
                    eps: w.eps.clone(),
                    delta: w.delta.clone(),
                })
                .collect(),
        )
    }

    /// Whether some window covers `x`.
    pub fn covers(&self, x: &Rational) -> bool {
        self.windows.iter().any(|w| w.covers(x))
    }

    /// Whether `x` lies in the bad set (covered by no window).
    pub fn in_bad(&self, x: &Rational) -> bool {
        !self.covers(x)
    }

    /// Smallest `S >= 1` such that `S * eps * m` and `S * delta * m` are
    /// integers for every window; all sieve output endpoints are multiples
    /// of `1/S`.
    pub fn kernel_scale(&self) -> BigInt {
        let mut s = BigInt::one();
        for w in &self.windows {
            s = s.lcm(w.band_lo().denom());
            s = s.lcm(w.band_hi().denom());
        }
        s
    }

    /// Product of the per-window uncovered fractions `1 - (delta - eps)`.
    /// If the moduli behaved independently this would be the density of the
    /// bad set; it is used as a planning heuristic, not an exact value.
    pub fn density_bound(&self) -> Rational {
        let mut p = Rational::one();
        for w in &self.windows {
            p *= Rational::one() - (&w.delta - &w.eps);
        }
        p
    }

    /// Heuristic size estimate for the bad set within `[lo, hi)`:
    /// range length times the density product.
    pub fn estimated_bad_length(&self, lo: &Rational, hi: &Rational) -> Rational {
        if hi <= lo {
            return Rational::zero();
        }
        (hi - lo) * self.density_bound()
    }
}

/// Counters describing one sieve run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SieveStats {
    /// Number of maximal uncovered intervals emitted.
    pub emitted: u64,
    /// Jumps taken from covered points (across covered stretches).
    pub cover_jumps: u64,
    /// Total loop iterations (covered and uncovered jumps together).
    pub steps: u64,
}

/// Integer arithmetic needed by the kernel, implemented for a fast native
/// type and for arbitrary precision.
trait KernelNum: Clone + Ord {
    fn add_assign_ref(&mut self, rhs: &Self);
    fn sub_assign_ref(&mut self, rhs: &Self);
    /// `a - b`.
    fn diff(a: &Self, b: &Self) -> Self;
    /// Remainder in `[0, m)` for `m > 0`.
    fn rem_floor(&self, m: &Self) -> Self;
    fn to_big(&self) -> BigInt;
    fn from_big(x: &BigInt) -> Option<Self>;
}

impl KernelNum for i128 {
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self += *rhs;
    }
    fn sub_assign_ref(&mut self, rhs: &Self) {
        *self -= *rhs;
    }
    fn diff(a: &Self, b: &Self) -> Self {
        a - b
    }
    fn rem_floor(&self, m: &Self) -> Self {
        self.mod_floor(m)
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
    fn from_big(x: &BigInt) -> Option<Self> {
        x.to_i128()
    }
}

impl KernelNum for BigInt {
    fn add_assign_ref(&mut self, rhs: &Self) {
        *self += rhs;
    }
    fn sub_assign_ref(&mut self, rhs: &Self) {
        *self -= rhs;
    }
    fn diff(a: &Self, b: &Self) -> Self {
        a - b
    }
    fn rem_floor(&self, m: &Self) -> Self {
        self.mod_floor(m)
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
    fn from_big(x: &BigInt) -> Option<Self> {
        Some(x.clone())
    }
}

/// One scaled window: `(S*m, S*eps*m, S*delta*m)`.
struct ScaledWindow<T> {
    m: T,
    band_lo: T,
    band_hi: T,
}

fn run_kernel<T: KernelNum>(
    wins: &[ScaledWindow<T>],
    start: T,
    end: T,
    emit: &mut dyn FnMut(BigInt, BigInt) -> Result<()>,
) -> Result<SieveStats> {
    let zero = T::diff(&start, &start);
    let mut u = start;
    let mut rems: Vec<T> = wins.iter().map(|w| u.rem_floor(&w.m)).collect();
    let mut stats = SieveStats::default();
    let mut run_start: Option<T> = None;

    while u < end {
        let mut jump: Option<T> = None;
        let mut covered = false;
        for (w, r) in wins.iter().zip(&rems) {
            if *r >= w.band_lo && *r < w.band_hi {
                covered = true;
                // This window stays in band until its exit; take the latest.
                let d = T::diff(&w.band_hi, r);
                if jump.as_ref().is_none_or(|j| d > *j) {
                    jump = Some(d);
                }
            }
        }
        if covered {
            if let Some(a) = run_start.take() {
                emit(a.to_big(), u.to_big())?;
                stats.emitted += 1;
            }
            stats.cover_jumps += 1;
        } else {
            if run_start.is_none() {
                run_start = Some(u.clone());
            }
            // Uncovered until the first window enters its band.
            for (w, r) in wins.iter().zip(&rems) {
                let d = if *r < w.band_lo {
                    T::diff(&w.band_lo, r)
                } else {
                    // r >= band_hi: the band comes around next period.
                    let mut t = T::diff(&w.m, r);
                    t.add_assign_ref(&w.band_lo);
                    t
                };
                if jump.as_ref().is_none_or(|j| d < *j) {
                    jump = Some(d);
                }
            }
        }
        let delta = jump.expect("family is non-empty");
        if delta <= zero {
            return Err(Error::internal("sieve failed to advance"));
        }
        u.add_assign_ref(&delta);
        for (w, r) in wins.iter().zip(rems.iter_mut()) {
            r.add_assign_ref(&delta);
            if *r >= w.m {
                r.sub_assign_ref(&w.m);
                if *r >= w.m {
                    *r = r.rem_floor(&w.m);
                }
            }
        }
        stats.steps += 1;
    }

    if let Some(a) = run_start {
        emit(a.to_big(), end.to_big())?;
        stats.emitted += 1;
    }
    Ok(stats)
}

/// The scaling factor used to sieve `family` over `[lo, hi)`: the family's
/// kernel scale extended so both range endpoints land on the grid.
pub fn effective_scale(family: &WindowFamily, lo: &Rational, hi: &Rational) -> BigInt {
    family.kernel_scale().lcm(lo.denom()).lcm(hi.denom())
}

/// Exact bad-set sieve over `[lo, hi)`, reporting each maximal uncovered
/// interval as scaled integers `(S*lo_i, S*hi_i)`. Returns the run counters
/// together with the scaling factor `S` actually used (equal to
/// [`effective_scale`]).
pub fn sieve_scaled_streaming(
    family: &WindowFamily,
    lo: &Rational,
    hi: &Rational,
    sink: &mut dyn FnMut(BigInt, BigInt) -> Result<()>,
) -> Result<(SieveStats, BigInt)> {
    let scale = effective_scale(family, lo, hi);
    let scale_q = rational::big(&scale);

    let start = (lo * &scale_q).to_integer();
    let end = (hi * &scale_q).to_integer();
    if end <= start {
        return Ok((SieveStats::default(), scale));
    }

    let mut big_windows = Vec::with_capacity(family.windows.len());
    let mut max_m = BigInt::zero();
    for w in &family.windows {
        let m = &w.modulus * &scale;
        let band_lo = (w.band_lo() * &scale_q).to_integer();
        let band_hi = (w.band_hi() * &scale_q).to_integer();
        if m > max_m {
            max_m = m.clone();
        }
        big_windows.push(ScaledWindow { m, band_lo, band_hi });
    }

    // The walk never leaves [start - max_m, end + 2*max_m]; use the native
    // kernel whenever that fits comfortably in i128.
    let bound = start.abs() + end.abs() + BigInt::from(4) * &max_m + BigInt::from(16);
    let fits = bound < (BigInt::one() << 126);

    let stats = if fits {
        let wins: Vec<ScaledWindow<i128>> = big_windows
            .iter()
            .map(|w| ScaledWindow {
                m: i128::from_big(&w.m).expect("bound-checked"),
                band_lo: i128::from_big(&w.band_lo).expect("bound-checked"),
                band_hi: i128::from_big(&w.band_hi).expect("bound-checked"),
            })
            .collect();
        run_kernel(
            &wins,
            i128::from_big(&start).expect("bound-checked"),
            i128::from_big(&end).expect("bound-checked"),
            sink,
        )?
    } else {
        run_kernel(&big_windows, start, end, sink)?
    };
    Ok((stats, scale))
}

/// Exact bad-set sieve over `[lo, hi)`, reporting intervals with rational
/// endpoints.
pub fn sieve_streaming(
    family: &WindowFamily,
    lo: &Rational,
    hi: &Rational,
    sink: &mut dyn FnMut(Interval) -> Result<()>,
) -> Result<SieveStats> {
    let scale_q = rational::big(&effective_scale(family, lo, hi));
    let (stats, _) = sieve_scaled_streaming(family, lo, hi, &mut |a, b| {
        sink(Interval::new(rational::big(&a) / &scale_q, rational::big(&b) / &scale_q)?)
    })?;
    Ok(stats)
}

/// Collect the bad set over `[lo, hi)` as a canonical interval set.
pub fn bad_set(family: &WindowFamily, lo: &Rational, hi: &Rational) -> Result<IntervalSet> {
    let mut items = Vec::new();
    sieve_streaming(family, lo, hi, &mut |iv| {
        items.push(iv);
        Ok(())
    })?;
    // The kernel emits separated intervals in increasing order; validate
    // rather than re-normalize so a kernel defect cannot hide.
    IntervalSet::from_canonical(items)
}

/// Structural requirements on a window modulus: squarefree, divisible by 3,
/// and every prime factor of `m/3` congruent to 5 mod 6.
pub fn check_modulus_structure(m: &BigInt) -> Result<()> {
    if m < &BigInt::from(3) {
        return Err(Error::domain(format!("modulus {m} too small")));
    }
    let three = BigInt::from(3);
    if !(m % &three).is_zero() {
        return Err(Error::domain(format!("modulus {m} is not divisible by 3")));
    }
    let factors = primes::factorize(m)?;
    for (p, e) in &factors {
        if *e > 1 {
            return Err(Error::domain(format!("modulus {m} is not squarefree (p={p})")));
        }
        if *p == three {
            continue;
        }
        if (p % BigInt::from(6)) != BigInt::from(5) {
            return Err(Error::domain(format!(
                "modulus {m} has prime factor {p} not congruent to 5 mod 6"
            )));
        }
    }
    Ok(())
}

/// Size requirements tying a window to the target range `[k1, k2]`:
///
/// ```text
/// k1 >= (8*delta^3 + 1/36) * m^3 + (3/4) * m
/// k2 <= (8*eps^3   + 1/18) * m^3 + (1/2) * m
/// ```
///
/// Within these bounds every integer of `[k1, k2]` that the window covers
/// admits the seven-cube construction with modulus `m`.
pub fn check_range_fit(w: &Window, k1: &Rational, k2: &Rational) -> Result<()> {
    let m = rational::big(&w.modulus);
    let m3 = &m * &m * &m;
    let eight = rational::rat(8);

    let floor_need =
        (&eight * &w.delta * &w.delta * &w.delta + rational::frac(1, 36)) * &m3
            + rational::frac(3, 4) * &m;
    if *k1 < floor_need {
        return Err(Error::domain(format!(
            "range floor {} below window requirement {} for modulus {}",
            rational::format_rational(k1),
            rational::format_rational(&floor_need),
            w.modulus
        )));
    }

    let ceil_allow =
        (&eight * &w.eps * &w.eps * &w.eps + rational::frac(1, 18)) * &m3
            + rational::frac(1, 2) * &m;
    if *k2 > ceil_allow {
        return Err(Error::domain(format!(
            "range ceiling {} above window reach {} for modulus {}",
            rational::format_rational(k2),
            rational::format_rational(&ceil_allow),
            w.modulus
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, rat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fam(parts: &[(i64, i64, i64, i64)]) -> WindowFamily {
        WindowFamily::new(
            parts
                .iter()
                .map(|&(m, e, d, den)| Window::from_parts(m, e, d, den).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn ivset(pairs: &[(i64, i64, i64)]) -> IntervalSet {
        IntervalSet::normalize(
            pairs
                .iter()
                .map(|&(a, b, den)| Interval::new(frac(a, den), frac(b, den)).unwrap())
                .collect(),
        )
    }

    #[test]
    fn window_validation() {
        assert!(Window::from_parts(6, 0, 5, 10).is_ok());
        assert!(Window::from_parts(0, 0, 5, 10).is_err());
        assert!(Window::from_parts(6, 5, 5, 10).is_err());
        assert!(Window::from_parts(6, -1, 5, 10).is_err());
        assert!(Window::from_parts(6, 0, 11, 10).is_err());
    }

    #[test]
    fn two_window_example() {
        // Bands: [0,3) mod 6 and [0,3) mod 10.
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        assert_eq!(*f.period(), BigInt::from(30));
        let got = bad_set(&f, &rat(0), &rat(30)).unwrap();
        assert_eq!(got, ivset(&[(3, 6, 1), (9, 10, 1), (15, 18, 1), (23, 24, 1), (27, 30, 1)]));
        assert!(f.in_bad(&rat(4)));
        assert!(f.covers(&rat(12)));
        assert!(f.in_bad(&frac(59, 2))); // 29.5 in [27,30)
    }

    #[test]
    fn single_window_with_offset_band() {
        // Band [1,3) mod 5.
        let f = fam(&[(5, 1, 3, 5)]);
        let got = bad_set(&f, &rat(0), &rat(10)).unwrap();
        assert_eq!(got, ivset(&[(0, 1, 1), (3, 6, 1), (8, 10, 1)]));
    }

    #[test]
    fn fractional_band_edges() {
        // Band [1/2, 3/2) mod 3; scaling factor 2.
        let f = fam(&[(3, 1, 3, 6)]);
        assert_eq!(f.kernel_scale(), BigInt::from(2));
        let got = bad_set(&f, &rat(0), &rat(3)).unwrap();
        assert_eq!(got, ivset(&[(0, 1, 2), (3, 6, 2)]));
    }

    #[test]
    fn range_clipping_mid_band() {
        let f = fam(&[(5, 1, 3, 5)]);
        // Full set on [0,10) is [0,1),[3,6),[8,10); clip to [1/2, 9/2).
        let got = bad_set(&f, &frac(1, 2), &frac(9, 2)).unwrap();
        assert_eq!(got, ivset(&[(1, 2, 2), (6, 9, 2)]));
    }

    #[test]
    fn stats_count_runs() {
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        let mut n = 0u64;
        let stats = sieve_streaming(&f, &rat(0), &rat(30), &mut |_| {
            n += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(stats.emitted, 5);
        assert_eq!(n, 5);
        assert!(stats.cover_jumps >= 4);
        assert!(stats.steps >= stats.cover_jumps);
    }

    #[test]
    fn splitting_ranges_agrees() {
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        let whole = bad_set(&f, &rat(0), &rat(30)).unwrap();
        let left = bad_set(&f, &rat(0), &rat(16)).unwrap();
        let right = bad_set(&f, &rat(16), &rat(30)).unwrap();
        let (merged, fused) =
            IntervalSet::merge_boundary_pairs(&[left, right], &[rat(16)]).unwrap();
        assert_eq!(merged, whole);
        assert_eq!(fused, 1); // [15,18) straddles the cut
    }

    #[test]
    fn periodicity() {
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        let first = bad_set(&f, &rat(0), &rat(30)).unwrap();
        let second = bad_set(&f, &rat(30), &rat(60)).unwrap();
        assert_eq!(first.translate(&rat(30)), second);
    }

    #[test]
    fn scaled_family_scales_bad_set() {
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        let g = f.scale_by(&BigInt::from(7)).unwrap();
        assert_eq!(*g.period(), BigInt::from(210));
        let small = bad_set(&f, &rat(0), &rat(30)).unwrap();
        let big = bad_set(&g, &rat(0), &rat(210)).unwrap();
        assert_eq!(small.scale(&rat(7)).unwrap(), big);
    }

    #[test]
    fn agrees_with_pointwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..40 {
            let k = rng.gen_range(1..=3);
            let mut wins = Vec::new();
            for _ in 0..k {
                let m = rng.gen_range(2i64..=12);
                let den = rng.gen_range(2i64..=6);
                let e = rng.gen_range(0..den);
                let d = rng.gen_range(e + 1..=den);
                wins.push(Window::from_parts(m, e, d, den).unwrap());
            }
            let f = WindowFamily::new(wins).unwrap();
            let lo = rat(rng.gen_range(0..5));
            let hi = &lo + rat(rng.gen_range(1..40));

            let got = bad_set(&f, &lo, &hi).unwrap();

            // Oracle: within [lo, hi) both the bad set and the 1/S grid are
            // aligned, so membership is constant on each grid cell and
            // decided by its left endpoint.
            let s = f.kernel_scale();
            let s_q = rational::big(&s);
            let a = (&lo * &s_q).to_integer();
            let b = (&hi * &s_q).to_integer();
            let mut cells = Vec::new();
            let mut cur: Option<(BigInt, BigInt)> = None;
            let mut j = a.clone();
            while j < b {
                let x = rational::big(&j) / &s_q;
                if f.in_bad(&x) {
                    let next = &j + BigInt::one();
                    match &mut cur {
                        Some((_, hi_c)) if *hi_c == j => *hi_c = next,
                        _ => {
                            if let Some(c) = cur.take() {
                                cells.push(c);
                            }
                            cur = Some((j.clone(), next));
                        }
                    }
                }
                j += BigInt::one();
            }
            if let Some(c) = cur.take() {
                cells.push(c);
            }
            let expect = IntervalSet::from_canonical(
                cells
                    .into_iter()
                    .map(|(x, y)| {
                        Interval::new(rational::big(&x) / &s_q, rational::big(&y) / &s_q).unwrap()
                    })
                    .collect(),
            )
            .unwrap();
            assert_eq!(got, expect, "family {f:?} on [{lo}, {hi})");
        }
    }

    #[test]
    fn native_and_bignum_kernels_agree() {
        let f = fam(&[(7, 1, 4, 7), (9, 0, 2, 9), (4, 1, 2, 4)]);
        let scale = f.kernel_scale();
        let scale_q = rational::big(&scale);
        let wins_big: Vec<ScaledWindow<BigInt>> = f
            .windows()
            .iter()
            .map(|w| ScaledWindow {
                m: w.modulus() * &scale,
                band_lo: (w.band_lo() * &scale_q).to_integer(),
                band_hi: (w.band_hi() * &scale_q).to_integer(),
            })
            .collect();
        let wins_small: Vec<ScaledWindow<i128>> = wins_big
            .iter()
            .map(|w| ScaledWindow {
                m: i128::from_big(&w.m).unwrap(),
                band_lo: i128::from_big(&w.band_lo).unwrap(),
                band_hi: i128::from_big(&w.band_hi).unwrap(),
            })
            .collect();
        let mut out_big = Vec::new();
        let stats_big = run_kernel(&wins_big, BigInt::zero(), BigInt::from(252), &mut |a, b| {
            out_big.push((a, b));
            Ok(())
        })
        .unwrap();
        let mut out_small = Vec::new();
        let stats_small = run_kernel(&wins_small, 0i128, 252i128, &mut |a, b| {
            out_small.push((a, b));
            Ok(())
        })
        .unwrap();
        assert_eq!(out_big, out_small);
        assert_eq!(stats_big, stats_small);
        assert!(!out_big.is_empty());
    }

    #[test]
    fn modulus_structure_checks() {
        assert!(check_modulus_structure(&BigInt::from(3)).is_ok());
        assert!(check_modulus_structure(&BigInt::from(15)).is_ok()); // 3*5
        assert!(check_modulus_structure(&BigInt::from(33)).is_ok()); // 3*11
        assert!(check_modulus_structure(&BigInt::from(2805)).is_ok()); // 3*5*11*17
        assert!(check_modulus_structure(&BigInt::from(9)).is_err()); // not squarefree
        assert!(check_modulus_structure(&BigInt::from(21)).is_err()); // 7 = 1 mod 6
        assert!(check_modulus_structure(&BigInt::from(6)).is_err()); // even
        assert!(check_modulus_structure(&BigInt::from(5)).is_err()); // no 3
        assert!(check_modulus_structure(&BigInt::from(1005)).is_err()); // 67 = 1 mod 6
    }

    #[test]
    fn range_fit_boundaries() {
        // m = 15, eps = 0, delta = 1/10:
        // floor requirement (8/1000 + 1/36)*3375 + 45/4 = 132,
        // ceiling allowance 3375/18 + 15/2 = 195.
        let w = Window::from_parts(15, 0, 1, 10).unwrap();
        assert!(check_range_fit(&w, &rat(132), &rat(195)).is_ok());
        assert!(check_range_fit(&w, &rat(131), &rat(195)).is_err());
        assert!(check_range_fit(&w, &rat(132), &rat(196)).is_err());
        // The worked value 203 is out of this window's reach.
        assert!(check_range_fit(&w, &rat(132), &rat(203)).is_err());
    }

    #[test]
    fn density_estimate() {
        let f = fam(&[(6, 0, 5, 10), (10, 0, 3, 10)]);
        assert_eq!(f.density_bound(), frac(1, 2) * frac(7, 10));
        assert_eq!(f.estimated_bad_length(&rat(0), &rat(100)), rat(35));
    }
}
