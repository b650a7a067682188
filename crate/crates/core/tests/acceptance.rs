//! The acceptance gate: one test per release criterion, each printing a
//! single pass line. Criterion 11 reproduces a full-scale table row and is
//! ignored by default — run it explicitly for a full validation.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sevencubes::bands::{self, BandPrediction, Direction};
use sevencubes::construct::{
    exceptions_scan, min_cubes_table, seven_cubes_from_window, seven_cubes_search,
    three_triangular, SearchOutcome,
};
use sevencubes::criterion::Fraction;
use sevencubes::params::{
    divisors_in_range, find_kappa, level_bounds, tower_top, variable_window,
    verify_scaling_factor, PlanMode, RangePlan,
};
use sevencubes::pipeline::{self, CertifyOutcome, RunConfig};
use sevencubes::rational::{big, frac, rat, Rational};
use sevencubes::sieve::{bad_set, check_modulus_structure, Window, WindowFamily};
use sevencubes::tower::Tower;
use sevencubes::{Enclosure, Error, IntervalSet};

fn pass(number: u32, label: &str) {
    println!("criterion {number:02} ({label}): pass");
}

fn product(factors: &[u64]) -> BigInt {
    factors.iter().fold(BigInt::from(1), |acc, p| acc * p)
}

/// Independent per-window membership oracle on a single point.
fn point_is_bad(family: &WindowFamily, x: &Rational) -> bool {
    family.windows().iter().all(|w| {
        let m = big(w.modulus());
        let r = x - (x / &m).floor() * &m;
        r < w.band_lo() || r >= w.band_hi()
    })
}

#[test]
fn criterion_01_exception_list() {
    let exceptions = exceptions_scan(100_000).unwrap();
    assert_eq!(
        exceptions,
        vec![15, 22, 23, 50, 114, 167, 175, 186, 212, 231, 238, 239, 303, 364, 420, 428, 454],
        "the integers needing more than seven positive cubes"
    );
    let table = min_cubes_table(100_000);
    let over_eight: Vec<usize> = (1..=100_000).filter(|&n| table[n] > 8).collect();
    assert_eq!(over_eight, vec![23, 239], "only 23 and 239 need nine cubes");
    pass(1, "exception list");
}

#[test]
fn criterion_02_divisor_counts() {
    let base: [u64; 12] = [5, 11, 17, 23, 29, 41, 47, 53, 59, 71, 83, 89];
    let extra: [u64; 7] = [101, 107, 113, 131, 137, 149, 167];
    let expected_counts = [16usize, 38, 83, 149, 250, 401, 620, 911];
    assert_eq!(
        product(&base),
        "1970940385213991785".parse::<BigInt>().unwrap(),
        "base period"
    );

    let lo = BigInt::from(265u64) * BigInt::from(10u64.pow(9));
    let hi = BigInt::from(290u64) * BigInt::from(10u64.pow(9));
    for (i, want) in expected_counts.iter().enumerate() {
        let mut period = product(&base);
        for p in extra.iter().take(i) {
            period *= *p;
        }
        let divisors = divisors_in_range(&period, &lo, &hi).unwrap();
        assert_eq!(divisors.len(), *want, "window count at level {i}");
        let mut l = BigInt::from(1);
        for d in &divisors {
            l = l.lcm(d);
        }
        assert_eq!(l, period, "window lcm must equal the period at level {i}");
    }
    pass(2, "divisor counts and lcm");
}

#[test]
fn criterion_03_band_constants() {
    let m0 = product(&[5, 11, 17, 23, 29, 41, 47, 53, 59, 71, 83, 89]);
    let cases: Vec<(BigInt, Rational)> = vec![
        (BigInt::from(21_621_600u64), rat(100)),
        (BigInt::from(927_498u64), rat(50)),
        (m0, rat(1_000_000)),
        (BigInt::from(2_000_000u64), frac(1001, 7)),
    ];
    for (period, scale) in cases {
        let above = bands::above_anchor_bands(&period, &scale).unwrap();
        let mut count = 0usize;
        let mut length = rat(0);
        for prediction in &above {
            let q: u64 = prediction.fraction.denominator().try_into().unwrap();
            assert_eq!(
                prediction.intervals.count(),
                (10 - q) as usize,
                "interval count at anchor {} of period {period}",
                prediction.fraction
            );
            count += prediction.intervals.count();
            length += prediction.intervals.total_length();
        }
        assert_eq!(count, 103, "total band intervals for period {period}");
        assert_eq!(
            length,
            frac(261_707, 10_500) * &scale,
            "total band length for period {period}"
        );
    }
    pass(3, "band constants");
}

#[test]
fn criterion_04_scaling_factors() {
    // The explicit factor serving the top range: 3 times a prime times the
    // block of twenty-four primes congruent to 5 modulo 6.
    let tau: [u64; 24] = [
        173, 179, 191, 197, 227, 233, 239, 251, 257, 263, 269, 281, 293, 311, 317, 347, 353,
        359, 383, 389, 401, 419, 431, 443,
    ];
    let explicit = BigInt::from(3) * BigInt::from(207_443u64) * product(&tau);
    let top = tower_top().unwrap();
    verify_scaling_factor(&explicit, &top).unwrap();
    assert_eq!(find_kappa(&top).unwrap(), explicit);

    // Deep in the tower one range contains no admissible factor at all.
    let (_, k2) = level_bounds(3998).unwrap();
    match find_kappa(&k2).unwrap_err() {
        Error::NoScalingFactor { lower, upper } => {
            assert_eq!((lower.as_str(), upper.as_str()), ("7482", "7590"));
        }
        other => panic!("expected a missing scaling factor, got {other}"),
    }
    pass(4, "scaling factor verification");
}

#[test]
fn criterion_05_sieve_matches_membership() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05EC);
    for round in 0..1000 {
        let window_count = rng.gen_range(2..=6);
        let windows: Vec<Window> = (0..window_count)
            .map(|_| {
                let m = rng.gen_range(2u32..=500);
                let e = rng.gen_range(0i64..20);
                let d = rng.gen_range((e + 1)..=20);
                Window::new(BigInt::from(m), frac(e, 20), frac(d, 20)).unwrap()
            })
            .collect();
        let family = WindowFamily::new(windows).unwrap();
        let start = rng.gen_range(-1000i64..=1000);
        let width = rng.gen_range(8i64..=64);
        let lo = rat(start);
        let hi = rat(start + width);
        let bad = bad_set(&family, &lo, &hi).unwrap();

        for k in start..=(start + width) {
            let x = rat(k);
            let expect = if k < start + width { point_is_bad(&family, &x) } else { false };
            assert_eq!(bad.contains_point(&x), expect, "integer {k} in round {round}");
        }
        for e in (start * 8)..((start + width) * 8) {
            let x = frac(e, 8);
            assert_eq!(
                bad.contains_point(&x),
                point_is_bad(&family, &x),
                "grid point {e}/8 in round {round}"
            );
        }
    }
    pass(5, "sieve membership oracle");
}

#[test]
fn criterion_06_towers_equal_direct_sieves() {
    fn make_windows(rng: &mut ChaCha8Rng, count: usize) -> Vec<Window> {
        (0..count)
            .map(|_| {
                let m = rng.gen_range(4u32..=16);
                let e = rng.gen_range(0i64..10);
                let d = rng.gen_range((e + 1)..=10);
                Window::new(BigInt::from(m), frac(e, 10), frac(d, 10)).unwrap()
            })
            .collect()
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x70E5);
    let mut built = 0;
    while built < 100 {
        let base_count = rng.gen_range(1..=2);
        let base = WindowFamily::new(make_windows(&mut rng, base_count)).unwrap();
        let stage_count = rng.gen_range(1..=2);
        let stages: Vec<Vec<Window>> = (0..stage_count)
            .map(|_| {
                let count = rng.gen_range(1..=2);
                make_windows(&mut rng, count)
            })
            .collect();
        let tower = Tower::new(base, stages).unwrap();
        let top = tower.family_at(tower.stages().len()).unwrap();
        if top.period() > &BigInt::from(200_000) {
            continue;
        }
        assert!(top.period() <= &BigInt::from(10_000_000), "period cap");

        let levels = tower.run().unwrap();
        for (i, level) in levels.iter().enumerate() {
            let family = tower.family_at(i).unwrap();
            let period = big(family.period());
            let direct = bad_set(&family, &rat(0), &period).unwrap();
            assert_eq!(level.bad, direct, "level {i} of tower {built}");
        }
        built += 1;
    }
    pass(6, "tower versus direct sieve");
}

#[test]
fn criterion_07_chunked_runs_are_deterministic() {
    let base = WindowFamily::new(vec![Window::from_parts(6, 0, 1, 2).unwrap()]).unwrap();
    let stages = vec![
        vec![Window::from_parts(10, 0, 3, 10).unwrap()],
        vec![
            Window::from_parts(7, 1, 3, 7).unwrap(),
            Window::from_parts(9, 0, 2, 9).unwrap(),
        ],
    ];
    let tower = Tower::new(base, stages).unwrap();
    let mut quiet = |_: String| {};

    let mut reference: Option<Vec<u8>> = None;
    for chunks in [1usize, 2, 8, 59] {
        let dir = tempfile::TempDir::new().unwrap();
        let config = RunConfig {
            chunk_count: chunks,
            workers: 1,
            ..RunConfig::default()
        };
        pipeline::run_chunked(&tower, dir.path(), &config, &mut quiet).unwrap();
        let bytes = std::fs::read(dir.path().join("final.txt")).unwrap();
        match &reference {
            None => reference = Some(bytes),
            Some(expect) => assert_eq!(&bytes, expect, "result differs at {chunks} chunks"),
        }
    }

    // Kill the run after three chunks, then resume; the bytes must match.
    let dir = tempfile::TempDir::new().unwrap();
    let partial = RunConfig {
        chunk_count: 8,
        workers: 1,
        max_chunks: Some(3),
        ..RunConfig::default()
    };
    let outcome = pipeline::run_chunked(&tower, dir.path(), &partial, &mut quiet).unwrap();
    assert!(!outcome.manifest.complete, "three of eight chunks is not a complete run");
    let resume = RunConfig {
        chunk_count: 8,
        workers: 1,
        ..RunConfig::default()
    };
    pipeline::run_chunked(&tower, dir.path(), &resume, &mut quiet).unwrap();
    let resumed = std::fs::read(dir.path().join("final.txt")).unwrap();
    assert_eq!(Some(resumed), reference, "resumed run must reproduce the bytes");
    pass(7, "chunk and restart determinism");
}

#[test]
fn criterion_08_constructions_verify() {
    let family = WindowFamily::new(
        [159u32, 165, 177]
            .into_iter()
            .map(|m| Window::new(BigInt::from(m), rat(0), frac(1, 10)).unwrap())
            .collect(),
    )
    .unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0BE);
    let mut verified = 0u32;
    let mut attempts = 0u32;
    while verified < 1000 {
        attempts += 1;
        assert!(attempts < 30_000, "window misses dominate: only {verified} constructions");
        let n = BigInt::from(rng.gen_range(100_000..=109_999) * 2 + 1);
        match pipeline::construct_with_fallback(&n, &family) {
            Ok(rep) => {
                assert_eq!(rep.roots().len(), 7);
                let total: BigInt = rep.roots().iter().map(|r| r * r * r).sum();
                assert_eq!(total, n, "cube sum mismatch");
                assert!(rep.roots().iter().all(|r| r >= &BigInt::from(0)));
                verified += 1;
            }
            Err(Error::WindowMiss { .. }) => {}
            Err(other) => panic!("construction failed structurally: {other}"),
        }
    }

    // Below 10^5 the dynamic-programming table can confirm every output.
    let table = min_cubes_table(100_000);
    let small = Window::new(BigInt::from(15), rat(0), frac(137, 1000)).unwrap();
    let mut confirmed = 0;
    for n in (133..=195u32).filter(|n| n % 2 == 1) {
        let n_big = BigInt::from(n);
        if let Ok(rep) = seven_cubes_from_window(&n_big, &small) {
            let total: BigInt = rep.roots().iter().map(|r| r * r * r).sum();
            assert_eq!(total, n_big);
            assert!(table[n as usize] <= 7, "table refutes {n} as a sum of seven cubes");
            confirmed += 1;
        }
    }
    assert!(confirmed > 0, "the small window must construct something");

    // The worked example.
    let window = Window::new(BigInt::from(15), rat(0), frac(1, 10)).unwrap();
    let rep = seven_cubes_from_window(&BigInt::from(203), &window).unwrap();
    let roots: Vec<i64> = rep.roots().iter().map(|r| r.try_into().unwrap()).collect();
    assert_eq!(roots, vec![5, 0, 3, 2, 3, 2, 2]);
    pass(8, "constructor soundness");
}

#[test]
fn criterion_09_identity_and_triangular_numbers() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1DE7);
    for _ in 0..10_000 {
        let pick = |rng: &mut ChaCha8Rng| BigInt::from(rng.gen_range(-1_000_000i64..=1_000_000));
        let (r, x, y, z) = (pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let one = BigInt::from(1);
        let cube = |v: BigInt| (&v) * (&v) * (&v);
        let lhs = cube(&r + &one + &x)
            + cube(&r - &x)
            + cube(&r + &one + &y)
            + cube(&r - &y)
            + cube(&r + &one + &z)
            + cube(&r - &z);
        let pairs = (&x * &x + &x) + (&y * &y + &y) + (&z * &z + &z);
        let rhs = (BigInt::from(6) * &r + BigInt::from(3)) * (&r * (&r + &one) + &one + pairs);
        assert_eq!(lhs, rhs);
    }

    for half in 0..=50_000u64 {
        let k = BigInt::from(2 * half);
        let (x, y, z) = three_triangular(&k).unwrap();
        assert!(x >= BigInt::from(0) && y >= BigInt::from(0) && z >= BigInt::from(0));
        let total = (&x * &x + &x) + (&y * &y + &y) + (&z * &z + &z);
        assert_eq!(total, k, "triangular decomposition of {k}");
    }
    pass(9, "construction identity and triangular numbers");
}

#[test]
fn criterion_10_band_audits() {
    let pool: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    let mut rng = ChaCha8Rng::seed_from_u64(0xBA2D);
    let mut seen: BTreeSet<(String, i64)> = BTreeSet::new();
    let mut audited = 0;
    let mut attempts = 0;
    'search: while audited < 20 {
        attempts += 1;
        assert!(attempts < 2000, "family generation stalled at {audited}");
        let mut primes: Vec<u64> = pool.to_vec();
        primes.shuffle(&mut rng);
        let master = product(&primes[..rng.gen_range(5..=6)]);
        if master < BigInt::from(100_000) || master > BigInt::from(1_500_000) {
            continue;
        }
        // Scan band scales until one captures at least two divisors with a
        // period large enough for the predictions to apply.
        let mut scales: Vec<i64> = (40..=160).collect();
        scales.shuffle(&mut rng);
        let found = scales.into_iter().find_map(|l| {
            let scale = rat(l);
            let lo = (frac(263, 100) * &scale).ceil().to_integer();
            let hi = (frac(292, 100) * &scale).floor().to_integer();
            let moduli = divisors_in_range(&master, &lo, &hi).unwrap();
            if moduli.len() < 2 {
                return None;
            }
            let family = WindowFamily::new(
                moduli
                    .into_iter()
                    .map(|m| Window::new(m, rat(0), frac(1, 10)).unwrap())
                    .collect(),
            )
            .unwrap();
            (big(family.period()) >= rat(2000) * &scale).then_some((family, scale, l))
        });
        let Some((family, scale, l)) = found else {
            continue 'search;
        };
        if !seen.insert((master.to_string(), l)) {
            continue;
        }

        let period = big(family.period());
        let bad = bad_set(&family, &rat(0), &period).unwrap();
        let mut predictions = bands::above_anchor_bands(family.period(), &scale).unwrap();
        predictions.extend(bands::below_anchor_bands(family.period(), &scale).unwrap());
        let mut exclusions = Vec::new();
        for q in 11u64..=25 {
            for a in 1..q {
                if a.gcd(&q) != 1 {
                    continue;
                }
                let fraction = Fraction::new(BigInt::from(a), BigInt::from(q)).unwrap();
                for (_, _, interval) in
                    bands::gap_band_candidates(&family, &fraction, &scale).unwrap()
                {
                    predictions.push(BandPrediction {
                        fraction: fraction.clone(),
                        direction: Direction::Below,
                        intervals: IntervalSet::normalize(vec![interval]),
                        scale: scale.clone(),
                    });
                }
                if let Some(x) = bands::gap_exclusion(&family, &fraction, &scale).unwrap() {
                    exclusions.push(x);
                }
            }
        }
        let report = bands::audit(&bad, &predictions, &exclusions);
        assert!(report.pass, "audit failed for period {}:\n{report}", family.period());
        audited += 1;
    }
    pass(10, "band and gap audits");
}

/// Full-scale reproduction of the first tower row: 16 windows over the
/// base period, 59,000 chunks. Declared budget is about 48 CPU-hours.
#[test]
#[ignore = "full-scale run, ~48 CPU-hours; required for a full validation"]
fn criterion_11_base_row_statistics() {
    let m0 = product(&[5, 11, 17, 23, 29, 41, 47, 53, 59, 71, 83, 89]);
    let lo = BigInt::from(265u64) * BigInt::from(10u64.pow(9));
    let hi = BigInt::from(290u64) * BigInt::from(10u64.pow(9));
    let divisors = divisors_in_range(&m0, &lo, &hi).unwrap();
    assert_eq!(divisors.len(), 16);
    let family = WindowFamily::new(
        divisors
            .into_iter()
            .map(|m| Window::new(m, rat(0), frac(1, 10)).unwrap())
            .collect(),
    )
    .unwrap();
    assert_eq!(family.period(), &m0);

    let workers = std::env::var("SEVENCUBES_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(1);
    let tower = Tower::new(family, Vec::new()).unwrap();
    let dir = tempfile::TempDir::new().unwrap();
    let config = RunConfig {
        chunk_count: 59_000,
        workers,
        stats_only: true,
        ..RunConfig::default()
    };
    let mut progress = |line: String| eprintln!("{line}");
    let outcome = pipeline::run_chunked(&tower, dir.path(), &config, &mut progress).unwrap();
    let level = &outcome.manifest.levels[0];
    assert_eq!(level.count, 23_458_002, "pre-fusion interval count");
    let expected_length = big(&"3653004977393763858".parse::<BigInt>().unwrap()) / rat(10);
    assert_eq!(level.length, expected_length, "exact total length");
    pass(11, "base row statistics");
}

#[test]
fn criterion_12_synthetic_certification() {
    let k2 = Enclosure::exact(big(&BigInt::from(10u64.pow(9))));
    let k1 = Enclosure::exact(big(&(BigInt::from(9u64) * BigInt::from(10u64.pow(8)))));
    let master = product(&[3, 5, 11, 17, 23, 29, 41, 47]);
    assert_eq!(master, BigInt::from(3_605_291_745u64));

    let candidates = divisors_in_range(&master, &BigInt::from(2400), &BigInt::from(3200)).unwrap();
    let moduli: Vec<BigInt> = candidates
        .into_iter()
        .filter(|m| check_modulus_structure(m).is_ok())
        .collect();
    assert_eq!(moduli, vec![BigInt::from(2805), BigInt::from(2829)]);

    let windows: Vec<Window> = moduli
        .iter()
        .map(|m| variable_window(m, &k1, &k2).unwrap())
        .collect();
    assert_eq!(windows[0].delta(), &frac(117, 1000));
    assert_eq!(windows[1].delta(), &frac(114, 1000));
    assert!(windows.iter().all(|w| w.eps() == &rat(0)));

    let plan = RangePlan {
        n: 0,
        k1,
        k2,
        kappa: None,
        family: WindowFamily::new(windows).unwrap(),
        mode: PlanMode::Variable,
    };
    plan.validate().unwrap();

    let dir = tempfile::TempDir::new().unwrap();
    let config = RunConfig {
        chunk_count: 4,
        workers: 2,
        ..RunConfig::default()
    };
    let mut quiet = |_: String| {};
    let outcome = pipeline::certify_run(&plan, dir.path(), &config, 4, &mut quiet).unwrap();
    let failure = match outcome {
        CertifyOutcome::Certified(cert) => {
            // A certificate would be acceptable too — but it must then
            // survive independent verification.
            cert.verify(true).unwrap();
            pass(12, "synthetic certification");
            return;
        }
        CertifyOutcome::Failed(failure) => failure,
    };
    assert!(
        failure.reason.contains("period"),
        "expected the structured too-small-period failure, got: {}",
        failure.reason
    );
    assert!(dir.path().join("report.txt").exists(), "failure report must be written");

    // Every uncovered interval a report lists must really be in the bad set.
    if let Some(report) = &failure.report {
        let period = big(plan.family.period());
        let bad = bad_set(&plan.family, &rat(0), &period).unwrap();
        for record in report.records.iter().filter(|r| !r.pass) {
            assert!(
                bad.covering_interval(record.interval.lo(), record.interval.hi()).is_some(),
                "reported uncovered interval is not in the bad set"
            );
        }
    }

    // The range is still served: sampled odd targets all decompose.
    let mut rng = ChaCha8Rng::seed_from_u64(0xCE27);
    let mut by_window = 0;
    let mut by_search = 0;
    for _ in 0..100 {
        let n = BigInt::from(rng.gen_range(450_000_000u64..=499_999_999) * 2 + 1);
        let rep = match pipeline::construct_with_fallback(&n, &plan.family) {
            Ok(rep) => {
                by_window += 1;
                rep
            }
            Err(Error::WindowMiss { .. }) => match seven_cubes_search(&n, 500_000).unwrap() {
                SearchOutcome::Found(rep) => {
                    by_search += 1;
                    rep
                }
                other => panic!("search could not settle {n}: {other:?}"),
            },
            Err(other) => panic!("construction failed structurally: {other}"),
        };
        let total: BigInt = rep.roots().iter().map(|r| r * r * r).sum();
        assert_eq!(total, n);
        assert!(rep.roots().len() <= 7);
        assert!(rep.roots().iter().all(|r| r >= &BigInt::from(0)));
    }
    assert_eq!(by_window + by_search, 100);
    assert!(by_window > 0, "the windows should serve at least some targets");
    pass(12, "synthetic certification");
}

/// The generators above must stay distinct per criterion; this guards the
/// seeds against accidental reuse.
#[test]
fn acceptance_seeds_are_distinct() {
    let seeds = [0x05ECu64, 0x70E5, 0xC0BE, 0x1DE7, 0xBA2D, 0xCE27];
    let unique: BTreeSet<u64> = seeds.iter().copied().collect();
    assert_eq!(unique.len(), seeds.len());
}
