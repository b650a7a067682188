//! Command-line driver: plan construction, chunked sieve runs, tower
//! extension, certification, seven-cube construction, the small-number
//! exception scan, band audits, and offline certificate verification.
//!
//! Machine-readable results go to standard output as `key=value` lines
//! (or a single result line for `construct` and `oracle`); progress and
//! diagnostics go to standard error. Exit codes: 0 success, 1 verified
//! negative (a criterion failure, a missed window, no admissible
//! extension), 2 input error, 3 internal-consistency error (including a
//! tampered certificate).

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use num_traits::One;

use sevencubes::bands::{self, BandPrediction, Direction};
use sevencubes::construct::{self, CubeRepresentation};
use sevencubes::criterion::{Certificate, Fraction};
use sevencubes::params::{self, PlanMode, RangePlan};
use sevencubes::pipeline::{self, CertifyOutcome, RunConfig, RunManifest};
use sevencubes::rational;
use sevencubes::sieve::{self, Window, WindowFamily};
use sevencubes::tower::Tower;
use sevencubes::{Enclosure, Error, IntervalSet, Result};

#[derive(Parser)]
#[command(name = "sevencubes", version, about = "Seven-cubes sieve, tower, and certification driver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a range plan: bounds, mode, and admissible windows.
    Plan(PlanArgs),
    /// Run the chunked sieve (and any recorded tower stages) for a plan.
    Sieve(SieveArgs),
    /// Plan the next tower extension and, unless told otherwise, run it.
    Tower(TowerArgs),
    /// Full certification loop: sieve, criterion, extension, certificate.
    Certify(CertifyArgs),
    /// Express an odd integer as a sum of seven non-negative cubes.
    Construct(ConstructArgs),
    /// Scan small integers for sums of at most seven positive cubes.
    Oracle(OracleArgs),
    /// Audit band predictions and gap exclusions against a fresh sieve.
    Audit(AuditArgs),
    /// Re-verify a persisted certificate offline.
    VerifyCert(VerifyCertArgs),
}

#[derive(Args)]
struct PlanArgs {
    /// Tower level index; range bounds follow from the level geometry.
    #[arg(long, conflicts_with = "exact_k")]
    n: Option<u64>,
    /// Exact range ceiling K2; the floor is then (9/10)·K2.
    #[arg(long = "exact-k")]
    exact_k: Option<String>,
    /// Window mode: "standard" (fixed 1/10 bands) or "variable".
    #[arg(long, default_value = "standard")]
    mode: String,
    /// Squarefree integer whose divisors are the candidate moduli.
    #[arg(long, conflicts_with = "moduli")]
    master: Option<String>,
    /// Comma-separated explicit candidate moduli.
    #[arg(long)]
    moduli: Option<String>,
    /// Scaling factor: a positive integer, or "auto" to search for one.
    #[arg(long)]
    kappa: Option<String>,
    /// Write the plan here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SieveArgs {
    /// Plan file produced by `plan`.
    #[arg(long)]
    plan: PathBuf,
    /// Run directory for chunk files, manifest, and the merged result.
    #[arg(long)]
    out: PathBuf,
    /// Number of equal-width chunks of the base period.
    #[arg(long, default_value_t = 1)]
    chunks: usize,
    /// Worker threads (default: SEVENCUBES_WORKERS, else 1).
    #[arg(long)]
    workers: Option<usize>,
    /// Record per-level statistics only; skip interval bodies and merge.
    #[arg(long)]
    stats_only: bool,
    /// Stop after this many chunks; the run stays resumable.
    #[arg(long)]
    max_chunks: Option<usize>,
    /// Abort if any chunk exceeds this many intervals at any level.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct TowerArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Run directory holding the stages recorded so far.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    chunks: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Print the growth step without running it.
    #[arg(long)]
    dry_run: bool,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    chunks: usize,
    #[arg(long)]
    workers: Option<usize>,
    /// Cap on tower stages added before giving up.
    #[arg(long, default_value_t = 4)]
    max_stages: usize,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct ConstructArgs {
    /// The integer to express as seven cubes.
    #[arg(long)]
    n: String,
    /// Use the single window (modulus, band (0, 1/10)).
    #[arg(long, conflicts_with = "plan")]
    modulus: Option<String>,
    /// Use a plan's windows, falling back across them on band misses.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// Scan every integer up to this bound (at least 455).
    #[arg(long)]
    limit: usize,
}

#[derive(Args)]
struct AuditArgs {
    /// Squarefree integer whose divisors in the band range form the family.
    #[arg(long)]
    master: String,
    /// Band scale L; moduli must lie in [263·L/100, 292·L/100].
    #[arg(long)]
    scale: String,
    /// Largest anchor denominator for gap bands and exclusions.
    #[arg(long, default_value_t = 20)]
    qmax: u64,
}

#[derive(Args)]
struct VerifyCertArgs {
    /// Certificate file to check.
    #[arg(long)]
    cert: PathBuf,
    /// Also re-sieve the recorded family and compare interval lists.
    #[arg(long)]
    resieve: bool,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            process::exit(exit_code(&e));
        }
    }
}

/// Exit-code policy: structured negative outcomes are 1, bad input is 2,
/// broken invariants are 3.
fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Parse(_) | Error::Io(_) => 2,
        Error::Internal(_) | Error::Refinement { .. } => 3,
        Error::NoScalingFactor { .. } | Error::PeriodTooSmall { .. } | Error::WindowMiss { .. } => 1,
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Sieve(args) => cmd_sieve(args),
        Command::Tower(args) => cmd_tower(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Construct(args) => cmd_construct(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Audit(args) => cmd_audit(args),
        Command::VerifyCert(args) => cmd_verify_cert(args),
    }
}

fn parse_bigint(text: &str) -> Result<BigInt> {
    text.trim()
        .parse::<BigInt>()
        .map_err(|e| Error::parse(format!("bad integer {text:?}: {e}")))
}

fn resolve_workers(flag: Option<usize>) -> Result<usize> {
    let value = match flag {
        Some(w) => w,
        None => match std::env::var("SEVENCUBES_WORKERS") {
            Ok(v) => v.trim().parse::<usize>().map_err(|_| {
                Error::domain(format!("SEVENCUBES_WORKERS must be a positive integer, got {v:?}"))
            })?,
            Err(_) => 1,
        },
    };
    if value == 0 {
        return Err(Error::domain("worker count must be at least 1"));
    }
    Ok(value)
}

fn read_plan(path: &Path) -> Result<RangePlan> {
    let file = fs::File::open(path)?;
    let plan = RangePlan::read_text(&mut io::BufReader::new(file))?;
    plan.validate()?;
    Ok(plan)
}

/// Tower stages recorded by an earlier run in this directory, when its
/// base family matches; a mismatched directory is left for `run_chunked`
/// to refuse with a precise message.
fn adopt_stages(dir: &Path, family: &WindowFamily) -> Result<Vec<Vec<Window>>> {
    let path = dir.join("manifest.txt");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let manifest = RunManifest::read_text(&fs::read_to_string(&path)?)?;
    if manifest.base.as_slice() == family.windows() {
        Ok(manifest.stages)
    } else {
        Ok(Vec::new())
    }
}

fn progress_to_stderr() -> impl FnMut(String) {
    |line: String| eprintln!("{line}")
}

fn cmd_plan(args: PlanArgs) -> Result<i32> {
    let mode = PlanMode::parse(&args.mode)?;
    let (n, k1, k2) = match (args.n, &args.exact_k) {
        (Some(n), None) => {
            let (k1, k2) = params::level_bounds(n)?;
            (n, k1, k2)
        }
        (None, Some(k)) => {
            let k2 = Enclosure::exact(rational::big(&parse_bigint(k)?));
            let k1 = k2.scale(&rational::frac(9, 10));
            (0, k1, k2)
        }
        _ => return Err(Error::domain("provide exactly one of --n or --exact-k")),
    };

    let candidates: Vec<BigInt> = match (&args.master, &args.moduli) {
        (Some(master), None) => {
            let master = parse_bigint(master)?;
            params::divisors_in_range(&master, &BigInt::one(), &master)?
        }
        (None, Some(list)) => list
            .split(',')
            .map(parse_bigint)
            .collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::domain("provide exactly one of --master or --moduli")),
    };
    let explicit = args.moduli.is_some();

    let mut windows = Vec::new();
    let mut rejected = 0usize;
    match mode {
        PlanMode::Standard => {
            let selection = params::standard_windows(&k2, &candidates)?;
            windows = selection.accepted;
            rejected = selection.rejected.len();
            if explicit {
                for (m, reason) in &selection.rejected {
                    eprintln!("rejected modulus {m}: {reason}");
                }
            }
        }
        PlanMode::Variable => {
            for m in &candidates {
                match params::variable_window(m, &k1, &k2) {
                    Ok(w) => windows.push(w),
                    Err(e) => {
                        rejected += 1;
                        if explicit {
                            eprintln!("rejected modulus {m}: {e}");
                        }
                    }
                }
            }
        }
    }
    eprintln!("plan: accepted {} of {} candidate moduli", windows.len(), windows.len() + rejected);
    if windows.is_empty() {
        eprintln!("no admissible windows among the candidates");
        return Ok(1);
    }

    let kappa = match args.kappa.as_deref() {
        None => None,
        Some("auto") => {
            let kappa = params::find_kappa(&k2)?;
            eprintln!("scaling factor: {kappa}");
            Some(kappa)
        }
        Some(text) => {
            let kappa = parse_bigint(text)?;
            params::verify_scaling_factor(&kappa, &k2)?;
            Some(kappa)
        }
    };

    let plan = RangePlan {
        n,
        k1,
        k2,
        kappa,
        family: WindowFamily::new(windows)?,
        mode,
    };
    plan.validate()?;
    for warning in params::plan_quality(&plan) {
        eprintln!("warning: {warning}");
    }
    eprintln!(
        "plan: {} windows, period {}",
        plan.family.windows().len(),
        plan.family.period()
    );

    match &args.out {
        Some(path) => {
            let mut out = io::BufWriter::new(fs::File::create(path)?);
            plan.write_text(&mut out)?;
            out.flush()?;
            eprintln!("plan written to {}", path.display());
        }
        None => {
            let mut out = io::stdout().lock();
            plan.write_text(&mut out)?;
        }
    }
    Ok(0)
}

fn cmd_sieve(args: SieveArgs) -> Result<i32> {
    let plan = read_plan(&args.plan)?;
    let stages = adopt_stages(&args.out, &plan.family)?;
    let tower = Tower::new(plan.family.clone(), stages)?;
    let config = RunConfig {
        chunk_count: args.chunks,
        workers: resolve_workers(args.workers)?,
        stats_only: args.stats_only,
        max_chunks: args.max_chunks,
        interval_budget: args.budget,
    };
    let outcome = pipeline::run_chunked(&tower, &args.out, &config, &mut progress_to_stderr())?;
    let mut out = io::stdout().lock();
    outcome.manifest.write_text(&mut out)?;
    Ok(0)
}

fn cmd_tower(args: TowerArgs) -> Result<i32> {
    let plan = read_plan(&args.plan)?;
    let mut stages = adopt_stages(&args.out, &plan.family)?;
    let tower = Tower::new(plan.family.clone(), stages.clone())?;
    let family = tower.family_at(stages.len())?;

    let step = params::tower_growth_plan(&family, &plan.k2, plan.mode)?;
    let windows = pipeline::growth_windows(&plan, &step)?;
    let moduli: Vec<String> = windows.iter().map(|w| w.modulus().to_string()).collect();
    let mut out = io::stdout().lock();
    writeln!(out, "prime={}", step.prime)?;
    writeln!(out, "target={}", step.target)?;
    writeln!(out, "found={}", step.found)?;
    writeln!(out, "admissible={}", windows.len())?;
    writeln!(out, "moduli={}", moduli.join(","))?;
    if windows.is_empty() {
        eprintln!(
            "no admissible moduli for prime {}: the tower cannot be extended here",
            step.prime
        );
        return Ok(1);
    }
    if args.dry_run {
        return Ok(0);
    }

    stages.push(windows);
    let extended = Tower::new(plan.family.clone(), stages)?;
    let config = RunConfig {
        chunk_count: args.chunks,
        workers: resolve_workers(args.workers)?,
        stats_only: false,
        max_chunks: None,
        interval_budget: args.budget,
    };
    let outcome = pipeline::run_chunked(&extended, &args.out, &config, &mut progress_to_stderr())?;
    outcome.manifest.write_text(&mut out)?;
    Ok(0)
}

fn cmd_certify(args: CertifyArgs) -> Result<i32> {
    let plan = read_plan(&args.plan)?;
    let config = RunConfig {
        chunk_count: args.chunks,
        workers: resolve_workers(args.workers)?,
        stats_only: false,
        max_chunks: None,
        interval_budget: args.budget,
    };
    let outcome = pipeline::certify_run(
        &plan,
        &args.out,
        &config,
        args.max_stages,
        &mut progress_to_stderr(),
    )?;
    let mut out = io::stdout().lock();
    match outcome {
        CertifyOutcome::Certified(cert) => {
            writeln!(out, "verdict=pass")?;
            writeln!(out, "period={}", cert.report.big_m)?;
            writeln!(out, "qmax={}", cert.report.qmax)?;
            writeln!(out, "fractions={}", cert.report.fractions.len())?;
            writeln!(out, "intervals={}", cert.report.records.len())?;
            writeln!(out, "certificate={}", args.out.join("certificate.txt").display())?;
            Ok(0)
        }
        CertifyOutcome::Failed(failure) => {
            writeln!(out, "verdict=fail")?;
            writeln!(out, "stages_tried={}", failure.stages_tried)?;
            writeln!(out, "reason={}", failure.reason)?;
            if let Some(report) = &failure.report {
                let uncovered = report.records.iter().filter(|r| !r.pass).count();
                writeln!(out, "uncovered={uncovered}")?;
            }
            writeln!(out, "report={}", args.out.join("report.txt").display())?;
            Ok(1)
        }
    }
}

/// Render a representation with superscript cubes: `203 = 5³+0³+…`.
fn cube_sum_line(rep: &CubeRepresentation) -> String {
    let cubes: Vec<String> = rep.roots().iter().map(|r| format!("{r}³")).collect();
    format!("{} = {}", rep.target(), cubes.join("+"))
}

fn cmd_construct(args: ConstructArgs) -> Result<i32> {
    let n = parse_bigint(&args.n)?;
    let rep = match (&args.modulus, &args.plan) {
        (Some(m), None) => {
            let w = Window::new(parse_bigint(m)?, rational::rat(0), rational::frac(1, 10))?;
            construct::seven_cubes_from_window(&n, &w)?
        }
        (None, Some(path)) => {
            let plan = read_plan(path)?;
            pipeline::construct_with_fallback(&n, &plan.family)?
        }
        _ => return Err(Error::domain("provide exactly one of --modulus or --plan")),
    };
    println!("{}", cube_sum_line(&rep));
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<i32> {
    let exceptions = construct::exceptions_scan(args.limit)?;
    let line: Vec<String> = exceptions.iter().map(|e| e.to_string()).collect();
    println!("{}", line.join(", "));
    Ok(0)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn cmd_audit(args: AuditArgs) -> Result<i32> {
    let master = parse_bigint(&args.master)?;
    let scale = rational::parse_rational(&args.scale)?;
    let lo = (rational::frac(263, 100) * &scale).ceil().to_integer();
    let hi = (rational::frac(292, 100) * &scale).floor().to_integer();
    let moduli = params::divisors_in_range(&master, &lo, &hi)?;
    if moduli.is_empty() {
        return Err(Error::domain(format!(
            "master {master} has no divisors in the band range [{lo}, {hi}]"
        )));
    }
    let windows = moduli
        .into_iter()
        .map(|m| Window::new(m, rational::rat(0), rational::frac(1, 10)))
        .collect::<Result<Vec<_>>>()?;
    let family = WindowFamily::new(windows)?;
    eprintln!(
        "audit: {} windows, period {}, scale {}",
        family.windows().len(),
        family.period(),
        rational::format_rational(&scale)
    );

    let period = rational::big(family.period());
    let bad = sieve::bad_set(&family, &rational::rat(0), &period)?;
    eprintln!("audit: sieved {} bad intervals", bad.count());

    let mut predictions = bands::above_anchor_bands(family.period(), &scale)?;
    predictions.extend(bands::below_anchor_bands(family.period(), &scale)?);
    let mut exclusions = Vec::new();
    for q in 11..=args.qmax {
        for a in 1..q {
            if gcd(a, q) != 1 {
                continue;
            }
            let fraction = Fraction::new(BigInt::from(a), BigInt::from(q))?;
            for (_, _, interval) in bands::gap_band_candidates(&family, &fraction, &scale)? {
                predictions.push(BandPrediction {
                    fraction: fraction.clone(),
                    direction: Direction::Below,
                    intervals: IntervalSet::normalize(vec![interval]),
                    scale: scale.clone(),
                });
            }
            if let Some(exclusion) = bands::gap_exclusion(&family, &fraction, &scale)? {
                exclusions.push(exclusion);
            }
        }
    }

    let report = bands::audit(&bad, &predictions, &exclusions);
    print!("{report}");
    Ok(if report.pass { 0 } else { 1 })
}

fn cmd_verify_cert(args: VerifyCertArgs) -> Result<i32> {
    let file = fs::File::open(&args.cert)?;
    let cert = match Certificate::read_text(&mut io::BufReader::new(file)) {
        Ok(cert) => cert,
        Err(e @ Error::Io(_)) => return Err(e),
        Err(e) => {
            eprintln!("certificate rejected: {e}");
            return Ok(3);
        }
    };
    if let Err(e) = cert.verify(args.resieve) {
        eprintln!("certificate inconsistent: {e}");
        return Ok(3);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "verdict={}", if cert.report.pass { "pass" } else { "fail" })?;
    writeln!(out, "period={}", cert.report.big_m)?;
    writeln!(out, "qmax={}", cert.report.qmax)?;
    writeln!(out, "windows={}", cert.windows.len())?;
    writeln!(out, "intervals={}", cert.report.records.len())?;
    Ok(if cert.report.pass { 0 } else { 1 })
}
