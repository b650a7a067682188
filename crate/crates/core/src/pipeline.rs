//! Chunked, resumable runs: carving a period into equal subintervals,
//! sieving and lifting each chunk independently across worker threads,
//! persisting per-chunk results with checksums, and merging everything
//! back into one canonical bad set.
//!
//! A run lives in a directory: a `manifest.txt` recording the
//! configuration and, once complete, the per-level statistics; one
//! `chunk-NNNNNN.txt` per subinterval; and, for runs that keep interval
//! bodies, a merged `final.txt`. Every file is written atomically
//! (write to a temporary name, then rename) and carries a SHA-256 line
//! over its contents, so an interrupted run leaves either a valid file or
//! none, and a corrupted file is detected and re-queued rather than
//! trusted.
//!
//! Chunk `k` of `C` covers `[k·M/C, (k+1)·M/C)` of the base period. Its
//! result is the base family's bad set there, lifted level by level
//! through the tower's added windows; at higher levels the chunk's
//! intervals are scattered across the enlarged period as the preimage of
//! its base interval. Merging is therefore boundary fusion for a bare
//! base run and a global sorted fuse for lifted runs. The merged output
//! is canonical, so it is byte-identical however many chunks or workers
//! produced it.
//!
//! Certification drives runs in a loop: sieve, test the covering
//! criterion, and on failure grow the tower with the next admissible
//! prime's moduli and re-run — completed chunks are only extended, never
//! recomputed. The loop ends with a certificate or a structured failure
//! naming what remained uncovered.

use std::collections::VecDeque;
use std::fmt::Write as FmtWrite;
use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use sha2::{Digest, Sha256};

use crate::construct::{self, CubeRepresentation};
use crate::criterion::{self, Certificate, CriterionReport};
use crate::error::{Error, Result};
use crate::intervals::{write_interval_file, IntervalSet};
use crate::params::{self, PlanMode, RangePlan};
use crate::rational::{self, Rational};
use crate::sieve::{self, Window, WindowFamily};
use crate::tower::{lift_once, Tower};

/// One equal-width subinterval of the base period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkSpec {
    pub index: usize,
    pub lo: Rational,
    pub hi: Rational,
}

/// Partition `[0, big_m)` into `count` chunks of width exactly `big_m/count`.
pub fn chunk_specs(big_m: &BigInt, count: usize) -> Result<Vec<ChunkSpec>> {
    if count == 0 {
        return Err(Error::domain("chunk count must be at least 1"));
    }
    if !big_m.is_positive() {
        return Err(Error::domain(format!("period must be positive, got {big_m}")));
    }
    let m = rational::big(big_m);
    let c = rational::big(&BigInt::from(count));
    Ok((0..count)
        .map(|k| ChunkSpec {
            index: k,
            lo: &m * rational::big(&BigInt::from(k)) / &c,
            hi: &m * rational::big(&BigInt::from(k + 1)) / &c,
        })
        .collect())
}

/// Knobs for one `run_chunked` invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chunk_count: usize,
    pub workers: usize,
    /// Record per-level counts and lengths only; chunk files carry no
    /// interval bodies and no merged set is produced.
    pub stats_only: bool,
    /// Process at most this many pending chunks, then stop (resumable).
    pub max_chunks: Option<usize>,
    /// Abort if any chunk's interval count exceeds this at any level.
    pub interval_budget: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            chunk_count: 1,
            workers: 1,
            stats_only: false,
            max_chunks: None,
            interval_budget: None,
        }
    }
}

/// Aggregated pre-fusion statistics for one tower level: the sum of
/// per-chunk interval counts (boundary artifacts included) and the exact
/// total length, which fusion cannot change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelStats {
    pub count: u64,
    pub length: Rational,
}

/// The persistent record of a run: its configuration, per-chunk
/// completion, and — once every chunk is done — per-level statistics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunManifest {
    pub period: BigInt,
    pub chunk_count: usize,
    pub stats_only: bool,
    pub workers: usize,
    pub interval_budget: Option<u64>,
    pub base: Vec<Window>,
    pub stages: Vec<Vec<Window>>,
    pub done: Vec<bool>,
    pub levels: Vec<LevelStats>,
    pub final_count: Option<u64>,
    pub final_fused: Option<u64>,
    pub complete: bool,
}

fn family_text(windows: &[Window]) -> String {
    windows
        .iter()
        .map(|w| {
            format!(
                "{}:{}:{}",
                w.modulus(),
                rational::format_rational(w.eps()),
                rational::format_rational(w.delta())
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_family_text(text: &str) -> Result<Vec<Window>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|item| {
            let mut parts = item.split(':');
            let mut field = || {
                parts
                    .next()
                    .ok_or_else(|| Error::parse(format!("malformed window {item:?}")))
            };
            let m = field()?
                .parse::<BigInt>()
                .map_err(|e| Error::parse(format!("bad modulus in {item:?}: {e}")))?;
            let eps = rational::parse_rational(field()?)?;
            let delta = rational::parse_rational(field()?)?;
            Window::new(m, eps, delta)
        })
        .collect()
}

/// Digest tying chunk files to the run configuration that produced them:
/// base period and family, chunking, and the stage prefix in force.
fn config_digest(period: &BigInt, chunk_count: usize, base: &[Window], stages: &[Vec<Window>]) -> String {
    let mut h = Sha256::new();
    h.update(format!("period={period}\n"));
    h.update(format!("chunks={chunk_count}\n"));
    h.update(format!("base={}\n", family_text(base)));
    for stage in stages {
        h.update(format!("stage={}\n", family_text(stage)));
    }
    format!("{:x}", h.finalize())
}

/// Write a file atomically: fill a sibling temporary, then rename over.
fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn IoWrite) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
        fill(&mut out)?;
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl RunManifest {
    pub fn write_text(&self, out: &mut dyn IoWrite) -> Result<()> {
        writeln!(out, "version=1")?;
        writeln!(out, "period={}", self.period)?;
        writeln!(out, "chunks={}", self.chunk_count)?;
        writeln!(out, "stats_only={}", u8::from(self.stats_only))?;
        writeln!(out, "workers={}", self.workers)?;
        match self.interval_budget {
            Some(b) => writeln!(out, "budget={b}")?,
            None => writeln!(out, "budget=-")?,
        }
        writeln!(out, "base={}", family_text(&self.base))?;
        writeln!(out, "stages={}", self.stages.len())?;
        for (i, stage) in self.stages.iter().enumerate() {
            writeln!(out, "stage.{i}={}", family_text(stage))?;
        }
        let bitmap: String = self.done.iter().map(|&d| if d { '1' } else { '0' }).collect();
        writeln!(out, "done={bitmap}")?;
        writeln!(out, "complete={}", u8::from(self.complete))?;
        for (i, level) in self.levels.iter().enumerate() {
            writeln!(
                out,
                "level.{i}={} {}",
                level.count,
                rational::format_rational(&level.length)
            )?;
        }
        if let (Some(c), Some(f)) = (self.final_count, self.final_fused) {
            writeln!(out, "final={c} {f}")?;
        }
        Ok(())
    }

    pub fn read_text(text: &str) -> Result<RunManifest> {
        let mut lines = text.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::parse(format!("manifest missing {key}")))?;
            line.strip_prefix(&format!("{key}="))
                .map(str::to_string)
                .ok_or_else(|| Error::parse(format!("manifest expected {key}=, got {line:?}")))
        };
        let version = next("version")?;
        if version != "1" {
            return Err(Error::parse(format!("unsupported manifest version {version}")));
        }
        let period = next("period")?
            .parse::<BigInt>()
            .map_err(|e| Error::parse(format!("bad period: {e}")))?;
        let chunk_count = next("chunks")?
            .parse::<usize>()
            .map_err(|e| Error::parse(format!("bad chunk count: {e}")))?;
        let stats_only = next("stats_only")? == "1";
        let workers = next("workers")?
            .parse::<usize>()
            .map_err(|e| Error::parse(format!("bad worker count: {e}")))?;
        let budget_text = next("budget")?;
        let interval_budget = match budget_text.as_str() {
            "-" => None,
            b => Some(b.parse::<u64>().map_err(|e| Error::parse(format!("bad budget: {e}")))?),
        };
        let base = parse_family_text(&next("base")?)?;
        let stage_count = next("stages")?
            .parse::<usize>()
            .map_err(|e| Error::parse(format!("bad stage count: {e}")))?;
        let mut stages = Vec::with_capacity(stage_count);
        for i in 0..stage_count {
            stages.push(parse_family_text(&next(&format!("stage.{i}"))?)?);
        }
        let bitmap = next("done")?;
        if bitmap.len() != chunk_count || bitmap.chars().any(|c| c != '0' && c != '1') {
            return Err(Error::parse("manifest done bitmap does not match chunk count"));
        }
        let done = bitmap.chars().map(|c| c == '1').collect();
        let complete = next("complete")? == "1";
        let mut levels = Vec::new();
        let mut final_count = None;
        let mut final_fused = None;
        for line in lines {
            if let Some(rest) = line.strip_prefix(&format!("level.{}=", levels.len())) {
                let mut parts = rest.split_whitespace();
                let count = parts
                    .next()
                    .and_then(|t| t.parse::<u64>().ok())
                    .ok_or_else(|| Error::parse(format!("bad level line {line:?}")))?;
                let length = rational::parse_rational(
                    parts
                        .next()
                        .ok_or_else(|| Error::parse(format!("bad level line {line:?}")))?,
                )?;
                levels.push(LevelStats { count, length });
            } else if let Some(rest) = line.strip_prefix("final=") {
                let mut parts = rest.split_whitespace();
                let mut field = |name: &str| {
                    parts
                        .next()
                        .and_then(|t| t.parse::<u64>().ok())
                        .ok_or_else(|| Error::parse(format!("bad final {name} in {line:?}")))
                };
                final_count = Some(field("count")?);
                final_fused = Some(field("fused")?);
            } else {
                return Err(Error::parse(format!("unexpected manifest line {line:?}")));
            }
        }
        Ok(RunManifest {
            period,
            chunk_count,
            stats_only,
            workers,
            interval_budget,
            base,
            stages,
            done,
            levels,
            final_count,
            final_fused,
            complete,
        })
    }
}

fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.txt")
}

fn chunk_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("chunk-{index:06}.txt"))
}

fn final_path(dir: &Path) -> PathBuf {
    dir.join("final.txt")
}

/// Parsed chunk result file.
struct ChunkFile {
    index: usize,
    lo: Rational,
    hi: Rational,
    config: String,
    /// Per-level `(interval count, exact length)`, level 0 first.
    levels: Vec<(u64, Rational)>,
    body_full: bool,
    /// Final-level intervals; present exactly when `body_full`.
    set: Option<IntervalSet>,
}

fn write_chunk_file(path: &Path, data: &ChunkFile) -> Result<()> {
    let mut body = String::new();
    let _ = writeln!(body, "#chunk={}", data.index);
    let _ = writeln!(
        body,
        "#range={}..{}",
        rational::format_rational(&data.lo),
        rational::format_rational(&data.hi)
    );
    let _ = writeln!(body, "#config={}", data.config);
    let _ = writeln!(body, "#levels={}", data.levels.len());
    for (i, (count, length)) in data.levels.iter().enumerate() {
        let _ = writeln!(body, "#level={i} {count} {}", rational::format_rational(length));
    }
    let _ = writeln!(body, "#body={}", if data.body_full { "full" } else { "stats" });
    if data.body_full {
        let set = data.set.as_ref().expect("full body carries its set");
        for iv in set.intervals() {
            let _ = writeln!(
                body,
                "{}\t{}",
                rational::format_rational(iv.lo()),
                rational::format_rational(iv.hi())
            );
        }
    }
    write_atomic(path, |out| {
        out.write_all(body.as_bytes())?;
        let digest = Sha256::digest(body.as_bytes());
        writeln!(out, "#sha256={digest:x}")?;
        Ok(())
    })
}

fn parse_chunk_file(path: &Path) -> Result<ChunkFile> {
    let text = fs::read_to_string(path)?;
    let mut body = String::new();
    let mut checksum_ok = false;
    let mut lines: Vec<&str> = Vec::new();
    for line in text.lines() {
        if let Some(recorded) = line.strip_prefix("#sha256=") {
            let digest = format!("{:x}", Sha256::digest(body.as_bytes()));
            if recorded.trim() != digest {
                return Err(Error::internal(format!(
                    "chunk file {} checksum mismatch",
                    path.display()
                )));
            }
            checksum_ok = true;
            break;
        }
        body.push_str(line);
        body.push('\n');
        lines.push(line);
    }
    if !checksum_ok {
        return Err(Error::parse(format!("chunk file {} has no checksum", path.display())));
    }
    let mut it = lines.into_iter();
    let mut header = |key: &str| -> Result<String> {
        let line = it
            .next()
            .ok_or_else(|| Error::parse(format!("chunk file missing {key}")))?;
        line.strip_prefix(&format!("#{key}="))
            .map(str::to_string)
            .ok_or_else(|| Error::parse(format!("chunk file expected #{key}=, got {line:?}")))
    };
    let index = header("chunk")?
        .parse::<usize>()
        .map_err(|e| Error::parse(format!("bad chunk index: {e}")))?;
    let range_text = header("range")?;
    let (lo_text, hi_text) = range_text
        .split_once("..")
        .ok_or_else(|| Error::parse(format!("bad chunk range {range_text:?}")))?;
    let lo = rational::parse_rational(lo_text)?;
    let hi = rational::parse_rational(hi_text)?;
    let config = header("config")?;
    let level_count = header("levels")?
        .parse::<usize>()
        .map_err(|e| Error::parse(format!("bad level count: {e}")))?;
    let mut levels = Vec::with_capacity(level_count);
    for i in 0..level_count {
        let line = header("level")?;
        let mut parts = line.split_whitespace();
        let idx = parts.next().and_then(|t| t.parse::<usize>().ok());
        if idx != Some(i) {
            return Err(Error::parse(format!("chunk level lines out of order at {i}")));
        }
        let count = parts
            .next()
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| Error::parse("bad level count field"))?;
        let length = rational::parse_rational(
            parts.next().ok_or_else(|| Error::parse("bad level length field"))?,
        )?;
        levels.push((count, length));
    }
    let body_full = match header("body")?.as_str() {
        "full" => true,
        "stats" => false,
        other => return Err(Error::parse(format!("unknown chunk body mode {other:?}"))),
    };
    let set = if body_full {
        let mut items = Vec::new();
        for line in it {
            let (a, b) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(format!("bad interval line {line:?}")))?;
            items.push(crate::intervals::Interval::new(
                rational::parse_rational(a)?,
                rational::parse_rational(b)?,
            )?);
        }
        let set = IntervalSet::from_canonical(items)?;
        let (count, length) = levels.last().ok_or_else(|| Error::parse("chunk has no levels"))?;
        if set.count() as u64 != *count || set.total_length() != *length {
            return Err(Error::internal(format!(
                "chunk file {} body contradicts its recorded statistics",
                path.display()
            )));
        }
        Some(set)
    } else {
        if it.next().is_some() {
            return Err(Error::parse("stats-only chunk file has body lines"));
        }
        None
    };
    Ok(ChunkFile { index, lo, hi, config, levels, body_full, set })
}

/// Precomputed per-level data shared by all workers.
struct RunCtx {
    base: WindowFamily,
    /// Period at each level, `periods[0]` being the base period.
    periods: Vec<BigInt>,
    /// Families of the windows added at each stage.
    added: Vec<WindowFamily>,
    /// Period growth factor at each stage.
    lifts: Vec<BigInt>,
    digests: Vec<String>,
    stats_only: bool,
    budget: Option<u64>,
}

fn build_ctx(tower: &Tower, chunk_count: usize, config: &RunConfig) -> Result<RunCtx> {
    let stage_count = tower.stages().len();
    let mut periods = Vec::with_capacity(stage_count + 1);
    for level in 0..=stage_count {
        periods.push(tower.family_at(level)?.period().clone());
    }
    let mut added = Vec::with_capacity(stage_count);
    let mut lifts = Vec::with_capacity(stage_count);
    for (i, stage) in tower.stages().iter().enumerate() {
        added.push(WindowFamily::new(stage.clone())?);
        let lift = &periods[i + 1] / &periods[i];
        if &lift * &periods[i] != periods[i + 1] {
            return Err(Error::internal("stage period does not divide the next level"));
        }
        lifts.push(lift);
    }
    let digests = (0..=stage_count)
        .map(|j| config_digest(&periods[0], chunk_count, tower.base().windows(), &tower.stages()[..j]))
        .collect();
    Ok(RunCtx {
        base: tower.base().clone(),
        periods,
        added,
        lifts,
        digests,
        stats_only: config.stats_only,
        budget: config.interval_budget,
    })
}

/// How a scanned chunk file relates to the current configuration.
enum ChunkState {
    Done,
    /// Valid result for a strict stage prefix: holds that many levels and
    /// a full body; extension can lift it instead of recomputing.
    Extend(usize),
    Pending,
}

fn classify_chunk(ctx: &RunCtx, spec: &ChunkSpec, file: &ChunkFile) -> Result<ChunkState> {
    let target_levels = ctx.periods.len();
    if file.levels.len() > target_levels {
        return Err(Error::domain(format!(
            "chunk {} was produced by a taller tower ({} levels, expected at most {}); \
             refusing to overwrite — use a fresh run directory",
            file.index,
            file.levels.len(),
            target_levels
        )));
    }
    if file.index != spec.index || file.lo != spec.lo || file.hi != spec.hi || file.levels.is_empty() {
        return Ok(ChunkState::Pending);
    }
    if file.config != ctx.digests[file.levels.len() - 1] {
        return Ok(ChunkState::Pending);
    }
    if file.levels.len() == target_levels {
        if ctx.stats_only || file.body_full {
            Ok(ChunkState::Done)
        } else {
            Ok(ChunkState::Pending)
        }
    } else if file.body_full {
        Ok(ChunkState::Extend(file.levels.len()))
    } else {
        Ok(ChunkState::Pending)
    }
}

/// Sieve (or resume) one chunk and lift it to the top level. Returns the
/// per-level statistics and the final-level set.
fn compute_chunk(
    ctx: &RunCtx,
    spec: &ChunkSpec,
    resume: Option<(Vec<(u64, Rational)>, IntervalSet)>,
) -> Result<(Vec<(u64, Rational)>, IntervalSet)> {
    let over_budget = |n: usize| -> Result<()> {
        match ctx.budget {
            Some(b) if (n as u64) > b => Err(Error::domain(format!(
                "chunk {} exceeded the interval budget of {b}",
                spec.index
            ))),
            _ => Ok(()),
        }
    };
    let (mut stats, mut set) = match resume {
        Some((stats, set)) => (stats, set),
        None => {
            let mut items = Vec::new();
            sieve::sieve_streaming(&ctx.base, &spec.lo, &spec.hi, &mut |iv| {
                items.push(iv);
                over_budget(items.len())
            })?;
            let set = IntervalSet::from_canonical(items)?;
            (vec![(set.count() as u64, set.total_length())], set)
        }
    };
    for j in (stats.len() - 1)..ctx.added.len() {
        let (next, _) = lift_once(&set, &ctx.periods[j], &ctx.added[j], &ctx.lifts[j])?;
        over_budget(next.count())?;
        stats.push((next.count() as u64, next.total_length()));
        set = next;
    }
    Ok((stats, set))
}

/// Everything a finished (or capped) invocation reports back.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    /// The merged bad set at the top level; absent for stats-only runs and
    /// for invocations stopped by `max_chunks` before completion.
    pub final_set: Option<IntervalSet>,
    /// Chunks processed by this invocation (not counting reused ones).
    pub processed: usize,
}

/// Check a pre-existing manifest against the requested configuration.
fn check_manifest_compat(existing: &RunManifest, ctx: &RunCtx, tower: &Tower, chunk_count: usize) -> Result<()> {
    if existing.period != ctx.periods[0]
        || existing.chunk_count != chunk_count
        || existing.base != tower.base().windows()
    {
        return Err(Error::domain(
            "run directory was initialised with a different period, chunking, or base family; \
             use a fresh directory",
        ));
    }
    if existing.stages.len() > tower.stages().len()
        || existing.stages[..] != tower.stages()[..existing.stages.len()]
    {
        return Err(Error::domain(
            "run directory records a tower that is not a prefix of the requested one; \
             use a fresh directory",
        ));
    }
    Ok(())
}

/// Execute a chunked run in `dir`: sieve every pending chunk of the base
/// period across `config.workers` threads, lift each through the tower,
/// persist per-chunk results, and — when all chunks are done — merge them
/// into the canonical top-level bad set.
///
/// The directory is the unit of resumability: valid chunk files are
/// reused, files for a stage prefix are extended in place, and corrupted
/// or stale files are re-queued. A directory initialised with a different
/// configuration is refused.
pub fn run_chunked(
    tower: &Tower,
    dir: &Path,
    config: &RunConfig,
    progress: &mut dyn FnMut(String),
) -> Result<RunOutcome> {
    if config.workers == 0 {
        return Err(Error::domain("worker count must be at least 1"));
    }
    fs::create_dir_all(dir)?;
    let ctx = build_ctx(tower, config.chunk_count, config)?;
    let specs = chunk_specs(&ctx.periods[0], config.chunk_count)?;

    let mpath = manifest_path(dir);
    if mpath.exists() {
        let existing = RunManifest::read_text(&fs::read_to_string(&mpath)?)?;
        check_manifest_compat(&existing, &ctx, tower, config.chunk_count)?;
    }

    // Scan chunk files to find what is already done.
    let mut done = vec![false; specs.len()];
    let mut pending: Vec<(ChunkSpec, Option<usize>)> = Vec::new();
    for spec in &specs {
        let path = chunk_path(dir, spec.index);
        let state = if path.exists() {
            match parse_chunk_file(&path) {
                Ok(file) => classify_chunk(&ctx, spec, &file)?,
                Err(Error::Domain(_)) | Err(Error::Parse(_)) | Err(Error::Internal(_)) => {
                    progress(format!("chunk {} invalid; re-queued", spec.index));
                    ChunkState::Pending
                }
                Err(e) => return Err(e),
            }
        } else {
            ChunkState::Pending
        };
        match state {
            ChunkState::Done => done[spec.index] = true,
            ChunkState::Extend(levels) => pending.push((spec.clone(), Some(levels))),
            ChunkState::Pending => pending.push((spec.clone(), None)),
        }
    }

    let capped = config.max_chunks.map_or(pending.len(), |cap| cap.min(pending.len()));
    let deferred = pending.len() - capped;
    let queue: VecDeque<(ChunkSpec, Option<usize>)> = pending.drain(..capped).collect();
    progress(format!(
        "run: {} chunks, {} already done, {} queued{}, {} workers, {} levels{}",
        specs.len(),
        done.iter().filter(|&&d| d).count(),
        queue.len(),
        if deferred > 0 { format!(" ({deferred} deferred by cap)") } else { String::new() },
        config.workers,
        ctx.periods.len(),
        if ctx.stats_only { ", stats only" } else { "" },
    ));

    let write_manifest = |done: &[bool],
                          levels: Vec<LevelStats>,
                          final_count: Option<u64>,
                          final_fused: Option<u64>,
                          complete: bool|
     -> Result<RunManifest> {
        let manifest = RunManifest {
            period: ctx.periods[0].clone(),
            chunk_count: config.chunk_count,
            stats_only: ctx.stats_only,
            workers: config.workers,
            interval_budget: ctx.budget,
            base: tower.base().windows().to_vec(),
            stages: tower.stages().to_vec(),
            done: done.to_vec(),
            levels,
            final_count,
            final_fused,
            complete,
        };
        write_atomic(&mpath, |out| manifest.write_text(out))?;
        Ok(manifest)
    };
    write_manifest(&done, Vec::new(), None, None, false)?;

    // Pull-based parallel processing.
    let processed = if queue.is_empty() {
        0
    } else {
        let jobs = Mutex::new(queue);
        let abort = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<(usize, Result<()>)>();
        let ctx_ref = &ctx;
        let dir_ref = dir;
        std::thread::scope(|scope| -> Result<usize> {
            for _ in 0..config.workers.min(capped) {
                let tx = tx.clone();
                let jobs = &jobs;
                let abort = &abort;
                scope.spawn(move || {
                    loop {
                        if abort.load(Ordering::Relaxed) {
                            break;
                        }
                        let job = jobs.lock().expect("queue lock").pop_front();
                        let Some((spec, extend_from)) = job else { break };
                        let outcome = (|| -> Result<()> {
                            let path = chunk_path(dir_ref, spec.index);
                            let resume = match extend_from {
                                Some(levels) => {
                                    let file = parse_chunk_file(&path)?;
                                    debug_assert_eq!(file.levels.len(), levels);
                                    let set = file
                                        .set
                                        .ok_or_else(|| Error::internal("extendable chunk lost its body"))?;
                                    Some((file.levels, set))
                                }
                                None => None,
                            };
                            let (stats, set) = compute_chunk(ctx_ref, &spec, resume)?;
                            write_chunk_file(
                                &path,
                                &ChunkFile {
                                    index: spec.index,
                                    lo: spec.lo.clone(),
                                    hi: spec.hi.clone(),
                                    config: ctx_ref.digests.last().expect("at least one level").clone(),
                                    levels: stats,
                                    body_full: !ctx_ref.stats_only,
                                    set: (!ctx_ref.stats_only).then_some(set),
                                },
                            )
                        })();
                        if outcome.is_err() {
                            abort.store(true, Ordering::Relaxed);
                        }
                        if tx.send((spec.index, outcome)).is_err() {
                            break;
                        }
                    }
                });
            }
            drop(tx);
            let mut processed = 0usize;
            let mut first_error: Option<Error> = None;
            for (index, outcome) in rx {
                match outcome {
                    Ok(()) => {
                        processed += 1;
                        done[index] = true;
                        progress(format!(
                            "chunk {index} done ({}/{})",
                            done.iter().filter(|&&d| d).count(),
                            specs.len()
                        ));
                    }
                    Err(e) => {
                        progress(format!("chunk {index} failed: {e}"));
                        first_error.get_or_insert(e);
                    }
                }
            }
            match first_error {
                Some(e) => Err(e),
                None => Ok(processed),
            }
        })?
    };

    if done.iter().any(|&d| !d) {
        let manifest = write_manifest(&done, Vec::new(), None, None, false)?;
        progress(format!(
            "stopping with {} of {} chunks done (cap reached)",
            done.iter().filter(|&&d| d).count(),
            specs.len()
        ));
        return Ok(RunOutcome { manifest, final_set: None, processed });
    }

    // Aggregate: re-read every chunk file and fold statistics and sets.
    let level_count = ctx.periods.len();
    let mut levels = vec![
        LevelStats { count: 0, length: Rational::zero() };
        level_count
    ];
    let mut sets: Vec<IntervalSet> = Vec::new();
    for spec in &specs {
        let file = parse_chunk_file(&chunk_path(dir, spec.index))?;
        if !matches!(classify_chunk(&ctx, spec, &file)?, ChunkState::Done) {
            return Err(Error::internal(format!(
                "chunk {} unreadable after completion",
                spec.index
            )));
        }
        for (i, (count, length)) in file.levels.iter().enumerate() {
            levels[i].count += count;
            levels[i].length += length;
        }
        if !ctx.stats_only {
            sets.push(file.set.expect("full-mode chunk carries its set"));
        }
    }

    let (final_set, final_count, final_fused) = if ctx.stats_only {
        (None, None, None)
    } else {
        let (merged, fused) = if level_count == 1 {
            let boundaries: Vec<Rational> = specs[1..].iter().map(|s| s.lo.clone()).collect();
            IntervalSet::merge_boundary_pairs(&sets, &boundaries)?
        } else {
            IntervalSet::merge_scattered(sets)?
        };
        let count = merged.count() as u64;
        let top_period = rational::big(&ctx.periods[level_count - 1]);
        write_atomic(&final_path(dir), |out| {
            write_interval_file(out, &merged, &BigInt::one(), (&Rational::zero(), &top_period), true)
        })?;
        (Some(merged), Some(count), Some(fused as u64))
    };

    let manifest = write_manifest(&done, levels, final_count, final_fused, true)?;
    progress(format!(
        "run complete: {} levels, top-level count {}",
        level_count,
        manifest
            .levels
            .last()
            .map(|l| l.count.to_string())
            .unwrap_or_default()
    ));
    Ok(RunOutcome { manifest, final_set, processed })
}

/// Why certification stopped without a certificate.
#[derive(Debug, Clone)]
pub struct CertifyFailure {
    pub reason: String,
    /// The criterion report, when the criterion could be evaluated at all.
    pub report: Option<Box<CriterionReport>>,
    /// Tower stages in place when certification gave up.
    pub stages_tried: usize,
}

/// Result of the certification loop.
#[derive(Debug)]
pub enum CertifyOutcome {
    Certified(Box<Certificate>),
    Failed(CertifyFailure),
}

/// Human- and machine-readable failure report.
fn failure_report_text(failure: &CertifyFailure) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "status=failed");
    let _ = writeln!(out, "stages_tried={}", failure.stages_tried);
    let _ = writeln!(out, "reason={}", failure.reason);
    if let Some(report) = &failure.report {
        let failing: Vec<_> = report.records.iter().filter(|r| !r.pass).collect();
        let _ = writeln!(out, "uncovered={}", failing.len());
        for r in failing {
            let _ = writeln!(
                out,
                "[{}, {}) witness {} margins {} {}",
                rational::format_rational(r.interval.lo()),
                rational::format_rational(r.interval.hi()),
                r.fraction,
                rational::format_rational(&r.lower_margin),
                rational::format_rational(&r.upper_margin),
            );
        }
    }
    out
}

/// Concrete windows for a growth step under a plan's mode: the fixed
/// `(0, 1/10)` band in standard mode; in variable mode the derived band,
/// with moduli that admit no band dropped.
pub fn growth_windows(plan: &RangePlan, step: &params::GrowthStep) -> Result<Vec<Window>> {
    match plan.mode {
        PlanMode::Standard => step
            .moduli
            .iter()
            .map(|m| Window::new(m.clone(), Rational::zero(), rational::frac(1, 10)))
            .collect(),
        PlanMode::Variable => Ok(step
            .moduli
            .iter()
            .filter_map(|m| params::variable_window(m, &plan.k1, &plan.k2).ok())
            .collect()),
    }
}

/// Run the full certification loop for a plan: chunked sieve, covering
/// criterion, and on failure a tower extension with the next admissible
/// prime's moduli, up to `max_extra_stages` added stages. Completed chunks
/// are extended across rounds, not recomputed.
///
/// Ends with a persisted certificate (`certificate.txt`), or a structured
/// failure (`report.txt`) when the criterion still fails — or can not be
/// evaluated because the period is too small — and no further extension is
/// possible or allowed.
pub fn certify_run(
    plan: &RangePlan,
    dir: &Path,
    config: &RunConfig,
    max_extra_stages: usize,
    progress: &mut dyn FnMut(String),
) -> Result<CertifyOutcome> {
    if config.stats_only {
        return Err(Error::domain(
            "certification needs stored interval bodies; disable stats-only",
        ));
    }
    if config.max_chunks.is_some() {
        return Err(Error::domain(
            "certification requires complete runs; remove the chunk cap",
        ));
    }
    plan.validate()?;
    for w in plan.family.windows() {
        sieve::check_modulus_structure(w.modulus())?;
        sieve::check_range_fit(w, plan.k1.lower(), plan.k2.upper())?;
    }

    // Adopt stages from an earlier certification attempt in this directory.
    let mut stages: Vec<Vec<Window>> = Vec::new();
    let mpath = manifest_path(dir);
    if mpath.exists() {
        let existing = RunManifest::read_text(&fs::read_to_string(&mpath)?)?;
        if existing.base == plan.family.windows() {
            stages = existing.stages;
        }
    }

    loop {
        let tower = Tower::new(plan.family.clone(), stages.clone())?;
        let outcome = run_chunked(&tower, dir, config, progress)?;
        let bad = outcome
            .final_set
            .ok_or_else(|| Error::internal("complete full-mode run must yield a merged set"))?;
        let family = tower.family_at(stages.len())?;

        let failure = match criterion::check_decomposition(&bad, family.period(), &plan.k2) {
            Ok(report) if report.pass => {
                let cert = criterion::certify_range(&family, &bad, &plan.k1, &plan.k2)?;
                write_atomic(&dir.join("certificate.txt"), |out| cert.write_text(out))?;
                progress("criterion satisfied; certificate written".to_string());
                return Ok(CertifyOutcome::Certified(Box::new(cert)));
            }
            Ok(report) => {
                let failing = report.records.iter().filter(|r| !r.pass).count();
                CertifyFailure {
                    reason: format!(
                        "{failing} of {} bad intervals not trapped by fractions with denominator <= {}",
                        report.records.len(),
                        report.qmax
                    ),
                    report: Some(Box::new(report)),
                    stages_tried: stages.len(),
                }
            }
            Err(Error::PeriodTooSmall { period, bound }) => CertifyFailure {
                reason: format!(
                    "period {period} is below {bound}, the smallest admitting a witness denominator"
                ),
                report: None,
                stages_tried: stages.len(),
            },
            Err(e) => return Err(e),
        };
        write_atomic(&dir.join("report.txt"), |out| {
            out.write_all(failure_report_text(&failure).as_bytes())?;
            Ok(())
        })?;
        progress(format!("criterion not satisfied: {}", failure.reason));

        if stages.len() >= max_extra_stages {
            return Ok(CertifyOutcome::Failed(failure));
        }
        let step = params::tower_growth_plan(&family, &plan.k2, plan.mode)?;
        let windows = growth_windows(plan, &step)?;
        if windows.is_empty() {
            progress(format!(
                "tower extension found no admissible moduli for prime {} (target {})",
                step.prime, step.target
            ));
            return Ok(CertifyOutcome::Failed(failure));
        }
        progress(format!(
            "extending tower: prime {} adds {} moduli (target {}, shortfall {})",
            step.prime,
            windows.len(),
            step.target,
            step.shortfall()
        ));
        stages.push(windows);
    }
}

/// Construct seven cubes for `n` by trying each window of a family in
/// order, so a band miss in one window falls through to the next. The
/// error of the last window is reported when every window misses.
pub fn construct_with_fallback(n: &BigInt, family: &WindowFamily) -> Result<CubeRepresentation> {
    let mut last: Option<Error> = None;
    for w in family.windows() {
        match construct::seven_cubes_from_window(n, w) {
            Ok(rep) => return Ok(rep),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::domain("family has no windows")))
}
