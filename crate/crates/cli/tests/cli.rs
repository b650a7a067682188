//! End-to-end tests driving the compiled binary: exit codes, the
//! stdout/stderr split, and the plan → sieve → tower → certify flow on a
//! desk-scale fixture.

use std::fs;
use std::path::Path;
use std::process::Command;

use num_bigint::BigInt;
use sevencubes::criterion::{check_decomposition, Certificate};
use sevencubes::rational::{big, frac, rat};
use sevencubes::sieve::{bad_set, Window, WindowFamily};
use sevencubes::Enclosure;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sevencubes"))
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let output = cmd.output().expect("binary should launch");
    (
        output.status.code().expect("no exit code"),
        String::from_utf8(output.stdout).expect("stdout utf-8"),
        String::from_utf8(output.stderr).expect("stderr utf-8"),
    )
}

#[test]
fn oracle_lists_the_known_exceptions() {
    let (code, stdout, _) = run(bin().args(["oracle", "--limit", "100000"]));
    assert_eq!(code, 0);
    assert_eq!(
        stdout.trim(),
        "15, 22, 23, 50, 114, 167, 175, 186, 212, 231, 238, 239, 303, 364, 420, 428, 454"
    );
}

#[test]
fn construct_prints_the_seven_cube_form() {
    let (code, stdout, _) = run(bin().args(["construct", "--n", "203", "--modulus", "15"]));
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "203 = 5³+0³+3³+2³+3³+2³+2³");
}

#[test]
fn unknown_flags_exit_with_usage() {
    let (code, _, stderr) = run(bin().args(["oracle", "--limit", "10", "--bogus"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("Usage"), "stderr: {stderr}");

    let (code, _, stderr) = run(bin().args(["frobnicate"]));
    assert_eq!(code, 2);
    assert!(stderr.contains("Usage"), "stderr: {stderr}");
}

#[test]
fn plan_sieve_tower_certify_flow() {
    let dir = TempDir::new().unwrap();
    let plan_path = dir.path().join("plan.txt");
    let run_dir = dir.path().join("run");
    let cert_dir = dir.path().join("cert-run");

    // Plan: a single variable window over modulus 15 at K2 = 195.
    let (code, _, stderr) = run(bin().args([
        "plan",
        "--exact-k",
        "195",
        "--mode",
        "variable",
        "--moduli",
        "15",
        "--out",
        plan_path.to_str().unwrap(),
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    let plan_text = fs::read_to_string(&plan_path).unwrap();
    assert!(plan_text.contains("15\t0/1\t137/1000"), "plan: {plan_text}");

    // Sieve: worker count comes from the environment when no flag is given;
    // the manifest goes to stdout and progress stays on stderr.
    let (code, stdout, stderr) = run(bin()
        .args([
            "sieve",
            "--plan",
            plan_path.to_str().unwrap(),
            "--out",
            run_dir.to_str().unwrap(),
            "--chunks",
            "3",
        ])
        .env("SEVENCUBES_WORKERS", "3"));
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(stdout.starts_with("version=1"), "stdout: {stdout}");
    assert!(stdout.contains("workers=3"), "stdout: {stdout}");
    assert!(stdout.contains("complete=1"), "stdout: {stdout}");
    assert!(run_dir.join("final.txt").exists());

    // Tower: prime 11 is next, but no admissible moduli exist at this scale.
    let (code, stdout, _) = run(bin().args([
        "tower",
        "--plan",
        plan_path.to_str().unwrap(),
        "--out",
        run_dir.to_str().unwrap(),
        "--dry-run",
    ]));
    assert_eq!(code, 1);
    assert!(stdout.contains("prime=11"), "stdout: {stdout}");
    assert!(stdout.contains("admissible=0"), "stdout: {stdout}");

    // Certify: the period is far below the bound needed for any witness.
    let (code, stdout, _) = run(bin().args([
        "certify",
        "--plan",
        plan_path.to_str().unwrap(),
        "--out",
        cert_dir.to_str().unwrap(),
    ]));
    assert_eq!(code, 1);
    assert!(stdout.contains("verdict=fail"), "stdout: {stdout}");
    assert!(stdout.contains("period 15 is below"), "stdout: {stdout}");
    assert!(cert_dir.join("report.txt").exists());
}

/// A structurally sound certificate whose criterion honestly fails: built
/// from a fresh sieve of a three-window family too small to pass.
fn failing_certificate(dir: &Path) -> std::path::PathBuf {
    let windows = vec![
        Window::new(BigInt::from(159), rat(0), frac(1, 10)).unwrap(),
        Window::new(BigInt::from(165), rat(0), frac(1, 10)).unwrap(),
        Window::new(BigInt::from(177), rat(0), frac(1, 10)).unwrap(),
    ];
    let family = WindowFamily::new(windows.clone()).unwrap();
    let bad = bad_set(&family, &rat(0), &big(family.period())).unwrap();
    let k2 = Enclosure::exact(rat(220000));
    let report = check_decomposition(&bad, family.period(), &k2).unwrap();
    assert!(!report.pass, "desk-scale family should fail the criterion");
    let cert = Certificate {
        k1: Enclosure::exact(rat(200000)),
        windows,
        report,
    };
    let mut buf = Vec::new();
    cert.write_text(&mut buf).unwrap();
    let path = dir.join("cert.txt");
    fs::write(&path, &buf).unwrap();
    path
}

#[test]
fn verify_cert_reads_honest_failures_and_rejects_tampering() {
    let dir = TempDir::new().unwrap();
    let path = failing_certificate(dir.path());

    // Honest certificate: consistent, so it verifies — and reports failure.
    let (code, stdout, _) = run(bin()
        .args(["verify-cert", "--cert", path.to_str().unwrap()])
        .arg("--resieve"));
    assert_eq!(code, 1, "stdout: {stdout}");
    assert!(stdout.contains("verdict=fail"), "stdout: {stdout}");
    assert!(stdout.contains("period=515955"), "stdout: {stdout}");

    // Tamper with one byte: the checksum no longer matches.
    let text = fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("margin", "margim", 1);
    let tampered = if tampered == text {
        text.replacen('7', "8", 1)
    } else {
        tampered
    };
    assert_ne!(tampered, text, "tampering must change the file");
    fs::write(&path, tampered).unwrap();
    let (code, _, stderr) = run(bin().args(["verify-cert", "--cert", path.to_str().unwrap()]));
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("certificate"), "stderr: {stderr}");

    // A missing file is an input error, not an inconsistency.
    let missing = dir.path().join("nope.txt");
    let (code, _, _) = run(bin().args(["verify-cert", "--cert", missing.to_str().unwrap()]));
    assert_eq!(code, 2);
}

#[test]
fn audit_passes_on_theorem_backed_bands() {
    let (code, stdout, stderr) = run(bin().args([
        "audit",
        "--master",
        "927498",
        "--scale",
        "50",
        "--qmax",
        "15",
    ]));
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(stdout.trim().ends_with("audit: pass"), "stdout: {stdout}");
}
