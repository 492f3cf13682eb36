//! End-to-end tests of the command surface via the built binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_sefrag")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env_remove("SEFRAG_KEY")
        .output()
        .expect("binary runs")
}

fn write_key(dir: &Path) -> PathBuf {
    let path = dir.join("key.hex");
    std::fs::write(&path, "00112233445566778899aabbccddeeff\n").unwrap();
    path
}

#[test]
fn protect_restore_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_key(dir.path());
    let input: Vec<u8> = (0..100_000u32)
        .map(|i| (i.wrapping_mul(2654435761) >> 13) as u8)
        .collect();
    std::fs::write(dir.path().join("in.bin"), &input).unwrap();

    let out = run(
        &[
            "protect",
            "--chunk",
            "256",
            "--key-file",
            "key.hex",
            "in.bin",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fragment A"), "{stdout}");

    let out = run(
        &[
            "restore",
            "--key-file",
            "key.hex",
            "in.bin.sefr",
            "--out",
            "back.bin",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read(dir.path().join("back.bin")).unwrap(), input);
}

#[test]
fn deterministic_output_for_fixed_key() {
    let dir = tempfile::tempdir().unwrap();
    write_key(dir.path());
    std::fs::write(dir.path().join("in.bin"), vec![7u8; 50_000]).unwrap();
    for (out_name, workers) in [("a.sefr", "1"), ("b.sefr", "3")] {
        let out = run(
            &[
                "protect",
                "--chunk",
                "128",
                "--workers",
                workers,
                "--key-file",
                "key.hex",
                "--out",
                out_name,
                "in.bin",
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a.sefr")).unwrap();
    let b = std::fs::read(dir.path().join("b.sefr")).unwrap();
    assert_eq!(a, b, "container must not depend on worker count");
}

#[test]
fn key_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("in.bin"),
        b"environment sourced key bytes!!!",
    )
    .unwrap();
    let out = Command::new(bin())
        .args(["protect", "--chunk", "64", "in.bin"])
        .current_dir(dir.path())
        .env("SEFRAG_KEY", "00112233445566778899aabbccddeeff")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["protect", "--no-such-flag", "x"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_scheme_exits_2_and_missing_input_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    write_key(dir.path());
    std::fs::write(dir.path().join("in.bin"), b"x").unwrap();
    let out = run(
        &[
            "protect",
            "--scheme",
            "rot13",
            "--key-file",
            "key.hex",
            "in.bin",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let out = run(
        &["protect", "--key-file", "key.hex", "no-such-file.bin"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn policy_violation_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    write_key(dir.path());
    std::fs::write(dir.path().join("in.bin"), vec![1u8; 10_000]).unwrap();
    let out = run(
        &[
            "protect",
            "--chunk",
            "64",
            "--key-file",
            "key.hex",
            "--place",
            "A=pubdir:cloud,B=pubdir:cloud,C=pubdir:cloud",
            "in.bin",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // Override is explicit.
    let out = run(
        &[
            "protect",
            "--chunk",
            "64",
            "--key-file",
            "key.hex",
            "--allow-private-public",
            "--place",
            "A=pubdir:cloud,B=pubdir:cloud,C=pubdir:cloud",
            "in.bin",
        ],
        dir.path(),
    );
    assert!(out.status.success());
}

#[test]
fn disperse_and_restore_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_key(dir.path());
    let input = vec![0xABu8; 40_000];
    std::fs::write(dir.path().join("in.bin"), &input).unwrap();
    let out = run(
        &[
            "protect",
            "--chunk",
            "128",
            "--key-file",
            "key.hex",
            "--place",
            "A=local:trusted,B=pubdir:c1,C=pubdir:c2",
            "in.bin",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("trusted-local footprint"), "{stdout}");

    let out = run(
        &[
            "restore",
            "--key-file",
            "key.hex",
            "in.bin.manifest.toml",
            "--out",
            "back.bin",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(std::fs::read(dir.path().join("back.bin")).unwrap(), input);

    // Withholding the private fragment must fail with the integrity exit
    // code and produce no plaintext.
    let manifest = std::fs::read_to_string(dir.path().join("in.bin.manifest.toml")).unwrap();
    let blob_id = manifest
        .lines()
        .find(|l| l.contains("blob_id"))
        .and_then(|l| l.split('"').nth(1))
        .unwrap();
    std::fs::remove_file(dir.path().join("trusted").join(blob_id)).unwrap();
    let out = run(
        &[
            "restore",
            "--key-file",
            "key.hex",
            "in.bin.manifest.toml",
            "--out",
            "gone.bin",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let gone = std::fs::read(dir.path().join("gone.bin")).unwrap_or_default();
    assert!(
        gone.is_empty(),
        "no partial plaintext on availability failure"
    );
}

#[test]
fn analyze_identical_files_reports_zero_difference() {
    let dir = tempfile::tempdir().unwrap();
    let data: Vec<u8> = (0..65_536u32).map(|i| (i ^ (i >> 3)) as u8).collect();
    std::fs::write(dir.path().join("a.bin"), &data).unwrap();
    let out = run(
        &["analyze", "a.bin", "a.bin", "--out-prefix", "report"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Dif              0.0000 %"), "{stdout}");
    assert!(stdout.contains("NMI              1.0000"), "{stdout}");
    assert!(dir.path().join("report.txt").exists());
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("original_bytes,protected_bytes"));
}

#[test]
fn bench_emits_csv_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "bench",
            "--sizes",
            "1048576",
            "--workers",
            "1",
            "--reps",
            "1",
            "--stages",
            "--out",
            "bench.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("scheme,input_bytes,workers"), "{stdout}");
    assert!(stdout.contains("aes128ctr"), "{stdout}");
    assert!(stdout.contains("AES-128 baseline"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(dir.path().join("bench.stages.csv").exists());
}
