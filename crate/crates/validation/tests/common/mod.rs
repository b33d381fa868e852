#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use sast_core::simulation::{generate_stream, PiPattern, SimConfig};

pub const MODEL: &str = r#"{"pattern": {"kind": "constant", "pi": 0.05}, "alt": {"mean": 3.0, "sd": 1.0}}"#;

/// The `sast` binary next to this test's build directory. A binary target
/// of another package has no `CARGO_BIN_EXE_*`, so it is built on demand by
/// [`build_sast`].
pub fn sast_path() -> PathBuf {
    let exe = std::env::current_exe().expect("test executable path");
    let profile_dir = exe.parent().and_then(|deps| deps.parent()).expect("target/<profile>/deps layout");
    profile_dir.join(format!("sast{}", std::env::consts::EXE_SUFFIX))
}

/// Runs `cargo build -p sast-cli` for the profile this test was built with.
/// A no-op when the binary is already up to date.
pub fn build_sast() -> Result<(), String> {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut cmd = Command::new(cargo);
    cmd.args(["build", "--quiet", "-p", "sast-cli", "--bin", "sast"]);
    let profile = sast_path().parent().and_then(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned());
    if profile.as_deref() == Some("release") {
        cmd.arg("--release");
    }
    let out = cmd.output().map_err(|e| format!("cargo build: {e}"))?;
    if !out.status.success() {
        return Err(format!("cargo build -p sast-cli failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    if !sast_path().exists() {
        return Err(format!("{} missing after build", sast_path().display()));
    }
    Ok(())
}

pub fn sast() -> Command {
    Command::new(sast_path())
}

/// `index,z` lines from a constant(0.05), mu = 3 stream.
pub fn z_lines(n: usize, seed: u64) -> String {
    let mut cfg = SimConfig::new(n, 3.0, PiPattern::Constant { pi: 0.05 });
    cfg.burn_in = 0;
    let s = generate_stream(&cfg, seed);
    s.x.iter().enumerate().map(|(i, x)| format!("{},{x}\n", i + 1)).collect()
}

pub fn write_file(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Writes one line at a time and waits for its decision before writing
/// the next, so a tool that reads ahead would stall and time out. The
/// first `silent` lines are burn-in and produce no output.
pub fn blocking_pipe_check(args: &[&str], lines: &[String], silent: usize) -> Result<(), String> {
    let mut child = sast()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut stdin = child.stdin.take().unwrap();
    let stdout = child.stdout.take().unwrap();
    let (tx, rx) = mpsc::channel();
    let reader = thread::spawn(move || {
        for line in BufReader::new(stdout).lines() {
            if tx.send(line.unwrap()).is_err() {
                break;
            }
        }
    });
    let mut result = Ok(());
    for (k, line) in lines.iter().enumerate() {
        stdin.write_all(line.as_bytes()).unwrap();
        stdin.write_all(b"\n").unwrap();
        stdin.flush().unwrap();
        if k < silent {
            continue;
        }
        match rx.recv_timeout(Duration::from_secs(10)) {
            Ok(out) => {
                let index = line.split(',').next().unwrap();
                if !out.starts_with(&format!("{index},")) {
                    result = Err(format!("line {k}: got `{out}`"));
                    break;
                }
            }
            Err(_) => {
                result = Err(format!("no decision for line {k} before the next read"));
                break;
            }
        }
    }
    drop(stdin);
    let _ = child.wait();
    let _ = reader.join();
    result
}
