//! Acceptance suite: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use dimbound_cli::verify::checks;

const SEED: u64 = 7;

/// Runs the real binary twice on the example spec and compares every artifact byte for byte.
fn binary_determinism() -> Result<String, String> {
    let exe = env!("CARGO_BIN_EXE_dimbound");
    let spec = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/delay_tau1_d1.json");
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let status = Command::new(exe)
            .arg("--output-dir")
            .arg(dir.path())
            .arg("--seed")
            .arg(SEED.to_string())
            .arg("run")
            .arg(&spec)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "exit {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        dirs.push(dir);
    }
    let names = ["certificate.json", "bound_report.csv", "report.json", "trajectory.csv"];
    for name in names {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!("{} artifacts identical across two binary runs", names.len()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    for check in checks() {
        let mut r = check.run(SEED);
        if r.id == 12 && r.passed {
            let start = Instant::now();
            match binary_determinism() {
                Ok(d) => r.detail = format!("{}; {d}", r.detail),
                Err(e) => {
                    r.passed = false;
                    r.detail = format!("binary: {e}");
                }
            }
            r.elapsed += start.elapsed();
        }
        println!("{}", r.line());
        if !(r.passed && r.within_time()) {
            failed += 1;
        }
    }
    println!("{} criteria, {failed} failed", checks().len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
