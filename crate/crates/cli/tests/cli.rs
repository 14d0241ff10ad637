use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ebpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ebpe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "[grid]\nnx = 8\nny = 8\nnz = 4\n[time]\ndt = 0.001\nt_end = 0.02\n\
[initial]\nkind = random_smooth\nseed = 3\ntemp_amplitude = 0.5\nvelocity_amplitude = 0.3\n\
[output]\ncadence = 5\nsnapshot_every = 10\n";

#[test]
fn run_det_writes_csv_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.ini", SMALL);
    let out = dir.path().join("out");
    let o = ebpe(&["run-det", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# ebpe diagnostics v1"));
    assert!(lines.next().unwrap().starts_with("step,t,energy"));
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("step")).collect();
    let steps: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["0", "5", "10", "15", "20"]);
    assert!(csv.lines().last().unwrap().starts_with("# summary"));
    assert!(out.join("snapshot_00000010.bin").exists());
    assert!(out.join("final.bin").exists());

    let o = ebpe(&["check", out.join("final.bin").to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("constraints=pass"));
}

#[test]
fn cadence_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.ini", SMALL);
    let out = dir.path().join("out");
    let o = ebpe(&["run-det", "--config", &cfg, "--out", out.to_str().unwrap(), "--cadence", "10"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let rows = csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with("step")).count();
    assert_eq!(rows, 3);
}

#[test]
fn restart_splices_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.ini", SMALL);
    let full = dir.path().join("full");
    let tail = dir.path().join("tail");
    assert_eq!(code(&ebpe(&["run-det", "--config", &cfg, "--out", full.to_str().unwrap()])), 0);
    let o = ebpe(&[
        "run-det",
        "--config",
        &cfg,
        "--out",
        tail.to_str().unwrap(),
        "--restart",
        full.join("snapshot_00000010.bin").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = |p: &Path| -> Vec<String> {
        fs::read_to_string(p.join("diagnostics.csv"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
            .map(String::from)
            .collect()
    };
    let f = rows(&full);
    let t = rows(&tail);
    assert_eq!(&f[2..], &t[..]);
    assert_eq!(fs::read(full.join("final.bin")).unwrap(), fs::read(tail.join("final.bin")).unwrap());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.ini", &SMALL.replace("[time]", "[physics]\ntransport = vertical_average\n[noise]\nsigma = 0.1\n[time]"));
    for cmd in ["run-stoch", "run-direct-em"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        let c = dir.path().join(format!("{cmd}-c"));
        assert_eq!(code(&ebpe(&[cmd, "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "5"])), 0);
        assert_eq!(code(&ebpe(&[cmd, "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "5"])), 0);
        assert_eq!(code(&ebpe(&[cmd, "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "6"])), 0);
        let read = |p: &Path| fs::read(p.join("diagnostics.csv")).unwrap();
        assert_eq!(read(&a), read(&b));
        assert_ne!(read(&a), read(&c));
    }
}

#[test]
fn stochastic_run_with_surface_trace_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.ini", SMALL);
    let o = ebpe(&["run-stoch", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let cfg = write(
        dir.path(),
        "bad2.ini",
        &SMALL.replace("[time]", "[noise]\nsigma = 0.1\n[time]"),
    );
    let o = ebpe(&["run-direct-em", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"));
}

#[test]
fn invalid_config_reports_lines() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.ini", "[grid]\nnx=8\nny=8\nnz=8\n[physics]\nbeta1=0.7\nbeta2=0.5\n");
    let o = ebpe(&["run-det", "--config", &cfg]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6"));
    assert!(err.contains("0<β₁<β₂"));
}

#[test]
fn blowup_exits_2_and_keeps_last_valid_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "unstable.ini",
        "[grid]\nnx=8\nny=8\nnz=8\n[time]\ndt=10\nt_end=100\n[initial]\nkind=single_mode\nk1=1\nk2=0\namplitude=3\n",
    );
    let out = dir.path().join("out");
    let o = ebpe(&["run-det", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(out.join("last_valid.bin").exists());
    let csv = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    let flagged = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
        .any(|l| l.rsplit(',').next().unwrap().parse::<u32>().unwrap() & 4 != 0);
    assert!(flagged);
}

#[test]
fn monitor_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "tight.ini",
        &format!("{SMALL}[monitors]\nh1_factor = 1e-9\n"),
    );
    let o = ebpe(&["run-det", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn check_flags_corrupted_and_mismatched_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.ini", SMALL);
    let out = dir.path().join("out");
    assert_eq!(code(&ebpe(&["run-det", "--config", &cfg, "--out", out.to_str().unwrap()])), 0);
    let snap = out.join("final.bin");
    let mut bytes = fs::read(&snap).unwrap();

    let other = write(dir.path(), "other.ini", "[grid]\nnx=8\nny=8\nnz=8\n");
    let o = ebpe(&["check", snap.to_str().unwrap(), "--config", &other]);
    assert_eq!(code(&o), 1);

    // surface value out of step with the top temperature level
    let n = bytes.len();
    let last = f64::from_le_bytes(bytes[n - 8..].try_into().unwrap()) + 1.0;
    bytes[n - 8..].copy_from_slice(&last.to_le_bytes());
    let bad = dir.path().join("bad.bin");
    fs::write(&bad, &bytes).unwrap();
    let o = ebpe(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 3);

    fs::write(&bad, &bytes[..n / 2]).unwrap();
    let o = ebpe(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn spectrum_and_mms_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.ini", "[grid]\nnx=8\nny=8\nnz=8\n");
    let o = ebpe(&["spectrum", "--config", &cfg, "--out", dir.path().to_str().unwrap(), "--max-modes", "5"]);
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("# ebpe spectrum v1\nk1,k2,re,im\n"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('k')).count(), 5 * 9);

    let mms = configs().join("mms_spatial.ini");
    let o = ebpe(&["mms", "--config", mms.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    let order: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("order="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(order >= 1.9);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(code(&ebpe(&["bogus"])), 1);
    assert_eq!(code(&ebpe(&["run-det"])), 1);
    assert_eq!(code(&ebpe(&["run-det", "--config", "/nonexistent.ini"])), 1);
    assert_eq!(code(&ebpe(&["--help"])), 0);
}
