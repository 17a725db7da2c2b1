//! Black-box tests of the `irsopt` binary: exit codes, output files, and
//! byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_irsopt");

/// Small, quick scenario used by every CLI test.
const TINY_CONFIG: &str = "\
scenario.nt = 2
scenario.m = 3
scenario.k = 2
scenario.sigma2 = -90 dBm
scenario.gamma = 2 dB
scenario.seed = 3
sweep.var = gamma_db
sweep.values = 0,2
sweep.algorithms = penalty-altmin,baseline1-no-irs
sweep.drops = 2
sweep.thresholds = 0,2
";

struct Scratch(PathBuf);

impl Scratch {
    fn new(tag: &str) -> Self {
        let dir = std::env::temp_dir().join(format!(
            "irsopt-cli-{tag}-{}",
            std::process::id()
        ));
        std::fs::create_dir_all(&dir).expect("create scratch dir");
        Scratch(dir)
    }
    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }
    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, text).expect("write scratch file");
        p
    }
}

impl Drop for Scratch {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn irsopt")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn solve_writes_solution_and_trace() {
    let s = Scratch::new("solve");
    let cfg = s.write("tiny.cfg", TINY_CONFIG);
    let out_base = s.path("run");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_base.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(s.path("run.trace.json")).expect("trace file");
    assert!(trace.contains("\"objective\""));
    assert!(s.path("run.solution.txt").exists());
    assert!(s.path("run.estimate.txt").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("optimal"), "stdout: {stdout}");
}

#[test]
fn unattainable_target_reports_infeasible() {
    let s = Scratch::new("infeasible");
    let cfg = s.write("hard.cfg", &TINY_CONFIG.replace("gamma = 2 dB", "gamma = 60 dB"));
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        s.path("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_algorithm_is_usage_error() {
    let s = Scratch::new("badalg");
    let cfg = s.write("tiny.cfg", TINY_CONFIG);
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithm",
        "gradient-descent",
        "--out",
        s.path("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown algorithm"));
}

#[test]
fn malformed_config_reports_line() {
    let s = Scratch::new("badcfg");
    let cfg = s.write("bad.cfg", "scenario.nt = 2\nscenario.k == 2\n");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        s.path("run").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn sweep_is_deterministic_and_covers_grid() {
    let s = Scratch::new("sweep");
    let cfg = s.write("tiny.cfg", TINY_CONFIG);
    let mut csvs = Vec::new();
    for pass in 0..2 {
        let base = s.path(&format!("sweep{pass}"));
        let out = run(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--drops",
            "1",
            "--out",
            base.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        csvs.push(std::fs::read(s.path(&format!("sweep{pass}.csv"))).expect("csv"));
        assert!(s.path(&format!("sweep{pass}.manifest.json")).exists());
    }
    assert_eq!(csvs[0], csvs[1], "repeated sweeps must be byte-identical");
    let text = String::from_utf8(csvs[0].clone()).expect("utf8 csv");
    // header + 2 sweep values x 2 algorithms
    assert_eq!(text.lines().count(), 5, "csv: {text}");
}

#[test]
fn sweep_with_empty_algorithm_list_is_usage_error() {
    let s = Scratch::new("noalg");
    let cfg = s.write("tiny.cfg", TINY_CONFIG);
    let out = run(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithm",
        "",
        "--out",
        s.path("sweep").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_checks_arguments_and_flags_violations() {
    let s = Scratch::new("verify");
    let kappa_cfg = format!("{TINY_CONFIG}scenario.kappa = 0.1\n");
    let cfg = s.write("tiny.cfg", &kappa_cfg);

    // a worst-case design verifies cleanly against its own estimate
    let robust_base = s.path("robust");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithm",
        "robust-penalty-altmin",
        "--out",
        robust_base.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let sol = s.path("robust.solution.txt");
    let est = s.path("robust.estimate.txt");
    let out = run(&[
        "verify",
        "--solution",
        sol.to_str().unwrap(),
        "--estimate",
        est.to_str().unwrap(),
        "--samples",
        "200",
    ]);
    assert_eq!(code(&out), 0, "stdout: {}", String::from_utf8_lossy(&out.stdout));

    // a design that ignores the uncertainty trips the verifier
    let naive_base = s.path("naive");
    let out = run(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--algorithm",
        "non-robust",
        "--out",
        naive_base.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let nsol = s.path("naive.solution.txt");
    let nest = s.path("naive.estimate.txt");
    let out = run(&[
        "verify",
        "--solution",
        nsol.to_str().unwrap(),
        "--estimate",
        nest.to_str().unwrap(),
        "--samples",
        "200",
    ]);
    assert_eq!(code(&out), 4, "stdout: {}", String::from_utf8_lossy(&out.stdout));

    // zero samples is a usage error
    let out = run(&[
        "verify",
        "--solution",
        sol.to_str().unwrap(),
        "--estimate",
        est.to_str().unwrap(),
        "--samples",
        "0",
    ]);
    assert_eq!(code(&out), 1);

    // mismatched dimensions are a usage error: pair the estimate with a
    // solution designed for a different surface size
    let cfg2 = s.write("tiny2.cfg", &kappa_cfg.replace("scenario.m = 3", "scenario.m = 4"));
    let other_base = s.path("other");
    let out = run(&[
        "solve",
        "--config",
        cfg2.to_str().unwrap(),
        "--algorithm",
        "robust-penalty-altmin",
        "--out",
        other_base.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = run(&[
        "verify",
        "--solution",
        s.path("other.solution.txt").to_str().unwrap(),
        "--estimate",
        est.to_str().unwrap(),
        "--samples",
        "10",
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn default_config_prints_parseable_text() {
    let out = run(&["default-config"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("scenario.nt"));
}
