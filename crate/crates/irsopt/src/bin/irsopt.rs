//! Command-line front end: single solves, parameter sweeps, and adversarial
//! verification of finished designs.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 infeasible, 3 numerical
//! failure, 4 verification found constraint violations.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use irsopt::algorithms::{
    beamforming_fixed_phase, ia_solve, penalty_altmin, sdr_altmin, AlgError, AlgoOptions,
    ProblemData,
};
use irsopt::channel::{
    degrade_csi, dump_estimate, dump_solution, generate_channels, parse_estimate, parse_solution,
    scenario_rng, RngPurpose, SolutionDump,
};
use irsopt::config::{ConfigReader, RawConfig, RunManifest, DEFAULT_CONFIG};
use irsopt::harness::{run_experiment, rows_to_csv, Algorithm};
use irsopt::robust::{robust_penalty_altmin, verify_worst_case, RobustData};
use irsopt::state::{PhaseState, SolveTrace};

#[derive(Parser)]
#[command(
    name = "irsopt",
    version,
    about = "Joint transmit beamforming and reflecting-surface phase design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm on one channel drop; write solve trace and solution.
    Solve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "penalty-altmin")]
        algorithm: String,
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long, default_value = "solve_out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Run a parameter sweep over many drops; write CSV, JSON traces, and a
    /// run manifest.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "sweep_out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        drops: Option<usize>,
        /// Comma-separated algorithm list, overriding the config.
        #[arg(long)]
        algorithm: Option<String>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        kappa: Option<f64>,
    },
    /// Check a finished design against adversarially perturbed channels
    /// drawn inside the estimate's uncertainty radii.
    Verify {
        /// Solution dump written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        /// Channel-estimate dump written by `solve`.
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the built-in default configuration.
    DefaultConfig,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Solve { config, algorithm, drop, out, seed, mu, kappa } => {
            cmd_solve(config, &algorithm, drop, &out, seed, mu, kappa)
        }
        Command::Sweep { config, out, seed, drops, algorithm, mu, kappa } => {
            cmd_sweep(config, &out, seed, drops, algorithm, mu, kappa)
        }
        Command::Verify { solution, estimate, samples, seed } => {
            cmd_verify(&solution, &estimate, samples, seed.unwrap_or(1))
        }
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG}");
            ExitCode::SUCCESS
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RawConfig, String> {
    let text = match path {
        None => DEFAULT_CONFIG.to_string(),
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| format!("cannot read config {}: {e}", p.display()))?,
    };
    RawConfig::parse(&text).map_err(|e| e.to_string())
}

/// Applies CLI flags and `IRSOPT_*` environment variables as config
/// overrides.
fn apply_overrides(
    reader: &mut ConfigReader,
    seed: Option<u64>,
    drops: Option<usize>,
    mu: Option<f64>,
    kappa: Option<f64>,
) {
    reader.apply_env("IRSOPT");
    if let Some(s) = seed {
        reader.set_override("scenario.seed", s.to_string());
    }
    if let Some(d) = drops {
        reader.set_override("sweep.drops", d.to_string());
    }
    if let Some(m) = mu {
        reader.set_override("algo.mu", m.to_string());
    }
    if let Some(k) = kappa {
        reader.set_override("scenario.kappa", k.to_string());
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    config: Option<PathBuf>,
    algorithm: &str,
    drop: usize,
    out: &PathBuf,
    seed: Option<u64>,
    mu: Option<f64>,
    kappa: Option<f64>,
) -> ExitCode {
    let raw = match load_config(config.as_ref()) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let mut reader = ConfigReader::new(&raw);
    apply_overrides(&mut reader, seed, None, mu, kappa);
    let cfg = match reader.scenario() {
        Ok(c) => c,
        Err(e) => return usage_error(&e.to_string()),
    };
    let Some(alg) = Algorithm::parse(algorithm) else {
        return usage_error(&format!(
            "unknown algorithm `{algorithm}`; known: {}",
            Algorithm::ALL.map(|a| a.name()).join(", ")
        ));
    };
    let ch = match generate_channels(&cfg, drop) {
        Ok(c) => c,
        Err(e) => return usage_error(&format!("channel generation failed: {e}")),
    };
    let opts = AlgoOptions::from_scenario(&cfg);
    let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
    let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::PhaseInit);
    let mut crng = scenario_rng(cfg.seed, drop, RngPurpose::CsiError);
    let est = match degrade_csi(&ch, cfg.kappa, &mut crng) {
        Ok(e) => e,
        Err(e) => return usage_error(&format!("estimate generation failed: {e}")),
    };
    let result: Result<(Vec<_>, Option<PhaseState>, f64, SolveTrace), AlgError> = match alg {
        Algorithm::PenaltyAltmin => {
            penalty_altmin(&data, &opts, &mut rng).map(|(b, ps, tr)| (b.w, Some(ps), b.power, tr))
        }
        Algorithm::Ia => {
            ia_solve(&data, &opts, &mut rng).map(|(b, ps, tr)| (b.w, Some(ps), b.power, tr))
        }
        Algorithm::SdrAltmin => sdr_altmin(&data, opts.outer_cap, &opts, &mut rng)
            .map(|(b, ps, tr)| (b.w, Some(ps), b.power, tr)),
        Algorithm::Baseline1NoIrs => beamforming_fixed_phase(&data, None, opts.tol)
            .map(|b| (b.w, None, b.power, SolveTrace::default())),
        Algorithm::Baseline2RandomPhase => {
            let ps = PhaseState::random(data.m(), &mut rng);
            beamforming_fixed_phase(&data, Some(&ps), opts.tol)
                .map(|b| (b.w, Some(ps), b.power, SolveTrace::default()))
        }
        Algorithm::RobustPenaltyAltmin => {
            let rdata = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
            robust_penalty_altmin(&rdata, &opts, &mut rng)
                .map(|(b, ps, tr)| (b.w, Some(ps), b.power, tr))
        }
        Algorithm::NonRobust => {
            let edata = ProblemData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
            penalty_altmin(&edata, &opts, &mut rng).map(|(b, ps, tr)| (b.w, Some(ps), b.power, tr))
        }
    };
    match result {
        Ok((w, phase, power, trace)) => {
            let sol = SolutionDump {
                w,
                theta: phase.map(|p| p.theta).unwrap_or_default(),
                gamma: cfg.gamma.clone(),
                sigma2: cfg.sigma2.clone(),
            };
            let base = out.display();
            let writes = [
                (format!("{base}.solution.txt"), dump_solution(&sol)),
                (format!("{base}.estimate.txt"), dump_estimate(&est)),
                (
                    format!("{base}.trace.json"),
                    serde_json::to_string_pretty(&trace).unwrap(),
                ),
            ];
            for (path, text) in writes {
                if let Err(e) = std::fs::write(&path, text) {
                    return usage_error(&format!("cannot write {path}: {e}"));
                }
            }
            println!(
                "optimal: power {power:.6e} W ({:.3} dBm), {} iterations",
                10.0 * (power * 1000.0).log10(),
                trace.iterations()
            );
            ExitCode::SUCCESS
        }
        Err(AlgError::Infeasible) => {
            eprintln!("infeasible: no design meets the SINR targets on this drop");
            ExitCode::from(2)
        }
        Err(AlgError::Numerical(e)) => {
            eprintln!("numerical failure: {e}");
            ExitCode::from(3)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    config: Option<PathBuf>,
    out: &PathBuf,
    seed: Option<u64>,
    drops: Option<usize>,
    algorithm: Option<String>,
    mu: Option<f64>,
    kappa: Option<f64>,
) -> ExitCode {
    let raw = match load_config(config.as_ref()) {
        Ok(r) => r,
        Err(e) => return usage_error(&e),
    };
    let mut reader = ConfigReader::new(&raw);
    apply_overrides(&mut reader, seed, drops, mu, kappa);
    if let Some(a) = algorithm {
        reader.set_override("sweep.algorithms", a);
    }
    let cfg = match reader.scenario() {
        Ok(c) => c,
        Err(e) => return usage_error(&e.to_string()),
    };
    let spec = match reader.experiment(cfg) {
        Ok(s) => s,
        Err(e) => return usage_error(&e.to_string()),
    };
    if let Err(e) = spec.validate() {
        return usage_error(&e);
    }
    let mut manifest = RunManifest::new(&reader, spec.seed);
    let output = match run_experiment(&spec) {
        Ok(o) => o,
        Err(e) => return usage_error(&e),
    };
    for cell in &output.outcomes {
        for oc in &cell.outcomes {
            if oc.status != irsopt::harness::RunStatus::Ok {
                manifest.failures.push(format!(
                    "{}={} drop={} algorithm={}: {:?}",
                    spec.sweep.name(),
                    cell.sweep_value,
                    oc.drop,
                    oc.algorithm,
                    oc.status
                ));
            }
        }
    }
    let base = out.display();
    let csv_path = format!("{base}.csv");
    let json_path = format!("{base}.json");
    let manifest_path = format!("{base}.manifest.json");
    manifest.outputs = vec![csv_path.clone(), json_path.clone()];
    manifest.finish();
    let writes = [
        (csv_path, rows_to_csv(&output.rows, &spec.thresholds_db)),
        (json_path, serde_json::to_string_pretty(&output).unwrap()),
        (
            manifest_path,
            serde_json::to_string_pretty(&manifest).unwrap(),
        ),
    ];
    for (path, text) in writes {
        if let Err(e) = std::fs::write(&path, text) {
            return usage_error(&format!("cannot write {path}: {e}"));
        }
    }
    if output.rows.is_empty() {
        return usage_error("sweep produced no rows");
    }
    println!("{} rows written to {base}.csv", output.rows.len());
    ExitCode::SUCCESS
}

fn cmd_verify(solution: &PathBuf, estimate: &PathBuf, samples: usize, seed: u64) -> ExitCode {
    if samples == 0 {
        return usage_error("samples must be at least 1");
    }
    let sol_text = match std::fs::read_to_string(solution) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", solution.display())),
    };
    let est_text = match std::fs::read_to_string(estimate) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read {}: {e}", estimate.display())),
    };
    let sol = match parse_solution(&sol_text) {
        Ok(s) => s,
        Err(e) => return usage_error(&format!("bad solution dump: {e}")),
    };
    let est = match parse_estimate(&est_text) {
        Ok(e) => e,
        Err(e) => return usage_error(&format!("bad estimate dump: {e}")),
    };
    let users = sol.w.len();
    let nt = sol.w.first().map_or(0, |w| w.len());
    let m = sol.theta.len();
    let dims_ok = est.users() == users
        && est.hbar.first().map_or(false, |h| h.nrows() == nt && h.ncols() == m + 1);
    if !dims_ok {
        return usage_error("solution and estimate dimensions do not match");
    }
    let phase = PhaseState { theta: sol.theta.clone() };
    let mut rng = scenario_rng(seed, 0, RngPurpose::Adversarial);
    let (min_slack, violations) = verify_worst_case(
        &sol.w,
        &phase,
        &est,
        &sol.gamma,
        &sol.sigma2,
        samples,
        1e-5,
        &mut rng,
    );
    println!("min SINR slack over {samples} samples: {min_slack:.6e}; violations: {violations}");
    if violations == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    }
}
