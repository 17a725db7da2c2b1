//! Monte-Carlo experiment runner: sweeps a scenario parameter, runs the
//! selected solvers on paired channel drops, and aggregates power, outage,
//! and system-power metrics. All quality metrics are evaluated on the true
//! channels; designs that only see degraded estimates are scored against the
//! reality they missed.

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{
    beamforming_fixed_phase, ia_solve, penalty_altmin, sdr_altmin, AlgError, AlgoOptions,
    ProblemData,
};
use crate::channel::{
    degrade_csi, generate_channels, scenario_rng, sinr, ChannelSet, RngPurpose, ScenarioConfig,
};
use crate::robust::{robust_penalty_altmin, RobustData};
use crate::state::{PhaseState, SolveTrace};

/// Hardware power model constants (watts).
#[derive(Debug, Clone, Serialize)]
pub struct PowerModel {
    /// Power-amplifier efficiency, in (0, 1].
    pub eta: f64,
    /// Static circuit power.
    pub ps: f64,
    /// Per-RF-chain power.
    pub prf: f64,
    /// Per-reflecting-element power.
    pub pirs: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        Self { eta: 1.0, ps: 0.034, prf: 0.08, pirs: 0.005 }
    }
}

/// Total system power: transmit power scaled by amplifier efficiency plus
/// static, per-RF-chain, and per-reflecting-element terms.
pub fn total_power(
    p: f64,
    nt: usize,
    m: usize,
    eta: f64,
    ps: f64,
    prf: f64,
    pirs: f64,
) -> Result<f64, String> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(format!("amplifier efficiency must be in (0, 1], got {eta}"));
    }
    if p < 0.0 || ps < 0.0 || prf < 0.0 || pirs < 0.0 {
        return Err("power terms must be nonnegative".into());
    }
    Ok(p / eta + ps + nt as f64 * prf + m as f64 * pirs)
}

/// Solvers and baselines selectable in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Algorithm {
    SdrAltmin,
    PenaltyAltmin,
    Ia,
    RobustPenaltyAltmin,
    /// Surfaces switched off (phase matrix zero).
    Baseline1NoIrs,
    /// Uniformly random phases, beamforming only.
    Baseline2RandomPhase,
    /// Designs on the estimate as if it were perfect; scored on the truth.
    NonRobust,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::SdrAltmin,
        Algorithm::PenaltyAltmin,
        Algorithm::Ia,
        Algorithm::RobustPenaltyAltmin,
        Algorithm::Baseline1NoIrs,
        Algorithm::Baseline2RandomPhase,
        Algorithm::NonRobust,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::SdrAltmin => "sdr-altmin",
            Algorithm::PenaltyAltmin => "penalty-altmin",
            Algorithm::Ia => "ia",
            Algorithm::RobustPenaltyAltmin => "robust-penalty-altmin",
            Algorithm::Baseline1NoIrs => "baseline1-no-irs",
            Algorithm::Baseline2RandomPhase => "baseline2-random-phase",
            Algorithm::NonRobust => "non-robust",
        }
    }

    pub fn parse(s: &str) -> Option<Algorithm> {
        Algorithm::ALL.iter().copied().find(|a| a.name() == s)
    }
}

/// Swept scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVar {
    /// SINR target in dB (applied to every user).
    GammaDb,
    /// Reflecting elements on a single surface.
    Elements,
    /// Transmit antennas.
    Antennas,
    /// Channel-estimate degradation level.
    Kappa,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::GammaDb => "gamma_db",
            SweepVar::Elements => "elements",
            SweepVar::Antennas => "antennas",
            SweepVar::Kappa => "kappa",
        }
    }

    pub fn parse(s: &str) -> Option<SweepVar> {
        [SweepVar::GammaDb, SweepVar::Elements, SweepVar::Antennas, SweepVar::Kappa]
            .into_iter()
            .find(|v| v.name() == s)
    }

    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            SweepVar::GammaDb => {
                cfg.gamma = vec![10f64.powf(value / 10.0); cfg.k];
            }
            SweepVar::Elements => {
                cfg.m_l = vec![value.round() as usize];
            }
            SweepVar::Antennas => {
                cfg.nt = value.round() as usize;
            }
            SweepVar::Kappa => {
                cfg.kappa = value;
            }
        }
        cfg
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: ScenarioConfig,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub drops: usize,
    pub seed: u64,
    /// Outage thresholds in dB.
    pub thresholds_db: Vec<f64>,
    pub power_model: PowerModel,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.algorithms.is_empty() {
            return Err("at least one algorithm required".into());
        }
        if self.drops == 0 {
            return Err("at least one drop required".into());
        }
        if self.values.is_empty() {
            return Err("at least one sweep value required".into());
        }
        Ok(())
    }
}

/// One solver run on one drop.
#[derive(Debug, Clone, Serialize)]
pub struct DropOutcome {
    pub drop: usize,
    pub algorithm: &'static str,
    /// Transmit power in watts; NaN when the run failed.
    pub power_w: f64,
    /// Per-user SINR on the true channels.
    pub sinr_true: Vec<f64>,
    pub status: RunStatus,
    pub trace: SolveTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RunStatus {
    Ok,
    Infeasible,
    NumericalFailure,
}

/// Aggregated metrics for one (sweep value, algorithm) cell.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRow {
    pub sweep_var: &'static str,
    pub sweep_value: f64,
    pub algorithm: &'static str,
    pub mean_power_dbm: f64,
    pub std_power_db: f64,
    /// Outage fraction per threshold, aligned with the spec's threshold grid.
    pub outage: Vec<f64>,
    pub p_total_w: f64,
    pub drops_used: usize,
    pub drops_infeasible: usize,
}

/// Full experiment output: aggregate rows plus the per-drop record that backs
/// them.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricRow>,
    pub outcomes: Vec<SweepCellOutcomes>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCellOutcomes {
    pub sweep_value: f64,
    pub outcomes: Vec<DropOutcome>,
}

fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// Fraction of (solution, user) pairs whose achieved SINR falls below each
/// threshold (linear scale); non-decreasing in the threshold.
pub fn outage_curve(sinrs: &[Vec<f64>], thresholds: &[f64]) -> Vec<f64> {
    let total: usize = sinrs.iter().map(|s| s.len()).sum();
    thresholds
        .iter()
        .map(|&t| {
            if total == 0 {
                return 0.0;
            }
            let below = sinrs
                .iter()
                .flat_map(|s| s.iter())
                .filter(|&&v| v < t)
                .count();
            below as f64 / total as f64
        })
        .collect()
}

/// Runs one algorithm on one drop. The SDR baseline needs the iteration count
/// of the penalty solver on the same drop as its budget, so that count is
/// threaded in.
fn run_algorithm(
    alg: Algorithm,
    cfg: &ScenarioConfig,
    ch: &ChannelSet,
    drop: usize,
    penalty_iterations: usize,
) -> DropOutcome {
    let opts = AlgoOptions::from_scenario(cfg);
    let data = ProblemData::from_true(ch, &cfg.gamma, &cfg.sigma2);
    let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::PhaseInit);
    let result: Result<(f64, Option<PhaseState>, Vec<crate::matcore::ComplexVector>, SolveTrace), AlgError> =
        match alg {
            Algorithm::PenaltyAltmin => penalty_altmin(&data, &opts, &mut rng)
                .map(|(b, ps, tr)| (b.power, Some(ps), b.w, tr)),
            Algorithm::Ia => {
                ia_solve(&data, &opts, &mut rng).map(|(b, ps, tr)| (b.power, Some(ps), b.w, tr))
            }
            Algorithm::SdrAltmin => sdr_altmin(&data, penalty_iterations.max(1), &opts, &mut rng)
                .map(|(b, ps, tr)| (b.power, Some(ps), b.w, tr)),
            Algorithm::Baseline1NoIrs => beamforming_fixed_phase(&data, None, opts.tol)
                .map(|b| (b.power, None, b.w, SolveTrace::default())),
            Algorithm::Baseline2RandomPhase => {
                let ps = PhaseState::random(data.m(), &mut rng);
                beamforming_fixed_phase(&data, Some(&ps), opts.tol)
                    .map(|b| (b.power, Some(ps), b.w, SolveTrace::default()))
            }
            Algorithm::RobustPenaltyAltmin => {
                let mut crng = scenario_rng(cfg.seed, drop, RngPurpose::CsiError);
                match degrade_csi(ch, cfg.kappa, &mut crng) {
                    Ok(est) => {
                        let rdata = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
                        robust_penalty_altmin(&rdata, &opts, &mut rng)
                            .map(|(b, ps, tr)| (b.power, Some(ps), b.w, tr))
                    }
                    Err(e) => Err(AlgError::Numerical(e.to_string())),
                }
            }
            Algorithm::NonRobust => {
                let mut crng = scenario_rng(cfg.seed, drop, RngPurpose::CsiError);
                match degrade_csi(ch, cfg.kappa, &mut crng) {
                    Ok(est) => {
                        let edata = ProblemData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
                        penalty_altmin(&edata, &opts, &mut rng)
                            .map(|(b, ps, tr)| (b.power, Some(ps), b.w, tr))
                    }
                    Err(e) => Err(AlgError::Numerical(e.to_string())),
                }
            }
        };
    match result {
        Ok((power, phase, w, trace)) => {
            let sinr_true: Vec<f64> = (0..cfg.k)
                .map(|k| sinr(ch, &w, phase.as_ref(), cfg.sigma2[k], k))
                .collect();
            DropOutcome {
                drop,
                algorithm: alg.name(),
                power_w: power,
                sinr_true,
                status: RunStatus::Ok,
                trace,
            }
        }
        Err(e) => DropOutcome {
            drop,
            algorithm: alg.name(),
            power_w: f64::NAN,
            sinr_true: Vec::new(),
            status: match e {
                AlgError::Infeasible => RunStatus::Infeasible,
                AlgError::Numerical(_) => RunStatus::NumericalFailure,
            },
            trace: SolveTrace::default(),
        },
    }
}

/// Runs the full experiment: per sweep value, the drops execute concurrently
/// and results aggregate in drop order; per-drop channels are shared across
/// algorithms so comparisons are paired, and a drop any algorithm finds
/// infeasible is excluded for every algorithm.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, String> {
    spec.validate()?;
    let mut rows = Vec::new();
    let mut all_outcomes = Vec::new();
    // SDR needs the paired penalty iteration budget even when penalty is not
    // in the requested list
    let need_penalty =
        spec.algorithms.contains(&Algorithm::SdrAltmin);
    for &value in &spec.values {
        let mut cfg = spec.sweep.apply(&spec.base, value);
        cfg.seed = spec.seed;
        if let Err(e) = cfg.validate() {
            return Err(format!("sweep value {value}: {e}"));
        }
        let per_drop: Vec<Vec<DropOutcome>> = (0..spec.drops)
            .into_par_iter()
            .map(|drop| {
                let ch = match generate_channels(&cfg, drop) {
                    Ok(c) => c,
                    Err(_) => return Vec::new(),
                };
                let mut outcomes = Vec::new();
                let mut penalty_iters = 0;
                if need_penalty || spec.algorithms.contains(&Algorithm::PenaltyAltmin) {
                    let out =
                        run_algorithm(Algorithm::PenaltyAltmin, &cfg, &ch, drop, 0);
                    penalty_iters = out.trace.iterations();
                    if spec.algorithms.contains(&Algorithm::PenaltyAltmin) {
                        outcomes.push(out);
                    }
                }
                for &alg in &spec.algorithms {
                    if alg == Algorithm::PenaltyAltmin {
                        continue;
                    }
                    outcomes.push(run_algorithm(alg, &cfg, &ch, drop, penalty_iters));
                }
                outcomes
            })
            .collect();
        // pairwise exclusion: a drop is dead for everyone if any algorithm
        // reported infeasibility
        let excluded: Vec<bool> = per_drop
            .iter()
            .map(|outs| {
                outs.is_empty() || outs.iter().any(|o| o.status == RunStatus::Infeasible)
            })
            .collect();
        let drops_infeasible = excluded.iter().filter(|&&e| e).count();
        let drops_used = spec.drops - drops_infeasible;
        let thresholds_lin: Vec<f64> =
            spec.thresholds_db.iter().map(|t| 10f64.powf(t / 10.0)).collect();
        let mut algs_sorted = spec.algorithms.clone();
        algs_sorted.sort();
        algs_sorted.dedup();
        for alg in &algs_sorted {
            let runs: Vec<&DropOutcome> = per_drop
                .iter()
                .zip(&excluded)
                .filter(|(_, &ex)| !ex)
                .flat_map(|(outs, _)| outs.iter().filter(|o| o.algorithm == alg.name()))
                .collect();
            let powers: Vec<f64> = runs
                .iter()
                .filter(|r| r.status == RunStatus::Ok && r.power_w.is_finite())
                .map(|r| r.power_w)
                .collect();
            let mean_w = if powers.is_empty() {
                f64::NAN
            } else {
                powers.iter().sum::<f64>() / powers.len() as f64
            };
            let dbm: Vec<f64> = powers.iter().map(|&w| watts_to_dbm(w)).collect();
            let mean_dbm = watts_to_dbm(mean_w);
            let std_db = if dbm.len() < 2 {
                0.0
            } else {
                let m = dbm.iter().sum::<f64>() / dbm.len() as f64;
                (dbm.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (dbm.len() - 1) as f64)
                    .sqrt()
            };
            let sinrs: Vec<Vec<f64>> = runs
                .iter()
                .filter(|r| r.status == RunStatus::Ok)
                .map(|r| r.sinr_true.clone())
                .collect();
            let outage = outage_curve(&sinrs, &thresholds_lin);
            let pm = &spec.power_model;
            let p_total = if mean_w.is_finite() {
                total_power(mean_w, cfg.nt, cfg.m_total(), pm.eta, pm.ps, pm.prf, pm.pirs)?
            } else {
                f64::NAN
            };
            rows.push(MetricRow {
                sweep_var: spec.sweep.name(),
                sweep_value: value,
                algorithm: alg.name(),
                mean_power_dbm: mean_dbm,
                std_power_db: std_db,
                outage,
                p_total_w: p_total,
                drops_used,
                drops_infeasible,
            });
        }
        all_outcomes.push(SweepCellOutcomes {
            sweep_value: value,
            outcomes: per_drop.into_iter().flatten().collect(),
        });
    }
    // stable order: (sweep value, algorithm name)
    rows.sort_by(|a, b| {
        a.sweep_value
            .partial_cmp(&b.sweep_value)
            .unwrap()
            .then_with(|| a.algorithm.cmp(b.algorithm))
    });
    Ok(ExperimentOutput { rows, outcomes: all_outcomes })
}

/// Renders metric rows as CSV with one outage column per threshold.
pub fn rows_to_csv(rows: &[MetricRow], thresholds_db: &[f64]) -> String {
    let mut s = String::from("sweep_var,sweep_value,algorithm,mean_power_dbm,std_power_db");
    for t in thresholds_db {
        s.push_str(&format!(",outage@{t}dB"));
    }
    s.push_str(",p_total_w,drops_used,drops_infeasible\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.6},{:.6}",
            r.sweep_var, r.sweep_value, r.algorithm, r.mean_power_dbm, r.std_power_db
        ));
        for o in &r.outage {
            s.push_str(&format!(",{o:.6}"));
        }
        s.push_str(&format!(
            ",{:.6},{},{}\n",
            r.p_total_w, r.drops_used, r.drops_infeasible
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_power_worked_example() {
        let p = total_power(1.0, 4, 8, 1.0, 0.034, 0.08, 0.005).unwrap();
        assert!((p - 1.394).abs() < 1e-12, "{p}");
    }

    #[test]
    fn total_power_trivial_and_affine_cases() {
        assert_eq!(total_power(0.0, 0, 0, 1.0, 0.034, 0.0, 0.0).unwrap(), 0.034);
        let base = total_power(0.5, 4, 8, 0.8, 0.034, 0.08, 0.005).unwrap();
        let doubled = total_power(0.5, 8, 8, 0.8, 0.034, 0.08, 0.005).unwrap();
        assert!((doubled - base - 4.0 * 0.08).abs() < 1e-12);
        assert!(total_power(1.0, 4, 8, 0.0, 0.034, 0.08, 0.005).is_err());
        assert!(total_power(1.0, 4, 8, -0.5, 0.034, 0.08, 0.005).is_err());
    }

    #[test]
    fn outage_curve_monotone_and_bounded() {
        let sinrs = vec![vec![1.0, 2.0], vec![0.5, 3.0]];
        let thresholds = [0.1, 0.75, 1.5, 2.5, 10.0];
        let curve = outage_curve(&sinrs, &thresholds);
        assert_eq!(curve[0], 0.0);
        assert_eq!(*curve.last().unwrap(), 1.0);
        for w in curve.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    fn tiny_spec() -> ExperimentSpec {
        ExperimentSpec {
            base: ScenarioConfig {
                nt: 2,
                m_l: vec![2],
                k: 2,
                sigma2: vec![1e-12; 2],
                gamma: vec![10f64.powf(0.2); 2],
                ..Default::default()
            },
            sweep: SweepVar::GammaDb,
            values: vec![2.0],
            algorithms: vec![Algorithm::PenaltyAltmin, Algorithm::Baseline1NoIrs],
            drops: 3,
            seed: 1,
            thresholds_db: vec![2.0],
            power_model: PowerModel::default(),
        }
    }

    #[test]
    fn experiment_is_deterministic_and_paired() {
        let spec = tiny_spec();
        let out1 = run_experiment(&spec).unwrap();
        let out2 = run_experiment(&spec).unwrap();
        let csv1 = rows_to_csv(&out1.rows, &spec.thresholds_db);
        let csv2 = rows_to_csv(&out2.rows, &spec.thresholds_db);
        assert_eq!(csv1, csv2);
        assert_eq!(out1.rows.len(), 2);
        for r in &out1.rows {
            assert_eq!(r.drops_used + r.drops_infeasible, spec.drops);
            for o in &r.outage {
                assert!((0.0..=1.0).contains(o));
            }
        }
        for r in &out1.rows {
            assert!(r.mean_power_dbm.is_finite());
        }
    }

    #[test]
    fn empty_algorithm_list_rejected() {
        let mut spec = tiny_spec();
        spec.algorithms.clear();
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(Algorithm::parse(a.name()), Some(a));
        }
        assert_eq!(Algorithm::parse("nope"), None);
    }
}
