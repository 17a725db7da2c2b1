//! Shared solution-state types: beamformer block, phase block, and the
//! per-iteration trace recorded by every solver.

use crate::matcore::{eig_hermitian, rank_one_ratio, ComplexVector, HermitianMatrix, C64};
use crate::sdp::{extract_rank_one, ExtractMode};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::TAU;

/// Beamformer block: lifted matrices, extracted vectors, and the normalized
/// forms used by the phase subproblem.
#[derive(Debug, Clone)]
pub struct BeamState {
    /// Lifted W_k, one per user.
    pub mats: Vec<HermitianMatrix>,
    /// Extracted beamformers w_k.
    pub w: Vec<ComplexVector>,
    /// Total transmit power, sum of Tr(W_k), watts.
    pub power: f64,
    /// W_k / power.
    pub normalized: Vec<HermitianMatrix>,
    /// Worst lambda_2/lambda_1 over users.
    pub max_rank_ratio: f64,
}

impl BeamState {
    pub fn from_mats(mats: Vec<HermitianMatrix>) -> Self {
        let power: f64 = mats.iter().map(|m| m.trace()).sum();
        let mut w = Vec::with_capacity(mats.len());
        let mut max_ratio: f64 = 0.0;
        for m in &mats {
            let ext = extract_rank_one(m, ExtractMode::Beamformer);
            max_ratio = max_ratio.max(ext.tightness);
            w.push(ext.vector);
        }
        let normalized = mats.iter().map(|m| m.scale(1.0 / power)).collect();
        Self { mats, w, power, normalized, max_rank_ratio: max_ratio }
    }
}

/// Phase block of the reflecting surfaces. Phases are authoritative; the
/// unit-modulus vector and lifted forms are derived, so |phi_m| = 1 holds
/// exactly by construction.
#[derive(Debug, Clone)]
pub struct PhaseState {
    /// M phases in [0, 2pi).
    pub theta: Vec<f64>,
}

impl PhaseState {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta: theta.into_iter().map(|t| t.rem_euclid(TAU)).collect() }
    }

    pub fn random(m: usize, rng: &mut impl Rng) -> Self {
        Self { theta: (0..m).map(|_| rng.random::<f64>() * TAU).collect() }
    }

    /// Rebuilds phases from the first-M entries of an aligned lifted vector
    /// (which carry the conjugated phase pattern).
    pub fn from_lifted_entries(entries: &ComplexVector) -> Self {
        Self::new(entries.iter().map(|z| (-z.arg()).rem_euclid(TAU)).collect())
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Unit-modulus reflection coefficients phi_m = e^{i theta_m}.
    pub fn phi(&self) -> ComplexVector {
        ComplexVector::from_iterator(self.theta.len(), self.theta.iter().map(|&t| C64::from_polar(1.0, t)))
    }

    /// Lifted vector v = [conj(phi); 1] of length M+1, chosen so that
    /// v^H H^H reproduces the effective row channel.
    pub fn lifted(&self) -> ComplexVector {
        let m = self.theta.len();
        let mut v = ComplexVector::zeros(m + 1);
        for (i, &t) in self.theta.iter().enumerate() {
            v[i] = C64::from_polar(1.0, -t);
        }
        v[m] = C64::new(1.0, 0.0);
        v
    }

    /// Rank-one lifted matrix V = v v^H.
    pub fn lifted_outer(&self) -> HermitianMatrix {
        HermitianMatrix::outer(&self.lifted())
    }
}

/// Terminal status of one subproblem solve within an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StepStatus {
    Ok,
    Infeasible,
    NumericalFailure,
}

/// One accepted (or attempted) iteration of an outer solver loop.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Objective after this iteration (total transmit power, watts).
    pub objective: f64,
    /// Rank-one deficit of the lifted phase matrix:
    /// (M + 1 - lambda_max(V)) / (M + 1).
    pub rank_gap: f64,
    /// min_k (SINR_k - gamma_k) at this iterate, linear.
    pub min_sinr_slack: f64,
    /// Inner (SCA) iterations spent inside this outer iteration.
    pub inner_iterations: usize,
    pub status: StepStatus,
    pub millis: f64,
}

/// Full per-run record; objectives of descent-guaranteeing solvers are
/// non-increasing row to row within 1e-7 relative slack.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.rows.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    /// True when the objective column never increases beyond the given
    /// relative slack.
    pub fn is_non_increasing(&self, rel_slack: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[1].objective <= w[0].objective + rel_slack * w[0].objective.abs().max(1e-300)
        })
    }

    /// Structured text rows: iteration, objective, rank gap, SINR slack,
    /// inner iterations, status, milliseconds.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("iteration\tobjective_w\trank_gap_v\tmin_sinr_slack\tinner\tstatus\tmillis\n");
        for r in &self.rows {
            writeln!(
                s,
                "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{}\t{:?}\t{:.3}",
                r.iteration, r.objective, r.rank_gap, r.min_sinr_slack, r.inner_iterations, r.status, r.millis
            )
            .unwrap();
        }
        writeln!(s, "converged\t{}", self.converged).unwrap();
        s
    }
}

/// Rank-one deficit of a lifted phase matrix scaled to diag = 1.
pub fn lifted_rank_gap(v: &HermitianMatrix) -> f64 {
    let n = v.dim() as f64;
    let eig = eig_hermitian(v);
    ((n - eig.principal_value()) / n).max(0.0)
}

/// lambda_2 / lambda_1 of a lifted or beamformer matrix.
pub fn rank_ratio(m: &HermitianMatrix) -> f64 {
    rank_one_ratio(&eig_hermitian(m))
}
