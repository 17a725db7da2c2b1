//! Perfect-CSI design algorithms: fixed-phase beamforming, the
//! relax-and-randomize alternating baseline, the penalty-based alternating
//! algorithm with an inner successive-convex-approximation phase update, and
//! the inner-approximation joint algorithm.

use crate::channel::{ChannelEstimate, ChannelSet};
use crate::matcore::{eig_hermitian, ComplexMatrix, ComplexVector, HermitianMatrix, C64};
use crate::sdp::{
    extract_rank_one, gaussian_randomize, AffineMat, ConicProblem, ExtractMode, LinExpr,
    QuadConstraint, SolveStatusKind, VarId, DEFAULT_RANDOMIZATION_DRAWS, DEFAULT_TOL,
};
use crate::state::{lifted_rank_gap, BeamState, PhaseState, SolveTrace, StepStatus, TraceRow};
use rand::Rng;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlgError {
    #[error("problem infeasible: SINR targets unreachable")]
    Infeasible,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Solver knobs shared by all algorithms.
#[derive(Debug, Clone)]
pub struct AlgoOptions {
    /// Rank-one penalty factor.
    pub mu: f64,
    /// Relative convergence tolerance.
    pub eps: f64,
    /// Outer alternating-iteration cap.
    pub outer_cap: usize,
    /// Inner SCA iteration cap.
    pub inner_cap: usize,
    /// Inner-approximation iteration cap.
    pub ia_cap: usize,
    /// Conic solver tolerance.
    pub tol: f64,
    /// Halve mu between outer iterations (penalty schedule).
    pub mu_halving: bool,
    /// Keep the literal linearized rank constraint in the inner-approximation
    /// algorithm. Off by default: combined with the unit-diagonal constraint
    /// it pins the phase matrix to its expansion point (the trace equals
    /// M+1, so the constraint forces lambda_max = trace = u^H V u, i.e.
    /// V = (M+1) u u^H exactly), freezing the phases; the iteration converges
    /// to rank one without it.
    pub keep_rank_constraint: bool,
    /// Randomization draw count for the relax-and-randomize baseline.
    pub draws: usize,
}

impl Default for AlgoOptions {
    fn default() -> Self {
        Self {
            mu: 0.5,
            eps: 1e-5,
            outer_cap: 200,
            inner_cap: 500,
            ia_cap: 2000,
            tol: DEFAULT_TOL,
            mu_halving: false,
            keep_rank_constraint: false,
            draws: DEFAULT_RANDOMIZATION_DRAWS,
        }
    }
}

impl AlgoOptions {
    pub fn from_scenario(cfg: &crate::channel::ScenarioConfig) -> Self {
        Self { mu: cfg.mu, eps: cfg.eps, ..Default::default() }
    }
}

/// Noise-normalized problem data: per-user effective channels divided by
/// their noise standard deviation, so every SINR denominator becomes 1.
/// Beamformer powers stay in watts.
#[derive(Debug, Clone)]
pub struct ProblemData {
    /// H_k / sigma_k, Nt x (M+1).
    pub hs: Vec<ComplexMatrix>,
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl ProblemData {
    pub fn from_true(ch: &ChannelSet, gamma: &[f64], sigma2: &[f64]) -> Self {
        let hs = ch
            .h_eff
            .iter()
            .zip(sigma2)
            .map(|(h, s2)| h.scale(1.0 / s2.sqrt()))
            .collect();
        Self { hs, gamma: gamma.to_vec(), sigma2: sigma2.to_vec() }
    }

    pub fn from_estimate(est: &ChannelEstimate, gamma: &[f64], sigma2: &[f64]) -> Self {
        let hs = est
            .hbar
            .iter()
            .zip(sigma2)
            .map(|(h, s2)| h.scale(1.0 / s2.sqrt()))
            .collect();
        Self { hs, gamma: gamma.to_vec(), sigma2: sigma2.to_vec() }
    }

    pub fn users(&self) -> usize {
        self.hs.len()
    }

    pub fn nt(&self) -> usize {
        self.hs[0].nrows()
    }

    /// Reflecting elements M (effective channel has M+1 columns).
    pub fn m(&self) -> usize {
        self.hs[0].ncols() - 1
    }

    /// Lifted SINR of user k with unit noise: powers are
    /// Tr(V Hs_k^H W_j Hs_k).
    pub fn lifted_sinr(&self, w_mats: &[HermitianMatrix], v: &HermitianMatrix, k: usize) -> f64 {
        let hk = &self.hs[k];
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (j, wj) in w_mats.iter().enumerate() {
            let p = (v.matrix() * hk.adjoint() * wj.matrix() * hk).trace().re;
            if j == k {
                signal = p;
            } else {
                interference += p;
            }
        }
        signal / (interference + 1.0)
    }

    pub fn min_lifted_slack(&self, w_mats: &[HermitianMatrix], v: &HermitianMatrix) -> f64 {
        (0..self.users())
            .map(|k| self.lifted_sinr(w_mats, v, k) - self.gamma[k])
            .fold(f64::INFINITY, f64::min)
    }

    /// SINR of user k at an explicit lifted vector (rank-one evaluation).
    pub fn vector_sinr(&self, w: &[ComplexVector], v: &ComplexVector, k: usize) -> f64 {
        let a = &self.hs[k] * v;
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (j, wj) in w.iter().enumerate() {
            let p = (a.adjoint() * wj)[(0, 0)].norm_sqr();
            if j == k {
                signal = p;
            } else {
                interference += p;
            }
        }
        signal / (interference + 1.0)
    }

    pub fn min_vector_slack(&self, w: &[ComplexVector], v: &ComplexVector) -> f64 {
        (0..self.users())
            .map(|k| self.vector_sinr(w, v, k) - self.gamma[k])
            .fold(f64::INFINITY, f64::min)
    }

    fn interference_total(&self, w: &[ComplexVector], v: &ComplexVector) -> f64 {
        let mut total = 0.0;
        for k in 0..self.users() {
            let a = &self.hs[k] * v;
            for (j, wj) in w.iter().enumerate() {
                if j != k {
                    total += (a.adjoint() * wj)[(0, 0)].norm_sqr();
                }
            }
        }
        total
    }
}

/// Per-user quadratic-form matrices B_k = Hs_k V Hs_k^H for a fixed lifted
/// phase matrix.
fn beam_quadratics(data: &ProblemData, v: &HermitianMatrix) -> Vec<HermitianMatrix> {
    data.hs
        .iter()
        .map(|h| HermitianMatrix::hermitize(&(h * v.matrix() * h.adjoint())).expect("square"))
        .collect()
}

/// min sum Tr(W_k) s.t. (1/gamma_k) Tr(B_k W_k) - sum_{j!=k} Tr(B_k W_j) >= 1.
fn solve_beamforming(data: &ProblemData, b: &[HermitianMatrix], tol: f64) -> Result<BeamState, AlgError> {
    let nt = data.nt();
    let kk = data.users();
    let mut p = ConicProblem::new();
    let wvars: Vec<VarId> = (0..kk).map(|_| p.add_hermitian_var(nt)).collect();
    let mut obj = LinExpr::default();
    for &w in &wvars {
        obj.add(&p.trace_of(w), 1.0);
    }
    p.set_objective(obj);
    for k in 0..kk {
        let mut c = LinExpr::constant(1.0);
        for (j, &w) in wvars.iter().enumerate() {
            let scale = if j == k { -1.0 / data.gamma[k] } else { 1.0 };
            c.add(&p.trace_expr(w, b[k].matrix()), scale);
        }
        p.add_inequality(c);
    }
    let (st, vals) = p.solve(tol);
    match st.kind {
        SolveStatusKind::Optimal => Ok(BeamState::from_mats(
            vals.into_iter().map(|v| v.as_hermitian().clone()).collect(),
        )),
        SolveStatusKind::Infeasible => Err(AlgError::Infeasible),
        SolveStatusKind::NumericalFailure => {
            Err(AlgError::Numerical("beamforming subproblem".into()))
        }
    }
}

/// Transmit-power minimization with all surface phases fixed; `phase: None`
/// models switched-off surfaces.
pub fn beamforming_fixed_phase(
    data: &ProblemData,
    phase: Option<&PhaseState>,
    tol: f64,
) -> Result<BeamState, AlgError> {
    let b = match phase {
        Some(ps) => beam_quadratics(data, &ps.lifted_outer()),
        None => data
            .hs
            .iter()
            .map(|h| {
                let d = h.column(h.ncols() - 1).into_owned();
                HermitianMatrix::outer(&d)
            })
            .collect(),
    };
    solve_beamforming(data, &b, tol)
}

/// Beamforming against a (possibly relaxed) lifted phase matrix.
pub fn beamforming_fixed_v(
    data: &ProblemData,
    v: &HermitianMatrix,
    tol: f64,
) -> Result<BeamState, AlgError> {
    solve_beamforming(data, &beam_quadratics(data, v), tol)
}

/// Per-user lifted-constraint matrices C_k = Hs_k^H (S_k - gamma_k sum_{j!=k}
/// S_j) Hs_k for beamformer matrices S (normalized or in watts).
fn phase_quadratics(data: &ProblemData, s: &[HermitianMatrix]) -> Vec<HermitianMatrix> {
    let kk = data.users();
    (0..kk)
        .map(|k| {
            let mut mid = s[k].matrix().clone();
            for j in 0..kk {
                if j != k {
                    mid -= s[j].matrix().scale(data.gamma[k]);
                }
            }
            let hk = &data.hs[k];
            HermitianMatrix::hermitize(&(hk.adjoint() * mid * hk)).expect("square")
        })
        .collect()
}

/// Result of one inner SCA run over the scaled lifted phase matrix.
#[derive(Debug, Clone)]
pub struct ScaResult {
    /// Power variable at the last accepted inner iterate.
    pub power: f64,
    /// Scaled matrix Vbar (diag = power).
    pub vbar: HermitianMatrix,
    /// Unit-diagonal matrix V = Vbar / power.
    pub v: HermitianMatrix,
    pub inner_iterations: usize,
    pub status: StepStatus,
    /// Penalized objective sequence (true values, not surrogates).
    pub objectives: Vec<f64>,
    /// Worst violation of the spectral-norm Taylor bound observed (should be
    /// <= ~1e-9: the linearization must underestimate the true norm).
    pub taylor_violation: f64,
}

/// Inner phase update: successive convex approximation on the penalized
/// problem min P + (1/mu)(||Vbar||_* - linearized ||Vbar||_2) subject to
/// Diag(Vbar) = P 1 and the lifted QoS inequalities with normalized
/// beamformers. Stops when the rank-one deficit of Vbar/P reaches eps.
pub fn sca_phase_update(
    data: &ProblemData,
    wbar: &[HermitianMatrix],
    p_init: f64,
    vbar_init: &HermitianMatrix,
    mu: f64,
    eps: f64,
    cap: usize,
    tol: f64,
) -> ScaResult {
    let n = data.m() + 1;
    let c_mats = phase_quadratics(data, wbar);
    let mut vbar_cur = vbar_init.clone();
    let mut p_cur = p_init;
    let penalized = |vb: &HermitianMatrix, p: f64| {
        let eig = eig_hermitian(vb);
        p + (vb.trace() - eig.principal_value()) / mu
    };
    let mut f_prev = penalized(&vbar_cur, p_cur);
    let mut objectives = vec![f_prev];
    let mut taylor_violation: f64 = 0.0;
    let mut status = StepStatus::NumericalFailure;
    let mut iters = 0;
    let mut vbar_prev = vbar_cur.clone();
    let mut alpha = 0.0f64;
    // One convex subproblem majorized along the unit direction u. Any unit
    // vector yields a valid global majorizer of the spectral-norm term
    // (u^H V u <= lambda_max for every V), so the linearization direction is
    // free to come from an extrapolated point as long as descent of the true
    // penalized objective is enforced on acceptance.
    let solve_at = |u: &ComplexVector| -> Result<(HermitianMatrix, f64), StepStatus> {
        let uu = HermitianMatrix::outer(u);
        let mut prob = ConicProblem::new();
        let vb = prob.add_hermitian_var(n);
        let pvar = prob.add_scalar_var(true);
        // P + (1/mu) Tr((I - u u^H) Vbar)
        let mut obj = prob.scalar_expr(pvar, 1.0);
        let pen_coef =
            (ComplexMatrix::identity(n, n) - uu.matrix()).scale(1.0 / mu);
        obj.add(&prob.trace_expr(vb, &pen_coef), 1.0);
        prob.set_objective(obj);
        for d in 0..n {
            let mut e = prob.diag_entry(vb, d);
            e.add(&prob.scalar_expr(pvar, 1.0), -1.0);
            prob.add_equality(e);
        }
        for k in 0..data.users() {
            let mut c = LinExpr::constant(data.gamma[k]);
            c.add(&prob.trace_expr(vb, c_mats[k].matrix()), -1.0);
            prob.add_inequality(c);
        }
        let (st, vals) = prob.solve(tol);
        if st.kind != SolveStatusKind::Optimal {
            return Err(StepStatus::NumericalFailure);
        }
        Ok((vals[0].as_hermitian().clone(), vals[1].as_scalar()))
    };
    for i in 0..cap {
        iters = i + 1;
        // Plain majorize-minimize steps shrink geometrically near a
        // stationary point; first try a direction extrapolated along the
        // last move, falling back to the plain principal eigenvector so the
        // objective sequence stays non-increasing.
        let mut step: Option<(HermitianMatrix, f64, ComplexVector)> = None;
        if alpha > 0.0 {
            let vx = extrapolate_step(&vbar_cur, &vbar_prev, alpha);
            let u = eig_hermitian(&vx).principal_vector();
            if let Ok((vb, p)) = solve_at(&u) {
                if penalized(&vb, p) <= f_prev {
                    alpha = (alpha * 1.5).min(32.0);
                    step = Some((vb, p, u));
                }
            }
            if step.is_none() {
                alpha = if alpha > 1.0 { 1.0 } else { alpha / 2.0 };
            }
        }
        let (vbar_new, p_new, u) = match step {
            Some(s) => s,
            None => {
                let u = eig_hermitian(&vbar_cur).principal_vector();
                match solve_at(&u) {
                    Ok((vb, p)) => {
                        if alpha == 0.0 {
                            alpha = 1.0;
                        }
                        (vb, p, u)
                    }
                    Err(s) => {
                        status = s;
                        break;
                    }
                }
            }
        };
        let uu = HermitianMatrix::outer(&u);
        let eig_new = eig_hermitian(&vbar_new);
        // Taylor bound: true spectral norm >= its linearization along u
        let lin_val = (uu.matrix().adjoint() * vbar_new.matrix()).trace().re;
        taylor_violation = taylor_violation.max(lin_val - eig_new.spectral_norm());
        let f_new = p_new + (vbar_new.trace() - eig_new.principal_value()) / mu;
        objectives.push(f_new);
        let gap = (n as f64 - eig_new.principal_value() / p_new.max(1e-300)) / n as f64;
        vbar_prev = std::mem::replace(&mut vbar_cur, vbar_new);
        p_cur = p_new;
        // run to stationarity: a single solve from a rank-one warm start is
        // already rank-one (the nuclear-minus-spectral penalty is exact at
        // this weight), so the rank criterion alone would stop the descent
        // after one step
        // the inner threshold is tighter than the outer one so each outer
        // iteration harvests the full phase-block improvement; a loose inner
        // stall hands tiny gains back and forth between the blocks and
        // inflates the outer iteration count
        let stalled = f_prev - f_new <= 1e-2 * eps * f_prev.abs().max(1e-300);
        if gap <= eps && stalled {
            status = StepStatus::Ok;
            break;
        }
        // true stall without a rank-one iterate
        if f_prev - f_new <= 1e-12 * f_prev.abs().max(1.0) {
            status = StepStatus::NumericalFailure;
            break;
        }
        f_prev = f_new;
    }
    let v = vbar_cur.scale(1.0 / p_cur.max(1e-300));
    ScaResult {
        power: p_cur,
        vbar: vbar_cur,
        v,
        inner_iterations: iters,
        status,
        objectives,
        taylor_violation,
    }
}

fn row(
    t: usize,
    objective: f64,
    rank_gap: f64,
    slack: f64,
    inner: usize,
    status: StepStatus,
    t0: Instant,
) -> TraceRow {
    TraceRow {
        iteration: t,
        objective,
        rank_gap,
        min_sinr_slack: slack,
        inner_iterations: inner,
        status,
        millis: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// Penalty-based alternating algorithm: beamformer update at fixed (relaxed)
/// V, then SCA phase update on the penalized scaled problem; stops on
/// relative power decrease <= eps. The returned beamformers are re-solved at
/// the extracted rank-one phases so the reported solution is feasible for the
/// true unit-modulus configuration.
pub fn penalty_altmin(
    data: &ProblemData,
    opts: &AlgoOptions,
    rng: &mut impl Rng,
) -> Result<(BeamState, PhaseState, SolveTrace), AlgError> {
    let m = data.m();
    let ps0 = PhaseState::random(m, rng);
    let mut v = ps0.lifted_outer();
    let mut trace = SolveTrace::default();
    let mut p_prev = f64::INFINITY;
    let mut mu_cur = opts.mu;
    let mut last_beams: Option<BeamState> = None;
    for t in 0..opts.outer_cap {
        let t0 = Instant::now();
        let beams = match beamforming_fixed_v(data, &v, opts.tol) {
            Ok(b) => b,
            Err(e) if t == 0 => return Err(e),
            Err(_) => {
                // keep last accepted iterate
                trace.push(row(t, p_prev, lifted_rank_gap(&v), f64::NAN, 0, StepStatus::NumericalFailure, t0));
                break;
            }
        };
        let p = beams.power;
        if p > p_prev * (1.0 + 1e-9) {
            // descent guard: revert to the previous accepted iterate
            break;
        }
        let converged = t > 0 && (p_prev - p) / p <= opts.eps;
        last_beams = Some(beams.clone());
        let slack = data.min_lifted_slack(&beams.mats, &v);
        if converged {
            trace.push(row(t, p, lifted_rank_gap(&v), slack, 0, StepStatus::Ok, t0));
            trace.converged = true;
            break;
        }
        let sca = sca_phase_update(
            data,
            &beams.normalized,
            p,
            &v.scale(p),
            mu_cur,
            opts.eps,
            opts.inner_cap,
            opts.tol,
        );
        v = sca.v.clone();
        trace.push(row(t, p, lifted_rank_gap(&v), slack, sca.inner_iterations, sca.status, t0));
        p_prev = p;
        if opts.mu_halving {
            mu_cur *= 0.5;
        }
    }
    if last_beams.is_none() {
        return Err(AlgError::Numerical("no accepted iterate".into()));
    }
    let ext = extract_rank_one(&v, ExtractMode::Phase);
    let ps = PhaseState::from_lifted_entries(&ext.vector);
    let beams = beamforming_fixed_phase(data, Some(&ps), opts.tol)
        .map_err(|_| AlgError::Numerical("final rank-one re-solve failed".into()))?;
    Ok((beams, ps, trace))
}

/// Feasibility program over the lifted phase matrix at fixed beamformers:
/// find V PSD with unit diagonal satisfying the lifted QoS constraints.
pub fn phase_feasibility_sdp(
    data: &ProblemData,
    w_mats: &[HermitianMatrix],
    tol: f64,
) -> Result<HermitianMatrix, AlgError> {
    let n = data.m() + 1;
    let c_mats = phase_quadratics(data, w_mats);
    let mut prob = ConicProblem::new();
    let vb = prob.add_hermitian_var(n);
    prob.set_objective(LinExpr::default());
    for d in 0..n {
        let mut e = prob.diag_entry(vb, d);
        e.constant -= 1.0;
        prob.add_equality(e);
    }
    for k in 0..data.users() {
        let mut c = LinExpr::constant(data.gamma[k]);
        c.add(&prob.trace_expr(vb, c_mats[k].matrix()), -1.0);
        prob.add_inequality(c);
    }
    let (st, vals) = prob.solve(tol);
    match st.kind {
        SolveStatusKind::Optimal => Ok(vals[0].as_hermitian().clone()),
        SolveStatusKind::Infeasible => Err(AlgError::Infeasible),
        SolveStatusKind::NumericalFailure => Err(AlgError::Numerical("phase feasibility".into())),
    }
}

/// Relax-and-randomize alternating baseline: beamforming at fixed phases,
/// then a feasibility semidefinite program over the lifted phase matrix with
/// Gaussian randomization; the best draw (max-min SINR slack, ties broken by
/// lower interference) always replaces the phases. The iteration budget is
/// supplied by the caller; the objective is NOT guaranteed monotone. The
/// final beamformer solve at the last phases doubles as the feasibility
/// fallback.
pub fn sdr_altmin(
    data: &ProblemData,
    budget: usize,
    opts: &AlgoOptions,
    rng: &mut impl Rng,
) -> Result<(BeamState, PhaseState, SolveTrace), AlgError> {
    let m = data.m();
    let mut ps = PhaseState::random(m, rng);
    let mut trace = SolveTrace::default();
    let t0 = Instant::now();
    let mut beams = beamforming_fixed_phase(data, Some(&ps), opts.tol)?;
    let v0 = ps.lifted_outer();
    trace.push(row(0, beams.power, 0.0, data.min_lifted_slack(&beams.mats, &v0), 0, StepStatus::Ok, t0));
    for t in 1..budget.max(1) {
        let t0 = Instant::now();
        let v_relaxed = match phase_feasibility_sdp(data, &beams.mats, opts.tol) {
            Ok(v) => v,
            Err(_) => {
                trace.push(row(t, beams.power, 0.0, f64::NAN, 0, StepStatus::NumericalFailure, t0));
                break;
            }
        };
        let draws = gaussian_randomize(&v_relaxed, opts.draws, rng);
        let mut best: Option<(f64, f64, ComplexVector)> = None;
        for dv in draws {
            let slack = data.min_vector_slack(&beams.w, &dv);
            let interf = data.interference_total(&beams.w, &dv);
            let better = match &best {
                None => true,
                Some((bs, bi, _)) => slack > *bs || (slack == *bs && interf < *bi),
            };
            if better {
                best = Some((slack, interf, dv));
            }
        }
        let (_, _, best_v) = best.expect("draws > 0");
        let head = ComplexVector::from_iterator(m, best_v.iter().take(m).copied());
        ps = PhaseState::from_lifted_entries(&head);
        beams = match beamforming_fixed_phase(data, Some(&ps), opts.tol) {
            Ok(b) => b,
            Err(_) => {
                trace.push(row(t, f64::NAN, 0.0, f64::NAN, 0, StepStatus::Infeasible, t0));
                break;
            }
        };
        let v = ps.lifted_outer();
        trace.push(row(t, beams.power, 0.0, data.min_lifted_slack(&beams.mats, &v), 0, StepStatus::Ok, t0));
    }
    Ok((beams, ps, trace))
}

/// Candidate iterate one extrapolation step `alpha` beyond `cur` along the
/// direction `cur - prev`; the unit diagonal is preserved because the
/// combination is affine.
pub(crate) fn extrapolate_step(
    cur: &HermitianMatrix,
    prev: &HermitianMatrix,
    alpha: f64,
) -> HermitianMatrix {
    HermitianMatrix::hermitize(&(cur.matrix().scale(1.0 + alpha) - prev.matrix().scale(alpha)))
        .expect("square")
}

/// Inner-approximation joint update: both blocks move each iteration under a
/// convexified QoS constraint built from the quadratic splitting
/// Tr(Wt G) = 0.5||Wt + G||_F^2 - 0.5||Wt||_F^2 - 0.5||G||_F^2, with the
/// convex first term linearized at the previous iterate. Every iterate is
/// feasible for the original lifted QoS constraint.
pub fn ia_solve(
    data: &ProblemData,
    opts: &AlgoOptions,
    rng: &mut impl Rng,
) -> Result<(BeamState, PhaseState, SolveTrace), AlgError> {
    let m = data.m();
    let n = m + 1;
    let nt = data.nt();
    let kk = data.users();
    let mut first_err: Option<AlgError> = None;
    for _restart in 0..5 {
        let ps0 = PhaseState::random(m, rng);
        let beams0 = match beamforming_fixed_phase(data, Some(&ps0), opts.tol) {
            Ok(b) => b,
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
                continue;
            }
        };
        let mut w_mats = beams0.mats.clone();
        let mut v_cur = ps0.lifted_outer();
        let mut w_prev = w_mats.clone();
        let mut v_prev = v_cur.clone();
        let mut obj_prev = beams0.power;
        let mut alpha = 0.0f64;
        let mut trace = SolveTrace::default();
        let mut failed = false;
        // One convexified subproblem expanded at (w_exp, v_exp). The
        // linearized concave term is a global bound, so the subproblem is a
        // restriction of the true constraint set for ANY expansion point and
        // every returned iterate is feasible for the original problem.
        let solve_at = |w_exp: &[HermitianMatrix],
                        v_exp: &HermitianMatrix|
         -> Result<(Vec<HermitianMatrix>, HermitianMatrix, f64), SolveStatusKind> {
            let mut prob = ConicProblem::new();
            let wvars: Vec<VarId> = (0..kk).map(|_| prob.add_hermitian_var(nt)).collect();
            let vvar = prob.add_hermitian_var(n);
            let mut obj = LinExpr::default();
            for &w in &wvars {
                obj.add(&prob.trace_of(w), 1.0);
            }
            prob.set_objective(obj);
            for d in 0..n {
                let mut e = prob.diag_entry(vvar, d);
                e.constant -= 1.0;
                prob.add_equality(e);
            }
            if opts.keep_rank_constraint {
                let u = eig_hermitian(v_exp).principal_vector();
                let uu = HermitianMatrix::outer(&u);
                let mut c = LinExpr::constant(n as f64);
                c.add(&prob.trace_expr(vvar, uu.matrix()), -1.0);
                prob.add_inequality(c);
            }
            let v_basis = prob.hermitian_basis(vvar);
            for k in 0..kk {
                let hk = &data.hs[k];
                // expansion point Z = Wt_k + Hs V Hs^H
                let mut wt = w_exp[k].matrix().clone();
                for j in 0..kk {
                    if j != k {
                        wt -= w_exp[j].matrix().scale(data.gamma[k]);
                    }
                }
                let g_prev = hk * v_exp.matrix() * hk.adjoint();
                let z = HermitianMatrix::hermitize(&(&wt + &g_prev)).expect("square");
                let z_norm2: f64 = z.matrix().iter().map(|x| x.norm_sqr()).sum();
                // -Re Tr(Z^H Wtilde) - Re Tr(Z^H G) as linear functionals
                let mut lin = LinExpr::constant(data.gamma[k] + 0.5 * z_norm2);
                for (j, &w) in wvars.iter().enumerate() {
                    let scale = if j == k { -1.0 } else { data.gamma[k] };
                    lin.add(&prob.trace_expr(w, z.matrix()), scale);
                }
                let zg = HermitianMatrix::hermitize(&(hk.adjoint() * z.matrix() * hk))
                    .expect("square");
                lin.add(&prob.trace_expr(vvar, zg.matrix()), -1.0);
                // stacked [Wtilde | G], Frobenius norm squared adds
                let mut mat = AffineMat::zeros(nt, 2 * nt);
                for (j, &w) in wvars.iter().enumerate() {
                    let scale = if j == k {
                        C64::new(1.0, 0.0)
                    } else {
                        C64::new(-data.gamma[k], 0.0)
                    };
                    for (param, basis) in prob.hermitian_basis(w) {
                        let mut coef = ComplexMatrix::zeros(nt, 2 * nt);
                        coef.view_mut((0, 0), (nt, nt)).copy_from(&(basis * scale));
                        mat.add_term(param, coef);
                    }
                }
                for (param, basis) in &v_basis {
                    let g = hk * basis * hk.adjoint();
                    let mut coef = ComplexMatrix::zeros(nt, 2 * nt);
                    coef.view_mut((0, nt), (nt, nt)).copy_from(&g);
                    mat.add_term(*param, coef);
                }
                prob.add_quad(QuadConstraint { mat, lin });
            }
            // The convexified joint subproblem is degenerate at its optimum
            // (tight second-order restriction plus a rank-deficient lifted
            // matrix), which stalls interior-point tail convergence at the
            // strictest tolerance. Solve it slightly looser; the final
            // rank-one re-solve below runs at the caller's tolerance and
            // guarantees the quality of the reported solution.
            let (st, vals) = prob.solve(opts.tol.max(3e-6));
            if st.kind != SolveStatusKind::Optimal {
                return Err(st.kind);
            }
            let w_new: Vec<HermitianMatrix> =
                (0..kk).map(|k| vals[k].as_hermitian().clone()).collect();
            let v_new = vals[kk].as_hermitian().clone();
            let objective: f64 = w_new.iter().map(|w| w.trace()).sum();
            Ok((w_new, v_new, objective))
        };
        for t in 0..opts.ia_cap {
            let t0 = Instant::now();
            // Plain successive-convex steps shrink geometrically near a
            // stationary point, so first try an inertial expansion point
            // extrapolated along the last step. The result is kept only if
            // its objective did not increase; otherwise fall back to the
            // plain expansion point, so the objective sequence stays
            // non-increasing.
            let mut step = None;
            if alpha > 0.0 {
                let w_exp: Vec<HermitianMatrix> = w_mats
                    .iter()
                    .zip(w_prev.iter())
                    .map(|(c, p)| extrapolate_step(c, p, alpha))
                    .collect();
                let v_exp = extrapolate_step(&v_cur, &v_prev, alpha);
                match solve_at(&w_exp, &v_exp) {
                    Ok(s) if s.2 <= obj_prev => {
                        alpha = (alpha * 1.5).min(32.0);
                        step = Some(s);
                    }
                    _ => alpha = if alpha > 1.0 { 1.0 } else { alpha / 2.0 },
                }
            }
            let (w_new, v_new, objective) = match step {
                Some(s) => s,
                None => match solve_at(&w_mats, &v_cur) {
                    Ok(s) => {
                        if alpha == 0.0 {
                            alpha = 1.0;
                        }
                        s
                    }
                    Err(st) => {
                        log::debug!(
                            "inner-approximation subproblem {st:?} at iteration {t}, objective {obj_prev:.6e}, rank gap {:.3e}",
                            lifted_rank_gap(&v_cur)
                        );
                        trace.push(row(t, obj_prev, lifted_rank_gap(&v_cur), f64::NAN, 0, StepStatus::NumericalFailure, t0));
                        failed = true;
                        break;
                    }
                },
            };
            w_prev = std::mem::replace(&mut w_mats, w_new);
            v_prev = std::mem::replace(&mut v_cur, v_new);
            let gap = lifted_rank_gap(&v_cur);
            let slack = data.min_lifted_slack(&w_mats, &v_cur);
            trace.push(row(t, objective, gap, slack, 0, StepStatus::Ok, t0));
            let obj_converged = (obj_prev - objective) / objective.max(1e-300) <= opts.eps;
            obj_prev = objective;
            if obj_converged && gap <= opts.eps {
                trace.converged = true;
                break;
            }
        }
        if !trace.converged {
            // a subproblem stall or an exhausted cap still yields a usable
            // iterate if at least one step succeeded and the rank gap closed
            // (every accepted iterate is feasible for the original
            // constraint set); otherwise restart
            let ok_steps = trace
                .rows
                .iter()
                .filter(|r| r.status == StepStatus::Ok)
                .count();
            if ok_steps == 0 || lifted_rank_gap(&v_cur) > opts.eps {
                log::debug!(
                    "inner-approximation restart: failed={failed} converged={} rank gap {:.3e} objective {obj_prev:.6e}",
                    trace.converged,
                    lifted_rank_gap(&v_cur)
                );
                continue;
            }
        }
        let ext = extract_rank_one(&v_cur, ExtractMode::Phase);
        let ps = PhaseState::from_lifted_entries(&ext.vector);
        let beams = beamforming_fixed_phase(data, Some(&ps), opts.tol)
            .map_err(|_| AlgError::Numerical("final rank-one re-solve failed".into()))?;
        return Ok((beams, ps, trace));
    }
    Err(first_err.unwrap_or(AlgError::Numerical("inner approximation failed to converge".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_channels, scenario_rng, RngPurpose, ScenarioConfig};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg_small(k: usize) -> ScenarioConfig {
        ScenarioConfig {
            nt: 3,
            m_l: vec![4],
            k,
            sigma2: vec![1e-12; k],
            gamma: vec![10f64.powf(0.2); k],
            ..Default::default()
        }
    }

    fn data_for(cfg: &ScenarioConfig, drop: usize) -> ProblemData {
        let ch = generate_channels(cfg, drop).unwrap();
        ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2)
    }

    #[test]
    fn single_user_no_irs_matches_matched_filter() {
        let cfg = cfg_small(1);
        let data = data_for(&cfg, 0);
        let beams = beamforming_fixed_phase(&data, None, DEFAULT_TOL).unwrap();
        let d = data.hs[0].column(data.hs[0].ncols() - 1).into_owned();
        let expect = cfg.gamma[0] / d.norm_squared();
        assert_relative_eq!(beams.power, expect, max_relative = 1e-6);
        // beamformer parallel to direct channel
        let w = &beams.w[0];
        let overlap = (d.adjoint() * w)[(0, 0)].norm() / (d.norm() * w.norm());
        assert!(overlap > 1.0 - 1e-6);
    }

    #[test]
    fn orthogonal_users_decouple() {
        // two users with orthogonal direct channels and no surface: total
        // power is the sum of single-user closed forms
        let nt = 2;
        let gamma = vec![1.5, 2.0];
        let sigma2 = vec![1.0, 1.0];
        let mut d0 = ComplexVector::zeros(nt);
        d0[0] = C64::new(2.0, 0.0);
        let mut d1 = ComplexVector::zeros(nt);
        d1[1] = C64::new(0.5, 0.5);
        // assemble effective matrices with zero cascaded part, M = 1
        let build = |d: &ComplexVector| {
            let mut h = ComplexMatrix::zeros(nt, 2);
            for i in 0..nt {
                h[(i, 1)] = d[i];
            }
            h
        };
        let data = ProblemData { hs: vec![build(&d0), build(&d1)], gamma: gamma.clone(), sigma2 };
        let beams = beamforming_fixed_phase(&data, None, DEFAULT_TOL).unwrap();
        let expect = gamma[0] / d0.norm_squared() + gamma[1] / d1.norm_squared();
        assert_relative_eq!(beams.power, expect, max_relative = 1e-6);
    }

    #[test]
    fn noise_scale_equivariance() {
        let cfg = cfg_small(2);
        let ch = generate_channels(&cfg, 1).unwrap();
        let data1 = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
        let doubled: Vec<f64> = cfg.sigma2.iter().map(|s| 2.0 * s).collect();
        let data2 = ProblemData::from_true(&ch, &cfg.gamma, &doubled);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ps = PhaseState::random(ch.m(), &mut rng);
        let p1 = beamforming_fixed_phase(&data1, Some(&ps), DEFAULT_TOL).unwrap().power;
        let p2 = beamforming_fixed_phase(&data2, Some(&ps), DEFAULT_TOL).unwrap().power;
        assert_relative_eq!(p2, 2.0 * p1, max_relative = 1e-6);
    }

    #[test]
    fn sca_fixed_point_at_feasible_rank_one() {
        // initialize the SCA at a feasible rank-one scaled matrix: the
        // penalty term is zero and stays zero
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ps = PhaseState::random(data.m(), &mut rng);
        let beams = beamforming_fixed_phase(&data, Some(&ps), DEFAULT_TOL).unwrap();
        let vbar0 = ps.lifted_outer().scale(beams.power);
        let res = sca_phase_update(
            &data,
            &beams.normalized,
            beams.power,
            &vbar0,
            1e-3,
            1e-5,
            50,
            DEFAULT_TOL,
        );
        assert_eq!(res.status, StepStatus::Ok);
        let eig = eig_hermitian(&res.vbar);
        let pen = res.vbar.trace() - eig.principal_value();
        assert!(pen <= 1e-6 * res.vbar.trace(), "penalty {pen}");
        assert!(res.taylor_violation <= 1e-9);
    }

    #[test]
    fn sca_inner_objective_non_increasing() {
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ps = PhaseState::random(data.m(), &mut rng);
        let beams = beamforming_fixed_phase(&data, Some(&ps), DEFAULT_TOL).unwrap();
        let res = sca_phase_update(
            &data,
            &beams.normalized,
            beams.power,
            &ps.lifted_outer().scale(beams.power),
            1e-3,
            1e-5,
            100,
            DEFAULT_TOL,
        );
        for w in res.objectives.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-7), "{} -> {}", w[0], w[1]);
        }
        assert!(res.taylor_violation <= 1e-9);
    }

    #[test]
    fn large_mu_relaxation_lower_bounds_penalized_power() {
        // with mu huge the update minimizes power alone (relaxed), so its
        // power cannot exceed the penalized run's power
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let ps = PhaseState::random(data.m(), &mut rng);
        let beams = beamforming_fixed_phase(&data, Some(&ps), DEFAULT_TOL).unwrap();
        let vbar0 = ps.lifted_outer().scale(beams.power);
        let relaxed =
            sca_phase_update(&data, &beams.normalized, beams.power, &vbar0, 1e6, 1e-5, 3, DEFAULT_TOL);
        let penalized =
            sca_phase_update(&data, &beams.normalized, beams.power, &vbar0, 1e-3, 1e-5, 100, DEFAULT_TOL);
        assert!(
            relaxed.power <= penalized.power * (1.0 + 1e-6),
            "relaxed {} penalized {}",
            relaxed.power,
            penalized.power
        );
    }

    #[test]
    fn penalty_altmin_descends_and_is_feasible() {
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 5);
        let opts = AlgoOptions::default();
        let mut rng = scenario_rng(cfg.seed, 5, RngPurpose::PhaseInit);
        let (beams, ps, trace) = penalty_altmin(&data, &opts, &mut rng).unwrap();
        assert!(trace.is_non_increasing(1e-7));
        assert!(trace.converged);
        let v = ps.lifted();
        let slack = data.min_vector_slack(&beams.w, &v);
        assert!(slack >= -1e-6, "slack {slack}");
        assert!(beams.max_rank_ratio <= 1e-6);
    }

    #[test]
    fn sdr_altmin_runs_and_final_solution_feasible() {
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 6);
        let opts = AlgoOptions::default();
        let mut rng = scenario_rng(cfg.seed, 6, RngPurpose::PhaseInit);
        let (beams, ps, trace) = sdr_altmin(&data, 8, &opts, &mut rng).unwrap();
        assert!(trace.iterations() >= 1);
        let slack = data.min_vector_slack(&beams.w, &ps.lifted());
        assert!(slack >= -1e-6, "slack {slack}");
    }

    #[test]
    fn sdr_degenerate_single_iteration_is_plain_beamforming() {
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 7);
        let opts = AlgoOptions::default();
        let mut rng = scenario_rng(cfg.seed, 7, RngPurpose::PhaseInit);
        let (beams, ps, trace) = sdr_altmin(&data, 1, &opts, &mut rng).unwrap();
        assert_eq!(trace.iterations(), 1);
        let mut rng2 = scenario_rng(cfg.seed, 7, RngPurpose::PhaseInit);
        let ps2 = PhaseState::random(data.m(), &mut rng2);
        assert_eq!(ps.theta, ps2.theta);
        let direct = beamforming_fixed_phase(&data, Some(&ps2), DEFAULT_TOL).unwrap();
        assert_relative_eq!(beams.power, direct.power, max_relative = 1e-9);
    }

    #[test]
    fn ia_iterates_feasible_and_descending() {
        let cfg = cfg_small(2);
        let data = data_for(&cfg, 8);
        let opts = AlgoOptions { eps: 1e-4, ..Default::default() };
        let mut rng = scenario_rng(cfg.seed, 8, RngPurpose::PhaseInit);
        let (beams, ps, trace) = ia_solve(&data, &opts, &mut rng).unwrap();
        assert!(trace.is_non_increasing(1e-7));
        for r in &trace.rows {
            assert!(r.min_sinr_slack >= -1e-6, "iterate slack {}", r.min_sinr_slack);
        }
        let slack = data.min_vector_slack(&beams.w, &ps.lifted());
        assert!(slack >= -1e-6, "final slack {slack}");
    }

    #[test]
    fn dc_splitting_identity() {
        // Tr(A G) = 0.5||A + G||^2 - 0.5||A||^2 - 0.5||G||^2 for Hermitian A, G
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let a = HermitianMatrix::hermitize(&ComplexMatrix::from_fn(4, 4, |_, _| {
                crate::matcore::standard_complex_normal(&mut rng)
            }))
            .unwrap();
            let g = HermitianMatrix::hermitize(&ComplexMatrix::from_fn(4, 4, |_, _| {
                crate::matcore::standard_complex_normal(&mut rng)
            }))
            .unwrap();
            let lhs = a.trace_product(&g);
            let sum = a.matrix() + g.matrix();
            let rhs = 0.5 * sum.iter().map(|z| z.norm_sqr()).sum::<f64>()
                - 0.5 * a.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>()
                - 0.5 * g.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn infeasible_targets_detected() {
        // more users than antennas with enormous targets cannot be served
        let mut cfg = cfg_small(3);
        cfg.nt = 1;
        cfg.m_l = vec![2];
        cfg.gamma = vec![1e6; 3];
        let ch = generate_channels(&cfg, 0).unwrap();
        let data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
        assert!(matches!(
            beamforming_fixed_phase(&data, None, DEFAULT_TOL),
            Err(AlgError::Infeasible)
        ));
    }
}
