//! Worst-case robust design under norm-bounded channel-estimate error.
//!
//! The robust QoS requirement demands the SINR target hold for every
//! effective-channel perturbation inside a Frobenius ball of radius eps_k
//! around the estimate. Via vectorization, the requirement is a quadratic
//! inequality in the perturbation and converts — through the S-procedure with
//! one nonnegative multiplier per user — into a single linear matrix
//! inequality per user. The solvers below work with reduced-dimension
//! equivalents obtained by factoring the Kronecker middle matrix, so the cone
//! dimension scales with the numerical rank of the fixed block instead of the
//! full lifted product.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::algorithms::{AlgError, AlgoOptions, ProblemData};
use crate::channel::ChannelEstimate;
use crate::matcore::{
    eig_hermitian, kron, standard_complex_normal, vec_mat, C64, ComplexMatrix, ComplexVector,
    HermitianMatrix,
};
use crate::sdp::{
    extract_rank_one, ConicProblem, ExtractMode, LinExpr, MatExpr, SolveStatusKind, VarId,
};
use crate::state::{lifted_rank_gap, BeamState, PhaseState, SolveTrace, StepStatus, TraceRow};

/// Largest admissible full LMI dimension Nt(M+1)+1; the matrix inequality
/// grows multiplicatively in antennas and reflecting elements.
pub const MAX_LMI_DIM: usize = 2000;

/// Relative eigenvalue threshold below which a factor direction is dropped
/// when reducing the Kronecker middle matrix.
const FACTOR_RANK_TOL: f64 = 1e-10;

/// Noise-normalized robust problem data: estimated effective channels divided
/// by the per-user noise standard deviation, with matching scaled radii.
#[derive(Debug, Clone)]
pub struct RobustData {
    /// Nominal (estimated) problem data, H̄_k / sigma_k.
    pub nominal: ProblemData,
    /// Scaled aggregate radii eps_k / sigma_k.
    pub eps: Vec<f64>,
}

impl RobustData {
    pub fn from_estimate(est: &ChannelEstimate, gamma: &[f64], sigma2: &[f64]) -> Self {
        let nominal = ProblemData::from_estimate(est, gamma, sigma2);
        let eps = est
            .eps
            .iter()
            .zip(sigma2)
            .map(|(e, s2)| e / s2.sqrt())
            .collect();
        Self { nominal, eps }
    }

    pub fn users(&self) -> usize {
        self.nominal.users()
    }
}

/// Symbolic per-user pieces of the robust LMIs: the vectorized channel
/// estimate column, the uncertainty radius, and the target. The nonnegative
/// multipliers are fresh decision variables in every solve, never stored.
#[derive(Debug, Clone)]
pub struct RobustConstraintSet {
    /// Vectorized noise-normalized estimates g_k = vec(H̄_k / sigma_k).
    pub gbar: Vec<ComplexVector>,
    /// Scaled radii eps_k / sigma_k.
    pub eps: Vec<f64>,
    /// SINR targets (the noise term gamma_k sigma_k^2 is 1 * gamma_k after
    /// normalization).
    pub gamma: Vec<f64>,
    /// Full LMI dimension Nt(M+1)+1.
    pub dim: usize,
}

/// Builds the symbolic robust constraint set, rejecting instances whose full
/// LMI dimension is unreasonably large.
pub fn build_robust_lmi(data: &RobustData) -> Result<RobustConstraintSet, AlgError> {
    let nt = data.nominal.nt();
    let n = data.nominal.m() + 1;
    let dim = nt * n + 1;
    if dim > MAX_LMI_DIM {
        return Err(AlgError::Numerical(format!(
            "robust LMI dimension {dim} exceeds {MAX_LMI_DIM}; the matrix inequality scales as \
             antennas x (elements + 1) + 1 — reduce the antenna count or the number of \
             reflecting elements"
        )));
    }
    Ok(RobustConstraintSet {
        gbar: data.nominal.hs.iter().map(vec_mat).collect(),
        eps: data.eps.clone(),
        gamma: data.nominal.gamma.clone(),
        dim,
    })
}

impl RobustConstraintSet {
    /// Block-diagonal constant blkdiag(q I, -q eps_k^2 - gamma_k) at a fixed
    /// multiplier value.
    pub fn p_matrix(&self, k: usize, q: f64) -> ComplexMatrix {
        let d = self.dim;
        let mut m = ComplexMatrix::identity(d, d).scale(q);
        m[(d - 1, d - 1)] = C64::new(-q * self.eps[k] * self.eps[k] - self.gamma[k], 0.0);
        m
    }

    /// Selector [I, g_k] mapping (perturbation, 1) to the perturbed
    /// vectorized channel.
    pub fn g_matrix(&self, k: usize) -> ComplexMatrix {
        let d = self.dim - 1;
        let mut g = ComplexMatrix::zeros(d, d + 1);
        g.view_mut((0, 0), (d, d))
            .copy_from(&ComplexMatrix::identity(d, d));
        g.view_mut((0, d), (d, 1))
            .copy_from(&ComplexMatrix::from_fn(d, 1, |i, _| self.gbar[k][i]));
        g
    }

    /// Full-dimension numeric LMI P_k + G_k^H (V^T kron T_k) G_k at fixed
    /// values, where T_k = W_k - gamma_k sum_{j != k} W_j is the
    /// signal-minus-weighted-interference matrix in watts. Used to validate
    /// the reduced solver paths.
    pub fn full_lmi(
        &self,
        k: usize,
        q: f64,
        t_k: &ComplexMatrix,
        v: &ComplexMatrix,
    ) -> HermitianMatrix {
        let big_q = kron(&v.transpose(), t_k);
        let g = self.g_matrix(k);
        let m = self.p_matrix(k, q) + g.adjoint() * big_q * g;
        HermitianMatrix::hermitize(&m).expect("square")
    }
}

/// Kept eigenpairs of a Hermitian matrix: columns of the returned matrix are
/// orthonormal factor directions, values the matching eigenvalues. Directions
/// with |eigenvalue| below a relative threshold are dropped.
fn significant_eigenpairs(a: &HermitianMatrix) -> (ComplexMatrix, Vec<f64>) {
    let eig = eig_hermitian(a);
    let top = eig.spectral_norm();
    let kept: Vec<usize> = (0..eig.values.len())
        .filter(|&i| eig.values[i].abs() > FACTOR_RANK_TOL * top.max(1e-300))
        .collect();
    let n = a.dim();
    let mut u = ComplexMatrix::zeros(n, kept.len().max(1));
    let mut vals = Vec::with_capacity(kept.len().max(1));
    if kept.is_empty() {
        // degenerate zero matrix: keep one direction with zero weight
        u[(0, 0)] = C64::new(1.0, 0.0);
        vals.push(0.0);
    } else {
        for (c, &i) in kept.iter().enumerate() {
            u.set_column(c, &eig.vectors.column(i));
            vals.push(eig.values[i]);
        }
    }
    (u, vals)
}

fn guard_reduced_dim(dim: usize) -> Result<(), AlgError> {
    if dim > MAX_LMI_DIM {
        return Err(AlgError::Numerical(format!(
            "reduced robust LMI dimension {dim} exceeds {MAX_LMI_DIM}; reduce the antenna count \
             or the number of reflecting elements"
        )));
    }
    Ok(())
}


/// Scales an affine Hermitian expression by a positive constant so its
/// largest coefficient magnitude is one; positive scaling keeps the cone
/// constraint equivalent and improves solver conditioning.
fn normalize_lmi(lmi: MatExpr) -> MatExpr {
    let scale = lmi.max_coeff_norm();
    if scale > 0.0 {
        lmi.scale(1.0 / scale)
    } else {
        lmi
    }
}

/// Emits the per-user robust LMIs for the beamformer step at a fixed lifted
/// phase matrix V (unit diagonal, any rank). With V^T = U S U^H the full
/// inequality is unitarily equivalent to a reduced one of dimension
/// rank(V) * Nt + 1 padded by copies of the bare multiplier, so enforcing the
/// reduced inequality together with q >= 0 is exact.
fn add_robust_beam_lmis(
    prob: &mut ConicProblem,
    data: &RobustData,
    wvars: &[VarId],
    v: &HermitianMatrix,
) -> Result<(), AlgError> {
    let nt = data.nominal.nt();
    let kk = data.users();
    let (u, svals) = significant_eigenpairs(&HermitianMatrix::hermitize(
        &v.matrix().transpose(),
    )
    .expect("square"));
    let r = svals.len();
    let rdim = r * nt + 1;
    guard_reduced_dim(rdim)?;
    let sig = ComplexMatrix::from_fn(r, r, |i, j| {
        if i == j { C64::new(svals[i], 0.0) } else { C64::new(0.0, 0.0) }
    });
    let bases: Vec<Vec<(usize, ComplexMatrix)>> =
        wvars.iter().map(|&w| prob.hermitian_basis(w)).collect();
    for k in 0..kk {
        // a = (U^H kron I) vec(Hs) = vec(Hs conj(U))
        let a = vec_mat(&(&data.nominal.hs[k] * u.conjugate()));
        let qvar = prob.add_scalar_var(true);
        let qparam = prob.scalar_param(qvar);
        let mut lmi = MatExpr::zeros(rdim);
        let mut corner = ComplexMatrix::zeros(rdim, rdim);
        corner[(rdim - 1, rdim - 1)] = C64::new(-data.nominal.gamma[k], 0.0);
        lmi.add_const(&corner);
        let mut qcoef = ComplexMatrix::identity(rdim, rdim);
        qcoef[(rdim - 1, rdim - 1)] = C64::new(-data.eps[k] * data.eps[k], 0.0);
        lmi.add_term(qparam, qcoef);
        for (j, basis) in bases.iter().enumerate() {
            let scale = if j == k { 1.0 } else { -data.nominal.gamma[k] };
            for (param, b) in basis {
                let mid = kron(&sig, &b.scale(scale));
                let col = &mid * &a;
                let mut coef = ComplexMatrix::zeros(rdim, rdim);
                coef.view_mut((0, 0), (rdim - 1, rdim - 1)).copy_from(&mid);
                for i in 0..rdim - 1 {
                    coef[(i, rdim - 1)] = col[i];
                    coef[(rdim - 1, i)] = col[i].conj();
                }
                coef[(rdim - 1, rdim - 1)] = (a.adjoint() * &col)[(0, 0)];
                lmi.add_term(*param, coef);
            }
        }
        prob.add_lmi(normalize_lmi(lmi));
    }
    Ok(())
}

/// Worst-case transmit-power minimization at a fixed (relaxed) lifted phase
/// matrix: min sum Tr(W_k) subject to the per-user robust LMIs.
pub fn robust_beamforming_fixed_v(
    data: &RobustData,
    v: &HermitianMatrix,
    tol: f64,
) -> Result<BeamState, AlgError> {
    let nt = data.nominal.nt();
    let kk = data.users();
    let mut prob = ConicProblem::new();
    let wvars: Vec<VarId> = (0..kk).map(|_| prob.add_hermitian_var(nt)).collect();
    let mut obj = LinExpr::default();
    for &w in &wvars {
        obj.add(&prob.trace_of(w), 1.0);
    }
    prob.set_objective(obj);
    add_robust_beam_lmis(&mut prob, data, &wvars, v)?;
    let (st, vals) = prob.solve(tol);
    match st.kind {
        SolveStatusKind::Optimal => Ok(BeamState::from_mats(
            (0..kk).map(|k| vals[k].as_hermitian().clone()).collect(),
        )),
        SolveStatusKind::Infeasible => Err(AlgError::Infeasible),
        SolveStatusKind::NumericalFailure => {
            Err(AlgError::Numerical("robust beamforming subproblem".into()))
        }
    }
}

/// Worst-case beamforming at fixed unit-modulus phases.
pub fn robust_beamforming_fixed_phase(
    data: &RobustData,
    phase: &PhaseState,
    tol: f64,
) -> Result<BeamState, AlgError> {
    robust_beamforming_fixed_v(data, &phase.lifted_outer(), tol)
}

/// Robust inner phase update: the nominal lifted QoS trace inequalities are
/// replaced by reduced robust LMIs in the scaled matrix V̄ = P V. With the
/// normalized beamformers fixed, T̄_k = E L E^H factors the indefinite
/// signal-minus-interference matrix and the reduced inequality has dimension
/// (M+1) * rank(T̄_k) + 1; the product V̄^T kron T̄_k carries exactly one
/// power factor.
#[allow(clippy::too_many_arguments)]
pub fn robust_sca_phase_update(
    data: &RobustData,
    wbar: &[HermitianMatrix],
    p_init: f64,
    vbar_init: &HermitianMatrix,
    mu: f64,
    eps: f64,
    cap: usize,
    tol: f64,
) -> crate::algorithms::ScaResult {
    use crate::algorithms::ScaResult;
    let n = data.nominal.m() + 1;
    let kk = data.users();
    // fixed per-user factors of T̄_k
    let mut factors = Vec::with_capacity(kk);
    for k in 0..kk {
        let mut mid = wbar[k].matrix().clone();
        for j in 0..kk {
            if j != k {
                mid -= wbar[j].matrix().scale(data.nominal.gamma[k]);
            }
        }
        let t = HermitianMatrix::hermitize(&mid).expect("square");
        let (e, lam) = significant_eigenpairs(&t);
        // g = (I kron E^H) vec(Hs) = vec(E^H Hs)
        let g = vec_mat(&(e.adjoint() * &data.nominal.hs[k]));
        factors.push((e, lam, g));
    }
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
        let mut obj = prob.scalar_expr(pvar, 1.0);
        let pen_coef = (ComplexMatrix::identity(n, n) - uu.matrix()).scale(1.0 / mu);
        obj.add(&prob.trace_expr(vb, &pen_coef), 1.0);
        prob.set_objective(obj);
        for d in 0..n {
            let mut e = prob.diag_entry(vb, d);
            e.add(&prob.scalar_expr(pvar, 1.0), -1.0);
            prob.add_equality(e);
        }
        let v_basis = prob.hermitian_basis(vb);
        let mut dim_ok = true;
        for k in 0..kk {
            let (_, lam, g) = &factors[k];
            let r = lam.len();
            let rdim = n * r + 1;
            if guard_reduced_dim(rdim).is_err() {
                dim_ok = false;
                break;
            }
            let lam_mat = ComplexMatrix::from_fn(r, r, |a, b| {
                if a == b { C64::new(lam[a], 0.0) } else { C64::new(0.0, 0.0) }
            });
            let qvar = prob.add_scalar_var(true);
            let qparam = prob.scalar_param(qvar);
            let mut lmi = MatExpr::zeros(rdim);
            let mut corner = ComplexMatrix::zeros(rdim, rdim);
            corner[(rdim - 1, rdim - 1)] = C64::new(-data.nominal.gamma[k], 0.0);
            lmi.add_const(&corner);
            let mut qcoef = ComplexMatrix::identity(rdim, rdim);
            qcoef[(rdim - 1, rdim - 1)] = C64::new(-data.eps[k] * data.eps[k], 0.0);
            lmi.add_term(qparam, qcoef);
            for (param, b) in &v_basis {
                let mid = kron(&b.transpose(), &lam_mat);
                let col = &mid * g;
                let mut coef = ComplexMatrix::zeros(rdim, rdim);
                coef.view_mut((0, 0), (rdim - 1, rdim - 1)).copy_from(&mid);
                for idx in 0..rdim - 1 {
                    coef[(idx, rdim - 1)] = col[idx];
                    coef[(rdim - 1, idx)] = col[idx].conj();
                }
                coef[(rdim - 1, rdim - 1)] = (g.adjoint() * &col)[(0, 0)];
                lmi.add_term(*param, coef);
            }
            prob.add_lmi(normalize_lmi(lmi));
        }
        if !dim_ok {
            return Err(StepStatus::NumericalFailure);
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
            let vx = crate::algorithms::extrapolate_step(&vbar_cur, &vbar_prev, alpha);
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
        // first-order value of the linearized spectral term at the new point
        let lin_val = (uu.matrix().adjoint() * vbar_new.matrix()).trace().re;
        taylor_violation = taylor_violation.max(lin_val - eig_new.spectral_norm());
        let f_new = p_new + (vbar_new.trace() - eig_new.principal_value()) / mu;
        objectives.push(f_new);
        let gap = (n as f64 - eig_new.principal_value() / p_new.max(1e-300)) / n as f64;
        vbar_prev = std::mem::replace(&mut vbar_cur, vbar_new);
        p_cur = p_new;
        // The nuclear-minus-spectral term is an exact penalty, so a rank-one
        // warm start already satisfies the gap test after one solve; require
        // the penalized objective to stall as well so the phase block runs to
        // stationarity instead of returning its first iterate.
        let stalled = f_prev - f_new <= 1e-2 * eps * f_prev.abs().max(1e-300);
        if gap <= eps && stalled {
            status = StepStatus::Ok;
            break;
        }
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

/// Worst-case penalty-based alternating algorithm: the nominal beamformer and
/// phase subproblems are replaced by their robust counterparts; the
/// normalization, stopping rule, descent guard, and the final rank-one
/// re-solve are unchanged.
pub fn robust_penalty_altmin(
    data: &RobustData,
    opts: &AlgoOptions,
    rng: &mut impl Rng,
) -> Result<(BeamState, PhaseState, SolveTrace), AlgError> {
    // With zero uncertainty radii every robust matrix inequality collapses to
    // its nominal trace counterpart. Solve through the nominal representation
    // so the zero-radius limit reproduces the perfect-CSI algorithm exactly
    // instead of following a numerically different (but equivalent) conic
    // form to a different stationary point.
    if data.eps.iter().all(|&e| e == 0.0) {
        return crate::algorithms::penalty_altmin(&data.nominal, opts, rng);
    }
    let m = data.nominal.m();
    let ps0 = PhaseState::random(m, rng);
    let mut v = ps0.lifted_outer();
    let mut trace = SolveTrace::default();
    let mut p_prev = f64::INFINITY;
    let mut mu_cur = opts.mu;
    let mut last_beams: Option<BeamState> = None;
    for t in 0..opts.outer_cap {
        let t0 = Instant::now();
        let beams = match robust_beamforming_fixed_v(data, &v, opts.tol) {
            Ok(b) => b,
            Err(e) if t == 0 => return Err(e),
            Err(_) => {
                trace.push(row(t, p_prev, lifted_rank_gap(&v), f64::NAN, 0, StepStatus::NumericalFailure, t0));
                break;
            }
        };
        let p = beams.power;
        if p > p_prev * (1.0 + 1e-9) {
            break;
        }
        let converged = t > 0 && (p_prev - p) / p <= opts.eps;
        last_beams = Some(beams.clone());
        let slack = data.nominal.min_lifted_slack(&beams.mats, &v);
        if converged {
            trace.push(row(t, p, lifted_rank_gap(&v), slack, 0, StepStatus::Ok, t0));
            trace.converged = true;
            break;
        }
        let sca = robust_sca_phase_update(
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
    let beams = robust_beamforming_fixed_phase(data, &ps, opts.tol)
        .map_err(|_| AlgError::Numerical("final rank-one re-solve failed".into()))?;
    Ok((beams, ps, trace))
}

/// Adversarial verification of a candidate solution: samples perturbations of
/// the estimated effective channels — 90% on the uncertainty boundary, where
/// the worst cases of the quadratic form generically lie, and 10% in the
/// interior — and evaluates the true SINR at each perturbed channel.
/// Returns the minimum slack min over samples and users of (SINR - gamma) and
/// the number of (sample, user) pairs with slack below -tol.
pub fn verify_worst_case(
    w: &[ComplexVector],
    phase: &PhaseState,
    est: &ChannelEstimate,
    gamma: &[f64],
    sigma2: &[f64],
    samples: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> (f64, usize) {
    assert!(samples >= 1, "at least one adversarial sample");
    let kk = est.users();
    let nt = est.hbar[0].nrows();
    let nc = est.hbar[0].ncols();
    let lifted = phase.lifted();
    // draw all perturbations sequentially for reproducibility, evaluate in
    // parallel
    let mut draws: Vec<Vec<ComplexMatrix>> = Vec::with_capacity(samples);
    for s in 0..samples {
        let boundary = s % 10 != 9;
        let mut per_user = Vec::with_capacity(kk);
        for k in 0..kk {
            let mut d = ComplexMatrix::from_fn(nt, nc, |_, _| standard_complex_normal(rng));
            let nrm = d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let radius = if boundary {
                est.eps[k]
            } else {
                let f: f64 = rng.random::<f64>();
                est.eps[k] * f.powf(1.0 / (2.0 * (nt * nc) as f64))
            };
            if nrm > 0.0 {
                d = d.scale(radius / nrm);
            }
            per_user.push(d);
        }
        draws.push(per_user);
    }
    let results: Vec<(f64, usize)> = draws
        .par_iter()
        .map(|per_user| {
            let mut min_slack = f64::INFINITY;
            let mut violations = 0;
            for k in 0..kk {
                let h = &est.hbar[k] + &per_user[k];
                let a = &h * &lifted;
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
                let slack = signal / (interference + sigma2[k]) - gamma[k];
                min_slack = min_slack.min(slack);
                if slack < -tol {
                    violations += 1;
                }
            }
            (min_slack, violations)
        })
        .collect();
    let min_slack = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let violations = results.iter().map(|r| r.1).sum();
    (min_slack, violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::beamforming_fixed_phase;
    use crate::channel::{degrade_csi, generate_channels, scenario_rng, RngPurpose, ScenarioConfig};
    use approx::assert_relative_eq;

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

    fn estimate_for(cfg: &ScenarioConfig, drop: usize, kappa: f64) -> ChannelEstimate {
        let ch = generate_channels(cfg, drop).unwrap();
        let mut rng = scenario_rng(cfg.seed, drop, RngPurpose::CsiError);
        degrade_csi(&ch, kappa, &mut rng).unwrap()
    }

    #[test]
    fn zero_radius_matches_nominal_beamforming() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 1, 0.0);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(cfg.seed, 1, RngPurpose::PhaseInit);
        let ps = PhaseState::random(data.nominal.m(), &mut rng);
        let robust = robust_beamforming_fixed_phase(&data, &ps, 1e-8).unwrap();
        let nominal = beamforming_fixed_phase(&data.nominal, Some(&ps), 1e-8).unwrap();
        assert_relative_eq!(robust.power, nominal.power, max_relative = 1e-5);
    }

    #[test]
    fn full_and_reduced_lmi_spectra_agree() {
        // the full LMI is unitarily equivalent to the reduced one padded with
        // copies of the bare multiplier, so the eigenvalue multisets match
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 2, 0.05);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let set = build_robust_lmi(&data).unwrap();
        let nt = data.nominal.nt();
        let n = data.nominal.m() + 1;
        let mut rng = scenario_rng(9, 0, RngPurpose::Adversarial);
        // random rank-2 unit-diagonal V and random PSD beamformers
        let a = ComplexMatrix::from_fn(n, 2, |_, _| standard_complex_normal(&mut rng));
        let mut vm = &a * a.adjoint();
        for i in 0..n {
            let d = vm[(i, i)].re.max(1e-12);
            for j in 0..n {
                vm[(i, j)] /= C64::new(d.sqrt(), 0.0);
                // normalize columns then rows symmetrically below
            }
        }
        // symmetric normalization to unit diagonal
        let raw = &a * a.adjoint();
        let v = ComplexMatrix::from_fn(n, n, |i, j| {
            raw[(i, j)] / C64::new((raw[(i, i)].re * raw[(j, j)].re).sqrt(), 0.0)
        });
        let wm: Vec<ComplexMatrix> = (0..2)
            .map(|_| {
                let b = ComplexMatrix::from_fn(nt, nt, |_, _| standard_complex_normal(&mut rng));
                (&b * b.adjoint()).scale(0.1)
            })
            .collect();
        for k in 0..2 {
            let mut t = wm[k].clone();
            for j in 0..2 {
                if j != k {
                    t -= wm[j].scale(data.nominal.gamma[k]);
                }
            }
            let q = 0.7;
            let full = set.full_lmi(k, q, &t, &v);
            let full_eigs = eig_hermitian(&full).values.clone();
            // reduced counterpart assembled via the factored middle matrix
            let vh = HermitianMatrix::hermitize(&v).unwrap();
            let (u, svals) = significant_eigenpairs(
                &HermitianMatrix::hermitize(&vh.matrix().transpose()).unwrap(),
            );
            let r = svals.len();
            let sig = ComplexMatrix::from_fn(r, r, |i, j| {
                if i == j { C64::new(svals[i], 0.0) } else { C64::new(0.0, 0.0) }
            });
            let a_red = vec_mat(&(&data.nominal.hs[k] * u.conjugate()));
            let rdim = r * nt + 1;
            let mid = kron(&sig, &t);
            let col = &mid * &a_red;
            let mut red = ComplexMatrix::zeros(rdim, rdim);
            red.view_mut((0, 0), (rdim - 1, rdim - 1))
                .copy_from(&(mid + ComplexMatrix::identity(rdim - 1, rdim - 1).scale(q)));
            for i in 0..rdim - 1 {
                red[(i, rdim - 1)] = col[i];
                red[(rdim - 1, i)] = col[i].conj();
            }
            red[(rdim - 1, rdim - 1)] = (a_red.adjoint() * &col)[(0, 0)]
                + C64::new(-q * data.eps[k] * data.eps[k] - data.nominal.gamma[k], 0.0);
            let red_eigs =
                eig_hermitian(&HermitianMatrix::hermitize(&red).unwrap()).values.clone();
            // padded eigenvalues: reduced spectrum plus (full_dim - rdim)
            // copies of q
            let mut expect = red_eigs;
            expect.extend(std::iter::repeat(q).take(full_eigs.len() - expect.len()));
            expect.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let scale = expect.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (fe, ee) in full_eigs.iter().zip(&expect) {
                assert!((fe - ee).abs() <= 1e-8 * scale, "{fe} vs {ee}");
            }
        }
    }

    #[test]
    fn vectorized_quadratic_reproduces_trace_form() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 3, 0.05);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let set = build_robust_lmi(&data).unwrap();
        let nt = data.nominal.nt();
        let n = data.nominal.m() + 1;
        let mut rng = scenario_rng(11, 0, RngPurpose::Adversarial);
        let b = ComplexMatrix::from_fn(nt, nt, |_, _| standard_complex_normal(&mut rng));
        let t = &b * b.adjoint();
        let c = ComplexMatrix::from_fn(n, 1, |_, _| standard_complex_normal(&mut rng));
        let v = &c * c.adjoint();
        for k in 0..2 {
            let g = &set.gbar[k];
            let lhs = (g.adjoint() * kron(&v.transpose(), &t) * g)[(0, 0)].re;
            let h = &data.nominal.hs[k];
            let rhs = (v.clone() * h.adjoint() * &t * h).trace().re;
            assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn price_of_robustness_monotone_in_radius() {
        // fixed estimate, growing radii: feasible sets nest, so optimal power
        // is non-decreasing
        let cfg = cfg_small(2);
        let est0 = estimate_for(&cfg, 4, 0.05);
        let mut rng = scenario_rng(cfg.seed, 4, RngPurpose::PhaseInit);
        let ps = PhaseState::random(est0.hbar[0].ncols() - 1, &mut rng);
        let mut prev = 0.0;
        for kappa in [0.0, 0.05, 0.1, 0.2] {
            let mut est = est0.clone();
            for k in 0..est.users() {
                let scale = kappa / est0.kappa;
                est.eps_e[k] = est0.eps_e[k] * scale;
                est.eps_d[k] = est0.eps_d[k] * scale;
                est.eps[k] = est0.eps[k] * scale;
            }
            let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
            let beams = robust_beamforming_fixed_phase(&data, &ps, 1e-8).unwrap();
            assert!(
                beams.power >= prev * (1.0 - 1e-7),
                "power decreased: {} after {}",
                beams.power,
                prev
            );
            prev = beams.power;
        }
    }

    #[test]
    fn robust_solution_passes_adversarial_check() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 5, 0.1);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(cfg.seed, 5, RngPurpose::PhaseInit);
        let ps = PhaseState::random(data.nominal.m(), &mut rng);
        let beams = robust_beamforming_fixed_phase(&data, &ps, 1e-8).unwrap();
        assert!(beams.max_rank_ratio <= 1e-6, "rank ratio {}", beams.max_rank_ratio);
        let mut arng = scenario_rng(cfg.seed, 5, RngPurpose::Adversarial);
        let (min_slack, violations) = verify_worst_case(
            &beams.w,
            &ps,
            &est,
            &cfg.gamma,
            &cfg.sigma2,
            1000,
            1e-5,
            &mut arng,
        );
        assert_eq!(violations, 0, "min slack {min_slack}");
    }

    #[test]
    fn nominal_design_violates_under_uncertainty() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 6, 0.1);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(cfg.seed, 6, RngPurpose::PhaseInit);
        let ps = PhaseState::random(data.nominal.m(), &mut rng);
        // nominal-only design treats the estimate as perfect
        let beams = beamforming_fixed_phase(&data.nominal, Some(&ps), 1e-8).unwrap();
        let mut arng = scenario_rng(cfg.seed, 6, RngPurpose::Adversarial);
        let (min_slack, violations) = verify_worst_case(
            &beams.w,
            &ps,
            &est,
            &cfg.gamma,
            &cfg.sigma2,
            1000,
            1e-5,
            &mut arng,
        );
        assert!(violations > 0, "min slack {min_slack}");
    }

    #[test]
    fn zero_radius_verification_equals_nominal_slack() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 7, 0.0);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let mut rng = scenario_rng(cfg.seed, 7, RngPurpose::PhaseInit);
        let ps = PhaseState::random(data.nominal.m(), &mut rng);
        let beams = beamforming_fixed_phase(&data.nominal, Some(&ps), 1e-8).unwrap();
        let mut arng = scenario_rng(cfg.seed, 7, RngPurpose::Adversarial);
        let (min_slack, _) =
            verify_worst_case(&beams.w, &ps, &est, &cfg.gamma, &cfg.sigma2, 10, 1e-5, &mut arng);
        let expect = data.nominal.min_vector_slack(&beams.w, &ps.lifted());
        assert!((min_slack - expect).abs() <= 1e-9 * expect.abs().max(1.0));
    }

    #[test]
    fn robust_alternating_descends_and_verifies() {
        let cfg = cfg_small(2);
        let est = estimate_for(&cfg, 8, 0.05);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let opts = AlgoOptions { eps: 1e-4, ..Default::default() };
        let mut rng = scenario_rng(cfg.seed, 8, RngPurpose::PhaseInit);
        let (beams, ps, trace) = robust_penalty_altmin(&data, &opts, &mut rng).unwrap();
        assert!(trace.is_non_increasing(1e-7));
        let mut arng = scenario_rng(cfg.seed, 8, RngPurpose::Adversarial);
        let (min_slack, violations) = verify_worst_case(
            &beams.w,
            &ps,
            &est,
            &cfg.gamma,
            &cfg.sigma2,
            1000,
            1e-5,
            &mut arng,
        );
        assert_eq!(violations, 0, "min slack {min_slack}");
        // robustness costs at least as much as the nominal design at the
        // same phases
        let nominal = beamforming_fixed_phase(&data.nominal, Some(&ps), 1e-8).unwrap();
        assert!(beams.power >= nominal.power * (1.0 - 1e-7));
    }

    #[test]
    fn dimension_guard_rejects_oversized_instances() {
        let cfg = ScenarioConfig {
            nt: 40,
            m_l: vec![60],
            k: 2,
            sigma2: vec![1e-12; 2],
            gamma: vec![1.0; 2],
            ..Default::default()
        };
        let est = estimate_for(&cfg, 0, 0.05);
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        match build_robust_lmi(&data) {
            Err(AlgError::Numerical(msg)) => assert!(msg.contains("exceeds")),
            other => panic!("expected dimension rejection, got {other:?}"),
        }
    }

    #[test]
    fn kappa_zero_alternating_matches_perfect_csi() {
        let cfg = cfg_small(2);
        let ch = generate_channels(&cfg, 9).unwrap();
        let mut crng = scenario_rng(cfg.seed, 9, RngPurpose::CsiError);
        let est = degrade_csi(&ch, 0.0, &mut crng).unwrap();
        let data = RobustData::from_estimate(&est, &cfg.gamma, &cfg.sigma2);
        let opts = AlgoOptions { eps: 1e-4, ..Default::default() };
        let mut rng = scenario_rng(cfg.seed, 9, RngPurpose::PhaseInit);
        let (rb, _, _) = robust_penalty_altmin(&data, &opts, &mut rng).unwrap();
        let nominal_data = ProblemData::from_true(&ch, &cfg.gamma, &cfg.sigma2);
        let mut rng2 = scenario_rng(cfg.seed, 9, RngPurpose::PhaseInit);
        let (nb, _, _) =
            crate::algorithms::penalty_altmin(&nominal_data, &opts, &mut rng2).unwrap();
        assert_relative_eq!(rb.power, nb.power, max_relative = 1e-4);
    }
}
