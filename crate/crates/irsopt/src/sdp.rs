//! Conic-program builder for the problem family used throughout: Hermitian
//! PSD matrix variables, nonnegative scalars, trace-affine equalities and
//! inequalities, affine-Hermitian LMI constraints, and convex quadratic
//! (Frobenius-norm) constraints. Hermitian data is lowered to the real
//! symmetric cone via `embed_hermitian_real` and handed to Clarabel.

use crate::matcore::{
    eig_hermitian, rank_one_ratio, ComplexMatrix, ComplexVector, HermitianMatrix, C64,
};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{self, NonnegativeConeT, PSDTriangleConeT, SecondOrderConeT, ZeroConeT},
};
use nalgebra::DVector;
use rand::Rng;
use thiserror::Error;

pub const DEFAULT_TOL: f64 = 1e-8;
/// Post-hoc feasibility slack a returned solution must satisfy.
pub const FEAS_CHECK_TOL: f64 = 1e-6;
/// Gaussian randomization draw count used by the SDR baseline.
pub const DEFAULT_RANDOMIZATION_DRAWS: usize = 50;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("unknown variable id")]
    BadVariable,
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("solver returned no solution: {0}")]
    NoSolution(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
enum VarKind {
    Hermitian { dim: usize },
    Scalar { nonneg: bool },
}

#[derive(Debug, Clone)]
struct VarDesc {
    offset: usize,
    kind: VarKind,
}

/// Sparse real-linear functional of the parameter vector plus a constant.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { coeffs: Vec::new(), constant: c }
    }

    pub fn add(&mut self, other: &LinExpr, scale: f64) {
        self.constant += scale * other.constant;
        for &(p, c) in &other.coeffs {
            self.push(p, scale * c);
        }
    }

    pub fn push(&mut self, param: usize, coeff: f64) {
        if coeff != 0.0 {
            self.coeffs.push((param, coeff));
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.coeffs.iter().map(|&(p, c)| c * x[p]).sum::<f64>()
    }
}

/// Affine Hermitian-matrix expression: constant + sum over params of
/// coefficient matrices.
#[derive(Debug, Clone)]
pub struct MatExpr {
    dim: usize,
    constant: ComplexMatrix,
    terms: Vec<(usize, ComplexMatrix)>,
}

impl MatExpr {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, constant: ComplexMatrix::zeros(dim, dim), terms: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_const(&mut self, m: &ComplexMatrix) {
        self.constant += m;
    }

    pub fn add_term(&mut self, param: usize, coef: ComplexMatrix) {
        if coef.iter().any(|v| v.norm_sqr() > 0.0) {
            self.terms.push((param, coef));
        }
    }

    fn eval(&self, x: &[f64]) -> ComplexMatrix {
        let mut m = self.constant.clone();
        for (p, c) in &self.terms {
            m += c.scale(x[*p]);
        }
        m
    }

    /// Largest entry magnitude over the constant and all coefficients.
    pub fn max_coeff_norm(&self) -> f64 {
        let mut best = self.constant.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        for (_, c) in &self.terms {
            best = c.iter().fold(best, |m, z| m.max(z.norm()));
        }
        best
    }

    /// Scales the constant and every coefficient by a real factor.
    pub fn scale(mut self, s: f64) -> Self {
        self.constant = self.constant.scale(s);
        for (_, c) in &mut self.terms {
            *c = c.scale(s);
        }
        self
    }
}

/// A non-square complex affine matrix expression feeding a quadratic
/// (Frobenius) constraint.
#[derive(Debug, Clone)]
pub struct AffineMat {
    rows: usize,
    cols: usize,
    constant: ComplexMatrix,
    terms: Vec<(usize, ComplexMatrix)>,
}

impl AffineMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, constant: ComplexMatrix::zeros(rows, cols), terms: Vec::new() }
    }

    pub fn add_const(&mut self, m: &ComplexMatrix) {
        self.constant += m;
    }

    pub fn add_term(&mut self, param: usize, coef: ComplexMatrix) {
        if coef.iter().any(|v| v.norm_sqr() > 0.0) {
            self.terms.push((param, coef));
        }
    }

    fn eval(&self, x: &[f64]) -> ComplexMatrix {
        let mut m = self.constant.clone();
        for (p, c) in &self.terms {
            m += c.scale(x[*p]);
        }
        m
    }
}

/// Constraint 0.5 * ||mat(x)||_F^2 + lin(x) <= 0, lowered to a second-order
/// cone.
#[derive(Debug, Clone)]
pub struct QuadConstraint {
    pub mat: AffineMat,
    pub lin: LinExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatusKind {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SolveStatus {
    pub kind: SolveStatusKind,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone)]
pub enum VarValue {
    Hermitian(HermitianMatrix),
    Scalar(f64),
}

impl VarValue {
    pub fn as_hermitian(&self) -> &HermitianMatrix {
        match self {
            VarValue::Hermitian(h) => h,
            VarValue::Scalar(_) => panic!("scalar variable where matrix expected"),
        }
    }

    pub fn as_scalar(&self) -> f64 {
        match self {
            VarValue::Scalar(s) => *s,
            VarValue::Hermitian(_) => panic!("matrix variable where scalar expected"),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    nparams: usize,
    vars: Vec<VarDesc>,
    objective: LinExpr,
    equalities: Vec<LinExpr>,
    inequalities: Vec<LinExpr>,
    lmis: Vec<MatExpr>,
    quads: Vec<QuadConstraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a Hermitian PSD matrix variable of the given dimension.
    pub fn add_hermitian_var(&mut self, dim: usize) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(VarDesc { offset: self.nparams, kind: VarKind::Hermitian { dim } });
        self.nparams += dim * dim;
        id
    }

    /// Adds a scalar variable, optionally constrained nonnegative.
    pub fn add_scalar_var(&mut self, nonneg: bool) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(VarDesc { offset: self.nparams, kind: VarKind::Scalar { nonneg } });
        self.nparams += 1;
        id
    }

    pub fn scalar_param(&self, var: VarId) -> usize {
        match self.vars[var.0].kind {
            VarKind::Scalar { .. } => self.vars[var.0].offset,
            _ => panic!("not a scalar variable"),
        }
    }

    pub fn hermitian_dim(&self, var: VarId) -> usize {
        match self.vars[var.0].kind {
            VarKind::Hermitian { dim } => dim,
            _ => panic!("not a matrix variable"),
        }
    }

    pub fn set_objective(&mut self, obj: LinExpr) {
        self.objective = obj;
    }

    /// expr == 0
    pub fn add_equality(&mut self, expr: LinExpr) {
        self.equalities.push(expr);
    }

    /// expr <= 0
    pub fn add_inequality(&mut self, expr: LinExpr) {
        self.inequalities.push(expr);
    }

    /// expr (Hermitian affine) is PSD
    pub fn add_lmi(&mut self, expr: MatExpr) {
        self.lmis.push(expr);
    }

    /// 0.5 ||mat||_F^2 + lin <= 0
    pub fn add_quad(&mut self, q: QuadConstraint) {
        self.quads.push(q);
    }

    /// Parameter basis of a Hermitian variable: (param index, basis matrix)
    /// such that X = sum_p x_p B_p with every B_p Hermitian.
    pub fn hermitian_basis(&self, var: VarId) -> Vec<(usize, ComplexMatrix)> {
        let desc = &self.vars[var.0];
        let dim = match desc.kind {
            VarKind::Hermitian { dim } => dim,
            _ => panic!("not a matrix variable"),
        };
        let mut out = Vec::with_capacity(dim * dim);
        let mut p = desc.offset;
        for i in 0..dim {
            let mut b = ComplexMatrix::zeros(dim, dim);
            b[(i, i)] = C64::new(1.0, 0.0);
            out.push((p, b));
            p += 1;
            for j in (i + 1)..dim {
                let mut br = ComplexMatrix::zeros(dim, dim);
                br[(i, j)] = C64::new(1.0, 0.0);
                br[(j, i)] = C64::new(1.0, 0.0);
                out.push((p, br));
                p += 1;
                let mut bi = ComplexMatrix::zeros(dim, dim);
                bi[(i, j)] = C64::new(0.0, 1.0);
                bi[(j, i)] = C64::new(0.0, -1.0);
                out.push((p, bi));
                p += 1;
            }
        }
        out
    }

    /// Linear functional Tr(C X) of a Hermitian variable X, for Hermitian C.
    pub fn trace_expr(&self, var: VarId, c: &ComplexMatrix) -> LinExpr {
        let desc = &self.vars[var.0];
        let dim = match desc.kind {
            VarKind::Hermitian { dim } => dim,
            _ => panic!("not a matrix variable"),
        };
        assert_eq!(c.nrows(), dim, "coefficient dimension");
        let mut e = LinExpr::default();
        let mut p = desc.offset;
        for i in 0..dim {
            e.push(p, c[(i, i)].re);
            p += 1;
            for j in (i + 1)..dim {
                e.push(p, c[(i, j)].re + c[(j, i)].re);
                p += 1;
                e.push(p, c[(i, j)].im - c[(j, i)].im);
                p += 1;
            }
        }
        e
    }

    /// Tr(X) of a Hermitian variable.
    pub fn trace_of(&self, var: VarId) -> LinExpr {
        let dim = self.hermitian_dim(var);
        self.trace_expr(var, &ComplexMatrix::identity(dim, dim))
    }

    /// Linear expression for the (i,i) diagonal entry of a Hermitian variable.
    pub fn diag_entry(&self, var: VarId, i: usize) -> LinExpr {
        let dim = self.hermitian_dim(var);
        let mut c = ComplexMatrix::zeros(dim, dim);
        c[(i, i)] = C64::new(1.0, 0.0);
        self.trace_expr(var, &c)
    }

    /// Term coeff * x for a scalar variable.
    pub fn scalar_expr(&self, var: VarId, coeff: f64) -> LinExpr {
        let mut e = LinExpr::default();
        e.push(self.scalar_param(var), coeff);
        e
    }

    fn value_of(&self, desc: &VarDesc, x: &[f64]) -> VarValue {
        match desc.kind {
            VarKind::Scalar { .. } => VarValue::Scalar(x[desc.offset]),
            VarKind::Hermitian { dim } => {
                let mut m = ComplexMatrix::zeros(dim, dim);
                let mut p = desc.offset;
                for i in 0..dim {
                    m[(i, i)] = C64::new(x[p], 0.0);
                    p += 1;
                    for j in (i + 1)..dim {
                        let v = C64::new(x[p], x[p + 1]);
                        p += 2;
                        m[(i, j)] = v;
                        m[(j, i)] = v.conj();
                    }
                }
                VarValue::Hermitian(HermitianMatrix::from_upper(m))
            }
        }
    }

    /// Worst constraint violation of a parameter vector: positive parts of
    /// inequalities, |equalities|, negative eigenvalues of LMIs and variable
    /// PSD cones, and quadratic-constraint residuals.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for e in &self.equalities {
            v = v.max(e.eval(x).abs());
        }
        for e in &self.inequalities {
            v = v.max(e.eval(x));
        }
        for q in &self.quads {
            let m = q.mat.eval(x);
            v = v.max(0.5 * m.iter().map(|z| z.norm_sqr()).sum::<f64>() + q.lin.eval(x));
        }
        for l in &self.lmis {
            let m = HermitianMatrix::hermitize(&l.eval(x)).expect("lmi eval square");
            let eig = eig_hermitian(&m);
            v = v.max(-eig.values.last().copied().unwrap_or(0.0));
        }
        for desc in &self.vars {
            if let VarKind::Hermitian { .. } = desc.kind {
                let h = self.value_of(desc, x);
                let eig = eig_hermitian(h.as_hermitian());
                v = v.max(-eig.values.last().copied().unwrap_or(0.0));
            }
        }
        v
    }

    /// Solves the problem at the given tolerance. Infeasibility is a status,
    /// not an error; solver breakdown maps to `NumericalFailure`.
    pub fn solve(&self, tol: f64) -> (SolveStatus, Vec<VarValue>) {
        let mut builder = RowBuilder::new(self.nparams);
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        if !self.equalities.is_empty() {
            for e in &self.equalities {
                builder.push_lin_row(e);
            }
            cones.push(ZeroConeT(self.equalities.len()));
        }

        let mut nonneg_rows = 0;
        for e in &self.inequalities {
            builder.push_lin_row(e);
            nonneg_rows += 1;
        }
        for desc in &self.vars {
            if let VarKind::Scalar { nonneg: true } = desc.kind {
                // s = x_p >= 0  ->  A = -1, b = 0
                builder.start_row();
                builder.coef(desc.offset, -1.0);
                builder.rhs(0.0);
                nonneg_rows += 1;
            }
        }
        if nonneg_rows > 0 {
            cones.push(NonnegativeConeT(nonneg_rows));
        }

        for q in &self.quads {
            // 0.5||F||^2 <= t with t = -lin  <=>  (t+1, t-1, sqrt2*vec) in SOC
            let dim = 2 + 2 * q.mat.rows * q.mat.cols;
            // row: s0 = t + 1 = -lin + 1
            builder.start_row();
            for &(p, c) in &q.lin.coeffs {
                builder.coef(p, c);
            }
            builder.rhs(1.0 - q.lin.constant);
            // row: s1 = t - 1
            builder.start_row();
            for &(p, c) in &q.lin.coeffs {
                builder.coef(p, c);
            }
            builder.rhs(-1.0 - q.lin.constant);
            let sq2 = 2f64.sqrt();
            for col in 0..q.mat.cols {
                for row in 0..q.mat.rows {
                    for re_part in [true, false] {
                        builder.start_row();
                        for (p, m) in &q.mat.terms {
                            let z = m[(row, col)];
                            let c = if re_part { z.re } else { z.im };
                            builder.coef(*p, -sq2 * c);
                        }
                        let z = q.mat.constant[(row, col)];
                        builder.rhs(sq2 * if re_part { z.re } else { z.im });
                    }
                }
            }
            cones.push(SecondOrderConeT(dim));
        }

        // PSD cones: Hermitian variables first, then explicit LMIs. Each
        // Hermitian expression of dim m becomes the 2m real embedding in
        // Clarabel's upper-triangle svec layout.
        for desc in &self.vars {
            if let VarKind::Hermitian { dim } = desc.kind {
                let basis: Vec<(usize, ComplexMatrix)> = {
                    // reconstruct basis for this variable
                    let var = VarId(
                        self.vars
                            .iter()
                            .position(|d| std::ptr::eq(d, desc))
                            .expect("variable present"),
                    );
                    self.hermitian_basis(var)
                };
                builder.push_psd_block(dim, &ComplexMatrix::zeros(dim, dim), &basis);
                cones.push(PSDTriangleConeT(2 * dim));
            }
        }
        for l in &self.lmis {
            builder.push_psd_block(l.dim, &l.constant, &l.terms);
            cones.push(PSDTriangleConeT(2 * l.dim));
        }

        let (a, b) = builder.finish();
        let p = CscMatrix::<f64>::zeros((self.nparams, self.nparams));
        let mut q = vec![0.0; self.nparams];
        for &(pi, c) in &self.objective.coeffs {
            q[pi] += c;
        }
        // Interior-point line searches can stall on degenerate boundary
        // optima (common when the minimizer is an exactly rank-one matrix).
        // Retry with progressively stronger static regularization before
        // declaring a numerical failure.
        // (static regularization, feasibility-tolerance factor). The duality
        // gap tolerance is never relaxed; the post-hoc constraint-violation
        // check below is the final acceptance gate in all cases.
        const RETRY_LADDER: [(f64, f64); 4] = [(1e-8, 1.0), (1e-6, 1.0), (1e-6, 10.0), (3e-5, 10.0)];
        let mut solver = None;
        for (attempt, (reg, feas_factor)) in RETRY_LADDER.iter().enumerate() {
            let settings = DefaultSettingsBuilder::default()
                .verbose(std::env::var_os("IRSOPT_SDP_VERBOSE").is_some())
                .tol_gap_abs(tol)
                .tol_gap_rel(tol)
                .tol_feas(tol * feas_factor)
                .static_regularization_constant(*reg)
                .build()
                .expect("solver settings");
            let mut s = match DefaultSolver::new(&p, &q, &a, &b, &cones, settings) {
                Ok(s) => s,
                Err(e) => {
                    return (
                        SolveStatus {
                            kind: SolveStatusKind::NumericalFailure,
                            objective: f64::NAN,
                            primal_residual: f64::NAN,
                            dual_residual: f64::NAN,
                            iterations: 0,
                        },
                        Vec::new(),
                    )
                        .tap_err(e);
                }
            };
            s.solve();
            let st = s.solution.status;
            let done = matches!(
                st,
                SolverStatus::Solved
                    | SolverStatus::PrimalInfeasible
                    | SolverStatus::AlmostPrimalInfeasible
                    | SolverStatus::DualInfeasible
            );
            if !done && attempt + 1 < RETRY_LADDER.len() {
                log::debug!(
                    "solver status {st:?} at regularization {reg:.0e}; retrying stronger"
                );
                solver = Some(s);
                continue;
            }
            solver = Some(s);
            break;
        }
        let solver = solver.expect("at least one solve attempt");
        let status = solver.solution.status;
        if status != SolverStatus::Solved {
            log::debug!("solver terminated with status {status:?}");
        }
        let kind = match status {
            SolverStatus::Solved => SolveStatusKind::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SolveStatusKind::Infeasible
            }
            // near-optimal terminations are downgraded rather than accepted
            _ => SolveStatusKind::NumericalFailure,
        };
        let x = solver.solution.x.clone();
        let mut kind = kind;
        if kind == SolveStatusKind::Optimal {
            let viol = self.max_violation(&x);
            // the gate scales with the requested tolerance: a deliberately
            // loose subproblem solve is allowed proportionally loose
            // constraint satisfaction, while tight final solves keep the
            // absolute guarantee
            if viol > FEAS_CHECK_TOL.max(10.0 * tol) {
                log::warn!("post-hoc feasibility check failed: violation {viol:.3e}");
                kind = SolveStatusKind::NumericalFailure;
            }
        }
        let values = if kind == SolveStatusKind::Optimal {
            self.vars.iter().map(|d| self.value_of(d, &x)).collect()
        } else {
            Vec::new()
        };
        let objective = if kind == SolveStatusKind::Optimal {
            self.objective.constant + solver.solution.obj_val
        } else {
            f64::NAN
        };
        (
            SolveStatus {
                kind,
                objective,
                primal_residual: solver.info.res_primal,
                dual_residual: solver.info.res_dual,
                iterations: solver.info.iterations,
            },
            values,
        )
    }

    /// Self-describing text dump for cross-solver debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(s, "conic-problem params={}", self.nparams).unwrap();
        for (i, v) in self.vars.iter().enumerate() {
            match v.kind {
                VarKind::Hermitian { dim } => {
                    writeln!(s, "var {i} hermitian dim={dim} offset={}", v.offset).unwrap()
                }
                VarKind::Scalar { nonneg } => {
                    writeln!(s, "var {i} scalar nonneg={nonneg} offset={}", v.offset).unwrap()
                }
            }
        }
        let dump_lin = |s: &mut String, e: &LinExpr| {
            for &(p, c) in &e.coeffs {
                write!(s, " {p}:{c:.17e}").unwrap();
            }
            writeln!(s, " const:{:.17e}", e.constant).unwrap();
        };
        write!(s, "objective").unwrap();
        dump_lin(&mut s, &self.objective);
        for e in &self.equalities {
            write!(s, "eq").unwrap();
            dump_lin(&mut s, e);
        }
        for e in &self.inequalities {
            write!(s, "ineq").unwrap();
            dump_lin(&mut s, e);
        }
        for l in &self.lmis {
            writeln!(s, "lmi dim={} terms={}", l.dim, l.terms.len()).unwrap();
        }
        for q in &self.quads {
            writeln!(s, "quad {}x{} terms={}", q.mat.rows, q.mat.cols, q.mat.terms.len()).unwrap();
        }
        s
    }
}

// small helper so the error path above can log without a panic
trait TapErr {
    fn tap_err(self, e: clarabel::solver::SolverError) -> Self;
}
impl TapErr for (SolveStatus, Vec<VarValue>) {
    fn tap_err(self, e: clarabel::solver::SolverError) -> Self {
        log::warn!("solver setup failed: {e:?}");
        self
    }
}

/// Triplet accumulator producing the Clarabel constraint matrix.
struct RowBuilder {
    ncols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
    current_row: usize,
}

impl RowBuilder {
    fn new(ncols: usize) -> Self {
        Self { ncols, rows: Vec::new(), cols: Vec::new(), vals: Vec::new(), b: Vec::new(), current_row: 0 }
    }

    fn start_row(&mut self) {
        self.current_row = self.b.len();
        self.b.push(0.0);
    }

    fn coef(&mut self, param: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(self.current_row);
            self.cols.push(param);
            self.vals.push(v);
        }
    }

    fn rhs(&mut self, v: f64) {
        self.b[self.current_row] = v;
    }

    /// lin(x) relates to its cone slot as s = b - Ax with A = coeffs,
    /// b = -constant, i.e. s = -lin(x).
    fn push_lin_row(&mut self, e: &LinExpr) {
        self.start_row();
        for &(p, c) in &e.coeffs {
            self.coef(p, c);
        }
        self.rhs(-e.constant);
    }

    /// Embeds a Hermitian affine expression into the 2m real PSD triangle
    /// block, svec scaling sqrt(2) on off-diagonals, column-major upper
    /// triangle.
    fn push_psd_block(
        &mut self,
        dim: usize,
        constant: &ComplexMatrix,
        terms: &[(usize, ComplexMatrix)],
    ) {
        let d = 2 * dim;
        let embed_entry = |m: &ComplexMatrix, i: usize, j: usize| -> f64 {
            // [[Re, -Im],[Im, Re]]
            let (bi, ii) = (i / dim, i % dim);
            let (bj, jj) = (j / dim, j % dim);
            let z = m[(ii, jj)];
            match (bi, bj) {
                (0, 0) | (1, 1) => z.re,
                (0, 1) => -z.im,
                _ => z.im,
            }
        };
        let sq2 = 2f64.sqrt();
        for j in 0..d {
            for i in 0..=j {
                let scale = if i == j { 1.0 } else { sq2 };
                self.start_row();
                for (p, m) in terms {
                    self.coef(*p, -scale * embed_entry(m, i, j));
                }
                self.rhs(scale * embed_entry(constant, i, j));
            }
        }
    }

    fn finish(self) -> (CscMatrix<f64>, Vec<f64>) {
        let nrows = self.b.len();
        // triplets -> CSC
        let mut count = vec![0usize; self.ncols + 1];
        for &c in &self.cols {
            count[c + 1] += 1;
        }
        for i in 0..self.ncols {
            count[i + 1] += count[i];
        }
        let colptr = count.clone();
        let nnz = self.vals.len();
        let mut rowval = vec![0usize; nnz];
        let mut nzval = vec![0.0f64; nnz];
        let mut next = colptr.clone();
        for k in 0..nnz {
            let c = self.cols[k];
            let slot = next[c];
            rowval[slot] = self.rows[k];
            nzval[slot] = self.vals[k];
            next[c] += 1;
        }
        // rows within a column must be sorted for CSC validity
        for c in 0..self.ncols {
            let (lo, hi) = (colptr[c], colptr[c + 1]);
            let mut idx: Vec<usize> = (lo..hi).collect();
            idx.sort_by_key(|&k| rowval[k]);
            let sorted_rows: Vec<usize> = idx.iter().map(|&k| rowval[k]).collect();
            let sorted_vals: Vec<f64> = idx.iter().map(|&k| nzval[k]).collect();
            rowval[lo..hi].copy_from_slice(&sorted_rows);
            nzval[lo..hi].copy_from_slice(&sorted_vals);
        }
        (CscMatrix::new(nrows, self.ncols, colptr, rowval, nzval), self.b)
    }
}

/// Result of rank-one extraction, carrying the tightness witness.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub vector: ComplexVector,
    /// lambda_2 / lambda_1 of the source matrix.
    pub tightness: f64,
    /// Set when mode-dependent tightness limits are exceeded.
    pub violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractMode {
    /// Principal eigenvector scaled by sqrt(lambda_max); tightness enforced.
    Beamformer,
    /// Lifted phase matrix: align on the auxiliary last entry, project the
    /// first M entries to unit modulus, return the M-element phase vector.
    Phase,
}

pub fn extract_rank_one(x: &HermitianMatrix, mode: ExtractMode) -> Extraction {
    let eig = eig_hermitian(x);
    let ratio = rank_one_ratio(&eig);
    let lam = eig.values[0].max(0.0);
    let v = eig.principal_vector().scale(lam.sqrt());
    match mode {
        ExtractMode::Beamformer => Extraction {
            vector: v,
            tightness: ratio,
            violation: ratio > crate::matcore::RANK_ONE_RATIO_TOL,
        },
        ExtractMode::Phase => {
            let n = v.len();
            let last = v[n - 1];
            let align = if last.norm() > 0.0 { last / last.norm() } else { C64::new(1.0, 0.0) };
            let mut phi = DVector::<C64>::zeros(n - 1);
            for m in 0..n - 1 {
                let z = v[m] / align;
                phi[m] = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
            }
            Extraction { vector: phi, tightness: ratio, violation: false }
        }
    }
}

/// Gaussian randomization: draws from CN(0, V), normalizes each draw to unit
/// modulus, and phase-aligns on the auxiliary last entry. Returns full
/// (M+1)-element unit-modulus vectors with last entry 1.
pub fn gaussian_randomize(
    v: &HermitianMatrix,
    draws: usize,
    rng: &mut impl Rng,
) -> Vec<ComplexVector> {
    let n = v.dim();
    let eig = eig_hermitian(v);
    // factor L with V = L L^H, clipping negative eigenvalue noise
    let mut l = eig.vectors.clone();
    for (k, lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        for i in 0..n {
            l[(i, k)] *= C64::new(s, 0.0);
        }
    }
    (0..draws)
        .map(|_| {
            let g = ComplexVector::from_fn(n, |_, _| {
                let re: f64 = sample_std_normal(rng);
                let im: f64 = sample_std_normal(rng);
                C64::new(re, im) / 2f64.sqrt()
            });
            let raw = &l * g;
            let mut u = ComplexVector::zeros(n);
            for i in 0..n {
                u[i] = if raw[i].norm() > 0.0 { raw[i] / raw[i].norm() } else { C64::new(1.0, 0.0) };
            }
            let align = u[n - 1];
            for i in 0..n {
                u[i] /= align;
            }
            u
        })
        .collect()
}

use crate::matcore::standard_normal as sample_std_normal;
