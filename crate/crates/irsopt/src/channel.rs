//! Random multi-surface multiuser downlink channel generation, cascaded and
//! effective channel assembly, norm-bounded CSI degradation, and SINR
//! evaluation in both direct and lifted forms.

use crate::matcore::{
    standard_complex_normal, vec_mat, ComplexMatrix, ComplexVector, C64,
};
use crate::state::{BeamState, PhaseState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Served sector width (radians), centered on the x-axis with the
/// transmitter at the origin.
pub const SECTOR_ANGLE: f64 = 2.0 * PI / 3.0;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid scenario: {0}")]
    BadConfig(String),
    #[error("normalized CSI error kappa={0} must lie in [0, 1)")]
    BadKappa(f64),
    #[error("non-positive propagation distance between {0} and {1}")]
    BadDistance(String, String),
    #[error("malformed channel dump: {0}")]
    BadDump(String),
}

/// Scenario parameters: array sizes, geometry, fading and noise model,
/// targets, and solver knobs carried alongside them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Transmit antennas.
    pub nt: usize,
    /// Reflecting elements per surface; total M is the sum.
    pub m_l: Vec<usize>,
    /// Users.
    pub k: usize,
    /// Cell radius, meters.
    pub r: f64,
    /// Carrier frequency, Hz.
    pub fc: f64,
    /// Path-loss exponent on Ricean (surface-assisted) links.
    pub alpha_l: f64,
    /// Path-loss exponent on Rayleigh (direct) links.
    pub alpha_n: f64,
    /// Ricean factor, linear.
    pub beta: f64,
    /// Per-user noise powers, watts.
    pub sigma2: Vec<f64>,
    /// Per-user SINR targets, linear.
    pub gamma: Vec<f64>,
    /// Maximum normalized CSI error.
    pub kappa: f64,
    /// Convergence tolerance for iterative solvers.
    pub eps: f64,
    /// Penalty factor for the rank-one penalty term.
    pub mu: f64,
    /// RNG seed.
    pub seed: u64,
    /// Transmitter position, meters.
    pub ap: (f64, f64),
    /// Surface positions; when empty, surfaces are placed evenly on the
    /// cell-edge arc.
    pub irs: Vec<(f64, f64)>,
    /// Center of the user placement disk; defaults to the transmitter, with
    /// users drawn in the served sector. When set, users are drawn uniformly
    /// in the full disk, which models a cluster served through a nearby
    /// surface.
    #[serde(default)]
    pub user_center: Option<(f64, f64)>,
    /// Radius of the user placement disk; defaults to the cell radius.
    #[serde(default)]
    pub user_radius: Option<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            nt: 4,
            m_l: vec![8],
            k: 3,
            r: 50.0,
            fc: 2.4e9,
            alpha_l: 2.1,
            alpha_n: 4.0,
            beta: 1.0,
            sigma2: vec![1e-12; 3],
            gamma: vec![10f64.powf(0.2); 3],
            kappa: 0.0,
            eps: 1e-5,
            mu: 0.5,
            seed: 1,
            ap: (0.0, 0.0),
            irs: Vec::new(),
            user_center: None,
            user_radius: None,
        }
    }
}

impl ScenarioConfig {
    pub fn m_total(&self) -> usize {
        self.m_l.iter().sum()
    }

    /// Surface coordinates: configured, or evenly spaced on the cell-edge
    /// arc within the served sector.
    pub fn irs_positions(&self) -> Vec<(f64, f64)> {
        if !self.irs.is_empty() {
            return self.irs.clone();
        }
        let l = self.m_l.len();
        (0..l)
            .map(|i| {
                let frac = (i as f64 + 0.5) / l as f64;
                let ang = (frac - 0.5) * SECTOR_ANGLE;
                (self.ap.0 + self.r * ang.cos(), self.ap.1 + self.r * ang.sin())
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let fail = |m: String| Err(ChannelError::BadConfig(m));
        if self.nt < 1 {
            return fail("nt must be >= 1".into());
        }
        if self.k < 1 {
            return fail("k must be >= 1".into());
        }
        if self.m_l.iter().any(|&m| m < 1) {
            return fail("all m_l must be >= 1".into());
        }
        if self.sigma2.len() != self.k || self.gamma.len() != self.k {
            return fail(format!(
                "sigma2/gamma lengths ({}, {}) must equal k={}",
                self.sigma2.len(),
                self.gamma.len(),
                self.k
            ));
        }
        if self.gamma.iter().any(|&g| g <= 0.0) || self.sigma2.iter().any(|&s| s <= 0.0) {
            return fail("gamma and sigma2 must be positive".into());
        }
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(ChannelError::BadKappa(self.kappa));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return fail(format!("eps={} must lie in (0, 1)", self.eps));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return fail(format!("mu={} must lie in (0, 1)", self.mu));
        }
        if !self.irs.is_empty() && self.irs.len() != self.m_l.len() {
            return fail("irs position count must match m_l".into());
        }
        if self.r <= 0.0 || self.fc <= 0.0 || self.beta < 0.0 {
            return fail("r, fc must be positive and beta nonnegative".into());
        }
        for (p, name) in self.irs_positions().iter().zip(0..) {
            if dist(self.ap, *p) <= 0.0 {
                return Err(ChannelError::BadDistance("ap".into(), format!("irs{name}")));
            }
        }
        Ok(())
    }
}

/// RNG purposes; each (seed, drop, purpose) triple owns an independent
/// counter stream so draws for different uses never interleave.
#[derive(Debug, Clone, Copy)]
pub enum RngPurpose {
    Placement = 0,
    ApSurface = 1,
    SurfaceUser = 2,
    Direct = 3,
    CsiError = 4,
    Randomization = 5,
    Adversarial = 6,
    PhaseInit = 7,
}

pub fn scenario_rng(seed: u64, drop: usize, purpose: RngPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((drop as u64) << 8) | purpose as u64);
    rng
}

/// One channel realization, with cascaded and effective forms precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Stacked transmitter-to-surface matrix, M x Nt.
    pub f: ComplexMatrix,
    /// Surface-to-user vectors, length M each.
    pub h: Vec<ComplexVector>,
    /// Direct transmitter-to-user vectors, length Nt each.
    pub d: Vec<ComplexVector>,
    /// Cascaded per-user matrices E_k = diag(h_k^H) F, M x Nt.
    pub e: Vec<ComplexMatrix>,
    /// Effective per-user matrices H_k = [E_k^H, d_k], Nt x (M+1).
    pub h_eff: Vec<ComplexMatrix>,
}

impl ChannelSet {
    pub fn nt(&self) -> usize {
        self.f.ncols()
    }

    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.len()
    }

    fn assemble(f: ComplexMatrix, h: Vec<ComplexVector>, d: Vec<ComplexVector>) -> Self {
        let e: Vec<ComplexMatrix> = h
            .iter()
            .map(|hk| cascade(hk, &f))
            .collect();
        let h_eff = e.iter().zip(&d).map(|(ek, dk)| effective(ek, dk)).collect();
        Self { f, h, d, e, h_eff }
    }
}

/// E_k = diag(h_k^H) F.
pub fn cascade(h_k: &ComplexVector, f: &ComplexMatrix) -> ComplexMatrix {
    let (m, nt) = (f.nrows(), f.ncols());
    let mut e = ComplexMatrix::zeros(m, nt);
    for i in 0..m {
        let s = h_k[i].conj();
        for j in 0..nt {
            e[(i, j)] = s * f[(i, j)];
        }
    }
    e
}

/// H_k = [E_k^H, d_k].
pub fn effective(e_k: &ComplexMatrix, d_k: &ComplexVector) -> ComplexMatrix {
    let (m, nt) = (e_k.nrows(), e_k.ncols());
    let mut h = ComplexMatrix::zeros(nt, m + 1);
    for i in 0..nt {
        for j in 0..m {
            h[(i, j)] = e_k[(j, i)].conj();
        }
        h[(i, m)] = d_k[i];
    }
    h
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Half-wavelength uniform linear array response toward azimuth `theta`
/// (measured from the array broadside on the x-axis).
fn ula_response(n: usize, theta: f64) -> ComplexVector {
    ComplexVector::from_iterator(
        n,
        (0..n).map(|i| C64::from_polar(1.0, PI * i as f64 * theta.sin())),
    )
}

/// sqrt(L0 d^-alpha) (sqrt(beta/(1+beta)) LoS + sqrt(1/(1+beta)) NLoS).
fn ricean_block(
    l0: f64,
    d: f64,
    alpha: f64,
    beta: f64,
    los: &ComplexMatrix,
    rng: &mut impl Rng,
) -> ComplexMatrix {
    let amp = (l0 * d.powf(-alpha)).sqrt();
    let c_los = (beta / (1.0 + beta)).sqrt();
    let c_nlos = (1.0 / (1.0 + beta)).sqrt();
    ComplexMatrix::from_fn(los.nrows(), los.ncols(), |i, j| {
        amp * (c_los * los[(i, j)] + c_nlos * standard_complex_normal(rng))
    })
}

/// Generates one channel realization; deterministic given (config, drop).
pub fn generate_channels(cfg: &ScenarioConfig, drop: usize) -> Result<ChannelSet, ChannelError> {
    cfg.validate()?;
    let surfaces = cfg.irs_positions();
    let m_total = cfg.m_total();
    let lambda = SPEED_OF_LIGHT / cfg.fc;
    let l0 = (lambda / (4.0 * PI)).powi(2);

    let mut rng_place = scenario_rng(cfg.seed, drop, RngPurpose::Placement);
    let (center, spread, arc) = match cfg.user_center {
        Some(c) => (c, cfg.user_radius.unwrap_or(cfg.r), 2.0 * PI),
        None => (cfg.ap, cfg.user_radius.unwrap_or(cfg.r), SECTOR_ANGLE),
    };
    let users: Vec<(f64, f64)> = (0..cfg.k)
        .map(|_| {
            let ang = (rng_place.random::<f64>() - 0.5) * arc;
            let rad = spread * rng_place.random::<f64>().sqrt();
            (center.0 + rad * ang.cos(), center.1 + rad * ang.sin())
        })
        .collect();
    for (k, u) in users.iter().enumerate() {
        if dist(cfg.ap, *u) <= 0.0 {
            return Err(ChannelError::BadDistance("ap".into(), format!("user{k}")));
        }
        for (l, p) in surfaces.iter().enumerate() {
            if dist(*p, *u) <= 0.0 {
                return Err(ChannelError::BadDistance(format!("irs{l}"), format!("user{k}")));
            }
        }
    }

    // transmitter-to-surface blocks
    let mut rng_f = scenario_rng(cfg.seed, drop, RngPurpose::ApSurface);
    let mut f = ComplexMatrix::zeros(m_total, cfg.nt);
    let mut row = 0;
    for (l, &ml) in cfg.m_l.iter().enumerate() {
        let p = surfaces[l];
        let d_l = dist(cfg.ap, p);
        let depart = (p.1 - cfg.ap.1).atan2(p.0 - cfg.ap.0);
        let arrive = (cfg.ap.1 - p.1).atan2(cfg.ap.0 - p.0);
        let los = ula_response(ml, arrive) * ula_response(cfg.nt, depart).adjoint();
        let block = ricean_block(l0, d_l, cfg.alpha_l, cfg.beta, &los, &mut rng_f);
        f.view_mut((row, 0), (ml, cfg.nt)).copy_from(&block);
        row += ml;
    }

    // surface-to-user vectors, stacked over surfaces
    let mut rng_h = scenario_rng(cfg.seed, drop, RngPurpose::SurfaceUser);
    let mut h: Vec<ComplexVector> = Vec::with_capacity(cfg.k);
    for u in &users {
        let mut hk = ComplexVector::zeros(m_total);
        let mut row = 0;
        for (l, &ml) in cfg.m_l.iter().enumerate() {
            let p = surfaces[l];
            let d_lu = dist(p, *u);
            let depart = (u.1 - p.1).atan2(u.0 - p.0);
            let los_vec = ula_response(ml, depart);
            let los = ComplexMatrix::from_fn(ml, 1, |i, _| los_vec[i]);
            let blk = ricean_block(l0, d_lu, cfg.alpha_l, cfg.beta, &los, &mut rng_h);
            for i in 0..ml {
                hk[row + i] = blk[(i, 0)];
            }
            row += ml;
        }
        h.push(hk);
    }

    // direct links, Rayleigh
    let mut rng_d = scenario_rng(cfg.seed, drop, RngPurpose::Direct);
    let d: Vec<ComplexVector> = users
        .iter()
        .map(|u| {
            let amp = (l0 * dist(cfg.ap, *u).powf(-cfg.alpha_n)).sqrt();
            ComplexVector::from_fn(cfg.nt, |_, _| amp * standard_complex_normal(&mut rng_d))
        })
        .collect();

    Ok(ChannelSet::assemble(f, h, d))
}

/// Channel estimates with norm-bounded error radii; the true channel lies
/// inside the uncertainty ball of the estimate by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    /// Estimated cascaded matrices.
    pub ebar: Vec<ComplexMatrix>,
    /// Estimated direct vectors.
    pub dbar: Vec<ComplexVector>,
    /// Estimated effective matrices [Ebar_k^H, dbar_k].
    pub hbar: Vec<ComplexMatrix>,
    /// Per-user cascaded-error radii (Frobenius).
    pub eps_e: Vec<f64>,
    /// Per-user direct-error radii (l2).
    pub eps_d: Vec<f64>,
    /// Aggregate radii, eps_k^2 = eps_e^2 + eps_d^2.
    pub eps: Vec<f64>,
    pub kappa: f64,
}

impl ChannelEstimate {
    pub fn users(&self) -> usize {
        self.hbar.len()
    }

    /// Vectorized effective estimate g_k = vec(Hbar_k).
    pub fn gbar(&self, k: usize) -> ComplexVector {
        vec_mat(&self.hbar[k])
    }
}

/// Draws a perturbation Delta uniformly in { ||Delta|| <= kappa ||X - Delta|| }
/// and returns the estimate X - Delta. The radius equation is solved exactly
/// so that ||Delta|| = f * kappa * ||estimate|| for ball fraction f.
fn shrink_toward_estimate(
    x: &ComplexMatrix,
    kappa: f64,
    rng: &mut impl Rng,
) -> ComplexMatrix {
    if kappa == 0.0 {
        return x.clone();
    }
    let n = x.nrows() * x.ncols();
    let mut dir = ComplexMatrix::from_fn(x.nrows(), x.ncols(), |_, _| standard_complex_normal(rng));
    let nrm = dir.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    dir /= C64::new(nrm, 0.0);
    // uniform radius fraction in a ball of real dimension 2n
    let f: f64 = rng.random::<f64>().powf(1.0 / (2.0 * n as f64));
    let fk2 = (f * kappa).powi(2);
    let inner: f64 = dir.iter().zip(x.iter()).map(|(a, b)| (a.conj() * b).re).sum();
    let x2 = x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    // (1 - f^2 k^2) c^2 + 2 f^2 k^2 <dir, x> c - f^2 k^2 ||x||^2 = 0
    let a = 1.0 - fk2;
    let b = 2.0 * fk2 * inner;
    let c_term = -fk2 * x2;
    let disc = (b * b - 4.0 * a * c_term).max(0.0).sqrt();
    let scale = (-b + disc) / (2.0 * a);
    x - dir.scale(scale)
}

/// Degrades true channels into estimates with normalized aggregate error
/// kappa; radii split between cascaded and direct parts in proportion to
/// their estimated norms.
pub fn degrade_csi(
    truth: &ChannelSet,
    kappa: f64,
    rng: &mut impl Rng,
) -> Result<ChannelEstimate, ChannelError> {
    if !(0.0..1.0).contains(&kappa) {
        return Err(ChannelError::BadKappa(kappa));
    }
    let kk = truth.users();
    let mut ebar = Vec::with_capacity(kk);
    let mut dbar = Vec::with_capacity(kk);
    let mut hbar = Vec::with_capacity(kk);
    let mut eps_e = Vec::with_capacity(kk);
    let mut eps_d = Vec::with_capacity(kk);
    let mut eps = Vec::with_capacity(kk);
    for k in 0..kk {
        let eb = shrink_toward_estimate(&truth.e[k], kappa, rng);
        let dmat = ComplexMatrix::from_fn(truth.nt(), 1, |i, _| truth.d[k][i]);
        let db_mat = shrink_toward_estimate(&dmat, kappa, rng);
        let db = ComplexVector::from_fn(truth.nt(), |i, _| db_mat[(i, 0)]);
        let ee = kappa * eb.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ed = kappa * db.norm();
        eps_e.push(ee);
        eps_d.push(ed);
        eps.push((ee * ee + ed * ed).sqrt());
        hbar.push(effective(&eb, &db));
        ebar.push(eb);
        dbar.push(db);
    }
    Ok(ChannelEstimate { ebar, dbar, hbar, eps_e, eps_d, eps, kappa })
}

/// Effective downlink vector a_k with row channel a_k^H = h_k^H Phi F + d_k^H;
/// `phase: None` models switched-off surfaces (Phi = 0).
pub fn effective_vector(ch: &ChannelSet, phase: Option<&PhaseState>, k: usize) -> ComplexVector {
    match phase {
        None => ch.d[k].clone(),
        Some(ps) => &ch.h_eff[k] * ps.lifted(),
    }
}

/// Received SINR of user k under beamformers `w` (direct evaluation).
pub fn sinr(ch: &ChannelSet, w: &[ComplexVector], phase: Option<&PhaseState>, sigma2: f64, k: usize) -> f64 {
    let a = effective_vector(ch, phase, k);
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
    signal / (interference + sigma2)
}

/// Received SINR of user k from a beam state.
pub fn sinr_of_state(
    ch: &ChannelSet,
    beams: &BeamState,
    phase: Option<&PhaseState>,
    sigma2: f64,
    k: usize,
) -> f64 {
    sinr(ch, &beams.w, phase, sigma2, k)
}

/// Lifted-form SINR: powers computed as Tr(V H_k^H W_j H_k); cross-validates
/// the quadratic-form lifting used by the solvers.
pub fn sinr_lifted(
    ch: &ChannelSet,
    w_mats: &[crate::matcore::HermitianMatrix],
    v: &crate::matcore::HermitianMatrix,
    sigma2: f64,
    k: usize,
) -> f64 {
    let hk = &ch.h_eff[k];
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
    signal / (interference + sigma2)
}

/// Minimum SINR slack min_k (SINR_k - gamma_k) on true channels.
pub fn min_sinr_slack(
    ch: &ChannelSet,
    w: &[ComplexVector],
    phase: Option<&PhaseState>,
    sigma2: &[f64],
    gamma: &[f64],
) -> f64 {
    (0..ch.users())
        .map(|k| sinr(ch, w, phase, sigma2[k], k) - gamma[k])
        .fold(f64::INFINITY, f64::min)
}

// ---- structured-text dumps (regression fixtures, CLI interchange) ----

fn write_mat(s: &mut String, name: &str, m: &ComplexMatrix) {
    use std::fmt::Write;
    writeln!(s, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:.16e} {:.16e}", m[(i, j)].re, m[(i, j)].im))
            .collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
}

fn read_mat<'a>(
    lines: &mut impl Iterator<Item = &'a str>,
    expect_name: Option<&str>,
) -> Result<(String, ComplexMatrix), ChannelError> {
    let bad = |m: &str| ChannelError::BadDump(m.to_string());
    let header = lines.next().ok_or_else(|| bad("missing matrix header"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "matrix" {
        return Err(bad(&format!("bad matrix header: {header}")));
    }
    let name = parts[1].to_string();
    if let Some(e) = expect_name {
        if name != e {
            return Err(bad(&format!("expected matrix {e}, found {name}")));
        }
    }
    let rows: usize = parts[2].parse().map_err(|_| bad("bad row count"))?;
    let cols: usize = parts[3].parse().map_err(|_| bad("bad col count"))?;
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        let line = lines.next().ok_or_else(|| bad("truncated matrix body"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad float {t}"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != 2 * cols {
            return Err(bad(&format!("row {i} has {} values, want {}", vals.len(), 2 * cols)));
        }
        for j in 0..cols {
            m[(i, j)] = C64::new(vals[2 * j], vals[2 * j + 1]);
        }
    }
    Ok((name, m))
}

fn col(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_fn(m.nrows(), |i, _| m[(i, 0)])
}

fn as_col(v: &ComplexVector) -> ComplexMatrix {
    ComplexMatrix::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn dump_channelset(ch: &ChannelSet) -> String {
    let mut s = format!("channelset users={} m={} nt={}\n", ch.users(), ch.m(), ch.nt());
    write_mat(&mut s, "F", &ch.f);
    for k in 0..ch.users() {
        write_mat(&mut s, &format!("h{k}"), &as_col(&ch.h[k]));
        write_mat(&mut s, &format!("d{k}"), &as_col(&ch.d[k]));
    }
    s
}

pub fn parse_channelset(text: &str) -> Result<ChannelSet, ChannelError> {
    let bad = |m: &str| ChannelError::BadDump(m.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty dump"))?;
    let users: usize = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("users=").and_then(|v| v.parse().ok()))
        .ok_or_else(|| bad("missing users= in header"))?;
    let (_, f) = read_mat(&mut lines, Some("F"))?;
    let mut h = Vec::with_capacity(users);
    let mut d = Vec::with_capacity(users);
    for k in 0..users {
        let (_, hm) = read_mat(&mut lines, Some(&format!("h{k}")))?;
        let (_, dm) = read_mat(&mut lines, Some(&format!("d{k}")))?;
        h.push(col(&hm));
        d.push(col(&dm));
    }
    Ok(ChannelSet::assemble(f, h, d))
}

/// A finished design plus the targets it was solved for, as written by the
/// CLI and consumed by the adversarial verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionDump {
    pub w: Vec<ComplexVector>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2: Vec<f64>,
}

pub fn dump_solution(sol: &SolutionDump) -> String {
    let mut s = format!(
        "solution users={} nt={} m={}\n",
        sol.w.len(),
        sol.w.first().map_or(0, |w| w.len()),
        sol.theta.len()
    );
    let line = |name: &str, vals: &[f64]| {
        let body: Vec<String> = vals.iter().map(|v| format!("{v:.16e}")).collect();
        format!("{name} {}\n", body.join(" "))
    };
    s.push_str(&line("theta", &sol.theta));
    s.push_str(&line("gamma", &sol.gamma));
    s.push_str(&line("sigma2", &sol.sigma2));
    for (k, w) in sol.w.iter().enumerate() {
        write_mat(&mut s, &format!("w{k}"), &as_col(w));
    }
    s
}

pub fn parse_solution(text: &str) -> Result<SolutionDump, ChannelError> {
    let bad = |m: &str| ChannelError::BadDump(m.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty dump"))?;
    let field = |name: &str| {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(&format!("{name}=")).and_then(|v| v.parse::<usize>().ok()))
    };
    let users = field("users").ok_or_else(|| bad("missing users= in header"))?;
    let mut vec_line = |name: &str| -> Result<Vec<f64>, ChannelError> {
        let l = lines.next().ok_or_else(|| bad(&format!("missing {name} line")))?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(name) {
            return Err(bad(&format!("expected {name} line, got: {l}")));
        }
        toks.map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad float {t}"))))
            .collect()
    };
    let theta = vec_line("theta")?;
    let gamma = vec_line("gamma")?;
    let sigma2 = vec_line("sigma2")?;
    let mut w = Vec::with_capacity(users);
    for k in 0..users {
        let (_, m) = read_mat(&mut lines, Some(&format!("w{k}")))?;
        w.push(col(&m));
    }
    if gamma.len() != users || sigma2.len() != users {
        return Err(bad("per-user vector lengths disagree with user count"));
    }
    Ok(SolutionDump { w, theta, gamma, sigma2 })
}

pub fn dump_estimate(est: &ChannelEstimate) -> String {
    use std::fmt::Write;
    let mut s = format!("estimate users={} kappa={:.16e}\n", est.users(), est.kappa);
    for k in 0..est.users() {
        writeln!(
            s,
            "radii {k} {:.16e} {:.16e} {:.16e}",
            est.eps_e[k], est.eps_d[k], est.eps[k]
        )
        .unwrap();
        write_mat(&mut s, &format!("Ebar{k}"), &est.ebar[k]);
        write_mat(&mut s, &format!("dbar{k}"), &as_col(&est.dbar[k]));
    }
    s
}

pub fn parse_estimate(text: &str) -> Result<ChannelEstimate, ChannelError> {
    let bad = |m: &str| ChannelError::BadDump(m.to_string());
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty dump"))?;
    let users: usize = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("users=").and_then(|v| v.parse().ok()))
        .ok_or_else(|| bad("missing users= in header"))?;
    let kappa: f64 = header
        .split_whitespace()
        .find_map(|t| t.strip_prefix("kappa=").and_then(|v| v.parse().ok()))
        .ok_or_else(|| bad("missing kappa= in header"))?;
    let mut est = ChannelEstimate {
        ebar: Vec::new(),
        dbar: Vec::new(),
        hbar: Vec::new(),
        eps_e: Vec::new(),
        eps_d: Vec::new(),
        eps: Vec::new(),
        kappa,
    };
    for k in 0..users {
        let radii = lines.next().ok_or_else(|| bad("missing radii line"))?;
        let toks: Vec<&str> = radii.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "radii" {
            return Err(bad(&format!("bad radii line: {radii}")));
        }
        est.eps_e.push(toks[2].parse().map_err(|_| bad("bad eps_e"))?);
        est.eps_d.push(toks[3].parse().map_err(|_| bad("bad eps_d"))?);
        est.eps.push(toks[4].parse().map_err(|_| bad("bad eps"))?);
        let (_, eb) = read_mat(&mut lines, Some(&format!("Ebar{k}")))?;
        let (_, db) = read_mat(&mut lines, Some(&format!("dbar{k}")))?;
        est.hbar.push(effective(&eb, &col(&db)));
        est.ebar.push(eb);
        est.dbar.push(col(&db));
    }
    Ok(est)
}
