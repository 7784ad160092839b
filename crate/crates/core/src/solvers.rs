//! Reconstruction: PDAP for the measure-space problem and the sign-frozen Gauss-Newton
//! iteration for the fixed-cardinality stationary point.

use crate::certificates::{global_max_abs, regularized_certificate, DEFAULT_GRID};
use crate::design::{fisher_info, rho_vector, whitened_condition, SINGULAR_CONDITION};
use crate::error::{Result, SikError};
use crate::forward::{apply_k, g_and_jacobian, kernel_matrix, Observation, SensorConfig};
use crate::kernels::KernelSpec;
use crate::linalg::{lambda_max, lambda_min, solve_spd};
use crate::measures::{dist2, measure_from_params, params_from_measure, Atom, ParamVec, SparseMeasure, Weighting};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PdapConfig {
    pub max_outer_iters: usize,
    /// Insertion grid points per axis (one entry for all axes or one per axis).
    pub grid_resolution: Vec<usize>,
    pub tol_cert: f64,
    pub tol_coeff: f64,
    pub q_prune: f64,
    pub merge_radius: f64,
    pub improve_positions: bool,
    pub max_local_iters: usize,
}

impl Default for PdapConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            grid_resolution: vec![DEFAULT_GRID],
            tol_cert: 1e-6,
            tol_coeff: 1e-12,
            q_prune: 1e-10,
            merge_radius: 1e-9,
            improve_positions: true,
            max_local_iters: 50,
        }
    }
}

impl PdapConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_cert, self.tol_coeff, self.q_prune, self.merge_radius];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(SikError::Config("PDAP tolerances must be positive".into()));
        }
        if self.max_outer_iters == 0 || self.grid_resolution.is_empty() {
            return Err(SikError::Config("PDAP needs at least one iteration and a grid".into()));
        }
        Ok(())
    }
}

/// Which matrix drives the Gauss-Newton update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMode {
    /// I0 evaluated once at the initial point.
    Frozen,
    /// I(m^k) = G'(m^k)ᵀΣ0⁻¹G'(m^k) at every iterate.
    Relinearized,
    /// Exact Hessian of the sign-frozen objective.
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GnConfig {
    pub max_iters: usize,
    /// Initial step length in (0, 1].
    pub damping: f64,
    /// Tolerance on ‖S(m)‖_{W⁻¹} with W built from the initial weights.
    pub tol: f64,
    pub sign_guard: bool,
    pub q_floor: f64,
    pub max_halvings: usize,
    pub mode: FisherMode,
    /// Switch to exact Newton steps with an objective line search when the residual stalls
    /// or contracts by less than half on three consecutive steps.
    pub newton_fallback: bool,
}

impl Default for GnConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            damping: 1.0,
            tol: 1e-10,
            sign_guard: true,
            q_floor: 1e-12,
            max_halvings: 30,
            mode: FisherMode::Frozen,
            newton_fallback: true,
        }
    }
}

impl GnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SikError::Config("Gauss-Newton damping must lie in (0, 1]".into()));
        }
        if !(self.tol > 0.0 && self.q_floor > 0.0) {
            return Err(SikError::Config("Gauss-Newton tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    SignFlip,
    Singular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub certificate_max: Option<f64>,
    pub stationarity_residual: Option<f64>,
    pub atom_counts: Vec<usize>,
    pub objective: Vec<f64>,
    pub wall_time_s: f64,
    pub status: SolveStatus,
}

impl SolveReport {
    fn new(status: SolveStatus) -> Self {
        Self {
            iterations: 0,
            certificate_max: None,
            stationarity_residual: None,
            atom_counts: Vec::new(),
            objective: Vec::new(),
            wall_time_s: 0.0,
            status,
        }
    }
}

/// ½‖Kμ − z‖²_{Σ0⁻¹} + β‖μ‖_M.
pub fn blasso_objective(spec: &KernelSpec, sensors: &SensorConfig, mu: &SparseMeasure, z: &Observation, beta: f64) -> f64 {
    let r = apply_k(spec, sensors, mu) - z.z_vector();
    0.5 * sensors.weighted_norm_sq(&r) + beta * mu.total_variation()
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn check_obs(sensors: &SensorConfig, z: &Observation) -> Result<()> {
    if z.z.len() != sensors.n_obs() {
        return Err(SikError::Dimension("observation length differs from the sensor count".into()));
    }
    Ok(())
}

/// Minimizer of ½qᵀHq − cᵀq + β‖q‖₁ and its proximal KKT residual.
pub(crate) fn lasso_qp(h: &DMatrix<f64>, c: &DVector<f64>, beta: f64, warm: Option<&DVector<f64>>, tol: f64) -> (DVector<f64>, f64) {
    let n = c.len();
    if n == 0 {
        return (DVector::zeros(0), 0.0);
    }
    let l = lambda_max(h);
    if !(l > 0.0) {
        return (DVector::zeros(n), 0.0);
    }
    let tau = 1.0 / l;
    let scale = c.amax().max(beta).max(1e-300);
    let kkt = |q: &DVector<f64>| -> f64 {
        let g = h * q - c;
        (0..n)
            .map(|i| (q[i] - soft(q[i] - tau * g[i], tau * beta)).abs())
            .fold(0.0, f64::max)
            / tau
    };
    let q0 = warm.filter(|w| w.len() == n).cloned().unwrap_or_else(|| DVector::zeros(n));
    // Semismooth Newton on the normal map F(u) = H·soft(u) − c + (u − soft(u))/τ.
    let normal_map = |u: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        let q = u.map(|v| soft(v, tau * beta));
        let f = h * &q - c + (u - &q) / tau;
        (q, f)
    };
    let mut u = &q0 - (h * &q0 - c) * tau;
    let (mut q, mut f) = normal_map(&u);
    for _ in 0..100 {
        if f.amax() <= tol * scale {
            break;
        }
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            if u[j].abs() > tau * beta {
                m.set_column(j, &h.column(j));
            } else {
                m[(j, j)] = 1.0 / tau;
            }
        }
        let Some(du) = m.lu().solve(&-&f) else { break };
        let f0 = f.norm();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let cand = &u + &du * t;
            let (qc, fc) = normal_map(&cand);
            if fc.norm() < (1.0 - 1e-4 * t) * f0 {
                u = cand;
                q = qc;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let mut res = kkt(&q);
    if res > tol * scale {
        // Accelerated proximal gradient fallback.
        let mut x = q.clone();
        let mut yv = q.clone();
        let mut tk = 1.0_f64;
        for it in 0..200_000 {
            let g = h * &yv - c;
            let xn = (&yv - g * tau).map(|v| soft(v, tau * beta));
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
            yv = &xn + (&xn - &x) * ((tk - 1.0) / tn);
            x = xn;
            tk = tn;
            if it % 64 == 0 {
                let r = kkt(&x);
                if r <= tol * scale {
                    break;
                }
            }
        }
        let r = kkt(&x);
        if r < res {
            q = x;
            res = r;
        }
    }
    (q, res)
}

/// Fully corrective coefficients on a fixed support:
/// argmin_q ½‖k[x, y]q − z‖²_{Σ0⁻¹} + β‖q‖₁.
pub fn solve_coefficients(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    support: &[Vec<f64>],
    z: &Observation,
    beta: f64,
) -> Result<DVector<f64>> {
    check_obs(sensors, z)?;
    if !(beta >= 0.0) {
        return Err(SikError::InvalidInput("beta must be nonnegative".into()));
    }
    let (h, c) = normal_equations(spec, sensors, support, z);
    Ok(lasso_qp(&h, &c, beta, None, PdapConfig::default().tol_coeff).0)
}

fn normal_equations(spec: &KernelSpec, sensors: &SensorConfig, support: &[Vec<f64>], z: &Observation) -> (DMatrix<f64>, DVector<f64>) {
    let k = kernel_matrix(spec, sensors, support);
    let wk = DMatrix::from_diagonal(&sensors.precision_weights()) * &k;
    let h = k.transpose() * &wk;
    let c = wk.transpose() * z.z_vector();
    ((&h + h.transpose()) * 0.5, c)
}

/// Value, gradient S(m) and Hessian of f(m) = ½‖G(m) − z‖²_{Σ0⁻¹} + β Σ s_n q_n.
/// `hessian` selects the Gauss-Newton matrix (false) or the exact Hessian (true).
struct SignFrozen<'a> {
    spec: &'a KernelSpec,
    sensors: &'a SensorConfig,
    z: DVector<f64>,
    beta: f64,
    signs: Vec<f64>,
}

impl SignFrozen<'_> {
    fn value(&self, m: &ParamVec) -> f64 {
        let (g, _) = g_and_jacobian(self.spec, self.sensors, m);
        let r = g - &self.z;
        0.5 * self.sensors.weighted_norm_sq(&r) + self.beta * m.q.iter().zip(&self.signs).map(|(q, s)| q * s).sum::<f64>()
    }

    fn gradient(&self, m: &ParamVec) -> (DVector<f64>, DVector<f64>, DMatrix<f64>) {
        let (g, jac) = g_and_jacobian(self.spec, self.sensors, m);
        let wr = (g - &self.z).component_mul(&self.sensors.precision_weights());
        let mut s = jac.transpose() * &wr;
        for (k, sg) in self.signs.iter().enumerate() {
            s[k] += self.beta * sg;
        }
        (s, wr, jac)
    }

    fn gn_matrix(&self, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let wj = DMatrix::from_diagonal(&self.sensors.precision_weights()) * jac;
        let i = jac.transpose() * wj;
        (&i + i.transpose()) * 0.5
    }

    /// G'ᵀΣ0⁻¹G' + Σ_j (Σ0⁻¹r)_j ∇²G_j.
    fn exact_hessian(&self, m: &ParamVec, wr: &DVector<f64>, jac: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, d) = (m.n_atoms(), m.dim);
        let mut h = self.gn_matrix(jac);
        for k in 0..n {
            for (j, x) in self.sensors.x.iter().enumerate() {
                let jet = self.spec.jet(x, m.position(k), 2);
                for a in 0..d {
                    let ya = n + k * d + a;
                    h[(k, ya)] += wr[j] * jet.grad[a];
                    h[(ya, k)] += wr[j] * jet.grad[a];
                    for b in 0..d {
                        h[(ya, n + k * d + b)] += wr[j] * m.q[k] * jet.hess[a * d + b];
                    }
                }
            }
        }
        h
    }

    fn signs_kept(&self, m: &ParamVec, floor: f64) -> bool {
        m.q.iter().zip(&self.signs).all(|(q, s)| q * s >= floor)
    }
}

/// Newton direction for a possibly indefinite symmetric matrix, shifted to be positive definite.
fn modified_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let lmin = lambda_min(h);
    let scale = lambda_max(&h.abs()).max(1e-300);
    let shift = if lmin > 1e-12 * scale { 0.0 } else { -lmin + 1e-8 * scale };
    let hs = h + DMatrix::identity(h.nrows(), h.ncols()) * shift;
    hs.cholesky().map(|ch| -ch.solve(g))
}

/// Sign-frozen joint (q, y) descent on the fixed-cardinality objective.
fn local_descent(model: &SignFrozen, m: ParamVec, iters: usize, domain: &crate::measures::BoxDomain) -> ParamVec {
    let mut m = m;
    let mut f = model.value(&m);
    for _ in 0..iters {
        let (g, wr, jac) = model.gradient(&m);
        let h = model.exact_hessian(&m, &wr, &jac);
        let Some(dir) = modified_newton(&h, &g) else { break };
        let slope = g.dot(&dir);
        if !(slope < 0.0) || -slope <= 1e-28 {
            break;
        }
        let dirp = ParamVec::from_vector(&dir, m.n_atoms(), m.dim).expect("direction matches layout");
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let mut cand = m.add_scaled(&dirp, t);
            for k in 0..cand.n_atoms() {
                let (lo, hi) = (k * cand.dim, (k + 1) * cand.dim);
                domain.clamp(&mut cand.y[lo..hi]);
            }
            if model.signs_kept(&cand, 1e-14) {
                let fc = model.value(&cand);
                if fc <= f + 1e-4 * t * slope {
                    m = cand;
                    f = fc;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    m
}

fn merge_close(support: &mut Vec<Vec<f64>>, q: &mut Vec<f64>, radius: f64) {
    let mut i = 0;
    while i < support.len() {
        let mut j = i + 1;
        while j < support.len() {
            if dist2(&support[i], &support[j]) <= radius {
                q[i] += q[j];
                support.remove(j);
                q.remove(j);
            } else {
                j += 1;
            }
        }
        i += 1;
    }
}

/// Primal-dual active point method for min_μ ½‖Kμ − z‖²_{Σ0⁻¹} + β‖μ‖_M.
pub fn solve_blasso_pdap(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    z: &Observation,
    beta: f64,
    cfg: &PdapConfig,
) -> Result<(SparseMeasure, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check_obs(sensors, z)?;
    if !(beta > 0.0) {
        return Err(SikError::InvalidInput("beta must be positive".into()));
    }
    let domain = spec.src_domain.clone();
    let dim = spec.dim();
    let mut support: Vec<Vec<f64>> = Vec::new();
    let mut q: Vec<f64> = Vec::new();
    let mut report = SolveReport::new(SolveStatus::MaxIters);
    let build = |support: &[Vec<f64>], q: &[f64]| -> Result<SparseMeasure> {
        let atoms = support.iter().zip(q).map(|(y, w)| Atom::new(*w, y.clone())).collect();
        SparseMeasure::with_tolerances(atoms, domain.clone(), cfg.merge_radius, 0.0)
    };
    let mut best = (f64::INFINITY, SparseMeasure::empty(domain.clone()));
    for it in 0..cfg.max_outer_iters {
        let mu = build(&support, &q)?;
        let obj = blasso_objective(spec, sensors, &mu, z, beta);
        report.objective.push(obj);
        report.atom_counts.push(mu.len());
        report.iterations = it;
        if obj < best.0 {
            best = (obj, mu.clone());
        }
        let eta = regularized_certificate(spec, sensors, &mu, z, beta)?;
        let (ystar, vmax) = global_max_abs(&eta, &cfg.grid_resolution)?;
        report.certificate_max = Some(vmax);
        if vmax <= 1.0 + cfg.tol_cert {
            report.status = SolveStatus::Converged;
            return finish(report, mu, start);
        }
        let stalled = support.iter().any(|y| dist2(y, &ystar) <= cfg.merge_radius);
        if !stalled {
            support.push(ystar);
            q.push(0.0);
        }
        let (h, c) = normal_equations(spec, sensors, &support, z);
        let (qn, _) = lasso_qp(&h, &c, beta, Some(&DVector::from_vec(q.clone())), cfg.tol_coeff);
        q = qn.iter().copied().collect();
        prune(&mut support, &mut q, cfg.q_prune);
        if cfg.improve_positions && !q.is_empty() {
            let m = ParamVec::new(q.clone(), support.concat(), dim)?;
            let model = SignFrozen {
                spec,
                sensors,
                z: z.z_vector(),
                beta,
                signs: m.q.iter().map(|v| v.signum()).collect(),
            };
            let m = local_descent(&model, m, cfg.max_local_iters, &domain);
            support = (0..m.n_atoms()).map(|k| m.position(k).to_vec()).collect();
            q = m.q.clone();
            merge_close(&mut support, &mut q, cfg.merge_radius);
            let (h, c) = normal_equations(spec, sensors, &support, z);
            let (qn, _) = lasso_qp(&h, &c, beta, Some(&DVector::from_vec(q.clone())), cfg.tol_coeff);
            q = qn.iter().copied().collect();
            prune(&mut support, &mut q, cfg.q_prune);
        } else if stalled {
            break;
        }
    }
    let mu = build(&support, &q)?;
    let obj = blasso_objective(spec, sensors, &mu, z, beta);
    let out = if obj <= best.0 { mu } else { best.1 };
    let eta = regularized_certificate(spec, sensors, &out, z, beta)?;
    report.certificate_max = Some(global_max_abs(&eta, &cfg.grid_resolution)?.1);
    finish(report, out, start)
}

fn prune(support: &mut Vec<Vec<f64>>, q: &mut Vec<f64>, thr: f64) {
    let keep: Vec<bool> = q.iter().map(|v| v.abs() > thr).collect();
    let mut k = keep.iter();
    support.retain(|_| *k.next().expect("same length"));
    q.retain(|v| v.abs() > thr);
}

fn finish(mut report: SolveReport, mu: SparseMeasure, start: Instant) -> Result<(SparseMeasure, SolveReport)> {
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((mu, report))
}

/// Sign-guarded Gauss-Newton iteration m^{k+1} = m^k − t·M⁻¹S(m^k) for the stationarity
/// condition S(m) = G'(m)ᵀΣ0⁻¹(G(m) − z) + β(sign q_init; 0) = 0, where M is I0 at
/// m_init (frozen), I(m^k) (relinearized) or the exact Hessian (Newton).
pub fn stationary_gauss_newton(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    z: &Observation,
    beta: f64,
    m_init: &ParamVec,
    cfg: &GnConfig,
) -> Result<(ParamVec, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check_obs(sensors, z)?;
    if !(beta >= 0.0) {
        return Err(SikError::InvalidInput("beta must be nonnegative".into()));
    }
    let w = Weighting::from_params(m_init)?;
    let model = SignFrozen {
        spec,
        sensors,
        z: z.z_vector(),
        beta,
        signs: m_init.q.iter().map(|v| v.signum()).collect(),
    };
    let mut report = SolveReport::new(SolveStatus::MaxIters);
    let i0 = fisher_info(spec, sensors, m_init);
    if !(whitened_condition(&i0, &w) <= SINGULAR_CONDITION) {
        report.status = SolveStatus::Singular;
        report.wall_time_s = start.elapsed().as_secs_f64();
        return Ok((m_init.clone(), report));
    }
    let resid = |s: &DVector<f64>| w.dual_norm_sq_vec(s).map(f64::sqrt);
    let domain = &spec.src_domain;
    let clamp = |m: &mut ParamVec| {
        for k in 0..m.n_atoms() {
            let (lo, hi) = (k * m.dim, (k + 1) * m.dim);
            domain.clamp(&mut m.y[lo..hi]);
        }
    };
    let mut m = m_init.clone();
    let mut newton = cfg.mode == FisherMode::Newton;
    let mut slow = 0;
    let (mut s, mut wr, mut jac) = model.gradient(&m);
    let mut r = resid(&s)?;
    report.objective.push(model.value(&m));
    report.atom_counts.push(m.n_atoms());
    for it in 0..cfg.max_iters {
        report.iterations = it;
        if r <= cfg.tol {
            report.status = SolveStatus::Converged;
            break;
        }
        let mat = match (newton, cfg.mode) {
            (true, _) => model.exact_hessian(&m, &wr, &jac),
            (false, FisherMode::Relinearized) => model.gn_matrix(&jac),
            _ => i0.clone(),
        };
        let dir = if newton {
            modified_newton(&mat, &s)
        } else {
            solve_spd(&mat, &s).map(|v| -v)
        };
        let Some(dir) = dir else {
            report.status = SolveStatus::Singular;
            break;
        };
        let dirp = ParamVec::from_vector(&dir, m.n_atoms(), m.dim)?;
        let f0 = model.value(&m);
        let slope = s.dot(&dir);
        let mut t = cfg.damping;
        let mut accepted = None;
        let mut sign_blocked = false;
        for _ in 0..=cfg.max_halvings {
            let mut cand = m.add_scaled(&dirp, t);
            clamp(&mut cand);
            if cfg.sign_guard && !model.signs_kept(&cand, cfg.q_floor) {
                sign_blocked = true;
                t *= 0.5;
                continue;
            }
            let ok = if newton {
                // Armijo on the objective; within roundoff of f, a residual decrease decides.
                let fc = model.value(&cand);
                fc < f0 + 1e-4 * t * slope.min(0.0)
                    || ((fc - f0).abs() <= 1e-13 * f0.abs().max(1e-300) && resid(&model.gradient(&cand).0)? < r)
            } else {
                let (sc, _, _) = model.gradient(&cand);
                resid(&sc)? < r
            };
            if ok {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => {
                m = next;
                (s, wr, jac) = model.gradient(&m);
                let r_old = r;
                r = resid(&s)?;
                slow = if r > 0.5 * r_old { slow + 1 } else { 0 };
                if !newton && cfg.newton_fallback && slow >= 3 {
                    newton = true;
                }
                report.objective.push(model.value(&m));
                report.atom_counts.push(m.n_atoms());
            }
            None if !newton && cfg.newton_fallback => newton = true,
            None => {
                report.status = if sign_blocked {
                    SolveStatus::SignFlip
                } else {
                    SolveStatus::MaxIters
                };
                break;
            }
        }
        report.iterations = it + 1;
    }
    if report.status == SolveStatus::MaxIters && r <= cfg.tol {
        report.status = SolveStatus::Converged;
    }
    report.stationarity_residual = Some(r);
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok((m, report))
}

/// δm̂ = I0⁻¹(G'(m)ᵀΣ0⁻¹ε − β(ρ; 0)).
pub fn linearized_estimate(sensors: &SensorConfig, spec: &KernelSpec, m: &ParamVec, eps: &DVector<f64>, beta: f64) -> Result<ParamVec> {
    if eps.len() != sensors.n_obs() {
        return Err(SikError::Dimension("noise length differs from the sensor count".into()));
    }
    let w = Weighting::from_params(m)?;
    let i0 = fisher_info(spec, sensors, m);
    let cond = whitened_condition(&i0, &w);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(SikError::SingularFisher(cond));
    }
    let (_, jac) = g_and_jacobian(spec, sensors, m);
    let rhs = jac.transpose() * eps.component_mul(&sensors.precision_weights()) - rho_vector(m) * beta;
    let v = solve_spd(&i0, &rhs).ok_or(SikError::SingularFisher(cond))?;
    ParamVec::from_vector(&v, m.n_atoms(), m.dim)
}

/// Parameters of a measure followed by the sign-frozen Gauss-Newton solve.
pub fn gauss_newton_from_measure(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    z: &Observation,
    beta: f64,
    mu_init: &SparseMeasure,
    cfg: &GnConfig,
) -> Result<(SparseMeasure, SolveReport)> {
    let (m, rep) = stationary_gauss_newton(spec, sensors, z, beta, &params_from_measure(mu_init), cfg)?;
    Ok((measure_from_params(&m, &spec.src_domain)?, rep))
}
