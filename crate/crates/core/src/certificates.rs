//! Dual certificates η(y) = Σ_j c_j k(x_j, y), global extremum search and θ-admissibility.

use crate::design::{fisher_info, whitened_condition, SINGULAR_CONDITION};
use crate::error::{Result, SikError};
use crate::forward::{apply_k, g_and_jacobian, Observation, SensorConfig};
use crate::kernels::KernelSpec;
use crate::linalg::{lambda_max, lambda_min, solve_spd};
use crate::measures::{dist2, tensor_grid, ParamVec, SparseMeasure, Weighting};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID: usize = 2048;
pub const DEFAULT_TOL_INTERP: f64 = 1e-6;
pub const EXCLUSION_RADIUS: f64 = 1e-3;
const NEWTON_STEPS: usize = 20;
const NEWTON_STEP_TOL: f64 = 1e-12;

/// A certificate η = K*c represented by its coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFunction {
    pub coeff: DVector<f64>,
    pub spec: KernelSpec,
    pub sensors: SensorConfig,
}

impl DualFunction {
    pub fn new(coeff: DVector<f64>, spec: KernelSpec, sensors: SensorConfig) -> Result<Self> {
        if coeff.len() != sensors.n_obs() {
            return Err(SikError::Dimension("certificate coefficients must match the sensor count".into()));
        }
        Ok(Self { coeff, spec, sensors })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.sensors
            .x
            .iter()
            .zip(self.coeff.iter())
            .map(|(x, c)| c * self.spec.value(x, y))
            .sum()
    }

    /// (η(y), ∇η(y), ∇²η(y)).
    pub fn eval2(&self, y: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut v = 0.0;
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (x, c) in self.sensors.x.iter().zip(self.coeff.iter()) {
            let j = self.spec.jet(x, y, 2);
            v += c * j.value;
            for a in 0..d {
                g[a] += c * j.grad[a];
                for b in 0..d {
                    h[(a, b)] += c * j.hess[a * d + b];
                }
            }
        }
        (v, g, h)
    }

    pub fn gradient(&self, y: &[f64]) -> DVector<f64> {
        self.eval2(y).1
    }

    pub fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        self.eval2(y).2
    }

    /// Grid points of the source domain with the certificate value at each.
    pub fn sample(&self, resolution: &[usize]) -> Result<Vec<(Vec<f64>, f64)>> {
        let grid = source_grid(&self.spec, resolution)?;
        Ok(grid
            .into_iter()
            .map(|y| {
                let v = self.value(&y);
                (y, v)
            })
            .collect())
    }
}

pub(crate) fn source_grid(spec: &KernelSpec, resolution: &[usize]) -> Result<Vec<Vec<f64>>> {
    let d = spec.dim();
    let counts: Vec<usize> = match resolution.len() {
        1 => vec![resolution[0]; d],
        n if n == d => resolution.to_vec(),
        n => return Err(SikError::Dimension(format!("grid resolution has {n} axes, expected 1 or {d}"))),
    };
    if counts.iter().any(|c| *c < 2) {
        return Err(SikError::InvalidInput("grid resolution must be at least 2 per axis".into()));
    }
    let axes: Vec<Vec<f64>> = (0..d).map(|a| spec.src_domain.axis_points(a, counts[a])).collect();
    Ok(tensor_grid(&axes))
}

/// Vanishing-derivative pre-certificate η_PC = K*Σ0⁻¹G'(m†)I0⁻¹(ρ; 0).
pub fn pre_certificate(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec) -> Result<DualFunction> {
    let w = Weighting::from_params(m)?;
    let i0 = fisher_info(spec, sensors, m);
    let cond = whitened_condition(&i0, &w);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(SikError::SingularFisher(cond));
    }
    let (_, jac) = g_and_jacobian(spec, sensors, m);
    let n = m.n_atoms();
    let mut rhs = DVector::zeros(m.len());
    for k in 0..n {
        rhs[k] = m.q[k].signum();
    }
    let v = solve_spd(&i0, &rhs).ok_or(SikError::SingularFisher(cond))?;
    let c = (jac * v).component_mul(&sensors.precision_weights());
    DualFunction::new(c, spec.clone(), sensors.clone())
}

/// η̄ = −K*Σ0⁻¹(Kμ̄ − z)/β.
pub fn regularized_certificate(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    mu: &SparseMeasure,
    z: &Observation,
    beta: f64,
) -> Result<DualFunction> {
    if !(beta > 0.0) {
        return Err(SikError::InvalidInput("beta must be positive".into()));
    }
    if z.z.len() != sensors.n_obs() {
        return Err(SikError::Dimension("observation length differs from the sensor count".into()));
    }
    let resid = z.z_vector() - apply_k(spec, sensors, mu);
    let c = resid.component_mul(&sensors.precision_weights()) / beta;
    DualFunction::new(c, spec.clone(), sensors.clone())
}

/// Post-hoc check of the two optimality conditions of a regularized solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCheck {
    pub max_abs: f64,
    pub argmax: Vec<f64>,
    pub max_interp_residual: f64,
    pub satisfied: bool,
}

pub fn check_optimality(eta: &DualFunction, mu: &SparseMeasure, resolution: &[usize], tol: f64) -> Result<OptimalityCheck> {
    let (argmax, max_abs) = global_max_abs(eta, resolution)?;
    let max_interp_residual = mu
        .atoms()
        .iter()
        .map(|a| (eta.value(&a.position) - a.weight.signum()).abs())
        .fold(0.0, f64::max);
    Ok(OptimalityCheck {
        satisfied: max_abs <= 1.0 + tol && max_interp_residual <= tol,
        max_abs,
        argmax,
        max_interp_residual,
    })
}

/// Maximizer of |η| over Ω_s: best grid points refined by safeguarded Newton steps.
pub fn global_max_abs(eta: &DualFunction, resolution: &[usize]) -> Result<(Vec<f64>, f64)> {
    let grid = source_grid(&eta.spec, resolution)?;
    let vals: Vec<f64> = grid.iter().map(|y| eta.value(y).abs()).collect();
    let spacing = (0..eta.dim())
        .map(|a| {
            let n = (grid.len() as f64).powf(1.0 / eta.dim() as f64).round().max(2.0);
            (eta.spec.src_domain.upper[a] - eta.spec.src_domain.lower[a]) / (n - 1.0)
        })
        .fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|a, b| vals[*b].total_cmp(&vals[*a]).then(a.cmp(b)));
    let mut starts: Vec<usize> = Vec::new();
    for &i in &order {
        if starts.len() >= 8 {
            break;
        }
        if starts.iter().all(|&s| dist2(&grid[s], &grid[i]) > 2.5 * spacing) {
            starts.push(i);
        }
    }
    let best_grid = order[0];
    let mut best = (grid[best_grid].clone(), vals[best_grid]);
    if vals[best_grid] == 0.0 {
        return Ok(best);
    }
    for s in starts {
        let (y, v) = refine_max(eta, &grid[s], vals[s]);
        if v > best.1 {
            best = (y, v);
        }
    }
    Ok(best)
}

fn refine_max(eta: &DualFunction, start: &[f64], start_val: f64) -> (Vec<f64>, f64) {
    let dom = &eta.spec.src_domain;
    let mut y = start.to_vec();
    let mut fy = start_val;
    for _ in 0..NEWTON_STEPS {
        let (v, g, h) = eta.eval2(&y);
        let s = v.signum();
        let hs = &h * s;
        let gs = &g * s;
        let dir = if lambda_max(&hs) < 0.0 {
            match (-&hs).clone().cholesky() {
                Some(ch) => ch.solve(&gs),
                None => gs.clone() / lambda_min(&-&hs).max(1e-12),
            }
        } else {
            let scale = lambda_max(&hs.abs()).max(1.0);
            gs.clone() / scale
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let mut cand: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
            dom.clamp(&mut cand);
            let fc = eta.value(&cand).abs();
            if fc > fy {
                let step = dist2(&cand, &y);
                y = cand;
                fy = fc;
                moved = step > NEWTON_STEP_TOL;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (y, fy)
}

/// Quantitative non-degeneracy of a certificate for a sparse measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub theta_star: Option<f64>,
    pub failure: Option<String>,
    pub interp_value_residual: f64,
    pub interp_gradient_residual: f64,
    pub hessian_caps: Vec<f64>,
    pub hessian_margins: Vec<f64>,
    pub global_margin: f64,
    pub grid_theta: f64,
    pub max_abs_on_grid: f64,
}

/// Largest θ ∈ (0, 1] with |η(y)| ≤ 1 − θ·min{θ, min_n ‖w_n(y − y_n)‖²} on the grid and
/// −sign(q_n)∇²η(y_n) ⪰ 2θw_n² at every atom.
pub fn theta_admissibility(eta: &DualFunction, mu: &SparseMeasure, resolution: &[usize], tol_interp: f64) -> Result<AdmissibilityReport> {
    let d = eta.dim();
    let q = mu.weights();
    let w = Weighting::from_q(&q, d)?.w;
    let grid = source_grid(&eta.spec, resolution)?;
    let mut interp_v = 0.0_f64;
    let mut interp_g = 0.0_f64;
    let mut curv = Vec::with_capacity(mu.len());
    for a in mu.atoms() {
        let (v, g, h) = eta.eval2(&a.position);
        interp_v = interp_v.max((v - a.weight.signum()).abs());
        interp_g = interp_g.max(g.norm());
        curv.push(lambda_min(&(h * -a.weight.signum())));
    }
    let caps: Vec<f64> = curv.iter().zip(&w).map(|(c, wn)| (c / (2.0 * wn * wn)).clamp(0.0, 1.0)).collect();

    let mut grid_theta = f64::INFINITY;
    let mut max_abs = 0.0_f64;
    let mut kept: Vec<(f64, f64)> = Vec::with_capacity(grid.len());
    for y in &grid {
        let e = eta.value(y).abs();
        max_abs = max_abs.max(e);
        let s = mu
            .atoms()
            .iter()
            .zip(&w)
            .map(|(a, wn)| wn * wn * dist2(y, &a.position).powi(2))
            .fold(f64::INFINITY, f64::min);
        if s.sqrt() <= EXCLUSION_RADIUS {
            continue;
        }
        let g = 1.0 - e;
        let th = if g <= 0.0 {
            0.0
        } else if g.sqrt() <= s {
            g.sqrt()
        } else {
            g / s
        };
        grid_theta = grid_theta.min(th);
        kept.push((e, s));
    }
    let margins_at = |theta: f64| -> (Vec<f64>, f64) {
        let hm = curv.iter().zip(&w).map(|(c, wn)| c - 2.0 * theta * wn * wn).collect();
        let gm = kept
            .iter()
            .map(|(e, s)| 1.0 - e - theta * theta.min(*s))
            .fold(f64::INFINITY, f64::min);
        (hm, gm)
    };
    let mut failure = None;
    if interp_v > tol_interp || interp_g > tol_interp {
        failure = Some(format!(
            "interpolation residuals {interp_v:.3e} (value) / {interp_g:.3e} (gradient) exceed {tol_interp:.1e}"
        ));
    }
    let cap = caps.iter().copied().fold(1.0, f64::min);
    let theta = grid_theta.min(cap).min(1.0) * (1.0 - 1e-12);
    if failure.is_none() && !(theta > 0.0) {
        failure = Some(if grid_theta <= 0.0 {
            format!("global bound violated: max |eta| on grid = {max_abs:.6}")
        } else {
            "curvature condition fails at an atom".to_string()
        });
    }
    let (hessian_margins, global_margin) = margins_at(if failure.is_none() { theta } else { 0.0 });
    if failure.is_none() && (hessian_margins.iter().any(|m| *m < 0.0) || global_margin < 0.0) {
        failure = Some("margins negative at the computed theta".into());
    }
    Ok(AdmissibilityReport {
        admissible: failure.is_none(),
        theta_star: if failure.is_none() { Some(theta) } else { None },
        failure,
        interp_value_residual: interp_v,
        interp_gradient_residual: interp_g,
        hessian_caps: caps,
        hessian_margins,
        global_margin,
        grid_theta,
        max_abs_on_grid: max_abs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::measures::{params_from_measure, BoxDomain};
    use approx::assert_relative_eq;

    fn dom() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0)
    }

    fn reference() -> SparseMeasure {
        SparseMeasure::from_pairs_1d(&[(0.4, -0.7), (0.3, -0.3), (-0.2, 0.3)], dom()).unwrap()
    }

    #[test]
    fn zero_certificate() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let eta = DualFunction::new(DVector::zeros(9), k, s).unwrap();
        assert_eq!(global_max_abs(&eta, &[257]).unwrap().1, 0.0);
    }

    #[test]
    fn single_bump_maximum() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::from_points_1d(&[0.3], 1.0).unwrap();
        let eta = DualFunction::new(DVector::from_vec(vec![1.0]), k, s).unwrap();
        let (y, v) = global_max_abs(&eta, &[100]).unwrap();
        assert_relative_eq!(y[0], 0.3, epsilon = 1e-10);
        assert_relative_eq!(v, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn regularized_certificate_examples() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let mu = reference();
        let z = Observation::exact(apply_k(&k, &s, &mu).iter().copied().collect());
        let eta = regularized_certificate(&k, &s, &mu, &z, 0.1).unwrap();
        assert!(eta.coeff.norm() < 1e-15);
        let zero = SparseMeasure::empty(dom());
        let e1 = regularized_certificate(&k, &s, &zero, &z, 0.1).unwrap();
        let z2 = Observation::exact(z.z.iter().map(|v| 2.0 * v).collect());
        let e2 = regularized_certificate(&k, &s, &zero, &z2, 0.1).unwrap();
        assert!((e2.coeff - e1.coeff * 2.0).norm() < 1e-12);
    }

    #[test]
    fn pre_certificate_interpolates() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let m = params_from_measure(&reference());
        let eta = pre_certificate(&k, &s, &m).unwrap();
        for n in 0..3 {
            let (v, g, _) = eta.eval2(m.position(n));
            assert!((v - m.q[n].signum()).abs() <= 1e-8);
            assert!(g.norm() <= 1e-8);
        }
        let (_, v) = global_max_abs(&eta, &[DEFAULT_GRID]).unwrap();
        assert!(v <= 1.0 + 1e-9);
        let fine = eta.sample(&[100_001]).unwrap().iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        assert!(v >= fine - 1e-12);
    }

    #[test]
    fn pre_certificate_ignores_precision_and_scale() {
        let s = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let m = params_from_measure(&reference());
        let a = pre_certificate(&KernelSpec::gaussian_1d(0.2), &s, &m).unwrap();
        let b = pre_certificate(&KernelSpec::gaussian_1d(0.2), &s.with_precision(1e7).unwrap(), &m).unwrap();
        assert_eq!(a.coeff, b.coeff);
        let kn = KernelSpec::new(
            KernelFamily::Gaussian {
                sigma: 0.2,
                normalized: true,
            },
            dom(),
            dom(),
        )
        .unwrap();
        let c = pre_certificate(&kn, &s, &m).unwrap();
        for y in [-0.9, -0.5, 0.0, 0.45, 0.8] {
            assert_relative_eq!(a.value(&[y]), c.value(&[y]), epsilon = 1e-9);
        }
    }

    #[test]
    fn single_sensor_at_atom_is_singular() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::from_points_1d(&[0.1], 1.0).unwrap();
        let m = ParamVec::new(vec![1.0], vec![0.1], 1).unwrap();
        assert!(matches!(pre_certificate(&k, &s, &m), Err(SikError::SingularFisher(_))));
    }

    #[test]
    fn admissibility_classification() {
        let k = KernelSpec::gaussian_1d(0.2);
        let mu = reference();
        let m = params_from_measure(&mu);
        for (n, expect) in [(6, false), (9, true), (11, true)] {
            let s = SensorConfig::equispaced_1d(-1.0, 1.0, n, 1e4).unwrap();
            let eta = pre_certificate(&k, &s, &m).unwrap();
            let rep = theta_admissibility(&eta, &mu, &[DEFAULT_GRID], DEFAULT_TOL_INTERP).unwrap();
            assert_eq!(rep.admissible, expect, "{n} sensors: {rep:?}");
            if let Some(theta) = rep.theta_star {
                assert!(theta > 0.0 && theta <= 1.0);
                // Re-check the ball form of the condition independently.
                for (y, v) in eta.sample(&[DEFAULT_GRID]).unwrap() {
                    let outside = mu
                        .atoms()
                        .iter()
                        .all(|a| a.weight.abs().sqrt() * dist2(&y, &a.position) >= theta.sqrt());
                    if outside {
                        assert!(v.abs() <= 1.0 - theta * theta + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn flat_interpolant_has_no_theta() {
        let k = KernelSpec::new(KernelFamily::Constant { value: 1.0 }, dom(), dom()).unwrap();
        let s = SensorConfig::from_points_1d(&[0.0], 1.0).unwrap();
        let eta = DualFunction::new(DVector::from_vec(vec![1.0]), k, s).unwrap();
        let mu = SparseMeasure::from_pairs_1d(&[(0.5, 0.2)], dom()).unwrap();
        let rep = theta_admissibility(&eta, &mu, &[64], DEFAULT_TOL_INTERP).unwrap();
        assert!(!rep.admissible && rep.theta_star.is_none());
    }
}
