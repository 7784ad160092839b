//! Fisher information, the closed-form design criterion and the explicit theory constants.

use crate::error::{Result, SikError};
use crate::forward::{g_and_jacobian, SensorConfig};
use crate::kernels::{kernel_bounds, KernelBounds, KernelSpec};
use crate::linalg::{condition_number, inverse_spd, sym_spectral_norm};
use crate::measures::{ParamVec, Weighting};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Whitened Fisher matrices with a larger spectral condition number count as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// I0 = G'(m)ᵀΣ0⁻¹G'(m).
pub fn fisher_info(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec) -> DMatrix<f64> {
    let (_, jac) = g_and_jacobian(spec, sensors, m);
    let wj = DMatrix::from_diagonal(&sensors.precision_weights()) * &jac;
    let i0 = jac.transpose() * wj;
    (&i0 + i0.transpose()) * 0.5
}

fn sqrt_diag(w: &Weighting, power: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal(&w.diag().map(|v| v.powf(power)))
}

/// Condition number of W^{−1/2} I0 W^{−1/2}.
pub fn whitened_condition(i0: &DMatrix<f64>, w: &Weighting) -> f64 {
    let s = sqrt_diag(w, -0.5);
    condition_number(&(&s * i0 * &s))
}

/// ‖W^{1/2} I0⁻¹ W^{1/2}‖₂, the norm of I0⁻¹ as a map from the W⁻¹- to the W-norm.
pub fn weighted_opnorm_inv_fisher(i0: &DMatrix<f64>, w: &Weighting) -> Result<f64> {
    let cond = whitened_condition(i0, w);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(SikError::SingularFisher(cond));
    }
    let inv = inverse_spd(i0).ok_or(SikError::SingularFisher(cond))?;
    let s = sqrt_diag(w, 0.5);
    Ok(sym_spectral_norm(&(&s * inv * &s)))
}

/// Closed-form statistics of the linearized estimate for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub fisher: Vec<Vec<f64>>,
    pub singular: bool,
    pub condition_number: f64,
    pub inv_fisher_wnorm: f64,
    pub trace_term: f64,
    pub bias_term: f64,
    pub beta0: f64,
    pub p: f64,
    pub psi: f64,
    pub expected_mse: f64,
}

/// ψ = tr(W I0⁻¹) + β0²‖I0⁻¹(ρ; 0)‖²_W and E‖δm̂‖²_W = ψ/p. A singular I0 yields ψ = +∞.
pub fn design_criterion(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec, beta0: f64) -> Result<DesignReport> {
    let w = Weighting::from_params(m)?;
    let i0 = fisher_info(spec, sensors, m);
    let cond = whitened_condition(&i0, &w);
    let fisher = (0..i0.nrows()).map(|r| i0.row(r).iter().copied().collect()).collect();
    let inv = if cond <= SINGULAR_CONDITION { inverse_spd(&i0) } else { None };
    let Some(inv) = inv else {
        return Ok(DesignReport {
            fisher,
            singular: true,
            condition_number: cond,
            inv_fisher_wnorm: f64::INFINITY,
            trace_term: f64::INFINITY,
            bias_term: f64::INFINITY,
            beta0,
            p: sensors.p,
            psi: f64::INFINITY,
            expected_mse: f64::INFINITY,
        });
    };
    let wd = w.diag();
    let trace_term: f64 = (0..wd.len()).map(|i| wd[i] * inv[(i, i)]).sum();
    let v = &inv * rho_vector(m);
    let bias_term: f64 = wd.iter().zip(v.iter()).map(|(a, b)| a * b * b).sum();
    let s = sqrt_diag(&w, 0.5);
    let psi = trace_term + beta0 * beta0 * bias_term;
    Ok(DesignReport {
        fisher,
        singular: false,
        condition_number: cond,
        inv_fisher_wnorm: sym_spectral_norm(&(&s * &inv * &s)),
        trace_term,
        bias_term,
        beta0,
        p: sensors.p,
        psi,
        expected_mse: psi / sensors.p,
    })
}

/// (sign(q); 0) in parameter layout.
pub fn rho_vector(m: &ParamVec) -> DVector<f64> {
    let mut r = DVector::zeros(m.len());
    for (k, q) in m.q.iter().enumerate() {
        r[k] = q.signum();
    }
    r
}

/// P(‖ε0‖₂ > α) ≤ 2exp(−α²/(2N_o)) for standard normal ε0 ∈ R^{N_o}.
pub fn gaussian_tail(alpha: f64, n_obs: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(SikError::InvalidInput("tail level must be positive".into()));
    }
    Ok(2.0 * (-alpha * alpha / (2.0 * n_obs as f64)).exp())
}

/// Problem data entering the explicit constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantInputs {
    pub bounds: KernelBounds,
    pub q: Vec<f64>,
    /// Euclidean distance of each atom to the boundary of Ω_s.
    pub boundary_dist: Vec<f64>,
    pub inv_fisher_wnorm: f64,
    pub n_obs: usize,
    pub theta: f64,
    pub beta0: f64,
    pub p: f64,
}

/// Explicit constants of the mean-squared-error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub bounds: KernelBounds,
    pub inv_fisher_wnorm: f64,
    pub l_g: f64,
    pub l_gprime: f64,
    pub r_dagger: f64,
    pub c1: f64,
    pub c2: f64,
    pub big_c1: f64,
    pub c3: f64,
    pub c3_dd: f64,
    pub c4: f64,
    pub big_c2: f64,
    pub big_c3: f64,
    pub big_c4: f64,
    pub p_bar: f64,
    pub bad_event_bound: f64,
    pub theta: f64,
    pub beta0: f64,
    pub p: f64,
}

pub fn constants_from_inputs(inp: &ConstantInputs) -> Result<TheoryConstants> {
    if !(inp.theta > 0.0 && inp.theta <= 1.0) {
        return Err(SikError::InvalidInput(format!("theta = {} outside (0, 1]", inp.theta)));
    }
    if inp.q.is_empty() || inp.q.contains(&0.0) || inp.boundary_dist.len() != inp.q.len() {
        return Err(SikError::InvalidInput(
            "constants need nonzero weights and one boundary distance per atom".into(),
        ));
    }
    if !(inp.beta0 > 0.0 && inp.p > 0.0) {
        return Err(SikError::InvalidInput("beta0 and p must be positive".into()));
    }
    let b = inp.bounds;
    let q1: f64 = inp.q.iter().map(|v| v.abs()).sum();
    let sq1 = q1.sqrt();
    let w: Vec<f64> = inp.q.iter().map(|v| v.abs().sqrt()).collect();
    let inv = inp.inv_fisher_wnorm;
    let l_g = 4.0 * (2.0 * b.c_k + b.c_k1) * sq1;
    let l_gprime = 2.0 * (4.0 * b.c_k1 + b.c_k2);
    let r_dagger = w
        .iter()
        .zip(&inp.boundary_dist)
        .map(|(wn, dn)| (wn / 8.0).min(wn * dn / 2.0))
        .fold(f64::INFINITY, f64::min);
    let c1 = inv * (l_g + sq1);
    let c2 = l_gprime * inv * (6.0 * l_g * c1 + 1.0);
    let big_c1 = c1.max(4.0 * c1 / r_dagger).max(2.0 * c2);
    let common = (l_g + l_gprime) * big_c1 * big_c1 + 1.0;
    let c3 = b.c_k * common;
    let c3_dd = b.c_k2 * common;
    let max_inv_w = w.iter().map(|v| 1.0 / v).fold(0.0, f64::max);
    let c4 = max_inv_w * b.c_k3 * l_g * sq1 * inv * big_c1;
    let big_c2 = c3.max((c3_dd + c4) * max_inv_w * max_inv_w);
    let big_c4 = big_c1.max(big_c2);
    let big_c3 = 2.0 * q1 + (2.0 * inp.n_obs as f64).sqrt() / (2.0 * inp.beta0 * inp.p.sqrt());
    let a = inp.theta * inp.theta / (64.0 * big_c4);
    let bad_event_bound = big_c3 * (-(a * inp.beta0).powi(2) / (2.0 * inp.n_obs as f64)).exp();
    let p_bar = inp.beta0 * inp.beta0 * (a + 1.0).powi(4) / (a * a);
    Ok(TheoryConstants {
        bounds: b,
        inv_fisher_wnorm: inv,
        l_g,
        l_gprime,
        r_dagger,
        c1,
        c2,
        big_c1,
        c3,
        c3_dd,
        c4,
        big_c2,
        big_c3,
        big_c4,
        p_bar,
        bad_event_bound,
        theta: inp.theta,
        beta0: inp.beta0,
        p: inp.p,
    })
}

/// Constants for a concrete problem; kernel bounds are taken over a grid of `resolution`.
pub fn theory_constants(
    spec: &KernelSpec,
    sensors: &SensorConfig,
    m: &ParamVec,
    theta: f64,
    beta0: f64,
    p: f64,
    resolution: &[usize],
) -> Result<TheoryConstants> {
    let w = Weighting::from_params(m)?;
    let inv = weighted_opnorm_inv_fisher(&fisher_info(spec, sensors, m), &w)?;
    let bounds = kernel_bounds(spec, resolution)?;
    let boundary_dist = (0..m.n_atoms()).map(|n| spec.src_domain.dist_to_boundary(m.position(n))).collect();
    constants_from_inputs(&ConstantInputs {
        bounds,
        q: m.q.clone(),
        boundary_dist,
        inv_fisher_wnorm: inv,
        n_obs: sensors.n_obs(),
        theta,
        beta0,
        p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;
    use crate::measures::BoxDomain;
    use approx::assert_relative_eq;

    fn normalized() -> KernelSpec {
        KernelSpec::new(
            KernelFamily::Gaussian {
                sigma: 0.2,
                normalized: true,
            },
            BoxDomain::interval(-1.0, 1.0),
            BoxDomain::interval(-1.0, 1.0),
        )
        .unwrap()
    }

    fn m_dagger() -> ParamVec {
        ParamVec::new(vec![0.4, 0.3, -0.2], vec![-0.7, -0.3, 0.3], 1).unwrap()
    }

    #[test]
    fn single_sensor_fisher_is_singular() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::from_points_1d(&[0.2], 1.0).unwrap();
        let m = ParamVec::new(vec![1.0], vec![0.2], 1).unwrap();
        let i0 = fisher_info(&k, &s, &m);
        assert_eq!(i0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let rep = design_criterion(&k, &s, &m, 2.0).unwrap();
        assert!(rep.singular && rep.psi.is_infinite());
    }

    #[test]
    fn opnorm_examples() {
        let w = Weighting::from_q(&[0.4, -0.2], 1).unwrap();
        let wm = DMatrix::from_diagonal(&w.diag());
        assert_relative_eq!(weighted_opnorm_inv_fisher(&wm, &w).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(weighted_opnorm_inv_fisher(&(wm * 2.0), &w).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn opnorm_matches_power_iteration() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[4.0, 1.0, 0.5, 0.2, 1.0, 3.0, 0.3, 0.1, 0.5, 0.3, 2.0, 0.4, 0.2, 0.1, 0.4, 1.5],
        );
        let w = Weighting::from_q(&[0.7, 1.3], 1).unwrap();
        let s = DMatrix::from_diagonal(&w.diag().map(f64::sqrt));
        let m = &s * a.clone().try_inverse().unwrap() * &s;
        let mut v = DVector::from_element(4, 1.0);
        let mut lam = 0.0;
        for _ in 0..2000 {
            let u = &m * &v;
            lam = u.norm();
            v = u / lam;
        }
        assert_relative_eq!(weighted_opnorm_inv_fisher(&a, &w).unwrap(), lam, epsilon = 1e-8);
    }

    #[test]
    fn criterion_decomposition_and_scaling() {
        let k = normalized();
        let m = m_dagger();
        let base = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let rep = design_criterion(&k, &base, &m, 2.0).unwrap();
        assert_relative_eq!(rep.psi, rep.trace_term + 4.0 * rep.bias_term, epsilon = 1e-15);
        assert_relative_eq!(rep.expected_mse * 1e4, rep.psi, epsilon = 1e-15);
        for p in [1e5, 1e6, 1e7] {
            let r = design_criterion(&k, &base.with_precision(p).unwrap(), &m, 2.0).unwrap();
            assert_eq!(r.psi, rep.psi);
        }
    }

    #[test]
    fn gaussian_tail_examples() {
        assert_relative_eq!(gaussian_tail(1e-9, 9).unwrap(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(gaussian_tail(18f64.sqrt(), 9).unwrap(), 2.0 / std::f64::consts::E, epsilon = 1e-15);
        assert!(gaussian_tail(0.0, 9).is_err());
    }

    #[test]
    fn constant_stub_degenerates() {
        let inp = ConstantInputs {
            bounds: KernelBounds {
                c_k: 1.0,
                c_k1: 0.0,
                c_k2: 0.0,
                c_k3: 0.0,
            },
            q: vec![0.5],
            boundary_dist: vec![0.5],
            inv_fisher_wnorm: 3.0,
            n_obs: 4,
            theta: 0.5,
            beta0: 2.0,
            p: 1e4,
        };
        let c = constants_from_inputs(&inp).unwrap();
        assert_eq!(c.l_gprime, 0.0);
        assert_eq!(c.c2, 0.0);
        assert_eq!(c.c4, 0.0);
    }

    #[test]
    fn constants_on_reference_setup() {
        let k = KernelSpec::gaussian_1d(0.2);
        let s = SensorConfig::equispaced_1d(-1.0, 1.0, 9, 1e4).unwrap();
        let c = theory_constants(&k, &s, &m_dagger(), 0.5, 2.0, 1e4, &[257]).unwrap();
        assert_relative_eq!(c.big_c3, 1.8 + 18f64.sqrt() / 400.0, epsilon = 1e-14);
        assert_eq!(c.big_c4, c.big_c1.max(c.big_c2));
        let c2 = theory_constants(&k, &s, &m_dagger(), 0.5, 4.0, 1e4, &[257]).unwrap();
        assert!(c2.bad_event_bound < c.bad_event_bound);
        assert!(theory_constants(&k, &s, &m_dagger(), 1.5, 2.0, 1e4, &[17]).is_err());
    }
}
