//! Smooth kernels k(x, y) with analytic y-derivatives up to order three and their sup-norm bounds.

use crate::error::{Result, SikError};
use crate::linalg::{sym_spectral_norm, sym_tensor3_norm};
use crate::measures::{tensor_grid, BoxDomain};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Kernel family with its parameters, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelFamily {
    /// k = A·exp(−‖x−y‖²/(2σ²)); A = 1, or (2πσ²)^{−d/2} when `normalized`.
    Gaussian {
        sigma: f64,
        #[serde(default)]
        normalized: bool,
    },
    /// k(x, y) = exp(−‖x−y−κT‖²_{D⁻¹}/(4T)) / (4π√(D1·D2·T)) in two dimensions.
    AdvectionDiffusion { d1: f64, d2: f64, kappa: [f64; 2], t_obs: f64 },
    /// k ≡ value; a degenerate stub with vanishing derivatives.
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// A kernel family together with its observation and source domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub obs_domain: BoxDomain,
    pub src_domain: BoxDomain,
}

/// Value and y-derivatives of k at one (x, y) pair. Tensors are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelJet {
    pub order: usize,
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
    pub third: Vec<f64>,
}

impl KernelJet {
    pub fn hess_matrix(&self, d: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(d, d, &self.hess)
    }
}

/// Rank-`order` tensor returned by [`eval_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelTensor {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<f64>),
    Cubic(Vec<f64>),
}

impl KernelSpec {
    pub fn new(family: KernelFamily, obs_domain: BoxDomain, src_domain: BoxDomain) -> Result<Self> {
        let spec = Self {
            family,
            obs_domain,
            src_domain,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian kernel of unit peak on [−1, 1] × [−1, 1].
    pub fn gaussian_1d(sigma: f64) -> Self {
        Self::new(
            KernelFamily::Gaussian { sigma, normalized: false },
            BoxDomain::interval(-1.0, 1.0),
            BoxDomain::interval(-1.0, 1.0),
        )
        .expect("sigma must be positive")
    }

    pub fn validate(&self) -> Result<()> {
        self.obs_domain.validate()?;
        self.src_domain.validate()?;
        if self.obs_domain.dim() != self.src_domain.dim() {
            return Err(SikError::Config("observation and source domains must share a dimension".into()));
        }
        match &self.family {
            KernelFamily::Gaussian { sigma, .. } => {
                if !(*sigma > 0.0 && sigma.is_finite()) {
                    return Err(SikError::Config("gaussian sigma must be positive".into()));
                }
            }
            KernelFamily::AdvectionDiffusion { d1, d2, kappa, t_obs } => {
                if !(*d1 > 0.0 && *d2 > 0.0 && *t_obs > 0.0) || kappa.iter().any(|k| !k.is_finite()) {
                    return Err(SikError::Config("advection_diffusion needs D1, D2, T_o > 0".into()));
                }
                if self.src_domain.dim() != 2 {
                    return Err(SikError::Config("advection_diffusion is two-dimensional".into()));
                }
            }
            KernelFamily::Constant { value } => {
                if !value.is_finite() {
                    return Err(SikError::Config("constant kernel value must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.src_domain.dim()
    }

    /// (amplitude, per-axis curvature s_a, shift) of the anisotropic Gaussian form
    /// k = A·exp(−½ Σ s_a (x_a − y_a − shift_a)²); `None` for the constant stub.
    fn gaussian_form(&self) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        match &self.family {
            KernelFamily::Gaussian { sigma, normalized } => {
                let amp = if *normalized {
                    (2.0 * PI * sigma * sigma).powf(-(d as f64) / 2.0)
                } else {
                    1.0
                };
                Some((amp, vec![1.0 / (sigma * sigma); d], vec![0.0; d]))
            }
            KernelFamily::AdvectionDiffusion { d1, d2, kappa, t_obs } => {
                let t = *t_obs;
                let amp = 1.0 / (4.0 * PI * (d1 * d2 * t).sqrt());
                Some((
                    amp,
                    vec![1.0 / (2.0 * t * d1), 1.0 / (2.0 * t * d2)],
                    vec![kappa[0] * t, kappa[1] * t],
                ))
            }
            KernelFamily::Constant { .. } => None,
        }
    }

    /// k(x, y) only.
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::Gaussian { sigma, normalized } => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                let amp = if *normalized {
                    (2.0 * PI * sigma * sigma).powf(-(x.len() as f64) / 2.0)
                } else {
                    1.0
                };
                amp * (-r2 / (2.0 * sigma * sigma)).exp()
            }
            KernelFamily::Constant { value } => *value,
            KernelFamily::AdvectionDiffusion { .. } => self.jet(x, y, 0).value,
        }
    }

    /// Value and derivatives in y up to `order` (clamped to 3).
    pub fn jet(&self, x: &[f64], y: &[f64], order: usize) -> KernelJet {
        let d = y.len();
        let order = order.min(3);
        let Some((amp, s, shift)) = self.gaussian_form() else {
            let value = match &self.family {
                KernelFamily::Constant { value } => *value,
                _ => unreachable!(),
            };
            return KernelJet {
                order,
                value,
                grad: if order >= 1 { vec![0.0; d] } else { Vec::new() },
                hess: if order >= 2 { vec![0.0; d * d] } else { Vec::new() },
                third: if order >= 3 { vec![0.0; d * d * d] } else { Vec::new() },
            };
        };
        let e: Vec<f64> = (0..d).map(|a| x[a] - y[a] - shift[a]).collect();
        let k = match &self.family {
            KernelFamily::Gaussian { .. } => self.value(x, y),
            _ => amp * (-0.5 * (0..d).map(|a| s[a] * e[a] * e[a]).sum::<f64>()).exp(),
        };
        let u: Vec<f64> = (0..d).map(|a| s[a] * e[a]).collect();
        let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let mut jet = KernelJet {
            order,
            value: k,
            grad: Vec::new(),
            hess: Vec::new(),
            third: Vec::new(),
        };
        if order >= 1 {
            jet.grad = u.iter().map(|ua| k * ua).collect();
        }
        if order >= 2 {
            jet.hess = vec![0.0; d * d];
            for a in 0..d {
                for b in 0..d {
                    jet.hess[a * d + b] = k * (u[a] * u[b] - delta(a, b) * s[a]);
                }
            }
        }
        if order >= 3 {
            jet.third = vec![0.0; d * d * d];
            for a in 0..d {
                for b in 0..d {
                    for c in 0..d {
                        jet.third[(a * d + b) * d + c] =
                            k * (u[a] * u[b] * u[c] - delta(a, b) * s[a] * u[c] - delta(a, c) * s[a] * u[b] - delta(b, c) * s[b] * u[a]);
                    }
                }
            }
        }
        jet
    }

    /// k(x_j, y) for every sensor x_j.
    pub fn values_at(&self, xs: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
        xs.iter().map(|x| self.value(x, y)).collect()
    }

    /// Jets of k(x_j, ·) at y for every sensor x_j.
    pub fn jets_at(&self, xs: &[Vec<f64>], y: &[f64], order: usize) -> Vec<KernelJet> {
        xs.iter().map(|x| self.jet(x, y, order)).collect()
    }
}

/// k(x, y) and its y-derivative tensors as a rank-`order` tensor.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64], order: usize) -> Result<KernelTensor> {
    if order > 3 {
        return Err(SikError::UnsupportedOrder(order));
    }
    if x.len() != spec.obs_domain.dim() || y.len() != spec.dim() {
        return Err(SikError::Dimension("point dimension does not match kernel domains".into()));
    }
    let j = spec.jet(x, y, order);
    Ok(match order {
        0 => KernelTensor::Scalar(j.value),
        1 => KernelTensor::Vector(j.grad),
        2 => KernelTensor::Matrix(j.hess),
        _ => KernelTensor::Cubic(j.third),
    })
}

/// Sup norms C_k, C_k', C_k'', C_k''' of the kernel and its y-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub c_k: f64,
    pub c_k1: f64,
    pub c_k2: f64,
    pub c_k3: f64,
}

impl KernelBounds {
    fn max(self, o: KernelBounds) -> KernelBounds {
        KernelBounds {
            c_k: self.c_k.max(o.c_k),
            c_k1: self.c_k1.max(o.c_k1),
            c_k2: self.c_k2.max(o.c_k2),
            c_k3: self.c_k3.max(o.c_k3),
        }
    }
}

/// Maxima of the derivative norms over a tensor grid on Ω_o × Ω_s. `resolution` gives the
/// per-axis counts (observation axes first, then source axes) or a single count for all axes.
pub fn kernel_bounds(spec: &KernelSpec, resolution: &[usize]) -> Result<KernelBounds> {
    let (d_o, d) = (spec.obs_domain.dim(), spec.dim());
    let counts: Vec<usize> = match resolution.len() {
        1 => vec![resolution[0]; d_o + d],
        n if n == d_o + d => resolution.to_vec(),
        n => {
            return Err(SikError::Dimension(format!(
                "grid resolution has {} axes, expected 1 or {}",
                n,
                d_o + d
            )))
        }
    };
    if counts.iter().any(|c| *c < 2) {
        return Err(SikError::InvalidInput("grid resolution must be at least 2 per axis".into()));
    }
    let xs = spec.obs_domain.grid(&counts[..d_o]);
    let ys = spec.src_domain.grid(&counts[d_o..]);
    let zero = KernelBounds {
        c_k: 0.0,
        c_k1: 0.0,
        c_k2: 0.0,
        c_k3: 0.0,
    };
    let b = xs
        .par_iter()
        .map(|x| {
            let mut acc = zero;
            for y in &ys {
                let j = spec.jet(x, y, 3);
                let g = j.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = if d == 1 {
                    j.hess[0].abs()
                } else {
                    sym_spectral_norm(&j.hess_matrix(d))
                };
                let t = sym_tensor3_norm(&j.third, d, 50, 1e-10);
                acc = acc.max(KernelBounds {
                    c_k: j.value.abs(),
                    c_k1: g,
                    c_k2: h,
                    c_k3: t,
                });
            }
            acc
        })
        .reduce(|| zero, KernelBounds::max);
    Ok(b)
}

/// Grid of `count` equispaced points per axis on a box.
pub fn uniform_grid(domain: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..domain.dim()).map(|a| domain.axis_points(a, count)).collect();
    tensor_grid(&axes)
}
