//! Sensors, the source-to-measurement operator K, the parameter-to-observation map G and noise.

use crate::error::{Result, SikError};
use crate::kernels::KernelSpec;
use crate::measures::{linspace, ParamVec, SparseMeasure};
use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Sensor locations, normalized variances σ²_{0,j} (Σ_j σ⁻²_{0,j} = 1) and total precision p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub x: Vec<Vec<f64>>,
    pub sigma0_sq: Vec<f64>,
    pub p: f64,
}

impl SensorConfig {
    pub fn new(x: Vec<Vec<f64>>, sigma0_sq: Vec<f64>, p: f64) -> Result<Self> {
        let s = Self { x, sigma0_sq, p };
        s.validate()?;
        Ok(s)
    }

    /// Identical sensors: σ²_{0,j} = N_o so that Σ0⁻¹ = Id/N_o.
    pub fn uniform_weights(x: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        let n = x.len() as f64;
        let s = vec![n; x.len()];
        Self::new(x, s, p)
    }

    /// `n` equispaced sensors on [a, b] including both endpoints, with uniform weights.
    pub fn equispaced_1d(a: f64, b: f64, n: usize, p: f64) -> Result<Self> {
        Self::uniform_weights(linspace(a, b, n).into_iter().map(|v| vec![v]).collect(), p)
    }

    pub fn from_points_1d(points: &[f64], p: f64) -> Result<Self> {
        Self::uniform_weights(points.iter().map(|v| vec![*v]).collect(), p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.is_empty() {
            return Err(SikError::Config("at least one sensor is required".into()));
        }
        if self.x.len() != self.sigma0_sq.len() {
            return Err(SikError::Dimension("sensor count and variance count differ".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(SikError::Config("total precision p must be positive".into()));
        }
        if self.sigma0_sq.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(SikError::Config("normalized variances must be positive".into()));
        }
        let tr: f64 = self.sigma0_sq.iter().map(|s| 1.0 / s).sum();
        if (tr - 1.0).abs() > 1e-12 {
            return Err(SikError::Config(format!("normalized precisions sum to {tr}, expected 1")));
        }
        Ok(())
    }

    /// Checks every sensor against the kernel's observation domain.
    pub fn check_against(&self, spec: &KernelSpec) -> Result<()> {
        for x in &self.x {
            if !spec.obs_domain.contains(x) {
                return Err(SikError::Config(format!("sensor {x:?} lies outside the observation domain")));
            }
        }
        Ok(())
    }

    pub fn n_obs(&self) -> usize {
        self.x.len()
    }

    /// Diagonal of Σ0⁻¹.
    pub fn precision_weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.x.len(), self.sigma0_sq.iter().map(|s| 1.0 / s))
    }

    /// ‖v‖²_{Σ0⁻¹} = Σ_j v_j²/σ²_{0,j}.
    pub fn weighted_norm_sq(&self, v: &DVector<f64>) -> f64 {
        v.iter().zip(&self.sigma0_sq).map(|(a, s)| a * a / s).sum()
    }

    pub fn with_precision(&self, p: f64) -> Result<Self> {
        Self::new(self.x.clone(), self.sigma0_sq.clone(), p)
    }
}

/// Measured data z, with the noise realization and seed when synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub z: Vec<f64>,
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Observation {
    pub fn exact(z: Vec<f64>) -> Self {
        Self {
            z,
            epsilon: None,
            seed: None,
        }
    }

    pub fn z_vector(&self) -> DVector<f64> {
        DVector::from_vec(self.z.clone())
    }

    /// z = Kμ + ε with ε drawn from the sensor noise model under `seed`.
    pub fn synthesize(spec: &KernelSpec, sensors: &SensorConfig, mu: &SparseMeasure, seed: u64) -> Self {
        let clean = apply_k(spec, sensors, mu);
        let eps = sample_noise(sensors, seed);
        Self {
            z: (clean + &eps).iter().copied().collect(),
            epsilon: Some(eps.iter().copied().collect()),
            seed: Some(seed),
        }
    }
}

/// (Kμ)_j = Σ_n q_n k(x_j, y_n).
pub fn apply_k(spec: &KernelSpec, sensors: &SensorConfig, mu: &SparseMeasure) -> DVector<f64> {
    let mut out = DVector::zeros(sensors.n_obs());
    for a in mu.atoms() {
        for (j, x) in sensors.x.iter().enumerate() {
            out[j] += a.weight * spec.value(x, &a.position);
        }
    }
    out
}

/// (K*c)(y) = Σ_j c_j k(x_j, y).
pub fn apply_adjoint(spec: &KernelSpec, sensors: &SensorConfig, c: &DVector<f64>, y: &[f64]) -> f64 {
    sensors.x.iter().zip(c.iter()).map(|(x, cj)| cj * spec.value(x, y)).sum()
}

/// Kernel matrix k[x, y] with entries k(x_i, y_n).
pub fn kernel_matrix(spec: &KernelSpec, sensors: &SensorConfig, positions: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(sensors.n_obs(), positions.len(), |i, n| spec.value(&sensors.x[i], &positions[n]))
}

/// G(m) = k[x, y]q.
pub fn g_map(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec) -> DVector<f64> {
    let mut out = DVector::zeros(sensors.n_obs());
    for n in 0..m.n_atoms() {
        for (j, x) in sensors.x.iter().enumerate() {
            out[j] += m.q[n] * spec.value(x, m.position(n));
        }
    }
    out
}

/// G(m) and the Jacobian G'(m) = (k[x, y], ∇_y k[x, y] ∘ q) of shape N_o × (1 + d)N.
pub fn g_and_jacobian(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec) -> (DVector<f64>, DMatrix<f64>) {
    let (n_o, n, d) = (sensors.n_obs(), m.n_atoms(), m.dim);
    let mut g = DVector::zeros(n_o);
    let mut jac = DMatrix::zeros(n_o, n * (1 + d));
    for k in 0..n {
        for (i, x) in sensors.x.iter().enumerate() {
            let jet = spec.jet(x, m.position(k), 1);
            g[i] += m.q[k] * jet.value;
            jac[(i, k)] = jet.value;
            for a in 0..d {
                jac[(i, n + k * d + a)] = m.q[k] * jet.grad[a];
            }
        }
    }
    (g, jac)
}

/// Second directional derivative G''(m)(δm, τm).
pub fn g_second_apply(spec: &KernelSpec, sensors: &SensorConfig, m: &ParamVec, dm: &ParamVec, tm: &ParamVec) -> Result<DVector<f64>> {
    let (n, d) = (m.n_atoms(), m.dim);
    for v in [dm, tm] {
        if v.n_atoms() != n || v.dim != d {
            return Err(SikError::Dimension("directions must match the parameter layout".into()));
        }
    }
    let mut out = DVector::zeros(sensors.n_obs());
    for k in 0..n {
        let (dy, ty) = (dm.position(k), tm.position(k));
        for (i, x) in sensors.x.iter().enumerate() {
            let jet = spec.jet(x, m.position(k), 2);
            let mut s = 0.0;
            for a in 0..d {
                s += jet.grad[a] * (dy[a] * tm.q[k] + ty[a] * dm.q[k]);
                for b in 0..d {
                    s += m.q[k] * dy[a] * jet.hess[a * d + b] * ty[b];
                }
            }
            out[i] += s;
        }
    }
    Ok(out)
}

/// Per-sample seed derived from a master seed and a sample index (SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ε_j ~ N(0, σ²_{0,j}/p): a ChaCha8 stream seeded with `seed` yields standard normals in
/// component order, each scaled by √(σ²_{0,j}/p).
pub fn sample_noise(sensors: &SensorConfig, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_iterator(
        sensors.n_obs(),
        sensors.sigma0_sq.iter().map(|s| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * (s / sensors.p).sqrt()
        }),
    )
}
