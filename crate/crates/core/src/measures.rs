//! Sparse signed measures, their parameter vectors and the weighted norms built on them.

use crate::error::{Result, SikError};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

pub const DEFAULT_MERGE_RADIUS: f64 = 1e-9;
pub const DEFAULT_Q_FLOOR: f64 = 1e-14;

/// Axis-aligned box in R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(SikError::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(SikError::InvalidInput("box requires lower < upper on every axis".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::new(vec![a], vec![b]).expect("interval requires a < b")
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.lower.clone(), self.upper.clone()).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (x, (l, u)) in p.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }

    /// Euclidean distance from an interior point to the boundary of the box.
    pub fn dist_to_boundary(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| (x - l).min(u - x))
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Equispaced points on one axis, endpoints included.
    pub fn axis_points(&self, axis: usize, count: usize) -> Vec<f64> {
        linspace(self.lower[axis], self.upper[axis], count)
    }

    /// Tensor grid with `counts[a]` points on axis `a`, last axis varying fastest.
    pub fn grid(&self, counts: &[usize]) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.axis_points(a, counts[a])).collect();
        tensor_grid(&axes)
    }
}

/// `count` equispaced points on [a, b] including both endpoints.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (a + b)],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}

pub(crate) fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// One weighted Dirac atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub position: Vec<f64>,
}

impl Atom {
    pub fn new(weight: f64, position: Vec<f64>) -> Self {
        Self { weight, position }
    }
}

/// Finite linear combination of Dirac measures on a box, kept in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMeasure {
    atoms: Vec<Atom>,
    domain: BoxDomain,
}

impl Serialize for SparseMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.atoms.serialize(s)
    }
}

impl SparseMeasure {
    pub fn empty(domain: BoxDomain) -> Self {
        Self { atoms: Vec::new(), domain }
    }

    /// Builds a measure with the default merge radius and weight floor.
    pub fn new(atoms: Vec<Atom>, domain: BoxDomain) -> Result<Self> {
        Self::with_tolerances(atoms, domain, DEFAULT_MERGE_RADIUS, DEFAULT_Q_FLOOR)
    }

    pub fn with_tolerances(atoms: Vec<Atom>, domain: BoxDomain, merge_radius: f64, q_floor: f64) -> Result<Self> {
        let d = domain.dim();
        for a in &atoms {
            if a.position.len() != d {
                return Err(SikError::Dimension(format!(
                    "atom position has dimension {}, domain has {}",
                    a.position.len(),
                    d
                )));
            }
            if !a.weight.is_finite() || a.position.iter().any(|x| !x.is_finite()) {
                return Err(SikError::InvalidInput("non-finite atom".into()));
            }
            if !domain.contains(&a.position) {
                return Err(SikError::OutsideDomain(a.position.clone()));
            }
        }
        let mut sorted = atoms;
        sorted.sort_by(|a, b| lex_cmp(&a.position, &b.position));
        let mut merged: Vec<Atom> = Vec::with_capacity(sorted.len());
        for a in sorted {
            match merged.iter_mut().find(|m| dist2(&m.position, &a.position) <= merge_radius) {
                Some(m) => m.weight += a.weight,
                None => merged.push(a),
            }
        }
        merged.retain(|a| a.weight.abs() >= q_floor);
        merged.sort_by(|a, b| lex_cmp(&a.position, &b.position));
        Ok(Self { atoms: merged, domain })
    }

    /// Convenience constructor for one-dimensional measures from (weight, position) pairs.
    pub fn from_pairs_1d(pairs: &[(f64, f64)], domain: BoxDomain) -> Result<Self> {
        Self::new(pairs.iter().map(|&(q, y)| Atom::new(q, vec![y])).collect(), domain)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Total variation norm Σ|q_n|.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.atoms.iter().map(|a| a.position.clone()).collect()
    }

    /// Minimum pairwise Euclidean separation of atoms (infinite for fewer than two atoms).
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.atoms.len() {
            for j in i + 1..self.atoms.len() {
                best = best.min(dist2(&self.atoms[i].position, &self.atoms[j].position));
            }
        }
        best
    }

    /// Sum of two measures on the same domain.
    pub fn add(&self, other: &SparseMeasure) -> Result<SparseMeasure> {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        SparseMeasure::new(atoms, self.domain.clone())
    }

    pub fn scaled(&self, c: f64) -> Result<SparseMeasure> {
        SparseMeasure::new(
            self.atoms.iter().map(|a| Atom::new(c * a.weight, a.position.clone())).collect(),
            self.domain.clone(),
        )
    }

    pub fn from_json(text: &str, domain: BoxDomain) -> Result<Self> {
        let atoms: Vec<Atom> = serde_json::from_str(text)?;
        Self::new(atoms, domain)
    }
}

/// Parameter vector m = (q; y) with positions stacked atom by atom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVec {
    pub q: Vec<f64>,
    pub y: Vec<f64>,
    pub dim: usize,
}

impl ParamVec {
    pub fn new(q: Vec<f64>, y: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || y.len() != q.len() * dim {
            return Err(SikError::Dimension(format!(
                "{} weights need {} position entries, got {}",
                q.len(),
                q.len() * dim,
                y.len()
            )));
        }
        Ok(Self { q, y, dim })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            q: vec![0.0; n],
            y: vec![0.0; n * dim],
            dim,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.q.len()
    }

    /// Total length (1 + d)·N.
    pub fn len(&self) -> usize {
        self.q.len() + self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn position(&self, n: usize) -> &[f64] {
        &self.y[n * self.dim..(n + 1) * self.dim]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.q.iter().chain(self.y.iter()).copied())
    }

    pub fn from_vector(v: &DVector<f64>, n: usize, dim: usize) -> Result<Self> {
        if v.len() != n * (1 + dim) {
            return Err(SikError::Dimension(format!(
                "vector of length {} does not fit {} atoms in dimension {}",
                v.len(),
                n,
                dim
            )));
        }
        Ok(Self {
            q: v.rows(0, n).iter().copied().collect(),
            y: v.rows(n, n * dim).iter().copied().collect(),
            dim,
        })
    }

    pub fn add_scaled(&self, dir: &ParamVec, t: f64) -> ParamVec {
        ParamVec {
            q: self.q.iter().zip(&dir.q).map(|(a, b)| a + t * b).collect(),
            y: self.y.iter().zip(&dir.y).map(|(a, b)| a + t * b).collect(),
            dim: self.dim,
        }
    }

    pub fn sub(&self, other: &ParamVec) -> ParamVec {
        self.add_scaled(other, -1.0)
    }
}

/// Parameters of a measure in canonical (lexicographic) atom order.
pub fn params_from_measure(mu: &SparseMeasure) -> ParamVec {
    let dim = mu.dim();
    ParamVec {
        q: mu.atoms().iter().map(|a| a.weight).collect(),
        y: mu.atoms().iter().flat_map(|a| a.position.iter().copied()).collect(),
        dim,
    }
}

pub fn measure_from_params(m: &ParamVec, domain: &BoxDomain) -> Result<SparseMeasure> {
    if m.dim != domain.dim() {
        return Err(SikError::Dimension("parameter and domain dimensions differ".into()));
    }
    let atoms = (0..m.n_atoms()).map(|n| Atom::new(m.q[n], m.position(n).to_vec())).collect();
    SparseMeasure::new(atoms, domain.clone())
}

/// Splits μ into (μ⁺, μ⁻) with μ = μ⁺ − μ⁻ and both parts positive.
pub fn jordan_split(mu: &SparseMeasure) -> (SparseMeasure, SparseMeasure) {
    let pos = mu.atoms().iter().filter(|a| a.weight > 0.0).cloned().collect();
    let neg = mu
        .atoms()
        .iter()
        .filter(|a| a.weight < 0.0)
        .map(|a| Atom::new(-a.weight, a.position.clone()))
        .collect();
    (
        SparseMeasure {
            atoms: pos,
            domain: mu.domain.clone(),
        },
        SparseMeasure {
            atoms: neg,
            domain: mu.domain.clone(),
        },
    )
}

/// Atom weights w_n = √|q_n| and the diagonal W = diag(1/(4w²); w²⊗1_d).
#[derive(Debug, Clone, PartialEq)]
pub struct Weighting {
    pub w: Vec<f64>,
    pub dim: usize,
}

impl Weighting {
    pub fn from_q(q: &[f64], dim: usize) -> Result<Self> {
        if q.iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(SikError::ZeroWeight);
        }
        Ok(Self {
            w: q.iter().map(|v| v.abs().sqrt()).collect(),
            dim,
        })
    }

    pub fn from_params(m: &ParamVec) -> Result<Self> {
        Self::from_q(&m.q, m.dim)
    }

    pub fn n_atoms(&self) -> usize {
        self.w.len()
    }

    /// Diagonal entries of W in (q; y) layout.
    pub fn diag(&self) -> DVector<f64> {
        let n = self.w.len();
        let mut d = DVector::zeros(n * (1 + self.dim));
        for (i, w) in self.w.iter().enumerate() {
            d[i] = 1.0 / (4.0 * w * w);
            for a in 0..self.dim {
                d[n + i * self.dim + a] = w * w;
            }
        }
        d
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.w.len() * (1 + self.dim) {
            return Err(SikError::Dimension(format!(
                "perturbation of length {} against weighting for {} atoms",
                len,
                self.w.len()
            )));
        }
        Ok(())
    }

    /// ‖v‖²_W for a stacked vector.
    pub fn norm_sq_vec(&self, v: &DVector<f64>) -> Result<f64> {
        self.check(v.len())?;
        Ok(self.diag().iter().zip(v.iter()).map(|(d, x)| d * x * x).sum())
    }

    /// ‖v‖²_{W⁻¹} for a stacked (dual) vector.
    pub fn dual_norm_sq_vec(&self, v: &DVector<f64>) -> Result<f64> {
        self.check(v.len())?;
        Ok(self.diag().iter().zip(v.iter()).map(|(d, x)| x * x / d).sum())
    }
}

/// ‖δm‖_W = (Σ_n |δq_n|²/(4|q_n|) + |q_n|‖δy_n‖²)^{1/2}.
pub fn weighted_norm(dm: &ParamVec, w: &Weighting) -> Result<f64> {
    if dm.dim != w.dim {
        return Err(SikError::Dimension("perturbation and weighting dimensions differ".into()));
    }
    Ok(w.norm_sq_vec(&dm.to_vector())?.sqrt())
}

/// Largest ratio max_n max{√(|q_n|/|r_n|), √(|r_n|/|q_n|)}.
pub fn ratio_r(q: &[f64], q_ref: &[f64]) -> Result<f64> {
    if q.len() != q_ref.len() {
        return Err(SikError::Dimension("weight vectors differ in length".into()));
    }
    let mut r = 1.0_f64;
    for (a, b) in q.iter().zip(q_ref) {
        if *a == 0.0 || *b == 0.0 {
            return Err(SikError::ZeroWeight);
        }
        let s = (a.abs() / b.abs()).sqrt();
        r = r.max(s).max(1.0 / s);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dom() -> BoxDomain {
        BoxDomain::interval(-1.0, 1.0)
    }

    #[test]
    fn reference_measure_params() {
        let mu = SparseMeasure::from_pairs_1d(&[(0.3, -0.3), (-0.2, 0.3), (0.4, -0.7)], dom()).unwrap();
        let m = params_from_measure(&mu);
        assert_eq!(m.q, vec![0.4, 0.3, -0.2]);
        assert_eq!(m.y, vec![-0.7, -0.3, 0.3]);
    }

    #[test]
    fn empty_and_single() {
        let m = params_from_measure(&SparseMeasure::empty(dom()));
        assert!(m.q.is_empty() && m.y.is_empty());
        let mu = SparseMeasure::from_pairs_1d(&[(2.0, 0.5)], dom()).unwrap();
        let m = params_from_measure(&mu);
        assert_eq!((m.q, m.y), (vec![2.0], vec![0.5]));
    }

    #[test]
    fn construction_merges_and_floors() {
        let mu = SparseMeasure::from_pairs_1d(&[(0.5, 0.1), (0.25, 0.1 + 1e-12), (1e-16, -0.5)], dom()).unwrap();
        assert_eq!(mu.len(), 1);
        assert_relative_eq!(mu.atoms()[0].weight, 0.75);
        let cancel = SparseMeasure::from_pairs_1d(&[(0.5, 0.1), (-0.5, 0.1)], dom()).unwrap();
        assert!(cancel.is_empty());
    }

    #[test]
    fn rejects_outside_domain() {
        assert!(matches!(
            SparseMeasure::from_pairs_1d(&[(1.0, 1.5)], dom()),
            Err(SikError::OutsideDomain(_))
        ));
    }

    #[test]
    fn jordan_examples() {
        let mu = SparseMeasure::from_pairs_1d(&[(0.4, -0.7), (-0.2, 0.3)], dom()).unwrap();
        let (p, n) = jordan_split(&mu);
        assert_eq!(p.atoms(), &[Atom::new(0.4, vec![-0.7])]);
        assert_eq!(n.atoms(), &[Atom::new(0.2, vec![0.3])]);
        let pos = SparseMeasure::from_pairs_1d(&[(1.0, 0.0)], dom()).unwrap();
        let (p, n) = jordan_split(&pos);
        assert_eq!(p, pos);
        assert!(n.is_empty());
        let neg = pos.scaled(-1.0).unwrap();
        let (p, n) = jordan_split(&neg);
        assert!(p.is_empty());
        assert_eq!(n, pos);
    }

    #[test]
    fn weighted_norm_examples() {
        let w1 = Weighting::from_q(&[1.0], 1).unwrap();
        let zero = ParamVec::new(vec![0.0], vec![0.0], 1).unwrap();
        assert_eq!(weighted_norm(&zero, &w1).unwrap(), 0.0);
        let dq = ParamVec::new(vec![2.0], vec![0.0], 1).unwrap();
        assert_relative_eq!(weighted_norm(&dq, &w1).unwrap(), 1.0, epsilon = 1e-15);
        let w4 = Weighting::from_q(&[4.0], 1).unwrap();
        let dy = ParamVec::new(vec![0.0], vec![3.0], 1).unwrap();
        assert_relative_eq!(weighted_norm(&dy, &w4).unwrap(), 6.0, epsilon = 1e-15);
        let bad = ParamVec::new(vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        assert!(weighted_norm(&bad, &w4).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ratio_r(&[0.4, -0.2], &[0.4, -0.2]).unwrap(), 1.0);
        assert_relative_eq!(ratio_r(&[4.0], &[1.0]).unwrap(), 2.0);
        assert_relative_eq!(ratio_r(&[1.0, 9.0], &[4.0, 1.0]).unwrap(), 3.0);
        assert!(ratio_r(&[0.0], &[1.0]).is_err());
    }

    #[test]
    fn equivalence_needs_squared_ratio() {
        // Weights scaled by 4 give R = 2 while the squared norms differ by 4 = R².
        let r = ratio_r(&[4.0], &[1.0]).unwrap();
        let dm = ParamVec::new(vec![0.0], vec![1.0], 1).unwrap();
        let a = weighted_norm(&dm, &Weighting::from_q(&[4.0], 1).unwrap()).unwrap().powi(2);
        let b = weighted_norm(&dm, &Weighting::from_q(&[1.0], 1).unwrap()).unwrap().powi(2);
        assert!(a > r * b);
        assert_relative_eq!(a, r * r * b);
    }

    #[test]
    fn json_shape() {
        let mu = SparseMeasure::from_pairs_1d(&[(0.4, -0.7)], dom()).unwrap();
        let s = serde_json::to_string(&mu).unwrap();
        assert_eq!(s, r#"[{"weight":0.4,"position":[-0.7]}]"#);
        assert_eq!(SparseMeasure::from_json(&s, dom()).unwrap(), mu);
    }

    proptest! {
        #[test]
        fn round_trip(pairs in prop::collection::vec((0.01f64..2.0, any::<bool>(), -1.0f64..1.0), 0..6)) {
            let atoms: Vec<(f64, f64)> = pairs.iter().map(|(q, s, y)| (if *s { *q } else { -*q }, *y)).collect();
            let mu = SparseMeasure::from_pairs_1d(&atoms, dom()).unwrap();
            let back = measure_from_params(&params_from_measure(&mu), &dom()).unwrap();
            prop_assert_eq!(back, mu);
        }

        #[test]
        fn norm_equivalence(
            q in prop::collection::vec(0.05f64..3.0, 1..5),
            scale in prop::collection::vec(0.2f64..5.0, 5),
            dv in prop::collection::vec(-1.0f64..1.0, 10),
        ) {
            let n = q.len();
            let q2: Vec<f64> = q.iter().zip(&scale).map(|(a, s)| a * s).collect();
            let r = ratio_r(&q2, &q).unwrap();
            let dm = ParamVec::new(dv[..n].to_vec(), dv[5..5 + n].to_vec(), 1).unwrap();
            let a = weighted_norm(&dm, &Weighting::from_q(&q2, 1).unwrap()).unwrap().powi(2);
            let b = weighted_norm(&dm, &Weighting::from_q(&q, 1).unwrap()).unwrap().powi(2);
            let r2 = r * r;
            prop_assert!(a <= r2 * b * (1.0 + 1e-12) + 1e-15);
            prop_assert!(b <= r2 * a * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn jordan_recombines(pairs in prop::collection::vec((-2.0f64..2.0, -1.0f64..1.0), 0..6)) {
            let mu = SparseMeasure::from_pairs_1d(&pairs, dom()).unwrap();
            let (p, n) = jordan_split(&mu);
            for a in p.atoms() {
                prop_assert!(a.weight > 0.0);
                prop_assert!(n.atoms().iter().all(|b| b.position != a.position));
            }
            prop_assert!(n.atoms().iter().all(|a| a.weight > 0.0));
            prop_assert_eq!(p.add(&n.scaled(-1.0).unwrap()).unwrap(), mu);
        }
    }
}
