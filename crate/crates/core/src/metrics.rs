//! Distances between discrete signed measures: Hellinger-Kantorovich via logarithmic
//! entropy-transport, its weighted-ℓ² upper bound, Kantorovich-Rubinstein via LP, and TV.

use crate::error::{Result, SikError};
use crate::measures::{dist2, jordan_split, ratio_r, weighted_norm, Atom, ParamVec, SparseMeasure, Weighting};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// sin(min{z, π/2}) for z ≥ 0.
pub fn sin_plus(z: f64) -> f64 {
    z.min(FRAC_PI_2).sin()
}

/// Cone distance between two same-sign Diracs:
/// d² = (√|q1| − √|q2|)² + 4√(|q1||q2|)·sin₊²(‖y1 − y2‖/2).
pub fn cone_dirac_hk(q1: f64, y1: &[f64], q2: f64, y2: &[f64]) -> Result<f64> {
    if !(q1 * q2 > 0.0) {
        return Err(SikError::SignMismatch("cone formula needs two weights of equal sign".into()));
    }
    let (a, b) = (q1.abs(), q2.abs());
    let s = sin_plus(dist2(y1, y2) / 2.0);
    Ok(((a.sqrt() - b.sqrt()).powi(2) + 4.0 * (a * b).sqrt() * s * s).sqrt())
}

/// Settings of the entropy-transport solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HkSolveConfig {
    pub eps_schedule: Vec<f64>,
    pub max_iters_per_level: usize,
    pub level_tol: f64,
    pub max_polish_sweeps: usize,
    pub gap_tol: f64,
}

impl Default for HkSolveConfig {
    fn default() -> Self {
        let mut eps_schedule = Vec::new();
        let mut e = 1.0;
        while e > 1e-6 {
            eps_schedule.push(e);
            e *= 0.5;
        }
        eps_schedule.push(1e-6);
        Self {
            eps_schedule,
            max_iters_per_level: 200,
            level_tol: 1e-10,
            max_polish_sweeps: 2_000,
            gap_tol: 1e-12,
        }
    }
}

impl HkSolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_schedule.is_empty() || self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(SikError::InvalidInput("eps schedule must be strictly decreasing".into()));
        }
        if self.eps_schedule.iter().any(|e| !(*e > 0.0)) || *self.eps_schedule.last().unwrap() > 1e-5 {
            return Err(SikError::InvalidInput(
                "eps schedule must be positive and end at or below 1e-5".into(),
            ));
        }
        if !(self.gap_tol > 0.0 && self.level_tol > 0.0) {
            return Err(SikError::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// Transport cost −log cos²(min{d, π/2}); infinite at and beyond π/2.
pub fn let_cost(d: f64) -> f64 {
    if d >= FRAC_PI_2 {
        f64::INFINITY
    } else {
        -2.0 * d.cos().ln()
    }
}

fn kl_term(s: f64, a: f64) -> f64 {
    if s <= 0.0 {
        a
    } else {
        s * (s / a).ln() - s + a
    }
}

/// Discrete entropy-transport problem between two positive atom lists.
pub(crate) struct EtProblem {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub cost: Vec<Vec<f64>>,
}

impl EtProblem {
    pub fn new(a: &[Atom], b: &[Atom]) -> Self {
        Self {
            a: a.iter().map(|x| x.weight).collect(),
            b: b.iter().map(|x| x.weight).collect(),
            cost: a
                .iter()
                .map(|x| b.iter().map(|y| let_cost(dist2(&x.position, &y.position))).collect())
                .collect(),
        }
    }

    pub fn marginals(&self, g: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let r = g.iter().map(|row| row.iter().sum()).collect();
        let c = (0..self.b.len()).map(|j| g.iter().map(|row| row[j]).sum()).collect();
        (r, c)
    }

    /// KL(γ1|a) + KL(γ2|b) + Σγℓ.
    pub fn primal(&self, g: &[Vec<f64>]) -> f64 {
        let (r, c) = self.marginals(g);
        let mut f: f64 = r.iter().zip(&self.a).map(|(s, a)| kl_term(*s, *a)).sum::<f64>()
            + c.iter().zip(&self.b).map(|(s, b)| kl_term(*s, *b)).sum::<f64>();
        for (i, row) in g.iter().enumerate() {
            for (j, t) in row.iter().enumerate() {
                if *t > 0.0 {
                    f += t * self.cost[i][j];
                }
            }
        }
        f
    }

    /// Dual value of the feasible potentials induced by the plan.
    pub fn dual(&self, g: &[Vec<f64>]) -> f64 {
        let (r, c) = self.marginals(g);
        let phi: Vec<f64> = r
            .iter()
            .zip(&self.a)
            .enumerate()
            .map(|(i, (s, a))| {
                if *s > 0.0 {
                    -(s / a).ln()
                } else if self.cost[i].iter().all(|v| v.is_infinite()) {
                    f64::INFINITY
                } else {
                    -(f64::MIN_POSITIVE / a).ln()
                }
            })
            .collect();
        let mut d: f64 = phi.iter().zip(&self.a).map(|(p, a)| a * (1.0 - (-p).exp())).sum();
        for (j, b) in self.b.iter().enumerate() {
            let mut psi = if c[j] > 0.0 { -(c[j] / b).ln() } else { f64::INFINITY };
            for i in 0..self.a.len() {
                if self.cost[i][j].is_finite() {
                    psi = psi.min(self.cost[i][j] - phi[i]);
                }
            }
            d += b * (1.0 - (-psi).exp());
        }
        d
    }

    fn sinkhorn(&self, cfg: &HkSolveConfig) -> Vec<Vec<f64>> {
        let (n1, n2) = (self.a.len(), self.b.len());
        let mut f = vec![0.0; n1];
        let mut g = vec![0.0; n2];
        let lse = |terms: &mut dyn Iterator<Item = f64>| -> f64 {
            let v: Vec<f64> = terms.collect();
            let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
        };
        let mut eps = cfg.eps_schedule[0];
        for &e in &cfg.eps_schedule {
            eps = e;
            let scale = eps / (1.0 + eps);
            for _ in 0..cfg.max_iters_per_level {
                let mut change = 0.0_f64;
                for i in 0..n1 {
                    let l = lse(&mut (0..n2)
                        .filter(|j| self.cost[i][*j].is_finite())
                        .map(|j| self.b[j].ln() + (g[j] - self.cost[i][j]) / eps));
                    let nf = if l.is_finite() { -scale * l } else { 0.0 };
                    change = change.max((nf - f[i]).abs());
                    f[i] = nf;
                }
                for j in 0..n2 {
                    let l = lse(&mut (0..n1)
                        .filter(|i| self.cost[*i][j].is_finite())
                        .map(|i| self.a[i].ln() + (f[i] - self.cost[i][j]) / eps));
                    let ng = if l.is_finite() { -scale * l } else { 0.0 };
                    change = change.max((ng - g[j]).abs());
                    g[j] = ng;
                }
                if change <= cfg.level_tol {
                    break;
                }
            }
        }
        (0..n1)
            .map(|i| {
                (0..n2)
                    .map(|j| {
                        if self.cost[i][j].is_finite() {
                            self.a[i] * self.b[j] * ((f[i] + g[j] - self.cost[i][j]) / eps).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Exact minimization over each plan entry in turn, stopped on the duality gap.
    fn polish(&self, plan: &mut [Vec<f64>], cfg: &HkSolveConfig) -> f64 {
        let (n1, n2) = (self.a.len(), self.b.len());
        let (mut r, mut c) = self.marginals(plan);
        let mut gap = f64::INFINITY;
        for sweep in 0..cfg.max_polish_sweeps {
            for i in 0..n1 {
                for j in 0..n2 {
                    if !self.cost[i][j].is_finite() {
                        continue;
                    }
                    let t0 = plan[i][j];
                    let (ri, cj) = ((r[i] - t0).max(0.0), (c[j] - t0).max(0.0));
                    let k = self.a[i] * self.b[j] * (-self.cost[i][j]).exp();
                    let disc = ((ri - cj) * (ri - cj) + 4.0 * k).sqrt();
                    let s = ri + cj;
                    // Root of (ri + t)(cj + t) = k, written to avoid cancellation.
                    let t = if s > 0.0 {
                        (2.0 * (k - ri * cj) / (s + disc)).max(0.0)
                    } else {
                        (0.5 * disc).max(0.0)
                    };
                    plan[i][j] = t;
                    r[i] = ri + t;
                    c[j] = cj + t;
                }
            }
            if sweep % 8 == 7 || sweep + 1 == cfg.max_polish_sweeps {
                let (rr, cc) = self.marginals(plan);
                r = rr;
                c = cc;
                gap = self.primal(plan) - self.dual(plan);
                if gap <= cfg.gap_tol {
                    break;
                }
            }
        }
        gap
    }
}

impl EtProblem {
    /// Log-barrier Newton method on the concave dual
    /// max Σa(1 − e^{−φ}) + Σb(1 − e^{−ψ}) s.t. φ_i + ψ_j ≤ ℓ_ij,
    /// followed by an exact solve on the support of the central-path plan γ_ij = 1/(t·s_ij).
    fn barrier(&self, gap_tol: f64) -> Result<(Vec<Vec<f64>>, f64)> {
        let (n1, n2) = (self.a.len(), self.b.len());
        let pairs: Vec<(usize, usize)> = (0..n1)
            .flat_map(|i| (0..n2).map(move |j| (i, j)))
            .filter(|&(i, j)| self.cost[i][j].is_finite())
            .collect();
        let mut plan = vec![vec![0.0; n2]; n1];
        if pairs.is_empty() {
            return Ok((plan, 0.0));
        }
        let nv = n1 + n2;
        let weight = |v: usize| if v < n1 { self.a[v] } else { self.b[v - n1] };
        let idx: Vec<(usize, usize, f64)> = pairs.iter().map(|&(i, j)| (i, n1 + j, self.cost[i][j])).collect();
        let active: Vec<bool> = (0..nv).map(|v| idx.iter().any(|p| p.0 == v || p.1 == v)).collect();
        let m = idx.len() as f64;
        let mass: f64 = self.a.iter().chain(&self.b).sum();
        let mut x = vec![-1.0; nv];
        let slack = |x: &[f64]| -> Vec<f64> { idx.iter().map(|(u, v, l)| l - x[*u] - x[*v]).collect() };
        let phi = |x: &[f64], t: f64| -> f64 {
            let s = slack(x);
            if s.iter().any(|v| *v <= 0.0) {
                return f64::INFINITY;
            }
            let d: f64 = (0..nv).filter(|v| active[*v]).map(|v| weight(v) * (1.0 - (-x[v]).exp())).sum();
            -t * d - s.iter().map(|v| v.ln()).sum::<f64>()
        };
        let mut t = 1.0;
        let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
        loop {
            for _ in 0..100 {
                let s = slack(&x);
                let mut g = nalgebra::DVector::zeros(nv);
                let mut h = nalgebra::DMatrix::identity(nv, nv);
                for v in (0..nv).filter(|v| active[*v]) {
                    let e = weight(v) * (-x[v]).exp();
                    g[v] = -t * e;
                    h[(v, v)] = t * e;
                }
                for ((u, v, _), sv) in idx.iter().zip(&s) {
                    g[*u] += 1.0 / sv;
                    g[*v] += 1.0 / sv;
                    let c = 1.0 / (sv * sv);
                    h[(*u, *u)] += c;
                    h[(*v, *v)] += c;
                    h[(*u, *v)] += c;
                    h[(*v, *u)] += c;
                }
                let Some(dir) = h.cholesky().map(|ch| -ch.solve(&g)) else { break };
                let dec = -g.dot(&dir);
                if dec / 2.0 <= 1e-12 {
                    break;
                }
                let f0 = phi(&x, t);
                let mut step = if dec.sqrt() > 0.5 { 1.0 / (1.0 + dec.sqrt()) } else { 1.0 };
                let mut moved = false;
                while step > 1e-12 {
                    let cand: Vec<f64> = x.iter().zip(dir.iter()).map(|(a, b)| a + step * b).collect();
                    let fc = phi(&cand, t);
                    if fc <= f0 - 0.25 * step * dec + 1e-12 * f0.abs().max(1.0) {
                        x = cand;
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            let s = slack(&x);
            let mut central = vec![vec![0.0; n2]; n1];
            for (&(i, j), sv) in pairs.iter().zip(&s) {
                central[i][j] = 1.0 / (t * sv);
            }
            if let Some((p, g)) = self.support_solve(&central) {
                if g <= gap_tol {
                    return Ok((p, g));
                }
            }
            let g = self.primal(&central) - self.dual(&central);
            if best.as_ref().is_none_or(|b| g < b.1) {
                best = Some((central, g));
            }
            if m / t <= 1e-15 * mass.max(1.0) {
                break;
            }
            t *= 8.0;
        }
        let (p, g) = best.expect("at least one barrier stage runs");
        plan = p;
        Ok((plan, g))
    }

    /// Exact optimum on a spanning forest of the plan's support: potentials satisfy
    /// φ_i + ψ_j = ℓ_ij on forest edges, each component is shifted so its marginal masses
    /// agree, and the plan follows by leaf elimination. Returns the plan and its duality gap
    /// when it is primal and dual feasible.
    fn support_solve(&self, plan: &[Vec<f64>]) -> Option<(Vec<Vec<f64>>, f64)> {
        let (n1, n2) = (self.a.len(), self.b.len());
        let nv = n1 + n2;
        let scale = plan.iter().flatten().fold(0.0_f64, |m, v| m.max(*v));
        if scale <= 0.0 {
            return None;
        }
        let mut edges: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n1 {
            for j in 0..n2 {
                if self.cost[i][j].is_finite() && plan[i][j] > 1e-7 * scale {
                    edges.push((plan[i][j], i, n1 + j));
                }
            }
        }
        edges.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut parent: Vec<usize> = (0..nv).collect();
        fn find(p: &mut [usize], mut v: usize) -> usize {
            while p[v] != v {
                p[v] = p[p[v]];
                v = p[v];
            }
            v
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for &(_, u, v) in &edges {
            let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
            if ru != rv {
                parent[ru] = rv;
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let cost = |u: usize, v: usize| if u < n1 { self.cost[u][v - n1] } else { self.cost[v][u - n1] };
        let weight = |v: usize| if v < n1 { self.a[v] } else { self.b[v - n1] };
        let mut pot = vec![f64::NAN; nv];
        let mut comp = vec![usize::MAX; nv];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for root in 0..nv {
            if comp[root] != usize::MAX || adj[root].is_empty() {
                continue;
            }
            let id = comps.len();
            let mut members = vec![root];
            comp[root] = id;
            pot[root] = 0.0;
            let mut k = 0;
            while k < members.len() {
                let u = members[k];
                for &v in &adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = id;
                        pot[v] = cost(u, v) - pot[u];
                        members.push(v);
                    }
                }
                k += 1;
            }
            // Shift φ by +δ and ψ by −δ so that Σ a e^{−φ} = Σ b e^{−ψ}.
            let ra: f64 = members.iter().filter(|v| **v < n1).map(|&v| weight(v) * (-pot[v]).exp()).sum();
            let rb: f64 = members.iter().filter(|v| **v >= n1).map(|&v| weight(v) * (-pot[v]).exp()).sum();
            let delta = 0.5 * (ra / rb).ln();
            for &v in &members {
                pot[v] += if v < n1 { delta } else { -delta };
            }
            comps.push(members);
        }
        // Leaf elimination on each tree.
        let mut need: Vec<f64> = (0..nv)
            .map(|v| if pot[v].is_nan() { 0.0 } else { weight(v) * (-pot[v]).exp() })
            .collect();
        let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
        let mut removed = vec![false; nv];
        let mut out = vec![vec![0.0; n2]; n1];
        let mut stack: Vec<usize> = (0..nv).filter(|v| deg[*v] == 1).collect();
        while let Some(u) = stack.pop() {
            if removed[u] || deg[u] != 1 {
                continue;
            }
            let v = *adj[u].iter().find(|w| !removed[**w])?;
            let t = need[u];
            if u < n1 {
                out[u][v - n1] = t;
            } else {
                out[v][u - n1] = t;
            }
            need[v] -= t;
            removed[u] = true;
            deg[v] -= 1;
            if deg[v] == 1 {
                stack.push(v);
            }
        }
        let mass: f64 = self.a.iter().chain(&self.b).sum();
        if out.iter().flatten().any(|t| *t < -1e-14 * mass) {
            return None;
        }
        for row in out.iter_mut() {
            for t in row.iter_mut() {
                *t = t.max(0.0);
            }
        }
        // Dual feasibility off the forest.
        for i in 0..n1 {
            for j in 0..n2 {
                if self.cost[i][j].is_finite() {
                    if pot[i].is_nan() || pot[n1 + j].is_nan() {
                        return None;
                    }
                    if pot[i] + pot[n1 + j] > self.cost[i][j] + 1e-12 {
                        return None;
                    }
                }
            }
        }
        let dual: f64 = (0..nv)
            .map(|v| {
                if pot[v].is_nan() {
                    weight(v)
                } else {
                    weight(v) * (1.0 - (-pot[v]).exp())
                }
            })
            .sum();
        let gap = self.primal(&out) - dual;
        Some((out, gap.abs()))
    }
}

/// d²_HK between two positive measures with a plan-level duality-gap certificate.
fn hk_sq_positive(a: &[Atom], b: &[Atom], cfg: &HkSolveConfig) -> Result<f64> {
    let sa: f64 = a.iter().map(|x| x.weight).sum();
    let sb: f64 = b.iter().map(|x| x.weight).sum();
    if a.is_empty() || b.is_empty() {
        return Ok(sa + sb);
    }
    let prob = EtProblem::new(a, b);
    let mut plan = prob.sinkhorn(cfg);
    let mut gap = prob.polish(&mut plan, cfg);
    if !(gap <= cfg.gap_tol) {
        let (p2, g2) = prob.barrier(0.1 * cfg.gap_tol)?;
        if g2 < gap {
            plan = p2;
            gap = g2;
        }
    }
    if !(gap <= cfg.gap_tol) {
        return Err(SikError::NonConvergence {
            what: "entropy-transport polish".into(),
            residual: gap,
        });
    }
    let mass: f64 = plan.iter().flatten().sum();
    // At the optimum the objective equals Σa + Σb − 2Σγ; keep the primal value otherwise.
    let f = prob.primal(&plan);
    let via_mass = sa + sb - 2.0 * mass;
    Ok(if (f - via_mass).abs() <= 1e-9 {
        via_mass.max(0.0)
    } else {
        f.max(0.0)
    })
}

/// Squared HK distance of signed measures via the Jordan recombination
/// d_HK(μ1, μ2) = d_HK(μ1⁺ + μ2⁻, μ2⁺ + μ1⁻).
pub fn hk_distance_sq(mu1: &SparseMeasure, mu2: &SparseMeasure, cfg: &HkSolveConfig) -> Result<f64> {
    cfg.validate()?;
    if mu1.dim() != mu2.dim() {
        return Err(SikError::Dimension("measures live in different dimensions".into()));
    }
    let (p1, n1) = jordan_split(mu1);
    let (p2, n2) = jordan_split(mu2);
    let left = p1.add(&n2)?;
    let right = p2.add(&n1)?;
    hk_sq_positive(left.atoms(), right.atoms(), cfg)
}

pub fn hk_distance(mu1: &SparseMeasure, mu2: &SparseMeasure, cfg: &HkSolveConfig) -> Result<f64> {
    Ok(hk_distance_sq(mu1, mu2, cfg)?.sqrt())
}

/// R(q, q†)·‖m − m†‖²_{W†}, an upper bound on d²_HK for sign-matched atoms in equal order.
pub fn hk_upper_bound(m: &ParamVec, m_ref: &ParamVec) -> Result<f64> {
    if m.n_atoms() != m_ref.n_atoms() || m.dim != m_ref.dim {
        return Err(SikError::Dimension("upper bound needs equal atom counts".into()));
    }
    if m.q.iter().zip(&m_ref.q).any(|(a, b)| !(a * b > 0.0)) {
        return Err(SikError::SignMismatch("upper bound needs matching weight signs".into()));
    }
    let r = ratio_r(&m.q, &m_ref.q)?;
    let w = Weighting::from_params(m_ref)?;
    Ok(r * weighted_norm(&m.sub(m_ref), &w)?.powi(2))
}

/// Flat (Kantorovich-Rubinstein) distance: max Σ f_i(μ1 − μ2)_i over potentials with
/// |f_i| ≤ 1 and |f_i − f_j| ≤ ‖y_i − y_j‖ on the union support.
pub fn kr_distance(mu1: &SparseMeasure, mu2: &SparseMeasure) -> Result<f64> {
    let mut support: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut push = |a: &Atom, s: f64| match support.iter_mut().find(|(p, _)| dist2(p, &a.position) <= 1e-12) {
        Some(e) => e.1 += s * a.weight,
        None => support.push((a.position.clone(), s * a.weight)),
    };
    mu1.atoms().iter().for_each(|a| push(a, 1.0));
    mu2.atoms().iter().for_each(|a| push(a, -1.0));
    if support.is_empty() {
        return Ok(0.0);
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = support.iter().map(|(_, m)| lp.add_var(*m, (-1.0, 1.0))).collect();
    for i in 0..support.len() {
        for j in 0..support.len() {
            if i != j {
                let d = dist2(&support[i].0, &support[j].0);
                if d < 2.0 {
                    lp.add_constraint([(vars[i], 1.0), (vars[j], -1.0)], ComparisonOp::Le, d);
                }
            }
        }
    }
    let sol = lp.solve().map_err(|e| SikError::Lp(e.to_string()))?;
    Ok(sol.objective().max(0.0))
}

/// ‖μ1 − μ2‖_M after merging coincident positions.
pub fn tv_distance(mu1: &SparseMeasure, mu2: &SparseMeasure) -> Result<f64> {
    Ok(mu1.add(&mu2.scaled(-1.0)?)?.total_variation())
}
