//! Small dense helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::INFINITY)
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

/// Spectral condition number λmax/λmin of a symmetric PSD matrix; infinite when λmin ≤ 0.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => {
            if lo <= 0.0 || !lo.is_finite() {
                f64::INFINITY
            } else {
                hi / lo
            }
        }
        _ => 1.0,
    }
}

/// Spectral norm of a symmetric matrix.
pub fn sym_spectral_norm(m: &DMatrix<f64>) -> f64 {
    let ev = sym_eigenvalues(m);
    ev.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Operator norm sup_{‖a‖=‖b‖=1} ‖T(a,b)‖ of a symmetric third-order tensor stored as
/// `t[(i*d + j)*d + k]`, estimated by higher-order power iteration from several starts.
pub fn sym_tensor3_norm(t: &[f64], d: usize, iters: usize, tol: f64) -> f64 {
    if d == 0 {
        return 0.0;
    }
    if d == 1 {
        return t[0].abs();
    }
    let contract = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for j in 0..d {
                for k in 0..d {
                    s += t[(i * d + j) * d + k] * v[j] * v[k];
                }
            }
            *o = s;
        }
        out
    };
    let mut best = 0.0_f64;
    let mut starts: Vec<Vec<f64>> = (0..d)
        .map(|a| {
            let mut e = vec![0.0; d];
            e[a] = 1.0;
            e
        })
        .collect();
    starts.push(vec![1.0 / (d as f64).sqrt(); d]);
    for start in starts {
        let mut v = start;
        let mut lam = 0.0_f64;
        for _ in 0..iters {
            let w = contract(&v);
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nw == 0.0 {
                break;
            }
            let new_lam = nw;
            v = w.iter().map(|x| x / nw).collect();
            let done = (new_lam - lam).abs() <= tol * new_lam.max(1.0);
            lam = new_lam;
            if done {
                break;
            }
        }
        let w = contract(&v);
        let val = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.max(val).max(lam);
    }
    best
}

/// Solve `a x = b` for symmetric positive definite `a`, falling back to LU.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

/// Inverse of a symmetric positive definite matrix, symmetrized.
pub fn inverse_spd(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = match a.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => a.clone().try_inverse()?,
    };
    Some((&inv + inv.transpose()) * 0.5)
}
