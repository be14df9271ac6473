//! SVD-based pseudoinverse and numerical rank with a relative singular value cutoff.

use nalgebra::DMatrix;

/// Singular values at or below `DEFAULT_RANK_TOL * sigma_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

fn cutoff(sigma: &[f64], tol: f64) -> f64 {
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    tol * sigma_max
}

/// Largest singular value, 0 for an empty matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// Moore-Penrose pseudoinverse. A zero (or empty) `p x q` matrix maps to a zero `q x p` matrix.
pub fn pseudoinverse(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    pseudoinverse_with_cutoff(m, Cutoff::Relative(tol))
}

/// How small singular values are discarded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cutoff {
    /// Discard `sigma <= tol * sigma_max` of the matrix itself.
    Relative(f64),
    /// Discard `sigma <= value`.
    Absolute(f64),
}

pub fn pseudoinverse_with_cutoff(m: &DMatrix<f64>, cutoff_rule: Cutoff) -> DMatrix<f64> {
    let (p, q) = m.shape();
    if m.is_empty() {
        return DMatrix::zeros(q, p);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let threshold = match cutoff_rule {
        Cutoff::Relative(tol) => cutoff(&sigma, tol),
        Cutoff::Absolute(value) => value,
    };

    let mut out = DMatrix::zeros(q, p);
    for (k, &s) in sigma.iter().enumerate() {
        if s <= threshold || s == 0.0 {
            continue;
        }
        // out += v_k * u_k^T / s
        let v_k = v_t.row(k).transpose();
        let u_k = u.column(k);
        out.ger(1.0 / s, &v_k, &u_k, 1.0);
    }
    out
}

pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    numerical_rank_with_cutoff(m, Cutoff::Relative(tol))
}

pub fn numerical_rank_with_cutoff(m: &DMatrix<f64>, cutoff_rule: Cutoff) -> usize {
    let sigma = singular_values(m);
    let threshold = match cutoff_rule {
        Cutoff::Relative(tol) => cutoff(&sigma, tol),
        Cutoff::Absolute(value) => value,
    };
    sigma.iter().filter(|&&s| s > threshold && s > 0.0).count()
}
