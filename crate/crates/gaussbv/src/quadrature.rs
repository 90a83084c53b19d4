//! Gauss–Hermite and Gauss–Legendre rules via the Golub–Welsch eigenvalue
//! reduction.
//!
//! Nodes are the eigenvalues of the symmetric Jacobi matrix of the orthogonal
//! polynomial recurrence and weights are the squared first components of the
//! normalized eigenvectors times the zeroth moment. The Hermite rule is in
//! probabilists' normalization: it integrates exactly against the standard
//! normal density, Σ w_i = 1, and a degree-n rule is exact for polynomials up
//! to degree 2n−1.

use crate::error::{GaussBvError, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a 1D quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], offdiag: &[f64], moment0: f64) -> Rule {
    let n = diag.len();
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = diag[i];
        if i + 1 < n {
            j[(i, i + 1)] = offdiag[i];
            j[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], moment0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Probabilists' Gauss–Hermite rule: ∫ f dN(0,1) ≈ Σ w_i f(x_i).
pub fn gauss_hermite(order: usize) -> Result<Rule> {
    if order == 0 {
        return Err(GaussBvError::InvalidParameter {
            name: "order",
            reason: "quadrature order must be at least 1".into(),
        });
    }
    // Hermite recurrence x·He_k = He_{k+1} + k·He_{k-1}: zero diagonal,
    // off-diagonal √k.
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order).map(|k| (k as f64).sqrt()).collect();
    Ok(golub_welsch(&diag, &offdiag, 1.0))
}

/// Gauss–Legendre rule on [a, b]: ∫_a^b f dx ≈ Σ w_i f(x_i).
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Rule> {
    if order == 0 {
        return Err(GaussBvError::InvalidParameter {
            name: "order",
            reason: "quadrature order must be at least 1".into(),
        });
    }
    let diag = vec![0.0; order];
    let offdiag: Vec<f64> = (1..order)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let base = golub_welsch(&diag, &offdiag, 2.0);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok(Rule {
        nodes: base.nodes.iter().map(|x| mid + half * x).collect(),
        weights: base.weights.iter().map(|w| w * half).collect(),
    })
}

/// Tensorized Gauss–Hermite sweep over N(0, diag(variances)).
///
/// Calls `f` once per node tuple with the scaled coordinates and the product
/// weight. The caller accumulates; total work is order^d evaluations.
pub fn for_each_gaussian_node(
    rule: &Rule,
    variances: &[f64],
    mut f: impl FnMut(&[f64], f64),
) {
    let d = variances.len();
    let n = rule.nodes.len();
    let sds: Vec<f64> = variances.iter().map(|v| v.sqrt()).collect();
    let mut idx = vec![0usize; d];
    let mut coords = vec![0.0; d];
    loop {
        let mut w = 1.0;
        for k in 0..d {
            coords[k] = sds[k] * rule.nodes[idx[k]];
            w *= rule.weights[idx[k]];
        }
        f(&coords, w);
        // odometer increment
        let mut k = 0;
        loop {
            if k == d {
                return;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// ∫ f dN(0, diag(variances)) by tensorized Gauss–Hermite.
pub fn gaussian_expectation(
    order: usize,
    variances: &[f64],
    f: impl Fn(&[f64]) -> f64,
) -> Result<f64> {
    let rule = gauss_hermite(order)?;
    let mut acc = 0.0;
    for_each_gaussian_node(&rule, variances, |x, w| acc += w * f(x));
    Ok(acc)
}
