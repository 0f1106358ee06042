//! Minimum-norm least squares, ridge, and symmetric eigenvalue helpers.

use faer::linalg::solvers::Solve;
use faer::{Col, ColRef, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// More columns than rows (`k > m`); full row rank implies interpolation.
    Overparameterized,
    /// At most as many columns as rows (`k ≤ m`).
    Underparameterized,
}

impl Regime {
    pub fn of(rows: usize, cols: usize) -> Self {
        if cols > rows {
            Regime::Overparameterized
        } else {
            Regime::Underparameterized
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LsqSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub effective_rank: usize,
    pub regime: Regime,
}

/// Default relative singular-value cutoff for an `m × k` system.
pub fn default_rtol(m: usize, k: usize) -> f64 {
    1e-12 * m.max(k) as f64
}

/// `A⁺ y` via a thin SVD; singular values below `rtol · σ_max` are dropped.
///
/// `rtol = None` uses [`default_rtol`]. The SVD costs `O(k m² + m³)` when
/// `k > m`, the same order as a Gram-dual solve.
pub fn min_norm_lsq(a: MatRef<'_, f64>, y: &[f64], rtol: Option<f64>) -> Result<LsqSolution> {
    let (m, k) = (a.nrows(), a.ncols());
    if m == 0 || k == 0 {
        return param(format!("least squares needs a nonempty matrix, got {m}x{k}"));
    }
    if y.len() != m {
        return param(format!("target length {} does not match {m} rows", y.len()));
    }
    check_finite(a, y)?;
    let rtol = rtol.unwrap_or_else(|| default_rtol(m, k));

    let svd = a.thin_svd().map_err(|e| Error::Data(format!("SVD did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let smax = s[0];
    let cutoff = rtol * smax;
    let rank = (0..s.nrows()).take_while(|&i| s[i] > cutoff && s[i] > 0.0).count();

    let coefficients = if rank == 0 {
        vec![0.0; k]
    } else {
        let u = svd.U().get(.., ..rank);
        let v = svd.V().get(.., ..rank);
        let mut w: Col<f64> = u.transpose() * ColRef::from_slice(y);
        for i in 0..rank {
            w[i] /= s[i];
        }
        let c: Col<f64> = v * &w;
        c.iter().copied().collect()
    };
    let residual_norm = residual(a, &coefficients, y);
    Ok(LsqSolution { coefficients, residual_norm, effective_rank: rank, regime: Regime::of(m, k) })
}

/// Ridge solution of `min ‖Ac − y‖² + λ‖c‖²`, using the `m × m` dual system when `m < k`.
///
/// `λ = 0` is the minimum-norm solution. A failed Cholesky factorization
/// falls back to [`min_norm_lsq`] on the stacked system `[A; √λ I]`, whose
/// minimum-norm solution is the ridge solution.
pub fn ridge(a: MatRef<'_, f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return param(format!("ridge penalty must be nonnegative, got {lambda}"));
    }
    let (m, k) = (a.nrows(), a.ncols());
    if y.len() != m {
        return param(format!("target length {} does not match {m} rows", y.len()));
    }
    check_finite(a, y)?;
    if lambda == 0.0 {
        return Ok(min_norm_lsq(a, y, None)?.coefficients);
    }
    let y_col = ColRef::from_slice(y);
    let solved = if m < k {
        let mut g = a * a.transpose();
        add_diagonal(&mut g, lambda);
        g.llt(Side::Lower).ok().map(|llt| {
            let alpha = llt.solve(y_col);
            let c: Col<f64> = a.transpose() * &alpha;
            c
        })
    } else {
        let mut g = a.transpose() * a;
        add_diagonal(&mut g, lambda);
        let rhs: Col<f64> = a.transpose() * y_col;
        g.llt(Side::Lower).ok().map(|llt| llt.solve(&rhs))
    };
    match solved {
        Some(c) if c.iter().all(|v| v.is_finite()) => Ok(c.iter().copied().collect()),
        _ => {
            let root = lambda.sqrt();
            let stacked = Mat::from_fn(m + k, k, |i, j| {
                if i < m {
                    a[(i, j)]
                } else if i - m == j {
                    root
                } else {
                    0.0
                }
            });
            let mut rhs = y.to_vec();
            rhs.resize(m + k, 0.0);
            Ok(min_norm_lsq(stacked.as_ref(), &rhs, None)?.coefficients)
        }
    }
}

/// Largest and smallest eigenvalue of a symmetric matrix.
pub fn sym_extreme_eigs(g: MatRef<'_, f64>) -> Result<(f64, f64)> {
    let n = g.nrows();
    if n == 0 || g.ncols() != n {
        return param(format!("expected a nonempty square matrix, got {}x{}", n, g.ncols()));
    }
    let scale = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).fold(1.0f64, |acc, (i, j)| acc.max(g[(i, j)].abs()));
    for i in 0..n {
        for j in 0..i {
            if (g[(i, j)] - g[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Data(format!("matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    let eigs =
        g.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Data(format!("eigensolver failed: {e:?}")))?;
    Ok((eigs[n - 1], eigs[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GramSide {
    /// `A Aᵀ` (`m × m`), used when `m ≤ k`.
    Outer,
    /// `Aᵀ A` (`k × k`), used when `m > k`.
    Inner,
}

/// Extreme eigenvalues of the smaller Gram matrix of `a`, multiplied by `scale`.
pub fn gram_extreme_eigs(a: MatRef<'_, f64>, scale: f64) -> Result<(f64, f64, GramSide)> {
    let (m, k) = (a.nrows(), a.ncols());
    let (g, side) = if m <= k { (a * a.transpose(), GramSide::Outer) } else { (a.transpose() * a, GramSide::Inner) };
    let g = symmetrize(g);
    let (hi, lo) = sym_extreme_eigs(g.as_ref())?;
    Ok((hi * scale, lo * scale, side))
}

fn symmetrize(mut g: Mat<f64>) -> Mat<f64> {
    let n = g.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

fn add_diagonal(g: &mut Mat<f64>, v: f64) {
    for i in 0..g.nrows() {
        g[(i, i)] += v;
    }
}

fn check_finite(a: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("targets contain non-finite values".into()));
    }
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::Data(format!("matrix entry ({i}, {j}) is not finite")));
            }
        }
    }
    Ok(())
}

/// `‖A c − y‖₂`.
pub fn residual(a: MatRef<'_, f64>, c: &[f64], y: &[f64]) -> f64 {
    let fit: Col<f64> = a * ColRef::from_slice(c);
    fit.iter().zip(y).map(|(f, t)| (f - t).powi(2)).sum::<f64>().sqrt()
}

/// Mean squared error between predictions and targets.
pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "prediction length mismatch");
    if pred.is_empty() {
        return f64::NAN;
    }
    pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / pred.len() as f64
}
