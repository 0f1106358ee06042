//! Comparison fitters: random-subset min-norm sweeps, random and naive pruning,
//! thresholded basis pursuit denoising, and additive-kernel ridge regression.

use faer::linalg::solvers::Solve;
use faer::{Col, ColRef, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::sampling::{binomial, RngState};
use crate::shrimp::{keep_largest, schedule, FitProblem, ImpOptions, ImpTrace, Method, PrunedModel};
use crate::solve::mse;

/// Min-norm fits on uniformly random column subsets of each requested size.
pub fn min_l2_sweep(problem: &FitProblem, sizes: &[usize], rng: &mut RngState) -> Result<Vec<PrunedModel>> {
    let k = problem.n_columns();
    sizes
        .iter()
        .enumerate()
        .map(|(step, &size)| {
            if size == 0 || size > k {
                return param(format!("subset size {size} outside 1..={k}"));
            }
            let mut active = rand::seq::index::sample(rng, k, size).into_vec();
            active.sort_unstable();
            problem.fit(step, active, None)
        })
        .collect()
}

/// The pruning schedule of [`crate::imp_run`], but each step drops a uniformly random set of columns.
pub fn random_prune_run(problem: &FitProblem, options: &ImpOptions, rng: &mut RngState) -> Result<ImpTrace> {
    options.validate()?;
    let k = problem.n_columns();
    if k == 0 {
        return param("the dictionary has no columns to prune");
    }
    let mut models = vec![problem.fit(0, (0..k).collect(), options.rtol)?];
    for (step, &size) in schedule(k, options.prune_rate, options.max_steps).iter().enumerate().skip(1) {
        let prev = &models.last().expect("nonempty").active;
        let mut keep = rand::seq::index::sample(rng, prev.len(), size).into_vec();
        keep.sort_unstable();
        let active = keep.into_iter().map(|i| prev[i]).collect();
        models.push(problem.fit(step, active, options.rtol)?);
    }
    ImpTrace::new(Method::RandomPrune, models, options.prune_rate, problem.config)
}

/// Magnitude pruning of the initial fit without refitting: each step masks more of `c_0`.
pub fn naive_prune_run(problem: &FitProblem, options: &ImpOptions) -> Result<ImpTrace> {
    options.validate()?;
    let k = problem.n_columns();
    if k == 0 {
        return param("the dictionary has no columns to prune");
    }
    let mut models = vec![problem.fit(0, (0..k).collect(), options.rtol)?];
    for (step, &size) in schedule(k, options.prune_rate, options.max_steps).iter().enumerate().skip(1) {
        let prev = models.last().expect("nonempty");
        let (active, coefficients) = keep_largest(&prev.active, &prev.coefficients, size);
        models.push(problem.score(step, active, coefficients, None));
    }
    ImpTrace::new(Method::NaivePrune, models, options.prune_rate, problem.config)
}

/// `min ‖c‖₁` subject to `‖Ac − y‖₂ ≤ η√m`, followed by keeping the `s` largest entries.
#[derive(Clone, Copy, Debug)]
pub struct BpdnProblem<'a> {
    pub a: MatRef<'a, f64>,
    pub y: &'a [f64],
    pub eta: f64,
    pub sparsity: usize,
}

impl BpdnProblem<'_> {
    fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return param(format!("eta must be nonnegative, got {}", self.eta));
        }
        if self.sparsity == 0 {
            return param("sparsity must be at least 1");
        }
        if self.y.len() != self.a.nrows() {
            return param(format!("target length {} does not match {} rows", self.y.len(), self.a.nrows()));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.eta * (self.a.nrows() as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BpdnOptions {
    pub rho: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        Self { rho: 1.0, alpha: 1.0, tol: 1e-8, max_iter: 5000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpdnResult {
    /// The ℓ1 minimizer before thresholding.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ac − y‖₂` at the returned coefficients.
    pub residual_norm: f64,
    pub l1_norm: f64,
    /// `ρ(‖Δ(z, w)‖² + ‖Δ(u, v)‖²)` per iteration; nonincreasing for `α = 1`.
    pub combined_residual: Vec<f64>,
}

fn matvec(a: MatRef<'_, f64>, x: &[f64]) -> Vec<f64> {
    let out: Col<f64> = a * ColRef::from_slice(x);
    out.iter().copied().collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn soft(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

fn project_ball(v: &mut [f64], radius: f64) {
    let n = norm2(v);
    if n > radius {
        let s = if n > 0.0 { radius / n } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Solve the basis pursuit denoising program with a scaled ADMM.
///
/// Splitting: `x = z`, `Ax − y = w`, `f(z) = ‖z‖₁`, `w` confined to the
/// `η√m` ball. The x-update `(I + AᵀA)x = r` is done through a Cholesky
/// factor of `I + AAᵀ`, so each iteration costs two products with `A`.
pub fn bpdn_solve(problem: &BpdnProblem<'_>, options: &BpdnOptions) -> Result<BpdnResult> {
    problem.validate()?;
    if !(options.rho > 0.0 && options.alpha > 0.0 && options.alpha < 2.0 && options.tol > 0.0) {
        return param("ADMM needs rho > 0, alpha in (0, 2) and tol > 0");
    }
    let a = problem.a;
    let y = problem.y;
    let (m, n) = (a.nrows(), a.ncols());
    let radius = problem.radius();
    let y_norm = norm2(y);
    if radius >= y_norm {
        return Ok(BpdnResult {
            coefficients: vec![0.0; n],
            iterations: 0,
            converged: true,
            residual_norm: y_norm,
            l1_norm: 0.0,
            combined_residual: Vec::new(),
        });
    }
    let rho = options.rho;
    let alpha = options.alpha;
    let gram = a * a.transpose();
    let mut shifted = gram.clone();
    for i in 0..m {
        shifted[(i, i)] += 1.0;
    }
    let chol =
        shifted.llt(Side::Lower).map_err(|_| crate::Error::Parameter("I + AAᵀ is not positive definite".into()))?;
    let gram_times = |v: &[f64]| matvec(gram.as_ref(), v);

    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut w = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let sqrt_dim = ((n + m) as f64).sqrt();

    for it in 1..=options.max_iter {
        iterations = it;
        // x = p + Aᵀ(s − t), t = (I + AAᵀ)⁻¹(A p + AAᵀ s), p = z − u, s = y + w − v
        let p: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
        let s: Vec<f64> = (0..m).map(|i| y[i] + w[i] - v[i]).collect();
        let ap = matvec(a, &p);
        let gs = gram_times(&s);
        let rhs: Vec<f64> = ap.iter().zip(&gs).map(|(a, b)| a + b).collect();
        let t: Col<f64> = chol.solve(ColRef::from_slice(&rhs));
        let st: Vec<f64> = (0..m).map(|i| s[i] - t[i]).collect();
        let at_st: Col<f64> = a.transpose() * ColRef::from_slice(&st);
        let x: Vec<f64> = (0..n).map(|j| p[j] + at_st[j]).collect();
        let g_st = gram_times(&st);
        let ax: Vec<f64> = (0..m).map(|i| ap[i] + g_st[i]).collect();

        let hat_x: Vec<f64> = (0..n).map(|j| alpha * x[j] + (1.0 - alpha) * z[j]).collect();
        let hat_r: Vec<f64> = (0..m).map(|i| alpha * (ax[i] - y[i]) + (1.0 - alpha) * w[i]).collect();

        let z_old = std::mem::take(&mut z);
        let w_old = std::mem::take(&mut w);
        z = (0..n).map(|j| soft(hat_x[j] + u[j], 1.0 / rho)).collect();
        w = (0..m).map(|i| hat_r[i] + v[i]).collect();
        project_ball(&mut w, radius);

        let mut du2 = 0.0;
        for j in 0..n {
            let step = hat_x[j] - z[j];
            u[j] += step;
            du2 += step * step;
        }
        let mut dv2 = 0.0;
        for i in 0..m {
            let step = hat_r[i] - w[i];
            v[i] += step;
            dv2 += step * step;
        }
        let dz: Vec<f64> = (0..n).map(|j| z[j] - z_old[j]).collect();
        let dw: Vec<f64> = (0..m).map(|i| w[i] - w_old[i]).collect();
        let dzw2 = dot(&dz, &dz) + dot(&dw, &dw);
        history.push(rho * (dzw2 + du2 + dv2));

        let r_pri = ((0..n).map(|j| (x[j] - z[j]).powi(2)).sum::<f64>()
            + (0..m).map(|i| (ax[i] - y[i] - w[i]).powi(2)).sum::<f64>())
        .sqrt();
        let dual_vec: Vec<f64> = if radius > 0.0 {
            let at_dw: Col<f64> = a.transpose() * ColRef::from_slice(&dw);
            (0..n).map(|j| dz[j] + at_dw[j]).collect()
        } else {
            dz
        };
        let r_dual = rho * norm2(&dual_vec);
        let scale_pri = (dot(&x, &x) + dot(&ax, &ax)).sqrt().max((dot(&z, &z) + dot(&w, &w)).sqrt()).max(y_norm);
        let eps_pri = sqrt_dim * options.tol + options.tol * scale_pri;
        let eps_dual = (n as f64).sqrt() * options.tol + options.tol * rho * (dot(&u, &u) + dot(&v, &v)).sqrt();
        if r_pri <= eps_pri && r_dual <= eps_dual {
            converged = true;
            break;
        }
    }
    let az = matvec(a, &z);
    let residual_norm = norm2(&az.iter().zip(y).map(|(p, t)| p - t).collect::<Vec<_>>());
    if !converged {
        log::warn!("BPDN stopped after {iterations} iterations without meeting tolerance {}", options.tol);
    }
    Ok(BpdnResult {
        l1_norm: z.iter().map(|c| c.abs()).sum(),
        coefficients: z,
        iterations,
        converged,
        residual_norm,
        combined_residual: history,
    })
}

/// Zero all but the `s` largest-magnitude entries; ties keep the lower index.
pub fn threshold_top_s(c: &[f64], s: usize) -> Vec<f64> {
    let mut order: Vec<usize> = (0..c.len()).collect();
    order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()).then(a.cmp(&b)));
    let mut out = vec![0.0; c.len()];
    for &i in order.iter().take(s) {
        out[i] = c[i];
    }
    out
}

fn sparse_model(problem: &FitProblem, step: usize, dense: &[f64]) -> PrunedModel {
    let active: Vec<usize> = (0..dense.len()).filter(|&j| dense[j] != 0.0).collect();
    let coefficients = active.iter().map(|&j| dense[j]).collect();
    problem.score(step, active, coefficients, None)
}

/// Thresholded basis pursuit over a list of sparsity levels, selecting `η` from
/// `etas` (as absolute budgets) and `s` from `sizes` by validation error.
///
/// The returned trace holds one model per size for the winning `η`.
pub fn srfe_s_run(problem: &FitProblem, etas: &[f64], sizes: &[usize], options: &BpdnOptions) -> Result<ImpTrace> {
    if etas.is_empty() || sizes.is_empty() {
        return param("SRFE-S needs at least one eta and one sparsity level");
    }
    let mut best: Option<ImpTrace> = None;
    for &eta in etas {
        let bp = BpdnProblem { a: problem.train.matrix(), y: &problem.y_train, eta, sparsity: sizes[0] };
        let sol = bpdn_solve(&bp, options)?;
        let models = sizes
            .iter()
            .enumerate()
            .map(|(step, &s)| {
                if s == 0 {
                    return param("sparsity must be at least 1");
                }
                Ok(sparse_model(problem, step, &threshold_top_s(&sol.coefficients, s)))
            })
            .collect::<Result<Vec<_>>>()?;
        let trace = ImpTrace::new(Method::SrfeS, models, 0.0, problem.config)?;
        let better = best.as_ref().is_none_or(|b| {
            let (v, bv) = (trace.winner().val_mse, b.winner().val_mse);
            v < bv || bv.is_nan()
        });
        if better {
            best = Some(trace);
        }
    }
    Ok(best.expect("nonempty eta grid"))
}

/// The default SRFE-S budget grid `{0, 0.01, 0.1}·‖y‖₂/√m`.
pub fn default_eta_grid(y: &[f64]) -> Vec<f64> {
    let scale = norm2(y) / (y.len() as f64).sqrt();
    [0.0, 0.01, 0.1].iter().map(|f| f * scale).collect()
}

/// Sum over all size-`q` coordinate subsets of the product Gaussian `exp(−σ²‖δ_S‖²/2)`.
///
/// `σ² = 1/q` gives the bandwidth rule `exp(−‖δ_S‖²/(2q))`. With `normalized`
/// the sum is divided by `C(d, q)`, which makes it the expected feature Gram
/// entry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditiveKernel {
    pub q: usize,
    pub sigma2: f64,
    pub normalized: bool,
}

impl AdditiveKernel {
    pub fn raw(q: usize) -> Self {
        Self { q, sigma2: 1.0 / q as f64, normalized: false }
    }

    pub fn normalized(q: usize) -> Self {
        Self { q, sigma2: 1.0 / q as f64, normalized: true }
    }
}

/// `e_q(g_1, ..., g_d)`, the elementary symmetric polynomial of degree `q`.
pub fn elementary_symmetric(g: &[f64], q: usize) -> f64 {
    let mut e = vec![0.0; q + 1];
    e[0] = 1.0;
    for (k, &gk) in g.iter().enumerate() {
        for j in (1..=q.min(k + 1)).rev() {
            e[j] += gk * e[j - 1];
        }
    }
    e[q]
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln e_q` from per-coordinate log factors.
pub fn log_elementary_symmetric(log_g: &[f64], q: usize) -> f64 {
    let mut e = vec![f64::NEG_INFINITY; q + 1];
    e[0] = 0.0;
    for (k, &lg) in log_g.iter().enumerate() {
        for j in (1..=q.min(k + 1)).rev() {
            e[j] = log_add(e[j], lg + e[j - 1]);
        }
    }
    e[q]
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `K[i, j]` between rows of `x` and rows of `x2`.
pub fn additive_kernel_matrix(kernel: &AdditiveKernel, x: MatRef<'_, f64>, x2: MatRef<'_, f64>) -> Result<Mat<f64>> {
    let d = x.ncols();
    let q = kernel.q;
    if q == 0 || q > d {
        return param(format!("kernel order q={q} must satisfy 1 <= q <= d={d}"));
    }
    if x2.ncols() != d {
        return param(format!("input widths differ: {d} vs {}", x2.ncols()));
    }
    if !(kernel.sigma2 > 0.0 && kernel.sigma2.is_finite()) {
        return param(format!("kernel variance must be positive, got {}", kernel.sigma2));
    }
    let half = 0.5 * kernel.sigma2;
    let use_log = q > 30;
    let log_norm = if kernel.normalized { ln_binomial(d, q) } else { 0.0 };
    let norm = if kernel.normalized { binomial(d, q).map(|b| b as f64) } else { Some(1.0) };
    let mut g = vec![0.0; d];
    let mut out = Mat::zeros(x.nrows(), x2.nrows());
    for i in 0..x.nrows() {
        for j in 0..x2.nrows() {
            for k in 0..d {
                let delta = x[(i, k)] - x2[(j, k)];
                g[k] = -half * delta * delta;
            }
            out[(i, j)] = match (use_log, norm) {
                (false, Some(norm)) => {
                    g.iter_mut().for_each(|v| *v = v.exp());
                    elementary_symmetric(&g, q) / norm
                }
                _ => (log_elementary_symmetric(&g, q) - log_norm).exp(),
            };
        }
    }
    Ok(out)
}

/// Kernel ridge regressor with the additive kernel.
#[derive(Clone, Debug)]
pub struct KernelRidgeModel {
    pub kernel: AdditiveKernel,
    pub x_train: Mat<f64>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    pub val_mse: f64,
}

impl KernelRidgeModel {
    pub fn predict(&self, x: MatRef<'_, f64>) -> Result<Vec<f64>> {
        let k = additive_kernel_matrix(&self.kernel, x, self.x_train.as_ref())?;
        Ok(matvec(k.as_ref(), &self.alpha))
    }
}

pub const DEFAULT_LAMBDA_GRID: [f64; 5] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0];

const JITTER: f64 = 1e-10;

/// Solve `(K + λI)α = y`, retrying once with extra diagonal jitter.
pub fn kernel_ridge_solve(k: MatRef<'_, f64>, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = k.nrows();
    if k.ncols() != n || y.len() != n {
        return param("kernel matrix must be square and match the targets");
    }
    for jitter in [0.0, JITTER] {
        let mut sys = k.to_owned();
        for i in 0..n {
            sys[(i, i)] += lambda + jitter;
        }
        if let Ok(llt) = sys.llt(Side::Lower) {
            let alpha: Col<f64> = llt.solve(ColRef::from_slice(y));
            if alpha.iter().all(|v| v.is_finite()) {
                return Ok(alpha.iter().copied().collect());
            }
        }
        log::warn!("kernel system at lambda={lambda} not positive definite; adding jitter {JITTER}");
    }
    Ok(crate::solve::ridge(k, y, lambda + JITTER)?)
}

/// Additive-kernel ridge regression with `λ` chosen on the validation split.
pub fn salsa_fit(
    x: MatRef<'_, f64>,
    y: &[f64],
    x_val: MatRef<'_, f64>,
    y_val: &[f64],
    kernel: AdditiveKernel,
    lambda_grid: &[f64],
) -> Result<KernelRidgeModel> {
    if lambda_grid.is_empty() {
        return param("lambda grid is empty");
    }
    if x.nrows() != y.len() || x_val.nrows() != y_val.len() {
        return param("inputs and targets have different lengths");
    }
    let k = additive_kernel_matrix(&kernel, x, x)?;
    let k_val = additive_kernel_matrix(&kernel, x_val, x)?;
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &lambda in lambda_grid {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return param(format!("ridge penalty must be nonnegative, got {lambda}"));
        }
        let alpha = kernel_ridge_solve(k.as_ref(), y, lambda)?;
        let val = mse(&matvec(k_val.as_ref(), &alpha), y_val);
        let key = if val.is_nan() { f64::INFINITY } else { val };
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, lambda, alpha));
        }
    }
    let (_, lambda, alpha) = best.expect("nonempty grid");
    let val_mse = mse(&matvec(k_val.as_ref(), &alpha), y_val);
    Ok(KernelRidgeModel { kernel, x_train: x.to_owned(), alpha, lambda, val_mse })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(threshold_top_s(&[1.0, -3.0, 2.0], 1), vec![0.0, -3.0, 0.0]);
        assert_eq!(threshold_top_s(&[1.0, -3.0, 2.0], 3), vec![1.0, -3.0, 2.0]);
        assert_eq!(threshold_top_s(&[2.0, 1.0, -2.0], 1), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn bpdn_zero_when_budget_covers_targets() {
        let a = Mat::from_fn(2, 3, |i, j| (i + j) as f64);
        let y = [1.0, 1.0];
        let r =
            bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y, eta: 1.0, sparsity: 1 }, &BpdnOptions::default()).unwrap();
        assert_eq!(r.coefficients, vec![0.0; 3]);
        assert!(r.converged);
    }

    #[test]
    fn bpdn_identity_exact_fit() {
        let a = Mat::<f64>::identity(2, 2);
        let y = [3.0, 0.0];
        let r =
            bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y, eta: 0.0, sparsity: 2 }, &BpdnOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.coefficients[0] - 3.0).abs() < 1e-6 && r.coefficients[1].abs() < 1e-6, "{:?}", r.coefficients);
    }

    #[test]
    fn bpdn_rejects_bad_problem() {
        let a = Mat::<f64>::identity(2, 2);
        let y = [1.0, 0.0];
        let o = BpdnOptions::default();
        assert!(bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y, eta: -1.0, sparsity: 1 }, &o).is_err());
        assert!(bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y, eta: 0.0, sparsity: 0 }, &o).is_err());
        assert!(bpdn_solve(&BpdnProblem { a: a.as_ref(), y: &y[..1], eta: 0.0, sparsity: 1 }, &o).is_err());
    }

    #[test]
    fn elementary_symmetric_small() {
        let (a, b, c) = (0.3, 0.7, 0.2);
        let e2 = elementary_symmetric(&[a, b, c], 2);
        assert!((e2 - (a * b + a * c + b * c)).abs() < 1e-15);
        assert_eq!(elementary_symmetric(&[1.0; 10], 3), 120.0);
        let le = log_elementary_symmetric(&[a.ln(), b.ln(), c.ln()], 2);
        assert!((le.exp() - e2).abs() < 1e-15);
    }

    #[test]
    fn kernel_diagonal_is_subset_count() {
        let x = Mat::from_fn(3, 5, |i, j| (i * 5 + j) as f64 * 0.1);
        let k = additive_kernel_matrix(&AdditiveKernel::raw(2), x.as_ref(), x.as_ref()).unwrap();
        for i in 0..3 {
            assert!((k[(i, i)] - 10.0).abs() < 1e-12);
        }
        let kn = additive_kernel_matrix(&AdditiveKernel::normalized(2), x.as_ref(), x.as_ref()).unwrap();
        assert!((kn[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_log_space_for_high_order() {
        let x = Mat::from_fn(2, 40, |i, j| ((i + 1) * (j + 2)) as f64 * 0.01);
        let kernel = AdditiveKernel { q: 35, sigma2: 0.5, normalized: false };
        let k = additive_kernel_matrix(&kernel, x.as_ref(), x.as_ref()).unwrap();
        assert!((k[(0, 0)] / binomial(40, 35).unwrap() as f64 - 1.0).abs() < 1e-12);
        let mut g = vec![0.0; 40];
        for (j, v) in g.iter_mut().enumerate() {
            let delta = x[(0, j)] - x[(1, j)];
            *v = (-0.25 * delta * delta).exp();
        }
        let direct = elementary_symmetric(&g, 35);
        assert!((k[(0, 1)] / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn kernel_rejects_bad_order() {
        let x = Mat::<f64>::zeros(2, 3);
        assert!(additive_kernel_matrix(&AdditiveKernel::raw(4), x.as_ref(), x.as_ref()).is_err());
        assert!(additive_kernel_matrix(&AdditiveKernel::raw(0), x.as_ref(), x.as_ref()).is_err());
        let x2 = Mat::<f64>::zeros(2, 2);
        assert!(additive_kernel_matrix(&AdditiveKernel::raw(1), x.as_ref(), x2.as_ref()).is_err());
    }

    #[test]
    fn kernel_ridge_hand_instance() {
        let k = faer::mat![[2.0, 1.0], [1.0, 2.0]];
        let alpha = kernel_ridge_solve(k.as_ref(), &[1.0, 2.0], 1.0).unwrap();
        // (K + I) = [[3,1],[1,3]], inverse = [[3,-1],[-1,3]]/8
        assert!((alpha[0] - 1.0 / 8.0).abs() < 1e-14);
        assert!((alpha[1] - 5.0 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn salsa_zero_targets() {
        let x = Mat::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let model = salsa_fit(
            x.as_ref(),
            &[0.0; 6],
            x.as_ref(),
            &[0.0; 6],
            AdditiveKernel::normalized(2),
            &DEFAULT_LAMBDA_GRID,
        )
        .unwrap();
        assert!(model.alpha.iter().all(|a| *a == 0.0));
        assert!(salsa_fit(x.as_ref(), &[0.0; 6], x.as_ref(), &[0.0; 6], AdditiveKernel::normalized(2), &[]).is_err());
    }
}
