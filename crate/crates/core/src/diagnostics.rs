//! Gram spectra along pruning traces, support recovery, coherence, and the
//! closed-form eigenvalue bounds for random Fourier Gram matrices.

use std::io::Write;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::features::{DesignMatrix, FeatureBank, Parity};
use crate::sampling::{gaussian_matrix, RngState};
use crate::shrimp::{ImpTrace, Method, PrunedModel};
use crate::solve::{gram_extreme_eigs, sym_extreme_eigs, GramSide};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub t: usize,
    pub n_active: usize,
    /// Extreme eigenvalues of the smaller Gram divided by `n_active`.
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Largest eigenvalue of the unscaled Gram.
    pub raw_lambda_max: f64,
    pub side: GramSide,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTrace {
    pub method: Method,
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "t", "n_active", "lambda_max", "lambda_min", "raw_lambda_max", "side"])?;
        for p in &self.points {
            let side = match p.side {
                GramSide::Outer => "outer",
                GramSide::Inner => "inner",
            };
            w.write_record([
                self.method.tag().to_string(),
                p.t.to_string(),
                p.n_active.to_string(),
                format!("{:?}", p.lambda_max),
                format!("{:?}", p.lambda_min),
                format!("{:?}", p.raw_lambda_max),
                side.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Extreme eigenvalues of `A_S A_Sᵀ / N_t` (or `A_Sᵀ A_S / N_t` once `N_t < m`) for every model in `trace`.
pub fn spectrum_through_pruning(trace: &ImpTrace, design: &DesignMatrix) -> Result<SpectrumTrace> {
    let points = trace
        .models
        .iter()
        .map(|model| {
            let n_t = model.n_active();
            let (hi, lo, side) = if n_t == design.ncols() {
                gram_extreme_eigs(design.matrix(), 1.0)?
            } else {
                gram_extreme_eigs(design.restrict(&model.active)?.matrix(), 1.0)?
            };
            let scale = 1.0 / n_t as f64;
            Ok(SpectrumPoint {
                t: model.step,
                n_active: n_t,
                lambda_max: hi * scale,
                lambda_min: lo * scale,
                raw_lambda_max: hi,
                side,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumTrace { method: trace.method, points })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Bounds {
    pub gamma2: f64,
    pub sigma2: f64,
    pub q: usize,
    pub m: usize,
    pub n: usize,
    pub c: f64,
    /// `(4γ²σ² + 1)^{−q/4}`.
    pub decay: f64,
    pub lambda_max_lower: f64,
    pub lambda_min_upper: f64,
}

/// Lower bound on `E λ_max` and upper bound on `E λ_min` of `AA*/N` for complex Fourier features.
pub fn prop1_bounds(gamma2: f64, sigma2: f64, q: usize, m: usize, n: usize) -> Result<Prop1Bounds> {
    if !(gamma2 > 0.0 && sigma2 > 0.0 && gamma2.is_finite() && sigma2.is_finite()) {
        return param("data and weight variances must be positive and finite");
    }
    if q == 0 || m == 0 || n == 0 {
        return param("q, m and N must be positive");
    }
    if m > n {
        return Err(Error::Regime(format!("the bounds need m <= N, got m={m}, N={n}")));
    }
    let (mf, nf) = (m as f64, n as f64);
    let c = nf / mf;
    let decay = (4.0 * gamma2 * sigma2 + 1.0).powf(-(q as f64) / 4.0);
    let lambda_max_lower = 2.0 - (nf - 1.0) * mf / (nf * nf) + (nf - 1.0) * (mf * mf - mf) / (nf * nf) * decay;
    let lambda_min_upper = (c - 1.0) / c + 1.0 / mf + ((c - 1.0) / c * mf + 1.0) * decay;
    Ok(Prop1Bounds { gamma2, sigma2, q, m, n, c, decay, lambda_max_lower, lambda_min_upper })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub bounds: Prop1Bounds,
    pub trials: usize,
    pub mean_lambda_max: f64,
    pub se_lambda_max: f64,
    pub mean_lambda_min: f64,
    pub se_lambda_min: f64,
    /// `mean λ_max ≥ bound − 3·SE`.
    pub lambda_max_holds: bool,
    /// `mean λ_min ≤ bound + 3·SE`.
    pub lambda_min_holds: bool,
}

/// Extreme eigenvalues of the Hermitian `AA*/N` for `a_jk = exp(i⟨x_j, ω_k⟩)`.
///
/// Uses the real embedding `[[Re, −Im], [Im, Re]]`, whose spectrum is that of
/// the Hermitian matrix with every eigenvalue doubled in multiplicity.
pub fn complex_gram_extremes(x: &Mat<f64>, w: &Mat<f64>) -> Result<(f64, f64)> {
    let (m, n) = (x.nrows(), w.nrows());
    let phase = x * w.transpose();
    let cos = Mat::from_fn(m, n, |i, j| phase[(i, j)].cos());
    let sin = Mat::from_fn(m, n, |i, j| phase[(i, j)].sin());
    let scale = faer::Scale(1.0 / n as f64);
    let re = (&cos * cos.transpose() + &sin * sin.transpose()) * scale;
    let im = (&sin * cos.transpose() - &cos * sin.transpose()) * scale;
    let embed = Mat::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
        (true, true) => re[(i, j)],
        (true, false) => -im[(i, j - m)],
        (false, true) => im[(i - m, j)],
        (false, false) => re[(i - m, j - m)],
    });
    sym_extreme_eigs(embed.as_ref())
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo check of [`prop1_bounds`] with data `N(0, γ² I_q)` and weights `N(0, σ² I_q)`.
pub fn verify_prop1(
    gamma2: f64,
    sigma2: f64,
    q: usize,
    m: usize,
    n: usize,
    trials: usize,
    rng: &RngState,
) -> Result<Prop1Report> {
    if trials < 30 {
        return param(format!("need at least 30 trials, got {trials}"));
    }
    let bounds = prop1_bounds(gamma2, sigma2, q, m, n)?;
    let mut hi = Vec::with_capacity(trials);
    let mut lo = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut r = rng.split(t as u64);
        let x = gaussian_matrix(&mut r, m, q, gamma2)?;
        let w = gaussian_matrix(&mut r, n, q, sigma2)?;
        let (a, b) = complex_gram_extremes(&x, &w)?;
        hi.push(a);
        lo.push(b);
    }
    let (mean_lambda_max, se_lambda_max) = mean_se(&hi);
    let (mean_lambda_min, se_lambda_min) = mean_se(&lo);
    Ok(Prop1Report {
        bounds,
        trials,
        mean_lambda_max,
        se_lambda_max,
        mean_lambda_min,
        se_lambda_min,
        lambda_max_holds: mean_lambda_max >= bounds.lambda_max_lower - 3.0 * se_lambda_max,
        lambda_min_holds: mean_lambda_min <= bounds.lambda_min_upper + 3.0 * se_lambda_min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntryCheck {
    pub mean_re: f64,
    pub mean_im: f64,
    pub se_re: f64,
    pub se_im: f64,
    pub expected: f64,
    pub holds: bool,
}

/// Average `exp(i⟨δ, ω⟩)` over `ω ~ N(0, σ² I)` against `exp(−σ²‖δ‖²/2)`.
pub fn kernel_entry_check(
    delta: &[f64],
    sigma2: f64,
    n_weights: usize,
    rng: &mut RngState,
) -> Result<KernelEntryCheck> {
    if n_weights < 2 {
        return param("need at least two weight draws");
    }
    let w = gaussian_matrix(rng, n_weights, delta.len(), sigma2)?;
    let mut re = Vec::with_capacity(n_weights);
    let mut im = Vec::with_capacity(n_weights);
    for k in 0..n_weights {
        let phase: f64 = delta.iter().enumerate().map(|(j, d)| d * w[(k, j)]).sum();
        re.push(phase.cos());
        im.push(phase.sin());
    }
    let (mean_re, se_re) = mean_se(&re);
    let (mean_im, se_im) = mean_se(&im);
    let expected = (-0.5 * sigma2 * delta.iter().map(|d| d * d).sum::<f64>()).exp();
    let holds = (mean_re - expected).abs() <= 3.0 * se_re && mean_im.abs() <= 3.0 * se_im;
    Ok(KernelEntryCheck { mean_re, mean_im, se_re, se_im, expected, holds })
}

const COHERENCE_BLOCK: usize = 512;

/// Largest `|⟨a_i, a_j⟩| / (‖a_i‖‖a_j‖)` over distinct columns.
pub fn coherence(design: &DesignMatrix) -> Result<f64> {
    let (m, k) = (design.nrows(), design.ncols());
    if k < 2 {
        return Ok(0.0);
    }
    let mut unit = Mat::<f64>::zeros(m, k);
    for j in 0..k {
        let col = design.column(j);
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Data(format!("column {j} is zero")));
        }
        for (dst, v) in unit.col_as_slice_mut(j).iter_mut().zip(col) {
            *dst = v / norm;
        }
    }
    let mut mu = 0.0f64;
    for r0 in (0..k).step_by(COHERENCE_BLOCK) {
        let r1 = (r0 + COHERENCE_BLOCK).min(k);
        for c0 in (r0..k).step_by(COHERENCE_BLOCK) {
            let c1 = (c0 + COHERENCE_BLOCK).min(k);
            let block = unit.get(.., r0..r1).transpose() * unit.get(.., c0..c1);
            for i in 0..r1 - r0 {
                for j in 0..c1 - c0 {
                    if r0 + i != c0 + j {
                        mu = mu.max(block[(i, j)].abs());
                    }
                }
            }
        }
    }
    Ok(mu.min(1.0))
}

/// `4 / (√41 (2s − 1))`.
pub fn coherence_threshold(s: usize) -> f64 {
    4.0 / (41f64.sqrt() * (2 * s - 1) as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Components {
    /// `√(λ_max(AᵀA) / m)`.
    pub sqrt_lambda_max_over_m: f64,
    pub coherence: f64,
    pub threshold: f64,
    pub coherence_ok: bool,
}

/// The computable ingredients of the thresholded basis pursuit error bound.
pub fn theorem1_components(design: &DesignMatrix, s: usize) -> Result<Theorem1Components> {
    if s == 0 {
        return param("sparsity must be at least 1");
    }
    let (hi, _, _) = gram_extreme_eigs(design.matrix(), 1.0)?;
    let mu = coherence(design)?;
    let threshold = coherence_threshold(s);
    Ok(Theorem1Components {
        sqrt_lambda_max_over_m: (hi.max(0.0) / design.nrows() as f64).sqrt(),
        coherence: mu,
        threshold,
        coherence_ok: mu <= threshold,
    })
}

pub const DEFAULT_SUPPORT_TAU: f64 = 1e-3;

/// Coefficient mass per input coordinate, split by trig parity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub cos_mass: Vec<f64>,
    pub sin_mass: Vec<f64>,
    pub tau: f64,
    pub recovered: Vec<usize>,
}

impl SupportReport {
    pub fn total(&self, i: usize) -> f64 {
        self.cos_mass[i] + self.sin_mass[i]
    }

    pub fn dominant(&self, i: usize) -> Parity {
        if self.cos_mass[i] >= self.sin_mass[i] {
            Parity::Cos
        } else {
            Parity::Sin
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["coordinate", "cos_mass", "sin_mass", "recovered"])?;
        for i in 0..self.cos_mass.len() {
            w.write_record([
                i.to_string(),
                format!("{:?}", self.cos_mass[i]),
                format!("{:?}", self.sin_mass[i]),
                self.recovered.contains(&i).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn support_report(model: &PrunedModel, bank: &FeatureBank, tau: f64) -> Result<SupportReport> {
    if !(tau > 0.0 && tau < 1.0) {
        return param(format!("tau must lie in (0, 1), got {tau}"));
    }
    let d = bank.d();
    let mut cos_mass = vec![0.0; d];
    let mut sin_mass = vec![0.0; d];
    for (&col, &c) in model.active.iter().zip(&model.coefficients) {
        let meta = bank.column_meta(col)?;
        let target = match meta.parity {
            Parity::Cos => &mut cos_mass,
            Parity::Sin => &mut sin_mass,
        };
        for &i in bank.support(meta.row) {
            target[i] += c.abs();
        }
    }
    let total: f64 = cos_mass.iter().chain(&sin_mass).sum();
    let recovered =
        if total > 0.0 { (0..d).filter(|&i| cos_mass[i] + sin_mass[i] >= tau * total).collect() } else { Vec::new() };
    Ok(SupportReport { cos_mass, sin_mass, tau, recovered })
}
