//! q-sparse random Fourier weight banks and the real trig dictionary they induce.

use std::io::{Read, Write};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::baselines::{additive_kernel_matrix, AdditiveKernel};
use crate::error::{param, Error, Result};
use crate::sampling::{plan_subsets, RngState, SubsetPlan};

const BANK_MAGIC: &[u8; 4] = b"SHRB";
const BANK_VERSION: u16 = 1;

/// `N` random weight rows, each supported on `q` of the `d` input coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBank {
    d: usize,
    q: usize,
    sigma2: f64,
    supports: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

impl FeatureBank {
    /// Draw one weight row per (subset, repetition) of `plan`, nonzeros from `N(0, sigma2)`.
    pub fn build(plan: &SubsetPlan, sigma2: f64, rng: &mut RngState) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return param(format!("weight variance must be positive, got {sigma2}"));
        }
        if plan.subsets.len() != plan.counts.len() {
            return param("subset plan has mismatched subset and count lists");
        }
        let sd = sigma2.sqrt();
        let mut supports = Vec::with_capacity(plan.total());
        let mut values = Vec::with_capacity(plan.total());
        for (subset, &count) in plan.subsets.iter().zip(&plan.counts) {
            if subset.len() != plan.q || subset.iter().any(|&i| i >= plan.d) {
                return param(format!("subset {subset:?} is not a size-{} subset of [{}]", plan.q, plan.d));
            }
            for _ in 0..count {
                supports.push(subset.clone());
                values.push(subset.iter().map(|_| sd * rng.standard_normal()).collect());
            }
        }
        Ok(Self { d: plan.d, q: plan.q, sigma2, supports, values })
    }

    /// Convenience: plan subsets and draw the bank from one stream.
    pub fn sample(d: usize, q: usize, n_features: usize, sigma2: f64, rng: &mut RngState) -> Result<Self> {
        let plan = plan_subsets(d, q, n_features, rng)?;
        Self::build(&plan, sigma2, rng)
    }

    pub fn from_parts(
        d: usize,
        q: usize,
        sigma2: f64,
        supports: Vec<Vec<usize>>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if supports.len() != values.len() {
            return param("support and value lists differ in length");
        }
        for (s, v) in supports.iter().zip(&values) {
            if s.len() != q || v.len() != q || s.iter().any(|&i| i >= d) {
                return param(format!("row with support {s:?} is not q={q}-sparse in dimension {d}"));
            }
        }
        Ok(Self { d, q, sigma2, supports, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Number of weight rows `N`.
    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn support(&self, row: usize) -> &[usize] {
        &self.supports[row]
    }

    pub fn values(&self, row: usize) -> &[f64] {
        &self.values[row]
    }

    /// The dense `N × d` weight matrix.
    pub fn dense(&self) -> Mat<f64> {
        let mut w = Mat::zeros(self.len(), self.d);
        for (j, (s, v)) in self.supports.iter().zip(&self.values).enumerate() {
            for (&i, &x) in s.iter().zip(v) {
                w[(j, i)] = x;
            }
        }
        w
    }

    /// Metadata for column `col` of the canonical `[cos | sin]` dictionary.
    pub fn column_meta(&self, col: usize) -> Result<ColumnMeta> {
        let n = self.len();
        if col >= 2 * n {
            return param(format!("column {col} out of range for {} columns", 2 * n));
        }
        Ok(if col < n {
            ColumnMeta { row: col, parity: Parity::Cos }
        } else {
            ColumnMeta { row: col - n, parity: Parity::Sin }
        })
    }

    fn projection(&self, x: MatRef<'_, f64>, sample: usize, row: usize) -> f64 {
        self.supports[row].iter().zip(&self.values[row]).map(|(&i, &w)| x[(sample, i)] * w).sum()
    }

    /// Binary snapshot: magic, version, `d, q, N` (u64 LE), `sigma2` (f64 LE),
    /// then per row its `q` values followed by its `q` indices.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BANK_MAGIC)?;
        out.write_all(&BANK_VERSION.to_le_bytes())?;
        for v in [self.d, self.q, self.len()] {
            out.write_all(&(v as u64).to_le_bytes())?;
        }
        out.write_all(&self.sigma2.to_le_bytes())?;
        for (s, v) in self.supports.iter().zip(&self.values) {
            for x in v {
                out.write_all(&x.to_le_bytes())?;
            }
            for &i in s {
                out.write_all(&(i as u64).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != BANK_MAGIC {
            return Err(Error::Data("not a feature bank snapshot".into()));
        }
        let mut version = [0u8; 2];
        input.read_exact(&mut version)?;
        if u16::from_le_bytes(version) != BANK_VERSION {
            return Err(Error::Data(format!("unsupported bank version {}", u16::from_le_bytes(version))));
        }
        let mut word = [0u8; 8];
        let mut read_u64 = |input: &mut R| -> Result<u64> {
            input.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let d = read_u64(&mut input)? as usize;
        let q = read_u64(&mut input)? as usize;
        let n = read_u64(&mut input)? as usize;
        let sigma2 = f64::from_bits(read_u64(&mut input)?);
        let mut supports = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..q).map(|_| read_u64(&mut input).map(f64::from_bits)).collect::<Result<Vec<_>>>()?;
            let s = (0..q).map(|_| read_u64(&mut input).map(|i| i as usize)).collect::<Result<Vec<_>>>()?;
            values.push(v);
            supports.push(s);
        }
        Self::from_parts(d, q, sigma2, supports, values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Cos,
    Sin,
}

/// Which weight row and trig function a dictionary column evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub row: usize,
    pub parity: Parity,
}

/// The `m × k` trig dictionary together with per-column provenance.
///
/// Built by [`design`] with `k = 2N`: column `j < N` is `cos(X ω_j)` and
/// column `N + j` is `sin(X ω_j)`. Restrictions keep the provenance of the
/// surviving columns.
#[derive(Clone, Debug)]
pub struct DesignMatrix {
    matrix: Mat<f64>,
    columns: Vec<ColumnMeta>,
}

impl DesignMatrix {
    pub fn from_parts(matrix: Mat<f64>, columns: Vec<ColumnMeta>) -> Result<Self> {
        if matrix.ncols() != columns.len() {
            return param("column metadata does not match matrix width");
        }
        Ok(Self { matrix, columns })
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.matrix.col_as_slice(j)
    }

    /// Column submatrix on `cols` (positions in this matrix), in the given order.
    pub fn restrict(&self, cols: &[usize]) -> Result<DesignMatrix> {
        let k = self.ncols();
        if let Some(&bad) = cols.iter().find(|&&c| c >= k) {
            return param(format!("column {bad} out of range for {k} columns"));
        }
        let m = self.nrows();
        let mut matrix = Mat::zeros(m, cols.len());
        for (dst, &src) in cols.iter().enumerate() {
            matrix.col_as_slice_mut(dst).copy_from_slice(self.matrix.col_as_slice(src));
        }
        let columns = cols.iter().map(|&c| self.columns[c]).collect();
        Ok(DesignMatrix { matrix, columns })
    }

    /// `A c` for coefficients aligned with this matrix's columns.
    pub fn apply(&self, coefficients: &[f64]) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.ncols(), "coefficient length mismatch");
        let mut out = vec![0.0; self.nrows()];
        for (j, &c) in coefficients.iter().enumerate() {
            if c != 0.0 {
                for (o, &a) in out.iter_mut().zip(self.matrix.col_as_slice(j)) {
                    *o += c * a;
                }
            }
        }
        out
    }
}

/// The full `[cos(X Wᵀ), sin(X Wᵀ)]` dictionary of `bank` on the rows of `x`.
pub fn design(bank: &FeatureBank, x: MatRef<'_, f64>) -> Result<DesignMatrix> {
    let n = bank.len();
    let columns: Vec<_> = (0..2 * n).map(|c| bank.column_meta(c)).collect::<Result<_>>()?;
    design_columns(bank, x, &columns)
}

/// Only the requested dictionary columns of `bank` on the rows of `x`.
pub fn design_columns(bank: &FeatureBank, x: MatRef<'_, f64>, columns: &[ColumnMeta]) -> Result<DesignMatrix> {
    if x.ncols() != bank.d() {
        return param(format!("data has {} columns but the feature bank expects {}", x.ncols(), bank.d()));
    }
    if let Some(bad) = columns.iter().find(|c| c.row >= bank.len()) {
        return param(format!("weight row {} out of range for {} rows", bad.row, bank.len()));
    }
    let m = x.nrows();
    let mut matrix = Mat::zeros(m, columns.len());
    for (j, meta) in columns.iter().enumerate() {
        let col = matrix.col_as_slice_mut(j);
        for (i, out) in col.iter_mut().enumerate() {
            let t = bank.projection(x, i, meta.row);
            *out = match meta.parity {
                Parity::Cos => t.cos(),
                Parity::Sin => t.sin(),
            };
        }
    }
    Ok(DesignMatrix { matrix, columns: columns.to_vec() })
}

/// One point of a kernel approximation curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelApproxPoint {
    pub n_features: usize,
    pub relative_error: f64,
}

/// Relative Frobenius error `‖AAᵀ/N − K‖ / ‖K‖` for each feature count in `n_grid`,
/// where `K` is the normalized additive Gaussian kernel matching `(q, sigma2)`.
pub fn gram_expectation_error(
    x: MatRef<'_, f64>,
    q: usize,
    sigma2: f64,
    n_grid: &[usize],
    rng: &mut RngState,
) -> Result<Vec<KernelApproxPoint>> {
    let kernel = AdditiveKernel { q, sigma2, normalized: true };
    let k = additive_kernel_matrix(&kernel, x, x)?;
    let k_norm = k.norm_l2();
    n_grid
        .iter()
        .enumerate()
        .map(|(idx, &n)| {
            let bank = FeatureBank::sample(x.ncols(), q, n, sigma2, &mut rng.split(idx as u64))?;
            let a = design(&bank, x)?;
            let g = a.matrix() * a.matrix().transpose() * faer::Scale(1.0 / n as f64);
            let diff = &g - &k;
            Ok(KernelApproxPoint { n_features: n, relative_error: diff.norm_l2() / k_norm })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn random_x(m: usize, d: usize, seed: u64) -> Mat<f64> {
        crate::sampling::gaussian_matrix(&mut RngState::new(seed), m, d, 1.0).unwrap()
    }

    #[test]
    fn one_sparse_rows() {
        let bank = FeatureBank::sample(5, 1, 10, 1.0, &mut RngState::new(0)).unwrap();
        let w = bank.dense();
        assert_eq!((w.nrows(), w.ncols()), (10, 5));
        for j in 0..10 {
            assert_eq!((0..5).filter(|&i| w[(j, i)] != 0.0).count(), 1);
        }
    }

    #[test]
    fn full_order_bank_is_dense() {
        let bank = FeatureBank::sample(10, 10, 100, 0.1, &mut RngState::new(0)).unwrap();
        let w = bank.dense();
        for j in 0..100 {
            assert!((0..10).all(|i| w[(j, i)] != 0.0));
            assert_eq!(bank.support(j), &(0..10).collect::<Vec<_>>()[..]);
        }
    }

    #[test]
    fn nonzero_weight_variance() {
        let bank = FeatureBank::sample(4, 1, 100_000, 0.5, &mut RngState::new(11)).unwrap();
        let var = (0..bank.len()).map(|j| bank.values(j)[0].powi(2)).sum::<f64>() / bank.len() as f64;
        assert!((0.49..=0.51).contains(&var), "{var}");
    }

    #[test]
    fn origin_gives_unit_cosines() {
        let bank = FeatureBank::sample(3, 2, 6, 1.0, &mut RngState::new(0)).unwrap();
        let a = design(&bank, Mat::<f64>::zeros(4, 3).as_ref()).unwrap();
        for i in 0..4 {
            for j in 0..6 {
                assert_eq!(a.matrix()[(i, j)], 1.0);
                assert_eq!(a.matrix()[(i, 6 + j)], 0.0);
            }
        }
    }

    #[test]
    fn quarter_period() {
        let bank = FeatureBank::from_parts(1, 1, 1.0, vec![vec![0]], vec![vec![1.0]]).unwrap();
        let x = Mat::from_fn(1, 1, |_, _| PI / 2.0);
        let a = design(&bank, x.as_ref()).unwrap();
        assert!(a.matrix()[(0, 0)].abs() < 1e-15);
        assert_eq!(a.matrix()[(0, 1)], 1.0);
    }

    #[test]
    fn matches_scalar_loop() {
        let bank = FeatureBank::sample(3, 2, 4, 1.0, &mut RngState::new(9)).unwrap();
        let x = random_x(3, 3, 10);
        let a = design(&bank, x.as_ref()).unwrap();
        let w = bank.dense();
        for i in 0..3 {
            for j in 0..4 {
                let mut t = 0.0;
                for k in 0..3 {
                    t += x[(i, k)] * w[(j, k)];
                }
                assert!((a.matrix()[(i, j)] - t.cos()).abs() <= 1e-15);
                assert!((a.matrix()[(i, 4 + j)] - t.sin()).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn paired_columns_square_sum_to_feature_count() {
        let bank = FeatureBank::sample(4, 2, 30, 0.5, &mut RngState::new(2)).unwrap();
        let a = design(&bank, random_x(7, 4, 3).as_ref()).unwrap();
        for i in 0..7 {
            let s: f64 = (0..60).map(|j| a.matrix()[(i, j)].powi(2)).sum();
            assert!((s - 30.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn restrict_behaviour() {
        let bank = FeatureBank::sample(3, 1, 2, 1.0, &mut RngState::new(4)).unwrap();
        let a = design(&bank, random_x(3, 3, 5).as_ref()).unwrap();
        let all = a.restrict(&[0, 1, 2, 3]).unwrap();
        assert_eq!(all.matrix(), a.matrix());
        assert_eq!(all.columns(), a.columns());

        let first = a.restrict(&[0]).unwrap();
        assert_eq!(first.column(0), a.column(0));
        assert_eq!(first.columns()[0], ColumnMeta { row: 0, parity: Parity::Cos });

        let outer = a.restrict(&[3, 1, 2]).unwrap();
        let nested = outer.restrict(&[0, 2]).unwrap();
        let direct = a.restrict(&[3, 2]).unwrap();
        assert_eq!(nested.matrix(), direct.matrix());
        assert_eq!(nested.columns(), direct.columns());

        assert!(a.restrict(&[4]).is_err());
    }

    #[test]
    fn design_rejects_dimension_mismatch() {
        let bank = FeatureBank::sample(3, 1, 2, 1.0, &mut RngState::new(4)).unwrap();
        assert!(design(&bank, random_x(3, 4, 5).as_ref()).is_err());
    }

    #[test]
    fn bank_snapshot_roundtrip() {
        let bank = FeatureBank::sample(6, 2, 20, 0.5, &mut RngState::new(8)).unwrap();
        let mut buf = Vec::new();
        bank.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SHRB");
        assert_eq!(buf.len(), 4 + 2 + 3 * 8 + 8 + 20 * 2 * 16);
        assert_eq!(FeatureBank::read_from(&buf[..]).unwrap(), bank);
        assert!(FeatureBank::read_from(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn single_sample_kernel_is_exact() {
        let x = random_x(1, 4, 6);
        for point in gram_expectation_error(x.as_ref(), 2, 0.5, &[3, 12], &mut RngState::new(0)).unwrap() {
            assert!(point.relative_error <= 1e-12);
        }
    }

    #[test]
    fn equal_samples_give_unit_entries() {
        let row = random_x(1, 3, 1);
        let x = Mat::from_fn(2, 3, |_, j| row[(0, j)]);
        let err = gram_expectation_error(x.as_ref(), 3, 1.0 / 3.0, &[50], &mut RngState::new(1)).unwrap();
        assert!(err[0].relative_error <= 1e-12);
    }

    #[test]
    fn kernel_error_shrinks_with_features() {
        let x = Mat::from_fn(20, 4, |i, j| ((i * 7 + j * 3) % 11) as f64 / 11.0 - 0.5);
        let grid = [10, 100, 2000];
        let mut first = Vec::new();
        let mut last = Vec::new();
        for seed in 0..5 {
            let curve = gram_expectation_error(x.as_ref(), 2, 0.5, &grid, &mut RngState::new(seed)).unwrap();
            first.push(curve[0].relative_error);
            last.push(curve[2].relative_error);
        }
        first.sort_by(f64::total_cmp);
        last.sort_by(f64::total_cmp);
        assert!(last[2] < first[2]);
    }
}
