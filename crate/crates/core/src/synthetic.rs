//! Synthetic target functions and dataset generation.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::str::FromStr;

use faer::{Mat, MatRef};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::sampling::RngState;

/// Coordinates drawn uniformly from `[-half_width, half_width]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingBox {
    pub half_width: f64,
}

impl SamplingBox {
    pub const UNIT: SamplingBox = SamplingBox { half_width: 1.0 };
    pub const PI: SamplingBox = SamplingBox { half_width: PI };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetFunction {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    Fs,
    Fa2,
    Fa3,
    Fh1,
    Fh2,
    Fh3,
}

impl TargetFunction {
    pub const ALL: [TargetFunction; 13] = [
        Self::F1,
        Self::F2,
        Self::F3,
        Self::F4,
        Self::F5,
        Self::F6,
        Self::F7,
        Self::Fs,
        Self::Fa2,
        Self::Fa3,
        Self::Fh1,
        Self::Fh2,
        Self::Fh3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
            Self::F5 => "f5",
            Self::F6 => "f6",
            Self::F7 => "f7",
            Self::Fs => "fs",
            Self::Fa2 => "fa2",
            Self::Fa3 => "fa3",
            Self::Fh1 => "fh1",
            Self::Fh2 => "fh2",
            Self::Fh3 => "fh3",
        }
    }

    pub fn d_min(self) -> usize {
        match self {
            Self::F1 | Self::Fh1 | Self::Fh2 | Self::Fh3 => 1,
            Self::F2 | Self::F3 | Self::Fa3 => 2,
            Self::F4 | Self::F5 | Self::F6 => 3,
            Self::F7 | Self::Fs | Self::Fa2 => 4,
        }
    }

    /// Interaction order of the function in dimension `d`.
    pub fn q_star(self, d: usize) -> usize {
        match self {
            Self::F1 | Self::F2 | Self::Fs | Self::Fa3 => 1,
            Self::F3 | Self::F4 | Self::F6 | Self::F7 | Self::Fa2 => 2,
            Self::F5 => 3,
            Self::Fh1 | Self::Fh2 | Self::Fh3 => d,
        }
    }

    pub fn sampling_box(self) -> SamplingBox {
        match self {
            Self::F6 => SamplingBox::PI,
            _ => SamplingBox::UNIT,
        }
    }

    /// Value at one point; `x.len()` must be at least [`Self::d_min`].
    pub fn eval_point(self, x: &[f64]) -> f64 {
        let d = x.len();
        let pair = |i: usize, j: usize| (2.0 * x[i] - 1.0) * (2.0 * x[j] - 1.0);
        match self {
            Self::F1 => x[..d - 1].iter().sum::<f64>() + (-x[d - 1]).exp(),
            Self::F2 => x[0].cos() + x[1].sin(),
            Self::F3 => pair(0, 1),
            Self::F4 => pair(0, 1) + pair(0, 2) + pair(1, 2),
            Self::F5 => sinc(x[0]) * sinc(x[2]).powi(3) + sinc(x[1]),
            Self::F6 => x[0].sin() + 7.0 * x[1].sin().powi(2) + 0.1 * x[2].powi(4) * x[0].sin(),
            Self::F7 => x[0].cos() * x[2] + x[1] * x[1] * x[3] + x[2..].iter().sum::<f64>(),
            Self::Fs => 3.0 * x[2].cos() + 4.0 * x[3].sin() + 2.0 * x[1].sin(),
            Self::Fa2 => (x[0] + x[1]).cos() + 5.0 * (2.0 * x[2] + 10.0 * x[3]).cos(),
            Self::Fa3 => (9.0 * x[0]).sin() + 10.0 * (10.0 * x[1]).cos(),
            Self::Fh1 => x.iter().sum::<f64>().sin(),
            Self::Fh2 => x.iter().product::<f64>().cos(),
            Self::Fh3 => (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()).powf(-0.5),
        }
    }

    pub fn evaluate(self, x: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() < self.d_min() {
            return param(format!("{} needs at least {} columns, got {}", self.name(), self.d_min(), x.ncols()));
        }
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = x[(i, j)];
                }
                self.eval_point(&row)
            })
            .collect())
    }
}

impl std::fmt::Display for TargetFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        match key.as_str() {
            "ishigami" => return Ok(Self::F6),
            "fa1" => return Ok(Self::F7),
            _ => {}
        }
        Self::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::Parameter(format!("unknown target function '{s}'")))
    }
}

/// Normalized sinc, `sin(πt)/(πt)` with value 1 at 0.
pub fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Train, validation and test splits with their generating parameters.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x_train: Mat<f64>,
    pub y_train: Vec<f64>,
    pub x_val: Mat<f64>,
    pub y_val: Vec<f64>,
    pub x_test: Mat<f64>,
    pub y_test: Vec<f64>,
    pub noise: f64,
    pub seed: u64,
}

impl Dataset {
    pub fn d(&self) -> usize {
        self.x_train.ncols()
    }

    /// Split `(x, y)` 90/10 into train/validation with a seeded shuffle.
    pub fn split(
        x: MatRef<'_, f64>,
        y: &[f64],
        test: Option<(Mat<f64>, Vec<f64>)>,
        seed: u64,
        noise: f64,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return param(format!("{} rows but {} targets", x.nrows(), y.len()));
        }
        if x.nrows() < 2 {
            return param(format!("need at least 2 samples to split, got {}", x.nrows()));
        }
        let m = x.nrows();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut RngState::derive(seed, SPLIT_STREAM));
        let n_val = ((m as f64) * 0.1).round().max(1.0) as usize;
        let (val_idx, train_idx) = order.split_at(n_val);
        let mut train_idx = train_idx.to_vec();
        let mut val_idx = val_idx.to_vec();
        train_idx.sort_unstable();
        val_idx.sort_unstable();
        let (x_test, y_test) = test.unwrap_or_else(|| (Mat::zeros(0, x.ncols()), Vec::new()));
        if x_test.ncols() != x.ncols() || x_test.nrows() != y_test.len() {
            return param("test split does not match the training inputs");
        }
        Ok(Self {
            x_train: take_rows(x, &train_idx),
            y_train: train_idx.iter().map(|&i| y[i]).collect(),
            x_val: take_rows(x, &val_idx),
            y_val: val_idx.iter().map(|&i| y[i]).collect(),
            x_test,
            y_test,
            noise,
            seed,
        })
    }
}

const INPUT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;
const TEST_INPUT_STREAM: u64 = 4;
const TEST_NOISE_STREAM: u64 = 5;

fn take_rows(x: MatRef<'_, f64>, rows: &[usize]) -> Mat<f64> {
    Mat::from_fn(rows.len(), x.ncols(), |i, j| x[(rows[i], j)])
}

/// `m × d` uniform draws from `bx`.
pub fn sample_inputs(bx: SamplingBox, m: usize, d: usize, rng: &mut RngState) -> Mat<f64> {
    let h = bx.half_width;
    let mut x = Mat::zeros(m, d);
    for i in 0..m {
        for j in 0..d {
            x[(i, j)] = rng.random_range(-h..=h);
        }
    }
    x
}

fn noisy(f: TargetFunction, x: MatRef<'_, f64>, noise: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    let mut y = f.evaluate(x)?;
    if noise > 0.0 {
        let normal = Normal::new(0.0, noise).expect("positive noise level");
        for v in &mut y {
            *v += normal.sample(rng);
        }
    }
    Ok(y)
}

/// `m` samples of `f` (split 90/10 into train/validation) plus `m` independent test samples.
pub fn make_dataset(f: TargetFunction, m: usize, d: usize, seed: u64, noise: f64) -> Result<Dataset> {
    if m < 10 {
        return param(format!("need at least 10 samples, got {m}"));
    }
    if d < f.d_min() {
        return param(format!("{f} needs d >= {}, got {d}", f.d_min()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return param(format!("noise level must be nonnegative, got {noise}"));
    }
    let bx = f.sampling_box();
    let x = sample_inputs(bx, m, d, &mut RngState::derive(seed, INPUT_STREAM));
    let y = noisy(f, x.as_ref(), noise, &mut RngState::derive(seed, NOISE_STREAM))?;
    let x_test = sample_inputs(bx, m, d, &mut RngState::derive(seed, TEST_INPUT_STREAM));
    let y_test = noisy(f, x_test.as_ref(), noise, &mut RngState::derive(seed, TEST_NOISE_STREAM))?;
    Dataset::split(x.as_ref(), &y, Some((x_test, y_test)), seed, noise)
}

/// Write samples as CSV with header `x0,...,x{d-1},y`.
pub fn write_csv<W: Write>(out: W, x: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return param(format!("{} rows but {} targets", x.nrows(), y.len()));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..x.ncols()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (i, yi) in y.iter().enumerate() {
        let mut rec: Vec<String> = (0..x.ncols()).map(|j| format!("{:?}", x[(i, j)])).collect();
        rec.push(format!("{yi:?}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read samples written by [`write_csv`]; the last column is the target.
pub fn read_csv<R: Read>(input: R) -> Result<(Mat<f64>, Vec<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width < 2 {
        return Err(Error::Data("CSV needs at least one feature column and a target".into()));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::Data(format!("row {} has {} fields, expected {width}", line + 1, rec.len())));
        }
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Data(format!("row {}: {e}", line + 1)))?;
        rows.push(vals);
    }
    let d = width - 1;
    let x = Mat::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let y = rows.iter().map(|r| r[d]).collect();
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_spot_values() {
        assert_eq!(TargetFunction::F3.eval_point(&[1.0; 10]), 1.0);
        assert_eq!(TargetFunction::F6.eval_point(&[0.0; 10]), 0.0);
        let v = TargetFunction::F2.eval_point(&[PI / 3.0, PI / 6.0, 0.0]);
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(TargetFunction::F1.eval_point(&[0.0]), 1.0);
        assert_eq!(sinc(0.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-16);
    }

    #[test]
    fn order_registry() {
        let q: Vec<usize> = TargetFunction::ALL[..7].iter().map(|f| f.q_star(10)).collect();
        assert_eq!(q, vec![1, 1, 2, 2, 3, 2, 2]);
        assert_eq!(TargetFunction::Fh2.q_star(10), 10);
    }

    #[test]
    fn names_parse() {
        for f in TargetFunction::ALL {
            assert_eq!(f.name().parse::<TargetFunction>().unwrap(), f);
        }
        assert_eq!("Ishigami".parse::<TargetFunction>().unwrap(), TargetFunction::F6);
        assert_eq!("fa1".parse::<TargetFunction>().unwrap(), TargetFunction::F7);
        assert!("f9".parse::<TargetFunction>().is_err());
    }

    #[test]
    fn evaluate_checks_width() {
        assert!(TargetFunction::F7.evaluate(Mat::zeros(2, 3).as_ref()).is_err());
        assert_eq!(TargetFunction::F7.evaluate(Mat::zeros(2, 4).as_ref()).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dataset_shapes_and_box() {
        let ds = make_dataset(TargetFunction::F6, 140, 10, 3, 0.0).unwrap();
        assert_eq!((ds.x_train.nrows(), ds.x_val.nrows(), ds.x_test.nrows()), (126, 14, 140));
        for x in [&ds.x_train, &ds.x_val, &ds.x_test] {
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    assert!(x[(i, j)].abs() <= PI);
                }
            }
        }
        assert!((0..ds.x_train.nrows()).any(|i| ds.x_train[(i, 0)].abs() > 1.0));
        let y = TargetFunction::F6.evaluate(ds.x_train.as_ref()).unwrap();
        assert_eq!(y, ds.y_train);
    }

    #[test]
    fn dataset_rejects_small_or_narrow() {
        assert!(make_dataset(TargetFunction::F2, 9, 2, 0, 0.0).is_err());
        assert!(make_dataset(TargetFunction::F4, 20, 2, 0, 0.0).is_err());
        assert!(make_dataset(TargetFunction::F2, 20, 2, 0, -1.0).is_err());
    }

    #[test]
    fn noise_perturbs_targets() {
        let ds = make_dataset(TargetFunction::F2, 200, 3, 1, 0.1).unwrap();
        let clean = TargetFunction::F2.evaluate(ds.x_train.as_ref()).unwrap();
        let r: Vec<f64> = ds.y_train.iter().zip(&clean).map(|(a, b)| a - b).collect();
        let sd = (r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64).sqrt();
        assert!((0.07..0.13).contains(&sd), "noise sd {sd}");
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let x = Mat::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0) * 1e-7);
        let y = vec![1.0 / 3.0, -2.5e300, 0.0];
        let mut buf = Vec::new();
        write_csv(&mut buf, x.as_ref(), &y).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x0,x1,y\n"));
        let (x2, y2) = read_csv(buf.as_slice()).unwrap();
        assert_eq!(y2, y);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(x2[(i, j)].to_bits(), x[(i, j)].to_bits());
            }
        }
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_csv("x0,y\n1,abc\n".as_bytes()).is_err());
        assert!(read_csv("y\n1\n".as_bytes()).is_err());
    }
}
