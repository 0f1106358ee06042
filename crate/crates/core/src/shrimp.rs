//! Iterative magnitude pruning with minimum-norm refits, winner selection, and prediction.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::features::{design, design_columns, DesignMatrix, FeatureBank};
use crate::solve::{min_norm_lsq, mse};
use crate::synthetic::Dataset;

/// Which fitter produced a trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Shrimp,
    MinL2,
    RandomPrune,
    NaivePrune,
    SrfeS,
    Salsa,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Shrimp, Method::MinL2, Method::RandomPrune, Method::NaivePrune, Method::SrfeS, Method::Salsa];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Shrimp => "shrimp",
            Method::MinL2 => "min_l2",
            Method::RandomPrune => "random_prune",
            Method::NaivePrune => "naive_prune",
            Method::SrfeS => "srfe_s",
            Method::Salsa => "salsa",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Parameters a trace was produced under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub q: usize,
    pub sigma2: f64,
    pub n_features: usize,
    pub seed: u64,
}

/// Train/validation (and optional test) dictionaries built from one feature bank.
#[derive(Clone, Debug)]
pub struct FitProblem {
    pub train: DesignMatrix,
    pub y_train: Vec<f64>,
    pub val: DesignMatrix,
    pub y_val: Vec<f64>,
    pub test: Option<(DesignMatrix, Vec<f64>)>,
    pub config: TraceConfig,
}

impl FitProblem {
    pub fn new(bank: &FeatureBank, data: &Dataset) -> Result<Self> {
        let test = if data.x_test.nrows() > 0 {
            Some((design(bank, data.x_test.as_ref())?, data.y_test.clone()))
        } else {
            None
        };
        Self::from_designs(
            design(bank, data.x_train.as_ref())?,
            data.y_train.clone(),
            design(bank, data.x_val.as_ref())?,
            data.y_val.clone(),
            test,
            TraceConfig { q: bank.q(), sigma2: bank.sigma2(), n_features: bank.len(), seed: data.seed },
        )
    }

    pub fn from_designs(
        train: DesignMatrix,
        y_train: Vec<f64>,
        val: DesignMatrix,
        y_val: Vec<f64>,
        test: Option<(DesignMatrix, Vec<f64>)>,
        config: TraceConfig,
    ) -> Result<Self> {
        if train.nrows() != y_train.len() || val.nrows() != y_val.len() {
            return param("design rows do not match target lengths");
        }
        if val.ncols() != train.ncols() {
            return param("validation dictionary width differs from training dictionary");
        }
        if let Some((t, y)) = &test {
            if t.ncols() != train.ncols() || t.nrows() != y.len() {
                return param("test dictionary does not match the training dictionary");
            }
        }
        Ok(Self { train, y_train, val, y_val, test, config })
    }

    pub fn n_columns(&self) -> usize {
        self.train.ncols()
    }

    /// Minimum-norm fit on `active` (sorted column positions), scored on every split.
    pub fn fit(&self, step: usize, active: Vec<usize>, rtol: Option<f64>) -> Result<PrunedModel> {
        if active.is_empty() {
            return param("cannot fit an empty active set");
        }
        let sol = if active.len() == self.n_columns() {
            min_norm_lsq(self.train.matrix(), &self.y_train, rtol)?
        } else {
            min_norm_lsq(self.train.restrict(&active)?.matrix(), &self.y_train, rtol)?
        };
        let train_mse = sol.residual_norm.powi(2) / self.y_train.len() as f64;
        Ok(self.score(step, active, sol.coefficients, Some(train_mse)))
    }

    /// Wrap fixed coefficients as a model and compute its errors.
    pub fn score(
        &self,
        step: usize,
        active: Vec<usize>,
        coefficients: Vec<f64>,
        train_mse: Option<f64>,
    ) -> PrunedModel {
        let train_mse = train_mse.unwrap_or_else(|| mse(&combine(&self.train, &active, &coefficients), &self.y_train));
        let val_mse = mse(&combine(&self.val, &active, &coefficients), &self.y_val);
        let test_mse = self.test.as_ref().map(|(t, y)| mse(&combine(t, &active, &coefficients), y));
        PrunedModel { step, active, coefficients, train_mse, val_mse, test_mse }
    }
}

/// `Σ_j c_j a_{active[j]}` over columns of `design`.
pub(crate) fn combine(design: &DesignMatrix, active: &[usize], coefficients: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; design.nrows()];
    for (&col, &c) in active.iter().zip(coefficients) {
        if c != 0.0 {
            for (o, &a) in out.iter_mut().zip(design.column(col)) {
                *o += c * a;
            }
        }
    }
    out
}

/// Coefficients over an active set of dictionary columns, with its errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrunedModel {
    pub step: usize,
    /// Column positions in the full dictionary, ascending.
    pub active: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: Option<f64>,
}

impl PrunedModel {
    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    /// Number of nonzero coefficients.
    pub fn sparsity(&self) -> usize {
        self.coefficients.iter().filter(|c| **c != 0.0).count()
    }
}

/// The sequence of pruned models from one run and the validation winner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpTrace {
    pub method: Method,
    pub models: Vec<PrunedModel>,
    pub winner: usize,
    pub prune_rate: f64,
    pub config: TraceConfig,
}

impl ImpTrace {
    pub fn new(method: Method, models: Vec<PrunedModel>, prune_rate: f64, config: TraceConfig) -> Result<Self> {
        if models.is_empty() {
            return param("a trace needs at least one model");
        }
        let winner = select_winner(&models);
        Ok(Self { method, models, winner, prune_rate, config })
    }

    pub fn winner(&self) -> &PrunedModel {
        &self.models[self.winner]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.models.iter().map(PrunedModel::n_active).collect()
    }

    pub fn to_record(&self) -> TraceRecord {
        let w = self.winner();
        TraceRecord {
            method: self.method,
            config: self.config,
            steps: self
                .models
                .iter()
                .map(|m| StepRecord {
                    t: m.step,
                    n_active: m.n_active(),
                    train_mse: m.train_mse,
                    val_mse: m.val_mse,
                    test_mse: m.test_mse,
                })
                .collect(),
            winner: WinnerRecord {
                t_star: w.step,
                q: self.config.q,
                p: self.prune_rate,
                sparsity: w.sparsity(),
                val_mse: w.val_mse,
                test_mse: w.test_mse,
                active: w.active.clone(),
                coefficients: w.coefficients.clone(),
            },
        }
    }
}

/// JSON form of a trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub method: Method,
    pub config: TraceConfig,
    pub steps: Vec<StepRecord>,
    pub winner: WinnerRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub n_active: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_mse: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinnerRecord {
    pub t_star: usize,
    pub q: usize,
    pub p: f64,
    pub sparsity: usize,
    pub val_mse: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test_mse: Option<f64>,
    pub active: Vec<usize>,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpOptions {
    /// Fraction of active columns removed per step, in `(0, 1)`.
    pub prune_rate: f64,
    /// Stop after this many pruning steps even if more than one column remains.
    pub max_steps: Option<usize>,
    /// Singular-value cutoff passed to every refit.
    pub rtol: Option<f64>,
}

impl ImpOptions {
    pub fn new(prune_rate: f64) -> Self {
        Self { prune_rate, max_steps: None, rtol: None }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.prune_rate > 0.0 && self.prune_rate < 1.0) {
            return param(format!("prune rate must lie in (0, 1), got {}", self.prune_rate));
        }
        Ok(())
    }
}

/// Active-set size after one pruning step from `current` columns.
///
/// `max(round((1 − p)·current), 1)`, capped at `current − 1` so every step
/// removes at least one column.
pub fn next_size(current: usize, prune_rate: f64) -> usize {
    if current <= 1 {
        return current;
    }
    let kept = ((1.0 - prune_rate) * current as f64).round() as usize;
    kept.clamp(1, current - 1)
}

/// Active-set sizes `|P_0|, |P_1|, …` down to one column (or `max_steps` steps).
pub fn schedule(n0: usize, prune_rate: f64, max_steps: Option<usize>) -> Vec<usize> {
    let mut sizes = vec![n0];
    let mut k = n0;
    while k > 1 && max_steps.is_none_or(|cap| sizes.len() <= cap) {
        k = next_size(k, prune_rate);
        sizes.push(k);
    }
    sizes
}

/// Keep the `keep` largest-magnitude entries of `active`; ties at the cut drop
/// the lower column index. Returns the kept columns ascending with their
/// coefficients.
pub(crate) fn keep_largest(active: &[usize], coefficients: &[f64], keep: usize) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by(|&a, &b| coefficients[a].abs().total_cmp(&coefficients[b].abs()).then(active[a].cmp(&active[b])));
    let mut kept: Vec<usize> = order[active.len() - keep..].to_vec();
    kept.sort_unstable();
    (kept.iter().map(|&i| active[i]).collect(), kept.iter().map(|&i| coefficients[i]).collect())
}

/// Stage II: fit, prune the smallest-magnitude coefficients, refit, repeat.
pub fn imp_run(problem: &FitProblem, options: &ImpOptions) -> Result<ImpTrace> {
    options.validate()?;
    let k = problem.n_columns();
    if k == 0 {
        return param("the dictionary has no columns to prune");
    }
    let mut models = vec![problem.fit(0, (0..k).collect(), options.rtol)?];
    for (step, &size) in schedule(k, options.prune_rate, options.max_steps).iter().enumerate().skip(1) {
        let prev = models.last().expect("nonempty");
        let (active, _) = keep_largest(&prev.active, &prev.coefficients, size);
        models.push(problem.fit(step, active, options.rtol)?);
    }
    ImpTrace::new(Method::Shrimp, models, options.prune_rate, problem.config)
}

fn val_key(m: &PrunedModel) -> f64 {
    if m.val_mse.is_nan() {
        f64::INFINITY
    } else {
        m.val_mse
    }
}

/// Index of the lowest validation error; ties go to the later (sparser) model.
pub fn select_winner(models: &[PrunedModel]) -> usize {
    let mut best = 0;
    for (i, m) in models.iter().enumerate() {
        if val_key(m) <= val_key(&models[best]) {
            best = i;
        }
    }
    best
}

/// Global validation winner over several traces: `(trace index, model index)`.
///
/// Ties prefer the smaller `q`, then the later step.
pub fn select_model(traces: &[ImpTrace]) -> Result<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (ti, trace) in traces.iter().enumerate() {
        for (mi, model) in trace.models.iter().enumerate() {
            let better = match best {
                None => true,
                Some((bt, bm)) => {
                    let incumbent = &traces[bt].models[bm];
                    let (v, bv) = (val_key(model), val_key(incumbent));
                    v < bv
                        || (v == bv
                            && (trace.config.q < traces[bt].config.q
                                || (trace.config.q == traces[bt].config.q && model.step > incumbent.step)))
                }
            };
            if better {
                best = Some((ti, mi));
            }
        }
    }
    best.ok_or_else(|| crate::Error::Parameter("no traces to select from".into()))
}

/// Evaluate `model` on new inputs, building only its active feature columns.
pub fn predict(model: &PrunedModel, bank: &FeatureBank, x: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let columns = model.active.iter().map(|&c| bank.column_meta(c)).collect::<Result<Vec<_>>>()?;
    let a = design_columns(bank, x, &columns)?;
    Ok(a.apply(&model.coefficients))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionStats {
    /// `(q + 1) · s` stored numbers for the pruned model.
    pub sparse_nonzeros: usize,
    /// `(d + 1) · N` for a dense random feature model of the same width.
    pub dense_nonzeros: usize,
    pub ratio: f64,
}

pub fn compression_stats(model: &PrunedModel, bank: &FeatureBank) -> CompressionStats {
    let s = model.sparsity();
    let sparse_nonzeros = (bank.q() + 1) * s;
    let dense_nonzeros = (bank.d() + 1) * bank.len();
    CompressionStats { sparse_nonzeros, dense_nonzeros, ratio: sparse_nonzeros as f64 / dense_nonzeros as f64 }
}
