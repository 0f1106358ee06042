//! Wall-clock comparison of the pruning loop against basis pursuit.

use std::time::Instant;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use shrimp_core::baselines::{bpdn_solve, BpdnOptions, BpdnProblem};
use shrimp_core::{imp_run, make_dataset, FeatureBank, FitProblem, ImpOptions, RngState, TargetFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub function: TargetFunction,
    pub d: usize,
    pub q: usize,
    pub m: Vec<usize>,
    pub n_features: Vec<usize>,
    pub prune_rate: f64,
    pub repeats: usize,
    pub seed: u64,
    pub bpdn: BpdnOptions,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            function: TargetFunction::Fs,
            d: 5,
            q: 1,
            m: vec![1000],
            n_features: vec![2000, 8000],
            prune_rate: 0.2,
            repeats: 3,
            seed: 0,
            bpdn: BpdnOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: String,
    pub m: usize,
    pub n_features: usize,
    pub median_ms: f64,
    pub runs_ms: Vec<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_runs(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<(f64, Vec<f64>)> {
    let mut runs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        runs.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mut sorted = runs.clone();
    Ok((median(&mut sorted), runs))
}

/// Median solve time of a full pruning trace and of one BPDN solve for every
/// `(m, N)` cell. Data generation and dictionary construction are not timed.
pub fn time_comparison(cfg: &TimingConfig) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &m in &cfg.m {
        for &n in &cfg.n_features {
            let mut data = make_dataset(cfg.function, m, cfg.d, cfg.seed, 0.0)?;
            data.x_test = faer::Mat::zeros(0, cfg.d);
            data.y_test.clear();
            let bank = FeatureBank::sample(cfg.d, cfg.q, n, 1.0 / cfg.q as f64, &mut RngState::derive(cfg.seed, 7))?;
            let problem = FitProblem::new(&bank, &data)?;
            let options = ImpOptions::new(cfg.prune_rate);
            let (median_ms, runs_ms) = time_runs(cfg.repeats, || {
                imp_run(&problem, &options)?;
                Ok(())
            })?;
            rows.push(TimingRow { method: "shrimp".into(), m, n_features: n, median_ms, runs_ms });
            let bp = BpdnProblem { a: problem.train.matrix(), y: &problem.y_train, eta: 0.0, sparsity: 1 };
            let (median_ms, runs_ms) = time_runs(cfg.repeats, || {
                bpdn_solve(&bp, &cfg.bpdn)?;
                Ok(())
            })?;
            rows.push(TimingRow { method: "bpdn".into(), m, n_features: n, median_ms, runs_ms });
        }
    }
    Ok(rows)
}

pub fn write_timing_csv(rows: &[TimingRow], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "m", "n_features", "median_ms", "runs_ms"])?;
    for r in rows {
        let runs: Vec<String> = r.runs_ms.iter().map(|v| format!("{v:.3}")).collect();
        w.write_record([
            r.method.clone(),
            r.m.to_string(),
            r.n_features.to_string(),
            format!("{:.3}", r.median_ms),
            runs.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
