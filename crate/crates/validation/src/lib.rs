//! Helpers shared by the acceptance runner.

use std::time::Instant;

use shrimp_cli::run::ResultTable;
use shrimp_cli::ExperimentConfig;
use shrimp_core::Method;

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub id: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(id: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { id, passed, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        format!("{} [{}] {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.detail)
    }
}

/// Run `cfg` in a fresh temporary directory.
pub fn run_fresh(cfg: &ExperimentConfig) -> (ResultTable, f64) {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut cfg = cfg.clone();
    cfg.out = dir.path().to_path_buf();
    let start = Instant::now();
    let table = shrimp_cli::run_experiment(&cfg, 0).expect("experiment runs");
    (table, start.elapsed().as_secs_f64())
}

/// Mean test MSE of `method` at order `q` over every successful row.
pub fn mean_test(table: &ResultTable, method: Method, q: usize) -> f64 {
    let vals: Vec<f64> =
        table.filter(method).filter(|r| r.q == q && r.n_winner.is_some()).map(|r| r.test_mse).collect();
    if vals.is_empty() {
        f64::NAN
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn fmt_e(v: f64) -> String {
    format!("{v:.2e}")
}
