//! Grid execution, result tables and per-cell traces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shrimp_core::baselines::{
    default_eta_grid, naive_prune_run, random_prune_run, salsa_fit, srfe_s_run, AdditiveKernel, BpdnOptions,
    DEFAULT_LAMBDA_GRID,
};
use shrimp_core::diagnostics::{spectrum_through_pruning, support_report, DEFAULT_SUPPORT_TAU};
use shrimp_core::shrimp::{schedule, TraceRecord};
use shrimp_core::solve::mse;
use shrimp_core::{
    imp_run, make_dataset, predict, Dataset, FeatureBank, FitProblem, ImpOptions, ImpTrace, Method, PrunedModel,
    RngState,
};

use crate::config::{ExperimentConfig, Mode};
use crate::ingest::ingest_csv;

pub const RESULTS_HEADER: [&str; 9] =
    ["function", "method", "q", "p", "seed", "n_winner", "val_mse", "test_mse", "wall_ms"];

const BANK_STREAM: u64 = 0x5EED_0000;
const PRUNE_STREAM: u64 = 0x9A0E_0000;

/// One result cell. `n_winner` is `None` when the cell failed.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub function: String,
    pub method: Method,
    pub q: usize,
    pub p: f64,
    pub seed: u64,
    pub n_winner: Option<usize>,
    pub val_mse: f64,
    pub test_mse: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(RESULTS_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.function.clone(),
                r.method.tag().to_string(),
                r.q.to_string(),
                format!("{:?}", r.p),
                r.seed.to_string(),
                r.n_winner.map_or_else(|| "error".to_string(), |n| n.to_string()),
                format!("{:?}", r.val_mse),
                format!("{:?}", r.test_mse),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header != RESULTS_HEADER {
            bail!("{} does not have the results header", path.display());
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            rows.push(ResultRow {
                function: rec[0].to_string(),
                method: Method::from_tag(&rec[1]).with_context(|| format!("unknown method '{}'", &rec[1]))?,
                q: rec[2].parse()?,
                p: rec[3].parse()?,
                seed: rec[4].parse()?,
                n_winner: if &rec[5] == "error" { None } else { Some(rec[5].parse()?) },
                val_mse: rec[6].parse()?,
                test_mse: rec[7].parse()?,
                wall_ms: rec[8].parse()?,
            });
        }
        Ok(Self { rows })
    }

    pub fn filter(&self, method: Method) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Row with the lowest validation error across `q` for one `(method, p, seed)`;
    /// ties prefer the smaller `q`.
    pub fn selected(&self, method: Method, p: f64, seed: u64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.p == p && r.seed == seed && r.n_winner.is_some())
            .min_by(|a, b| a.val_mse.total_cmp(&b.val_mse).then(a.q.cmp(&b.q)))
    }

    /// Mean over seeds for every `(function, method, q, p)`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(String, Method, usize, u64), Vec<&ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            groups.entry((r.function.clone(), r.method, r.q, r.p.to_bits())).or_default().push(r);
        }
        groups
            .into_iter()
            .map(|((function, method, q, p), rows)| {
                let ok: Vec<&&ResultRow> = rows.iter().filter(|r| r.n_winner.is_some()).collect();
                let n = ok.len() as f64;
                SummaryRow {
                    function,
                    method,
                    q,
                    p: f64::from_bits(p),
                    runs: ok.len(),
                    failed: rows.len() - ok.len(),
                    mean_n_winner: ok.iter().map(|r| r.n_winner.unwrap_or(0) as f64).sum::<f64>() / n,
                    mean_val_mse: ok.iter().map(|r| r.val_mse).sum::<f64>() / n,
                    mean_test_mse: ok.iter().map(|r| r.test_mse).sum::<f64>() / n,
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub function: String,
    pub method: Method,
    pub q: usize,
    pub p: f64,
    pub runs: usize,
    pub failed: usize,
    pub mean_n_winner: f64,
    pub mean_val_mse: f64,
    pub mean_test_mse: f64,
}

fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// A trace file: the dataset label plus the trace schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTrace {
    pub function: String,
    #[serde(flatten)]
    pub record: TraceRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    config: ExperimentConfig,
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = serde_json::to_string(cfg).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Thread count from the flag, else `SHRIMP_THREADS`, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("SHRIMP_THREADS").ok().and_then(|v| v.parse().ok())).unwrap_or(0)
}

pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<Dataset> {
    match cfg.mode {
        Mode::Synthetic => {
            let f = cfg.function.context("synthetic mode needs a function")?;
            Ok(make_dataset(f, cfg.m, cfg.d, seed, cfg.noise)?)
        }
        Mode::Csv => {
            let path = cfg.data_path.as_deref().context("csv mode needs data_path")?;
            let target = cfg.target.as_deref().unwrap_or("y");
            ingest_csv(path, target, cfg.standardize, seed, cfg.test_path.as_deref())
        }
    }
}

/// The feature bank every method shares for one `(seed, q)` cell.
pub fn cell_bank(cfg: &ExperimentConfig, d: usize, seed: u64, q: usize) -> Result<FeatureBank> {
    let mut rng = RngState::derive(seed, BANK_STREAM + q as u64);
    Ok(FeatureBank::sample(d, q, cfg.n_features, cfg.sigma2.value(q), &mut rng)?)
}

fn p_dependent(method: Method) -> bool {
    matches!(method, Method::Shrimp | Method::RandomPrune | Method::NaivePrune)
}

fn trace_name(label: &str, method: Method, q: usize, p: Option<f64>, seed: u64) -> String {
    match p {
        Some(p) => format!("{label}_{}_q{q}_p{p}_s{seed}", method.tag()),
        None => format!("{label}_{}_q{q}_s{seed}", method.tag()),
    }
}

struct Outcome {
    trace: ImpTrace,
    wall_ms: f64,
}

fn timed(f: impl FnOnce() -> Result<ImpTrace>) -> Result<Outcome> {
    let start = Instant::now();
    let trace = f()?;
    Ok(Outcome { trace, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

fn salsa_trace(
    data: &Dataset,
    q: usize,
    cfg: &ExperimentConfig,
    problem_cfg: shrimp_core::shrimp::TraceConfig,
) -> Result<ImpTrace> {
    let kernel = AdditiveKernel { q, sigma2: cfg.sigma2.value(q), normalized: true };
    let model = salsa_fit(
        data.x_train.as_ref(),
        &data.y_train,
        data.x_val.as_ref(),
        &data.y_val,
        kernel,
        &DEFAULT_LAMBDA_GRID,
    )?;
    let train = mse(&model.predict(data.x_train.as_ref())?, &data.y_train);
    let test =
        if data.y_test.is_empty() { None } else { Some(mse(&model.predict(data.x_test.as_ref())?, &data.y_test)) };
    let pruned = PrunedModel {
        step: 0,
        active: (0..data.y_train.len()).collect(),
        coefficients: model.alpha.clone(),
        train_mse: train,
        val_mse: model.val_mse,
        test_mse: test,
    };
    Ok(ImpTrace::new(Method::Salsa, vec![pruned], 0.0, problem_cfg)?)
}

fn union_schedule(k: usize, cfg: &ExperimentConfig) -> Vec<usize> {
    let mut sizes: Vec<usize> = cfg.p.iter().flat_map(|p| schedule(k, p / 100.0, cfg.max_steps)).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();
    sizes
}

struct Cell<'a> {
    cfg: &'a ExperimentConfig,
    label: String,
    seed: u64,
    q: usize,
    out: &'a Path,
}

impl Cell<'_> {
    fn row(&self, method: Method, p: f64, outcome: Option<&Outcome>) -> ResultRow {
        let (n_winner, val, test, wall) = match outcome {
            Some(o) => {
                let w = o.trace.winner();
                (Some(w.sparsity()), w.val_mse, w.test_mse.unwrap_or(f64::NAN), o.wall_ms)
            }
            None => (None, f64::NAN, f64::NAN, f64::NAN),
        };
        ResultRow {
            function: self.label.clone(),
            method,
            q: self.q,
            p,
            seed: self.seed,
            n_winner,
            val_mse: val,
            test_mse: test,
            wall_ms: wall,
        }
    }

    fn save(&self, name: &str, outcome: &Outcome) -> Result<()> {
        let record = CellTrace { function: self.label.clone(), record: outcome.trace.to_record() };
        let path = self.out.join("traces").join(format!("{name}.json"));
        fs::write(&path, serde_json::to_string_pretty(&record)?).with_context(|| format!("writing {}", path.display()))
    }

    fn diagnose(&self, name: &str, outcome: &Outcome, problem: &FitProblem, bank: &FeatureBank) -> Result<()> {
        let dir = self.out.join("diagnostics");
        let spectrum = spectrum_through_pruning(&outcome.trace, &problem.train)?;
        spectrum.write_csv(fs::File::create(dir.join(format!("{name}_spectrum.csv")))?)?;
        if outcome.trace.method == Method::Shrimp {
            let report = support_report(outcome.trace.winner(), bank, DEFAULT_SUPPORT_TAU)?;
            report.write_csv(fs::File::create(dir.join(format!("{name}_support.csv")))?)?;
        }
        Ok(())
    }

    fn record(
        &self,
        method: Method,
        p: Option<f64>,
        result: Result<Outcome>,
        rows: &mut Vec<ResultRow>,
    ) -> Option<Outcome> {
        let name = trace_name(&self.label, method, self.q, p, self.seed);
        let outcome = match result.and_then(|o| self.save(&name, &o).map(|_| o)) {
            Ok(o) => Some(o),
            Err(e) => {
                log::error!("cell {name} failed: {e:#}");
                None
            }
        };
        let ps: Vec<f64> = p.map_or_else(|| self.cfg.p.clone(), |p| vec![p]);
        rows.extend(ps.into_iter().map(|p| self.row(method, p, outcome.as_ref())));
        outcome
    }

    fn run(&self) -> Vec<ResultRow> {
        let cfg = self.cfg;
        let mut rows = Vec::new();
        let setup = load_dataset(cfg, self.seed).and_then(|data| {
            if self.q > data.d() {
                bail!("q={} exceeds the data dimension {}", self.q, data.d());
            }
            let bank = cell_bank(cfg, data.d(), self.seed, self.q)?;
            let problem = FitProblem::new(&bank, &data)?;
            Ok((data, bank, problem))
        });
        let (data, bank, problem) = match setup {
            Ok(s) => s,
            Err(e) => {
                log::error!("cell {} q={} seed={} failed to set up: {e:#}", self.label, self.q, self.seed);
                for &method in &cfg.methods {
                    for &p in &cfg.p {
                        rows.push(self.row(method, p, None));
                    }
                }
                return rows;
            }
        };
        for &method in &cfg.methods {
            if p_dependent(method) {
                for &p in &cfg.p {
                    let options = ImpOptions { prune_rate: p / 100.0, max_steps: cfg.max_steps, rtol: None };
                    let result = timed(|| match method {
                        Method::Shrimp => Ok(imp_run(&problem, &options)?),
                        Method::RandomPrune => {
                            let mut rng = RngState::derive(self.seed, PRUNE_STREAM + self.q as u64).split(p.to_bits());
                            Ok(random_prune_run(&problem, &options, &mut rng)?)
                        }
                        _ => Ok(naive_prune_run(&problem, &options)?),
                    });
                    let name = trace_name(&self.label, method, self.q, Some(p), self.seed);
                    if let Some(o) = self.record(method, Some(p), result, &mut rows) {
                        if cfg.diagnostics && method != Method::NaivePrune {
                            if let Err(e) = self.diagnose(&name, &o, &problem, &bank) {
                                log::warn!("diagnostics for {name} failed: {e:#}");
                            }
                        }
                    }
                }
            } else {
                let result = timed(|| match method {
                    Method::MinL2 => {
                        let model = problem.fit(0, (0..problem.n_columns()).collect(), None)?;
                        Ok(ImpTrace::new(Method::MinL2, vec![model], 0.0, problem.config)?)
                    }
                    Method::SrfeS => {
                        let etas = if cfg.noise == 0.0 && cfg.mode == Mode::Synthetic {
                            vec![0.0]
                        } else {
                            default_eta_grid(&problem.y_train)
                        };
                        let sizes = union_schedule(problem.n_columns(), cfg);
                        Ok(srfe_s_run(&problem, &etas, &sizes, &BpdnOptions::default())?)
                    }
                    _ => salsa_trace(&data, self.q, cfg, problem.config),
                });
                self.record(method, None, result, &mut rows);
            }
        }
        rows
    }
}

/// Run every `(seed, q)` cell of `cfg` and write `results.csv`, `summary.csv`,
/// per-cell traces and a manifest under `cfg.out`.
///
/// A directory whose manifest matches the config hash is returned as is.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<ResultTable> {
    cfg.validate()?;
    let out = cfg.out.clone();
    let hash = config_hash(cfg);
    let manifest_path = out.join("manifest.json");
    let results_path = out.join("results.csv");
    if let Ok(text) = fs::read_to_string(&manifest_path) {
        if let Ok(m) = serde_json::from_str::<Manifest>(&text) {
            if m.config_hash == hash && results_path.exists() {
                log::info!("{} already holds this experiment; nothing to do", out.display());
                return ResultTable::read_csv(&results_path);
            }
        }
    }
    fs::create_dir_all(out.join("traces"))?;
    if cfg.diagnostics {
        fs::create_dir_all(out.join("diagnostics"))?;
    }
    let label = cfg.label();
    let units: Vec<(u64, usize)> = cfg.seeds.iter().flat_map(|&s| cfg.q.iter().map(move |&q| (s, q))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let mut rows: Vec<ResultRow> = pool.install(|| {
        units
            .par_iter()
            .flat_map_iter(|&(seed, q)| Cell { cfg, label: label.clone(), seed, q, out: &out }.run())
            .collect()
    });
    rows.sort_by(|a, b| (a.method, a.q, a.seed).cmp(&(b.method, b.q, b.seed)).then(a.p.total_cmp(&b.p)));
    let table = ResultTable { rows };
    table.write_csv(&results_path)?;
    write_summary(&table.summary(), &out.join("summary.csv"))?;
    let manifest = Manifest { config_hash: hash, config: cfg.clone() };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(table)
}

/// Recompute a trace's winner test MSE from the config and the trace file alone.
pub fn replay_test_mse(cfg: &ExperimentConfig, trace_path: &Path) -> Result<f64> {
    let cell: CellTrace = serde_json::from_str(&fs::read_to_string(trace_path)?)?;
    let record = &cell.record;
    if record.method == Method::Salsa {
        bail!("kernel ridge traces hold dual coefficients and cannot be replayed through the feature bank");
    }
    let seed = record.config.seed;
    let data = load_dataset(cfg, seed)?;
    let bank = cell_bank(cfg, data.d(), seed, record.config.q)?;
    let model = PrunedModel {
        step: record.winner.t_star,
        active: record.winner.active.clone(),
        coefficients: record.winner.coefficients.clone(),
        train_mse: f64::NAN,
        val_mse: record.winner.val_mse,
        test_mse: record.winner.test_mse,
    };
    let pred = predict(&model, &bank, data.x_test.as_ref())?;
    Ok(mse(&pred, &data.y_test))
}

pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}
