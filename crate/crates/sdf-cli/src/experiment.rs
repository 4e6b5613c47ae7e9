//! Repetition-averaged accuracy experiments: weighted cascade vs the
//! uniform-weight baseline on shared pair splits.
//!
//! Per repetition a fresh pair set is drawn and split; every model variant
//! (baseline, plus one weighted run per lambda) trains on the same split
//! with the same seed, so accuracy differences isolate the tree weights.
//! Reports are canonical JSON and reproduce byte-for-byte for a fixed spec
//! and seed; wall-clock timings go to the text table only.

use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use sdf_core::seed::{self, tag};
use sdf_core::{
    generate_pairs, split_pairs, test_size, train_cascade, CascadeConfig, LabelColumn,
    LabeledDataset, PairDataset, Result, SdfModel, Verdict,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Gcf,
    Sdf,
    Both,
}

impl Mode {
    fn runs_gcf(self) -> bool {
        self != Mode::Sdf
    }

    fn runs_sdf(self) -> bool {
        self != Mode::Gcf
    }
}

/// Full experiment specification.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    #[serde(skip)]
    pub label_col: LabelColumn,
    #[serde(skip)]
    pub has_header: bool,
    pub t_values: Vec<usize>,
    pub n_values: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub lambdas: Vec<f64>,
    pub mode: Mode,
    pub tau: f64,
    pub balance: f64,
    #[serde(skip)]
    pub base: CascadeConfig,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(sdf_core::Error::config("repetitions must be at least 1".to_string()));
        }
        if self.t_values.is_empty() || self.n_values.is_empty() {
            return Err(sdf_core::Error::config(
                "need at least one T and one N value".to_string(),
            ));
        }
        if self.mode.runs_sdf() && self.lambdas.is_empty() {
            return Err(sdf_core::Error::config(
                "weighted mode needs at least one lambda".to_string(),
            ));
        }
        self.base.validate()
    }
}

/// Accuracies of one (T, N, mode, lambda) cell across repetitions.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub t: usize,
    pub n: usize,
    pub mode: &'static str,
    pub lambda: Option<f64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Per-(T, N) roll-up with the tuned (best mean) lambda for the weighted run.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub t: usize,
    pub n: usize,
    pub gcf_mean: Option<f64>,
    pub sdf_mean: Option<f64>,
    pub sdf_lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellResult>,
    pub summary: Vec<CellSummary>,
}

/// Fraction of verdicts matching the pair labels; undetermined verdicts
/// count as errors.
pub fn accuracy(verdicts: &[sdf_core::PairVerdict], labels: &[u8]) -> f64 {
    let correct = verdicts
        .iter()
        .zip(labels)
        .filter(|(v, &y)| match v.label {
            Verdict::Similar => y == 0,
            Verdict::Dissimilar => y == 1,
            Verdict::Undetermined => false,
        })
        .count();
    correct as f64 / labels.len().max(1) as f64
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_dev = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    };
    (mean, std_dev)
}

struct Variant {
    mode: &'static str,
    lambda: Option<f64>,
}

/// Train one variant and score it on the shared test split.
fn run_variant(
    ds: &LabeledDataset,
    train: &PairDataset,
    test: &PairDataset,
    spec: &ExperimentSpec,
    t: usize,
    cascade_seed: u64,
    variant: &Variant,
) -> Result<f64> {
    let mut cfg = spec.base.clone();
    cfg.trees_per_forest = t;
    cfg.seed = cascade_seed;
    cfg.tau = spec.tau;
    match variant.lambda {
        None => cfg.baseline = true,
        Some(lambda) => {
            cfg.baseline = false;
            cfg.qp.lambda = lambda;
        }
    }
    let (model, _): (SdfModel, _) = train_cascade(ds, train, &cfg)?;
    let verdicts = model.predict_batch_with_tau(ds, test, spec.tau)?;
    Ok(accuracy(&verdicts, &test.labels()))
}

/// Run the whole grid. The text table (with timings) goes to stdout unless
/// `quiet`; the returned report carries only deterministic fields.
pub fn run_experiment(spec: &ExperimentSpec, quiet: bool) -> Result<ExperimentReport> {
    spec.validate()?;
    let ds = sdf_core::load_csv(&spec.dataset, spec.label_col, spec.has_header)?;

    let mut variants: Vec<Variant> = Vec::new();
    if spec.mode.runs_gcf() {
        variants.push(Variant {
            mode: "gcf",
            lambda: None,
        });
    }
    if spec.mode.runs_sdf() {
        for &lambda in &spec.lambdas {
            variants.push(Variant {
                mode: "sdf",
                lambda: Some(lambda),
            });
        }
    }

    if !quiet {
        println!(
            "dataset {} ({} samples, {} features, {} classes)  reps={} seed={} balance={} tau={}",
            spec.dataset.display(),
            ds.len(),
            ds.d(),
            ds.n_classes(),
            spec.repetitions,
            spec.seed,
            spec.balance,
            spec.tau
        );
    }

    let mut cells = Vec::new();
    let mut summary = Vec::new();
    for &t in &spec.t_values {
        for &n in &spec.n_values {
            let started = Instant::now();
            let mut per_variant: Vec<Vec<f64>> = vec![Vec::new(); variants.len()];
            for rep in 0..spec.repetitions {
                let n_pairs = n + test_size(n);
                let pair_seed = seed::derive(spec.seed, &[tag::PAIRS, n as u64, rep as u64]);
                let split_seed = seed::derive(spec.seed, &[tag::SPLIT, n as u64, rep as u64]);
                let cascade_seed = seed::derive(
                    spec.seed,
                    &[tag::CASCADE, t as u64, n as u64, rep as u64],
                );
                let pool = generate_pairs(&ds, n_pairs, spec.balance, pair_seed)?;
                let (train, test) = split_pairs(&pool, n, split_seed)?;
                for (accs, variant) in per_variant.iter_mut().zip(&variants) {
                    accs.push(run_variant(
                        &ds,
                        &train,
                        &test,
                        spec,
                        t,
                        cascade_seed,
                        variant,
                    )?);
                }
            }

            let mut gcf_mean = None;
            let mut best_sdf: Option<(f64, f64)> = None; // (mean, lambda)
            let mut line = format!("T={t:<5} N={n:<5}");
            for (accs, variant) in per_variant.iter().zip(&variants) {
                let (mean, std_dev) = mean_and_std(accs);
                match variant.lambda {
                    None => {
                        gcf_mean = Some(mean);
                        line.push_str(&format!("  gcf {mean:.4} (sd {std_dev:.4})"));
                    }
                    Some(lambda) => {
                        if best_sdf.is_none_or(|(m, _)| mean > m) {
                            best_sdf = Some((mean, lambda));
                        }
                        line.push_str(&format!("  sdf[{lambda}] {mean:.4} (sd {std_dev:.4})"));
                    }
                }
                cells.push(CellResult {
                    t,
                    n,
                    mode: variant.mode,
                    lambda: variant.lambda,
                    accuracies: accs.clone(),
                    mean,
                    std_dev,
                });
            }
            summary.push(CellSummary {
                t,
                n,
                gcf_mean,
                sdf_mean: best_sdf.map(|(m, _)| m),
                sdf_lambda: best_sdf.map(|(_, l)| l),
            });
            if !quiet {
                if let Some((mean, lambda)) = best_sdf {
                    line.push_str(&format!("  best sdf {mean:.4} (lambda {lambda})"));
                }
                println!("{line}  [{:.1}s]", started.elapsed().as_secs_f64());
            }
        }
    }

    Ok(ExperimentReport {
        spec: spec.clone(),
        cells,
        summary,
    })
}
