//! Greedy level-by-level cascade training and pair inference.
//!
//! Each level holds `M` forest slots (half Gini, half completely random),
//! replicated over `cv_folds` folds. A training pair's class vectors always
//! come from the fold forest that held it out; at inference the fold outputs
//! are averaged. Per (slot, fold) forest, tree weights are fitted on that
//! forest's own out-of-fold `P` matrix. Levels are added while the held-out
//! validation accuracy keeps improving, and the best prefix is returned.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledDataset, PairDataset, Sample};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Forest};
use crate::matrix::Matrix;
use crate::scanning::{fit_scanners, transform_pair, ScanConfig, Scanners};
use crate::seed::{self, tag};
use crate::trees::{TreeConfig, TreeKind};
use crate::weightopt::{build_p_matrix, solve_weights, QpConfig};

/// Per-level scaling schedule for the sign variable of the `P` matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZSchedule {
    /// Multiplier 1 at every level.
    Constant,
    /// Multiplier doubles per level: `2^(level-1)`.
    Doubling,
}

/// How augmented features chain between levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    /// Raw pair section plus the current level's class vectors; width stays
    /// `2d + 2M` from level 2 on.
    Replace,
    /// Whole input plus the class vectors; width grows by `2M` per level.
    Accumulate,
}

/// Cascade settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeConfig {
    pub max_levels: usize,
    /// Forest slots per level; half random-forest, half completely-random.
    pub forests_per_level: usize,
    pub trees_per_forest: usize,
    pub cv_folds: usize,
    pub qp: QpConfig,
    pub z_schedule: ZSchedule,
    pub augmentation: Augmentation,
    /// Fraction of training pairs held out to decide the level count.
    pub val_fraction: f64,
    /// Minimum validation-accuracy gain required to keep adding levels.
    pub epsilon_gain: f64,
    /// Decision threshold for inference.
    pub tau: f64,
    pub seed: u64,
    /// Keep all weights uniform and skip the weight solve (the plain
    /// unweighted-cascade baseline).
    pub baseline: bool,
    pub scanning: ScanConfig,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            max_levels: 10,
            forests_per_level: 4,
            trees_per_forest: 100,
            cv_folds: 3,
            qp: QpConfig::default(),
            z_schedule: ZSchedule::Constant,
            augmentation: Augmentation::Replace,
            val_fraction: 0.2,
            epsilon_gain: 0.0,
            tau: 0.0,
            seed: 0,
            baseline: false,
            scanning: ScanConfig::disabled(),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_levels < 1 {
            return Err(Error::config("max_levels must be at least 1".to_string()));
        }
        if self.forests_per_level < 2 || self.forests_per_level % 2 != 0 {
            return Err(Error::config(format!(
                "forests_per_level must be even and at least 2, got {}",
                self.forests_per_level
            )));
        }
        if self.trees_per_forest < 1 {
            return Err(Error::config("trees_per_forest must be at least 1".to_string()));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("cv_folds must be at least 2".to_string()));
        }
        if !(0.0..=0.5).contains(&self.val_fraction) {
            return Err(Error::config(format!(
                "val_fraction must lie in [0, 0.5], got {}",
                self.val_fraction
            )));
        }
        if !self.epsilon_gain.is_finite() || self.epsilon_gain < 0.0 {
            return Err(Error::config(format!(
                "epsilon_gain must be finite and nonnegative, got {}",
                self.epsilon_gain
            )));
        }
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::config(format!(
                "tau must be finite and nonnegative, got {}",
                self.tau
            )));
        }
        self.qp.validate()
    }

    /// `z` multiplier for a 1-based level number.
    pub fn z_multiplier_at(&self, level: usize) -> f64 {
        match self.z_schedule {
            ZSchedule::Constant => self.qp.z_multiplier,
            ZSchedule::Doubling => self.qp.z_multiplier * 2f64.powi(level as i32 - 1),
        }
    }

    fn slot_kind(&self, slot: usize) -> TreeKind {
        if slot < self.forests_per_level / 2 {
            TreeKind::RandomForest
        } else {
            TreeKind::CompleteRandom
        }
    }
}

/// One cascade level: the (slot, fold) forest grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    forests: Vec<Forest>, // slot-major: index = slot * folds + fold
    slots: usize,
    folds: usize,
    input_width: usize,
}

impl Level {
    pub fn from_parts(
        forests: Vec<Forest>,
        slots: usize,
        folds: usize,
        input_width: usize,
    ) -> Result<Self> {
        if forests.len() != slots * folds {
            return Err(Error::model(format!(
                "{} forests cannot fill a {slots}x{folds} level grid",
                forests.len()
            )));
        }
        if forests.iter().any(|f| f.width() != input_width) {
            return Err(Error::model(format!(
                "level forests disagree with input width {input_width}"
            )));
        }
        Ok(Level {
            forests,
            slots,
            folds,
            input_width,
        })
    }

    pub fn forest(&self, slot: usize, fold: usize) -> &Forest {
        &self.forests[slot * self.folds + fold]
    }

    pub fn forests(&self) -> &[Forest] {
        &self.forests
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    /// Fold-averaged weighted class vector per slot: the inference path.
    pub fn class_vectors(&self, x: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.fold_average(x, Forest::weighted_class_vector)
    }

    /// Fold-averaged plain tree average per slot, ignoring stored weights:
    /// the dedicated unweighted-baseline path.
    pub fn class_vectors_mean(&self, x: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.fold_average(x, Forest::mean_class_vector)
    }

    fn fold_average(
        &self,
        x: &[f64],
        per_forest: impl Fn(&Forest, &[f64]) -> Result<[f64; 2]>,
    ) -> Result<Vec<[f64; 2]>> {
        if x.len() != self.input_width {
            return Err(Error::data(format!(
                "input width {} does not match level width {}",
                x.len(),
                self.input_width
            )));
        }
        let scale = 1.0 / self.folds as f64;
        let mut out = Vec::with_capacity(self.slots);
        for slot in 0..self.slots {
            let mut acc = [0.0f64; 2];
            for fold in 0..self.folds {
                let v = per_forest(self.forest(slot, fold), x)?;
                acc[0] += v[0];
                acc[1] += v[1];
            }
            out.push([acc[0] * scale, acc[1] * scale]);
        }
        Ok(out)
    }

    /// Augment `x` with this level's fold-averaged class vectors.
    pub fn augment(&self, x: &[f64], d: usize, mode: Augmentation) -> Result<Vec<f64>> {
        let vs = self.class_vectors(x)?;
        Ok(augmented_input(x, &vs, d, mode))
    }
}

/// Concatenate class vectors onto the carried feature section.
pub fn augmented_input(x: &[f64], vs: &[[f64; 2]], d: usize, mode: Augmentation) -> Vec<f64> {
    let mut out = match mode {
        Augmentation::Replace => x[..2 * d].to_vec(),
        Augmentation::Accumulate => x.to_vec(),
    };
    for v in vs {
        out.push(v[0]);
        out.push(v[1]);
    }
    out
}

/// Inference outcome for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairVerdict {
    /// Final-level class-sum margin: `sum_k v0 - sum_k v1`.
    pub diff: f64,
    pub label: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Similar,
    Dissimilar,
    Undetermined,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Similar => "similar",
            Verdict::Dissimilar => "dissimilar",
            Verdict::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

/// The decision rule: similar when `diff >= tau`, dissimilar when
/// `diff < 0`, undetermined in between. With `tau = 0` the rule is binary
/// and `diff = 0` counts as similar.
pub fn verdict_for(diff: f64, tau: f64) -> Verdict {
    if diff >= tau {
        Verdict::Similar
    } else if diff < 0.0 {
        Verdict::Dissimilar
    } else {
        Verdict::Undetermined
    }
}

/// Training bookkeeping stored inside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    pub train_pair_count: usize,
    /// Validation accuracy of every trained level, including any levels
    /// dropped when the best prefix was selected.
    pub validation_trace: Vec<f64>,
}

/// A trained cascade. Immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfModel {
    levels: Vec<Level>,
    config: CascadeConfig,
    d: usize,
    scanners: Option<Scanners>,
    metadata: ModelMetadata,
}

impl SdfModel {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn config(&self) -> &CascadeConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn scanners(&self) -> Option<&Scanners> {
        self.scanners.as_ref()
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// Reassemble a model from persisted parts, re-checking the width chain.
    pub fn from_parts(
        levels: Vec<Level>,
        config: CascadeConfig,
        d: usize,
        scanners: Option<Scanners>,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        config.validate().map_err(|e| Error::model(e.to_string()))?;
        if levels.is_empty() {
            return Err(Error::model("model has no levels".to_string()));
        }
        if d == 0 {
            return Err(Error::model("model feature count d must be positive".to_string()));
        }
        if config.scanning.enabled != scanners.is_some() {
            return Err(Error::model(
                "scanning config and stored scanners disagree".to_string(),
            ));
        }
        let model = SdfModel {
            levels,
            config,
            d,
            scanners,
            metadata,
        };
        model.check_width_chain()?;
        Ok(model)
    }

    fn check_width_chain(&self) -> Result<()> {
        let mut expected = match &self.scanners {
            Some(s) => s.output_width(),
            None => 2 * self.d,
        };
        let m = self.config.forests_per_level;
        for (idx, level) in self.levels.iter().enumerate() {
            if level.input_width() != expected {
                return Err(Error::model(format!(
                    "level {}: input width {} does not chain (expected {})",
                    idx + 1,
                    level.input_width(),
                    expected
                )));
            }
            if level.slots() != m || level.folds() != self.config.cv_folds {
                return Err(Error::model(format!(
                    "level {}: grid {}x{} does not match config {}x{}",
                    idx + 1,
                    level.slots(),
                    level.folds(),
                    m,
                    self.config.cv_folds
                )));
            }
            expected = match self.config.augmentation {
                Augmentation::Replace => 2 * self.d + 2 * m,
                Augmentation::Accumulate => level.input_width() + 2 * m,
            };
        }
        Ok(())
    }

    /// Level-1 input for a pair of raw samples.
    pub fn initial_input(&self, a: &Sample, b: &Sample) -> Result<Vec<f64>> {
        if a.d() != self.d || b.d() != self.d {
            return Err(Error::data(format!(
                "pair widths {}/{} do not match model width {}",
                a.d(),
                b.d(),
                self.d
            )));
        }
        transform_pair(a, b, self.scanners.as_ref())
    }

    fn forward(&self, mut x: Vec<f64>, mean_path: bool) -> Result<Vec<[f64; 2]>> {
        for (idx, level) in self.levels.iter().enumerate() {
            if x.len() != level.input_width() {
                return Err(Error::invariant(format!(
                    "level {} expected width {}, got {}",
                    idx + 1,
                    level.input_width(),
                    x.len()
                )));
            }
            let vs = if mean_path {
                level.class_vectors_mean(&x)?
            } else {
                level.class_vectors(&x)?
            };
            if idx + 1 == self.levels.len() {
                return Ok(vs);
            }
            x = augmented_input(&x, &vs, self.d, self.config.augmentation);
        }
        Err(Error::invariant("model has no levels".to_string()))
    }

    /// Final-level class vectors for one pair (inference path).
    pub fn final_class_vectors(&self, a: &Sample, b: &Sample) -> Result<Vec<[f64; 2]>> {
        self.forward(self.initial_input(a, b)?, false)
    }

    /// Classify a pair with the model's configured threshold.
    pub fn predict_pair(&self, a: &Sample, b: &Sample) -> Result<PairVerdict> {
        self.predict_pair_with_tau(a, b, self.config.tau)
    }

    /// Classify a pair with an explicit threshold.
    pub fn predict_pair_with_tau(&self, a: &Sample, b: &Sample, tau: f64) -> Result<PairVerdict> {
        let vs = self.final_class_vectors(a, b)?;
        Ok(Self::decide(&vs, tau))
    }

    /// Classify a pair through the dedicated uniform-average path, which
    /// ignores all stored weights. On a baseline-trained model this matches
    /// [`SdfModel::predict_pair`] bit for bit.
    pub fn predict_pair_uniform(&self, a: &Sample, b: &Sample, tau: f64) -> Result<PairVerdict> {
        let vs = self.forward(self.initial_input(a, b)?, true)?;
        Ok(Self::decide(&vs, tau))
    }

    fn decide(vs: &[[f64; 2]], tau: f64) -> PairVerdict {
        let mut diff = 0.0;
        for v in vs {
            diff += v[0] - v[1];
        }
        PairVerdict {
            diff,
            label: verdict_for(diff, tau),
        }
    }

    /// Elementwise [`SdfModel::predict_pair`], order preserving.
    pub fn predict_batch(&self, ds: &LabeledDataset, pairs: &PairDataset) -> Result<Vec<PairVerdict>> {
        self.predict_batch_with_tau(ds, pairs, self.config.tau)
    }

    pub fn predict_batch_with_tau(
        &self,
        ds: &LabeledDataset,
        pairs: &PairDataset,
        tau: f64,
    ) -> Result<Vec<PairVerdict>> {
        if pairs.n_samples() > ds.len() {
            return Err(Error::data(format!(
                "pair set references {} samples, dataset has {}",
                pairs.n_samples(),
                ds.len()
            )));
        }
        pairs
            .pairs()
            .par_iter()
            .map(|p| self.predict_pair_with_tau(ds.sample(p.i), ds.sample(p.j), tau))
            .collect()
    }
}

/// Per-forest weight-solve log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpLog {
    pub slot: usize,
    pub fold: usize,
    pub objective_uniform: f64,
    pub objective_final: f64,
    pub iterations: usize,
}

/// Per-level training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub level: usize,
    pub val_accuracy: Option<f64>,
    pub qp: Vec<QpLog>,
}

/// Full training log: one entry per trained level, plus how many levels the
/// returned model kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub levels: Vec<LevelLog>,
    pub kept_levels: usize,
}

/// Balanced random fold assignment: shuffled positions taken modulo `folds`.
pub(crate) fn assign_folds(n: usize, folds: usize, folds_seed: u64) -> Vec<usize> {
    use rand::Rng;
    let mut rng = seed::rng(folds_seed);
    let mut order: Vec<usize> = (0..n).collect();
    for k in 0..n.saturating_sub(1) {
        let pick = k + rng.gen_range(0..n - k);
        order.swap(k, pick);
    }
    let mut fold_of = vec![0usize; n];
    for (position, &idx) in order.iter().enumerate() {
        fold_of[idx] = position % folds;
    }
    fold_of
}

struct LevelOutcome {
    level: Level,
    qp_logs: Vec<QpLog>,
    /// Out-of-fold class vectors: per weight-training pair, per slot, the
    /// class vector of the fold forest that held the pair out.
    oof_vectors: Vec<Vec<[f64; 2]>>,
}

/// Fit one level: (slot, fold) forests on out-fold rows, weights on each
/// forest's held-out `P` matrix, out-of-fold class vectors for every row.
fn train_level(
    inputs: &Matrix,
    y: &[u8],
    fold_of: &[usize],
    cfg: &CascadeConfig,
    level_no: usize,
) -> Result<LevelOutcome> {
    let m = cfg.forests_per_level;
    let folds = cfg.cv_folds;

    let mut out_rows: Vec<Vec<usize>> = vec![Vec::new(); folds];
    let mut in_rows: Vec<Vec<usize>> = vec![Vec::new(); folds];
    for (idx, &f) in fold_of.iter().enumerate() {
        for (fold, rows) in out_rows.iter_mut().enumerate() {
            if fold != f {
                rows.push(idx);
            }
        }
        in_rows[f].push(idx);
    }
    if in_rows.iter().any(Vec::is_empty) {
        return Err(Error::data(format!(
            "{} pairs are too few for {folds} folds",
            fold_of.len()
        )));
    }

    let out_x: Vec<Matrix> = out_rows.iter().map(|rows| inputs.select_rows(rows)).collect();
    let out_y: Vec<Vec<u8>> = out_rows
        .iter()
        .map(|rows| rows.iter().map(|&r| y[r]).collect())
        .collect();
    let in_x: Vec<Matrix> = in_rows.iter().map(|rows| inputs.select_rows(rows)).collect();
    let in_y: Vec<Vec<u8>> = in_rows
        .iter()
        .map(|rows| rows.iter().map(|&r| y[r]).collect())
        .collect();

    let jobs: Vec<(usize, usize)> = (0..m)
        .flat_map(|slot| (0..folds).map(move |fold| (slot, fold)))
        .collect();

    let z_mult = cfg.z_multiplier_at(level_no);
    let fitted: Result<Vec<(Forest, crate::forest::ProbMatrix, QpLog)>> = jobs
        .par_iter()
        .map(|&(slot, fold)| {
            let kind = cfg.slot_kind(slot);
            let forest_seed = seed::derive(
                cfg.seed,
                &[tag::FOREST, level_no as u64, slot as u64, fold as u64],
            );
            let forest = fit_forest(
                &out_x[fold],
                &out_y[fold],
                &TreeConfig::new(kind),
                cfg.trees_per_forest,
                forest_seed,
            )?;
            let probs = forest.tree_probabilities(&in_x[fold])?;
            let p = build_p_matrix(&probs, &in_y[fold], z_mult)?;
            let uniform = vec![1.0 / cfg.trees_per_forest as f64; cfg.trees_per_forest];
            if cfg.baseline {
                let obj = crate::weightopt::objective(&p, &uniform, cfg.qp.lambda)?;
                let log = QpLog {
                    slot,
                    fold,
                    objective_uniform: obj,
                    objective_final: obj,
                    iterations: 0,
                };
                Ok((forest, probs, log))
            } else {
                let solved = solve_weights(&p, &cfg.qp, None)?;
                let log = QpLog {
                    slot,
                    fold,
                    objective_uniform: solved.initial_objective(),
                    objective_final: solved.final_objective(),
                    iterations: solved.iterations,
                };
                Ok((forest.with_weights(solved.weights)?, probs, log))
            }
        })
        .collect();

    let mut forests = Vec::with_capacity(m * folds);
    let mut probs_grid = Vec::with_capacity(m * folds);
    let mut qp_logs = Vec::with_capacity(m * folds);
    for (forest, probs, log) in fitted? {
        forests.push(forest);
        probs_grid.push(probs);
        qp_logs.push(log);
    }

    // Position of each row inside its fold, to index the probability rows.
    let mut pos_in_fold = vec![0usize; fold_of.len()];
    let mut counters = vec![0usize; folds];
    for (idx, &f) in fold_of.iter().enumerate() {
        pos_in_fold[idx] = counters[f];
        counters[f] += 1;
    }

    let level = Level::from_parts(forests, m, folds, inputs.cols())
        .map_err(|e| Error::invariant(e.to_string()))?;

    let oof_vectors: Vec<Vec<[f64; 2]>> = (0..fold_of.len())
        .map(|idx| {
            let fold = fold_of[idx];
            let row = pos_in_fold[idx];
            (0..m)
                .map(|slot| {
                    let weights = level.forest(slot, fold).weights();
                    let probs = &probs_grid[slot * folds + fold];
                    let mut v = [0.0f64; 2];
                    for (t, &w) in weights.iter().enumerate() {
                        let p0 = probs.get(row, t);
                        v[0] += w * p0;
                        v[1] += w * (1.0 - p0);
                    }
                    v
                })
                .collect()
        })
        .collect();

    Ok(LevelOutcome {
        level,
        qp_logs,
        oof_vectors,
    })
}

/// Train a cascade on labeled pairs.
///
/// A `val_fraction` slice of the pairs is held out and never touches tree
/// fitting, weight fitting, or scanning; it only scores level prefixes.
/// Training stops when the validation gain drops to `epsilon_gain` or below
/// (or at `max_levels`), and the best-scoring prefix is returned. With an
/// empty validation set all `max_levels` levels are kept.
pub fn train_cascade(
    ds: &LabeledDataset,
    train: &PairDataset,
    cfg: &CascadeConfig,
) -> Result<(SdfModel, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::data("training pair set is empty".to_string()));
    }
    let labels = train.labels();
    if labels.iter().all(|&y| y == 0) || labels.iter().all(|&y| y == 1) {
        return Err(Error::data(
            "training pairs all share one label; need both similar and dissimilar pairs"
                .to_string(),
        ));
    }
    let d = ds.d();
    if d == 0 {
        return Err(Error::data("dataset has no features".to_string()));
    }

    // Validation holdout.
    use rand::Rng;
    let n = train.len();
    let n_val = (n as f64 * cfg.val_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seed::rng(seed::derive(cfg.seed, &[tag::VAL_SPLIT]));
    for k in 0..n.saturating_sub(1) {
        let pick = k + rng.gen_range(0..n - k);
        order.swap(k, pick);
    }
    let val_idx: Vec<usize> = order[..n_val].to_vec();
    let wt_idx: Vec<usize> = order[n_val..].to_vec();
    if wt_idx.len() < cfg.cv_folds {
        return Err(Error::data(format!(
            "{} weight-training pairs are too few for {} folds",
            wt_idx.len(),
            cfg.cv_folds
        )));
    }

    let wt_pairs: Vec<crate::data::Pair> = wt_idx.iter().map(|&i| train.pairs()[i]).collect();
    let val_pairs: Vec<crate::data::Pair> = val_idx.iter().map(|&i| train.pairs()[i]).collect();
    let wt_y: Vec<u8> = wt_pairs.iter().map(|p| p.y).collect();
    let val_y: Vec<u8> = val_pairs.iter().map(|p| p.y).collect();

    let scanners = if cfg.scanning.enabled {
        let wt_set = PairDataset::new(wt_pairs.clone(), train.n_samples())?;
        Some(fit_scanners(
            ds,
            &wt_set,
            &cfg.scanning,
            seed::derive(cfg.seed, &[tag::SCAN]),
        )?)
    } else {
        None
    };

    let build_inputs = |pairs: &[crate::data::Pair]| -> Result<Matrix> {
        let rows: Result<Vec<Vec<f64>>> = pairs
            .par_iter()
            .map(|p| transform_pair(ds.sample(p.i), ds.sample(p.j), scanners.as_ref()))
            .collect();
        let rows = rows?;
        let width = rows.first().map_or(2 * d, Vec::len);
        let mut m = Matrix::with_cols(width);
        for row in &rows {
            m.push_row(row)?;
        }
        Ok(m)
    };

    let mut wt_inputs = build_inputs(&wt_pairs)?;
    let mut val_inputs = build_inputs(&val_pairs)?;

    let mut levels: Vec<Level> = Vec::new();
    let mut level_logs: Vec<LevelLog> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut best_acc = f64::NEG_INFINITY;

    for q in 1..=cfg.max_levels {
        let fold_of = assign_folds(
            wt_pairs.len(),
            cfg.cv_folds,
            seed::derive(cfg.seed, &[tag::FOLDS, q as u64]),
        );
        let outcome = train_level(&wt_inputs, &wt_y, &fold_of, cfg, q)?;

        // Validation accuracy of the prefix ending at this level, with the
        // binary tau = 0 rule.
        let val_acc = if val_pairs.is_empty() {
            None
        } else {
            let vectors: Result<Vec<Vec<[f64; 2]>>> = (0..val_pairs.len())
                .into_par_iter()
                .map(|r| outcome.level.class_vectors(val_inputs.row(r)))
                .collect();
            let vectors = vectors?;
            let correct = vectors
                .iter()
                .zip(&val_y)
                .filter(|(vs, &y)| {
                    let verdict = SdfModel::decide(vs, 0.0);
                    (verdict.label == Verdict::Similar) == (y == 0)
                })
                .count();
            Some(correct as f64 / val_pairs.len() as f64)
        };

        level_logs.push(LevelLog {
            level: q,
            val_accuracy: val_acc,
            qp: outcome.qp_logs.clone(),
        });

        let stop = match val_acc {
            Some(acc) => {
                trace.push(acc);
                let improved = acc - best_acc > cfg.epsilon_gain || levels.is_empty();
                if improved {
                    best_acc = best_acc.max(acc);
                }
                levels.push(outcome.level.clone());
                !improved
            }
            None => {
                levels.push(outcome.level.clone());
                false
            }
        };

        if stop || q == cfg.max_levels {
            break;
        }

        // Next-level inputs: out-of-fold vectors for training rows,
        // fold-averaged vectors for validation rows.
        let mut next_wt = Matrix::with_cols(augmented_width(
            wt_inputs.cols(),
            d,
            cfg.forests_per_level,
            cfg.augmentation,
        ));
        for (r, vs) in outcome.oof_vectors.iter().enumerate() {
            next_wt.push_row(&augmented_input(wt_inputs.row(r), vs, d, cfg.augmentation))?;
        }
        let next_val_rows: Result<Vec<Vec<f64>>> = (0..val_pairs.len())
            .into_par_iter()
            .map(|r| {
                let row = val_inputs.row(r);
                outcome
                    .level
                    .class_vectors(row)
                    .map(|vs| augmented_input(row, &vs, d, cfg.augmentation))
            })
            .collect();
        let mut next_val = Matrix::with_cols(next_wt.cols());
        for row in next_val_rows? {
            next_val.push_row(&row)?;
        }
        wt_inputs = next_wt;
        val_inputs = next_val;
    }

    // Keep the best prefix (first argmax of the trace).
    let kept = if trace.is_empty() {
        levels.len()
    } else {
        let mut best_idx = 0;
        for (idx, &acc) in trace.iter().enumerate() {
            if acc > trace[best_idx] {
                best_idx = idx;
            }
        }
        best_idx + 1
    };
    levels.truncate(kept);

    let model = SdfModel {
        levels,
        config: cfg.clone(),
        d,
        scanners,
        metadata: ModelMetadata {
            seed: cfg.seed,
            train_pair_count: train.len(),
            validation_trace: trace,
        },
    };
    model.check_width_chain().map_err(|e| Error::invariant(e.to_string()))?;
    Ok((
        model,
        TrainReport {
            levels: level_logs,
            kept_levels: kept,
        },
    ))
}

fn augmented_width(current: usize, d: usize, m: usize, mode: Augmentation) -> usize {
    match mode {
        Augmentation::Replace => 2 * d + 2 * m,
        Augmentation::Accumulate => current + 2 * m,
    }
}
