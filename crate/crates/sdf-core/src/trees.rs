//! Decision tree induction on concatenated pair vectors.
//!
//! Two kinds of trees are grown:
//!
//! * `RandomForest`: at each node a random feature subset of size `mtry` is
//!   drawn and the split minimizing weighted Gini impurity is chosen among
//!   midpoints between adjacent distinct sorted values.
//! * `CompleteRandom`: at each node one feature is drawn uniformly among the
//!   features that vary at the node, and the threshold is drawn uniformly
//!   between that feature's minimum and maximum node values.
//!
//! Growth stops when a node is pure, has fewer than `2 * min_leaf` rows,
//! no feature varies, or the depth cap is reached. Leaves store raw class
//! proportions of the rows that reached them. Routing is `value <= threshold`
//! to the left child, which fixes tie behaviour and makes prediction total.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// The two tree kinds used at every cascade level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    RandomForest,
    CompleteRandom,
}

/// Tree growth settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    pub kind: TreeKind,
    /// Feature-subset size for Gini splits; `None` means `ceil(sqrt(width))`.
    /// Ignored by completely-random trees.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<u32>,
    pub bootstrap: bool,
    /// Laplace-smooth leaf distributions. Off by default: leaves hold raw
    /// class proportions.
    pub laplace: bool,
}

impl TreeConfig {
    pub fn new(kind: TreeKind) -> Self {
        TreeConfig {
            kind,
            mtry: None,
            min_leaf: 1,
            max_depth: None,
            // Bagging for Gini forests, full sample for completely-random
            // trees.
            bootstrap: kind == TreeKind::RandomForest,
            laplace: false,
        }
    }

    fn validate(&self, width: usize) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::config("min_leaf must be at least 1".to_string()));
        }
        if let Some(m) = self.mtry {
            if m < 1 || m > width {
                return Err(Error::config(format!(
                    "mtry {m} outside [1, {width}]"
                )));
            }
        }
        Ok(())
    }
}

/// One tree node in a flat arena. Children always come after their parent.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        dist: [f64; 2],
    },
}

/// A fitted decision tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    width: usize,
    config: TreeConfig,
    seed: u64,
}

/// Equality is structural: node arena and input width. The fit config and
/// seed are provenance metadata and not persisted.
impl PartialEq for DecisionTree {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.width == other.width
    }
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn config(&self) -> &TreeConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Rebuild a tree from its node arena, validating structure: root at 0,
    /// child indices in range and strictly after their parent, every node
    /// reachable, features inside `width`, finite thresholds, and leaf
    /// distributions that are probability 2-vectors within 1e-12.
    pub fn from_nodes(nodes: Vec<Node>, width: usize, config: TreeConfig, seed: u64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::model("tree has no nodes".to_string()));
        }
        let mut reachable = vec![false; nodes.len()];
        reachable[0] = true;
        for (idx, node) in nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature as usize >= width {
                        return Err(Error::model(format!(
                            "node {idx}: feature {feature} outside width {width}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::model(format!("node {idx}: non-finite threshold")));
                    }
                    for child in [left, right] {
                        let c = child as usize;
                        if c <= idx || c >= nodes.len() {
                            return Err(Error::model(format!(
                                "node {idx}: child index {c} out of order or range"
                            )));
                        }
                        if reachable[c] {
                            return Err(Error::model(format!(
                                "node {c} has more than one parent"
                            )));
                        }
                        reachable[c] = true;
                    }
                }
                Node::Leaf { dist } => {
                    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(Error::model(format!(
                            "node {idx}: leaf distribution entries must be nonnegative"
                        )));
                    }
                    if (dist[0] + dist[1] - 1.0).abs() > 1e-12 {
                        return Err(Error::model(format!(
                            "node {idx}: leaf distribution sums to {}",
                            dist[0] + dist[1]
                        )));
                    }
                }
            }
        }
        if let Some(orphan) = reachable.iter().position(|r| !r) {
            return Err(Error::model(format!("node {orphan} unreachable from root")));
        }
        Ok(DecisionTree {
            nodes,
            width,
            config,
            seed,
        })
    }

    /// Route `x` to a leaf and return its stored class distribution.
    pub fn predict_distribution(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.width {
            return Err(Error::data(format!(
                "input width {} does not match tree width {}",
                x.len(),
                self.width
            )));
        }
        Ok(self.route(x))
    }

    #[inline]
    pub(crate) fn route(&self, x: &[f64]) -> [f64; 2] {
        let mut idx = 0usize;
        loop {
            match self.nodes[idx] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[feature as usize] <= threshold {
                        left as usize
                    } else {
                        right as usize
                    };
                }
                Node::Leaf { dist } => return dist,
            }
        }
    }
}

/// Fit one tree on rows of `x` with binary labels `y`.
pub fn fit_tree(x: &Matrix, y: &[u8], cfg: &TreeConfig, tree_seed: u64) -> Result<DecisionTree> {
    if x.is_empty() {
        return Err(Error::data("cannot fit a tree on an empty matrix".to_string()));
    }
    if y.len() != x.rows() {
        return Err(Error::data(format!(
            "{} labels for {} rows",
            y.len(),
            x.rows()
        )));
    }
    if let Some(bad) = y.iter().position(|&l| l > 1) {
        return Err(Error::data(format!(
            "label {} at row {bad} outside {{0,1}}",
            y[bad]
        )));
    }
    cfg.validate(x.cols())?;

    let mut rng = seed::rng(tree_seed);
    let mut rows: Vec<u32> = if cfg.bootstrap {
        let n = x.rows();
        (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
    } else {
        (0..x.rows() as u32).collect()
    };

    let mtry = cfg
        .mtry
        .unwrap_or_else(|| ((x.cols() as f64).sqrt().ceil() as usize).clamp(1, x.cols()));

    let mut builder = TreeBuilder {
        x,
        y,
        cfg,
        mtry,
        rng,
        nodes: Vec::new(),
        feat_order: (0..x.cols()).collect(),
        scratch: Vec::new(),
    };
    builder.build(&mut rows, 0);
    Ok(DecisionTree {
        nodes: builder.nodes,
        width: x.cols(),
        config: cfg.clone(),
        seed: tree_seed,
    })
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    cfg: &'a TreeConfig,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    feat_order: Vec<usize>,
    scratch: Vec<(f64, u8)>,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_> {
    fn build(&mut self, rows: &mut [u32], depth: u32) -> u32 {
        let (c0, c1) = self.counts(rows);
        let pure = c0 == 0 || c1 == 0;
        let too_small = rows.len() < 2 * self.cfg.min_leaf;
        let too_deep = self.cfg.max_depth.is_some_and(|d| depth >= d);

        let choice = if pure || too_small || too_deep {
            None
        } else {
            match self.cfg.kind {
                TreeKind::RandomForest => self.gini_split(rows),
                TreeKind::CompleteRandom => self.random_split(rows),
            }
        };

        match choice {
            None => {
                let idx = self.nodes.len() as u32;
                self.nodes.push(Node::Leaf {
                    dist: self.leaf_dist(c0, c1),
                });
                idx
            }
            Some(split) => {
                let idx = self.nodes.len() as u32;
                self.nodes.push(Node::Split {
                    feature: split.feature as u32,
                    threshold: split.threshold,
                    left: 0,
                    right: 0,
                });
                let mid = partition(self.x, rows, split.feature, split.threshold);
                debug_assert!(mid > 0 && mid < rows.len());
                let (left_rows, right_rows) = rows.split_at_mut(mid);
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                if let Node::Split {
                    left: l, right: r, ..
                } = &mut self.nodes[idx as usize]
                {
                    *l = left;
                    *r = right;
                }
                idx
            }
        }
    }

    fn counts(&self, rows: &[u32]) -> (usize, usize) {
        let c1 = rows.iter().filter(|&&r| self.y[r as usize] == 1).count();
        (rows.len() - c1, c1)
    }

    fn leaf_dist(&self, c0: usize, c1: usize) -> [f64; 2] {
        let n = (c0 + c1) as f64;
        if self.cfg.laplace {
            [(c0 as f64 + 1.0) / (n + 2.0), (c1 as f64 + 1.0) / (n + 2.0)]
        } else {
            [c0 as f64 / n, c1 as f64 / n]
        }
    }

    /// Min and max of a feature over the node rows.
    fn spread(&self, rows: &[u32], feature: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            let v = self.x.get(r as usize, feature);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Best Gini split over a random `mtry`-subset of the features that vary
    /// at this node. The random permutation makes the subset uniform without
    /// replacement; constant features are skipped so a node only becomes a
    /// leaf when no feature varies.
    fn gini_split(&mut self, rows: &[u32]) -> Option<SplitChoice> {
        let width = self.x.cols();
        let mut best: Option<(f64, SplitChoice)> = None;
        let mut tried = 0usize;
        for k in 0..width {
            let pick = k + self.rng.gen_range(0..width - k);
            self.feat_order.swap(k, pick);
            let feature = self.feat_order[k];
            let (lo, hi) = self.spread(rows, feature);
            if lo >= hi {
                continue;
            }
            if let Some((score, threshold)) = self.best_gini_threshold(rows, feature) {
                let better = best.as_ref().is_none_or(|(s, _)| score < *s);
                if better {
                    best = Some((score, SplitChoice { feature, threshold }));
                }
            }
            tried += 1;
            if tried == self.mtry {
                break;
            }
        }
        best.map(|(_, c)| c)
    }

    /// Lowest weighted-Gini threshold for one feature, midpoints between
    /// adjacent distinct sorted values, both children at least `min_leaf`.
    fn best_gini_threshold(&mut self, rows: &[u32], feature: usize) -> Option<(f64, f64)> {
        self.scratch.clear();
        for &r in rows {
            self.scratch
                .push((self.x.get(r as usize, feature), self.y[r as usize]));
        }
        self.scratch
            .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let n = self.scratch.len();
        let total1 = self.scratch.iter().filter(|(_, l)| *l == 1).count() as f64;
        let total0 = n as f64 - total1;

        let mut best: Option<(f64, f64)> = None;
        let mut c0 = 0.0f64;
        let mut c1 = 0.0f64;
        let min_leaf = self.cfg.min_leaf;
        for k in 1..n {
            let (prev, label) = self.scratch[k - 1];
            if label == 1 {
                c1 += 1.0;
            } else {
                c0 += 1.0;
            }
            let cur = self.scratch[k].0;
            if prev >= cur || k < min_leaf || n - k < min_leaf {
                continue;
            }
            // Weighted Gini n_l*g_l + n_r*g_r == n - purity, so minimizing
            // impurity means maximizing this purity term.
            let nl = k as f64;
            let nr = (n - k) as f64;
            let r0 = total0 - c0;
            let r1 = total1 - c1;
            let purity = (c0 * c0 + c1 * c1) / nl + (r0 * r0 + r1 * r1) / nr;
            let score = n as f64 - purity;
            if best.is_none_or(|(s, _)| score < s) {
                let mid = 0.5 * (prev + cur);
                // Keep the threshold strictly below the right value so the
                // left child is exactly the first k sorted rows.
                let threshold = if mid < cur { mid } else { prev };
                best = Some((score, threshold));
            }
        }
        best
    }

    /// Uniform feature among those that vary, uniform threshold in its
    /// (min, max) node range. Features whose draw would violate `min_leaf`
    /// are skipped in permutation order.
    fn random_split(&mut self, rows: &mut [u32]) -> Option<SplitChoice> {
        let width = self.x.cols();
        for k in 0..width {
            let pick = k + self.rng.gen_range(0..width - k);
            self.feat_order.swap(k, pick);
            let feature = self.feat_order[k];
            let (lo, hi) = self.spread(rows, feature);
            if lo >= hi {
                continue;
            }
            let threshold = self.rng.gen_range(lo..hi);
            let left = rows
                .iter()
                .filter(|&&r| self.x.get(r as usize, feature) <= threshold)
                .count();
            if left < self.cfg.min_leaf || rows.len() - left < self.cfg.min_leaf {
                continue;
            }
            return Some(SplitChoice { feature, threshold });
        }
        None
    }
}

/// Stable two-pointer partition: rows with `x[feature] <= threshold` first.
/// Returns the boundary index.
fn partition(x: &Matrix, rows: &mut [u32], feature: usize, threshold: f64) -> usize {
    let mut buf: Vec<u32> = Vec::with_capacity(rows.len());
    let mut mid = 0usize;
    for &r in rows.iter() {
        if x.get(r as usize, feature) <= threshold {
            buf.push(r);
            mid += 1;
        }
    }
    for &r in rows.iter() {
        if x.get(r as usize, feature) > threshold {
            buf.push(r);
        }
    }
    rows.copy_from_slice(&buf);
    mid
}
