//! Forests: bundles of trees with a simplex-constrained weight vector.
//!
//! A forest's class vector is the weighted sum of its trees' leaf
//! distributions, `v_c = sum_t w_t * p_{t,c}`. Freshly fitted forests carry
//! uniform weights, which makes the weighted sum the plain per-forest
//! average used by the unweighted cascade baseline.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;
use crate::trees::{fit_tree, DecisionTree, TreeConfig, TreeKind};

/// Feasibility tolerance for weight vectors: entries nonnegative (up to a
/// clamping band) and summing to one within this bound.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Check that `w` lies on the unit simplex within [`SIMPLEX_TOL`].
pub fn check_simplex(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::data("empty weight vector".to_string()));
    }
    if let Some(idx) = w.iter().position(|&v| !v.is_finite() || v < -SIMPLEX_TOL) {
        return Err(Error::data(format!(
            "weight {} at index {idx} is negative or non-finite",
            w[idx]
        )));
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::data(format!(
            "weights sum to {sum}, the simplex requires 1 within {SIMPLEX_TOL:e}"
        )));
    }
    Ok(())
}

/// Per-pair, per-tree class-0 probabilities. Class-1 probabilities are
/// `1 - entry`, so only class 0 is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl ProbMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, tree: usize) -> f64 {
        self.data[row * self.cols + tree]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn from_raw(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::data(format!(
                "{} entries cannot fill a {rows}x{cols} probability matrix",
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::data(format!(
                "probability {} at entry {idx} outside [0, 1]",
                data[idx]
            )));
        }
        Ok(ProbMatrix { data, rows, cols })
    }
}

/// A fitted forest: `T` trees of one kind plus a weight vector on the unit
/// simplex. Immutable; reweighting produces a new forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    kind: TreeKind,
    weights: Vec<f64>,
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn width(&self) -> usize {
        self.trees[0].width()
    }

    /// Assemble a forest from parts, validating the weight simplex and that
    /// all trees share one input width.
    pub fn from_parts(trees: Vec<DecisionTree>, kind: TreeKind, weights: Vec<f64>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::data("a forest needs at least one tree".to_string()));
        }
        if weights.len() != trees.len() {
            return Err(Error::data(format!(
                "{} weights for {} trees",
                weights.len(),
                trees.len()
            )));
        }
        check_simplex(&weights)?;
        let width = trees[0].width();
        if trees.iter().any(|t| t.width() != width) {
            return Err(Error::data("trees disagree on input width".to_string()));
        }
        Ok(Forest {
            trees,
            kind,
            weights,
        })
    }

    /// Replace the weight vector, keeping the trees. Rejects vectors off the
    /// simplex by more than 1e-9; negatives inside the clamping band are
    /// zeroed.
    pub fn with_weights(self, weights: Vec<f64>) -> Result<Forest> {
        if weights.len() != self.trees.len() {
            return Err(Error::data(format!(
                "{} weights for {} trees",
                weights.len(),
                self.trees.len()
            )));
        }
        check_simplex(&weights)?;
        let weights = weights.into_iter().map(|w| w.max(0.0)).collect();
        Ok(Forest { weights, ..self })
    }

    /// Class-0 probability of every tree on every row.
    pub fn tree_probabilities(&self, x: &Matrix) -> Result<ProbMatrix> {
        if x.cols() != self.width() {
            return Err(Error::data(format!(
                "input width {} does not match forest width {}",
                x.cols(),
                self.width()
            )));
        }
        let cols = self.trees.len();
        let data: Vec<f64> = (0..x.rows())
            .into_par_iter()
            .flat_map_iter(|r| {
                let row = x.row(r);
                self.trees.iter().map(move |t| t.route(row)[0])
            })
            .collect();
        Ok(ProbMatrix {
            data,
            rows: x.rows(),
            cols,
        })
    }

    /// Weighted class vector `v_c = sum_t w_t * p_{t,c}`.
    pub fn weighted_class_vector(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.width() {
            return Err(Error::data(format!(
                "input width {} does not match forest width {}",
                x.len(),
                self.width()
            )));
        }
        let mut v = [0.0f64; 2];
        for (tree, &w) in self.trees.iter().zip(&self.weights) {
            let d = tree.route(x);
            v[0] += w * d[0];
            v[1] += w * d[1];
        }
        Ok(v)
    }

    /// Plain per-forest average of the tree distributions, ignoring the
    /// stored weights. This is the dedicated unweighted-baseline path; with
    /// freshly initialized (uniform) weights it matches
    /// [`Forest::weighted_class_vector`] bit for bit.
    pub fn mean_class_vector(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.width() {
            return Err(Error::data(format!(
                "input width {} does not match forest width {}",
                x.len(),
                self.width()
            )));
        }
        let uniform = 1.0 / self.trees.len() as f64;
        let mut v = [0.0f64; 2];
        for tree in &self.trees {
            let d = tree.route(x);
            v[0] += uniform * d[0];
            v[1] += uniform * d[1];
        }
        Ok(v)
    }
}

/// Fit `t` trees with seeds derived from `(seed, tree index)` and uniform
/// initial weights.
pub fn fit_forest(
    x: &Matrix,
    y: &[u8],
    cfg: &TreeConfig,
    t: usize,
    forest_seed: u64,
) -> Result<Forest> {
    if t == 0 {
        return Err(Error::config("a forest needs at least one tree".to_string()));
    }
    let trees: Result<Vec<DecisionTree>> = (0..t)
        .into_par_iter()
        .map(|idx| fit_tree(x, y, cfg, seed::derive(forest_seed, &[idx as u64])))
        .collect();
    Ok(Forest {
        trees: trees?,
        kind: cfg.kind,
        weights: vec![1.0 / t as f64; t],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_matrix() -> Matrix {
        Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![0.2, 0.8],
            vec![1.0, 0.1],
            vec![0.9, 0.0],
            vec![0.1, 0.9],
            vec![0.8, 0.2],
        ])
        .unwrap()
    }

    const TOY_Y: [u8; 6] = [0, 0, 1, 1, 0, 1];

    #[test]
    fn singleton_forest_equals_its_tree() {
        let x = toy_matrix();
        let cfg = TreeConfig::new(TreeKind::RandomForest);
        let f = fit_forest(&x, &TOY_Y, &cfg, 1, 3).unwrap();
        let probe = [0.15, 0.85];
        let v = f.weighted_class_vector(&probe).unwrap();
        let d = f.trees()[0].predict_distribution(&probe).unwrap();
        assert_eq!(v, d);
    }

    #[test]
    fn fresh_weights_are_uniform() {
        let x = toy_matrix();
        let f = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::CompleteRandom), 4, 9).unwrap();
        assert_eq!(f.weights(), &[0.25; 4]);
    }

    #[test]
    fn fit_forest_deterministic() {
        let x = toy_matrix();
        let cfg = TreeConfig::new(TreeKind::RandomForest);
        let a = fit_forest(&x, &TOY_Y, &cfg, 8, 42).unwrap();
        let b = fit_forest(&x, &TOY_Y, &cfg, 8, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn probabilities_match_trees_rowwise() {
        let x = toy_matrix();
        let f = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::CompleteRandom), 5, 17).unwrap();
        let probs = f.tree_probabilities(&x).unwrap();
        assert_eq!(probs.rows(), x.rows());
        assert_eq!(probs.cols(), 5);
        for r in 0..x.rows() {
            for (t, tree) in f.trees().iter().enumerate() {
                let d = tree.predict_distribution(x.row(r)).unwrap();
                assert_eq!(probs.get(r, t), d[0]);
                assert!((0.0..=1.0).contains(&probs.get(r, t)));
            }
        }
    }

    #[test]
    fn weighted_class_vector_formula() {
        // Three stub trees with class-0 probabilities 0.5, 0.4, 1.0.
        let leaf = |p0: f64| {
            DecisionTree::from_nodes(
                vec![crate::trees::Node::Leaf { dist: [p0, 1.0 - p0] }],
                2,
                TreeConfig::new(TreeKind::RandomForest),
                0,
            )
            .unwrap()
        };
        let trees = vec![leaf(0.5), leaf(0.4), leaf(1.0)];
        let w = [0.2, 0.3, 0.5];
        let f = Forest::from_parts(trees, TreeKind::RandomForest, w.to_vec()).unwrap();
        let v = f.weighted_class_vector(&[0.0, 0.0]).unwrap();
        let expect0 = 0.5 * w[0] + 0.4 * w[1] + 1.0 * w[2];
        let expect1 = 0.5 * w[0] + 0.6 * w[1] + 0.0 * w[2];
        assert!((v[0] - expect0).abs() < 1e-15);
        assert!((v[1] - expect1).abs() < 1e-15);

        // Vertex of the simplex picks out a single tree.
        let f = f.with_weights(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(f.weighted_class_vector(&[0.0, 0.0]).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn uniform_weights_match_mean_path_exactly() {
        let x = toy_matrix();
        let f = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::RandomForest), 7, 5).unwrap();
        for r in 0..x.rows() {
            let a = f.weighted_class_vector(x.row(r)).unwrap();
            let b = f.mean_class_vector(x.row(r)).unwrap();
            assert_eq!(a, b, "bitwise equality at uniform weights");
        }
    }

    #[test]
    fn set_weights_validation() {
        let x = toy_matrix();
        let f = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::RandomForest), 2, 1).unwrap();
        assert!(f.clone().with_weights(vec![0.2, 0.8]).is_ok());
        assert!(f.clone().with_weights(vec![0.5, 0.6]).is_err());
        assert!(f.clone().with_weights(vec![-0.1, 1.1]).is_err());
        assert!(f.with_weights(vec![1.0]).is_err());
    }

    #[test]
    fn class_vector_is_probability_vector() {
        let x = toy_matrix();
        let f = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::CompleteRandom), 6, 23).unwrap();
        let f = f.with_weights(vec![0.4, 0.1, 0.1, 0.1, 0.1, 0.2]).unwrap();
        for r in 0..x.rows() {
            let v = f.weighted_class_vector(x.row(r)).unwrap();
            assert!((v[0] + v[1] - 1.0).abs() <= 1e-9);
            assert!(v[0] >= 0.0 && v[0] <= 1.0);
        }
    }

    #[test]
    fn class_vector_linear_in_weights() {
        let x = toy_matrix();
        let base = fit_forest(&x, &TOY_Y, &TreeConfig::new(TreeKind::RandomForest), 3, 2).unwrap();
        let wa = vec![0.7, 0.2, 0.1];
        let wb = vec![0.1, 0.3, 0.6];
        let alpha = 0.25;
        let mixed: Vec<f64> = wa
            .iter()
            .zip(&wb)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let fa = base.clone().with_weights(wa).unwrap();
        let fb = base.clone().with_weights(wb).unwrap();
        let fm = base.with_weights(mixed).unwrap();
        let probe = [0.3, 0.7];
        let va = fa.weighted_class_vector(&probe).unwrap();
        let vb = fb.weighted_class_vector(&probe).unwrap();
        let vm = fm.weighted_class_vector(&probe).unwrap();
        for c in 0..2 {
            let expect = alpha * va[c] + (1.0 - alpha) * vb[c];
            assert!((vm[c] - expect).abs() < 1e-12);
        }
    }
}
