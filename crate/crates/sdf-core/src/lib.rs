//! Siamese Deep Forest: pairwise metric learning with cascades of weighted
//! decision forests.
//!
//! The model classifies *pairs* of examples as semantically similar or
//! dissimilar. Pairs are concatenated into single vectors and pushed through
//! a cascade of forest levels; each forest's class vector is a weighted sum
//! of its trees' leaf distributions, and the weights are fitted per forest by
//! a simplex-constrained quadratic program that drives similar pairs toward
//! class 0 and dissimilar pairs toward class 1. With uniform weights the
//! cascade reduces to the plain unweighted deep-forest baseline.
//!
//! Module map:
//!
//! * [`data`] — CSV loading, pair generation, train/test splits.
//! * [`trees`] / [`forest`] — Gini and completely-random trees, forests,
//!   class vectors.
//! * [`weightopt`] — `P` matrices and the projected-gradient weight solver.
//! * [`cascade`] — level-by-level training, augmentation, inference.
//! * [`scanning`] — paired multi-grained scanning for structured inputs.
//! * [`persist`] — canonical JSON model files.

pub mod cascade;
pub mod data;
pub mod error;
pub mod forest;
pub mod matrix;
pub mod persist;
pub mod scanning;
pub mod seed;
pub mod trees;
pub mod weightopt;

pub use cascade::{
    augmented_input, train_cascade, verdict_for, Augmentation, CascadeConfig, Level, LevelLog,
    ModelMetadata, PairVerdict, QpLog, SdfModel, TrainReport, Verdict, ZSchedule,
};
pub use data::{
    concatenate_pair, generate_pairs, load_csv, read_pairs_csv, split_pairs, test_size,
    write_pairs_csv, LabelColumn, LabeledDataset, Pair, PairDataset, Sample,
};
pub use error::{Error, Result};
pub use forest::{check_simplex, fit_forest, Forest, ProbMatrix};
pub use matrix::Matrix;
pub use persist::{canonical_json, load_model, save_model, FORMAT_VERSION};
pub use scanning::{
    extract_window_pairs, fit_scanners, transform_pair, ScanConfig, ScanShape, Scanners,
    SizeScanner, WindowPair,
};
pub use trees::{fit_tree, DecisionTree, Node, TreeConfig, TreeKind};
pub use weightopt::{
    build_p_matrix, gradient, objective, project_simplex, solve_all, solve_weights, PMatrix,
    QpConfig, SolveOutcome,
};
