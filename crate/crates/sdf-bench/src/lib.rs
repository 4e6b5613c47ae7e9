//! Shared helpers for the criterion benchmarks.

use rand::Rng;
use sdf_core::{seed, LabeledDataset, Matrix, PMatrix};

/// Random pair-style feature matrix with binary labels.
pub fn random_training_data(rows: usize, cols: usize, seed_value: u64) -> (Matrix, Vec<u8>) {
    let mut rng = seed::rng(seed_value);
    let mut m = Matrix::with_cols(cols);
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        let label = rng.gen_range(0..2u8);
        let shift = label as f64 * 0.8;
        let row: Vec<f64> = (0..cols).map(|_| shift + rng.gen_range(-1.0..1.0)).collect();
        m.push_row(&row).unwrap();
        y.push(label);
    }
    (m, y)
}

/// Random margin matrix shaped like a per-forest weight problem.
pub fn random_p_matrix(rows: usize, cols: usize, seed_value: u64) -> PMatrix {
    let mut rng = seed::rng(seed_value);
    let data: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    PMatrix::from_rows(&data).unwrap()
}

/// Small two-class dataset for cascade benchmarks.
pub fn small_dataset(n_per_class: usize, d: usize, seed_value: u64) -> LabeledDataset {
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for class in 0..2 {
        let shift = class as f64 * 1.2;
        for _ in 0..n_per_class {
            rows.push((0..d).map(|_| shift + rng.gen_range(-1.0..1.0)).collect());
            labels.push(format!("c{class}"));
        }
    }
    LabeledDataset::new(rows, labels).unwrap()
}
