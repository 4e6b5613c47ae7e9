//! Weight-solver checks against an independent brute-force oracle.
//!
//! The oracle evaluates the squared-hinge objective directly (its own scalar
//! arithmetic, no solver code) on a dense grid over the simplex, so solver
//! and oracle can only agree if both are right.

use rand::Rng;
use sdf_core::weightopt::{
    build_p_matrix, gradient, objective, solve_weights, PMatrix, QpConfig,
};
use sdf_core::ProbMatrix;

/// Direct scalar evaluation of `sum_r max(0, P_r . w)^2 + lambda ||w||^2`.
fn oracle_objective(rows: &[Vec<f64>], w: &[f64], lambda: f64) -> f64 {
    let mut total = 0.0;
    for row in rows {
        let mut margin = 0.0;
        for (a, b) in row.iter().zip(w) {
            margin += a * b;
        }
        if margin > 0.0 {
            total += margin * margin;
        }
    }
    let mut sq = 0.0;
    for v in w {
        sq += v * v;
    }
    total + lambda * sq
}

/// Minimum of the objective over a grid on the unit simplex.
fn oracle_grid_min(rows: &[Vec<f64>], lambda: f64, step: f64) -> f64 {
    let t = rows[0].len();
    let n = (1.0 / step).round() as usize;
    let mut best = f64::INFINITY;
    match t {
        2 => {
            for i in 0..=n {
                let w1 = i as f64 * step;
                let w = [w1, 1.0 - w1];
                best = best.min(oracle_objective(rows, &w, lambda));
            }
        }
        3 => {
            for i in 0..=n {
                let w1 = i as f64 * step;
                for j in 0..=(n - i) {
                    let w2 = j as f64 * step;
                    let w = [w1, w2, 1.0 - w1 - w2];
                    best = best.min(oracle_objective(rows, &w, lambda));
                }
            }
        }
        _ => panic!("oracle supports T in {{2, 3}}"),
    }
    best
}

fn random_rows(rng: &mut impl Rng, t: usize, max_rows: usize) -> Vec<Vec<f64>> {
    let rows = rng.gen_range(1..=max_rows);
    (0..rows)
        .map(|_| (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

#[test]
fn hand_derived_two_row_instance() {
    // Rows {(1,-1),(1,0)} with lambda = 0.1. On the inactive piece the
    // objective is 1.2 w1^2 - 0.2 w1 + 0.1, stationary at w1 = 1/12 with
    // value 11/120. The fine grid oracle confirms the algebra.
    let rows = vec![vec![1.0, -1.0], vec![1.0, 0.0]];
    let grid = oracle_grid_min(&rows, 0.1, 1e-4);
    assert!((grid - 11.0 / 120.0).abs() < 1e-6, "grid found {grid}");

    let p = PMatrix::from_rows(&rows).unwrap();
    let out = solve_weights(&p, &QpConfig { lambda: 0.1, ..QpConfig::default() }, None).unwrap();
    assert!((out.weights[0] - 1.0 / 12.0).abs() < 1e-3);
    assert!((out.weights[1] - 11.0 / 12.0).abs() < 1e-3);
    assert!((out.final_objective() - 11.0 / 120.0).abs() < 1e-6);
}

#[test]
fn single_row_instance_grid_checked() {
    // Row (1,-1), lambda = 0.1: hinge inactive for w1 <= 0.5, ridge minimized
    // at uniform, so w* = (0.5, 0.5) with J = 0.05.
    let rows = vec![vec![1.0, -1.0]];
    let grid = oracle_grid_min(&rows, 0.1, 1e-4);
    assert!((grid - 0.05).abs() < 1e-6);
    let p = PMatrix::from_rows(&rows).unwrap();
    let out = solve_weights(&p, &QpConfig { lambda: 0.1, ..QpConfig::default() }, None).unwrap();
    assert!((out.weights[0] - 0.5).abs() < 1e-4);
    assert!((out.final_objective() - 0.05).abs() < 1e-8);
}

#[test]
fn solver_reaches_grid_minimum_on_random_instances() {
    let mut rng = sdf_core::seed::rng(2024);
    for case in 0..40 {
        let t = if rng.gen_bool(0.5) { 2 } else { 3 };
        let rows = random_rows(&mut rng, t, 10);
        let lambda = [0.0, 0.01, 0.1, 1.0][case % 4];
        let p = PMatrix::from_rows(&rows).unwrap();
        let out = solve_weights(&p, &QpConfig { lambda, ..QpConfig::default() }, None).unwrap();
        let grid = oracle_grid_min(&rows, lambda, 1e-3);
        assert!(
            out.final_objective() <= grid + 1e-4,
            "case {case}: solver {} vs grid {grid}",
            out.final_objective()
        );
    }
}

#[test]
fn projection_grid_cross_check() {
    // Nearest simplex point to (2, 0): dense search over the 2-simplex
    // agrees with the hand KKT answer (1, 0).
    let v = [2.0f64, 0.0];
    let mut best = (f64::INFINITY, 0.0f64);
    let mut w1 = 0.0;
    while w1 <= 1.0 {
        let dist = (w1 - v[0]).powi(2) + ((1.0 - w1) - v[1]).powi(2);
        if dist < best.0 {
            best = (dist, w1);
        }
        w1 += 1e-4;
    }
    assert!((best.1 - 1.0).abs() < 1e-3);
    let p = sdf_core::project_simplex(&v).unwrap();
    assert!((p[0] - 1.0).abs() < 1e-12 && p[1] == 0.0);
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = sdf_core::seed::rng(77);
    let mut checked = 0;
    while checked < 100 {
        let t = rng.gen_range(2..=5);
        let rows = random_rows(&mut rng, t, 8);
        let p = PMatrix::from_rows(&rows).unwrap();
        let lambda = if checked % 2 == 0 { 0.01 } else { 0.1 };
        // Random interior simplex point.
        let raw: Vec<f64> = (0..t).map(|_| rng.gen_range(0.2..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / sum).collect();
        if w.iter().any(|&v| v < 0.05) {
            continue;
        }
        let g = gradient(&p, &w, lambda).unwrap();
        let h = 1e-6;
        let mut max_rel = 0.0f64;
        for i in 0..t {
            let mut plus = w.clone();
            plus[i] += h;
            let mut minus = w.clone();
            minus[i] -= h;
            let fd = (objective(&p, &plus, lambda).unwrap()
                - objective(&p, &minus, lambda).unwrap())
                / (2.0 * h);
            let denom = g[i].abs().max(fd.abs()).max(1e-8);
            max_rel = max_rel.max((g[i] - fd).abs() / denom);
        }
        assert!(max_rel < 1e-4, "relative gradient error {max_rel}");
        checked += 1;
    }
}

#[test]
fn decomposition_identity_on_random_instances() {
    // Joint objective evaluated directly at the concatenated per-forest
    // solutions equals the sum of per-forest optima.
    let mut rng = sdf_core::seed::rng(31);
    for _ in 0..50 {
        let m = rng.gen_range(1..=4);
        let lambda = 0.01;
        let mut problems = Vec::new();
        for _ in 0..m {
            let t = rng.gen_range(2..=4);
            problems.push(random_rows(&mut rng, t, 6));
        }
        let cfg = QpConfig { lambda, ..QpConfig::default() };
        let solutions: Vec<Vec<f64>> = problems
            .iter()
            .map(|rows| {
                solve_weights(&PMatrix::from_rows(rows).unwrap(), &cfg, None)
                    .unwrap()
                    .weights
            })
            .collect();
        // Direct joint evaluation: hinge terms over all forests plus ridge
        // on the concatenated weight vector.
        let mut joint = 0.0;
        for (rows, w) in problems.iter().zip(&solutions) {
            joint += oracle_objective(rows, w, 0.0);
        }
        let concat_sq: f64 = solutions.iter().flatten().map(|v| v * v).sum();
        joint += lambda * concat_sq;

        let sum_of_optima: f64 = problems
            .iter()
            .zip(&solutions)
            .map(|(rows, w)| {
                objective(&PMatrix::from_rows(rows).unwrap(), w, lambda).unwrap()
            })
            .sum();
        assert!(
            (joint - sum_of_optima).abs() <= 1e-9,
            "joint {joint} vs sum {sum_of_optima}"
        );
    }
}

#[test]
fn p_matrix_derived_entry() {
    // p0 = 0.2, dissimilar, multiplier 2: scalar oracle gives
    // 2 * ((0.2) - (0.8)) = -1.2.
    let p0: f64 = 0.2;
    let z = 2.0;
    let expected = z * (p0 - (1.0 - p0));
    assert!((expected - (-1.2)).abs() < 1e-15);
    let probs = ProbMatrix::from_raw(vec![p0], 1, 1).unwrap();
    let p = build_p_matrix(&probs, &[1], z).unwrap();
    assert!((p.row(0)[0] - expected).abs() < 1e-15);
}
