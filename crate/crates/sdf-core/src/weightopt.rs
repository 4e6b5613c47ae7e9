//! Tree-weight optimization: per-forest simplex-constrained quadratic
//! programs.
//!
//! For one forest, row `r` of the `P` matrix holds
//! `z_r * (p_{r,0}^{(t)} - p_{r,1}^{(t)})` per tree `t`, where `z_r` is
//! `-m` for similar pairs and `+m` for dissimilar ones (`m` the configured
//! multiplier). The weights minimize the convex objective
//!
//! ```text
//! J(w) = sum_r max(0, P_r . w)^2 + lambda * ||w||^2
//! ```
//!
//! over the unit simplex. The slack-variable form of the program is
//! equivalent because each slack equals `max(0, P_r . w)` at any optimum;
//! solving the unconstrained squared-hinge form removes the auxiliary
//! variables. The solver is projected gradient descent with Armijo
//! backtracking along the projection arc, which keeps the objective trace
//! non-increasing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::forest::{check_simplex, ProbMatrix};

/// Armijo sufficient-decrease constant.
const ARMIJO_C: f64 = 1e-4;
/// Backtracking shrink factor.
const ARMIJO_SHRINK: f64 = 0.5;
/// First trial step of the first iteration.
const INITIAL_STEP: f64 = 1.0;
/// Negative weights in `[-CLAMP_BAND, 0)` are zeroed on emission.
const CLAMP_BAND: f64 = 1e-12;

/// Solver settings. `z_multiplier` scales the sign variable when building
/// `P` matrices and carries the per-level schedule.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QpConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub z_multiplier: f64,
}

impl Default for QpConfig {
    fn default() -> Self {
        QpConfig {
            lambda: 0.01,
            max_iter: 10_000,
            tol: 1e-8,
            z_multiplier: 1.0,
        }
    }
}

impl QpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.max_iter < 1 {
            return Err(Error::config("max_iter must be at least 1".to_string()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::config(format!(
                "tol must be finite and positive, got {}",
                self.tol
            )));
        }
        if !self.z_multiplier.is_finite() {
            return Err(Error::config("z_multiplier must be finite".to_string()));
        }
        Ok(())
    }
}

/// The per-forest QP data: one row per training pair, one column per tree.
#[derive(Debug, Clone, PartialEq)]
pub struct PMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl PMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::data("P matrix needs at least one column".to_string()));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::data("ragged P matrix rows".to_string()));
            }
            data.extend_from_slice(row);
        }
        Ok(PMatrix {
            data,
            rows: rows.len(),
            cols,
        })
    }
}

/// Build the `P` matrix: entry `(r, t) = z_r * (2 * p0(r, t) - 1)` with
/// `z_r = -z_multiplier` for similar rows (`y = 0`) and `+z_multiplier`
/// otherwise.
pub fn build_p_matrix(probs: &ProbMatrix, y: &[u8], z_multiplier: f64) -> Result<PMatrix> {
    if probs.rows() != y.len() {
        return Err(Error::data(format!(
            "{} labels for {} probability rows",
            y.len(),
            probs.rows()
        )));
    }
    if !z_multiplier.is_finite() {
        return Err(Error::config("z_multiplier must be finite".to_string()));
    }
    let cols = probs.cols();
    let mut data = Vec::with_capacity(probs.rows() * cols);
    for (r, &label) in y.iter().enumerate() {
        if label > 1 {
            return Err(Error::data(format!(
                "pair label {label} at row {r} outside {{0,1}}"
            )));
        }
        let z = if label == 0 { -z_multiplier } else { z_multiplier };
        for t in 0..cols {
            data.push(z * (2.0 * probs.get(r, t) - 1.0));
        }
    }
    Ok(PMatrix {
        data,
        rows: probs.rows(),
        cols,
    })
}

/// The squared-hinge plus ridge objective.
pub fn objective(p: &PMatrix, w: &[f64], lambda: f64) -> Result<f64> {
    if w.len() != p.cols() {
        return Err(Error::data(format!(
            "{} weights for {} P-matrix columns",
            w.len(),
            p.cols()
        )));
    }
    Ok(objective_unchecked(p, w, lambda))
}

#[inline]
fn objective_unchecked(p: &PMatrix, w: &[f64], lambda: f64) -> f64 {
    let mut hinge = 0.0;
    for r in 0..p.rows {
        let m: f64 = p.row(r).iter().zip(w).map(|(a, b)| a * b).sum();
        if m > 0.0 {
            hinge += m * m;
        }
    }
    let ridge: f64 = w.iter().map(|v| v * v).sum();
    hinge + lambda * ridge
}

/// Analytic gradient `2 * sum_r max(0, P_r . w) * P_r + 2 * lambda * w`.
pub fn gradient(p: &PMatrix, w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if w.len() != p.cols() {
        return Err(Error::data(format!(
            "{} weights for {} P-matrix columns",
            w.len(),
            p.cols()
        )));
    }
    let mut g = vec![0.0; w.len()];
    gradient_into(p, w, lambda, &mut g);
    Ok(g)
}

fn gradient_into(p: &PMatrix, w: &[f64], lambda: f64, g: &mut [f64]) {
    for (gi, &wi) in g.iter_mut().zip(w) {
        *gi = 2.0 * lambda * wi;
    }
    for r in 0..p.rows {
        let row = p.row(r);
        let m: f64 = row.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
        if m > 0.0 {
            let f = 2.0 * m;
            for (gi, &pi) in g.iter_mut().zip(row) {
                *gi += f * pi;
            }
        }
    }
}

/// Euclidean projection onto the unit simplex (sort-then-threshold).
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::data("cannot project an empty vector".to_string()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::data("cannot project a non-finite vector".to_string()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// Result of one weight solve: the feasible minimizer, the objective value
/// per accepted iterate (non-increasing, starting from the initial point),
/// and the number of gradient iterations.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub weights: Vec<f64>,
    pub trace: Vec<f64>,
    pub iterations: usize,
}

impl SolveOutcome {
    pub fn initial_objective(&self) -> f64 {
        self.trace[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.trace.last().unwrap()
    }
}

/// Minimize the objective over the simplex by projected gradient descent.
///
/// `w0` defaults to the uniform vector, which guarantees the returned
/// objective never exceeds the uniform-weight objective. Terminates when the
/// infinity-norm change of the iterate drops below `cfg.tol` or after
/// `cfg.max_iter` iterations. The trial step is warm-started from the
/// previous iteration (doubled, first trial 1.0) so backtracking stays
/// cheap; the Armijo test still enforces strict descent on every accepted
/// step.
pub fn solve_weights(p: &PMatrix, cfg: &QpConfig, w0: Option<&[f64]>) -> Result<SolveOutcome> {
    cfg.validate()?;
    let t = p.cols();
    let uniform = vec![1.0 / t as f64; t];
    let mut w = match w0 {
        Some(initial) => {
            if initial.len() != t {
                return Err(Error::data(format!(
                    "{} initial weights for {} columns",
                    initial.len(),
                    t
                )));
            }
            check_simplex(initial)?;
            // Clean up feasibility slack so the iterate starts exactly on
            // the simplex.
            project_simplex(initial)?
        }
        None => uniform,
    };

    let mut f = objective_unchecked(p, &w, cfg.lambda);
    let mut trace = vec![f];
    let mut g = vec![0.0; t];
    let mut step = INITIAL_STEP;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        gradient_into(p, &w, cfg.lambda, &mut g);
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::invariant(
                "non-finite gradient in weight solve".to_string(),
            ));
        }

        // Backtracking along the projection arc: w+ = proj(w - s * g).
        let mut s = step * 2.0;
        let mut accepted: Option<(Vec<f64>, f64, f64)> = None;
        while s > 1e-20 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| wi - s * gi).collect();
            let candidate = project_simplex(&trial)?;
            let delta_sq: f64 = candidate
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if delta_sq == 0.0 {
                break; // stationary: projection returned the current point
            }
            let f_new = objective_unchecked(p, &candidate, cfg.lambda);
            if f_new <= f - (ARMIJO_C / s) * delta_sq {
                accepted = Some((candidate, f_new, delta_sq.sqrt()));
                break;
            }
            s *= ARMIJO_SHRINK;
        }

        let Some((candidate, f_new, _)) = accepted else {
            break; // no descent step exists: w is optimal to working precision
        };
        let inf_change = candidate
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        w = candidate;
        f = f_new;
        trace.push(f);
        step = s;
        iterations += 1;
        if inf_change < cfg.tol {
            break;
        }
    }

    let weights = emit(w)?;
    Ok(SolveOutcome {
        weights,
        trace,
        iterations,
    })
}

/// Emission hygiene: zero negatives within the clamp band, renormalize, and
/// re-check feasibility.
fn emit(mut w: Vec<f64>) -> Result<Vec<f64>> {
    for v in &mut w {
        if *v < 0.0 {
            if *v < -CLAMP_BAND {
                return Err(Error::invariant(format!(
                    "solver produced weight {v} below the clamp band"
                )));
            }
            *v = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if sum <= 0.0 {
        return Err(Error::invariant("solver produced all-zero weights".to_string()));
    }
    for v in &mut w {
        *v /= sum;
    }
    check_simplex(&w).map_err(|e| Error::invariant(e.to_string()))?;
    Ok(w)
}

/// Solve one independent QP per forest. The concatenation of the solutions
/// attains the joint objective, which decomposes as the sum of the
/// per-forest optima.
pub fn solve_all(problems: &[PMatrix], cfg: &QpConfig) -> Result<Vec<SolveOutcome>> {
    problems
        .par_iter()
        .map(|p| solve_weights(p, cfg, None))
        .collect()
}
