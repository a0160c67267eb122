//! Dual coordinate descent for the L1-loss (hinge) linear SVM.
//!
//! Minimizes `λ‖w‖² + (1/n) Σ max(0, 1 − y_i w·x_i)`, which equals
//! `2λ · (½‖w‖² + C Σ hinge)` with `C = 1/(2λn)`. The intercept is carried as
//! an extra input dimension of constant value `bias_scale`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct BinaryProblem<'a> {
    /// Rows already standardized, without the bias column.
    pub rows: &'a [Vec<f64>],
    /// +1 / −1 targets.
    pub targets: &'a [f64],
    pub lambda: f64,
    pub bias_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarySolution {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Best primal objective seen after initialization and after each epoch.
    pub objective_history: Vec<f64>,
}

fn dot_aug(w: &[f64], x: &[f64], bias_scale: f64) -> f64 {
    let d = x.len();
    x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d] * bias_scale
}

pub fn primal_objective(problem: &BinaryProblem<'_>, w_aug: &[f64]) -> f64 {
    let n = problem.rows.len() as f64;
    let hinge: f64 = problem
        .rows
        .iter()
        .zip(problem.targets)
        .map(|(x, &y)| (1.0 - y * dot_aug(w_aug, x, problem.bias_scale)).max(0.0))
        .sum();
    problem.lambda * w_aug.iter().map(|v| v * v).sum::<f64>() + hinge / n
}

/// Fixed-epoch dual coordinate descent with a seeded visiting order per
/// epoch. Returns the best primal iterate seen.
pub fn solve(problem: &BinaryProblem<'_>, epochs: usize, seed: u64) -> BinarySolution {
    let n = problem.rows.len();
    let d = problem.rows.first().map_or(0, Vec::len);
    let c = 1.0 / (2.0 * problem.lambda * n as f64);
    let s = problem.bias_scale;

    let q_diag: Vec<f64> = problem
        .rows
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + s * s)
        .collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; d + 1];
    let mut best = w.clone();
    let mut best_obj = primal_objective(problem, &w);
    let mut history = vec![best_obj];

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            if q_diag[i] <= 0.0 {
                continue;
            }
            let x = &problem.rows[i];
            let y = problem.targets[i];
            let g = y * dot_aug(&w, x, s) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() < 1e-12 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / q_diag[i]).clamp(0.0, c);
            let delta = (alpha[i] - old) * y;
            for (wk, xk) in w.iter_mut().zip(x) {
                *wk += delta * xk;
            }
            w[d] += delta * s;
        }
        let obj = primal_objective(problem, &w);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from_slice(&w);
        }
        history.push(best_obj);
    }

    BinarySolution {
        bias: best[d] * s,
        weights: best[..d].to_vec(),
        objective_history: history,
    }
}
