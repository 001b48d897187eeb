//! Multi-start projected-gradient ascent with an exact penalty on the
//! rate constraint, followed by a feasibility repair.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;

use super::program::{Eval, Program};
use super::SolverOptions;
use crate::seeds::substream;
use crate::simplex;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e3;
/// Violation accepted at the end of the penalty phase (the repair removes it).
const PENALTY_FEASIBLE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub w: Vec<f64>,
    pub eval: Eval,
    pub iterations: usize,
    pub converged: bool,
    pub best_so_far: Vec<f64>,
    pub restarts: usize,
}

struct Run {
    w: Vec<f64>,
    eval: Eval,
    iterations: usize,
    converged: bool,
}

/// Projected gradient ascent on the penalized objective at a fixed penalty.
fn ascend(prog: &Program, w: &mut Vec<f64>, lambda: f64, max_iters: usize) -> (usize, bool) {
    let n = w.len();
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut step: f64 = 1.0;
    let mut eval = prog.evaluate(w);
    let mut value = prog.penalized(&eval, lambda);
    for iter in 0..max_iters {
        prog.grad_penalized(w, &eval, lambda, &mut grad);
        step = (step * 2.0).min(MAX_STEP);
        let accepted = loop {
            for i in 0..n {
                trial[i] = w[i] + step * grad[i];
            }
            for row in trial.chunks_mut(prog.k) {
                simplex::project(row);
            }
            let decrease: f64 = grad
                .iter()
                .zip(trial.iter().zip(w.iter()))
                .map(|(g, (t, c))| g * (t - c))
                .sum();
            let trial_eval = prog.evaluate(&trial);
            let trial_value = prog.penalized(&trial_eval, lambda);
            if trial_value >= value + ARMIJO_C * decrease {
                break Some((trial_eval, trial_value));
            }
            step *= 0.5;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some((trial_eval, trial_value)) = accepted else {
            return (iter, true);
        };
        let moved = trial
            .iter()
            .zip(w.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let gained = trial_value - value;
        std::mem::swap(w, &mut trial);
        eval = trial_eval;
        value = trial_value;
        if moved < 1e-12 || gained.abs() < 1e-15 {
            return (iter + 1, true);
        }
    }
    (max_iters, false)
}

/// Mixes every row toward the U-marginal until the rate constraint holds.
/// `U` becomes independent of `X` at the far end, where the constraint is slack.
pub(crate) fn repair(prog: &Program, w: &[f64]) -> Vec<f64> {
    if prog.evaluate(w).violation(prog.rate) <= 0.0 {
        return w.to_vec();
    }
    let q = prog.u_marginal(w);
    let mix = |t: f64| -> Vec<f64> {
        w.chunks(prog.k)
            .flat_map(|row| row.iter().zip(&q).map(move |(a, b)| (1.0 - t) * a + t * b))
            .collect()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if prog.evaluate(&mix(mid)).violation(prog.rate) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    mix(hi)
}

fn solve_from(prog: &Program, start: Vec<f64>, opts: &SolverOptions) -> Run {
    let mut w = start;
    let mut lambda = opts.penalty_init;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..opts.penalty_rounds {
        let (it, conv) = ascend(prog, &mut w, lambda, opts.max_iters);
        iterations += it;
        converged = conv;
        if prog.evaluate(&w).violation(prog.rate) <= PENALTY_FEASIBLE {
            break;
        }
        lambda *= 2.0;
    }
    let w = repair(prog, &w);
    let eval = prog.evaluate(&w);
    Run {
        w,
        eval,
        iterations,
        converged,
    }
}

fn starting_point(prog: &Program, opts: &SolverOptions, restart: usize) -> Vec<f64> {
    let (nx, k) = (prog.nx, prog.k);
    let mut rng = substream(opts.seed, "bounds/restart", &[restart as u64]);
    let uniform = 1.0 / k as f64;
    let mut w = vec![0.0; nx * k];
    match restart {
        0 => {
            // Identity embedding mixed halfway with uniform.
            for x in 0..nx {
                for u in 0..k {
                    let hit = if u == x % k { 1.0 } else { 0.0 };
                    w[x * k + u] = 0.5 * hit + 0.5 * uniform;
                }
            }
        }
        r if r % 3 == 1 => {
            // A random deterministic map, blurred by a random amount.
            let blur: f64 = rng.random_range(0.05..0.95);
            for x in 0..nx {
                let target = rng.random_range(0..k);
                for u in 0..k {
                    let hit = if u == target { 1.0 } else { 0.0 };
                    w[x * k + u] = (1.0 - blur) * hit + blur * uniform;
                }
            }
        }
        r => {
            let shape = if r % 3 == 2 { 1.0 } else { 0.3 };
            let gamma = Gamma::new(shape, 1.0).expect("valid gamma shape");
            for row in w.chunks_mut(k) {
                for v in row.iter_mut() {
                    *v = gamma.sample(&mut rng) + 1e-12;
                }
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
    }
    w
}

/// Best feasible point over all restarts; ties go to the lowest restart index.
pub(crate) fn solve(prog: &Program, opts: &SolverOptions, warm: &[Vec<f64>]) -> Solution {
    let warm: Vec<Vec<f64>> = warm
        .iter()
        .filter(|w| w.len() == prog.nx * prog.k)
        .cloned()
        .collect();
    let mut starts = warm.clone();
    starts.extend((0..opts.restarts.max(1)).map(|r| starting_point(prog, opts, r)));
    let mut runs: Vec<Run> = starts
        .into_par_iter()
        .map(|s| solve_from(prog, s, opts))
        .collect();
    // A feasible warm start also competes unchanged, so the result never
    // falls below it.
    for w in warm {
        let eval = prog.evaluate(&w);
        if eval.violation(prog.rate) <= 0.0 {
            runs.push(Run {
                w,
                eval,
                iterations: 0,
                converged: true,
            });
        }
    }

    let mut best_so_far = Vec::with_capacity(runs.len());
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.eval.i_ux > runs[best].eval.i_ux {
            best = i;
        }
        best_so_far.push(runs[best].eval.i_ux);
    }
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let converged = runs[best].converged;
    let restarts = runs.len();
    let winner = runs.into_iter().nth(best).expect("at least one restart");
    Solution {
        w: winner.w,
        eval: winner.eval,
        iterations,
        converged,
        best_so_far,
        restarts,
    }
}
