//! Lower and upper bounds on the compound common-randomness capacity.
//!
//! The lower bound maximizes `I(U;X)` over channels `P_{U|X}` subject to
//! `I(U;X) - min_s I(U;Y_s) <= R`. The upper bound is the minimum over
//! states of the same program with a single state in the constraint.
//! Both are non-convex; the solver returns the best feasible point it
//! finds and [`grid_oracle`] provides an independent floor.

mod degraded;
mod oracle;
mod program;
mod solver;

pub use degraded::{verify_degraded, DegradationCheck};
pub use oracle::{grid_oracle, GridError, Which, DEFAULT_GRID_CAP};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::source_model::{
    conditional_entropy, entropy, AuxChannel, Axis, CompoundSource, ModelError,
};
use program::Program;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("rate budget must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// `|U|`; `None` means `|X| + |S|` for every program on the source,
    /// including the single-state ones.
    pub u_cardinality: Option<usize>,
    pub restarts: usize,
    /// Iteration cap per penalty round.
    pub max_iters: usize,
    pub penalty_init: f64,
    pub penalty_rounds: usize,
    /// Reporting tolerance in bits.
    pub tolerance: f64,
    pub grid_resolution: usize,
    pub seed: u64,
    /// Short-circuit to `H(X)` when `R >= max_s H(X|Y_s)`.
    pub shortcuts: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            u_cardinality: None,
            restarts: 32,
            max_iters: 400,
            penalty_init: 1.0,
            penalty_rounds: 24,
            tolerance: 1e-3,
            grid_resolution: 10,
            seed: 0,
            shortcuts: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |m: &str| Err(BoundsError::InvalidOptions(m.to_string()));
        if self.u_cardinality == Some(0) {
            return bad("u_cardinality must be at least 1");
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad("tolerance must be positive");
        }
        if self.restarts == 0 || self.max_iters == 0 || self.penalty_rounds == 0 {
            return bad("restarts, max_iters and penalty_rounds must be positive");
        }
        if self.penalty_init.is_nan() || self.penalty_init <= 0.0 {
            return bad("penalty_init must be positive");
        }
        if self.grid_resolution == 0 {
            return bad("grid_resolution must be positive");
        }
        Ok(())
    }

    /// `|U|` for programs on a source with `n_states` states.
    pub fn cardinality_for(&self, x_size: usize, n_states: usize) -> usize {
        self.u_cardinality.unwrap_or(x_size + n_states)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverTrace {
    pub iterations: usize,
    pub restarts: usize,
    /// Running maximum of the objective over restarts, in restart order.
    pub best_so_far: Vec<f64>,
    pub converged: bool,
    /// Set when the value came from a closed form rather than the solver.
    pub shortcut: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundResult {
    pub value: f64,
    pub argmax: AuxChannel,
    /// State attaining the minimum in the constraint (or in the outer min
    /// for the upper bound).
    pub active_state: String,
    pub trace: SolverTrace,
    /// `R - (I(U;X) - min_s I(U;Y_s))` at the argmax.
    pub feasibility_slack: f64,
}

fn check_rate(rate: f64) -> Result<(), BoundsError> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(BoundsError::InvalidRate(rate))
    }
}

/// `max_s H(X|Y_s)`; at or above it both bounds equal `H(X)`.
pub fn corollary1_threshold(src: &CompoundSource) -> f64 {
    src.joints()
        .iter()
        .map(|j| conditional_entropy(j, Axis::Col))
        .fold(0.0, f64::max)
}

fn to_channel(w: &[f64], k: usize) -> AuxChannel {
    AuxChannel::from_rows(w.chunks(k).map(<[f64]>::to_vec).collect())
        .expect("solver keeps rows on the simplex")
}

/// `U = X` embedded in a `k`-letter alphabet, when `k >= |X|`.
fn identity_embedding(nx: usize, k: usize) -> Option<Vec<f64>> {
    (k >= nx).then(|| {
        let mut w = vec![0.0; nx * k];
        for x in 0..nx {
            w[x * k + x] = 1.0;
        }
        w
    })
}

fn solve_states(
    src: &CompoundSource,
    states: &[usize],
    rate: f64,
    opts: &SolverOptions,
    warm: &[Vec<f64>],
) -> Result<BoundResult, BoundsError> {
    check_rate(rate)?;
    opts.validate()?;
    let nx = src.x_alphabet().len();
    // Same |U| for every program on this source, so argmaxes can seed each other.
    let k = opts.cardinality_for(nx, src.n_states());
    let prog = Program::new(src, states, k, rate);

    if opts.shortcuts {
        let sub = src.restrict(states)?;
        let threshold = corollary1_threshold(&sub);
        if rate >= threshold {
            if let Some(w) = identity_embedding(nx, k) {
                let eval = prog.evaluate(&w);
                return Ok(BoundResult {
                    value: eval.i_ux,
                    argmax: to_channel(&w, k),
                    active_state: src.states()[states[eval.active]].clone(),
                    trace: SolverTrace {
                        iterations: 0,
                        restarts: 0,
                        best_so_far: vec![eval.i_ux],
                        converged: true,
                        shortcut: Some(format!("R >= max_s H(X|Y_s) = {threshold:.6}")),
                    },
                    feasibility_slack: -eval.violation(rate),
                });
            }
        }
    }

    let sol = solver::solve(&prog, opts, warm);
    Ok(BoundResult {
        value: sol.eval.i_ux,
        argmax: to_channel(&sol.w, k),
        active_state: src.states()[states[sol.eval.active]].clone(),
        trace: SolverTrace {
            iterations: sol.iterations,
            restarts: sol.restarts,
            best_so_far: sol.best_so_far,
            converged: sol.converged,
            shortcut: None,
        },
        feasibility_slack: -sol.eval.violation(rate),
    })
}

fn flatten(aux: &AuxChannel) -> Vec<f64> {
    aux.rows().concat()
}

/// Maximize `I(U;X)` subject to `I(U;X) - min_s I(U;Y_s) <= R`.
pub fn lower_bound(
    src: &CompoundSource,
    rate: f64,
    opts: &SolverOptions,
) -> Result<BoundResult, BoundsError> {
    lower_bound_warm(src, rate, opts, &[])
}

/// [`lower_bound`] with extra starting channels (used by rate sweeps).
pub fn lower_bound_warm(
    src: &CompoundSource,
    rate: f64,
    opts: &SolverOptions,
    warm: &[AuxChannel],
) -> Result<BoundResult, BoundsError> {
    let states: Vec<usize> = (0..src.n_states()).collect();
    let warm: Vec<Vec<f64>> = warm.iter().map(flatten).collect();
    solve_states(src, &states, rate, opts, &warm)
}

/// The single-state program at state `s`.
pub fn per_state_value(
    src: &CompoundSource,
    s: usize,
    rate: f64,
    opts: &SolverOptions,
) -> Result<BoundResult, BoundsError> {
    per_state_value_warm(src, s, rate, opts, &[])
}

pub fn per_state_value_warm(
    src: &CompoundSource,
    s: usize,
    rate: f64,
    opts: &SolverOptions,
    warm: &[AuxChannel],
) -> Result<BoundResult, BoundsError> {
    if s >= src.n_states() {
        return Err(ModelError::UnknownState(format!("#{s}")).into());
    }
    let warm: Vec<Vec<f64>> = warm.iter().map(flatten).collect();
    solve_states(src, &[s], rate, opts, &warm)
}

/// `min_s` of [`per_state_value`]; ties go to the earlier state.
pub fn upper_bound(
    src: &CompoundSource,
    rate: f64,
    opts: &SolverOptions,
) -> Result<BoundResult, BoundsError> {
    upper_bound_warm(src, rate, opts, &[])
}

pub fn upper_bound_warm(
    src: &CompoundSource,
    rate: f64,
    opts: &SolverOptions,
    warm: &[AuxChannel],
) -> Result<BoundResult, BoundsError> {
    let mut best: Option<BoundResult> = None;
    for s in 0..src.n_states() {
        let r = per_state_value_warm(src, s, rate, opts, warm)?;
        if best.as_ref().is_none_or(|b| r.value < b.value) {
            best = Some(r);
        }
    }
    Ok(best.expect("source has at least one state"))
}

/// Everything [`crate::harness`] reports for one `(source, R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSummary {
    pub rate: f64,
    pub h_x: f64,
    pub threshold: f64,
    pub lower: BoundResult,
    pub upper: BoundResult,
    pub per_state: Vec<BoundResult>,
    /// A state `s'` with `X - Y_s - Y_s'` for all `s`, if one was certified.
    pub degraded_state: Option<String>,
}

/// Both bounds with the closed-form shortcuts applied: `H(X)` above the
/// threshold, and the single program at `s'` when a degraded state exists.
pub fn compute_bounds(
    src: &CompoundSource,
    rate: f64,
    opts: &SolverOptions,
    degradation_tol: f64,
) -> Result<BoundsSummary, BoundsError> {
    let h_x = entropy(&src.x_marginal());
    let threshold = corollary1_threshold(src);
    let lower = lower_bound(src, rate, opts)?;
    // The lower-bound argmax is feasible for every single-state program.
    let seed = [lower.argmax.clone()];
    let per_state = (0..src.n_states())
        .map(|s| per_state_value_warm(src, s, rate, opts, &seed))
        .collect::<Result<Vec<_>, _>>()?;
    let degraded = (0..src.n_states()).find(|&s| verify_degraded(src, s, degradation_tol).degraded);

    let (lower, upper) = match degraded {
        Some(s) if !(opts.shortcuts && rate >= threshold) => {
            let mut single = per_state[s].clone();
            single.trace.shortcut = Some(format!("degraded state {}", src.states()[s]));
            (single.clone(), single)
        }
        _ => {
            let upper = per_state
                .iter()
                .fold(None::<&BoundResult>, |b, r| match b {
                    Some(b) if b.value <= r.value => Some(b),
                    _ => Some(r),
                })
                .cloned()
                .expect("at least one state");
            (lower, upper)
        }
    };
    Ok(BoundsSummary {
        rate,
        h_x,
        threshold,
        lower,
        upper,
        per_state,
        degraded_state: degraded.map(|s| src.states()[s].clone()),
    })
}
