use rand::Rng;

use super::config::{ConfigError, ExperimentConfig};
use super::record::{digest_text, ResultRecord};
use crate::bounds::{
    compute_bounds, grid_oracle, lower_bound, lower_bound_warm, per_state_value_warm,
    verify_degraded, BoundsError, GridError, Which, DEFAULT_GRID_CAP,
};
use crate::protocol::{
    derive_params, exact_evaluate, generate_codebook_guarded, simulate, zeta, Codebook,
    ProtocolError, ProtocolParams, SimulationReport, ZetaInputs,
};
use crate::seeds::substream;
use crate::source_model::{entropy, induce_joints, AuxChannel, CompoundSource, FinitePmf};
use crate::typicality::{enumerate_typical, typical_probability, TypicalityError};

/// Aux letters with less mass than this are dropped before running the protocol.
pub const PRUNE_MASS: f64 = 1e-6;
/// Exact evaluation runs alongside simulation when `|S| |X|^n |Y|^n` is at most this.
pub const EXACT_ALONGSIDE: f64 = 65_536.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{op}: {source}")]
    Bounds {
        op: &'static str,
        source: BoundsError,
    },
    #[error("{op}: {source}")]
    Protocol {
        op: &'static str,
        source: ProtocolError,
    },
    #[error("{op}: {source}")]
    Typicality {
        op: &'static str,
        source: TypicalityError,
    },
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
}

fn bounds_err(op: &'static str) -> impl Fn(BoundsError) -> HarnessError {
    move |source| HarnessError::Bounds { op, source }
}

fn protocol_err(op: &'static str) -> impl Fn(ProtocolError) -> HarnessError {
    move |source| HarnessError::Protocol { op, source }
}

/// The config's digest: SHA-256 of its canonical TOML.
pub fn config_digest(cfg: &ExperimentConfig) -> String {
    digest_text(&cfg.to_toml())
}

fn prepare(cfg: &ExperimentConfig) -> Result<CompoundSource, HarnessError> {
    cfg.validate()?;
    Ok(cfg.compound_source()?)
}

/// Drops `U` letters whose marginal mass is below `threshold` and
/// renormalizes the rows; a typical set over a near-zero letter is empty.
pub fn prune_aux(aux: &AuxChannel, px: &FinitePmf, threshold: f64) -> AuxChannel {
    let k = aux.u_size();
    let mass: Vec<f64> = (0..k)
        .map(|u| {
            (0..aux.x_size())
                .map(|x| px.probs()[x] * aux.get(x, u))
                .sum()
        })
        .collect();
    let keep: Vec<usize> = (0..k).filter(|&u| mass[u] >= threshold).collect();
    if keep.len() == k {
        return aux.clone();
    }
    let names = keep.iter().map(|&u| aux.u_alphabet()[u].clone()).collect();
    let rows = aux
        .rows()
        .iter()
        .map(|row| {
            let kept: Vec<f64> = keep.iter().map(|&u| row[u]).collect();
            let total: f64 = kept.iter().sum();
            if total > 0.0 {
                kept.iter().map(|v| v / total).collect()
            } else {
                vec![1.0 / keep.len() as f64; keep.len()]
            }
        })
        .collect();
    AuxChannel::new(names, rows).expect("pruned rows are pmfs")
}

/// Lower and upper bounds, per-state values, grid oracles, the threshold and
/// the degradation check at `cfg.rate`.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    let src = prepare(cfg)?;
    let rate = cfg.rate;
    let mut rec = ResultRecord::new("bounds", config_digest(cfg), cfg.seed);
    let summary = compute_bounds(&src, rate, &cfg.solver, cfg.verify.degradation_tol)
        .map_err(bounds_err("bounds"))?;
    rec.push(rate, None, None, "h_x", summary.h_x);
    rec.push(rate, None, None, "threshold", summary.threshold);
    rec.push(rate, None, None, "lower", summary.lower.value);
    rec.push(rate, None, None, "upper", summary.upper.value);
    rec.push(
        rate,
        None,
        None,
        "lower_slack",
        summary.lower.feasibility_slack,
    );
    rec.push(
        rate,
        None,
        Some(&summary.lower.active_state),
        "lower_active",
        summary.lower.value,
    );
    rec.push(
        rate,
        None,
        Some(&summary.upper.active_state),
        "upper_active",
        summary.upper.value,
    );
    for (label, r) in src.states().iter().zip(&summary.per_state) {
        rec.push(rate, None, Some(label), "per_state", r.value);
    }
    for r in [&summary.lower, &summary.upper] {
        if let Some(s) = &r.trace.shortcut {
            rec.notes.push(format!("shortcut: {s}"));
        }
    }
    let residual = (0..src.n_states())
        .map(|s| verify_degraded(&src, s, cfg.verify.degradation_tol).residual)
        .fold(f64::INFINITY, f64::min);
    rec.push(
        rate,
        None,
        summary.degraded_state.as_deref(),
        "degraded",
        f64::from(u8::from(summary.degraded_state.is_some())),
    );
    rec.push(rate, None, None, "degradation_residual", residual);

    let nx = src.x_alphabet().len();
    let res = cfg.solver.grid_resolution;
    for (which, metric, k) in [
        (
            Which::Lower,
            "oracle_lower",
            cfg.solver.cardinality_for(nx, src.n_states()),
        ),
        (
            Which::Upper,
            "oracle_upper",
            cfg.solver.cardinality_for(nx, src.n_states()),
        ),
    ] {
        match grid_oracle(&src, rate, res, which, k, DEFAULT_GRID_CAP) {
            Ok(v) => rec.push(rate, None, None, metric, v),
            Err(e @ GridError::TooLarge { .. }) => rec.notes.push(format!("{metric} skipped: {e}")),
            Err(e) => {
                return Err(HarnessError::Invalid {
                    op: "bounds",
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(rec)
}

/// Per-rate bound columns with warm starts carried along the grid. A drop
/// larger than `cfg.verify.tolerance` marks the record as failed.
pub fn sweep_rate(cfg: &ExperimentConfig, rates: &[f64]) -> Result<ResultRecord, HarnessError> {
    let src = prepare(cfg)?;
    if rates.is_empty()
        || rates.windows(2).any(|w| w[1] <= w[0])
        || rates.iter().any(|r| r.is_nan() || *r <= 0.0)
    {
        return Err(HarnessError::Invalid {
            op: "sweep",
            reason: "rates must be positive and strictly increasing".into(),
        });
    }
    let mut rec = ResultRecord::new("sweep", config_digest(cfg), cfg.seed);
    let mut warm_lower: Vec<AuxChannel> = Vec::new();
    let mut warm_state: Vec<Vec<AuxChannel>> = vec![Vec::new(); src.n_states()];
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for &rate in rates {
        let lo =
            lower_bound_warm(&src, rate, &cfg.solver, &warm_lower).map_err(bounds_err("sweep"))?;
        let mut up = f64::INFINITY;
        for (s, warm) in warm_state.iter_mut().enumerate() {
            let r = per_state_value_warm(&src, s, rate, &cfg.solver, warm)
                .map_err(bounds_err("sweep"))?;
            up = up.min(r.value);
            *warm = vec![r.argmax];
        }
        rec.push(rate, None, None, "lower", lo.value);
        rec.push(rate, None, None, "upper", up);
        lowers.push(lo.value);
        uppers.push(up);
        warm_lower = vec![lo.argmax];
    }
    let tol = cfg.verify.tolerance;
    let mut ok = true;
    for (name, col) in [("lower", &lowers), ("upper", &uppers)] {
        for (i, w) in col.windows(2).enumerate() {
            if w[1] < w[0] - tol {
                ok = false;
                rec.notes.push(format!(
                    "solver quality: {name} drops from {} at R={} to {} at R={}",
                    w[0],
                    rates[i],
                    w[1],
                    rates[i + 1]
                ));
            }
        }
    }
    rec.passed = Some(ok);
    Ok(rec)
}

/// The aux channel a protocol run uses: explicit, or the pruned lower-bound argmax.
pub fn protocol_aux(
    cfg: &ExperimentConfig,
    src: &CompoundSource,
) -> Result<AuxChannel, HarnessError> {
    match cfg.explicit_aux()? {
        Some(aux) => Ok(aux),
        None => {
            let r = lower_bound(src, cfg.rate, &cfg.solver).map_err(bounds_err("simulate"))?;
            Ok(prune_aux(&r.argmax, &src.x_marginal(), PRUNE_MASS))
        }
    }
}

/// Stream seed for the Monte Carlo trials at blocklength `n`, shared by every
/// state and codebook attempt.
pub fn trial_seed(root: u64, n: usize) -> u64 {
    substream(root, "protocol/trials", &[n as u64]).random()
}

/// One codebook per attempt from `(seed, "protocol/codebook", n, attempt)`;
/// keeps the one with the smallest worst-state simulated error.
#[allow(clippy::too_many_arguments)]
pub fn best_codebook(
    cfg: &ExperimentConfig,
    src: &CompoundSource,
    aux: &AuxChannel,
    params: &ProtocolParams,
    pu: &FinitePmf,
    states: &[usize],
) -> Result<(u32, Codebook, Vec<SimulationReport>), HarnessError> {
    let spec = cfg
        .protocol
        .as_ref()
        .expect("caller checked the protocol block");
    let seed = trial_seed(cfg.seed, params.n);
    let mut best: Option<(u32, Codebook, Vec<SimulationReport>, f64)> = None;
    for attempt in 0..spec.codebook_retries {
        let mut rng = substream(
            cfg.seed,
            "protocol/codebook",
            &[params.n as u64, u64::from(attempt)],
        );
        let cb = generate_codebook_guarded(params, pu, &mut rng, spec.codebook_guard)
            .map_err(protocol_err("simulate"))?;
        let reports = states
            .iter()
            .map(|&s| simulate(src, s, aux, params, &cb, spec.trials, seed))
            .collect::<Result<Vec<_>, _>>()
            .map_err(protocol_err("simulate"))?;
        let worst = reports.iter().map(|r| r.error).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| worst < b.3) {
            best = Some((attempt, cb, reports, worst));
        }
    }
    let (attempt, cb, reports, _) = best.expect("at least one attempt");
    Ok((attempt, cb, reports))
}

/// Simulation reports for every `n` in the protocol block (optionally one
/// state only), with `zeta(n)` and, where enumerable, exact values.
pub fn run_simulate(
    cfg: &ExperimentConfig,
    only_state: Option<&str>,
) -> Result<ResultRecord, HarnessError> {
    let src = prepare(cfg)?;
    let spec = cfg.protocol.as_ref().ok_or(HarnessError::Invalid {
        op: "simulate",
        reason: "config has no [protocol] block".into(),
    })?;
    let states: Vec<usize> = match only_state {
        Some(label) => vec![src.state_index(label).map_err(|e| HarnessError::Invalid {
            op: "simulate",
            reason: e.to_string(),
        })?],
        None => (0..src.n_states()).collect(),
    };
    let aux = protocol_aux(cfg, &src)?;
    let ind = induce_joints(&aux, &src).map_err(|e| protocol_err("simulate")(e.into()))?;
    let pu = ind.u_marginal();
    let zeta_inputs = ZetaInputs::new(&aux, &src).map_err(protocol_err("simulate"))?;
    let mut rec = ResultRecord::new("simulate", config_digest(cfg), cfg.seed);
    let rate = cfg.rate;
    rec.push(rate, None, None, "i_ux", ind.i_ux());
    rec.push(rate, None, None, "min_i_uy", ind.min_i_uy());
    rec.push(rate, None, None, "h_u", entropy(&pu));

    let mut zeta_note = None;
    for &n in &spec.n {
        let params = derive_params(&aux, &src, n, spec.sigma, rate, spec.mu)
            .map_err(protocol_err("simulate"))?;
        let (attempt, cb, reports) = best_codebook(cfg, &src, &aux, &params, &pu, &states)?;
        rec.push(rate, Some(n), None, "n1", params.n1 as f64);
        rec.push(rate, Some(n), None, "n2", params.n2 as f64);
        rec.push(rate, Some(n), None, "mu", params.mu);
        rec.push(rate, Some(n), None, "message_rate", params.message_rate());
        rec.push(rate, Some(n), None, "codebook_attempt", f64::from(attempt));
        match zeta(n as f64, params.sigmas(), params.mu, &zeta_inputs) {
            Ok(z) => rec.push(rate, Some(n), None, "zeta", z),
            Err(e) => zeta_note = Some(format!("zeta undefined: {e}")),
        }
        for r in &reports {
            let st = Some(r.state.as_str());
            for (metric, v) in [
                ("error", r.error),
                ("error_se", r.error_se),
                ("entropy_rate", r.entropy_rate),
                ("entropy_rate_plugin", r.entropy_rate_plugin),
                ("k_support_rate", r.k_support_rate),
                ("freq_sentinel", r.freq_sentinel),
                ("freq_a", r.freq_a),
                ("freq_b", r.freq_b),
                ("freq_miss", r.freq_miss),
            ] {
                rec.push(rate, Some(n), st, metric, v);
            }
            rec.notes
                .push(format!("n={n} state={} k_digest={}", r.state, r.k_digest));
        }
        let size = src.n_states() as f64
            * (src.x_alphabet().len() as f64).powi(n as i32)
            * (src.y_alphabet().len() as f64).powi(n as i32);
        if size <= EXACT_ALONGSIDE {
            let exact =
                exact_evaluate(&src, &aux, &params, &cb).map_err(protocol_err("simulate"))?;
            rec.push(
                rate,
                Some(n),
                None,
                "exact_entropy_rate",
                exact.entropy_rate(),
            );
            for &s in &states {
                let e = &exact.states[s];
                rec.push(rate, Some(n), Some(&e.state), "exact_error", e.error);
            }
        }
    }
    if let Some(note) = zeta_note {
        rec.notes.push(note);
    }
    Ok(rec)
}

struct Checks {
    rec: ResultRecord,
    all: bool,
}

impl Checks {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        self.rec.push(
            self.rec_rate(),
            None,
            None,
            &format!("pass:{name}"),
            f64::from(u8::from(ok)),
        );
        if !ok {
            self.all = false;
            self.rec.notes.push(format!("FAIL {name}: {detail}"));
        }
    }

    fn rec_rate(&self) -> f64 {
        self.rec.rows.first().map_or(0.0, |r| r.rate)
    }
}

/// Runs the invariant suite on the configured source and reports pass/fail
/// per property.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<ResultRecord, HarnessError> {
    let src = prepare(cfg)?;
    let opts = &cfg.solver;
    let tol = cfg.verify.tolerance;
    let rate = cfg.rate;
    let mut c = Checks {
        rec: ResultRecord::new("verify", config_digest(cfg), cfg.seed),
        all: true,
    };
    let h_x = entropy(&src.x_marginal());
    c.rec.push(rate, None, None, "h_x", h_x);

    let rates: Vec<f64> = cfg
        .sweep
        .as_ref()
        .map_or_else(|| vec![rate], |s| s.rates.clone());
    let sweep = sweep_rate(cfg, &rates)?;
    let lowers = sweep.values("lower");
    let uppers = sweep.values("upper");
    let ordered = lowers
        .iter()
        .zip(&uppers)
        .all(|(l, u)| *l <= u + tol && *u <= h_x + tol);
    c.check(
        "ordering",
        ordered,
        format!("lower {lowers:?}, upper {uppers:?}, H(X) {h_x}"),
    );
    c.check(
        "monotone_rate",
        sweep.passed == Some(true),
        sweep.notes.join("; "),
    );

    let summary = compute_bounds(&src, rate, opts, cfg.verify.degradation_tol)
        .map_err(bounds_err("verify"))?;
    c.rec.push(rate, None, None, "lower", summary.lower.value);
    c.rec.push(rate, None, None, "upper", summary.upper.value);
    if src.n_states() == 1 || summary.degraded_state.is_some() {
        let gap = (summary.lower.value - summary.upper.value).abs();
        c.check("collapse", gap <= tol, format!("|lower - upper| = {gap}"));
    }
    let above = summary.threshold + 0.05;
    let lo = lower_bound(&src, above, opts).map_err(bounds_err("verify"))?;
    let up = crate::bounds::upper_bound(&src, above, opts).map_err(bounds_err("verify"))?;
    let ok = (lo.value - h_x).abs() <= tol && (up.value - h_x).abs() <= tol;
    c.check(
        "threshold_regime",
        ok,
        format!(
            "at R={above}: lower {} upper {} H(X) {h_x}",
            lo.value, up.value
        ),
    );

    if src.n_states() > 1 {
        let mut ok = true;
        let mut detail = Vec::new();
        for s in 0..src.n_states() {
            let single = src.single_state(s);
            let v = lower_bound(&single, rate, opts)
                .map_err(bounds_err("verify"))?
                .value;
            if v < summary.lower.value - tol {
                ok = false;
                detail.push(format!(
                    "{}: {v} < {}",
                    src.states()[s],
                    summary.lower.value
                ));
            }
        }
        c.check("state_addition", ok, detail.join("; "));
    }

    let nx = src.x_alphabet().len();
    for (which, name, k, solver_value) in [
        (
            Which::Lower,
            "oracle_lower",
            opts.cardinality_for(nx, src.n_states()),
            summary.lower.value,
        ),
        (
            Which::Upper,
            "oracle_upper",
            opts.cardinality_for(nx, src.n_states()),
            summary.upper.value,
        ),
    ] {
        match grid_oracle(&src, rate, opts.grid_resolution, which, k, DEFAULT_GRID_CAP) {
            Ok(g) => c.check(
                name,
                g <= solver_value + cfg.verify.oracle_slack,
                format!("grid {g} vs solver {solver_value}"),
            ),
            Err(e) => c.rec.notes.push(format!("{name} skipped: {e}")),
        }
    }

    if let Some(spec) = &cfg.protocol {
        verify_protocol(cfg, &src, spec.n.iter().copied().min().unwrap_or(1), &mut c)?;
    }
    c.rec.passed = Some(c.all);
    Ok(c.rec)
}

fn verify_protocol(
    cfg: &ExperimentConfig,
    src: &CompoundSource,
    n: usize,
    c: &mut Checks,
) -> Result<(), HarnessError> {
    let spec = cfg.protocol.as_ref().expect("checked by caller");
    let aux = protocol_aux(cfg, src)?;
    let params = derive_params(&aux, src, n, spec.sigma, cfg.rate, spec.mu)
        .map_err(protocol_err("verify"))?;
    c.check(
        "rate_compliance",
        params.message_rate() <= cfg.rate,
        format!("log2(N1+1)/n = {}", params.message_rate()),
    );
    let pu = induce_joints(&aux, src)
        .map_err(|e| protocol_err("verify")(e.into()))?
        .u_marginal();
    let states: Vec<usize> = (0..src.n_states()).collect();
    let (_, cb, reports) = best_codebook(cfg, src, &aux, &params, &pu, &states)?;
    let same_k = reports.windows(2).all(|w| w[0].k_digest == w[1].k_digest);
    c.check(
        "k_state_independent",
        same_k,
        "K streams differ across states".into(),
    );
    match exact_evaluate(src, &aux, &params, &cb) {
        Ok(exact) => {
            let mut ok = true;
            let mut detail = Vec::new();
            for (r, e) in reports.iter().zip(&exact.states) {
                let se = (e.error * (1.0 - e.error) / r.trials as f64).sqrt();
                let within = if se == 0.0 {
                    r.error == e.error
                } else {
                    (r.error - e.error).abs() <= 3.0 * se
                };
                if !within {
                    ok = false;
                    detail.push(format!(
                        "{}: simulated {} exact {} se {se}",
                        e.state, r.error, e.error
                    ));
                }
            }
            c.check("simulate_vs_exact", ok, detail.join("; "));
        }
        Err(ProtocolError::ExactTooLarge { .. }) => {
            c.rec.notes.push(format!("exactness skipped at n={n}"))
        }
        Err(e) => return Err(protocol_err("verify")(e)),
    }
    Ok(())
}

/// Type classes of the `sigma`-typical set of `p` at blocklength `n`. The
/// record's digest covers the arguments, since no config is involved.
pub fn run_enumerate_typical(
    p: &FinitePmf,
    n: usize,
    sigma: f64,
) -> Result<ResultRecord, HarnessError> {
    let op = "enumerate-typical";
    let set =
        enumerate_typical(p, n, sigma).map_err(|source| HarnessError::Typicality { op, source })?;
    let prob = typical_probability(p, n, sigma)
        .map_err(|source| HarnessError::Typicality { op, source })?;
    let canonical = format!("pmf = {:?}\nn = {n}\nsigma = {sigma:?}\n", p.probs());
    let mut rec = ResultRecord::new(op, digest_text(&canonical), 0);
    for class in &set.classes {
        let label = class
            .counts
            .iter()
            .map(u32::to_string)
            .collect::<Vec<_>>()
            .join("/");
        rec.push(0.0, Some(n), Some(&label), "class_size", class.size());
    }
    rec.push(0.0, Some(n), None, "classes", set.classes.len() as f64);
    rec.push(0.0, Some(n), None, "total", set.total);
    rec.push(0.0, Some(n), None, "probability", prob);
    Ok(rec)
}
