//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use compound_cr::bounds::{
    compute_bounds, grid_oracle, lower_bound, lower_bound_warm, per_state_value_warm, upper_bound,
    verify_degraded, Which, DEFAULT_GRID_CAP,
};
use compound_cr::protocol::{
    derive_params, exact_evaluate, generate_codebook, simulate, zeta, zeta_crossover, MuPolicy,
    ZetaInputs,
};
use compound_cr::seeds::substream;
use compound_cr::source_model::{binary_entropy, bsc, entropy, induce_joints, JointPmf};
use compound_cr::typicality::{
    concentration_constants, enumerate_typical, typical_probability, TypicalSampler,
};
use compound_cr::{
    AuxChannel, Codebook, CompoundSource, FinitePmf, ProtocolParams, Sequence, Sigmas,
    SolverOptions,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_time(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn no_shortcut() -> SolverOptions {
    SolverOptions {
        shortcuts: false,
        ..SolverOptions::default()
    }
}

fn c1_threshold_regime() -> Outcome {
    let start = Instant::now();
    let src = binary_bsc_source(0.5, &[0.1, 0.25]);
    let rate = binary_entropy(0.25) + 0.05;
    let h_x = entropy(&src.x_marginal());
    ensure((h_x - 1.0).abs() < 1e-12, || format!("H(X) = {h_x}"))?;
    let mut seen = Vec::new();
    for opts in [SolverOptions::default(), no_shortcut()] {
        let lo = lower_bound(&src, rate, &opts)
            .map_err(|e| e.to_string())?
            .value;
        let up = upper_bound(&src, rate, &opts)
            .map_err(|e| e.to_string())?
            .value;
        ensure((lo - 1.0).abs() <= 1e-3 && (up - 1.0).abs() <= 1e-3, || {
            format!("shortcuts={}: lower {lo}, upper {up}", opts.shortcuts)
        })?;
        seen.push((lo, up));
    }
    within_time(start, Duration::from_secs(60))?;
    Ok(format!("lower/upper {:?} in {:?}", seen, start.elapsed()))
}

fn c2_single_state() -> Outcome {
    let src = CompoundSource::from_joints(vec![identity_joint(2)]).unwrap();
    let mut vals = Vec::new();
    for opts in [SolverOptions::default(), no_shortcut()] {
        let lo = lower_bound(&src, 0.1, &opts)
            .map_err(|e| e.to_string())?
            .value;
        ensure((lo - 1.0).abs() <= 1e-3, || {
            format!("shortcuts={}: lower {lo}", opts.shortcuts)
        })?;
        vals.push(lo);
    }
    Ok(format!("lower {vals:?}"))
}

fn c3_single_state_collapse() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst_gap = 0.0f64;
    let mut worst_oracle = f64::NEG_INFINITY;
    for case in 0..50 {
        let src = random_source(&mut r, 2, 2, 1);
        for rate in [0.1, 0.3, 0.7] {
            let opts = SolverOptions {
                seed: case,
                ..SolverOptions::default()
            };
            let lo = lower_bound(&src, rate, &opts)
                .map_err(|e| e.to_string())?
                .value;
            let up = upper_bound(&src, rate, &opts)
                .map_err(|e| e.to_string())?
                .value;
            let gap = (lo - up).abs();
            worst_gap = worst_gap.max(gap);
            ensure(gap <= 2e-3, || {
                format!("case {case} R={rate}: lower {lo} upper {up}")
            })?;
            let k = opts.cardinality_for(2, 1);
            for (which, v) in [(Which::Lower, lo), (Which::Upper, up)] {
                let g = grid_oracle(&src, rate, 10, which, k, DEFAULT_GRID_CAP)
                    .map_err(|e| e.to_string())?;
                worst_oracle = worst_oracle.max(g - v);
                ensure(g <= v + 2e-2, || {
                    format!("case {case} R={rate}: grid {g} above solver {v}")
                })?;
            }
        }
    }
    within_time(start, Duration::from_secs(600))?;
    Ok(format!(
        "max |lower-upper| {worst_gap:.2e}, max grid-solver {worst_oracle:.2e}, {:?}",
        start.elapsed()
    ))
}

fn c4_ordering_suite() -> Outcome {
    let start = Instant::now();
    let tol = 2e-3;
    let rates = [0.1, 0.3, 0.7];
    let mut r = rng(4);
    let mut worst = [f64::NEG_INFINITY; 5];
    for case in 0..100u64 {
        let states = 2 + (case % 2) as usize;
        let src = random_source(&mut r, 2, 2, states);
        let sub = src.restrict(&(0..states - 1).collect::<Vec<_>>()).unwrap();
        let h_x = entropy(&src.x_marginal());
        // One |U| for every program so that argmaxes can seed each other.
        let opts = SolverOptions {
            u_cardinality: Some(2 + 3),
            seed: case,
            ..SolverOptions::default()
        };
        let (mut warm_full, mut warm_sub) = (Vec::<AuxChannel>::new(), Vec::<AuxChannel>::new());
        let mut warm_state: Vec<Vec<AuxChannel>> = vec![Vec::new(); states];
        let (mut prev_lo, mut prev_up) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &rate in &rates {
            let e = |e: compound_cr::bounds::BoundsError| e.to_string();
            let lo = lower_bound_warm(&src, rate, &opts, &warm_full).map_err(e)?;
            let mut seeds_sub = warm_sub.clone();
            seeds_sub.push(lo.argmax.clone());
            let lo_sub = lower_bound_warm(&sub, rate, &opts, &seeds_sub).map_err(e)?;
            let mut per_state = Vec::new();
            for s in 0..states {
                let mut seeds = warm_state[s].clone();
                seeds.push(lo.argmax.clone());
                let v = per_state_value_warm(&src, s, rate, &opts, &seeds).map_err(e)?;
                warm_state[s] = vec![v.argmax.clone()];
                per_state.push(v.value);
            }
            let up = per_state.iter().copied().fold(f64::INFINITY, f64::min);
            let up_sub = per_state[..states - 1]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let checks = [
                (lo.value - up, "lower <= upper"),
                (up - h_x, "upper <= H(X)"),
                (prev_lo - lo.value, "lower non-decreasing in R"),
                (prev_up - up, "upper non-decreasing in R"),
                (
                    lo.value - lo_sub.value,
                    "lower non-increasing under state addition",
                ),
            ];
            for (i, (excess, what)) in checks.iter().enumerate() {
                worst[i] = worst[i].max(*excess);
                ensure(*excess <= tol, || {
                    format!("case {case} R={rate}: {what} violated by {excess:.3e}")
                })?;
            }
            ensure(up - up_sub <= tol, || {
                format!("case {case} R={rate}: upper grows under state addition")
            })?;
            prev_lo = lo.value;
            prev_up = up;
            warm_full = vec![lo.argmax];
            warm_sub = vec![lo_sub.argmax];
        }
    }
    Ok(format!(
        "worst excesses {:?} in {:?}",
        worst.map(|w| format!("{w:.1e}")),
        start.elapsed()
    ))
}

fn c5_degraded() -> Outcome {
    let px = FinitePmf::uniform(2).unwrap();
    // BSC(0.1) followed by BSC(0.1875) is BSC(0.25).
    let composed: Vec<Vec<f64>> = (0..2)
        .map(|x| {
            (0..2)
                .map(|z| (0..2).map(|y| bsc(0.1)[x][y] * bsc(0.1875)[y][z]).sum())
                .collect()
        })
        .collect();
    ensure((composed[0][1] - 0.25).abs() < 1e-15, || {
        format!("composition {composed:?}")
    })?;
    let src = CompoundSource::from_channels(&px, &[bsc(0.1), composed]).unwrap();
    let check = verify_degraded(&src, 1, 1e-9);
    ensure(check.degraded && check.residual < 1e-9, || {
        format!("degraded {} residual {}", check.degraded, check.residual)
    })?;
    let opts = SolverOptions::default();
    let mut gaps = Vec::new();
    for rate in [0.1, 0.3, 0.5, 0.7] {
        let lo = lower_bound(&src, rate, &opts)
            .map_err(|e| e.to_string())?
            .value;
        let up = upper_bound(&src, rate, &opts)
            .map_err(|e| e.to_string())?
            .value;
        ensure((lo - up).abs() <= 2e-3, || {
            format!("R={rate}: lower {lo} upper {up}")
        })?;
        let summary = compute_bounds(&src, rate, &opts, 1e-9).map_err(|e| e.to_string())?;
        ensure(summary.degraded_state.as_deref() == Some("s1"), || {
            "summary missed the degraded state".into()
        })?;
        gaps.push((lo - up).abs());
    }
    Ok(format!(
        "residual {:.1e}, |lower-upper| {:?}",
        check.residual, gaps
    ))
}

struct ExactCase {
    name: &'static str,
    src: CompoundSource,
    aux: AuxChannel,
    sigma: f64,
    n: usize,
    n1: u64,
    n2: u64,
}

fn params_for(case: &ExactCase) -> ProtocolParams {
    let ind = induce_joints(&case.aux, &case.src).unwrap();
    ProtocolParams {
        n: case.n,
        sigma: case.sigma,
        mu: 9.0 * case.sigma * entropy(&ind.u_marginal()),
        rate: 64.0,
        n1: case.n1,
        n2: case.n2,
        i_ux: ind.i_ux(),
        min_i_uy: ind.min_i_uy(),
        h_u: entropy(&ind.u_marginal()),
    }
}

fn exact_cases() -> Vec<ExactCase> {
    let uniform = FinitePmf::uniform(2).unwrap();
    let indep = JointPmf::product(&uniform, &uniform).unwrap();
    let aux = |a: f64| AuxChannel::from_rows(bsc(a)).unwrap();
    vec![
        ExactCase {
            name: "bsc-pair",
            src: binary_bsc_source(0.5, &[0.1, 0.25]),
            aux: aux(0.35),
            sigma: 0.3,
            n: 4,
            n1: 3,
            n2: 3,
        },
        ExactCase {
            name: "skewed",
            src: binary_bsc_source(0.4, &[0.2]),
            aux: aux(0.4),
            sigma: 0.3,
            n: 4,
            n1: 4,
            n2: 2,
        },
        ExactCase {
            name: "noisy-pair",
            src: binary_bsc_source(0.5, &[0.25, 0.4]),
            aux: aux(0.35),
            sigma: 0.32,
            n: 4,
            n1: 2,
            n2: 5,
        },
        ExactCase {
            name: "identity-indep",
            src: CompoundSource::from_joints(vec![identity_joint(2), indep.clone()]).unwrap(),
            aux: AuxChannel::identity(2),
            sigma: 0.1,
            n: 4,
            n1: 2,
            n2: 4,
        },
        ExactCase {
            name: "identity-short",
            src: CompoundSource::from_joints(vec![identity_joint(2), indep]).unwrap(),
            aux: AuxChannel::identity(2),
            sigma: 0.1,
            n: 2,
            n1: 2,
            n2: 2,
        },
    ]
}

fn c6_protocol_exactness() -> Outcome {
    let mut summary = Vec::new();
    let (mut nonzero_error, mut nonzero_h) = (false, false);
    for (ci, case) in exact_cases().iter().enumerate() {
        let params = params_for(case);
        let pu = induce_joints(&case.aux, &case.src).unwrap().u_marginal();
        let mut books = Vec::new();
        for b in 0..3u64 {
            let mut r = substream(60 + ci as u64, "codebook", &[b]);
            books.push(
                generate_codebook(&params, &pu, &mut r)
                    .map_err(|e| format!("{}: {e}", case.name))?,
            );
        }
        let mut r = rng(600 + ci as u64);
        let count = (case.n1 * case.n2) as usize;
        let entries: Vec<Sequence> = (0..count)
            .map(|_| Sequence((0..case.n).map(|_| r.random_range(0..2)).collect()))
            .collect();
        books.push(Codebook::from_entries(case.n1, case.n2, entries).unwrap());

        for (bi, cb) in books.iter().enumerate() {
            let exact =
                exact_evaluate(&case.src, &case.aux, &params, cb).map_err(|e| e.to_string())?;
            let reference = brute_force(&case.src, &case.aux, &params, cb);
            ensure(exact.h_k.to_bits() == reference.h_k.to_bits(), || {
                format!(
                    "{} book {bi}: H(K) {} vs reference {}",
                    case.name, exact.h_k, reference.h_k
                )
            })?;
            for (s, st) in exact.states.iter().enumerate() {
                ensure(st.error.to_bits() == reference.errors[s].to_bits(), || {
                    format!(
                        "{} book {bi} state {s}: error {} vs reference {}",
                        case.name, st.error, reference.errors[s]
                    )
                })?;
                let sim = simulate(&case.src, s, &case.aux, &params, cb, 10_000, 7 + bi as u64)
                    .map_err(|e| e.to_string())?;
                let se = (st.error * (1.0 - st.error) / 10_000.0).sqrt();
                ensure((sim.error - st.error).abs() <= 3.0 * se, || {
                    format!(
                        "{} book {bi} state {s}: simulated {} exact {} se {se:.2e}",
                        case.name, sim.error, st.error
                    )
                })?;
                nonzero_error |= st.error > 0.0;
            }
            nonzero_h |= exact.h_k > 0.0;
            summary.push(format!(
                "{}#{bi}: H(K)={:.3} err={:?}",
                case.name,
                exact.h_k,
                exact
                    .states
                    .iter()
                    .map(|s| format!("{:.4}", s.error))
                    .collect::<Vec<_>>()
            ));
        }
    }
    ensure(nonzero_error && nonzero_h, || {
        "instances never exercise decoding errors".into()
    })?;
    Ok(summary.join("; "))
}

fn c7_requirement_trends() -> Outcome {
    let flip = JointPmf::from_table(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
    let src = CompoundSource::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec!["same".into(), "flipped".into()],
        vec![identity_joint(2), flip],
    )
    .unwrap();
    let aux = AuxChannel::identity(2);
    let rate = 1.0;
    let trials = 10_000;
    let pu = induce_joints(&aux, &src).unwrap().u_marginal();
    let mut prev: Vec<Option<(f64, f64)>> = vec![None; 2];
    let mut lines = Vec::new();
    for n in [6usize, 8, 10] {
        let params = derive_params(&aux, &src, n, 0.02, rate, MuPolicy::Fraction(0.1))
            .map_err(|e| e.to_string())?;
        ensure(params.message_rate() <= rate, || {
            format!("n={n}: message rate {}", params.message_rate())
        })?;
        let cb = generate_codebook(&params, &pu, &mut substream(70, "codebook", &[n as u64]))
            .map_err(|e| e.to_string())?;
        let reports: Vec<_> = (0..2)
            .map(|s| simulate(&src, s, &aux, &params, &cb, trials, 71))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure(reports[0].k_digest == reports[1].k_digest, || {
            format!("n={n}: K streams differ across states")
        })?;
        for (s, rep) in reports.iter().enumerate() {
            if let Some((e, se)) = prev[s] {
                let slack = 2.0 * (se * se + rep.error_se * rep.error_se).sqrt();
                ensure(rep.error <= e + slack, || {
                    format!(
                        "state {}: error rises from {e} to {} at n={n} (2 SE = {slack:.2e})",
                        rep.state, rep.error
                    )
                })?;
            }
            prev[s] = Some((rep.error, rep.error_se));
        }
        lines.push(format!(
            "n={n} N1={} N2={} rate={:.3} err={:.4}/{:.4}",
            params.n1,
            params.n2,
            params.message_rate(),
            reports[0].error,
            reports[1].error
        ));
    }
    Ok(lines.join("; "))
}

fn c8_formulas() -> Outcome {
    let start = Instant::now();
    let px = FinitePmf::uniform(2).unwrap();
    let src = CompoundSource::from_channels(&px, &[bsc(0.2), bsc(0.3)]).unwrap();
    let aux = AuxChannel::from_rows(bsc(0.3)).unwrap();
    let inputs = ZetaInputs::new(&aux, &src).map_err(|e| e.to_string())?;
    let sig = Sigmas::from_base(0.05);
    let mu = 4.5 * sig.s2 * inputs.h_u;
    let n0 = zeta_crossover(sig, &inputs).map_err(|e| e.to_string())? as f64;
    ensure(n0 <= 1e7, || format!("crossover {n0}"))?;

    // Geometric grid from the crossover to 1e7.
    let steps = 400;
    let ratio = (1e7 / n0).powf(1.0 / steps as f64);
    let mut prev = f64::INFINITY;
    let mut first_below = None;
    for i in 0..=steps {
        let n = (n0 * ratio.powi(i)).round().min(1e7);
        let z = zeta(n, sig, mu, &inputs).map_err(|e| e.to_string())?;
        ensure(z.is_finite(), || format!("zeta({n}) = {z}"))?;
        ensure(z <= prev, || format!("zeta rises at n={n}: {prev} -> {z}"))?;
        if z < 1e-3 && first_below.is_none() {
            first_below = Some(n);
        }
        prev = z;
    }
    let below = first_below.ok_or_else(|| format!("zeta(1e7) = {prev}"))?;

    let mut doublings = 0;
    let mut n = 1.0;
    while n <= 1e7 {
        let a = concentration_constants(&inputs.px, &inputs.pux, &inputs.puxy, n, sig)
            .map_err(|e| e.to_string())?;
        let b = concentration_constants(&inputs.px, &inputs.pux, &inputs.puxy, 2.0 * n, sig)
            .map_err(|e| e.to_string())?;
        let mut pairs = vec![(a.kappa_x, b.kappa_x), (a.kappa_ux, b.kappa_ux)];
        pairs.extend(a.kappa_uxy.iter().copied().zip(b.kappa_uxy.iter().copied()));
        for (k, (lo_n, hi_n)) in pairs.into_iter().enumerate() {
            if lo_n > f64::MIN_POSITIVE {
                ensure(hi_n < lo_n, || {
                    format!("constant #{k} does not drop from n={n} to {}", 2.0 * n)
                })?;
                doublings += 1;
            }
        }
        n *= 2.0;
    }
    within_time(start, Duration::from_secs(1))?;
    Ok(format!(
        "crossover n={n0}, zeta < 1e-3 from n~{below:.3e}, {doublings} strict doublings, {:?}",
        start.elapsed()
    ))
}

fn c9_typicality() -> Outcome {
    let grid: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
    let mut compared = 0;
    for &p in &grid {
        let probs = vec![1.0 - p, p];
        let pmf = FinitePmf::from_probs(probs.clone()).unwrap();
        for sigma in [0.05, 0.1, 0.25, 0.5] {
            for n in 1..=10 {
                let set = enumerate_typical(&pmf, n, sigma).map_err(|e| e.to_string())?;
                let mut got: Vec<Vec<u32>> = set.classes.iter().map(|c| c.counts.clone()).collect();
                got.sort();
                let mut want: Vec<Vec<u32>> = Vec::new();
                let mut total = 0usize;
                for w in all_words(2, n) {
                    let c = counts_of(&w, 2);
                    if typical_by_definition(&c, &probs, n, sigma) {
                        total += 1;
                        if !want.contains(&c) {
                            want.push(c);
                        }
                    }
                }
                want.sort();
                ensure(got == want && set.total == total as f64, || {
                    format!("p={p} n={n} sigma={sigma}: classes {got:?} vs {want:?}, total {} vs {total}", set.total)
                })?;
                compared += 1;
            }
        }
    }

    let mut r = rng(9);
    for (p, n, sigma) in [
        (0.5, 100, 0.1),
        (0.3, 60, 0.2),
        (0.8, 40, 0.15),
        (0.1, 200, 0.3),
    ] {
        let pmf = FinitePmf::from_probs(vec![1.0 - p, p]).unwrap();
        let exact = typical_probability(&pmf, n, sigma).map_err(|e| e.to_string())?;
        let m = 20_000;
        let hits = (0..m)
            .filter(|_| {
                let ones = (0..n).filter(|_| r.random::<f64>() < p).count() as u32;
                typical_by_definition(&[n as u32 - ones, ones], &[1.0 - p, p], n, sigma)
            })
            .count();
        let est = hits as f64 / m as f64;
        let se = (exact * (1.0 - exact) / m as f64).sqrt();
        ensure((est - exact).abs() <= 3.0 * se, || {
            format!("p={p} n={n}: exact {exact}, monte carlo {est}, se {se}")
        })?;
    }

    let mut chi = Vec::new();
    for (i, (p, n, sigma)) in [
        (0.5, 10, 0.2),
        (0.3, 10, 0.35),
        (0.6, 8, 0.3),
        (0.5, 6, 0.4),
    ]
    .into_iter()
    .enumerate()
    {
        let probs = [1.0 - p, p];
        let sampler = TypicalSampler::from_probs(&probs, n, sigma).map_err(|e| e.to_string())?;
        let members: Vec<Vec<usize>> = all_words(2, n)
            .into_iter()
            .filter(|w| typical_by_definition(&counts_of(w, 2), &probs, n, sigma))
            .collect();
        let draws = 200 * members.len();
        let mut freq = vec![0usize; members.len()];
        let mut rr = substream(90, "sampler", &[i as u64]);
        for _ in 0..draws {
            let s = sampler.sample(&mut rr);
            let idx = members
                .iter()
                .position(|w| w.as_slice() == s.symbols())
                .ok_or("sample outside the set")?;
            freq[idx] += 1;
        }
        let expected = draws as f64 / members.len() as f64;
        let stat: f64 = freq
            .iter()
            .map(|&f| (f as f64 - expected).powi(2) / expected)
            .sum();
        let dist = ChiSquared::new((members.len() - 1) as f64).unwrap();
        let pval = 1.0 - dist.cdf(stat);
        ensure(pval >= 0.01, || {
            format!("p={p} n={n} sigma={sigma}: chi-square p-value {pval:.4}")
        })?;
        chi.push(format!("{pval:.3}"));
    }
    Ok(format!(
        "{compared} sets match brute force; chi-square p-values {chi:?}"
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        (
            "1 threshold regime: both bounds equal H(X)",
            c1_threshold_regime,
        ),
        (
            "2 single state X=Y: lower bound equals H(X)",
            c2_single_state,
        ),
        (
            "3 single-state collapse and grid oracle",
            c3_single_state_collapse,
        ),
        (
            "4 ordering, rate and state-addition monotonicity",
            c4_ordering_suite,
        ),
        ("5 degraded family collapses", c5_degraded),
        (
            "6 protocol exactness against brute force",
            c6_protocol_exactness,
        ),
        ("7 protocol trends over n", c7_requirement_trends),
        ("8 zeta and concentration constants", c8_formulas),
        (
            "9 typicality enumeration, probability and sampler",
            c9_typicality,
        ),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, run) in criteria {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  acceptance {name} [{:.1?}] {detail}", start.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL  acceptance {name} [{:.1?}] {why}", start.elapsed());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
