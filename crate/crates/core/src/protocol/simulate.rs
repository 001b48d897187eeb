use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::codebook::{candidates, encode, message, pair_typical, Codebook, Codeword};
use super::{ProtocolError, ProtocolParams};
use crate::seeds::substream;
use crate::source_model::{induce_joints, AuxChannel, CompoundSource, JointPmf};
use crate::typicality::Sequence;

/// Diagnostic events for one `(x^n, y^n)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Events {
    /// Encoder returned the sentinel.
    pub sentinel: bool,
    /// `(u_K, x, y)` not `sigma3`-typical under `P_{U,X,Y_s}` (always so for the sentinel).
    pub a: bool,
    /// Not `a`, and another column of row `i` is `sigma2`-typical with `y` under some state.
    pub b: bool,
    /// `K` is a codeword whose own column is not a decoder candidate.
    pub miss: bool,
}

/// Encoder and decoder bound to one codebook and one simulated state.
#[derive(Debug, Clone)]
pub struct TrialRunner<'a> {
    cb: &'a Codebook,
    params: &'a ProtocolParams,
    pux: JointPmf,
    uy: Vec<JointPmf>,
    uxy: JointPmf,
    ny: usize,
}

impl<'a> TrialRunner<'a> {
    pub fn new(
        cb: &'a Codebook,
        params: &'a ProtocolParams,
        aux: &AuxChannel,
        src: &CompoundSource,
        state: usize,
    ) -> Result<Self, ProtocolError> {
        if state >= src.n_states() {
            return Err(ProtocolError::UnknownState(state));
        }
        let ind = induce_joints(aux, src)?;
        let uy = ind.states.iter().map(|s| s.uy.clone()).collect();
        let uxy = ind.states[state].uxy.clone();
        Ok(TrialRunner {
            cb,
            params,
            pux: ind.ux,
            uy,
            uxy,
            ny: src.y_alphabet().len(),
        })
    }

    pub fn encode(&self, x: &Sequence) -> Result<Codeword, ProtocolError> {
        encode(self.cb, x, self.params, &self.pux)
    }

    /// `(K, L, events)` for one pair of sequences.
    pub fn run(
        &self,
        x: &Sequence,
        y: &Sequence,
    ) -> Result<(Codeword, Codeword, Events), ProtocolError> {
        self.run_encoded(self.encode(x)?, x, y)
    }

    /// [`TrialRunner::run`] with `K = encode(x)` already known.
    pub fn run_encoded(
        &self,
        k: Codeword,
        x: &Sequence,
        y: &Sequence,
    ) -> Result<(Codeword, Codeword, Events), ProtocolError> {
        if y.len() != x.len() {
            return Err(ProtocolError::Shape(format!(
                "x has length {}, y has {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(&bad) = y.symbols().iter().find(|&&b| b >= self.ny) {
            return Err(ProtocolError::Shape(format!(
                "y symbol {bad} outside alphabet"
            )));
        }
        let i_star = message(k, self.cb.n1());
        let Codeword::Entry { i, j } = k else {
            let events = Events {
                sentinel: true,
                a: true,
                ..Events::default()
            };
            return Ok((k, Codeword::Sentinel, events));
        };
        debug_assert_eq!(i, i_star);
        let sig = self.params.sigmas();
        let u = self.cb.entry(i, j);
        let xy: Vec<usize> = x
            .symbols()
            .iter()
            .zip(y.symbols())
            .map(|(&a, &b)| a * self.ny + b)
            .collect();
        let mut buf = Vec::new();
        let a = !pair_typical(u, &xy, &self.uxy, sig.s3, &mut buf);
        let cands = candidates(self.cb, y, i_star, sig.s2, &self.uy);
        let l = match cands[..] {
            [only] => Codeword::Entry { i: i_star, j: only },
            _ => Codeword::Sentinel,
        };
        let events = Events {
            sentinel: false,
            a,
            b: !a && cands.iter().any(|&c| c != j),
            miss: !cands.contains(&j),
        };
        Ok((k, l, events))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub state: String,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    /// Empirical `P[K != L_s]`.
    pub error: f64,
    pub error_se: f64,
    /// Miller-Madow corrected plug-in `H(K) / n`.
    pub entropy_rate: f64,
    pub entropy_rate_plugin: f64,
    pub entropy_method: &'static str,
    /// Distinct values of `K` observed.
    pub k_support: usize,
    /// `log2(k_support) / n`.
    pub k_support_rate: f64,
    pub message_rate: f64,
    pub freq_sentinel: f64,
    pub freq_a: f64,
    pub freq_b: f64,
    pub freq_miss: f64,
    /// SHA-256 of the ordered `K` stream.
    pub k_digest: String,
}

fn sample_sequence<R: rand::Rng>(dist: &WeightedIndex<f64>, n: usize, rng: &mut R) -> Sequence {
    Sequence((0..n).map(|_| dist.sample(rng)).collect())
}

/// Monte Carlo over `trials` i.i.d. pairs from `P_{X,Y_s}^n`. Trial `t`
/// draws `x^n` from the stream `(seed, "protocol/x", t)` and `y^n` given
/// `x^n` from `(seed, "protocol/y", t, s)`, so `K` does not depend on `s`.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    src: &CompoundSource,
    state: usize,
    aux: &AuxChannel,
    params: &ProtocolParams,
    cb: &Codebook,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport, ProtocolError> {
    if trials == 0 {
        return Err(ProtocolError::NoTrials);
    }
    let runner = TrialRunner::new(cb, params, aux, src, state)?;
    let n = params.n;
    let px = WeightedIndex::new(src.x_marginal().probs())
        .map_err(|e| ProtocolError::Shape(e.to_string()))?;
    let conditionals: Vec<Option<WeightedIndex<f64>>> = src
        .joint(state)
        .row_conditionals()
        .into_iter()
        .map(|row| WeightedIndex::new(&row).ok())
        .collect();

    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let x = sample_sequence(&px, n, &mut substream(seed, "protocol/x", &[t]));
            let mut rng = substream(seed, "protocol/y", &[t, state as u64]);
            let y = Sequence(
                x.symbols()
                    .iter()
                    .map(|&a| {
                        conditionals[a]
                            .as_ref()
                            .expect("sampled x has positive mass")
                            .sample(&mut rng)
                    })
                    .collect(),
            );
            runner.run(&x, &y)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let tf = trials as f64;
    let mut errors = 0u64;
    let mut tally = [0u64; 4];
    let mut k_counts: BTreeMap<Codeword, u64> = BTreeMap::new();
    let mut hasher = Sha256::new();
    for (k, l, ev) in &outcomes {
        errors += u64::from(k != l);
        for (slot, hit) in tally.iter_mut().zip([ev.sentinel, ev.a, ev.b, ev.miss]) {
            *slot += u64::from(hit);
        }
        *k_counts.entry(*k).or_default() += 1;
        let (i, j) = match k {
            Codeword::Entry { i, j } => (*i, *j),
            Codeword::Sentinel => (0, 0),
        };
        hasher.update(i.to_le_bytes());
        hasher.update(j.to_le_bytes());
    }
    let plugin: f64 = k_counts
        .values()
        .map(|&c| {
            let p = c as f64 / tf;
            -p * p.log2()
        })
        .sum();
    let support = k_counts.len();
    let corrected = plugin + (support as f64 - 1.0) / (2.0 * tf * std::f64::consts::LN_2);
    let error = errors as f64 / tf;
    let nf = n as f64;
    Ok(SimulationReport {
        state: src.states()[state].clone(),
        n,
        trials,
        seed,
        error,
        error_se: (error * (1.0 - error) / tf).sqrt(),
        entropy_rate: corrected / nf,
        entropy_rate_plugin: plugin / nf,
        entropy_method: "miller-madow",
        k_support: support,
        k_support_rate: (support as f64).log2() / nf,
        message_rate: params.message_rate(),
        freq_sentinel: tally[0] as f64 / tf,
        freq_a: tally[1] as f64 / tf,
        freq_b: tally[2] as f64 / tf,
        freq_miss: tally[3] as f64 / tf,
        k_digest: hex::encode(hasher.finalize()),
    })
}
