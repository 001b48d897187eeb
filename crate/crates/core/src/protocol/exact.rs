use std::collections::BTreeMap;

use serde::Serialize;

use super::codebook::{Codebook, Codeword};
use super::simulate::TrialRunner;
use super::{ProtocolError, ProtocolParams};
use crate::source_model::{AuxChannel, CompoundSource};
use crate::typicality::Sequence;

/// Cap on `|S| |X|^n |Y|^n`.
pub const EXACT_GUARD: f64 = 67_108_864.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactState {
    pub state: String,
    /// `P[K != L_s]`.
    pub error: f64,
    pub p_a: f64,
    pub p_b: f64,
    pub p_miss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactReport {
    pub n: usize,
    /// `H(K)` in bits.
    pub h_k: f64,
    pub p_sentinel: f64,
    pub states: Vec<ExactState>,
}

impl ExactReport {
    pub fn entropy_rate(&self) -> f64 {
        self.h_k / self.n as f64
    }
}

/// The `index`-th sequence of length `n` over `size` symbols, first symbol
/// most significant.
pub(crate) fn nth_sequence(mut index: usize, size: usize, n: usize) -> Sequence {
    let mut s = vec![0; n];
    for slot in s.iter_mut().rev() {
        *slot = index % size;
        index /= size;
    }
    Sequence(s)
}

/// Sums over every `(x^n, y^n)`. `x^n` runs in lexicographic order in the
/// outer loop and `y^n` in the inner one; each probability is a product over
/// time in order, and `H(K)` is summed in codeword order.
pub fn exact_evaluate(
    src: &CompoundSource,
    aux: &AuxChannel,
    params: &ProtocolParams,
    cb: &Codebook,
) -> Result<ExactReport, ProtocolError> {
    let n = params.n;
    let nx = src.x_alphabet().len();
    let ny = src.y_alphabet().len();
    let size = src.n_states() as f64 * (nx as f64).powi(n as i32) * (ny as f64).powi(n as i32);
    if size > EXACT_GUARD {
        return Err(ProtocolError::ExactTooLarge {
            size,
            guard: EXACT_GUARD,
        });
    }
    let count_x = nx.pow(n as u32);
    let count_y = ny.pow(n as u32);
    let px = src.x_marginal();
    let px = px.probs();

    let runners = (0..src.n_states())
        .map(|s| TrialRunner::new(cb, params, aux, src, s))
        .collect::<Result<Vec<_>, _>>()?;
    let ys: Vec<Sequence> = (0..count_y).map(|i| nth_sequence(i, ny, n)).collect();

    let mut k_mass: BTreeMap<Codeword, f64> = BTreeMap::new();
    let mut p_sentinel = 0.0;
    let mut acc = vec![[0.0f64; 4]; src.n_states()];
    for xi in 0..count_x {
        let x = nth_sequence(xi, nx, n);
        let p_x = x.symbols().iter().fold(1.0, |p, &a| p * px[a]);
        if p_x == 0.0 {
            continue;
        }
        let k = runners[0].encode(&x)?;
        *k_mass.entry(k).or_default() += p_x;
        if k == Codeword::Sentinel {
            p_sentinel += p_x;
        }
        for (s, runner) in runners.iter().enumerate() {
            let joint = src.joint(s);
            for y in &ys {
                let p = x
                    .symbols()
                    .iter()
                    .zip(y.symbols())
                    .fold(1.0, |p, (&a, &b)| p * joint.get(a, b));
                if p == 0.0 {
                    continue;
                }
                let (k, l, ev) = runner.run_encoded(k, &x, y)?;
                let slots = &mut acc[s];
                for (slot, hit) in slots.iter_mut().zip([k != l, ev.a, ev.b, ev.miss]) {
                    if hit {
                        *slot += p;
                    }
                }
            }
        }
    }
    let h_k = k_mass
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    let states = acc
        .into_iter()
        .enumerate()
        .map(|(s, [error, p_a, p_b, p_miss])| ExactState {
            state: src.states()[s].clone(),
            error,
            p_a,
            p_b,
            p_miss,
        })
        .collect();
    Ok(ExactReport {
        n,
        h_k,
        p_sentinel,
        states,
    })
}
