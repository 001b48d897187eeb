//! Brute-force references and random instance generators shared by the
//! integration suites. Nothing here calls into the protocol or typicality
//! modules of the crate under test.

#![allow(dead_code)]

use compound_cr::source_model::bsc;
use compound_cr::{
    AuxChannel, Codebook, Codeword, CompoundSource, FinitePmf, JointPmf, ProtocolParams,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SLACK: f64 = 1e-12;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Occupancy test written out from the definition.
pub fn typical_by_definition(counts: &[u32], probs: &[f64], n: usize, sigma: f64) -> bool {
    for (i, &p) in probs.iter().enumerate() {
        let freq = counts[i] as f64 / n as f64;
        if (freq - p).abs() > sigma * p + SLACK {
            return false;
        }
    }
    true
}

/// All length-`n` words over `k` letters, first letter most significant.
pub fn all_words(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * k);
        for w in &out {
            for a in 0..k {
                let mut v = w.clone();
                v.push(a);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

pub fn counts_of(word: &[usize], k: usize) -> Vec<u32> {
    let mut c = vec![0u32; k];
    for &a in word {
        c[a] += 1;
    }
    c
}

fn pair_counts(a: &[usize], b: &[usize], nb: usize, cells: usize) -> Vec<u32> {
    let mut c = vec![0u32; cells];
    for (&x, &y) in a.iter().zip(b) {
        c[x * nb + y] += 1;
    }
    c
}

/// Reference result of the exhaustive evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub h_k: f64,
    pub errors: Vec<f64>,
}

/// Exhaustive evaluation of the encoder/decoder pair over every
/// `(x^n, y^n)`, coded directly from the protocol description.
pub fn brute_force(
    src: &CompoundSource,
    aux: &AuxChannel,
    params: &ProtocolParams,
    cb: &Codebook,
) -> Reference {
    let n = params.n;
    let nx = src.x_alphabet().len();
    let ny = src.y_alphabet().len();
    let nu = aux.u_size();
    let s2 = 2.0 * params.sigma;

    // P_X from the first state's joint, row sums in column order.
    let j0 = src.joint(0);
    let px: Vec<f64> = (0..nx)
        .map(|a| (0..ny).fold(0.0, |acc, b| acc + j0.get(a, b)))
        .collect();
    let mut pux = vec![0.0; nu * nx];
    for u in 0..nu {
        for a in 0..nx {
            pux[u * nx + a] = aux.get(a, u) * px[a];
        }
    }
    let puy: Vec<Vec<f64>> = (0..src.n_states())
        .map(|s| {
            let j = src.joint(s);
            let mut m = vec![0.0; nu * ny];
            for u in 0..nu {
                for a in 0..nx {
                    for b in 0..ny {
                        m[u * ny + b] += aux.get(a, u) * j.get(a, b);
                    }
                }
            }
            m
        })
        .collect();

    let (n1, n2) = (cb.n1(), cb.n2());
    let xs = all_words(nx, n);
    let ys = all_words(ny, n);
    // Codewords keyed (i, j), sentinel as (u64::MAX, u64::MAX) so it sorts last.
    let mut mass: Vec<((u64, u64), f64)> = Vec::new();
    let mut errors = vec![0.0; src.n_states()];
    for x in &xs {
        let p_x = x.iter().fold(1.0, |p, &a| p * px[a]);
        if p_x == 0.0 {
            continue;
        }
        let mut k = (u64::MAX, u64::MAX);
        'search: for i in 1..=n1 {
            for j in 1..=n2 {
                let u = cb.entry(i, j);
                if typical_by_definition(&pair_counts(u, x, nx, nu * nx), &pux, n, s2) {
                    k = (i, j);
                    break 'search;
                }
            }
        }
        match mass.iter_mut().find(|(key, _)| *key == k) {
            Some((_, m)) => *m += p_x,
            None => mass.push((k, p_x)),
        }
        if k.0 == u64::MAX {
            continue;
        }
        for s in 0..src.n_states() {
            let joint = src.joint(s);
            for y in &ys {
                let p = x.iter().zip(y).fold(1.0, |p, (&a, &b)| p * joint.get(a, b));
                if p == 0.0 {
                    continue;
                }
                let mut found = Vec::new();
                for j in 1..=n2 {
                    let u = cb.entry(k.0, j);
                    let c = pair_counts(u, y, ny, nu * ny);
                    if puy.iter().any(|m| typical_by_definition(&c, m, n, s2)) {
                        found.push(j);
                    }
                }
                let decoded_right = found.len() == 1 && found[0] == k.1;
                if !decoded_right {
                    errors[s] += p;
                }
            }
        }
    }
    mass.sort_by_key(|e| e.0);
    let mut h_k = 0.0;
    for (_, p) in &mass {
        if *p > 0.0 {
            h_k += -p * p.log2();
        }
    }
    Reference { h_k, errors }
}

pub fn codeword_key(k: Codeword) -> (u64, u64) {
    match k {
        Codeword::Entry { i, j } => (i, j),
        Codeword::Sentinel => (u64::MAX, u64::MAX),
    }
}

/// A strictly positive pmf on `k` letters with mass at least `floor`.
pub fn random_pmf<R: Rng>(rng: &mut R, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let rest = 1.0 - floor * k as f64;
    raw.iter().map(|v| floor + rest * v / total).collect()
}

/// A random binary channel table (rows are pmfs).
pub fn random_channel<R: Rng>(rng: &mut R, nx: usize, ny: usize) -> Vec<Vec<f64>> {
    (0..nx).map(|_| random_pmf(rng, ny, 0.0)).collect()
}

pub fn random_source<R: Rng>(rng: &mut R, nx: usize, ny: usize, states: usize) -> CompoundSource {
    let px = FinitePmf::from_probs(random_pmf(rng, nx, 0.05)).unwrap();
    let channels: Vec<Vec<Vec<f64>>> = (0..states).map(|_| random_channel(rng, nx, ny)).collect();
    CompoundSource::from_channels(&px, &channels).unwrap()
}

pub fn identity_joint(k: usize) -> JointPmf {
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| if a == b { 1.0 / k as f64 } else { 0.0 })
                .collect()
        })
        .collect();
    JointPmf::from_table(&rows).unwrap()
}

pub fn binary_bsc_source(px: f64, crossovers: &[f64]) -> CompoundSource {
    let p = FinitePmf::from_probs(vec![1.0 - px, px]).unwrap();
    let channels: Vec<Vec<Vec<f64>>> = crossovers.iter().map(|&c| bsc(c)).collect();
    CompoundSource::from_channels(&p, &channels).unwrap()
}
