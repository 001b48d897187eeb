use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ProtocolError, ProtocolParams};
use crate::source_model::{FinitePmf, JointPmf};
use crate::typicality::{counts_are_typical, Sequence, TypicalSampler};

/// Default cap on `N1 * N2`.
pub const DEFAULT_CODEBOOK_GUARD: u64 = 1_000_000;

/// A codebook position (1-based) or the failure token. The token is not a
/// sequence, so it is never typical with anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Codeword {
    Entry { i: u64, j: u64 },
    Sentinel,
}

impl std::fmt::Display for Codeword {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Codeword::Entry { i, j } => write!(f, "({i},{j})"),
            Codeword::Sentinel => write!(f, "u0"),
        }
    }
}

/// `N1` rows of `N2` sequences of length `n`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    n1: u64,
    n2: u64,
    n: usize,
    symbols: Vec<usize>,
}

impl Codebook {
    /// `entries` in row-major order; `N1 = 0` gives a codebook that can only
    /// encode to the sentinel.
    pub fn from_entries(n1: u64, n2: u64, entries: Vec<Sequence>) -> Result<Self, ProtocolError> {
        let count = n1.checked_mul(n2).ok_or(ProtocolError::CodebookTooLarge {
            n1,
            n2,
            guard: u64::MAX,
        })?;
        if entries.len() as u64 != count {
            return Err(ProtocolError::Shape(format!(
                "{} entries for a {n1} x {n2} codebook",
                entries.len()
            )));
        }
        let n = entries.first().map_or(0, Sequence::len);
        if entries.iter().any(|e| e.len() != n) {
            return Err(ProtocolError::Shape("entries differ in length".into()));
        }
        let symbols = entries.into_iter().flat_map(|e| e.0).collect();
        Ok(Codebook { n1, n2, n, symbols })
    }

    pub fn n1(&self) -> u64 {
        self.n1
    }

    pub fn n2(&self) -> u64 {
        self.n2
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    /// Entry at 1-based `(i, j)`.
    pub fn entry(&self, i: u64, j: u64) -> &[usize] {
        assert!(
            (1..=self.n1).contains(&i) && (1..=self.n2).contains(&j),
            "({i},{j}) outside codebook"
        );
        let start = (((i - 1) * self.n2 + (j - 1)) as usize) * self.n;
        &self.symbols[start..start + self.n]
    }

    pub fn sequence(&self, k: Codeword) -> Option<Sequence> {
        match k {
            Codeword::Entry { i, j } => Some(Sequence(self.entry(i, j).to_vec())),
            Codeword::Sentinel => None,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u64, u64, &[usize])> {
        let n2 = self.n2.max(1);
        self.symbols
            .chunks(self.n.max(1))
            .enumerate()
            .map(move |(idx, s)| {
                let idx = idx as u64;
                (idx / n2 + 1, idx % n2 + 1, s)
            })
    }
}

/// `N1 * N2` independent draws, uniform on the `sigma1`-typical set of `P_U`.
pub fn generate_codebook<R: Rng + ?Sized>(
    params: &ProtocolParams,
    pu: &FinitePmf,
    rng: &mut R,
) -> Result<Codebook, ProtocolError> {
    generate_codebook_guarded(params, pu, rng, DEFAULT_CODEBOOK_GUARD)
}

pub fn generate_codebook_guarded<R: Rng + ?Sized>(
    params: &ProtocolParams,
    pu: &FinitePmf,
    rng: &mut R,
    guard: u64,
) -> Result<Codebook, ProtocolError> {
    let (n1, n2) = (params.n1, params.n2);
    let too_large = ProtocolError::CodebookTooLarge { n1, n2, guard };
    match n1.checked_mul(n2) {
        Some(c) if c <= guard => {}
        _ => return Err(too_large),
    }
    let sampler = TypicalSampler::new(pu, params.n, params.sigmas().s1)?;
    let entries = (0..n1 * n2).map(|_| sampler.sample(rng)).collect();
    Codebook::from_entries(n1, n2, entries)
}

/// Joint-type membership of `(a, b)` in the typical set of `joint`, reusing `buf`.
pub(crate) fn pair_typical(
    a: &[usize],
    b: &[usize],
    joint: &JointPmf,
    sigma: f64,
    buf: &mut Vec<u32>,
) -> bool {
    let nc = joint.n_cols();
    buf.clear();
    buf.resize(joint.n_rows() * nc, 0);
    for (&u, &v) in a.iter().zip(b) {
        buf[u * nc + v] += 1;
    }
    counts_are_typical(buf, joint.mass(), a.len(), sigma)
}

fn check_len(cb: &Codebook, seq: &Sequence) -> Result<(), ProtocolError> {
    if cb.n1 > 0 && cb.n2 > 0 && seq.len() != cb.n {
        return Err(ProtocolError::Shape(format!(
            "sequence of length {} for blocklength {}",
            seq.len(),
            cb.n
        )));
    }
    Ok(())
}

/// First `(i, j)` in row-major order whose entry is `sigma2`-jointly typical
/// with `x` under `P_{U,X}`; the sentinel when there is none.
pub fn encode(
    cb: &Codebook,
    x: &Sequence,
    params: &ProtocolParams,
    pux: &JointPmf,
) -> Result<Codeword, ProtocolError> {
    check_len(cb, x)?;
    if let Some(&bad) = x.symbols().iter().find(|&&a| a >= pux.n_cols()) {
        return Err(ProtocolError::Shape(format!(
            "x symbol {bad} outside alphabet"
        )));
    }
    let sigma = params.sigmas().s2;
    let mut buf = Vec::new();
    Ok(cb
        .entries()
        .find(|(_, _, u)| pair_typical(u, x.symbols(), pux, sigma, &mut buf))
        .map_or(Codeword::Sentinel, |(i, j, _)| Codeword::Entry { i, j }))
}

/// Row index of `k`, or `N1 + 1` for the sentinel.
pub fn message(k: Codeword, n1: u64) -> u64 {
    match k {
        Codeword::Entry { i, .. } => i,
        Codeword::Sentinel => n1 + 1,
    }
}

/// Columns `j` of row `i_star` whose entry is `sigma2`-typical with `y`
/// under `P_{U,Y_s}` for at least one state, in increasing order.
pub fn candidates(
    cb: &Codebook,
    y: &Sequence,
    i_star: u64,
    sigma: f64,
    uy: &[JointPmf],
) -> Vec<u64> {
    let mut buf = Vec::new();
    (1..=cb.n2)
        .filter(|&j| {
            let u = cb.entry(i_star, j);
            uy.iter()
                .any(|joint| pair_typical(u, y.symbols(), joint, sigma, &mut buf))
        })
        .collect()
}

/// The unique candidate in row `i_star`, else the sentinel.
pub fn decode(
    cb: &Codebook,
    y: &Sequence,
    i_star: u64,
    params: &ProtocolParams,
    uy: &[JointPmf],
) -> Result<Codeword, ProtocolError> {
    check_len(cb, y)?;
    if i_star == 0 || i_star > cb.n1 + 1 {
        return Err(ProtocolError::Shape(format!(
            "message {i_star} outside 1..={}",
            cb.n1 + 1
        )));
    }
    if let Some(&bad) = y
        .symbols()
        .iter()
        .find(|&&b| uy.iter().any(|j| b >= j.n_cols()))
    {
        return Err(ProtocolError::Shape(format!(
            "y symbol {bad} outside alphabet"
        )));
    }
    if i_star == cb.n1 + 1 {
        return Ok(Codeword::Sentinel);
    }
    Ok(
        match candidates(cb, y, i_star, params.sigmas().s2, uy)[..] {
            [j] => Codeword::Entry { i: i_star, j },
            _ => Codeword::Sentinel,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::params::{from_information, MuPolicy};
    use crate::seeds::substream;
    use crate::typicality::is_typical;

    fn identity() -> JointPmf {
        JointPmf::from_table(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    fn params(n: usize) -> ProtocolParams {
        from_information(1.0, 1.0, 1.0, n, 0.02, 1.0, MuPolicy::Midpoint).unwrap()
    }

    fn seqs(digits: &[&str]) -> Vec<Sequence> {
        digits.iter().map(|d| Sequence::from_digits(d)).collect()
    }

    #[test]
    fn generated_entries_are_typical_and_reproducible() {
        let p = params(8);
        let pu = FinitePmf::uniform(2).unwrap();
        let a = generate_codebook(&p, &pu, &mut substream(5, "cb", &[])).unwrap();
        let b = generate_codebook(&p, &pu, &mut substream(5, "cb", &[])).unwrap();
        assert_eq!(a, b);
        for (_, _, u) in a.entries() {
            assert!(is_typical(&Sequence(u.to_vec()), &pu, p.sigmas().s1).unwrap());
        }
    }

    #[test]
    fn point_mass_codebook_is_constant() {
        let mut p = params(5);
        p.n1 = 2;
        p.n2 = 3;
        let pu = FinitePmf::point_mass(3, 1).unwrap();
        let cb = generate_codebook(&p, &pu, &mut substream(0, "cb", &[])).unwrap();
        assert!(cb.entries().all(|(_, _, u)| u == [1, 1, 1, 1, 1]));
    }

    #[test]
    fn guard_rejects_large_codebooks() {
        let mut p = params(5);
        p.n1 = 2000;
        p.n2 = 1000;
        let r = generate_codebook(
            &p,
            &FinitePmf::uniform(2).unwrap(),
            &mut substream(0, "cb", &[]),
        );
        assert!(matches!(r, Err(ProtocolError::CodebookTooLarge { .. })));
    }

    #[test]
    fn encoder_scans_row_major() {
        let p = params(4);
        let pux = identity();
        let x = Sequence::from_digits("0110");
        // (1,2) and (2,1) both equal x; (1,1) does not.
        let cb = Codebook::from_entries(2, 2, seqs(&["0000", "0110", "0110", "1111"])).unwrap();
        assert_eq!(
            encode(&cb, &x, &p, &pux).unwrap(),
            Codeword::Entry { i: 1, j: 2 }
        );
        let cb = Codebook::from_entries(1, 1, seqs(&["0110"])).unwrap();
        assert_eq!(
            encode(&cb, &x, &p, &pux).unwrap(),
            Codeword::Entry { i: 1, j: 1 }
        );
        let cb = Codebook::from_entries(1, 1, seqs(&["1001"])).unwrap();
        assert_eq!(encode(&cb, &x, &p, &pux).unwrap(), Codeword::Sentinel);
    }

    #[test]
    fn message_indices() {
        assert_eq!(message(Codeword::Entry { i: 3, j: 7 }, 5), 3);
        assert_eq!(message(Codeword::Sentinel, 5), 6);
    }

    #[test]
    fn decoder_counts_candidates() {
        let p = params(4);
        let uy = [identity()];
        let y = Sequence::from_digits("0110");
        let cb = Codebook::from_entries(2, 2, seqs(&["0110", "1001", "0110", "0110"])).unwrap();
        assert_eq!(
            decode(&cb, &y, 1, &p, &uy).unwrap(),
            Codeword::Entry { i: 1, j: 1 }
        );
        assert_eq!(decode(&cb, &y, 2, &p, &uy).unwrap(), Codeword::Sentinel);
        assert_eq!(decode(&cb, &y, 3, &p, &uy).unwrap(), Codeword::Sentinel);
        let y = Sequence::from_digits("0000");
        assert_eq!(decode(&cb, &y, 1, &p, &uy).unwrap(), Codeword::Sentinel);
    }

    #[test]
    fn empty_codebook_always_fails_to_encode() {
        let p = params(4);
        let cb = Codebook::from_entries(0, 3, vec![]).unwrap();
        assert_eq!(
            encode(&cb, &Sequence::from_digits("0101"), &p, &identity()).unwrap(),
            Codeword::Sentinel
        );
        assert_eq!(
            decode(&cb, &Sequence::from_digits("0101"), 1, &p, &[identity()]).unwrap(),
            Codeword::Sentinel
        );
    }
}
