use serde::{Deserialize, Serialize};

use super::ProtocolError;
use crate::source_model::{entropy, induce_joints, AuxChannel, CompoundSource};
use crate::typicality::Sigmas;

/// Exponents this close to an integer are treated as that integer before
/// flooring, so `2^{33}` is not lost to `0.3 + 0.03` rounding.
const EXPONENT_SNAP: f64 = 1e-9;
/// `N1` and `N2` are kept as `u64`.
const MAX_EXPONENT: f64 = 62.0;

/// Where `mu` sits inside the open interval `(4 s2 H(U), 5 s2 H(U))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MuPolicy {
    #[default]
    Midpoint,
    /// `mu = (4 + f) s2 H(U)` with `0 < f < 1`.
    Fraction(f64),
    /// An explicit value, still checked against the interval.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolParams {
    pub n: usize,
    pub sigma: f64,
    pub mu: f64,
    pub rate: f64,
    pub n1: u64,
    pub n2: u64,
    pub i_ux: f64,
    pub min_i_uy: f64,
    pub h_u: f64,
}

impl ProtocolParams {
    pub fn sigmas(&self) -> Sigmas {
        Sigmas::from_base(self.sigma)
    }

    /// `log2(N1 + 1) / n`, the rate of the row index.
    pub fn message_rate(&self) -> f64 {
        ((self.n1 as f64) + 1.0).log2() / self.n as f64
    }

    /// The sentinel's message, `N1 + 1`.
    pub fn sentinel_message(&self) -> u64 {
        self.n1 + 1
    }

    pub fn mu_interval(&self) -> (f64, f64) {
        mu_interval(self.sigma, self.h_u)
    }
}

fn mu_interval(sigma: f64, h_u: f64) -> (f64, f64) {
    let s2 = Sigmas::from_base(sigma).s2;
    (4.0 * s2 * h_u, 5.0 * s2 * h_u)
}

fn snap(exponent: f64) -> f64 {
    if (exponent - exponent.round()).abs() < EXPONENT_SNAP {
        exponent.round()
    } else {
        exponent
    }
}

fn floor_pow2(exponent: f64) -> Result<u64, ProtocolError> {
    let snapped = snap(exponent);
    if snapped > MAX_EXPONENT {
        return Err(ProtocolError::Overflow(snapped));
    }
    Ok(snapped.exp2().floor() as u64)
}

/// Parameters from the three information quantities of an aux channel.
pub fn from_information(
    i_ux: f64,
    min_i_uy: f64,
    h_u: f64,
    n: usize,
    sigma: f64,
    rate: f64,
    policy: MuPolicy,
) -> Result<ProtocolParams, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::InvalidBlocklength);
    }
    Sigmas::from_base(sigma).validate()?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(ProtocolError::InvalidRate(rate));
    }
    let (lo, hi) = mu_interval(sigma, h_u);
    if hi - lo <= 0.0 {
        return Err(ProtocolError::EmptyMuInterval { h_u });
    }
    let mu = match policy {
        MuPolicy::Midpoint => 0.5 * (lo + hi),
        MuPolicy::Fraction(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(ProtocolError::MuOutOfInterval {
                    mu: lo + f * (hi - lo),
                    lo,
                    hi,
                });
            }
            lo + f * (hi - lo)
        }
        MuPolicy::Fixed(mu) => mu,
    };
    if !(mu > lo && mu < hi) {
        return Err(ProtocolError::MuOutOfInterval { mu, lo, hi });
    }
    let nf = n as f64;
    let e2 = nf * (min_i_uy - 2.0 * mu);
    if snap(e2) < 0.0 {
        return Err(ProtocolError::N2TooSmall {
            min_i_uy,
            mu,
            exponent: e2,
        });
    }
    let n2 = floor_pow2(e2)?;
    let e1 = nf * (i_ux - min_i_uy + 3.0 * mu);
    let n1 = floor_pow2(e1)?;
    if n1 < 1 {
        return Err(ProtocolError::N1TooSmall { exponent: e1 });
    }
    let params = ProtocolParams {
        n,
        sigma,
        mu,
        rate,
        n1,
        n2,
        i_ux,
        min_i_uy,
        h_u,
    };
    let message_rate = params.message_rate();
    if message_rate > rate {
        return Err(ProtocolError::RateExceeded { message_rate, rate });
    }
    Ok(params)
}

pub fn derive_params(
    aux: &AuxChannel,
    src: &CompoundSource,
    n: usize,
    sigma: f64,
    rate: f64,
    policy: MuPolicy,
) -> Result<ProtocolParams, ProtocolError> {
    let ind = induce_joints(aux, src)?;
    let h_u = entropy(&ind.u_marginal());
    from_information(ind.i_ux(), ind.min_i_uy(), h_u, n, sigma, rate, policy)
}
