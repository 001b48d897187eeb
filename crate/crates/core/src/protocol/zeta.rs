use super::ProtocolError;
use crate::source_model::{
    entropy, induce_joints, AuxChannel, CompoundSource, FinitePmf, JointPmf,
};
use crate::typicality::{concentration_constants, kappa_ux, Sigmas};

/// The distributions `zeta` depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ZetaInputs {
    pub px: FinitePmf,
    pub pux: JointPmf,
    pub puxy: Vec<JointPmf>,
    pub h_u: f64,
}

impl ZetaInputs {
    pub fn new(aux: &AuxChannel, src: &CompoundSource) -> Result<Self, ProtocolError> {
        let ind = induce_joints(aux, src)?;
        Ok(ZetaInputs {
            px: src.x_marginal(),
            h_u: entropy(&ind.u_marginal()),
            puxy: ind.states.into_iter().map(|s| s.uxy).collect(),
            pux: ind.ux,
        })
    }
}

fn check_mu(sigmas: Sigmas, mu: f64, h_u: f64) -> Result<(), ProtocolError> {
    let (lo, hi) = (4.0 * sigmas.s2 * h_u, 5.0 * sigmas.s2 * h_u);
    if hi <= lo {
        return Err(ProtocolError::EmptyMuInterval { h_u });
    }
    if !(mu > lo && mu < hi) {
        return Err(ProtocolError::MuOutOfInterval { mu, lo, hi });
    }
    Ok(())
}

/// `k1 + E + k3 + k1 E k3 + |S| 2^{n(-mu + 4 s2 H(U))}` with
/// `E = exp(-(1 - k2) 2^{n(mu - 2 s2 H(U))})` and `k3` the largest
/// Markov-lemma constant over states. May be `+inf` while `k2 > 1`.
pub fn zeta(n: f64, sigmas: Sigmas, mu: f64, inputs: &ZetaInputs) -> Result<f64, ProtocolError> {
    sigmas.validate()?;
    check_mu(sigmas, mu, inputs.h_u)?;
    let k = concentration_constants(&inputs.px, &inputs.pux, &inputs.puxy, n, sigmas)?;
    let (_, k3) = k.kappa_uxy_max();
    let h = inputs.h_u;
    let e = (-(1.0 - k.kappa_ux) * (n * (mu - 2.0 * sigmas.s2 * h)).exp2()).exp();
    let states = inputs.puxy.len() as f64;
    Ok(k.kappa_x + e + k3 + k.kappa_x * e * k3 + states * (n * (-mu + 4.0 * sigmas.s2 * h)).exp2())
}

/// Smallest integer `n` at which the covering constant drops below 1, so
/// that every term of [`zeta`] decays from there on.
pub fn zeta_crossover(sigmas: Sigmas, inputs: &ZetaInputs) -> Result<u64, ProtocolError> {
    sigmas.validate()?;
    let c = inputs.pux.min_mass();
    if c <= 0.0 {
        return Err(crate::typicality::TypicalityError::ZeroSupport { which: "P_{U,X}" }.into());
    }
    let ratio = (sigmas.s2 - sigmas.s1) / (1.0 + sigmas.s1);
    let size = (inputs.pux.n_rows() * inputs.pux.n_cols()) as f64;
    let guess = ((2.0 * size).ln() / (2.0 * (1.0 - sigmas.s1) * ratio * ratio * c * c)).sqrt();
    let mut n = guess.floor().max(1.0) as u64;
    while kappa_ux(&inputs.pux, n as f64, sigmas.s1, sigmas.s2)? >= 1.0 {
        n += 1;
    }
    while n > 1 && kappa_ux(&inputs.pux, (n - 1) as f64, sigmas.s1, sigmas.s2)? < 1.0 {
        n -= 1;
    }
    Ok(n)
}
