//! Fixed instances shared by the criterion benches.

use compound_cr::protocol::{derive_params, generate_codebook, MuPolicy};
use compound_cr::seeds::substream;
use compound_cr::source_model::{bsc, induce_joints, JointPmf};
use compound_cr::{AuxChannel, Codebook, CompoundSource, FinitePmf, ProtocolParams};

/// Uniform binary `X` observed through BSC(0.1) and BSC(0.25).
pub fn two_state_bsc() -> CompoundSource {
    CompoundSource::from_channels(&FinitePmf::uniform(2).unwrap(), &[bsc(0.1), bsc(0.25)]).unwrap()
}

/// Ternary `X` with three random-looking but fixed channels.
pub fn ternary_three_state() -> CompoundSource {
    let px = FinitePmf::from_probs(vec![0.5, 0.3, 0.2]).unwrap();
    let chans = vec![
        vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
        ],
        vec![
            vec![0.6, 0.3, 0.1],
            vec![0.2, 0.6, 0.2],
            vec![0.1, 0.3, 0.6],
        ],
        vec![
            vec![0.7, 0.2, 0.1],
            vec![0.25, 0.5, 0.25],
            vec![0.2, 0.2, 0.6],
        ],
    ];
    CompoundSource::from_channels(&px, &chans).unwrap()
}

/// `Y = X` and `Y = 1 - X` with `U = X`, plus a codebook at blocklength `n`.
pub fn identity_protocol(n: usize) -> (CompoundSource, AuxChannel, ProtocolParams, Codebook) {
    let flip = JointPmf::from_table(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
    let same = JointPmf::from_table(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
    let src = CompoundSource::from_joints(vec![same, flip]).unwrap();
    let aux = AuxChannel::identity(2);
    let params = derive_params(&aux, &src, n, 0.02, 1.0, MuPolicy::Fraction(0.1)).unwrap();
    let pu = induce_joints(&aux, &src).unwrap().u_marginal();
    let cb = generate_codebook(&params, &pu, &mut substream(1, "bench", &[n as u64])).unwrap();
    (src, aux, params, cb)
}
