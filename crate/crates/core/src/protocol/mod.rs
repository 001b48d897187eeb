//! The binning protocol at small blocklengths.
//!
//! Terminal X maps `x^n` to the first codeword jointly typical with it and
//! sends its row. Terminal Y looks in that row for the unique codeword
//! typical with `y^n` under some state.

mod codebook;
mod exact;
mod params;
mod simulate;
mod zeta;

pub use codebook::{
    candidates, decode, encode, generate_codebook, generate_codebook_guarded, message, Codebook,
    Codeword, DEFAULT_CODEBOOK_GUARD,
};
pub use exact::{exact_evaluate, ExactReport, ExactState, EXACT_GUARD};
pub use params::{derive_params, from_information, MuPolicy, ProtocolParams};
pub use simulate::{simulate, Events, SimulationReport, TrialRunner};
pub use zeta::{zeta, zeta_crossover, ZetaInputs};

use thiserror::Error;

use crate::source_model::ModelError;
use crate::typicality::TypicalityError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("blocklength must be positive")]
    InvalidBlocklength,
    #[error("rate budget must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("H(U) = {h_u}: the interval 4 s2 H(U) < mu < 5 s2 H(U) is empty")]
    EmptyMuInterval { h_u: f64 },
    #[error("mu = {mu} outside the open interval ({lo}, {hi})")]
    MuOutOfInterval { mu: f64, lo: f64, hi: f64 },
    #[error("N2 < 1: n (min_s I(U;Y_s) - 2 mu) = {exponent} < 0 with min_s I(U;Y_s) = {min_i_uy}, mu = {mu}")]
    N2TooSmall {
        min_i_uy: f64,
        mu: f64,
        exponent: f64,
    },
    #[error("N1 < 1: exponent {exponent}")]
    N1TooSmall { exponent: f64 },
    #[error("codebook dimension 2^{0} overflows")]
    Overflow(f64),
    #[error("message rate log2(N1+1)/n = {message_rate} exceeds R = {rate}")]
    RateExceeded { message_rate: f64, rate: f64 },
    #[error("codebook of {n1} x {n2} entries exceeds the guard of {guard}")]
    CodebookTooLarge { n1: u64, n2: u64, guard: u64 },
    #[error("exact evaluation needs {size} sequence pairs, guard is {guard}")]
    ExactTooLarge { size: f64, guard: f64 },
    #[error("trial budget must be positive")]
    NoTrials,
    #[error("state index {0} out of range")]
    UnknownState(usize),
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Typicality(#[from] TypicalityError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
