//! Common randomness generation from finite compound sources.
//!
//! The crate computes the single-letter lower and upper bounds on the
//! compound common-randomness capacity `C(R)` of a two-terminal source
//! with one-way rate-limited communication, and runs the binning-based
//! achievability protocol at small blocklengths so that both can be
//! checked against exhaustive oracles.
//!
//! * [`source_model`]: finite pmfs, compound sources, `H`, `I` in bits.
//! * [`typicality`]: robust typical sets, type classes, exact sampling.
//! * [`bounds`]: the max-`I(U;X)` programs behind both bounds.
//! * [`protocol`]: codebook, encoder, decoder, simulation, exact evaluation.
//! * [`harness`]: configuration, commands and result records.

pub mod bounds;
pub mod harness;
pub mod protocol;
pub mod seeds;
pub mod simplex;
pub mod source_model;
pub mod typicality;

pub use bounds::{BoundResult, SolverOptions};
pub use protocol::{Codebook, Codeword, ProtocolParams, SimulationReport};
pub use source_model::{AuxChannel, CompoundSource, FinitePmf, JointPmf};
pub use typicality::{Sequence, Sigmas, TypeClass};
