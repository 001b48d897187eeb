//! Configuration, commands and result records.

mod commands;
mod config;
mod record;

pub use commands::{
    best_codebook, config_digest, protocol_aux, prune_aux, run_bounds, run_enumerate_typical,
    run_simulate, run_verify, sweep_rate, trial_seed, HarnessError, EXACT_ALONGSIDE, PRUNE_MASS,
};
pub use config::{
    parse_config, AuxMode, AuxSpec, ConfigError, ConfigIssue, ExperimentConfig, ProtocolSpec,
    SourceSpec, StateSpec, SweepSpec, VerifySpec,
};
pub use record::{digest_text, format_value, ResultRecord, ResultRow, TOOL_VERSION};
