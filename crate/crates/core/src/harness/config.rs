//! The TOML experiment schema.
//!
//! ```toml
//! seed = 7
//! rate = 0.5
//! output = "results/run"      # optional; writes run.csv and run.json
//!
//! [source]
//! x = ["0", "1"]              # optional, defaults to "0", "1", ...
//! y = ["0", "1"]
//! [[source.states]]
//! label = "s0"
//! joint = [[0.45, 0.05], [0.05, 0.45]]
//!
//! [aux]
//! mode = "solve"              # or "explicit" with `channel = [[...]]`
//!
//! [protocol]                  # optional
//! n = [6, 8, 10]
//! sigma = 0.02
//! mu = "midpoint"             # or { fraction = 0.1 } or { fixed = 0.09 }
//! trials = 10000
//! codebook_retries = 1
//!
//! [solver]                    # optional, any SolverOptions field
//! restarts = 32
//!
//! [sweep]                     # optional
//! rates = [0.1, 0.2, 0.4]
//!
//! [verify]                    # optional
//! tolerance = 2e-3
//! ```

use serde::{Deserialize, Serialize};

use crate::bounds::SolverOptions;
use crate::protocol::{MuPolicy, DEFAULT_CODEBOOK_GUARD};
use crate::source_model::{
    numbered_alphabet, validate_compound, AuxChannel, CompoundSource, JointPmf, ViolationKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub label: String,
    /// `P_{X,Y_s}` with rows indexed by `x`.
    pub joint: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<String>>,
    pub states: Vec<StateSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxMode {
    /// Use the lower-bound argmax.
    Solve,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxSpec {
    pub mode: AuxMode,
    /// `P_{U|X}`, one row per `x`; required for `explicit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<String>>,
}

impl Default for AuxSpec {
    fn default() -> Self {
        AuxSpec {
            mode: AuxMode::Solve,
            channel: None,
            u: None,
        }
    }
}

fn default_trials() -> u64 {
    10_000
}

fn default_retries() -> u32 {
    1
}

fn default_guard() -> u64 {
    DEFAULT_CODEBOOK_GUARD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub n: Vec<usize>,
    pub sigma: f64,
    #[serde(default)]
    pub mu: MuPolicy,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_retries")]
    pub codebook_retries: u32,
    #[serde(default = "default_guard")]
    pub codebook_guard: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
}

fn default_tolerance() -> f64 {
    2e-3
}

fn default_oracle_slack() -> f64 {
    2e-2
}

fn default_degradation_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Slack on orderings, collapses and monotonicity, in bits.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// How far the grid oracle may exceed the solver.
    #[serde(default = "default_oracle_slack")]
    pub oracle_slack: f64,
    /// Max-norm residual accepted by the degradation check.
    #[serde(default = "default_degradation_tol")]
    pub degradation_tol: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            tolerance: default_tolerance(),
            oracle_slack: default_oracle_slack(),
            degradation_tol: default_degradation_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub source: SourceSpec,
    #[serde(default)]
    pub aux: AuxSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSpec>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

/// One problem with a config: where it is and what is wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub path: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid config: {}", .issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    fn single(path: &str, reason: impl Into<String>) -> Self {
        ConfigError {
            issues: vec![ConfigIssue {
                path: path.into(),
                reason: reason.into(),
            }],
        }
    }
}

impl ExperimentConfig {
    pub fn x_alphabet(&self) -> Vec<String> {
        let rows = self.source.states.first().map_or(0, |s| s.joint.len());
        self.source
            .x
            .clone()
            .unwrap_or_else(|| numbered_alphabet(rows))
    }

    pub fn y_alphabet(&self) -> Vec<String> {
        let cols = self
            .source
            .states
            .first()
            .and_then(|s| s.joint.first())
            .map_or(0, Vec::len);
        self.source
            .y
            .clone()
            .unwrap_or_else(|| numbered_alphabet(cols))
    }

    /// The compound source the config describes.
    pub fn compound_source(&self) -> Result<CompoundSource, ConfigError> {
        let x = self.x_alphabet();
        let y = self.y_alphabet();
        let mut issues = Vec::new();
        let mut joints = Vec::new();
        for (i, state) in self.source.states.iter().enumerate() {
            let path = format!("source.states[{i}].joint");
            if state.joint.len() != x.len() || state.joint.iter().any(|r| r.len() != y.len()) {
                issues.push(ConfigIssue {
                    path,
                    reason: format!("expected a {} x {} table", x.len(), y.len()),
                });
                continue;
            }
            match JointPmf::new(x.clone(), y.clone(), state.joint.concat()) {
                Ok(j) => joints.push(j),
                Err(e) => issues.push(ConfigIssue {
                    path,
                    reason: e.to_string(),
                }),
            }
        }
        if self.source.states.is_empty() {
            issues.push(ConfigIssue {
                path: "source.states".into(),
                reason: "at least one state is required".into(),
            });
        }
        if !issues.is_empty() {
            return Err(ConfigError { issues });
        }
        let labels: Vec<String> = self.source.states.iter().map(|s| s.label.clone()).collect();
        // Build without validation first so that every violation can be reported.
        let diagnostics = validate_compound(&CompoundSource::unchecked(
            x.clone(),
            y.clone(),
            labels.clone(),
            joints.clone(),
        ));
        if !diagnostics.passed() {
            let issues = diagnostics
                .violations
                .iter()
                .map(|v| {
                    let reason = match v.kind {
                        ViolationKind::XMarginalMismatch => {
                            format!(
                                "X-marginal differs from the first state's by up to {:.6e}",
                                v.deviation
                            )
                        }
                        ref k => format!("{k:?} (deviation {:.6e})", v.deviation),
                    };
                    ConfigIssue {
                        path: format!("source.states[{}]", v.state.as_deref().unwrap_or("?")),
                        reason,
                    }
                })
                .collect();
            return Err(ConfigError { issues });
        }
        CompoundSource::new(x, y, labels, joints)
            .map_err(|e| ConfigError::single("source", e.to_string()))
    }

    /// The explicit aux channel, if the config gives one.
    pub fn explicit_aux(&self) -> Result<Option<AuxChannel>, ConfigError> {
        match self.aux.mode {
            AuxMode::Solve => Ok(None),
            AuxMode::Explicit => {
                let rows = self.aux.channel.clone().ok_or_else(|| {
                    ConfigError::single("aux.channel", "required when mode = \"explicit\"")
                })?;
                let width = rows.first().map_or(0, Vec::len);
                let u = self
                    .aux
                    .u
                    .clone()
                    .unwrap_or_else(|| numbered_alphabet(width));
                AuxChannel::new(u, rows)
                    .map(Some)
                    .map_err(|e| ConfigError::single("aux.channel", e.to_string()))
            }
        }
    }

    /// Range checks on every numeric field, all reported together.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |path: &str, reason: String| {
            issues.push(ConfigIssue {
                path: path.into(),
                reason,
            })
        };
        if !(self.rate.is_finite() && self.rate > 0.0) {
            bad(
                "rate",
                format!("must be positive and finite, got {}", self.rate),
            );
        }
        if let Some(p) = &self.protocol {
            if p.n.is_empty() || p.n.contains(&0) {
                bad(
                    "protocol.n",
                    "must be a non-empty list of positive blocklengths".into(),
                );
            }
            if !(p.sigma > 0.0 && 3.0 * p.sigma < 1.0) {
                bad(
                    "protocol.sigma",
                    format!("need 0 < sigma < 1/3, got {}", p.sigma),
                );
            }
            if p.trials == 0 {
                bad("protocol.trials", "must be at least 1".into());
            }
            if p.codebook_retries == 0 {
                bad("protocol.codebook_retries", "must be at least 1".into());
            }
            if let MuPolicy::Fraction(f) = p.mu {
                if !(f > 0.0 && f < 1.0) {
                    bad(
                        "protocol.mu.fraction",
                        format!("must lie in (0, 1), got {f}"),
                    );
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.rates.is_empty() || s.rates.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                bad(
                    "sweep.rates",
                    "must be a non-empty list of positive rates".into(),
                );
            }
            if s.rates.windows(2).any(|w| w[1] <= w[0]) {
                bad("sweep.rates", "must be strictly increasing".into());
            }
        }
        if !(self.verify.tolerance >= 0.0
            && self.verify.oracle_slack >= 0.0
            && self.verify.degradation_tol >= 0.0)
        {
            bad("verify", "tolerances must be non-negative".into());
        }
        if let Err(e) = self.solver.validate() {
            bad("solver", e.to_string());
        }
        if self.aux.mode == AuxMode::Solve && self.aux.channel.is_some() {
            bad(
                "aux.channel",
                "only allowed with mode = \"explicit\"".into(),
            );
        }
        let mut all = issues;
        if let Err(e) = self.compound_source() {
            all.extend(e.issues);
        } else if let Err(e) = self.explicit_aux() {
            all.extend(e.issues);
        } else if let (Ok(src), Ok(Some(aux))) = (self.compound_source(), self.explicit_aux()) {
            if aux.x_size() != src.x_alphabet().len() {
                all.push(ConfigIssue {
                    path: "aux.channel".into(),
                    reason: format!(
                        "{} rows for an X-alphabet of {}",
                        aux.x_size(),
                        src.x_alphabet().len()
                    ),
                });
            }
        }
        if all.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues: all })
        }
    }

    /// Canonical TOML text; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

/// Parses and fully validates a config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let path = e.span().map_or_else(
            || "document".to_string(),
            |s| format!("bytes {}..{}", s.start, s.end),
        );
        ConfigError::single(&path, e.message().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}
