//! Finite distributions, compound sources and exact information measures.
//!
//! All logarithms are base 2. Symbols carry string labels but every
//! distribution is addressed by dense indices; joint tables are row-major.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a distribution.
pub const PMF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("negative probability {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("probability is not finite at index {index}")]
    NonFinite { index: usize },
    #[error("probabilities sum to {sum}, deviation {deviation:.3e} exceeds tolerance")]
    BadSum { sum: f64, deviation: f64 },
    #[error("expected {expected} entries, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),
    #[error("compound source has no states")]
    NoStates,
    #[error("duplicate state label `{0}`")]
    DuplicateState(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("invalid compound source: {0}")]
    InvalidSource(String),
}

fn check_mass(probs: &[f64]) -> Result<(), ModelError> {
    for (index, &value) in probs.iter().enumerate() {
        if !value.is_finite() {
            return Err(ModelError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(ModelError::NegativeMass { index, value });
        }
    }
    let sum: f64 = probs.iter().sum();
    let deviation = (sum - 1.0).abs();
    if deviation > PMF_TOLERANCE {
        return Err(ModelError::BadSum { sum, deviation });
    }
    Ok(())
}

/// `-p log2 p` with the `0 log 0 = 0` convention.
#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.log2()
    } else {
        0.0
    }
}

pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    probs.iter().copied().map(plogp).sum::<f64>().max(0.0)
}

/// Integer labels `"0", "1", ...` for quick construction.
pub fn numbered_alphabet(k: usize) -> Vec<String> {
    (0..k).map(|i| i.to_string()).collect()
}

/// Probability mass function on a finite labelled alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinitePmf {
    symbols: Vec<String>,
    probs: Vec<f64>,
}

impl FinitePmf {
    pub fn new(symbols: Vec<String>, probs: Vec<f64>) -> Result<Self, ModelError> {
        if symbols.is_empty() {
            return Err(ModelError::EmptyAlphabet);
        }
        if symbols.len() != probs.len() {
            return Err(ModelError::ShapeMismatch {
                expected: symbols.len(),
                found: probs.len(),
            });
        }
        check_mass(&probs)?;
        Ok(Self { symbols, probs })
    }

    /// Pmf with numbered symbols.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(numbered_alphabet(probs.len()), probs)
    }

    pub fn uniform(k: usize) -> Result<Self, ModelError> {
        Self::from_probs(vec![1.0 / k as f64; k])
    }

    pub fn point_mass(k: usize, at: usize) -> Result<Self, ModelError> {
        let mut probs = vec![0.0; k];
        if at >= k {
            return Err(ModelError::ShapeMismatch {
                expected: k,
                found: at + 1,
            });
        }
        probs[at] = 1.0;
        Self::from_probs(probs)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Indices of symbols with positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }

    /// Smallest probability over the whole alphabet.
    pub fn min_mass(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Which variable a conditional entropy conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Row,
    Col,
}

/// Joint pmf over `rows x cols`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    rows: Vec<String>,
    cols: Vec<String>,
    mass: Vec<f64>,
}

impl JointPmf {
    pub fn new(rows: Vec<String>, cols: Vec<String>, mass: Vec<f64>) -> Result<Self, ModelError> {
        if rows.is_empty() || cols.is_empty() {
            return Err(ModelError::EmptyAlphabet);
        }
        let expected = rows.len() * cols.len();
        if mass.len() != expected {
            return Err(ModelError::ShapeMismatch {
                expected,
                found: mass.len(),
            });
        }
        check_mass(&mass)?;
        Ok(Self { rows, cols, mass })
    }

    /// Joint with numbered alphabets from a nested table.
    pub fn from_table(table: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n_rows = table.len();
        let n_cols = table.first().map_or(0, Vec::len);
        let mut mass = Vec::with_capacity(n_rows * n_cols);
        for row in table {
            if row.len() != n_cols {
                return Err(ModelError::ShapeMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            mass.extend_from_slice(row);
        }
        Self::new(numbered_alphabet(n_rows), numbered_alphabet(n_cols), mass)
    }

    /// Product of two marginals.
    pub fn product(a: &FinitePmf, b: &FinitePmf) -> Result<Self, ModelError> {
        let mass = a
            .probs()
            .iter()
            .flat_map(|&pa| b.probs().iter().map(move |&pb| pa * pb))
            .collect();
        Self::new(a.symbols().to_vec(), b.symbols().to_vec(), mass)
    }

    /// Joint of `X ~ px` passed through the row-stochastic `channel[x][y]`.
    pub fn from_channel(px: &FinitePmf, channel: &[Vec<f64>]) -> Result<Self, ModelError> {
        if channel.len() != px.len() {
            return Err(ModelError::ShapeMismatch {
                expected: px.len(),
                found: channel.len(),
            });
        }
        let n_cols = channel.first().map_or(0, Vec::len);
        let mut mass = Vec::with_capacity(px.len() * n_cols);
        for (row, &p) in channel.iter().zip(px.probs()) {
            if row.len() != n_cols {
                return Err(ModelError::ShapeMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            mass.extend(row.iter().map(|w| p * w));
        }
        Self::new(px.symbols().to_vec(), numbered_alphabet(n_cols), mass)
    }

    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.mass[r * self.cols.len() + c]
    }

    pub fn row_marginal_probs(&self) -> Vec<f64> {
        self.mass
            .chunks(self.n_cols())
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn col_marginal_probs(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for row in self.mass.chunks(self.n_cols()) {
            for (acc, m) in out.iter_mut().zip(row) {
                *acc += m;
            }
        }
        out
    }

    pub fn row_marginal(&self) -> FinitePmf {
        FinitePmf {
            symbols: self.rows.clone(),
            probs: self.row_marginal_probs(),
        }
    }

    pub fn col_marginal(&self) -> FinitePmf {
        FinitePmf {
            symbols: self.cols.clone(),
            probs: self.col_marginal_probs(),
        }
    }

    pub fn transpose(&self) -> JointPmf {
        let (r, c) = (self.n_rows(), self.n_cols());
        let mut mass = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                mass[j * r + i] = self.mass[i * c + j];
            }
        }
        JointPmf {
            rows: self.cols.clone(),
            cols: self.rows.clone(),
            mass,
        }
    }

    /// Conditional law of the column variable given each row symbol.
    /// Rows with zero mass get a uniform conditional.
    pub fn row_conditionals(&self) -> Vec<Vec<f64>> {
        let c = self.n_cols();
        self.mass
            .chunks(c)
            .map(|row| {
                let total: f64 = row.iter().sum();
                if total > 0.0 {
                    row.iter().map(|m| m / total).collect()
                } else {
                    vec![1.0 / c as f64; c]
                }
            })
            .collect()
    }

    pub fn min_mass(&self) -> f64 {
        self.mass.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn entropy(p: &FinitePmf) -> f64 {
    entropy_of(p.probs())
}

/// Entropy of the joint table itself.
pub fn joint_entropy(j: &JointPmf) -> f64 {
    entropy_of(j.mass())
}

/// `H(row | col)` for `given = Col`, `H(col | row)` for `given = Row`.
pub fn conditional_entropy(j: &JointPmf, given: Axis) -> f64 {
    let conditioning = match given {
        Axis::Row => entropy_of(&j.row_marginal_probs()),
        Axis::Col => entropy_of(&j.col_marginal_probs()),
    };
    (joint_entropy(j) - conditioning).max(0.0)
}

pub fn mutual_information(j: &JointPmf) -> f64 {
    let value = entropy_of(&j.row_marginal_probs()) + entropy_of(&j.col_marginal_probs())
        - joint_entropy(j);
    value.max(0.0)
}

/// A family of joint laws `P_{X,Y_s}` indexed by a finite state set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundSource {
    x_alphabet: Vec<String>,
    y_alphabet: Vec<String>,
    states: Vec<String>,
    joints: Vec<JointPmf>,
}

/// One problem found by [`validate_compound`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: Option<String>,
    pub kind: ViolationKind,
    /// Largest observed deviation (absolute) behind the violation.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NoStates,
    DuplicateState,
    Shape,
    NegativeMass,
    NonFinite,
    SumNotOne,
    XMarginalMismatch,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub violations: Vec<Violation>,
}

impl Diagnostics {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_deviation(&self, kind: &ViolationKind) -> Option<f64> {
        self.violations
            .iter()
            .filter(|v| &v.kind == kind)
            .map(|v| v.deviation)
            .reduce(f64::max)
    }
}

impl std::fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.passed() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| {
                let state = v.state.as_deref().unwrap_or("-");
                format!(
                    "state {state}: {:?} (max deviation {:.6})",
                    v.kind, v.deviation
                )
            })
            .collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Checks every joint invariant and the shared X-marginal, collecting all
/// violations instead of stopping at the first.
pub fn validate_compound(src: &CompoundSource) -> Diagnostics {
    validate_parts(&src.x_alphabet, &src.y_alphabet, &src.states, &src.joints)
}

fn validate_parts(
    x_alphabet: &[String],
    y_alphabet: &[String],
    states: &[String],
    joints: &[JointPmf],
) -> Diagnostics {
    let mut violations = Vec::new();
    if states.is_empty() {
        violations.push(Violation {
            state: None,
            kind: ViolationKind::NoStates,
            deviation: 0.0,
        });
    }
    for (i, s) in states.iter().enumerate() {
        if states[..i].contains(s) {
            violations.push(Violation {
                state: Some(s.clone()),
                kind: ViolationKind::DuplicateState,
                deviation: 0.0,
            });
        }
    }
    let expected = x_alphabet.len() * y_alphabet.len();
    let mut reference: Option<Vec<f64>> = None;
    for (label, joint) in states.iter().zip(joints) {
        let state = Some(label.clone());
        if joint.rows() != x_alphabet || joint.cols() != y_alphabet || joint.mass.len() != expected
        {
            violations.push(Violation {
                state,
                kind: ViolationKind::Shape,
                deviation: 0.0,
            });
            continue;
        }
        if joint.mass.iter().any(|m| !m.is_finite()) {
            violations.push(Violation {
                state,
                kind: ViolationKind::NonFinite,
                deviation: 0.0,
            });
            continue;
        }
        let most_negative = joint.mass.iter().copied().fold(0.0_f64, f64::min);
        if most_negative < 0.0 {
            violations.push(Violation {
                state: state.clone(),
                kind: ViolationKind::NegativeMass,
                deviation: -most_negative,
            });
        }
        let sum_dev = (joint.mass.iter().sum::<f64>() - 1.0).abs();
        if sum_dev > PMF_TOLERANCE {
            violations.push(Violation {
                state: state.clone(),
                kind: ViolationKind::SumNotOne,
                deviation: sum_dev,
            });
        }
        let marginal = joint.row_marginal_probs();
        match &reference {
            None => reference = Some(marginal),
            Some(r) => {
                let dev = r
                    .iter()
                    .zip(&marginal)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0_f64, f64::max);
                if dev > PMF_TOLERANCE {
                    violations.push(Violation {
                        state,
                        kind: ViolationKind::XMarginalMismatch,
                        deviation: dev,
                    });
                }
            }
        }
    }
    if joints.len() != states.len() {
        violations.push(Violation {
            state: None,
            kind: ViolationKind::Shape,
            deviation: (joints.len() as f64 - states.len() as f64).abs(),
        });
    }
    Diagnostics { violations }
}

impl CompoundSource {
    pub fn new(
        x_alphabet: Vec<String>,
        y_alphabet: Vec<String>,
        states: Vec<String>,
        joints: Vec<JointPmf>,
    ) -> Result<Self, ModelError> {
        let diagnostics = validate_parts(&x_alphabet, &y_alphabet, &states, &joints);
        if !diagnostics.passed() {
            if states.is_empty() {
                return Err(ModelError::NoStates);
            }
            return Err(ModelError::InvalidSource(diagnostics.to_string()));
        }
        Ok(Self {
            x_alphabet,
            y_alphabet,
            states,
            joints,
        })
    }

    /// No validation; for callers that run [`validate_compound`] themselves.
    pub(crate) fn unchecked(
        x_alphabet: Vec<String>,
        y_alphabet: Vec<String>,
        states: Vec<String>,
        joints: Vec<JointPmf>,
    ) -> Self {
        Self {
            x_alphabet,
            y_alphabet,
            states,
            joints,
        }
    }

    /// Builds a source from already-validated joints; states are labelled
    /// `s0, s1, ...` and alphabets are taken from the first joint.
    pub fn from_joints(joints: Vec<JointPmf>) -> Result<Self, ModelError> {
        let first = joints.first().ok_or(ModelError::NoStates)?;
        let x = first.rows().to_vec();
        let y = first.cols().to_vec();
        let states = (0..joints.len()).map(|i| format!("s{i}")).collect();
        Self::new(x, y, states, joints)
    }

    /// Builds a source from a shared `P_X` and one channel `P_{Y|X}` per state.
    pub fn from_channels(px: &FinitePmf, channels: &[Vec<Vec<f64>>]) -> Result<Self, ModelError> {
        let joints = channels
            .iter()
            .map(|w| JointPmf::from_channel(px, w))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_joints(joints)
    }

    pub fn x_alphabet(&self) -> &[String] {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &[String] {
        &self.y_alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn joints(&self) -> &[JointPmf] {
        &self.joints
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn joint(&self, s: usize) -> &JointPmf {
        &self.joints[s]
    }

    pub fn state_index(&self, label: &str) -> Result<usize, ModelError> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| ModelError::UnknownState(label.to_string()))
    }

    /// The shared X-marginal (taken from the first state).
    pub fn x_marginal(&self) -> FinitePmf {
        self.joints[0].row_marginal()
    }

    /// The source restricted to a single state.
    pub fn single_state(&self, s: usize) -> CompoundSource {
        CompoundSource {
            x_alphabet: self.x_alphabet.clone(),
            y_alphabet: self.y_alphabet.clone(),
            states: vec![self.states[s].clone()],
            joints: vec![self.joints[s].clone()],
        }
    }

    /// The source restricted to a subset of states, in the given order.
    pub fn restrict(&self, states: &[usize]) -> Result<CompoundSource, ModelError> {
        if states.is_empty() {
            return Err(ModelError::NoStates);
        }
        Ok(CompoundSource {
            x_alphabet: self.x_alphabet.clone(),
            y_alphabet: self.y_alphabet.clone(),
            states: states.iter().map(|&s| self.states[s].clone()).collect(),
            joints: states.iter().map(|&s| self.joints[s].clone()).collect(),
        })
    }

    /// Appends a state, revalidating the shared X-marginal.
    pub fn with_state(&self, label: &str, joint: JointPmf) -> Result<CompoundSource, ModelError> {
        let mut states = self.states.clone();
        let mut joints = self.joints.clone();
        states.push(label.to_string());
        joints.push(joint);
        CompoundSource::new(
            self.x_alphabet.clone(),
            self.y_alphabet.clone(),
            states,
            joints,
        )
    }
}

/// Conditional pmf `P_{U|X}`: one row over the U-alphabet per X-symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxChannel {
    u_alphabet: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl AuxChannel {
    pub fn new(u_alphabet: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        if u_alphabet.is_empty() || rows.is_empty() {
            return Err(ModelError::EmptyAlphabet);
        }
        for row in &rows {
            if row.len() != u_alphabet.len() {
                return Err(ModelError::ShapeMismatch {
                    expected: u_alphabet.len(),
                    found: row.len(),
                });
            }
            check_mass(row)?;
        }
        Ok(Self { u_alphabet, rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        let k = rows.first().map_or(0, Vec::len);
        Self::new(numbered_alphabet(k), rows)
    }

    /// `U = X` on an alphabet of size `k`.
    pub fn identity(k: usize) -> Self {
        let rows = (0..k)
            .map(|x| (0..k).map(|u| if u == x { 1.0 } else { 0.0 }).collect())
            .collect();
        Self {
            u_alphabet: numbered_alphabet(k),
            rows,
        }
    }

    /// Every row is a point mass on `u = 0`: `U` is degenerate.
    pub fn constant(x_size: usize, u_size: usize) -> Self {
        let mut row = vec![0.0; u_size];
        row[0] = 1.0;
        Self {
            u_alphabet: numbered_alphabet(u_size),
            rows: vec![row; x_size],
        }
    }

    pub fn u_alphabet(&self) -> &[String] {
        &self.u_alphabet
    }

    pub fn u_size(&self) -> usize {
        self.u_alphabet.len()
    }

    pub fn x_size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, x: usize) -> FinitePmf {
        FinitePmf {
            symbols: self.u_alphabet.clone(),
            probs: self.rows[x].clone(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, u: usize) -> f64 {
        self.rows[x][u]
    }
}

/// Joints induced through `X` for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateJoints {
    /// `P_{U,Y_s}`.
    pub uy: JointPmf,
    /// `P_{U,X,Y_s}` with rows `U` and columns the product `X x Y` (index `x * |Y| + y`).
    pub uxy: JointPmf,
}

/// Everything the Markov chains `U - X - Y_s` determine.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedJoints {
    /// `P_{U,X}`.
    pub ux: JointPmf,
    pub states: Vec<StateJoints>,
}

impl InducedJoints {
    pub fn u_marginal(&self) -> FinitePmf {
        self.ux.row_marginal()
    }

    pub fn i_ux(&self) -> f64 {
        mutual_information(&self.ux)
    }

    pub fn i_uy(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| mutual_information(&s.uy))
            .collect()
    }

    pub fn min_i_uy(&self) -> f64 {
        self.i_uy().into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// `P_{U,X,Y_s}(u,x,y) = P_{U|X}(u|x) P_{X,Y_s}(x,y)` and its marginals.
pub fn induce_joints(aux: &AuxChannel, src: &CompoundSource) -> Result<InducedJoints, ModelError> {
    if aux.x_size() != src.x_alphabet().len() {
        return Err(ModelError::AlphabetMismatch(format!(
            "aux channel has {} rows, source X-alphabet has {} symbols",
            aux.x_size(),
            src.x_alphabet().len()
        )));
    }
    let nu = aux.u_size();
    let nx = src.x_alphabet().len();
    let ny = src.y_alphabet().len();
    let product_cols: Vec<String> = src
        .x_alphabet()
        .iter()
        .flat_map(|x| src.y_alphabet().iter().map(move |y| format!("{x},{y}")))
        .collect();

    let px = src.x_marginal();
    let mut ux = vec![0.0; nu * nx];
    for u in 0..nu {
        for x in 0..nx {
            ux[u * nx + x] = aux.get(x, u) * px.probs()[x];
        }
    }
    let ux = JointPmf {
        rows: aux.u_alphabet().to_vec(),
        cols: src.x_alphabet().to_vec(),
        mass: ux,
    };

    let states = src
        .joints()
        .iter()
        .map(|joint| {
            let mut uxy = vec![0.0; nu * nx * ny];
            let mut uy = vec![0.0; nu * ny];
            for u in 0..nu {
                for x in 0..nx {
                    let w = aux.get(x, u);
                    for y in 0..ny {
                        let m = w * joint.get(x, y);
                        uxy[u * nx * ny + x * ny + y] = m;
                        uy[u * ny + y] += m;
                    }
                }
            }
            StateJoints {
                uy: JointPmf {
                    rows: aux.u_alphabet().to_vec(),
                    cols: src.y_alphabet().to_vec(),
                    mass: uy,
                },
                uxy: JointPmf {
                    rows: aux.u_alphabet().to_vec(),
                    cols: product_cols.clone(),
                    mass: uxy,
                },
            }
        })
        .collect();
    Ok(InducedJoints { ux, states })
}

/// Binary entropy function in bits.
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// Row-stochastic binary symmetric channel.
pub fn bsc(crossover: f64) -> Vec<Vec<f64>> {
    vec![
        vec![1.0 - crossover, crossover],
        vec![crossover, 1.0 - crossover],
    ]
}
