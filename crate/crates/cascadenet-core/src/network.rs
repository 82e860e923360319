//! Declarative description of a cascaded interferometric network and the
//! channel-mode transforms it induces.
//!
//! A network is an ordered cascade of nodes (cavities or qubits), a set of
//! unidirectional bosonic channels feeding them, and per-gap stage maps built
//! from beam splitters and phase shifters. The stage maps act on the channel
//! modes in the Heisenberg picture; [`NetworkSpec::cumulative_transform`]
//! accumulates them into the matrix seen by each node.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::linalg;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("failed to parse network description: {0}")]
    Parse(String),
    #[error("invalid network:\n{0}")]
    Invalid(ValidationReport),
    #[error("node index {index} out of range for {nodes} nodes")]
    NodeOutOfRange { index: usize, nodes: usize },
}

/// Local dimension and statistics of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeKind {
    /// Bosonic mode truncated to the given Fock dimension.
    Cavity(usize),
    /// Two-level system; the ladder operator is the qubit lowering operator.
    Qubit,
}

impl NodeKind {
    pub fn dim(&self) -> usize {
        match self {
            NodeKind::Cavity(d) => *d,
            NodeKind::Qubit => 2,
        }
    }
}

/// Excitation-hopping coupling `weight * (a_m^dag b_k + h.c.)` between a node
/// and channel `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub channel: usize,
    pub re: f64,
    pub im: f64,
}

impl Coupling {
    pub fn weight(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// 1-based cascade position.
    pub id: usize,
    pub kind: NodeKind,
    /// Channels this node exchanges excitations with. An empty list declares
    /// a passive node.
    #[serde(default)]
    pub couplings: Vec<Coupling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// 1-based channel label.
    pub id: usize,
    /// Thermal mean occupation of the fresh carriers on this channel.
    pub occupation: f64,
}

/// One passive-optics primitive inside a stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum StageElement {
    /// Beam splitter with transmissivity `epsilon` mixing channels `a`, `b`.
    Bs { a: usize, b: usize, epsilon: f64 },
    /// Phase shift by `phi` on one channel.
    Ps { channel: usize, phi: f64 },
}

/// Ordered optical elements applied to the channels after `after_node` has
/// interacted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageMap {
    pub after_node: usize,
    #[serde(default)]
    pub elements: Vec<StageElement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<NodeSpec>,
    pub channels: Vec<ChannelSpec>,
    /// One stage per inter-node gap, in cascade order; a trailing stage after
    /// the last node is allowed and has no effect on any computed quantity.
    #[serde(default)]
    pub stages: Vec<StageMap>,
    /// Collision rate constant, the `g^2 dt` limit value. All evolution times
    /// are measured in units of its inverse.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Outcome of [`NetworkSpec::validate`]; empty iff the network is well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl NetworkSpec {
    pub fn from_json_str(text: &str) -> Result<Self, NetworkError> {
        serde_json::from_str(text).map_err(|e| NetworkError::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }

    /// FNV-1a hash of the canonical JSON form, for output provenance.
    pub fn content_hash(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_json_string().bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Local dimensions of the nodes in cascade order.
    pub fn node_dims(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.kind.dim()).collect()
    }

    /// Channel occupations indexed by channel label minus one.
    pub fn occupations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.channels.len()];
        for ch in &self.channels {
            if ch.id >= 1 && ch.id <= out.len() {
                out[ch.id - 1] = ch.occupation;
            }
        }
        out
    }

    /// Couplings of node `m` (1-based) with nonzero weight, sorted by
    /// channel. Zero-weight entries carry no interaction and are dropped.
    pub fn active_couplings(&self, m: usize) -> Result<Vec<Coupling>, NetworkError> {
        let node = self.node(m)?;
        let mut list: Vec<Coupling> = node
            .couplings
            .iter()
            .copied()
            .filter(|c| c.weight().norm() > 0.0)
            .collect();
        list.sort_by_key(|c| c.channel);
        Ok(list)
    }

    pub fn node(&self, m: usize) -> Result<&NodeSpec, NetworkError> {
        if m < 1 || m > self.nodes.len() {
            return Err(NetworkError::NodeOutOfRange {
                index: m,
                nodes: self.nodes.len(),
            });
        }
        Ok(&self.nodes[m - 1])
    }

    /// Collect every invariant violation. An empty report means the network
    /// is ready for the coefficient and dynamics engines.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let m_count = self.nodes.len();
        let k_count = self.channels.len();

        if m_count == 0 {
            report.push("nodes", "network needs at least one node");
        }
        if k_count == 0 {
            report.push("channels", "network needs at least one channel");
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            report.push("rate", format!("rate must be positive and finite, got {}", self.rate));
        }

        for (i, node) in self.nodes.iter().enumerate() {
            let path = format!("nodes[{i}]");
            if node.id != i + 1 {
                report.push(
                    format!("{path}.id"),
                    format!("cascade ids must be 1,2,... in order; expected {}, got {}", i + 1, node.id),
                );
            }
            if let NodeKind::Cavity(d) = node.kind {
                if d < 2 {
                    report.push(format!("{path}.kind"), format!("cavity truncation must be at least 2, got {d}"));
                }
            }
            let mut seen = Vec::new();
            let mut any_nonzero = false;
            for (j, c) in node.couplings.iter().enumerate() {
                let cpath = format!("{path}.couplings[{j}]");
                if c.channel < 1 || c.channel > k_count {
                    report.push(
                        format!("{cpath}.channel"),
                        format!("channel {} not in 1..{k_count}", c.channel),
                    );
                }
                if seen.contains(&c.channel) {
                    report.push(format!("{cpath}.channel"), format!("duplicate coupling to channel {}", c.channel));
                }
                seen.push(c.channel);
                if !(c.re.is_finite() && c.im.is_finite()) {
                    report.push(cpath, "coupling weight must be finite".to_string());
                } else if c.weight().norm() > 0.0 {
                    any_nonzero = true;
                }
            }
            if !node.couplings.is_empty() && !any_nonzero {
                report.push(
                    format!("{path}.couplings"),
                    "all coupling weights are zero; drop the list to declare a passive node",
                );
            }
        }

        for (i, ch) in self.channels.iter().enumerate() {
            let path = format!("channels[{i}]");
            if ch.id != i + 1 {
                report.push(
                    format!("{path}.id"),
                    format!("channel ids must be 1,2,... in order; expected {}, got {}", i + 1, ch.id),
                );
            }
            if !(ch.occupation.is_finite() && ch.occupation >= 0.0) {
                report.push(
                    format!("{path}.occupation"),
                    format!("occupation must be finite and nonnegative, got {}", ch.occupation),
                );
            }
        }

        if m_count > 0 && !(self.stages.len() == m_count.saturating_sub(1) || self.stages.len() == m_count) {
            report.push(
                "stages",
                format!(
                    "expected one stage per inter-node gap ({} or {} entries), got {}",
                    m_count - 1,
                    m_count,
                    self.stages.len()
                ),
            );
        }
        for (i, stage) in self.stages.iter().enumerate() {
            let path = format!("stages[{i}]");
            if stage.after_node != i + 1 {
                report.push(
                    format!("{path}.after_node"),
                    format!("stages must follow cascade order; expected {}, got {}", i + 1, stage.after_node),
                );
            }
            for (j, el) in stage.elements.iter().enumerate() {
                let epath = format!("{path}.elements[{j}]");
                match el {
                    StageElement::Bs { a, b, epsilon } => {
                        for (label, ch) in [("a", a), ("b", b)] {
                            if *ch < 1 || *ch > k_count {
                                report.push(
                                    format!("{epath}.bs.{label}"),
                                    format!("channel {ch} not in 1..{k_count}"),
                                );
                            }
                        }
                        if a == b {
                            report.push(format!("{epath}.bs"), "beam splitter needs two distinct channels");
                        }
                        if !(epsilon.is_finite() && (0.0..=1.0).contains(epsilon)) {
                            report.push(format!("{epath}.bs.epsilon"), "transmissivity out of range");
                        }
                    }
                    StageElement::Ps { channel, phi } => {
                        if *channel < 1 || *channel > k_count {
                            report.push(
                                format!("{epath}.ps.channel"),
                                format!("channel {channel} not in 1..{k_count}"),
                            );
                        }
                        if !phi.is_finite() {
                            report.push(format!("{epath}.ps.phi"), "phase must be finite");
                        }
                    }
                }
            }
        }

        report
    }

    /// Like [`validate`](Self::validate) but as a `Result`, for callers that
    /// require a well-formed network.
    pub fn ensure_valid(&self) -> Result<(), NetworkError> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(NetworkError::Invalid(report))
        }
    }

    /// Mode matrix of one element on the full set of channels: the stated
    /// 2x2 (or 1x1) block on the referenced channels, identity elsewhere.
    pub fn element_matrix(&self, element: &StageElement) -> Array2<Complex64> {
        let k = self.num_channels();
        let mut u = Array2::eye(k);
        match element {
            StageElement::Bs { a, b, epsilon } => {
                let (ia, ib) = (a - 1, b - 1);
                let t = Complex64::new(epsilon.sqrt(), 0.0);
                let r = Complex64::new(0.0, -(1.0 - epsilon).sqrt());
                u[[ia, ia]] = t;
                u[[ia, ib]] = r;
                u[[ib, ia]] = r;
                u[[ib, ib]] = t;
            }
            StageElement::Ps { channel, phi } => {
                u[[channel - 1, channel - 1]] = Complex64::new(0.0, -phi).exp();
            }
        }
        u
    }

    /// Heisenberg mode matrix `U^(m)` of the stage after node `m`: the
    /// ordered product of its element matrices, first element applied first
    /// (rightmost factor). Identity if no stage is declared after `m`.
    pub fn stage_matrix(&self, after_node: usize) -> Array2<Complex64> {
        let k = self.num_channels();
        let mut u = Array2::eye(k);
        if after_node >= 1 {
            if let Some(stage) = self.stages.get(after_node - 1) {
                for element in &stage.elements {
                    u = self.element_matrix(element).dot(&u);
                }
            }
        }
        u
    }

    /// Cumulative transform `W^(m) = U^(m-1) ... U^(1)` with `W^(1) = I`.
    /// Row `k` holds the Heisenberg image of mode `b_k` as seen by node `m`:
    /// `b_k -> sum_j W_{kj} b_j` acting on the fresh inputs.
    pub fn cumulative_transform(&self, m: usize) -> Result<Array2<Complex64>, NetworkError> {
        if m < 1 || m > self.num_nodes() {
            return Err(NetworkError::NodeOutOfRange {
                index: m,
                nodes: self.num_nodes(),
            });
        }
        let mut w = Array2::eye(self.num_channels());
        for stage in 1..m {
            w = self.stage_matrix(stage).dot(&w);
        }
        Ok(w)
    }

    /// Max deviation of `U^dag U` from the identity over all stage matrices.
    pub fn stage_unitarity_deviation(&self) -> f64 {
        let k = self.num_channels();
        let eye: Array2<Complex64> = Array2::eye(k);
        let mut worst = 0.0_f64;
        for m in 1..=self.stages.len() {
            let u = self.stage_matrix(m);
            let gram = linalg::dagger(&u).dot(&u);
            worst = worst.max(linalg::max_abs(&(&gram - &eye)));
        }
        worst
    }
}
