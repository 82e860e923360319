//! Builtin example networks used by the command-line tool and the test
//! suites.

use crate::network::{
    ChannelSpec, Coupling, NetworkSpec, NodeKind, NodeSpec, StageElement, StageMap,
};

/// Parameters of the two-node interferometer network: two nodes coupled to
/// the first of two channels, with a splitter / phase / splitter stage in the
/// gap between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachZehnderParams {
    pub eps1: f64,
    pub eps2: f64,
    pub phi: f64,
    pub n1: f64,
    pub n2: f64,
    pub rate: f64,
    pub kind: NodeKind,
}

impl Default for MachZehnderParams {
    fn default() -> Self {
        Self {
            eps1: 0.5,
            eps2: 0.5,
            phi: 0.0,
            n1: 0.0,
            n2: 0.0,
            rate: 1.0,
            kind: NodeKind::Qubit,
        }
    }
}

pub fn mach_zehnder(p: &MachZehnderParams) -> NetworkSpec {
    let unit = vec![Coupling {
        channel: 1,
        re: 1.0,
        im: 0.0,
    }];
    NetworkSpec {
        nodes: vec![
            NodeSpec {
                id: 1,
                kind: p.kind,
                couplings: unit.clone(),
            },
            NodeSpec {
                id: 2,
                kind: p.kind,
                couplings: unit,
            },
        ],
        channels: vec![
            ChannelSpec {
                id: 1,
                occupation: p.n1,
            },
            ChannelSpec {
                id: 2,
                occupation: p.n2,
            },
        ],
        stages: vec![StageMap {
            after_node: 1,
            elements: vec![
                StageElement::Bs {
                    a: 1,
                    b: 2,
                    epsilon: p.eps1,
                },
                StageElement::Ps {
                    channel: 1,
                    phi: p.phi,
                },
                StageElement::Bs {
                    a: 1,
                    b: 2,
                    epsilon: p.eps2,
                },
            ],
        }],
        rate: p.rate,
    }
}

/// Parameters of the three-node network: each node couples to the first of
/// two channels; the first gap holds one splitter, the second gap a phase
/// shift followed by the second splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeNodeParams {
    pub eps1: f64,
    pub eps2: f64,
    pub phi: f64,
    pub n1: f64,
    pub n2: f64,
    pub rate: f64,
    pub kind: NodeKind,
}

impl Default for ThreeNodeParams {
    fn default() -> Self {
        Self {
            eps1: 0.5,
            eps2: 0.5,
            phi: 0.0,
            n1: 0.0,
            n2: 0.0,
            rate: 1.0,
            kind: NodeKind::Qubit,
        }
    }
}

pub fn three_node(p: &ThreeNodeParams) -> NetworkSpec {
    let unit = vec![Coupling {
        channel: 1,
        re: 1.0,
        im: 0.0,
    }];
    NetworkSpec {
        nodes: vec![
            NodeSpec {
                id: 1,
                kind: p.kind,
                couplings: unit.clone(),
            },
            NodeSpec {
                id: 2,
                kind: p.kind,
                couplings: unit.clone(),
            },
            NodeSpec {
                id: 3,
                kind: p.kind,
                couplings: unit,
            },
        ],
        channels: vec![
            ChannelSpec {
                id: 1,
                occupation: p.n1,
            },
            ChannelSpec {
                id: 2,
                occupation: p.n2,
            },
        ],
        stages: vec![
            StageMap {
                after_node: 1,
                elements: vec![StageElement::Bs {
                    a: 1,
                    b: 2,
                    epsilon: p.eps1,
                }],
            },
            StageMap {
                after_node: 2,
                elements: vec![
                    StageElement::Ps {
                        channel: 1,
                        phi: p.phi,
                    },
                    StageElement::Bs {
                        a: 1,
                        b: 2,
                        epsilon: p.eps2,
                    },
                ],
            },
        ],
        rate: p.rate,
    }
}

/// Single node relaxing against one thermal channel, the smallest network
/// with nontrivial steady-state behavior.
pub fn single_node(kind: NodeKind, occupation: f64, rate: f64) -> NetworkSpec {
    NetworkSpec {
        nodes: vec![NodeSpec {
            id: 1,
            kind,
            couplings: vec![Coupling {
                channel: 1,
                re: 1.0,
                im: 0.0,
            }],
        }],
        channels: vec![ChannelSpec {
            id: 1,
            occupation,
        }],
        stages: Vec::new(),
        rate,
    }
}

/// Splitmix64 step, used for dependency-free deterministic sampling.
struct Sampler(u64);

impl Sampler {
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

/// Deterministic randomized network for property suites: up to `max_nodes`
/// nodes (cavities of dimension 2 or 3, or qubits), up to `max_channels`
/// channels with occupations in `[0, max_occupation]`, and random splitter /
/// phase stages. The result always passes validation.
pub fn random_network(
    seed: u64,
    max_nodes: usize,
    max_channels: usize,
    max_occupation: f64,
) -> NetworkSpec {
    let mut s = Sampler(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1));
    let m_count = 1 + s.below(max_nodes);
    let k_count = 1 + s.below(max_channels);

    let mut nodes = Vec::with_capacity(m_count);
    for id in 1..=m_count {
        let kind = match s.below(3) {
            0 => NodeKind::Qubit,
            1 => NodeKind::Cavity(2),
            _ => NodeKind::Cavity(3),
        };
        let mut couplings = Vec::new();
        for k in 1..=k_count {
            if s.unit() < 0.6 || (k == k_count && couplings.is_empty()) {
                let angle = s.range(-std::f64::consts::PI, std::f64::consts::PI);
                let mag = s.range(0.3, 1.0);
                couplings.push(Coupling {
                    channel: k,
                    re: mag * angle.cos(),
                    im: mag * angle.sin(),
                });
            }
        }
        nodes.push(NodeSpec {
            id,
            kind,
            couplings,
        });
    }

    let channels = (1..=k_count)
        .map(|id| ChannelSpec {
            id,
            occupation: s.range(0.0, max_occupation),
        })
        .collect();

    let mut stages = Vec::new();
    for after_node in 1..m_count {
        let mut elements = Vec::new();
        for _ in 0..s.below(4) {
            if k_count >= 2 && s.unit() < 0.6 {
                let a = 1 + s.below(k_count);
                let mut b = 1 + s.below(k_count);
                while b == a {
                    b = 1 + s.below(k_count);
                }
                elements.push(StageElement::Bs {
                    a,
                    b,
                    epsilon: s.unit(),
                });
            } else {
                elements.push(StageElement::Ps {
                    channel: 1 + s.below(k_count),
                    phi: s.range(-std::f64::consts::PI, std::f64::consts::PI),
                });
            }
        }
        stages.push(StageMap {
            after_node,
            elements,
        });
    }

    NetworkSpec {
        nodes,
        channels,
        stages,
        rate: s.range(0.5, 2.0),
    }
}
