//! Second-order correlation coefficients of the carrier environment.
//!
//! For every node `m` the carriers it meets are the fresh channel inputs
//! propagated through all preceding stages. The master-equation generator
//! only needs the first and second moments of those propagated carriers:
//! the local coefficients `gamma` of each node, and the cross coefficients
//! `zeta` / `xi` connecting ordered node pairs. This module defines the
//! container ([`CoefficientSet`]) and the analytic Gaussian backend
//! ([`gaussian_coefficients`]); the numeric Fock backend lives in
//! [`crate::fock`].

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::network::{NetworkError, NetworkSpec};
use crate::numfmt::format_f64;

#[derive(Debug, Error)]
pub enum CoefficientError {
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Ladder sector of a node-carrier interaction term. `Up` pairs the node
/// raising operator with the carrier annihilation part (`a^dag b`), `Down`
/// the node lowering operator with the carrier creation part (`a b^dag`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ladder {
    Up,
    Down,
}

impl Ladder {
    pub const BOTH: [Ladder; 2] = [Ladder::Up, Ladder::Down];

    /// Conventional 1-based label: 1 for `Up`, 2 for `Down`.
    pub fn index(self) -> usize {
        match self {
            Ladder::Up => 1,
            Ladder::Down => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Ladder> {
        match index {
            1 => Some(Ladder::Up),
            2 => Some(Ladder::Down),
            _ => None,
        }
    }

    pub fn flip(self) -> Ladder {
        match self {
            Ladder::Up => Ladder::Down,
            Ladder::Down => Ladder::Up,
        }
    }

    fn pos(self) -> usize {
        self.index() - 1
    }
}

/// The four ladder-sector blocks of one coefficient family. Rows index the
/// first channel argument, columns the second.
#[derive(Debug, Clone)]
struct LadderBlocks {
    blocks: [[Array2<Complex64>; 2]; 2],
}

impl LadderBlocks {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            blocks: std::array::from_fn(|_| std::array::from_fn(|_| Array2::zeros((rows, cols)))),
        }
    }

    fn get(&self, l: Ladder, lp: Ladder, i: usize, j: usize) -> Complex64 {
        self.blocks[l.pos()][lp.pos()][[i, j]]
    }

    fn set(&mut self, l: Ladder, lp: Ladder, i: usize, j: usize, value: Complex64) {
        self.blocks[l.pos()][lp.pos()][[i, j]] = value;
    }
}

#[derive(Debug, Clone)]
struct CrossBlock {
    m: usize,
    mp: usize,
    zeta: LadderBlocks,
    xi: LadderBlocks,
}

/// First- and second-moment coefficients of a network, indexed by 1-based
/// node ids, channel labels and [`Ladder`] sectors. Channel arguments range
/// over the active couplings of the respective node.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    node_channels: Vec<Vec<usize>>,
    /// Per node: `first[l][k_idx]`.
    first: Vec<[Vec<Complex64>; 2]>,
    local: Vec<LadderBlocks>,
    cross: Vec<CrossBlock>,
}

impl CoefficientSet {
    pub(crate) fn new_zeroed(node_channels: Vec<Vec<usize>>) -> Self {
        let first = node_channels
            .iter()
            .map(|ch| [vec![Complex64::default(); ch.len()], vec![Complex64::default(); ch.len()]])
            .collect();
        let local = node_channels
            .iter()
            .map(|ch| LadderBlocks::zeros(ch.len(), ch.len()))
            .collect();
        let mut cross = Vec::new();
        for m in 0..node_channels.len() {
            for mp in m + 1..node_channels.len() {
                if node_channels[m].is_empty() || node_channels[mp].is_empty() {
                    continue;
                }
                let rows = node_channels[m].len();
                let cols = node_channels[mp].len();
                cross.push(CrossBlock {
                    m: m + 1,
                    mp: mp + 1,
                    zeta: LadderBlocks::zeros(rows, cols),
                    xi: LadderBlocks::zeros(rows, cols),
                });
            }
        }
        Self {
            node_channels,
            first,
            local,
            cross,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.node_channels.len()
    }

    /// Active channel labels of node `m`, ascending.
    pub fn node_channels(&self, m: usize) -> &[usize] {
        &self.node_channels[m - 1]
    }

    /// Ordered node pairs `(m, m')` carrying cross coefficients.
    pub fn cross_pairs(&self) -> Vec<(usize, usize)> {
        self.cross.iter().map(|c| (c.m, c.mp)).collect()
    }

    fn channel_pos(&self, m: usize, k: usize) -> usize {
        self.node_channels[m - 1]
            .iter()
            .position(|&c| c == k)
            .unwrap_or_else(|| panic!("node {m} has no active coupling to channel {k}"))
    }

    fn cross_block(&self, m: usize, mp: usize) -> &CrossBlock {
        self.cross
            .iter()
            .find(|c| c.m == m && c.mp == mp)
            .unwrap_or_else(|| panic!("no cross coefficients for node pair ({m}, {mp})"))
    }

    /// First moment of the propagated carrier operator of node `m`,
    /// channel `k`, sector `l`.
    pub fn first_order(&self, m: usize, k: usize, l: Ladder) -> Complex64 {
        self.first[m - 1][l.pos()][self.channel_pos(m, k)]
    }

    /// Local second moment `gamma_{m(kk')}^{(l,l')}`.
    pub fn local(&self, m: usize, k: usize, kp: usize, l: Ladder, lp: Ladder) -> Complex64 {
        self.local[m - 1].get(l, lp, self.channel_pos(m, k), self.channel_pos(m, kp))
    }

    /// Cross moment `zeta_{mm'(kk')}^{(l,l')}` for `m < m'`.
    pub fn zeta(&self, m: usize, mp: usize, k: usize, kp: usize, l: Ladder, lp: Ladder) -> Complex64 {
        self.cross_block(m, mp)
            .zeta
            .get(l, lp, self.channel_pos(m, k), self.channel_pos(mp, kp))
    }

    /// Cross moment `xi_{mm'(kk')}^{(l,l')}` for `m < m'`.
    pub fn xi(&self, m: usize, mp: usize, k: usize, kp: usize, l: Ladder, lp: Ladder) -> Complex64 {
        self.cross_block(m, mp)
            .xi
            .get(l, lp, self.channel_pos(m, k), self.channel_pos(mp, kp))
    }

    pub(crate) fn set_first(&mut self, m: usize, k: usize, l: Ladder, value: Complex64) {
        let pos = self.channel_pos(m, k);
        self.first[m - 1][l.pos()][pos] = value;
    }

    pub(crate) fn set_local(
        &mut self,
        m: usize,
        k: usize,
        kp: usize,
        l: Ladder,
        lp: Ladder,
        value: Complex64,
    ) {
        let (i, j) = (self.channel_pos(m, k), self.channel_pos(m, kp));
        self.local[m - 1].set(l, lp, i, j, value);
    }

    pub(crate) fn set_cross(
        &mut self,
        m: usize,
        mp: usize,
        k: usize,
        kp: usize,
        l: Ladder,
        lp: Ladder,
        zeta: Complex64,
        xi: Complex64,
    ) {
        let (i, j) = (self.channel_pos(m, k), self.channel_pos(mp, kp));
        let block = self
            .cross
            .iter_mut()
            .find(|c| c.m == m && c.mp == mp)
            .unwrap_or_else(|| panic!("no cross coefficients for node pair ({m}, {mp})"));
        block.zeta.set(l, lp, i, j, zeta);
        block.xi.set(l, lp, i, j, xi);
    }

    /// Worst violation of the exchange identities every backend must obey:
    /// the same-sector local blocks are Hermitian in the channel arguments,
    /// the anomalous local blocks are mutual conjugate transposes, and `xi`
    /// is the entrywise conjugate of `zeta`.
    pub fn max_symmetry_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for block in &self.local {
            let n = block.blocks[0][0].nrows();
            for i in 0..n {
                for j in 0..n {
                    // Mixed-sector blocks are Hermitian in the channel pair.
                    worst = worst.max(
                        (block.get(Ladder::Up, Ladder::Down, i, j)
                            - block.get(Ladder::Up, Ladder::Down, j, i).conj())
                        .norm(),
                    );
                    worst = worst.max(
                        (block.get(Ladder::Down, Ladder::Up, i, j)
                            - block.get(Ladder::Down, Ladder::Up, j, i).conj())
                        .norm(),
                    );
                    // Anomalous blocks are each other's conjugate transpose.
                    worst = worst.max(
                        (block.get(Ladder::Up, Ladder::Up, i, j)
                            - block.get(Ladder::Down, Ladder::Down, j, i).conj())
                        .norm(),
                    );
                }
            }
        }
        for cross in &self.cross {
            for l in Ladder::BOTH {
                for lp in Ladder::BOTH {
                    let z = &cross.zeta.blocks[l.pos()][lp.pos()];
                    let x = &cross.xi.blocks[l.pos()][lp.pos()];
                    for (zv, xv) in z.iter().zip(x.iter()) {
                        worst = worst.max((xv - zv.conj()).norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest first-moment modulus together with where it occurs.
    pub fn stability_report(&self) -> StabilityReport {
        let mut max_first_moment = 0.0_f64;
        let mut worst = None;
        for (mi, per_node) in self.first.iter().enumerate() {
            for l in Ladder::BOTH {
                for (ki, value) in per_node[l.pos()].iter().enumerate() {
                    if value.norm() > max_first_moment {
                        max_first_moment = value.norm();
                        worst = Some((mi + 1, self.node_channels[mi][ki], l));
                    }
                }
            }
        }
        StabilityReport {
            max_first_moment,
            worst,
        }
    }

    /// Render all coefficients as CSV with columns
    /// `kind,m,m_prime,k,k_prime,l,l_prime,re,im`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,m,m_prime,k,k_prime,l,l_prime,re,im\n");
        let mut row = |kind: &str,
                       m: usize,
                       mp: usize,
                       k: usize,
                       kp: usize,
                       l: usize,
                       lp: usize,
                       v: Complex64| {
            out.push_str(&format!(
                "{kind},{m},{mp},{k},{kp},{l},{lp},{},{}\n",
                format_f64(v.re),
                format_f64(v.im)
            ));
        };
        for m in 1..=self.num_nodes() {
            for &k in self.node_channels(m) {
                for l in Ladder::BOTH {
                    row("first_order", m, m, k, 0, l.index(), 0, self.first_order(m, k, l));
                }
            }
        }
        for m in 1..=self.num_nodes() {
            for &k in self.node_channels(m) {
                for &kp in self.node_channels(m) {
                    for l in Ladder::BOTH {
                        for lp in Ladder::BOTH {
                            row(
                                "local",
                                m,
                                m,
                                k,
                                kp,
                                l.index(),
                                lp.index(),
                                self.local(m, k, kp, l, lp),
                            );
                        }
                    }
                }
            }
        }
        for (m, mp) in self.cross_pairs() {
            for &k in self.node_channels(m) {
                for &kp in self.node_channels(mp) {
                    for l in Ladder::BOTH {
                        for lp in Ladder::BOTH {
                            row("zeta", m, mp, k, kp, l.index(), lp.index(), self.zeta(m, mp, k, kp, l, lp));
                            row("xi", m, mp, k, kp, l.index(), lp.index(), self.xi(m, mp, k, kp, l, lp));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Outcome of the stability check: the generator construction is valid only
/// when every first-moment coefficient vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub max_first_moment: f64,
    /// `(m, k, l)` of the largest first moment, if any coefficient exists.
    pub worst: Option<(usize, usize, Ladder)>,
}

impl StabilityReport {
    pub const THRESHOLD: f64 = 1e-10;

    pub fn passes(&self) -> bool {
        self.max_first_moment <= Self::THRESHOLD
    }
}

/// Effective carrier row of node `m` for channel `k`: the `k`-th row of the
/// cumulative transform scaled by the coupling weight.
fn weighted_rows(net: &NetworkSpec, m: usize) -> Result<Vec<(usize, Vec<Complex64>)>, NetworkError> {
    let w = net.cumulative_transform(m)?;
    let mut rows = Vec::new();
    for coupling in net.active_couplings(m)? {
        let g = coupling.weight();
        let row: Vec<Complex64> = (0..net.num_channels())
            .map(|j| g * w[[coupling.channel - 1, j]])
            .collect();
        rows.push((coupling.channel, row));
    }
    Ok(rows)
}

/// Analytic coefficients for thermal channel inputs. First moments vanish
/// identically; the second moments follow from the propagated thermal
/// occupations.
pub fn gaussian_coefficients(net: &NetworkSpec) -> Result<CoefficientSet, CoefficientError> {
    net.ensure_valid()?;
    let occupations = net.occupations();
    let m_count = net.num_nodes();

    let mut rows_per_node = Vec::with_capacity(m_count);
    for m in 1..=m_count {
        rows_per_node.push(weighted_rows(net, m)?);
    }
    let node_channels: Vec<Vec<usize>> = rows_per_node
        .iter()
        .map(|rows| rows.iter().map(|(k, _)| *k).collect())
        .collect();
    let mut set = CoefficientSet::new_zeroed(node_channels);

    let second_n = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        // sum_j a_j * conj(b_j) * N_j
        a.iter()
            .zip(b)
            .zip(&occupations)
            .map(|((&aj, &bj), &n)| aj * bj.conj() * n)
            .sum()
    };
    let second_n_plus = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter()
            .zip(b)
            .zip(&occupations)
            .map(|((&aj, &bj), &n)| aj * bj.conj() * (n + 1.0))
            .sum()
    };

    for m in 1..=m_count {
        let rows = &rows_per_node[m - 1];
        for (k, wk) in rows {
            for (kp, wkp) in rows {
                set.set_local(m, *k, *kp, Ladder::Down, Ladder::Up, second_n(wk, wkp));
                set.set_local(m, *k, *kp, Ladder::Up, Ladder::Down, second_n_plus(wk, wkp));
            }
        }
    }

    for m in 1..=m_count {
        for mp in m + 1..=m_count {
            if rows_per_node[m - 1].is_empty() || rows_per_node[mp - 1].is_empty() {
                continue;
            }
            for (k, wk) in &rows_per_node[m - 1] {
                for (kp, wkp) in &rows_per_node[mp - 1] {
                    let z_up_down = second_n(wk, wkp);
                    let z_down_up = second_n_plus(wkp, wk);
                    set.set_cross(m, mp, *k, *kp, Ladder::Up, Ladder::Down, z_up_down, z_up_down.conj());
                    set.set_cross(m, mp, *k, *kp, Ladder::Down, Ladder::Up, z_down_up, z_down_up.conj());
                }
            }
        }
    }

    Ok(set)
}

/// Evaluate the stationarity condition on the analytic backend: every
/// first-moment coefficient must vanish for the reduced description to hold.
pub fn check_stability(net: &NetworkSpec) -> Result<StabilityReport, CoefficientError> {
    Ok(gaussian_coefficients(net)?.stability_report())
}
