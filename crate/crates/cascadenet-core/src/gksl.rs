//! Generator assembly in two equivalent shapes.
//!
//! The coefficient form keeps the per-node dissipators and the directed
//! pair couplings exactly as the second-moment bookkeeping produces them.
//! The diagonal form regroups the same data into an effective Hamiltonian
//! plus jump operators obtained from the eigendecomposition of the rate
//! matrix over the joint (node, ladder, channel) index.
//!
//! Both generators evaluate the dimensionless right-hand side; multiply by
//! the network rate to get d(rho)/dt in physical time.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{CoefficientSet, Ladder};
use crate::linalg;
use crate::network::{NetworkError, NetworkSpec};
use crate::operator::{annihilation, embed, OperatorError, OperatorMatrix, SpaceLayout};

/// Symmetry budget on the incoming coefficient set.
const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Hermiticity budget for assembled matrices, scaled by max(1, |entry|).
const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Most negative dissipator-block eigenvalue tolerated, same scaling.
const BLOCK_PSD_TOLERANCE: f64 = 1e-10;
/// Rate-matrix eigenvalues below this are model violations, not noise.
const NEGATIVE_RATE_LIMIT: f64 = -1e-9;
/// Clamped rates below this threshold emit no jump operator.
const JUMP_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GkslError {
    #[error("coefficient set does not match the network at node {node}")]
    MismatchedCoefficients { node: usize },
    #[error("coefficient symmetry violated by {deviation:.3e}")]
    InconsistentCoefficients { deviation: f64 },
    #[error("{what} deviates from Hermitian by {deviation:.3e}")]
    NotHermitian { what: &'static str, deviation: f64 },
    #[error("dissipator block of node {node} has eigenvalue {eigenvalue:.3e}")]
    IndefiniteDissipator { node: usize, eigenvalue: f64 },
    #[error("rate matrix has genuinely negative eigenvalue {eigenvalue:.3e}")]
    NegativeRate { eigenvalue: f64 },
    #[error("rate matrix eigendecomposition reconstructs to {deviation:.3e}")]
    Reconstruction { deviation: f64 },
    #[error("parameter {name} = {value} outside its domain")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// Position in the rate matrix: node and channel are 1-based ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JointIndex {
    pub node: usize,
    pub ladder: Ladder,
    pub channel: usize,
}

/// One diagonal channel of the assembled generator. `operator` already
/// carries the sqrt(kappa/2) normalization, so the master equation reads
/// -i[H, rho] + sum_i (2 L_i rho L_i^dag - {L_i^dag L_i, rho}).
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub kappa: f64,
    pub operator: OperatorMatrix,
}

/// Per-node dissipator block over the joint (ladder, channel) index,
/// validated Hermitian and positive semidefinite.
struct NodeBlock {
    node: usize,
    channels: Vec<usize>,
    matrix: Array2<Complex64>,
    /// Channel sums: entry [l1][l2] multiplies A^(l1) rho A^(l2)^dag.
    summed: [[Complex64; 2]; 2],
}

/// Directed coupling data for an upstream/downstream pair, channel-summed.
struct PairBlock {
    upstream: usize,
    downstream: usize,
    zeta: [[Complex64; 2]; 2],
    xi: [[Complex64; 2]; 2],
}

const LADDERS: [Ladder; 2] = [Ladder::Up, Ladder::Down];

fn ladder_slot(l: Ladder) -> usize {
    match l {
        Ladder::Up => 0,
        Ladder::Down => 1,
    }
}

/// Raising and lowering operators of every node, embedded in the full space.
fn node_ladder_ops(
    layout: &SpaceLayout,
    dims: &[usize],
) -> Result<Vec<[OperatorMatrix; 2]>, OperatorError> {
    let mut ops = Vec::with_capacity(dims.len());
    for (slot, &dim) in dims.iter().enumerate() {
        let lower = embed(layout, slot, &annihilation(dim))?;
        let raise = lower.dagger();
        ops.push([raise, lower]);
    }
    Ok(ops)
}

fn scaled_tolerance(base: f64, matrix: &Array2<Complex64>) -> f64 {
    base * linalg::max_abs(matrix).max(1.0)
}

/// Validate the coefficient set against the network and extract the
/// per-node dissipator blocks.
fn build_node_blocks(
    net: &NetworkSpec,
    coeffs: &CoefficientSet,
) -> Result<Vec<NodeBlock>, GkslError> {
    net.ensure_valid()?;
    if coeffs.num_nodes() != net.num_nodes() {
        return Err(GkslError::MismatchedCoefficients { node: 0 });
    }
    for m in 1..=net.num_nodes() {
        let expected: Vec<usize> = net
            .active_couplings(m)?
            .iter()
            .map(|c| c.channel)
            .collect();
        if coeffs.node_channels(m) != expected.as_slice() {
            return Err(GkslError::MismatchedCoefficients { node: m });
        }
    }
    let deviation = coeffs.max_symmetry_deviation();
    if deviation > SYMMETRY_TOLERANCE {
        return Err(GkslError::InconsistentCoefficients { deviation });
    }

    let mut blocks = Vec::new();
    for m in 1..=net.num_nodes() {
        let channels = coeffs.node_channels(m).to_vec();
        if channels.is_empty() {
            continue;
        }
        let k = channels.len();
        let mut matrix = Array2::<Complex64>::zeros((2 * k, 2 * k));
        for (i1, &l1) in LADDERS.iter().enumerate() {
            for (j1, &k1) in channels.iter().enumerate() {
                for (i2, &l2) in LADDERS.iter().enumerate() {
                    for (j2, &k2) in channels.iter().enumerate() {
                        let value = match (l1, l2) {
                            // Row sector 1 is the occupation sector, driven
                            // by gamma^(2,1); sector 2 holds gamma^(1,2)
                            // transposed; mixed entries are the anomalous
                            // moments.
                            (Ladder::Up, Ladder::Up) => {
                                coeffs.local(m, k1, k2, Ladder::Down, Ladder::Up)
                            }
                            (Ladder::Down, Ladder::Down) => {
                                coeffs.local(m, k2, k1, Ladder::Up, Ladder::Down)
                            }
                            (Ladder::Up, Ladder::Down) => {
                                coeffs.local(m, k1, k2, Ladder::Up, Ladder::Up)
                            }
                            (Ladder::Down, Ladder::Up) => {
                                coeffs.local(m, k1, k2, Ladder::Down, Ladder::Down)
                            }
                        };
                        matrix[[i1 * k + j1, i2 * k + j2]] = value;
                    }
                }
            }
        }

        let herm = linalg::hermiticity_deviation(&matrix);
        if herm > scaled_tolerance(HERMITICITY_TOLERANCE, &matrix) {
            return Err(GkslError::NotHermitian {
                what: "node dissipator block",
                deviation: herm,
            });
        }
        let (values, _) = linalg::hermitian_eigen_raw(&matrix).map_err(OperatorError::from)?;
        if let Some(&lowest) = values.first() {
            if lowest < -scaled_tolerance(BLOCK_PSD_TOLERANCE, &matrix) {
                return Err(GkslError::IndefiniteDissipator {
                    node: m,
                    eigenvalue: lowest,
                });
            }
        }

        let mut summed = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i1, row_l) in summed.iter_mut().enumerate() {
            for (i2, cell) in row_l.iter_mut().enumerate() {
                for j1 in 0..k {
                    for j2 in 0..k {
                        *cell += matrix[[i1 * k + j1, i2 * k + j2]];
                    }
                }
            }
        }
        blocks.push(NodeBlock {
            node: m,
            channels,
            matrix,
            summed,
        });
    }
    Ok(blocks)
}

fn channel_summed_pairs(coeffs: &CoefficientSet) -> Vec<PairBlock> {
    let mut pairs = Vec::new();
    for (m, mp) in coeffs.cross_pairs() {
        let mut zeta = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut xi = [[Complex64::new(0.0, 0.0); 2]; 2];
        for &l in &LADDERS {
            for &lp in &LADDERS {
                for &k in coeffs.node_channels(m) {
                    for &kp in coeffs.node_channels(mp) {
                        zeta[ladder_slot(l)][ladder_slot(lp)] +=
                            coeffs.zeta(m, mp, k, kp, l, lp);
                        xi[ladder_slot(l)][ladder_slot(lp)] += coeffs.xi(m, mp, k, kp, l, lp);
                    }
                }
            }
        }
        pairs.push(PairBlock {
            upstream: m,
            downstream: mp,
            zeta,
            xi,
        });
    }
    pairs
}

/// Master-equation generator kept in coefficient form: local dissipators
/// plus directed pair couplings, evaluated term by term.
pub struct CoefficientGenerator {
    layout: SpaceLayout,
    rate: f64,
    node_ops: Vec<[OperatorMatrix; 2]>,
    locals: Vec<NodeBlock>,
    pairs: Vec<PairBlock>,
}

/// Build the coefficient-form generator, checking the symmetry budget and
/// the Hermiticity/positivity of every node block.
pub fn build_coefficient_generator(
    net: &NetworkSpec,
    coeffs: &CoefficientSet,
) -> Result<CoefficientGenerator, GkslError> {
    let locals = build_node_blocks(net, coeffs)?;
    let layout = SpaceLayout::new(net.node_dims())?;
    let node_ops = node_ladder_ops(&layout, &net.node_dims())?;
    Ok(CoefficientGenerator {
        layout,
        rate: net.rate,
        node_ops,
        locals,
        pairs: channel_summed_pairs(coeffs),
    })
}

impl CoefficientGenerator {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    /// Physical rate multiplying the dimensionless generator.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Dissipator block of one node over its joint (ladder, channel) index.
    pub fn node_block(&self, node: usize) -> Option<&Array2<Complex64>> {
        self.locals
            .iter()
            .find(|b| b.node == node)
            .map(|b| &b.matrix)
    }

    /// Channels the block rows refer to, in row order within each sector.
    pub fn node_block_channels(&self, node: usize) -> Option<&[usize]> {
        self.locals
            .iter()
            .find(|b| b.node == node)
            .map(|b| b.channels.as_slice())
    }

    pub fn pair_nodes(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|p| (p.upstream, p.downstream)).collect()
    }

    /// Local dissipator of one node applied to `rho`; zero for passive nodes.
    pub fn apply_local(&self, node: usize, rho: &OperatorMatrix) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.layout.clone());
        let Some(block) = self.locals.iter().find(|b| b.node == node) else {
            return out;
        };
        let ops = &self.node_ops[node - 1];
        for (i1, &l1) in LADDERS.iter().enumerate() {
            for (i2, &l2) in LADDERS.iter().enumerate() {
                let weight = block.summed[i1][i2];
                if weight == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let a1 = &ops[ladder_slot(l1)];
                let a2_dag = &ops[ladder_slot(l2.flip())];
                let sandwich = a1.dot(rho).dot(a2_dag);
                let product = a2_dag.dot(a1);
                let anticommutator = product.dot(rho).add(&rho.dot(&product));
                out.add_assign(
                    &sandwich
                        .sub(&anticommutator.scaled(Complex64::new(0.5, 0.0)))
                        .scaled(weight),
                );
            }
        }
        out
    }

    /// Directed coupling of one ordered pair applied to `rho`; zero if the
    /// pair carries no coupling data.
    pub fn apply_cross(
        &self,
        upstream: usize,
        downstream: usize,
        rho: &OperatorMatrix,
    ) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.layout.clone());
        let Some(pair) = self
            .pairs
            .iter()
            .find(|p| p.upstream == upstream && p.downstream == downstream)
        else {
            return out;
        };
        let up_ops = &self.node_ops[upstream - 1];
        let down_ops = &self.node_ops[downstream - 1];
        for (i, &l) in LADDERS.iter().enumerate() {
            for (j, &lp) in LADDERS.iter().enumerate() {
                let z = pair.zeta[i][j];
                if z != Complex64::new(0.0, 0.0) {
                    let a_m = &up_ops[ladder_slot(l)];
                    let a_mp = &down_ops[ladder_slot(lp)];
                    let commutator = rho.dot(a_mp).sub(&a_mp.dot(rho));
                    out.add_assign(&a_m.dot(&commutator).scaled(z));
                }
                let x = pair.xi[i][j];
                if x != Complex64::new(0.0, 0.0) {
                    let a_mp = &down_ops[ladder_slot(lp.flip())];
                    let a_m = &up_ops[ladder_slot(l.flip())];
                    let commutator = a_mp.dot(rho).sub(&rho.dot(a_mp));
                    out.add_assign(&commutator.dot(a_m).scaled(x));
                }
            }
        }
        out
    }

    /// Full dimensionless right-hand side.
    pub fn apply(&self, rho: &OperatorMatrix) -> OperatorMatrix {
        let mut out = OperatorMatrix::zeros(self.layout.clone());
        for block in &self.locals {
            out.add_assign(&self.apply_local(block.node, rho));
        }
        for pair in &self.pairs {
            out.add_assign(&self.apply_cross(pair.upstream, pair.downstream, rho));
        }
        out
    }
}

/// Generator in diagonal form: effective Hamiltonian plus jump operators.
pub struct GkslGenerator {
    layout: SpaceLayout,
    rate: f64,
    hamiltonian: OperatorMatrix,
    pair_hamiltonians: Vec<(usize, usize, OperatorMatrix)>,
    omega: Array2<Complex64>,
    joint: Vec<JointIndex>,
    kappas: Vec<f64>,
    jumps: Vec<JumpOperator>,
    absorbers: Vec<OperatorMatrix>,
    node_ops: Vec<[OperatorMatrix; 2]>,
}

/// Assemble the diagonal-form generator from a validated coefficient set.
///
/// The rate matrix is eigendecomposed; eigenvalues below -1e-9 abort,
/// those in [-1e-9, 0) are clamped to zero, and clamped rates below 1e-12
/// produce no jump operator. The full clamped spectrum stays available via
/// [`GkslGenerator::kappas`] in descending order.
pub fn assemble_gksl(
    net: &NetworkSpec,
    coeffs: &CoefficientSet,
) -> Result<GkslGenerator, GkslError> {
    let blocks = build_node_blocks(net, coeffs)?;
    let layout = SpaceLayout::new(net.node_dims())?;
    let node_ops = node_ladder_ops(&layout, &net.node_dims())?;

    let mut joint = Vec::new();
    let mut offsets = Vec::new();
    for block in &blocks {
        offsets.push(joint.len());
        for &l in &LADDERS {
            for &k in &block.channels {
                joint.push(JointIndex {
                    node: block.node,
                    ladder: l,
                    channel: k,
                });
            }
        }
    }
    let total = joint.len();

    let mut omega = Array2::<Complex64>::zeros((total, total));
    for (bi, block) in blocks.iter().enumerate() {
        let base = offsets[bi];
        let side = block.matrix.nrows();
        for r in 0..side {
            for c in 0..side {
                omega[[base + r, base + c]] = block.matrix[[r, c]];
            }
        }
    }
    for (bi, upstream) in blocks.iter().enumerate() {
        for (bj, downstream) in blocks.iter().enumerate().skip(bi + 1) {
            let (m, mp) = (upstream.node, downstream.node);
            for (i1, &l) in LADDERS.iter().enumerate() {
                for (j1, &k) in upstream.channels.iter().enumerate() {
                    let row = offsets[bi] + i1 * upstream.channels.len() + j1;
                    for (i2, &l2) in LADDERS.iter().enumerate() {
                        for (j2, &k2) in downstream.channels.iter().enumerate() {
                            let col = offsets[bj] + i2 * downstream.channels.len() + j2;
                            omega[[row, col]] = coeffs.zeta(m, mp, k, k2, l, l2.flip());
                            omega[[col, row]] = coeffs.xi(m, mp, k, k2, l, l2.flip());
                        }
                    }
                }
            }
        }
    }

    let herm = linalg::hermiticity_deviation(&omega);
    if herm > scaled_tolerance(HERMITICITY_TOLERANCE, &omega) {
        return Err(GkslError::NotHermitian {
            what: "rate matrix",
            deviation: herm,
        });
    }
    let (values, vectors) = linalg::hermitian_eigen_raw(&omega).map_err(OperatorError::from)?;
    let mut reconstructed = Array2::<Complex64>::zeros((total, total));
    for (i, &value) in values.iter().enumerate() {
        for r in 0..total {
            for c in 0..total {
                reconstructed[[r, c]] +=
                    vectors[[r, i]] * vectors[[c, i]].conj() * Complex64::new(value, 0.0);
            }
        }
    }
    let residue = linalg::max_abs(&(&reconstructed - &omega));
    if residue > scaled_tolerance(HERMITICITY_TOLERANCE, &omega) {
        return Err(GkslError::Reconstruction { deviation: residue });
    }

    let mut indexed: Vec<(f64, usize)> = Vec::with_capacity(total);
    for (i, &value) in values.iter().enumerate() {
        if value < NEGATIVE_RATE_LIMIT {
            return Err(GkslError::NegativeRate { eigenvalue: value });
        }
        indexed.push((value.max(0.0), i));
    }
    indexed.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let kappas: Vec<f64> = indexed.iter().map(|&(v, _)| v).collect();

    let mut jumps = Vec::new();
    let mut absorbers = Vec::new();
    for &(kappa, column) in &indexed {
        if kappa < JUMP_CUTOFF {
            continue;
        }
        let mut mode = OperatorMatrix::zeros(layout.clone());
        for (row, index) in joint.iter().enumerate() {
            let amplitude = vectors[[row, column]];
            if amplitude == Complex64::new(0.0, 0.0) {
                continue;
            }
            let op = &node_ops[index.node - 1][ladder_slot(index.ladder)];
            mode.add_assign(&op.scaled(amplitude));
        }
        let operator = mode.scaled(Complex64::new((kappa / 2.0).sqrt(), 0.0));
        absorbers.push(operator.dagger().dot(&operator));
        jumps.push(JumpOperator { kappa, operator });
    }

    let pairs = channel_summed_pairs(coeffs);
    let mut pair_hamiltonians = Vec::new();
    let mut hamiltonian = OperatorMatrix::zeros(layout.clone());
    for pair in &pairs {
        let up_ops = &node_ops[pair.upstream - 1];
        let down_ops = &node_ops[pair.downstream - 1];
        let mut part = OperatorMatrix::zeros(layout.clone());
        for (i, &l) in LADDERS.iter().enumerate() {
            for (j, &lp) in LADDERS.iter().enumerate() {
                let flipped = pair.zeta[ladder_slot(l.flip())][ladder_slot(lp.flip())];
                let weight = Complex64::new(0.0, 0.5) * (flipped.conj() - pair.zeta[i][j]);
                if weight == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let product = up_ops[ladder_slot(l)].dot(&down_ops[ladder_slot(lp)]);
                part.add_assign(&product.scaled(weight));
            }
        }
        hamiltonian.add_assign(&part);
        pair_hamiltonians.push((pair.upstream, pair.downstream, part));
    }
    let herm_h = linalg::hermiticity_deviation(hamiltonian.array());
    if herm_h > scaled_tolerance(HERMITICITY_TOLERANCE, hamiltonian.array()) {
        return Err(GkslError::NotHermitian {
            what: "effective hamiltonian",
            deviation: herm_h,
        });
    }

    Ok(GkslGenerator {
        layout,
        rate: net.rate,
        hamiltonian,
        pair_hamiltonians,
        omega,
        joint,
        kappas,
        jumps,
        absorbers,
        node_ops,
    })
}

impl GkslGenerator {
    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    /// Hamiltonian contribution of one ordered pair, if the pair couples.
    pub fn pair_hamiltonian(&self, upstream: usize, downstream: usize) -> Option<&OperatorMatrix> {
        self.pair_hamiltonians
            .iter()
            .find(|(m, mp, _)| *m == upstream && *mp == downstream)
            .map(|(_, _, h)| h)
    }

    /// Rate matrix over the joint index, exactly as eigendecomposed.
    pub fn omega(&self) -> &Array2<Complex64> {
        &self.omega
    }

    pub fn joint_index(&self) -> &[JointIndex] {
        &self.joint
    }

    /// Full clamped spectrum in descending order, including zeros.
    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    /// Jump operators for every rate at or above the emission cutoff.
    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    /// Magnitude of the hopping amplitude between two coupled nodes,
    /// projected onto the raising-lowering product of the pair.
    pub fn coupling_magnitude(&self, upstream: usize, downstream: usize) -> Option<f64> {
        let part = self.pair_hamiltonian(upstream, downstream)?;
        let probe = self.node_ops[upstream - 1][0].dot(&self.node_ops[downstream - 1][1]);
        let probe_dag = probe.dagger();
        let overlap = linalg::trace_product(probe_dag.array(), part.array());
        let norm = linalg::trace_product(probe_dag.array(), probe.array());
        Some((overlap / norm).norm())
    }

    /// Full dimensionless right-hand side.
    pub fn apply(&self, rho: &OperatorMatrix) -> OperatorMatrix {
        let mut out = self
            .hamiltonian
            .commutator(rho)
            .scaled(Complex64::new(0.0, -1.0));
        for (jump, absorber) in self.jumps.iter().zip(&self.absorbers) {
            let sandwich = jump.operator.dot(rho).dot(&jump.operator.dagger());
            out.add_assign(&sandwich.scaled(Complex64::new(2.0, 0.0)));
            out.add_assign(&absorber.dot(rho).scaled(Complex64::new(-1.0, 0.0)));
            out.add_assign(&rho.dot(absorber).scaled(Complex64::new(-1.0, 0.0)));
        }
        out
    }

    /// Serializable snapshot with provenance.
    pub fn export(&self, net: &NetworkSpec, backend: &str) -> GkslExport {
        GkslExport {
            layout: self.layout.factors().to_vec(),
            rate: self.rate,
            hamiltonian: MatrixExport::from_array(self.hamiltonian.array()),
            kappas: self.kappas.clone(),
            jumps: self
                .jumps
                .iter()
                .map(|j| JumpExport {
                    kappa: j.kappa,
                    operator: MatrixExport::from_array(j.operator.array()),
                })
                .collect(),
            provenance: Provenance {
                network_hash: format!("fnv1a64:{:016x}", net.content_hash()),
                backend: backend.to_string(),
            },
        }
    }
}

/// Dense complex matrix in row-major split re/im form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixExport {
    pub dim: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixExport {
    pub fn from_array(a: &Array2<Complex64>) -> Self {
        let dim = a.nrows();
        let mut re = Vec::with_capacity(dim * dim);
        let mut im = Vec::with_capacity(dim * dim);
        for row in a.rows() {
            for z in row {
                re.push(z.re);
                im.push(z.im);
            }
        }
        MatrixExport { dim, re, im }
    }

    pub fn to_array(&self) -> Array2<Complex64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for j in 0..self.dim {
                let flat = i * self.dim + j;
                out[[i, j]] = Complex64::new(self.re[flat], self.im[flat]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct JumpExport {
    pub kappa: f64,
    pub operator: MatrixExport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Provenance {
    pub network_hash: String,
    pub backend: String,
}

/// Diagonal-form generator snapshot for file output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GkslExport {
    pub layout: Vec<usize>,
    pub rate: f64,
    pub hamiltonian: MatrixExport,
    pub kappas: Vec<f64>,
    pub jumps: Vec<JumpExport>,
    pub provenance: Provenance,
}

/// Closed-form jump rates of the two-node interferometer, ordered
/// (kappa_1+, kappa_1-, kappa_2+, kappa_2-). Serves as the independent
/// oracle for the numeric spectrum.
pub fn kappa_closed_form_mz(
    n1: f64,
    n2: f64,
    eps1: f64,
    eps2: f64,
    phi: f64,
) -> Result<[f64; 4], GkslError> {
    for (name, value) in [("n1", n1), ("n2", n2)] {
        if !value.is_finite() || value < 0.0 {
            return Err(GkslError::InvalidParameter { name, value });
        }
    }
    for (name, value) in [("eps1", eps1), ("eps2", eps2)] {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(GkslError::InvalidParameter { name, value });
        }
    }
    if !phi.is_finite() {
        return Err(GkslError::InvalidParameter { name: "phi", value: phi });
    }
    let c = Complex64::from_polar(1.0, -phi) * (eps1 * eps2).sqrt()
        - Complex64::new(((1.0 - eps1) * (1.0 - eps2)).sqrt(), 0.0);
    let c2 = c.norm_sqr();
    let n12 = n2 + (n1 - n2) * c2;
    let gap = n1 - n12;
    let root1 = (gap * gap + 4.0 * (n1 + 1.0) * (n1 + 1.0) * c2).sqrt();
    let root2 = (gap * gap + 4.0 * n1 * n1 * c2).sqrt();
    Ok([
        0.5 * (n1 + n12 + 2.0 + root1),
        0.5 * (n1 + n12 + 2.0 - root1),
        0.5 * (n1 + n12 + root2),
        0.5 * (n1 + n12 - root2),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::gaussian_coefficients;
    use crate::presets;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mz(n1: f64, n2: f64, eps1: f64, eps2: f64, phi: f64) -> NetworkSpec {
        presets::mach_zehnder(&presets::MachZehnderParams {
            eps1,
            eps2,
            phi,
            n1,
            n2,
            ..Default::default()
        })
    }

    fn balanced_amplitude(phi: f64) -> Complex64 {
        Complex64::new(0.0, -1.0)
            * Complex64::from_polar(1.0, -phi / 2.0)
            * Complex64::new((phi / 2.0).sin(), 0.0)
    }

    fn random_density(seed: u64, layout: &SpaceLayout) -> OperatorMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = layout.dim();
        let mut g = Array2::<Complex64>::zeros((dim, dim));
        for i in 0..dim {
            for j in 0..dim {
                g[[i, j]] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let gram = linalg::dagger(&g).dot(&g);
        let trace: Complex64 = gram.diag().sum();
        let rho = gram.mapv(|z| z / trace);
        OperatorMatrix::from_array(layout.clone(), rho).unwrap()
    }

    #[test]
    fn effective_hamiltonian_matches_closed_form() {
        for phi in [0.4, 1.9, 5.5] {
            // The Hamiltonian must not depend on the occupations.
            for (n1, n2) in [(0.0, 0.0), (0.37, 0.82)] {
                let net = mz(n1, n2, 0.5, 0.5, phi);
                let coeffs = gaussian_coefficients(&net).unwrap();
                let gen = assemble_gksl(&net, &coeffs).unwrap();
                let c = balanced_amplitude(phi);
                let layout = gen.layout().clone();
                let a1 = embed(&layout, 0, &annihilation(2)).unwrap();
                let a2 = embed(&layout, 1, &annihilation(2)).unwrap();
                let expected = a2
                    .dagger()
                    .dot(&a1)
                    .scaled(c)
                    .sub(&a1.dagger().dot(&a2).scaled(c.conj()))
                    .scaled(Complex64::new(0.0, -0.5));
                let diff = gen.hamiltonian().sub(&expected).max_abs();
                assert!(diff < 1e-12, "phi={phi}: H mismatch {diff:.3e}");
            }
        }
    }

    #[test]
    fn closed_form_rates_pin_known_limits() {
        // Fully transmissive splitters, cold first channel: single rate 2.
        let k = kappa_closed_form_mz(0.0, 0.0, 1.0, 1.0, 0.3).unwrap();
        assert!((k[0] - 2.0).abs() < 1e-12);
        for v in &k[1..] {
            assert!(v.abs() < 1e-12);
        }

        // Equal occupations collapse N_12 to N_1.
        let (n, e1, e2, phi) = (0.8_f64, 0.3_f64, 0.9_f64, 1.2_f64);
        let c = Complex64::from_polar(1.0, -phi) * (e1 * e2).sqrt()
            - Complex64::new(((1.0 - e1) * (1.0 - e2)).sqrt(), 0.0);
        let k = kappa_closed_form_mz(n, n, e1, e2, phi).unwrap();
        let mag = c.norm();
        assert!((k[0] - (n + 1.0) * (1.0 + mag)).abs() < 1e-12);
        assert!((k[1] - (n + 1.0) * (1.0 - mag)).abs() < 1e-12);
        assert!((k[2] - n * (1.0 + mag)).abs() < 1e-12);
        assert!((k[3] - n * (1.0 - mag)).abs() < 1e-12);

        // Vanishing interference amplitude decouples the two nodes.
        let k = kappa_closed_form_mz(0.6, 0.25, 0.5, 0.5, 0.0).unwrap();
        let mut got = k.to_vec();
        let mut want = vec![0.6 + 1.0, 0.25 + 1.0, 0.6, 0.25];
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }

        assert!(kappa_closed_form_mz(-0.1, 0.0, 0.5, 0.5, 0.0).is_err());
        assert!(kappa_closed_form_mz(0.0, 0.0, 1.2, 0.5, 0.0).is_err());
    }

    #[test]
    fn rate_spectrum_matches_closed_form() {
        for n1 in [0.0, 0.5, 2.0] {
            for n2 in [0.3, 1.0] {
                for phi in [0.0, 0.8, 2.9, 4.4] {
                    let net = mz(n1, n2, 0.5, 0.5, phi);
                    let coeffs = gaussian_coefficients(&net).unwrap();
                    let gen = assemble_gksl(&net, &coeffs).unwrap();
                    let mut expected =
                        kappa_closed_form_mz(n1, n2, 0.5, 0.5, phi).unwrap().to_vec();
                    expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    let got = gen.kappas();
                    assert_eq!(got.len(), 4);
                    for (g, w) in got.iter().zip(&expected) {
                        assert!(
                            (g - w).abs() < 1e-10,
                            "n1={n1} n2={n2} phi={phi}: {g} vs {w}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_limit_emits_single_collective_jump() {
        let net = mz(0.0, 0.7, 1.0, 1.0, 0.0);
        let coeffs = gaussian_coefficients(&net).unwrap();
        let gen = assemble_gksl(&net, &coeffs).unwrap();
        assert_eq!(gen.jumps().len(), 1);
        let jump = &gen.jumps()[0];
        assert!((jump.kappa - 2.0).abs() < 1e-10);

        let layout = gen.layout().clone();
        let reference = embed(&layout, 0, &annihilation(2))
            .unwrap()
            .add(&embed(&layout, 1, &annihilation(2)).unwrap());
        let overlap = linalg::trace_product(
            reference.dagger().array(),
            jump.operator.array(),
        )
        .norm();
        let norms = linalg::frobenius(reference.array())
            * linalg::frobenius(jump.operator.array());
        assert!(
            (overlap - norms).abs() < 1e-10 * norms,
            "jump not proportional to the collective mode"
        );
    }

    #[test]
    fn generator_forms_agree() {
        let mut cases = vec![
            mz(0.3, 1.1, 0.5, 0.5, 0.9),
            presets::three_node(&presets::ThreeNodeParams {
                n1: 0.2,
                n2: 0.6,
                phi: 2.1,
                ..Default::default()
            }),
        ];
        for seed in [1u64, 5, 9, 13] {
            cases.push(presets::random_network(seed, 3, 3, 1.0));
        }
        for (case, net) in cases.iter().enumerate() {
            let coeffs = gaussian_coefficients(net).unwrap();
            let coef_gen = build_coefficient_generator(net, &coeffs).unwrap();
            let gksl_gen = assemble_gksl(net, &coeffs).unwrap();
            for seed in 0..4u64 {
                let rho = random_density(100 + seed, coef_gen.layout());
                let lhs = coef_gen.apply(&rho);
                let rhs = gksl_gen.apply(&rho);
                let diff = lhs.sub(&rhs).max_abs();
                assert!(diff < 1e-9, "case {case} seed {seed}: forms differ {diff:.3e}");
            }
        }
    }

    #[test]
    fn cross_terms_trace_out_downstream() {
        let nets = vec![
            mz(0.4, 0.9, 0.3, 0.8, 1.7),
            presets::random_network(21, 3, 3, 0.8),
        ];
        for net in nets {
            let coeffs = gaussian_coefficients(&net).unwrap();
            let gen = build_coefficient_generator(&net, &coeffs).unwrap();
            for (m, mp) in gen.pair_nodes() {
                let rho = random_density(7 + m as u64, gen.layout());
                let image = gen.apply_cross(m, mp, &rho);
                let reduced = image.partial_trace(&[mp - 1]).unwrap();
                assert!(
                    reduced.max_abs() <= 1e-10,
                    "pair {m}->{mp}: downstream trace leaks {:.3e}",
                    reduced.max_abs()
                );
            }
        }
    }

    #[test]
    fn mz_cross_weights_match_hand_built_form() {
        let (n1, phi) = (0.45, 1.3);
        let net = mz(n1, 0.8, 0.5, 0.5, phi);
        let coeffs = gaussian_coefficients(&net).unwrap();
        let gen = build_coefficient_generator(&net, &coeffs).unwrap();
        let layout = gen.layout().clone();
        let a1 = embed(&layout, 0, &annihilation(2)).unwrap();
        let a2 = embed(&layout, 1, &annihilation(2)).unwrap();
        let c = balanced_amplitude(phi);
        let rho = random_density(42, &layout);

        let mut expected = OperatorMatrix::zeros(layout.clone());
        let comm = |x: &OperatorMatrix, y: &OperatorMatrix| x.commutator(y);
        expected.add_assign(
            &a1.dagger()
                .dot(&comm(&rho, &a2))
                .scaled(c.conj() * Complex64::new(n1, 0.0)),
        );
        expected.add_assign(
            &comm(&a2.dagger(), &rho)
                .dot(&a1)
                .scaled(c * Complex64::new(n1, 0.0)),
        );
        expected.add_assign(
            &a1.dot(&comm(&rho, &a2.dagger()))
                .scaled(c * Complex64::new(n1 + 1.0, 0.0)),
        );
        expected.add_assign(
            &comm(&a2, &rho)
                .dot(&a1.dagger())
                .scaled(c.conj() * Complex64::new(n1 + 1.0, 0.0)),
        );

        let got = gen.apply_cross(1, 2, &rho);
        let diff = got.sub(&expected).max_abs();
        assert!(diff < 1e-12, "hand-built cross term differs {diff:.3e}");
    }

    #[test]
    fn three_node_coupling_magnitudes_track_phase() {
        for phi in [0.0, 1.1, 2.7, std::f64::consts::PI] {
            let net = presets::three_node(&presets::ThreeNodeParams {
                phi,
                ..Default::default()
            });
            let coeffs = gaussian_coefficients(&net).unwrap();
            let gen = assemble_gksl(&net, &coeffs).unwrap();
            let direct = 1.0 / (2.0 * 2.0_f64.sqrt());
            let skip = (phi / 2.0).sin().abs() / 2.0;
            assert!((gen.coupling_magnitude(1, 2).unwrap() - direct).abs() < 1e-10);
            assert!((gen.coupling_magnitude(2, 3).unwrap() - direct).abs() < 1e-10);
            assert!((gen.coupling_magnitude(1, 3).unwrap() - skip).abs() < 1e-10);
            if phi == 0.0 {
                assert!(gen.pair_hamiltonian(1, 3).unwrap().max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chirality_under_node_exchange() {
        let phi = 2.2;
        let net = mz(0.0, 0.0, 0.5, 0.5, phi);
        let coeffs = gaussian_coefficients(&net).unwrap();
        let gen = assemble_gksl(&net, &coeffs).unwrap();
        let layout = gen.layout().clone();

        // Absorb the interference phase into node 1, then exchange nodes.
        let c = balanced_amplitude(phi);
        let gauge_local = Array2::from_diag(&ndarray::arr1(&[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, -c.arg()),
        ]));
        let gauge = embed(&layout, 0, &gauge_local).unwrap();
        let fixed = gauge.dagger().dot(gen.hamiltonian()).dot(&gauge);

        let dim = layout.dim();
        let mut swap = Array2::<Complex64>::zeros((dim, dim));
        for i1 in 0..2 {
            for i2 in 0..2 {
                swap[[i2 * 2 + i1, i1 * 2 + i2]] = Complex64::new(1.0, 0.0);
            }
        }
        let swap = OperatorMatrix::from_array(layout.clone(), swap).unwrap();
        let exchanged = swap.dot(&fixed).dot(&swap);
        let diff = exchanged.add(&fixed).max_abs();
        assert!(diff < 1e-12, "exchange symmetry broken by {diff:.3e}");
    }

    #[test]
    fn dissipator_blocks_stay_psd_on_random_networks() {
        for seed in [2u64, 4, 8, 16, 32] {
            let net = presets::random_network(seed, 4, 3, 1.0);
            let coeffs = gaussian_coefficients(&net).unwrap();
            assert!(build_coefficient_generator(&net, &coeffs).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn mismatched_coefficients_are_rejected() {
        let net_a = mz(0.2, 0.4, 0.5, 0.5, 1.0);
        let net_b = presets::three_node(&presets::ThreeNodeParams::default());
        let coeffs_b = gaussian_coefficients(&net_b).unwrap();
        assert!(matches!(
            build_coefficient_generator(&net_a, &coeffs_b),
            Err(GkslError::MismatchedCoefficients { .. })
        ));
    }

    #[test]
    fn export_round_trips_through_json() {
        let net = mz(0.1, 0.6, 0.5, 0.5, 0.7);
        let coeffs = gaussian_coefficients(&net).unwrap();
        let gen = assemble_gksl(&net, &coeffs).unwrap();
        let export = gen.export(&net, "gaussian");
        let text = serde_json::to_string(&export).unwrap();
        let back: GkslExport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, export);
        assert_eq!(back.layout, vec![2, 2]);
        assert_eq!(back.provenance.backend, "gaussian");
        assert!(back.provenance.network_hash.starts_with("fnv1a64:"));
        let h = back.hamiltonian.to_array();
        assert!(linalg::max_abs(&(&h - gen.hamiltonian().array())) < 1e-15);
    }
}
