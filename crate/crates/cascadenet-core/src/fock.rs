//! Numeric coefficient backend on truncated Fock spaces.
//!
//! Every coefficient is evaluated as a literal trace over the joint carrier
//! space: thermal (or displaced thermal) channel inputs, stage maps realized
//! as unitaries generated by passive quadratic Hamiltonians, and carrier
//! ladder operators weighted by the node couplings. No Gaussian identity is
//! used anywhere, which makes this backend an independent oracle for
//! [`crate::coefficients::gaussian_coefficients`].

use ndarray::Array2;
use num_complex::Complex64;
use thiserror::Error;

use crate::coefficients::{CoefficientSet, Ladder};
use crate::linalg::{self, trace_product};
use crate::network::{NetworkError, NetworkSpec, StageElement};
use crate::operator::{annihilation, embed, matrix_exponential, number_operator, OperatorError,
    OperatorMatrix, SpaceLayout};

/// Largest thermal tail mass the truncation is allowed to discard.
pub const TAIL_LIMIT: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FockError {
    #[error("carrier dimension must be at least 2, got {0}")]
    CarrierDimTooSmall(usize),
    #[error(
        "truncation insufficient: channel {channel} thermal tail mass {tail:.3e} exceeds {limit:.3e}"
    )]
    TruncationInsufficient {
        channel: usize,
        tail: f64,
        limit: f64,
    },
    #[error("expected {expected} carrier inputs, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("carrier occupation must be finite and nonnegative, got {0}")]
    BadOccupation(f64),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

/// State of one channel's fresh carriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CarrierInput {
    /// Gibbs state with the given mean occupation.
    Thermal { occupation: f64 },
    /// Thermal state displaced by `alpha`; carries a nonzero first moment
    /// and therefore breaks the stability condition.
    DisplacedThermal { occupation: f64, alpha: Complex64 },
}

impl CarrierInput {
    fn occupation(&self) -> f64 {
        match self {
            CarrierInput::Thermal { occupation } => *occupation,
            CarrierInput::DisplacedThermal { occupation, .. } => *occupation,
        }
    }
}

/// Exact tail mass `q^dim` of a geometric thermal distribution with
/// `q = N / (N + 1)` truncated to `dim` levels.
pub fn thermal_tail(occupation: f64, dim: usize) -> f64 {
    if occupation <= 0.0 {
        return 0.0;
    }
    let q = occupation / (occupation + 1.0);
    q.powi(dim as i32)
}

/// Truncated thermal state, renormalized to unit trace.
pub fn thermal_state(occupation: f64, dim: usize) -> Result<Array2<Complex64>, FockError> {
    if !(occupation.is_finite() && occupation >= 0.0) {
        return Err(FockError::BadOccupation(occupation));
    }
    if dim < 2 {
        return Err(FockError::CarrierDimTooSmall(dim));
    }
    let q = occupation / (occupation + 1.0);
    let mut state = Array2::zeros((dim, dim));
    let mut weights = Vec::with_capacity(dim);
    let mut w = 1.0;
    for _ in 0..dim {
        weights.push(w);
        w *= q;
    }
    let norm: f64 = weights.iter().sum();
    for (n, w) in weights.iter().enumerate() {
        state[[n, n]] = Complex64::new(w / norm, 0.0);
    }
    Ok(state)
}

/// State of one carrier under a [`CarrierInput`] description.
pub fn carrier_state(input: &CarrierInput, dim: usize) -> Result<Array2<Complex64>, FockError> {
    let thermal = thermal_state(input.occupation(), dim)?;
    match input {
        CarrierInput::Thermal { .. } => Ok(thermal),
        CarrierInput::DisplacedThermal { alpha, .. } => {
            let layout = SpaceLayout::single(dim)?;
            let a = annihilation(dim);
            let gen = a.mapv(|z| -alpha.conj() * z) + linalg::dagger(&a).mapv(|z| alpha * z);
            let gen = OperatorMatrix::from_array(layout, gen)?;
            let d = matrix_exponential(Complex64::new(1.0, 0.0), &gen)?;
            let displaced = d.array().dot(&thermal).dot(&linalg::dagger(d.array()));
            Ok(displaced)
        }
    }
}

/// Unitary of the stage after node `m` on the joint carrier space, built as
/// the ordered product of element unitaries, each the exponential of its
/// passive quadratic generator. Identity when no stage is declared.
pub fn stage_unitary(
    net: &NetworkSpec,
    after_node: usize,
    carrier_dim: usize,
) -> Result<OperatorMatrix, FockError> {
    let layout = carrier_layout(net, carrier_dim)?;
    let mut v = OperatorMatrix::identity(layout.clone());
    let Some(stage) = net.stages.get(after_node.wrapping_sub(1)) else {
        return Ok(v);
    };
    for element in &stage.elements {
        let g = element_generator(&layout, element, carrier_dim)?;
        let u = matrix_exponential(Complex64::new(1.0, 0.0), &g)?;
        v = u.dot(&v);
    }
    Ok(v)
}

fn carrier_layout(net: &NetworkSpec, carrier_dim: usize) -> Result<SpaceLayout, FockError> {
    if carrier_dim < 2 {
        return Err(FockError::CarrierDimTooSmall(carrier_dim));
    }
    Ok(SpaceLayout::new(vec![carrier_dim; net.num_channels()])?)
}

/// Skew-Hermitian generator whose exponential realizes one optical element.
fn element_generator(
    layout: &SpaceLayout,
    element: &StageElement,
    carrier_dim: usize,
) -> Result<OperatorMatrix, FockError> {
    match element {
        StageElement::Bs { a, b, epsilon } => {
            let theta = (1.0 - epsilon).sqrt().atan2(epsilon.sqrt());
            let ba = embed(layout, a - 1, &annihilation(carrier_dim))?;
            let bb = embed(layout, b - 1, &annihilation(carrier_dim))?;
            let hop = ba.dagger().dot(&bb).add(&bb.dagger().dot(&ba));
            Ok(hop.scaled(Complex64::new(0.0, -theta)))
        }
        StageElement::Ps { channel, phi } => {
            let n = embed(layout, channel - 1, &number_operator(carrier_dim))?;
            Ok(n.scaled(Complex64::new(0.0, -phi)))
        }
    }
}

/// Coefficients with thermal inputs taken from the channel occupations.
pub fn fock_coefficients(
    net: &NetworkSpec,
    carrier_dim: usize,
) -> Result<CoefficientSet, FockError> {
    let inputs: Vec<CarrierInput> = net
        .occupations()
        .into_iter()
        .map(|occupation| CarrierInput::Thermal { occupation })
        .collect();
    fock_coefficients_with_inputs(net, carrier_dim, &inputs)
}

/// Coefficients for explicit carrier inputs, the extension point for states
/// beyond the product-thermal form expressible in the network description.
pub fn fock_coefficients_with_inputs(
    net: &NetworkSpec,
    carrier_dim: usize,
    inputs: &[CarrierInput],
) -> Result<CoefficientSet, FockError> {
    net.ensure_valid()?;
    let k_count = net.num_channels();
    if inputs.len() != k_count {
        return Err(FockError::InputCount {
            expected: k_count,
            got: inputs.len(),
        });
    }
    let layout = carrier_layout(net, carrier_dim)?;
    for (input, channel) in inputs.iter().zip(1..) {
        let tail = thermal_tail(input.occupation(), carrier_dim);
        if tail > TAIL_LIMIT {
            return Err(FockError::TruncationInsufficient {
                channel,
                tail,
                limit: TAIL_LIMIT,
            });
        }
    }

    // Joint input state of all carriers.
    let mut eta = Array2::eye(1);
    for input in inputs {
        eta = ndarray::linalg::kron(&eta, &carrier_state(input, carrier_dim)?);
    }

    let m_count = net.num_nodes();
    let bare: Vec<Array2<Complex64>> = (0..k_count)
        .map(|slot| Ok(embed(&layout, slot, &annihilation(carrier_dim))?.into_array()))
        .collect::<Result<_, FockError>>()?;
    let stage_ops: Vec<Array2<Complex64>> = (1..m_count)
        .map(|m| Ok(stage_unitary(net, m, carrier_dim)?.into_array()))
        .collect::<Result<_, FockError>>()?;

    // Weighted carrier operators of each node: per active coupling, the
    // annihilation-side operator B_up = g b_k and its adjoint B_down.
    struct NodeOps {
        channels: Vec<usize>,
        up: Vec<Array2<Complex64>>,
        down: Vec<Array2<Complex64>>,
    }
    let mut node_ops = Vec::with_capacity(m_count);
    for m in 1..=m_count {
        let mut channels = Vec::new();
        let mut up = Vec::new();
        let mut down = Vec::new();
        for coupling in net.active_couplings(m)? {
            let g = coupling.weight();
            let b = bare[coupling.channel - 1].mapv(|z| g * z);
            down.push(linalg::dagger(&b));
            up.push(b);
            channels.push(coupling.channel);
        }
        node_ops.push(NodeOps { channels, up, down });
    }

    let mut set =
        CoefficientSet::new_zeroed(node_ops.iter().map(|n| n.channels.clone()).collect());

    let conjugate = |u: &Array2<Complex64>, x: &Array2<Complex64>| u.dot(x).dot(&linalg::dagger(u));

    let mut sigma = eta;
    for m in 1..=m_count {
        let ops = &node_ops[m - 1];
        let ladder_op = |l: Ladder, i: usize| -> &Array2<Complex64> {
            match l {
                Ladder::Up => &ops.up[i],
                Ladder::Down => &ops.down[i],
            }
        };

        // First moments and local second moments at this node's input state.
        let left: Vec<Vec<Array2<Complex64>>> = Ladder::BOTH
            .iter()
            .map(|&l| (0..ops.channels.len()).map(|i| ladder_op(l, i).dot(&sigma)).collect())
            .collect();
        for (i, &k) in ops.channels.iter().enumerate() {
            for l in Ladder::BOTH {
                let value = left[l.index() - 1][i].diag().sum();
                set.set_first(m, k, l, value);
            }
        }
        for (i, &k) in ops.channels.iter().enumerate() {
            for (j, &kp) in ops.channels.iter().enumerate() {
                // gamma^{(2,1)}_{kk'} = Tr[B_down(k') B_up(k) sigma]
                set.set_local(m, k, kp, Ladder::Down, Ladder::Up,
                    trace_product(&ops.down[j], &left[0][i]));
                // gamma^{(1,2)}_{kk'} = Tr[B_up(k) B_down(k') sigma]
                set.set_local(m, k, kp, Ladder::Up, Ladder::Down,
                    trace_product(&ops.up[i], &left[1][j]));
                // gamma^{(1,1)}_{kk'} = Tr[B_up(k) B_up(k') sigma]
                set.set_local(m, k, kp, Ladder::Up, Ladder::Up,
                    trace_product(&ops.up[i], &left[0][j]));
                // gamma^{(2,2)}_{kk'} = Tr[B_down(k) B_down(k') sigma]
                set.set_local(m, k, kp, Ladder::Down, Ladder::Down,
                    trace_product(&ops.down[i], &left[1][j]));
            }
        }

        // Cross moments towards every later node: propagate B sigma and
        // sigma B through the intervening stages. zeta multiplies the node-m
        // operator from the left, xi from the right with flipped sectors,
        // giving two independent evaluation routes.
        let mut prop_left = left;
        let mut prop_right: Vec<Vec<Array2<Complex64>>> = Ladder::BOTH
            .iter()
            .map(|&l| (0..ops.channels.len()).map(|i| sigma.dot(ladder_op(l, i))).collect())
            .collect();
        for mp in m + 1..=m_count {
            let u = &stage_ops[mp - 2];
            for family in prop_left.iter_mut().chain(prop_right.iter_mut()) {
                for x in family.iter_mut() {
                    *x = conjugate(u, x);
                }
            }
            let target = &node_ops[mp - 1];
            if ops.channels.is_empty() || target.channels.is_empty() {
                continue;
            }
            for (i, &k) in ops.channels.iter().enumerate() {
                for (j, &kp) in target.channels.iter().enumerate() {
                    for l in Ladder::BOTH {
                        for lp in Ladder::BOTH {
                            let target_op = match lp {
                                Ladder::Up => &target.up[j],
                                Ladder::Down => &target.down[j],
                            };
                            let zeta = trace_product(target_op, &prop_left[l.index() - 1][i]);
                            let flipped = match lp.flip() {
                                Ladder::Up => &target.up[j],
                                Ladder::Down => &target.down[j],
                            };
                            let xi =
                                trace_product(flipped, &prop_right[l.flip().index() - 1][i]);
                            set.set_cross(m, mp, k, kp, l, lp, zeta, xi);
                        }
                    }
                }
            }
        }

        // Input state of the next node.
        if m < m_count {
            sigma = conjugate(&stage_ops[m - 1], &sigma);
        }
    }

    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::gaussian_coefficients;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    fn max_disagreement(a: &CoefficientSet, b: &CoefficientSet) -> f64 {
        let mut worst = 0.0_f64;
        for m in 1..=a.num_nodes() {
            for &k in a.node_channels(m) {
                for l in Ladder::BOTH {
                    worst = worst.max((a.first_order(m, k, l) - b.first_order(m, k, l)).norm());
                    for &kp in a.node_channels(m) {
                        for lp in Ladder::BOTH {
                            worst = worst
                                .max((a.local(m, k, kp, l, lp) - b.local(m, k, kp, l, lp)).norm());
                        }
                    }
                }
            }
        }
        for (m, mp) in a.cross_pairs() {
            for &k in a.node_channels(m) {
                for &kp in a.node_channels(mp) {
                    for l in Ladder::BOTH {
                        for lp in Ladder::BOTH {
                            worst = worst
                                .max((a.zeta(m, mp, k, kp, l, lp) - b.zeta(m, mp, k, kp, l, lp)).norm());
                            worst = worst
                                .max((a.xi(m, mp, k, kp, l, lp) - b.xi(m, mp, k, kp, l, lp)).norm());
                        }
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn thermal_state_moments() {
        let n = 0.3;
        let state = thermal_state(n, 12).unwrap();
        let trace: Complex64 = state.diag().sum();
        assert_abs_diff_eq!(trace.re, 1.0, epsilon = 1e-14);
        let mean: f64 = (0..12).map(|k| k as f64 * state[[k, k]].re).sum();
        // Renormalizing after truncation shifts the mean by roughly the
        // truncation level times the tail mass.
        assert!((mean - n).abs() < 2.0 * 12.0 * thermal_tail(n, 12));
    }

    #[test]
    fn thermal_tail_guard_triggers() {
        let net = presets::mach_zehnder(&presets::MachZehnderParams {
            n1: 0.5,
            n2: 0.0,
            ..Default::default()
        });
        let err = fock_coefficients(&net, 8).unwrap_err();
        match err {
            FockError::TruncationInsufficient { channel, tail, .. } => {
                assert_eq!(channel, 1);
                assert!((tail - (1.0f64 / 3.0).powi(8)).abs() < 1e-18);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn stage_unitary_reproduces_mode_matrix() {
        // V^dag b_k V must equal sum_j U_{kj} b_j on the truncated space,
        // checked entrywise on the joint carrier space.
        let net = presets::mach_zehnder(&presets::MachZehnderParams {
            eps1: 0.42,
            eps2: 0.77,
            phi: 1.23,
            ..Default::default()
        });
        let dim = 4;
        let layout = SpaceLayout::new(vec![dim; 2]).unwrap();
        let v = stage_unitary(&net, 1, dim).unwrap();
        let u = net.stage_matrix(1);
        for k in 0..2 {
            let bk = embed(&layout, k, &annihilation(dim)).unwrap();
            let lhs = v.dagger().dot(&bk).dot(&v);
            let mut rhs = OperatorMatrix::zeros(layout.clone());
            for j in 0..2 {
                let bj = embed(&layout, j, &annihilation(dim)).unwrap();
                rhs.add_assign(&bj.scaled(u[[k, j]]));
            }
            // The generator is exact on every fixed-total-excitation sector
            // that fits in the truncation, so restrict to input columns with
            // total excitation below the carrier dimension.
            let diff = lhs.sub(&rhs);
            let mut worst = 0.0_f64;
            for ri in 0..dim * dim {
                for ci in 0..dim * dim {
                    let (ma, mb) = (ci / dim, ci % dim);
                    if ma + mb >= dim {
                        continue;
                    }
                    worst = worst.max(diff.array()[[ri, ci]].norm());
                }
            }
            assert!(worst < 1e-12, "mode action mismatch {worst:.3e}");
        }
    }

    #[test]
    fn zero_temperature_agreement_is_exact() {
        for phi in [0.0, 0.9, 2.6] {
            let net = presets::mach_zehnder(&presets::MachZehnderParams {
                phi,
                ..Default::default()
            });
            let gauss = gaussian_coefficients(&net).unwrap();
            let fock = fock_coefficients(&net, 3).unwrap();
            let d = max_disagreement(&gauss, &fock);
            assert!(d <= 1e-10, "phi={phi}: disagreement {d:.3e}");
        }
    }

    #[test]
    fn warm_agreement_within_truncation_error() {
        // Truncating b at dim levels zeroes the top diagonal entry of b b^dag,
        // so occupation-plus-one moments carry an error near
        // dim * (1 - q) * q^(dim - 1), i.e. dim times the tail mass one level
        // below the truncation. That clipping term dominates the tail itself.
        let net = presets::mach_zehnder(&presets::MachZehnderParams {
            n1: 0.2,
            n2: 0.1,
            phi: 0.8,
            eps1: 0.5,
            eps2: 0.5,
            ..Default::default()
        });
        let gauss = gaussian_coefficients(&net).unwrap();
        let coarse = fock_coefficients(&net, 8).unwrap();
        let d8 = max_disagreement(&gauss, &coarse);
        assert!(d8 <= 2.0 * 8.0 * thermal_tail(0.2, 7), "disagreement {d8:.3e}");
        // The clipping error is real at this size, not rounding noise.
        assert!(d8 > 1e-5, "expected visible truncation error, got {d8:.3e}");

        // Two more levels push the same network below 1e-6.
        let fine = fock_coefficients(&net, 10).unwrap();
        let d10 = max_disagreement(&gauss, &fine);
        assert!(d10 <= 1e-6, "disagreement {d10:.3e}");
    }

    #[test]
    fn direct_feed_cross_moment() {
        // With identity stages the second node sees the same carriers:
        // zeta_{12}^{(1,2)} = N_1.
        let mut net = presets::mach_zehnder(&presets::MachZehnderParams {
            n1: 0.15,
            n2: 0.05,
            ..Default::default()
        });
        net.stages[0].elements.clear();
        let fock = fock_coefficients(&net, 8).unwrap();
        let got = fock.zeta(1, 2, 1, 1, Ladder::Up, Ladder::Down);
        let tail = 10.0 * thermal_tail(0.15, 8);
        assert!((got - Complex64::new(0.15, 0.0)).norm() < tail.max(1e-6));
    }

    #[test]
    fn fock_satisfies_symmetry_invariants() {
        for seed in [3u64, 7, 11] {
            let net = presets::random_network(seed, 3, 2, 0.15);
            let fock = fock_coefficients(&net, 6).unwrap();
            assert!(
                fock.max_symmetry_deviation() <= 1e-10,
                "seed {seed}: {:.3e}",
                fock.max_symmetry_deviation()
            );
        }
    }

    #[test]
    fn displaced_input_breaks_stability() {
        let net = presets::mach_zehnder(&presets::MachZehnderParams::default());
        let inputs = [
            CarrierInput::DisplacedThermal {
                occupation: 0.0,
                alpha: Complex64::new(0.3, -0.2),
            },
            CarrierInput::Thermal { occupation: 0.0 },
        ];
        let set = fock_coefficients_with_inputs(&net, 8, &inputs).unwrap();
        let report = set.stability_report();
        assert!(!report.passes());
        // The displaced carrier's first moment is alpha itself, seen at the
        // first node before any optics.
        let got = set.first_order(1, 1, Ladder::Up);
        assert!((got - Complex64::new(0.3, -0.2)).norm() < 1e-6);
    }

    #[test]
    fn thermal_inputs_have_vanishing_first_moments() {
        let net = presets::three_node(&presets::ThreeNodeParams {
            n1: 0.1,
            n2: 0.05,
            phi: 1.4,
            ..Default::default()
        });
        let set = fock_coefficients(&net, 7).unwrap();
        assert!(set.stability_report().passes());
    }
}
