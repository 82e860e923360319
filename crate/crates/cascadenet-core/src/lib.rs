//! Core library for simulating interferometric cascades of bosonic quantum
//! systems: a chain of nodes (cavities or qubits) driven one after another by
//! the same unidirectional bosonic carriers, with passive linear optics (beam
//! splitters, phase shifters) rearranging the carriers between collisions.
//!
//! The pipeline turns a declarative [`network::NetworkSpec`] into
//!
//! 1. the second-order correlation coefficients of the carrier environment
//!    ([`coefficients`], with an analytic Gaussian backend and an independent
//!    truncated-Fock backend),
//! 2. a Markovian master-equation generator in coefficient form and in
//!    diagonal GKSL form ([`gksl`]),
//! 3. integrated trajectories with physicality monitoring ([`dynamics`]), and
//! 4. a direct stroboscopic collision-model simulation used as a brute-force
//!    cross-check of the continuous-time limit ([`collision`]).
//!
//! Times are measured in units of `1/rate` and all emitted rates in units of
//! `rate`, the single timescale of the model.

pub mod collision;
pub mod coefficients;
pub mod dynamics;
pub mod fock;
pub mod gksl;
pub mod linalg;
pub mod network;
pub mod numfmt;
pub mod operator;
pub mod presets;

pub use network::NetworkSpec;
pub use operator::{OperatorMatrix, SpaceLayout};
