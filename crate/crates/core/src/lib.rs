//! Offer and confirmation wave simulator for interaction-free measurement
//! experiments: Mach-Zehnder interferometers with atoms in boxes straddling
//! the arms, analysed as transactions between sources and absorbers.
//!
//! * [`amplitude`]: sparse kets and bras over labeled tensor-product bases.
//! * [`network`]: optical element DAG with forward (offer) and backward
//!   (confirmation) propagation.
//! * [`transaction`]: candidate enumeration, echo weights, flat and
//!   hierarchical resolution, post-selection and CHSH.
//! * [`path`]: path-ket notation parser and evaluator.
//! * [`experiments`]: builtin scenarios, Monte Carlo runs and reports.

pub mod amplitude;
pub mod builtin;
pub mod experiments;
pub mod network;
pub mod path;
pub mod rng;
pub mod transaction;

pub use amplitude::{inner, BasisState, Bra, Complex, Ket, Space, StateError, SubsystemKind, SubsystemSpec};
pub use network::{Network, NetworkError};
