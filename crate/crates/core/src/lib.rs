//! Simulation and synthesis of native three-qubit gates for microwave-dressed
//! trapped Rydberg ions, and a measurement-free fault-tolerant Bacon-Shor
//! error-correction cycle on a linear ion chain.
//!
//! The gate half integrates the dressed three-ion Hamiltonian under
//! sinusoidal laser pulses ([`model`], [`evolve`]), scores the result against
//! CCZ or C1Z3 targets ([`metrics`]) and searches pulse parameters with
//! differential evolution ([`optimize`]).
//!
//! The error-correction half builds circuits over qubits ([`circuit`]),
//! constructs the routed nine-qubit Bacon-Shor cycle ([`bacon_shor`]) and
//! certifies it by exhaustive fault injection and Monte Carlo scaling
//! studies ([`ft`]).

// index loops mirror the matrix algebra they implement
#![allow(clippy::needless_range_loop)]

pub mod bacon_shor;
pub mod circuit;
pub mod config;
pub mod error;
pub mod evolve;
pub mod ft;
pub mod metrics;
pub mod model;
pub mod optimize;
pub mod quantum;

pub use error::{Error, Result};
