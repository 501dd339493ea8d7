//! Numerical simulation and benchmarking of transmon qubits driven by
//! single-flux-quantum (SFQ) pulse trains.
//!
//! The crate is organized bottom-up:
//!
//! - [`qdevice`]: charge-basis transmon model and per-pulse rotation angle
//! - [`sfqdrive`]: one-clock-cycle propagators, gate composition, calibration and sweeps
//! - [`metrics`]: average fidelity, leakage, purity, Kraus and χ representations
//! - [`bench`]: Clifford group and RB / IRB / U3RB / PRB / ORBIT pipelines
//! - [`dmx`]: demultiplexer routing, crosstalk, margins, TDM and the pulse counter
//! - [`fits`]: least-squares fitters for decay, Rabi and quasiparticle curves
//! - [`power`]: cryogenic heat-budget accounting

pub mod bench;
pub mod channel;
pub mod dmx;
pub mod error;
pub mod fits;
pub mod linalg;
pub mod metrics;
pub mod power;
pub mod qdevice;
pub mod sfqdrive;
pub mod units;

pub use channel::Superoperator;
pub use error::{Error, Result};
