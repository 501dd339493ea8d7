//! Clifford-group machinery and randomized-benchmarking pipelines (RB,
//! interleaved, two-X/2 composition, purity, and ORBIT calibration) run
//! against simulated gate maps.

mod clifford;
mod engine;
mod pipeline;

pub use clifford::{
    compose_steps, equal_up_to_phase, generate_interleaved, generate_sequence, z_unitary, Clifford,
    CliffordTable, Composition, Primitive, Sequence, Step,
};
pub use engine::{ChannelEngine, ErrorPlacement, GateEngine, SfqEngine};
pub use pipeline::{
    mean_clifford_fidelity, orbit_length, orbit_sweep, run_irb, run_prb, run_rb, run_u3rb, DecayFit,
    InterleavedGate, IrbResult, OrbitResult, PrbResult, RbConfig, RbResult, DEFAULT_BOOTSTRAP,
    DEFAULT_LENGTHS, DEFAULT_RANDOMIZATIONS,
};
