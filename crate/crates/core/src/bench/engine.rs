use std::f64::consts::{FRAC_PI_2, PI};

use super::clifford::{CliffordTable, Composition, Primitive, Step};
use crate::channel::Superoperator;
use crate::error::Result;
use crate::linalg;
use crate::qdevice::TransmonModel;
use crate::sfqdrive::{
    build_cycle_propagator, rotate_axis, virtual_z, DecoherenceChannels, GateSpec, PulseShape,
};

/// Source of noisy gate maps for the benchmarking pipelines.
pub trait GateEngine {
    fn dim(&self) -> usize;

    /// Noisy map of one physical gate.
    fn primitive(&self, p: Primitive) -> Superoperator;

    /// Virtual Z is a frame update and error-free.
    fn virtual_z(&self, theta: f64) -> Superoperator {
        virtual_z(self.dim(), theta)
    }

    /// Noisy map of a whole Clifford. The default composes its steps.
    fn clifford(&self, table: &CliffordTable, idx: usize, comp: Composition) -> Superoperator {
        let d = self.dim();
        table.elements[idx]
            .steps(comp)
            .iter()
            .fold(Superoperator::identity(d), |acc, s| {
                let g = match s {
                    Step::Gate(p) => self.primitive(*p),
                    Step::VirtualZ(t) => self.virtual_z(*t),
                };
                g.after(&acc)
            })
    }

    /// All 24 Clifford maps for a composition.
    fn clifford_channels(&self, table: &CliffordTable, comp: Composition) -> Vec<Superoperator> {
        (0..table.len()).map(|i| self.clifford(table, i, comp)).collect()
    }
}

/// Where an abstract error channel is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorPlacement {
    PerPrimitive,
    PerClifford,
}

/// Ideal gates followed by a fixed error channel, for oracle tests.
#[derive(Debug, Clone)]
pub struct ChannelEngine {
    d: usize,
    error: Superoperator,
    placement: ErrorPlacement,
}

impl ChannelEngine {
    pub fn new(error: Superoperator, placement: ErrorPlacement) -> Self {
        Self {
            d: error.dim(),
            error,
            placement,
        }
    }

    pub fn perfect(d: usize) -> Self {
        Self::new(Superoperator::identity(d), ErrorPlacement::PerPrimitive)
    }

    /// Depolarizing error with Bloch shrink factor `1 − p`.
    pub fn depolarizing(p: f64, placement: ErrorPlacement) -> Self {
        Self::new(Superoperator::depolarizing(2, p), placement)
    }

    fn ideal(&self, u2: &linalg::CMat) -> Superoperator {
        Superoperator::from_unitary(&linalg::embed(u2, self.d, linalg::ONE))
    }
}

impl GateEngine for ChannelEngine {
    fn dim(&self) -> usize {
        self.d
    }

    fn primitive(&self, p: Primitive) -> Superoperator {
        let g = self.ideal(&p.unitary());
        match self.placement {
            ErrorPlacement::PerPrimitive => self.error.after(&g),
            ErrorPlacement::PerClifford => g,
        }
    }

    fn clifford(&self, table: &CliffordTable, idx: usize, comp: Composition) -> Superoperator {
        let steps = table.elements[idx].steps(comp);
        let mut acc = Superoperator::identity(self.d);
        for s in &steps {
            let g = match s {
                Step::Gate(p) => self.primitive(*p),
                Step::VirtualZ(t) => self.virtual_z(*t),
            };
            acc = g.after(&acc);
        }
        match self.placement {
            ErrorPlacement::PerPrimitive => acc,
            ErrorPlacement::PerClifford => self.error.after(&acc),
        }
    }
}

/// Gates from the SFQ pulse-train simulation. The calibrated pulse train is
/// the X/2; the other rotations are the same train with shifted axis, and
/// the idle lasts one X/2 gate length.
#[derive(Debug, Clone)]
pub struct SfqEngine {
    x90: Superoperator,
    x180: Superoperator,
    idle: Superoperator,
}

impl SfqEngine {
    pub fn new(
        model: &TransmonModel,
        shape: PulseShape,
        gate: &GateSpec,
        chans: DecoherenceChannels,
    ) -> Result<Self> {
        let cycle = build_cycle_propagator(model, shape, gate.clock, chans)?;
        let x90 = rotate_axis(&cycle.gate(gate.n_p), gate.frame_angle);
        let x180 = rotate_axis(&cycle.gate(2 * gate.n_p), gate.frame_angle);
        let idle_cycle = build_cycle_propagator(&model.with_coupling(0.0), shape, gate.clock, chans)?;
        let idle = idle_cycle.gate(gate.n_p);
        Ok(Self { x90, x180, idle })
    }

    pub fn x90(&self) -> &Superoperator {
        &self.x90
    }
}

impl GateEngine for SfqEngine {
    fn dim(&self) -> usize {
        self.x90.dim()
    }

    fn primitive(&self, p: Primitive) -> Superoperator {
        match p {
            Primitive::I => self.idle.clone(),
            Primitive::X => self.x180.clone(),
            Primitive::Y => rotate_axis(&self.x180, FRAC_PI_2),
            Primitive::X90 => self.x90.clone(),
            Primitive::Xm90 => rotate_axis(&self.x90, PI),
            Primitive::Y90 => rotate_axis(&self.x90, FRAC_PI_2),
            Primitive::Ym90 => rotate_axis(&self.x90, -FRAC_PI_2),
        }
    }
}
