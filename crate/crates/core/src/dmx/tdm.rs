use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::Superoperator;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::qdevice::TransmonModel;
use crate::sfqdrive::{
    build_cycle_propagator, coupling_for_kick_angle, free_evolution, kick_angle,
    DecoherenceChannels, GateSpec, PulseShape,
};

/// Slack for floating-point schedule comparisons, ns.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdmEntry {
    pub qubit: usize,
    pub gate: GateSpec,
    pub t_start_ns: f64,
}

impl TdmEntry {
    pub fn end_ns(&self) -> f64 {
        self.t_start_ns + self.gate.duration_ns()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdmSchedule {
    pub entries: Vec<TdmEntry>,
    pub readout_ns: f64,
    /// Minimum dead time between consecutive entries, ns.
    #[serde(default)]
    pub guard_ns: f64,
}

impl TdmSchedule {
    /// Reads the JSON entry list; readout defaults to the end of the last entry.
    pub fn from_entries_json(text: &str) -> Result<Self> {
        let entries: Vec<TdmEntry> =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("TDM schedule: {e}")))?;
        let readout_ns = entries.iter().map(TdmEntry::end_ns).fold(0.0, f64::max);
        let s = Self {
            entries,
            readout_ns,
            guard_ns: 0.0,
        };
        s.validate(usize::MAX)?;
        Ok(s)
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if !(self.guard_ns >= 0.0) {
            return Err(Error::Schedule("guard time must be ≥ 0".into()));
        }
        let mut prev: Option<&TdmEntry> = None;
        for (k, e) in self.entries.iter().enumerate() {
            if e.qubit >= n_qubits {
                return Err(Error::Schedule(format!("entry {k} targets qubit {} of {n_qubits}", e.qubit)));
            }
            if !(e.t_start_ns >= 0.0) || !e.t_start_ns.is_finite() {
                return Err(Error::Schedule(format!("entry {k} has start time {}", e.t_start_ns)));
            }
            e.gate.clock.validate()?;
            if let Some(p) = prev {
                if e.t_start_ns < p.t_start_ns {
                    return Err(Error::Schedule(format!("entry {k} starts before entry {}", k - 1)));
                }
                if e.t_start_ns + TIME_EPS < p.end_ns() + self.guard_ns {
                    return Err(Error::Schedule(format!(
                        "entry {k} at {} ns overlaps entry {} ending at {} ns (guard {} ns)",
                        e.t_start_ns,
                        k - 1,
                        p.end_ns(),
                        self.guard_ns
                    )));
                }
            }
            prev = Some(e);
        }
        if let Some(p) = prev {
            if self.readout_ns + TIME_EPS < p.end_ns() {
                return Err(Error::Schedule(format!(
                    "readout at {} ns precedes the end of the last entry at {} ns",
                    self.readout_ns,
                    p.end_ns()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TdmQubit {
    /// Model whose coupling sets the on-channel drive.
    pub model: TransmonModel,
    pub chans: DecoherenceChannels,
}

#[derive(Debug, Clone)]
pub struct TdmOutcome {
    /// Final single-qubit states; the qubits do not interact, so the joint
    /// state is their product.
    pub states: Vec<CMat>,
}

impl TdmOutcome {
    pub fn populations(&self, qubit: usize) -> Vec<f64> {
        let rho = &self.states[qubit];
        (0..rho.nrows()).map(|j| rho[(j, j)].re).collect()
    }

    pub fn p1(&self) -> Vec<f64> {
        (0..self.states.len()).map(|q| self.populations(q)[1]).collect()
    }

    /// Probability of the computational outcome `levels[q]` on every qubit.
    pub fn joint_probability(&self, levels: &[usize]) -> f64 {
        levels
            .iter()
            .enumerate()
            .map(|(q, &l)| self.populations(q)[l])
            .product()
    }
}

/// Per-pulse rotation seen by qubit `i` while channel `j` is driven.
fn crosstalk_model(
    qubits: &[TdmQubit],
    lambda_db: Option<&DMatrix<f64>>,
    i: usize,
    j: usize,
) -> Option<TransmonModel> {
    if i == j {
        return Some(qubits[i].model.clone());
    }
    let l = lambda_db?[(i, j)];
    if l == f64::NEG_INFINITY {
        return None;
    }
    let target = kick_angle(&qubits[j].model) * 10f64.powf(l / 20.0);
    let m = &qubits[i].model;
    Some(m.with_coupling(coupling_for_kick_angle(m, target)))
}

type SegmentKey = (usize, usize, u64, u64);

/// Runs the schedule on independent qubits. The driven qubit follows its
/// own pulse train; every other qubit sees the same train through the
/// crosstalk matrix (or nothing when `lambda_db` is `None`) and otherwise
/// decays freely.
pub fn simulate_tdm(
    schedule: &TdmSchedule,
    qubits: &[TdmQubit],
    lambda_db: Option<&DMatrix<f64>>,
    shape: PulseShape,
) -> Result<TdmOutcome> {
    let n = qubits.len();
    schedule.validate(n)?;
    if let Some(l) = lambda_db {
        if l.nrows() != n || l.ncols() != n {
            return Err(Error::param("crosstalk matrix does not match the number of qubits"));
        }
    }
    let mut cycles: HashMap<SegmentKey, Option<Superoperator>> = HashMap::new();
    let mut states = Vec::with_capacity(n);
    for (i, q) in qubits.iter().enumerate() {
        let d = q.model.n_levels();
        let mut rho = linalg::basis_dm(d, 0);
        let mut t = 0.0;
        for e in &schedule.entries {
            rho = free_evolution(&q.model, q.chans, (e.t_start_ns - t).max(0.0))?.apply(&rho);
            let key = (i, e.qubit, e.gate.clock.f_clk.to_bits(), e.gate.clock.detuning_mhz.to_bits());
            if !cycles.contains_key(&key) {
                let cyc = match crosstalk_model(qubits, lambda_db, i, e.qubit) {
                    Some(m) => Some(build_cycle_propagator(&m, shape, e.gate.clock, q.chans)?.superop),
                    None => None,
                };
                cycles.insert(key, cyc);
            }
            rho = match &cycles[&key] {
                Some(s) => s.power(e.gate.n_p as u64).apply(&rho),
                None => free_evolution(&q.model, q.chans, e.gate.duration_ns())?.apply(&rho),
            };
            t = e.end_ns();
        }
        rho = free_evolution(&q.model, q.chans, (schedule.readout_ns - t).max(0.0))?.apply(&rho);
        states.push(rho);
    }
    Ok(TdmOutcome { states })
}

#[derive(Debug, Clone, Serialize)]
pub struct TdmRabiPoint {
    pub n_pulses: u32,
    /// Excited population of each qubit at readout.
    pub p1: Vec<f64>,
}

/// Serial Rabi drive: qubits take turns in `order`, each in a fixed slot
/// long enough for the largest pulse count, and all are read out after the
/// last slot. `clocks[q]` is the drive for qubit `q`.
pub fn tdm_rabi_sweep(
    qubits: &[TdmQubit],
    lambda_db: Option<&DMatrix<f64>>,
    shape: PulseShape,
    clocks: &[GateSpec],
    pulse_counts: &[u32],
    order: &[usize],
) -> Result<Vec<TdmRabiPoint>> {
    if clocks.len() != qubits.len() {
        return Err(Error::param("one drive clock per qubit"));
    }
    let max_n = pulse_counts.iter().copied().max().unwrap_or(0);
    let slot = |q: usize| max_n as f64 * clocks[q].clock.period_ns();
    let readout: f64 = order.iter().map(|&q| slot(q)).sum();
    let mut out = Vec::with_capacity(pulse_counts.len());
    for &n in pulse_counts {
        let mut entries = Vec::new();
        let mut t = 0.0;
        for &q in order {
            if q >= qubits.len() {
                return Err(Error::Schedule(format!("qubit {q} not in the device list")));
            }
            if n > 0 {
                let gate = GateSpec { n_p: n, ..clocks[q] };
                entries.push(TdmEntry {
                    qubit: q,
                    gate,
                    t_start_ns: t,
                });
            }
            t += slot(q);
        }
        let sched = TdmSchedule {
            entries,
            readout_ns: readout,
            guard_ns: 0.0,
        };
        let res = simulate_tdm(&sched, qubits, lambda_db, shape)?;
        out.push(TdmRabiPoint {
            n_pulses: n,
            p1: res.p1(),
        });
    }
    Ok(out)
}

/// Peak-to-peak excited population of one qubit across a Rabi sweep.
pub fn rabi_contrast(points: &[TdmRabiPoint], qubit: usize) -> f64 {
    let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.p1[qubit]), hi.max(p.p1[qubit]))
    });
    hi - lo
}
