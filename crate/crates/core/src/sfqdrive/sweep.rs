use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    build_cycle_propagator, calibrate::calibrate_np_with, clock_phase_to_axis,
    coupling_for_kick_angle, ClockConfig, DecoherenceChannels, GateSpec, PulseShape,
};
use crate::error::{Error, Result};
use crate::metrics::{average_fidelity, leakage_seepage, GateTarget};
use crate::qdevice::TransmonModel;

#[derive(Debug, Clone, Serialize)]
pub struct CapacitancePoint {
    pub gate_time_ns: f64,
    pub error: f64,
    pub leakage: f64,
    /// T1 = T2, µs (infinite for the closed system).
    pub t_coh_us: f64,
    pub c_c_ff: f64,
    pub n_p: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct PulseNumberPoint {
    pub np: u32,
    pub error: f64,
    pub t_coh_us: f64,
}

/// Coupling capacitances whose exact per-pulse angle is `π/(2n)` for each
/// requested pulse count, so a calibrated gate has no rounding error.
pub fn cc_for_pulse_counts(model: &TransmonModel, counts: &[u32]) -> Vec<f64> {
    let mut cc: Vec<f64> = counts
        .iter()
        .map(|&n| coupling_for_kick_angle(model, PI / (2.0 * n as f64)))
        .collect();
    cc.sort_by(f64::total_cmp);
    cc
}

/// X/2 error and leakage against gate time, recalibrating the pulse count at
/// every coupling and coherence time (T1 = T2). Points are ordered by
/// coherence time, then by coupling.
pub fn sweep_capacitance(
    model_base: &TransmonModel,
    shape: PulseShape,
    clock: ClockConfig,
    cc_values: &[f64],
    coherence_list: &[f64],
) -> Result<Vec<CapacitancePoint>> {
    if cc_values.is_empty() || cc_values.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::param("coupling capacitances must be positive"));
    }
    if cc_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("coupling capacitances must be ascending"));
    }
    let jobs: Vec<(f64, f64)> = coherence_list
        .iter()
        .flat_map(|&t| cc_values.iter().map(move |&cc| (t, cc)))
        .collect();
    let mut points: Vec<CapacitancePoint> = jobs
        .par_iter()
        .map(|&(t, cc)| {
            let chans = DecoherenceChannels::equal(t)?;
            let model = model_base.with_coupling(cc).with_coherence(t, t);
            let cycle = build_cycle_propagator(&model, shape, clock, chans)?;
            let cal = calibrate_np_with(&model, &cycle, clock)?;
            Ok(CapacitancePoint {
                gate_time_ns: cal.gate.duration_ns(),
                error: 1.0 - cal.fidelity,
                leakage: cal.leakage,
                t_coh_us: t,
                c_c_ff: cc,
                n_p: cal.gate.n_p,
            })
        })
        .collect::<Result<_>>()?;
    let order = |t: f64| coherence_list.iter().position(|&x| x == t || (x.is_nan() && t.is_nan()));
    points.sort_by(|a, b| {
        order(a.t_coh_us)
            .cmp(&order(b.t_coh_us))
            .then(a.gate_time_ns.total_cmp(&b.gate_time_ns))
    });
    Ok(points)
}

/// X/2 error of `gate` with its pulse count replaced by each value in
/// `np_range`, for each coherence time (T1 = T2).
pub fn sweep_pulse_number(
    model: &TransmonModel,
    shape: PulseShape,
    gate: &GateSpec,
    np_range: RangeInclusive<u32>,
    coherence_list: &[f64],
) -> Result<Vec<PulseNumberPoint>> {
    let (lo, hi) = (*np_range.start(), *np_range.end());
    if lo < 1 || hi < lo {
        return Err(Error::param("pulse-count range must be non-empty and start at 1 or more"));
    }
    let per_t: Vec<Result<Vec<PulseNumberPoint>>> = coherence_list
        .par_iter()
        .map(|&t| {
            let chans = DecoherenceChannels::equal(t)?;
            let m = model.with_coherence(t, t);
            let cycle = build_cycle_propagator(&m, shape, gate.clock, chans)?;
            let axis = clock_phase_to_axis(gate.clock.phase, gate.clock.m) + gate.frame_angle;
            let target = GateTarget::rotation(axis, PI / 2.0, cycle.dim());
            let mut s_n = cycle.superop.power(lo as u64);
            let mut out = Vec::with_capacity((hi - lo + 1) as usize);
            for n in lo..=hi {
                if n > lo {
                    s_n = cycle.superop.after(&s_n);
                }
                let g = super::rotate_axis(&cycle.frame_gate(&s_n, n), gate.frame_angle);
                let f = average_fidelity(&g, &target)?;
                out.push(PulseNumberPoint {
                    np: n,
                    error: 1.0 - f,
                    t_coh_us: t,
                });
            }
            Ok(out)
        })
        .collect();
    let mut points = Vec::new();
    for r in per_t {
        points.extend(r?);
    }
    Ok(points)
}

/// Leakage and error of an already-calibrated gate, for reporting.
pub fn gate_error(
    model: &TransmonModel,
    shape: PulseShape,
    gate: &GateSpec,
    chans: DecoherenceChannels,
) -> Result<(f64, f64)> {
    let cycle = build_cycle_propagator(model, shape, gate.clock, chans)?;
    let axis = clock_phase_to_axis(gate.clock.phase, gate.clock.m) + gate.frame_angle;
    let target = GateTarget::rotation(axis, PI / 2.0, cycle.dim());
    let g = super::rotate_axis(&cycle.gate(gate.n_p), gate.frame_angle);
    let f = average_fidelity(&g, &target)?;
    let (l1, _) = leakage_seepage(&g, &target)?;
    Ok((1.0 - f, l1))
}
