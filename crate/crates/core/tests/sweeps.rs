mod common;

use std::f64::consts::PI;

use sfq_core::sfqdrive::{
    build_cycle_propagator, calibrate_np, cc_for_pulse_counts, coupling_for_kick_angle,
    sweep_capacitance, sweep_pulse_number, ClockConfig, DecoherenceChannels, PulseShape,
};

fn q0() -> sfq_core::qdevice::TransmonModel {
    common::device_model(0)
}

fn clock(m: &sfq_core::qdevice::TransmonModel) -> ClockConfig {
    ClockConfig::subharmonic(m.f01, 2)
}

#[test]
fn closed_system_error_envelope_decreases_with_gate_time() {
    // Leakage to |2> refocuses roughly every 9 pulses, so the pointwise
    // curve has fringes; the minimum over each 9-pulse window must fall.
    let m = q0();
    let counts: Vec<u32> = (20..=190).collect();
    let cc = cc_for_pulse_counts(&m, &counts);
    let pts = sweep_capacitance(&m, PulseShape::Delta, clock(&m), &cc, &[f64::INFINITY]).unwrap();
    let errs: Vec<f64> = pts.iter().map(|p| p.error).collect();
    let env: Vec<f64> = errs
        .chunks(9)
        .filter(|c| c.len() == 9)
        .map(|c| c.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    for w in env.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9), "envelope rose: {env:?}");
    }
}

#[test]
fn millisecond_coherence_needs_longer_gates_for_four_nines() {
    let m = q0();
    let counts: Vec<u32> = [20, 30, 45, 60, 80, 100, 117, 130, 150, 180, 220, 260, 320].to_vec();
    let cc = cc_for_pulse_counts(&m, &counts);
    let pts = sweep_capacitance(&m, PulseShape::Delta, clock(&m), &cc, &[50.0, 1000.0]).unwrap();
    let (t50, t1ms): (Vec<_>, Vec<_>) = pts.iter().partition(|p| p.t_coh_us == 50.0);
    let opt50 = t50.iter().min_by(|a, b| a.error.total_cmp(&b.error)).unwrap().gate_time_ns;
    let below: Vec<f64> = t1ms.iter().filter(|p| p.error < 1e-4).map(|p| p.gate_time_ns).collect();
    assert!(!below.is_empty());
    assert!(below.iter().all(|&t| t > opt50), "{below:?} vs optimum {opt50}");
}

#[test]
fn pulse_number_scan_is_minimal_at_calibration() {
    let m = q0();
    let chans = DecoherenceChannels::from_model(&m).unwrap();
    let gate = calibrate_np(&m, PulseShape::Delta, clock(&m), chans).unwrap();
    assert_eq!(gate.n_p, 117);
    let ts = [20.0, 50.0, 100.0, 1000.0];
    let pts = sweep_pulse_number(&m, PulseShape::Delta, &gate, gate.n_p - 10..=gate.n_p + 10, &ts).unwrap();
    let mut ratio3 = Vec::new();
    for &t in &ts {
        let curve: Vec<_> = pts.iter().filter(|p| p.t_coh_us == t).collect();
        let best = curve.iter().min_by(|a, b| a.error.total_cmp(&b.error)).unwrap();
        assert!(best.np.abs_diff(gate.n_p) <= 1, "T={t}: minimum at {}", best.np);
        let err = |n: u32| curve.iter().find(|p| p.np == n).unwrap().error;
        for d in 1..10 {
            assert!(err(gate.n_p + d + 1) > err(gate.n_p + d), "T={t}, +{d}");
            assert!(err(gate.n_p - d - 1) > err(gate.n_p - d), "T={t}, -{d}");
        }
        ratio3.push(err(gate.n_p + 3) / err(gate.n_p));
    }
    assert!(ratio3[3] > ratio3[0], "{ratio3:?}");
}

#[test]
fn two_level_pulse_error_follows_over_rotation_formula() {
    let m = q0().truncated(2);
    let theta = PI / 200.0;
    let m = m.with_coupling(coupling_for_kick_angle(&m, theta));
    let gate = sfq_core::sfqdrive::GateSpec::new(100, clock(&m)).unwrap();
    let pts = sweep_pulse_number(&m, PulseShape::Delta, &gate, 90..=110, &[f64::INFINITY]).unwrap();
    for p in pts {
        let dn = p.np as f64 - 100.0;
        let expect = 2.0 / 3.0 * (theta * dn / 2.0).sin().powi(2);
        assert!((p.error - expect).abs() < 1e-9, "ΔN={dn}: {} vs {expect}", p.error);
    }
}

#[test]
fn composed_cycles_stay_cptp() {
    let m = q0();
    let chans = DecoherenceChannels::from_model(&m).unwrap();
    let cyc = build_cycle_propagator(&m, PulseShape::gaussian(), clock(&m), chans).unwrap();
    for k in [2u64, 17, 117, 400] {
        cyc.superop.power(k).check_cptp((k as f64).sqrt()).unwrap();
    }
}
