#![allow(dead_code)]

use sfq_core::qdevice::{diagonalize, solve_ej_ec, TransmonModel, TransmonParams};

/// Measured rows (f01 GHz, anharmonicity GHz, T1 µs, T2 µs, f_clk GHz,
/// Rabi MHz, n_pi/2, gate ns) of the five device qubits.
pub const DEVICE_ROWS: [(f64, f64, f64, f64, f64, f64, u32, f64); 5] = [
    (5.083, -0.280, 31.0, 12.0, 2.542, 5.442, 117, 46.0),
    (4.794, -0.287, 30.0, 13.0, 2.397, 5.085, 118, 49.0),
    (3.800, -0.291, 65.0, 26.0, 1.900, 3.259, 146, 77.0),
    (4.684, -0.285, 47.0, 10.0, 2.342, 5.818, 101, 43.0),
    (4.826, -0.277, 45.0, 22.0, 2.413, 5.941, 106, 44.0),
];

/// Coupling capacitances (fF) that give each qubit its measured Rabi rate.
pub const DEVICE_CC: [f64; 5] = [0.075582575, 0.077638854, 0.069427506, 0.091564262, 0.088502157];

pub fn device_model(i: usize) -> TransmonModel {
    let (f, a, t1, t2, ..) = DEVICE_ROWS[i];
    let (ej, ec) = solve_ej_ec(f, a).unwrap();
    let p = TransmonParams::new(ej, ec)
        .with_capacitance(80.0, DEVICE_CC[i])
        .with_coherence(t1, t2);
    diagonalize(&p).unwrap()
}
