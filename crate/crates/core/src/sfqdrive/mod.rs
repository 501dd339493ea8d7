//! Single-clock-cycle SFQ propagators and the gates composed from them.
//!
//! The simulation runs in the lab frame of the truncated eigenbasis. Gates
//! are reported in the frame rotating at `j·f01` on level `j`, so at an exact
//! subharmonic the frame returns to itself after every clock cycle.

mod calibrate;
mod sweep;

use std::f64::consts::PI;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::channel::Superoperator;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};
use crate::qdevice::TransmonModel;
use crate::units::{self, PHI0, TWO_PI};

pub use calibrate::{
    calibrate_np, calibrate_np_with, np_from_rabi, simulate_rabi, Calibration, RabiTrace,
};
pub use sweep::{
    cc_for_pulse_counts, gate_error, sweep_capacitance, sweep_pulse_number, CapacitancePoint,
    PulseNumberPoint,
};

pub const DEFAULT_SIGMA_PS: f64 = 2.0;
/// Gaussian pulses are integrated over ±`GAUSSIAN_HALF_WIDTH`·σ.
pub const GAUSSIAN_HALF_WIDTH: f64 = 6.0;
pub const DEFAULT_STEPS_PER_SIGMA: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseShape {
    Delta,
    Gaussian { sigma_ps: f64 },
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::Delta
    }
}

impl PulseShape {
    pub fn gaussian() -> Self {
        PulseShape::Gaussian {
            sigma_ps: DEFAULT_SIGMA_PS,
        }
    }

    /// Half of the integration window in ns (zero for a delta kick).
    pub fn half_window_ns(&self) -> f64 {
        match self {
            PulseShape::Delta => 0.0,
            PulseShape::Gaussian { sigma_ps } => GAUSSIAN_HALF_WIDTH * sigma_ps * 1e-3,
        }
    }

    /// Normalized envelope `g(t)` in 1/ns with `∫g dt = 1`; `V(t) = Φ0·g(t)`.
    pub fn envelope(&self, t_ns: f64) -> f64 {
        match self {
            PulseShape::Delta => 0.0,
            PulseShape::Gaussian { sigma_ps } => {
                let s = sigma_ps * 1e-3;
                (-(t_ns * t_ns) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
            }
        }
    }

    /// Pulse voltage in V at `t_ns` from the pulse centre.
    pub fn voltage(&self, t_ns: f64) -> f64 {
        PHI0 * self.envelope(t_ns) * 1e9
    }

    /// `∫V dt` over the pulse support by composite Simpson quadrature, Wb.
    pub fn flux_area(&self) -> f64 {
        match self {
            PulseShape::Delta => PHI0,
            PulseShape::Gaussian { .. } => {
                let w = self.half_window_ns();
                let n = 2000;
                let h = 2.0 * w / n as f64;
                let mut s = self.voltage(-w) + self.voltage(w);
                for k in 1..n {
                    let wgt = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += wgt * self.voltage(-w + k as f64 * h);
                }
                s * h / 3.0 * 1e-9
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PulseShape::Delta => Ok(()),
            PulseShape::Gaussian { sigma_ps } if *sigma_ps > 0.0 && sigma_ps.is_finite() => Ok(()),
            PulseShape::Gaussian { sigma_ps } => {
                Err(Error::param(format!("pulse width must be positive, got {sigma_ps} ps")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    /// Nominal clock frequency, GHz.
    pub f_clk: f64,
    /// Subharmonic order, `f_clk = f01/m`.
    pub m: u32,
    /// Clock phase offset, rad.
    #[serde(default)]
    pub phase: f64,
    /// Offset of the actual clock from `f_clk`, MHz.
    #[serde(default)]
    pub detuning_mhz: f64,
}

impl ClockConfig {
    pub fn subharmonic(f01: f64, m: u32) -> Self {
        Self {
            f_clk: f01 / m as f64,
            m,
            phase: 0.0,
            detuning_mhz: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_detuning(mut self, detuning_mhz: f64) -> Self {
        self.detuning_mhz = detuning_mhz;
        self
    }

    /// Frequency the pulses actually arrive at, GHz.
    pub fn effective_f_clk(&self) -> f64 {
        self.f_clk + units::mhz_to_ghz(self.detuning_mhz)
    }

    /// τ_CLK in ns.
    pub fn period_ns(&self) -> f64 {
        1.0 / self.effective_f_clk()
    }

    /// Arrival-time shift of the pulse train implied by the clock phase, ns.
    pub fn time_shift_ns(&self) -> f64 {
        self.phase / (TWO_PI * self.f_clk)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_clk > 0.0) || !self.f_clk.is_finite() {
            return Err(Error::param(format!("clock frequency must be positive, got {}", self.f_clk)));
        }
        if self.m < 1 {
            return Err(Error::param("subharmonic order must be at least 1"));
        }
        if !(self.effective_f_clk() > 0.0) {
            return Err(Error::param("detuning drives the clock frequency non-positive"));
        }
        if !self.phase.is_finite() {
            return Err(Error::param("clock phase must be finite"));
        }
        Ok(())
    }
}

/// Relaxation and dephasing, times in µs (infinite disables a channel).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecoherenceChannels {
    pub t1: f64,
    pub t2: f64,
    /// `1/T2 − 1/(2T1)`, 1/µs.
    pub gamma_phi: f64,
}

impl DecoherenceChannels {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1 > 0.0) || !(t2 > 0.0) {
            return Err(Error::param(format!("coherence times must be positive (T1 {t1}, T2 {t2})")));
        }
        let gamma_phi = 1.0 / t2 - 1.0 / (2.0 * t1);
        if gamma_phi < -1e-15 * (1.0 / t2) {
            return Err(Error::param(format!(
                "negative pure dephasing rate: T2 = {t2} µs exceeds 2·T1 = {} µs",
                2.0 * t1
            )));
        }
        Ok(Self {
            t1,
            t2,
            gamma_phi: gamma_phi.max(0.0),
        })
    }

    pub fn none() -> Self {
        Self {
            t1: f64::INFINITY,
            t2: f64::INFINITY,
            gamma_phi: 0.0,
        }
    }

    /// Both times equal, as in the coherence sweeps.
    pub fn equal(t: f64) -> Result<Self> {
        Self::new(t, t)
    }

    pub fn from_model(model: &TransmonModel) -> Result<Self> {
        Self::new(model.params.t1, model.params.t2)
    }

    /// Collapse operators `√γ1·a` and `√(2γφ)·n̂` on `d` levels, rates in 1/ns.
    pub fn collapse_operators(&self, d: usize) -> Vec<CMat> {
        let mut ops = Vec::new();
        let g1 = units::rate_per_ns(self.t1);
        if g1 > 0.0 {
            let mut a = CMat::zeros(d, d);
            for j in 1..d {
                a[(j - 1, j)] = c((g1 * j as f64).sqrt(), 0.0);
            }
            ops.push(a);
        }
        let gphi = self.gamma_phi * 1e-3;
        if gphi > 0.0 {
            let s = (2.0 * gphi).sqrt();
            ops.push(CMat::from_diagonal(&nalgebra::DVector::from_fn(d, |j, _| {
                c(s * j as f64, 0.0)
            })));
        }
        ops
    }
}

/// An SFQ-composed primitive gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub n_p: u32,
    pub clock: ClockConfig,
    /// Virtual-Z frame angle applied to the gate axis, rad.
    #[serde(default)]
    pub frame_angle: f64,
}

impl GateSpec {
    pub fn new(n_p: u32, clock: ClockConfig) -> Result<Self> {
        if n_p < 1 {
            return Err(Error::param("a gate needs at least one pulse"));
        }
        clock.validate()?;
        Ok(Self {
            n_p,
            clock,
            frame_angle: 0.0,
        })
    }

    pub fn with_frame_angle(mut self, angle: f64) -> Self {
        self.frame_angle = angle;
        self
    }

    /// `n_p·τ_CLK`, ns.
    pub fn duration_ns(&self) -> f64 {
        self.n_p as f64 * self.clock.period_ns()
    }
}

/// Vectorized Lindblad generator for `H` (rad/ns) and collapse operators:
/// `−i(I⊗H − Hᵀ⊗I) + Σ[L̄⊗L − ½I⊗L†L − ½(L†L)ᵀ⊗I]`.
pub fn lindblad_generator(h: &CMat, collapse: &[CMat]) -> CMat {
    let d = h.nrows();
    let id = CMat::identity(d, d);
    let mut gen = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * c(0.0, -1.0);
    for l in collapse {
        let ldl = l.adjoint() * l;
        gen += linalg::kron(&l.conjugate(), l);
        gen -= (linalg::kron(&id, &ldl) + linalg::kron(&ldl.transpose(), &id)) * c(0.5, 0.0);
    }
    gen
}

/// Per-pulse rotation of the two lowest levels, `4π·(C_c/C_Σ)·|⟨0|n̂|1⟩|`.
pub fn kick_angle(model: &TransmonModel) -> f64 {
    2.0 * TWO_PI * model.coupling_ratio() * model.q_op[(0, 1)].abs()
}

/// Coupling capacitance (fF) giving `angle` per pulse under [`kick_angle`].
pub fn coupling_for_kick_angle(model: &TransmonModel, angle: f64) -> f64 {
    let r = angle / (2.0 * TWO_PI * model.q_op[(0, 1)].abs());
    r * model.params.c_q / (1.0 - r)
}

/// `exp(−i·2π·(C_c/C_Σ)·n̂)`: the unitary of one Φ0-area pulse.
pub fn kick_unitary(model: &TransmonModel) -> CMat {
    let theta = TWO_PI * model.coupling_ratio();
    let eig = SymmetricEigen::new(model.q_op.clone());
    let v = linalg::real_to_complex(&eig.eigenvectors);
    let phases = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -theta * l)),
    ));
    &v * phases * v.transpose()
}

fn drift_hamiltonian(model: &TransmonModel) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        model.n_levels(),
        model.energies.iter().map(|&e| c(TWO_PI * e, 0.0)),
    ))
}

/// Lab-frame free evolution `exp(L0·t)` under drift and decoherence.
pub fn free_evolution(model: &TransmonModel, chans: DecoherenceChannels, t_ns: f64) -> Result<Superoperator> {
    if !(t_ns >= 0.0) || !t_ns.is_finite() {
        return Err(Error::param(format!("free evolution time must be finite and ≥ 0, got {t_ns}")));
    }
    let d = model.n_levels();
    let l0 = lindblad_generator(&drift_hamiltonian(model), &chans.collapse_operators(d));
    Ok(Superoperator::from_matrix(d, (&l0 * c(t_ns, 0.0)).exp()))
}

/// One clock cycle as a CPTP map, plus the bookkeeping to report composed
/// gates in the rotating frame.
#[derive(Debug, Clone)]
pub struct CycleMap {
    pub superop: Superoperator,
    /// Actual pulse spacing, ns.
    pub period_ns: f64,
    /// The cycle starts this long before the pulse centre, ns.
    pub pulse_offset_ns: f64,
    /// Frame frequency, GHz.
    pub f01: f64,
    /// Arrival-time shift from the clock phase, ns.
    pub time_shift_ns: f64,
}

impl CycleMap {
    pub fn dim(&self) -> usize {
        self.superop.dim()
    }

    /// `S^n` composed into the rotating frame: `R(t_end)∘S^n∘R(t_start)⁻¹`.
    pub fn gate(&self, n: u32) -> Superoperator {
        self.frame_gate(&self.superop.power(n as u64), n)
    }

    /// Wraps an already-computed `S^n` with the frame rotations.
    pub fn frame_gate(&self, s_n: &Superoperator, n: u32) -> Superoperator {
        let t0 = self.time_shift_ns - self.pulse_offset_ns;
        let t1 = t0 + n as f64 * self.period_ns;
        let d = self.dim();
        frame_rotation(d, self.f01, t1)
            .after(s_n)
            .after(&frame_rotation(d, self.f01, -t0))
    }

    /// Lab-frame map of `n` cycles followed by the frame rotation, for
    /// population-only readouts this is interchangeable with [`gate`].
    pub fn apply_n(&self, rho: &CMat, n: u64) -> CMat {
        apply_n(&self.superop, rho, n)
    }
}

/// `ρ ↦ R(t) ρ R(t)†` with `R(t) = diag(exp(+i·2π·j·f01·t))`.
pub fn frame_rotation(d: usize, f01: f64, t_ns: f64) -> Superoperator {
    let phases: Vec<f64> = (0..d).map(|j| TWO_PI * j as f64 * f01 * t_ns).collect();
    Superoperator::from_unitary(&linalg::diag_phase(&phases))
}

/// Virtual-Z frame change `Z(θ) = diag(exp(i·j·θ))`; conjugating a gate by
/// it rotates the gate's axis azimuth by `θ`.
pub fn virtual_z(d: usize, theta: f64) -> Superoperator {
    let phases: Vec<f64> = (0..d).map(|j| j as f64 * theta).collect();
    Superoperator::from_unitary(&linalg::diag_phase(&phases))
}

/// `Z(θ)∘G∘Z(−θ)`.
pub fn rotate_axis(gate: &Superoperator, theta: f64) -> Superoperator {
    let d = gate.dim();
    virtual_z(d, theta).after(gate).after(&virtual_z(d, -theta))
}

/// Axis azimuth produced by a clock phase at subharmonic `m`, in `[0, 2π)`.
pub fn clock_phase_to_axis(phi_clk: f64, m: u32) -> f64 {
    (m as f64 * phi_clk).rem_euclid(TWO_PI)
}

/// Clock phase that corresponds to delaying the pulse train by `dt_ns`.
pub fn time_shift_to_clock_phase(dt_ns: f64, f_clk: f64) -> f64 {
    TWO_PI * f_clk * dt_ns
}

/// `S^n(ρ)` by repeated squaring.
pub fn apply_n(s: &Superoperator, rho: &CMat, n: u64) -> CMat {
    if n == 0 {
        return rho.clone();
    }
    s.power(n).apply(rho)
}

pub fn build_cycle_propagator(
    model: &TransmonModel,
    shape: PulseShape,
    clock: ClockConfig,
    chans: DecoherenceChannels,
) -> Result<CycleMap> {
    build_cycle_propagator_with_steps(model, shape, clock, chans, DEFAULT_STEPS_PER_SIGMA)
}

/// As [`build_cycle_propagator`] with an explicit integrator resolution for
/// shaped pulses (steps per σ).
pub fn build_cycle_propagator_with_steps(
    model: &TransmonModel,
    shape: PulseShape,
    clock: ClockConfig,
    chans: DecoherenceChannels,
    steps_per_sigma: usize,
) -> Result<CycleMap> {
    shape.validate()?;
    clock.validate()?;
    if steps_per_sigma == 0 {
        return Err(Error::param("integrator needs at least one step per σ"));
    }
    let d = model.n_levels();
    let tau = clock.period_ns();
    let w = shape.half_window_ns();
    if 2.0 * w >= tau {
        return Err(Error::param(format!(
            "pulse window {:.4} ns does not fit in the clock period {tau:.4} ns",
            2.0 * w
        )));
    }
    let h0 = drift_hamiltonian(model);
    let collapse = chans.collapse_operators(d);
    let l0 = lindblad_generator(&h0, &collapse);

    let pulse = match shape {
        PulseShape::Delta => Superoperator::from_unitary(&kick_unitary(model)),
        PulseShape::Gaussian { sigma_ps } => {
            let hk = linalg::real_to_complex(&model.q_op) * c(TWO_PI * model.coupling_ratio(), 0.0);
            let lk = lindblad_generator(&hk, &[]);
            let sigma = sigma_ps * 1e-3;
            let n_steps = ((2.0 * w) / (sigma / steps_per_sigma as f64)).ceil() as usize;
            Superoperator::from_matrix(d, rk4_window(&l0, &lk, &shape, -w, w, n_steps))
        }
    };
    let free = Superoperator::from_matrix(d, (&l0 * c(tau - 2.0 * w, 0.0)).exp());
    let superop = free.after(&pulse);
    superop.check_cptp(1.0)?;
    Ok(CycleMap {
        superop,
        period_ns: tau,
        pulse_offset_ns: w,
        f01: model.f01,
        time_shift_ns: clock.time_shift_ns(),
    })
}

/// Fixed-step RK4 for `dS/dt = (L0 + g(t)·Lk)·S` from `t0` to `t1`.
fn rk4_window(l0: &CMat, lk: &CMat, shape: &PulseShape, t0: f64, t1: f64, n: usize) -> CMat {
    let dim = l0.nrows();
    let h = (t1 - t0) / n as f64;
    let gen = |t: f64| l0 + lk * c(shape.envelope(t), 0.0);
    let mut s = CMat::identity(dim, dim);
    for k in 0..n {
        let t = t0 + k as f64 * h;
        let l_a = gen(t);
        let l_m = gen(t + 0.5 * h);
        let l_b = gen(t + h);
        let k1 = &l_a * &s;
        let k2 = &l_m * (&s + &k1 * c(0.5 * h, 0.0));
        let k3 = &l_m * (&s + &k2 * c(0.5 * h, 0.0));
        let k4 = &l_b * (&s + &k3 * c(h, 0.0));
        s += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
    }
    s
}
