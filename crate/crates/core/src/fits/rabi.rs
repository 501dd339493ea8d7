use std::f64::consts::PI;

use serde::Serialize;

use super::lsq::{levenberg_marquardt, FitModel, LsqOptions};
use crate::error::{Error, Result};

/// `A·cos(2π·Ω·t + φ)·exp(−κ·t) + B`, t in ns, Ω in MHz, κ in 1/ns.
/// Parameters `[A, Ω, φ, κ, B]`.
struct DampedCosine;

const MHZ_NS: f64 = 1e-3;

impl FitModel for DampedCosine {
    fn n_params(&self) -> usize {
        5
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (2.0 * PI * p[1] * MHZ_NS * t + p[2]).cos() * (-p[3] * t).exp() + p[4]
    }
    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let arg = 2.0 * PI * p[1] * MHZ_NS * t + p[2];
        let e = (-p[3] * t).exp();
        let (s, c) = arg.sin_cos();
        g[0] = c * e;
        g[1] = -p[0] * s * e * 2.0 * PI * MHZ_NS * t;
        g[2] = -p[0] * s * e;
        g[3] = -p[0] * c * e * t;
        g[4] = 1.0;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RabiFit {
    /// Rabi frequency in MHz.
    pub omega_r: f64,
    /// Envelope decay time in µs (infinite for an undamped signal).
    pub decay: f64,
    pub phase: f64,
    pub offset: f64,
    pub amplitude: f64,
    pub omega_std: f64,
}

/// Amplitude of the demeaned signal's Fourier component at `f` (MHz).
fn spectral_amplitude(t: &[f64], y: &[f64], f: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (&t, &y) in t.iter().zip(y) {
        let (s, c) = (2.0 * PI * f * MHZ_NS * t).sin_cos();
        re += y * c;
        im += y * s;
    }
    (re * re + im * im).sqrt()
}

/// Fits a damped cosine to a Rabi oscillation. Times in ns.
pub fn fit_rabi(times: &[f64], pops: &[f64]) -> Result<RabiFit> {
    let n = times.len();
    if n < 8 || n != pops.len() {
        return Err(Error::Fit("Rabi fit needs at least 8 matched points".into()));
    }
    let mean = pops.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = pops.iter().map(|p| p - mean).collect();
    let span = times[n - 1] - times[0];
    if !(span > 0.0) {
        return Err(Error::Fit("Rabi fit needs a positive time span".into()));
    }
    // Frequency grid in MHz: from one period over the span up to the mean
    // sampling Nyquist limit, oversampled eightfold.
    let df = 1.0 / (span * MHZ_NS) / 8.0;
    let f_max = 0.5 * (n - 1) as f64 / (span * MHZ_NS);
    let grid: Vec<f64> = (8..).map(|k| k as f64 * df).take_while(|&f| f <= f_max).collect();
    if grid.is_empty() {
        return Err(Error::Fit("Rabi fit: time span too short for a spectrum".into()));
    }
    let spectrum: Vec<f64> = grid.iter().map(|&f| spectral_amplitude(times, &y, f)).collect();
    let (k_peak, &peak) = spectrum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let mut sorted = spectrum.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let scale = pops.iter().map(|p| p.abs()).fold(0.0, f64::max).max(1e-300);
    if !(peak > 4.0 * median) || peak < 1e-9 * scale * n as f64 {
        return Err(Error::Fit("Rabi fit: no spectral peak above the noise floor".into()));
    }
    // Golden-section refinement of the peak between its grid neighbours.
    let (mut a, mut b) = (
        grid[k_peak.saturating_sub(1)],
        grid[(k_peak + 1).min(grid.len() - 1)],
    );
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if spectral_amplitude(times, &y, c) > spectral_amplitude(times, &y, d) {
            b = d;
        } else {
            a = c;
        }
    }
    let f0 = 0.5 * (a + b);

    // Linear solve for the quadrature amplitudes at f0.
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, &y) in times.iter().zip(&y) {
        let (s, c) = (2.0 * PI * f0 * MHZ_NS * t).sin_cos();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += y * c;
        sys += y * s;
    }
    let det = scc * sss - scs * scs;
    let (ca, sb) = if det.abs() > 1e-12 * scc * sss {
        ((syc * sss - sys * scs) / det, (sys * scc - syc * scs) / det)
    } else {
        (2.0 * syc / n as f64, 2.0 * sys / n as f64)
    };
    // y ≈ ca·cos + sb·sin = A·cos(arg + φ) with A cos φ = ca, −A sin φ = sb.
    let a0 = (ca * ca + sb * sb).sqrt();
    let phi0 = (-sb).atan2(ca);

    let opts = LsqOptions::unbounded(5)
        .bound(0, 0.0, f64::INFINITY)
        .bound(1, 0.0, f64::INFINITY)
        .bound(3, 0.0, f64::INFINITY);
    let fit = levenberg_marquardt(&DampedCosine, times, pops, &[a0, f0, phi0, 0.0, mean], &opts)?;
    let p = &fit.params;
    let dof = (n - 5).max(1) as f64;
    let std = fit.std_errors(fit.rss / dof);
    let phase = (p[2] + PI).rem_euclid(2.0 * PI) - PI;
    Ok(RabiFit {
        omega_r: p[1],
        decay: if p[3] > 0.0 { 1.0 / (p[3] * 1e3) } else { f64::INFINITY },
        phase,
        offset: p[4],
        amplitude: p[0],
        omega_std: std[1],
    })
}
