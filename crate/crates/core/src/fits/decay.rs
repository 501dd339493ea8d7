use serde::Serialize;

use super::linear_regression;
use super::lsq::{levenberg_marquardt, FitModel, LsqOptions};
use crate::error::{Error, Result};

/// `A·exp(−t/τ) + B` with parameters `[A, τ, B]`.
struct ExpDecay;

impl FitModel for ExpDecay {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        p[0] * (-t / p[1]).exp() + p[2]
    }
    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let e = (-t / p[1]).exp();
        g[0] = e;
        g[1] = p[0] * e * t / (p[1] * p[1]);
        g[2] = 1.0;
    }
}

/// `A·α^m + B` with parameters `[A, α, B]`.
struct PowerDecay;

impl FitModel for PowerDecay {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, m: f64, p: &[f64]) -> f64 {
        p[0] * p[1].powf(m) + p[2]
    }
    fn gradient(&self, m: f64, p: &[f64], g: &mut [f64]) {
        g[0] = p[1].powf(m);
        g[1] = if m == 0.0 { 0.0 } else { p[0] * m * p[1].powf(m - 1.0) };
        g[2] = 1.0;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct T1Fit {
    pub t1: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub t1_std: f64,
    pub rss: f64,
}

fn is_flat(ys: &[f64]) -> bool {
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &y| (l.min(y), h.max(y)));
    hi - lo <= 1e-12 * hi.abs().max(1.0)
}

/// Slope of `ln|y − y_last|` over the points on the leading side of the tail.
fn log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let last = *ys.last()?;
    let amp = ys[0] - last;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| (y - last) * amp.signum() > 1e-3 * amp.abs())
        .map(|(&x, &y)| (x, ((y - last) * amp.signum()).ln()))
        .unzip();
    linear_regression(&lx, &ly).map(|(m, _)| m)
}

/// Fits `A·exp(−t/T1) + B` to a relaxation curve. Times in µs.
pub fn fit_t1(times: &[f64], pops: &[f64]) -> Result<T1Fit> {
    if times.len() < 5 || times.len() != pops.len() {
        return Err(Error::Fit("T1 fit needs at least 5 matched points".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("T1 fit needs strictly ascending times".into()));
    }
    if is_flat(pops) {
        return Err(Error::Fit("degenerate T1 fit: constant data".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let slope = log_slope(times, pops).unwrap_or(-1.0 / span);
    let tau0 = if slope < 0.0 { -1.0 / slope } else { span };
    let b0 = *pops.last().unwrap();
    let a0 = (pops[0] - b0) * (times[0] / tau0).exp();
    let opts = LsqOptions::unbounded(3).bound(1, 1e-9 * span, f64::INFINITY);
    let fit = levenberg_marquardt(&ExpDecay, times, pops, &[a0, tau0, b0], &opts)?;
    let t1 = fit.params[1];
    if !(t1 > 0.0) || !t1.is_finite() {
        return Err(Error::Fit(format!("non-positive fitted T1 ({t1})")));
    }
    let dof = (times.len() - 3).max(1) as f64;
    let std = fit.std_errors(fit.rss / dof);
    Ok(T1Fit {
        t1,
        amplitude: fit.params[0],
        offset: fit.params[2],
        t1_std: std[1],
        rss: fit.rss,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpDecayFit {
    pub amplitude: f64,
    pub alpha: f64,
    pub offset: f64,
    pub alpha_std: f64,
    pub rss: f64,
}

/// Fits `A·α^m + B` over sequence lengths `m`, with `α ∈ (0, 1]`.
/// Flat data (perfect gates) pins `α = 1`.
pub fn fit_exponential_decay(lengths: &[f64], survival: &[f64]) -> Result<ExpDecayFit> {
    if lengths.len() < 3 || lengths.len() != survival.len() {
        return Err(Error::Fit("decay fit needs at least 3 matched points".into()));
    }
    if is_flat(survival) {
        let mean = survival.iter().sum::<f64>() / survival.len() as f64;
        return Ok(ExpDecayFit {
            amplitude: 0.0,
            alpha: 1.0,
            offset: mean,
            alpha_std: 0.0,
            rss: 0.0,
        });
    }
    let slope = log_slope(lengths, survival).unwrap_or(-1e-3);
    let alpha0 = slope.exp().clamp(1e-6, 1.0 - 1e-12);
    let b0 = *survival.last().unwrap();
    let a0 = (survival[0] - b0) / alpha0.powf(lengths[0]);
    let opts = LsqOptions::unbounded(3).bound(1, 1e-9, 1.0);
    let fit = levenberg_marquardt(&PowerDecay, lengths, survival, &[a0, alpha0, b0], &opts)?;
    let dof = (lengths.len() - 3).max(1) as f64;
    let std = fit.std_errors(fit.rss / dof);
    Ok(ExpDecayFit {
        amplitude: fit.params[0],
        alpha: fit.params[1],
        offset: fit.params[2],
        alpha_std: std[1],
        rss: fit.rss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn recovers_noiseless_t1() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 2.5).collect();
        let p: Vec<f64> = t.iter().map(|t| 0.97 * (-t / 31.0).exp() + 0.02).collect();
        let fit = fit_t1(&t, &p).unwrap();
        assert!((fit.t1 - 31.0).abs() < 1e-6, "{}", fit.t1);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(fit_t1(&t, &[0.5; 10]).is_err());
    }

    #[test]
    fn noisy_t1_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 3.0 * 31.0 / 49.0).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|t| (-t / 31.0).exp() + noise.sample(&mut rng))
            .collect();
        let fit = fit_t1(&t, &p).unwrap();
        assert!((fit.t1 / 31.0 - 1.0).abs() < 0.05, "{}", fit.t1);
    }

    #[test]
    fn rb_decay_recovers_alpha() {
        let m: Vec<f64> = [1, 2, 4, 8, 16, 32, 64, 128, 256].iter().map(|&x| x as f64).collect();
        let p: Vec<f64> = m.iter().map(|m| 0.48 * 0.995f64.powf(*m) + 0.5).collect();
        let fit = fit_exponential_decay(&m, &p).unwrap();
        assert!((fit.alpha - 0.995).abs() < 1e-9);
        let flat = fit_exponential_decay(&m, &[1.0; 9]).unwrap();
        assert_eq!(flat.alpha, 1.0);
    }
}
