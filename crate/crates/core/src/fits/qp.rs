use serde::Serialize;

use super::lsq::{levenberg_marquardt, FitModel, LsqFit, LsqOptions};
use super::{linear_regression, second_difference_variance};
use crate::error::{Error, Result};

pub const N_QP_MAX: f64 = 50.0;
/// Floor on the noise variance so noiseless data keeps finite χ².
const VARIANCE_FLOOR: f64 = 1e-20;
/// Reduced-χ² margin the double model must win by.
const CHI2_MARGIN: f64 = 1e-6;

/// `exp(n·(e^{−t/T_qp} − 1) − t/T_R)`.
pub fn qp_model(t: f64, n_qp: f64, t_qp: f64, t_r: f64) -> f64 {
    (n_qp * ((-t / t_qp).exp() - 1.0) - t / t_r).exp()
}

pub fn single_exp_model(t: f64, tau: f64) -> f64 {
    (-t / tau).exp()
}

struct Double;

impl FitModel for Double {
    fn n_params(&self) -> usize {
        3
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        qp_model(t, p[0], p[1], p[2])
    }
    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        let e = (-t / p[1]).exp();
        let f = qp_model(t, p[0], p[1], p[2]);
        g[0] = f * (e - 1.0);
        g[1] = f * p[0] * e * t / (p[1] * p[1]);
        g[2] = f * t / (p[2] * p[2]);
    }
}

struct Single;

impl FitModel for Single {
    fn n_params(&self) -> usize {
        1
    }
    fn value(&self, t: f64, p: &[f64]) -> f64 {
        single_exp_model(t, p[0])
    }
    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) {
        g[0] = single_exp_model(t, p[0]) * t / (p[0] * p[0]);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QpFit {
    pub n_qp: f64,
    /// µs
    pub t_qp: f64,
    /// µs
    pub t_r: f64,
    /// Single-exponential decay time, µs.
    pub t_single: f64,
    pub chi2_red_double: f64,
    pub chi2_red_single: f64,
    pub rss_double: f64,
    pub rss_single: f64,
    /// Standard errors of `[n_qp, t_qp, t_r]`.
    pub std_double: [f64; 3],
    pub std_single: f64,
    pub noise_variance: f64,
    pub valid: bool,
    /// The interval `n_qp ± 1.96σ` reaches zero.
    pub unstable: bool,
}

fn check_input(times: &[f64], pops: &[f64]) -> Result<f64> {
    if times.len() < 8 || times.len() != pops.len() {
        return Err(Error::Fit("quasiparticle fit needs at least 8 matched points".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return Err(Error::Fit("quasiparticle fit needs ascending non-negative times".into()));
    }
    Ok(times[times.len() - 1])
}

fn double_opts(span: f64) -> LsqOptions {
    LsqOptions::unbounded(3)
        .bound(0, 0.0, N_QP_MAX)
        .bound(1, 1e-6 * span, f64::INFINITY)
        .bound(2, 1e-6 * span, f64::INFINITY)
}

fn fit_single(times: &[f64], pops: &[f64], span: f64) -> Result<LsqFit> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(pops)
        .filter(|(_, &p)| p > 1e-6)
        .map(|(&t, &p)| (t, p.ln()))
        .unzip();
    let tau0 = match linear_regression(&lx, &ly) {
        Some((m, _)) if m < 0.0 => -1.0 / m,
        _ => span,
    };
    let opts = LsqOptions::unbounded(1).bound(0, 1e-6 * span, f64::INFINITY);
    levenberg_marquardt(&Single, times, pops, &[tau0], &opts)
}

/// Double-exponential fit with `n_qp` held fixed. At `n_qp = 0` the model
/// is a single exponential in `T_R`, and `T_qp` is held at its start too.
/// Returns `(t_qp, t_r, rss)`.
pub fn fit_double_with_fixed_n(times: &[f64], pops: &[f64], n_qp: f64) -> Result<(f64, f64, f64)> {
    let span = check_input(times, pops)?;
    let single = fit_single(times, pops, span)?;
    let mut opts = double_opts(span).fix(0);
    if n_qp == 0.0 {
        opts = opts.fix(1);
    }
    let fit = levenberg_marquardt(&Double, times, pops, &[n_qp, span / 5.0, single.params[0]], &opts)?;
    Ok((fit.params[1], fit.params[2], fit.rss))
}

/// Fits the quasiparticle double-exponential and a single exponential and
/// compares their reduced χ², estimating the noise from residual scatter.
pub fn fit_qp(times: &[f64], pops: &[f64]) -> Result<QpFit> {
    fit_qp_with_variance(times, pops, None)
}

pub fn fit_qp_with_variance(times: &[f64], pops: &[f64], variance: Option<f64>) -> Result<QpFit> {
    let span = check_input(times, pops)?;
    let single = fit_single(times, pops, span)?;
    let ts = single.params[0];

    // Five perturbed starts plus one adjacent to the nested single fit, so the
    // double model's RSS never exceeds the single model's.
    let starts = [
        [1e-3, span / 5.0, ts],
        [0.5, span / 10.0, 1.2 * ts],
        [1.0, span / 5.0, 1.5 * ts],
        [2.0, span / 3.0, 2.0 * ts],
        [1.5, span / 20.0, 1.3 * ts],
        [4.0, span / 8.0, 3.0 * ts],
    ];
    let opts = double_opts(span);
    let mut best: Option<LsqFit> = None;
    for s in &starts {
        if let Ok(fit) = levenberg_marquardt(&Double, times, pops, s, &opts) {
            if best.as_ref().is_none_or(|b| fit.rss < b.rss) {
                best = Some(fit);
            }
        }
    }
    // The nested point (n = 0, T_R = T_single) is always admissible.
    let nested = LsqFit {
        params: vec![0.0, span / 5.0, ts],
        rss: single.rss,
        inv_hessian: nalgebra::DMatrix::from_element(3, 3, f64::INFINITY),
        iterations: 0,
        converged: single.converged,
    };
    let double = match best {
        Some(b) if b.rss <= single.rss => b,
        _ => nested,
    };
    if !single.converged || !double.converged {
        return Err(Error::Fit(format!(
            "quasiparticle fit did not converge: single T={:.6} (rss {:.3e}), double n={:.6} T_qp={:.6} T_R={:.6} (rss {:.3e})",
            ts, single.rss, double.params[0], double.params[1], double.params[2], double.rss
        )));
    }

    let sigma2 = variance
        .unwrap_or_else(|| {
            let resid: Vec<f64> = times
                .iter()
                .zip(pops)
                .map(|(&t, &p)| p - Double.value(t, &double.params))
                .collect();
            second_difference_variance(&resid)
        })
        .max(VARIANCE_FLOOR);
    let n = times.len() as f64;
    let chi2_double = double.rss / ((n - 3.0) * sigma2);
    let chi2_single = single.rss / ((n - 1.0) * sigma2);
    let sd = double.std_errors(sigma2);
    let n_qp = double.params[0];
    Ok(QpFit {
        n_qp,
        t_qp: double.params[1],
        t_r: double.params[2],
        t_single: ts,
        chi2_red_double: chi2_double,
        chi2_red_single: chi2_single,
        rss_double: double.rss,
        rss_single: single.rss,
        std_double: [sd[0], sd[1], sd[2]],
        std_single: single.std_errors(sigma2)[0],
        noise_variance: sigma2,
        valid: chi2_double < chi2_single - CHI2_MARGIN,
        unstable: !(n_qp - 1.96 * sd[0] > 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid() -> Vec<f64> {
        (0..60).map(|i| i as f64 * 2.5).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let t = grid();
        let p: Vec<f64> = t.iter().map(|&t| qp_model(t, 1.5, 20.0, 60.0)).collect();
        let fit = fit_qp(&t, &p).unwrap();
        assert!((fit.n_qp / 1.5 - 1.0).abs() < 0.01, "{fit:?}");
        assert!((fit.t_qp / 20.0 - 1.0).abs() < 0.01, "{fit:?}");
        assert!((fit.t_r / 60.0 - 1.0).abs() < 0.01, "{fit:?}");
        assert!(fit.valid && !fit.unstable);
    }

    #[test]
    fn zero_quasiparticles_is_not_valid() {
        let t = grid();
        let p: Vec<f64> = t.iter().map(|&t| (-t / 45.0).exp()).collect();
        let fit = fit_qp(&t, &p).unwrap();
        assert!(!fit.valid, "{fit:?}");
        assert!((fit.t_single - 45.0).abs() < 1e-6);
    }

    #[test]
    fn nested_model_matches_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let t = grid();
        let p: Vec<f64> = t.iter().map(|&t| (-t / 45.0).exp() + noise.sample(&mut rng)).collect();
        let fit = fit_qp(&t, &p).unwrap();
        let (_, t_r, rss) = fit_double_with_fixed_n(&t, &p, 0.0).unwrap();
        assert!((t_r - fit.t_single).abs() < 1e-8 * fit.t_single);
        assert!((rss - fit.rss_single).abs() < 1e-12);
        assert!(fit.rss_double <= fit.rss_single);
    }

    #[test]
    fn small_n_with_noise_is_unstable() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let t = grid();
        let p: Vec<f64> = t
            .iter()
            .map(|&t| qp_model(t, 0.02, 20.0, 60.0) + noise.sample(&mut rng))
            .collect();
        let fit = fit_qp(&t, &p).unwrap();
        assert!(fit.unstable, "{fit:?}");
    }
}
