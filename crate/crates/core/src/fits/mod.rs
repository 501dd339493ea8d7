//! Least-squares fitters for decay curves: exponential decay (T1 and RB),
//! damped Rabi oscillations, and the quasiparticle double-exponential model.

mod decay;
mod lsq;
mod qp;
mod rabi;

pub use decay::{fit_exponential_decay, fit_t1, ExpDecayFit, T1Fit};
pub use lsq::{levenberg_marquardt, FitModel, LsqFit, LsqOptions};
pub use qp::{
    fit_double_with_fixed_n, fit_qp, fit_qp_with_variance, qp_model, single_exp_model, QpFit,
};
pub use rabi::{fit_rabi, RabiFit};

/// Noise variance from second differences, `Σ(y[i+1] − 2y[i] + y[i−1])² / (6(N−2))`.
/// Smooth trends contribute only at second order in the sample spacing.
pub fn second_difference_variance(ys: &[f64]) -> f64 {
    if ys.len() < 3 {
        return 0.0;
    }
    let ss: f64 = ys
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).powi(2))
        .sum();
    ss / (6.0 * (ys.len() - 2) as f64)
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn linear_regression(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_difference_variance_of_line_is_zero() {
        let ys: Vec<f64> = (0..20).map(|i| 0.5 * i as f64 + 1.0).collect();
        assert!(second_difference_variance(&ys) < 1e-28);
    }

    #[test]
    fn regression_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (m, b) = linear_regression(&xs, &ys).unwrap();
        assert!((m - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        assert!(linear_regression(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }
}
