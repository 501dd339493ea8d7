use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A scalar model `y = f(x; p)` with an analytic gradient in `p`.
pub trait FitModel {
    fn n_params(&self) -> usize;
    fn value(&self, x: f64, p: &[f64]) -> f64;
    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct LsqOptions {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Parameters held at their starting value.
    pub fixed: Vec<bool>,
    pub max_iter: usize,
    /// Relative RSS decrease below which the fit is converged.
    pub rss_tol: f64,
    /// Relative step size below which the fit is converged.
    pub step_tol: f64,
}

impl LsqOptions {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
            fixed: vec![false; n],
            max_iter: 1000,
            rss_tol: 1e-15,
            step_tol: 1e-13,
        }
    }

    pub fn bound(mut self, i: usize, lo: f64, hi: f64) -> Self {
        self.lower[i] = lo;
        self.upper[i] = hi;
        self
    }

    pub fn fix(mut self, i: usize) -> Self {
        self.fixed[i] = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct LsqFit {
    pub params: Vec<f64>,
    pub rss: f64,
    /// `(JᵀJ)⁻¹` over the free parameters, expanded to full size with zeros
    /// for fixed ones. Multiply by the noise variance for the covariance.
    pub inv_hessian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LsqFit {
    /// Parameter standard deviations for a given noise variance.
    pub fn std_errors(&self, variance: f64) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| (self.inv_hessian[(i, i)] * variance).max(0.0).sqrt())
            .collect()
    }
}

fn residuals<M: FitModel>(model: &M, xs: &[f64], ys: &[f64], p: &[f64]) -> (DVector<f64>, f64) {
    let r = DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| y - model.value(x, p)));
    let rss = r.norm_squared();
    (r, rss)
}

fn jacobian<M: FitModel>(model: &M, xs: &[f64], p: &[f64], free: &[usize]) -> DMatrix<f64> {
    let mut grad = vec![0.0; p.len()];
    let mut j = DMatrix::zeros(xs.len(), free.len());
    for (row, &x) in xs.iter().enumerate() {
        model.gradient(x, p, &mut grad);
        for (col, &k) in free.iter().enumerate() {
            j[(row, col)] = grad[k];
        }
    }
    j
}

/// Bounded Levenberg–Marquardt with Marquardt diagonal scaling. Steps that
/// leave the box are projected back onto it.
pub fn levenberg_marquardt<M: FitModel>(
    model: &M,
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    opts: &LsqOptions,
) -> Result<LsqFit> {
    let n = model.n_params();
    assert_eq!(p0.len(), n);
    assert_eq!(xs.len(), ys.len());
    let free: Vec<usize> = (0..n).filter(|&i| !opts.fixed[i]).collect();
    if xs.len() < free.len() {
        return Err(Error::Fit(format!(
            "{} points cannot determine {} parameters",
            xs.len(),
            free.len()
        )));
    }
    let clamp = |p: &mut [f64]| {
        for i in 0..n {
            p[i] = p[i].clamp(opts.lower[i], opts.upper[i]);
        }
    };

    let mut p = p0.to_vec();
    clamp(&mut p);
    let (mut r, mut rss) = residuals(model, xs, ys, &p);
    if !rss.is_finite() {
        return Err(Error::Fit("non-finite residuals at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = free.is_empty();
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let j = jacobian(model, xs, &p, &free);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let max_diag = (0..free.len()).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        let floor = (1e-12 * max_diag).max(1e-300);
        let diag: Vec<f64> = (0..free.len()).map(|i| jtj[(i, i)].max(floor)).collect();

        let mut improved = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for i in 0..free.len() {
                a[(i, i)] += lambda * diag[i];
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&g);
            let mut trial = p.clone();
            for (col, &k) in free.iter().enumerate() {
                trial[k] += delta[col];
            }
            clamp(&mut trial);
            let (r_new, rss_new) = residuals(model, xs, ys, &trial);
            if rss_new.is_finite() && rss_new <= rss {
                let step: f64 = free
                    .iter()
                    .map(|&k| ((trial[k] - p[k]) / p[k].abs().max(1e-12)).abs())
                    .fold(0.0, f64::max);
                let drop = (rss - rss_new) / rss.max(f64::MIN_POSITIVE);
                p = trial;
                r = r_new;
                rss = rss_new;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if drop < opts.rss_tol || step < opts.step_tol || rss == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // No downhill step at any damping: a (possibly constrained) minimum.
            converged = true;
        }
    }

    let j = jacobian(model, xs, &p, &free);
    let jtj = j.transpose() * &j;
    let inv = jtj
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::from_element(free.len(), free.len(), f64::INFINITY));
    let mut inv_hessian = DMatrix::zeros(n, n);
    for (a, &ka) in free.iter().enumerate() {
        for (b, &kb) in free.iter().enumerate() {
            inv_hessian[(ka, kb)] = inv[(a, b)];
        }
    }
    Ok(LsqFit {
        params: p,
        rss,
        inv_hessian,
        iterations,
        converged,
    })
}
