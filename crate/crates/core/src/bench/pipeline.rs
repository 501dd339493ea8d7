use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{generate_interleaved, CliffordTable, Composition};
use super::engine::GateEngine;
use crate::channel::Superoperator;
use crate::error::{Error, Result};
use crate::fits::{fit_exponential_decay, ExpDecayFit};
use crate::linalg::{self, CVec};
use crate::metrics::{average_fidelity, GateTarget};

/// Dimension of the benchmarked (computational) space.
pub const D: f64 = 2.0;

pub const DEFAULT_LENGTHS: [usize; 8] = [2, 4, 8, 16, 32, 64, 128, 256];
pub const DEFAULT_RANDOMIZATIONS: usize = 30;
pub const DEFAULT_BOOTSTRAP: usize = 200;

// Stream tags keep the random streams of different uses apart.
const TAG_REFERENCE: u64 = 0;
const TAG_INTERLEAVED: u64 = 1;
const TAG_BOOTSTRAP: u64 = 2;
const TAG_SHOTS: u64 = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RbConfig {
    pub lengths: Vec<usize>,
    /// Randomizations per length.
    pub k: usize,
    pub seed: u64,
    /// Binomial readout with this many shots; exact populations when absent.
    #[serde(default)]
    pub shots: Option<u64>,
    #[serde(default)]
    pub composition: Composition,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: usize,
}

fn default_bootstrap() -> usize {
    DEFAULT_BOOTSTRAP
}

impl RbConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            lengths: DEFAULT_LENGTHS.to_vec(),
            k: DEFAULT_RANDOMIZATIONS,
            seed,
            shots: None,
            composition: Composition::Minimal,
            bootstrap: DEFAULT_BOOTSTRAP,
        }
    }

    pub fn with_lengths(mut self, lengths: Vec<usize>) -> Self {
        self.lengths = lengths;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_composition(mut self, comp: Composition) -> Self {
        self.composition = comp;
        self
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Self {
        self.shots = shots;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.lengths.len() < 3 {
            return Err(Error::param("RB needs at least 3 sequence lengths"));
        }
        if self.lengths.iter().any(|&m| m < 1) {
            return Err(Error::param("sequence lengths must be at least 1"));
        }
        if self.k < 1 {
            return Err(Error::param("RB needs at least one randomization"));
        }
        if self.shots == Some(0) {
            return Err(Error::param("shot count must be positive"));
        }
        Ok(())
    }
}

fn task_rng(seed: u64, tag: u64, task: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) | task);
    rng
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    #[serde(rename = "A")]
    pub amplitude: f64,
    #[serde(rename = "B")]
    pub offset: f64,
    pub n_tilde: f64,
    pub alpha: f64,
}

impl From<&ExpDecayFit> for DecayFit {
    fn from(f: &ExpDecayFit) -> Self {
        Self {
            amplitude: f.amplitude,
            offset: f.offset,
            n_tilde: -1.0 / f.alpha.ln(),
            alpha: f.alpha,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RbResult {
    pub lengths: Vec<usize>,
    pub mean_p0: Vec<f64>,
    pub stderr: Vec<f64>,
    pub fit: DecayFit,
    pub f_cliff: f64,
    pub alpha_std: f64,
    pub f_cliff_std: f64,
    /// Per-X/2 error, set for the two-X/2 composition.
    pub x2_error: Option<f64>,
}

/// Survival and computational-block purity per length and randomization.
#[derive(Debug, Clone)]
struct RawRuns {
    p0: Vec<Vec<f64>>,
    purity: Vec<Vec<f64>>,
}

fn simulate(
    table: &CliffordTable,
    channels: &[Superoperator],
    interleaved: Option<(usize, &Superoperator)>,
    cfg: &RbConfig,
    tag: u64,
) -> RawRuns {
    let d = channels[0].dim();
    let tasks: Vec<(usize, usize)> = (0..cfg.lengths.len())
        .flat_map(|l| (0..cfg.k).map(move |r| (l, r)))
        .collect();
    let results: Vec<(f64, f64)> = tasks
        .par_iter()
        .map(|&(l, r)| {
            let task = (l * cfg.k + r) as u64;
            let mut rng = task_rng(cfg.seed, tag, task);
            let seq = generate_interleaved(table, cfg.lengths[l], interleaved.map(|x| x.0), &mut rng);
            let mut v: CVec = linalg::vectorize(&linalg::basis_dm(d, 0));
            for &c in &seq.cliffords {
                v = channels[c].apply_vec(&v);
                if let Some((_, map)) = interleaved {
                    v = map.apply_vec(&v);
                }
            }
            v = channels[seq.recovery].apply_vec(&v);
            let mut p0 = v[0].re.clamp(0.0, 1.0);
            if let Some(shots) = cfg.shots {
                let mut srng = task_rng(cfg.seed, TAG_SHOTS + tag * 16, task);
                let hits = Binomial::new(shots, p0).expect("probability in [0, 1]").sample(&mut srng);
                p0 = hits as f64 / shots as f64;
            }
            let mut purity = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    purity += v[i + j * d].norm_sqr();
                }
            }
            (p0, purity)
        })
        .collect();
    let mut p0 = vec![Vec::with_capacity(cfg.k); cfg.lengths.len()];
    let mut purity = vec![Vec::with_capacity(cfg.k); cfg.lengths.len()];
    for (&(l, _), &(p, q)) in tasks.iter().zip(&results) {
        p0[l].push(p);
        purity[l].push(q);
    }
    RawRuns { p0, purity }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fit_or_report(lengths: &[usize], means: &[f64], what: &str) -> Result<ExpDecayFit> {
    let m: Vec<f64> = lengths.iter().map(|&x| x as f64).collect();
    fit_exponential_decay(&m, means).map_err(|e| {
        let raw: Vec<String> = lengths
            .iter()
            .zip(means)
            .map(|(l, p)| format!("({l}, {p:.6})"))
            .collect();
        Error::Fit(format!("{what} decay fit failed ({e}); raw points: {}", raw.join(" ")))
    })
}

/// Standard deviation of the fitted decay constant over bootstrap resamples
/// of the randomizations.
fn bootstrap_alpha(lengths: &[usize], runs: &[Vec<f64>], cfg: &RbConfig, tag: u64) -> f64 {
    if cfg.bootstrap < 2 || cfg.k < 2 {
        return 0.0;
    }
    let alphas: Vec<f64> = (0..cfg.bootstrap)
        .into_par_iter()
        .filter_map(|b| {
            let mut rng = task_rng(cfg.seed, TAG_BOOTSTRAP + tag * 16, b as u64);
            let means: Vec<f64> = runs
                .iter()
                .map(|xs| (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).sum::<f64>() / xs.len() as f64)
                .collect();
            fit_or_report(lengths, &means, "bootstrap").ok().map(|f| f.alpha)
        })
        .collect();
    mean_stderr(&alphas).1 * (alphas.len() as f64).sqrt()
}

fn summarize(runs: &[Vec<f64>], cfg: &RbConfig, tag: u64, what: &str) -> Result<(Vec<f64>, Vec<f64>, ExpDecayFit, f64)> {
    let (means, errs): (Vec<f64>, Vec<f64>) = runs.iter().map(|xs| mean_stderr(xs)).unzip();
    let fit = fit_or_report(&cfg.lengths, &means, what)?;
    let alpha_std = bootstrap_alpha(&cfg.lengths, runs, cfg, tag);
    Ok((means, errs, fit, alpha_std))
}

fn rb_result(runs: &RawRuns, cfg: &RbConfig, tag: u64) -> Result<RbResult> {
    let (mean_p0, stderr, fit, alpha_std) = summarize(&runs.p0, cfg, tag, "survival")?;
    let f_cliff = (1.0 + fit.alpha * (D - 1.0)) / D;
    let x2_error = (cfg.composition == Composition::U3).then(|| (1.0 - f_cliff) / 2.0);
    Ok(RbResult {
        lengths: cfg.lengths.clone(),
        mean_p0,
        stderr,
        fit: DecayFit::from(&fit),
        f_cliff,
        alpha_std,
        f_cliff_std: alpha_std * (D - 1.0) / D,
        x2_error,
    })
}

pub fn run_rb<E: GateEngine>(engine: &E, cfg: &RbConfig) -> Result<RbResult> {
    cfg.validate()?;
    let table = CliffordTable::new();
    let channels = engine.clifford_channels(&table, cfg.composition);
    let runs = simulate(&table, &channels, None, cfg, TAG_REFERENCE);
    rb_result(&runs, cfg, TAG_REFERENCE)
}

/// RB with each Clifford built from two X/2 pulses and virtual Z; reports
/// the per-X/2 error as half the Clifford error.
pub fn run_u3rb<E: GateEngine>(engine: &E, cfg: &RbConfig) -> Result<RbResult> {
    let cfg = cfg.clone().with_composition(Composition::U3);
    run_rb(engine, &cfg)
}

/// The gate interleaved in IRB: its ideal Clifford and its noisy map.
#[derive(Debug, Clone)]
pub struct InterleavedGate {
    pub clifford: usize,
    pub map: Superoperator,
}

#[derive(Debug, Clone, Serialize)]
pub struct IrbResult {
    pub reference: RbResult,
    pub interleaved: RbResult,
    pub f_gate: f64,
    pub f_gate_std: f64,
    /// `α_int` exceeds `α_ref` by more than three combined standard errors.
    pub unphysical: bool,
}

pub fn run_irb<E: GateEngine>(engine: &E, target: &InterleavedGate, cfg: &RbConfig) -> Result<IrbResult> {
    cfg.validate()?;
    let table = CliffordTable::new();
    if target.clifford >= table.len() {
        return Err(Error::param("interleaved gate must be a Clifford index"));
    }
    if target.map.dim() != engine.dim() {
        return Err(Error::param("interleaved gate dimension does not match the engine"));
    }
    let channels = engine.clifford_channels(&table, cfg.composition);
    let reference = rb_result(&simulate(&table, &channels, None, cfg, TAG_REFERENCE), cfg, TAG_REFERENCE)?;
    let runs = simulate(&table, &channels, Some((target.clifford, &target.map)), cfg, TAG_INTERLEAVED);
    let interleaved = rb_result(&runs, cfg, TAG_INTERLEAVED)?;
    let (ar, ai) = (reference.fit.alpha, interleaved.fit.alpha);
    let ratio = ai / ar;
    let f_gate = (1.0 + (D - 1.0) * ratio) / D;
    let rel = ((interleaved.alpha_std / ai).powi(2) + (reference.alpha_std / ar).powi(2)).sqrt();
    let f_gate_std = (D - 1.0) / D * ratio * rel;
    let combined = (interleaved.alpha_std.powi(2) + reference.alpha_std.powi(2)).sqrt();
    Ok(IrbResult {
        unphysical: ai > ar + 3.0 * combined.max(1e-12),
        reference,
        interleaved,
        f_gate,
        f_gate_std,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PrbResult {
    pub rb: RbResult,
    pub mean_purity: Vec<f64>,
    pub purity_stderr: Vec<f64>,
    pub purity_fit: DecayFit,
    pub gamma: f64,
    /// Incoherent error per Clifford, `((D−1)/D)·(1 − √γ)`.
    pub eps_prb: f64,
    pub eps_std: f64,
}

pub fn run_prb<E: GateEngine>(engine: &E, cfg: &RbConfig) -> Result<PrbResult> {
    cfg.validate()?;
    let table = CliffordTable::new();
    let channels = engine.clifford_channels(&table, cfg.composition);
    let runs = simulate(&table, &channels, None, cfg, TAG_REFERENCE);
    let rb = rb_result(&runs, cfg, TAG_REFERENCE)?;
    let (mean_purity, purity_stderr, fit, gamma_std) = summarize(&runs.purity, cfg, TAG_REFERENCE + 8, "purity")?;
    let gamma = fit.alpha;
    let eps_prb = (D - 1.0) / D * (1.0 - gamma.sqrt());
    let eps_std = (D - 1.0) / D * gamma_std / (2.0 * gamma.sqrt());
    Ok(PrbResult {
        rb,
        mean_purity,
        purity_stderr,
        purity_fit: DecayFit::from(&fit),
        gamma,
        eps_prb,
        eps_std,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitResult {
    pub values: Vec<f64>,
    pub mean_p0: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_fixed: usize,
    pub argmax: f64,
    /// Curve range within three standard errors.
    pub inconclusive: bool,
}

/// Fixed sequence length for ORBIT, half the RB decay constant.
pub fn orbit_length(n_tilde: f64) -> usize {
    if n_tilde.is_finite() {
        ((n_tilde / 2.0).round() as usize).max(1)
    } else {
        1
    }
}

/// Mean survival at one sequence length as a gate parameter is swept. All
/// parameter values share the same random sequences.
pub fn orbit_sweep<E, F>(values: &[f64], make_engine: F, n_fixed: usize, cfg: &RbConfig) -> Result<OrbitResult>
where
    E: GateEngine,
    F: Fn(f64) -> Result<E> + Sync,
{
    if values.is_empty() || n_fixed < 1 || cfg.k < 1 {
        return Err(Error::param("ORBIT needs values, a positive length and randomizations"));
    }
    let table = CliffordTable::new();
    let one = RbConfig {
        lengths: vec![n_fixed],
        ..cfg.clone()
    };
    let per_value: Vec<Result<(f64, f64)>> = values
        .par_iter()
        .map(|&v| {
            let engine = make_engine(v)?;
            let channels = engine.clifford_channels(&table, cfg.composition);
            let runs = simulate(&table, &channels, None, &one, TAG_REFERENCE);
            Ok(mean_stderr(&runs.p0[0]))
        })
        .collect();
    let mut mean_p0 = Vec::with_capacity(values.len());
    let mut stderr = Vec::with_capacity(values.len());
    for r in per_value {
        let (m, s) = r?;
        mean_p0.push(m);
        stderr.push(s);
    }
    let (best, _) = mean_p0
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let max = mean_p0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = mean_p0.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = stderr.iter().copied().fold(0.0, f64::max);
    Ok(OrbitResult {
        values: values.to_vec(),
        mean_p0,
        stderr,
        n_fixed,
        argmax: values[best],
        inconclusive: max - min <= 3.0 * sigma,
    })
}

/// Average over the 24 Cliffords of each composed map's average fidelity.
pub fn mean_clifford_fidelity<E: GateEngine>(engine: &E, comp: Composition) -> Result<f64> {
    let table = CliffordTable::new();
    let mut total = 0.0;
    for (i, e) in table.elements.iter().enumerate() {
        let target = GateTarget::new(e.unitary.clone(), engine.dim())?;
        total += average_fidelity(&engine.clifford(&table, i, comp), &target)?;
    }
    Ok(total / table.len() as f64)
}
