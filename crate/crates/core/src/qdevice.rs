//! Multi-level transmon model in the charge basis.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Charge-basis cutoff: states `|n⟩` with `n ∈ [-N_C, N_C]`.
pub const N_C: usize = 30;

/// Default qubit capacitance in fF.
pub const DEFAULT_CQ_FF: f64 = 80.0;

/// E_J/E_C below this ratio is outside the transmon regime.
pub const TRANSMON_RATIO: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    /// Josephson energy, GHz.
    pub e_j: f64,
    /// Charging energy, GHz.
    pub e_c: f64,
    pub n_levels: usize,
    /// Qubit capacitance, fF.
    pub c_q: f64,
    /// Coupling capacitance to the SFQ source, fF.
    pub c_c: f64,
    /// µs; `f64::INFINITY` disables relaxation.
    pub t1: f64,
    /// µs; `f64::INFINITY` disables dephasing.
    pub t2: f64,
}

impl TransmonParams {
    pub fn new(e_j: f64, e_c: f64) -> Self {
        Self {
            e_j,
            e_c,
            n_levels: 4,
            c_q: DEFAULT_CQ_FF,
            c_c: 0.08,
            t1: f64::INFINITY,
            t2: f64::INFINITY,
        }
    }

    pub fn with_coherence(mut self, t1: f64, t2: f64) -> Self {
        self.t1 = t1;
        self.t2 = t2;
        self
    }

    pub fn with_capacitance(mut self, c_q: f64, c_c: f64) -> Self {
        self.c_q = c_q;
        self.c_c = c_c;
        self
    }

    pub fn with_levels(mut self, n_levels: usize) -> Self {
        self.n_levels = n_levels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_j > 0.0 && self.e_c > 0.0) {
            return Err(Error::param("E_J and E_C must be positive"));
        }
        if self.n_levels < 3 {
            return Err(Error::param("at least three levels are needed to describe leakage"));
        }
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(Error::param("coherence times must be positive"));
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::param(format!(
                "T2 = {} µs exceeds 2·T1 = {} µs",
                self.t2,
                2.0 * self.t1
            )));
        }
        if !(self.c_q > 0.0 && self.c_c >= 0.0 && self.c_c < self.c_q) {
            return Err(Error::param("capacitances must satisfy 0 <= C_c < C_q"));
        }
        Ok(())
    }

    pub fn is_transmon_regime(&self) -> bool {
        self.e_j / self.e_c >= TRANSMON_RATIO
    }

    /// ξ = √(2E_C/E_J).
    pub fn xi(&self) -> f64 {
        (2.0 * self.e_c / self.e_j).sqrt()
    }
}

/// Diagonalized transmon truncated to its lowest levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmonModel {
    pub params: TransmonParams,
    /// Level frequencies relative to the ground state, GHz.
    pub energies: Vec<f64>,
    /// Cooper-pair number operator in the truncated eigenbasis.
    pub q_op: DMatrix<f64>,
    pub f01: f64,
    pub anharm: f64,
    /// C_Σ = C_q + C_c, fF.
    pub c_sigma: f64,
    pub xi: f64,
    pub lam: f64,
}

impl TransmonModel {
    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }

    /// C_c/C_Σ, the fraction of the pulse voltage seen by the junction.
    pub fn coupling_ratio(&self) -> f64 {
        self.params.c_c / self.c_sigma
    }

    /// Same spectrum with a different coupling capacitance.
    pub fn with_coupling(&self, c_c: f64) -> TransmonModel {
        let mut m = self.clone();
        m.params.c_c = c_c;
        m.c_sigma = m.params.c_q + c_c;
        m
    }

    pub fn with_coherence(&self, t1: f64, t2: f64) -> TransmonModel {
        let mut m = self.clone();
        m.params.t1 = t1;
        m.params.t2 = t2;
        m
    }

    /// Keeps only the lowest `n` levels. Two-level restrictions are allowed
    /// here for analytic comparisons even though [`TransmonParams`] requires
    /// three.
    pub fn truncated(&self, n: usize) -> TransmonModel {
        assert!(n >= 2 && n <= self.n_levels());
        let mut m = self.clone();
        m.energies.truncate(n);
        m.q_op = self.q_op.view((0, 0), (n, n)).into_owned();
        m.params.n_levels = n;
        m
    }
}

pub fn diagonalize(params: &TransmonParams) -> Result<TransmonModel> {
    diagonalize_with_cutoff(params, N_C)
}

pub fn diagonalize_with_cutoff(params: &TransmonParams, n_c: usize) -> Result<TransmonModel> {
    params.validate()?;
    let dim = 2 * n_c + 1;
    if params.n_levels > dim {
        return Err(Error::param(format!(
            "{} levels requested from a {}-state charge basis",
            params.n_levels, dim
        )));
    }
    let (values, vectors) = charge_basis_eigensystem(params.e_j, params.e_c, n_c)?;
    let n = params.n_levels;

    let e0 = values[0];
    let energies: Vec<f64> = values.iter().take(n).map(|e| e - e0).collect();
    if energies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Convergence("degenerate transmon spectrum".into()));
    }

    let charge: Vec<f64> = (0..dim).map(|k| k as f64 - n_c as f64).collect();
    let mut q_op = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            q_op[(a, b)] = (0..dim)
                .map(|k| vectors[a][k] * charge[k] * vectors[b][k])
                .sum();
        }
    }

    let xi = params.xi();
    Ok(TransmonModel {
        params: *params,
        f01: energies[1],
        anharm: energies[2] - 2.0 * energies[1],
        energies,
        q_op,
        c_sigma: params.c_q + params.c_c,
        xi,
        lam: 1.0 - xi / 8.0,
    })
}

/// Eigenvalues (ascending) and gauge-fixed eigenvectors of
/// `H = 4E_C n² − (E_J/2)(|n⟩⟨n+1| + h.c.)`.
fn charge_basis_eigensystem(e_j: f64, e_c: f64, n_c: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let dim = 2 * n_c + 1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let n = k as f64 - n_c as f64;
        h[(k, k)] = 4.0 * e_c * n * n;
        if k + 1 < dim {
            h[(k, k + 1)] = -e_j / 2.0;
            h[(k + 1, k)] = -e_j / 2.0;
        }
    }
    let eig = SymmetricEigen::try_new(h, 1e-15, 10_000)
        .ok_or_else(|| Error::Convergence("charge-basis eigensolver exceeded iteration limit".into()))?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().cloned().collect())
        .collect();

    // Gauge: ground state has a positive largest component; every other level
    // is signed so that ⟨j-1|n̂|j⟩ > 0.
    let flip = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = -*x);
    let largest = vectors[0]
        .iter()
        .cloned()
        .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if largest < 0.0 {
        flip(&mut vectors[0]);
    }
    for j in 1..dim.min(vectors.len()) {
        let elem: f64 = (0..dim)
            .map(|k| vectors[j - 1][k] * (k as f64 - n_c as f64) * vectors[j][k])
            .sum();
        if elem < 0.0 {
            flip(&mut vectors[j]);
        }
    }
    Ok((values, vectors))
}

/// Rotation angle imparted by one SFQ pulse, δθ = 2π·(C_c/C_q)·λ/√ξ.
pub fn delta_theta(model: &TransmonModel) -> f64 {
    2.0 * PI * (model.params.c_c / model.params.c_q) * model.lam / model.xi.sqrt()
}

/// Coupling capacitance (fF) that gives the per-pulse angle `dtheta` under
/// [`delta_theta`].
pub fn coupling_for_delta_theta(model: &TransmonModel, dtheta: f64) -> f64 {
    dtheta * model.params.c_q * model.xi.sqrt() / (2.0 * PI * model.lam)
}

/// Finds (E_J, E_C) whose 4-level diagonalization reproduces `f01` and
/// `anharm` (both GHz). Newton iteration on the exact spectrum, seeded by the
/// perturbative transmon formulas.
pub fn solve_ej_ec(f01: f64, anharm: f64) -> Result<(f64, f64)> {
    if !(f01 > 0.0) || !(anharm < 0.0) {
        return Err(Error::param("need f01 > 0 and anharm < 0"));
    }
    let spectrum = |e_j: f64, e_c: f64| -> Result<(f64, f64)> {
        let (vals, _) = charge_basis_eigensystem(e_j, e_c, N_C)?;
        let f = vals[1] - vals[0];
        Ok((f, (vals[2] - vals[0]) - 2.0 * f))
    };
    let in_box = |e_j: f64, e_c: f64| (0.05..=1.0).contains(&e_c) && (10.0..=200.0).contains(&(e_j / e_c));

    let mut e_c = -anharm;
    let mut e_j = (f01 + e_c).powi(2) / (8.0 * e_c);
    for _ in 0..50 {
        if !(e_j > 0.0 && e_c > 0.0) {
            break;
        }
        let (f, a) = spectrum(e_j, e_c)?;
        let r = [f - f01, a - anharm];
        if r[0].abs() < 1e-11 && r[1].abs() < 1e-11 {
            break;
        }
        let hj = 1e-6 * e_j;
        let hc = 1e-6 * e_c;
        let (fj, aj) = spectrum(e_j + hj, e_c)?;
        let (fc, ac) = spectrum(e_j, e_c + hc)?;
        let jac = [[(fj - f) / hj, (fc - f) / hc], [(aj - a) / hj, (ac - a) / hc]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            break;
        }
        let dj = (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
        let dc = (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
        e_j -= dj;
        e_c -= dc;
    }
    if !(e_j > 0.0 && e_c > 0.0) || !in_box(e_j, e_c) {
        return Err(Error::param(format!(
            "no (E_J, E_C) in the search box reproduces f01 = {f01} GHz, anharm = {anharm} GHz"
        )));
    }
    let (f, a) = spectrum(e_j, e_c)?;
    if (f - f01).abs() > 1e-4 || (a - anharm).abs() > 1e-4 {
        return Err(Error::Convergence(format!(
            "E_J/E_C solve stalled at residuals ({:e}, {:e}) GHz",
            f - f01,
            a - anharm
        )));
    }
    Ok((e_j, e_c))
}

/// One qubit record of a device parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    #[serde(default)]
    pub name: String,
    pub f01_ghz: f64,
    pub anharm_ghz: f64,
    pub t1_us: f64,
    pub t2_us: f64,
    #[serde(default = "default_cq")]
    pub cq_ff: f64,
    pub cc_ff: f64,
    /// Measured clock rate, GHz.
    #[serde(default)]
    pub f_clk_ghz: Option<f64>,
    /// Measured Rabi rate, MHz.
    #[serde(default)]
    pub rabi_mhz: Option<f64>,
    /// Measured π/2 gate length, ns.
    #[serde(default)]
    pub gate_ns: Option<f64>,
    /// Measured pulses per π/2 gate.
    #[serde(default)]
    pub n_pi2: Option<u32>,
}

fn default_cq() -> f64 {
    DEFAULT_CQ_FF
}

impl DeviceRecord {
    pub fn params(&self) -> Result<TransmonParams> {
        let (e_j, e_c) = solve_ej_ec(self.f01_ghz, self.anharm_ghz)?;
        let p = TransmonParams::new(e_j, e_c)
            .with_capacitance(self.cq_ff, self.cc_ff)
            .with_coherence(self.t1_us, self.t2_us);
        p.validate()?;
        Ok(p)
    }

    pub fn model(&self) -> Result<TransmonModel> {
        diagonalize(&self.params()?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFile {
    pub qubit: Vec<DeviceRecord>,
}

impl DeviceFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: DeviceFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if file.qubit.is_empty() {
            return Err(Error::Parse("device file has no [[qubit]] records".into()));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, name: &str) -> Option<&DeviceRecord> {
        self.qubit.iter().find(|q| q.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q0_params() -> TransmonParams {
        TransmonParams::new(12.84, 0.28)
    }

    #[test]
    fn spectrum_is_ground_referenced_and_ascending() {
        let m = diagonalize(&q0_params().with_levels(6)).unwrap();
        assert_eq!(m.energies[0], 0.0);
        assert!(m.energies.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(m.f01, m.energies[1]);
        assert!(m.anharm < 0.0);
    }

    #[test]
    fn charge_operator_is_hermitian_with_positive_ladder() {
        let m = diagonalize(&q0_params()).unwrap();
        let defect = (&m.q_op - m.q_op.transpose()).abs().max() / m.q_op.abs().max();
        assert!(defect < 1e-12);
        for j in 1..m.n_levels() {
            assert!(m.q_op[(j - 1, j)] > 0.0);
        }
        // parity: no diagonal charge at n_g = 0
        for j in 0..m.n_levels() {
            assert!(m.q_op[(j, j)].abs() < 1e-10);
        }
    }

    #[test]
    fn diagonalize_is_deterministic() {
        let a = diagonalize(&q0_params()).unwrap();
        let b = diagonalize(&q0_params()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parameter_errors() {
        assert!(diagonalize(&q0_params().with_levels(2)).is_err());
        assert!(diagonalize_with_cutoff(&q0_params().with_levels(8), 3).is_err());
        assert!(diagonalize(&q0_params().with_coherence(10.0, 25.0)).is_err());
        assert!(diagonalize(&TransmonParams::new(-1.0, 0.2)).is_err());
        assert!(diagonalize(&q0_params().with_capacitance(10.0, 12.0)).is_err());
    }

    #[test]
    fn transmon_regime_flag() {
        assert!(q0_params().is_transmon_regime());
        assert!(!TransmonParams::new(2.0, 0.5).is_transmon_regime());
    }

    #[test]
    fn delta_theta_is_linear_in_coupling() {
        let m = diagonalize(&q0_params().with_capacitance(80.0, 0.08)).unwrap();
        let d1 = delta_theta(&m);
        let d2 = delta_theta(&m.with_coupling(0.16));
        assert!((d2 / d1 - 2.0).abs() < 1e-12);
        let cc = coupling_for_delta_theta(&m, d1);
        assert!((cc - 0.08).abs() < 1e-12);
    }

    #[test]
    fn solve_rejects_out_of_box() {
        assert!(solve_ej_ec(5.0, 0.1).is_err());
        assert!(solve_ej_ec(5.0, -3.0).is_err());
    }

    #[test]
    fn device_file_parse() {
        let text = r#"
            [[qubit]]
            name = "qa"
            f01_ghz = 5.0
            anharm_ghz = -0.3
            t1_us = 30
            t2_us = 20
            cc_ff = 0.1
        "#;
        let f = DeviceFile::parse(text).unwrap();
        assert_eq!(f.qubit[0].cq_ff, DEFAULT_CQ_FF);
        assert!(f.get("qa").is_some());
        assert!(DeviceFile::parse("qubit = []").is_err());
        assert!(DeviceFile::parse("not toml [").is_err());
    }
}
