//! Gate-quality metrics on superoperators: average fidelity, leakage and
//! seepage, purity, Kraus and χ-matrix representations, and the
//! decoherence-limited fidelity.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::channel::{Superoperator, CHOI_TOL};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, C64};

/// Kraus eigenvalues at or below this are dropped.
pub const KRAUS_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct KrausSet {
    pub operators: Vec<CMat>,
}

impl KrausSet {
    /// max-abs deviation of `Σ G†G` from the identity.
    pub fn completeness_defect(&self) -> f64 {
        let d = self.operators[0].nrows();
        let sum = self
            .operators
            .iter()
            .fold(CMat::zeros(d, d), |acc, g| acc + g.adjoint() * g);
        linalg::max_abs_diff(&sum, &CMat::identity(d, d))
    }

    pub fn to_superop(&self) -> Superoperator {
        Superoperator::from_kraus(&self.operators)
    }
}

/// Kraus operators from the eigendecomposition of the Choi matrix.
pub fn kraus_from_superop(s: &Superoperator) -> Result<KrausSet> {
    let d = s.dim();
    let j = s.choi();
    let j = (&j + j.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(j);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -CHOI_TOL {
        return Err(Error::integrity("negative Choi eigenvalue", -min));
    }
    let mut operators = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= KRAUS_CUTOFF {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let scale = lam.sqrt();
        let g = CMat::from_fn(d, d, |a, i| v[i * d + a] * scale);
        operators.push(g);
    }
    if operators.is_empty() {
        return Err(Error::integrity("Choi matrix has no positive spectrum", 0.0));
    }
    Ok(KrausSet { operators })
}

/// Ideal qubit gate acting on the computational levels of a `d`-level system.
#[derive(Debug, Clone)]
pub struct GateTarget {
    pub u0: CMat,
    /// `|0⟩⟨0| + |1⟩⟨1|`.
    pub p_c: CMat,
    /// Projector onto levels `2..d`.
    pub p_e: CMat,
    pub n_c: usize,
}

impl GateTarget {
    pub fn new(u0: CMat, d: usize) -> Result<Self> {
        if u0.shape() != (2, 2) {
            return Err(Error::param("target unitary must be 2 × 2"));
        }
        if d < 2 {
            return Err(Error::param("target dimension must be at least 2"));
        }
        let defect = linalg::max_abs_diff(&(u0.adjoint() * &u0), &CMat::identity(2, 2));
        if defect > 1e-12 {
            return Err(Error::param(format!("target is not unitary (defect {defect:e})")));
        }
        Ok(Self {
            u0,
            p_c: linalg::projector(d, 0..2),
            p_e: linalg::projector(d, 2..d),
            n_c: 2,
        })
    }

    pub fn dim(&self) -> usize {
        self.p_c.nrows()
    }

    /// Rotation by `angle` about an equatorial axis at azimuth `phi`.
    pub fn rotation(phi: f64, angle: f64, d: usize) -> Self {
        Self::new(linalg::qubit_rotation([phi.cos(), phi.sin(), 0.0], angle), d)
            .expect("rotations are unitary")
    }

    pub fn x90(d: usize) -> Self {
        Self::rotation(0.0, std::f64::consts::FRAC_PI_2, d)
    }

    pub fn identity(d: usize) -> Self {
        Self::new(CMat::identity(2, 2), d).expect("identity is unitary")
    }

    fn embedded_u0(&self) -> CMat {
        linalg::embed(&self.u0, self.dim(), c(1.0, 0.0))
    }
}

/// Average gate fidelity on the computational subspace, with leakage counted
/// as error:
/// `F = [Σ_k Tr(M_k†M_k) + Σ_k |Tr M_k|²] / (n(n+1))`, `M_k = P_c U₀† G_k P_c`.
pub fn average_fidelity(s: &Superoperator, target: &GateTarget) -> Result<f64> {
    check_dims(s, target)?;
    let kraus = kraus_from_superop(s)?;
    let u0_dag = target.embedded_u0().adjoint();
    let n = target.n_c as f64;
    let mut total = 0.0;
    for g in &kraus.operators {
        let m = &target.p_c * &u0_dag * g * &target.p_c;
        total += linalg::trace(&(m.adjoint() * &m)).re + linalg::trace(&m).norm_sqr();
    }
    Ok(total / (n * (n + 1.0)))
}

/// Average leakage `L1 = Tr[P_e S(P_c/N_c)]` and seepage
/// `L2 = 1 − Tr[P_e S(P_e/N_c)]`.
pub fn leakage_seepage(s: &Superoperator, target: &GateTarget) -> Result<(f64, f64)> {
    check_dims(s, target)?;
    let n = target.n_c as f64;
    let rho_c = &target.p_c / c(n, 0.0);
    let rho_e = &target.p_e / c(n, 0.0);
    let l1 = linalg::trace(&(&target.p_e * s.apply(&rho_c))).re;
    let l2 = 1.0 - linalg::trace(&(&target.p_e * s.apply(&rho_e))).re;
    Ok((l1, l2))
}

fn check_dims(s: &Superoperator, target: &GateTarget) -> Result<()> {
    if s.dim() != target.dim() {
        return Err(Error::param(format!(
            "superoperator dimension {} does not match target dimension {}",
            s.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// `Tr(ρ†ρ)`.
pub fn purity(rho: &CMat) -> f64 {
    linalg::trace(&(rho.adjoint() * rho)).re
}

/// Process matrix over the n-qubit Pauli basis, ordered `(I, X, Y, Z)` with
/// lexicographic tensor extension, normalized so the identity process has
/// `χ_II = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiMatrix {
    pub n_qubits: usize,
    #[serde(with = "complex_matrix")]
    pub matrix: CMat,
}

/// `n`-qubit Pauli operator for a base-4 index (most significant qubit first).
pub fn pauli_string(index: usize, n_qubits: usize) -> CMat {
    let mut op = CMat::identity(1, 1);
    for q in (0..n_qubits).rev() {
        let k = (index >> (2 * q)) & 3;
        op = linalg::kron(&op, &linalg::pauli(k));
    }
    op
}

pub fn chi_matrix(s: &Superoperator) -> Result<ChiMatrix> {
    let d = s.dim();
    if !d.is_power_of_two() || d < 2 {
        return Err(Error::param(format!("χ matrix needs a qubit-register dimension, got {d}")));
    }
    let n_qubits = d.trailing_zeros() as usize;
    let kraus = kraus_from_superop(s)?;
    let basis: Vec<CMat> = (0..d * d).map(|m| pauli_string(m, n_qubits)).collect();
    let mut chi = CMat::zeros(d * d, d * d);
    for g in &kraus.operators {
        let coeffs: Vec<C64> = basis
            .iter()
            .map(|p| linalg::trace(&(p.adjoint() * g)) / c(d as f64, 0.0))
            .collect();
        for m in 0..d * d {
            for n in 0..d * d {
                chi[(m, n)] += coeffs[m] * coeffs[n].conj();
            }
        }
    }
    Ok(ChiMatrix { n_qubits, matrix: chi })
}

/// χ matrix of the map restricted to the target's computational subspace.
pub fn chi_matrix_on(s: &Superoperator, target: &GateTarget) -> Result<ChiMatrix> {
    check_dims(s, target)?;
    chi_matrix(&s.restrict(target.n_c))
}

/// `Tr(χ_a χ_b)`.
pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> f64 {
    linalg::trace(&(&a.matrix * &b.matrix)).re
}

/// `S(ρ) = Σ_mn χ_mn P_m ρ P_n†`.
pub fn superop_from_chi(chi: &ChiMatrix) -> Superoperator {
    let d = 1usize << chi.n_qubits;
    let basis: Vec<CMat> = (0..d * d).map(|m| pauli_string(m, chi.n_qubits)).collect();
    let mut s = CMat::zeros(d * d, d * d);
    for m in 0..d * d {
        for n in 0..d * d {
            let w = chi.matrix[(m, n)];
            if w.norm() == 0.0 {
                continue;
            }
            s += linalg::kron(&basis[n].conjugate(), &basis[m]) * w;
        }
    }
    Superoperator::from_matrix(d, s)
}

/// Decoherence-limited fidelity of a gate of duration `tau_ns`:
/// `F = [3 + exp(−τ/T1) + 2·exp(−2τ/T2)] / 6`.
pub fn coherence_limit(tau_ns: f64, t1_us: f64, t2_us: f64) -> f64 {
    let tau_us = tau_ns * 1e-3;
    (3.0 + (-tau_us / t1_us).exp() + 2.0 * (-2.0 * tau_us / t2_us).exp()) / 6.0
}

/// Row-major `[re, im]` pairs.
pub mod complex_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::{CMat, C64};

    pub fn serialize<S: Serializer>(m: &CMat, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<CMat, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(de)?;
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != m) {
            return Err(serde::de::Error::custom("ragged complex matrix"));
        }
        Ok(CMat::from_fn(n, m, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{random_density_matrix, random_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Amplitude damping with decay probability `p`, built from its Kraus pair.
    fn amplitude_damping(p: f64) -> (Vec<CMat>, Superoperator) {
        let k0 = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c((1.0 - p).sqrt(), 0.0)]);
        let k1 = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(p.sqrt(), 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let s = Superoperator::from_kraus(&[k0.clone(), k1.clone()]);
        (vec![k0, k1], s)
    }

    #[test]
    fn identity_map_has_single_kraus_operator() {
        let k = kraus_from_superop(&Superoperator::identity(3)).unwrap();
        assert_eq!(k.operators.len(), 1);
        let g = &k.operators[0];
        assert!(linalg::phase_insensitive_distance(g, &CMat::identity(3, 3)) < 1e-12);
    }

    #[test]
    fn amplitude_damping_kraus_pair() {
        let (analytic, s) = amplitude_damping(0.1);
        let k = kraus_from_superop(&s).unwrap();
        assert_eq!(k.operators.len(), 2);
        assert!(linalg::max_abs_diff(k.to_superop().matrix(), s.matrix()) < 1e-12);
        assert!(k.completeness_defect() < 1e-12);
        // Kraus sets agree up to a unitary mixing; the two operators here have
        // orthogonal supports so each matches one analytic operator up to phase.
        for g in &k.operators {
            let matched = analytic.iter().any(|a| {
                let overlap = linalg::trace(&(a.adjoint() * g)).norm();
                (overlap - a.norm_squared()).abs() < 1e-12
            });
            assert!(matched);
        }
    }

    #[test]
    fn random_channel_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(3, &mut rng);
        let s = Superoperator::from_unitary(&u).after(&Superoperator::depolarizing(3, 0.2));
        let k = kraus_from_superop(&s).unwrap();
        assert!(linalg::max_abs_diff(k.to_superop().matrix(), s.matrix()) < 1e-9);
        assert!(k.completeness_defect() < 1e-8);
    }

    #[test]
    fn non_cp_map_is_rejected() {
        let mut m = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                m[(j + i * 2, i + j * 2)] = c(1.0, 0.0);
            }
        }
        let s = Superoperator::from_matrix(2, m);
        assert!(matches!(kraus_from_superop(&s), Err(Error::Integrity { .. })));
    }

    #[test]
    fn exact_gate_has_unit_fidelity() {
        let target = GateTarget::x90(4);
        let u = linalg::embed(&target.u0, 4, c(1.0, 0.0));
        let f = average_fidelity(&Superoperator::from_unitary(&u), &target).unwrap();
        assert!((f - 1.0).abs() < 1e-10);
    }

    #[test]
    fn depolarizing_fidelity() {
        let s = Superoperator::depolarizing(2, 0.02);
        let f = average_fidelity(&s, &GateTarget::identity(2)).unwrap();
        assert!((f - 0.99).abs() < 1e-9);
    }

    #[test]
    fn leakage_of_block_diagonal_and_reset_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_unitary(2, &mut rng);
        let b = random_unitary(2, &mut rng);
        let mut u = CMat::zeros(4, 4);
        u.view_mut((0, 0), (2, 2)).copy_from(&a);
        u.view_mut((2, 2), (2, 2)).copy_from(&b);
        let target = GateTarget::identity(4);
        let (l1, l2) = leakage_seepage(&Superoperator::from_unitary(&u), &target).unwrap();
        assert!(l1.abs() < 1e-14 && l2.abs() < 1e-14);

        // every state sent to |0⟩⟨0|
        let reset: Vec<CMat> = (0..4)
            .map(|j| {
                let mut g = CMat::zeros(4, 4);
                g[(0, j)] = c(1.0, 0.0);
                g
            })
            .collect();
        let (l1, l2) = leakage_seepage(&Superoperator::from_kraus(&reset), &target).unwrap();
        assert!(l1.abs() < 1e-14);
        assert!((l2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_ignores_leakage_level_phases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let target = GateTarget::x90(4);
        for _ in 0..5 {
            let u = random_unitary(4, &mut rng);
            let s = Superoperator::from_unitary(&u).after(&Superoperator::depolarizing(4, 0.05));
            let v = linalg::diag_phase(&[0.0, 0.0, 1.3, -0.4]);
            let vs = Superoperator::from_unitary(&v).after(&s);
            let f1 = average_fidelity(&s, &target).unwrap();
            let f2 = average_fidelity(&vs, &target).unwrap();
            assert!((f1 - f2).abs() < 1e-12);
        }
    }

    #[test]
    fn purity_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = random_unitary(2, &mut rng).column(0).into_owned();
        let pure = &psi * psi.adjoint();
        assert!((purity(&pure) - 1.0).abs() < 1e-12);
        assert!((purity(&(CMat::identity(2, 2) * c(0.5, 0.0))) - 0.5).abs() < 1e-15);
        let rho = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(0.75, 0.0), c(0.25, 0.0)]));
        assert!((purity(&rho) - 0.625).abs() < 1e-15);
        let mixed = random_density_matrix(3, &mut rng);
        let p = purity(&mixed);
        assert!(p >= 1.0 / 3.0 - 1e-12 && p <= 1.0 + 1e-12);
    }

    #[test]
    fn chi_of_identity_and_depolarizing() {
        let chi = chi_matrix(&Superoperator::identity(2)).unwrap();
        assert!((chi.matrix[(0, 0)] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((chi.matrix.iter().map(|x| x.norm()).sum::<f64>() - 1.0).abs() < 1e-12);

        let dep = chi_matrix(&Superoperator::depolarizing(2, 0.02)).unwrap();
        assert!((process_fidelity(&dep, &chi) - 0.985).abs() < 1e-12);
        assert!((process_fidelity(&chi, &dep) - process_fidelity(&dep, &chi)).abs() < 1e-15);

        let x90 = Superoperator::from_unitary(&GateTarget::x90(2).u0);
        let cx = chi_matrix(&x90).unwrap();
        assert!((process_fidelity(&cx, &cx) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_reconstructs_two_qubit_sized_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(4, &mut rng);
        let s = Superoperator::from_unitary(&u).after(&Superoperator::depolarizing(4, 0.1));
        let chi = chi_matrix(&s).unwrap();
        let herm = linalg::max_abs_diff(&chi.matrix, &chi.matrix.adjoint());
        assert!(herm < 1e-12);
        let back = superop_from_chi(&chi);
        assert!(linalg::max_abs_diff(back.matrix(), s.matrix()) < 1e-9);
        assert!(chi_matrix(&Superoperator::identity(3)).is_err());
    }

    #[test]
    fn coherence_limit_table_values() {
        // (τ ns, T1 µs, T2 µs, F_lim %)
        let rows = [
            (46.0, 31.0, 12.0, 99.72),
            (49.0, 30.0, 13.0, 99.72),
            (77.0, 65.0, 26.0, 99.78),
            (43.0, 47.0, 10.0, 99.70),
            (44.0, 45.0, 22.0, 99.86),
        ];
        for (tau, t1, t2, expected) in rows {
            let f = 100.0 * coherence_limit(tau, t1, t2);
            assert!((f - expected).abs() <= 0.01, "{tau} {t1} {t2}: {f}");
        }
        assert_eq!(coherence_limit(0.0, 30.0, 20.0), 1.0);
    }

    #[test]
    fn longer_gates_have_lower_limit() {
        for &(t1, t2) in &[(10.0, 5.0), (30.0, 60.0), (1000.0, 1.0)] {
            for &tau in &[1.0, 50.0, 500.0] {
                assert!(coherence_limit(2.0 * tau, t1, t2) < coherence_limit(tau, t1, t2));
            }
        }
    }

    #[test]
    fn chi_json_roundtrip() {
        let chi = chi_matrix(&Superoperator::depolarizing(2, 0.1)).unwrap();
        let text = serde_json::to_string(&chi).unwrap();
        let back: ChiMatrix = serde_json::from_str(&text).unwrap();
        assert!(linalg::max_abs_diff(&back.matrix, &chi.matrix) < 1e-15);
    }
}
