//! Linear maps on density matrices in the column-stacked (Liouville)
//! representation.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat, CVec, C64};

/// Tolerance on `|Tr S(ρ) - 1|` for trace preservation.
pub const TRACE_TOL: f64 = 1e-9;
/// Lower bound on the Choi spectrum for complete positivity.
pub const CHOI_TOL: f64 = 1e-9;

/// A linear map on `d × d` density matrices stored as a `d² × d²` matrix
/// acting on `vec(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    d: usize,
    matrix: CMat,
}

/// Outcome of the CPTP checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CptpReport {
    pub max_trace_error: f64,
    pub min_choi_eigenvalue: f64,
}

impl Superoperator {
    pub fn from_matrix(d: usize, matrix: CMat) -> Self {
        assert_eq!(matrix.shape(), (d * d, d * d), "superoperator shape");
        Self { d, matrix }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_matrix(d, CMat::identity(d * d, d * d))
    }

    /// `ρ ↦ U ρ U†`.
    pub fn from_unitary(u: &CMat) -> Self {
        let d = u.nrows();
        Self::from_matrix(d, linalg::kron(&u.conjugate(), u))
    }

    /// `ρ ↦ Σ_k G_k ρ G_k†`.
    pub fn from_kraus(ops: &[CMat]) -> Self {
        let d = ops[0].nrows();
        let mut m = CMat::zeros(d * d, d * d);
        for g in ops {
            m += linalg::kron(&g.conjugate(), g);
        }
        Self::from_matrix(d, m)
    }

    /// Depolarizing channel `ρ ↦ (1-p)ρ + p·Tr(ρ)·I/d`.
    pub fn depolarizing(d: usize, p: f64) -> Self {
        let mut m = CMat::identity(d * d, d * d) * c(1.0 - p, 0.0);
        let id = linalg::vectorize(&CMat::identity(d, d));
        // Tr(ρ) = vec(I)† vec(ρ)
        m += &id * id.adjoint() * c(p / d as f64, 0.0);
        Self::from_matrix(d, m)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        linalg::unvectorize(&(&self.matrix * linalg::vectorize(rho)), self.d)
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        &self.matrix * v
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Superoperator) -> Superoperator {
        assert_eq!(self.d, first.d);
        Self::from_matrix(self.d, &self.matrix * &first.matrix)
    }

    /// Composes maps given in application order.
    pub fn sequence<'a>(d: usize, maps: impl IntoIterator<Item = &'a Superoperator>) -> Self {
        maps.into_iter()
            .fold(Self::identity(d), |acc, s| s.after(&acc))
    }

    /// `Sⁿ` by repeated squaring.
    pub fn power(&self, n: u64) -> Superoperator {
        let mut result = CMat::identity(self.d * self.d, self.d * self.d);
        let mut base = self.matrix.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = &base * &result;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        Self::from_matrix(self.d, result)
    }

    /// Choi matrix `J = Σ_ij |i⟩⟨j| ⊗ S(|i⟩⟨j|)`.
    pub fn choi(&self) -> CMat {
        let d = self.d;
        let mut j = CMat::zeros(d * d, d * d);
        for i in 0..d {
            for k in 0..d {
                for a in 0..d {
                    for b in 0..d {
                        j[(i * d + a, k * d + b)] = self.matrix[(a + b * d, i + k * d)];
                    }
                }
            }
        }
        j
    }

    /// Largest `|Tr S(ρ) − 1|` over `|i⟩⟨j|` inputs, evaluated exactly
    /// through the adjoint action on the identity.
    pub fn trace_defect(&self) -> f64 {
        let d = self.d;
        let id = linalg::vectorize(&CMat::identity(d, d));
        // Tr S(X) = vec(I)† S vec(X); trace preserving iff vec(I)† S = vec(I)†.
        let row = id.adjoint() * &self.matrix;
        row.iter()
            .zip(id.iter())
            .map(|(x, y)| (x - y.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        let j = self.choi();
        let j = (&j + j.adjoint()) * c(0.5, 0.0);
        SymmetricEigen::new(j)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Trace check on random density matrices plus the Choi spectrum.
    pub fn cptp_report<R: Rng>(&self, rng: &mut R, samples: usize) -> CptpReport {
        let mut max_trace_error: f64 = 0.0;
        for _ in 0..samples {
            let rho = random_density_matrix(self.d, rng);
            let out = self.apply(&rho);
            max_trace_error = max_trace_error.max((linalg::trace(&out) - c(1.0, 0.0)).norm());
        }
        max_trace_error = max_trace_error.max(self.trace_defect());
        CptpReport {
            max_trace_error,
            min_choi_eigenvalue: self.min_choi_eigenvalue(),
        }
    }

    /// Fails with an integrity error if the map is not CPTP within `scale` times
    /// the default tolerances.
    pub fn check_cptp(&self, scale: f64) -> Result<CptpReport> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5f9_c0de);
        let report = self.cptp_report(&mut rng, 20);
        if report.max_trace_error > TRACE_TOL * scale {
            return Err(Error::integrity("trace preservation", report.max_trace_error));
        }
        if report.min_choi_eigenvalue < -CHOI_TOL * scale {
            return Err(Error::integrity(
                "complete positivity (Choi spectrum)",
                -report.min_choi_eigenvalue,
            ));
        }
        Ok(report)
    }

    /// Restriction `ρ ↦ P S(P ρ P) P` to the span of the first `n` levels.
    pub fn restrict(&self, n: usize) -> Superoperator {
        let d = self.d;
        let mut m = CMat::zeros(n * n, n * n);
        for col_j in 0..n {
            for col_i in 0..n {
                for row_j in 0..n {
                    for row_i in 0..n {
                        m[(row_i + row_j * n, col_i + col_j * n)] =
                            self.matrix[(row_i + row_j * d, col_i + col_j * d)];
                    }
                }
            }
        }
        Superoperator::from_matrix(n, m)
    }
}

/// Random full-rank density matrix `G G† / Tr(G G†)` with Gaussian `G`.
pub fn random_density_matrix<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| c(gauss(rng), gauss(rng)));
    let rho = &g * g.adjoint();
    let tr = linalg::trace(&rho).re;
    rho / C64::new(tr, 0.0)
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian matrix.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| c(gauss(rng), gauss(rng)));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let phases: Vec<f64> = (0..d).map(|j| r[(j, j)].arg()).collect();
    q * linalg::diag_phase(&phases).adjoint()
}

fn gauss<R: Rng>(rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn power_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_unitary(3, &mut rng);
        let s = Superoperator::from_unitary(&u).after(&Superoperator::depolarizing(3, 0.01));
        let rho = random_density_matrix(3, &mut rng);
        let mut seq = rho.clone();
        for _ in 0..37 {
            seq = s.apply(&seq);
        }
        let fast = s.power(37).apply(&rho);
        assert!(linalg::max_abs_diff(&seq, &fast) < 1e-10);
        assert_eq!(s.power(0), Superoperator::identity(3));
    }

    #[test]
    fn unitary_and_depolarizing_are_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(4, &mut rng);
        let s = Superoperator::from_unitary(&u);
        assert!(s.check_cptp(1.0).is_ok());
        assert!(Superoperator::depolarizing(2, 0.3).check_cptp(1.0).is_ok());
    }

    #[test]
    fn transpose_map_is_not_cp() {
        // ρ ↦ ρᵀ is positive and trace preserving but not completely positive.
        let d = 2;
        let mut m = CMat::zeros(4, 4);
        for i in 0..d {
            for j in 0..d {
                m[(j + i * d, i + j * d)] = c(1.0, 0.0);
            }
        }
        let s = Superoperator::from_matrix(d, m);
        assert!(matches!(s.check_cptp(1.0), Err(Error::Integrity { .. })));
    }

    #[test]
    fn restriction_of_block_map() {
        let u = crate::linalg::embed(&crate::linalg::qubit_rotation([1.0, 0.0, 0.0], 0.3), 4, c(1.0, 0.0));
        let s = Superoperator::from_unitary(&u);
        let r = s.restrict(2);
        let expected = Superoperator::from_unitary(&crate::linalg::qubit_rotation([1.0, 0.0, 0.0], 0.3));
        assert!(linalg::max_abs_diff(r.matrix(), expected.matrix()) < 1e-14);
    }
}
