//! Dense complex matrix helpers.
//!
//! Density matrices are vectorized by column stacking, which is also
//! nalgebra's storage order, so `vec(A ρ B) = (Bᵀ ⊗ A) vec(ρ)`.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn vectorize(rho: &CMat) -> CVec {
    CVec::from_column_slice(rho.as_slice())
}

pub fn unvectorize(v: &CVec, d: usize) -> CMat {
    assert_eq!(v.len(), d * d);
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Diagonal unitary with entries `exp(i·phases[j])`.
pub fn diag_phase(phases: &[f64]) -> CMat {
    let d = phases.len();
    let mut m = CMat::zeros(d, d);
    for (j, &p) in phases.iter().enumerate() {
        m[(j, j)] = C64::from_polar(1.0, p);
    }
    m
}

/// Projector onto the listed basis levels of a `d`-dimensional space.
pub fn projector(d: usize, levels: impl IntoIterator<Item = usize>) -> CMat {
    let mut p = CMat::zeros(d, d);
    for j in levels {
        p[(j, j)] = ONE;
    }
    p
}

/// `|j⟩⟨j|` in dimension `d`.
pub fn basis_dm(d: usize, j: usize) -> CMat {
    projector(d, [j])
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Embeds `block` in the top-left corner of a `d × d` matrix, filling the
/// remaining diagonal with `fill`.
pub fn embed(block: &CMat, d: usize, fill: C64) -> CMat {
    let n = block.nrows();
    let mut m = CMat::zeros(d, d);
    for j in n..d {
        m[(j, j)] = fill;
    }
    m.view_mut((0, 0), (n, n)).copy_from(block);
    m
}

/// Hermitian part deviation, relative to the largest entry.
pub fn hermiticity_defect(m: &CMat) -> f64 {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    max_abs_diff(m, &m.adjoint()) / scale
}

/// `exp(-i θ/2 n·σ)` on a qubit.
pub fn qubit_rotation(axis: [f64; 3], angle: f64) -> CMat {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (nx, ny, nz) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
    let (s, co) = (angle / 2.0).sin_cos();
    CMat::from_row_slice(
        2,
        2,
        &[
            c(co, -s * nz),
            c(-s * ny, -s * nx),
            c(s * ny, -s * nx),
            c(co, s * nz),
        ],
    )
}

/// Distance between unitaries modulo global phase: `1 - |Tr(A†B)|/d`.
pub fn phase_insensitive_distance(a: &CMat, b: &CMat) -> f64 {
    let d = a.nrows() as f64;
    1.0 - (trace(&(a.adjoint() * b)).norm() / d)
}

pub fn pauli(k: usize) -> CMat {
    match k {
        0 => CMat::identity(2, 2),
        1 => CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        2 => CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        3 => CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
        _ => panic!("pauli index {k} out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectorization_identity() {
        let a = CMat::from_fn(3, 3, |i, j| c(i as f64 + 0.5, j as f64 - 1.0));
        let b = CMat::from_fn(3, 3, |i, j| c((i * j) as f64, 0.3 * i as f64));
        let rho = CMat::from_fn(3, 3, |i, j| c(1.0 / (1 + i + j) as f64, (i as f64) - (j as f64)));
        let lhs = vectorize(&(&a * &rho * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&rho);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rotation_about_x_by_pi_flips() {
        let x = qubit_rotation([1.0, 0.0, 0.0], std::f64::consts::PI);
        let expected = &pauli(1) * c(0.0, -1.0);
        assert!(max_abs_diff(&x, &expected) < 1e-12);
    }
}
