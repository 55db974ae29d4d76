// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra for small quantum systems.
//!
//! Routines are written for general dimension `d`, though the control
//! problems in this crate only use `d = 2` and `d = 4`.

use std::ops::{Add, Mul};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Max entrywise deviation of `U^dagger U` from the identity.
pub const UNITARY_TOL: f64 = 1e-10;
/// Roundoff allowed above 1 before a fidelity is rejected instead of clamped.
pub const FIDELITY_CLAMP_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { what: "matrix" });
    }
    Ok(m.nrows())
}

/// Largest entrywise modulus of `A - A^dagger`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let d = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `U^dagger U - I`.
pub fn unitary_deviation(m: &CMatrix) -> f64 {
    let gram = m.adjoint() * m;
    let mut worst = 0.0f64;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let expected = if i == j { ONE } else { ZERO };
            worst = worst.max((gram[(i, j)] - expected).norm());
        }
    }
    worst
}

/// A Hermitian operator (Hamiltonian or observable).
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let deviation = hermitian_deviation(&m);
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self(m))
    }

    pub fn zeros(d: usize) -> Self {
        Self(CMatrix::zeros(d, d))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Hermitian) -> Hermitian {
        Hermitian(self.0.kronecker(&other.0))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Spectral norm, i.e. the largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// `self + weight * other`, accumulated in place.
    pub fn add_scaled(&mut self, weight: f64, other: &Hermitian) {
        self.0.zip_apply(&other.0, |a, b| *a += b * weight);
    }
}

impl Add for &Hermitian {
    type Output = Hermitian;

    fn add(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &rhs.0)
    }
}

impl Mul<f64> for &Hermitian {
    type Output = Hermitian;

    fn mul(self, rhs: f64) -> Hermitian {
        Hermitian(&self.0 * Complex64::new(rhs, 0.0))
    }
}

/// A unitary matrix (propagator or target gate).
#[derive(Clone, Debug, PartialEq)]
pub struct Unitary(CMatrix);

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        check_square(&m)?;
        let deviation = unitary_deviation(&m);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(CMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn kron(&self, other: &Unitary) -> Unitary {
        Unitary(self.0.kronecker(&other.0))
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    /// Multiply by a global phase `e^{i phi}`.
    pub fn with_phase(&self, phi: f64) -> Unitary {
        Unitary(&self.0 * Complex64::from_polar(1.0, phi))
    }

    /// Matrix product `self * rhs` (apply `rhs` first).
    pub fn then_after(&self, rhs: &Unitary) -> Unitary {
        Unitary(&self.0 * &rhs.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

fn pauli_2x2(axis: Axis) -> CMatrix {
    match axis {
        Axis::X => CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Axis::Y => CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Axis::Z => CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// Pauli operator on `qubit_index` of an `n_qubits` register, identity
/// elsewhere. Qubit 0 is the leftmost tensor factor.
pub fn pauli(axis: Axis, qubit_index: usize, n_qubits: usize) -> Result<Hermitian> {
    if n_qubits == 0 || n_qubits > 2 || qubit_index >= n_qubits {
        return Err(Error::QubitIndex {
            index: qubit_index,
            n_qubits,
        });
    }
    let identity = CMatrix::identity(2, 2);
    let mut out = CMatrix::identity(1, 1);
    for q in 0..n_qubits {
        let factor = if q == qubit_index {
            pauli_2x2(axis)
        } else {
            identity.clone()
        };
        out = out.kronecker(&factor);
    }
    Ok(Hermitian(out))
}

/// Controlled-NOT with qubit 0 as control.
pub fn cnot() -> Unitary {
    let mut m = CMatrix::zeros(4, 4);
    m[(0, 0)] = ONE;
    m[(1, 1)] = ONE;
    m[(2, 3)] = ONE;
    m[(3, 2)] = ONE;
    Unitary(m)
}

/// `exp(-i H t)` from the eigendecomposition of `H`.
pub fn expm_hermitian(h: &Hermitian, t: f64) -> Result<Unitary> {
    if !t.is_finite() {
        return Err(Error::NonFinite { what: "duration" });
    }
    let d = h.dim();
    if t == 0.0 {
        return Ok(Unitary::identity(d));
    }
    let eig = SymmetricEigen::new(h.0.clone());
    let vectors = eig.eigenvectors;
    let mut scaled = vectors.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        let mut column = scaled.column_mut(j);
        column *= phase;
    }
    Ok(Unitary(scaled * vectors.adjoint()))
}

/// Time-ordered propagator of piecewise-constant Hamiltonians, each held for
/// `dt`. The first segment acts first: `exp(-i H_p dt) ... exp(-i H_1 dt)`.
pub fn propagate(segments: &[Hermitian], dt: f64) -> Result<Unitary> {
    let first = segments.first().ok_or(Error::EmptySegments)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("segment duration must be finite and positive, got {dt}"),
        });
    }
    let d = first.dim();
    let mut total = CMatrix::identity(d, d);
    for h in segments {
        if h.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: h.dim(),
            });
        }
        total = expm_hermitian(h, dt)?.0 * total;
    }
    Ok(Unitary(total))
}

/// `Tr(A^dagger B)`, accumulated entrywise.
fn overlap(a: &CMatrix, b: &CMatrix) -> Complex64 {
    a.iter()
        .zip(b.iter())
        .fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

/// Gate fidelity `|Tr(V^dagger U)|^2 / d^2`.
pub fn gate_fidelity(u: &Unitary, v: &Unitary) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            found: u.dim(),
        });
    }
    let d = u.dim() as f64;
    let value = overlap(&v.0, &u.0).norm_sqr() / (d * d);
    if value > 1.0 + FIDELITY_CLAMP_TOL {
        return Err(Error::FidelityOutOfRange { value });
    }
    Ok(value.min(1.0))
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `R`'s diagonal folded back into `Q`.
pub fn haar_random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Unitary> {
    if d < 1 {
        return Err(Error::InvalidParameter {
            name: "d",
            reason: "dimension must be at least 1".into(),
        });
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            ONE
        };
        let mut column = q.column_mut(j);
        column *= phase;
    }
    Ok(Unitary(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        (a - b).iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Truncated Taylor series of exp(-i H t), independent of the eigensolver.
    fn series_expm(h: &CMatrix, t: f64, terms: usize) -> CMatrix {
        let d = h.nrows();
        let generator = h * c(0.0, -t);
        let mut term = CMatrix::identity(d, d);
        let mut sum = term.clone();
        for n in 1..=terms {
            term = &term * &generator * c(1.0 / n as f64, 0.0);
            sum += &term;
        }
        sum
    }

    fn random_hermitian(d: usize, max_norm: f64, rng: &mut ChaCha8Rng) -> Hermitian {
        let g = CMatrix::from_fn(d, d, |_, _| {
            c(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let h = Hermitian::new((&g + g.adjoint()) * c(0.5, 0.0)).unwrap();
        let norm = h.spectral_norm();
        let target = max_norm * rng.random::<f64>();
        &h * (target / norm)
    }

    #[test]
    fn pauli_z_single_qubit() {
        let z = pauli(Axis::Z, 0, 1).unwrap();
        let expected = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        assert_eq!(z.matrix(), &expected);
    }

    #[test]
    fn pauli_x_on_second_qubit() {
        let x = pauli(Axis::X, 1, 2).unwrap();
        let expected = CMatrix::identity(2, 2).kronecker(&pauli_2x2(Axis::X));
        assert_eq!(x.matrix(), &expected);
        assert_eq!(x.dim(), 4);
    }

    #[test]
    fn paulis_are_traceless() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for q in 0..2 {
                assert_eq!(pauli(axis, q, 2).unwrap().trace(), ZERO);
            }
        }
    }

    #[test]
    fn pauli_index_out_of_range() {
        assert!(matches!(
            pauli(Axis::X, 2, 2),
            Err(Error::QubitIndex {
                index: 2,
                n_qubits: 2
            })
        ));
        assert!(pauli(Axis::X, 0, 3).is_err());
        assert!(pauli(Axis::X, 0, 0).is_err());
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(Hermitian::new(m), Err(Error::NotHermitian { .. })));
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(Hermitian::new(rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn expm_at_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(4, 2.0, &mut rng);
        assert_eq!(expm_hermitian(&h, 0.0).unwrap(), Unitary::identity(4));
    }

    #[test]
    fn expm_x_quarter_turn() {
        let x = pauli(Axis::X, 0, 1).unwrap();
        let u = expm_hermitian(&x, FRAC_PI_2).unwrap();
        let expected = x.matrix() * c(0.0, -1.0);
        assert!(max_diff(u.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn expm_matches_taylor_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let h = random_hermitian(4, 2.0, &mut rng);
            let u = expm_hermitian(&h, 1.0).unwrap();
            let oracle = series_expm(h.matrix(), 1.0, 40);
            assert!(max_diff(u.matrix(), &oracle) < 1e-10);
            assert!(unitary_deviation(u.matrix()) < UNITARY_TOL);
        }
    }

    #[test]
    fn expm_rejects_non_finite_time() {
        let x = pauli(Axis::X, 0, 1).unwrap();
        assert!(expm_hermitian(&x, f64::NAN).is_err());
    }

    #[test]
    fn propagate_single_z_segment() {
        let z = pauli(Axis::Z, 0, 1).unwrap();
        let u = propagate(&[z], 1.0).unwrap();
        let expected = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::from_polar(1.0, -1.0),
                ZERO,
                ZERO,
                Complex64::from_polar(1.0, 1.0),
            ],
        );
        assert!(max_diff(u.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn propagate_repeated_segment_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(2, 2.0, &mut rng);
        let u = propagate(&[h.clone(), h.clone()], 0.7).unwrap();
        let v = expm_hermitian(&h, 1.4).unwrap();
        assert!(max_diff(u.matrix(), v.matrix()) < 1e-13);
    }

    #[test]
    fn propagate_orders_first_segment_rightmost() {
        let x = pauli(Axis::X, 0, 1).unwrap();
        let z = pauli(Axis::Z, 0, 1).unwrap();
        let xz = propagate(&[x.clone(), z.clone()], 1.0).unwrap();
        let zx = propagate(&[z.clone(), x.clone()], 1.0).unwrap();
        assert!(max_diff(xz.matrix(), zx.matrix()) > 1e-3);
        let oracle_xz = series_expm(z.matrix(), 1.0, 40) * series_expm(x.matrix(), 1.0, 40);
        let oracle_zx = series_expm(x.matrix(), 1.0, 40) * series_expm(z.matrix(), 1.0, 40);
        assert!(max_diff(xz.matrix(), &oracle_xz) < 1e-10);
        assert!(max_diff(zx.matrix(), &oracle_zx) < 1e-10);
    }

    #[test]
    fn propagate_errors() {
        assert!(matches!(propagate(&[], 1.0), Err(Error::EmptySegments)));
        let x1 = pauli(Axis::X, 0, 1).unwrap();
        let x2 = pauli(Axis::X, 0, 2).unwrap();
        assert!(matches!(
            propagate(&[x1.clone(), x2], 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(propagate(&[x1], 0.0).is_err());
    }

    #[test]
    fn fidelity_reference_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = haar_random_unitary(4, &mut rng).unwrap();
        assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        let x = Unitary::new(pauli(Axis::X, 0, 1).unwrap().into_matrix()).unwrap();
        assert_eq!(gate_fidelity(&Unitary::identity(2), &x).unwrap(), 0.0);
        assert_eq!(gate_fidelity(&Unitary::identity(4), &cnot()).unwrap(), 0.25);
    }

    #[test]
    fn fidelity_dimension_mismatch() {
        assert!(matches!(
            gate_fidelity(&Unitary::identity(2), &Unitary::identity(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fidelity_clamps_roundoff_only() {
        let scaled = Unitary(CMatrix::identity(2, 2) * c(1.0 + 1e-14, 0.0));
        assert_eq!(gate_fidelity(&scaled, &Unitary::identity(2)).unwrap(), 1.0);
        let bad = Unitary(CMatrix::identity(2, 2) * c(1.01, 0.0));
        assert!(matches!(
            gate_fidelity(&bad, &Unitary::identity(2)),
            Err(Error::FidelityOutOfRange { .. })
        ));
    }

    #[test]
    fn haar_unitarity_and_u1_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 1..=4 {
            let u = haar_random_unitary(d, &mut rng).unwrap();
            assert!(unitary_deviation(u.matrix()) < UNITARY_TOL);
        }
        for _ in 0..10 {
            let u = haar_random_unitary(1, &mut rng).unwrap();
            assert!((u.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
        }
        assert!(haar_random_unitary(0, &mut rng).is_err());
    }

    #[test]
    fn unitary_constructor_validates() {
        let m = CMatrix::identity(2, 2) * c(2.0, 0.0);
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary { .. })));
        assert!(Unitary::new(cnot().into_matrix()).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fidelity_is_symmetric_and_phase_invariant(seed in any::<u64>(), phi in -10.0f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = haar_random_unitary(4, &mut rng).unwrap();
                let v = haar_random_unitary(4, &mut rng).unwrap();
                let uv = gate_fidelity(&u, &v).unwrap();
                prop_assert_eq!(uv, gate_fidelity(&v, &u).unwrap());
                prop_assert!((0.0..=1.0).contains(&uv));
                let shifted = gate_fidelity(&u.with_phase(phi), &v).unwrap();
                prop_assert!((shifted - uv).abs() < 1e-12);
            }

            #[test]
            fn expm_is_unitary(seed in any::<u64>(), t in -5.0f64..5.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = random_hermitian(4, 3.0, &mut rng);
                let u = expm_hermitian(&h, t).unwrap();
                prop_assert!(unitary_deviation(u.matrix()) < UNITARY_TOL);
            }
        }
    }
}
