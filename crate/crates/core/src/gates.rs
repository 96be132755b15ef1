//! Standard qubit gates and Haar-random unitaries.
//!
//! Multi-qubit matrices use the site-major basis convention: the first
//! qubit is the most significant bit of the row/column index.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::tensor::qr_decompose;

fn real(rows: usize, cols: usize, values: &[f64]) -> DMatrix<C64> {
    DMatrix::from_row_iterator(rows, cols, values.iter().map(|&v| C64::new(v, 0.0)))
}

pub fn identity(dim: usize) -> DMatrix<C64> {
    DMatrix::identity(dim, dim)
}

pub fn pauli_x() -> DMatrix<C64> {
    real(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> DMatrix<C64> {
    DMatrix::from_row_slice(
        2,
        2,
        &[C64::new(0.0, 0.0), C64::new(0.0, -1.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    )
}

pub fn pauli_z() -> DMatrix<C64> {
    real(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

pub fn hadamard() -> DMatrix<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    real(2, 2, &[h, h, h, -h])
}

/// Controlled-NOT with the first qubit as control.
pub fn cnot() -> DMatrix<C64> {
    real(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0, //
            0.0, 0.0, 1.0, 0.0,
        ],
    )
}

pub fn swap() -> DMatrix<C64> {
    real(
        4,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        ],
    )
}

pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Haar-distributed unitary from the QR of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    qr_decompose(&g).0
}

/// Largest entry of `|U^dagger U - 1|`, or infinity for non-square input.
pub fn unitarity_defect(u: &DMatrix<C64>) -> f64 {
    if !u.is_square() {
        return f64::INFINITY;
    }
    let g = u.adjoint() * u;
    (g - DMatrix::identity(u.nrows(), u.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_unitary(u: &DMatrix<C64>, tol: f64) -> bool {
    unitarity_defect(u) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_gates_are_unitary() {
        for g in [pauli_x(), pauli_y(), pauli_z(), hadamard(), cnot(), swap()] {
            assert!(is_unitary(&g, 1e-15));
        }
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10> -> |11>
        let v = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 0.0].map(|x| C64::new(x, 0.0)));
        let out = cnot() * v;
        assert_eq!(out[(3, 0)], C64::new(1.0, 0.0));
    }

    #[test]
    fn random_unitaries_are_unitary_and_seeded() {
        let mut a = ChaCha8Rng::seed_from_u64(4);
        let mut b = ChaCha8Rng::seed_from_u64(4);
        let u = random_unitary(4, &mut a);
        assert!(is_unitary(&u, 1e-13));
        assert_eq!(u, random_unitary(4, &mut b));
    }
}
