//! Completely positive trace-preserving maps in Kraus form.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{LpdoError, Result};
use crate::gates;
use crate::tensor::qr_isometrize;

pub const CPTP_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    operators: Vec<DMatrix<C64>>,
    label: String,
}

impl KrausChannel {
    /// Validates that all operators are square of one size and that
    /// `sum_k K_k^dagger K_k = 1` within [`CPTP_TOLERANCE`].
    pub fn new(operators: Vec<DMatrix<C64>>, label: impl Into<String>) -> Result<Self> {
        let Some(first) = operators.first() else {
            return Err(LpdoError::NotCptp(f64::INFINITY));
        };
        let d = first.nrows();
        if operators.iter().any(|k| k.shape() != (d, d)) {
            return Err(LpdoError::ShapeMismatch("Kraus operators must share one square shape".into()));
        }
        let channel = Self {
            operators,
            label: label.into(),
        };
        let defect = channel.completeness_defect();
        if defect > CPTP_TOLERANCE {
            return Err(LpdoError::NotCptp(defect));
        }
        Ok(channel)
    }

    pub fn operators(&self) -> &[DMatrix<C64>] {
        &self.operators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn completeness_defect(&self) -> f64 {
        let d = self.operators[0].nrows();
        let sum = self
            .operators
            .iter()
            .fold(DMatrix::<C64>::zeros(d, d), |acc, k| acc + k.adjoint() * k);
        (sum - DMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn rate_checked(gamma: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(LpdoError::Precondition(format!("noise rate {gamma} outside [0, 1]")));
        }
        Ok(gamma)
    }

    /// `K0 = sqrt(g) Z`, `K1 = sqrt(1 - g) 1`.
    pub fn dephasing(gamma: f64) -> Result<Self> {
        let g = Self::rate_checked(gamma)?;
        Self::new(
            vec![
                gates::pauli_z() * C64::new(g.sqrt(), 0.0),
                gates::identity(2) * C64::new((1.0 - g).sqrt(), 0.0),
            ],
            format!("dephasing({gamma})"),
        )
    }

    /// `K0 = sqrt(g) X`, `K1 = sqrt(1 - g) 1`.
    pub fn bitflip(gamma: f64) -> Result<Self> {
        let g = Self::rate_checked(gamma)?;
        Self::new(
            vec![
                gates::pauli_x() * C64::new(g.sqrt(), 0.0),
                gates::identity(2) * C64::new((1.0 - g).sqrt(), 0.0),
            ],
            format!("bitflip({gamma})"),
        )
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![gates::identity(dim)],
            label: "identity".into(),
        }
    }

    /// A random channel with `n_ops` Kraus operators, obtained by slicing a
    /// random `(n_ops * dim) x dim` isometry into square blocks.
    pub fn random<R: Rng + ?Sized>(dim: usize, n_ops: usize, rng: &mut R) -> Result<Self> {
        let g = DMatrix::from_fn(n_ops * dim, dim, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let w = qr_isometrize(&g)?;
        let operators = (0..n_ops).map(|k| w.rows(k * dim, dim).into_owned()).collect();
        Self::new(operators, format!("random({n_ops})"))
    }
}
