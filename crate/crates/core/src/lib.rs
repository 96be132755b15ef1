//! Locally purified density operators on qubit chains.
//!
//! The central type is [`LpdoChain`], a chain of site tensors
//! `A[s, chi_l, chi_r, kappa]` whose density operator is
//! `rho = sum_kappa A A^dagger`. Around it sit truncation sweeps
//! ([`prune`]), Riemannian optimization of Kraus-leg isometries
//! ([`stiefel`]), the closed-form disentangler for weak injectivity
//! ([`injectivity`]) and a dense reference simulator ([`oracle`]).

pub mod bundle;
pub mod chain;
pub mod channel;
pub mod error;
pub mod gates;
pub mod injectivity;
pub mod measures;
pub mod oracle;
pub mod prune;
pub mod stiefel;
pub mod tensor;

pub use chain::LpdoChain;
pub use channel::KrausChannel;
pub use error::{LpdoError, Result};
pub use num_complex::Complex64 as C64;
