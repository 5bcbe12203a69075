//! Self-consistent quantum comb tomography.
//!
//! A comb–instrument–state (CIS) set is parameterized as a point on a product
//! of complex Stiefel manifolds and reconstructed from outcome statistics by
//! Riemannian ADAM with a Cayley retraction. Physical constraints (complete
//! positivity, trace preservation, causality) hold by construction for every
//! iterate.
//!
//! The numerical core is generic over [`Real`]; the aliases at the crate root
//! fix the scalar to `f64`, which is what the CLI and the acceptance suite use.

pub mod cis;
pub mod error;
pub mod random;
pub mod scalar;
pub mod simulator;
pub mod stiefel;
pub mod tensor;
pub mod tomography;

pub use error::{Error, Result};
pub use scalar::Real;

pub type CMatrix = tensor::ComplexMatrix<f64>;
pub type Point = stiefel::StiefelPoint<f64>;
pub type Product = stiefel::ProductPoint<f64>;
pub type Cis = cis::CisSet<f64>;
pub type CombF64 = cis::Comb<f64>;
pub type InstrumentF64 = cis::Instrument<f64>;
