//! Seeded randomness helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::scalar::{Real, C};
use crate::tensor::ComplexMatrix;

/// SplitMix64 finalizer; mixes a base seed with a stream index so that
/// independent components get decorrelated, reproducible seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries (unit variance per
/// real and imaginary part).
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C::new(T::lit(re), T::lit(im))
    })
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix<T> {
    let g = complex_gaussian::<T, R>(n, n, rng);
    (&g + &g.dagger()).scale(T::lit(0.5))
}

/// Random density matrix `G G† / Tr(G G†)`.
pub fn random_density<T: Real, R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix<T> {
    let g = complex_gaussian::<T, R>(n, n, rng);
    let rho = g.mul_adjoint(&g).expect("square");
    let tr = rho.trace().re;
    rho.scale(T::one() / tr)
}
