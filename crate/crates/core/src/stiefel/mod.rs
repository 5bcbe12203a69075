//! Complex Stiefel manifold geometry and Riemannian ADAM.
//!
//! `St(n, p) = { X ∈ ℂ^{n×p} : X†X = I_p }`. Tangent vectors at `X` satisfy
//! `X†T + T†X = 0`; the orthogonal projection of an ambient matrix `G` is
//! `G − X·sym(X†G)`. Steps are mapped back to the manifold with the Cayley
//! transform, which preserves orthonormality exactly in exact arithmetic.

mod adam;

pub use adam::{adam_step, adam_step_masked, AdamConfig, AdamState, SecondMoment};

use crate::error::{dim_err, Error, Result};
use crate::random::{complex_gaussian, rng_from_seed};
use crate::scalar::Real;
use crate::tensor::{orthonormalize_columns, solve, ComplexMatrix};

/// An `n × p` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelPoint<T: Real> {
    matrix: ComplexMatrix<T>,
}

impl<T: Real> StiefelPoint<T> {
    /// Validates orthonormality; never re-orthonormalizes.
    pub fn new(matrix: ComplexMatrix<T>) -> Result<Self> {
        let point = Self::new_unchecked(matrix)?;
        let dev = point.max_deviation();
        if !(dev < T::orthonormality_tol()) {
            return Err(Error::Validation(format!(
                "{}x{} matrix is not on the Stiefel manifold (max |X†X - I| = {dev:e})",
                point.n(),
                point.p()
            )));
        }
        Ok(point)
    }

    /// Wraps a matrix without checking orthonormality. Only `n ≥ p` is
    /// enforced. Used for diagnostics on deliberately off-manifold inputs and
    /// for outputs of the Cayley map, which are orthonormal by construction.
    pub fn new_unchecked(matrix: ComplexMatrix<T>) -> Result<Self> {
        if matrix.rows() < matrix.cols() {
            return Err(dim_err!("Stiefel point needs n >= p, got {}x{}", matrix.rows(), matrix.cols()));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn p(&self) -> usize {
        self.matrix.cols()
    }

    fn gram_error(&self) -> ComplexMatrix<T> {
        let gram = self.matrix.adjoint_mul(&self.matrix).expect("same rows");
        &gram - &ComplexMatrix::identity(self.p())
    }

    /// Entrywise max of `|X†X − I|`.
    pub fn max_deviation(&self) -> T {
        self.gram_error().max_abs()
    }

    /// `‖X†X − I‖_F`.
    pub fn orthonormality_residual(&self) -> T {
        self.gram_error().frobenius_norm()
    }
}

/// Ordered product of Stiefel points.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint<T: Real> {
    factors: Vec<StiefelPoint<T>>,
}

impl<T: Real> ProductPoint<T> {
    pub fn new(factors: Vec<StiefelPoint<T>>) -> Self {
        Self { factors }
    }

    pub fn factors(&self) -> &[StiefelPoint<T>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<StiefelPoint<T>> {
        self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.factors.iter().map(|f| f.matrix.shape()).collect()
    }

    /// Largest `‖X†X − I‖_F` over all factors.
    pub fn max_orthonormality_residual(&self) -> T {
        self.factors.iter().map(StiefelPoint::orthonormality_residual).fold(T::zero(), T::max)
    }
}

/// `(m + m†)/2`.
pub fn sym<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(dim_err!("sym needs a square matrix, got {}x{}", m.rows(), m.cols()));
    }
    Ok((m + &m.dagger()).scale(T::lit(0.5)))
}

/// `(m − m†)/2`.
pub fn skew<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(dim_err!("skew needs a square matrix, got {}x{}", m.rows(), m.cols()));
    }
    Ok((m - &m.dagger()).scale(T::lit(0.5)))
}

/// Orthogonal projection onto the tangent space: `g − x·sym(x†g)`.
pub fn project_tangent<T: Real>(x: &StiefelPoint<T>, g: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if g.shape() != x.matrix.shape() {
        return Err(dim_err!("gradient {:?} does not match point {:?}", g.shape(), x.matrix.shape()));
    }
    let s = sym(&x.matrix.adjoint_mul(g)?)?;
    Ok(g - &(&x.matrix * &s))
}

/// Cayley retraction `(I + τ/2·D)⁻¹(I − τ/2·D)·x` with `D = g·x† − x·g†`.
pub fn cayley_retract<T: Real>(x: &StiefelPoint<T>, g_st: &ComplexMatrix<T>, tau: T) -> Result<StiefelPoint<T>> {
    if g_st.shape() != x.matrix.shape() {
        return Err(dim_err!("direction {:?} does not match point {:?}", g_st.shape(), x.matrix.shape()));
    }
    if !(tau > T::zero()) {
        return Err(Error::Argument(format!("retraction step must be positive, got {tau}")));
    }
    let d = &g_st.mul_adjoint(&x.matrix)? - &x.matrix.mul_adjoint(g_st)?;
    let half = d.scale(tau * T::lit(0.5));
    let id = ComplexMatrix::identity(x.n());
    let lhs = &id + &half;
    let rhs = &(&id - &half) * &x.matrix;
    StiefelPoint::new_unchecked(solve(&lhs, &rhs)?)
}

/// Orthonormalized complex Gaussian `n × p` matrix (QR with positive
/// diagonal of R), deterministic in `seed`.
pub fn random_stiefel<T: Real>(n: usize, p: usize, seed: u64) -> Result<StiefelPoint<T>> {
    if n < p || p == 0 {
        return Err(dim_err!("random_stiefel needs n >= p >= 1, got n={n}, p={p}"));
    }
    let mut rng = rng_from_seed(seed);
    let g = complex_gaussian::<T, _>(n, p, &mut rng);
    StiefelPoint::new(orthonormalize_columns(&g)?)
}

/// Random unit-Frobenius tangent vector at `x`.
pub fn random_tangent<T: Real>(x: &StiefelPoint<T>, seed: u64) -> Result<ComplexMatrix<T>> {
    let mut rng = rng_from_seed(seed);
    let g = complex_gaussian::<T, _>(x.n(), x.p(), &mut rng);
    let t = project_tangent(x, &g)?;
    let norm = t.frobenius_norm();
    if norm == T::zero() {
        return Ok(t);
    }
    Ok(t.scale(T::one() / norm))
}
