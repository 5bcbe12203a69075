//! ADAM on a product of Stiefel manifolds.
//!
//! Per factor, one call performs
//!
//! ```text
//! M ← γ1·M + (1−γ1)·∇F
//! v ← γ2·v + (1−γ2)·‖∇F‖²_F
//! r ← (1−γ1^t)·√(v/(1−γ2^t) + ε)
//! G ← proj_X(M) / r
//! τ ← min(τ0, 1/(‖G‖_F + ε))
//! X ← Cayley(X, G, τ)
//! ```
//!
//! `v` is a scalar per factor and ε sits inside the square root. The
//! iteration counter `t` is shared by all factors and starts at 1.

use num_traits::Float;

use super::{cayley_retract, project_tangent, ProductPoint};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;
use crate::tensor::ComplexMatrix;

/// Which gradient norm feeds the second-moment estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SecondMoment {
    /// Norm of the Euclidean gradient.
    #[default]
    Euclidean,
    /// Norm of the tangent-projected gradient.
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub tau0: f64,
    pub epsilon: f64,
    pub second_moment: SecondMoment,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { gamma1: 0.9, gamma2: 0.999, tau0: 0.1, epsilon: 1e-8, second_moment: SecondMoment::Euclidean }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |g: f64| (0.0..1.0).contains(&g);
        if !unit(self.gamma1) || !unit(self.gamma2) {
            return Err(Error::Argument(format!(
                "moment decay rates must lie in [0, 1), got gamma1={}, gamma2={}",
                self.gamma1, self.gamma2
            )));
        }
        if !(self.tau0 > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::Argument(format!(
                "tau0 and epsilon must be positive, got tau0={}, epsilon={}",
                self.tau0, self.epsilon
            )));
        }
        Ok(())
    }
}

/// Optimizer moments for every factor of a [`ProductPoint`].
#[derive(Clone, Debug)]
pub struct AdamState<T: Real> {
    config: AdamConfig,
    first_moments: Vec<ComplexMatrix<T>>,
    second_moments: Vec<T>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(point: &ProductPoint<T>, config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_moments: point.factors().iter().map(|f| ComplexMatrix::zeros(f.n(), f.p())).collect(),
            second_moments: vec![T::zero(); point.len()],
            step: 0,
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn first_moments(&self) -> &[ComplexMatrix<T>] {
        &self.first_moments
    }

    pub fn second_moments(&self) -> &[T] {
        &self.second_moments
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One joint ADAM step on every factor.
pub fn adam_step<T: Real>(
    point: &ProductPoint<T>,
    euclid_grads: &[ComplexMatrix<T>],
    state: &mut AdamState<T>,
) -> Result<ProductPoint<T>> {
    let active = vec![true; point.len()];
    adam_step_masked(point, euclid_grads, state, &active)
}

/// As [`adam_step`], but factors with `active[k] == false` are left
/// untouched (their moments are not updated either).
pub fn adam_step_masked<T: Real>(
    point: &ProductPoint<T>,
    euclid_grads: &[ComplexMatrix<T>],
    state: &mut AdamState<T>,
    active: &[bool],
) -> Result<ProductPoint<T>> {
    let k = point.len();
    if euclid_grads.len() != k || active.len() != k || state.first_moments.len() != k {
        return Err(dim_err!(
            "point has {k} factors but got {} gradients, {} mask entries, {} moments",
            euclid_grads.len(),
            active.len(),
            state.first_moments.len()
        ));
    }
    for (i, (f, g)) in point.factors().iter().zip(euclid_grads).enumerate() {
        if g.shape() != f.matrix().shape() {
            return Err(dim_err!("gradient {i} has shape {:?}, factor has {:?}", g.shape(), f.matrix().shape()));
        }
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for factor {i}")));
        }
    }

    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let g1 = T::lit(cfg.gamma1);
    let g2 = T::lit(cfg.gamma2);
    let eps = T::lit(cfg.epsilon);
    let tau0 = T::lit(cfg.tau0);
    let bias1 = T::one() - Float::powi(g1, t);
    let bias2 = T::one() - Float::powi(g2, t);

    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let x = &point.factors()[i];
        if !active[i] {
            out.push(x.clone());
            continue;
        }
        let grad = &euclid_grads[i];
        let m = &mut state.first_moments[i];
        *m = m.scale(g1);
        m.axpy(T::one() - g1, grad);
        let g_norm_sq = match cfg.second_moment {
            SecondMoment::Euclidean => grad.norm_sqr(),
            SecondMoment::Projected => project_tangent(x, grad)?.norm_sqr(),
        };
        let v = &mut state.second_moments[i];
        *v = g2 * *v + (T::one() - g2) * g_norm_sq;
        let r = bias1 * (*v / bias2 + eps).sqrt();
        let g_st = project_tangent(x, m)?.scale(T::one() / r);
        let g_st_norm = g_st.frobenius_norm();
        if g_st_norm == T::zero() {
            out.push(x.clone());
            continue;
        }
        let tau = tau0.min(T::one() / (g_st_norm + eps));
        out.push(cayley_retract(x, &g_st, tau)?);
    }
    Ok(ProductPoint::new(out))
}
