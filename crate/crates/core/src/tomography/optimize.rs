//! Riemannian ADAM driver, initialization and the comb-only baseline.

use std::time::Instant;

use log::{debug, info};

use super::objective::Objective;
use crate::cis::{CisSet, DimensionProfile, FactorId};
use crate::error::{Error, Result};
use crate::random::derive_seed;
use crate::scalar::Real;
use crate::simulator::Dataset;
use crate::stiefel::{
    adam_step_masked, cayley_retract, project_tangent, random_stiefel, random_tangent, AdamConfig, AdamState,
    ProductPoint,
};
use crate::tensor::ComplexMatrix;

// stream tags keep initial points independent of models drawn from the same seed
const INIT_STREAM: u64 = 0x494e_4954;
const PERTURB_STREAM: u64 = 0x5045_5254;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub adam: AdamConfig,
    /// Maximum number of ADAM steps.
    pub max_iterations: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// When set, convergence additionally requires the loss to be below this.
    pub loss_tolerance: Option<f64>,
    /// Log progress every this many iterations (0 disables).
    pub log_every: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            max_iterations: 50_000,
            gradient_tolerance: 1e-5,
            loss_tolerance: None,
            log_every: 1000,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::Argument("gradient tolerance must be positive".into()));
        }
        if let Some(l) = self.loss_tolerance {
            if !(l > 0.0) {
                return Err(Error::Argument("loss tolerance must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The message names the record or factor that went non-finite.
    NumericFailure(String),
}

#[derive(Clone, Debug)]
pub struct ReconstructionResult<T: Real> {
    /// Last successfully evaluated iterate.
    pub cis: CisSet<T>,
    /// One entry per evaluated iterate, starting with the initial point.
    pub loss_trace: Vec<f64>,
    pub grad_norm_trace: Vec<f64>,
    /// Milliseconds since the start of the run, per evaluated iterate.
    pub wall_ms: Vec<f64>,
    /// ADAM steps taken.
    pub iterations: usize,
    pub termination: Termination,
}

impl<T: Real> ReconstructionResult<T> {
    pub fn final_loss(&self) -> f64 {
        self.loss_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.grad_norm_trace.last().copied().unwrap_or(f64::NAN)
    }
}

/// Starting point of a reconstruction.
#[derive(Clone, Debug)]
pub enum InitStrategy<T: Real> {
    /// Independent `random_stiefel` draw per factor.
    Random { seed: u64 },
    /// Design values.
    FromPrior(CisSet<T>),
    /// One Cayley step of length `angle` per factor along a seeded random
    /// unit tangent direction.
    TruthPerturbed { truth: CisSet<T>, angle: f64, seed: u64 },
}

pub fn init_strategy<T: Real>(profile: &DimensionProfile, init: &InitStrategy<T>) -> Result<ProductPoint<T>> {
    let check = |cis: &CisSet<T>| {
        if cis.profile() != profile {
            return Err(Error::Argument("initial CIS set does not match the reconstruction profile".into()));
        }
        Ok(())
    };
    match init {
        InitStrategy::Random { seed } => {
            let factors = profile
                .factor_shapes()
                .into_iter()
                .enumerate()
                .map(|(k, (n, p))| random_stiefel(n, p, derive_seed(derive_seed(*seed, INIT_STREAM), k as u64)))
                .collect::<Result<Vec<_>>>()?;
            Ok(ProductPoint::new(factors))
        }
        InitStrategy::FromPrior(prior) => {
            check(prior)?;
            Ok(prior.to_product_point())
        }
        InitStrategy::TruthPerturbed { truth, angle, seed } => {
            check(truth)?;
            if !(angle.is_finite() && *angle >= 0.0) {
                return Err(Error::Argument(format!("perturbation angle must be finite and non-negative, got {angle}")));
            }
            let point = truth.to_product_point();
            if *angle == 0.0 {
                return Ok(point);
            }
            let factors = point
                .factors()
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    let dir = random_tangent(x, derive_seed(derive_seed(*seed, PERTURB_STREAM), k as u64))?;
                    cayley_retract(x, &dir, T::lit(*angle))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ProductPoint::new(factors))
        }
    }
}

/// Root-sum-of-squares of the tangent-projected gradients of active factors.
pub fn riemannian_norm<T: Real>(point: &ProductPoint<T>, grads: &[ComplexMatrix<T>], active: &[bool]) -> Result<T> {
    let mut sum = T::zero();
    for ((x, g), &on) in point.factors().iter().zip(grads).zip(active) {
        if on {
            sum += project_tangent(x, g)?.norm_sqr();
        }
    }
    Ok(sum.sqrt())
}

fn to_cis<T: Real>(profile: &DimensionProfile, point: &ProductPoint<T>) -> Result<CisSet<T>> {
    let factors = point.factors().iter().map(|f| f.matrix().clone()).collect();
    CisSet::from_factors_unchecked(profile, factors)
}

/// Full CIS reconstruction: every factor is optimized.
pub fn reconstruct<T: Real>(
    data: &Dataset,
    profile: &DimensionProfile,
    init: &InitStrategy<T>,
    cfg: &OptimizerConfig,
) -> Result<ReconstructionResult<T>> {
    let start = init_strategy(profile, init)?;
    reconstruct_masked(data, profile, start, &vec![true; profile.factor_count()], cfg)
}

/// Comb-only reconstruction with instruments and states frozen at the
/// nominal design values.
pub fn iqct_baseline<T: Real>(
    data: &Dataset,
    profile: &DimensionProfile,
    nominal: &CisSet<T>,
    cfg: &OptimizerConfig,
) -> Result<ReconstructionResult<T>> {
    let start = init_strategy(profile, &InitStrategy::FromPrior(nominal.clone()))?;
    let active: Vec<bool> = profile.factor_ids().into_iter().map(|id| matches!(id, FactorId::Comb(_))).collect();
    reconstruct_masked(data, profile, start, &active, cfg)
}

/// Optimization loop on the factors flagged in `active`; the others stay
/// bit-identical to `start`.
pub fn reconstruct_masked<T: Real>(
    data: &Dataset,
    profile: &DimensionProfile,
    start: ProductPoint<T>,
    active: &[bool],
    cfg: &OptimizerConfig,
) -> Result<ReconstructionResult<T>> {
    cfg.validate()?;
    if start.shapes() != profile.factor_shapes() || active.len() != start.len() {
        return Err(Error::Argument("initial point does not match the profile".into()));
    }
    let objective = Objective::new(profile, data)?;
    let clock = Instant::now();
    let mut state = AdamState::new(&start, cfg.adam)?;
    let mut point = start;
    let mut last_good = to_cis(profile, &point)?;
    let (mut loss_trace, mut grad_norm_trace, mut wall_ms) = (Vec::new(), Vec::new(), Vec::new());
    let mut iterations = 0;
    let termination = loop {
        let cis = to_cis(profile, &point)?;
        let (report, grads) = match objective.evaluate(&cis) {
            Ok(r) => r,
            Err(Error::Numeric(msg)) => break Termination::NumericFailure(msg),
            Err(e) => return Err(e),
        };
        let gnorm = riemannian_norm(&point, &grads.factors, active)?;
        last_good = cis;
        loss_trace.push(report.total.as_f64());
        grad_norm_trace.push(gnorm.as_f64());
        wall_ms.push(clock.elapsed().as_secs_f64() * 1e3);
        if cfg.log_every > 0 && iterations % cfg.log_every == 0 {
            info!("iter {iterations}: loss {:.3e}, grad {:.3e}", report.total, gnorm);
        }
        if !gnorm.is_finite() {
            break Termination::NumericFailure(format!("gradient norm is not finite at iteration {iterations}"));
        }
        let loss_ok = cfg.loss_tolerance.is_none_or(|tol| report.total.as_f64() < tol);
        if gnorm.as_f64() < cfg.gradient_tolerance && loss_ok {
            break Termination::Converged;
        }
        if iterations == cfg.max_iterations {
            break Termination::MaxIterations;
        }
        point = match adam_step_masked(&point, &grads.factors, &mut state, active) {
            Ok(p) => p,
            Err(Error::Numeric(msg)) => break Termination::NumericFailure(msg),
            Err(e) => return Err(e),
        };
        iterations += 1;
    };
    debug!("stopped after {iterations} steps: {termination:?}");
    Ok(ReconstructionResult { cis: last_good, loss_trace, grad_norm_trace, wall_ms, iterations, termination })
}
