//! The comb–instrument–state (CIS) set and its Stiefel parameterization.
//!
//! Orientation conventions (used consistently across the crate):
//!
//! * Comb isometry `V^(t)` is a `(d_out·d_a[t+1]) × (d_in·d_a[t])` matrix
//!   mapping `i_t ⊗ a_t → o_t ⊗ a_{t+1}` with `V†V = I` on the input side.
//! * An instrument is the vertical stack `J = [W_1; …; W_m]` of branch
//!   dilations `W_x : o_t → i_{t+1} ⊗ e_x`, so `J†J = Σ_x W_x†W_x = I`.
//! * A state is a purification `S ∈ i_0 ⊗ r` with `S†S = 1`.
//!
//! In every tensor product the system factor comes first.

mod choi;
mod profile;
mod ptm;

pub use choi::{
    apply_branch, branch_choi, check_causality, check_instrument, comb_choi, comb_isometry, kraus_operators, numerical_rank,
    state_density, CausalityReport, InstrumentReport,
};
pub use profile::{parse_ancillas, DimensionProfile, FactorId};
pub use ptm::{delta_ptm, pauli, ptm_differences, ptm_of_branch, PtmDifference};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;
use crate::random::derive_seed;
use crate::stiefel::{random_stiefel, ProductPoint, StiefelPoint};
use crate::tensor::ComplexMatrix;

/// Comb as a chain of isometries.
#[derive(Clone, Debug, PartialEq)]
pub struct Comb<T: Real> {
    isometries: Vec<StiefelPoint<T>>,
    d_in: Vec<usize>,
    d_out: Vec<usize>,
    d_anc: Vec<usize>,
}

impl<T: Real> Comb<T> {
    /// `d_in`, `d_out` have one entry per slot, `d_anc` one more.
    pub fn new(isometries: Vec<StiefelPoint<T>>, d_in: &[usize], d_out: &[usize], d_anc: &[usize]) -> Result<Self> {
        let n = isometries.len();
        if d_in.len() < n || d_out.len() != n || d_anc.len() != n + 1 {
            return Err(dim_err!("comb dimension lists do not match {n} slots"));
        }
        for (t, v) in isometries.iter().enumerate() {
            let expect = (d_out[t] * d_anc[t + 1], d_in[t] * d_anc[t]);
            if v.matrix().shape() != expect {
                return Err(dim_err!("slot {t}: isometry is {:?}, expected {:?}", v.matrix().shape(), expect));
            }
        }
        Ok(Self { isometries, d_in: d_in[..n].to_vec(), d_out: d_out.to_vec(), d_anc: d_anc.to_vec() })
    }

    pub fn slots(&self) -> usize {
        self.isometries.len()
    }

    pub fn isometry(&self, t: usize) -> &StiefelPoint<T> {
        &self.isometries[t]
    }

    pub fn isometries(&self) -> &[StiefelPoint<T>] {
        &self.isometries
    }

    pub fn d_in(&self) -> &[usize] {
        &self.d_in
    }

    pub fn d_out(&self) -> &[usize] {
        &self.d_out
    }

    pub fn d_anc(&self) -> &[usize] {
        &self.d_anc
    }
}

/// Quantum instrument stored as its stacked Stinespring dilation.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument<T: Real> {
    stacked: StiefelPoint<T>,
    output_dim: usize,
    env_dims: Vec<usize>,
}

impl<T: Real> Instrument<T> {
    /// `stacked` has `Σ_x output_dim·env_dims[x]` rows.
    pub fn new(stacked: StiefelPoint<T>, output_dim: usize, env_dims: Vec<usize>) -> Result<Self> {
        let rows: usize = env_dims.iter().map(|e| e * output_dim).sum();
        if env_dims.is_empty() || output_dim == 0 || env_dims.contains(&0) {
            return Err(dim_err!("instrument needs at least one branch and positive dimensions"));
        }
        if stacked.n() != rows {
            return Err(dim_err!("stacked dilation has {} rows, branches need {rows}", stacked.n()));
        }
        Ok(Self { stacked, output_dim, env_dims })
    }

    /// Stacks branch dilations and validates `Σ W†W = I`.
    pub fn from_branches(branches: &[ComplexMatrix<T>], output_dim: usize) -> Result<Self> {
        let (stacked, env_dims) = Self::stack(branches, output_dim)?;
        Self::new(StiefelPoint::new(stacked)?, output_dim, env_dims)
    }

    /// As [`Instrument::from_branches`] without the completeness check.
    pub fn from_branches_unchecked(branches: &[ComplexMatrix<T>], output_dim: usize) -> Result<Self> {
        let (stacked, env_dims) = Self::stack(branches, output_dim)?;
        Self::new(StiefelPoint::new_unchecked(stacked)?, output_dim, env_dims)
    }

    fn stack(branches: &[ComplexMatrix<T>], output_dim: usize) -> Result<(ComplexMatrix<T>, Vec<usize>)> {
        let first = branches.first().ok_or_else(|| dim_err!("instrument needs at least one branch"))?;
        let cols = first.cols();
        let mut env_dims = Vec::with_capacity(branches.len());
        for w in branches {
            if w.cols() != cols || output_dim == 0 || w.rows() % output_dim != 0 {
                return Err(dim_err!("branch {}x{} incompatible with output dimension {output_dim}", w.rows(), w.cols()));
            }
            env_dims.push(w.rows() / output_dim);
        }
        let rows = branches.iter().map(ComplexMatrix::rows).sum();
        let mut stacked = ComplexMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for w in branches {
            stacked.set_block(r0, 0, w)?;
            r0 += w.rows();
        }
        Ok((stacked, env_dims))
    }

    pub fn stacked(&self) -> &StiefelPoint<T> {
        &self.stacked
    }

    pub fn input_dim(&self) -> usize {
        self.stacked.p()
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn env_dims(&self) -> &[usize] {
        &self.env_dims
    }

    pub fn branch_count(&self) -> usize {
        self.env_dims.len()
    }

    /// First row of branch `x` inside the stacked dilation.
    pub fn row_offset(&self, x: usize) -> usize {
        self.env_dims[..x].iter().map(|e| e * self.output_dim).sum()
    }

    /// Dilation `W_x` of branch `x`.
    pub fn branch(&self, x: usize) -> ComplexMatrix<T> {
        let rows = self.env_dims[x] * self.output_dim;
        self.stacked.matrix().block(self.row_offset(x), 0, rows, self.input_dim()).expect("branch in range")
    }

    pub fn branches(&self) -> Vec<ComplexMatrix<T>> {
        (0..self.branch_count()).map(|x| self.branch(x)).collect()
    }
}

/// Initial state stored as a purification on `i_0 ⊗ r`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePrep<T: Real> {
    purification: StiefelPoint<T>,
    system_dim: usize,
}

impl<T: Real> StatePrep<T> {
    pub fn new(purification: StiefelPoint<T>, system_dim: usize) -> Result<Self> {
        if purification.p() != 1 || system_dim == 0 || purification.n() % system_dim != 0 {
            return Err(dim_err!(
                "purification {}x{} incompatible with system dimension {system_dim}",
                purification.n(),
                purification.p()
            ));
        }
        Ok(Self { purification, system_dim })
    }

    pub fn purification(&self) -> &StiefelPoint<T> {
        &self.purification
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn ref_dim(&self) -> usize {
        self.purification.n() / self.system_dim
    }

    /// Purification reshaped to the `d_sys × d_ref` matrix `M` with `ρ = M M†`.
    pub fn amplitude_matrix(&self) -> ComplexMatrix<T> {
        let r = self.ref_dim();
        ComplexMatrix::new(self.system_dim, r, self.purification.matrix().data().to_vec()).expect("sizes agree")
    }
}

/// Full comb–instrument–state set with its dimension profile.
#[derive(Clone, Debug, PartialEq)]
pub struct CisSet<T: Real> {
    profile: DimensionProfile,
    comb: Comb<T>,
    instruments: Vec<Vec<Instrument<T>>>,
    states: Vec<StatePrep<T>>,
}

impl<T: Real> CisSet<T> {
    pub fn new(
        profile: DimensionProfile,
        comb: Comb<T>,
        instruments: Vec<Vec<Instrument<T>>>,
        states: Vec<StatePrep<T>>,
    ) -> Result<Self> {
        let n = profile.slots();
        if comb.slots() != n || instruments.len() != n || states.len() != profile.n_states() {
            return Err(dim_err!("CIS components do not match the profile's slot and state counts"));
        }
        for t in 0..n {
            if comb.isometry(t).matrix().shape() != profile.comb_shape(t) {
                return Err(dim_err!("comb slot {t} does not match profile"));
            }
            if instruments[t].len() != profile.n_instruments(t) {
                return Err(dim_err!("slot {t} has {} instruments, profile says {}", instruments[t].len(), profile.n_instruments(t)));
            }
            for (v, ins) in instruments[t].iter().enumerate() {
                if ins.env_dims() != profile.d_env()[t][v].as_slice()
                    || ins.output_dim() != profile.d_in()[t + 1]
                    || ins.input_dim() != profile.d_out()[t]
                {
                    return Err(dim_err!("instrument {v} at slot {t} does not match profile"));
                }
            }
        }
        for (u, s) in states.iter().enumerate() {
            if s.system_dim() != profile.d_in()[0] || s.ref_dim() != profile.d_ref()[u] {
                return Err(dim_err!("state {u} does not match profile"));
            }
        }
        Ok(Self { profile, comb, instruments, states })
    }

    /// Rebuilds a CIS set from factor matrices in canonical order, checking
    /// every factor's orthonormality.
    pub fn from_factors(profile: &DimensionProfile, factors: Vec<ComplexMatrix<T>>) -> Result<Self> {
        Self::build(profile, factors, true)
    }

    /// As [`CisSet::from_factors`] but accepts off-manifold matrices. Used for
    /// finite differences and negative controls.
    pub fn from_factors_unchecked(profile: &DimensionProfile, factors: Vec<ComplexMatrix<T>>) -> Result<Self> {
        Self::build(profile, factors, false)
    }

    pub fn from_product_point(profile: &DimensionProfile, point: ProductPoint<T>) -> Result<Self> {
        let factors = point.into_factors().into_iter().map(StiefelPoint::into_matrix).collect();
        Self::build(profile, factors, true)
    }

    fn build(profile: &DimensionProfile, factors: Vec<ComplexMatrix<T>>, checked: bool) -> Result<Self> {
        if factors.len() != profile.factor_count() {
            return Err(dim_err!("expected {} factors, got {}", profile.factor_count(), factors.len()));
        }
        let wrap = |m: ComplexMatrix<T>| if checked { StiefelPoint::new(m) } else { StiefelPoint::new_unchecked(m) };
        let mut it = factors.into_iter();
        let n = profile.slots();
        let mut isos = Vec::with_capacity(n);
        for t in 0..n {
            let m = it.next().expect("counted");
            if m.shape() != profile.comb_shape(t) {
                return Err(dim_err!("comb factor {t} has shape {:?}, expected {:?}", m.shape(), profile.comb_shape(t)));
            }
            isos.push(wrap(m)?);
        }
        let comb = Comb::new(isos, profile.d_in(), profile.d_out(), profile.d_anc())?;
        let mut instruments = Vec::with_capacity(n);
        for t in 0..n {
            let mut slot = Vec::with_capacity(profile.n_instruments(t));
            for v in 0..profile.n_instruments(t) {
                let m = it.next().expect("counted");
                if m.shape() != profile.instrument_shape(t, v) {
                    return Err(dim_err!("instrument ({t},{v}) has shape {:?}", m.shape()));
                }
                slot.push(Instrument::new(wrap(m)?, profile.d_in()[t + 1], profile.d_env()[t][v].clone())?);
            }
            instruments.push(slot);
        }
        let mut states = Vec::with_capacity(profile.n_states());
        for u in 0..profile.n_states() {
            let m = it.next().expect("counted");
            if m.shape() != profile.state_shape(u) {
                return Err(dim_err!("state {u} has shape {:?}", m.shape()));
            }
            states.push(StatePrep::new(wrap(m)?, profile.d_in()[0])?);
        }
        Self::new(profile.clone(), comb, instruments, states)
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn comb(&self) -> &Comb<T> {
        &self.comb
    }

    pub fn instruments(&self) -> &[Vec<Instrument<T>>] {
        &self.instruments
    }

    pub fn instrument(&self, slot: usize, index: usize) -> Result<&Instrument<T>> {
        self.instruments
            .get(slot)
            .and_then(|s| s.get(index))
            .ok_or_else(|| Error::Lookup(format!("no instrument {index} at slot {slot}")))
    }

    pub fn states(&self) -> &[StatePrep<T>] {
        &self.states
    }

    pub fn state(&self, u: usize) -> Result<&StatePrep<T>> {
        self.states.get(u).ok_or_else(|| Error::Lookup(format!("no state {u}")))
    }

    /// Factor matrices in canonical order.
    pub fn factor_matrices(&self) -> Vec<&ComplexMatrix<T>> {
        let mut out: Vec<&ComplexMatrix<T>> = self.comb.isometries.iter().map(StiefelPoint::matrix).collect();
        out.extend(self.instruments.iter().flatten().map(|i| i.stacked.matrix()));
        out.extend(self.states.iter().map(|s| s.purification.matrix()));
        out
    }

    pub fn to_product_point(&self) -> ProductPoint<T> {
        let mut factors: Vec<StiefelPoint<T>> = self.comb.isometries.clone();
        factors.extend(self.instruments.iter().flatten().map(|i| i.stacked.clone()));
        factors.extend(self.states.iter().map(|s| s.purification.clone()));
        ProductPoint::new(factors)
    }

    /// Replaces the instruments; shapes must match the profile.
    pub fn with_instruments(&self, instruments: Vec<Vec<Instrument<T>>>) -> Result<Self> {
        Self::new(self.profile.clone(), self.comb.clone(), instruments, self.states.clone())
    }

    pub fn with_states(&self, states: Vec<StatePrep<T>>) -> Result<Self> {
        Self::new(self.profile.clone(), self.comb.clone(), self.instruments.clone(), states)
    }

    pub fn with_comb(&self, comb: Comb<T>) -> Result<Self> {
        Self::new(self.profile.clone(), comb, self.instruments.clone(), self.states.clone())
    }

    /// Largest `‖X†X − I‖_F` over all factors.
    pub fn max_orthonormality_residual(&self) -> T {
        self.to_product_point().max_orthonormality_residual()
    }
}

/// Haar-like random CIS set: every factor drawn independently on its
/// Stiefel manifold from a stream derived from `seed`.
pub fn random_cis<T: Real>(profile: &DimensionProfile, seed: u64) -> Result<CisSet<T>> {
    let factors = profile
        .factor_shapes()
        .into_iter()
        .enumerate()
        .map(|(k, (n, p))| random_stiefel(n, p, derive_seed(seed, k as u64)).map(StiefelPoint::into_matrix))
        .collect::<Result<Vec<_>>>()?;
    CisSet::from_factors(profile, factors)
}
