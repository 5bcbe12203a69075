//! Synthetic ground-truth models: random comb, design instruments and
//! states, and their perturbed counterparts.

use num_complex::Complex64;

use super::clifford::{perturb_instrument, perturb_measurement, perturb_state, standard_instrument_set, Axis};
use crate::cis::{Comb, CisSet, DimensionProfile, StatePrep};
use crate::error::{Error, Result};
use crate::random::derive_seed;
use crate::scalar::{Real, C};
use crate::stiefel::{random_stiefel, StiefelPoint};
use crate::tensor::ComplexMatrix;

/// Comb with every isometry drawn by `random_stiefel` from a per-slot stream.
pub fn random_comb<T: Real>(profile: &DimensionProfile, seed: u64) -> Result<Comb<T>> {
    let isometries = (0..profile.slots())
        .map(|t| {
            let (n, p) = profile.comb_shape(t);
            random_stiefel(n, p, derive_seed(seed, t as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    Comb::new(isometries, profile.d_in(), profile.d_out(), profile.d_anc())
}

/// Up to six Pauli eigenstates `|0⟩, |1⟩, |+⟩, |+i⟩, |−⟩, |−i⟩`, each
/// purified with the reference in `|0⟩`.
pub fn cardinal_states<T: Real>(count: usize, ref_dim: usize) -> Result<Vec<StatePrep<T>>> {
    if count == 0 || count > 6 || ref_dim == 0 {
        return Err(Error::Argument(format!("need 1..=6 cardinal states with a reference, got {count} and {ref_dim}")));
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let kets: [[Complex64; 2]; 6] = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        [Complex64::new(h, 0.0), Complex64::new(0.0, h)],
        [Complex64::new(h, 0.0), Complex64::new(-h, 0.0)],
        [Complex64::new(h, 0.0), Complex64::new(0.0, -h)],
    ];
    kets[..count]
        .iter()
        .map(|k| {
            let mut s = ComplexMatrix::<T>::zeros(2 * ref_dim, 1);
            for (i, z) in k.iter().enumerate() {
                s[(i * ref_dim, 0)] = C::new(T::lit(z.re), T::lit(z.im));
            }
            StatePrep::new(StiefelPoint::new(s)?, 2)
        })
        .collect()
}

/// Shape and randomness of a synthetic single-qubit experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub slots: usize,
    /// `d_a[0..=N]`.
    pub ancillas: Vec<usize>,
    pub instruments_per_slot: usize,
    pub n_states: usize,
    pub ref_dim: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn profile(&self) -> Result<DimensionProfile> {
        DimensionProfile::uniform(
            self.slots,
            2,
            &self.ancillas,
            self.instruments_per_slot,
            2,
            1,
            self.n_states,
            self.ref_dim,
        )
    }
}

/// Which design components deviate from their nominal values, and how.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub angle: f64,
    pub axis: Axis,
    pub states: Vec<usize>,
    /// Instruments whose unitary part is rotated (same indices at every slot).
    pub unitary_instruments: Vec<usize>,
    /// Instruments whose measurement basis is rotated.
    pub measurement_instruments: Vec<usize>,
}

impl PerturbationSpec {
    pub fn none() -> Self {
        Self::standard(0.0)
    }

    /// State 0, the unitary parts of instruments 1 and 2, and the
    /// measurement of instrument 0, all about the body diagonal.
    pub fn standard(angle: f64) -> Self {
        Self {
            angle,
            axis: Axis::DIAGONAL,
            states: vec![0],
            unitary_instruments: vec![1, 2],
            measurement_instruments: vec![0],
        }
    }

    /// Instruments (per slot) touched by this perturbation.
    pub fn touched_instruments(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.unitary_instruments.iter().chain(&self.measurement_instruments).copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Design model and the perturbed ground truth that generates data.
///
/// Both share the same dimension profile. The nominal comb is an
/// independent random draw, standing in for the unknown environment.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticModel<T: Real> {
    pub nominal: CisSet<T>,
    pub truth: CisSet<T>,
}

pub fn synthetic_model<T: Real>(spec: &ExperimentSpec, perturbation: &PerturbationSpec) -> Result<SyntheticModel<T>> {
    let profile = spec.profile()?;
    let truth_comb = random_comb(&profile, derive_seed(spec.seed, 1))?;
    let guess_comb = random_comb(&profile, derive_seed(spec.seed, 2))?;
    let instruments = standard_instrument_set::<T>(spec.slots, spec.instruments_per_slot, derive_seed(spec.seed, 3))?;
    let states = cardinal_states::<T>(spec.n_states, spec.ref_dim)?;

    let mut true_instruments = instruments.clone();
    for slot in &mut true_instruments {
        for &v in &perturbation.unitary_instruments {
            let ins = slot.get_mut(v).ok_or_else(|| Error::Lookup(format!("no instrument {v} to perturb")))?;
            *ins = perturb_instrument(ins, perturbation.axis, perturbation.angle)?;
        }
        for &v in &perturbation.measurement_instruments {
            let ins = slot.get_mut(v).ok_or_else(|| Error::Lookup(format!("no instrument {v} to perturb")))?;
            *ins = perturb_measurement(ins, perturbation.axis, perturbation.angle)?;
        }
    }
    let mut true_states = states.clone();
    for &u in &perturbation.states {
        let s = true_states.get_mut(u).ok_or_else(|| Error::Lookup(format!("no state {u} to perturb")))?;
        *s = perturb_state(s, perturbation.axis, perturbation.angle)?;
    }
    Ok(SyntheticModel {
        nominal: CisSet::new(profile.clone(), guess_comb, instruments, states)?,
        truth: CisSet::new(profile, truth_comb, true_instruments, true_states)?,
    })
}
