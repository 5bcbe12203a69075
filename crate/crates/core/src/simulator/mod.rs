//! Forward simulation of outcome statistics and synthetic experiments.

mod clifford;
mod dataset;
mod setup;

pub use clifford::{
    clifford_group, measurement_basis_change, perturb_instrument, perturb_measurement, perturb_state, rotation,
    standard_instrument_set, standard_instruments, Axis, MeasurementBasis, STANDARD_INSTRUMENT_COUNT,
};
pub use dataset::{
    generate_dataset, Dataset, ExperimentRecord, ExperimentScheme, PrefixPolicy, RecordKind, TupleSelection,
};
pub use setup::{cardinal_states, random_comb, synthetic_model, ExperimentSpec, PerturbationSpec, SyntheticModel};

use crate::cis::{kraus_operators, state_density, CisSet};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Real;
use crate::tensor::{kron, ComplexMatrix, SubsystemShape};

/// Indices of one experiment: state `u`, instruments `v[t]` and outcomes
/// `x[t]` for the first `L = v.len()` slots.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeSequence {
    pub u: usize,
    pub v: Vec<usize>,
    pub x: Vec<usize>,
}

impl OutcomeSequence {
    pub fn new(u: usize, v: Vec<usize>, x: Vec<usize>) -> Result<Self> {
        if v.is_empty() || v.len() != x.len() {
            return Err(Error::Argument(format!(
                "sequence needs matching non-empty instrument and outcome lists, got {} and {}",
                v.len(),
                x.len()
            )));
        }
        Ok(Self { u, v, x })
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Checks every index against the CIS set's structure.
    pub fn validate<T: Real>(&self, cis: &CisSet<T>) -> Result<()> {
        let p = cis.profile();
        if self.u >= p.n_states() {
            return Err(Error::Lookup(format!("state {} out of range ({} states)", self.u, p.n_states())));
        }
        if self.len() > p.slots() {
            return Err(Error::Lookup(format!("sequence of length {} exceeds {} slots", self.len(), p.slots())));
        }
        for (t, (&v, &x)) in self.v.iter().zip(&self.x).enumerate() {
            if v >= p.n_instruments(t) {
                return Err(Error::Lookup(format!("instrument {v} out of range at slot {t}")));
            }
            if x >= p.n_branches(t, v) {
                return Err(Error::Lookup(format!("outcome {x} out of range for instrument {v} at slot {t}")));
            }
        }
        Ok(())
    }
}

/// Unnormalized joint state of system and comb ancilla.
#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateState<T: Real> {
    matrix: ComplexMatrix<T>,
    shape: SubsystemShape,
}

impl<T: Real> IntermediateState<T> {
    pub fn new(matrix: ComplexMatrix<T>, system_dim: usize, ancilla_dim: usize) -> Result<Self> {
        let n = system_dim * ancilla_dim;
        if matrix.shape() != (n, n) {
            return Err(dim_err!("state is {:?}, expected {n}x{n}", matrix.shape()));
        }
        Ok(Self { matrix, shape: SubsystemShape::new(vec![system_dim, ancilla_dim])? })
    }

    /// `ρ ⊗ |0⟩⟨0|` on a trivial ancilla.
    pub fn initial(rho: ComplexMatrix<T>) -> Result<Self> {
        let d = rho.rows();
        Self::new(rho, d, 1)
    }

    pub fn matrix(&self) -> &ComplexMatrix<T> {
        &self.matrix
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn system_dim(&self) -> usize {
        self.shape.factors()[0]
    }

    pub fn ancilla_dim(&self) -> usize {
        self.shape.factors()[1]
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }
}

/// `η ↦ V η V†`.
pub fn step_comb<T: Real>(
    eta: &IntermediateState<T>,
    v: &ComplexMatrix<T>,
    output_dim: usize,
) -> Result<IntermediateState<T>> {
    if v.cols() != eta.matrix.rows() || output_dim == 0 || v.rows() % output_dim != 0 {
        return Err(dim_err!("isometry {:?} cannot act on state of dimension {}", v.shape(), eta.matrix.rows()));
    }
    let out = v.matmul(&eta.matrix)?.mul_adjoint(v)?;
    IntermediateState::new(out, output_dim, v.rows() / output_dim)
}

/// `η ↦ Tr_e[(W ⊗ I_a) η (W ⊗ I_a)†]` with `W` acting on the system only.
pub fn step_instrument<T: Real>(
    eta: &IntermediateState<T>,
    w: &ComplexMatrix<T>,
    output_dim: usize,
) -> Result<IntermediateState<T>> {
    if w.cols() != eta.system_dim() {
        return Err(dim_err!("branch {:?} cannot act on system of dimension {}", w.shape(), eta.system_dim()));
    }
    let da = eta.ancilla_dim();
    let id = ComplexMatrix::identity(da);
    let mut out = ComplexMatrix::zeros(output_dim * da, output_dim * da);
    for k in kraus_operators(w, output_dim)? {
        let lifted = kron(&k, &id);
        out += &lifted.matmul(&eta.matrix)?.mul_adjoint(&lifted)?;
    }
    IntermediateState::new(out, output_dim, da)
}

fn start<T: Real>(cis: &CisSet<T>, u: usize) -> Result<IntermediateState<T>> {
    IntermediateState::initial(state_density(cis.state(u)?))
}

fn advance<T: Real>(cis: &CisSet<T>, eta: &IntermediateState<T>, t: usize, v: usize, x: usize) -> Result<IntermediateState<T>> {
    let p = cis.profile();
    let after_comb = step_comb(eta, cis.comb().isometry(t).matrix(), p.d_out()[t])?;
    let ins = cis.instrument(t, v)?;
    step_instrument(&after_comb, &ins.branch(x), ins.output_dim())
}

/// Probability of an outcome sequence by the intermediate-state recursion.
pub fn probability<T: Real>(cis: &CisSet<T>, seq: &OutcomeSequence) -> Result<T> {
    seq.validate(cis)?;
    let mut eta = start(cis, seq.u)?;
    for t in 0..seq.len() {
        eta = advance(cis, &eta, t, seq.v[t], seq.x[t])?;
    }
    Ok(eta.trace())
}

/// Probabilities of all outcome tuples for state `u` and instruments `v`,
/// in lexicographic order of the tuples.
pub fn prefix_distribution<T: Real>(cis: &CisSet<T>, u: usize, v: &[usize]) -> Result<Vec<(Vec<usize>, T)>> {
    OutcomeSequence::new(u, v.to_vec(), vec![0; v.len()])?.validate(cis)?;
    let mut out = Vec::new();
    let mut prefix = Vec::with_capacity(v.len());
    descend(cis, v, &start(cis, u)?, &mut prefix, &mut out)?;
    Ok(out)
}

fn descend<T: Real>(
    cis: &CisSet<T>,
    v: &[usize],
    eta: &IntermediateState<T>,
    prefix: &mut Vec<usize>,
    out: &mut Vec<(Vec<usize>, T)>,
) -> Result<()> {
    let t = prefix.len();
    if t == v.len() {
        out.push((prefix.clone(), eta.trace()));
        return Ok(());
    }
    let after_comb = step_comb(eta, cis.comb().isometry(t).matrix(), cis.profile().d_out()[t])?;
    let ins = cis.instrument(t, v[t])?;
    for x in 0..ins.branch_count() {
        let next = step_instrument(&after_comb, &ins.branch(x), ins.output_dim())?;
        prefix.push(x);
        descend(cis, v, &next, prefix, out)?;
        prefix.pop();
    }
    Ok(())
}
