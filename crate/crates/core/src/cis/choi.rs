//! Choi representations and constraint checks.

use super::{Comb, Instrument, StatePrep};
use crate::error::{dim_err, Result};
use crate::scalar::{czero, Real};
use crate::tensor::{hermitian_eigenvalues, partial_trace, ComplexMatrix, SubsystemShape};

/// `ρ = Tr_r(S S†)`.
pub fn state_density<T: Real>(s: &StatePrep<T>) -> ComplexMatrix<T> {
    let m = s.amplitude_matrix();
    m.mul_adjoint(&m).expect("square product")
}

/// Kraus operators `K_e[i'][j] = W[i'·d_e + e][j]` of a branch dilation.
pub fn kraus_operators<T: Real>(w: &ComplexMatrix<T>, output_dim: usize) -> Result<Vec<ComplexMatrix<T>>> {
    if output_dim == 0 || w.rows() % output_dim != 0 {
        return Err(dim_err!("{} rows are not a multiple of output dimension {output_dim}", w.rows()));
    }
    let de = w.rows() / output_dim;
    Ok((0..de).map(|e| ComplexMatrix::from_fn(output_dim, w.cols(), |a, j| w[(a * de + e, j)])).collect())
}

/// `Tr_e[W ρ W†]`.
pub fn apply_branch<T: Real>(w: &ComplexMatrix<T>, output_dim: usize, rho: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    if rho.shape() != (w.cols(), w.cols()) {
        return Err(dim_err!("state is {:?}, branch expects {}x{}", rho.shape(), w.cols(), w.cols()));
    }
    let mut out = ComplexMatrix::zeros(output_dim, output_dim);
    for k in kraus_operators(w, output_dim)? {
        out += &k.matmul(rho)?.mul_adjoint(&k)?;
    }
    Ok(out)
}

/// Choi matrix on `output ⊗ input`, `A = Σ_jk 𝒜(|j⟩⟨k|) ⊗ |j⟩⟨k|`, so that
/// `𝒜(ρ) = Tr_in[A (I ⊗ ρ^T)]`.
pub fn branch_choi<T: Real>(w: &ComplexMatrix<T>, output_dim: usize) -> Result<ComplexMatrix<T>> {
    if output_dim == 0 || w.rows() % output_dim != 0 {
        return Err(dim_err!("{} rows are not a multiple of output dimension {output_dim}", w.rows()));
    }
    let de = w.rows() / output_dim;
    let din = w.cols();
    // psi[(a, j), e] = W[(a, e), j]
    let psi = ComplexMatrix::from_fn(output_dim * din, de, |r, e| w[((r / din) * de + e, r % din)]);
    psi.mul_adjoint(&psi)
}

/// Composite isometry of the first `upto` comb slots, mapping
/// `i_0 ⊗ … ⊗ i_{upto-1}` to `o_0 ⊗ … ⊗ o_{upto-1} ⊗ a_upto`.
pub fn comb_isometry<T: Real>(comb: &Comb<T>, upto: usize) -> Result<ComplexMatrix<T>> {
    if upto > comb.slots() {
        return Err(dim_err!("comb has {} slots, asked for {upto}", comb.slots()));
    }
    let mut acc = ComplexMatrix::<T>::identity(1);
    let (mut big_o, mut big_i) = (1usize, 1usize);
    for s in 0..upto {
        let v = comb.isometry(s).matrix();
        let (di, dout) = (comb.d_in()[s], comb.d_out()[s]);
        let (da, da2) = (comb.d_anc()[s], comb.d_anc()[s + 1]);
        let mut next = ComplexMatrix::zeros(big_o * dout * da2, big_i * di);
        for o in 0..big_o {
            for a in 0..da {
                for ii in 0..big_i {
                    let x = acc[(o * da + a, ii)];
                    if x == czero() {
                        continue;
                    }
                    for i in 0..di {
                        let vc = i * da + a;
                        let col = ii * di + i;
                        for r in 0..dout * da2 {
                            next[(o * dout * da2 + r, col)] += v[(r, vc)] * x;
                        }
                    }
                }
            }
        }
        acc = next;
        big_o *= dout;
        big_i *= di;
    }
    Ok(acc)
}

/// Choi matrix `Υ^(upto)` on `(o_0…o_{upto-1}) ⊗ (i_0…i_{upto-1})`, with the
/// final ancilla traced out. `upto = 0` gives the scalar `1`.
pub fn comb_choi<T: Real>(comb: &Comb<T>, upto: usize) -> Result<ComplexMatrix<T>> {
    let iso = comb_isometry(comb, upto)?;
    let big_i = iso.cols();
    let da = comb.d_anc()[upto];
    let big_o = iso.rows() / da;
    let psi = ComplexMatrix::from_fn(big_o * big_i, da, |r, a| iso[((r / big_i) * da + a, r % big_i)]);
    psi.mul_adjoint(&psi)
}

/// Per-slot residuals `‖Tr_{o_t} Υ^(t+1) − Υ^(t) ⊗ I_{i_t}‖_F`.
#[derive(Clone, Debug, PartialEq)]
pub struct CausalityReport<T: Real> {
    pub residuals: Vec<T>,
}

impl<T: Real> CausalityReport<T> {
    pub fn max(&self) -> T {
        self.residuals.iter().copied().fold(T::zero(), T::max)
    }
}

pub fn check_causality<T: Real>(comb: &Comb<T>) -> Result<CausalityReport<T>> {
    let n = comb.slots();
    let mut prev = comb_choi(comb, 0)?;
    let mut residuals = Vec::with_capacity(n);
    for t in 0..n {
        let next = comb_choi(comb, t + 1)?;
        let mut dims: Vec<usize> = comb.d_out()[..=t].to_vec();
        dims.extend_from_slice(&comb.d_in()[..=t]);
        let reduced = partial_trace(&next, &SubsystemShape::new(dims)?, t)?;
        let expect = crate::tensor::kron(&prev, &ComplexMatrix::identity(comb.d_in()[t]));
        residuals.push((&reduced - &expect).frobenius_norm());
        prev = next;
    }
    Ok(CausalityReport { residuals })
}

/// Smallest Choi eigenvalue per branch and the trace-preservation residual
/// `‖Σ_x Tr_out A_x − I‖_F`.
#[derive(Clone, Debug, PartialEq)]
pub struct InstrumentReport<T: Real> {
    pub eigen_floor: Vec<T>,
    pub tp_residual: T,
}

impl<T: Real> InstrumentReport<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.eigen_floor.iter().copied().fold(T::infinity(), T::min)
    }
}

pub fn check_instrument<T: Real>(ins: &Instrument<T>) -> Result<InstrumentReport<T>> {
    let (dout, din) = (ins.output_dim(), ins.input_dim());
    let shape = SubsystemShape::new(vec![dout, din])?;
    let mut sum = ComplexMatrix::zeros(din, din);
    let mut eigen_floor = Vec::with_capacity(ins.branch_count());
    for w in ins.branches() {
        let a = branch_choi(&w, dout)?;
        let ev = hermitian_eigenvalues(&a)?;
        eigen_floor.push(ev.into_iter().fold(T::infinity(), T::min));
        sum += &partial_trace(&a, &shape, 0)?;
    }
    let tp_residual = (&sum - &ComplexMatrix::identity(din)).frobenius_norm();
    Ok(InstrumentReport { eigen_floor, tp_residual })
}

/// Number of eigenvalues of a Hermitian matrix above `rel_tol · max|λ|`.
pub fn numerical_rank<T: Real>(h: &ComplexMatrix<T>, rel_tol: T) -> Result<usize> {
    let ev = hermitian_eigenvalues(h)?;
    let top = ev.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if top == T::zero() {
        return Ok(0);
    }
    Ok(ev.iter().filter(|x| x.abs() > rel_tol * top).count())
}
