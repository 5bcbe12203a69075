//! Pauli transfer matrices of qubit instrument branches.

use super::{apply_branch, Instrument};
use crate::error::{dim_err, Error, Result};
use crate::scalar::{C, Real};
use crate::tensor::ComplexMatrix;

/// Pauli matrix `σ_k` for `k ∈ {0: I, 1: X, 2: Y, 3: Z}`.
pub fn pauli<T: Real>(k: usize) -> ComplexMatrix<T> {
    let (o, z) = (T::one(), T::zero());
    let e = |re: T, im: T| C::new(re, im);
    let rows = match k {
        0 => [[e(o, z), e(z, z)], [e(z, z), e(o, z)]],
        1 => [[e(z, z), e(o, z)], [e(o, z), e(z, z)]],
        2 => [[e(z, z), e(z, -o)], [e(z, o), e(z, z)]],
        3 => [[e(o, z), e(z, z)], [e(z, z), e(-o, z)]],
        _ => panic!("Pauli index {k} out of range"),
    };
    ComplexMatrix::from_fn(2, 2, |i, j| rows[i][j])
}

/// `R[j][k] = ½ Tr[σ_j 𝒜(σ_k)]` for a qubit-to-qubit branch.
pub fn ptm_of_branch<T: Real>(w: &ComplexMatrix<T>, output_dim: usize) -> Result<ComplexMatrix<T>> {
    if w.cols() != 2 || output_dim != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "PTM needs qubit input and output, got {} -> {output_dim}",
            w.cols()
        )));
    }
    let half = T::lit(0.5);
    let images: Vec<ComplexMatrix<T>> =
        (0..4).map(|k| apply_branch(w, output_dim, &pauli(k))).collect::<Result<_>>()?;
    Ok(ComplexMatrix::from_fn(4, 4, |j, k| pauli::<T>(j).matmul(&images[k]).expect("2x2").trace().scale(half)))
}

/// Frobenius PTM distance of one branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PtmDifference<T> {
    pub slot: usize,
    pub instrument: usize,
    pub branch: usize,
    pub fro_diff: T,
}

/// Branch-wise `‖PTM_a − PTM_b‖_F` over matching instrument sets.
pub fn ptm_differences<T: Real>(a: &[Vec<Instrument<T>>], b: &[Vec<Instrument<T>>]) -> Result<Vec<PtmDifference<T>>> {
    if a.len() != b.len() {
        return Err(dim_err!("instrument sets cover {} and {} slots", a.len(), b.len()));
    }
    let mut out = Vec::new();
    for (slot, (sa, sb)) in a.iter().zip(b).enumerate() {
        if sa.len() != sb.len() {
            return Err(dim_err!("slot {slot}: {} vs {} instruments", sa.len(), sb.len()));
        }
        for (instrument, (ia, ib)) in sa.iter().zip(sb).enumerate() {
            if ia.branch_count() != ib.branch_count() {
                return Err(dim_err!("instrument ({slot},{instrument}) branch counts differ"));
            }
            for branch in 0..ia.branch_count() {
                let ra = ptm_of_branch(&ia.branch(branch), ia.output_dim())?;
                let rb = ptm_of_branch(&ib.branch(branch), ib.output_dim())?;
                out.push(PtmDifference { slot, instrument, branch, fro_diff: (&ra - &rb).frobenius_norm() });
            }
        }
    }
    Ok(out)
}

/// Mean branch-wise Frobenius PTM distance.
pub fn delta_ptm<T: Real>(a: &[Vec<Instrument<T>>], b: &[Vec<Instrument<T>>]) -> Result<T> {
    let diffs = ptm_differences(a, b)?;
    if diffs.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = diffs.iter().map(|d| d.fro_diff).sum();
    Ok(sum / T::lit(diffs.len() as f64))
}
