//! Single-qubit Clifford group, the standard measure-and-prepare instrument
//! set, and rotation perturbations.

use num_complex::Complex64;

use crate::cis::{pauli, Instrument, StatePrep};
use crate::error::{Error, Result};
use crate::random::{derive_seed, rng_from_seed};
use crate::scalar::{Real, C};
use crate::stiefel::StiefelPoint;
use crate::tensor::{kron, ComplexMatrix};

pub const STANDARD_INSTRUMENT_COUNT: usize = 72;

/// Rotation axis on the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Axis {
    X,
    Y,
    Z,
    /// Need not be normalized; must be non-zero.
    Custom([f64; 3]),
}

impl Axis {
    /// The body diagonal `(1,1,1)/√3`; no Clifford maps it onto a Pauli axis.
    pub const DIAGONAL: Axis = Axis::Custom([1.0, 1.0, 1.0]);

    /// Normalized direction.
    pub fn unit(self) -> Result<[f64; 3]> {
        let n = match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
            Axis::Custom(n) => n,
        };
        let len = n.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::Argument(format!("rotation axis {n:?} has no direction")));
        }
        Ok(n.map(|a| a / len))
    }
}

/// `exp(−i·angle·n·σ/2)`.
pub fn rotation<T: Real>(axis: Axis, angle: f64) -> Result<ComplexMatrix<T>> {
    let n = axis.unit()?;
    let (s, c) = (angle / 2.0).sin_cos();
    let mut m = pauli::<T>(0).scale(T::lit(c));
    for (k, &nk) in n.iter().enumerate() {
        m -= &pauli::<T>(k + 1).scale_c(C::new(T::zero(), T::lit(s * nk)));
    }
    Ok(m)
}

fn canonical_phase(m: &ComplexMatrix<f64>) -> ComplexMatrix<f64> {
    let pivot = *m.data().iter().find(|z| z.norm() > 1e-9).expect("unitary has a non-zero entry");
    m.scale_c(pivot.conj() / pivot.norm())
}

/// The 24 single-qubit Cliffords modulo global phase, identity first, in
/// breadth-first order over the generators `H` and `S`.
pub fn clifford_group<T: Real>() -> Vec<ComplexMatrix<T>> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = ComplexMatrix::<f64>::from_real_rows(&[&[h, h], &[h, -h]]).expect("2x2");
    let phase = ComplexMatrix::diag(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
    let mut group = vec![ComplexMatrix::<f64>::identity(2)];
    let mut frontier = 0;
    while frontier < group.len() {
        let g = group[frontier].clone();
        for gen in [&hadamard, &phase] {
            let next = canonical_phase(&gen.matmul(&g).expect("2x2"));
            if group.iter().all(|e| e.max_abs_diff(&next) > 1e-9) {
                group.push(next);
            }
        }
        frontier += 1;
    }
    group.iter().map(ComplexMatrix::cast).collect()
}

/// Measurement basis of a standard instrument.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasurementBasis {
    Z,
    X,
    Y,
}

impl MeasurementBasis {
    pub const ALL: [MeasurementBasis; 3] = [MeasurementBasis::Z, MeasurementBasis::X, MeasurementBasis::Y];
}

/// Unitary taking the eigenbasis of `basis` to the computational basis.
pub fn measurement_basis_change<T: Real>(basis: MeasurementBasis) -> ComplexMatrix<T> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let hadamard = ComplexMatrix::<f64>::from_real_rows(&[&[h, h], &[h, -h]]).expect("2x2");
    let m = match basis {
        MeasurementBasis::Z => ComplexMatrix::identity(2),
        MeasurementBasis::X => hadamard,
        MeasurementBasis::Y => {
            let s_dag = ComplexMatrix::diag(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)]);
            hadamard.matmul(&s_dag).expect("2x2")
        }
    };
    m.cast()
}

fn projector_instrument<T: Real>(basis: MeasurementBasis, m: &ComplexMatrix<T>) -> Result<Instrument<T>> {
    let u = measurement_basis_change::<T>(basis);
    let branches = (0..2)
        .map(|x| {
            let ket = ComplexMatrix::from_fn(2, 1, |i, _| u[(x, i)].conj());
            ket.mul_adjoint(&ket)?.matmul(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::from_branches(&branches, 2)
}

/// Signed Pauli axis `(k, ±1)` with `C† σ_b C = ±σ_k`.
fn measured_axis(c: &ComplexMatrix<f64>, basis: MeasurementBasis) -> (usize, i8) {
    let b = match basis {
        MeasurementBasis::X => 1,
        MeasurementBasis::Y => 2,
        MeasurementBasis::Z => 3,
    };
    let m = c.adjoint_mul(&pauli::<f64>(b).matmul(c).expect("2x2")).expect("2x2");
    (1..4)
        .find_map(|k| {
            let overlap = m.matmul(&pauli::<f64>(k)).expect("2x2").trace().re / 2.0;
            (overlap.abs() > 0.5).then_some((k, if overlap > 0.0 { 1 } else { -1 }))
        })
        .expect("Cliffords permute Pauli axes")
}

/// The 72 Clifford-then-measure instruments. Instrument `3c + b` applies
/// Clifford `c`, then measures basis `b` (Z, X, Y) and keeps the projected
/// eigenstate: branch `x` is `|b_x⟩⟨b_x| C_c` with `|b_0⟩` the `+1`
/// eigenstate. Up to branch phases the set holds 18 distinct instruments
/// (signed measured axis × output basis).
pub fn standard_instruments<T: Real>() -> Result<Vec<Instrument<T>>> {
    let mut out = Vec::with_capacity(STANDARD_INSTRUMENT_COUNT);
    for c in clifford_group::<T>() {
        for b in MeasurementBasis::ALL {
            out.push(projector_instrument(b, &c)?);
        }
    }
    Ok(out)
}

/// Per-slot standard instrument sets of `count` instruments each, shared by
/// all slots. The full set keeps the canonical order. Smaller sets start
/// with the plain Z measurement and then draw, in seeded order, instruments
/// that add a new (output basis, measured axis) pair, then a new signed
/// pair, then anything.
pub fn standard_instrument_set<T: Real>(slots: usize, count: usize, seed: u64) -> Result<Vec<Vec<Instrument<T>>>> {
    if count == 0 || count > STANDARD_INSTRUMENT_COUNT {
        return Err(Error::Argument(format!("instrument count must be in 1..={STANDARD_INSTRUMENT_COUNT}, got {count}")));
    }
    let all = standard_instruments::<T>()?;
    let indices: Vec<usize> = if count == STANDARD_INSTRUMENT_COUNT {
        (0..count).collect()
    } else {
        use rand::seq::SliceRandom;
        let cliffords = clifford_group::<f64>();
        let key = |i: usize| {
            let basis = MeasurementBasis::ALL[i % 3];
            (i % 3, measured_axis(&cliffords[i / 3], basis))
        };
        let mut order: Vec<usize> = (1..STANDARD_INSTRUMENT_COUNT).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(seed, 0x1257)));
        let mut picked = vec![0];
        for pass in 0..3 {
            for &i in &order {
                if picked.len() == count {
                    break;
                }
                if picked.contains(&i) {
                    continue;
                }
                let (b, (k, sign)) = key(i);
                let fresh = match pass {
                    0 => picked.iter().all(|&j| {
                        let (bj, (kj, _)) = key(j);
                        (bj, kj) != (b, k)
                    }),
                    1 => picked.iter().all(|&j| key(j) != (b, (k, sign))),
                    _ => true,
                };
                if fresh {
                    picked.push(i);
                }
            }
        }
        picked
    };
    Ok(vec![indices.iter().map(|&i| all[i].clone()).collect(); slots])
}

/// Composes every branch with a rotation on the input: `W_x ↦ W_x R`.
pub fn perturb_instrument<T: Real>(ins: &Instrument<T>, axis: Axis, angle: f64) -> Result<Instrument<T>> {
    if ins.input_dim() != 2 {
        return Err(Error::UnsupportedDimension(format!("rotation needs a qubit input, got {}", ins.input_dim())));
    }
    let r = rotation::<T>(axis, angle)?;
    let branches = ins.branches().iter().map(|w| w.matmul(&r)).collect::<Result<Vec<_>>>()?;
    Instrument::from_branches(&branches, ins.output_dim())
}

/// Rotates the measured effects of a projective instrument while keeping its
/// post-measurement states: branches `Π_x M` become `Π_x R M`, where
/// `M = Σ_x W_x` is unitary and the `Π_x` are orthogonal projectors.
pub fn perturb_measurement<T: Real>(ins: &Instrument<T>, axis: Axis, angle: f64) -> Result<Instrument<T>> {
    let d = ins.input_dim();
    if ins.output_dim() != d || ins.env_dims().iter().any(|&e| e != 1) {
        return Err(Error::Argument("measurement perturbation needs a projective instrument".into()));
    }
    let branches = ins.branches();
    let mut m = ComplexMatrix::zeros(d, d);
    for w in &branches {
        m += w;
    }
    let tol = T::orthonormality_tol();
    if m.adjoint_mul(&m)?.max_abs_diff(&ComplexMatrix::identity(d)) > tol {
        return Err(Error::Argument("branches do not sum to a unitary".into()));
    }
    let projectors = branches.iter().map(|w| w.mul_adjoint(&m)).collect::<Result<Vec<_>>>()?;
    for (x, p) in projectors.iter().enumerate() {
        if p.matmul(p)?.max_abs_diff(p) > tol || p.max_abs_diff(&p.dagger()) > tol {
            return Err(Error::Argument(format!("branch {x} is not a projection after a unitary")));
        }
    }
    let rm = rotation::<T>(axis, angle)?.matmul(&m)?;
    let perturbed = projectors.iter().map(|p| p.matmul(&rm)).collect::<Result<Vec<_>>>()?;
    Instrument::from_branches(&perturbed, ins.output_dim())
}

/// `S ↦ (R ⊗ I_r) S` for a qubit state.
pub fn perturb_state<T: Real>(s: &StatePrep<T>, axis: Axis, angle: f64) -> Result<StatePrep<T>> {
    if s.system_dim() != 2 {
        return Err(Error::UnsupportedDimension(format!("rotation needs a qubit state, got {}", s.system_dim())));
    }
    let r = kron(&rotation::<T>(axis, angle)?, &ComplexMatrix::identity(s.ref_dim()));
    StatePrep::new(StiefelPoint::new(r.matmul(s.purification().matrix())?)?, 2)
}
