//! Dense complex linear algebra for multipartite operators.
//!
//! Matrices are stored row-major. Tensor factors follow the big-endian
//! convention: for `H_0 ⊗ H_1 ⊗ … ⊗ H_{k-1}` the leftmost factor is the most
//! significant digit of the computational-basis index, so basis state
//! `|i_0 i_1 … i_{k-1}⟩` lives at `((i_0·d_1 + i_1)·d_2 + …)`.

mod linalg;

pub use linalg::{hermitian_eigenvalues, orthonormalize_columns, solve};

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use crate::error::{dim_err, Result};
use crate::scalar::{cone, czero, Real, C};

/// Dense row-major complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

/// Dimensions of the tensor factors a matrix index ranges over.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemShape {
    factors: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d == 0) {
            return Err(dim_err!("subsystem factors must be non-empty and positive, got {factors:?}"));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn total(&self) -> usize {
        self.factors.iter().product()
    }

    fn check_factor(&self, factor: usize) -> Result<()> {
        if factor >= self.factors.len() {
            return Err(dim_err!("factor {factor} out of range for shape {:?}", self.factors));
        }
        Ok(())
    }

    /// (product of dims before `factor`, dim of `factor`, product after).
    fn split(&self, factor: usize) -> (usize, usize, usize) {
        let before = self.factors[..factor].iter().product();
        let after = self.factors[factor + 1..].iter().product();
        (before, self.factors[factor], after)
    }
}

impl<T: Real> ComplexMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<C<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(dim_err!("matrix dimensions must be positive, got {rows}x{cols}"));
        }
        if data.len() != rows * cols {
            return Err(dim_err!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![czero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = cone();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<C<T>>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(dim_err!("ragged rows"));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Real-valued matrix from `f64` rows (test and fixture convenience).
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let nested: Vec<Vec<C<T>>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| C::new(T::lit(x), T::zero())).collect())
            .collect();
        Self::from_rows(&nested)
    }

    pub fn diag(entries: &[C<T>]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = e;
        }
        m
    }

    /// Column vector.
    pub fn column(entries: Vec<C<T>>) -> Result<Self> {
        let n = entries.len();
        Self::new(n, 1, entries)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C<T>] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C<T>> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix product; errors when inner dimensions disagree.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(dim_err!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = vec![czero::<T>(); n * m];
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * m..(i + 1) * m];
            for (l, &a) in a_row.iter().enumerate() {
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let b_row = &other.data[l * m..(l + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self { rows: n, cols: m, data: out }
    }

    /// `self† · other` without materializing the adjoint.
    pub fn adjoint_mul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(dim_err!(
                "cannot form A†B for A {}x{}, B {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let (n, k, m) = (self.cols, self.rows, other.cols);
        let mut out = vec![czero::<T>(); n * m];
        for l in 0..k {
            let a_row = &self.data[l * n..(l + 1) * n];
            let b_row = &other.data[l * m..(l + 1) * m];
            for (i, a) in a_row.iter().enumerate() {
                let a = a.conj();
                let o_row = &mut out[i * m..(i + 1) * m];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self { rows: n, cols: m, data: out })
    }

    /// `self · other†` without materializing the adjoint.
    pub fn mul_adjoint(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(dim_err!(
                "cannot form AB† for A {}x{}, B {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let (n, k, m) = (self.rows, self.cols, other.rows);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut acc = czero::<T>();
                for (&a, b) in a_row.iter().zip(b_row) {
                    acc += a * b.conj();
                }
                out.push(acc);
            }
        }
        Ok(Self { rows: n, cols: m, data: out })
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.data[j * self.cols + i].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.data[j * self.cols + i])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C<T> {
        let n = self.rows.min(self.cols);
        (0..n).map(|i| self.data[i * self.cols + i]).fold(czero(), |a, b| a + b)
    }

    /// Sum of squared entry moduli.
    pub fn norm_sqr(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// √(Σ|m_ij|²).
    pub fn frobenius_norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Real part of the Frobenius inner product `Re Tr(self† · other)`.
    pub fn real_inner(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "real_inner shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_c(&self, s: C<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// `self += s · other`.
    pub fn axpy(&mut self, s: T, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Rectangular sub-block copy.
    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Self> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(dim_err!(
                "block {rows}x{cols} at ({row0},{col0}) exceeds {}x{}",
                self.rows,
                self.cols
            ));
        }
        Ok(Self::from_fn(rows, cols, |i, j| self.data[(row0 + i) * self.cols + col0 + j]))
    }

    pub fn set_block(&mut self, row0: usize, col0: usize, block: &Self) -> Result<()> {
        if row0 + block.rows > self.rows || col0 + block.cols > self.cols {
            return Err(dim_err!("block does not fit"));
        }
        for i in 0..block.rows {
            let dst = (row0 + i) * self.cols + col0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
        Ok(())
    }

    /// Converts between scalar types through `f64`.
    pub fn cast<U: Real>(&self) -> ComplexMatrix<U> {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| C::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64()))).collect(),
        }
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on inner-dimension mismatch; use [`ComplexMatrix::matmul`] for a
/// checked product.
impl<T: Real> Mul for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn mul(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        self.mul_unchecked(rhs)
    }
}

impl<T: Real> Add for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn add(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<T: Real> Sub for &ComplexMatrix<T> {
    type Output = ComplexMatrix<T>;
    fn sub(self, rhs: Self) -> ComplexMatrix<T> {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<T: Real> AddAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn add_assign(&mut self, rhs: &ComplexMatrix<T>) {
        assert_eq!(self.shape(), rhs.shape(), "matrix sum shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl<T: Real> SubAssign<&ComplexMatrix<T>> for ComplexMatrix<T> {
    fn sub_assign(&mut self, rhs: &ComplexMatrix<T>) {
        assert_eq!(self.shape(), rhs.shape(), "matrix difference shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl<T: Real> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product; entry ((i1,i2),(j1,j2)) = a(i1,j1)·b(i2,j2).
pub fn kron<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> ComplexMatrix<T> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let cols = ac * bc;
    let mut data = vec![czero::<T>(); ar * br * cols];
    for i1 in 0..ar {
        for j1 in 0..ac {
            let x = a.data[i1 * ac + j1];
            if x.re == T::zero() && x.im == T::zero() {
                continue;
            }
            for i2 in 0..br {
                let dst = (i1 * br + i2) * cols + j1 * bc;
                let src = &b.data[i2 * bc..(i2 + 1) * bc];
                for (d, &y) in data[dst..dst + bc].iter_mut().zip(src) {
                    *d = x * y;
                }
            }
        }
    }
    ComplexMatrix { rows: ar * br, cols, data }
}

/// Traces out `traced_factor` of a square matrix whose rows and columns both
/// range over `shape`.
pub fn partial_trace<T: Real>(
    m: &ComplexMatrix<T>,
    shape: &SubsystemShape,
    traced_factor: usize,
) -> Result<ComplexMatrix<T>> {
    if !m.is_square() {
        return Err(dim_err!("partial trace needs a square matrix, got {}x{}", m.rows, m.cols));
    }
    partial_trace_rect(m, shape, shape, traced_factor)
}

/// Partial trace of a possibly rectangular operator `H_in → H_out`; the
/// traced factor must have the same dimension on both sides.
pub fn partial_trace_rect<T: Real>(
    m: &ComplexMatrix<T>,
    row_shape: &SubsystemShape,
    col_shape: &SubsystemShape,
    traced_factor: usize,
) -> Result<ComplexMatrix<T>> {
    if row_shape.total() != m.rows || col_shape.total() != m.cols {
        return Err(dim_err!(
            "shapes {:?}/{:?} do not describe a {}x{} matrix",
            row_shape.factors,
            col_shape.factors,
            m.rows,
            m.cols
        ));
    }
    row_shape.check_factor(traced_factor)?;
    col_shape.check_factor(traced_factor)?;
    let (rb, rd, ra) = row_shape.split(traced_factor);
    let (cb, cd, ca) = col_shape.split(traced_factor);
    if rd != cd {
        return Err(dim_err!("traced factor has dimension {rd} on rows but {cd} on columns"));
    }
    let out_rows = rb * ra;
    let out_cols = cb * ca;
    let mut out = vec![czero::<T>(); out_rows * out_cols];
    for hi_r in 0..rb {
        for lo_r in 0..ra {
            let orow = hi_r * ra + lo_r;
            for k in 0..rd {
                let irow = (hi_r * rd + k) * ra + lo_r;
                for hi_c in 0..cb {
                    let icol0 = (hi_c * cd + k) * ca;
                    let ocol0 = hi_c * ca;
                    let src = &m.data[irow * m.cols + icol0..irow * m.cols + icol0 + ca];
                    let dst = &mut out[orow * out_cols + ocol0..orow * out_cols + ocol0 + ca];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
    Ok(ComplexMatrix { rows: out_rows, cols: out_cols, data: out })
}

/// Embeds `op` on `acting_factor` as `I ⊗ … ⊗ op ⊗ … ⊗ I`.
pub fn lift<T: Real>(
    op: &ComplexMatrix<T>,
    shape_in: &SubsystemShape,
    shape_out: &SubsystemShape,
    acting_factor: usize,
) -> Result<ComplexMatrix<T>> {
    shape_in.check_factor(acting_factor)?;
    shape_out.check_factor(acting_factor)?;
    if shape_in.len() != shape_out.len() {
        return Err(dim_err!("lift shapes have different factor counts"));
    }
    for (k, (a, b)) in shape_in.factors.iter().zip(&shape_out.factors).enumerate() {
        if k != acting_factor && a != b {
            return Err(dim_err!("non-acting factor {k} differs: {a} vs {b}"));
        }
    }
    if op.cols != shape_in.factors[acting_factor] || op.rows != shape_out.factors[acting_factor] {
        return Err(dim_err!(
            "operator {}x{} does not map factor {} ({} -> {})",
            op.rows,
            op.cols,
            acting_factor,
            shape_in.factors[acting_factor],
            shape_out.factors[acting_factor]
        ));
    }
    let (before, _, after) = shape_in.split(acting_factor);
    let mut out = op.clone();
    if after > 1 {
        out = kron(&out, &ComplexMatrix::identity(after));
    }
    if before > 1 {
        out = kron(&ComplexMatrix::identity(before), &out);
    }
    Ok(out)
}

/// Reorders the tensor factors of a square operator: factor `k` of the output
/// is factor `perm[k]` of the input.
pub fn permute_subsystems<T: Real>(
    m: &ComplexMatrix<T>,
    shape: &SubsystemShape,
    perm: &[usize],
) -> Result<ComplexMatrix<T>> {
    let p = permutation_operator::<T>(shape, perm)?;
    if m.rows != shape.total() || !m.is_square() {
        return Err(dim_err!("shape {:?} does not describe a {}x{} operator", shape.factors, m.rows, m.cols));
    }
    Ok(&(&p * m) * &p.dagger())
}

/// Unitary `P` with `P·(x_0 ⊗ … ⊗ x_{k-1}) = x_{perm[0]} ⊗ … ⊗ x_{perm[k-1]}`.
pub fn permutation_operator<T: Real>(shape: &SubsystemShape, perm: &[usize]) -> Result<ComplexMatrix<T>> {
    let k = shape.len();
    let mut seen = vec![false; k];
    if perm.len() != k || perm.iter().any(|&p| p >= k || std::mem::replace(&mut seen[p], true)) {
        return Err(dim_err!("{perm:?} is not a permutation of {k} factors"));
    }
    let dims = &shape.factors;
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let n = shape.total();
    let mut p = ComplexMatrix::zeros(n, n);
    let mut digits = vec![0usize; k];
    for col in 0..n {
        let mut rem = col;
        for f in (0..k).rev() {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        let mut row = 0;
        for (f, &src) in perm.iter().enumerate() {
            row = row * out_dims[f] + digits[src];
        }
        p[(row, col)] = cone();
    }
    Ok(p)
}
