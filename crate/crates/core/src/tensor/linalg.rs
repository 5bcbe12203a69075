
use super::ComplexMatrix;
use crate::error::{dim_err, Error, Result};
use crate::scalar::{czero, Real, C};

/// Solves `a · x = b` by LU factorization with partial pivoting.
pub fn solve<T: Real>(a: &ComplexMatrix<T>, b: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let n = a.rows();
    if !a.is_square() || b.rows() != n {
        return Err(dim_err!("cannot solve {}x{} system with {}x{} rhs", n, a.cols(), b.rows(), b.cols()));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Numeric("non-finite entries in linear system".into()));
    }
    let m = b.cols();
    let mut lu = a.data().to_vec();
    let mut x = b.data().to_vec();
    for k in 0..n {
        let (piv, best) = (k..n)
            .map(|i| (i, lu[i * n + k].norm()))
            .fold((k, T::zero()), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == T::zero() || !best.is_finite() {
            return Err(Error::Numeric(format!("singular linear system at pivot {k}")));
        }
        if piv != k {
            for j in 0..n {
                lu.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, piv * m + j);
            }
        }
        let inv = C::new(T::one(), T::zero()) / lu[k * n + k];
        for i in k + 1..n {
            let f = lu[i * n + k] * inv;
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            lu[i * n + k] = f;
            for j in k + 1..n {
                let u = lu[k * n + j];
                lu[i * n + j] -= f * u;
            }
            for j in 0..m {
                let u = x[k * m + j];
                x[i * m + j] -= f * u;
            }
        }
    }
    for k in (0..n).rev() {
        let inv = C::new(T::one(), T::zero()) / lu[k * n + k];
        for j in 0..m {
            let mut acc = x[k * m + j];
            for l in k + 1..n {
                acc -= lu[k * n + l] * x[l * m + j];
            }
            x[k * m + j] = acc * inv;
        }
    }
    let out = ComplexMatrix::new(n, m, x)?;
    if !out.is_finite() {
        return Err(Error::Numeric("linear solve produced non-finite values".into()));
    }
    Ok(out)
}

/// Q factor of the thin QR decomposition with a positive real diagonal in R,
/// computed by twice-iterated modified Gram–Schmidt.
pub fn orthonormalize_columns<T: Real>(m: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
    let (n, p) = m.shape();
    if n < p {
        return Err(dim_err!("cannot orthonormalize {p} columns in dimension {n}"));
    }
    let mut cols: Vec<Vec<C<T>>> = (0..p).map(|j| (0..n).map(|i| m[(i, j)]).collect()).collect();
    for j in 0..p {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let q = &done[k];
                let c = &mut rest[0];
                let proj: C<T> = q.iter().zip(c.iter()).fold(czero(), |acc, (a, b)| acc + a.conj() * b);
                for (ci, qi) in c.iter_mut().zip(q) {
                    *ci -= proj * qi;
                }
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if !(norm > T::lit(1e-300)) || !norm.is_finite() {
            return Err(Error::Numeric(format!("column {j} is linearly dependent")));
        }
        for z in &mut cols[j] {
            *z = *z / norm;
        }
    }
    Ok(ComplexMatrix::from_fn(n, p, |i, j| cols[j][i]))
}

/// Ascending eigenvalues of a Hermitian matrix.
///
/// Uses the real symmetric embedding `[[A, -B], [B, A]]` of `H = A + iB`,
/// whose spectrum is that of `H` with every eigenvalue doubled, and cyclic
/// Jacobi rotations on it.
pub fn hermitian_eigenvalues<T: Real>(h: &ComplexMatrix<T>) -> Result<Vec<T>> {
    if !h.is_square() {
        return Err(dim_err!("eigenvalues need a square matrix"));
    }
    if !h.is_finite() {
        return Err(Error::Numeric("non-finite entries in eigenvalue problem".into()));
    }
    let n = h.rows();
    let m = 2 * n;
    let mut a = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            // Hermitian part only, so tiny asymmetries from roundoff do not leak.
            let z = (h[(i, j)] + h[(j, i)].conj()) * T::lit(0.5);
            a[i * m + j] = z.re;
            a[(i + n) * m + (j + n)] = z.re;
            a[i * m + (j + n)] = -z.im;
            a[(i + n) * m + j] = z.im;
        }
    }
    let scale = a.iter().fold(T::zero(), |acc, x| acc.max(x.abs()));
    if scale > T::zero() {
        for _sweep in 0..100 {
            let off: T = (0..m)
                .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * m + j] * a[i * m + j])
                .sum();
            if off.sqrt() <= T::epsilon() * scale * T::lit(1e-2) {
                break;
            }
            for p in 0..m {
                for q in p + 1..m {
                    let apq = a[p * m + q];
                    if apq.abs() <= T::min_positive_value() {
                        continue;
                    }
                    let theta = (a[q * m + q] - a[p * m + p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..m {
                        let akp = a[k * m + p];
                        let akq = a[k * m + q];
                        a[k * m + p] = c * akp - s * akq;
                        a[k * m + q] = s * akp + c * akq;
                    }
                    for k in 0..m {
                        let apk = a[p * m + k];
                        let aqk = a[q * m + k];
                        a[p * m + k] = c * apk - s * aqk;
                        a[q * m + k] = s * apk + c * aqk;
                    }
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..m).map(|i| a[i * m + i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    // Each eigenvalue appears twice in the embedding.
    Ok(eig.chunks(2).map(|pair| (pair[0] + pair[1]) * T::lit(0.5)).collect())
}
