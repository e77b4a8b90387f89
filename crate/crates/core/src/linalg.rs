//! Dense complex linear algebra sized for this problem (3x3 and 27x27).
//!
//! Everything is row-major `Complex<T>` storage. The matrices here are tiny,
//! so the implementations favor clarity and accuracy over asymptotics:
//! Hermitian exponentials go through a cyclic Jacobi eigendecomposition,
//! general exponentials through scaling-and-squaring with a Taylor core.

use crate::error::CoreError;
use crate::scalar::{im, re, C, Real};

/// Dense square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T: Real> {
    dim: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![C::new(T::zero(), T::zero()); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = re(T::one());
        }
        m
    }

    pub fn from_diagonal(diag: &[C<T>]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    /// Build from a row-major closure.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build a 3x3 matrix from literal rows of (re, im) pairs given as f64.
    pub fn from_rows_f64(rows: &[[(f64, f64); 3]; 3]) -> Self {
        Self::from_fn(3, |i, j| C::new(T::of(rows[i][j].0), T::of(rows[i][j].1)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C<T> {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// Matrix product `self * other`.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// AB - BA.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    /// Kronecker product; result dimension is the product of the inputs'.
    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a.re.is_zero() && a.im.is_zero() {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Largest entry magnitude (max-norm).
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Frobenius norm. Upper-bounds the operator 2-norm.
    pub fn fro_norm(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Maximum column absolute sum (the induced 1-norm).
    pub fn one_norm(&self) -> T {
        let mut best = T::zero();
        for j in 0..self.dim {
            let s = (0..self.dim)
                .map(|i| self[(i, j)].norm())
                .fold(T::zero(), |a, b| a + b);
            best = best.max(s);
        }
        best
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.sub(&self.adjoint()).max_abs() < tol
    }

    pub fn is_unitary(&self, tol: T) -> bool {
        self.adjoint()
            .mul(self)
            .sub(&Self::identity(self.dim))
            .max_abs()
            < tol
    }

    pub fn is_diagonal(&self, tol: T) -> bool {
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j && self[(i, j)].norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn diagonal(&self) -> Vec<C<T>> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &CVector<T>) -> CVector<T> {
        assert_eq!(self.dim, v.len(), "dimension mismatch");
        let mut out = vec![C::new(T::zero(), T::zero()); self.dim];
        for i in 0..self.dim {
            let mut acc = C::new(T::zero(), T::zero());
            for j in 0..self.dim {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        CVector::new(out)
    }

    /// exp(scale * self).
    ///
    /// Diagonal input exponentiates entrywise; Hermitian input goes through
    /// the Jacobi eigendecomposition; anything else falls back to
    /// scaling-and-squaring.
    pub fn expm(&self, scale: C<T>) -> Self {
        let strict = T::of(1e-14) * (T::one() + self.max_abs());
        if self.is_diagonal(strict) {
            let diag: Vec<C<T>> = self.diagonal().iter().map(|d| (d * scale).exp()).collect();
            return Self::from_diagonal(&diag);
        }
        if self.is_hermitian(strict) {
            let (vals, vecs) = self.eigh();
            let mut out = Self::zeros(self.dim);
            // V diag(exp(scale*w)) V†
            for k in 0..self.dim {
                let e = (scale * re(vals[k])).exp();
                for i in 0..self.dim {
                    let vik = vecs[(i, k)] * e;
                    for j in 0..self.dim {
                        out[(i, j)] += vik * vecs[(j, k)].conj();
                    }
                }
            }
            return out;
        }
        self.expm_general(scale)
    }

    /// Scaling-and-squaring with a Taylor core; adequate at these dimensions.
    fn expm_general(&self, scale: C<T>) -> Self {
        let x = self.scale(scale);
        let norm = x.one_norm();
        let mut squarings = 0u32;
        let mut shift = T::one();
        let quarter = T::of(0.25);
        while norm * shift > quarter && squarings < 64 {
            shift *= T::of(0.5);
            squarings += 1;
        }
        let xs = x.scale(re(shift));
        let mut term = Self::identity(self.dim);
        let mut sum = Self::identity(self.dim);
        for k in 1..40 {
            term = term.mul(&xs).scale(re(T::one() / T::of_int(k)));
            sum = sum.add(&term);
            if term.max_abs() < T::epsilon() * T::of(0.01) {
                break;
            }
        }
        let mut result = sum;
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }

    /// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
    ///
    /// Returns `(eigenvalues, V)` with `self = V diag(w) V†`, eigenvectors in
    /// the columns of `V`. Order is whatever the sweeps produce.
    pub fn eigh(&self) -> (Vec<T>, Self) {
        let n = self.dim;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let fro = a.fro_norm();
        let tol = T::epsilon() * (fro + T::one());
        for _sweep in 0..60 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += a[(i, j)].norm_sqr();
                    }
                }
            }
            if off.sqrt() <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    let mag = apq.norm();
                    if mag <= tol * T::of(1e-3) {
                        continue;
                    }
                    // Unit phase of the pivot entry.
                    let alpha = apq / re(mag);
                    let app = a[(p, p)].re;
                    let aqq = a[(q, q)].re;
                    let tau = (aqq - app) / (mag + mag);
                    let t = if tau >= T::zero() {
                        T::one() / (tau + (T::one() + tau * tau).sqrt())
                    } else {
                        -T::one() / (-tau + (T::one() + tau * tau).sqrt())
                    };
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = t * c;
                    // Rotation R: R[p][p]=c, R[p][q]=s*alpha, R[q][p]=-s*conj(alpha), R[q][q]=c.
                    for k in 0..n {
                        if k == p || k == q {
                            continue;
                        }
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * re(c) - akq * alpha.conj() * re(s);
                        a[(k, q)] = akp * alpha * re(s) + akq * re(c);
                        a[(p, k)] = a[(k, p)].conj();
                        a[(q, k)] = a[(k, q)].conj();
                    }
                    a[(p, p)] = re(app - t * mag);
                    a[(q, q)] = re(aqq + t * mag);
                    a[(p, q)] = C::new(T::zero(), T::zero());
                    a[(q, p)] = C::new(T::zero(), T::zero());
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * re(c) - vkq * alpha.conj() * re(s);
                        v[(k, q)] = vkp * alpha * re(s) + vkq * re(c);
                    }
                }
            }
        }
        let vals = (0..n).map(|i| a[(i, i)].re).collect();
        (vals, v)
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.dim + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.dim + j]
    }
}

/// Dense complex vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CVector<T: Real> {
    data: Vec<C<T>>,
}

impl<T: Real> CVector<T> {
    pub fn new(data: Vec<C<T>>) -> Self {
        Self { data }
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut data = vec![C::new(T::zero(), T::zero()); dim];
        data[index] = re(T::one());
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C<T>] {
        &self.data
    }

    pub fn norm(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    /// <self|other> with the left argument conjugated.
    pub fn inner(&self, other: &Self) -> C<T> {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.len() * other.len());
        for a in &self.data {
            for b in &other.data {
                data.push(a * b);
            }
        }
        Self { data }
    }

    pub fn scale(&self, s: C<T>) -> Self {
        Self::new(self.data.iter().map(|c| c * s).collect())
    }
}

impl<T: Real> std::ops::Index<usize> for CVector<T> {
    type Output = C<T>;
    fn index(&self, i: usize) -> &C<T> {
        &self.data[i]
    }
}

/// Validated exponential: rejects non-finite input, otherwise `expm`.
pub fn checked_expm<T: Real>(a: &CMatrix<T>, scale: C<T>) -> Result<CMatrix<T>, CoreError> {
    if !a.is_finite() || !(scale.re.is_finite() && scale.im.is_finite()) {
        return Err(CoreError::NonFinite);
    }
    Ok(a.expm(scale))
}

/// i as a complex scalar, re-exported next to the matrix type for callers.
pub fn unit_im<T: Real>() -> C<T> {
    im()
}
