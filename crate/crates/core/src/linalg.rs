//! Small dense symmetric-matrix kernel.
//!
//! Everything the estimators and the verification suite need: Cholesky
//! solves, inverse quadratic forms, log-determinants and a PSD-ordering probe.
//! Matrices are tiny (d is at most a few hundred), so factorizations are
//! recomputed on demand and no inverse is ever cached.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Relative diagonal shift applied once when a Cholesky factorization fails.
pub const JITTER_SCALE: f64 = 1e-10;

/// Dense symmetric `d x d` matrix stored row-major.
///
/// Used for the design matrices `V` and `Ṽ` (which are positive definite by
/// construction) and for intermediate symmetric differences.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SpdMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, scale: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = scale;
        }
        m
    }

    pub fn diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &x) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = x;
        }
        m
    }

    /// Builds a matrix from rows. Rows must form a square, symmetric array.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::dim(dim, row.len()));
            }
            data.extend_from_slice(row);
        }
        let m = Self { dim, data };
        if !m.is_symmetric(T::lit(1e-12)) {
            return Err(Error::InvalidConfig("matrix is not symmetric".into()));
        }
        Ok(m)
    }

    /// Symmetric matrix `Σ_i w_i a_i a_iᵀ + ridge·I`.
    pub fn gram<'a, I>(dim: usize, terms: I, ridge: T) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [T], T)>,
    {
        let mut m = Self::scaled_identity(dim, ridge);
        for (a, w) in terms {
            m.add_outer(a, w)?;
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn scale_mut(&mut self, s: T) {
        for x in &mut self.data {
            *x = *x * s;
        }
    }

    /// `self += w · a aᵀ`.
    pub fn add_outer(&mut self, a: &[T], w: T) -> Result<()> {
        check_len(self.dim, a)?;
        let d = self.dim;
        for i in 0..d {
            let wa = w * a[i];
            for j in 0..d {
                self.data[i * d + j] = self.data[i * d + j] + wa * a[j];
            }
        }
        Ok(())
    }

    /// `self ← s·self + a aᵀ + shift·I`, evaluated entrywise in that order.
    pub fn decay_add_outer(&mut self, s: T, a: &[T], shift: T) -> Result<()> {
        check_len(self.dim, a)?;
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                self.data[k] = s * self.data[k] + a[i] * a[j];
            }
            self.data[i * d + i] = self.data[i * d + i] + shift;
        }
        Ok(())
    }

    pub fn add_diagonal(&mut self, s: T) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] = self.data[i * self.dim + i] + s;
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.dim, v)?;
        Ok((0..self.dim).map(|i| dot(self.row(i), v)).collect())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::dim(self.dim, other.dim));
        }
        Ok(Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        })
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        let d = self.dim;
        (0..d).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self.get(i, j), self.get(j, i));
                (a - b).abs() <= tol * T::one().max(a.abs())
            })
        })
    }
}

/// Lower-triangular Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes `m`, retrying once with a `1e-10·trace/d` diagonal shift.
    pub fn factor(m: &SpdMatrix<T>) -> Result<Self> {
        match Self::try_factor(m, T::zero()) {
            Ok(c) => Ok(c),
            Err(_) if m.dim > 0 => {
                let jitter = T::lit(JITTER_SCALE) * m.trace().abs() / T::from_count(m.dim as u64);
                Self::try_factor(m, jitter)
            }
            Err(e) => Err(e),
        }
    }

    fn try_factor(m: &SpdMatrix<T>, shift: T) -> Result<Self> {
        let d = m.dim;
        let mut l = vec![T::zero(); d * d];
        for j in 0..d {
            let mut pivot = m.get(j, j) + shift;
            for k in 0..j {
                pivot = pivot - l[j * d + k] * l[j * d + k];
            }
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(Error::NotPositiveDefinite {
                    index: j,
                    pivot: pivot.to_f64().unwrap_or(f64::NAN),
                });
            }
            let ljj = pivot.sqrt();
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s = s - l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Ok(Self { dim: d, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L y = v`.
    fn forward(&self, v: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut y = v.to_vec();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.lower[i * d + k] * y[k];
            }
            y[i] = s / self.lower[i * d + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    fn backward(&self, mut y: Vec<T>) -> Vec<T> {
        let d = self.dim;
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in (i + 1)..d {
                s = s - self.lower[k * d + i] * y[k];
            }
            y[i] = s / self.lower[i * d + i];
        }
        y
    }

    pub fn solve(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.dim, v)?;
        Ok(self.backward(self.forward(v)))
    }

    /// `aᵀ M⁻¹ a = ‖L⁻¹ a‖²`, nonnegative by construction.
    pub fn quad_form_inv(&self, a: &[T]) -> Result<T> {
        check_len(self.dim, a)?;
        Ok(self.forward(a).iter().map(|&y| y * y).sum())
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim)
            .map(|i| two * self.lower[i * self.dim + i].ln())
            .sum()
    }
}

/// Solves `M x = v` for positive definite `M`.
pub fn solve<T: Real>(m: &SpdMatrix<T>, v: &[T]) -> Result<Vec<T>> {
    check_len(m.dim, v)?;
    Cholesky::factor(m)?.solve(v)
}

/// `aᵀ M⁻¹ a`, the squared `‖a‖_{M⁻¹}` norm.
pub fn quad_form_inv<T: Real>(m: &SpdMatrix<T>, a: &[T]) -> Result<T> {
    check_len(m.dim, a)?;
    Cholesky::factor(m)?.quad_form_inv(a)
}

/// `ln det M` from the Cholesky diagonal.
pub fn log_det<T: Real>(m: &SpdMatrix<T>) -> Result<T> {
    Ok(Cholesky::factor(m)?.log_det())
}

/// Default tolerance for [`psd_dominates`]: `1e-9 · (1 + ‖A‖_F)`.
pub fn default_psd_tol<T: Real>(a: &SpdMatrix<T>) -> T {
    T::lit(1e-9) * (T::one() + a.frobenius_norm())
}

/// True iff `A − B ⪰ −tol·I`, i.e. the smallest eigenvalue of `A − B` is at
/// least `−tol`.
pub fn psd_dominates<T: Real>(a: &SpdMatrix<T>, b: &SpdMatrix<T>, tol: T) -> Result<bool> {
    Ok(min_eigenvalue(&a.sub(b)?) >= -tol)
}

/// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi rotations).
pub fn min_eigenvalue<T: Real>(m: &SpdMatrix<T>) -> T {
    symmetric_eigenvalues(m)
        .into_iter()
        .fold(T::infinity(), T::min)
}

/// All eigenvalues of a symmetric matrix, unordered.
pub fn symmetric_eigenvalues<T: Real>(m: &SpdMatrix<T>) -> Vec<T> {
    let d = m.dim;
    let mut a = m.data.clone();
    let scale = m.frobenius_norm();
    if scale == T::zero() {
        return vec![T::zero(); d];
    }
    let eps = T::epsilon() * T::lit(1e-2) * scale;
    for _sweep in 0..100 {
        let off: T = (0..d)
            .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * a[i * d + j])
            .sum::<T>()
            .sqrt();
        if off <= eps {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + p] = app - t * apq;
                a[q * d + q] = aqq + t * apq;
                a[p * d + q] = T::zero();
                a[q * d + p] = T::zero();
            }
        }
    }
    (0..d).map(|i| a[i * d + i]).collect()
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn sub_vec<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub(crate) fn check_len<T>(dim: usize, v: &[T]) -> Result<()> {
    if v.len() == dim {
        Ok(())
    } else {
        Err(Error::dim(dim, v.len()))
    }
}
