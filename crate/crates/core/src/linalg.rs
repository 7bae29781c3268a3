//! Dense complex linear algebra: a row-major matrix type, a cyclic Jacobi
//! eigensolver for Hermitian matrices, matrix functions, norms and the
//! truncated Taylor series of `sqrt(I + uB)` for non-Hermitian `B`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tolerances shared by the numerical kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Relative Frobenius residual `|A - A^dag| / |A|` accepted as Hermitian.
    pub herm_rel_tol: f64,
    /// Jacobi stops once the off-diagonal Frobenius mass drops below this times `|A|_F`.
    pub jacobi_rel_tol: f64,
    pub jacobi_max_sweeps: usize,
    /// Negative eigenvalues above `-psd_tol` are clipped to zero before a square root.
    pub psd_tol: f64,
    /// Trace-preservation tolerance for channels.
    pub tp_tol: f64,
    /// Smallest branch probability accepted by post-selection.
    pub prob_floor: f64,
    /// `sigma_min` below which `sigma^{-1/2}` is refused.
    pub sigma_refuse: f64,
    /// `sigma_min` below which a conditioning warning is raised.
    pub sigma_warn: f64,
    /// Clip threshold for the rejection operator argument.
    pub rejection_clip: f64,
}

impl NumericPolicy {
    pub const DEFAULT: NumericPolicy = NumericPolicy {
        herm_rel_tol: 1e-12,
        jacobi_rel_tol: 1e-13,
        jacobi_max_sweeps: 100,
        psd_tol: 1e-12,
        tp_tol: 1e-8,
        prob_floor: 1e-12,
        sigma_refuse: 1e-12,
        sigma_warn: 1e-8,
        rejection_clip: 1e-10,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Dense complex matrix in row-major storage.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major data, rejecting bad lengths and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * d + i] = z;
        }
        m
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let diag: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&diag)
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Builds a matrix from nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    /// Outer product `|x><y|`.
    pub fn outer(x: &[C64], y: &[C64]) -> Self {
        Self::from_fn(x.len(), y.len(), |i, j| x[i] * y[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    /// `self + s * other`, in place.
    pub fn axpy(&mut self, s: C64, other: &ComplexMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Matrix product with a shape check.
    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &ComplexMatrix) -> Self {
        let (n, m, p) = (self.rows, self.cols, other.cols);
        let mut out = vec![ZERO; n * p];
        for i in 0..n {
            let row = &mut out[i * p..(i + 1) * p];
            for k in 0..m {
                let a = self.data[i * m + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * p..(k + 1) * p];
                for (o, &b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Self { rows: n, cols: p, data: out }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Kronecker product `self ⊗ other`; `self` is the slow (leading) index.
    pub fn kron(&self, other: &ComplexMatrix) -> Self {
        let (r2, c2) = (other.rows, other.cols);
        Self::from_fn(self.rows * r2, self.cols * c2, |i, j| self[(i / r2, j / c2)] * other[(i % r2, j % c2)])
    }

    /// Copies out the block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &ComplexMatrix) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Relative Frobenius residual `|A - A^dag|_F / |A|_F` (0 for the zero matrix).
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = self.rows;
        let mut diff = 0.0;
        for i in 0..d {
            for j in 0..d {
                diff += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        let f = self.frobenius();
        if f == 0.0 {
            0.0
        } else {
            diff.sqrt() / f
        }
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.hermiticity_residual() <= rel_tol
    }

    /// `(A + A^dag) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// Commutator `AB - BA`.
    pub fn commutator(&self, other: &ComplexMatrix) -> Result<Self> {
        Ok(&self.matmul(other)? - &other.matmul(self)?)
    }

    /// Similarity transform `U^dag A U`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        u.adjoint().matmul(&self.matmul(u)?)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    /// Panics on a shape mismatch; use [`ComplexMatrix::matmul`] for a checked product.
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "mul shape mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.axpy(ONE, rhs);
    }
}

/// Eigendecomposition of a Hermitian matrix: `A = V diag(values) V^dag`.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub vectors: ComplexMatrix,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V phi(Λ) V^dag` for a real function; fails if `phi` is non-finite on the spectrum.
    pub fn map(&self, phi: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
        let mut diag = Vec::with_capacity(self.values.len());
        for &x in &self.values {
            let y = phi(x);
            if !y.is_finite() {
                return Err(Error::DomainError { eigenvalue: x });
            }
            diag.push(C64::new(y, 0.0));
        }
        Ok(self.reconstruct(&diag))
    }

    /// `V phi(Λ) V^dag` for a complex-valued function.
    pub fn map_complex(&self, phi: impl Fn(f64) -> C64) -> Result<ComplexMatrix> {
        let mut diag = Vec::with_capacity(self.values.len());
        for &x in &self.values {
            let y = phi(x);
            if !(y.re.is_finite() && y.im.is_finite()) {
                return Err(Error::DomainError { eigenvalue: x });
            }
            diag.push(y);
        }
        Ok(self.reconstruct(&diag))
    }

    fn reconstruct(&self, diag: &[C64]) -> ComplexMatrix {
        let v = &self.vectors;
        let d = self.values.len();
        let scaled = ComplexMatrix::from_fn(d, d, |i, j| v[(i, j)] * diag[j]);
        &scaled * &v.adjoint()
    }

    /// Expresses `X` in the eigenbasis: `V^dag X V`.
    pub fn to_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&self.vectors.adjoint() * x) * &self.vectors
    }

    /// Inverse of [`HermEig::to_eigenbasis`]: `V X V^dag`.
    pub fn from_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &(&self.vectors * x) * &self.vectors.adjoint()
    }
}

/// Hermitian eigendecomposition with the default policy.
pub fn herm_eig(a: &ComplexMatrix) -> Result<HermEig> {
    herm_eig_with(a, &NumericPolicy::DEFAULT)
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
pub fn herm_eig_with(a: &ComplexMatrix, policy: &NumericPolicy) -> Result<HermEig> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch(format!("eigensolver needs a square matrix, got {}x{}", a.rows, a.cols)));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let residual = a.hermiticity_residual();
    if residual > policy.herm_rel_tol {
        return Err(Error::NotHermitian { residual });
    }
    let n = a.rows;
    let mut m = a.hermitian_part();
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    let mut v = ComplexMatrix::identity(n);
    let total = m.frobenius();
    let target = policy.jacobi_rel_tol * total;

    let off = |m: &ComplexMatrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[(i, j)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > target {
        if sweeps >= policy.jacobi_max_sweeps {
            return Err(Error::NoConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag == 0.0 || mag < f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // Phase e^{i phi} of a_pq; the rotation first makes a_pq real, then applies
                // the real symmetric Jacobi rotation.
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let ph = phase.conj();
                let upp = C64::new(c, 0.0);
                let upq = C64::new(s, 0.0);
                let uqp = ph * (-s);
                let uqq = ph * c;
                // A <- A U (columns p, q)
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * upp + akq * uqp;
                    m[(k, q)] = akp * upq + akq * uqq;
                }
                // A <- U^dag A (rows p, q)
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = upp.conj() * apk + uqp.conj() * aqk;
                    m[(q, k)] = upq.conj() * apk + uqq.conj() * aqk;
                }
                m[(p, q)] = ZERO;
                m[(q, p)] = ZERO;
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * upp + vkq * uqp;
                    v[(k, q)] = vkp * upq + vkq * uqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermEig { values, vectors })
}

/// `phi(A)` for Hermitian `A`.
pub fn matfun_herm(a: &ComplexMatrix, phi: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    herm_eig(a)?.map(phi)
}

/// Square root of a PSD matrix; eigenvalues in `[-psd_tol, 0)` are clipped to zero.
pub fn sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    sqrt_psd_with(a, NumericPolicy::DEFAULT.psd_tol)
}

pub fn sqrt_psd_with(a: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = herm_eig(a)?;
    if let Some(&bad) = eig.values.iter().find(|&&x| x < -tol) {
        return Err(Error::DomainError { eigenvalue: bad });
    }
    eig.map(|x| x.max(0.0).sqrt())
}

/// Generalized binomial coefficient `binom(1/2, k)`.
pub fn binom_half(k: usize) -> f64 {
    let mut b = 1.0;
    for j in 1..=k {
        b *= (0.5 - (j as f64 - 1.0)) / j as f64;
    }
    b
}

/// Coefficients `binom(1/2, k)` for `k = 0..=order`.
pub fn binom_half_coeffs(order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    let mut b = 1.0;
    out.push(b);
    for j in 1..=order {
        b *= (0.5 - (j as f64 - 1.0)) / j as f64;
        out.push(b);
    }
    out
}

/// Truncation error bound `r^{K+1} / (1 - r)` of the order-`K` series for `sqrt(1 + z)`, `|z| <= r`.
pub fn taylor_sqrt_truncation(r: f64, order: usize) -> f64 {
    r.powi(order as i32 + 1) / (1.0 - r)
}

/// Bound on `|P_K(uB)^2 - (I + uB)|`: `2 r^{K+1}/(1-r) (2 - sqrt(1-r))`.
pub fn taylor_sqrt_residual_bound(r: f64, order: usize) -> f64 {
    2.0 * taylor_sqrt_truncation(r, order) * (2.0 - (1.0 - r).sqrt())
}

/// Smallest order whose truncation bound is at most `tol`.
pub fn taylor_order_for(r: f64, tol: f64) -> Result<usize> {
    if r >= 1.0 {
        return Err(Error::SeriesDiverges { r });
    }
    if r == 0.0 {
        return Ok(0);
    }
    let mut k = 0;
    while taylor_sqrt_truncation(r, k) > tol {
        k += 1;
    }
    Ok(k)
}

/// `P_K(uB) = sum_{k<=K} binom(1/2,k) (uB)^k`, evaluated by Horner's rule.
pub fn taylor_matrix_sqrt(b: &ComplexMatrix, u: C64, order: usize) -> Result<ComplexMatrix> {
    if !b.is_square() {
        return Err(Error::ShapeMismatch("Taylor square root needs a square matrix".into()));
    }
    let r = u.norm() * op_norm(b)?;
    if r >= 1.0 {
        return Err(Error::SeriesDiverges { r });
    }
    Ok(horner_sqrt(b, u, order))
}

/// Tolerance mode: chooses the order from the truncation bound, failing if it exceeds `max_order`.
pub fn taylor_matrix_sqrt_tol(b: &ComplexMatrix, u: C64, tol: f64, max_order: usize) -> Result<(ComplexMatrix, usize)> {
    let r = u.norm() * op_norm(b)?;
    let needed = taylor_order_for(r, tol)?;
    if needed > max_order {
        return Err(Error::TaylorOrderInsufficient { tol, max_order, needed });
    }
    Ok((horner_sqrt(b, u, needed), needed))
}

fn horner_sqrt(b: &ComplexMatrix, u: C64, order: usize) -> ComplexMatrix {
    let d = b.rows;
    let z = b.scale(u);
    let coeffs = binom_half_coeffs(order);
    let mut p = ComplexMatrix::identity(d).scale_real(coeffs[order]);
    for k in (0..order).rev() {
        p = &z * &p;
        for i in 0..d {
            p[(i, i)] += coeffs[k];
        }
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Operator,
    Trace,
    Frobenius,
}

/// Matrix norms; Hermitian inputs use their eigenvalues, others the singular values from `X^dag X`.
pub fn norm(x: &ComplexMatrix, kind: NormKind) -> Result<f64> {
    if kind == NormKind::Frobenius {
        return Ok(x.frobenius());
    }
    if x.frobenius() == 0.0 {
        return Ok(0.0);
    }
    let sv: Vec<f64> = if x.is_square() && x.is_hermitian(NumericPolicy::DEFAULT.herm_rel_tol) {
        herm_eig(x)?.values.iter().map(|v| v.abs()).collect()
    } else {
        let g = &x.adjoint() * x;
        herm_eig(&g)?.values.iter().map(|v| v.max(0.0).sqrt()).collect()
    };
    Ok(match kind {
        NormKind::Operator => sv.iter().copied().fold(0.0, f64::max),
        NormKind::Trace => sv.iter().sum(),
        NormKind::Frobenius => unreachable!(),
    })
}

pub fn op_norm(x: &ComplexMatrix) -> Result<f64> {
    norm(x, NormKind::Operator)
}

pub fn trace_norm(x: &ComplexMatrix) -> Result<f64> {
    norm(x, NormKind::Trace)
}

/// Pauli matrices.
pub mod pauli {
    use super::*;

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::new(2, 2, vec![ZERO, -I, I, ZERO]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    /// Tensor product of single-qubit Paulis from a string such as `"XIZ"`;
    /// the leftmost character acts on the most significant qubit.
    pub fn string(s: &str) -> Result<ComplexMatrix> {
        let mut out = ComplexMatrix::identity(1);
        for ch in s.chars() {
            let p = match ch.to_ascii_uppercase() {
                'I' => ComplexMatrix::identity(2),
                'X' => x(),
                'Y' => y(),
                'Z' => z(),
                other => return Err(Error::Config(format!("unknown Pauli letter {other:?}"))),
            };
            out = out.kron(&p);
        }
        if s.is_empty() {
            return Err(Error::Config("empty Pauli string".into()));
        }
        Ok(out)
    }

    /// Pauli `p` acting on qubit `site` of an `n`-qubit register.
    pub fn on_site(p: char, site: usize, n: usize) -> Result<ComplexMatrix> {
        let s: String = (0..n).map(|k| if k == site { p } else { 'I' }).collect();
        string(&s)
    }
}

/// Seeded random matrices and states.
pub mod random {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    pub fn random_matrix(r: &mut impl Rng, n: usize, m: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, m, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
    }

    pub fn random_hermitian(r: &mut impl Rng, n: usize) -> ComplexMatrix {
        random_matrix(r, n, n).hermitian_part()
    }

    pub fn random_state(r: &mut impl Rng, n: usize) -> ComplexMatrix {
        let g = random_matrix(r, n, n);
        let rho = &g * &g.adjoint();
        let t = rho.trace().re;
        rho.scale_real(1.0 / t)
    }

    /// Random Hermitian matrix rescaled to operator norm `norm`.
    pub fn random_hermitian_normed(r: &mut impl Rng, n: usize, norm: f64) -> ComplexMatrix {
        let h = random_hermitian(r, n);
        let s = op_norm(&h).expect("finite matrix");
        if s == 0.0 {
            h
        } else {
            h.scale_real(norm / s)
        }
    }
}
