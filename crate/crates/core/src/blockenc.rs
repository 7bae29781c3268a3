//! Explicit block encodings: dilation, products, linear combinations, quadrature
//! encodings of filtered observables and Taylor-series square roots. Also the
//! quasi-locality construction for `O = K1^dag K1 + K2^dag K2` and the
//! precondition report for implementing the rejection branch.

use serde::{Deserialize, Serialize};

use crate::channels::{build_db_channel, DbParams};
use crate::error::{Error, Result};
use crate::filters::{quadrature_error_bound, quadrature_error_terms, smooth_cutoff, FilterSpec, QuadratureGrid};
use crate::gibbs::GibbsContext;
use crate::linalg::{
    binom_half, binom_half_coeffs, herm_eig, op_norm, sqrt_psd_with, taylor_matrix_sqrt_tol, ComplexMatrix, HermEig, C64, I,
    ONE, ZERO,
};

/// Largest total dimension `2^b d` of an explicit encoding.
pub const MAX_BE_DIM: usize = 8192;

/// A unitary whose top-left `d x d` block is `A / alpha` up to `eps`; ancillas are the
/// leading tensor factor and `|0^b>` is index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEncoding {
    pub unitary: ComplexMatrix,
    pub alpha: f64,
    pub b: usize,
    pub eps: f64,
    pub target_dim: usize,
    /// The intended matrix, when known.
    pub target: Option<ComplexMatrix>,
}

fn check_dim(b: usize, d: usize) -> Result<usize> {
    let dim = (1usize << b.min(40)) * d;
    if b >= 40 || dim > MAX_BE_DIM {
        return Err(Error::DimensionCap { dim: if b >= 40 { usize::MAX } else { dim }, cap: MAX_BE_DIM });
    }
    Ok(dim)
}

impl BlockEncoding {
    pub fn new(unitary: ComplexMatrix, alpha: f64, b: usize, eps: f64, target_dim: usize, target: Option<ComplexMatrix>) -> Result<Self> {
        let dim = check_dim(b, target_dim)?;
        if unitary.rows() != dim || unitary.cols() != dim {
            return Err(Error::ShapeMismatch(format!("unitary is {}x{}, expected {dim}", unitary.rows(), unitary.cols())));
        }
        if !(alpha > 0.0) || !(eps >= 0.0) {
            return Err(Error::ParameterOutOfRange(format!("alpha = {alpha}, eps = {eps}")));
        }
        if let Some(t) = &target {
            if t.rows() != target_dim || t.cols() != target_dim {
                return Err(Error::ShapeMismatch("target dimension differs".into()));
            }
        }
        Ok(Self { unitary, alpha, b, eps, target_dim, target })
    }

    /// `(1, 0, 0)` encoding of the identity.
    pub fn identity(d: usize) -> Self {
        let id = ComplexMatrix::identity(d);
        Self { unitary: id.clone(), alpha: 1.0, b: 0, eps: 0.0, target_dim: d, target: Some(id) }
    }

    pub fn total_dim(&self) -> usize {
        self.unitary.rows()
    }

    /// `alpha (<0^b| ⊗ I) U (|0^b> ⊗ I)`.
    pub fn extract(&self) -> ComplexMatrix {
        let d = self.target_dim;
        self.unitary.block(0, 0, d, d).scale_real(self.alpha)
    }

    /// Frobenius norm of `U^dag U - I`, an upper bound on the operator-norm residual.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.total_dim();
        (&(&self.unitary.adjoint() * &self.unitary) - &ComplexMatrix::identity(n)).frobenius()
    }

    /// `|target - extract|_op` when a target is attached.
    pub fn measured_error(&self) -> Option<f64> {
        self.target.as_ref().map(|t| op_norm(&(t - &self.extract())).expect("finite matrices"))
    }

    pub fn with_target(mut self, target: ComplexMatrix) -> Result<Self> {
        if target.rows() != self.target_dim || target.cols() != self.target_dim {
            return Err(Error::ShapeMismatch("target dimension differs".into()));
        }
        self.target = Some(target);
        Ok(self)
    }
}

/// `[[C, sqrt(I - C C^dag)], [sqrt(I - C^dag C), -C^dag]]`, an exact `(1, 1, 0)` encoding.
pub fn dilate(c: &ComplexMatrix) -> Result<BlockEncoding> {
    if !c.is_square() {
        return Err(Error::ShapeMismatch("dilation needs a square matrix".into()));
    }
    let norm = op_norm(c)?;
    if norm > 1.0 + 1e-10 {
        return Err(Error::NormTooLarge { norm });
    }
    let c = if norm > 1.0 { c.scale_real(1.0 / norm) } else { c.clone() };
    let d = c.rows();
    check_dim(1, d)?;
    let id = ComplexMatrix::identity(d);
    let top = sqrt_psd_with(&(&id - &(&c * &c.adjoint())).hermitian_part(), 1e-10)?;
    let bottom = sqrt_psd_with(&(&id - &(&c.adjoint() * &c)).hermitian_part(), 1e-10)?;
    let mut u = ComplexMatrix::zeros(2 * d, 2 * d);
    u.set_block(0, 0, &c);
    u.set_block(0, d, &top);
    u.set_block(d, 0, &bottom);
    u.set_block(d, d, &(-&c.adjoint()));
    BlockEncoding::new(u, 1.0, 1, 0.0, d, Some(c))
}

pub fn extract(be: &BlockEncoding) -> ComplexMatrix {
    be.extract()
}

/// Left-multiplies `full` by `U` acting on one ancilla register and the system.
/// `full` has row index `((h 2^bits + a) 2^lo + l) d + s`.
fn apply_on_register(full: &mut ComplexMatrix, u: &ComplexMatrix, hi: usize, bits: usize, lo: usize, d: usize) {
    let n = full.cols();
    let na = 1usize << bits;
    let nlo = 1usize << lo;
    let sub = na * d;
    let mut rows = Vec::with_capacity(sub);
    for h in 0..(1usize << hi) {
        for l in 0..nlo {
            rows.clear();
            for a in 0..na {
                for s in 0..d {
                    rows.push(((h * na + a) * nlo + l) * d + s);
                }
            }
            let gathered = ComplexMatrix::from_fn(sub, n, |i, j| full[(rows[i], j)]);
            let updated = u * &gathered;
            for (i, &r) in rows.iter().enumerate() {
                for j in 0..n {
                    full[(r, j)] = updated[(i, j)];
                }
            }
        }
    }
}

/// Applies `U_0, ..., U_{M-1}` in order on disjoint ancilla registers (register 0 leading):
/// an encoding of `A_{M-1} ... A_0` with `(prod alpha, sum b, prod(alpha + eps) - prod alpha)`.
pub fn be_product(list: &[BlockEncoding]) -> Result<BlockEncoding> {
    let first = list.first().ok_or_else(|| Error::ShapeMismatch("empty product".into()))?;
    let d = first.target_dim;
    if list.iter().any(|be| be.target_dim != d) {
        return Err(Error::ShapeMismatch("block encodings act on different systems".into()));
    }
    let b: usize = list.iter().map(|be| be.b).sum();
    let dim = check_dim(b, d)?;
    let mut full = ComplexMatrix::identity(dim);
    let mut before = 0;
    for be in list {
        let after = b - before - be.b;
        apply_on_register(&mut full, &be.unitary, before, be.b, after, d);
        before += be.b;
    }
    let alpha: f64 = list.iter().map(|be| be.alpha).product();
    let eps = list.iter().map(|be| be.alpha + be.eps).product::<f64>() - alpha;
    let target = if list.iter().all(|be| be.target.is_some()) {
        let mut t = ComplexMatrix::identity(d);
        for be in list {
            t = be.target.as_ref().expect("checked") * &t;
        }
        Some(t)
    } else {
        None
    };
    BlockEncoding::new(full, alpha, b, eps.max(0.0), d, target)
}

/// Real orthogonal reflection mapping `e_0` to the unit vector `v`.
fn householder_from(v: &[f64]) -> ComplexMatrix {
    let n = v.len();
    let mut w: Vec<f64> = v.iter().map(|x| -x).collect();
    w[0] += 1.0;
    let ww: f64 = w.iter().map(|x| x * x).sum();
    if ww < 1e-30 {
        return ComplexMatrix::identity(n);
    }
    ComplexMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        C64::new(delta - 2.0 * w[i] * w[j] / ww, 0.0)
    })
}

fn ceil_log2(m: usize) -> usize {
    let mut bits = 0;
    while (1usize << bits) < m {
        bits += 1;
    }
    bits
}

/// `I_{2^extra} ⊗ U`.
fn pad_ancillas(u: &ComplexMatrix, extra: usize) -> ComplexMatrix {
    if extra == 0 {
        return u.clone();
    }
    ComplexMatrix::identity(1 << extra).kron(u)
}

/// Prepare/select linear combination `sum_j c_j A_j` with `(gamma, m + b, sum |c_j| eps_j)`,
/// `gamma = sum |c_j| alpha_j`, `m = ceil(log2 M)`, `b = max b_j`.
pub fn be_lcu(list: &[BlockEncoding], coeffs: &[C64]) -> Result<BlockEncoding> {
    if list.is_empty() || list.len() != coeffs.len() {
        return Err(Error::ShapeMismatch("LCU needs one coefficient per encoding".into()));
    }
    let d = list[0].target_dim;
    if list.iter().any(|be| be.target_dim != d) {
        return Err(Error::ShapeMismatch("block encodings act on different systems".into()));
    }
    let gamma: f64 = list.iter().zip(coeffs).map(|(be, c)| c.norm() * be.alpha).sum();
    if !(gamma > 0.0) {
        return Err(Error::DegenerateCoefficients);
    }
    let m = ceil_log2(list.len());
    let b = list.iter().map(|be| be.b).max().unwrap_or(0);
    check_dim(m + b, d)?;
    let nctl = 1usize << m;
    let inner = (1usize << b) * d;

    let mut v = vec![0.0; nctl];
    for (j, (be, c)) in list.iter().zip(coeffs).enumerate() {
        v[j] = (c.norm() * be.alpha / gamma).sqrt();
    }
    let p = householder_from(&v);
    let selected: Vec<ComplexMatrix> = list
        .iter()
        .zip(coeffs)
        .map(|(be, c)| {
            let phase = if c.norm() > 0.0 { c / c.norm() } else { ONE };
            pad_ancillas(&be.unitary, b - be.b).scale(phase)
        })
        .collect();
    let id = ComplexMatrix::identity(inner);
    let mut w = ComplexMatrix::zeros(nctl * inner, nctl * inner);
    for i in 0..nctl {
        for k in 0..nctl {
            let mut blk = ComplexMatrix::zeros(inner, inner);
            for j in 0..nctl {
                let weight = p[(j, i)].conj() * p[(j, k)];
                if weight == ZERO {
                    continue;
                }
                blk.axpy(weight, if j < list.len() { &selected[j] } else { &id });
            }
            w.set_block(i * inner, k * inner, &blk);
        }
    }
    let eps = list.iter().zip(coeffs).map(|(be, c)| c.norm() * be.eps).sum();
    let target = if list.iter().all(|be| be.target.is_some()) {
        let mut t = ComplexMatrix::zeros(d, d);
        for (be, c) in list.iter().zip(coeffs) {
            t.axpy(*c, be.target.as_ref().expect("checked"));
        }
        Some(t)
    } else {
        None
    };
    BlockEncoding::new(w, gamma, m + b, eps, d, target)
}

/// Raises the normalization to `alpha_new >= alpha` with one extra ancilla rotated by
/// `cos(theta) = alpha / alpha_new`; `eps` is unchanged.
pub fn be_rescale(be: &BlockEncoding, alpha_new: f64) -> Result<BlockEncoding> {
    if !(alpha_new >= be.alpha) {
        return Err(Error::ParameterOutOfRange(format!("new normalization {alpha_new} below {}", be.alpha)));
    }
    check_dim(be.b + 1, be.target_dim)?;
    let cos = be.alpha / alpha_new;
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    let rot = ComplexMatrix::from_real(2, 2, &[cos, -sin, sin, cos])?;
    BlockEncoding::new(rot.kron(&be.unitary), alpha_new, be.b + 1, be.eps, be.target_dim, be.target.clone())
}

/// Quadrature encoding of `A_g`: an LCU of `(I ⊗ e^{iHt_j}) U_A (I ⊗ e^{-iHt_j})` with
/// weights `dt g(t_j)`. The declared error is the quadrature bound (scaled by `1 + eps_A`
/// for the encoded operator) plus `sum |c_j| eps_A`.
pub fn be_filtered(a_be: &BlockEncoding, h: &ComplexMatrix, spec: &FilterSpec, grid: &QuadratureGrid) -> Result<BlockEncoding> {
    let eig = herm_eig(h)?;
    let d = eig.dim();
    if a_be.target_dim != d {
        return Err(Error::ShapeMismatch("encoding and Hamiltonian dimensions differ".into()));
    }
    let h_norm = eig.values.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    quadrature_error_terms(spec, grid, h_norm)?;
    let qbound = quadrature_error_bound(spec, grid, h_norm, d)?;
    let pad = ComplexMatrix::identity(1 << a_be.b);
    let points = grid.points();
    let weights = grid.weights(spec);
    let mut terms = Vec::with_capacity(points.len());
    for &t in &points {
        let ut = eig.map_complex(|e| (I * e * t).exp())?;
        let big = pad.kron(&ut);
        let w = &(&big * &a_be.unitary) * &big.adjoint();
        let target = a_be.target.as_ref().map(|x| &(&ut * x) * &ut.adjoint());
        terms.push(BlockEncoding { unitary: w, alpha: a_be.alpha, b: a_be.b, eps: a_be.eps, target_dim: d, target });
    }
    let mut out = be_lcu(&terms, &weights)?;
    out.eps += qbound * (1.0 + a_be.eps);
    out.target = match &a_be.target {
        Some(x) => Some(filtered_exact_h(x, &eig, spec)?),
        None => None,
    };
    Ok(out)
}

fn filtered_exact_h(a: &ComplexMatrix, eig: &HermEig, spec: &FilterSpec) -> Result<ComplexMatrix> {
    crate::filters::filtered_exact_eig(a, eig, spec)
}

/// Declared parameters of the Taylor-LCU square root, computable without building the unitary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorSqrtParams {
    pub order: usize,
    pub r: f64,
    /// `c sum_{k<=K} |binom(1/2,k)| r^k`.
    pub gamma: f64,
    /// `c (2 - sqrt(1 - r))`.
    pub gamma_limit: f64,
    /// `K b + ceil(log2(K + 1))`.
    pub ancillas: usize,
    /// `c sum_k |binom(1/2,k)| |u|^k ((alpha + delta)^k - alpha^k)`.
    pub eps_encoding: f64,
    /// `c r^{K+1} / (1 - r)`.
    pub eps_truncation: f64,
}

pub fn taylor_sqrt_params(alpha: f64, b: usize, delta: f64, u: f64, c: f64, order: usize) -> Result<TaylorSqrtParams> {
    let r = u.abs() * alpha;
    if r > 0.5 + 1e-15 || u.abs() * (alpha + delta) >= 1.0 {
        return Err(Error::SeriesDiverges { r });
    }
    let mut gamma = 0.0;
    let mut eps_encoding = 0.0;
    for k in 0..=order {
        let bk = binom_half(k).abs();
        gamma += c * bk * r.powi(k as i32);
        eps_encoding += c * bk * u.abs().powi(k as i32) * ((alpha + delta).powi(k as i32) - alpha.powi(k as i32));
    }
    Ok(TaylorSqrtParams {
        order,
        r,
        gamma,
        gamma_limit: c * (2.0 - (1.0 - r).sqrt()),
        ancillas: order * b + ceil_log2(order + 1),
        eps_encoding,
        eps_truncation: c * r.powi(order as i32 + 1) / (1.0 - r),
    })
}

/// Encoding of `c sqrt(I + u B)` as an LCU of powers `B^k` (each a product of `k` copies)
/// with coefficients `c binom(1/2, k) u^k`. The declared error adds the truncation tail.
pub fn be_taylor_sqrt(b_be: &BlockEncoding, u: f64, c: f64, order: usize) -> Result<BlockEncoding> {
    let params = taylor_sqrt_params(b_be.alpha, b_be.b, b_be.eps, u, c, order)?;
    check_dim(params.ancillas, b_be.target_dim)?;
    let d = b_be.target_dim;
    let mut powers = Vec::with_capacity(order + 1);
    powers.push(BlockEncoding::identity(d));
    for k in 1..=order {
        powers.push(be_product(&vec![b_be.clone(); k])?);
    }
    let coeffs: Vec<C64> = binom_half_coeffs(order)
        .iter()
        .enumerate()
        .map(|(k, bk)| C64::new(c * bk * u.powi(k as i32), 0.0))
        .collect();
    let mut out = be_lcu(&powers, &coeffs)?;
    out.eps += params.eps_truncation;
    let base = b_be.target.clone().unwrap_or_else(|| b_be.extract());
    let (root, _) = taylor_matrix_sqrt_tol(&base, C64::new(u, 0.0), 1e-15, 2000)?;
    out.target = Some(root.scale_real(c));
    Ok(out)
}

/// Truncated series for `c sqrt(1 + r x)` on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySqrt {
    pub degree: usize,
    pub r: f64,
    pub c: f64,
    /// Monomial coefficients in `x`.
    pub coeffs: Vec<f64>,
    /// `sum_{l > d} |a_l|`, a bound on the sup error.
    pub tail: f64,
}

impl PolySqrt {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, a| acc * x + a)
    }

    /// Applies the polynomial to `B / alpha` for Hermitian `B` by eigendecomposition.
    pub fn apply(&self, b: &ComplexMatrix, alpha: f64) -> Result<ComplexMatrix> {
        herm_eig(b)?.map(|e| self.eval(e / alpha))
    }
}

/// Smallest degree whose Taylor truncation of `sqrt(1 + r x)/4` is within `eps_prime` on `[-1, 1]`.
/// The factor `1/4` is the largest admissible `c`, so the degree is valid for every smaller `c`.
pub fn poly_sqrt_degree(r: f64, eps_prime: f64) -> Result<PolySqrt> {
    poly_sqrt_degree_with(r, 0.25, eps_prime)
}

pub fn poly_sqrt_degree_with(r: f64, c: f64, eps_prime: f64) -> Result<PolySqrt> {
    if !(r > 0.0 && r <= 0.5) {
        return Err(Error::ParameterOutOfRange(format!("r = {r} must lie in (0, 1/2]")));
    }
    if !(eps_prime > 0.0 && eps_prime <= 0.125) {
        return Err(Error::ParameterOutOfRange(format!("eps' = {eps_prime} must lie in (0, 1/8]")));
    }
    // Tail from degree d: explicit terms until negligible, then a geometric remainder.
    let tail_from = |d: usize| {
        let mut s = 0.0;
        let mut l = d + 1;
        loop {
            let t = c * binom_half(l).abs() * r.powi(l as i32);
            s += t;
            if t < 1e-20 {
                return s + t * r / (1.0 - r);
            }
            l += 1;
        }
    };
    let mut degree = 0;
    while tail_from(degree) > eps_prime {
        degree += 1;
    }
    let coeffs = (0..=degree).map(|l| c * binom_half(l) * r.powi(l as i32)).collect();
    Ok(PolySqrt { degree, r, c, coeffs, tail: tail_from(degree) })
}

/// Zeroes energy-basis entries with `|E_j - E_k| >= omega`; returns the masked operator and
/// `|O - O_tilde|_op`.
pub fn quasi_local_truncate(o: &ComplexMatrix, ctx: &GibbsContext, omega: f64) -> Result<(ComplexMatrix, f64)> {
    ctx.check_shape(o)?;
    if !(omega > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("Omega = {omega} must be positive")));
    }
    let eig = &ctx.eig;
    let mut oe = eig.to_eigenbasis(o);
    let d = eig.dim();
    for k in 0..d {
        for j in 0..d {
            if (eig.values[j] - eig.values[k]).abs() >= omega {
                oe[(k, j)] = ZERO;
            }
        }
    }
    let tilde = eig.from_eigenbasis(&oe);
    let residual = op_norm(&(o - &tilde))?;
    Ok((tilde, residual))
}

/// Quasi-local approximation of `O = K1^dag K1 + K2^dag K2` built from band-limited filters.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiLocalResult {
    pub o: ComplexMatrix,
    pub o_tilde: ComplexMatrix,
    /// `|O - O_tilde|_op`.
    pub residual: f64,
    pub omega: f64,
    pub omega0: f64,
    pub k: usize,
    /// Largest energy-basis entry of `O_tilde` at `|nu| >= Omega`.
    pub out_of_band: f64,
}

/// `O_tilde = c^2 (I + u A_f^(W0)) + c^2 P_k(u A_f~^(W0))^dag P_k(u A_f~^(W0))` with
/// `W0 = Omega / 2k` and the smooth cutoff. Everything is assembled in the energy basis,
/// so entries outside the band are exact zeros before the final change of basis.
pub fn quasi_local_from_channel(a: &ComplexMatrix, ctx: &GibbsContext, params: DbParams, k: usize, omega: f64) -> Result<QuasiLocalResult> {
    if k == 0 || !(omega > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("need k >= 1 and Omega > 0 (k = {k}, Omega = {omega})")));
    }
    let ch = build_db_channel(a, ctx, params)?;
    let o = &(&ch.kraus[0].adjoint() * &ch.kraus[0]) + &(&ch.kraus[1].adjoint() * &ch.kraus[1]);
    let omega0 = omega / (2.0 * k as f64);
    let eig = &ctx.eig;
    let d = eig.dim();
    let ae = eig.to_eigenbasis(a);
    let band = |spec: &FilterSpec| {
        ComplexMatrix::from_fn(d, d, |r, s| {
            let nu = eig.values[s] - eig.values[r];
            let w = smooth_cutoff(nu / omega0);
            if w == 0.0 {
                ZERO
            } else {
                ae[(r, s)] * spec.fourier(nu) * w
            }
        })
    };
    let af0 = band(&FilterSpec::gaussian(params.tau)?);
    let at0 = band(&FilterSpec::kms_shifted(params.tau, ctx.beta)?);
    let bmat = at0.scale_real(params.u);
    let coeffs = binom_half_coeffs(k);
    let id = ComplexMatrix::identity(d);
    let mut p = id.scale_real(coeffs[k]);
    for j in (0..k).rev() {
        p = &(&p * &bmat) + &id.scale_real(coeffs[j]);
    }
    let c2 = params.c * params.c;
    let tilde_e = &(&id + &af0.scale_real(params.u)).scale_real(c2) + &(&p.adjoint() * &p).scale_real(c2);
    let mut out_of_band: f64 = 0.0;
    for r in 0..d {
        for s in 0..d {
            if (eig.values[s] - eig.values[r]).abs() >= omega {
                out_of_band = out_of_band.max(tilde_e[(r, s)].norm());
            }
        }
    }
    let o_tilde = eig.from_eigenbasis(&tilde_e);
    let residual = op_norm(&(&o - &o_tilde))?;
    Ok(QuasiLocalResult { o, o_tilde, residual, omega, omega0, k, out_of_band })
}

/// Explicit constants for the quasi-locality preconditions at target accuracy `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiLocalPlan {
    /// `ceil(log(2 + beta |H|))`.
    pub s: usize,
    /// `1 / (10 floor(log2(1/eps)))`.
    pub omega: f64,
    /// `eps / (s^2 ceil(log2(1/eps))^2)`.
    pub eps_prime: f64,
    /// Smallest Taylor order with `2.6 c^2 r^{k+1}/(1-r) <= eps'/3`.
    pub k: usize,
    /// `max(beta, TAU_CONSTANT (k/Omega) sqrt(log(k/(c^2 eps'))))`.
    pub tau: f64,
}

/// Constant in front of the filter-width requirement, fixed by calibration.
pub const TAU_CONSTANT: f64 = 4.0;

pub fn implement_r_s(ctx: &GibbsContext) -> usize {
    ((2.0 + ctx.beta * ctx.h_norm).ln().ceil() as usize).max(1)
}

pub fn implement_r_omega(eps: f64) -> f64 {
    1.0 / (10.0 * (1.0 / eps).log2().floor())
}

pub fn quasi_local_plan(ctx: &GibbsContext, eps: f64, c: f64, r: f64) -> Result<QuasiLocalPlan> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} must lie in (0, 1/4]")));
    }
    let s = implement_r_s(ctx);
    let omega = implement_r_omega(eps);
    let l = (1.0 / eps).log2().ceil();
    let eps_prime = eps / ((s * s) as f64 * l * l);
    let c2 = c * c;
    let mut k = 1;
    while 2.6 * c2 * r.powi(k as i32 + 1) / (1.0 - r) > eps_prime / 3.0 {
        k += 1;
    }
    let tau = ctx.beta.max(TAU_CONSTANT * (k as f64 / omega) * (k as f64 / (c2 * eps_prime)).ln().max(1.0).sqrt());
    Ok(QuasiLocalPlan { s, omega, eps_prime, k, tau })
}

/// Precondition report for implementing the rejection branch; no circuit is built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImplementRReport {
    pub eps: f64,
    pub s: usize,
    pub omega: f64,
    pub eps_prime: f64,
    pub norm_o: f64,
    /// `1e-3 / s^2`.
    pub norm_bar: f64,
    pub norm_pass: bool,
    /// `norm_bar - norm_o`; negative when failing.
    pub norm_margin: f64,
    /// Residual of the sharp energy-basis mask at `Omega`.
    pub quasi_local_residual: f64,
    pub quasi_local_pass: bool,
    pub quasi_local_margin: f64,
    pub pass: bool,
}

pub fn precheck_implement_r(o: &ComplexMatrix, ctx: &GibbsContext, eps: f64) -> Result<ImplementRReport> {
    if !(eps > 0.0 && eps <= 0.25) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} must lie in (0, 1/4]")));
    }
    let s = implement_r_s(ctx);
    let omega = implement_r_omega(eps);
    let l = (1.0 / eps).log2().ceil();
    let eps_prime = eps / ((s * s) as f64 * l * l);
    let norm_o = op_norm(o)?;
    let norm_bar = 1e-3 / (s * s) as f64;
    let (_, residual) = quasi_local_truncate(o, ctx, omega)?;
    let norm_pass = norm_o <= norm_bar;
    let quasi_local_pass = residual <= eps_prime;
    Ok(ImplementRReport {
        eps,
        s,
        omega,
        eps_prime,
        norm_o,
        norm_bar,
        norm_pass,
        norm_margin: norm_bar - norm_o,
        quasi_local_residual: residual,
        quasi_local_pass,
        quasi_local_margin: eps_prime - residual,
        pass: norm_pass && quasi_local_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::filtered_exact;
    use crate::gibbs::make_gibbs_context;
    use crate::linalg::testutil::*;
    use crate::linalg::{matfun_herm, pauli};

    fn contraction(r: &mut impl rand::Rng, d: usize, norm: f64) -> ComplexMatrix {
        let m = random_matrix(r, d, d);
        let n = op_norm(&m).unwrap();
        m.scale_real(norm / n)
    }

    #[test]
    fn dilation_cases() {
        let be = dilate(&ComplexMatrix::identity(2)).unwrap();
        let mut expect = ComplexMatrix::identity(4);
        expect[(2, 2)] = -ONE;
        expect[(3, 3)] = -ONE;
        assert!((&be.unitary - &expect).max_abs() < 1e-15);
        let zero = dilate(&ComplexMatrix::zeros(2, 2)).unwrap();
        assert!((&zero.unitary.block(0, 2, 2, 2) - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        assert!((&zero.unitary.block(2, 0, 2, 2) - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        let mut r = rng(70);
        let c = contraction(&mut r, 3, 0.9);
        let be = dilate(&c).unwrap();
        assert!(be.unitarity_residual() <= 1e-9);
        assert!((&be.extract() - &c).max_abs() <= 1e-9);
        assert!(matches!(dilate(&c.scale_real(2.0)), Err(Error::NormTooLarge { .. })));
    }

    #[test]
    fn products() {
        let id = be_product(&[BlockEncoding::identity(2), BlockEncoding::identity(2)]).unwrap();
        assert_eq!(id.eps, 0.0);
        assert!((&id.extract() - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
        let mut r = rng(71);
        let b = contraction(&mut r, 2, 0.8);
        let c = contraction(&mut r, 2, 0.7);
        let p = be_product(&[dilate(&b).unwrap(), dilate(&c).unwrap()]).unwrap();
        assert_eq!((p.b, p.alpha), (2, 1.0));
        assert!((&p.extract() - &(&c * &b)).max_abs() <= 1e-9);
        assert!(p.unitarity_residual() <= 1e-8);
        assert!(p.measured_error().unwrap() <= p.eps + 1e-12);
    }

    #[test]
    fn product_error_growth() {
        let mut r = rng(72);
        let a = contraction(&mut r, 2, 0.6);
        let noisy = contraction(&mut r, 2, 0.05);
        let mut be = dilate(&(&a + &noisy)).unwrap();
        be.eps = op_norm(&noisy).unwrap();
        be.target = Some(a.clone());
        let m = 3;
        let p = be_product(&vec![be.clone(); m]).unwrap();
        assert_eq!(p.b, m);
        let expect = (1.0 + be.eps).powi(m as i32) - 1.0;
        assert!((p.eps - expect).abs() < 1e-15);
        assert!(p.eps >= m as f64 * be.eps);
        assert!(p.measured_error().unwrap() <= p.eps);
    }

    #[test]
    fn lcu_cases() {
        let mut r = rng(73);
        let a = contraction(&mut r, 2, 0.9);
        let be = dilate(&a).unwrap();
        let one = be_lcu(&[be.clone()], &[ONE]).unwrap();
        assert!((&one.extract() - &a).max_abs() < 1e-12);
        assert_eq!(one.alpha, 1.0);
        let half = C64::new(0.5, 0.0);
        let avg = be_lcu(&[be.clone(), be.clone()], &[half, half]).unwrap();
        assert!((&avg.extract() - &a).max_abs() <= 1e-9);
        assert!(avg.unitarity_residual() <= 1e-8);

        let ps = [pauli::x(), pauli::y(), pauli::z()];
        let cs: Vec<C64> = (0..3).map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        let bes: Vec<BlockEncoding> = ps.iter().map(|p| dilate(p).unwrap()).collect();
        let lcu = be_lcu(&bes, &cs).unwrap();
        let mut oracle = ComplexMatrix::zeros(2, 2);
        for (p, c) in ps.iter().zip(&cs) {
            oracle.axpy(*c, p);
        }
        assert!((&lcu.extract() - &oracle).max_abs() <= 1e-9);
        assert_eq!(lcu.b, 2 + 1);
        assert!((lcu.alpha - cs.iter().map(|c| c.norm()).sum::<f64>()).abs() < 1e-15);
        assert!(matches!(be_lcu(&bes, &[ZERO, ZERO, ZERO]), Err(Error::DegenerateCoefficients)));
    }

    use rand::Rng;

    #[test]
    fn rescale_contract() {
        let mut r = rng(74);
        let a = contraction(&mut r, 2, 0.5);
        let be = be_rescale(&dilate(&a).unwrap(), 3.0).unwrap();
        assert_eq!((be.alpha, be.b), (3.0, 2));
        assert!((&be.extract() - &a).max_abs() < 1e-12);
        assert!(be.unitarity_residual() < 1e-12);
    }

    #[test]
    fn filtered_encoding() {
        let h = pauli::z();
        let spec = FilterSpec::gaussian(1.0).unwrap();
        let grid = QuadratureGrid::new(8.0, 64).unwrap();
        let be = be_filtered(&dilate(&pauli::x()).unwrap(), &h, &spec, &grid).unwrap();
        let exact = pauli::x().scale_real((-2.0f64).exp());
        assert!(op_norm(&(&be.extract() - &exact)).unwrap() <= be.eps);
        assert_eq!(be.b, 1 + 6);
        let sum_abs: f64 = grid.weights(&spec).iter().map(|c| c.norm()).sum();
        assert!((be.alpha - sum_abs).abs() < 1e-14);
        assert!((be.alpha - spec.l1_norm()).abs() <= be.eps);

        let zz = pauli::z().scale_real(0.7);
        let be = be_filtered(&dilate(&zz).unwrap(), &h, &spec, &grid).unwrap();
        let scalar: C64 = grid.weights(&spec).iter().sum();
        assert!((&be.extract() - &zz.scale(scalar)).max_abs() <= 1e-9);

        let coarse = QuadratureGrid::new(8.0, 4).unwrap();
        assert!(matches!(be_filtered(&dilate(&pauli::x()).unwrap(), &h, &spec, &coarse), Err(Error::AliasRegimeViolated { .. })));
    }

    #[test]
    fn taylor_sqrt_small_orders() {
        let zero = be_taylor_sqrt(&dilate(&ComplexMatrix::zeros(2, 2)).unwrap(), 0.4, 0.25, 3).unwrap();
        assert!((&zero.extract() - &ComplexMatrix::identity(2).scale_real(0.25)).max_abs() < 1e-12);

        let mut r = rng(75);
        let bh = random_hermitian_normed(&mut r, 2, 0.9);
        let be = be_taylor_sqrt(&dilate(&bh).unwrap(), 0.4, 0.25, 6).unwrap();
        let params = taylor_sqrt_params(1.0, 1, 0.0, 0.4, 0.25, 6).unwrap();
        assert_eq!(be.b, params.ancillas);
        assert!((be.alpha - params.gamma).abs() < 1e-15);
        assert!(params.gamma <= params.gamma_limit);
        let oracle = matfun_herm(&(&ComplexMatrix::identity(2) + &bh.scale_real(0.4)), f64::sqrt).unwrap().scale_real(0.25);
        assert!(op_norm(&(&be.extract() - &oracle)).unwrap() <= params.eps_truncation + params.eps_encoding + 1e-12);
        assert!(be.unitarity_residual() <= 1e-8);
    }

    #[test]
    fn taylor_sqrt_non_hermitian() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let at = filtered_exact(&pauli::x(), &ctx, &FilterSpec::kms_shifted(2.0, 1.0).unwrap()).unwrap();
        let n = op_norm(&at).unwrap();
        let be = be_taylor_sqrt(&dilate(&at.scale_real(1.0 / n)).unwrap(), 0.3 * n, 1.0, 5).unwrap();
        let (reference, _) = taylor_matrix_sqrt_tol(&at, C64::new(0.3, 0.0), 1e-15, 500).unwrap();
        let p = taylor_sqrt_params(1.0, 1, 0.0, 0.3 * n, 1.0, 5).unwrap();
        assert!(op_norm(&(&be.extract() - &reference)).unwrap() <= p.eps_truncation + 1e-9);
    }

    #[test]
    fn taylor_sqrt_order_thirty_parameters() {
        let p = taylor_sqrt_params(1.0, 1, 1e-6, 0.4, 0.25, 30).unwrap();
        assert_eq!(p.ancillas, 30 + 5);
        assert!(p.gamma <= p.gamma_limit);
        assert!(p.eps_truncation < 1e-12);
        let closed = 0.25 * ((1.0 - 0.4f64).sqrt() - (1.0 - 0.4 - 0.4 * 1e-6f64).sqrt());
        assert!(p.eps_encoding <= closed * (1.0 + 1e-9));
        assert!(matches!(be_taylor_sqrt(&dilate(&pauli::x()).unwrap(), 0.4, 0.25, 30), Err(Error::DimensionCap { .. })));
        assert!(matches!(taylor_sqrt_params(1.0, 1, 0.0, 0.6, 0.25, 3), Err(Error::SeriesDiverges { .. })));
    }

    #[test]
    fn poly_degree_cases() {
        let p = poly_sqrt_degree(0.25, 1e-3).unwrap();
        assert!(p.degree <= ((1e3f64).ln() / 4f64.ln()).ceil() as usize + 2);
        let grid_err = (0..=1000)
            .map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
            .map(|x| (p.eval(x) - 0.25 * (1.0 + 0.25 * x).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(grid_err <= 1e-3);
        let q = poly_sqrt_degree(0.25, 1e-4).unwrap();
        let growth = q.degree as f64 - p.degree as f64;
        assert!((growth - 10f64.ln() / 4f64.ln()).abs() <= 1.0);
        let h = poly_sqrt_degree(0.5, 0.125).unwrap();
        let err = (0..=1000)
            .map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
            .map(|x| (h.eval(x) - 0.25 * (1.0 + 0.5 * x).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 0.125);
        assert!(poly_sqrt_degree(0.6, 0.1).is_err());
        let mut r = rng(76);
        let b = random_hermitian_normed(&mut r, 3, 1.0);
        let applied = p.apply(&b, 1.0).unwrap();
        let oracle = matfun_herm(&(&ComplexMatrix::identity(3) + &b.scale_real(0.25)), |x| 0.25 * x.sqrt()).unwrap();
        assert!(op_norm(&(&applied - &oracle)).unwrap() <= 1e-3);
    }

    #[test]
    fn masking_cases() {
        let mut r = rng(77);
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 4, 1.0), 1.0).unwrap();
        let diag = ctx.eig.from_eigenbasis(&ComplexMatrix::from_real_diag(&[0.1, 0.2, 0.3, 0.4]));
        let (t, res) = quasi_local_truncate(&diag, &ctx, 0.01).unwrap();
        assert!(res < 1e-14 && (&t - &diag).max_abs() < 1e-14);
        let o = random_hermitian(&mut r, 4);
        let (t, res) = quasi_local_truncate(&o, &ctx, 4.0 * ctx.h_norm + 0.1).unwrap();
        assert!(res < 1e-13 && (&t - &o).max_abs() < 1e-13);
        let (t, _) = quasi_local_truncate(&o, &ctx, 0.3).unwrap();
        assert!(crate::filters::out_of_band_max(&t, &ctx.eig, 0.3) <= 1e-14);
    }

    #[test]
    fn precheck_cases() {
        let ctx = make_gibbs_context(&pauli::z().scale_real(0.5), 2.0).unwrap();
        assert!((implement_r_omega(0.25) - 0.05).abs() < 1e-15);
        let s = implement_r_s(&ctx);
        let c_small = (1e-3 / (3.0 * (s * s) as f64)).sqrt();
        let p = DbParams { u: 0.3, c: c_small, tau: 2.0 };
        let ch = build_db_channel(&pauli::x(), &ctx, p).unwrap();
        let o = &(&ch.kraus[0].adjoint() * &ch.kraus[0]) + &(&ch.kraus[1].adjoint() * &ch.kraus[1]);
        assert!(op_norm(&o).unwrap() <= 3.0 * c_small * c_small + 1e-15);
        let rep = precheck_implement_r(&o, &ctx, 0.25).unwrap();
        assert!(rep.norm_pass && rep.norm_margin >= 0.0);
        let ch = build_db_channel(&pauli::x(), &ctx, DbParams { u: 0.3, c: 0.1, tau: 2.0 }).unwrap();
        let o = &(&ch.kraus[0].adjoint() * &ch.kraus[0]) + &(&ch.kraus[1].adjoint() * &ch.kraus[1]);
        let rep = precheck_implement_r(&o, &ctx, 0.25).unwrap();
        assert!(!rep.norm_pass && rep.norm_margin < 0.0);
        assert!(!rep.pass);
    }

    #[test]
    fn quasi_local_plan_meets_accuracy() {
        let mut r = rng(78);
        let h = random_hermitian_normed(&mut r, 4, 1.0);
        let a = random_hermitian_normed(&mut r, 4, 1.0);
        let ctx = make_gibbs_context(&h, 1.0).unwrap();
        let (c, u) = (0.1, 0.4);
        let plan = quasi_local_plan(&ctx, 0.1, c, u).unwrap();
        let q = quasi_local_from_channel(&a, &ctx, DbParams { u, c, tau: plan.tau }, plan.k, plan.omega).unwrap();
        assert_eq!(q.out_of_band, 0.0);
        assert!(crate::filters::out_of_band_max(&q.o_tilde, &ctx.eig, plan.omega) <= 1e-14);
        assert!(q.residual <= plan.eps_prime, "{} > {}", q.residual, plan.eps_prime);
    }
}
