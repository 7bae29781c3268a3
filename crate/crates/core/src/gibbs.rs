//! Gibbs states, KMS geometry, superoperators and spectral gaps.
//!
//! Operators are vectorized by stacking columns, so `vec(X)[i + j*d] = X[i][j]`
//! and `K X K^dag` corresponds to `(conj(K) ⊗ K) vec(X)`.

use crate::error::{Error, Result};
use crate::linalg::{herm_eig, op_norm, trace_norm, ComplexMatrix, HermEig, NumericPolicy, C64, ZERO};

/// Largest Hilbert-space dimension accepted by [`make_gibbs_context`].
pub const MAX_DIM: usize = 1024;

/// Hamiltonian, inverse temperature and the Gibbs state with its fractional powers.
#[derive(Clone, Debug)]
pub struct GibbsContext {
    pub h: ComplexMatrix,
    pub beta: f64,
    pub eig: HermEig,
    pub sigma: ComplexMatrix,
    /// Eigenvalues of sigma, ordered like `eig.values` (ascending energy).
    pub probs: Vec<f64>,
    pub sigma_min: f64,
    pub h_norm: f64,
    /// Set when `sigma_min` falls below the warning threshold.
    pub ill_conditioned: bool,
    pub policy: NumericPolicy,
    sigma_half: ComplexMatrix,
    sigma_neg_half: ComplexMatrix,
    sigma_quarter: ComplexMatrix,
    sigma_neg_quarter: ComplexMatrix,
    sigma_inv: ComplexMatrix,
}

/// Builds the Gibbs context of `h` at inverse temperature `beta`.
pub fn make_gibbs_context(h: &ComplexMatrix, beta: f64) -> Result<GibbsContext> {
    make_gibbs_context_with(h, beta, NumericPolicy::DEFAULT)
}

pub fn make_gibbs_context_with(h: &ComplexMatrix, beta: f64, policy: NumericPolicy) -> Result<GibbsContext> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!("beta = {beta} must be finite and nonnegative")));
    }
    if !h.is_square() || h.rows() > MAX_DIM {
        return Err(Error::ShapeMismatch(format!("Hamiltonian must be square with dimension <= {MAX_DIM}")));
    }
    let eig = herm_eig(h)?;
    let e0 = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / z).collect();
    let sigma_min = probs.iter().copied().fold(f64::INFINITY, f64::min);
    if sigma_min < policy.sigma_refuse {
        return Err(Error::IllConditioned(format!(
            "sigma_min = {sigma_min:e} below {:e}; refusing sigma^(-1/2)",
            policy.sigma_refuse
        )));
    }
    let ill_conditioned = sigma_min < policy.sigma_warn;
    if ill_conditioned {
        log::warn!("Gibbs state is ill-conditioned: sigma_min = {sigma_min:e}");
    }
    let h_norm = eig.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let pow = |p: f64| diag_pow(&eig, &probs, p);
    let (sigma, sigma_half, sigma_neg_half) = (pow(1.0), pow(0.5), pow(-0.5));
    let (sigma_quarter, sigma_neg_quarter, sigma_inv) = (pow(0.25), pow(-0.25), pow(-1.0));
    Ok(GibbsContext {
        h: h.hermitian_part(),
        beta,
        eig,
        sigma,
        probs,
        sigma_min,
        h_norm,
        ill_conditioned,
        policy,
        sigma_half,
        sigma_neg_half,
        sigma_quarter,
        sigma_neg_quarter,
        sigma_inv,
    })
}

fn diag_pow(eig: &HermEig, probs: &[f64], p: f64) -> ComplexMatrix {
    let d = probs.len();
    let v = &eig.vectors;
    let scaled = ComplexMatrix::from_fn(d, d, |i, j| v[(i, j)] * probs[j].powf(p));
    &scaled * &v.adjoint()
}

impl GibbsContext {
    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    /// `sigma^p` for an arbitrary real exponent.
    pub fn sigma_pow(&self, p: f64) -> ComplexMatrix {
        diag_pow(&self.eig, &self.probs, p)
    }

    pub fn sigma_half(&self) -> &ComplexMatrix {
        &self.sigma_half
    }

    pub fn sigma_neg_half(&self) -> &ComplexMatrix {
        &self.sigma_neg_half
    }

    pub fn sigma_quarter(&self) -> &ComplexMatrix {
        &self.sigma_quarter
    }

    pub fn sigma_neg_quarter(&self) -> &ComplexMatrix {
        &self.sigma_neg_quarter
    }

    pub fn sigma_inv(&self) -> &ComplexMatrix {
        &self.sigma_inv
    }

    /// `e^{sH}` computed from the stored eigendecomposition.
    pub fn exp_h(&self, s: f64) -> ComplexMatrix {
        let d = self.dim();
        let v = &self.eig.vectors;
        let e = &self.eig.values;
        let scaled = ComplexMatrix::from_fn(d, d, |i, j| v[(i, j)] * (s * e[j]).exp());
        &scaled * &v.adjoint()
    }

    /// `Tr(sigma X)`.
    pub fn expectation(&self, x: &ComplexMatrix) -> C64 {
        (&self.sigma * x).trace()
    }

    pub(crate) fn check_shape(&self, x: &ComplexMatrix) -> Result<()> {
        let d = self.dim();
        if x.rows() != d || x.cols() != d {
            return Err(Error::ShapeMismatch(format!("expected {d}x{d}, got {}x{}", x.rows(), x.cols())));
        }
        Ok(())
    }
}

/// KMS inner product `Tr(X^dag sigma^{1/2} Y sigma^{1/2})`.
pub fn kms_inner(x: &ComplexMatrix, y: &ComplexMatrix, ctx: &GibbsContext) -> Result<C64> {
    ctx.check_shape(x)?;
    ctx.check_shape(y)?;
    let s = ctx.sigma_half();
    Ok((&(&(&x.adjoint() * s) * y) * s).trace())
}

/// Weighted norm `|X|^2_{sigma,-1/2} = Tr(X^dag sigma^{-1/2} X sigma^{-1/2})`.
pub fn weighted_norm_sq(x: &ComplexMatrix, ctx: &GibbsContext) -> Result<f64> {
    ctx.check_shape(x)?;
    let xe = ctx.eig.to_eigenbasis(x);
    let d = ctx.dim();
    let mut acc = 0.0;
    for j in 0..d {
        for k in 0..d {
            acc += xe[(j, k)].norm_sqr() / (ctx.probs[j] * ctx.probs[k]).sqrt();
        }
    }
    Ok(acc)
}

/// chi-squared divergence `Tr(sigma^{-1/2}(rho - sigma) sigma^{-1/2}(rho - sigma))`.
pub fn chi2_divergence(rho: &ComplexMatrix, ctx: &GibbsContext) -> Result<f64> {
    ctx.check_shape(rho)?;
    let t = rho.trace();
    if (t - 1.0).norm() > 1e-10 {
        return Err(Error::ParameterOutOfRange(format!("state trace {t} is not 1")));
    }
    weighted_norm_sq(&(rho - &ctx.sigma), ctx)
}

/// Anything that can be written as a list of Kraus operators.
pub trait KrausSource {
    fn kraus_ops(&self) -> &[ComplexMatrix];
}

/// A CP map given by Kraus operators.
#[derive(Clone, Debug)]
pub struct KrausMap {
    pub kraus: Vec<ComplexMatrix>,
}

impl KrausSource for KrausMap {
    fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus
    }
}

impl KrausSource for [ComplexMatrix] {
    fn kraus_ops(&self) -> &[ComplexMatrix] {
        self
    }
}

impl KrausSource for Vec<ComplexMatrix> {
    fn kraus_ops(&self) -> &[ComplexMatrix] {
        self
    }
}

/// `sum_a K_a rho K_a^dag`.
pub fn apply_kraus(kraus: &[ComplexMatrix], rho: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(rho.rows(), rho.cols());
    for k in kraus {
        out += &(&(k * rho) * &k.adjoint());
    }
    out
}

/// `|sum_a K_a^dag K_a - I|_op`.
pub fn tp_residual(kraus: &[ComplexMatrix]) -> Result<f64> {
    let d = kraus.first().map_or(0, |k| k.cols());
    let mut s = ComplexMatrix::identity(d).scale_real(-1.0);
    for k in kraus {
        s += &(&k.adjoint() * k);
    }
    op_norm(&s)
}

/// A linear map on `d x d` matrices as a `d^2 x d^2` matrix acting on column-stacked vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: ComplexMatrix,
}

/// Column-stacking vectorization.
pub fn vec_op(x: &ComplexMatrix) -> Vec<C64> {
    let (r, c) = (x.rows(), x.cols());
    let mut v = Vec::with_capacity(r * c);
    for j in 0..c {
        for i in 0..r {
            v.push(x[(i, j)]);
        }
    }
    v
}

/// Inverse of [`vec_op`] for square matrices.
pub fn unvec_op(v: &[C64], d: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |i, j| v[i + j * d])
}

impl Superoperator {
    pub fn identity(d: usize) -> Self {
        Self { dim: d, matrix: ComplexMatrix::identity(d * d) }
    }

    pub fn zero(d: usize) -> Self {
        Self { dim: d, matrix: ComplexMatrix::zeros(d * d, d * d) }
    }

    /// `sum_a conj(K_a) ⊗ K_a`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let d = match kraus.first() {
            Some(k) => k.rows(),
            None => return Err(Error::ShapeMismatch("empty Kraus list".into())),
        };
        if kraus.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::ShapeMismatch("Kraus operators must share a square shape".into()));
        }
        let mut m = ComplexMatrix::zeros(d * d, d * d);
        for k in kraus {
            let kc = k.conj();
            for a in 0..d {
                for b in 0..d {
                    let kab = kc[(a, b)];
                    if kab == ZERO {
                        continue;
                    }
                    for c in 0..d {
                        for e in 0..d {
                            m[(a * d + c, b * d + e)] += kab * k[(c, e)];
                        }
                    }
                }
            }
        }
        Ok(Self { dim: d, matrix: m })
    }

    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        unvec_op(&self.matrix.mul_vec(&vec_op(x)), self.dim)
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        self.matrix.mul_vec(v)
    }

    /// `self ∘ inner` (apply `inner` first).
    pub fn compose(&self, inner: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix * &inner.matrix }
    }

    pub fn power(&self, k: u64) -> Superoperator {
        let mut result = Superoperator::identity(self.dim);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.compose(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.compose(&base);
            }
        }
        result
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        Superoperator { dim: self.dim, matrix: &self.matrix + &other.matrix }
    }

    pub fn scale(&self, s: f64) -> Superoperator {
        Superoperator { dim: self.dim, matrix: self.matrix.scale_real(s) }
    }

    /// Heisenberg-picture (Hilbert-Schmidt adjoint) map.
    pub fn dual(&self) -> Superoperator {
        Superoperator { dim: self.dim, matrix: self.matrix.adjoint() }
    }

    /// Row vector `w` with `Tr(T(X)) = w · vec(X)`.
    pub fn trace_functional(&self) -> Vec<C64> {
        let d = self.dim;
        let n = d * d;
        (0..n).map(|col| (0..d).map(|i| self.matrix[(i + i * d, col)]).sum()).collect()
    }
}

/// Superoperator of a Kraus map.
pub fn superop_matrix<K: KrausSource + ?Sized>(map: &K) -> Result<Superoperator> {
    Superoperator::from_kraus(map.kraus_ops())
}

/// KMS-symmetrized superoperator `Γ^{-1/2} T Γ^{1/2}` expressed in the energy eigenbasis,
/// where `Γ(X) = sigma^{1/2} X sigma^{1/2}`. Unitarily equivalent to the computational-basis form.
pub fn kms_symmetrized(map: &Superoperator, ctx: &GibbsContext) -> Result<ComplexMatrix> {
    let d = ctx.dim();
    if map.dim != d {
        return Err(Error::ShapeMismatch(format!("superoperator dim {} vs context {d}", map.dim)));
    }
    let w = ctx.eig.vectors.conj().kron(&ctx.eig.vectors);
    let me = &(&w.adjoint() * &map.matrix) * &w;
    // vec index i + j*d carries the weight (p_i p_j)^{1/4}.
    let g: Vec<f64> = (0..d * d).map(|idx| (ctx.probs[idx % d] * ctx.probs[idx / d]).powf(0.25)).collect();
    Ok(ComplexMatrix::from_fn(d * d, d * d, |r, c| me[(r, c)] * (g[c] / g[r])))
}

/// Relative KMS asymmetry `|S - S^dag|_op / |S|_op`; zero iff the map is KMS detailed balanced.
pub fn kms_db_residual_superop(map: &Superoperator, ctx: &GibbsContext) -> Result<f64> {
    let s = kms_symmetrized(map, ctx)?;
    let denom = op_norm(&s)?;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(op_norm(&(&s - &s.adjoint()))? / denom)
}

pub fn kms_db_residual<K: KrausSource + ?Sized>(map: &K, ctx: &GibbsContext) -> Result<f64> {
    kms_db_residual_superop(&superop_matrix(map)?, ctx)
}

/// Tolerance on the detailed-balance residual accepted by [`spectral_gap`].
pub const GAP_DB_TOL: f64 = 1e-8;
/// Slack on the `[0, 1]` spectrum before clipping.
pub const SPECTRUM_SLACK: f64 = 1e-8;

/// Eigenvalues (descending) of the Hermitian part of the KMS-symmetrized map.
pub fn kms_spectrum(map: &Superoperator, ctx: &GibbsContext) -> Result<Vec<f64>> {
    let s = kms_symmetrized(map, ctx)?;
    let mut vals = herm_eig(&s.hermitian_part())?.values;
    vals.reverse();
    Ok(vals)
}

/// Spectral gap of a KMS-detailed-balanced channel.
pub fn spectral_gap(map: &Superoperator, ctx: &GibbsContext) -> Result<f64> {
    spectral_gap_with(map, ctx, GAP_DB_TOL)
}

pub fn spectral_gap_with(map: &Superoperator, ctx: &GibbsContext, db_tol: f64) -> Result<f64> {
    let s = kms_symmetrized(map, ctx)?;
    let denom = op_norm(&s)?;
    let residual = if denom == 0.0 { 0.0 } else { op_norm(&(&s - &s.adjoint()))? / denom };
    if residual > db_tol {
        return Err(Error::NotDetailedBalanced { residual });
    }
    let sym = s.hermitian_part();
    let vals = herm_eig(&sym)?.values;
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if lo < -SPECTRUM_SLACK {
        return Err(Error::SpectrumOutOfRange { worst: lo });
    }
    if hi > 1.0 + SPECTRUM_SLACK {
        return Err(Error::SpectrumOutOfRange { worst: hi });
    }
    // Deflate the stationary direction vec(sigma^{1/2}) (unit norm in the energy basis).
    let d = ctx.dim();
    let n = d * d;
    let mut v0 = vec![ZERO; n];
    for i in 0..d {
        v0[i + i * d] = C64::new(ctx.probs[i].sqrt(), 0.0);
    }
    let sv0 = sym.mul_vec(&v0);
    let v0sv0: C64 = v0.iter().zip(&sv0).map(|(a, b)| a.conj() * b).sum();
    // P S P = S - v0 (S v0)^dag - (S v0) v0^dag + (v0^dag S v0) v0 v0^dag
    let pspd = ComplexMatrix::from_fn(n, n, |r, c| {
        sym[(r, c)] - v0[r] * sv0[c].conj() - sv0[r] * v0[c].conj() + v0sv0 * v0[r] * v0[c].conj()
    });
    let second = herm_eig(&pspd.hermitian_part())?.values.last().copied().unwrap_or(0.0);
    Ok((1.0 - second.clamp(0.0, 1.0)).clamp(0.0, 1.0))
}

/// Steps after which every initial state is within `eps` of sigma in trace norm:
/// `ceil(log(sqrt(1/sigma_min - 1)/eps) / gap)`, and a single step when the gap is 1.
pub fn mixing_time_from_gap(gap: f64, sigma_min: f64, eps: f64) -> Result<u64> {
    if gap <= 1e-6 {
        return Err(Error::GapTooSmall { gap });
    }
    if !(eps > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} must be positive")));
    }
    let chi = (1.0 / sigma_min - 1.0).max(0.0).sqrt();
    if chi <= eps {
        return Ok(0);
    }
    if gap >= 1.0 - 1e-12 {
        return Ok(1);
    }
    Ok(((chi / eps).ln() / gap).ceil() as u64)
}

pub fn mixing_time_upper(map: &Superoperator, ctx: &GibbsContext, eps: f64) -> Result<u64> {
    mixing_time_from_gap(spectral_gap(map, ctx)?, ctx.sigma_min, eps)
}

/// `|rho - sigma|_1`.
pub fn trace_distance_to_gibbs(rho: &ComplexMatrix, ctx: &GibbsContext) -> Result<f64> {
    trace_norm(&(rho - &ctx.sigma))
}
