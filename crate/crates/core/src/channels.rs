//! Measurement channels: the exactly detailed-balanced channel `{K1, K2, K}`,
//! the warm-start POVM `{K+, K-}`, and two reference Gibbs samplers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{filtered_exact, FilterSpec};
use crate::gibbs::{apply_kraus, tp_residual, GibbsContext, KrausSource, Superoperator};
use crate::linalg::{
    herm_eig, op_norm, sqrt_psd, sqrt_psd_with, taylor_matrix_sqrt, taylor_sqrt_residual_bound, ComplexMatrix,
    NumericPolicy, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    DetailedBalance,
    Povm,
    Reset,
    PauliDbMixture,
    Custom,
}

/// Construction parameters recorded with a channel.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub kind: Option<ChannelKind>,
    pub u: Option<f64>,
    pub c: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    /// Order of the Taylor series used for `K2`.
    pub taylor_order: Option<usize>,
}

/// Ordered Kraus operators, one per branch, with real outcome values.
#[derive(Clone, Debug)]
pub struct MeasurementChannel {
    pub kraus: Vec<ComplexMatrix>,
    pub outcomes: Vec<f64>,
    pub labels: Vec<String>,
    pub meta: ChannelMeta,
}

impl KrausSource for MeasurementChannel {
    fn kraus_ops(&self) -> &[ComplexMatrix] {
        &self.kraus
    }
}

impl MeasurementChannel {
    /// Validates shapes, finiteness and trace preservation (`tp_tol` of the default policy).
    pub fn new(kraus: Vec<ComplexMatrix>, outcomes: Vec<f64>, labels: Vec<String>, meta: ChannelMeta) -> Result<Self> {
        Self::new_with_tol(kraus, outcomes, labels, meta, NumericPolicy::DEFAULT.tp_tol)
    }

    pub fn new_with_tol(
        kraus: Vec<ComplexMatrix>,
        outcomes: Vec<f64>,
        labels: Vec<String>,
        meta: ChannelMeta,
        tp_tol: f64,
    ) -> Result<Self> {
        if kraus.is_empty() || kraus.len() != outcomes.len() || kraus.len() != labels.len() {
            return Err(Error::ShapeMismatch("Kraus, outcome and label lists must be nonempty and aligned".into()));
        }
        let d = kraus[0].rows();
        if kraus.iter().any(|k| k.rows() != d || k.cols() != d) {
            return Err(Error::ShapeMismatch("Kraus operators must share a square shape".into()));
        }
        if outcomes.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange("outcome values must be finite".into()));
        }
        let residual = tp_residual(&kraus)?;
        if residual > tp_tol {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(Self { kraus, outcomes, labels, meta })
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].rows()
    }

    pub fn branches(&self) -> usize {
        self.kraus.len()
    }

    pub fn superop(&self) -> Superoperator {
        Superoperator::from_kraus(&self.kraus).expect("validated Kraus list")
    }

    pub fn branch_superop(&self, a: usize) -> Superoperator {
        Superoperator::from_kraus(std::slice::from_ref(&self.kraus[a])).expect("validated Kraus operator")
    }

    pub fn tp_residual(&self) -> f64 {
        tp_residual(&self.kraus).unwrap_or(f64::INFINITY)
    }

    /// Branch probabilities `Tr(K_a rho K_a^dag)`.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.kraus.iter().map(|k| (&(k * rho) * &k.adjoint()).trace().re).collect()
    }

    /// Stationary identity of the detailed-balance channel: `(p1 + p2)/(2 c^2 u) - 1/u`.
    pub fn db_estimator_mean(&self, rho: &ComplexMatrix) -> Option<f64> {
        let (u, c) = (self.meta.u?, self.meta.c?);
        if self.meta.kind != Some(ChannelKind::DetailedBalance) {
            return None;
        }
        let p = self.probabilities(rho);
        Some((p[0] + p[1]) / (2.0 * c * c * u) - 1.0 / u)
    }
}

/// Parameters `(u, c, tau)` of the detailed-balance channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbParams {
    pub u: f64,
    pub c: f64,
    pub tau: f64,
}

/// Optional overrides; missing entries fall back to the defaults of [`DbParams::resolve`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DbOverrides {
    pub u: Option<f64>,
    pub c: Option<f64>,
    pub tau: Option<f64>,
}

impl DbParams {
    /// Defaults `tau = 2 beta + 1`, `u = min(1/2, 1/(2 |A_f~|))`, `c = min(1/4, 1/(4 log(2 + beta |H|)))`.
    pub fn resolve(a: &ComplexMatrix, ctx: &GibbsContext, o: DbOverrides) -> Result<Self> {
        let tau = o.tau.unwrap_or(2.0 * ctx.beta + 1.0);
        let u = match o.u {
            Some(u) => u,
            None => {
                let at = filtered_exact(a, ctx, &FilterSpec::kms_shifted(tau, ctx.beta)?)?;
                let n = op_norm(&at)?;
                if n > 0.0 {
                    0.5f64.min(1.0 / (2.0 * n))
                } else {
                    0.5
                }
            }
        };
        let c = o.c.unwrap_or_else(|| 0.25f64.min(1.0 / (4.0 * (2.0 + ctx.beta * ctx.h_norm).ln())));
        Ok(Self { u, c, tau })
    }

    pub fn defaults(a: &ComplexMatrix, ctx: &GibbsContext) -> Result<Self> {
        Self::resolve(a, ctx, DbOverrides::default())
    }
}

/// Residual target for the Taylor series of `K2`.
pub const K2_RESIDUAL_TOL: f64 = 1e-12;

fn check_observable(a: &ComplexMatrix, ctx: &GibbsContext) -> Result<()> {
    ctx.check_shape(a)?;
    let residual = a.hermiticity_residual();
    if residual > ctx.policy.herm_rel_tol {
        return Err(Error::NotHermitian { residual });
    }
    let n = op_norm(a)?;
    if n > 1.0 + 1e-10 {
        return Err(Error::ParameterOutOfRange(format!("observable norm {n} exceeds 1")));
    }
    Ok(())
}

/// The exactly detailed-balanced measurement channel with branches `(1, 2, 3)`.
pub fn build_db_channel(a: &ComplexMatrix, ctx: &GibbsContext, p: DbParams) -> Result<MeasurementChannel> {
    check_observable(a, ctx)?;
    let DbParams { u, c, tau } = p;
    let af = filtered_exact(a, ctx, &FilterSpec::gaussian(tau)?)?;
    let at = filtered_exact(a, ctx, &FilterSpec::kms_shifted(tau, ctx.beta)?)?;
    let at_norm = op_norm(&at)?;
    let u_max = if at_norm > 0.0 { 0.5f64.min(1.0 / (2.0 * at_norm)) } else { 0.5 };
    if !(u > 0.0 && u <= u_max * (1.0 + 1e-12)) {
        return Err(Error::ParameterOutOfRange(format!("u = {u} must lie in (0, {u_max}]")));
    }
    if !(c > 0.0 && c <= 0.25) {
        return Err(Error::ParameterOutOfRange(format!("c = {c} must lie in (0, 1/4]")));
    }
    let cf2 = (ctx.beta * ctx.beta / (8.0 * tau * tau)).exp();
    if 3.0 * c * c * (1.0 + u * cf2) > 1.0 {
        return Err(Error::ParameterOutOfRange(format!("3c^2(1 + u e^(beta^2/8tau^2)) > 1 for c = {c}, u = {u}")));
    }
    let d = ctx.dim();
    let id = ComplexMatrix::identity(d);

    let k1 = sqrt_psd(&(&id + &af.scale_real(u)))?.scale_real(c);
    let r = u * at_norm;
    let mut order = 0;
    while taylor_sqrt_residual_bound(r, order) > K2_RESIDUAL_TOL {
        order += 1;
    }
    let k2 = taylor_matrix_sqrt(&at, C64::new(u, 0.0), order)?.scale_real(c);

    let o = &(&k1.adjoint() * &k1) + &(&k2.adjoint() * &k2);
    let rest = (&id - &o).hermitian_part();
    let min_eig = herm_eig(&rest)?.values[0];
    if min_eig < -ctx.policy.rejection_clip {
        return Err(Error::RejectionNotPsd { eigenvalue: min_eig });
    }
    let pmat = (&(ctx.sigma_half() * &rest) * ctx.sigma_half()).hermitian_part();
    let k = &sqrt_psd_with(&pmat, ctx.policy.rejection_clip)? * ctx.sigma_neg_half();

    let v = 1.0 / (2.0 * c * c * u);
    let meta = ChannelMeta {
        kind: Some(ChannelKind::DetailedBalance),
        u: Some(u),
        c: Some(c),
        tau: Some(tau),
        gamma: None,
        taylor_order: Some(order),
    };
    MeasurementChannel::new_with_tol(
        vec![k1, k2, k],
        vec![v, v, 0.0],
        vec!["1".into(), "2".into(), "3".into()],
        meta,
        ctx.policy.tp_tol,
    )
}

/// Warm-start constant `c_f = e^{beta^2 / 32 tau^2}`.
pub fn warm_start_cf(beta: f64, tau: f64) -> f64 {
    (beta * beta / (32.0 * tau * tau)).exp()
}

/// Post-measurement chi-squared bound `4(1 + chi2)/((1-u)^2 (1 - c_f u)^2)`.
pub fn warm_start_bound(chi2: f64, u: f64, cf: f64) -> f64 {
    4.0 * (1.0 + chi2) / ((1.0 - u).powi(2) * (1.0 - cf * u).powi(2))
}

/// Two-outcome POVM `K± = sqrt((I ± u A_f)/2)` with outcomes `±1/u`.
pub fn build_povm(a: &ComplexMatrix, ctx: &GibbsContext, u: f64, tau: f64) -> Result<MeasurementChannel> {
    check_observable(a, ctx)?;
    let cf = warm_start_cf(ctx.beta, tau);
    if !(u > 0.0 && u < 1.0 && u < 1.0 / cf) {
        return Err(Error::ParameterOutOfRange(format!("u = {u} must lie in (0, min(1, 1/c_f = {}))", 1.0 / cf)));
    }
    let af = filtered_exact(a, ctx, &FilterSpec::gaussian(tau)?)?;
    let id = ComplexMatrix::identity(ctx.dim());
    let kp = sqrt_psd(&(&id + &af.scale_real(u)).scale_real(0.5))?;
    let km = sqrt_psd(&(&id - &af.scale_real(u)).scale_real(0.5))?;
    let meta = ChannelMeta { kind: Some(ChannelKind::Povm), u: Some(u), tau: Some(tau), ..Default::default() };
    MeasurementChannel::new_with_tol(
        vec![kp, km],
        vec![1.0 / u, -1.0 / u],
        vec!["+".into(), "-".into()],
        meta,
        ctx.policy.tp_tol,
    )
}

/// Reference Gibbs samplers.
#[derive(Clone, Debug, PartialEq)]
pub enum SamplerSpec {
    /// `N(rho) = (1 - gamma) rho + gamma Tr(rho) sigma`.
    Reset { gamma: f64 },
    /// Uniform mixture of detailed-balance channels, one per jump operator.
    PauliDbMixture { jump_ops: Vec<ComplexMatrix>, params: DbOverrides },
}

/// Builds the sampler as a channel whose outcome values are all zero.
pub fn build_sampler(spec: &SamplerSpec, ctx: &GibbsContext) -> Result<MeasurementChannel> {
    let d = ctx.dim();
    match spec {
        SamplerSpec::Reset { gamma } => {
            let gamma = *gamma;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::ParameterOutOfRange(format!("reset rate {gamma} must lie in (0, 1]")));
            }
            let mut kraus = Vec::with_capacity(d * d + 1);
            if gamma < 1.0 {
                kraus.push(ComplexMatrix::identity(d).scale_real((1.0 - gamma).sqrt()));
            }
            let vecs: Vec<Vec<C64>> = (0..d).map(|i| ctx.eig.vectors.column(i)).collect();
            for i in 0..d {
                for j in 0..d {
                    kraus.push(ComplexMatrix::outer(&vecs[i], &vecs[j]).scale_real((gamma * ctx.probs[i]).sqrt()));
                }
            }
            let n = kraus.len();
            let meta = ChannelMeta { kind: Some(ChannelKind::Reset), gamma: Some(gamma), ..Default::default() };
            let labels = (0..n).map(|i| format!("n{i}")).collect();
            MeasurementChannel::new_with_tol(kraus, vec![0.0; n], labels, meta, ctx.policy.tp_tol)
        }
        SamplerSpec::PauliDbMixture { jump_ops, params } => {
            if jump_ops.is_empty() {
                return Err(Error::ParameterOutOfRange("mixture sampler needs at least one jump operator".into()));
            }
            let w = 1.0 / (jump_ops.len() as f64).sqrt();
            let mut kraus = Vec::with_capacity(3 * jump_ops.len());
            for a in jump_ops {
                let p = DbParams::resolve(a, ctx, *params)?;
                let ch = build_db_channel(a, ctx, p)?;
                kraus.extend(ch.kraus.iter().map(|k| k.scale_real(w)));
            }
            let n = kraus.len();
            let meta = ChannelMeta {
                kind: Some(ChannelKind::PauliDbMixture),
                u: params.u,
                c: params.c,
                tau: params.tau,
                ..Default::default()
            };
            let labels = (0..n).map(|i| format!("n{i}")).collect();
            MeasurementChannel::new_with_tol(kraus, vec![0.0; n], labels, meta, ctx.policy.tp_tol)
        }
    }
}

/// `sum_a K_a rho K_a^dag`.
pub fn apply_channel(ch: &MeasurementChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.rows() != ch.dim() || rho.cols() != ch.dim() {
        return Err(Error::ShapeMismatch("state and channel dimensions differ".into()));
    }
    Ok(apply_kraus(&ch.kraus, rho))
}

/// Normalized post-measurement state of branch `a` and its probability.
pub fn post_select(ch: &MeasurementChannel, a: usize, rho: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    post_select_with(ch, a, rho, NumericPolicy::DEFAULT.prob_floor)
}

pub fn post_select_with(ch: &MeasurementChannel, a: usize, rho: &ComplexMatrix, floor: f64) -> Result<(ComplexMatrix, f64)> {
    if a >= ch.branches() {
        return Err(Error::ShapeMismatch(format!("branch {a} out of range")));
    }
    if rho.rows() != ch.dim() || rho.cols() != ch.dim() {
        return Err(Error::ShapeMismatch("state and channel dimensions differ".into()));
    }
    let k = &ch.kraus[a];
    let out = &(k * rho) * &k.adjoint();
    let p = out.trace().re;
    if p < floor {
        return Err(Error::BranchProbabilityZero { prob: p });
    }
    Ok((out.scale_real(1.0 / p), p))
}

/// JSON form of a channel; each Kraus matrix is a row-major list of interleaved `re, im` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelJson {
    pub dim: usize,
    pub meta: ChannelMeta,
    pub labels: Vec<String>,
    pub outcomes: Vec<f64>,
    pub kraus: Vec<Vec<f64>>,
}

pub fn interleave(m: &ComplexMatrix) -> Vec<f64> {
    m.data().iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn deinterleave(rows: usize, cols: usize, data: &[f64]) -> Result<ComplexMatrix> {
    if data.len() != 2 * rows * cols {
        return Err(Error::ShapeMismatch(format!("expected {} interleaved values, got {}", 2 * rows * cols, data.len())));
    }
    ComplexMatrix::new(rows, cols, data.chunks(2).map(|p| C64::new(p[0], p[1])).collect())
}

impl MeasurementChannel {
    pub fn to_json(&self) -> ChannelJson {
        ChannelJson {
            dim: self.dim(),
            meta: self.meta.clone(),
            labels: self.labels.clone(),
            outcomes: self.outcomes.clone(),
            kraus: self.kraus.iter().map(interleave).collect(),
        }
    }

    pub fn from_json(j: &ChannelJson) -> Result<Self> {
        let kraus = j.kraus.iter().map(|k| deinterleave(j.dim, j.dim, k)).collect::<Result<Vec<_>>>()?;
        Self::new(kraus, j.outcomes.clone(), j.labels.clone(), j.meta.clone())
    }
}
