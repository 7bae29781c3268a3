//! Single-trajectory estimation protocols and their sample-count planners.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channels::{
    build_db_channel, build_povm, build_sampler, warm_start_bound, warm_start_cf, DbOverrides, DbParams, MeasurementChannel,
    SamplerSpec,
};
use crate::error::{Error, Result};
use crate::filters::{filtered_exact, FilterSpec};
use crate::gibbs::{chi2_divergence, mixing_time_from_gap, spectral_gap, unvec_op, GibbsContext};
use crate::instrument::{
    autocorrelation_sequence, compose_db_instrument, compose_remix_instrument, sample_trajectory_observed, stationary_stats,
    t_aut_from_corr, theta_gap_bound, QuantumInstrument, StationaryStats, TrajectoryRecord,
};
use crate::linalg::{trace_norm, ComplexMatrix};

/// `ceil(2 var t_aut / (eps^2 eta))`.
pub fn sample_count_chebyshev(var: f64, t_aut: f64, eps: f64, eta: f64) -> u64 {
    ceil_count(2.0 * var * t_aut / (eps * eps * eta))
}

/// `ceil(18 c^2 / eps^2 log(6 / eta))`.
pub fn sample_count_azuma(c: f64, eps: f64, eta: f64) -> u64 {
    ceil_count(18.0 * c * c / (eps * eps) * (6.0 / eta).ln())
}

// Absorbs roundoff that would push an exact integer up by one.
fn ceil_count(x: f64) -> u64 {
    (x * (1.0 - 1e-12)).ceil().max(1.0) as u64
}

/// Starting state of the burn-in stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    MaximallyMixed,
    /// Start exactly at the Gibbs state (test mode).
    Gibbs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub eps: f64,
    pub eta: f64,
    /// Burn-in length; `None` resolves from the sampler's gap.
    pub burn_in: Option<u64>,
    /// Number of recorded steps; `None` resolves from the Chebyshev or Azuma planner.
    pub t: Option<usize>,
    /// Remixing steps between measurements (remix protocol only).
    pub k0: Option<u64>,
    /// Detailed-balance channel overrides.
    pub db: DbOverrides,
    /// POVM strength and filter width (remix protocol only).
    pub povm_u: Option<f64>,
    pub povm_tau: Option<f64>,
    pub initial: InitialState,
    pub seed: u64,
    /// Steps of exact state tracking for the remix bias certificate.
    pub bias_track_steps: usize,
    /// Refuse plans longer than this.
    pub max_steps: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            eta: 0.1,
            burn_in: None,
            t: None,
            k0: None,
            db: DbOverrides::default(),
            povm_u: None,
            povm_tau: None,
            initial: InitialState::MaximallyMixed,
            seed: 0,
            bias_track_steps: 50,
            max_steps: 50_000_000,
        }
    }
}

impl ProtocolConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("eps", self.eps), ("eta", self.eta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::ParameterOutOfRange(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Db,
    Remix,
}

/// Exact per-step bias tracking for the remix protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasCertificate {
    pub steps: usize,
    /// Largest `|rho_t - sigma|_1 / u` over the tracked steps.
    pub max_bias_bound: f64,
    /// Largest exact conditional bias `|E[v_t | F_{t-1}] - Tr(sigma A)|`.
    pub max_bias: f64,
    /// `eps / 3`.
    pub target: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub protocol: Option<ProtocolKind>,
    pub t_len: usize,
    pub burn_in: u64,
    pub burn_in_chi2: f64,
    pub burn_in_trace_distance: f64,
    pub gap: f64,
    pub t_mix_upper: Option<u64>,
    pub var: f64,
    pub mean: f64,
    pub t_aut: f64,
    pub theta: Option<f64>,
    pub theta_bound: Option<f64>,
    pub u: f64,
    pub c: Option<f64>,
    pub tau: f64,
    pub k0: Option<u64>,
    pub c_f: Option<f64>,
    pub chi2_in: Option<f64>,
    pub warm_start_constant: Option<f64>,
    pub azuma_c: Option<f64>,
    pub bias_certificate: Option<BiasCertificate>,
    pub branch_counts: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolResult {
    pub estimate: f64,
    pub truth: f64,
    pub abs_error: f64,
    pub trajectory: TrajectoryRecord,
    pub diagnostics: Diagnostics,
}

/// A resolved protocol: channels, instrument, burn-in state and planned length.
/// Running it for many seeds reuses all of the setup.
#[derive(Clone, Debug)]
pub struct PreparedProtocol {
    pub kind: ProtocolKind,
    pub measurement: MeasurementChannel,
    pub sampler: MeasurementChannel,
    pub instrument: QuantumInstrument,
    pub rho_burn: ComplexMatrix,
    pub truth: f64,
    /// Subtracted from the empirical mean.
    pub offset: f64,
    pub eps: f64,
    pub bias_track_steps: usize,
    pub af: Option<ComplexMatrix>,
    pub sigma: ComplexMatrix,
    pub diagnostics: Diagnostics,
}

fn initial_state(ctx: &GibbsContext, init: InitialState) -> ComplexMatrix {
    match init {
        InitialState::MaximallyMixed => ComplexMatrix::identity(ctx.dim()).scale_real(1.0 / ctx.dim() as f64),
        InitialState::Gibbs => ctx.sigma.clone(),
    }
}

fn burn(sampler: &MeasurementChannel, rho0: &ComplexMatrix, steps: u64) -> ComplexMatrix {
    let mut rho = sampler.superop().power(steps).apply(rho0).hermitian_part();
    let t = rho.trace().re;
    rho = rho.scale_real(1.0 / t);
    rho
}

/// Correlation sequence truncated once it stays below `1e-15 Var` for 32 lags.
fn correlation_profile(inst: &QuantumInstrument, ctx: &GibbsContext, var: f64, max_len: usize) -> Result<Vec<f64>> {
    let mut len = 256.min(max_len);
    loop {
        let corr = autocorrelation_sequence(inst, ctx, len)?;
        let quiet = corr.iter().rev().take(32).all(|c| c.abs() <= 1e-15 * var);
        if quiet || len >= max_len {
            let last = corr.iter().rposition(|c| c.abs() > 1e-15 * var).map_or(0, |i| i + 1);
            return Ok(corr[..last].to_vec());
        }
        len = (len * 4).min(max_len);
    }
}

/// Smallest fixed point of `T = chebyshev(var, t_aut,T, eps, eta)` reached by iteration from `T = 1`.
fn plan_chebyshev(corr: &[f64], st: StationaryStats, eps: f64, eta: f64, max_steps: usize) -> Result<(usize, f64)> {
    let mut t = 1usize;
    for _ in 0..200 {
        let ta = t_aut_from_corr(corr, st.var, t);
        let next = sample_count_chebyshev(st.var, ta.max(0.5), eps, eta) as usize;
        if next > max_steps {
            return Err(Error::ParameterOutOfRange(format!("planned T = {next} exceeds max_steps = {max_steps}")));
        }
        if next <= t {
            return Ok((t, t_aut_from_corr(corr, st.var, t)));
        }
        t = next;
    }
    Ok((t, t_aut_from_corr(corr, st.var, t)))
}

/// Resolves the detailed-balance protocol.
pub fn prepare_db_protocol(a: &ComplexMatrix, ctx: &GibbsContext, sampler: &SamplerSpec, cfg: &ProtocolConfig) -> Result<PreparedProtocol> {
    cfg.validate()?;
    let params = DbParams::resolve(a, ctx, cfg.db)?;
    let m = build_db_channel(a, ctx, params)?;
    let n = build_sampler(sampler, ctx)?;
    let gap = spectral_gap(&n.superop(), ctx)?;
    let t_mix = mixing_time_from_gap(gap, ctx.sigma_min, cfg.eta / 3.0).ok();
    let burn_in = match cfg.burn_in {
        Some(b) => b,
        None => mixing_time_from_gap(gap, ctx.sigma_min, cfg.eta / 3.0)?,
    };
    let rho_burn = burn(&n, &initial_state(ctx, cfg.initial), burn_in);
    let inst = compose_db_instrument(&m, &n)?;
    let st = stationary_stats(&inst, ctx)?;
    let corr = correlation_profile(&inst, ctx, st.var, cfg.max_steps.min(1 << 22))?;
    let (t_len, t_aut) = match cfg.t {
        Some(t) => (t, t_aut_from_corr(&corr, st.var, t)),
        None => plan_chebyshev(&corr, st, cfg.eps, cfg.eta / 3.0, cfg.max_steps)?,
    };
    let tb = theta_gap_bound(&m, gap, ctx).ok();
    let truth = ctx.expectation(a).re;
    let diagnostics = Diagnostics {
        protocol: Some(ProtocolKind::Db),
        t_len,
        burn_in,
        burn_in_chi2: chi2_divergence(&rho_burn, ctx)?,
        burn_in_trace_distance: trace_norm(&(&rho_burn - &ctx.sigma))?,
        gap,
        t_mix_upper: t_mix,
        var: st.var,
        mean: st.mean,
        t_aut,
        theta: tb.map(|t| t.theta),
        theta_bound: tb.map(|t| t.bound),
        u: params.u,
        c: Some(params.c),
        tau: params.tau,
        ..Default::default()
    };
    Ok(PreparedProtocol {
        kind: ProtocolKind::Db,
        offset: 1.0 / params.u,
        measurement: m,
        sampler: n,
        instrument: inst,
        rho_burn,
        truth,
        eps: cfg.eps,
        bias_track_steps: 0,
        af: None,
        sigma: ctx.sigma.clone(),
        diagnostics,
    })
}

/// Remix constants: warm-start bound, `k0` and the input chi-squared used to resolve it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemixPlan {
    pub c_f: f64,
    pub chi2_in: f64,
    pub warm_start_constant: f64,
    pub k0: u64,
}

/// `k0 = ceil(log(3 sqrt(C_ws) / (u eps)) / gap)` with `C_ws` the warm-start bound at
/// `chi2_in = max(chi2_burn, (u eps / 3)^2)`, so every remixed state is within `u eps / 3` of sigma.
pub fn resolve_k0(gap: f64, u: f64, beta: f64, tau: f64, eps: f64, chi2_burn: f64) -> Result<RemixPlan> {
    if gap <= 1e-6 {
        return Err(Error::GapTooSmall { gap });
    }
    let target = u * eps / 3.0;
    let c_f = warm_start_cf(beta, tau);
    let chi2_in = chi2_burn.max(target * target);
    let c_ws = warm_start_bound(chi2_in, u, c_f);
    let ratio = c_ws.sqrt() / target;
    let k0 = if ratio <= 1.0 {
        0
    } else if gap >= 1.0 - 1e-12 {
        1
    } else {
        (ratio.ln() / gap).ceil() as u64
    };
    Ok(RemixPlan { c_f, chi2_in, warm_start_constant: c_ws, k0 })
}

/// Resolves the remix protocol.
pub fn prepare_remix_protocol(a: &ComplexMatrix, ctx: &GibbsContext, sampler: &SamplerSpec, cfg: &ProtocolConfig) -> Result<PreparedProtocol> {
    cfg.validate()?;
    let tau = cfg.povm_tau.unwrap_or(2.0 * ctx.beta + 1.0);
    let u = cfg.povm_u.unwrap_or_else(|| 0.5f64.min(0.5 / warm_start_cf(ctx.beta, tau)));
    let m = build_povm(a, ctx, u, tau)?;
    let n = build_sampler(sampler, ctx)?;
    let gap = spectral_gap(&n.superop(), ctx)?;
    if gap <= 1e-6 {
        return Err(Error::GapTooSmall { gap });
    }
    let target = u * cfg.eps / 3.0;
    let t_mix = mixing_time_from_gap(gap, ctx.sigma_min, cfg.eta / 3.0).ok();
    let burn_in = match cfg.burn_in {
        Some(b) => b,
        None => mixing_time_from_gap(gap, ctx.sigma_min, target.min(cfg.eta / 3.0))?,
    };
    let rho_burn = burn(&n, &initial_state(ctx, cfg.initial), burn_in);
    let chi2_burn = chi2_divergence(&rho_burn, ctx)?;
    let plan = resolve_k0(gap, u, ctx.beta, tau, cfg.eps, chi2_burn)?;
    let k0 = cfg.k0.unwrap_or(plan.k0);
    let inst = compose_remix_instrument(&m, &n, k0)?;
    let azuma_c = 1.0 / u + 1.0;
    let t_len = match cfg.t {
        Some(t) => t,
        None => {
            let t = sample_count_azuma(azuma_c, cfg.eps, cfg.eta) as usize;
            if t > cfg.max_steps {
                return Err(Error::ParameterOutOfRange(format!("planned T = {t} exceeds max_steps = {}", cfg.max_steps)));
            }
            t
        }
    };
    let af = filtered_exact(a, ctx, &FilterSpec::gaussian(tau)?)?;
    let truth = ctx.expectation(a).re;
    let (var, mean, t_aut) = match stationary_stats(&inst, ctx) {
        Ok(st) if st.var > 1e-14 => {
            let corr = correlation_profile(&inst, ctx, st.var, 1 << 16)?;
            (st.var, st.mean, t_aut_from_corr(&corr, st.var, t_len))
        }
        _ => {
            let p = m.probabilities(&ctx.sigma);
            let mean = (p[0] - p[1]) / u;
            (1.0 / (u * u) - mean * mean, mean, f64::NAN)
        }
    };
    let diagnostics = Diagnostics {
        protocol: Some(ProtocolKind::Remix),
        t_len,
        burn_in,
        burn_in_chi2: chi2_burn,
        burn_in_trace_distance: trace_norm(&(&rho_burn - &ctx.sigma))?,
        gap,
        t_mix_upper: t_mix,
        var,
        mean,
        t_aut,
        u,
        tau,
        k0: Some(k0),
        c_f: Some(plan.c_f),
        chi2_in: Some(plan.chi2_in),
        warm_start_constant: Some(plan.warm_start_constant),
        azuma_c: Some(azuma_c),
        ..Default::default()
    };
    Ok(PreparedProtocol {
        kind: ProtocolKind::Remix,
        offset: 0.0,
        measurement: m,
        sampler: n,
        instrument: inst,
        rho_burn,
        truth,
        eps: cfg.eps,
        bias_track_steps: cfg.bias_track_steps,
        af: Some(af),
        sigma: ctx.sigma.clone(),
        diagnostics,
    })
}

impl PreparedProtocol {
    /// Runs the sampling stage with trajectory stream `stream` of `seed`.
    pub fn run(&self, seed: u64, stream: u64) -> Result<ProtocolResult> {
        let t_len = self.diagnostics.t_len;
        let d = self.instrument.dim();
        let track = if self.kind == ProtocolKind::Remix { self.bias_track_steps.min(t_len) } else { 0 };
        let mut max_bound: f64 = 0.0;
        let mut max_bias: f64 = 0.0;
        let mut failure: Option<Error> = None;
        let u = self.diagnostics.u;
        let (rec, _) = sample_trajectory_observed(&self.instrument, &self.rho_burn, t_len, seed, stream, |t, state| {
            if t >= track || failure.is_some() {
                return;
            }
            let rho = unvec_op(state, d);
            match trace_norm(&(&rho - &self.sigma)) {
                Ok(dist) => max_bound = max_bound.max(dist / u),
                Err(e) => failure = Some(e),
            }
            if let Some(af) = &self.af {
                max_bias = max_bias.max(((&rho * af).trace().re - self.truth).abs());
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let estimate = rec.empirical_mean - self.offset;
        let mut diagnostics = self.diagnostics.clone();
        for &l in &rec.labels {
            *diagnostics.branch_counts.entry(self.instrument.labels()[l].clone()).or_default() += 1;
        }
        if track > 0 {
            let target = self.eps / 3.0;
            diagnostics.bias_certificate = Some(BiasCertificate {
                steps: track,
                max_bias_bound: max_bound,
                max_bias,
                target,
                holds: max_bound <= target && max_bias <= target,
            });
        }
        Ok(ProtocolResult { estimate, truth: self.truth, abs_error: (estimate - self.truth).abs(), trajectory: rec, diagnostics })
    }
}

pub fn run_db_protocol(a: &ComplexMatrix, ctx: &GibbsContext, sampler: &SamplerSpec, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    prepare_db_protocol(a, ctx, sampler, cfg)?.run(cfg.seed, 0)
}

pub fn run_remix_protocol(a: &ComplexMatrix, ctx: &GibbsContext, sampler: &SamplerSpec, cfg: &ProtocolConfig) -> Result<ProtocolResult> {
    prepare_remix_protocol(a, ctx, sampler, cfg)?.run(cfg.seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::make_gibbs_context;
    use crate::linalg::pauli;
    use crate::linalg::testutil::*;
    use rayon::prelude::*;

    #[test]
    fn chebyshev_arithmetic() {
        assert_eq!(sample_count_chebyshev(1.0, 0.5, 0.1, 0.1), 1000);
        assert_eq!(sample_count_chebyshev(4.0, 2.0, 0.1, 0.05), 32000);
        assert_eq!(sample_count_chebyshev(1.0, 0.5, 0.05, 0.1), 4000);
    }

    #[test]
    fn azuma_arithmetic() {
        let oracle = (1800.0 * 60f64.ln()).ceil() as u64;
        assert_eq!(sample_count_azuma(1.0, 0.1, 0.1), oracle);
        assert_eq!(oracle, 7370);
        let four = sample_count_azuma(2.0, 0.1, 0.1) as f64;
        assert!((four / (1800.0 * 4.0 * 60f64.ln()) - 1.0).abs() < 1e-4);
        let ratio = (18.0 / 0.01 * 600f64.ln()) / (18.0 / 0.01 * 60f64.ln());
        assert!((ratio - 1.562).abs() < 1e-3);
        let (a, b) = (sample_count_azuma(1.0, 0.1, 0.01) as f64, sample_count_azuma(1.0, 0.1, 0.1) as f64);
        assert!((a / b - ratio).abs() < 1e-3);
    }

    #[test]
    fn k0_full_reset_and_scaling() {
        let p = resolve_k0(1.0, 0.5, 1.0, 2.0, 0.1, 0.0).unwrap();
        assert_eq!(p.k0, 1);
        let q = resolve_k0(0.1, 0.5, 1.0, 2.0, 0.1, 0.5).unwrap();
        let expected = ((q.warm_start_constant.sqrt() * 3.0 / (0.05)).ln() / 0.1).ceil() as u64;
        assert_eq!(q.k0, expected);
        assert!(matches!(resolve_k0(1e-9, 0.5, 1.0, 2.0, 0.1, 0.5), Err(Error::GapTooSmall { .. })));
    }

    #[test]
    fn db_protocol_commuting_observable() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let a = pauli::z();
        let cfg = ProtocolConfig { eps: 0.3, eta: 0.2, ..Default::default() };
        let prep = prepare_db_protocol(&a, &ctx, &SamplerSpec::Reset { gamma: 0.5 }, &cfg).unwrap();
        assert!(prep.diagnostics.burn_in_trace_distance <= cfg.eta / 3.0);
        assert!(prep.diagnostics.t_aut <= prep.diagnostics.theta_bound.unwrap() + 1e-9);
        let fails = (0..20u64)
            .into_par_iter()
            .map(|s| prep.run(s, 0).unwrap().abs_error > cfg.eps)
            .filter(|&f| f)
            .count();
        assert!(fails <= (2.0 * cfg.eta * 20.0).ceil() as usize + 2, "{fails} failures");
    }

    #[test]
    fn determinism() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let cfg = ProtocolConfig { eps: 0.4, eta: 0.3, seed: 9, ..Default::default() };
        let s = SamplerSpec::Reset { gamma: 0.5 };
        let a = run_db_protocol(&pauli::x(), &ctx, &s, &cfg).unwrap();
        let b = run_db_protocol(&pauli::x(), &ctx, &s, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.truth.abs() < 1e-15);
    }

    #[test]
    fn remix_full_reset_iid() {
        let mut r = rng(60);
        let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 2, 1.0), 1.0).unwrap();
        let a = random_hermitian_normed(&mut r, 2, 1.0);
        let cfg = ProtocolConfig { eps: 0.2, eta: 0.1, t: Some(2000), k0: Some(1), ..Default::default() };
        let prep = prepare_remix_protocol(&a, &ctx, &SamplerSpec::Reset { gamma: 1.0 }, &cfg).unwrap();
        assert!(prep.diagnostics.t_aut.is_nan() || (prep.diagnostics.t_aut - 0.5).abs() < 1e-12);
        let u = prep.diagnostics.u;
        let res = prep.run(3, 0).unwrap();
        // Hoeffding with outcomes in [-1/u, 1/u] at 1e-6 failure.
        let radius = (2.0 / u) * ((2.0f64 / 1e-6).ln() / (2.0 * 2000.0)).sqrt();
        assert!(res.abs_error <= radius);
    }

    #[test]
    fn remix_bias_certificate() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let cfg = ProtocolConfig { eps: 0.2, eta: 0.1, t: Some(50), ..Default::default() };
        let prep = prepare_remix_protocol(&pauli::x(), &ctx, &SamplerSpec::Reset { gamma: 0.3 }, &cfg).unwrap();
        let k0 = prep.diagnostics.k0.unwrap();
        assert!(k0 >= 1);
        for seed in 0..5 {
            let cert = prep.run(seed, 0).unwrap().diagnostics.bias_certificate.unwrap();
            assert!(cert.holds, "{cert:?}");
            assert_eq!(cert.steps, 50);
        }
    }

    #[test]
    fn bad_config_rejected() {
        let ctx = make_gibbs_context(&pauli::z(), 1.0).unwrap();
        let cfg = ProtocolConfig { eps: 1.5, ..Default::default() };
        assert!(run_db_protocol(&pauli::x(), &ctx, &SamplerSpec::Reset { gamma: 0.5 }, &cfg).is_err());
    }
}
