//! Verification batteries run by `gibbs-nd verify`.
//!
//! Every entry compares a measured quantity with a bound; an entry passes when
//! `measured <= tol_scale * bound`. Scaling the tolerance down therefore tightens every
//! check at once, including the analytic ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blockenc::{
    be_filtered, be_lcu, be_product, be_taylor_sqrt, dilate, implement_r_omega, poly_sqrt_degree, quasi_local_from_channel,
    quasi_local_plan, taylor_sqrt_params, BlockEncoding,
};
use crate::channels::{build_db_channel, build_povm, build_sampler, warm_start_bound, warm_start_cf, DbOverrides, DbParams, SamplerSpec};
use crate::error::{Error, Result};
use crate::filters::{filtered_exact, filtered_quadrature, imaginary_shift, quadrature_error_bound, FilterSpec, QuadratureGrid};
use crate::gibbs::{chi2_divergence, kms_db_residual, make_gibbs_context, mixing_time_from_gap, spectral_gap, GibbsContext};
use crate::instrument::{
    autocorrelation_sequence, compose_db_instrument, default_probe_set, exact_trajectory_distribution, perturb_and_tv,
    stationary_stats, t_aut, theta_gap_bound, QuantumInstrument,
};
use crate::linalg::random::{random_hermitian_normed, random_matrix, random_state, rng};
use crate::linalg::{herm_eig, matfun_herm, op_norm, pauli, taylor_matrix_sqrt, trace_norm, ComplexMatrix, C64, ONE};
use crate::protocols::{sample_count_azuma, sample_count_chebyshev};

pub const MODULES: [&str; 7] = ["linalg", "gibbs", "filters", "channels", "instrument", "protocols", "blockenc"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub module: String,
    /// Name of the property being checked.
    pub anchor: String,
    pub params: BTreeMap<String, f64>,
    pub measured: f64,
    /// Unscaled bound.
    pub bound: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scope: String,
    pub tol_scale: f64,
    pub passed: usize,
    pub failed: usize,
    pub entries: Vec<CheckEntry>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

struct Battery {
    module: &'static str,
    tol_scale: f64,
    entries: Vec<CheckEntry>,
}

impl Battery {
    fn push(&mut self, anchor: &str, params: &[(&str, f64)], outcome: Result<(f64, f64)>) {
        let params = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let entry = match outcome {
            Ok((measured, bound)) => CheckEntry {
                module: self.module.into(),
                anchor: anchor.into(),
                params,
                measured,
                bound,
                pass: measured.is_finite() && measured <= self.tol_scale * bound,
                error: None,
            },
            Err(e) => CheckEntry {
                module: self.module.into(),
                anchor: anchor.into(),
                params,
                measured: f64::NAN,
                bound: f64::NAN,
                pass: false,
                error: Some(e.to_string()),
            },
        };
        self.entries.push(entry);
    }
}

/// Runs the batteries of `scope` (`"all"` or a module name).
pub fn verify_suite(scope: &str, tol_scale: f64) -> Result<VerifyReport> {
    if !(tol_scale > 0.0 && tol_scale.is_finite()) {
        return Err(Error::Config(format!("tol-scale = {tol_scale} must be positive")));
    }
    let modules: Vec<&'static str> = if scope == "all" {
        MODULES.to_vec()
    } else {
        vec![*MODULES.iter().find(|m| **m == scope).ok_or_else(|| {
            Error::Config(format!("unknown scope '{scope}' (expected all or one of {})", MODULES.join(", ")))
        })?]
    };
    let mut entries = Vec::new();
    for module in modules {
        let mut b = Battery { module, tol_scale, entries: Vec::new() };
        match module {
            "linalg" => linalg_checks(&mut b),
            "gibbs" => gibbs_checks(&mut b),
            "filters" => filters_checks(&mut b),
            "channels" => channels_checks(&mut b),
            "instrument" => instrument_checks(&mut b),
            "protocols" => protocols_checks(&mut b),
            "blockenc" => blockenc_checks(&mut b),
            _ => unreachable!(),
        }
        entries.extend(b.entries);
    }
    let failed = entries.iter().filter(|e| !e.pass).count();
    Ok(VerifyReport { scope: scope.into(), tol_scale, passed: entries.len() - failed, failed, entries })
}

fn random_ctx(r: &mut impl rand::Rng, d: usize, beta: f64) -> Result<GibbsContext> {
    make_gibbs_context(&random_hermitian_normed(r, d, 1.0), beta)
}

fn linalg_checks(b: &mut Battery) {
    let mut r = rng(1001);
    for d in [4, 8, 16] {
        let a = random_hermitian_normed(&mut r, d, 1.0);
        b.push("eigendecomposition reconstruction", &[("dim", d as f64)], (|| {
            let e = herm_eig(&a)?;
            let rec = &(&e.vectors * &ComplexMatrix::from_real_diag(&e.values)) * &e.vectors.adjoint();
            Ok((op_norm(&(&a - &rec))?, 1e-10 * op_norm(&a)?))
        })());
        b.push("exp(A) exp(-A) = I", &[("dim", d as f64)], (|| {
            let p = &matfun_herm(&a, f64::exp)? * &matfun_herm(&a, |x| (-x).exp())?;
            Ok((op_norm(&(&p - &ComplexMatrix::identity(d)))?, 1e-9))
        })());
    }
    let bm = random_matrix(&mut r, 2, 2);
    let bm = bm.scale_real(0.5 / op_norm(&bm).unwrap_or(1.0));
    for k in [10usize, 20, 30] {
        b.push("Taylor square-root squared residual", &[("order", k as f64), ("r", 0.5)], (|| {
            let p = taylor_matrix_sqrt(&bm, ONE, k)?;
            let res = op_norm(&(&(&p * &p) - &(&ComplexMatrix::identity(2) + &bm)))?;
            let rr: f64 = 0.5;
            Ok((res, 2.0 * rr.powi(k as i32 + 1) / (1.0 - rr) * (2.0 - (1.0 - rr).sqrt())))
        })());
    }
}

fn gibbs_checks(b: &mut Battery) {
    let mut r = rng(1002);
    for beta in [0.2, 1.0, 3.0] {
        b.push("Gibbs state has unit trace and is stationary under a reset", &[("beta", beta)], (|| {
            let ctx = random_ctx(&mut r, 4, beta)?;
            let n = build_sampler(&SamplerSpec::Reset { gamma: 0.5 }, &ctx)?;
            let out = n.superop().apply(&ctx.sigma);
            Ok(((ctx.sigma.trace().re - 1.0).abs() + trace_norm(&(&out - &ctx.sigma))?, 1e-12))
        })());
        b.push("chi-squared vanishes at the Gibbs state", &[("beta", beta)], (|| {
            let ctx = random_ctx(&mut r, 4, beta)?;
            Ok((chi2_divergence(&ctx.sigma, &ctx)?.abs(), 1e-12))
        })());
        b.push("reset sampler gap equals gamma", &[("beta", beta), ("gamma", 0.3)], (|| {
            let ctx = random_ctx(&mut r, 4, beta)?;
            let n = build_sampler(&SamplerSpec::Reset { gamma: 0.3 }, &ctx)?;
            Ok(((spectral_gap(&n.superop(), &ctx)? - 0.3).abs(), 1e-9))
        })());
    }
    b.push("mixing time of a full reset", &[("gap", 1.0)], (|| Ok((mixing_time_from_gap(1.0, 0.1, 0.01)? as f64, 1.0)))());
}

fn filters_checks(b: &mut Battery) {
    let mut r = rng(1003);
    for (beta, tau) in [(0.5, 1.0), (1.0, 2.0), (2.0, 4.0)] {
        let ctx = match random_ctx(&mut r, 4, beta) {
            Ok(c) => c,
            Err(e) => {
                b.push("context", &[("beta", beta)], Err(e));
                continue;
            }
        };
        let a = random_hermitian_normed(&mut r, 4, 1.0);
        for s in [-beta / 2.0, 0.3 * beta] {
            b.push("imaginary-shift dual-path", &[("beta", beta), ("tau", tau), ("s", s)], (|| {
                let af = filtered_exact(&a, &ctx, &FilterSpec::gaussian(tau)?)?;
                let shifted = imaginary_shift(&af, s, &ctx)?;
                let direct = filtered_exact(&a, &ctx, &FilterSpec::shifted(tau, s)?)?;
                Ok((op_norm(&(&shifted - &direct))?, 1e-9))
            })());
            b.push("imaginary-shift norm bound", &[("beta", beta), ("tau", tau), ("s", s)], (|| {
                let direct = filtered_exact(&a, &ctx, &FilterSpec::shifted(tau, s)?)?;
                Ok((op_norm(&direct)?, (s * s / (2.0 * tau * tau)).exp() * op_norm(&a)?))
            })());
        }
        b.push("filtering preserves the thermal expectation", &[("beta", beta), ("tau", tau)], (|| {
            let af = filtered_exact(&a, &ctx, &FilterSpec::gaussian(tau)?)?;
            Ok(((ctx.expectation(&af) - ctx.expectation(&a)).norm(), 1e-12))
        })());
        for m in [64usize, 256] {
            b.push("quadrature error bound", &[("beta", beta), ("tau", tau), ("M", m as f64), ("T", 8.0 * tau)], (|| {
                let spec = FilterSpec::gaussian(tau)?;
                let grid = QuadratureGrid::new(8.0 * tau, m)?;
                let exact = filtered_exact(&a, &ctx, &spec)?;
                let quad = filtered_quadrature(&a, &ctx.h, &spec, &grid)?;
                Ok((op_norm(&(&quad - &exact))?, quadrature_error_bound(&spec, &grid, ctx.h_norm, ctx.dim())?))
            })());
        }
    }
}

fn channels_checks(b: &mut Battery) {
    let mut r = rng(1004);
    for (beta, d) in [(0.2, 2), (1.0, 4), (3.0, 4)] {
        let ctx = match random_ctx(&mut r, d, beta) {
            Ok(c) => c,
            Err(e) => {
                b.push("context", &[("beta", beta)], Err(e));
                continue;
            }
        };
        let a = random_hermitian_normed(&mut r, d, 1.0);
        let tau = 2.0 * beta;
        let ch = DbParams::resolve(&a, &ctx, DbOverrides { tau: Some(tau), ..Default::default() }).and_then(|p| build_db_channel(&a, &ctx, p));
        let params = [("beta", beta), ("dim", d as f64), ("tau", tau)];
        match ch {
            Ok(m) => {
                b.push("exact detailed balance", &params, kms_db_residual(&m, &ctx).map(|x| (x, 1e-7)));
                b.push("Gibbs fixed point", &params, (|| Ok((trace_norm(&(&m.superop().apply(&ctx.sigma) - &ctx.sigma))?, 1e-8)))());
                b.push("unbiased estimator identity", &params, (|| {
                    let mean = m.db_estimator_mean(&ctx.sigma).ok_or_else(|| Error::ParameterOutOfRange("not a DB channel".into()))?;
                    Ok(((mean - ctx.expectation(&a).re).abs(), 1e-9))
                })());
            }
            Err(e) => b.push("exact detailed balance", &params, Err(e)),
        }
        let u = 0.25;
        b.push("chi-squared warm start", &[("beta", beta), ("tau", tau), ("u", u)], (|| {
            let m = build_povm(&a, &ctx, u, tau)?;
            let rho = random_state(&mut r, d);
            // Mix towards sigma until chi2 <= 4.
            let mut mix = rho.clone();
            let mut lam: f64 = 1.0;
            while chi2_divergence(&mix, &ctx)? > 4.0 {
                lam *= 0.5;
                mix = &rho.scale_real(lam) + &ctx.sigma.scale_real(1.0 - lam);
            }
            let chi = chi2_divergence(&mix, &ctx)?;
            let bound = warm_start_bound(chi, u, warm_start_cf(beta, tau));
            let mut worst: f64 = 0.0;
            for k in &m.kraus {
                let out = &(k * &mix) * &k.adjoint();
                let p = out.trace().re;
                worst = worst.max(chi2_divergence(&out.scale_real(1.0 / p), &ctx)?);
            }
            Ok((worst, bound))
        })());
    }
}

/// `Cov(v_0, v_p)` under the exact trajectory distribution started at sigma.
pub fn enumerated_covariance(inst: &QuantumInstrument, ctx: &GibbsContext, p: usize) -> Result<f64> {
    let st = stationary_stats(inst, ctx)?;
    let dist = exact_trajectory_distribution(inst, &ctx.sigma, p + 1)?;
    Ok(dist.iter().map(|(k, pr)| pr * (inst.outcomes()[k[0]] - st.mean) * (inst.outcomes()[k[p]] - st.mean)).sum())
}

/// Variance of the empirical mean of `T` outcomes under the exact trajectory distribution.
pub fn enumerated_mean_variance(inst: &QuantumInstrument, rho0: &ComplexMatrix, t_len: usize) -> Result<f64> {
    let dist = exact_trajectory_distribution(inst, rho0, t_len)?;
    let tf = t_len as f64;
    let means: Vec<(f64, f64)> = dist.iter().map(|(k, p)| (*p, k.iter().map(|&a| inst.outcomes()[a]).sum::<f64>() / tf)).collect();
    let m: f64 = means.iter().map(|(p, x)| p * x).sum();
    Ok(means.iter().map(|(p, x)| p * (x - m).powi(2)).sum())
}

fn instrument_checks(b: &mut Battery) {
    let mut r = rng(1005);
    for gamma in [0.3, 0.6] {
        let setup = (|| {
            let ctx = random_ctx(&mut r, 2, 1.0)?;
            let a = random_hermitian_normed(&mut r, 2, 1.0);
            let m = build_db_channel(&a, &ctx, DbParams { u: 0.3, c: 0.2, tau: 2.0 })?;
            let n = build_sampler(&SamplerSpec::Reset { gamma }, &ctx)?;
            let inst = compose_db_instrument(&m, &n)?;
            Ok::<_, Error>((ctx, m, inst))
        })();
        let (ctx, m, inst) = match setup {
            Ok(x) => x,
            Err(e) => {
                b.push("setup", &[("gamma", gamma)], Err(e));
                continue;
            }
        };
        for p in 1..=3usize {
            b.push("covariance dual-path", &[("gamma", gamma), ("p", p as f64)], (|| {
                let corr = autocorrelation_sequence(&inst, &ctx, p)?;
                let cov = enumerated_covariance(&inst, &ctx, p)?;
                Ok(((cov - corr[p - 1]).abs(), 1e-9 * (1.0 + cov.abs())))
            })());
        }
        for t in 2..=4usize {
            b.push("variance of the empirical mean", &[("gamma", gamma), ("T", t as f64)], (|| {
                let st = stationary_stats(&inst, &ctx)?;
                let vm = enumerated_mean_variance(&inst, &ctx.sigma, t)?;
                let predicted = 2.0 * t_aut(&inst, &ctx, t)? * st.var / t as f64;
                Ok(((vm - predicted).abs(), 1e-9 * (1.0 + vm)))
            })());
        }
        for t in [10usize, 100, 1000] {
            b.push("autocorrelation time below theta / gap + 1/2", &[("gamma", gamma), ("T", t as f64)], (|| {
                let tb = theta_gap_bound(&m, gamma, &ctx)?;
                Ok((t_aut(&inst, &ctx, t)?, tb.bound))
            })());
        }
        b.push("sequential error accumulation", &[("gamma", gamma), ("T", 4.0)], (|| {
            let m2 = build_db_channel(&pauli_like(&ctx), &ctx, DbParams { u: 0.3, c: 0.2, tau: 2.0 })?;
            let n = build_sampler(&SamplerSpec::Reset { gamma }, &ctx)?;
            let other = compose_db_instrument(&m2, &n)?;
            let probes = default_probe_set(&ctx, 5);
            let rho_t = &ctx.sigma.scale_real(0.95) + &ComplexMatrix::identity(2).scale_real(0.025);
            let rep = perturb_and_tv(&inst, &other, &ctx.sigma, &rho_t, 4, &probes, None)?;
            Ok((rep.tv, rep.bound + 1e-9))
        })());
    }
}

// Observable for the perturbed instrument: A rotated slightly towards sigma's eigenbasis.
fn pauli_like(ctx: &GibbsContext) -> ComplexMatrix {
    let z = ctx.eig.from_eigenbasis(&pauli::z());
    &pauli::x().scale_real(0.9) + &z.scale_real(0.1)
}

fn protocols_checks(b: &mut Battery) {
    b.push("Chebyshev planner arithmetic", &[("var", 1.0), ("t_aut", 0.5), ("eps", 0.1), ("eta", 0.1)], {
        let t = sample_count_chebyshev(1.0, 0.5, 0.1, 0.1) as f64;
        Ok(((t - 1000.0).abs(), 0.5))
    });
    b.push("Azuma planner arithmetic", &[("c", 3.0), ("eps", 0.1), ("eta", 0.1)], {
        let t = sample_count_azuma(3.0, 0.1, 0.1) as f64;
        let oracle = (18.0 * 9.0 / 0.01 * (6.0f64 / 0.1).ln()).ceil();
        Ok(((t - oracle).abs(), 0.5))
    });
    let mut r = rng(1006);
    b.push("remix bias certificate", &[("beta", 1.0), ("eps", 0.3)], (|| {
        let ctx = random_ctx(&mut r, 2, 1.0)?;
        let a = random_hermitian_normed(&mut r, 2, 1.0);
        let cfg = crate::protocols::ProtocolConfig { eps: 0.3, eta: 0.2, t: Some(200), ..Default::default() };
        let res = crate::protocols::run_remix_protocol(&a, &ctx, &SamplerSpec::Reset { gamma: 0.5 }, &cfg)?;
        let cert = res.diagnostics.bias_certificate.ok_or_else(|| Error::ParameterOutOfRange("no certificate".into()))?;
        Ok((cert.max_bias_bound.max(cert.max_bias), cert.target))
    })());
}

fn blockenc_checks(b: &mut Battery) {
    let mut r = rng(1007);
    let contraction = |r: &mut rand_chacha::ChaCha8Rng, d: usize, s: f64| {
        let m = random_matrix(r, d, d);
        let n = op_norm(&m).unwrap_or(1.0);
        m.scale_real(s / n)
    };
    for d in [2usize, 4] {
        let c = contraction(&mut r, d, 0.9);
        b.push("dilation round trip", &[("dim", d as f64)], (|| {
            let be = dilate(&c)?;
            Ok(((&be.extract() - &c).max_abs().max(be.unitarity_residual()), 1e-9))
        })());
        let x = contraction(&mut r, d, 0.8);
        let y = contraction(&mut r, d, 0.7);
        b.push("product of block encodings", &[("dim", d as f64)], (|| {
            let p = be_product(&[dilate(&x)?, dilate(&y)?])?;
            Ok((op_norm(&(&p.extract() - &(&y * &x)))?, 1e-9))
        })());
        b.push("linear combination of block encodings", &[("dim", d as f64), ("terms", 3.0)], (|| {
            let mats: Vec<ComplexMatrix> = (0..3).map(|_| contraction(&mut r, d, 0.9)).collect();
            let bes = mats.iter().map(dilate).collect::<Result<Vec<BlockEncoding>>>()?;
            let cs = [C64::new(0.3, -0.2), C64::new(-0.5, 0.1), C64::new(0.2, 0.4)];
            let lcu = be_lcu(&bes, &cs)?;
            let mut oracle = ComplexMatrix::zeros(d, d);
            for (m, c) in mats.iter().zip(&cs) {
                oracle.axpy(*c, m);
            }
            Ok((op_norm(&(&lcu.extract() - &oracle))?, 1e-9))
        })());
    }
    b.push("filtered-observable block encoding", &[("tau", 1.0), ("T", 8.0), ("M", 64.0)], (|| {
        let spec = FilterSpec::gaussian(1.0)?;
        let be = be_filtered(&dilate(&pauli::x())?, &pauli::z(), &spec, &QuadratureGrid::new(8.0, 64)?)?;
        Ok((op_norm(&(&be.extract() - &pauli::x().scale_real((-2.0f64).exp())))?, be.eps))
    })());
    b.push("Taylor-LCU square root", &[("u", 0.4), ("c", 0.25), ("order", 6.0)], (|| {
        let bh = random_hermitian_normed(&mut r, 2, 0.9);
        let be = be_taylor_sqrt(&dilate(&bh)?, 0.4, 0.25, 6)?;
        let p = taylor_sqrt_params(1.0, 1, 0.0, 0.4, 0.25, 6)?;
        let oracle = matfun_herm(&(&ComplexMatrix::identity(2) + &bh.scale_real(0.4)), f64::sqrt)?.scale_real(0.25);
        Ok((op_norm(&(&be.extract() - &oracle))?, p.eps_truncation + p.eps_encoding + 1e-12))
    })());
    b.push("Taylor-LCU normalization", &[("u", 0.4), ("c", 0.25), ("order", 30.0)], (|| {
        let p = taylor_sqrt_params(1.0, 1, 0.0, 0.4, 0.25, 30)?;
        Ok((p.gamma, p.gamma_limit))
    })());
    b.push("square-root polynomial degree", &[("r", 0.25), ("eps_prime", 1e-3)], (|| {
        let p = poly_sqrt_degree(0.25, 1e-3)?;
        let err = (0..=1000)
            .map(|i| -1.0 + 2.0 * i as f64 / 1000.0)
            .map(|x| (p.eval(x) - 0.25 * (1.0 + 0.25 * x).sqrt()).abs())
            .fold(0.0, f64::max);
        Ok((err, 1e-3))
    })());
    b.push("energy cutoff at eps = 1/4", &[("eps", 0.25)], Ok(((implement_r_omega(0.25) - 0.05).abs(), 1e-15)));
    let quasi = (|| {
        let ctx = random_ctx(&mut r, 4, 1.0)?;
        let a = random_hermitian_normed(&mut r, 4, 1.0);
        let (c, u) = (0.1, 0.4);
        let plan = quasi_local_plan(&ctx, 0.1, c, u)?;
        let q = quasi_local_from_channel(&a, &ctx, DbParams { u, c, tau: plan.tau }, plan.k, plan.omega)?;
        Ok::<_, Error>((q, plan.eps_prime))
    })();
    let params = [("beta", 1.0), ("eps", 0.1)];
    match quasi {
        Ok((q, eps_prime)) => {
            b.push("quasi-local approximation residual", &params, Ok((q.residual, eps_prime)));
            b.push("quasi-local out-of-band entries", &params, Ok((q.out_of_band, 1e-14)));
        }
        Err(e) => b.push("quasi-local approximation residual", &params, Err(e)),
    }
}
