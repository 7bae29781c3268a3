//! Quantum instruments: branch CP maps with outcome values, trajectory sampling,
//! exact enumeration of trajectory distributions and stationary correlation statistics.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::MeasurementChannel;
use crate::error::{Error, Result};
use crate::gibbs::{kms_db_residual_superop, tp_residual, unvec_op, vec_op, GibbsContext, Superoperator};
use crate::linalg::random::random_state;
use crate::linalg::{trace_norm, ComplexMatrix, C64, ZERO};

/// Branch probabilities below this are treated as zero when sampling.
pub const DEGENERATE_PROB: f64 = 1e-14;
/// Largest Kraus set materialized for a composed branch.
pub const MAX_KRAUS: usize = 4096;
/// Largest number of label sequences enumerated exactly.
pub const MAX_ENUMERATION: f64 = 1e6;
/// Trace-preservation tolerance for composed instruments.
pub const INSTRUMENT_TP_TOL: f64 = 1e-7;
/// Stationarity tolerance for [`stationary_stats`].
pub const STATIONARY_TOL: f64 = 1e-6;

/// Branch maps `E_a` with outcome values `v_a`. The superoperator form is
/// authoritative; Kraus lists are kept when they are small enough.
#[derive(Clone, Debug)]
pub struct QuantumInstrument {
    dim: usize,
    outcomes: Vec<f64>,
    labels: Vec<String>,
    superops: Vec<Superoperator>,
    // Row vectors with Tr(E_a(X)) = effects[a] · vec(X).
    effects: Vec<Vec<C64>>,
    kraus: Option<Vec<Vec<ComplexMatrix>>>,
    kraus_count: f64,
}

fn effect_row(s: &Superoperator) -> Vec<C64> {
    s.trace_functional()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn vec_trace(v: &[C64], d: usize) -> f64 {
    (0..d).map(|i| v[i + i * d].re).sum()
}

impl QuantumInstrument {
    /// Instrument from per-branch Kraus lists; the aggregate must be trace preserving within `tp_tol`.
    pub fn from_kraus(branches: Vec<Vec<ComplexMatrix>>, outcomes: Vec<f64>, labels: Vec<String>, tp_tol: f64) -> Result<Self> {
        if branches.is_empty() || branches.len() != outcomes.len() || branches.len() != labels.len() {
            return Err(Error::ShapeMismatch("branch, outcome and label lists must be nonempty and aligned".into()));
        }
        let all: Vec<ComplexMatrix> = branches.iter().flatten().cloned().collect();
        let residual = tp_residual(&all)?;
        if residual > tp_tol {
            return Err(Error::NotTracePreserving { residual });
        }
        let superops = branches.iter().map(|b| Superoperator::from_kraus(b)).collect::<Result<Vec<_>>>()?;
        let count = all.len() as f64;
        Self::assemble(superops, outcomes, labels, Some(branches), count)
    }

    /// Instrument from branch superoperators; the aggregate trace functional must equal the trace within `tp_tol`.
    pub fn from_superops(superops: Vec<Superoperator>, outcomes: Vec<f64>, labels: Vec<String>, tp_tol: f64) -> Result<Self> {
        if superops.is_empty() || superops.len() != outcomes.len() || superops.len() != labels.len() {
            return Err(Error::ShapeMismatch("branch, outcome and label lists must be nonempty and aligned".into()));
        }
        let d = superops[0].dim;
        if superops.iter().any(|s| s.dim != d) {
            return Err(Error::ShapeMismatch("branch dimensions differ".into()));
        }
        let inst = Self::assemble(superops, outcomes, labels, None, f64::INFINITY)?;
        let residual = inst.tp_residual();
        if residual > tp_tol {
            return Err(Error::NotTracePreserving { residual });
        }
        Ok(inst)
    }

    fn assemble(
        superops: Vec<Superoperator>,
        outcomes: Vec<f64>,
        labels: Vec<String>,
        kraus: Option<Vec<Vec<ComplexMatrix>>>,
        kraus_count: f64,
    ) -> Result<Self> {
        if outcomes.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterOutOfRange("outcome values must be finite".into()));
        }
        let dim = superops[0].dim;
        let effects = superops.iter().map(effect_row).collect();
        Ok(Self { dim, outcomes, labels, superops, effects, kraus, kraus_count })
    }

    /// One branch per Kraus operator of `ch`, carrying its outcome value.
    pub fn from_channel(ch: &MeasurementChannel) -> Result<Self> {
        Self::from_kraus(ch.kraus.iter().map(|k| vec![k.clone()]).collect(), ch.outcomes.clone(), ch.labels.clone(), 1e-8)
    }

    /// Single branch `K = I` with value 0.
    pub fn identity(d: usize) -> Self {
        Self::from_kraus(vec![vec![ComplexMatrix::identity(d)]], vec![0.0], vec!["id".into()], 0.0).expect("identity is a channel")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branches(&self) -> usize {
        self.superops.len()
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn branch_superop(&self, a: usize) -> &Superoperator {
        &self.superops[a]
    }

    pub fn superops(&self) -> &[Superoperator] {
        &self.superops
    }

    /// Kraus list of branch `a`; fails when the instrument was only stored as superoperators.
    pub fn branch_kraus(&self, a: usize) -> Result<&[ComplexMatrix]> {
        match &self.kraus {
            Some(k) => Ok(&k[a]),
            None => Err(Error::KrausExplosion { count: self.kraus_count.min(usize::MAX as f64) as usize }),
        }
    }

    /// `sum_a E_a`.
    pub fn aggregate(&self) -> Superoperator {
        let mut acc = Superoperator::zero(self.dim);
        for s in &self.superops {
            acc = acc.add(s);
        }
        acc
    }

    /// Value-weighted map `sum_a w_a E_a`.
    pub fn weighted(&self, w: impl Fn(f64) -> f64) -> Superoperator {
        let mut acc = Superoperator::zero(self.dim);
        for (s, &v) in self.superops.iter().zip(&self.outcomes) {
            acc = acc.add(&s.scale(w(v)));
        }
        acc
    }

    /// Largest entry of `sum_a E_a^dag(I) - I`.
    pub fn tp_residual(&self) -> f64 {
        let d = self.dim;
        let mut total = vec![ZERO; d * d];
        for e in &self.effects {
            for (t, x) in total.iter_mut().zip(e) {
                *t += x;
            }
        }
        for i in 0..d {
            total[i + i * d] -= C64::new(1.0, 0.0);
        }
        total.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `Tr(E_a(rho))` for every branch.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        let v = vec_op(rho);
        self.effects.iter().map(|e| dot(e, &v).re).collect()
    }

    pub fn apply_branch(&self, a: usize, rho: &ComplexMatrix) -> ComplexMatrix {
        self.superops[a].apply(rho)
    }
}

/// `E_a = M ∘ N ∘ M_a`: Kraus set `{K_c N_k K_a}`, outcome values from `m`.
pub fn compose_db_instrument(m: &MeasurementChannel, n: &MeasurementChannel) -> Result<QuantumInstrument> {
    if m.dim() != n.dim() {
        return Err(Error::ShapeMismatch("measurement and sampler dimensions differ".into()));
    }
    let count = m.branches() * n.branches() * m.branches();
    if count > MAX_KRAUS * m.branches() {
        return Err(Error::KrausExplosion { count });
    }
    let mn: Vec<ComplexMatrix> = m.kraus.iter().flat_map(|kc| n.kraus.iter().map(move |nk| kc * nk)).collect();
    let branches = m.kraus.iter().map(|ka| mn.iter().map(|x| x * ka).collect()).collect();
    QuantumInstrument::from_kraus(branches, m.outcomes.clone(), m.labels.clone(), INSTRUMENT_TP_TOL)
}

/// `E_± = N^{k0} ∘ M_±`, composed as superoperators. Kraus lists are kept when
/// the composed set has at most [`MAX_KRAUS`] operators per branch.
pub fn compose_remix_instrument(m: &MeasurementChannel, n: &MeasurementChannel, k0: u64) -> Result<QuantumInstrument> {
    if m.dim() != n.dim() {
        return Err(Error::ShapeMismatch("measurement and sampler dimensions differ".into()));
    }
    let nk = n.superop().power(k0);
    let superops: Vec<Superoperator> = (0..m.branches()).map(|a| nk.compose(&m.branch_superop(a))).collect();
    let per_branch = (n.branches() as f64).powf(k0 as f64);
    let mut inst = QuantumInstrument::from_superops(superops, m.outcomes.clone(), m.labels.clone(), INSTRUMENT_TP_TOL)?;
    inst.kraus_count = per_branch * m.branches() as f64;
    if per_branch <= MAX_KRAUS as f64 {
        let mut words = vec![ComplexMatrix::identity(m.dim())];
        for _ in 0..k0 {
            words = words.iter().flat_map(|w| n.kraus.iter().map(move |k| k * w)).collect();
        }
        inst.kraus = Some(m.kraus.iter().map(|ka| words.iter().map(|w| w * ka).collect()).collect());
    }
    Ok(inst)
}

/// Recorded labels and values of one trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub labels: Vec<usize>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub empirical_mean: f64,
}

/// Random source of trajectory `stream` under `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Draws one branch from `rho` (vectorized, normalized), updates the state in place
/// and returns the label and its probability.
pub fn sample_step(inst: &QuantumInstrument, state: &mut Vec<C64>, rng: &mut impl Rng) -> Result<(usize, f64)> {
    let probs: Vec<f64> = inst.effects.iter().map(|e| dot(e, state).re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if probs.iter().all(|&p| p < DEGENERATE_PROB) {
        return Err(Error::BranchProbabilityDegenerate);
    }
    let x = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut pick = probs.len() - 1;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if x < acc && p > 0.0 {
            pick = a;
            break;
        }
    }
    while probs[pick] <= 0.0 {
        pick -= 1;
    }
    let next = inst.superops[pick].apply_vec(state);
    let tr = vec_trace(&next, inst.dim);
    *state = next.into_iter().map(|z| z / tr).collect();
    Ok((pick, probs[pick] / total))
}

/// Samples `t_len` steps from `rho0`, calling `observe(t, state_before_step)` before each draw.
pub fn sample_trajectory_observed(
    inst: &QuantumInstrument,
    rho0: &ComplexMatrix,
    t_len: usize,
    seed: u64,
    stream: u64,
    mut observe: impl FnMut(usize, &[C64]),
) -> Result<(TrajectoryRecord, ComplexMatrix)> {
    if t_len == 0 {
        return Err(Error::ParameterOutOfRange("trajectory length must be at least 1".into()));
    }
    if rho0.rows() != inst.dim || rho0.cols() != inst.dim {
        return Err(Error::ShapeMismatch("initial state and instrument dimensions differ".into()));
    }
    let mut rng = trajectory_rng(seed, stream);
    let mut state = vec_op(rho0);
    let mut labels = Vec::with_capacity(t_len);
    let mut values = Vec::with_capacity(t_len);
    let mut sum = 0.0;
    for t in 0..t_len {
        observe(t, &state);
        let (a, _) = sample_step(inst, &mut state, &mut rng)?;
        labels.push(a);
        values.push(inst.outcomes[a]);
        sum += inst.outcomes[a];
    }
    let rec = TrajectoryRecord { labels, values, seed, stream, empirical_mean: sum / t_len as f64 };
    Ok((rec, unvec_op(&state, inst.dim)))
}

pub fn sample_trajectory(inst: &QuantumInstrument, rho0: &ComplexMatrix, t_len: usize, seed: u64) -> Result<TrajectoryRecord> {
    sample_trajectory_stream(inst, rho0, t_len, seed, 0)
}

pub fn sample_trajectory_stream(
    inst: &QuantumInstrument,
    rho0: &ComplexMatrix,
    t_len: usize,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    sample_trajectory_observed(inst, rho0, t_len, seed, stream, |_, _| {}).map(|(r, _)| r)
}

/// `count` independent trajectories, trajectory `i` on stream `i`; results are in stream order.
pub fn sample_trajectories(
    inst: &QuantumInstrument,
    rho0: &ComplexMatrix,
    t_len: usize,
    seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64).into_par_iter().map(|i| sample_trajectory_stream(inst, rho0, t_len, seed, i)).collect()
}

/// Probability of every label sequence of length `t_len` starting from `rho0`.
pub fn exact_trajectory_distribution(inst: &QuantumInstrument, rho0: &ComplexMatrix, t_len: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    let count = (inst.branches() as f64).powi(t_len as i32);
    if count > MAX_ENUMERATION {
        return Err(Error::TooLarge { count });
    }
    if rho0.rows() != inst.dim || rho0.cols() != inst.dim {
        return Err(Error::ShapeMismatch("initial state and instrument dimensions differ".into()));
    }
    let mut out = BTreeMap::new();
    let mut prefix = Vec::with_capacity(t_len);
    enumerate(inst, &vec_op(rho0), t_len, &mut prefix, &mut out);
    Ok(out)
}

fn enumerate(inst: &QuantumInstrument, state: &[C64], left: usize, prefix: &mut Vec<usize>, out: &mut BTreeMap<Vec<usize>, f64>) {
    if left == 0 {
        out.insert(prefix.clone(), vec_trace(state, inst.dim));
        return;
    }
    for a in 0..inst.branches() {
        let next = inst.superops[a].apply_vec(state);
        prefix.push(a);
        enumerate(inst, &next, left - 1, prefix, out);
        prefix.pop();
    }
}

/// Stationary mean and variance of the outcome values at sigma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryStats {
    pub mean: f64,
    pub var: f64,
}

pub fn stationary_stats(inst: &QuantumInstrument, ctx: &GibbsContext) -> Result<StationaryStats> {
    ctx.check_shape(&ComplexMatrix::zeros(inst.dim, inst.dim))?;
    let out = inst.aggregate().apply(&ctx.sigma);
    let residual = trace_norm(&(&out - &ctx.sigma))?;
    if residual > STATIONARY_TOL {
        return Err(Error::NotStationary { residual });
    }
    Ok(stats_at(inst, &ctx.sigma))
}

fn stats_at(inst: &QuantumInstrument, rho: &ComplexMatrix) -> StationaryStats {
    let p = inst.probabilities(rho);
    let mean: f64 = p.iter().zip(&inst.outcomes).map(|(p, v)| p * v).sum();
    let var = p.iter().zip(&inst.outcomes).map(|(p, v)| p * (v - mean).powi(2)).sum();
    StationaryStats { mean, var }
}

/// `Corr(E^t) = Tr(Ê E^t Ê(sigma))` for `t = 0..=t_max`, with `Ê = sum_a (v_a - v̄) E_a`.
pub fn autocorrelation_sequence(inst: &QuantumInstrument, ctx: &GibbsContext, t_max: usize) -> Result<Vec<f64>> {
    let st = stationary_stats(inst, ctx)?;
    let centered = inst.weighted(|v| v - st.mean);
    let agg = inst.aggregate();
    let tr_centered = centered.trace_functional();
    let mut x = centered.apply_vec(&vec_op(&ctx.sigma));
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        out.push(dot(&tr_centered, &x).re);
        if t < t_max {
            x = agg.apply_vec(&x);
        }
    }
    Ok(out)
}

pub fn autocorrelation(inst: &QuantumInstrument, ctx: &GibbsContext, t: usize) -> Result<f64> {
    Ok(autocorrelation_sequence(inst, ctx, t)?[t])
}

/// Variance floor below which autocorrelation times are undefined.
pub const VAR_FLOOR: f64 = 1e-14;

/// `t_aut,T = 1/2 + sum_{t=1}^{T} (1 - t/T) Corr(E^{t-1}) / Var`.
pub fn t_aut(inst: &QuantumInstrument, ctx: &GibbsContext, t_len: usize) -> Result<f64> {
    let st = stationary_stats(inst, ctx)?;
    if st.var <= VAR_FLOOR {
        return Err(Error::DegenerateVariance { var: st.var });
    }
    if t_len == 0 {
        return Err(Error::ParameterOutOfRange("T must be at least 1".into()));
    }
    let corr = autocorrelation_sequence(inst, ctx, t_len.saturating_sub(1))?;
    Ok(t_aut_from_corr(&corr, st.var, t_len))
}

/// Same sum from a precomputed correlation sequence (`corr[p] = Corr(E^p)`).
pub fn t_aut_from_corr(corr: &[f64], var: f64, t_len: usize) -> f64 {
    let tf = t_len as f64;
    0.5 + (1..=t_len).map(|t| (1.0 - t as f64 / tf) * corr.get(t - 1).copied().unwrap_or(0.0) / var).sum::<f64>()
}

/// `theta` and the bound `theta / gap + 1/2` on the autocorrelation time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaBound {
    pub theta: f64,
    pub bound: f64,
    pub var: f64,
    pub db_residual: f64,
    pub centered_db_residual: f64,
}

/// DB tolerance of the measurement map and its centered version.
pub const THETA_DB_TOL: f64 = 1e-6;

pub fn theta_gap_bound(m: &MeasurementChannel, gap: f64, ctx: &GibbsContext) -> Result<ThetaBound> {
    let inst = QuantumInstrument::from_channel(m)?;
    let agg = inst.aggregate();
    let db_residual = kms_db_residual_superop(&agg, ctx)?;
    if db_residual > THETA_DB_TOL {
        return Err(Error::NotDetailedBalanced { residual: db_residual });
    }
    let st = stats_at(&inst, &ctx.sigma);
    if st.var <= VAR_FLOOR {
        return Err(Error::DegenerateVariance { var: st.var });
    }
    let centered = inst.weighted(|v| v - st.mean);
    let centered_db_residual = kms_db_residual_superop(&centered, ctx)?;
    if centered_db_residual > THETA_DB_TOL {
        return Err(Error::CenteredMapNotDb { residual: centered_db_residual });
    }
    if !(gap > 0.0) {
        return Err(Error::GapTooSmall { gap });
    }
    let x = centered.apply_vec(&vec_op(&ctx.sigma));
    let theta = dot(&centered.trace_functional(), &x).re / st.var;
    Ok(ThetaBound { theta, bound: theta / gap + 0.5, var: st.var, db_residual, centered_db_residual })
}

/// Result of comparing an instrument with a perturbed implementation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbReport {
    pub tv: f64,
    /// Largest `sum_a |Ẽ_a(rho) - E_a(rho)|_1` over the probe set.
    pub eps_measured: f64,
    /// Value of epsilon entering the bound: the measured one or a larger analytic one.
    pub eps_used: f64,
    pub eta: f64,
    pub bound: f64,
}

impl PerturbReport {
    pub fn holds(&self) -> bool {
        self.tv <= self.bound + 1e-9
    }
}

/// Per-state implementation error `sum_a |Ẽ_a(rho) - E_a(rho)|_1`.
pub fn implementation_error(inst: &QuantumInstrument, inst_tilde: &QuantumInstrument, rho: &ComplexMatrix) -> Result<f64> {
    let mut s = 0.0;
    for a in 0..inst.branches() {
        s += trace_norm(&(&inst_tilde.apply_branch(a, rho) - &inst.apply_branch(a, rho)))?;
    }
    Ok(s)
}

/// Total-variation distance between the two trajectory distributions and the bound `(eta + T eps)/2`.
pub fn perturb_and_tv(
    inst: &QuantumInstrument,
    inst_tilde: &QuantumInstrument,
    rho0: &ComplexMatrix,
    rho0_tilde: &ComplexMatrix,
    t_len: usize,
    probes: &[ComplexMatrix],
    eps_analytic: Option<f64>,
) -> Result<PerturbReport> {
    if inst.branches() != inst_tilde.branches() || inst.dim != inst_tilde.dim {
        return Err(Error::ShapeMismatch("instruments differ in shape".into()));
    }
    let p = exact_trajectory_distribution(inst, rho0, t_len)?;
    let q = exact_trajectory_distribution(inst_tilde, rho0_tilde, t_len)?;
    let tv = 0.5 * p.iter().map(|(k, v)| (v - q[k]).abs()).sum::<f64>();
    let mut eps_measured: f64 = 0.0;
    for rho in probes {
        eps_measured = eps_measured.max(implementation_error(inst, inst_tilde, rho)?);
    }
    let eps_used = eps_measured.max(eps_analytic.unwrap_or(0.0));
    let eta = trace_norm(&(rho0 - rho0_tilde))?;
    Ok(PerturbReport { tv, eps_measured, eps_used, eta, bound: 0.5 * (eta + t_len as f64 * eps_used) })
}

/// Twenty seeded random states, the basis projectors and sigma.
pub fn default_probe_set(ctx: &GibbsContext, seed: u64) -> Vec<ComplexMatrix> {
    let d = ctx.dim();
    let mut r = trajectory_rng(seed, 0);
    let mut out: Vec<ComplexMatrix> = (0..20).map(|_| random_state(&mut r, d)).collect();
    for i in 0..d {
        let mut e = ComplexMatrix::zeros(d, d);
        e[(i, i)] = C64::new(1.0, 0.0);
        out.push(e);
    }
    out.push(ctx.sigma.clone());
    out
}

/// `V = sum_i |i> ⊗ K_i`, an `(s d) x d` isometry with the index register leading.
pub fn stinespring_isometry(m: &MeasurementChannel) -> Result<ComplexMatrix> {
    let residual = m.tp_residual();
    if residual > crate::linalg::NumericPolicy::DEFAULT.tp_tol {
        return Err(Error::NotTracePreserving { residual });
    }
    let d = m.dim();
    let mut v = ComplexMatrix::zeros(m.branches() * d, d);
    for (i, k) in m.kraus.iter().enumerate() {
        v.set_block(i * d, 0, k);
    }
    Ok(v)
}

/// Batch summary written next to trajectory CSVs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub count: usize,
    pub length: usize,
    pub mean: f64,
    pub var: f64,
    /// `T Var(mean) / (2 Var)` estimated across the batch; absent for a single trajectory.
    pub t_aut_estimate: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn summarize(records: &[TrajectoryRecord]) -> TrajectorySummary {
    let count = records.len();
    let length = records.first().map_or(0, |r| r.values.len());
    let n_all: usize = records.iter().map(|r| r.values.len()).sum();
    let mean = records.iter().flat_map(|r| &r.values).sum::<f64>() / n_all.max(1) as f64;
    let var = records.iter().flat_map(|r| &r.values).map(|v| (v - mean).powi(2)).sum::<f64>() / n_all.max(1) as f64;
    let means: Vec<f64> = records.iter().map(|r| r.empirical_mean).collect();
    let mm = means.iter().sum::<f64>() / count.max(1) as f64;
    let (t_aut_estimate, half) = if count > 1 {
        let vm = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>() / (count - 1) as f64;
        let est = if var > 0.0 { Some(length as f64 * vm / (2.0 * var)) } else { None };
        (est, 1.96 * (vm / count as f64).sqrt())
    } else {
        (None, 1.96 * (var / length.max(1) as f64).sqrt())
    };
    TrajectorySummary { count, length, mean, var, t_aut_estimate, ci_low: mean - half, ci_high: mean + half }
}

/// CSV with columns `seed,t,label,value,stream`.
pub fn write_trajectories_csv<W: Write>(records: &[TrajectoryRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seed", "t", "label", "value", "stream"]).map_err(|e| Error::Io(e.to_string()))?;
    for r in records {
        for (t, (l, v)) in r.labels.iter().zip(&r.values).enumerate() {
            out.write_record([r.seed.to_string(), t.to_string(), l.to_string(), v.to_string(), r.stream.to_string()])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{build_db_channel, build_povm, build_sampler, ChannelMeta, DbParams, SamplerSpec};
    use crate::gibbs::{make_gibbs_context, trace_distance_to_gibbs};
    use crate::linalg::testutil::*;
    use crate::linalg::{op_norm, pauli};

    fn zctx() -> GibbsContext {
        make_gibbs_context(&pauli::z(), 1.0).unwrap()
    }

    fn identity_channel(d: usize) -> MeasurementChannel {
        MeasurementChannel::new(vec![ComplexMatrix::identity(d)], vec![0.0], vec!["id".into()], ChannelMeta::default()).unwrap()
    }

    fn db_reset(ctx: &GibbsContext, a: &ComplexMatrix, gamma: f64) -> (MeasurementChannel, QuantumInstrument) {
        let m = build_db_channel(a, ctx, DbParams { u: 0.3, c: 0.2, tau: 2.0 }).unwrap();
        let n = build_sampler(&SamplerSpec::Reset { gamma }, ctx).unwrap();
        let inst = compose_db_instrument(&m, &n).unwrap();
        (m, inst)
    }

    /// POVM on `A = Z` with `H = Z` followed by a reset; stationary at sigma.
    fn povm_reset(gamma: f64, k0: u64) -> (GibbsContext, QuantumInstrument) {
        let ctx = zctx();
        let m = build_povm(&pauli::z(), &ctx, 0.5, 1.0).unwrap();
        let n = build_sampler(&SamplerSpec::Reset { gamma }, &ctx).unwrap();
        let inst = compose_remix_instrument(&m, &n, k0).unwrap();
        (ctx, inst)
    }

    fn enumerated_mean_var(dist: &BTreeMap<Vec<usize>, f64>, inst: &QuantumInstrument) -> (f64, f64) {
        let t = dist.keys().next().unwrap().len() as f64;
        let means: Vec<(f64, f64)> =
            dist.iter().map(|(k, p)| (*p, k.iter().map(|&a| inst.outcomes()[a]).sum::<f64>() / t)).collect();
        let m: f64 = means.iter().map(|(p, x)| p * x).sum();
        (m, means.iter().map(|(p, x)| p * (x - m).powi(2)).sum())
    }

    #[test]
    fn identity_measurement_gives_sampler() {
        let ctx = zctx();
        let n = build_sampler(&SamplerSpec::Reset { gamma: 0.4 }, &ctx).unwrap();
        let inst = compose_db_instrument(&identity_channel(2), &n).unwrap();
        assert_eq!(inst.branches(), 1);
        assert!((&inst.aggregate().matrix - &n.superop().matrix).max_abs() < 1e-15);
    }

    #[test]
    fn db_instrument_fixes_sigma() {
        let ctx = zctx();
        let (_, inst) = db_reset(&ctx, &pauli::x(), 0.3);
        assert!(trace_distance_to_gibbs(&inst.aggregate().apply(&ctx.sigma), &ctx).unwrap() <= 1e-8);
        assert!((inst.probabilities(&ctx.sigma).iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(inst.branch_kraus(0).is_ok());
    }

    #[test]
    fn remix_instrument_cases() {
        let ctx = zctx();
        let m = build_povm(&pauli::x(), &ctx, 0.4, 1.0).unwrap();
        let n = build_sampler(&SamplerSpec::Reset { gamma: 0.3 }, &ctx).unwrap();
        let i0 = compose_remix_instrument(&m, &n, 0).unwrap();
        for a in 0..2 {
            assert!((&i0.branch_superop(a).matrix - &m.branch_superop(a).matrix).max_abs() < 1e-15);
        }
        let full = build_sampler(&SamplerSpec::Reset { gamma: 1.0 }, &ctx).unwrap();
        let i1 = compose_remix_instrument(&m, &full, 1).unwrap();
        let mut r = rng(40);
        let rho = random_state(&mut r, 2);
        for a in 0..2 {
            let out = i1.apply_branch(a, &rho);
            let p = out.trace().re;
            assert!((&out.scale_real(1.0 / p) - &ctx.sigma).max_abs() < 1e-12);
        }
        let base = m.probabilities(&rho);
        for k0 in [1, 3, 7] {
            let p = compose_remix_instrument(&m, &n, k0).unwrap().probabilities(&rho);
            assert!((p[0] - base[0]).abs() < 1e-12 && (p[1] - base[1]).abs() < 1e-12);
        }
        let big = compose_remix_instrument(&m, &n, 40).unwrap();
        assert!(matches!(big.branch_kraus(0), Err(Error::KrausExplosion { .. })));
    }

    #[test]
    fn single_branch_trajectory() {
        let inst = QuantumInstrument::identity(2);
        let rec = sample_trajectory(&inst, &zctx().sigma, 20, 99).unwrap();
        assert!(rec.labels.iter().all(|&l| l == 0));
        assert!(rec.values.iter().zip(&rec.labels).all(|(v, &l)| *v == inst.outcomes()[l]));
    }

    #[test]
    fn unbiased_coin() {
        let ctx = zctx();
        let m = build_povm(&ComplexMatrix::zeros(2, 2), &ctx, 0.5, 1.0).unwrap();
        let inst = QuantumInstrument::from_channel(&m).unwrap();
        let n = 10_000;
        let rec = sample_trajectory(&inst, &ctx.sigma, n, 5).unwrap();
        let ones = rec.labels.iter().filter(|&&l| l == 0).count() as f64;
        assert!((ones - n as f64 / 2.0).abs() <= 3.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn determinism_by_seed() {
        let ctx = zctx();
        let (_, inst) = db_reset(&ctx, &pauli::x(), 0.3);
        let a = sample_trajectories(&inst, &ctx.sigma, 50, 7, 8).unwrap();
        let b = sample_trajectories(&inst, &ctx.sigma, 50, 7, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].labels, a[1].labels);
    }

    #[test]
    fn db_instrument_stationary_mean() {
        let ctx = zctx();
        let (m, inst) = db_reset(&ctx, &pauli::x(), 0.3);
        let u = m.meta.u.unwrap();
        let st = stationary_stats(&inst, &ctx).unwrap();
        assert!((st.mean - 1.0 / u - ctx.expectation(&pauli::x()).re).abs() < 1e-10);
        let t = 100_000;
        let ta = t_aut(&inst, &ctx, t).unwrap();
        let rec = sample_trajectory(&inst, &ctx.sigma, t, 11).unwrap();
        let err = (rec.empirical_mean - 1.0 / u).abs();
        assert!(err <= 4.0 * (2.0 * ta * st.var / t as f64).sqrt(), "err {err}");
    }

    #[test]
    fn enumeration_basics() {
        let (ctx, inst) = povm_reset(0.5, 1);
        let mut r = rng(41);
        let rho = random_state(&mut r, 2);
        let d1 = exact_trajectory_distribution(&inst, &rho, 1).unwrap();
        let p = inst.probabilities(&rho);
        assert!((d1[&vec![0]] - p[0]).abs() < 1e-14 && (d1[&vec![1]] - p[1]).abs() < 1e-14);
        let d3 = exact_trajectory_distribution(&inst, &ctx.sigma, 3).unwrap();
        assert!((d3.values().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(matches!(exact_trajectory_distribution(&inst, &rho, 21), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn full_reset_outcomes_independent() {
        let ctx = make_gibbs_context(&random_hermitian(&mut rng(42), 2), 1.0).unwrap();
        let m = build_povm(&pauli::x(), &ctx, 0.4, 1.0).unwrap();
        let n = build_sampler(&SamplerSpec::Reset { gamma: 1.0 }, &ctx).unwrap();
        let inst = compose_remix_instrument(&m, &n, 1).unwrap();
        let d = exact_trajectory_distribution(&inst, &ctx.sigma, 2).unwrap();
        let p = inst.probabilities(&ctx.sigma);
        for a in 0..2 {
            for b in 0..2 {
                assert!((d[&vec![a, b]] - p[a] * p[b]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_enumeration() {
        let ctx = make_gibbs_context(&random_hermitian(&mut rng(43), 2), 1.0).unwrap();
        let m = build_db_channel(&pauli::x(), &ctx, DbParams { u: 0.3, c: 0.25, tau: 2.0 }).unwrap();
        let n = build_sampler(&SamplerSpec::Reset { gamma: 0.5 }, &ctx).unwrap();
        let inst = compose_db_instrument(&m, &n).unwrap();
        let rho0 = ComplexMatrix::identity(2).scale_real(0.5);
        let exact = exact_trajectory_distribution(&inst, &rho0, 3).unwrap();
        let runs = 100_000;
        let recs = sample_trajectories(&inst, &rho0, 3, 44, runs).unwrap();
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for r in &recs {
            *counts.entry(r.labels.clone()).or_default() += 1;
        }
        for (k, p) in &exact {
            let c = *counts.get(k).unwrap_or(&0) as f64;
            let sd = (runs as f64 * p * (1.0 - p)).sqrt();
            assert!((c - runs as f64 * p).abs() <= 4.0 * sd + 1e-9, "{k:?}");
        }
    }

    #[test]
    fn stationary_stats_cases() {
        let ctx = zctx();
        let n = build_sampler(&SamplerSpec::Reset { gamma: 0.5 }, &ctx).unwrap();
        let same = QuantumInstrument::from_channel(&n).unwrap();
        assert_eq!(stationary_stats(&same, &ctx).unwrap().var, 0.0);

        let (ctx, inst) = povm_reset(1.0, 1);
        let st = stationary_stats(&inst, &ctx).unwrap();
        let truth = ctx.expectation(&pauli::z()).re;
        assert!((st.mean - truth).abs() < 1e-12);
        assert!((st.var - (4.0 - truth * truth)).abs() < 1e-12);

        let bare = QuantumInstrument::from_channel(&build_povm(&pauli::x(), &ctx, 0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(stationary_stats(&bare, &ctx), Err(Error::NotStationary { .. })));
    }

    #[test]
    fn correlation_decay_rate() {
        let gamma = 0.3;
        let (ctx, inst) = povm_reset(gamma, 1);
        let corr = autocorrelation_sequence(&inst, &ctx, 10).unwrap();
        let xs: Vec<f64> = (0..=10).map(|t| t as f64).collect();
        let ys: Vec<f64> = corr.iter().map(|c| c.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 11.0, ys.iter().sum::<f64>() / 11.0);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope / (1.0 - gamma).ln() - 1.0).abs() < 0.02);
        assert!((autocorrelation(&inst, &ctx, 4).unwrap() - corr[4]).abs() < 1e-15);
    }

    #[test]
    fn full_reset_zero_correlation() {
        let (ctx, inst) = povm_reset(1.0, 1);
        for c in autocorrelation_sequence(&inst, &ctx, 5).unwrap() {
            assert!(c.abs() < 1e-12);
        }
        assert!((t_aut(&inst, &ctx, 50).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn covariance_dual_path_and_variance_identity() {
        let mut r = rng(45);
        let h = random_hermitian_normed(&mut r, 2, 1.0);
        let ctx = make_gibbs_context(&h, 1.0).unwrap();
        let a = random_hermitian_normed(&mut r, 2, 1.0);
        let (_, inst) = db_reset(&ctx, &a, 0.4);
        let st = stationary_stats(&inst, &ctx).unwrap();
        let corr = autocorrelation_sequence(&inst, &ctx, 3).unwrap();
        for p in 1..=3 {
            let dist = exact_trajectory_distribution(&inst, &ctx.sigma, p + 1).unwrap();
            let cov: f64 = dist
                .iter()
                .map(|(k, pr)| pr * (inst.outcomes()[k[0]] - st.mean) * (inst.outcomes()[k[p]] - st.mean))
                .sum();
            assert!((cov - corr[p - 1]).abs() <= 1e-9 * (1.0 + cov.abs()), "p={p}");
        }
        for t in 2..=4 {
            let dist = exact_trajectory_distribution(&inst, &ctx.sigma, t).unwrap();
            let (_, var_mean) = enumerated_mean_var(&dist, &inst);
            let predicted = 2.0 * t_aut(&inst, &ctx, t).unwrap() * st.var / t as f64;
            assert!((var_mean - predicted).abs() <= 1e-9 * (1.0 + var_mean), "T={t}");
        }
    }

    #[test]
    fn t_aut_monotone_for_positive_correlations() {
        let (ctx, inst) = povm_reset(0.5, 1);
        let corr = autocorrelation_sequence(&inst, &ctx, 60).unwrap();
        assert!(corr.iter().all(|&c| c >= 0.0));
        let vals: Vec<f64> = (1..=50).map(|t| t_aut(&inst, &ctx, t).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        let dist = exact_trajectory_distribution(&inst, &ctx.sigma, 4).unwrap();
        let (_, vm) = enumerated_mean_var(&dist, &inst);
        let st = stationary_stats(&inst, &ctx).unwrap();
        assert!((vm - 2.0 * vals[3] * st.var / 4.0).abs() < 1e-9);
    }

    #[test]
    fn theta_bound_dominates() {
        let mut r = rng(46);
        for _ in 0..3 {
            let ctx = make_gibbs_context(&random_hermitian_normed(&mut r, 2, 1.0), 1.0).unwrap();
            let a = random_hermitian_normed(&mut r, 2, 1.0);
            let gamma = 0.3;
            let (m, inst) = db_reset(&ctx, &a, gamma);
            let tb = theta_gap_bound(&m, gamma, &ctx).unwrap();
            for t in [10, 100, 1000] {
                let ta = t_aut(&inst, &ctx, t).unwrap();
                assert!(ta <= tb.bound + 1e-9, "t_aut {ta} bound {}", tb.bound);
            }
            let st = stationary_stats(&inst, &ctx).unwrap();
            let c = m.meta.c.unwrap();
            let u = m.meta.u.unwrap();
            let vmax = m.outcomes.iter().map(|v| (v - st.mean).abs()).fold(0.0, f64::max);
            assert!(vmax <= 1.0 / (2.0 * c * c * u) + 1.0 / u + 1.0);
            let num = tb.theta * tb.var;
            let norms: Vec<f64> = m.kraus.iter().map(|k| op_norm(k).unwrap().powi(2)).collect();
            let bound: f64 = (0..3)
                .flat_map(|a| (0..3).map(move |b| (a, b)))
                .map(|(a, b)| (m.outcomes[a] - st.mean).abs() * (m.outcomes[b] - st.mean).abs() * norms[a] * norms[b])
                .sum();
            assert!(num.abs() <= bound);
        }
    }

    #[test]
    fn theta_needs_randomness() {
        let ctx = zctx();
        assert!(matches!(theta_gap_bound(&identity_channel(2), 0.5, &ctx), Err(Error::DegenerateVariance { .. })));
    }

    #[test]
    fn perturbation_cases() {
        let ctx = zctx();
        let (_, inst) = db_reset(&ctx, &pauli::x(), 0.5);
        let probes = default_probe_set(&ctx, 1);
        let same = perturb_and_tv(&inst, &inst, &ctx.sigma, &ctx.sigma, 4, &probes, None).unwrap();
        assert_eq!(same.tv, 0.0);
        let eta = 0.05;
        let mixed = ComplexMatrix::identity(2).scale_real(0.5);
        let rho_t = &ctx.sigma.scale_real(1.0 - eta / 2.0) + &mixed.scale_real(eta / 2.0);
        let rep = perturb_and_tv(&inst, &inst, &ctx.sigma, &rho_t, 4, &probes, None).unwrap();
        assert!(rep.tv <= rep.eta / 2.0 + 1e-9);
        assert!(rep.eta <= eta);
    }

    #[test]
    fn stinespring() {
        let v = stinespring_isometry(&identity_channel(2)).unwrap();
        assert_eq!(v, ComplexMatrix::identity(2));
        let mut r = rng(47);
        let ctx = make_gibbs_context(&random_hermitian(&mut r, 3), 1.0).unwrap();
        let a = random_hermitian_normed(&mut r, 3, 1.0);
        let m = build_povm(&a, &ctx, 0.5, 2.0).unwrap();
        let v = stinespring_isometry(&m).unwrap();
        assert!((&(&v.adjoint() * &v) - &ComplexMatrix::identity(3)).max_abs() <= 1e-10);
        for _ in 0..10 {
            let rho = random_state(&mut r, 3);
            let big = &(&v * &rho) * &v.adjoint();
            let p = m.probabilities(&rho);
            for (i, pi) in p.iter().enumerate() {
                let blk: f64 = (0..3).map(|j| big[(i * 3 + j, i * 3 + j)].re).sum();
                assert!((blk - pi).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn csv_and_summary() {
        let ctx = zctx();
        let (_, inst) = db_reset(&ctx, &pauli::x(), 0.5);
        let recs = sample_trajectories(&inst, &ctx.sigma, 5, 3, 4).unwrap();
        let mut buf = Vec::new();
        write_trajectories_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("seed,t,label,value,stream\n"));
        assert_eq!(text.lines().count(), 21);
        let s = summarize(&recs);
        assert_eq!((s.count, s.length), (4, 5));
        assert!(s.ci_low <= s.mean && s.mean <= s.ci_high);
    }
}
