//! Config-driven runs, result aggregation and spectrum dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Experiment, ExperimentConfig, ModelKind, SPEC_VERSION};
use crate::error::{Error, Result};
use crate::gibbs::{kms_db_residual_superop, kms_spectrum, make_gibbs_context, spectral_gap, Superoperator};
use crate::instrument::write_trajectories_csv;
use crate::protocols::{prepare_db_protocol, prepare_remix_protocol, Diagnostics, PreparedProtocol, ProtocolKind, ProtocolResult};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "GIBBS_ND_THREADS";

/// Sizes the global rayon pool from `GIBBS_ND_THREADS`; a no-op when unset or already built.
pub fn init_thread_pool() {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
                log::debug!("thread pool already initialised");
            }
        }
        _ => log::warn!("ignoring {THREADS_ENV}={raw:?}: expected a positive integer"),
    }
}

/// Process exit code for an error: 2 for configuration problems, 1 for I/O, 3 for
/// violated numerical preconditions.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

/// Trajectory summary stored in the result file; the full sequence goes to the CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryInfo {
    pub seed: u64,
    pub stream: u64,
    pub length: usize,
    pub empirical_mean: f64,
}

/// Contents of `<name>.result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec_version: String,
    pub model: ModelKind,
    pub n_qubits: usize,
    pub beta: f64,
    pub protocol: ProtocolKind,
    pub eps: f64,
    pub eta: f64,
    pub seed: u64,
    pub estimate: f64,
    pub truth: f64,
    pub abs_error: f64,
    pub trajectory: TrajectoryInfo,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub result: PathBuf,
    pub trajectory: PathBuf,
    pub diagnostics: PathBuf,
    pub record: RunRecord,
}

pub fn prepare(cfg: &ExperimentConfig, exp: &Experiment) -> Result<PreparedProtocol> {
    let ctx = make_gibbs_context(&exp.h, cfg.beta)?;
    match cfg.protocol {
        ProtocolKind::Db => prepare_db_protocol(&exp.a, &ctx, &exp.sampler, &exp.protocol),
        ProtocolKind::Remix => prepare_remix_protocol(&exp.a, &ctx, &exp.sampler, &exp.protocol),
    }
}

fn record_for(cfg: &ExperimentConfig, exp: &Experiment, seed: u64, res: &ProtocolResult) -> RunRecord {
    RunRecord {
        spec_version: SPEC_VERSION.into(),
        model: cfg.model.kind,
        n_qubits: exp.n_qubits,
        beta: cfg.beta,
        protocol: cfg.protocol,
        eps: cfg.eps,
        eta: cfg.eta,
        seed,
        estimate: res.estimate,
        truth: res.truth,
        abs_error: res.abs_error,
        trajectory: TrajectoryInfo {
            seed: res.trajectory.seed,
            stream: res.trajectory.stream,
            length: res.trajectory.values.len(),
            empirical_mean: res.trajectory.empirical_mean,
        },
        diagnostics: res.diagnostics.clone(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_artifacts(dir: &Path, stem: &str, record: RunRecord, res: &ProtocolResult) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let result = dir.join(format!("{stem}.result.json"));
    let trajectory = dir.join(format!("{stem}.trajectory.csv"));
    let diagnostics = dir.join(format!("{stem}.diagnostics.json"));
    write_json(&result, &record)?;
    write_json(&diagnostics, &record.diagnostics)?;
    let file = fs::File::create(&trajectory)?;
    write_trajectories_csv(std::slice::from_ref(&res.trajectory), std::io::BufWriter::new(file))?;
    Ok(RunArtifacts { result, trajectory, diagnostics, record })
}

/// Runs one config for `sweep` consecutive seeds starting at the configured seed.
/// Output stems get a `-s<seed>` suffix when `sweep > 1`. The protocol is prepared once
/// and the seeds run in parallel.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>, sweep: usize) -> Result<Vec<RunArtifacts>> {
    let exp = cfg.resolve()?;
    let prepared = prepare(cfg, &exp)?;
    let dir = out_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.dir.clone());
    let stem = cfg.output_stem();
    let seeds: Vec<u64> = (0..sweep.max(1) as u64).map(|i| cfg.seed + i).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let res = prepared.run(seed, 0)?;
            let name = if sweep > 1 { format!("{stem}-s{seed}") } else { stem.clone() };
            write_artifacts(&dir, &name, record_for(cfg, &exp, seed, &res), &res)
        })
        .collect()
}

pub fn run_config_file(path: &Path, out_dir: Option<&Path>, sweep: usize) -> Result<Vec<RunArtifacts>> {
    run_experiment(&ExperimentConfig::load(path)?, out_dir, sweep)
}

/// One row of the aggregated report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelKind,
    pub n: usize,
    pub beta: f64,
    pub protocol: ProtocolKind,
    #[serde(rename = "T")]
    pub t: usize,
    pub estimate: f64,
    pub truth: f64,
    pub error: f64,
    pub t_aut: f64,
    pub gap: f64,
    pub t_mix_upper: Option<u64>,
    pub theta_bound: Option<f64>,
    pub seed: u64,
    pub file: String,
}

impl ReportRow {
    pub fn from_record(r: &RunRecord, file: &str) -> Self {
        Self {
            model: r.model,
            n: r.n_qubits,
            beta: r.beta,
            protocol: r.protocol,
            t: r.diagnostics.t_len,
            estimate: r.estimate,
            truth: r.truth,
            error: r.abs_error,
            t_aut: r.diagnostics.t_aut,
            gap: r.diagnostics.gap,
            t_mix_upper: r.diagnostics.t_mix_upper,
            theta_bound: r.diagnostics.theta_bound,
            seed: r.seed,
            file: file.to_string(),
        }
    }
}

/// Result files matching `pattern`, sorted by path.
pub fn collect_results(pattern: &str) -> Result<Vec<(PathBuf, RunRecord)>> {
    let paths = glob::glob(pattern).map_err(|e| Error::Config(format!("bad glob '{pattern}': {e}")))?;
    let mut files: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no result files match '{pattern}'")));
    }
    files
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p)?;
            let rec: RunRecord = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            Ok((p, rec))
        })
        .collect()
}

/// Writes the aggregated CSV (one row per result file, sorted by path).
pub fn emit_report<W: Write>(pattern: &str, writer: W) -> Result<Vec<ReportRow>> {
    let rows: Vec<ReportRow> = collect_results(pattern)?
        .iter()
        .map(|(p, r)| ReportRow::from_record(r, &p.to_string_lossy()))
        .collect();
    let mut w = csv::Writer::from_writer(writer);
    for row in &rows {
        w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(rows)
}

/// Spectrum of one map in the KMS-symmetrized frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpectrum {
    pub name: String,
    pub kms_db_residual: f64,
    /// Present when the map is detailed balanced.
    pub gap: Option<f64>,
    /// Descending eigenvalues of the Hermitian part of the symmetrized superoperator.
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDump {
    pub beta: f64,
    pub dim: usize,
    pub sigma_min: f64,
    pub maps: Vec<MapSpectrum>,
}

fn map_spectrum(name: &str, map: &Superoperator, ctx: &crate::gibbs::GibbsContext) -> Result<MapSpectrum> {
    Ok(MapSpectrum {
        name: name.into(),
        kms_db_residual: kms_db_residual_superop(map, ctx)?,
        gap: spectral_gap(map, ctx).ok(),
        eigenvalues: kms_spectrum(map, ctx)?,
    })
}

/// Spectra of the measurement channel, the sampler and one full protocol step.
pub fn spectrum(cfg: &ExperimentConfig) -> Result<SpectrumDump> {
    let exp = cfg.resolve()?;
    let ctx = make_gibbs_context(&exp.h, cfg.beta)?;
    let prepared = prepare(cfg, &exp)?;
    let maps = vec![
        map_spectrum("measurement", &prepared.measurement.superop(), &ctx)?,
        map_spectrum("sampler", &prepared.sampler.superop(), &ctx)?,
        map_spectrum("step", &prepared.instrument.aggregate(), &ctx)?,
    ];
    Ok(SpectrumDump { beta: cfg.beta, dim: ctx.dim(), sigma_min: ctx.sigma_min, maps })
}
