//! Single runs: ground-state preparation, evolution and measurement for one
//! engine, with every artifact written to the run's output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use kzqfi::model::pauli_x;
use kzqfi::oracles::{dense_ground_state, dense_quench, defect_density_ff, mode_sum, ChainSize, OdeOptions};
use kzqfi::{evolve, ground_state, measure, ModelParams, ObservableRecord, RunMeta};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Engine, RunConfig, SystemSize};
use crate::error::{exit, CliError, Result};

pub const RECORD_FILE: &str = "record.csv";
pub const PROFILE_FILE: &str = "profile.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const MODES_FILE: &str = "modes.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

/// One row of the record CSV. Fields an engine cannot produce stay empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub engine: String,
    #[serde(rename = "N")]
    pub n: String,
    pub tau_q: f64,
    pub alpha: f64,
    pub f_q: Option<f64>,
    pub n_d: f64,
    pub mean_sz: Option<f64>,
    pub chi_max: Option<usize>,
    pub dt: Option<f64>,
    pub cum_trunc: Option<f64>,
}

impl RecordRow {
    fn from_record(engine: Engine, r: &ObservableRecord) -> Self {
        let mps = engine == Engine::Mps;
        Self {
            engine: engine.name().into(),
            n: r.n.to_string(),
            tau_q: r.tau_q,
            alpha: r.alpha,
            f_q: Some(r.f_q),
            n_d: r.n_d,
            mean_sz: Some(r.mean_sz),
            chi_max: mps.then_some(r.chi_max),
            dt: Some(r.dt),
            cum_trunc: mps.then_some(r.cum_trunc),
        }
    }

    /// Numeric chain length, `None` for the infinite chain.
    pub fn sites(&self) -> Option<usize> {
        self.n.parse().ok()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub engine: String,
    /// SHA-256 of the resolved config rendered as TOML.
    pub config_sha256: String,
    pub config: RunConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn is_complete(&self) -> bool {
        self.status == "ok"
    }

    /// Whether every listed file still exists with the recorded hash.
    pub fn verify(&self, dir: &Path) -> bool {
        self.files.iter().all(|f| {
            fs::read(dir.join(&f.path))
                .map(|bytes| hex::encode(Sha256::digest(&bytes)) == f.sha256)
                .unwrap_or(false)
        })
    }
}

/// Result of a successful run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub row: RecordRow,
    pub record: Option<ObservableRecord>,
    pub manifest: Manifest,
    pub dir: PathBuf,
}

pub fn config_hash(cfg: &RunConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(cfg.to_toml()?.as_bytes())))
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Writes via a temporary file and a rename so readers never see a partial file.
fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.partial"));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(format!("renaming {}", path.display()), e))?;
    Ok(FileEntry {
        path: name.into(),
        sha256: hex::encode(Sha256::digest(bytes)),
        bytes: bytes.len() as u64,
    })
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| CliError::Serialization(e.to_string()))
}

fn pair_csv(header: [&str; 2], rows: impl IntoIterator<Item = (String, f64)>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for (a, b) in rows {
        w.write_record([a, b.to_string()])?;
    }
    w.into_inner().map_err(|e| CliError::Serialization(e.to_string()))
}

struct Artifacts {
    row: RecordRow,
    record: Option<ObservableRecord>,
    files: Vec<(&'static str, Vec<u8>)>,
    details: serde_json::Value,
}

/// Runs one configuration end to end and persists its artifacts.
///
/// On failure the manifest is still written, with `status = "failed"` and
/// the exit code the error maps to, before the error is returned.
pub fn run_single(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    for stale in [MANIFEST_FILE, RECORD_FILE] {
        let _ = fs::remove_file(dir.join(stale));
    }
    let started = now();
    let config_sha256 = config_hash(cfg)?;
    let mut manifest = Manifest {
        status: "failed".into(),
        exit_code: exit::FAILURE,
        error: None,
        engine: cfg.engine.name().into(),
        config_sha256,
        config: cfg.clone(),
        started_unix: started,
        finished_unix: started,
        files: Vec::new(),
        details: serde_json::Value::Null,
    };

    let result = execute(cfg, &dir).and_then(|art| {
        let mut entries = vec![write_artifact(&dir, RECORD_FILE, &csv_bytes(std::slice::from_ref(&art.row))?)?];
        for (name, bytes) in &art.files {
            entries.push(write_artifact(&dir, name, bytes)?);
        }
        Ok((art, entries))
    });
    manifest.finished_unix = now();
    match result {
        Ok((art, entries)) => {
            manifest.status = "ok".into();
            manifest.exit_code = exit::SUCCESS;
            manifest.files = entries;
            manifest.details = art.details;
            write_artifact(&dir, MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;
            Ok(RunOutcome {
                row: art.row,
                record: art.record,
                manifest,
                dir,
            })
        }
        Err(e) => {
            manifest.exit_code = e.exit_code();
            manifest.error = Some(e.to_string());
            let _ = write_artifact(&dir, MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?);
            Err(e)
        }
    }
}

fn execute(cfg: &RunConfig, dir: &Path) -> Result<Artifacts> {
    let schedule = cfg.schedule.build()?;
    match (cfg.engine, cfg.model.n) {
        (Engine::Mps, SystemSize::Sites(n)) => run_mps(cfg, n, &schedule, dir),
        (Engine::Dense, SystemSize::Sites(n)) => {
            let params = ModelParams::open(n);
            let (gs, energy) = dense_ground_state(&params, schedule.g_start)?;
            let psi = dense_quench(&gs, &schedule, cfg.tebd.dt)?;
            let record = psi.record(meta(cfg, &schedule));
            let details = serde_json::json!({ "ground_energy": energy });
            Ok(with_profile(Engine::Dense, record, details, Vec::new())?)
        }
        (Engine::Ff, size) => {
            let opts = OdeOptions {
                tol: cfg.ff.ode_tol,
                ..OdeOptions::default()
            };
            let (n_d, files) = match size {
                SystemSize::Thermodynamic => (defect_density_ff(&schedule, ChainSize::Thermodynamic, opts)?, Vec::new()),
                SystemSize::Sites(n) => {
                    let (n_d, modes) = mode_sum(&schedule, n, opts)?;
                    let bytes = pair_csv(["k", "p_k"], modes.into_iter().map(|(k, p)| (k.to_string(), p)))?;
                    (n_d, vec![(MODES_FILE, bytes)])
                }
            };
            let row = RecordRow {
                engine: Engine::Ff.name().into(),
                n: size.to_string(),
                tau_q: schedule.tau_q,
                alpha: schedule.alpha(),
                f_q: None,
                n_d,
                mean_sz: None,
                chi_max: None,
                dt: None,
                cum_trunc: None,
            };
            Ok(Artifacts {
                row,
                record: None,
                files,
                details: serde_json::Value::Null,
            })
        }
        (_, SystemSize::Thermodynamic) => unreachable!("rejected by validation"),
    }
}

fn meta(cfg: &RunConfig, schedule: &kzqfi::QuenchSchedule) -> RunMeta {
    RunMeta {
        tau_q: schedule.tau_q,
        alpha: schedule.alpha(),
        chi_max: cfg.tebd.chi_max,
        dt: cfg.tebd.dt,
    }
}

fn with_profile(
    engine: Engine,
    record: ObservableRecord,
    details: serde_json::Value,
    mut files: Vec<(&'static str, Vec<u8>)>,
) -> Result<Artifacts> {
    let profile = pair_csv(["r", "c_z"], record.c_z.iter().map(|&(r, c)| (r.to_string(), c)))?;
    files.insert(0, (PROFILE_FILE, profile));
    Ok(Artifacts {
        row: RecordRow::from_record(engine, &record),
        record: Some(record),
        files,
        details,
    })
}

fn run_mps(cfg: &RunConfig, n: usize, schedule: &kzqfi::QuenchSchedule, dir: &Path) -> Result<Artifacts> {
    let params = ModelParams::open(n);
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let tebd = cfg.tebd.build(Some(checkpoint.clone()))?;
    let resuming = tebd.checkpoint_path.is_some() && checkpoint.exists();

    let mut details = serde_json::Map::new();
    let (psi, trace) = if resuming {
        details.insert("resumed_from_checkpoint".into(), true.into());
        kzqfi::tebd::resume(&checkpoint, schedule, &params, &tebd)?
    } else {
        let (psi0, energy, dmrg_trace) = ground_state(&params, schedule.g_start, &cfg.dmrg.build(cfg.seed)?)?;
        details.insert("ground_energy".into(), energy.into());
        details.insert("dmrg_sweeps".into(), dmrg_trace.energies.len().into());
        details.insert("dmrg_max_bond_dim".into(), dmrg_trace.max_bond_dim.into());
        evolve(psi0, schedule, &params, &tebd)?
    };
    let _ = fs::remove_file(&checkpoint);
    details.insert("max_bond_dim".into(), trace.max_bond_dim.iter().copied().max().unwrap_or(1).into());
    details.insert("chi_limited_updates".into(), trace.chi_limited_updates.into());
    details.insert("max_norm_drift".into(), trace.max_norm_drift.into());

    let record = measure(&psi, meta(cfg, schedule))?;
    let x = psi.expectation_profile(pauli_x().view())?;
    details.insert("mean_sx".into(), (x.iter().sum::<f64>() / n as f64).into());

    let mut trace_csv = Vec::new();
    trace
        .write_csv(&mut trace_csv)
        .map_err(|e| CliError::io("rendering trace", e))?;
    let mut files = vec![(TRACE_FILE, trace_csv)];
    if !trace.snapshots.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["time", "f_q", "n_d", "mean_sz"])?;
        for (t, r) in &trace.snapshots {
            w.write_record([t.to_string(), r.f_q.to_string(), r.n_d.to_string(), r.mean_sz.to_string()])?;
        }
        files.push((SNAPSHOT_FILE, w.into_inner().map_err(|e| CliError::Serialization(e.to_string()))?));
    }
    with_profile(Engine::Mps, record, serde_json::Value::Object(details), files)
}

pub const GROUND_STATE_FILE: &str = "ground_state.json";

/// Prepares the ground state at field `g` with the configured engine and
/// writes a JSON summary to the output directory.
pub fn ground_state_report(cfg: &RunConfig, g: f64) -> Result<serde_json::Value> {
    let n = cfg
        .sites()
        .ok_or_else(|| CliError::config("model.n", "ground states need a finite chain"))?;
    let params = ModelParams::open(n);
    let report = match cfg.engine {
        Engine::Mps => {
            let (psi, energy, trace) = ground_state(&params, g, &cfg.dmrg.build(cfg.seed)?)?;
            serde_json::json!({
                "engine": "mps",
                "n": n,
                "g": g,
                "energy": energy,
                "sweep_energies": trace.energies,
                "max_bond_dim": trace.max_bond_dim,
                "max_discarded": trace.max_discarded,
                "sx": psi.expectation_profile(pauli_x().view())?,
            })
        }
        Engine::Dense => {
            let (psi, energy) = dense_ground_state(&params, g)?;
            serde_json::json!({ "engine": "dense", "n": n, "g": g, "energy": energy, "sx": psi.x_profile() })
        }
        Engine::Ff => return Err(CliError::config("engine", "ground-state supports the mps and dense engines")),
    };
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(format!("creating {}", cfg.output_dir.display()), e))?;
    write_artifact(&cfg.output_dir, GROUND_STATE_FILE, &serde_json::to_vec_pretty(&report)?)?;
    Ok(report)
}

/// Reads a record CSV written by [`run_single`] or [`crate::sweep::run_sweep`].
pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Schema {
        file: path.into(),
        message: e.to_string(),
    })?;
    r.deserialize()
        .map(|row| {
            row.map_err(|e| CliError::Schema {
                file: path.into(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigLoader;

    fn cfg(dir: &Path, sets: &[&str]) -> RunConfig {
        let mut l = ConfigLoader::default();
        for s in sets {
            l = l.set(s).unwrap();
        }
        let mut c = l.resolve().unwrap();
        c.output_dir = dir.into();
        c
    }

    #[test]
    fn free_fermion_thermodynamic_record() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path(), &["engine=ff", "N=\"thermodynamic\""]);
        let out = run_single(&c).unwrap();
        assert!((out.row.n_d - 0.112_539_539).abs() < 1e-8, "{}", out.row.n_d);
        assert_eq!(out.row.n, "thermodynamic");
        assert!(out.row.f_q.is_none());
        let m = Manifest::read(tmp.path()).unwrap();
        assert!(m.is_complete() && m.verify(tmp.path()));
        assert_eq!(read_records(&tmp.path().join(RECORD_FILE)).unwrap(), vec![out.row]);
    }

    #[test]
    fn mps_run_writes_every_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path(), &["N=6", "tau_q=0.5", "tebd.record_every=50", "tebd.checkpoint_every=40"]);
        let out = run_single(&c).unwrap();
        let names: Vec<&str> = out.manifest.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(names, [RECORD_FILE, PROFILE_FILE, TRACE_FILE, SNAPSHOT_FILE]);
        assert!(out.manifest.verify(tmp.path()));
        assert!(!tmp.path().join(CHECKPOINT_FILE).exists());
        let f = out.row.f_q.unwrap();
        assert!(f >= 1.0 && f <= 6.0, "{f}");
    }

    #[test]
    fn identical_configs_give_identical_records() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [a.path(), b.path()] {
            run_single(&cfg(d, &["N=6", "tau_q=0.5"])).unwrap();
        }
        for f in [RECORD_FILE, PROFILE_FILE, TRACE_FILE] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn budget_failure_is_recorded_in_the_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let c = cfg(tmp.path(), &["N=8", "tau_q=1", "tebd.chi_max=2", "tebd.budget=1e-12"]);
        let err = run_single(&c).unwrap_err();
        assert_eq!(err.exit_code(), exit::BUDGET);
        let m = Manifest::read(tmp.path()).unwrap();
        assert_eq!(m.status, "failed");
        assert_eq!(m.exit_code, exit::BUDGET);
        assert!(!tmp.path().join(RECORD_FILE).exists());
    }
}
