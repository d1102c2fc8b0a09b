//! Parameter sweeps: Cartesian product of axes, run concurrently, aggregated
//! in enumeration order.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::config::{resolve_table, set_path, Engine, RunConfig, SweepConfig, SystemSize};
use crate::error::{exit, CliError, Result};
use crate::run::{config_hash, read_records, run_single, Manifest, RecordRow, RECORD_FILE};

pub const AGGREGATE_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "sweep_summary.json";
pub const THREADS_ENV: &str = "KZQFI_MAX_THREADS";

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub name: String,
    pub assignments: Vec<(String, Value)>,
    pub config: RunConfig,
}

fn value_label(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Expands the axes into cells; the first axis varies slowest.
pub fn enumerate_cells(sweep: &SweepConfig) -> Result<Vec<Cell>> {
    let total: usize = sweep.axes.iter().map(|(_, v)| v.len()).product();
    let mut cells = Vec::with_capacity(total);
    for index in 0..total {
        let mut rem = index;
        let mut assignments = Vec::with_capacity(sweep.axes.len());
        for (key, values) in sweep.axes.iter().rev() {
            assignments.push((key.clone(), values[rem % values.len()].clone()));
            rem /= values.len();
        }
        assignments.reverse();

        let name = assignments
            .iter()
            .map(|(k, v)| format!("{}={}", k.rsplit('.').next().unwrap_or(k), value_label(v)))
            .collect::<Vec<_>>()
            .join("__");
        let mut table = sweep.base_table.clone();
        for (k, v) in &assignments {
            set_path(&mut table, k, v.clone())?;
        }
        let dir = sweep.base.output_dir.join("cells").join(if name.is_empty() { "base".into() } else { name.clone() });
        set_path(&mut table, "output_dir", Value::String(dir.to_string_lossy().into_owned()))?;
        let config = resolve_table(&table).map_err(|e| match e {
            CliError::Config { path, message } => CliError::config(format!("cell {name}: {path}"), message),
            other => other,
        })?;
        cells.push(Cell {
            index,
            name,
            assignments,
            config,
        });
    }
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Completed,
    Skipped,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub name: String,
    pub dir: PathBuf,
    pub status: CellStatus,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub row: Option<RecordRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub total: usize,
    pub completed: usize,
    pub skipped: usize,
    pub failed: usize,
    pub threads: usize,
    pub cells: Vec<CellResult>,
}

impl SweepSummary {
    /// Rows of every successful cell, in enumeration order.
    pub fn rows(&self) -> Vec<RecordRow> {
        self.cells.iter().filter_map(|c| c.row.clone()).collect()
    }

    pub fn exit_code(&self) -> i32 {
        self.cells
            .iter()
            .find(|c| c.status == CellStatus::Failed)
            .map_or(exit::SUCCESS, |c| c.exit_code)
    }
}

/// Rough peak working set of one cell in bytes.
fn cell_memory(cfg: &RunConfig) -> u64 {
    let n = match cfg.model.n {
        SystemSize::Sites(n) => n as u64,
        SystemSize::Thermodynamic => 1,
    };
    match cfg.engine {
        // tensors plus SVD workspaces of the two-site block and the N×N correlation sweep
        Engine::Mps => {
            let chi = cfg.tebd.chi_max.max(cfg.dmrg.chi_max) as u64;
            16 * 64 * n * chi * chi
        }
        Engine::Dense => 16 * 8 * (1u64 << n.min(40)),
        Engine::Ff => 1 << 20,
    }
}

fn available_memory() -> Option<u64> {
    let text = fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Worker count: the sweep's own limit, the `KZQFI_MAX_THREADS` cap and the
/// processor count, further capped so the largest cells fit in memory.
pub fn concurrency(sweep: &SweepConfig, cells: &[Cell]) -> Result<usize> {
    let mut threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    if let Some(m) = sweep.max_concurrency {
        threads = threads.min(m);
    }
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let cap: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&c| c > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        threads = threads.min(cap);
    }
    if let (Some(avail), Some(peak)) = (available_memory(), cells.iter().map(|c| cell_memory(&c.config)).max()) {
        threads = threads.min((avail / peak.max(1)).max(1) as usize);
    }
    Ok(threads.max(1))
}

/// A cell counts as done when its manifest reports success, was produced by
/// the same resolved config and still matches every recorded hash.
fn completed_row(cell: &Cell) -> Option<RecordRow> {
    let dir = &cell.config.output_dir;
    let manifest = Manifest::read(dir).ok()?;
    let same = config_hash(&cell.config).ok()? == manifest.config_sha256;
    if !(manifest.is_complete() && same && manifest.verify(dir)) {
        return None;
    }
    read_records(&dir.join(RECORD_FILE)).ok()?.into_iter().next()
}

fn run_cell(cell: &Cell, progress: bool) -> CellResult {
    let dir = cell.config.output_dir.clone();
    let mut result = CellResult {
        index: cell.index,
        name: cell.name.clone(),
        dir,
        status: CellStatus::Skipped,
        exit_code: exit::SUCCESS,
        error: None,
        row: None,
    };
    if let Some(row) = completed_row(cell) {
        result.row = Some(row);
    } else {
        match run_single(&cell.config) {
            Ok(out) => {
                result.status = CellStatus::Completed;
                result.row = Some(out.row);
            }
            Err(e) => {
                result.status = CellStatus::Failed;
                result.exit_code = e.exit_code();
                result.error = Some(e.to_string());
            }
        }
    }
    if progress {
        eprintln!("[{}] {} {:?}", cell.index, cell.name, result.status);
    }
    result
}

/// Runs every cell and writes the aggregate CSV and a summary.
///
/// Failed cells are reported in the summary; they never abort the sweep.
pub fn run_sweep(sweep: &SweepConfig, progress: bool) -> Result<SweepSummary> {
    let cells = enumerate_cells(sweep)?;
    let threads = concurrency(sweep, &cells)?;
    if progress {
        eprintln!("sweep: {} cells on {threads} worker(s)", cells.len());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<CellResult> = pool.install(|| cells.par_iter().map(|c| run_cell(c, progress)).collect());

    let count = |s: CellStatus| results.iter().filter(|r| r.status == s).count();
    let summary = SweepSummary {
        total: results.len(),
        completed: count(CellStatus::Completed),
        skipped: count(CellStatus::Skipped),
        failed: count(CellStatus::Failed),
        threads,
        cells: results,
    };
    write_aggregate(&sweep.base.output_dir, &summary)?;
    Ok(summary)
}

fn write_aggregate(dir: &Path, summary: &SweepSummary) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut w = csv::Writer::from_path(dir.join(AGGREGATE_FILE))?;
    for row in summary.rows() {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io("writing aggregate", e))?;
    let json = serde_json::to_vec_pretty(summary)?;
    fs::write(dir.join(SUMMARY_FILE), json).map_err(|e| CliError::io("writing sweep summary", e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigLoader;

    fn sweep(dir: &Path, body: &str) -> SweepConfig {
        ConfigLoader::default()
            .merge_str(body)
            .unwrap()
            .set_value("output_dir", Value::String(dir.to_string_lossy().into()))
            .unwrap()
            .into_sweep()
            .unwrap()
    }

    #[test]
    fn cells_enumerate_in_row_major_order() {
        let tmp = tempfile::tempdir().unwrap();
        let s = sweep(tmp.path(), "engine = \"ff\"\n[sweep]\naxes = { tau_q = [1, 2], N = [8, 10] }\n");
        let names: Vec<String> = enumerate_cells(&s).unwrap().into_iter().map(|c| c.name).collect();
        assert_eq!(names, ["n=8__tau_q=1", "n=8__tau_q=2", "n=10__tau_q=1", "n=10__tau_q=2"]);
    }

    #[test]
    fn invalid_cells_are_rejected_before_running() {
        let tmp = tempfile::tempdir().unwrap();
        let s = sweep(tmp.path(), "engine = \"dense\"\n[sweep]\naxes = { N = [8, 20] }\n");
        assert_eq!(enumerate_cells(&s).unwrap_err().exit_code(), exit::CAPACITY);
    }

    #[test]
    fn failures_stay_per_cell() {
        let tmp = tempfile::tempdir().unwrap();
        let s = sweep(
            tmp.path(),
            "[model]\nn = 6\n[tebd]\nchi_max = 2\n[sweep]\naxes = { \"tebd.budget\" = [1e-14, 1.0] }\n",
        );
        let summary = run_sweep(&s, false).unwrap();
        assert_eq!((summary.failed, summary.completed), (1, 1));
        assert_eq!(summary.exit_code(), exit::BUDGET);
        assert_eq!(read_records(&tmp.path().join(AGGREGATE_FILE)).unwrap().len(), 1);
    }
}
