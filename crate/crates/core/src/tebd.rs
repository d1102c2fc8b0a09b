//! Real-time evolution of an MPS through a quench schedule with
//! second-order Trotter steps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{trotter_step, Boundary, ModelParams, QuenchSchedule, TrotterStep};
use crate::mps::{Mps, Truncation};
use crate::observables::{measure, ObservableRecord, RunMeta};

#[derive(Clone, Debug, PartialEq)]
pub struct TebdConfig {
    pub dt: f64,
    pub chi_max: usize,
    pub svd_eps: f64,
    /// Hard ceiling on the accumulated discarded weight.
    pub budget: f64,
    /// Write a checkpoint every this many steps (requires `checkpoint_path`).
    pub checkpoint_every: Option<usize>,
    pub checkpoint_path: Option<PathBuf>,
    /// Measure the full observable record every this many steps.
    pub record_every: Option<usize>,
}

impl Default for TebdConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            chi_max: 100,
            svd_eps: 1e-11,
            budget: 1e-3,
            checkpoint_every: None,
            checkpoint_path: None,
            record_every: None,
        }
    }
}

impl TebdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {}", self.dt)));
        }
        if self.chi_max < 2 {
            return Err(Error::InvalidArgument(format!("chi_max must be >= 2, got {}", self.chi_max)));
        }
        if !(self.svd_eps >= 0.0) || !(self.budget > 0.0) {
            return Err(Error::InvalidArgument("svd_eps must be >= 0 and budget > 0".into()));
        }
        if self.checkpoint_every.is_some() && self.checkpoint_path.is_none() {
            return Err(Error::InvalidArgument("checkpoint_every needs checkpoint_path".into()));
        }
        Ok(())
    }

    fn truncation(&self) -> Truncation {
        Truncation::new(self.chi_max, self.svd_eps)
    }
}

/// Per-step history of an evolution. Entry 0 is the initial state.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub g_values: Vec<f64>,
    pub cumulative_truncation: Vec<f64>,
    pub max_bond_dim: Vec<usize>,
    pub snapshots: Vec<(f64, ObservableRecord)>,
    /// Number of two-site updates whose rank was capped by `chi_max`.
    pub chi_limited_updates: usize,
    /// Largest `|‖θ‖² − 1|` seen before renormalization.
    pub max_norm_drift: f64,
}

impl EvolutionTrace {
    fn push(&mut self, t: f64, g: f64, psi: &Mps) {
        self.times.push(t);
        self.g_values.push(g);
        self.cumulative_truncation.push(psi.truncation_error());
        self.max_bond_dim.push(psi.max_bond_dim());
    }

    /// Total discarded weight at the end of the evolution.
    pub fn total_truncation(&self) -> f64 {
        self.cumulative_truncation.last().copied().unwrap_or(0.0)
    }

    /// Writes `time,g,cum_trunc,max_chi` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,g,cum_trunc,max_chi")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.times[i], self.g_values[i], self.cumulative_truncation[i], self.max_bond_dim[i]
            )?;
        }
        Ok(())
    }
}

/// Applies one Trotter step. Layers alternate sweep direction starting with
/// `left_to_right`, and the direction to use for the next step is returned.
pub fn apply_trotter_step(
    psi: &mut Mps,
    step: &TrotterStep,
    trunc: Truncation,
    mut left_to_right: bool,
    trace: &mut EvolutionTrace,
) -> Result<bool> {
    for layer in &step.layers {
        let mut order: Vec<_> = layer.gates.iter().collect();
        if !left_to_right {
            order.reverse();
        }
        for (bond, gate) in order {
            let rep = psi.apply_two_site_gate(gate.view(), *bond, trunc)?;
            if rep.chi_limited {
                trace.chi_limited_updates += 1;
            }
            if rep.discarded_weight < 1e-14 {
                trace.max_norm_drift = trace.max_norm_drift.max((rep.norm_before_truncation - 1.0).abs());
            }
        }
        left_to_right = !left_to_right;
    }
    Ok(left_to_right)
}

/// Evolves `psi` through `schedule`.
///
/// Runs `⌈(t_end − t_start)/dt⌉` equal steps, each with the field frozen at
/// the step midpoint.
pub fn evolve(psi: Mps, schedule: &QuenchSchedule, params: &ModelParams, cfg: &TebdConfig) -> Result<(Mps, EvolutionTrace)> {
    evolve_from(psi, 0, schedule, params, cfg)
}

/// Continues an evolution from a checkpoint written by [`evolve`].
pub fn resume(path: &Path, schedule: &QuenchSchedule, params: &ModelParams, cfg: &TebdConfig) -> Result<(Mps, EvolutionTrace)> {
    let (step, psi) = read_checkpoint(path)?;
    evolve_from(psi, step, schedule, params, cfg)
}

fn evolve_from(
    mut psi: Mps,
    first_step: usize,
    schedule: &QuenchSchedule,
    params: &ModelParams,
    cfg: &TebdConfig,
) -> Result<(Mps, EvolutionTrace)> {
    cfg.validate()?;
    if params.boundary != Boundary::Open {
        return Err(Error::InvalidArgument("TEBD runs on open chains only".into()));
    }
    if psi.len() != params.n {
        return Err(Error::InvalidArgument(format!(
            "state has {} sites but the model has {}",
            psi.len(),
            params.n
        )));
    }
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("initial state must be normalized, norm^2 = {norm}")));
    }
    let grid = schedule.time_grid(cfg.dt)?;
    if first_step > grid.steps {
        return Err(Error::InvalidArgument("checkpoint lies beyond the schedule".into()));
    }
    let trunc = cfg.truncation();
    let meta = RunMeta {
        tau_q: schedule.tau_q,
        alpha: schedule.alpha(),
        chi_max: cfg.chi_max,
        dt: grid.dt,
    };
    let mut trace = EvolutionTrace::default();
    let t0 = grid.time(first_step);
    trace.push(t0, schedule.field_at(t0.min(schedule.t_end()))?, &psi);

    let mut cached: Option<(f64, TrotterStep)> = None;
    let mut left_to_right = true;
    for i in first_step..grid.steps {
        let g = schedule.field_at(grid.midpoint(i))?;
        let step = match cached.take() {
            Some((cg, s)) if cg == g => s,
            _ => trotter_step(params.n, g, grid.dt)?,
        };
        left_to_right = apply_trotter_step(&mut psi, &step, trunc, left_to_right, &mut trace)?;
        cached = Some((g, step));

        let t = if i + 1 == grid.steps { schedule.t_end() } else { grid.time(i + 1) };
        trace.push(t, schedule.field_at(t)?, &psi);
        if psi.truncation_error() > cfg.budget {
            return Err(Error::BudgetExceeded {
                cumulative: psi.truncation_error(),
                budget: cfg.budget,
            });
        }
        if let Some(every) = cfg.record_every {
            if every > 0 && (i + 1) % every == 0 {
                trace.snapshots.push((t, measure(&psi, meta)?));
            }
        }
        if let (Some(every), Some(path)) = (cfg.checkpoint_every, cfg.checkpoint_path.as_ref()) {
            if every > 0 && (i + 1) % every == 0 && i + 1 < grid.steps {
                write_checkpoint(path, i + 1, &psi)?;
            }
        }
    }
    psi.normalize()?;
    Ok((psi, trace))
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"KZTEBD01";

/// Checkpoint layout: magic, little-endian `u64` index of the next step,
/// then the MPS in its own binary format.
pub fn write_checkpoint(path: &Path, next_step: usize, psi: &Mps) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(next_step as u64).to_le_bytes())?;
        psi.write_checkpoint(&mut w)?;
        w.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(usize, Mps)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::InvalidInput(format!("{} is not a TEBD checkpoint", path.display())));
    }
    let mut step = [0u8; 8];
    r.read_exact(&mut step)?;
    let psi = Mps::read_checkpoint(r)?;
    Ok((u64::from_le_bytes(step) as usize, psi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::pauli_z;
    use crate::observables::qfi_density;
    use crate::oracles::dense::{dense_quench, DenseState};
    use num_complex::Complex64 as C64;

    fn plus_state(n: usize) -> Mps {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Mps::product_state(n, [a, a]).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut cfg = TebdConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = TebdConfig {
            chi_max: 1,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn matches_dense_circuit_on_short_chain() {
        let n = 6;
        let sched = QuenchSchedule::linear(0.5).unwrap();
        let cfg = TebdConfig {
            chi_max: 8,
            svd_eps: 0.0,
            ..Default::default()
        };
        let psi = plus_state(n);
        let dense0 = DenseState::from_mps(&psi).unwrap();
        let (out, trace) = evolve(psi, &sched, &ModelParams::open(n), &cfg).unwrap();
        let dense = dense_quench(&dense0, &sched, cfg.dt).unwrap();
        let f = DenseState::from_mps(&out).unwrap().fidelity(&dense);
        assert!(f > 1.0 - 1e-10, "fidelity {f}");
        assert_eq!(trace.times.len(), trace.g_values.len());
        assert_eq!(trace.times.len(), 126);
        assert!(trace.cumulative_truncation.windows(2).all(|w| w[0] <= w[1]));
        assert!(trace.max_norm_drift < 1e-10);
        assert_eq!(*trace.g_values.last().unwrap(), 0.0);
    }

    #[test]
    fn budget_violation_is_reported() {
        let n = 8;
        let sched = QuenchSchedule::linear(0.5).unwrap();
        let cfg = TebdConfig {
            chi_max: 2,
            svd_eps: 0.0,
            budget: 1e-9,
            ..Default::default()
        };
        let err = evolve(plus_state(n), &sched, &ModelParams::open(n), &cfg).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn rejects_mismatched_model() {
        let sched = QuenchSchedule::linear(0.5).unwrap();
        let err = evolve(plus_state(4), &sched, &ModelParams::open(6), &TebdConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn checkpoint_resume_reproduces_uninterrupted_run() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.ckpt");
        let n = 6;
        let sched = QuenchSchedule::linear(0.3).unwrap();
        let base = TebdConfig {
            chi_max: 8,
            svd_eps: 1e-12,
            ..Default::default()
        };
        let (full, _) = evolve(plus_state(n), &sched, &ModelParams::open(n), &base).unwrap();
        let cfg = TebdConfig {
            checkpoint_every: Some(20),
            checkpoint_path: Some(path.clone()),
            ..base.clone()
        };
        evolve(plus_state(n), &sched, &ModelParams::open(n), &cfg).unwrap();
        let (step, _) = read_checkpoint(&path).unwrap();
        assert_eq!(step, 60);
        let (resumed, trace) = resume(&path, &sched, &ModelParams::open(n), &base).unwrap();
        assert_eq!(trace.times.len(), 75 - 60 + 1);
        let z = pauli_z();
        let a = full.correlation_matrix(z.view(), z.view()).unwrap();
        let b = resumed.correlation_matrix(z.view(), z.view()).unwrap();
        assert!((&a - &b).iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-10);
        assert!((qfi_density(&full).unwrap() - qfi_density(&resumed).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn snapshots_are_recorded() {
        let n = 4;
        let sched = QuenchSchedule::linear(0.2).unwrap();
        let cfg = TebdConfig {
            record_every: Some(10),
            ..Default::default()
        };
        let (_, trace) = evolve(plus_state(n), &sched, &ModelParams::open(n), &cfg).unwrap();
        assert_eq!(trace.snapshots.len(), 5);
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time,g,cum_trunc,max_chi\n"));
        assert_eq!(text.lines().count(), trace.times.len() + 1);
    }
}
