//! Transverse-field Ising chain `H = -J Σ σᶻσᶻ - g Σ σˣ`: parameters, quench
//! schedules, single-particle spectrum and the second-order Trotter circuit.

use ndarray::{array, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermitian_expm_matrix;

/// Nearest-neighbour coupling. Every energy and time is measured in units of it.
pub const COUPLING_J: f64 = 1.0;
/// Reduced Planck constant.
pub const HBAR: f64 = 1.0;
/// Critical transverse field.
pub const G_CRITICAL: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Open chain, used by the MPS and state-vector engines.
    Open,
    /// Antiperiodic fermions (even parity sector), used by the free-fermion oracle.
    Antiperiodic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub boundary: Boundary,
}

impl ModelParams {
    pub fn open(n: usize) -> Self {
        Self {
            n,
            boundary: Boundary::Open,
        }
    }
}

pub fn pauli_x() -> Array2<C64> {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    array![[o, l], [l, o]]
}

pub fn pauli_y() -> Array2<C64> {
    let (o, i) = (C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    array![[o, -i], [i, o]]
}

pub fn pauli_z() -> Array2<C64> {
    let (o, l) = (C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    array![[l, o], [o, -l]]
}

pub fn identity2() -> Array2<C64> {
    Array2::eye(2)
}

/// Kronecker product; the first factor acts on the more significant index.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Time profile of the transverse field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum ScheduleShape {
    /// `g(t) = 1 - t/τ_Q`.
    Linear,
    /// `g(t) = 1 - sgn(t)|t/τ_Q|^α`.
    Power { alpha: f64 },
    /// `g(t) = g_start` for `t ∈ [0, duration]`.
    Constant { duration: f64 },
}

/// A quench of the transverse field from `g_start` to `g_end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuenchSchedule {
    #[serde(flatten)]
    pub shape: ScheduleShape,
    pub tau_q: f64,
    pub g_start: f64,
    pub g_end: f64,
}

impl QuenchSchedule {
    pub const DEFAULT_G_START: f64 = 5.0;
    pub const DEFAULT_G_END: f64 = 0.0;

    pub fn linear(tau_q: f64) -> Result<Self> {
        Self::new(ScheduleShape::Linear, tau_q, Self::DEFAULT_G_START, Self::DEFAULT_G_END)
    }

    pub fn power(alpha: f64, tau_q: f64) -> Result<Self> {
        Self::new(
            ScheduleShape::Power { alpha },
            tau_q,
            Self::DEFAULT_G_START,
            Self::DEFAULT_G_END,
        )
    }

    /// A frozen field `g` held for `duration`.
    pub fn constant(g: f64, duration: f64) -> Result<Self> {
        Self::new(ScheduleShape::Constant { duration }, 1.0, g, g)
    }

    pub fn new(shape: ScheduleShape, tau_q: f64, g_start: f64, g_end: f64) -> Result<Self> {
        if !(tau_q > 0.0) || !tau_q.is_finite() {
            return Err(Error::InvalidArgument(format!("tau_q must be positive, got {tau_q}")));
        }
        match shape {
            ScheduleShape::Linear | ScheduleShape::Power { .. } => {
                if let ScheduleShape::Power { alpha } = shape {
                    if !(alpha > 0.0) || !alpha.is_finite() {
                        return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
                    }
                }
                if !(g_start >= G_CRITICAL && g_end <= G_CRITICAL && g_start > g_end) {
                    return Err(Error::InvalidArgument(format!(
                        "quench must cross g = 1 downwards, got {g_start} -> {g_end}"
                    )));
                }
            }
            ScheduleShape::Constant { duration } => {
                if !(duration > 0.0) || g_start != g_end {
                    return Err(Error::InvalidArgument(
                        "constant schedule needs positive duration and g_start == g_end".into(),
                    ));
                }
            }
        }
        Ok(Self {
            shape,
            tau_q,
            g_start,
            g_end,
        })
    }

    /// Schedule exponent α (1 for linear and constant schedules).
    pub fn alpha(&self) -> f64 {
        match self.shape {
            ScheduleShape::Power { alpha } => alpha,
            _ => 1.0,
        }
    }

    pub fn t_start(&self) -> f64 {
        match self.shape {
            ScheduleShape::Linear => -(self.g_start - G_CRITICAL) * self.tau_q,
            ScheduleShape::Power { alpha } => -(self.g_start - G_CRITICAL).powf(1.0 / alpha) * self.tau_q,
            ScheduleShape::Constant { .. } => 0.0,
        }
    }

    pub fn t_end(&self) -> f64 {
        match self.shape {
            ScheduleShape::Linear => (G_CRITICAL - self.g_end) * self.tau_q,
            ScheduleShape::Power { alpha } => (G_CRITICAL - self.g_end).powf(1.0 / alpha) * self.tau_q,
            ScheduleShape::Constant { duration } => duration,
        }
    }

    pub fn duration(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// Transverse field at time `t`.
    pub fn field_at(&self, t: f64) -> Result<f64> {
        let (t0, t1) = (self.t_start(), self.t_end());
        let slack = 1e-12 * (t1 - t0).abs().max(1.0);
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::InvalidArgument(format!("t = {t} outside [{t0}, {t1}]")));
        }
        if t <= t0 {
            return Ok(self.g_start);
        }
        if t >= t1 {
            return Ok(self.g_end);
        }
        Ok(self.field_unchecked(t))
    }

    fn field_unchecked(&self, t: f64) -> f64 {
        match self.shape {
            ScheduleShape::Linear => G_CRITICAL - t / self.tau_q,
            ScheduleShape::Power { alpha } => {
                let x = t / self.tau_q;
                G_CRITICAL - x.signum() * x.abs().powf(alpha)
            }
            ScheduleShape::Constant { .. } => self.g_start,
        }
    }

    /// Uniform step grid: `⌈duration/dt⌉` steps of equal length `≤ dt`.
    pub fn time_grid(&self, dt: f64) -> Result<TimeGrid> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let total = self.duration();
        let steps = ((total / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(TimeGrid {
            t_start: self.t_start(),
            dt: total / steps as f64,
            steps,
        })
    }
}

/// Equally spaced Trotter steps covering a schedule window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Start time of step `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    /// Midpoint of step `i`, where the field is sampled.
    pub fn midpoint(&self, i: usize) -> f64 {
        self.t_start + (i as f64 + 0.5) * self.dt
    }
}

/// Positive branch `√((g − cos k)² + sin² k)` of the Bogoliubov spectrum.
///
/// The physical quasiparticle energy of the spin chain is twice this value.
pub fn spectrum_epsilon_k(g: f64, k: f64) -> f64 {
    ((g - k.cos()).powi(2) + k.sin().powi(2)).sqrt()
}

/// Antiperiodic momenta `±π(2m − 1)/N`, `m = 1..=N/2`, sorted ascending.
pub fn antiperiodic_momenta(n: usize) -> Vec<f64> {
    let half = n / 2;
    let mut ks: Vec<f64> = (1..=half)
        .map(|m| std::f64::consts::PI * (2 * m - 1) as f64 / n as f64)
        .collect();
    let neg: Vec<f64> = ks.iter().rev().map(|k| -k).collect();
    ks.splice(0..0, neg);
    ks
}

/// Share of the `-g σˣ` term that bond `bond` carries for each of its two
/// sites. Edge sites belong to a single bond and contribute fully.
pub fn field_weights(n: usize, bond: usize) -> (f64, f64) {
    let left = if bond == 0 { 1.0 } else { 0.5 };
    let right = if bond + 2 == n { 1.0 } else { 0.5 };
    (left, right)
}

/// Two-site term `-J σᶻσᶻ - g (w_l σˣ⊗1 + w_r 1⊗σˣ)`.
pub fn bond_hamiltonian(g: f64, weights: (f64, f64)) -> Array2<C64> {
    let (x, z, id) = (pauli_x(), pauli_z(), identity2());
    let zz = kron(&z, &z).mapv(|v| v * -COUPLING_J);
    let xl = kron(&x, &id).mapv(|v| v * (-g * weights.0));
    let xr = kron(&id, &x).mapv(|v| v * (-g * weights.1));
    zz + xl + xr
}

/// `exp(-i dt h_bond / ħ)` for one bond.
pub fn bond_gate(g: f64, weights: (f64, f64), dt: f64) -> Result<Array2<C64>> {
    hermitian_expm_matrix(bond_hamiltonian(g, weights).view(), C64::new(0.0, -dt / HBAR))
}

/// Gates applied simultaneously on disjoint bonds.
#[derive(Clone, Debug)]
pub struct GateLayer {
    pub gates: Vec<(usize, Array2<C64>)>,
}

/// One second-order Trotter step `e^{-iA dt/2} e^{-iB dt} e^{-iA dt/2}` with
/// `A` the even bonds and `B` the odd bonds.
#[derive(Clone, Debug)]
pub struct TrotterStep {
    pub layers: [GateLayer; 3],
}

/// Builds the gate layers of one Trotter step of length `dt` at field `g`.
pub fn trotter_step(n: usize, g: f64, dt: f64) -> Result<TrotterStep> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 sites, got {n}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut cache: Vec<((f64, f64), f64, Array2<C64>)> = Vec::new();
    let mut gate = |bond: usize, tau: f64| -> Result<Array2<C64>> {
        let w = field_weights(n, bond);
        if let Some((_, _, u)) = cache.iter().find(|(cw, ct, _)| *cw == w && *ct == tau) {
            return Ok(u.clone());
        }
        let u = bond_gate(g, w, tau)?;
        cache.push((w, tau, u.clone()));
        Ok(u)
    };
    let mut half_even = Vec::new();
    for b in (0..n - 1).step_by(2) {
        half_even.push((b, gate(b, dt / 2.0)?));
    }
    let mut full_odd = Vec::new();
    for b in (1..n - 1).step_by(2) {
        full_odd.push((b, gate(b, dt)?));
    }
    Ok(TrotterStep {
        layers: [
            GateLayer {
                gates: half_even.clone(),
            },
            GateLayer { gates: full_odd },
            GateLayer { gates: half_even },
        ],
    })
}

/// Dense open-chain Hamiltonian on `2^n` amplitudes (site 0 is the most
/// significant bit, `|0⟩ = |↑⟩`).
pub fn dense_hamiltonian(n: usize, g: f64) -> Array2<C64> {
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    for idx in 0..dim {
        let spin = |site: usize| if (idx >> (n - 1 - site)) & 1 == 0 { 1.0 } else { -1.0 };
        let diag: f64 = (0..n - 1).map(|s| -COUPLING_J * spin(s) * spin(s + 1)).sum();
        h[[idx, idx]] += diag;
        for site in 0..n {
            let flipped = idx ^ (1 << (n - 1 - site));
            h[[flipped, idx]] += -g;
        }
    }
    h
}
