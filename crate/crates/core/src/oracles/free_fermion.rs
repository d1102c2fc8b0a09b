//! Momentum-space dynamics of the Ising chain after Jordan-Wigner and
//! Fourier transformation: every mode pair `±k` evolves as an independent
//! two-level system, so defect densities follow from 2×2 ODEs.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{antiperiodic_momenta, ScheduleShape, QuenchSchedule, HBAR};

/// Amplitudes `(u_k, v_k)` of one Bogoliubov mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BdgModeState {
    pub k: f64,
    pub u: C64,
    pub v: C64,
}

impl BdgModeState {
    pub fn norm_sqr(&self) -> f64 {
        self.u.norm_sqr() + self.v.norm_sqr()
    }
}

/// The 2×2 Bogoliubov-de Gennes matrix `2[(g − cos k) τᶻ + sin k τˣ]` of the
/// spin chain `H = −Σ σᶻσᶻ − g Σ σˣ`, returned as `(diag, offdiag)`.
///
/// Its eigenvalues `±2ε_k` are the physical quasiparticle energies; the overall
/// factor 2 relative to [`crate::model::spectrum_epsilon_k`] is what makes the
/// Landau-Zener exponent come out as `2π τ_Q k²`.
pub fn bdg_matrix(g: f64, k: f64) -> (f64, f64) {
    (2.0 * (g - k.cos()), 2.0 * k.sin())
}

/// Positive- and negative-energy eigenvectors of `[[a, b], [b, −a]]`.
fn eigenvectors(a: f64, b: f64) -> ([f64; 2], [f64; 2]) {
    let e = (a * a + b * b).sqrt();
    let plus = if a >= 0.0 { [a + e, b] } else { [b, e - a] };
    let norm = (plus[0] * plus[0] + plus[1] * plus[1]).sqrt();
    let plus = if norm > 0.0 { [plus[0] / norm, plus[1] / norm] } else { [1.0, 0.0] };
    (plus, [-plus[1], plus[0]])
}

/// Options for the adaptive integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    /// Local error tolerance (absolute and relative) per accepted step.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 50_000_000,
        }
    }
}

/// Evolves mode `k` from the positive-energy eigenvector at `g_start`
/// through the whole schedule.
pub fn bdg_evolve_mode(k: f64, schedule: &QuenchSchedule, opts: OdeOptions) -> Result<BdgModeState> {
    let (a, b) = bdg_matrix(schedule.g_start, k);
    let (plus, _) = eigenvectors(a, b);
    let y0 = [plus[0], 0.0, plus[1], 0.0];
    let rhs = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let g = schedule.field_at(t).unwrap_or(if t < schedule.t_start() {
            schedule.g_start
        } else {
            schedule.g_end
        });
        let (d, o) = bdg_matrix(g, k);
        // i ħ d/dt (u, v) = [[d, o], [o, -d]] (u, v)
        let (ur, ui, vr, vi) = (y[0], y[1], y[2], y[3]);
        let hu = (d * ur + o * vr, d * ui + o * vi);
        let hv = (o * ur - d * vr, o * ui - d * vi);
        [hu.1 / HBAR, -hu.0 / HBAR, hv.1 / HBAR, -hv.0 / HBAR]
    };
    let y = dormand_prince(rhs, schedule.t_start(), schedule.t_end(), y0, opts)?;
    Ok(BdgModeState {
        k,
        u: C64::new(y[0], y[1]),
        v: C64::new(y[2], y[3]),
    })
}

/// Probability of ending in the negative-energy eigenvector of the final
/// BdG matrix, i.e. of having excited the quasiparticle pair `±k`.
pub fn excitation_probability(mode: &BdgModeState, g_end: f64) -> f64 {
    let (a, b) = bdg_matrix(g_end, mode.k);
    let (_, minus) = eigenvectors(a, b);
    let amp = mode.u * minus[0] + mode.v * minus[1];
    amp.norm_sqr() / mode.norm_sqr()
}

/// Excitation probability of mode `k` under `schedule`, from the ODE.
pub fn mode_excitation(k: f64, schedule: &QuenchSchedule, opts: OdeOptions) -> Result<f64> {
    let mode = bdg_evolve_mode(k, schedule, opts)?;
    Ok(excitation_probability(&mode, schedule.g_end))
}

/// Landau-Zener excitation probability `exp(−2π τ_Q k²/ħ)`.
pub fn lz_probability(k: f64, tau_q: f64) -> f64 {
    (-2.0 * std::f64::consts::PI * tau_q * k * k / HBAR).exp()
}

/// System size for the free-fermion defect density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainSize {
    Finite(usize),
    Thermodynamic,
}

/// Kink density after a quench, per site.
///
/// For a finite chain this is `(1/N) Σ_k p_k` over the antiperiodic grid
/// with each `p_k` from the ODE; in the thermodynamic limit of a linear
/// quench it is the Gaussian integral `(1/2π) √(ħ / (2 J τ_Q))`.
pub fn defect_density_ff(schedule: &QuenchSchedule, size: ChainSize, opts: OdeOptions) -> Result<f64> {
    match size {
        ChainSize::Thermodynamic => {
            if schedule.shape != ScheduleShape::Linear {
                return Err(Error::InvalidArgument(
                    "closed-form defect density is only available for linear quenches".into(),
                ));
            }
            Ok(thermodynamic_defect_density(schedule.tau_q))
        }
        ChainSize::Finite(n) => Ok(mode_sum(schedule, n, opts)?.0),
    }
}

pub fn thermodynamic_defect_density(tau_q: f64) -> f64 {
    (HBAR / (2.0 * crate::model::COUPLING_J * tau_q)).sqrt() / (2.0 * std::f64::consts::PI)
}

/// `(n_d, [(k, p_k)])` over the antiperiodic grid of an `n`-site chain.
///
/// Uses `p_{−k} = p_k` and sums in a fixed order.
pub fn mode_sum(schedule: &QuenchSchedule, n: usize, opts: OdeOptions) -> Result<(f64, Vec<(f64, f64)>)> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("need an even number of sites, got {n}")));
    }
    let positive: Vec<f64> = antiperiodic_momenta(n).into_iter().filter(|&k| k > 0.0).collect();
    let probs = positive
        .iter()
        .map(|&k| mode_excitation(k, schedule, opts).map(|p| (k, p)))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = probs.iter().map(|(_, p)| 2.0 * p).sum();
    Ok((total / n as f64, probs))
}

/// Dormand-Prince 5(4) with standard step-size control, specialised to
/// unit-norm states: each accepted step is renormalized.
fn dormand_prince<F>(f: F, t0: f64, t1: f64, y0: [f64; 4], opts: OdeOptions) -> Result<[f64; 4]>
where
    F: Fn(f64, &[f64; 4]) -> [f64; 4],
{
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // 5th-order weights are A[6]; error = 5th - 4th order
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    if t1 <= t0 {
        return Ok(y0);
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = ((t1 - t0) * 1e-3).min(1e-2);
    let mut k = [[0.0; 4]; 7];
    k[0] = f(t, &y);
    let mut steps = 0usize;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(Error::NumericalFailure(format!("ODE exceeded {} steps", opts.max_steps)));
        }
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                let a = A[s][j];
                if a != 0.0 {
                    for i in 0..4 {
                        ys[i] += h * a * kj[i];
                    }
                }
            }
            k[s] = f(t + C[s] * h, &ys);
        }
        let mut y_new = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            for i in 0..4 {
                y_new[i] += h * A[6][j] * kj[i];
            }
        }
        let mut err = 0.0_f64;
        for i in 0..4 {
            let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
            let scale = opts.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
            err = err.max((e / scale).abs());
        }
        if err <= 1.0 {
            t += h;
            // project back onto the unit sphere; the exact flow is unitary
            let norm = y_new.iter().map(|x| x * x).sum::<f64>().sqrt();
            y = y_new.map(|x| x / norm);
            k[0] = if norm == 1.0 { k[6] } else { f(t, &y) };
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if !y.iter().all(|x| x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite ODE state".into()));
        }
        if h < 1e-14 * t.abs().max(1.0) && t < t1 {
            return Err(Error::NumericalFailure(format!("step size underflow at t = {t}")));
        }
    }
    Ok(y)
}
