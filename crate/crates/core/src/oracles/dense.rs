//! Exact state-vector engine for short chains.
//!
//! Amplitudes are indexed with site 0 as the most significant bit and
//! `|0⟩ = |↑⟩`, the same convention as [`Mps::to_dense`].

use ndarray::{Array1, Array2};
use ndarray_linalg::{Cholesky, Eigh, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{lanczos_lowest, unitarity_defect};
use crate::model::{trotter_step, Boundary, ModelParams, QuenchSchedule, TrotterStep, COUPLING_J};
use crate::mps::Mps;
use crate::observables::{record_from_correlations, ObservableRecord, RunMeta};

/// Largest chain the dense engine accepts.
pub const MAX_DENSE_SITES: usize = 12;

/// Sector dimension above which the ground-state solver switches from a
/// full dense diagonalization to Lanczos plus a Cholesky certificate.
const FULL_EIGH_LIMIT: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    n: usize,
    amps: Array1<C64>,
}

fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_DENSE_SITES {
        return Err(Error::Capacity {
            sites: n,
            max: MAX_DENSE_SITES,
        });
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 sites, got {n}")));
    }
    Ok(())
}

impl DenseState {
    pub fn new(n: usize, amps: Array1<C64>) -> Result<Self> {
        check_capacity(n)?;
        if amps.len() != 1 << n {
            return Err(Error::InvalidArgument(format!("expected {} amplitudes, got {}", 1 << n, amps.len())));
        }
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("state must be normalized, norm^2 = {norm}")));
        }
        Ok(Self { n, amps })
    }

    pub fn product_state(n: usize, local: [C64; 2]) -> Result<Self> {
        check_capacity(n)?;
        let amps = Array1::from_shape_fn(1 << n, |idx| {
            (0..n).fold(C64::new(1.0, 0.0), |acc, site| acc * local[(idx >> (n - 1 - site)) & 1])
        });
        Self::new(n, amps)
    }

    pub fn from_mps(psi: &Mps) -> Result<Self> {
        check_capacity(psi.len())?;
        let v = psi.to_dense()?;
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        Self::new(psi.len(), v.mapv(|z| z / norm))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &DenseState) -> f64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }

    /// Applies a 4×4 gate to sites `bond`, `bond + 1`.
    pub fn apply_two_site_gate(&mut self, gate: &Array2<C64>, bond: usize) -> Result<()> {
        if bond + 1 >= self.n {
            return Err(Error::InvalidArgument(format!("bond {bond} out of range")));
        }
        if gate.dim() != (4, 4) {
            return Err(Error::InvalidArgument("gate must be 4x4".into()));
        }
        let shift = self.n - bond - 2;
        let mask = !(3usize << shift);
        let mut out = Array1::<C64>::zeros(self.amps.len());
        for (idx, &a) in self.amps.iter().enumerate() {
            if a == C64::new(0.0, 0.0) {
                continue;
            }
            let pair = (idx >> shift) & 3;
            let base = idx & mask;
            for o in 0..4 {
                out[base | (o << shift)] += gate[[o, pair]] * a;
            }
        }
        self.amps = out;
        Ok(())
    }

    /// Applies one Trotter step, layer by layer.
    pub fn apply_step(&mut self, step: &TrotterStep) -> Result<()> {
        for layer in &step.layers {
            for (bond, gate) in &layer.gates {
                self.apply_two_site_gate(gate, *bond)?;
            }
        }
        Ok(())
    }

    fn spin(&self, idx: usize, site: usize) -> f64 {
        if (idx >> (self.n - 1 - site)) & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `⟨σᶻ_m σᶻ_n⟩` for all pairs.
    pub fn zz_matrix(&self) -> Array2<f64> {
        let n = self.n;
        let mut out = Array2::<f64>::zeros((n, n));
        for (idx, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let spins: Vec<f64> = (0..n).map(|s| self.spin(idx, s)).collect();
            for m in 0..n {
                for k in 0..n {
                    out[[m, k]] += p * spins[m] * spins[k];
                }
            }
        }
        out
    }

    /// `⟨σᶻ_n⟩` for every site.
    pub fn z_profile(&self) -> Vec<f64> {
        (0..self.n)
            .map(|s| {
                self.amps
                    .iter()
                    .enumerate()
                    .map(|(idx, a)| a.norm_sqr() * self.spin(idx, s))
                    .sum()
            })
            .collect()
    }

    /// `⟨σˣ_n⟩` for every site.
    pub fn x_profile(&self) -> Vec<f64> {
        (0..self.n)
            .map(|s| {
                let bit = 1 << (self.n - 1 - s);
                self.amps
                    .iter()
                    .enumerate()
                    .map(|(idx, a)| (a.conj() * self.amps[idx ^ bit]).re)
                    .sum()
            })
            .collect()
    }

    /// `⟨H(g)⟩` for the open chain.
    pub fn energy(&self, g: f64) -> f64 {
        let zz = self.zz_matrix();
        let x: f64 = self.x_profile().iter().sum();
        -COUPLING_J * (0..self.n - 1).map(|i| zz[[i, i + 1]]).sum::<f64>() - g * x
    }

    pub fn record(&self, meta: RunMeta) -> ObservableRecord {
        record_from_correlations(&self.zz_matrix(), &self.z_profile(), meta, 0.0)
    }
}

/// Applies a sequence of Trotter steps exactly.
pub fn dense_evolve<'a>(initial: &DenseState, steps: impl IntoIterator<Item = &'a TrotterStep>) -> Result<DenseState> {
    let mut psi = initial.clone();
    for step in steps {
        for layer in &step.layers {
            for (_, gate) in &layer.gates {
                if unitarity_defect(gate.view()) > 1e-10 {
                    return Err(Error::InvalidInput("gate is not unitary".into()));
                }
            }
        }
        psi.apply_step(step)?;
    }
    Ok(psi)
}

/// Runs the quench circuit of the MPS engine (same step grid, fields
/// sampled at step midpoints, same gate layers) on a dense vector.
pub fn dense_quench(initial: &DenseState, schedule: &QuenchSchedule, dt: f64) -> Result<DenseState> {
    let grid = schedule.time_grid(dt)?;
    let mut psi = initial.clone();
    for i in 0..grid.steps {
        let g = schedule.field_at(grid.midpoint(i))?;
        psi.apply_step(&trotter_step(psi.n, g, grid.dt)?)?;
    }
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NumericalFailure(format!("dense evolution lost norm: {norm}")));
    }
    Ok(psi)
}

/// Lowest eigenpair of the open-chain Hamiltonian.
///
/// The Hamiltonian commutes with `Π σˣ`, so it is built as two dense
/// blocks in the `σˣ` eigenbasis (even and odd numbers of `|−⟩`). Blocks
/// of dimension up to 1024 are diagonalized in full; larger ones use Lanczos
/// on the dense block, and a Cholesky factorization of `H − (E − δ)` then
/// certifies that no eigenvalue lies below `E − δ`.
pub fn dense_ground_state(params: &ModelParams, g: f64) -> Result<(DenseState, f64)> {
    if params.boundary != Boundary::Open {
        return Err(Error::InvalidArgument("dense engine supports open chains only".into()));
    }
    let n = params.n;
    check_capacity(n)?;
    let mut best: Option<(f64, Vec<usize>, Array1<f64>)> = None;
    for parity in [0usize, 1] {
        let states: Vec<usize> = (0..1usize << n).filter(|s| s.count_ones() as usize % 2 == parity).collect();
        let h = sector_hamiltonian(n, g, &states);
        let (e, v) = lowest_eigenpair(&h)?;
        if best.as_ref().is_none_or(|(eb, _, _)| e < *eb - 1e-12) {
            best = Some((e, states, v));
        }
    }
    let (energy, states, v) = best.expect("two sectors");

    // back to the σᶻ basis: a Hadamard on every site
    let mut amps = Array1::<C64>::zeros(1 << n);
    for (&s, &c) in states.iter().zip(v.iter()) {
        amps[s] = C64::new(c, 0.0);
    }
    walsh_hadamard(&mut amps, n);
    Ok((DenseState::new(n, amps)?, energy))
}

/// `H` restricted to `states` in the `σˣ` basis (bit 1 = `|−⟩`).
fn sector_hamiltonian(n: usize, g: f64, states: &[usize]) -> Array2<f64> {
    let index: std::collections::HashMap<usize, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let dim = states.len();
    let mut h = Array2::<f64>::zeros((dim, dim));
    for (i, &s) in states.iter().enumerate() {
        let minus = s.count_ones() as f64;
        h[[i, i]] = -g * (n as f64 - 2.0 * minus);
        for b in 0..n - 1 {
            let t = s ^ (0b11 << (n - 2 - b));
            h[[index[&t], i]] += -COUPLING_J;
        }
    }
    h
}

/// Lowest eigenpair of a real symmetric block.
///
/// All factorizations run on the complex copy: the real double-precision
/// kernels of some OpenBLAS builds return wrong products beyond a few hundred
/// rows on AVX-512 hardware, while the complex ones are unaffected.
fn lowest_eigenpair(h: &Array2<f64>) -> Result<(f64, Array1<f64>)> {
    let dim = h.nrows();
    let hc = h.mapv(|x| C64::new(x, 0.0));
    let (value, vector) = if dim <= FULL_EIGH_LIMIT {
        let (vals, vecs) = hc.eigh(UPLO::Upper)?;
        (vals[0], vecs.column(0).to_owned())
    } else {
        let start = Array1::from_shape_fn(dim, |i| C64::new(1.0 + ((i * 7919) % 101) as f64 * 1e-3, 0.0));
        let r = lanczos_lowest(|v| hc.dot(v), start, 60, 1e-11, 500)?;
        if r.residual > 1e-9 {
            return Err(Error::Convergence {
                sweeps: r.matvecs,
                energies: vec![r.value],
            });
        }
        // no eigenvalue below value - delta  <=>  H - (value - delta) I is positive definite
        let delta = 1e-9;
        let mut shifted = hc.clone();
        for i in 0..dim {
            shifted[[i, i]] -= C64::new(r.value - delta, 0.0);
        }
        shifted
            .cholesky(UPLO::Upper)
            .map_err(|_| Error::NumericalFailure("Lanczos converged to an excited state".into()))?;
        (r.value, r.vector)
    };
    // the block is real, so the phase-fixed eigenvector is too
    let phase = vector.iter().max_by(|a, b| a.norm().total_cmp(&b.norm())).copied().unwrap();
    let phase = phase / phase.norm();
    let v = vector.mapv(|z| (z / phase).re);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((value, v / norm))
}

/// In-place `H^{⊗n}` with `H = [[1, 1], [1, -1]]/√2`.
fn walsh_hadamard(v: &mut Array1<C64>, n: usize) {
    let f = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = 1;
    while h < 1 << n {
        for block in (0..1 << n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = (a + b) * f;
                v[i + h] = (a - b) * f;
            }
        }
        h *= 2;
    }
}
