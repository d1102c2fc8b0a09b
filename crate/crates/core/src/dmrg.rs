//! Two-site DMRG for the open transverse-field Ising chain.
//!
//! The Hamiltonian is the bond-dimension-3 MPO
//!
//! ```text
//!       | I    0    0 |
//! W  =  | Z    0    0 |
//!       | -gX  -JZ  I |
//! ```
//!
//! with the left boundary selecting row 2 and the right boundary column 0.

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::lanczos_lowest;
use crate::model::{identity2, pauli_x, pauli_z, Boundary, ModelParams, COUPLING_J};
use crate::mps::{Mps, Truncation, PHYS_DIM};

const MPO_DIM: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct DmrgConfig {
    pub chi_max: usize,
    pub svd_eps: f64,
    pub max_sweeps: usize,
    /// Converged once a full sweep lowers the energy by less than this.
    pub energy_tol: f64,
    /// Residual tolerance of the local eigensolver.
    pub local_solver_tol: f64,
    pub seed: u64,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            chi_max: 100,
            svd_eps: 1e-12,
            max_sweeps: 20,
            energy_tol: 1e-10,
            local_solver_tol: 1e-10,
            seed: 0,
        }
    }
}

impl DmrgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chi_max < 2 {
            return Err(Error::InvalidArgument(format!("chi_max must be >= 2, got {}", self.chi_max)));
        }
        if !(self.svd_eps > 0.0 && self.energy_tol > 0.0 && self.local_solver_tol > 0.0) {
            return Err(Error::InvalidArgument("DMRG tolerances must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidArgument("max_sweeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Energy after each full (right then left) sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DmrgTrace {
    pub energies: Vec<f64>,
    /// Largest discarded weight of any two-site split in the final sweep.
    pub max_discarded: f64,
    pub max_bond_dim: usize,
}

/// MPO site tensor as a 3×3 grid of optional 2×2 operators.
struct Mpo {
    w: [[Option<Array2<C64>>; MPO_DIM]; MPO_DIM],
}

impl Mpo {
    fn tfim(g: f64) -> Self {
        let x = pauli_x();
        let z = pauli_z();
        let mut w: [[Option<Array2<C64>>; MPO_DIM]; MPO_DIM] = Default::default();
        w[0][0] = Some(identity2());
        w[1][0] = Some(z.clone());
        w[2][0] = Some(x.mapv(|v| v * -g));
        w[2][1] = Some(z.mapv(|v| v * -COUPLING_J));
        w[2][2] = Some(identity2());
        Self { w }
    }

    /// Two-site operators `Σ_n W[m][n] ⊗ W[n][p]`, flattened to 4×4.
    fn two_site(&self) -> Vec<(usize, usize, Array2<C64>)> {
        let mut out = Vec::new();
        for m in 0..MPO_DIM {
            for p in 0..MPO_DIM {
                let mut acc: Option<Array2<C64>> = None;
                for n in 0..MPO_DIM {
                    if let (Some(a), Some(b)) = (&self.w[m][n], &self.w[n][p]) {
                        let k = crate::model::kron(a, b);
                        acc = Some(match acc {
                            Some(s) => s + k,
                            None => k,
                        });
                    }
                }
                if let Some(op) = acc {
                    out.push((m, p, op));
                }
            }
        }
        out
    }
}

/// Environment: one `(χ_bra, χ_ket)` block per MPO index.
type Env = Vec<Array2<C64>>;

fn boundary_env(active: usize) -> Env {
    (0..MPO_DIM)
        .map(|m| {
            let v = if m == active { 1.0 } else { 0.0 };
            Array2::from_elem((1, 1), C64::new(v, 0.0))
        })
        .collect()
}

/// Applies a local operator on the physical leg of `t` shaped `(a, d, b)`.
fn apply_local(op: &Array2<C64>, t: &Array3<C64>) -> Array3<C64> {
    let (a, d, b) = t.dim();
    let mut out = Array3::<C64>::zeros((a, d, b));
    for s in 0..d {
        for sp in 0..d {
            let c = op[[s, sp]];
            if c != C64::new(0.0, 0.0) {
                out.index_axis_mut(Axis(1), s)
                    .scaled_add(c, &t.index_axis(Axis(1), sp));
            }
        }
    }
    out
}

/// Left environment of site `i + 1` from that of site `i`.
fn grow_left(env: &Env, a: &Array3<C64>, mpo: &Mpo) -> Env {
    let (dl, d, dr) = a.dim();
    let am = a.view().into_shape_with_order((dl, d * dr)).expect("standard layout");
    let x: Vec<Array3<C64>> = env
        .iter()
        .map(|l| l.dot(&am).into_shape_with_order((dl, d, dr)).expect("standard layout"))
        .collect();
    let abra = a
        .view()
        .into_shape_with_order((dl * d, dr))
        .expect("standard layout")
        .mapv(|z| z.conj());
    (0..MPO_DIM)
        .map(|n| {
            let mut y = Array3::<C64>::zeros((dl, d, dr));
            for m in 0..MPO_DIM {
                if let Some(op) = &mpo.w[m][n] {
                    y += &apply_local(op, &x[m]);
                }
            }
            let ym = y.into_shape_with_order((dl * d, dr)).expect("standard layout");
            abra.t().dot(&ym)
        })
        .collect()
}

/// Right environment of site `i − 1` from that of site `i`.
fn grow_right(env: &Env, b: &Array3<C64>, mpo: &Mpo) -> Env {
    let (dl, d, dr) = b.dim();
    let bm = b.view().into_shape_with_order((dl * d, dr)).expect("standard layout");
    // x[n][a', s', b] = Σ_b' B[a', s', b'] R_n[b, b']
    let x: Vec<Array3<C64>> = env
        .iter()
        .map(|r| bm.dot(&r.t()).into_shape_with_order((dl, d, dr)).expect("standard layout"))
        .collect();
    let bbra = b
        .view()
        .into_shape_with_order((dl, d * dr))
        .expect("standard layout")
        .mapv(|z| z.conj());
    (0..MPO_DIM)
        .map(|m| {
            let mut y = Array3::<C64>::zeros((dl, d, dr));
            for n in 0..MPO_DIM {
                if let Some(op) = &mpo.w[m][n] {
                    y += &apply_local(op, &x[n]);
                }
            }
            let ym = y.into_shape_with_order((dl, d * dr)).expect("standard layout");
            bbra.dot(&ym.t())
        })
        .collect()
}

/// `H_eff θ` for a two-site tensor `θ` shaped `(Dl, 4, Dr)`.
fn apply_effective(left: &Env, right: &Env, ops: &[(usize, usize, Array2<C64>)], theta: &Array3<C64>) -> Array3<C64> {
    let (dl, d2, dr) = theta.dim();
    let tm = theta.view().into_shape_with_order((dl, d2 * dr)).expect("standard layout");
    let t1: Vec<Array3<C64>> = left
        .iter()
        .map(|l| l.dot(&tm).into_shape_with_order((dl, d2, dr)).expect("standard layout"))
        .collect();
    let mut out = Array2::<C64>::zeros((dl * d2, dr));
    for p in 0..MPO_DIM {
        let mut t2 = Array3::<C64>::zeros((dl, d2, dr));
        let mut any = false;
        for (m, pp, op) in ops {
            if *pp == p {
                t2 += &apply_local(op, &t1[*m]);
                any = true;
            }
        }
        if any {
            let t2m = t2.into_shape_with_order((dl * d2, dr)).expect("standard layout");
            out += &t2m.dot(&right[p].t());
        }
    }
    out.into_shape_with_order((dl, d2, dr)).expect("standard layout")
}

/// Variational ground state of `H(g)` on an open chain.
///
/// Starts from a seeded random MPS of bond dimension `min(8, chi_max)` and
/// alternates left-to-right and right-to-left two-site sweeps until the
/// energy changes by less than `energy_tol` between sweeps. The returned
/// state is normalized with its orthogonality center on site 0.
pub fn ground_state(params: &ModelParams, g: f64, cfg: &DmrgConfig) -> Result<(Mps, f64, DmrgTrace)> {
    cfg.validate()?;
    if params.boundary != Boundary::Open {
        return Err(Error::InvalidArgument("DMRG runs on open chains only".into()));
    }
    let n = params.n;
    if n < 4 {
        return Err(Error::InvalidArgument(format!("DMRG needs N >= 4, got {n}")));
    }
    if !g.is_finite() {
        return Err(Error::InvalidArgument(format!("field must be finite, got {g}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut psi = Mps::random(n, cfg.chi_max.min(8), &mut rng)?;
    psi.canonicalize(0)?;

    let mpo = Mpo::tfim(g);
    let ops = mpo.two_site();
    let trunc = Truncation::new(cfg.chi_max, cfg.svd_eps);

    // left[i]: sites 0..i; right[i]: sites i+1..n
    let mut left: Vec<Env> = vec![Vec::new(); n];
    let mut right: Vec<Env> = vec![Vec::new(); n];
    left[0] = boundary_env(MPO_DIM - 1);
    right[n - 1] = boundary_env(0);
    for i in (1..n).rev() {
        right[i - 1] = grow_right(&right[i], &psi.tensors()[i], &mpo);
    }

    let mut trace = DmrgTrace::default();
    let mut energy = f64::INFINITY;
    for _sweep in 0..cfg.max_sweeps {
        let mut max_discarded: f64 = 0.0;
        for bond in 0..n - 1 {
            let (e, w) = optimize_bond(&mut psi, bond, &left[bond], &right[bond + 1], &ops, trunc, cfg, true)?;
            energy = e;
            max_discarded = max_discarded.max(w);
            left[bond + 1] = grow_left(&left[bond], &psi.tensors()[bond], &mpo);
        }
        for bond in (0..n - 1).rev() {
            let (e, w) = optimize_bond(&mut psi, bond, &left[bond], &right[bond + 1], &ops, trunc, cfg, false)?;
            energy = e;
            max_discarded = max_discarded.max(w);
            right[bond] = grow_right(&right[bond + 1], &psi.tensors()[bond + 1], &mpo);
        }
        let converged = trace
            .energies
            .last()
            .is_some_and(|&prev| (prev - energy).abs() < cfg.energy_tol);
        trace.energies.push(energy);
        trace.max_discarded = max_discarded;
        if converged {
            let tensors = psi.tensors().to_vec();
            let mut out = Mps::from_tensors(tensors, Some(0))?;
            out.normalize()?;
            trace.max_bond_dim = out.max_bond_dim();
            return Ok((out, energy, trace));
        }
    }
    Err(Error::Convergence {
        sweeps: cfg.max_sweeps,
        energies: trace.energies,
    })
}

#[allow(clippy::too_many_arguments)]
fn optimize_bond(
    psi: &mut Mps,
    bond: usize,
    left: &Env,
    right: &Env,
    ops: &[(usize, usize, Array2<C64>)],
    trunc: Truncation,
    cfg: &DmrgConfig,
    moving_right: bool,
) -> Result<(f64, f64)> {
    let theta = psi.two_site_theta(bond);
    let shape = theta.dim();
    let len = shape.0 * shape.1 * shape.2;
    let start = theta.into_shape_with_order(len).expect("standard layout");
    let apply = |v: &ndarray::Array1<C64>| {
        let t = v.view().into_shape_with_order(shape).expect("standard layout").to_owned();
        apply_effective(left, right, ops, &t)
            .into_shape_with_order(len)
            .expect("standard layout")
    };
    let res = lanczos_lowest(apply, start, 24, cfg.local_solver_tol, 50)?;
    let theta = res.vector.into_shape_with_order(shape).expect("standard layout");
    let rep = psi.split_theta(theta, bond, trunc, moving_right)?;
    debug_assert_eq!(PHYS_DIM * PHYS_DIM, shape.1);
    Ok((res.value, rep.discarded_weight))
}
