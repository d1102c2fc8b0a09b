//! Open-boundary matrix product states.
//!
//! Site tensors have shape `(left bond, physical = 2, right bond)` and the
//! local basis is `|0⟩ = |↑⟩`, `|1⟩ = |↓⟩` (σᶻ eigenstates). Sites are indexed
//! from 0; bond `b` joins sites `b` and `b + 1`.
//!
//! The state keeps track of an orthogonality center. When it is `Some(c)`,
//! every tensor left of `c` is a left isometry and every tensor right of `c`
//! is a right isometry, so the norm and all local quantities can be read off
//! the center tensor.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use ndarray_linalg::QR;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{conj_t, hermiticity_defect, standard, svd_full, svd_truncated_matrix, unitarity_defect};

/// Physical dimension of a spin-1/2 site.
pub const PHYS_DIM: usize = 2;

/// Largest chain that may be densified.
pub const MAX_DENSE_SITES: usize = 24;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    tensors: Vec<Array3<C64>>,
    center: Option<usize>,
    truncation_error: f64,
}

/// Truncation policy for two-site updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub chi_max: usize,
    pub eps: f64,
}

impl Truncation {
    pub fn new(chi_max: usize, eps: f64) -> Self {
        Self { chi_max, eps }
    }

    /// No truncation beyond the numerical noise floor.
    pub fn exact() -> Self {
        Self {
            chi_max: usize::MAX,
            eps: 0.0,
        }
    }
}

/// Outcome of a single two-site update.
#[derive(Clone, Copy, Debug)]
pub struct GateReport {
    pub discarded_weight: f64,
    pub bond_dim: usize,
    /// Squared norm right after the gate, before truncation and renormalization.
    pub norm_before_truncation: f64,
    /// Whether `chi_max` (rather than `eps`) decided the kept rank.
    pub chi_limited: bool,
}

impl Mps {
    /// Product state with every site in `local`.
    pub fn product_state(n: usize, local: [C64; 2]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one site".into()));
        }
        let norm = local[0].norm_sqr() + local[1].norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "local state must be normalized, |v|^2 = {norm}"
            )));
        }
        let mut t = Array3::zeros((1, PHYS_DIM, 1));
        t[[0, 0, 0]] = local[0];
        t[[0, 1, 0]] = local[1];
        Ok(Self {
            tensors: vec![t; n],
            center: Some(0),
            truncation_error: 0.0,
        })
    }

    /// Product state from a list of local states, one per site.
    pub fn product_of(locals: &[[C64; 2]]) -> Result<Self> {
        let mut psi = Self::product_state(locals.len(), [ONE, ZERO])?;
        for (t, v) in psi.tensors.iter_mut().zip(locals) {
            let norm = v[0].norm_sqr() + v[1].norm_sqr();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("local states must be normalized".into()));
            }
            t[[0, 0, 0]] = v[0];
            t[[0, 1, 0]] = v[1];
        }
        Ok(psi)
    }

    /// `(|↑…↑⟩ + |↓…↓⟩)/√2` with bond dimension 2.
    pub fn ghz_state(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("GHZ state needs N >= 2, got {n}")));
        }
        let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut tensors = Vec::with_capacity(n);
        let mut first = Array3::zeros((1, 2, 2));
        first[[0, 0, 0]] = amp;
        first[[0, 1, 1]] = amp;
        tensors.push(first);
        for _ in 1..n - 1 {
            let mut t = Array3::zeros((2, 2, 2));
            t[[0, 0, 0]] = ONE;
            t[[1, 1, 1]] = ONE;
            tensors.push(t);
        }
        let mut last = Array3::zeros((2, 2, 1));
        last[[0, 0, 0]] = ONE;
        last[[1, 1, 0]] = ONE;
        tensors.push(last);
        Ok(Self {
            tensors,
            center: Some(0),
            truncation_error: 0.0,
        })
    }

    /// Random normalized state with bond dimensions `min(chi, 2^distance to edge)`.
    pub fn random<R: Rng + ?Sized>(n: usize, chi: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || chi == 0 {
            return Err(Error::InvalidArgument("need n >= 1 and chi >= 1".into()));
        }
        let bond = |b: usize| -> usize {
            // bond b sits to the right of site b - 1 (b = 0 and b = n are edges)
            let edge = b.min(n - b);
            if edge >= 20 {
                chi
            } else {
                chi.min(1 << edge)
            }
        };
        let tensors = (0..n)
            .map(|i| {
                Array3::from_shape_fn((bond(i), PHYS_DIM, bond(i + 1)), |_| {
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                })
            })
            .collect();
        let mut psi = Self {
            tensors,
            center: None,
            truncation_error: 0.0,
        };
        psi.canonicalize(0)?;
        psi.normalize()?;
        Ok(psi)
    }

    /// Exact MPS of a dense state vector (site 0 = most significant bit).
    pub fn from_dense(amplitudes: &[C64]) -> Result<Self> {
        let n = amplitudes.len().trailing_zeros() as usize;
        if amplitudes.len() != 1 << n || n == 0 {
            return Err(Error::InvalidArgument("length must be a power of two >= 2".into()));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("state vector has zero or non-finite norm".into()));
        }
        let mut tensors = Vec::with_capacity(n);
        let mut rest = Array2::from_shape_vec((1, amplitudes.len()), amplitudes.iter().map(|z| z / norm).collect())
            .expect("shape matches");
        for _ in 0..n - 1 {
            let (dl, cols) = rest.dim();
            let m = rest
                .into_shape_with_order((dl * PHYS_DIM, cols / PHYS_DIM))
                .expect("standard layout");
            let r = svd_truncated_matrix(m.view(), usize::MAX, 0.0)?;
            let k = r.rank();
            tensors.push(r.u.into_shape_with_order((dl, PHYS_DIM, k)).expect("standard layout"));
            let mut sv = r.vh;
            for (mut row, &sv_i) in sv.axis_iter_mut(Axis(0)).zip(r.s.iter()) {
                row.mapv_inplace(|z| z * sv_i);
            }
            rest = sv;
        }
        let (dl, _) = rest.dim();
        tensors.push(rest.into_shape_with_order((dl, PHYS_DIM, 1)).expect("standard layout"));
        Ok(Self {
            tensors,
            center: Some(n - 1),
            truncation_error: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn tensors(&self) -> &[Array3<C64>] {
        &self.tensors
    }

    pub fn center(&self) -> Option<usize> {
        self.center
    }

    /// Sum of discarded weights over all truncations applied so far.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn add_truncation_error(&mut self, w: f64) {
        self.truncation_error += w;
    }

    /// Dimensions of the `N - 1` internal bonds.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[..self.len() - 1].iter().map(|t| t.dim().2).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Replaces the tensors wholesale; used by solvers that build states
    /// site by site. Checks bond consistency.
    pub fn from_tensors(tensors: Vec<Array3<C64>>, center: Option<usize>) -> Result<Self> {
        let psi = Self {
            tensors,
            center,
            truncation_error: 0.0,
        };
        psi.check_shapes()?;
        Ok(psi)
    }

    fn check_shapes(&self) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty MPS".into()));
        }
        if self.tensors[0].dim().0 != 1 || self.tensors[n - 1].dim().2 != 1 {
            return Err(Error::InvalidArgument("boundary bonds must have dimension 1".into()));
        }
        for (i, t) in self.tensors.iter().enumerate() {
            if t.dim().1 != PHYS_DIM {
                return Err(Error::InvalidArgument(format!("site {i} has physical dim {}", t.dim().1)));
            }
            if i + 1 < n && t.dim().2 != self.tensors[i + 1].dim().0 {
                return Err(Error::InvalidArgument(format!("bond mismatch between sites {i} and {}", i + 1)));
            }
        }
        if let Some(c) = self.center {
            if c >= n {
                return Err(Error::InvalidArgument(format!("center {c} out of range")));
            }
        }
        Ok(())
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "site {site} out of range for {} sites",
                self.len()
            )));
        }
        Ok(())
    }

    // ---- canonical form -------------------------------------------------

    /// Brings the state into mixed canonical form with center `target`.
    pub fn canonicalize(&mut self, target: usize) -> Result<()> {
        self.check_site(target)?;
        let n = self.len();
        match self.center {
            None => {
                for site in (1..n).rev() {
                    self.shift_left(site)?;
                }
                self.center = Some(0);
                for site in 0..target {
                    self.shift_right(site)?;
                }
            }
            Some(c) if c <= target => {
                for site in c..target {
                    self.shift_right(site)?;
                }
            }
            Some(c) => {
                for site in (target + 1..=c).rev() {
                    self.shift_left(site)?;
                }
            }
        }
        self.center = Some(target);
        Ok(())
    }

    /// Forgets the canonical center; the next canonicalization starts from scratch.
    pub fn invalidate_center(&mut self) {
        self.center = None;
    }

    /// QR-factors site `site` and pushes R into `site + 1`.
    fn shift_right(&mut self, site: usize) -> Result<()> {
        let (dl, d, dr) = self.tensors[site].dim();
        let m = self.tensors[site]
            .view()
            .into_shape_with_order((dl * d, dr))
            .expect("standard layout")
            .to_owned();
        let (q, r) = m.qr()?;
        let (q, r) = (standard(q), standard(r));
        let k = q.ncols();
        self.tensors[site] = q.into_shape_with_order((dl, d, k)).expect("standard layout");
        let next = &self.tensors[site + 1];
        let (_, d2, dr2) = next.dim();
        let nm = next.view().into_shape_with_order((dr, d2 * dr2)).expect("standard layout");
        self.tensors[site + 1] = r.dot(&nm).into_shape_with_order((k, d2, dr2)).expect("standard layout");
        Ok(())
    }

    /// LQ-factors site `site` and pushes L into `site - 1`.
    fn shift_left(&mut self, site: usize) -> Result<()> {
        let (dl, d, dr) = self.tensors[site].dim();
        let m = self.tensors[site]
            .view()
            .into_shape_with_order((dl, d * dr))
            .expect("standard layout")
            .to_owned();
        let (q, r) = conj_t(m.view()).qr()?;
        let (q, r) = (standard(q), standard(r));
        let k = q.ncols();
        // m = r^† q^†
        self.tensors[site] = conj_t(q.view()).into_shape_with_order((k, d, dr)).expect("standard layout");
        let prev = &self.tensors[site - 1];
        let (dl0, d0, _) = prev.dim();
        let pm = prev.view().into_shape_with_order((dl0 * d0, dl)).expect("standard layout");
        self.tensors[site - 1] = pm
            .dot(&conj_t(r.view()))
            .into_shape_with_order((dl0, d0, k))
            .expect("standard layout");
        Ok(())
    }

    /// Largest deviation of any tensor from the isometry condition implied
    /// by the current center.
    pub fn canonical_defect(&self) -> f64 {
        let Some(c) = self.center else {
            return f64::INFINITY;
        };
        let mut worst = 0.0_f64;
        for (i, t) in self.tensors.iter().enumerate() {
            let (dl, d, dr) = t.dim();
            if i < c {
                let m = t.view().into_shape_with_order((dl * d, dr)).expect("standard layout");
                worst = worst.max(unitarity_defect(m));
            } else if i > c {
                let m = t.view().into_shape_with_order((dl, d * dr)).expect("standard layout");
                worst = worst.max(unitarity_defect(conj_t(m).view()));
            }
        }
        worst
    }

    // ---- norms and expectation values -----------------------------------

    /// `⟨ψ|ψ⟩` by a full transfer-matrix contraction.
    pub fn norm_sqr(&self) -> f64 {
        let mut env = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            env = transfer(&env, t, None);
        }
        env[[0, 0]].re
    }

    /// Rescales the state to unit norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let norm2 = match self.center {
            Some(c) => self.tensors[c].iter().map(|z| z.norm_sqr()).sum(),
            None => self.norm_sqr(),
        };
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::NumericalFailure(format!("cannot normalize state with norm^2 = {norm2}")));
        }
        let f = 1.0 / norm2.sqrt();
        let site = self.center.unwrap_or(0);
        self.tensors[site].mapv_inplace(|z| z * f);
        Ok(norm2)
    }

    /// `⟨ψ|op_site|ψ⟩ / ⟨ψ|ψ⟩` for a Hermitian single-site operator.
    pub fn expectation_one_site(&self, op: ArrayView2<'_, C64>, site: usize) -> Result<f64> {
        self.check_site(site)?;
        check_local_op(op, true)?;
        let mut env = Array2::from_elem((1, 1), ONE);
        for (i, t) in self.tensors.iter().enumerate() {
            env = transfer(&env, t, (i == site).then_some(op));
        }
        Ok(env[[0, 0]].re / self.norm_sqr())
    }

    /// `⟨ψ| A_m B_n |ψ⟩ / ⟨ψ|ψ⟩`, real part. For `m == n` the product `A·B`
    /// acts on that site.
    ///
    /// Evaluated by a single left-to-right transfer contraction, independent
    /// of the canonical form.
    pub fn correlation_two_site(
        &self,
        op_a: ArrayView2<'_, C64>,
        op_b: ArrayView2<'_, C64>,
        m: usize,
        n: usize,
    ) -> Result<f64> {
        Ok(self.correlation_two_site_complex(op_a, op_b, m, n)?.re)
    }

    pub fn correlation_two_site_complex(
        &self,
        op_a: ArrayView2<'_, C64>,
        op_b: ArrayView2<'_, C64>,
        m: usize,
        n: usize,
    ) -> Result<C64> {
        self.check_site(m)?;
        self.check_site(n)?;
        check_local_op(op_a, false)?;
        check_local_op(op_b, false)?;
        let same = op_a.dot(&op_b);
        let mut env = Array2::from_elem((1, 1), ONE);
        for (i, t) in self.tensors.iter().enumerate() {
            let op = if i == m && i == n {
                Some(same.view())
            } else if i == m {
                Some(op_a)
            } else if i == n {
                Some(op_b)
            } else {
                None
            };
            env = transfer(&env, t, op);
        }
        Ok(env[[0, 0]] / self.norm_sqr())
    }

    /// All `⟨A_m B_n⟩` for a Hermitian pair of operators, as a real matrix.
    ///
    /// Uses one canonical sweep: with the center at `m` the left environment
    /// is the identity, and a single right-moving transfer from `m` yields
    /// every `n > m`.
    pub fn correlation_matrix(&self, op_a: ArrayView2<'_, C64>, op_b: ArrayView2<'_, C64>) -> Result<Array2<f64>> {
        check_local_op(op_a, true)?;
        check_local_op(op_b, true)?;
        let n = self.len();
        let mut psi = self.clone();
        psi.canonicalize(0)?;
        psi.normalize()?;
        let symmetric = op_a == op_b;
        let ab = op_a.dot(&op_b);
        let mut out = Array2::<f64>::zeros((n, n));
        for m in 0..n {
            if m > 0 {
                psi.shift_right(m - 1)?;
                psi.center = Some(m);
            }
            let center = &psi.tensors[m];
            let (dl, _, _) = center.dim();
            let ident = Array2::<C64>::eye(dl);
            out[[m, m]] = trace(&transfer(&ident, center, Some(ab.view()))).re;

            let mut env_a = transfer(&ident, center, Some(op_a));
            let mut env_b = (!symmetric).then(|| transfer(&ident, center, Some(op_b)));
            for k in m + 1..n {
                let t = &psi.tensors[k];
                out[[m, k]] = trace(&transfer(&env_a, t, Some(op_b))).re;
                match env_b.as_mut() {
                    Some(eb) => {
                        out[[k, m]] = trace(&transfer(eb, t, Some(op_a))).re;
                        *eb = transfer(eb, t, None);
                    }
                    None => out[[k, m]] = out[[m, k]],
                }
                env_a = transfer(&env_a, t, None);
            }
        }
        Ok(out)
    }

    /// Site-resolved `⟨op_n⟩` for every site from one canonical sweep.
    pub fn expectation_profile(&self, op: ArrayView2<'_, C64>) -> Result<Vec<f64>> {
        check_local_op(op, true)?;
        let mut psi = self.clone();
        psi.canonicalize(0)?;
        psi.normalize()?;
        let mut out = Vec::with_capacity(self.len());
        for m in 0..self.len() {
            if m > 0 {
                psi.shift_right(m - 1)?;
                psi.center = Some(m);
            }
            let t = &psi.tensors[m];
            let ident = Array2::<C64>::eye(t.dim().0);
            out.push(trace(&transfer(&ident, t, Some(op))).re);
        }
        Ok(out)
    }

    /// `|⟨self|other⟩|²` normalized by both norms.
    pub fn fidelity(&self, other: &Mps) -> Result<f64> {
        let ov = self.overlap(other)?;
        Ok(ov.norm_sqr() / (self.norm_sqr() * other.norm_sqr()))
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &Mps) -> Result<C64> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument("states have different lengths".into()));
        }
        let mut env = Array2::from_elem((1, 1), ONE);
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            env = transfer_mixed(&env, a, b);
        }
        Ok(env[[0, 0]])
    }

    /// Full state vector (site 0 = most significant bit).
    pub fn to_dense(&self) -> Result<Array1<C64>> {
        if self.len() > MAX_DENSE_SITES {
            return Err(Error::Capacity {
                sites: self.len(),
                max: MAX_DENSE_SITES,
            });
        }
        let mut acc = Array2::from_elem((1, 1), ONE);
        for t in &self.tensors {
            let (dl, d, dr) = t.dim();
            let tm = t.view().into_shape_with_order((dl, d * dr)).expect("standard layout");
            let rows = acc.nrows();
            acc = acc.dot(&tm).into_shape_with_order((rows * d, dr)).expect("standard layout");
        }
        Ok(acc.into_shape_with_order(1 << self.len()).expect("single column"))
    }

    // ---- two-site updates -----------------------------------------------

    /// Applies a unitary 4×4 gate on bond `bond` (sites `bond`, `bond + 1`).
    ///
    /// The center is first moved onto the bond from whichever side it sits
    /// on, the bond is re-split by a truncated SVD, and the singular values
    /// are renormalized and absorbed away from where the center came from,
    /// so sweeps in either direction need no extra QR steps.
    pub fn apply_two_site_gate(
        &mut self,
        gate: ArrayView2<'_, C64>,
        bond: usize,
        trunc: Truncation,
    ) -> Result<GateReport> {
        if bond + 1 >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "bond {bond} out of range for {} sites",
                self.len()
            )));
        }
        if gate.dim() != (4, 4) {
            return Err(Error::InvalidArgument(format!("gate must be 4x4, got {:?}", gate.dim())));
        }
        if unitarity_defect(gate) > 1e-10 {
            return Err(Error::InvalidInput("gate is not unitary".into()));
        }
        let sweep_right = match self.center {
            Some(c) if c > bond => {
                self.canonicalize(bond + 1)?;
                false
            }
            _ => {
                self.canonicalize(bond)?;
                true
            }
        };
        let theta = self.two_site_theta(bond);
        let theta = apply_gate_to_theta(&theta, gate);
        let report = self.split_theta(theta, bond, trunc, sweep_right)?;
        Ok(report)
    }

    /// `θ[l, s1, s2, r]` for bond `bond`, shaped `(Dl, 4, Dr)`.
    pub(crate) fn two_site_theta(&self, bond: usize) -> Array3<C64> {
        let a = &self.tensors[bond];
        let b = &self.tensors[bond + 1];
        let (dl, d1, dm) = a.dim();
        let (_, d2, dr) = b.dim();
        let am = a.view().into_shape_with_order((dl * d1, dm)).expect("standard layout");
        let bm = b.view().into_shape_with_order((dm, d2 * dr)).expect("standard layout");
        am.dot(&bm)
            .into_shape_with_order((dl, d1 * d2, dr))
            .expect("standard layout")
    }

    /// Splits `θ` (shape `(Dl, 4, Dr)`) back into two site tensors. The center
    /// ends at `bond + 1` when `absorb_right`, else at `bond`.
    pub(crate) fn split_theta(
        &mut self,
        theta: Array3<C64>,
        bond: usize,
        trunc: Truncation,
        absorb_right: bool,
    ) -> Result<GateReport> {
        let (dl, _, dr) = theta.dim();
        let m = theta
            .into_shape_with_order((dl * PHYS_DIM, PHYS_DIM * dr))
            .expect("standard layout");
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NumericalFailure(format!("non-finite amplitudes on bond {bond}")));
        }
        let norm_before: f64 = m.iter().map(|z| z.norm_sqr()).sum();
        let r = svd_truncated_matrix(m.view(), trunc.chi_max, trunc.eps)?;
        let k = r.rank();
        let chi_limited = k == trunc.chi_max && r.discarded_weight > trunc.eps;
        let s_norm = r.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(s_norm > 0.0) {
            return Err(Error::NumericalFailure(format!("zero state on bond {bond}")));
        }
        let s: Vec<f64> = r.s.iter().map(|x| x / s_norm).collect();
        let (mut u, mut vh) = (r.u, r.vh);
        if absorb_right {
            for (mut row, &sv) in vh.axis_iter_mut(Axis(0)).zip(&s) {
                row.mapv_inplace(|z| z * sv);
            }
        } else {
            for (mut col, &sv) in u.axis_iter_mut(Axis(1)).zip(&s) {
                col.mapv_inplace(|z| z * sv);
            }
        }
        self.tensors[bond] = u.into_shape_with_order((dl, PHYS_DIM, k)).expect("standard layout");
        self.tensors[bond + 1] = vh.into_shape_with_order((k, PHYS_DIM, dr)).expect("standard layout");
        self.center = Some(if absorb_right { bond + 1 } else { bond });
        self.truncation_error += r.discarded_weight;
        Ok(GateReport {
            discarded_weight: r.discarded_weight,
            bond_dim: k,
            norm_before_truncation: norm_before,
            chi_limited,
        })
    }

    // ---- checkpoints ----------------------------------------------------

    const MAGIC: &'static [u8; 8] = b"KZMPS\0v1";

    /// Binary checkpoint: magic, little-endian `u64` site count, `i64`
    /// center (−1 for none), `f64` truncation error, then per site three
    /// `u64` dimensions followed by `(re, im)` `f64` pairs in row-major order.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        let center = self.center.map_or(-1i64, |c| c as i64);
        w.write_all(&center.to_le_bytes())?;
        w.write_all(&self.truncation_error.to_le_bytes())?;
        for t in &self.tensors {
            let (a, b, c) = t.dim();
            for d in [a, b, c] {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for z in t.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::InvalidInput("not an MPS checkpoint".into()));
        }
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut buf)?;
            Ok(buf)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        if n == 0 || n > 1 << 20 {
            return Err(Error::InvalidInput(format!("implausible site count {n}")));
        }
        let center = i64::from_le_bytes(next(&mut r)?);
        let truncation_error = f64::from_le_bytes(next(&mut r)?);
        let mut tensors = Vec::with_capacity(n);
        for _ in 0..n {
            let mut dims = [0usize; 3];
            for d in &mut dims {
                *d = u64::from_le_bytes(next(&mut r)?) as usize;
            }
            let len = dims[0]
                .checked_mul(dims[1])
                .and_then(|x| x.checked_mul(dims[2]))
                .filter(|&x| x <= 1 << 28)
                .ok_or_else(|| Error::InvalidInput("implausible tensor shape".into()))?;
            let mut data = Vec::with_capacity(len);
            for _ in 0..len {
                let re = f64::from_le_bytes(next(&mut r)?);
                let im = f64::from_le_bytes(next(&mut r)?);
                data.push(C64::new(re, im));
            }
            tensors.push(
                Array3::from_shape_vec((dims[0], dims[1], dims[2]), data)
                    .map_err(|e| Error::InvalidInput(e.to_string()))?,
            );
        }
        let mut psi = Self::from_tensors(tensors, (center >= 0).then_some(center as usize))?;
        psi.truncation_error = truncation_error;
        Ok(psi)
    }
}

/// Applies a 4×4 gate to `θ` of shape `(Dl, 4, Dr)`.
pub(crate) fn apply_gate_to_theta(theta: &Array3<C64>, gate: ArrayView2<'_, C64>) -> Array3<C64> {
    let mut out = Array3::<C64>::zeros(theta.dim());
    for so in 0..4 {
        let mut dst = out.index_axis_mut(Axis(1), so);
        for si in 0..4 {
            let gij = gate[[so, si]];
            if gij != ZERO {
                dst.scaled_add(gij, &theta.index_axis(Axis(1), si));
            }
        }
    }
    out
}

fn check_local_op(op: ArrayView2<'_, C64>, hermitian: bool) -> Result<()> {
    if op.dim() != (PHYS_DIM, PHYS_DIM) {
        return Err(Error::InvalidArgument(format!("local operator must be 2x2, got {:?}", op.dim())));
    }
    if hermitian && hermiticity_defect(op) > 1e-12 {
        return Err(Error::InvalidInput("local operator must be Hermitian".into()));
    }
    Ok(())
}

fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// `E'[r, r'] = Σ conj(A[l, s, r]) E[l, l'] O[s, s'] A[l', s', r']`.
pub(crate) fn transfer(env: &Array2<C64>, a: &Array3<C64>, op: Option<ArrayView2<'_, C64>>) -> Array2<C64> {
    let (_, d, dr) = a.dim();
    // B_{s'} = E · A[:, s', :]
    let b: Vec<Array2<C64>> = (0..d).map(|sp| env.dot(&a.index_axis(Axis(1), sp))).collect();
    let mut out = Array2::<C64>::zeros((dr, dr));
    for s in 0..d {
        let c = match op {
            None => b[s].clone(),
            Some(o) => {
                let mut c = Array2::<C64>::zeros(b[0].dim());
                for (sp, bs) in b.iter().enumerate() {
                    let w = o[[s, sp]];
                    if w != ZERO {
                        c.scaled_add(w, bs);
                    }
                }
                c
            }
        };
        let as_ = a.index_axis(Axis(1), s);
        out = out + conj_t(as_).dot(&c);
    }
    out
}

/// `E'[r, r'] = Σ conj(A[l, s, r]) E[l, l'] B[l', s, r']`.
fn transfer_mixed(env: &Array2<C64>, a: &Array3<C64>, b: &Array3<C64>) -> Array2<C64> {
    let (_, d, dra) = a.dim();
    let drb = b.dim().2;
    let mut out = Array2::<C64>::zeros((dra, drb));
    for s in 0..d {
        let c = env.dot(&b.index_axis(Axis(1), s));
        out = out + conj_t(a.index_axis(Axis(1), s)).dot(&c);
    }
    out
}

/// Exact singular values across every bond (Schmidt spectrum), computed
/// from a canonical copy of the state.
pub fn schmidt_values(psi: &Mps, bond: usize) -> Result<Vec<f64>> {
    if bond + 1 >= psi.len() {
        return Err(Error::InvalidArgument(format!("bond {bond} out of range")));
    }
    let mut c = psi.clone();
    c.canonicalize(bond)?;
    let t = &c.tensors[bond];
    let (dl, d, dr) = t.dim();
    let m = t.view().into_shape_with_order((dl * d, dr)).expect("standard layout");
    let (_, s, _) = svd_full(m)?;
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(s.iter().map(|x| x / norm).collect())
}

/// Half-chain-style von Neumann entropy across `bond`.
pub fn entanglement_entropy(psi: &Mps, bond: usize) -> Result<f64> {
    Ok(schmidt_values(psi, bond)?
        .into_iter()
        .filter(|&s| s > 0.0)
        .map(|s| -s * s * (s * s).ln())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{pauli_x, pauli_z};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus_x() -> [C64; 2] {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [a, a]
    }

    fn up() -> [C64; 2] {
        [ONE, ZERO]
    }

    fn down() -> [C64; 2] {
        [ZERO, ONE]
    }

    /// Reference: apply a 4×4 gate to sites (b, b+1) of a dense vector.
    fn dense_apply(v: &Array1<C64>, n: usize, bond: usize, gate: &Array2<C64>) -> Array1<C64> {
        let mut out = Array1::<C64>::zeros(v.len());
        let shift = n - bond - 2;
        for idx in 0..v.len() {
            let pair = (idx >> shift) & 3;
            for out_pair in 0..4 {
                let j = (idx & !(3 << shift)) | (out_pair << shift);
                out[j] += gate[[out_pair, pair]] * v[idx];
            }
        }
        out
    }

    fn random_unitary(rng: &mut ChaCha8Rng, d: usize) -> Array2<C64> {
        let m = Array2::from_shape_fn((d, d), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        m.qr().unwrap().0
    }

    #[test]
    fn x_polarized_product_state() {
        let psi = Mps::product_state(4, plus_x()).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-14);
        for n in 0..4 {
            assert!((psi.expectation_one_site(pauli_x().view(), n).unwrap() - 1.0).abs() < 1e-14);
        }
        assert_eq!(psi.max_bond_dim(), 1);
    }

    #[test]
    fn ferromagnetic_product_state() {
        let psi = Mps::product_state(4, up()).unwrap();
        let z = pauli_z();
        for n in 0..4 {
            assert!((psi.expectation_one_site(z.view(), n).unwrap() - 1.0).abs() < 1e-14);
        }
        assert!((psi.correlation_two_site(z.view(), z.view(), 0, 1).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn product_state_requires_normalized_input() {
        assert!(Mps::product_state(3, [ONE, ONE]).is_err());
    }

    #[test]
    fn ghz_densifies_to_bell_state() {
        let v = Mps::ghz_state(2).unwrap().to_dense().unwrap();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [a, 0.0, 0.0, a];
        for (z, e) in v.iter().zip(expected) {
            assert!((z - C64::new(e, 0.0)).norm() < 1e-15);
        }
        assert!(Mps::ghz_state(1).is_err());
    }

    #[test]
    fn ghz_correlations() {
        let psi = Mps::ghz_state(8).unwrap();
        let z = pauli_z();
        let corr = psi.correlation_matrix(z.view(), z.view()).unwrap();
        assert!(corr.iter().all(|&c| (c - 1.0).abs() < 1e-12));
        for n in 0..8 {
            assert!(psi.expectation_one_site(z.view(), n).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn out_of_range_sites_are_rejected() {
        let psi = Mps::ghz_state(4).unwrap();
        let z = pauli_z();
        assert!(psi.expectation_one_site(z.view(), 4).is_err());
        assert!(psi.correlation_two_site(z.view(), z.view(), 0, 9).is_err());
    }

    #[test]
    fn uncorrelated_product_state() {
        let psi = Mps::product_state(5, plus_x()).unwrap();
        let z = pauli_z();
        for m in 0..5 {
            for n in 0..5 {
                let c = psi.correlation_two_site(z.view(), z.view(), m, n).unwrap();
                let expected = if m == n { 1.0 } else { 0.0 };
                assert!((c - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_gate_leaves_state_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = Mps::random(6, 4, &mut rng).unwrap();
        let mut phi = psi.clone();
        let rep = phi
            .apply_two_site_gate(Array2::<C64>::eye(4).view(), 2, Truncation::new(16, 0.0))
            .unwrap();
        assert!(rep.discarded_weight < 1e-28);
        assert!((psi.fidelity(&phi).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_gate_permutes_product_state() {
        let mut psi = Mps::product_of(&[up(), down()]).unwrap();
        let mut swap = Array2::<C64>::zeros((4, 4));
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            swap[[i, j]] = ONE;
        }
        psi.apply_two_site_gate(swap.view(), 0, Truncation::exact()).unwrap();
        let v = psi.to_dense().unwrap();
        assert!((v[2].norm() - 1.0).abs() < 1e-14);
        assert!(v[0].norm() + v[1].norm() + v[3].norm() < 1e-14);
    }

    #[test]
    fn random_gate_matches_dense_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 6;
        let mut psi = Mps::random(n, 4, &mut rng).unwrap();
        let mut v = psi.to_dense().unwrap();
        for bond in [2, 0, 4, 1, 3] {
            let u = random_unitary(&mut rng, 4);
            psi.apply_two_site_gate(u.view(), bond, Truncation::new(8, 0.0)).unwrap();
            v = dense_apply(&v, n, bond, &u);
        }
        let w = psi.to_dense().unwrap();
        let ov: C64 = v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
        assert!((ov.norm() - 1.0).abs() < 1e-12);
        let diff = v.iter().zip(w.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max diff {diff}");
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_unitary_gate_is_rejected() {
        let mut psi = Mps::ghz_state(4).unwrap();
        let g = Array2::<C64>::eye(4).mapv(|z| z * 1.1);
        assert!(matches!(
            psi.apply_two_site_gate(g.view(), 0, Truncation::exact()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn gate_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = Mps::random(7, 6, &mut rng).unwrap();
        let z = pauli_z();
        let before = psi.expectation_profile(z.view()).unwrap();
        let mut phi = psi.clone();
        let u = random_unitary(&mut rng, 4);
        phi.apply_two_site_gate(u.view(), 3, Truncation::new(64, 0.0)).unwrap();
        let after = phi.expectation_profile(z.view()).unwrap();
        for m in 0..7 {
            if m != 3 && m != 4 {
                assert!((before[m] - after[m]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_form_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut psi = Mps::random(8, 5, &mut rng).unwrap();
        let z = pauli_z();
        let before = psi.correlation_matrix(z.view(), z.view()).unwrap();
        for target in [5, 2, 7, 0, 3] {
            psi.canonicalize(target).unwrap();
            assert!(psi.canonical_defect() < 1e-10);
            assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        }
        let after = psi.correlation_matrix(z.view(), z.view()).unwrap();
        let diff = (&before - &after).iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn sweep_correlations_match_pairwise_transfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let psi = Mps::random(7, 6, &mut rng).unwrap();
        let (x, z) = (pauli_x(), pauli_z());
        for (a, b) in [(&z, &z), (&x, &z)] {
            let sweep = psi.correlation_matrix(a.view(), b.view()).unwrap();
            for m in 0..7 {
                for n in 0..7 {
                    let pair = psi.correlation_two_site(a.view(), b.view(), m, n).unwrap();
                    assert!((sweep[[m, n]] - pair).abs() < 1e-12, "({m},{n})");
                }
            }
        }
    }

    #[test]
    fn dense_round_trip_expectations() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 9;
        let psi = Mps::random(n, 8, &mut rng).unwrap();
        let v = psi.to_dense().unwrap();
        let back = Mps::from_dense(v.as_slice().unwrap()).unwrap();
        let z = pauli_z();
        let a = psi.correlation_matrix(z.view(), z.view()).unwrap();
        let b = back.correlation_matrix(z.view(), z.view()).unwrap();
        assert!((&a - &b).iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-10);
        // direct dense evaluation of <Z_0 Z_5>
        let zz: f64 = v
            .iter()
            .enumerate()
            .map(|(i, amp)| {
                let s0 = if (i >> (n - 1)) & 1 == 0 { 1.0 } else { -1.0 };
                let s5 = if (i >> (n - 6)) & 1 == 0 { 1.0 } else { -1.0 };
                amp.norm_sqr() * s0 * s5
            })
            .sum();
        assert!((a[[0, 5]] - zz).abs() < 1e-10);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut psi = Mps::random(6, 4, &mut rng).unwrap();
        psi.add_truncation_error(3.25e-13);
        let mut buf = Vec::new();
        psi.write_checkpoint(&mut buf).unwrap();
        let back = Mps::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(psi, back);
        let mut buf2 = Vec::new();
        back.write_checkpoint(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
        assert!(Mps::read_checkpoint(&buf[..20]).is_err());
        assert!(Mps::read_checkpoint(&b"garbage!garbage!"[..]).is_err());
    }

    #[test]
    fn entropy_of_bell_pair() {
        let psi = Mps::ghz_state(4).unwrap();
        let s = entanglement_entropy(&psi, 1).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12);
    }
}
