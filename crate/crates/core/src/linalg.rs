//! Dense complex linear algebra: tensors, truncated SVD, Hermitian
//! exponentials and pairwise tensor contraction.
//!
//! All tensors are stored row-major (C order, last index fastest). Reshapes
//! therefore never permute data, and reshape-then-decompose gives the same
//! matrix on every platform.

use ndarray::{Array1, Array2, ArrayD, ArrayView2, Axis, IxDyn};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, SVD, UPLO};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are always dropped.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-14;

/// Tolerance used when checking that an operator is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A dense complex tensor of arbitrary rank in row-major layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    data: ArrayD<C64>,
}

impl DenseTensor {
    /// Builds a tensor from a shape and row-major data.
    pub fn new(shape: &[usize], data: Vec<C64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} needs {expected} entries, got {}",
                data.len()
            )));
        }
        let data = ArrayD::from_shape_vec(IxDyn(shape), data)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Self::from_array(data)
    }

    /// Wraps an ndarray, rejecting non-finite entries.
    pub fn from_array(data: ArrayD<C64>) -> Result<Self> {
        ensure_finite(data.iter())?;
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Self { data })
    }

    pub fn from_matrix(m: Array2<C64>) -> Result<Self> {
        Self::from_array(m.into_dyn())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            data: ArrayD::zeros(IxDyn(shape)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: Array2::<C64>::eye(n).into_dyn(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        self.data.shape()
    }

    pub fn rank(&self) -> usize {
        self.data.ndim()
    }

    pub fn as_array(&self) -> &ArrayD<C64> {
        &self.data
    }

    pub fn into_array(self) -> ArrayD<C64> {
        self.data
    }

    /// Row-major view of the raw entries.
    pub fn as_slice(&self) -> &[C64] {
        self.data
            .as_slice()
            .expect("DenseTensor is always stored in standard layout")
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        Self::new(shape, self.as_slice().to_vec())
    }

    /// Views a rank-2 tensor as a matrix.
    pub fn as_matrix(&self) -> Result<ArrayView2<'_, C64>> {
        self.data
            .view()
            .into_dimensionality()
            .map_err(|_| Error::InvalidArgument(format!("expected rank 2, got {:?}", self.shape())))
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            data: &self.data * factor,
        }
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Result of a (possibly truncated) singular value decomposition
/// `M ≈ U · diag(S) · Vh`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// Left isometry, shape `(m, k)`.
    pub u: Array2<C64>,
    /// Retained singular values, descending.
    pub s: Array1<f64>,
    /// Right isometry, shape `(k, n)`.
    pub vh: Array2<C64>,
    /// Squared norm of the dropped singular values relative to the total.
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `U · diag(S) · Vh`.
    pub fn reconstruct(&self) -> Array2<C64> {
        let mut us = self.u.clone();
        for (mut col, &s) in us.axis_iter_mut(Axis(1)).zip(self.s.iter()) {
            col.mapv_inplace(|z| z * s);
        }
        us.dot(&self.vh)
    }
}

fn ensure_finite<'a>(mut it: impl Iterator<Item = &'a C64>) -> Result<()> {
    if it.any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidInput("non-finite entry".into()));
    }
    Ok(())
}

/// Full (thin) SVD; falls back to the QR-iteration driver if divide and
/// conquer fails to converge.
pub fn svd_full(m: ArrayView2<'_, C64>) -> Result<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    ensure_finite(m.iter())?;
    let owned = m.as_standard_layout().into_owned();
    match owned.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vh))) => Ok((u, s, vh)),
        _ => {
            let (u, s, vh) = owned.svd(true, true)?;
            let (u, vh) = (u.expect("requested U"), vh.expect("requested Vh"));
            let k = s.len();
            Ok((
                u.slice(ndarray::s![.., ..k]).as_standard_layout().into_owned(),
                s,
                vh.slice(ndarray::s![..k, ..]).as_standard_layout().into_owned(),
            ))
        }
    }
}

/// Number of singular values to keep: the smallest count whose discarded
/// relative weight is at most `eps`, capped at `chi_max`. Values below
/// `SINGULAR_VALUE_FLOOR · s[0]` are never kept. Returns `(keep, discarded)`.
pub fn truncation_rank(s: &[f64], chi_max: usize, eps: f64) -> (usize, f64) {
    let total: f64 = s.iter().map(|x| x * x).sum();
    if s.is_empty() || total == 0.0 {
        return (1.min(s.len()), 0.0);
    }
    let floor = SINGULAR_VALUE_FLOOR * s[0];
    let significant = s.iter().take_while(|&&x| x > floor).count().max(1);

    // tail[k] = sum_{i >= k} s_i^2, accumulated from the small end for accuracy
    let mut tail = vec![0.0; s.len() + 1];
    for i in (0..s.len()).rev() {
        tail[i] = tail[i + 1] + s[i] * s[i];
    }
    let mut keep = significant;
    for k in 1..=significant {
        if tail[k] / total <= eps {
            keep = k;
            break;
        }
    }
    let keep = keep.min(chi_max).max(1);
    (keep, tail[keep] / total)
}

/// Truncated SVD of a rank-2 tensor.
///
/// Keeps the fewest singular values whose discarded relative weight stays
/// below `eps`, never more than `chi_max`.
pub fn svd_truncated(m: &DenseTensor, chi_max: usize, eps: f64) -> Result<SvdResult> {
    svd_truncated_matrix(m.as_matrix()?, chi_max, eps)
}

pub fn svd_truncated_matrix(m: ArrayView2<'_, C64>, chi_max: usize, eps: f64) -> Result<SvdResult> {
    if chi_max == 0 {
        return Err(Error::InvalidArgument("chi_max must be positive".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be non-negative, got {eps}")));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    let (u, s, vh) = svd_full(m)?;
    let (keep, discarded_weight) = truncation_rank(s.as_slice().unwrap(), chi_max, eps);
    Ok(SvdResult {
        u: u.slice(ndarray::s![.., ..keep]).as_standard_layout().into_owned(),
        s: s.slice_move(ndarray::s![..keep]),
        vh: vh.slice(ndarray::s![..keep, ..]).as_standard_layout().into_owned(),
        discarded_weight,
    })
}

/// Largest entrywise deviation of `h` from Hermiticity.
pub fn hermiticity_defect(h: ArrayView2<'_, C64>) -> f64 {
    let mut worst = 0.0_f64;
    for ((i, j), z) in h.indexed_iter() {
        worst = worst.max((z - h[[j, i]].conj()).norm());
    }
    worst
}

/// Largest entrywise deviation of `U†U` from the identity.
pub fn unitarity_defect(u: ArrayView2<'_, C64>) -> f64 {
    let prod = conj_t(u).dot(&u);
    let mut worst = 0.0_f64;
    for ((i, j), z) in prod.indexed_iter() {
        let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        worst = worst.max((z - target).norm());
    }
    worst
}

/// Conjugate transpose, returned in standard layout.
pub fn conj_t(m: ArrayView2<'_, C64>) -> Array2<C64> {
    let mut out = Array2::zeros((m.ncols(), m.nrows()));
    out.zip_mut_with(&m.t(), |o, z| *o = z.conj());
    out
}

/// Returns `a` in row-major layout, copying only when needed.
pub fn standard(a: Array2<C64>) -> Array2<C64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// `exp(scale · H)` for Hermitian `H`, computed from its eigendecomposition.
pub fn hermitian_expm(h: &DenseTensor, scale: C64) -> Result<DenseTensor> {
    DenseTensor::from_matrix(hermitian_expm_matrix(h.as_matrix()?, scale)?)
}

pub fn hermitian_expm_matrix(h: ArrayView2<'_, C64>, scale: C64) -> Result<Array2<C64>> {
    if h.nrows() != h.ncols() {
        return Err(Error::InvalidArgument(format!(
            "expected a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    ensure_finite(h.iter())?;
    let scale_ref = h.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    if hermiticity_defect(h) > HERMITIAN_TOL * scale_ref {
        return Err(Error::InvalidInput("matrix is not Hermitian".into()));
    }
    let (vals, vecs) = h.to_owned().eigh(UPLO::Upper)?;
    let mut scaled = vecs.clone();
    for (mut col, &lambda) in scaled.axis_iter_mut(Axis(1)).zip(vals.iter()) {
        let f = (scale * lambda).exp();
        col.mapv_inplace(|z| z * f);
    }
    Ok(scaled.dot(&conj_t(vecs.view())))
}

/// Contracts `a` and `b` over the listed `(axis_of_a, axis_of_b)` pairs.
///
/// The result carries the uncontracted axes of `a` in their original order,
/// followed by the uncontracted axes of `b`.
pub fn contract(a: &DenseTensor, b: &DenseTensor, axes: &[(usize, usize)]) -> Result<DenseTensor> {
    let (ra, rb) = (a.rank(), b.rank());
    for (k, &(ia, ib)) in axes.iter().enumerate() {
        if ia >= ra || ib >= rb {
            return Err(Error::InvalidArgument(format!("axis pair {k} out of range")));
        }
        if a.shape()[ia] != b.shape()[ib] {
            return Err(Error::InvalidArgument(format!(
                "dimension mismatch on pair {k}: {} vs {}",
                a.shape()[ia],
                b.shape()[ib]
            )));
        }
        if axes[..k].iter().any(|&(pa, pb)| pa == ia || pb == ib) {
            return Err(Error::InvalidArgument(format!("axis repeated in pair {k}")));
        }
    }
    let free_a: Vec<usize> = (0..ra).filter(|i| !axes.iter().any(|p| p.0 == *i)).collect();
    let free_b: Vec<usize> = (0..rb).filter(|i| !axes.iter().any(|p| p.1 == *i)).collect();

    let perm_a: Vec<usize> = free_a.iter().copied().chain(axes.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = axes.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();

    let rows: usize = free_a.iter().map(|&i| a.shape()[i]).product();
    let inner: usize = axes.iter().map(|p| a.shape()[p.0]).product();
    let cols: usize = free_b.iter().map(|&i| b.shape()[i]).product();

    let am = a.as_array().view().permuted_axes(IxDyn(&perm_a));
    let am = am.as_standard_layout();
    let am = am.view().into_shape_with_order((rows, inner)).expect("standard layout");
    let bm = b.as_array().view().permuted_axes(IxDyn(&perm_b));
    let bm = bm.as_standard_layout();
    let bm = bm.view().into_shape_with_order((inner, cols)).expect("standard layout");

    let out_shape: Vec<usize> = free_a
        .iter()
        .map(|&i| a.shape()[i])
        .chain(free_b.iter().map(|&i| b.shape()[i]))
        .collect();
    let prod = am.dot(&bm);
    let data = prod
        .into_shape_with_order(IxDyn(&out_shape))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    DenseTensor::from_array(data)
}

/// Lowest eigenpair found by [`lanczos_lowest`].
#[derive(Clone, Debug)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Array1<C64>,
    /// `‖H v − λ v‖` of the returned pair.
    pub residual: f64,
    pub matvecs: usize,
}

/// Restarted Lanczos for the lowest eigenpair of a Hermitian operator given
/// as a matrix-vector product.
///
/// Each cycle builds at most `krylov_dim` fully reorthogonalized vectors and
/// restarts from the current Ritz vector until the residual norm drops below
/// `tol`.
pub fn lanczos_lowest<F>(apply: F, start: Array1<C64>, krylov_dim: usize, tol: f64, max_restarts: usize) -> Result<LanczosResult>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let dim = start.len();
    if dim == 0 {
        return Err(Error::InvalidArgument("empty start vector".into()));
    }
    let norm = start.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidInput("start vector must be finite and non-zero".into()));
    }
    let mut v = start.mapv(|z| z / norm);
    let m_max = krylov_dim.max(2).min(dim);
    let mut matvecs = 0;
    let mut best: Option<LanczosResult> = None;

    for _ in 0..=max_restarts {
        let mut basis: Vec<Array1<C64>> = vec![v.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            let mut w = apply(&basis[j]);
            matvecs += 1;
            let a = dot_c(&basis[j], &w).re;
            alpha.push(a);
            // two passes of full Gram-Schmidt
            for _ in 0..2 {
                for q in &basis {
                    let c = dot_c(q, &w);
                    w.zip_mut_with(q, |wi, qi| *wi -= c * qi);
                }
            }
            let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if basis.len() >= m_max || b < 1e-14 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            basis.push(w.mapv(|z| z / b));
        }
        let k = alpha.len();
        let mut t = Array2::<f64>::zeros((k, k));
        for i in 0..k {
            t[[i, i]] = alpha[i];
            if i + 1 < k {
                t[[i, i + 1]] = beta[i];
                t[[i + 1, i]] = beta[i];
            }
        }
        let (vals, vecs) = t.eigh(UPLO::Upper)?;
        let value = vals[0];
        let mut ritz = Array1::<C64>::zeros(dim);
        for (q, &c) in basis.iter().zip(vecs.column(0).iter()) {
            ritz.scaled_add(C64::new(c, 0.0), q);
        }
        let rn = ritz.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ritz.mapv_inplace(|z| z / rn);
        let hv = apply(&ritz);
        matvecs += 1;
        let residual = hv
            .iter()
            .zip(ritz.iter())
            .map(|(h, r)| (h - r * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let done = residual < tol || k == dim;
        v = ritz.clone();
        best = Some(LanczosResult {
            value,
            vector: ritz,
            residual,
            matvecs,
        });
        if done {
            break;
        }
    }
    let best = best.expect("at least one cycle runs");
    if !(best.value.is_finite()) {
        return Err(Error::NumericalFailure("Lanczos produced a non-finite eigenvalue".into()));
    }
    Ok(best)
}

fn dot_c(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<C64> {
        Array2::from_shape_fn((m, n), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn svd_of_identity_keeps_both_values() {
        let m = DenseTensor::identity(2);
        let r = svd_truncated(&m, 2, 0.0).unwrap();
        assert_eq!(r.rank(), 2);
        assert!((r.s[0] - 1.0).abs() < 1e-14 && (r.s[1] - 1.0).abs() < 1e-14);
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn svd_of_rank_one_matrix() {
        let m = DenseTensor::new(&[2, 2], vec![c(1.0); 4]).unwrap();
        let r = svd_truncated(&m, 1, 1e-12).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((r.s[0] - 2.0).abs() < 1e-14);
        assert!(r.discarded_weight < 1e-28);
    }

    #[test]
    fn truncated_weight_matches_full_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_matrix(&mut rng, 8, 8);
        let (_, s_full, _) = svd_full(m.view()).unwrap();
        let total: f64 = s_full.iter().map(|x| x * x).sum();
        let tail: f64 = s_full.iter().skip(4).map(|x| x * x).sum();

        let r = svd_truncated(&DenseTensor::from_matrix(m.clone()).unwrap(), 4, 0.0).unwrap();
        assert_eq!(r.rank(), 4);
        assert!((r.discarded_weight - tail / total).abs() < 1e-14);
        let err: f64 = (&m - &r.reconstruct()).iter().map(|z| z.norm_sqr()).sum::<f64>() / total;
        assert!(err <= r.discarded_weight + 1e-12);
    }

    #[test]
    fn truncated_factors_are_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 12, 7);
        let r = svd_truncated_matrix(m.view(), 5, 0.0).unwrap();
        assert!(unitarity_defect(r.u.view()) < 1e-12);
        assert!(unitarity_defect(conj_t(r.vh.view()).view()) < 1e-12);
        assert!(r.s.windows(2).into_iter().all(|w| w[0] >= w[1] && w[1] >= 0.0));
    }

    #[test]
    fn eps_controls_rank() {
        let m = Array2::from_diag(&array![c(1.0), c(1e-3), c(1e-7)]);
        let r = svd_truncated_matrix(m.view(), 10, 1e-10).unwrap();
        assert_eq!(r.rank(), 2);
        let r = svd_truncated_matrix(m.view(), 10, 1e-5).unwrap();
        assert_eq!(r.rank(), 1);
        let r = svd_truncated_matrix(m.view(), 10, 0.0).unwrap();
        assert_eq!(r.rank(), 3);
    }

    #[test]
    fn noise_floor_is_always_dropped() {
        let m = Array2::from_diag(&array![c(1.0), c(1e-15)]);
        let r = svd_truncated_matrix(m.view(), 10, 0.0).unwrap();
        assert_eq!(r.rank(), 1);
    }

    #[test]
    fn svd_rejects_bad_input() {
        let m = DenseTensor::identity(2);
        assert!(matches!(svd_truncated(&m, 0, 0.0), Err(Error::InvalidArgument(_))));
        let bad = array![[c(f64::NAN), c(0.0)], [c(0.0), c(1.0)]];
        assert!(matches!(svd_truncated_matrix(bad.view(), 2, 0.0), Err(Error::InvalidInput(_))));
        assert!(DenseTensor::new(&[2, 2], vec![c(f64::INFINITY); 4]).is_err());
    }

    #[test]
    fn expm_of_pauli_z() {
        let z = DenseTensor::from_matrix(array![[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]).unwrap();
        let u = hermitian_expm(&z, C64::new(0.0, -std::f64::consts::FRAC_PI_2)).unwrap();
        let u = u.as_matrix().unwrap();
        assert!((u[[0, 0]] - C64::new(0.0, -1.0)).norm() < 1e-15);
        assert!((u[[1, 1]] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(u[[0, 1]].norm() < 1e-15 && u[[1, 0]].norm() < 1e-15);
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let h = DenseTensor::zeros(&[4, 4]);
        let u = hermitian_expm(&h, C64::new(0.3, -1.7)).unwrap();
        assert_eq!(u, DenseTensor::identity(4));
    }

    /// Independent reference: truncated Taylor series of exp(A).
    fn taylor_expm(a: &Array2<C64>, terms: usize) -> Array2<C64> {
        let n = a.nrows();
        let mut sum = Array2::<C64>::eye(n);
        let mut term = Array2::<C64>::eye(n);
        for k in 1..=terms {
            term = term.dot(a).mapv(|z| z / k as f64);
            sum = sum + &term;
        }
        sum
    }

    #[test]
    fn expm_matches_taylor_series_on_bond_generator() {
        let g = 1.0;
        let x = array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
        let z = array![[c(1.0), c(0.0)], [c(0.0), c(-1.0)]];
        let id = Array2::<C64>::eye(2);
        let kron = |a: &Array2<C64>, b: &Array2<C64>| {
            Array2::from_shape_fn((4, 4), |(i, j)| a[[i / 2, j / 2]] * b[[i % 2, j % 2]])
        };
        let h = -kron(&z, &z) - (kron(&x, &id) + kron(&id, &x)).mapv(|v| v * (g / 2.0));
        let scale = C64::new(0.0, -0.02);
        let u = hermitian_expm_matrix(h.view(), scale).unwrap();
        let reference = taylor_expm(&h.mapv(|v| v * scale), 30);
        assert!(max_abs_diff(&u, &reference) < 1e-12);
        assert!(unitarity_defect(u.view()) < 1e-12);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let h = array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]];
        assert!(matches!(
            hermitian_expm_matrix(h.view(), C64::new(0.0, -1.0)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn contract_identity_with_vector() {
        let id = DenseTensor::identity(2);
        let v = DenseTensor::new(&[2], vec![C64::new(1.5, 0.5), C64::new(-2.0, 1.0)]).unwrap();
        let out = contract(&id, &v, &[(1, 0)]).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn contract_matches_naive_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 3);
        let b = random_matrix(&mut rng, 3, 4);
        let mut naive = Array2::<C64>::zeros((5, 4));
        for i in 0..5 {
            for j in 0..4 {
                for k in 0..3 {
                    naive[[i, j]] += a[[i, k]] * b[[k, j]];
                }
            }
        }
        let out = contract(
            &DenseTensor::from_matrix(a).unwrap(),
            &DenseTensor::from_matrix(b).unwrap(),
            &[(1, 0)],
        )
        .unwrap();
        assert_eq!(out.shape(), &[5, 4]);
        let out = out.as_matrix().unwrap().to_owned();
        assert!(max_abs_diff(&out, &naive) < 1e-13);
    }

    #[test]
    fn full_self_contraction_is_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<C64> = (0..24).map(|_| C64::new(rng.random(), rng.random())).collect();
        let t = DenseTensor::new(&[2, 3, 4], data.clone()).unwrap();
        let conj = DenseTensor::new(&[2, 3, 4], data.iter().map(|z| z.conj()).collect()).unwrap();
        let out = contract(&conj, &t, &[(0, 0), (1, 1), (2, 2)]).unwrap();
        assert_eq!(out.rank(), 0);
        assert!((out.as_slice()[0].re - t.frobenius_norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn contract_output_axis_order() {
        let a = DenseTensor::zeros(&[2, 3, 5]);
        let b = DenseTensor::zeros(&[7, 3]);
        let out = contract(&a, &b, &[(1, 1)]).unwrap();
        assert_eq!(out.shape(), &[2, 5, 7]);
        assert!(contract(&a, &b, &[(0, 1)]).is_err());
    }

    #[test]
    fn lanczos_finds_lowest_eigenvalue_of_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 60, 60);
        let h = &a + &conj_t(a.view());
        let (vals, _) = h.eigh(UPLO::Upper).unwrap();
        let start = Array1::from_shape_fn(60, |i| C64::new(1.0 + i as f64 * 0.01, 0.0));
        let r = lanczos_lowest(|v| h.dot(v), start, 20, 1e-10, 200).unwrap();
        assert!((r.value - vals[0]).abs() < 1e-10);
        assert!(r.residual < 1e-10);
    }
}
