//! Measurements on final states: quantum Fisher information density for the
//! collective generator `O = Σ σᶻ`, the center-anchored correlation profile,
//! domain-wall density and the multipartite-entanglement witness.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::pauli_z;
use crate::mps::Mps;

/// Variance decomposition of the collective magnetization, per site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfiDensity {
    /// `(⟨O²⟩ − ⟨O⟩²)/N`.
    pub density: f64,
    /// `⟨O²⟩/N`.
    pub second_moment: f64,
    /// `⟨O⟩²/N`, the subtracted mean term.
    pub mean_term: f64,
}

impl QfiDensity {
    /// Density computed from a `σᶻ` correlation matrix and site profile.
    pub fn from_correlations(zz: &Array2<f64>, z: &[f64]) -> Self {
        let n = z.len() as f64;
        let second_moment = zz.sum() / n;
        let mean = z.iter().sum::<f64>();
        let mean_term = mean * mean / n;
        Self {
            density: second_moment - mean_term,
            second_moment,
            mean_term,
        }
    }

    /// `4·Var(O)/N`: the pure-state Fisher information density for the
    /// generator `O` itself rather than `O/2`.
    pub fn with_factor_four(&self) -> f64 {
        4.0 * self.density
    }
}

/// `f_Q = Var(Σ σᶻ)/N`; GHZ states reach `N`, product states along `x` give 1.
pub fn qfi_density(psi: &Mps) -> Result<f64> {
    Ok(qfi(psi)?.density)
}

/// Full variance decomposition behind [`qfi_density`].
pub fn qfi(psi: &Mps) -> Result<QfiDensity> {
    let z = pauli_z();
    let zz = psi.correlation_matrix(z.view(), z.view())?;
    let mz = psi.expectation_profile(z.view())?;
    Ok(QfiDensity::from_correlations(&zz, &mz))
}

/// `4·Var(Σ σᶻ)/N`, the Fisher information density for the generator
/// `Σ σᶻ` without the spin-1/2 rescaling.
pub fn qfi_density_factor_four(psi: &Mps) -> Result<f64> {
    Ok(qfi(psi)?.with_factor_four())
}

/// Center-anchored anchor site used by the correlation profile (0-based).
pub fn profile_anchor(n: usize) -> usize {
    n / 2 - 1
}

/// `C_z(r) = ⟨σᶻ_c σᶻ_{c+r}⟩` for `r = 1..N/2 − 1` with `c` the central site.
///
/// The central site is the `N/2`-th site in 1-based numbering.
pub fn correlation_profile(psi: &Mps) -> Result<Vec<(usize, f64)>> {
    let n = psi.len();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("profile needs N >= 4, got {n}")));
    }
    let z = pauli_z();
    let zz = psi.correlation_matrix(z.view(), z.view())?;
    Ok(profile_from_matrix(&zz))
}

pub fn profile_from_matrix(zz: &Array2<f64>) -> Vec<(usize, f64)> {
    let n = zz.nrows();
    let c = profile_anchor(n);
    (1..n / 2).map(|r| (r, zz[[c, c + r]])).collect()
}

/// Bond-averaged domain-wall density `⟨½(1 − σᶻ_i σᶻ_{i+1})⟩`.
pub fn defect_density(psi: &Mps) -> Result<f64> {
    let n = psi.len();
    if n < 2 {
        return Err(Error::InvalidArgument("defect density needs N >= 2".into()));
    }
    let z = pauli_z();
    let mut total = 0.0;
    for i in 0..n - 1 {
        total += 0.5 * (1.0 - psi.correlation_two_site(z.view(), z.view(), i, i + 1)?);
    }
    Ok(total / (n - 1) as f64)
}

pub fn defect_density_from_matrix(zz: &Array2<f64>) -> f64 {
    let n = zz.nrows();
    (0..n - 1).map(|i| 0.5 * (1.0 - zz[[i, i + 1]])).sum::<f64>() / (n - 1) as f64
}

/// Lower bound on the number of entangled particles certified by `f_Q`:
/// `⌊f_Q⌋ + 1`, except that an exactly integer `f_Q = k` certifies only `k`.
pub fn entangled_particle_witness(f_q: f64) -> Result<u64> {
    if !(f_q >= 0.0) || !f_q.is_finite() {
        return Err(Error::InvalidArgument(format!("f_Q must be finite and non-negative, got {f_q}")));
    }
    let floor = f_q.floor();
    let k = if floor == f_q { floor } else { floor + 1.0 };
    Ok((k as u64).max(1))
}

/// Everything recorded about one run's final state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub n: usize,
    pub tau_q: f64,
    pub alpha: f64,
    pub f_q: f64,
    /// Mean term `⟨O⟩²/N` subtracted from `f_q`.
    pub f_q_mean_term: f64,
    pub c_z: Vec<(usize, f64)>,
    pub n_d: f64,
    /// `max_n |⟨σᶻ_n⟩|`.
    pub mean_sz: f64,
    pub chi_max: usize,
    pub dt: f64,
    pub cum_trunc: f64,
}

/// Engine settings copied into an [`ObservableRecord`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMeta {
    pub tau_q: f64,
    pub alpha: f64,
    pub chi_max: usize,
    pub dt: f64,
}

/// Measures every observable from a single correlation sweep.
pub fn measure(psi: &Mps, meta: RunMeta) -> Result<ObservableRecord> {
    let z = pauli_z();
    let zz = psi.correlation_matrix(z.view(), z.view())?;
    let mz = psi.expectation_profile(z.view())?;
    Ok(record_from_correlations(&zz, &mz, meta, psi.truncation_error()))
}

/// Builds a record from a `σᶻσᶻ` matrix and a `σᶻ` profile; shared by every engine.
pub fn record_from_correlations(zz: &Array2<f64>, mz: &[f64], meta: RunMeta, cum_trunc: f64) -> ObservableRecord {
    let n = mz.len();
    let q = QfiDensity::from_correlations(zz, mz);
    ObservableRecord {
        n,
        tau_q: meta.tau_q,
        alpha: meta.alpha,
        f_q: q.density,
        f_q_mean_term: q.mean_term,
        c_z: if n >= 4 { profile_from_matrix(zz) } else { Vec::new() },
        n_d: if n >= 2 { defect_density_from_matrix(zz) } else { 0.0 },
        mean_sz: mz.iter().fold(0.0, |m, x| m.max(x.abs())),
        chi_max: meta.chi_max,
        dt: meta.dt,
        cum_trunc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plus_x() -> [C64; 2] {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [a, a]
    }

    #[test]
    fn ghz_is_maximal() {
        for n in [2, 5, 8, 10] {
            let psi = Mps::ghz_state(n).unwrap();
            assert!((qfi_density(&psi).unwrap() - n as f64).abs() < 1e-12);
        }
        let psi = Mps::ghz_state(10).unwrap();
        assert!((qfi_density_factor_four(&psi).unwrap() - 40.0).abs() < 1e-11);
    }

    #[test]
    fn x_product_state_is_separable_bound() {
        for n in [2, 3, 7] {
            let psi = Mps::product_state(n, plus_x()).unwrap();
            assert!((qfi_density(&psi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_qubit_plus_state_matches_dense_sum() {
        // dense evaluation: |++> has amplitudes 1/2 everywhere, O = z1 + z2
        let amps = [0.5f64; 4];
        let o = [2.0, 0.0, 0.0, -2.0];
        let o2: f64 = amps.iter().zip(o).map(|(a, v)| a * a * v * v).sum();
        let mean: f64 = amps.iter().zip(o).map(|(a, v)| a * a * v).sum();
        let dense = (o2 - mean * mean) / 2.0;
        let psi = Mps::product_state(2, plus_x()).unwrap();
        assert!((qfi_density(&psi).unwrap() - dense).abs() < 1e-14);
        assert_eq!(dense, 1.0);
    }

    #[test]
    fn qfi_equals_pairwise_correlation_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let z = pauli_z();
        for n in [4, 6, 9] {
            let psi = Mps::random(n, 6, &mut rng).unwrap();
            let q = qfi(&psi).unwrap();
            let mut pair_sum = 0.0;
            let mut mean = 0.0;
            for m in 0..n {
                mean += psi.expectation_one_site(z.view(), m).unwrap();
                for k in 0..n {
                    if m != k {
                        pair_sum += psi.correlation_two_site(z.view(), z.view(), m, k).unwrap();
                    }
                }
            }
            let expected = 1.0 + pair_sum / n as f64 - mean * mean / n as f64;
            assert!((q.density - expected).abs() < 1e-10);
            assert!(q.density <= n as f64 + 1e-10 && q.density >= -1e-12);
        }
    }

    #[test]
    fn profiles() {
        let ghz = Mps::ghz_state(8).unwrap();
        let prof = correlation_profile(&ghz).unwrap();
        assert_eq!(prof.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(prof.iter().all(|&(_, c)| (c - 1.0).abs() < 1e-12));
        let plus = Mps::product_state(8, plus_x()).unwrap();
        assert!(correlation_profile(&plus).unwrap().iter().all(|&(_, c)| c.abs() < 1e-12));
        assert!(correlation_profile(&Mps::ghz_state(3).unwrap()).is_err());
    }

    #[test]
    fn defect_densities() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        assert!(defect_density(&Mps::ghz_state(6).unwrap()).unwrap().abs() < 1e-12);
        assert!(defect_density(&Mps::product_state(6, [one, zero]).unwrap()).unwrap().abs() < 1e-12);
        let neel: Vec<[C64; 2]> = (0..6).map(|i| if i % 2 == 0 { [one, zero] } else { [zero, one] }).collect();
        assert!((defect_density(&Mps::product_of(&neel).unwrap()).unwrap() - 1.0).abs() < 1e-12);
        assert!((defect_density(&Mps::product_state(6, plus_x()).unwrap()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn witness_convention() {
        assert_eq!(entangled_particle_witness(1.0).unwrap(), 1);
        assert_eq!(entangled_particle_witness(7.6358).unwrap(), 8);
        assert_eq!(entangled_particle_witness(0.3).unwrap(), 1);
        assert_eq!(entangled_particle_witness(2.5).unwrap(), 3);
        assert_eq!(entangled_particle_witness(3.0).unwrap(), 3);
        assert!(entangled_particle_witness(-0.1).is_err());
        assert!(entangled_particle_witness(f64::NAN).is_err());
    }

    #[test]
    fn record_is_consistent_with_individual_measurements() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = Mps::random(8, 4, &mut rng).unwrap();
        let meta = RunMeta {
            tau_q: 1.0,
            alpha: 1.0,
            chi_max: 16,
            dt: 0.02,
        };
        let rec = measure(&psi, meta).unwrap();
        assert!((rec.f_q - qfi_density(&psi).unwrap()).abs() < 1e-12);
        assert!((rec.n_d - defect_density(&psi).unwrap()).abs() < 1e-12);
        assert_eq!(rec.c_z, correlation_profile(&psi).unwrap());
    }
}
