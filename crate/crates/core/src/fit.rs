//! Least-squares fits behind the scaling analysis: finite-size extrapolation
//! in `1/N`, log-log power laws and the Kibble-Zurek exponent predictor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub stderr_intercept: f64,
    pub stderr_slope: f64,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

/// Weighted least squares. `weights` are inverse variances; `None` means
/// ordinary least squares. Standard errors use the residual variance with
/// `n − 2` degrees of freedom (zero when only two points are given).
pub fn linear_fit(x: &[f64], y: &[f64], weights: Option<&[f64]>) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::InvalidArgument("x, y and weights must have equal lengths".into()));
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("fit data must be finite".into()));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.iter().any(|&wi| !(wi > 0.0) || !wi.is_finite()) {
                return Err(Error::InvalidInput("weights must be positive and finite".into()));
            }
            w.to_vec()
        }
        None => vec![1.0; n],
    };
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * (xi - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((xi, yi), wi)| wi * (xi - xm) * (yi - ym)).sum();
    let spread = x.iter().fold(0.0f64, |m, xi| m.max((xi - xm).abs()));
    if !(sxx > 0.0) || spread <= 1e-12 * xm.abs().max(1.0) {
        return Err(Error::SingularFit("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(xi, yi)| yi - intercept - slope * xi).collect();
    let rss: f64 = residuals.iter().zip(&w).map(|(r, wi)| wi * r * r).sum();
    let sst: f64 = y.iter().zip(&w).map(|(yi, wi)| wi * (yi - ym).powi(2)).sum();
    let r_squared = if sst > 0.0 { (1.0 - rss / sst).clamp(0.0, 1.0) } else { 1.0 };
    let sigma2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    let stderr_slope = (sigma2 / sxx).sqrt();
    let stderr_intercept = (sigma2 * (1.0 / sw + xm * xm / sxx)).sqrt();
    Ok(LinearFit {
        intercept,
        slope,
        stderr_intercept,
        stderr_slope,
        residuals,
        r_squared,
    })
}

fn distinct(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// `f_Q(N) ≈ f_Q^∞ − A/N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSizeFit {
    pub f_q_infinity: f64,
    pub a: f64,
    pub stderr_intercept: f64,
    pub points: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub residual_rms: f64,
}

/// Ordinary least squares of `f_Q` against `1/N`.
pub fn finite_size_extrapolate(points: &[(f64, f64)]) -> Result<FiniteSizeFit> {
    finite_size_extrapolate_weighted(points, None)
}

pub fn finite_size_extrapolate_weighted(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<FiniteSizeFit> {
    if points.iter().any(|&(n, _)| !(n > 0.0)) {
        return Err(Error::InvalidInput("system sizes must be positive".into()));
    }
    let sizes = distinct(points.iter().map(|p| p.0));
    if sizes < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 distinct sizes, got {sizes}")));
    }
    let x: Vec<f64> = points.iter().map(|p| 1.0 / p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = linear_fit(&x, &y, weights)?;
    let rms = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / points.len() as f64).sqrt();
    Ok(FiniteSizeFit {
        f_q_infinity: fit.intercept,
        a: -fit.slope,
        stderr_intercept: fit.stderr_intercept,
        points: points.to_vec(),
        residuals: fit.residuals,
        residual_rms: rms,
    })
}

/// `value ≈ exp(log_prefactor)·τ^exponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub stderr_exponent: f64,
    pub log_prefactor: f64,
    pub points: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

/// Least squares on `(ln τ, ln value)`.
pub fn power_law_fit(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    power_law_fit_weighted(points, None)
}

pub fn power_law_fit_weighted(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<PowerLawFit> {
    if let Some(&(t, v)) = points.iter().find(|&&(t, v)| !(t > 0.0) || !(v > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "power-law fit needs positive rates and values, got ({t}, {v})"
        )));
    }
    let rates = distinct(points.iter().map(|p| p.0));
    if rates < 4 {
        return Err(Error::InsufficientData(format!("need at least 4 distinct rates, got {rates}")));
    }
    let x: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&x, &y, weights)?;
    Ok(PowerLawFit {
        exponent: fit.slope,
        stderr_exponent: fit.stderr_slope,
        log_prefactor: fit.intercept,
        points: points.to_vec(),
        residuals: fit.residuals,
        r_squared: fit.r_squared,
    })
}

/// Scaling exponents for a power-law ramp `|λ|^α` across a critical point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KzPrediction {
    pub d: u32,
    pub nu: f64,
    pub z: f64,
    pub alpha: f64,
    pub nu_lambda: f64,
    pub z_lambda: f64,
    /// `n_d ~ τ^defect_exponent`.
    pub defect_exponent: f64,
    /// `f_Q ~ τ^qfi_exponent`.
    pub qfi_exponent: f64,
    pub freezeout_time_exponent: f64,
    pub gap_exponent: f64,
}

pub fn kz_predict(d: u32, nu: f64, z: f64, alpha: f64) -> Result<KzPrediction> {
    if d == 0 || !(nu > 0.0 && z > 0.0 && alpha > 0.0) || !(nu * z * alpha).is_finite() {
        return Err(Error::InvalidArgument("d, nu, z and alpha must be positive".into()));
    }
    let nu_lambda = alpha * nu;
    let z_lambda = z;
    let defect_exponent = -(d as f64) * nu_lambda / (z_lambda * nu_lambda + 1.0);
    let zn = z * nu;
    Ok(KzPrediction {
        d,
        nu,
        z,
        alpha,
        nu_lambda,
        z_lambda,
        defect_exponent,
        qfi_exponent: -defect_exponent,
        freezeout_time_exponent: zn / (zn + 1.0),
        gap_exponent: -zn / (zn + 1.0),
    })
}

/// `α/(α + 1)`: the 1D Ising QFI exponent for a power-law ramp.
pub fn ising_qfi_exponent(alpha: f64) -> f64 {
    alpha / (alpha + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_finite_size_data() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0].iter().map(|&n| (n, 7.6358 - 12.0 / n)).collect();
        let f = finite_size_extrapolate(&pts).unwrap();
        assert!((f.f_q_infinity - 7.6358).abs() < 1e-12);
        assert!((f.a - 12.0).abs() < 1e-10);
        assert!(f.residual_rms < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn constant_data() {
        let pts = [(10.0, 3.0), (20.0, 3.0), (40.0, 3.0), (80.0, 3.0)];
        let f = finite_size_extrapolate(&pts).unwrap();
        assert!((f.f_q_infinity - 3.0).abs() < 1e-12);
        assert!(f.a.abs() < 1e-10);
    }

    #[test]
    fn finite_size_errors() {
        assert!(matches!(
            finite_size_extrapolate(&[(16.0, 1.0), (32.0, 2.0)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            finite_size_extrapolate(&[(16.0, 1.0), (16.0, 2.0), (32.0, 2.0)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            linear_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], None),
            Err(Error::SingularFit(_))
        ));
    }

    #[test]
    fn power_laws() {
        let taus = [1.0, 2.0, 4.0, 8.0, 16.0];
        let pts: Vec<_> = taus.iter().map(|&t: &f64| (t, 3.0 * t.sqrt())).collect();
        let f = power_law_fit(&pts).unwrap();
        assert!((f.exponent - 0.5).abs() < 1e-12);
        assert!((f.log_prefactor - 3f64.ln()).abs() < 1e-12);
        assert!(f.residuals.iter().all(|r| r.abs() < 1e-12));
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<_> = taus.iter().map(|&t: &f64| (t, t.powf(-0.5))).collect();
        assert!((power_law_fit(&pts).unwrap().exponent + 0.5).abs() < 1e-12);
    }

    #[test]
    fn power_law_errors() {
        let bad = [(1.0, 1.0), (2.0, -1.0), (4.0, 1.0), (8.0, 1.0)];
        assert!(matches!(power_law_fit(&bad), Err(Error::InvalidInput(_))));
        let few = [(1.0, 1.0), (2.0, 1.0), (4.0, 1.0)];
        assert!(matches!(power_law_fit(&few), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn weighted_fit_ignores_noise_on_light_points() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 100.0];
        let f = linear_fit(&x, &y, Some(&[1e6, 1e6, 1e6, 1e-9])).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-6);
        assert!((f.intercept - 1.0).abs() < 1e-6);
    }

    #[test]
    fn intercept_error_bars_are_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let sizes: Vec<f64> = (0..16).map(|i| 16.0 + 4.0 * i as f64).collect();
        let trials = 1000;
        let mut covered = 0;
        for _ in 0..trials {
            let pts: Vec<_> = sizes.iter().map(|&n| (n, 7.6 - 12.0 / n + noise.sample(&mut rng))).collect();
            let f = finite_size_extrapolate(&pts).unwrap();
            if (f.f_q_infinity - 7.6).abs() <= 2.0 * f.stderr_intercept {
                covered += 1;
            }
        }
        assert!(covered as f64 / trials as f64 >= 0.90, "coverage {covered}/{trials}");
    }

    #[test]
    fn kz_exponents() {
        let p = kz_predict(1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(p.defect_exponent, -0.5);
        assert_eq!(p.qfi_exponent, 0.5);
        assert_eq!(p.freezeout_time_exponent, 0.5);
        assert_eq!(p.gap_exponent, -0.5);
        assert!((kz_predict(1, 1.0, 1.0, 2.0).unwrap().qfi_exponent - 2.0 / 3.0).abs() < 1e-15);
        assert!((kz_predict(1, 1.0, 1.0, 3.0).unwrap().qfi_exponent - 0.75).abs() < 1e-15);
        assert!(kz_predict(1, 0.0, 1.0, 1.0).is_err());
        assert!(kz_predict(0, 1.0, 1.0, 1.0).is_err());
    }
}
