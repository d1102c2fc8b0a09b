//! The `fit` command: scaling fits over record CSVs, rendered as JSON reports.

use std::collections::BTreeMap;
use std::path::Path;

use kzqfi::fit::{finite_size_extrapolate, kz_predict, power_law_fit, FiniteSizeFit};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    FiniteSize,
    PowerLaw,
    KzPredict,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub mode: FitMode,
    /// Value column to fit (`f_q` or `n_d`).
    pub column: String,
    /// Extrapolate each rate over N before the power-law fit.
    pub extrapolate: bool,
    pub engine: Option<String>,
    pub tau_q: Option<f64>,
    pub alpha: Option<f64>,
    pub n: Option<usize>,
    /// `(d, nu, z)` for kz-predict.
    pub universality: (u32, f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: FitMode::PowerLaw,
            column: "f_q".into(),
            extrapolate: false,
            engine: None,
            tau_q: None,
            alpha: None,
            n: None,
            universality: (1, 1.0, 1.0),
        }
    }
}

/// One parsed row: `(N, tau_q, alpha, value)`; `N` is `None` for the infinite chain.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Point {
    n: Option<f64>,
    tau_q: f64,
    alpha: f64,
    value: f64,
}

fn schema(file: &Path, message: String) -> CliError {
    CliError::Schema {
        file: file.into(),
        message,
    }
}

fn load_points(path: &Path, opts: &FitOptions) -> Result<Vec<Point>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| schema(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| schema(path, e.to_string()))?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| schema(path, format!("missing column `{name}`")))
    };
    let (i_n, i_tau, i_alpha, i_val) = (col("N")?, col("tau_q")?, col("alpha")?, col(&opts.column)?);
    let i_engine = headers.iter().position(|h| h == "engine");

    let mut points = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| schema(path, e.to_string()))?;
        let row = line + 2;
        let num = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("").trim();
            raw.parse()
                .map_err(|_| schema(path, format!("row {row}: column `{name}` holds `{raw}`, expected a number")))
        };
        if let (Some(want), Some(i)) = (&opts.engine, i_engine) {
            if rec.get(i) != Some(want.as_str()) {
                continue;
            }
        }
        let n = match rec.get(i_n).unwrap_or("").trim() {
            "thermodynamic" | "inf" => None,
            _ => Some(num(i_n, "N")?),
        };
        let p = Point {
            n,
            tau_q: num(i_tau, "tau_q")?,
            alpha: num(i_alpha, "alpha")?,
            value: num(i_val, &opts.column)?,
        };
        let keep = opts.tau_q.is_none_or(|t| t == p.tau_q)
            && opts.alpha.is_none_or(|a| a == p.alpha)
            && opts.n.is_none_or(|n| p.n == Some(n as f64));
        if keep {
            points.push(p);
        }
    }
    if points.is_empty() {
        return Err(CliError::Usage(format!("no rows of {} match the filters", path.display())));
    }
    Ok(points)
}

fn single<T: PartialEq + Copy + std::fmt::Debug>(values: impl Iterator<Item = T>, what: &str) -> Result<T> {
    let mut seen: Vec<T> = Vec::new();
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
        }
    }
    match seen.as_slice() {
        [one] => Ok(*one),
        _ => Err(CliError::Usage(format!("rows mix several {what} values {seen:?}; filter with --{what}"))),
    }
}

#[derive(Serialize)]
struct Extrapolation {
    tau_q: f64,
    intercept: f64,
    a: f64,
    stderr: f64,
    points: Vec<(f64, f64)>,
    residuals: Vec<f64>,
    residual_rms: f64,
}

fn finite_size(points: &[Point]) -> Result<FiniteSizeFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| p.n.map(|n| (n, p.value)))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Usage("finite-size fits need finite N".into()))?;
    Ok(finite_size_extrapolate(&pts)?)
}

fn extrapolation(tau_q: f64, f: FiniteSizeFit) -> Extrapolation {
    Extrapolation {
        tau_q,
        intercept: f.f_q_infinity,
        a: f.a,
        stderr: f.stderr_intercept,
        points: f.points,
        residuals: f.residuals,
        residual_rms: f.residual_rms,
    }
}

/// Runs one fit and returns the JSON report.
pub fn fit_command(records: Option<&Path>, opts: &FitOptions) -> Result<Value> {
    if opts.mode == FitMode::KzPredict {
        let (d, nu, z) = opts.universality;
        let p = kz_predict(d, nu, z, opts.alpha.unwrap_or(1.0))?;
        return Ok(serde_json::to_value(p)?);
    }
    let path = records.ok_or_else(|| CliError::Usage("fit needs a records CSV".into()))?;
    let points = load_points(path, opts)?;
    let alpha = single(points.iter().map(|p| p.alpha), "alpha")?;

    match opts.mode {
        FitMode::FiniteSize => {
            let tau_q = single(points.iter().map(|p| p.tau_q), "tau-q")?;
            let e = extrapolation(tau_q, finite_size(&points)?);
            Ok(json!({
                "mode": "finite-size",
                "column": opts.column,
                "alpha": alpha,
                "tau_q": tau_q,
                "intercept": e.intercept,
                "a": e.a,
                "stderr": e.stderr,
                "points": e.points,
                "residuals": e.residuals,
                "residual_rms": e.residual_rms,
            }))
        }
        FitMode::PowerLaw => {
            // exact-value grouping; rates come from config files, not arithmetic
            let mut groups: BTreeMap<u64, Vec<Point>> = BTreeMap::new();
            for p in &points {
                groups.entry(p.tau_q.to_bits()).or_default().push(*p);
            }
            let mut extrapolations = Vec::new();
            let mut series = Vec::new();
            for (bits, group) in groups {
                let tau_q = f64::from_bits(bits);
                if opts.extrapolate {
                    let e = extrapolation(tau_q, finite_size(&group)?);
                    series.push((tau_q, e.intercept));
                    extrapolations.push(e);
                } else {
                    let [p] = group.as_slice() else {
                        return Err(CliError::Usage(format!(
                            "{} rows at tau_q = {tau_q}; pass --extrapolate or filter with --n",
                            group.len()
                        )));
                    };
                    series.push((tau_q, p.value));
                }
            }
            let fit = power_law_fit(&series)?;
            Ok(json!({
                "mode": "power-law",
                "column": opts.column,
                "alpha": alpha,
                "exponent": fit.exponent,
                "stderr": fit.stderr_exponent,
                "intercept": fit.log_prefactor,
                "r_squared": fit.r_squared,
                "points": fit.points,
                "residuals": fit.residuals,
                "extrapolations": extrapolations,
            }))
        }
        FitMode::KzPredict => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn finite_size_recovers_synthetic_intercept() {
        let mut body = String::from("engine,N,tau_q,alpha,f_q,n_d\n");
        for n in [16.0, 32.0, 64.0] {
            body += &format!("mps,{n},2,1,{},0.1\n", 7.6358 - 12.0 / n);
        }
        let f = csv_file(&body);
        let opts = FitOptions {
            mode: FitMode::FiniteSize,
            ..Default::default()
        };
        let r = fit_command(Some(f.path()), &opts).unwrap();
        assert!((r["intercept"].as_f64().unwrap() - 7.6358).abs() < 1e-12);
        assert!((r["a"].as_f64().unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn extrapolated_power_law() {
        let mut body = String::from("N,tau_q,alpha,f_q\n");
        for tau in [1.0f64, 2.0, 4.0, 8.0] {
            for n in [16.0, 24.0, 32.0] {
                body += &format!("{n},{tau},1,{}\n", 3.0 * tau.sqrt() - 5.0 / n);
            }
        }
        let f = csv_file(&body);
        let opts = FitOptions {
            extrapolate: true,
            ..Default::default()
        };
        let r = fit_command(Some(f.path()), &opts).unwrap();
        assert!((r["exponent"].as_f64().unwrap() - 0.5).abs() < 1e-10);
        assert_eq!(r["extrapolations"].as_array().unwrap().len(), 4);

        let plain = FitOptions::default();
        assert!(matches!(fit_command(Some(f.path()), &plain), Err(CliError::Usage(_))));
    }

    #[test]
    fn missing_column_is_named() {
        let f = csv_file("N,tau_q,f_q\n16,1,2\n");
        let err = fit_command(Some(f.path()), &FitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("`alpha`"), "{err}");
        assert_eq!(err.exit_code(), crate::error::exit::USAGE);
    }

    #[test]
    fn kz_prediction_report() {
        let opts = FitOptions {
            mode: FitMode::KzPredict,
            alpha: Some(2.0),
            ..Default::default()
        };
        let r = fit_command(None, &opts).unwrap();
        assert!((r["qfi_exponent"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }
}
