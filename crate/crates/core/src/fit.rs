//! Least-squares fits for decay laws.

use serde::Serialize;

use crate::{Error, Result};

/// Straight-line fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_se: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::Fit("x and y lengths differ".into()));
    }
    if n < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        slope_se,
    })
}

/// Power-law fit `value ≈ C·t^slope` on a log-log scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Points whose value was at or below the positivity floor.
    pub excluded: usize,
    pub floor: f64,
}

/// Fits `log value` against `log t`, skipping values `≤ floor`.
pub fn loglog_fit(t: &[f64], values: &[f64], floor: f64) -> Result<DecayFit> {
    if t.len() != values.len() {
        return Err(Error::Fit("t grid and values differ in length".into()));
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (&ti, &vi) in t.iter().zip(values) {
        if ti > 0.0 && vi > floor {
            lx.push(ti.ln());
            ly.push(vi.ln());
        }
    }
    let excluded = t.len() - lx.len();
    let line = line_fit(&lx, &ly).map_err(|e| match e {
        Error::Fit(msg) => Error::Fit(format!(
            "{msg} ({excluded} of {} values at or below the floor {floor:e})",
            t.len()
        )),
        other => other,
    })?;
    Ok(DecayFit {
        slope: line.slope,
        intercept: line.intercept,
        r2: line.r2,
        slope_se: line.slope_se,
        t_grid: t.to_vec(),
        values: values.to_vec(),
        excluded,
        floor,
    })
}

/// `k` log-spaced values from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, k: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && b > a) || k < 2 {
        return Err(Error::InvalidParameter(format!(
            "grid needs 0 < a < b and k ≥ 2, got {a}:{b}:{k}"
        )));
    }
    let r = (b / a).ln();
    Ok((0..k).map(|i| a * (r * i as f64 / (k - 1) as f64).exp()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let t = log_grid(1e-4, 1e-2, 7).unwrap();
        let v: Vec<f64> = t.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        let f = loglog_fit(&t, &v, 1e-14).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(f.excluded, 0);
    }

    #[test]
    fn floor_excludes_and_reports() {
        let t = [1.0, 2.0, 3.0];
        let f = loglog_fit(&t, &[0.0, 0.0, 1.0], 1e-14);
        assert!(matches!(f, Err(Error::Fit(msg)) if msg.contains("2 of 3")));
        let f = loglog_fit(&[1.0, 2.0, 4.0], &[1.0, 2.0, 0.0], 1e-14).unwrap();
        assert_eq!(f.excluded, 1);
        assert!((f.slope - 1.0).abs() < 1e-12);
    }
}
