//! Monge–Ampère densities, boundary flux and decay laws.
//!
//! Conventions: `d^c u = i(∂̄u − ∂u)` and `dd^c u = 2i ∂∂̄u`, so that
//! `(dd^c |z|²)^n = 4ⁿ n! dV`. Densities are coefficients of
//! `dx1∧dy1∧…∧dxn∧dyn`, i.e. relative to Lebesgue measure of the chart.

use num_complex::Complex64;
use serde::Serialize;

use crate::certify::{hessian_hat, log_form, CollarData};
use crate::fit::{line_fit, loglog_fit, DecayFit, LineFit};
use crate::forms::AltForm;
use crate::geometry::{metric_at, wirtinger, ComplexDerivs, DomainSpec};
use crate::linalg::{c, CMat};
use crate::rng::{self, Purpose, CHUNK};
use crate::{par, Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `∂ρ`, `∂̄ρ`, `dρ`, `d^cρ` and `dd^cρ` expanded in `dx_j, dy_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForms {
    pub del: AltForm,
    pub delbar: AltForm,
    pub d: AltForm,
    pub dc: AltForm,
    pub ddc: AltForm,
}

pub fn one_forms(cd: &ComplexDerivs) -> OneForms {
    let dim = 2 * cd.n();
    let del = AltForm::from_dz(dim, cd.d_rho.as_slice());
    let delbar = AltForm::from_dzbar(dim, cd.dbar_rho.as_slice());
    let d = del.add(&delbar);
    let dc = delbar.sub(&del).scale(I);
    let ddc = AltForm::from_hermitian(dim, &cd.chess).scale(I * 2.0);
    OneForms {
        del,
        delbar,
        d,
        dc,
        ddc,
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Top coefficient of `(dd^cρ)^n` computed with the wedge engine.
pub fn ma_density(cd: &ComplexDerivs, n: usize) -> f64 {
    assert_eq!(cd.n(), n);
    one_forms(cd).ddc.power(n).top_coefficient().re
}

/// `4ⁿ·n!·det(M)` for a Hermitian `M`; equals the wedge-engine density of
/// the (1,1)-form `2i·M`.
pub fn ma_density_det(m: &CMat) -> f64 {
    let n = m.nrows();
    4f64.powi(n as i32) * factorial(n) * m.determinant().re
}

/// `d^cρ̂` and `dd^cρ̂` for `ρ̂ = −(−ρ)^η`, from the closed forms
/// `d^cρ̂ = η(−ρ)^{η−1} d^cρ` and
/// `dd^cρ̂ = 2iη(−ρ)^η (∂∂̄ρ/(−ρ) + (1−η) ∂ρ∧∂̄ρ/ρ²)`.
pub fn hat_forms(cd: &ComplexDerivs, rho_val: f64, eta: f64) -> Result<(AltForm, AltForm)> {
    if !(rho_val < 0.0) {
        return Err(Error::InvalidParameter(format!("ρ must be negative, got {rho_val}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    let f = one_forms(cd);
    let s = -rho_val;
    let dc_hat = f.dc.scale_re(eta * s.powf(eta - 1.0));
    let dim = 2 * cd.n();
    let levi = AltForm::from_hermitian(dim, &cd.chess).scale_re(1.0 / s);
    let normal = f.del.wedge(&f.delbar).scale_re((1.0 - eta) / (s * s));
    let ddc_hat = levi.add(&normal).scale(I * 2.0 * eta * s.powf(eta));
    Ok((dc_hat, ddc_hat))
}

/// Relative coefficient error of
/// `d^cρ̂∧(dd^cρ̂)^{n−1} = ηⁿ(−ρ)^{n(η−1)} d^cρ∧(dd^cρ)^{n−1}`.
pub fn pullback_identity_check(cd: &ComplexDerivs, rho_val: f64, eta: f64) -> Result<f64> {
    let n = cd.n();
    let (dc_hat, ddc_hat) = hat_forms(cd, rho_val, eta)?;
    let lhs = dc_hat.wedge(&ddc_hat.power(n - 1));
    let f = one_forms(cd);
    let factor = eta.powi(n as i32) * (-rho_val).powf(n as f64 * (eta - 1.0));
    let rhs = f.dc.wedge(&f.ddc.power(n - 1)).scale_re(factor);
    Ok(lhs.relative_distance(&rhs))
}

/// Density of `(dρ/|dρ|) ∧ d^cρ̂ ∧ (dd^cρ̂)^{n−1}` against Lebesgue measure,
/// which is the density of the pulled-back flux form against `dS`.
pub fn surface_flux_density(spec: &DomainSpec, p: &[f64], eta: f64) -> Result<f64> {
    let jet = spec.rho.eval_jet2(p)?;
    let cd = wirtinger(&jet, spec.n);
    flux_density_from(&cd, jet.grad(), jet.value, eta, p)
}

fn flux_density_from(cd: &ComplexDerivs, grad: &[f64], value: f64, eta: f64, p: &[f64]) -> Result<f64> {
    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !(gnorm > 0.0) {
        return Err(Error::DegenerateGradient { point: p.to_vec() });
    }
    let n = cd.n();
    let f = one_forms(cd);
    let (dc, ddc) = if eta == 1.0 {
        (f.dc, f.ddc)
    } else {
        hat_forms(cd, value, eta)?
    };
    let top = f.d.scale_re(1.0 / gnorm).wedge(&dc).wedge(&ddc.power(n - 1));
    Ok(top.top_coefficient().re)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
    pub n_draws: usize,
    pub n_hits: usize,
}

#[derive(Default, Clone, Copy)]
struct Partial {
    sum: f64,
    sum_sq: f64,
    hits: usize,
    err: bool,
}

/// `V·mean(f)` over uniform draws in the box, chunked by the sample streams.
fn box_mc<F>(spec: &DomainSpec, purpose: Purpose, draws: usize, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> Result<Option<f64>> + Sync + Send,
{
    if draws == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let chunks = draws.div_ceil(CHUNK) as u64;
    let dim = spec.real_dim();
    let partials = par::map_range(chunks, |k| {
        let mut rng = rng::stream(spec.seed, purpose, k);
        let mut p = vec![0.0; dim];
        let mut acc = Partial::default();
        let len = CHUNK.min(draws - k as usize * CHUNK);
        for _ in 0..len {
            rng::uniform_in_box(&mut rng, &spec.bbox, &mut p);
            match f(&p) {
                Ok(Some(v)) => {
                    acc.sum += v;
                    acc.sum_sq += v * v;
                    acc.hits += 1;
                }
                Ok(None) => {}
                Err(_) => acc.err = true,
            }
        }
        acc
    });
    let mut tot = Partial::default();
    for p in partials {
        if p.err {
            return Err(Error::Sampling("integrand evaluation failed on a sample".into()));
        }
        tot.sum += p.sum;
        tot.sum_sq += p.sum_sq;
        tot.hits += p.hits;
    }
    let n = draws as f64;
    let vol = spec.box_volume();
    let mean = tot.sum / n;
    let var = (tot.sum_sq / n - mean * mean).max(0.0);
    Ok(McEstimate {
        value: vol * mean,
        std_err: vol * (var / n).sqrt(),
        n_draws: draws,
        n_hits: tot.hits,
    })
}

/// `∫ g` over `{−eps0 < ρ < −t}` (or `{ρ < −t}` when `eps0` is `None`) for a
/// user integrand `g(point, ρ(point))`.
pub fn f_interior_with<G>(spec: &DomainSpec, t: f64, eps0: Option<f64>, g: G) -> Result<McEstimate>
where
    G: Fn(&[f64], f64) -> Result<f64> + Sync + Send,
{
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if let Some(e) = eps0 {
        if !(e > t) {
            return Err(Error::InvalidParameter(format!("eps0 = {e} must exceed t = {t}")));
        }
    }
    box_mc(spec, Purpose::Volume, spec.samples.volume, |p| {
        let v = spec.rho.value(p)?;
        let inside = v < -t && eps0.is_none_or(|e| v > -e);
        if !inside {
            return Ok(None);
        }
        Ok(Some(g(p, v)?))
    })
}

/// `f(t) = ∫_{Ω_{−t} \ Ω_{−eps0}} (dd^cρ̂)^n` by Monte Carlo over the box.
pub fn f_interior(spec: &DomainSpec, eta: f64, t: f64, eps0: Option<f64>) -> Result<McEstimate> {
    f_interior_with(spec, t, eps0, |p, _| {
        let jet = spec.rho.eval_jet2(p)?;
        let cd = wirtinger(&jet, spec.n);
        Ok(ma_density_det(&hessian_hat(&cd, jet.value, eta)?))
    })
}

/// `f(t)` at several levels from one set of draws.
pub fn f_interior_levels(spec: &DomainSpec, eta: f64, levels: &[f64]) -> Result<Vec<McEstimate>> {
    if levels.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("levels must be positive".into()));
    }
    let t_min = levels.iter().copied().fold(f64::INFINITY, f64::min);
    let draws = spec.samples.volume;
    let chunks = draws.div_ceil(CHUNK) as u64;
    let dim = spec.real_dim();
    let nl = levels.len();
    let partials = par::map_range(chunks, |k| -> Result<Vec<(f64, f64, usize)>> {
        let mut rng = rng::stream(spec.seed, Purpose::Volume, k);
        let mut p = vec![0.0; dim];
        let mut acc = vec![(0.0, 0.0, 0usize); nl];
        let len = CHUNK.min(draws - k as usize * CHUNK);
        for _ in 0..len {
            rng::uniform_in_box(&mut rng, &spec.bbox, &mut p);
            let v = spec.rho.value(&p)?;
            if v >= -t_min {
                continue;
            }
            let jet = spec.rho.eval_jet2(&p)?;
            let cd = wirtinger(&jet, spec.n);
            let d = ma_density_det(&hessian_hat(&cd, jet.value, eta)?);
            for (a, &t) in acc.iter_mut().zip(levels) {
                if v < -t {
                    a.0 += d;
                    a.1 += d * d;
                    a.2 += 1;
                }
            }
        }
        Ok(acc)
    });
    let mut tot = vec![(0.0, 0.0, 0usize); nl];
    for part in partials {
        for (t, a) in tot.iter_mut().zip(part?) {
            t.0 += a.0;
            t.1 += a.1;
            t.2 += a.2;
        }
    }
    let n = draws as f64;
    let vol = spec.box_volume();
    Ok(tot
        .into_iter()
        .map(|(s, s2, hits)| {
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0);
            McEstimate {
                value: vol * mean,
                std_err: vol * (var / n).sqrt(),
                n_draws: draws,
                n_hits: hits,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluxEstimate {
    pub t: f64,
    pub value: f64,
    pub std_err: f64,
    /// Shell thickness (in units of `ρ`).
    pub h: f64,
    pub n_hits: usize,
    /// Same estimate with the shell halved.
    pub value_half: f64,
    pub std_err_half: f64,
    /// `|value − value_half| ≤ std_err`.
    pub thickness_stable: bool,
}

/// `∫_{ρ = −t} (d^cρ̂ ∧ (dd^cρ̂)^{n−1})` by thin-shell Monte Carlo: draws
/// with `|ρ + t| < h/2` are weighted by `|∇ρ|/h`, with `h = t/100`.
pub fn flux_boundary(spec: &DomainSpec, eta: f64, t: f64) -> Result<FluxEstimate> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    let h = t / 100.0;
    let draws = spec.samples.shell;
    let chunks = draws.div_ceil(CHUNK) as u64;
    let dim = spec.real_dim();
    let partials = par::map_range(chunks, |k| -> Result<[f64; 5]> {
        let mut rng = rng::stream(spec.seed, Purpose::Shell, k);
        let mut p = vec![0.0; dim];
        // sum, sum², sum_half, sum_half², hits
        let mut acc = [0.0; 5];
        let len = CHUNK.min(draws - k as usize * CHUNK);
        for _ in 0..len {
            rng::uniform_in_box(&mut rng, &spec.bbox, &mut p);
            let off = (spec.rho.value(&p)? + t).abs();
            if off >= 0.5 * h {
                continue;
            }
            let jet = spec.rho.eval_jet2(&p)?;
            let cd = wirtinger(&jet, spec.n);
            let gnorm = jet.grad().iter().map(|g| g * g).sum::<f64>().sqrt();
            let w = flux_density_from(&cd, jet.grad(), jet.value, eta, &p)? * gnorm;
            acc[0] += w / h;
            acc[1] += (w / h).powi(2);
            acc[4] += 1.0;
            if off < 0.25 * h {
                acc[2] += 2.0 * w / h;
                acc[3] += (2.0 * w / h).powi(2);
            }
        }
        Ok(acc)
    });
    let mut tot = [0.0; 5];
    for part in partials {
        for (a, b) in tot.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let n = draws as f64;
    let vol = spec.box_volume();
    let est = |s: f64, s2: f64| {
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0);
        (vol * mean, vol * (var / n).sqrt())
    };
    let (value, std_err) = est(tot[0], tot[1]);
    let (value_half, std_err_half) = est(tot[2], tot[3]);
    Ok(FluxEstimate {
        t,
        value,
        std_err,
        h,
        n_hits: tot[4] as usize,
        value_half,
        std_err_half,
        thickness_stable: (value - value_half).abs() <= std_err.max(std_err_half),
    })
}

/// Point on the inward normal line `z − s·∇ρ(z)/|∇ρ(z)|` with `ρ = −t`.
pub fn normal_line_point(spec: &DomainSpec, z: &[f64], t: f64) -> Result<Vec<f64>> {
    let jet = spec.rho.eval_jet2(z)?;
    let g = jet.grad();
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(gn > 0.0) {
        return Err(Error::DegenerateGradient { point: z.to_vec() });
    }
    let dir: Vec<f64> = g.iter().map(|v| -v / gn).collect();
    let at = |s: f64| -> Vec<f64> { z.iter().zip(&dir).map(|(a, d)| a + s * d).collect() };
    let phi = |s: f64| -> Result<f64> { Ok(spec.rho.value(&at(s))? + t) };
    // bracket the root, then bisect; ρ decreases along the line near z
    let mut lo = 0.0;
    let mut hi = t / gn;
    let mut tries = 0;
    while phi(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 60 || hi > spec.diameter() {
            return Err(Error::Projection(format!("level −{t} not reached along the normal from {z:?}")));
        }
    }
    if phi(lo)? < 0.0 {
        return Err(Error::NotOnBoundary {
            residual: jet.value.abs(),
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1e-300) {
            break;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointwiseDecay {
    pub fit: DecayFit,
    /// Levi rank at the base point.
    pub rank: usize,
    /// `(n − 1 − rank) + n(η − 1)`.
    pub expected_slope: f64,
    /// `nη − k` and `nη − k − 1` with `k = rank + 1`.
    pub candidates: (f64, f64),
}

/// Log-log slope of the flux density along the inward normal from `z`.
pub fn decay_fit_pointwise(spec: &DomainSpec, z: &[f64], eta: f64, t_grid: &[f64]) -> Result<PointwiseDecay> {
    let levi = crate::levi::levi_at(spec, z)?;
    let values: Vec<f64> = t_grid
        .iter()
        .map(|&t| {
            let q = normal_line_point(spec, z, t)?;
            surface_flux_density(spec, &q, eta)
        })
        .collect::<Result<_>>()?;
    let floor = 1e-14 * spec.rho_scale();
    let fit = loglog_fit(t_grid, &values, floor)?;
    let n = spec.n as f64;
    let k = levi.rank as f64 + 1.0;
    Ok(PointwiseDecay {
        fit,
        rank: levi.rank,
        expected_slope: (n - 1.0 - levi.rank as f64) + n * (eta - 1.0),
        candidates: (n * eta - k, n * eta - k - 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    /// Smallest `c` with `∂∂̄(−(−ρ)^η) ≥ c(−ρ)^η(ω + ∂ρ∧∂̄ρ/ρ²)` per sample.
    pub worst_c: f64,
    pub witness: Vec<f64>,
    pub failed: usize,
    pub total: usize,
}

/// Samples the strengthened hypothesis on the default collar.
pub fn strengthened_hypothesis(spec: &DomainSpec, eta: f64) -> Result<HypothesisCheck> {
    let data = CollarData::default_for(spec)?;
    let vals = par::map_slice(&data.points, |cp| -> Result<f64> {
        let jet = spec.rho.eval_jet2(&cp.point)?;
        let cd = wirtinger(&jet, spec.n);
        let rho = jet.value;
        let lhs = log_form(&cd, rho, eta)? * c(eta);
        let g = metric_at(spec.metric, &cp.point).matrix().clone();
        let rhs = g + crate::certify::d_wedge_dbar(&cd) / c(rho * rho);
        // generalized eigenvalues of (lhs, rhs); rhs is positive definite
        let w = crate::linalg::Whitener::new(Some(&rhs))
            .ok_or_else(|| Error::Sampling("reference form is not positive definite".into()))?;
        Ok(w.eigvals(&lhs)[0])
    });
    let mut out = HypothesisCheck {
        worst_c: f64::INFINITY,
        witness: Vec::new(),
        failed: 0,
        total: data.points.len(),
    };
    for (cp, v) in data.points.iter().zip(vals) {
        let v = v?;
        if v <= spec.tol {
            out.failed += 1;
        }
        if v < out.worst_c {
            out.worst_c = v;
            out.witness = cp.point.clone();
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogDivergence {
    /// Fit of `f(t)` against `−log t`.
    pub fit: LineFit,
    pub t_grid: Vec<f64>,
    pub f: Vec<McEstimate>,
    pub hypothesis: Option<HypothesisCheck>,
}

/// Checks the strengthened hypothesis, then fits `f(t)` over
/// `{−eps0 < ρ < −t}` against `−log t`.
pub fn log_divergence_check(spec: &DomainSpec, eta: f64, t_grid: &[f64], eps0: f64) -> Result<LogDivergence> {
    let hyp = strengthened_hypothesis(spec, eta)?;
    if hyp.failed as f64 > 0.01 * hyp.total as f64 {
        return Err(Error::HypothesisFailed {
            failed: hyp.failed,
            total: hyp.total,
            worst_c: hyp.worst_c,
            witness: hyp.witness,
        });
    }
    let mut res = log_divergence_with(spec, t_grid, eps0, |p, _| {
        let jet = spec.rho.eval_jet2(p)?;
        let cd = wirtinger(&jet, spec.n);
        Ok(ma_density_det(&hessian_hat(&cd, jet.value, eta)?))
    })?;
    res.hypothesis = Some(hyp);
    Ok(res)
}

/// `f(t) = ∫_{−eps0<ρ<−t} g` on the grid, fitted against `−log t`.
pub fn log_divergence_with<G>(spec: &DomainSpec, t_grid: &[f64], eps0: f64, g: G) -> Result<LogDivergence>
where
    G: Fn(&[f64], f64) -> Result<f64> + Sync + Send,
{
    let f: Vec<McEstimate> = t_grid
        .iter()
        .map(|&t| f_interior_with(spec, t, Some(eps0), &g))
        .collect::<Result<_>>()?;
    let x: Vec<f64> = t_grid.iter().map(|t| -t.ln()).collect();
    let y: Vec<f64> = f.iter().map(|e| e.value).collect();
    Ok(LogDivergence {
        fit: line_fit(&x, &y)?,
        t_grid: t_grid.to_vec(),
        f,
        hypothesis: None,
    })
}
