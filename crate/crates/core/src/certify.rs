//! Diederich–Fornæss exponent certification, index estimation and the
//! Oka-type checks.
//!
//! All positivity tests are pointwise on collar samples: for a `C²`
//! defining function the distributional inequalities reduce to Hermitian
//! matrices being positive semidefinite. A matrix passes when its smallest
//! generalized eigenvalue (relative to the metric) divided by its spectral
//! radius is at least `−tol`.

use serde::Serialize;

use crate::geometry::{
    boundary_sample, collar_sample, metric_at, normalization_scale, project_to_level, wirtinger, ComplexDerivs,
    DomainSpec,
};
use crate::levi::{levi_from_derivs, weak_set_refined};
use crate::linalg::{c, outer, relative_margin, CMat, Whitener};
use crate::{par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateResult {
    pub eta: f64,
    pub verdict: Verdict,
    /// Smallest relative eigenvalue `λ_min/|λ|_max` over all samples.
    pub min_margin: f64,
    /// Smallest absolute generalized eigenvalue over all samples.
    pub min_eigenvalue: f64,
    pub witness: Vec<f64>,
    /// Band of `−ρ` that was sampled.
    pub collar: (f64, f64),
    pub n_samples: usize,
    /// Samples with relative margin below `−tol`.
    pub n_failed: usize,
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(())
}

fn check_rho(rho_val: f64) -> Result<()> {
    if !(rho_val < 0.0) {
        return Err(Error::InvalidParameter(format!("defining function must be negative, got {rho_val}")));
    }
    Ok(())
}

/// `∂r∧∂̄r` as a Hermitian matrix in the `Yᴴ·M·X` convention.
pub fn d_wedge_dbar(cd: &ComplexDerivs) -> CMat {
    outer(&cd.dbar_rho, &cd.dbar_rho)
}

/// `∂∂̄(−(−ρ)^η) = η(−ρ)^η [∂∂̄ρ/(−ρ) + (1−η) ∂ρ∧∂̄ρ/ρ²]`.
pub fn hessian_hat(cd: &ComplexDerivs, rho_val: f64, eta: f64) -> Result<CMat> {
    check_rho(rho_val)?;
    check_eta(eta)?;
    let pref = eta * (-rho_val).powf(eta);
    Ok(log_form(cd, rho_val, eta)? * c(pref))
}

/// `∂∂̄(−log(−ρ)) − η ∂ρ∧∂̄ρ/ρ² = ∂∂̄ρ/(−ρ) + (1−η) ∂ρ∧∂̄ρ/ρ²`.
pub fn log_form(cd: &ComplexDerivs, rho_val: f64, eta: f64) -> Result<CMat> {
    check_rho(rho_val)?;
    Ok(&cd.chess / c(-rho_val) + d_wedge_dbar(cd) * c((1.0 - eta) / (rho_val * rho_val)))
}

/// `∂∂̄(−log(−ρ)) = ∂∂̄ρ/(−ρ) + ∂ρ∧∂̄ρ/ρ²`.
pub fn oka_form(cd: &ComplexDerivs, rho_val: f64) -> Result<CMat> {
    log_form(cd, rho_val, 0.0)
}

/// Collar samples with their derivative data, reused across exponents.
#[derive(Debug, Clone)]
pub struct CollarData {
    pub collar: (f64, f64),
    pub points: Vec<CollarPoint>,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct CollarPoint {
    pub point: Vec<f64>,
    /// Derivatives of the normalized defining function `r = ρ/s`.
    pub derivs: ComplexDerivs,
    /// `r(point)`.
    pub value: f64,
    /// `s = |∇_ω ρ|` at the boundary projection.
    pub scale: f64,
    pub whitener: Whitener,
    pub metric: CMat,
}

impl CollarData {
    pub fn sample(spec: &DomainSpec, t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        let pts = collar_sample(spec, t_min, t_max, count)?;
        let points = par::map_slice(&pts, |p| -> Result<CollarPoint> {
            let s = normalization_scale(spec, p)?;
            let jet = spec.rho.eval_jet2(p)?.scale(1.0 / s);
            let metric = metric_at(spec.metric, p);
            Ok(CollarPoint {
                point: p.clone(),
                derivs: wirtinger(&jet, spec.n),
                value: jet.value,
                scale: s,
                whitener: metric.whitener(),
                metric: metric.matrix().clone(),
            })
        });
        Ok(CollarData {
            collar: (t_min, t_max),
            points: points.into_iter().collect::<Result<_>>()?,
            tol: spec.tol,
        })
    }

    /// Default collar and sample count of `spec`.
    pub fn default_for(spec: &DomainSpec) -> Result<Self> {
        let (lo, hi) = spec.default_collar();
        Self::sample(spec, lo, hi, spec.samples.collar)
    }

    /// Runs `form` at every sample and reduces to a certificate.
    pub fn certify_with<F>(&self, eta: f64, form: F) -> Result<CertificateResult>
    where
        F: Fn(&CollarPoint) -> Result<Vec<CMat>> + Sync + Send,
    {
        let margins = par::map_slice(&self.points, |cp| -> Result<(f64, f64)> {
            let mut worst = (f64::INFINITY, f64::INFINITY);
            for m in form(cp)? {
                let (rel, lo, _) = relative_margin(&m, &cp.whitener);
                if rel < worst.0 {
                    worst = (rel, lo);
                }
            }
            Ok(worst)
        });
        let mut min_margin = f64::INFINITY;
        let mut min_eigenvalue = f64::INFINITY;
        let mut witness = Vec::new();
        let mut n_failed = 0;
        for (cp, m) in self.points.iter().zip(margins) {
            let (rel, lo) = m?;
            if rel < -self.tol {
                n_failed += 1;
            }
            if rel < min_margin {
                min_margin = rel;
                witness = cp.point.clone();
            }
            min_eigenvalue = min_eigenvalue.min(lo);
        }
        let verdict = if min_margin < -self.tol {
            Verdict::Refuted
        } else {
            Verdict::Certified
        };
        Ok(CertificateResult {
            eta,
            verdict,
            min_margin,
            min_eigenvalue,
            witness,
            collar: self.collar,
            n_samples: self.points.len(),
            n_failed,
        })
    }

    /// Tests `∂∂̄(−(−r)^η) ≥ 0`.
    pub fn certify_exponent(&self, eta: f64) -> Result<CertificateResult> {
        check_eta(eta)?;
        self.certify_with(eta, |cp| Ok(vec![hessian_hat(&cp.derivs, cp.value, eta)?]))
    }

    /// Tests `∂∂̄(−log(−r)) ≥ η ∂r∧∂̄r/r²`.
    pub fn certify_via_log(&self, eta: f64) -> Result<CertificateResult> {
        check_eta(eta)?;
        self.certify_with(eta, |cp| Ok(vec![log_form(&cp.derivs, cp.value, eta)?]))
    }

    /// Smallest generalized eigenvalue of `∂∂̄(−log(−r))` over the samples.
    pub fn oka_index(&self) -> Result<OkaEstimate> {
        let vals = par::map_slice(&self.points, |cp| -> Result<f64> {
            Ok(cp.whitener.eigvals(&oka_form(&cp.derivs, cp.value)?)[0])
        });
        let mut k = f64::INFINITY;
        let mut witness = Vec::new();
        for (cp, v) in self.points.iter().zip(vals) {
            let v = v?;
            if v < k {
                k = v;
                witness = cp.point.clone();
            }
        }
        Ok(OkaEstimate {
            k,
            witness,
            collar: self.collar,
            n_samples: self.points.len(),
        })
    }
}

pub fn certify_exponent(spec: &DomainSpec, eta: f64) -> Result<CertificateResult> {
    check_eta(eta)?;
    CollarData::default_for(spec)?.certify_exponent(eta)
}

pub fn certify_via_log(spec: &DomainSpec, eta: f64) -> Result<CertificateResult> {
    check_eta(eta)?;
    CollarData::default_for(spec)?.certify_via_log(eta)
}

/// Outcome of [`certify_with_shrink`]: the final result and every collar
/// tried on the way.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShrinkResult {
    pub result: CertificateResult,
    pub attempts: Vec<CertificateResult>,
}

/// Certifies on `(t_min, t_max)`; a refutation is re-tested on collars
/// scaled by `factor` up to `rounds` times before it is final.
pub fn certify_with_shrink(
    spec: &DomainSpec,
    eta: f64,
    collar: (f64, f64),
    rounds: usize,
    factor: f64,
) -> Result<ShrinkResult> {
    check_eta(eta)?;
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::InvalidParameter(format!("shrink factor must lie in (0, 1), got {factor}")));
    }
    let (mut lo, mut hi) = collar;
    let mut attempts = Vec::new();
    for round in 0..=rounds {
        let data = CollarData::sample(spec, lo, hi, spec.samples.collar)?;
        let res = data.certify_exponent(eta)?;
        let done = res.verdict != Verdict::Refuted || round == rounds;
        attempts.push(res);
        if done {
            break;
        }
        lo *= factor;
        hi *= factor;
    }
    Ok(ShrinkResult {
        result: attempts.last().cloned().expect("at least one attempt"),
        attempts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IndexStatus {
    Bracketed,
    /// Certification failed already at the smallest exponent tried.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEstimate {
    /// Largest exponent certified.
    pub lo: f64,
    /// Smallest exponent refuted, or 1.
    pub hi: f64,
    pub iterations: usize,
    pub status: IndexStatus,
    /// Whether `hi` was actually refuted (false when `hi = 1` is untested or
    /// certified).
    pub hi_refuted: bool,
    pub collar: (f64, f64),
    pub n_samples: usize,
}

pub const INDEX_FLOOR: f64 = 0.01;

/// Bisection for the Diederich–Fornæss index of `ρ` on the default collar.
pub fn estimate_index(spec: &DomainSpec, resolution: f64) -> Result<IndexEstimate> {
    check_resolution(resolution)?;
    estimate_index_on(&CollarData::default_for(spec)?, resolution)
}

fn check_resolution(resolution: f64) -> Result<()> {
    if !(resolution > 1e-4 && resolution < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "resolution must lie in (1e-4, 0.5), got {resolution}"
        )));
    }
    Ok(())
}

pub fn estimate_index_on(data: &CollarData, resolution: f64) -> Result<IndexEstimate> {
    check_resolution(resolution)?;
    let passes = |eta: f64| -> Result<bool> { Ok(data.certify_exponent(eta)?.verdict == Verdict::Certified) };
    let mut iterations = 1;
    if !passes(INDEX_FLOOR)? {
        return Ok(IndexEstimate {
            lo: 0.0,
            hi: INDEX_FLOOR,
            iterations,
            status: IndexStatus::Inconclusive,
            hi_refuted: true,
            collar: data.collar,
            n_samples: data.points.len(),
        });
    }
    let (mut lo, mut hi) = (INDEX_FLOOR, 1.0);
    iterations += 1;
    let mut hi_refuted = !passes(1.0)?;
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        if passes(mid)? {
            lo = mid;
        } else {
            hi = mid;
            hi_refuted = true;
        }
    }
    Ok(IndexEstimate {
        lo,
        hi,
        iterations,
        status: IndexStatus::Bracketed,
        hi_refuted,
        collar: data.collar,
        n_samples: data.points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OkaEstimate {
    /// Infimum over the samples of the smallest eigenvalue of
    /// `∂∂̄(−log(−r))` relative to the metric.
    pub k: f64,
    pub witness: Vec<f64>,
    pub collar: (f64, f64),
    pub n_samples: usize,
}

pub fn estimate_oka_index(spec: &DomainSpec) -> Result<OkaEstimate> {
    CollarData::default_for(spec)?.oka_index()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichResult {
    /// Smallest `K₁` with `∂∂̄r(X,X̄)/(−r) ≤ K·K₁|X|²` on the region.
    pub k1: f64,
    pub min_ratio: f64,
    pub witness_max: Vec<f64>,
    pub witness_min: Vec<f64>,
    pub n_points: usize,
    /// Whether the region was built from weak points (otherwise from all
    /// boundary samples, the weak set being empty).
    pub near_weak_set: bool,
}

/// Depths of the sandwich region, log-spaced over the default collar.
fn sandwich_depths(spec: &DomainSpec) -> Vec<f64> {
    let (lo, hi) = spec.default_collar();
    (0..5).map(|k| lo * (hi / lo).powf(k as f64 / 4.0)).collect()
}

/// Checks `K|X_τ|² ≤ ∂∂̄r(X_τ, X̄_τ)/(−r) ≤ K·K₁|X_τ|²` for tangential `X_τ`
/// on points below the weak set and returns the smallest feasible `K₁`.
pub fn verify_sandwich(spec: &DomainSpec, k: f64) -> Result<SandwichResult> {
    let b = boundary_sample(spec, spec.samples.boundary)?;
    let weak = weak_set_refined(spec, &b.points, 16)?;
    let near_weak_set = !weak.is_empty();
    let anchors: Vec<Vec<f64>> = if near_weak_set {
        weak.iter().map(|d| d.point.clone()).collect()
    } else {
        b.points
    };
    verify_sandwich_at(spec, k, &anchors, near_weak_set)
}

pub fn verify_sandwich_at(
    spec: &DomainSpec,
    k: f64,
    anchors: &[Vec<f64>],
    near_weak_set: bool,
) -> Result<SandwichResult> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("K must be positive, got {k}")));
    }
    let depths = sandwich_depths(spec);
    let tasks: Vec<(&Vec<f64>, f64)> = anchors.iter().flat_map(|a| depths.iter().map(move |&t| (a, t))).collect();
    let ratios = par::map_slice(&tasks, |(a, t)| -> Option<(Vec<f64>, f64, f64)> {
        let q = project_to_level(spec, a, -t).ok()?.point;
        let jet = spec.rho.eval_jet2(&q).ok()?;
        let cd = wirtinger(&jet, spec.n);
        let metric = metric_at(spec.metric, &q);
        let data = levi_from_derivs(q.clone(), cd, metric, spec.rank_tol).ok()?;
        if data.frame.ncols() == 0 {
            return None;
        }
        let form = &data.levi / c(-jet.value);
        let ev = crate::linalg::eigvalsh(&form);
        Some((q, ev[0] / k, ev[ev.len() - 1] / k))
    });
    let mut res = SandwichResult {
        k1: f64::NEG_INFINITY,
        min_ratio: f64::INFINITY,
        witness_max: Vec::new(),
        witness_min: Vec::new(),
        n_points: 0,
        near_weak_set,
    };
    for (q, lo, hi) in ratios.into_iter().flatten() {
        res.n_points += 1;
        if hi > res.k1 {
            res.k1 = hi;
            res.witness_max = q.clone();
        }
        if lo < res.min_ratio {
            res.min_ratio = lo;
            res.witness_min = q;
        }
    }
    if res.n_points == 0 {
        return Err(Error::Sampling("no sandwich points could be placed below the boundary".into()));
    }
    if res.min_ratio < 1.0 - spec.tol {
        return Err(Error::LowerBoundViolated {
            ratio: res.min_ratio,
            witness: res.witness_min.clone(),
            k1: res.k1,
        });
    }
    Ok(res)
}

/// Checks both inequalities
/// `∂∂̄(−log(−r)) ≥ cω + (1 − c/K)η ∂r∧∂̄r/r²` and
/// `∂∂̄(−(−r)^η) ≥ η(−r)^η (cω + (1 − c/K)η ∂r∧∂̄r/r²)` on the default collar.
///
/// When `i0` is given and `eta ≥ i0` the hypothesis is not met and the
/// result is `Inconclusive` without sampling.
pub fn ohsawa_sibony_check(spec: &DomainSpec, k: f64, c0: f64, eta: f64, i0: Option<f64>) -> Result<CertificateResult> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("K must be positive, got {k}")));
    }
    if !(c0 > 0.0 && c0 < k) {
        return Err(Error::InvalidParameter(format!("c must lie in (0, K) = (0, {k}), got {c0}")));
    }
    check_eta(eta)?;
    let collar = spec.default_collar();
    if let Some(i0) = i0 {
        if eta >= i0 {
            return Ok(CertificateResult {
                eta,
                verdict: Verdict::Inconclusive,
                min_margin: f64::NAN,
                min_eigenvalue: f64::NAN,
                witness: Vec::new(),
                collar,
                n_samples: 0,
                n_failed: 0,
            });
        }
    }
    let data = CollarData::default_for(spec)?;
    os_check_on(&data, k, c0, eta)
}

pub fn os_check_on(data: &CollarData, k: f64, c0: f64, eta: f64) -> Result<CertificateResult> {
    let coeff = (1.0 - c0 / k) * eta;
    data.certify_with(eta, |cp| {
        let r = cp.value;
        let dd = d_wedge_dbar(&cp.derivs) / c(r * r);
        let rhs = &cp.metric * c(c0) + &dd * c(coeff);
        let first = oka_form(&cp.derivs, r)? - &rhs;
        let pref = eta * (-r).powf(eta);
        let second = hessian_hat(&cp.derivs, r, eta)? - rhs * c(pref);
        Ok(vec![first, second])
    })
}
