//! Levi forms on the boundary, the weakly pseudoconvex set and the scalar
//! invariants `S(r)` and `K₀`.

use serde::Serialize;

use crate::geometry::{metric_at, project_to_level, wirtinger, ComplexDerivs, DomainSpec, MetricTensor};
use crate::linalg::{c, eigh, inner, norm, CMat, CVec};
use crate::{par, Error, Result};

/// Levi geometry at one boundary point.
#[derive(Debug, Clone)]
pub struct LeviData {
    pub point: Vec<f64>,
    pub derivs: ComplexDerivs,
    pub metric: MetricTensor,
    /// Unit (1,0) normal, dual to `∂ρ/|∂ρ|_ω`.
    pub l_nu: CVec,
    /// Projector onto `T^{1,0} = {X : Xρ = 0}`, orthogonal for the metric.
    pub p_tau: CMat,
    /// Metric-orthonormal tangential frame (columns), `n × (n−1)`.
    pub frame: CMat,
    /// `∂∂̄ρ` restricted to `frame`.
    pub levi: CMat,
    /// Ascending eigenvalues of `levi`.
    pub eigs: Vec<f64>,
    /// Tangential eigenvectors in `C^n` coordinates, matching `eigs`.
    pub eigvecs: CMat,
    pub rank: usize,
    /// Orthonormal basis of the Levi null space (columns).
    pub null_basis: CMat,
}

impl LeviData {
    /// Smallest Levi eigenvalue; `+∞` for `n = 1`.
    pub fn min_eig(&self) -> f64 {
        self.eigs.first().copied().unwrap_or(f64::INFINITY)
    }

    /// Distance from the largest "null" eigenvalue to the smallest positive
    /// one, for auditing rank decisions.
    pub fn spectral_gap(&self) -> Option<f64> {
        let k = self.eigs.len() - self.rank;
        if k == 0 || self.rank == 0 {
            return None;
        }
        Some(self.eigs[k] - self.eigs[k - 1])
    }

    /// Eigenvectors with eigenvalue `≤ tol`.
    pub fn null_space(&self, tol: f64) -> CMat {
        let k = self.eigs.iter().take_while(|&&e| e <= tol).count();
        self.eigvecs.columns(0, k).into_owned()
    }
}

pub fn levi_at(spec: &DomainSpec, p: &[f64]) -> Result<LeviData> {
    let jet = spec.rho.eval_jet2(p)?;
    let tol = spec.tol * spec.rho_scale();
    if jet.value.abs() > tol {
        return Err(Error::NotOnBoundary {
            residual: jet.value.abs(),
        });
    }
    let derivs = wirtinger(&jet, spec.n);
    let metric = metric_at(spec.metric, p);
    levi_from_derivs(p.to_vec(), derivs, metric, spec.rank_tol)
}

pub(crate) fn levi_from_derivs(
    point: Vec<f64>,
    derivs: ComplexDerivs,
    metric: MetricTensor,
    rank_tol: f64,
) -> Result<LeviData> {
    let n = derivs.n();
    let d_norm = derivs.d_norm(&metric);
    if !(d_norm > 0.0) {
        return Err(Error::DegenerateGradient { point });
    }
    let g = metric.as_option();
    let l_nu = metric.solve(&derivs.dbar_rho) / c(d_norm);
    let p_tau = CMat::identity(n, n) - &l_nu * l_nu.adjoint() * metric.matrix();
    let frame = tangential_frame(&l_nu, g);
    let levi = frame.adjoint() * &derivs.chess * &frame;
    let (eigs, vecs) = eigh(&levi);
    let eigvecs = &frame * vecs;
    let rank = eigs.iter().filter(|&&e| e > rank_tol).count();
    let null_basis = eigvecs.columns(0, eigs.len() - rank).into_owned();
    Ok(LeviData {
        point,
        derivs,
        metric,
        l_nu,
        p_tau,
        frame,
        levi,
        eigs,
        eigvecs,
        rank,
        null_basis,
    })
}

/// Gram–Schmidt in the metric, seeded with `l_nu` and then the coordinate
/// vectors; returns the `n − 1` vectors after `l_nu`.
fn tangential_frame(l_nu: &CVec, g: Option<&CMat>) -> CMat {
    let n = l_nu.len();
    let mut basis: Vec<CVec> = vec![l_nu.clone()];
    for k in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = CVec::zeros(n);
        v[k] = c(1.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = inner(g, &v, b);
                v -= b * proj;
            }
        }
        let len = norm(g, &v);
        if len > 1e-8 {
            basis.push(v / c(len));
        }
    }
    let cols: Vec<CVec> = basis.into_iter().skip(1).collect();
    if cols.is_empty() {
        return CMat::zeros(n, 0);
    }
    CMat::from_columns(&cols)
}

/// Levi data at every sample, in order.
pub fn levi_map(spec: &DomainSpec, samples: &[Vec<f64>]) -> Result<Vec<LeviData>> {
    par::map_slice(samples, |p| levi_at(spec, p)).into_iter().collect()
}

/// Samples whose smallest Levi eigenvalue is at most `rank_tol`.
pub fn weak_set(spec: &DomainSpec, samples: &[Vec<f64>]) -> Result<Vec<LeviData>> {
    Ok(levi_map(spec, samples)?
        .into_iter()
        .filter(|d| d.min_eig() <= spec.rank_tol)
        .collect())
}

/// Pattern search along the boundary that lowers the smallest Levi
/// eigenvalue, starting from each seed. Points that fail to project are
/// dropped.
pub fn refine_weak_points(spec: &DomainSpec, seeds: &[Vec<f64>], max_evals: usize) -> Vec<Vec<f64>> {
    let h0 = 0.02 * spec.diameter();
    let objective = |q: &[f64]| levi_at(spec, q).map(|d| d.min_eig()).unwrap_or(f64::INFINITY);
    let found = par::map_slice(seeds, |seed| {
        let mut best = project_to_level(spec, seed, 0.0).ok()?.point;
        let mut f_best = objective(&best);
        let mut h = h0;
        let mut evals = 0;
        while h > 1e-10 * spec.diameter() && evals < max_evals {
            let mut improved = false;
            for k in 0..best.len() {
                for sgn in [1.0, -1.0] {
                    let mut cand = best.clone();
                    cand[k] += sgn * h;
                    evals += 1;
                    let Ok(q) = project_to_level(spec, &cand, 0.0) else {
                        continue;
                    };
                    let f = objective(&q.point);
                    // sufficient decrease ~ h², so that tiny side effects of the
                    // projection cannot keep the step size from shrinking
                    if f < f_best - 1e-2 * h * h - 1e-9 * f_best.abs() {
                        best = q.point;
                        f_best = f;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        f_best.is_finite().then_some(best)
    });
    found.into_iter().flatten().collect()
}

/// Sampled weak set: the `candidates` samples with the smallest Levi
/// eigenvalue are refined by [`refine_weak_points`] before filtering.
pub fn weak_set_refined(spec: &DomainSpec, samples: &[Vec<f64>], candidates: usize) -> Result<Vec<LeviData>> {
    let map = levi_map(spec, samples)?;
    if spec.n < 2 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..map.len()).collect();
    order.sort_by(|&a, &b| map[a].min_eig().total_cmp(&map[b].min_eig()));
    let seeds: Vec<Vec<f64>> = order.iter().take(candidates).map(|&k| map[k].point.clone()).collect();
    let refined = refine_weak_points(spec, &seeds, 2000);
    let mut weak: Vec<LeviData> = map.into_iter().filter(|d| d.min_eig() <= spec.rank_tol).collect();
    for q in refined {
        let d = levi_at(spec, &q)?;
        if d.min_eig() <= spec.rank_tol {
            weak.push(d);
        }
    }
    Ok(weak)
}

/// `max_{X ∈ N_z, |X| = 1} |∂∂̄r(X, L̄_ν)|` at one point for the normalized
/// `r = ρ/|∇_ω ρ|`, using null directions with eigenvalue `≤ tol`.
pub fn s_at(data: &LeviData, tol: f64) -> f64 {
    let null = data.null_space(tol);
    if null.ncols() == 0 {
        return 0.0;
    }
    let w = data.l_nu.adjoint() * &data.derivs.chess * null;
    w.norm() / data.derivs.grad_norm(&data.metric)
}

/// `S(r)` over a sampled weak set; zero when the set is empty.
pub fn compute_s(spec: &DomainSpec, weak: &[LeviData]) -> f64 {
    weak.iter().map(|d| s_at(d, spec.rank_tol)).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SEstimate {
    pub s: f64,
    /// Includes near-weak points with smallest eigenvalue below `10·rank_tol`.
    pub s_widened: f64,
    pub n_weak: usize,
    pub n_near: usize,
    /// Running maximum of `S` after the first `k` weak points, `k = 1, 2, 4, …`.
    pub trend: Vec<(usize, f64)>,
}

pub fn estimate_s(spec: &DomainSpec, levi: &[LeviData]) -> SEstimate {
    let tol = spec.rank_tol;
    let weak: Vec<&LeviData> = levi.iter().filter(|d| d.min_eig() <= tol).collect();
    let near: Vec<&LeviData> = levi
        .iter()
        .filter(|d| d.min_eig() > tol && d.min_eig() < 10.0 * tol)
        .collect();
    let values: Vec<f64> = weak.iter().map(|d| s_at(d, tol)).collect();
    let s = values.iter().copied().fold(0.0, f64::max);
    let s_widened = weak
        .iter()
        .chain(near.iter())
        .map(|d| s_at(d, 10.0 * tol))
        .fold(0.0, f64::max);
    let mut trend = Vec::new();
    let mut running = 0.0;
    let mut next = 1;
    for (k, v) in values.iter().enumerate() {
        running = f64::max(running, *v);
        if k + 1 == next || k + 1 == values.len() {
            trend.push((k + 1, running));
            next *= 2;
        }
    }
    SEstimate {
        s,
        s_widened,
        n_weak: weak.len(),
        n_near: near.len(),
        trend,
    }
}

/// `sup |∂∂̄ρ|_ω` over the given samples of `Ω̄`.
pub fn compute_k0(spec: &DomainSpec, samples: &[Vec<f64>]) -> Result<f64> {
    let vals = par::map_slice(samples, |p| -> Result<f64> {
        let cd = wirtinger(&spec.rho.eval_jet2(p)?, spec.n);
        let ev = metric_at(spec.metric, p).whitener().eigvals(&cd.chess);
        Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
    });
    let mut best = 0.0;
    for v in vals {
        best = f64::max(best, v?);
    }
    Ok(best)
}
