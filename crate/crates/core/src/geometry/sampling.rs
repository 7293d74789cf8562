use rand::Rng;

use super::{metric_at, wirtinger, DomainSpec};
use crate::expr::Jet2;
use crate::rng::{self, Purpose, CHUNK};
use crate::{par, Error, Result};

const MAX_NEWTON: usize = 50;
const POLISH: usize = 3;
const REFILL_ROUNDS: u64 = 8;
/// Rejection batches are this many chunks; at most `MAX_REJECT_CHUNKS` are drawn.
const BATCH_CHUNKS: u64 = 8;
const MAX_REJECT_CHUNKS: u64 = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// `|ρ(point) − level|`.
    pub residual: f64,
}

/// Newton iteration `q ← q − (ρ(q) − level)·∇ρ/|∇ρ|²` towards `{ρ = level}`.
pub fn project_to_level(spec: &DomainSpec, p: &[f64], level: f64) -> Result<Projection> {
    let tol = spec.level_tol();
    let diam = spec.diameter();
    let mut q = p.to_vec();
    let mut converged_at = None;
    for it in 0..MAX_NEWTON + POLISH {
        let jet = spec.rho.eval_jet2(&q)?;
        let r = jet.value - level;
        if converged_at.is_none() && r.abs() < tol {
            converged_at = Some(it);
        }
        if let Some(c) = converged_at {
            if r == 0.0 || it >= c + POLISH {
                break;
            }
        } else if it >= MAX_NEWTON {
            break;
        }
        let g = jet.grad();
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if !(g2 > 0.0) || !g2.is_finite() {
            return Err(Error::Projection(format!("vanishing gradient at {q:?}")));
        }
        let step = r / g2;
        if (step * step * g2).sqrt() > diam {
            return Err(Error::Projection(format!("Newton step left the box from {p:?}")));
        }
        let prev = q.clone();
        for (x, gk) in q.iter_mut().zip(g) {
            *x -= step * gk;
        }
        // polishing must not make things worse
        if converged_at.is_some() {
            let new_r = spec.rho.value(&q)? - level;
            if new_r.abs() > r.abs() {
                q = prev;
                break;
            }
        }
    }
    let residual = (spec.rho.value(&q)? - level).abs();
    let Some(iterations) = converged_at else {
        return Err(Error::Projection(format!(
            "no convergence after {MAX_NEWTON} iterations from {p:?} (residual {residual:e})"
        )));
    };
    if residual >= tol {
        return Err(Error::Projection(format!("residual {residual:e} above tolerance")));
    }
    let slack = 1e-12 * diam;
    let inside = q
        .iter()
        .zip(&spec.bbox)
        .all(|(x, [lo, hi])| *x >= lo - slack && *x <= hi + slack);
    if !inside {
        return Err(Error::Projection(format!("projection of {p:?} left the box")));
    }
    Ok(Projection {
        point: q,
        iterations,
        residual,
    })
}

/// Points on a level set with surface weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySamples {
    pub points: Vec<Vec<f64>>,
    /// Proportional to `|∇ρ|` at each point, normalized to mean 1.
    pub weights: Vec<f64>,
}

impl BoundarySamples {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Points of `{ρ = 0}` projected from Latin-hypercube seeds.
pub fn boundary_sample(spec: &DomainSpec, count: usize) -> Result<BoundarySamples> {
    level_sample_with(spec, 0.0, count, Purpose::BoundarySeeds)
}

/// Points of `{ρ = level}`.
pub fn level_sample(spec: &DomainSpec, level: f64, count: usize) -> Result<BoundarySamples> {
    level_sample_with(spec, level, count, Purpose::BoundarySeeds)
}

fn level_sample_with(spec: &DomainSpec, level: f64, count: usize, purpose: Purpose) -> Result<BoundarySamples> {
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let mut points = Vec::with_capacity(count);
    for round in 0..REFILL_ROUNDS {
        let seeds = rng::latin_hypercube(spec.seed, purpose, round, &spec.bbox, count);
        let projected = par::map_slice(&seeds, |s| project_to_level(spec, s, level).ok());
        let good: Vec<Vec<f64>> = projected.into_iter().flatten().map(|p| p.point).collect();
        if round == 0 && 2 * good.len() < count {
            return Err(Error::Sampling(format!(
                "only {} of {count} seeds converged to the level set ρ = {level}",
                good.len()
            )));
        }
        points.extend(good);
        if points.len() >= count {
            break;
        }
    }
    points.truncate(count);
    let grads: Vec<f64> = par::map_slice(&points, |p| {
        spec.rho
            .eval_jet2(p)
            .map(|j| j.grad().iter().map(|g| g * g).sum::<f64>().sqrt())
            .unwrap_or(0.0)
    });
    if let Some(k) = grads.iter().position(|g| !(*g > 0.0)) {
        return Err(Error::DegenerateGradient {
            point: points[k].clone(),
        });
    }
    let mean = grads.iter().sum::<f64>() / grads.len() as f64;
    let weights = grads.iter().map(|g| g / mean).collect();
    Ok(BoundarySamples { points, weights })
}

/// Interior points with `−ρ ∈ [t_min, t_max]`.
///
/// Uniform rejection sampling over the box is tried first; any shortfall is
/// filled by projecting boundary points inward to random levels in the band.
pub fn collar_sample(spec: &DomainSpec, t_min: f64, t_max: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    if !(t_min > 0.0 && t_min < t_max) {
        return Err(Error::InvalidParameter(format!(
            "collar band needs 0 < t_min < t_max, got [{t_min}, {t_max}]"
        )));
    }
    if t_max > spec.collar_width * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "t_max = {t_max} exceeds collar_width = {}",
            spec.collar_width
        )));
    }
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let in_band = |p: &[f64]| matches!(spec.rho.value(p), Ok(v) if -v >= t_min && -v <= t_max);
    let mut points = rejection(spec, Purpose::Collar, count, &in_band);
    if points.len() < count {
        let missing = count - points.len();
        let mut filled = Vec::with_capacity(missing);
        for round in 0..REFILL_ROUNDS {
            let seeds = rng::latin_hypercube(spec.seed, Purpose::CollarAssist, round, &spec.bbox, missing);
            let mut levels = rng::stream(spec.seed, Purpose::CollarAssist, 1 << 32 | round);
            let targets: Vec<(Vec<f64>, f64)> = seeds
                .into_iter()
                .map(|s| (s, t_min + (t_max - t_min) * levels.random::<f64>()))
                .collect();
            let got = par::map_slice(&targets, |(s, t)| {
                let b = project_to_level(spec, s, 0.0).ok()?;
                let q = project_to_level(spec, &b.point, -t).ok()?;
                in_band(&q.point).then_some(q.point)
            });
            filled.extend(got.into_iter().flatten());
            if filled.len() >= missing {
                break;
            }
        }
        points.extend(filled);
    }
    if points.len() < count {
        return Err(Error::Sampling(format!(
            "collar [{t_min}, {t_max}]: only {} of {count} samples found",
            points.len()
        )));
    }
    points.truncate(count);
    Ok(points)
}

/// Uniform rejection sampling with a bounded budget; chunks are drawn in
/// parallel and concatenated in chunk order.
fn rejection<F>(spec: &DomainSpec, purpose: Purpose, count: usize, accept: &F) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let dim = spec.real_dim();
    let mut points = Vec::new();
    let mut next = 0u64;
    while points.len() < count && next < MAX_REJECT_CHUNKS {
        let start = next;
        let batches = par::map_range(BATCH_CHUNKS, |k| {
            let mut rng = rng::stream(spec.seed, purpose, start + k);
            let mut p = vec![0.0; dim];
            let mut out = Vec::new();
            for _ in 0..CHUNK {
                rng::uniform_in_box(&mut rng, &spec.bbox, &mut p);
                if accept(&p) {
                    out.push(p.clone());
                }
            }
            out
        });
        next += BATCH_CHUNKS;
        for b in batches {
            points.extend(b);
        }
    }
    points.truncate(count);
    points
}

/// Samples of `Ω̄`: uniform interior points plus boundary points.
pub fn closure_sample(spec: &DomainSpec, interior: usize, boundary: usize) -> Result<Vec<Vec<f64>>> {
    let inside = |p: &[f64]| matches!(spec.rho.value(p), Ok(v) if v <= 0.0);
    let mut points = rejection(spec, Purpose::Closure, interior, &inside);
    points.extend(boundary_sample(spec, boundary)?.points);
    Ok(points)
}

/// `|∇_ω ρ|` at the boundary projection of `p`: the factor turning `ρ` into
/// the first-order normalized `r̃ = ρ/|∇_ω ρ ∘ π̂|`.
pub fn normalization_scale(spec: &DomainSpec, p: &[f64]) -> Result<f64> {
    let v = spec.rho.value(p)?;
    if v.abs() > spec.collar_width {
        return Err(Error::Projection(format!(
            "|ρ| = {:.3e} exceeds the collar width {:.3e}",
            v.abs(),
            spec.collar_width
        )));
    }
    let q = project_to_level(spec, p, 0.0)?.point;
    let cd = wirtinger(&spec.rho.eval_jet2(&q)?, spec.n);
    let s = cd.grad_norm(&metric_at(spec.metric, &q));
    if !(s > 0.0) {
        return Err(Error::DegenerateGradient { point: q });
    }
    Ok(s)
}

/// Second-order jet of the normalized defining function at `p`.
pub fn normalized_jet(spec: &DomainSpec, p: &[f64]) -> Result<Jet2> {
    let s = normalization_scale(spec, p)?;
    Ok(spec.rho.eval_jet2(p)?.scale(1.0 / s))
}
