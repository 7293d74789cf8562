//! Wirtinger calculus, Hermitian metrics, boundary and collar sampling.
//!
//! Points of `C^n` are handled in real coordinates `(x1, y1, …, xn, yn)`
//! with `z_j = x_j + i·y_j`.

mod sampling;
mod spec;

pub use sampling::{
    boundary_sample, closure_sample, collar_sample, level_sample, normalization_scale, normalized_jet,
    project_to_level, BoundarySamples, Projection,
};
pub use spec::{DomainSpec, DomainSpecFile, MetricKind, SampleCounts, DEFAULT_RANK_TOL, DEFAULT_SEED, DEFAULT_TOL};

use num_complex::Complex64;

use crate::expr::Jet2;
use crate::linalg::{c, hermitian_part, CMat, CVec, Whitener};

/// First and second complex derivatives of a real function at a point.
///
/// `chess` is stored so that the Hermitian form is `∂∂̄ρ(X, Ȳ) = Yᴴ·chess·X`,
/// i.e. `chess[(a, b)] = ρ_{z_b z̄_a}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexDerivs {
    pub dbar_rho: CVec,
    pub d_rho: CVec,
    pub chess: CMat,
}

impl ComplexDerivs {
    pub fn n(&self) -> usize {
        self.d_rho.len()
    }

    /// `∂ρ(X) = Σ ρ_{z_j} X_j`.
    pub fn d_apply(&self, x: &CVec) -> Complex64 {
        self.d_rho.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    /// `∂∂̄ρ(X, Ȳ)`.
    pub fn levi_form(&self, x: &CVec, y: &CVec) -> Complex64 {
        (y.adjoint() * &self.chess * x)[(0, 0)]
    }

    /// The same derivatives for `c·ρ`.
    pub fn scaled(&self, s: f64) -> ComplexDerivs {
        ComplexDerivs {
            dbar_rho: self.dbar_rho.map(|v| v * s),
            d_rho: self.d_rho.map(|v| v * s),
            chess: self.chess.map(|v| v * s),
        }
    }

    /// `|∂ρ|_ω`, the dual norm of the (1,0)-form `∂ρ`.
    pub fn d_norm(&self, metric: &MetricTensor) -> f64 {
        let v = metric.solve(&self.dbar_rho);
        self.dbar_rho.dotc(&v).re.max(0.0).sqrt()
    }

    /// Length of the real gradient measured in the Riemannian metric `2·Re g`.
    pub fn grad_norm(&self, metric: &MetricTensor) -> f64 {
        std::f64::consts::SQRT_2 * self.d_norm(metric)
    }
}

/// Converts a real second-order jet to complex derivatives.
pub fn wirtinger(jet: &Jet2, n: usize) -> ComplexDerivs {
    assert_eq!(jet.dim(), 2 * n, "jet dimension does not match n");
    let g = jet.grad();
    let d_rho = CVec::from_fn(n, |j, _| Complex64::new(0.5 * g[2 * j], -0.5 * g[2 * j + 1]));
    let dbar_rho = d_rho.map(|v| v.conj());
    let raw = CMat::from_fn(n, n, |a, b| {
        let (xa, ya, xb, yb) = (2 * a, 2 * a + 1, 2 * b, 2 * b + 1);
        Complex64::new(
            0.25 * (jet.hess(xa, xb) + jet.hess(ya, yb)),
            0.25 * (jet.hess(ya, xb) - jet.hess(xa, yb)),
        )
    });
    ComplexDerivs {
        dbar_rho,
        d_rho,
        chess: hermitian_part(&raw),
    }
}

/// `z_j = x_j + i·y_j` from real coordinates.
pub fn complex_point(p: &[f64]) -> CVec {
    CVec::from_fn(p.len() / 2, |j, _| Complex64::new(p[2 * j], p[2 * j + 1]))
}

pub fn real_point(z: &CVec) -> Vec<f64> {
    z.iter().flat_map(|v| [v.re, v.im]).collect()
}

/// A Hermitian metric at one point: `|X|²_ω = Xᴴ·g·X`.
#[derive(Debug, Clone)]
pub struct MetricTensor {
    g: CMat,
    euclidean: bool,
}

impl MetricTensor {
    pub fn euclidean(n: usize) -> Self {
        MetricTensor {
            g: CMat::identity(n, n),
            euclidean: true,
        }
    }

    pub fn from_matrix(g: CMat) -> Self {
        MetricTensor {
            g: hermitian_part(&g),
            euclidean: false,
        }
    }

    pub fn matrix(&self) -> &CMat {
        &self.g
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    /// `Some(g)` unless the metric is the identity.
    pub fn as_option(&self) -> Option<&CMat> {
        (!self.euclidean).then_some(&self.g)
    }

    pub fn whitener(&self) -> Whitener {
        Whitener::new(self.as_option()).expect("metric tensor is not positive definite")
    }

    /// `g⁻¹·v`.
    pub fn solve(&self, v: &CVec) -> CVec {
        if self.euclidean {
            return v.clone();
        }
        self.g
            .clone()
            .cholesky()
            .expect("metric tensor is not positive definite")
            .solve(v)
    }
}

/// Fubini–Study metric in the affine chart, normalized to holomorphic
/// sectional curvature 2: `g = ((1+|z|²)I − z·zᴴ)/(1+|z|²)²`.
pub fn fubini_study_metric(z: &CVec) -> MetricTensor {
    let n = z.len();
    let s = 1.0 + z.norm_squared();
    let g = (CMat::identity(n, n) * c(s) - z * z.adjoint()) / c(s * s);
    MetricTensor::from_matrix(g)
}

/// The metric of `kind` at the real point `p`.
pub fn metric_at(kind: MetricKind, p: &[f64]) -> MetricTensor {
    match kind {
        MetricKind::Euclidean => MetricTensor::euclidean(p.len() / 2),
        MetricKind::FubiniStudyChart => fubini_study_metric(&complex_point(p)),
    }
}
