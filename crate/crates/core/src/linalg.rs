//! Small dense Hermitian linear algebra on top of nalgebra.
//!
//! Hermitian forms use the "standard" convention `Q(X, Y) = Yᴴ·M·X`, so
//! `Q(X, X) = Xᴴ·M·X` and eigenvectors of `M` are directly the extremal
//! directions of the form.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `(M + Mᴴ)/2`, with an exactly real diagonal.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut out = CMat::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = c(m[(i, i)].re);
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Outer product `u·vᴴ`.
pub fn outer(u: &CVec, v: &CVec) -> CMat {
    u * v.adjoint()
}

/// `yᴴ·G·x` (or `yᴴ·x` when `g` is `None`).
pub fn inner(g: Option<&CMat>, x: &CVec, y: &CVec) -> Complex64 {
    match g {
        Some(g) => (y.adjoint() * g * x)[(0, 0)],
        None => y.dotc(x),
    }
}

pub fn norm(g: Option<&CMat>, x: &CVec) -> f64 {
    inner(g, x, x).re.max(0.0).sqrt()
}

/// Ascending eigenvalues and matching orthonormal eigenvectors (columns).
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    if n == 1 {
        return (vec![m[(0, 0)].re], CMat::identity(1, 1));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(k));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Whitening factor `W = L⁻¹` where `G = L·Lᴴ`, so that `W·H·Wᴴ` has the
/// generalized eigenvalues of `(H, G)`.
#[derive(Debug, Clone)]
pub struct Whitener {
    w: Option<CMat>,
}

impl Whitener {
    pub fn identity() -> Self {
        Whitener { w: None }
    }

    /// Returns `None` when `g` is not positive definite.
    pub fn new(g: Option<&CMat>) -> Option<Self> {
        let Some(g) = g else {
            return Some(Whitener::identity());
        };
        let l = hermitian_part(g).cholesky()?.l();
        let w = l.try_inverse()?;
        Some(Whitener { w: Some(w) })
    }

    pub fn apply(&self, h: &CMat) -> CMat {
        match &self.w {
            Some(w) => hermitian_part(&(w * h * w.adjoint())),
            None => hermitian_part(h),
        }
    }

    /// Ascending generalized eigenvalues of `(h, G)`.
    pub fn eigvals(&self, h: &CMat) -> Vec<f64> {
        eigvalsh(&self.apply(h))
    }
}

/// Smallest eigenvalue divided by the spectral radius, relative to `G`;
/// zero for the zero matrix. Returns `(relative, smallest, radius)`.
pub fn relative_margin(h: &CMat, whitener: &Whitener) -> (f64, f64, f64) {
    let vals = whitener.eigvals(h);
    let lo = vals[0];
    let hi = *vals.last().unwrap();
    let radius = lo.abs().max(hi.abs());
    if radius == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (lo / radius, lo, radius)
    }
}
