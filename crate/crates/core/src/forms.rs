//! Exterior algebra on `R^{2n}` with complex coefficients.
//!
//! Basis covectors are `e_0, …, e_{2n−1} = dx1, dy1, …, dxn, dyn`. A
//! k-form is a sparse map from strictly increasing index sets (stored as bit
//! masks) to coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::expr::MAX_REAL_DIM;
use crate::linalg::CMat;

#[derive(Debug, Clone, PartialEq)]
pub struct AltForm {
    dim: usize,
    degree: usize,
    coeffs: BTreeMap<u16, Complex64>,
}

fn popcount_below(mask: u16, i: usize) -> u32 {
    (mask & ((1u16 << i) - 1)).count_ones()
}

/// Sign of the permutation sorting the concatenation `a ++ b` of two
/// disjoint increasing index sets.
fn merge_sign(a: u16, b: u16) -> f64 {
    let mut swaps = 0;
    let mut m = a;
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        swaps += popcount_below(b, i);
        m &= m - 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl AltForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!(dim <= MAX_REAL_DIM && degree <= dim);
        AltForm {
            dim,
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// The constant 0-form `c`.
    pub fn scalar(dim: usize, c: Complex64) -> Self {
        let mut f = AltForm::zero(dim, 0);
        f.add_term(0, c);
        f
    }

    /// `e_{i1} ∧ … ∧ e_{ik}` for arbitrary (not necessarily sorted) indices.
    pub fn monomial(dim: usize, indices: &[usize]) -> Self {
        let mut f = AltForm::scalar(dim, Complex64::new(1.0, 0.0));
        for &i in indices {
            f = f.wedge(&AltForm::basis(dim, i));
        }
        f
    }

    /// The covector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        let mut f = AltForm::zero(dim, 1);
        f.add_term(1 << i, Complex64::new(1.0, 0.0));
        f
    }

    pub fn dx(dim: usize, j: usize) -> Self {
        AltForm::basis(dim, 2 * j)
    }

    pub fn dy(dim: usize, j: usize) -> Self {
        AltForm::basis(dim, 2 * j + 1)
    }

    /// `dz_j = dx_j + i·dy_j`.
    pub fn dz(dim: usize, j: usize) -> Self {
        let mut f = AltForm::zero(dim, 1);
        f.add_term(1 << (2 * j), Complex64::new(1.0, 0.0));
        f.add_term(1 << (2 * j + 1), Complex64::new(0.0, 1.0));
        f
    }

    /// `dz̄_j = dx_j − i·dy_j`.
    pub fn dzbar(dim: usize, j: usize) -> Self {
        let mut f = AltForm::zero(dim, 1);
        f.add_term(1 << (2 * j), Complex64::new(1.0, 0.0));
        f.add_term(1 << (2 * j + 1), Complex64::new(0.0, -1.0));
        f
    }

    /// `Σ_j a_j dz_j`.
    pub fn from_dz(dim: usize, a: &[Complex64]) -> Self {
        let mut f = AltForm::zero(dim, 1);
        for (j, &v) in a.iter().enumerate() {
            f = f.add(&AltForm::dz(dim, j).scale(v));
        }
        f
    }

    /// `Σ_j a_j dz̄_j`.
    pub fn from_dzbar(dim: usize, a: &[Complex64]) -> Self {
        let mut f = AltForm::zero(dim, 1);
        for (j, &v) in a.iter().enumerate() {
            f = f.add(&AltForm::dzbar(dim, j).scale(v));
        }
        f
    }

    /// The (1,1)-form `Σ_{j,k} m[(k, j)] dz_j ∧ dz̄_k` of a matrix stored in
    /// the `Yᴴ·M·X` convention.
    pub fn from_hermitian(dim: usize, m: &CMat) -> Self {
        let n = m.nrows();
        let mut f = AltForm::zero(dim, 2);
        for j in 0..n {
            for k in 0..n {
                let v = m[(k, j)];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                f = f.add(&AltForm::dz(dim, j).wedge(&AltForm::dzbar(dim, k)).scale(v));
            }
        }
        f
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of the basis element with the given sorted indices.
    pub fn coeff(&self, indices: &[usize]) -> Complex64 {
        let mask = indices.iter().fold(0u16, |m, &i| m | (1 << i));
        self.coeffs.get(&mask).copied().unwrap_or_default()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u16, Complex64)> + '_ {
        self.coeffs.iter().map(|(&m, &c)| (m, c))
    }

    fn add_term(&mut self, mask: u16, c: Complex64) {
        debug_assert_eq!(mask.count_ones() as usize, self.degree);
        let e = self.coeffs.entry(mask).or_default();
        *e += c;
        if *e == Complex64::new(0.0, 0.0) {
            self.coeffs.remove(&mask);
        }
    }

    pub fn add(&self, other: &AltForm) -> AltForm {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree), "form shapes differ");
        let mut out = self.clone();
        for (m, c) in other.terms() {
            out.add_term(m, c);
        }
        out
    }

    pub fn sub(&self, other: &AltForm) -> AltForm {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> AltForm {
        let mut out = AltForm::zero(self.dim, self.degree);
        if c != Complex64::new(0.0, 0.0) {
            for (m, v) in self.terms() {
                out.coeffs.insert(m, v * c);
            }
        }
        out
    }

    pub fn scale_re(&self, c: f64) -> AltForm {
        self.scale(Complex64::new(c, 0.0))
    }

    pub fn wedge(&self, other: &AltForm) -> AltForm {
        assert_eq!(self.dim, other.dim, "form dimensions differ");
        let degree = self.degree + other.degree;
        let mut out = AltForm::zero(self.dim, degree.min(self.dim));
        if degree > self.dim {
            return out;
        }
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                if a & b != 0 {
                    continue;
                }
                out.add_term(a | b, ca * cb * merge_sign(a, b));
            }
        }
        out
    }

    /// `self^{∧k}`; `k = 0` gives the constant 1.
    pub fn power(&self, k: usize) -> AltForm {
        let mut out = AltForm::scalar(self.dim, Complex64::new(1.0, 0.0));
        for _ in 0..k {
            out = out.wedge(self);
        }
        out
    }

    /// Contraction `v ⌟ self` with a vector of `R^{2n} ⊗ C`.
    pub fn interior(&self, v: &[Complex64]) -> AltForm {
        assert_eq!(v.len(), self.dim);
        assert!(self.degree > 0, "cannot contract a 0-form");
        let mut out = AltForm::zero(self.dim, self.degree - 1);
        for (m, c) in self.terms() {
            let mut rest = m;
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let sign = if popcount_below(m, i).is_multiple_of(2) { 1.0 } else { -1.0 };
                out.add_term(m & !(1 << i), c * v[i] * sign);
            }
        }
        out
    }

    /// Coefficient of `dx1∧dy1∧…∧dxn∧dyn`.
    pub fn top_coefficient(&self) -> Complex64 {
        if self.degree != self.dim {
            return Complex64::default();
        }
        let mask = if self.dim == 16 { u16::MAX } else { (1u16 << self.dim) - 1 };
        self.coeffs.get(&mask).copied().unwrap_or_default()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part among the coefficients.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// `max |self − other| / max(|other|)`; absolute when `other` is zero.
    pub fn relative_distance(&self, other: &AltForm) -> f64 {
        let diff = self.sub(other).max_abs();
        let scale = other.max_abs();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

impl fmt::Display for AltForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in self.terms() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for i in 0..self.dim {
                if m & (1 << i) != 0 {
                    f.write_str(" ")?;
                    f.write_str(&crate::expr::var_name(i).replacen('x', "dx", 1).replacen('y', "dy", 1))?;
                }
            }
        }
        Ok(())
    }
}
