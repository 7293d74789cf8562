/// Largest supported number of real coordinates (`2n` with `n ≤ 4`).
pub const MAX_REAL_DIM: usize = 8;
const HESS_LEN: usize = MAX_REAL_DIM * (MAX_REAL_DIM + 1) / 2;

/// Second-order Taylor data of a scalar function at a point: value, gradient
/// and Hessian in the real coordinates `x1, y1, …`.
///
/// The Hessian is stored as its packed upper triangle, so it is symmetric by
/// construction. Arithmetic on jets is truncated second-order forward AD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    dim: usize,
    pub value: f64,
    grad: [f64; MAX_REAL_DIM],
    hess: [f64; HESS_LEN],
}

#[inline]
fn packed(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim - i + 1) / 2 + (j - i)
}

impl Jet2 {
    pub fn constant(dim: usize, value: f64) -> Self {
        assert!(dim <= MAX_REAL_DIM, "jet dimension {dim} exceeds {MAX_REAL_DIM}");
        Jet2 {
            dim,
            value,
            grad: [0.0; MAX_REAL_DIM],
            hess: [0.0; HESS_LEN],
        }
    }

    pub fn variable(dim: usize, k: usize, value: f64) -> Self {
        let mut j = Jet2::constant(dim, value);
        j.grad[k] = 1.0;
        j
    }

    /// Builds a jet from explicit data; `hess` is a full row-major `dim × dim`
    /// matrix whose upper triangle is kept.
    pub fn from_parts(value: f64, grad: &[f64], hess: &[f64]) -> Self {
        let dim = grad.len();
        assert_eq!(hess.len(), dim * dim);
        let mut j = Jet2::constant(dim, value);
        j.grad[..dim].copy_from_slice(grad);
        for a in 0..dim {
            for b in a..dim {
                j.hess[packed(dim, a, b)] = hess[a * dim + b];
            }
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad[..self.dim]
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[packed(self.dim, i, j)]
    }

    /// Full row-major Hessian.
    pub fn hess_matrix(&self) -> Vec<f64> {
        let m = self.dim;
        let mut out = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                out[a * m + b] = self.hess(a, b);
            }
        }
        out
    }

    fn hlen(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        out.value *= c;
        out.grad[..self.dim].iter_mut().for_each(|g| *g *= c);
        let hl = self.hlen();
        out.hess[..hl].iter_mut().for_each(|h| *h *= c);
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = *self;
        out.value += o.value;
        for k in 0..self.dim {
            out.grad[k] += o.grad[k];
        }
        for k in 0..self.hlen() {
            out.hess[k] += o.hess[k];
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = *self;
        out.value -= o.value;
        for k in 0..self.dim {
            out.grad[k] -= o.grad[k];
        }
        for k in 0..self.hlen() {
            out.hess[k] -= o.hess[k];
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let m = self.dim;
        let (a, b) = (self.value, o.value);
        let mut out = Jet2::constant(m, a * b);
        for k in 0..m {
            out.grad[k] = a * o.grad[k] + b * self.grad[k];
        }
        for i in 0..m {
            for j in i..m {
                let p = packed(m, i, j);
                out.hess[p] = a * o.hess[p]
                    + b * self.hess[p]
                    + (self.grad[i] * o.grad[j] + self.grad[j] * o.grad[i]);
            }
        }
        out
    }

    /// Caller guarantees `o.value != 0`.
    pub fn div(&self, o: &Self) -> Self {
        let x = o.value;
        let recip = o.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x));
        self.mul(&recip)
    }

    /// Jet of `f ∘ self` given `f`, `f'`, `f''` at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let m = self.dim;
        let mut out = Jet2::constant(m, f0);
        for k in 0..m {
            out.grad[k] = f1 * self.grad[k];
        }
        for i in 0..m {
            for j in i..m {
                let p = packed(m, i, j);
                out.hess[p] = f1 * self.hess[p] + f2 * self.grad[i] * self.grad[j];
            }
        }
        out
    }
}
