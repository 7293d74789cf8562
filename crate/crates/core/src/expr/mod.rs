//! Defining-function expressions.
//!
//! An [`Expression`] is a real-valued formula in the `2n` real coordinates
//! `x1, y1, …, xn, yn` of `C^n` (with `z_j = x_j + i y_j`). Expressions are
//! parsed from infix text (see the grammar in the crate README), printed back
//! fully parenthesized, and evaluated either for their value alone or for a
//! full second-order [`Jet2`].
//!
//! Complex-notation sugar (`abs2(z1)`, `re(z1)`, `im(z1)`) is desugared by the
//! parser, so evaluation only ever sees real operations.

mod jet;
mod parse;

use std::fmt;

pub use jet::{Jet2, MAX_REAL_DIM};
pub use parse::parse;

/// Largest supported complex dimension.
pub const MAX_COMPLEX_DIM: usize = MAX_REAL_DIM / 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("evaluation error in `{subexpr}`: {msg}")]
    Eval { msg: String, subexpr: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

/// Expression tree node. `Var(k)` indexes the real coordinates in the order
/// `x1, y1, x2, y2, …`, so `x_j` is `2(j-1)` and `y_j` is `2(j-1)+1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    fn has_vars(&self) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_vars(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.has_vars() || b.has_vars(),
        }
    }

    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(k) => Some(*k),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.max_var().max(b.max_var()),
        }
    }

    fn eval_error(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Eval {
            msg: msg.into(),
            subexpr: self.to_string(),
        }
    }

    fn value(&self, p: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => p[*k],
            Expr::Neg(a) => -a.value(p)?,
            Expr::Add(a, b) => a.value(p)? + b.value(p)?,
            Expr::Sub(a, b) => a.value(p)? - b.value(p)?,
            Expr::Mul(a, b) => a.value(p)? * b.value(p)?,
            Expr::Div(a, b) => {
                let den = b.value(p)?;
                if den == 0.0 {
                    return Err(self.eval_error("division by zero"));
                }
                a.value(p)? / den
            }
            Expr::Pow(a, b) => {
                let base = a.value(p)?;
                let exponent = b.value(p)?;
                if b.has_vars() {
                    if base <= 0.0 {
                        return Err(self.eval_error("variable exponent needs a positive base"));
                    }
                    base.powf(exponent)
                } else if let Some(k) = as_small_int(exponent) {
                    if base == 0.0 && k < 0 {
                        return Err(self.eval_error("zero raised to a negative power"));
                    }
                    base.powi(k)
                } else {
                    if base < 0.0 {
                        return Err(self.eval_error("non-integer power of a negative base"));
                    }
                    if base == 0.0 && exponent < 0.0 {
                        return Err(self.eval_error("zero raised to a negative power"));
                    }
                    base.powf(exponent)
                }
            }
            Expr::Call(f, a) => {
                let u = a.value(p)?;
                match f {
                    Func::Exp => u.exp(),
                    Func::Log => {
                        if u <= 0.0 {
                            return Err(self.eval_error("log of a nonpositive value"));
                        }
                        u.ln()
                    }
                    Func::Sqrt => {
                        if u < 0.0 {
                            return Err(self.eval_error("sqrt of a negative value"));
                        }
                        u.sqrt()
                    }
                    Func::Sin => u.sin(),
                    Func::Cos => u.cos(),
                }
            }
        })
    }

    fn jet(&self, p: &[f64]) -> Result<Jet2, ExprError> {
        let m = p.len();
        Ok(match self {
            Expr::Const(c) => Jet2::constant(m, *c),
            Expr::Var(k) => Jet2::variable(m, *k, p[*k]),
            Expr::Neg(a) => a.jet(p)?.neg(),
            Expr::Add(a, b) => a.jet(p)?.add(&b.jet(p)?),
            Expr::Sub(a, b) => a.jet(p)?.sub(&b.jet(p)?),
            Expr::Mul(a, b) => a.jet(p)?.mul(&b.jet(p)?),
            Expr::Div(a, b) => {
                let den = b.jet(p)?;
                if den.value == 0.0 {
                    return Err(self.eval_error("division by zero"));
                }
                a.jet(p)?.div(&den)
            }
            Expr::Pow(a, b) => {
                let base = a.jet(p)?;
                if b.has_vars() {
                    if base.value <= 0.0 {
                        return Err(self.eval_error("variable exponent needs a positive base"));
                    }
                    // a^b = exp(b ln a)
                    let ln = base.chain(base.value.ln(), 1.0 / base.value, -1.0 / (base.value * base.value));
                    let prod = b.jet(p)?.mul(&ln);
                    let e = prod.value.exp();
                    prod.chain(e, e, e)
                } else {
                    let c = b.value(p)?;
                    self.pow_const(base, c)?
                }
            }
            Expr::Call(f, a) => {
                let u = a.jet(p)?;
                let x = u.value;
                match f {
                    Func::Exp => {
                        let e = x.exp();
                        u.chain(e, e, e)
                    }
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(self.eval_error("log of a nonpositive value"));
                        }
                        u.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
                    }
                    Func::Sqrt => {
                        if x <= 0.0 {
                            return Err(self.eval_error("sqrt is not differentiable at nonpositive values"));
                        }
                        let s = x.sqrt();
                        u.chain(s, 0.5 / s, -0.25 / (s * x))
                    }
                    Func::Sin => u.chain(x.sin(), x.cos(), -x.sin()),
                    Func::Cos => u.chain(x.cos(), -x.sin(), -x.cos()),
                }
            }
        })
    }

    fn pow_const(&self, base: Jet2, c: f64) -> Result<Jet2, ExprError> {
        let x = base.value;
        if let Some(k) = as_small_int(c) {
            if x == 0.0 && k < 0 {
                return Err(self.eval_error("zero raised to a negative power"));
            }
            return Ok(match k {
                0 => Jet2::constant(base.dim(), 1.0),
                1 => base,
                _ => {
                    let kf = k as f64;
                    base.chain(x.powi(k), kf * x.powi(k - 1), kf * (kf - 1.0) * x.powi(k - 2))
                }
            });
        }
        if x < 0.0 {
            return Err(self.eval_error("non-integer power of a negative base"));
        }
        if x == 0.0 {
            if c > 2.0 {
                return Ok(base.chain(0.0, 0.0, 0.0));
            }
            return Err(self.eval_error("power is not twice differentiable at zero"));
        }
        Ok(base.chain(x.powf(c), c * x.powf(c - 1.0), c * (c - 1.0) * x.powf(c - 2.0)))
    }

    fn substitute(&self, map: &dyn Fn(usize) -> Expr) -> Expr {
        let bx = |e: &Expr| Box::new(e.substitute(map));
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(k) => map(*k),
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Div(a, b) => Expr::Div(bx(a), bx(b)),
            Expr::Pow(a, b) => Expr::Pow(bx(a), bx(b)),
            Expr::Call(f, a) => Expr::Call(*f, bx(a)),
        }
    }
}

fn as_small_int(c: f64) -> Option<i32> {
    (c.fract() == 0.0 && c.abs() < 1e9).then_some(c as i32)
}

/// Prints real coordinate `k` as `x{j}` / `y{j}`.
pub fn var_name(k: usize) -> String {
    let j = k / 2 + 1;
    if k.is_multiple_of(2) {
        format!("x{j}")
    } else {
        format!("y{j}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(k) => f.write_str(&var_name(*k)),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

/// A parsed defining-function expression over `C^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    n: usize,
    root: Expr,
}

impl Expression {
    /// Wraps a tree, checking that every variable belongs to `C^n`.
    pub fn new(n: usize, root: Expr) -> Result<Self, ExprError> {
        if n == 0 || n > MAX_COMPLEX_DIM {
            return Err(ExprError::Dimension(format!(
                "complex dimension must be in 1..={MAX_COMPLEX_DIM}, got {n}"
            )));
        }
        if let Some(k) = root.max_var() {
            if k >= 2 * n {
                return Err(ExprError::Dimension(format!(
                    "variable {} is out of range for n = {n}",
                    var_name(k)
                )));
            }
        }
        Ok(Expression { n, root })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    fn check_point(&self, p: &[f64]) -> Result<(), ExprError> {
        if p.len() != self.real_dim() {
            return Err(ExprError::Dimension(format!(
                "point has {} coordinates, expected {}",
                p.len(),
                self.real_dim()
            )));
        }
        Ok(())
    }

    pub fn value(&self, p: &[f64]) -> Result<f64, ExprError> {
        self.check_point(p)?;
        self.root.value(p)
    }

    /// Value, gradient and Hessian at `p` (length `2n`).
    pub fn eval_jet2(&self, p: &[f64]) -> Result<Jet2, ExprError> {
        self.check_point(p)?;
        self.root.jet(p)
    }

    /// Composes with the real-linear map `p ↦ A p`: the result `e'` satisfies
    /// `e'(p) = e(A p)`. `a` is row-major, `2n × 2n`.
    pub fn substitute_linear(&self, a: &[Vec<f64>]) -> Expression {
        let map = |k: usize| {
            let mut acc: Option<Expr> = None;
            for (l, &c) in a[k].iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let term = Expr::Mul(Box::new(Expr::Const(c)), Box::new(Expr::Var(l)));
                acc = Some(match acc {
                    None => term,
                    Some(prev) => Expr::Add(Box::new(prev), Box::new(term)),
                });
            }
            acc.unwrap_or(Expr::Const(0.0))
        };
        Expression {
            n: self.n,
            root: self.root.substitute(&map),
        }
    }

    /// `c · self` as a new expression.
    pub fn scaled(&self, c: f64) -> Expression {
        Expression {
            n: self.n,
            root: Expr::Mul(Box::new(Expr::Const(c)), Box::new(self.root.clone())),
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
