//! Recursive-descent parser.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = atom [ "^" unary ] ;             (* right-associative *)
//! atom    = number | "pi" | xj | yj
//!         | func "(" expr ")"
//!         | sugar "(" zj ")"
//!         | "(" expr ")" ;
//! func    = "exp" | "log" | "sqrt" | "sin" | "cos" ;
//! sugar   = "abs2" | "re" | "im" ;             (* |z_j|², Re z_j, Im z_j *)
//! ```

use super::{Expr, ExprError, Expression, Func};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ExprError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ExprError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let tok = match c {
            b'0'..=b'9' | b'.' => {
                let mut end = self.pos;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                let text = &self.src[self.pos..end];
                self.pos = end;
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    msg: format!("malformed number `{text}`"),
                })?;
                Tok::Num(v)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = self.pos;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                let text = self.src[self.pos..end].to_string();
                self.pos = end;
                Tok::Ident(text)
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            _ => {
                let ch = self.src[self.pos..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((start, tok))
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
    n: usize,
}

/// Parses `text` as an expression over `C^n`.
pub fn parse(text: &str, n: usize) -> Result<Expression, ExprError> {
    if n == 0 || n > super::MAX_COMPLEX_DIM {
        return Err(ExprError::Dimension(format!(
            "complex dimension must be in 1..={}, got {n}",
            super::MAX_COMPLEX_DIM
        )));
    }
    let mut p = Parser {
        toks: Lexer::tokens(text)?,
        at: 0,
        n,
    };
    let root = p.expr()?;
    if p.peek() != &Tok::End {
        return Err(p.error("unexpected trailing input"));
    }
    Expression::new(n, root)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error(&self, msg: impl Into<String>) -> ExprError {
        ExprError::Syntax {
            pos: self.pos(),
            msg: msg.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == &Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(&name, start),
            Tok::End => Err(self.error("unexpected end of input")),
            t => Err(ExprError::Syntax {
                pos: start,
                msg: format!("unexpected token {t:?}"),
            }),
        }
    }

    fn coordinate(&self, name: &str, start: usize) -> Result<Option<(char, usize)>, ExprError> {
        let mut chars = name.chars();
        let head = chars.next();
        let rest = chars.as_str();
        match head {
            Some(c @ ('x' | 'y' | 'z')) if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) => {
                let j: usize = rest.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    msg: format!("bad variable index in `{name}`"),
                })?;
                if j == 0 || j > self.n {
                    return Err(ExprError::Dimension(format!(
                        "variable `{name}` is out of range for n = {}",
                        self.n
                    )));
                }
                Ok(Some((c, j - 1)))
            }
            _ => Ok(None),
        }
    }

    fn ident(&mut self, name: &str, start: usize) -> Result<Expr, ExprError> {
        if let Some((kind, j)) = self.coordinate(name, start)? {
            return match kind {
                'x' => Ok(Expr::Var(2 * j)),
                'y' => Ok(Expr::Var(2 * j + 1)),
                _ => Err(ExprError::Syntax {
                    pos: start,
                    msg: format!("complex variable `{name}` is only allowed inside abs2/re/im"),
                }),
            };
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(func) = Func::from_name(name) {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        if matches!(name, "abs2" | "re" | "im") {
            self.expect(Tok::LParen, "`(` after function name")?;
            let arg_start = self.pos();
            let j = match self.bump() {
                Tok::Ident(arg) => match self.coordinate(&arg, arg_start)? {
                    Some(('z', j)) => j,
                    _ => {
                        return Err(ExprError::Syntax {
                            pos: arg_start,
                            msg: format!("`{name}` expects a complex variable z1..z{}", self.n),
                        })
                    }
                },
                _ => {
                    return Err(ExprError::Syntax {
                        pos: arg_start,
                        msg: format!("`{name}` expects a complex variable"),
                    })
                }
            };
            self.expect(Tok::RParen, "`)`")?;
            let (x, y) = (Expr::Var(2 * j), Expr::Var(2 * j + 1));
            let sq = |e: Expr| Expr::Pow(Box::new(e), Box::new(Expr::Const(2.0)));
            return Ok(match name {
                "abs2" => Expr::Add(Box::new(sq(x)), Box::new(sq(y))),
                "re" => x,
                _ => y,
            });
        }
        Err(ExprError::Syntax {
            pos: start,
            msg: format!("unknown identifier `{name}`"),
        })
    }
}
