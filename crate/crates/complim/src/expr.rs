//! Arithmetic expressions over `x`, `y`, `t`.
//!
//! Grammar: reals, `x`, `y`, `t`, `pi`, `+ - * /`, parentheses, `sin()`,
//! `cos()` and `poly(v, c0, c1, ...)` = c0 + c1 v + c2 v² + ….  A top-level
//! pair `(e1, e2)` denotes a vector field.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at column {column}: {message}")]
pub struct ExprError {
    /// 1-based character column into the source text.
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Poly(Box<Expr>, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, y, t),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(x, y, t), b.eval(x, y, t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Sin(e) => e.eval(x, y, t).sin(),
            Expr::Cos(e) => e.eval(x, y, t).cos(),
            Expr::Poly(v, cs) => {
                let v = v.eval(x, y, t);
                cs.iter().rev().fold(0.0, |acc, c| acc * v + c.eval(x, y, t))
            }
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) | Expr::Sin(e) | Expr::Cos(e) => e.uses(var),
            Expr::Bin(_, a, b) => a.uses(var) || b.uses(var),
            Expr::Poly(v, cs) => v.uses(var) || cs.iter().any(|c| c.uses(var)),
        }
    }

    /// True when the expression is the literal zero (after constant folding).
    pub fn is_zero(&self) -> bool {
        !self.uses(Var::X) && !self.uses(Var::Y) && !self.uses(Var::T) && self.eval(0.0, 0.0, 0.0) == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprShape {
    Scalar(Expr),
    Vector(Expr, Expr),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionField {
    pub source: String,
    pub shape: ExprShape,
}

impl ExpressionField {
    pub fn is_vector(&self) -> bool {
        matches!(self.shape, ExprShape::Vector(..))
    }

    pub fn depends_on_time(&self) -> bool {
        match &self.shape {
            ExprShape::Scalar(e) => e.uses(Var::T),
            ExprShape::Vector(a, b) => a.uses(Var::T) || b.uses(Var::T),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.shape {
            ExprShape::Scalar(e) => e.is_zero(),
            ExprShape::Vector(a, b) => a.is_zero() && b.is_zero(),
        }
    }

    /// Scalar fields evaluate to `[v, 0]`.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        match &self.shape {
            ExprShape::Scalar(e) => [e.eval(x, y, t), 0.0],
            ExprShape::Vector(a, b) => [a.eval(x, y, t), b.eval(x, y, t)],
        }
    }
}

impl fmt::Display for ExpressionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str) -> Result<Lexer, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError {
                column: col,
                message: format!("malformed number '{text}'"),
            })?;
            toks.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else {
            let t = match c {
                '+' | '-' | '*' | '/' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ExprError {
                        column: col,
                        message: format!("unexpected character '{c}'"),
                    })
                }
            };
            toks.push((t, col));
            i += 1;
        }
    }
    toks.push((Tok::End, chars.len() + 1));
    Ok(Lexer { toks })
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
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
            _ => self.primary(),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ExprError> {
        self.expect(Tok::LParen, "'('")?;
        let mut out = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "')'")?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let col = self.column();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "t" => Ok(Expr::Var(Var::T)),
                "pi" => Ok(Expr::Num(PI)),
                "sin" | "cos" => {
                    let mut a = self.args()?;
                    if a.len() != 1 {
                        return Err(ExprError {
                            column: col,
                            message: format!("{name}() takes one argument"),
                        });
                    }
                    let a = Box::new(a.pop().unwrap());
                    Ok(if name == "sin" { Expr::Sin(a) } else { Expr::Cos(a) })
                }
                "poly" => {
                    let mut a = self.args()?;
                    if a.len() < 2 {
                        return Err(ExprError {
                            column: col,
                            message: "poly() needs a variable and at least one coefficient".into(),
                        });
                    }
                    let v = a.remove(0);
                    Ok(Expr::Poly(Box::new(v), a))
                }
                _ => Err(ExprError {
                    column: col,
                    message: format!("unknown identifier '{name}'"),
                }),
            },
            Tok::End => Err(ExprError {
                column: col,
                message: "unexpected end of expression".into(),
            }),
            t => Err(ExprError {
                column: col,
                message: format!("unexpected token {t:?}"),
            }),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<ExpressionField, ExprError> {
    let Lexer { toks } = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    // vector literal: '(' expr ',' expr ')' spanning the whole input
    let shape = if *p.peek() == Tok::LParen {
        let save = p.pos;
        p.bump();
        let first = p.expr()?;
        if *p.peek() == Tok::Comma {
            p.bump();
            let second = p.expr()?;
            p.expect(Tok::RParen, "')'")?;
            ExprShape::Vector(first, second)
        } else {
            p.pos = save;
            ExprShape::Scalar(p.expr()?)
        }
    } else {
        ExprShape::Scalar(p.expr()?)
    };
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(ExpressionField {
        source: text.trim().to_string(),
        shape,
    })
}
