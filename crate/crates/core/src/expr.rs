//! Small arithmetic-expression language for custom symbol entries.
//!
//! Variables: `r` (alias `abs`) for `|z|`, `x` (alias `re`) and `y` (alias
//! `im`), plus the constants `pi` and `e`. Operators `+ - * / ^` with the
//! usual precedence (`^` binds tighter than unary minus and is right
//! associative). Functions: `exp`, `cos`, `sin`, `sqrt` and `chi_disk(R)`,
//! the indicator of `|z| < R`.

use std::fmt;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Var {
    Abs,
    Re,
    Im,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Cos,
    Sin,
    Sqrt,
    ChiDisk,
}

/// A parsed expression in `|z|`, `Re z` and `Im z`.
#[derive(Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self> {
        let mut p = Parser {
            src: source.as_bytes(),
            pos: 0,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Self {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, z: C64) -> f64 {
        eval(&self.root, z.norm(), z.re, z.im)
    }

    /// Radii of every `chi_disk` with a constant argument.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        collect_breaks(&self.root, &mut out);
        out
    }

    /// True when the expression depends on `z` only through `|z|`.
    pub fn is_radial(&self) -> bool {
        radial(&self.root)
    }
}

fn eval(node: &Node, r: f64, x: f64, y: f64) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(Var::Abs) => r,
        Node::Var(Var::Re) => x,
        Node::Var(Var::Im) => y,
        Node::Neg(a) => -eval(a, r, x, y),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, r, x, y), eval(b, r, x, y));
            match op {
                Op::Add => a + b,
                Op::Sub => a - b,
                Op::Mul => a * b,
                Op::Div => a / b,
                Op::Pow => {
                    if b == 2.0 {
                        a * a
                    } else if b.fract() == 0.0 && b.abs() < 64.0 {
                        a.powi(b as i32)
                    } else {
                        a.powf(b)
                    }
                }
            }
        }
        Node::Call(f, a) => {
            let v = eval(a, r, x, y);
            match f {
                Func::Exp => v.exp(),
                Func::Cos => v.cos(),
                Func::Sin => v.sin(),
                Func::Sqrt => v.sqrt(),
                Func::ChiDisk => {
                    if r < v {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        }
    }
}

fn constant(node: &Node) -> Option<f64> {
    match node {
        Node::Num(v) => Some(*v),
        Node::Var(_) => None,
        Node::Neg(a) => constant(a).map(|v| -v),
        Node::Bin(..) | Node::Call(..) => {
            if has_var(node) {
                None
            } else {
                Some(eval(node, 0.0, 0.0, 0.0))
            }
        }
    }
}

fn has_var(node: &Node) -> bool {
    match node {
        Node::Num(_) => false,
        Node::Var(_) => true,
        Node::Neg(a) | Node::Call(_, a) => has_var(a),
        Node::Bin(_, a, b) => has_var(a) || has_var(b),
    }
}

fn radial(node: &Node) -> bool {
    match node {
        Node::Num(_) | Node::Var(Var::Abs) => true,
        Node::Var(_) => false,
        Node::Neg(a) | Node::Call(_, a) => radial(a),
        Node::Bin(_, a, b) => radial(a) && radial(b),
    }
}

fn collect_breaks(node: &Node, out: &mut Vec<f64>) {
    match node {
        Node::Call(Func::ChiDisk, a) => {
            if let Some(v) = constant(a) {
                out.push(v);
            }
            collect_breaks(a, out);
        }
        Node::Neg(a) | Node::Call(_, a) => collect_breaks(a, out),
        Node::Bin(_, a, b) => {
            collect_breaks(a, out);
            collect_breaks(b, out);
        }
        Node::Num(_) | Node::Var(_) => {}
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            column: self.pos + 1,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(b'-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign =
                (c == b'+' || c == b'-') && self.pos > start && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expression {
            column: start + 1,
            message: format!("bad number `{text}`"),
        })
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let func = match name {
            "exp" => Some(Func::Exp),
            "cos" => Some(Func::Cos),
            "sin" => Some(Func::Sin),
            "sqrt" => Some(Func::Sqrt),
            "chi_disk" => Some(Func::ChiDisk),
            _ => None,
        };
        if let Some(func) = func {
            if !self.eat(b'(') {
                return Err(self.error("expected `(` after function name"));
            }
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)`"));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        match name {
            "r" | "abs" => Ok(Node::Var(Var::Abs)),
            "x" | "re" => Ok(Node::Var(Var::Re)),
            "y" | "im" => Ok(Node::Var(Var::Im)),
            "pi" => Ok(Node::Num(std::f64::consts::PI)),
            "e" => Ok(Node::Num(std::f64::consts::E)),
            _ => Err(Error::Expression {
                column: start + 1,
                message: format!("unknown identifier `{name}`"),
            }),
        }
    }
}
