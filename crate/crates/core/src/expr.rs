//! A small arithmetic expression language for graph functions given in configs.
//!
//! ```text
//! expr    := compare
//! compare := sum (("<" | "<=" | ">" | ">=") sum)?
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | name | name "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! Names `x1, x2, ...` are group coordinates (1-based, so for a splitting with
//! `k = 1` the first usable variable is `x2`). Other names are parameters,
//! plus the constants `pi` and `e`. Comparisons yield 1 or 0.
//! Functions: `sin cos tan exp ln sqrt abs sgn chi pow min max if`.
//! `chi(t)` is 1 for `t >= 0` and 0 otherwise, `sgn(0) = 0`, and
//! `if(c, a, b)` evaluates only `a` when `c != 0`, only `b` otherwise.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sgn,
    Chi,
    Pow,
    Min,
    Max,
    If,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tan" => (Func::Tan, 1),
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sgn" | "sign" => (Func::Sgn, 1),
            "chi" => (Func::Chi, 1),
            "pow" => (Func::Pow, 2),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "if" => (Func::If, 3),
            _ => return None,
        })
    }
}

/// A compiled expression in the coordinates `x1..xn`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
    max_var: usize,
}

impl Expr {
    /// Parse `src`; parameter names are substituted by their values.
    pub fn parse(src: &str, params: &BTreeMap<String, f64>) -> Result<Expr> {
        let mut parser = Parser {
            chars: src.chars().collect(),
            pos: 0,
            params,
            max_var: 0,
        };
        let root = parser.expr()?;
        parser.skip_ws();
        if parser.pos < parser.chars.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(Expr {
            root,
            source: src.to_string(),
            max_var: parser.max_var,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Largest 1-based coordinate index referenced.
    pub fn max_variable(&self) -> usize {
        self.max_var
    }

    /// Evaluate with `coords[i]` bound to `x{i+1}`.
    pub fn eval(&self, coords: &[f64]) -> f64 {
        eval(&self.root, coords)
    }
}

fn eval(node: &Node, x: &[f64]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => x[*i],
        Node::Neg(a) => -eval(a, x),
        Node::Bin(op, a, b) => {
            let (u, v) = (eval(a, x), eval(b, x));
            match op {
                Op::Add => u + v,
                Op::Sub => u - v,
                Op::Mul => u * v,
                Op::Div => u / v,
                Op::Pow => power(u, v),
                Op::Lt => bool_num(u < v),
                Op::Le => bool_num(u <= v),
                Op::Gt => bool_num(u > v),
                Op::Ge => bool_num(u >= v),
            }
        }
        Node::Call(f, args) => {
            if *f == Func::If {
                return if eval(&args[0], x) != 0.0 {
                    eval(&args[1], x)
                } else {
                    eval(&args[2], x)
                };
            }
            let a = eval(&args[0], x);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Exp => a.exp(),
                Func::Ln => a.ln(),
                Func::Sqrt => a.sqrt(),
                Func::Abs => a.abs(),
                Func::Sgn => sgn(a),
                Func::Chi => chi(a),
                Func::Pow => power(a, eval(&args[1], x)),
                Func::Min => a.min(eval(&args[1], x)),
                Func::Max => a.max(eval(&args[1], x)),
                Func::If => unreachable!(),
            }
        }
    }
}

fn power(u: f64, v: f64) -> f64 {
    if v == v.trunc() && v.abs() < 64.0 {
        u.powi(v as i32)
    } else {
        u.powf(v)
    }
}

fn bool_num(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Indicator of `[0, ∞)`, with `chi(0) = 1`.
pub fn chi(t: f64) -> f64 {
    bool_num(t >= 0.0)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    params: &'a BTreeMap<String, f64>,
    max_var: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Expression {
            pos: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let lhs = self.sum()?;
        let op = match self.peek() {
            Some('<') => Some(Op::Lt),
            Some('>') => Some(Op::Gt),
            _ => None,
        };
        let Some(mut op) = op else {
            return Ok(lhs);
        };
        self.pos += 1;
        if self.chars.get(self.pos) == Some(&'=') {
            self.pos += 1;
            op = if op == Op::Lt { Op::Le } else { Op::Ge };
        }
        let rhs = self.sum()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Some('+') => Op::Add,
                Some('-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some('*') => Op::Mul,
                Some('/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.name(),
            Some(c) => Err(self.error(&format!("unexpected character '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_digit() || self.chars[self.pos] == '.')
        {
            self.pos += 1;
        }
        if self.pos < self.chars.len() && matches!(self.chars[self.pos], 'e' | 'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.chars.len() && matches!(self.chars[self.pos], '+' | '-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Node::Num).map_err(|_| Error::Expression {
            pos: start + 1,
            msg: format!("bad number '{text}'"),
        })
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.chars.len()
            && (self.chars[self.pos].is_ascii_alphanumeric() || self.chars[self.pos] == '_')
        {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        if self.peek() == Some('(') {
            let Some((func, arity)) = Func::lookup(&name) else {
                return Err(Error::Expression {
                    pos: start + 1,
                    msg: format!("unknown function '{name}'"),
                });
            };
            self.pos += 1;
            let mut args = vec![self.expr()?];
            while self.eat(',') {
                args.push(self.expr()?);
            }
            if !self.eat(')') {
                return Err(self.error("expected ')' after arguments"));
            }
            if args.len() != arity {
                return Err(Error::Expression {
                    pos: start + 1,
                    msg: format!("{name} takes {arity} argument(s), got {}", args.len()),
                });
            }
            return Ok(Node::Call(func, args));
        }
        if let Some(v) = self.params.get(&name) {
            return Ok(Node::Num(*v));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "e" => return Ok(Node::Num(std::f64::consts::E)),
            _ => {}
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|r| r.parse::<usize>().ok()) {
            if idx == 0 {
                return Err(Error::Expression {
                    pos: start + 1,
                    msg: "coordinates are numbered from x1".into(),
                });
            }
            self.max_var = self.max_var.max(idx);
            return Ok(Node::Var(idx - 1));
        }
        Err(Error::Expression {
            pos: start + 1,
            msg: format!("unknown name '{name}'"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), 2.0);
        Expr::parse(src, &params).unwrap().eval(x)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", &[]), 7.0);
        assert_eq!(ev("-2^2", &[]), -4.0);
        assert_eq!(ev("2^3^2", &[]), 512.0);
        assert_eq!(ev("(1 + 2) * 3", &[]), 9.0);
        assert_eq!(ev("c*x2", &[0.0, 1.5]), 3.0);
        assert_eq!(ev("1e-3 * 1E3", &[]), 1.0);
    }

    #[test]
    fn functions_and_conventions() {
        assert_eq!(ev("chi(0)", &[]), 1.0);
        assert_eq!(ev("chi(-1e-300)", &[]), 0.0);
        assert_eq!(ev("sgn(0)", &[]), 0.0);
        assert_eq!(ev("if(x1 >= 0, sqrt(x1), 0)", &[-4.0]), 0.0);
        assert_eq!(ev("if(x1 >= 0, sqrt(x1), 0)", &[4.0]), 2.0);
        assert_eq!(ev("max(1, pow(2, 3))", &[]), 8.0);
        assert!((ev("sin(pi/2) + ln(e)", &[]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        let params = BTreeMap::new();
        match Expr::parse("1 + foo", &params) {
            Err(Error::Expression { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("sin(1, 2)", &params).is_err());
        assert!(Expr::parse("(1", &params).is_err());
        assert!(Expr::parse("1 2", &params).is_err());
        assert!(Expr::parse("x0", &params).is_err());
    }

    #[test]
    fn max_variable_is_tracked() {
        let e = Expr::parse("x2 + x5*x3", &BTreeMap::new()).unwrap();
        assert_eq!(e.max_variable(), 5);
    }
}
