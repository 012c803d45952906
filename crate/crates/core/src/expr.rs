//! Arithmetic expressions over named chart coordinates.
//!
//! Binding, loosest to tightest: `+ -`, `* /`, `^` (right associative), unary
//! minus, then atoms. Unary minus binds tighter than `^`, so `-x^2` reads as
//! `(-x)^2`; write `-(x^2)` or `0 - x^2` for the other meaning.
//!
//! Besides plain evaluation, expressions evaluate to second-order jets
//! (value, gradient, Hessian) by forward-mode automatic differentiation. These
//! jets are the "analytic oracles" used throughout the engine.

use std::fmt;

use thiserror::Error;

use crate::field::Jet;

/// Largest number of variables an expression can be differentiated in.
pub const MAX_JET_VARS: usize = 4;

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprErrorKind {
    Syntax,
    UnknownIdentifier { name: String, suggestions: Vec<String> },
    Arity { function: String, expected: usize, found: usize },
    Evaluation,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{pos}: {message}")]
pub struct ExprError {
    pub kind: ExprErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl ExprError {
    fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        Self { kind: ExprErrorKind::Syntax, pos, message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sinh,
    Cosh,
    Tanh,
    Pow,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 13] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Pow,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Pow => "pow",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: Kind,
    pub pos: Pos,
}

impl Node {
    fn new(kind: Kind, pos: Pos) -> Self {
        Self { kind, pos }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Const(c) => *c,
            Kind::Var(i) => x[*i],
            Kind::Neg(a) => -a.eval(x),
            Kind::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
            Kind::Call(f, args) => {
                let a = args[0].eval(x);
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Log => a.ln(),
                    Func::Sqrt => a.sqrt(),
                    Func::Abs => a.abs(),
                    Func::Sinh => a.sinh(),
                    Func::Cosh => a.cosh(),
                    Func::Tanh => a.tanh(),
                    Func::Pow => pow(a, args[1].eval(x)),
                    Func::Min => a.min(args[1].eval(x)),
                    Func::Max => a.max(args[1].eval(x)),
                }
            }
        }
    }

    /// First sub-expression (innermost first) whose value is not finite.
    fn first_non_finite(&self, x: &[f64]) -> Option<Pos> {
        let children: Vec<&Node> = match &self.kind {
            Kind::Const(_) | Kind::Var(_) => vec![],
            Kind::Neg(a) => vec![a],
            Kind::Binary(_, a, b) => vec![a, b],
            Kind::Call(_, args) => args.iter().collect(),
        };
        for c in children {
            if let Some(p) = c.first_non_finite(x) {
                return Some(p);
            }
        }
        (!self.eval(x).is_finite()).then_some(self.pos)
    }

    fn dual(&self, x: &[f64], n: usize) -> Dual {
        match &self.kind {
            Kind::Const(c) => Dual::constant(*c),
            Kind::Var(i) => Dual::variable(x[*i], *i),
            Kind::Neg(a) => a.dual(x, n).scale(-1.0, n),
            Kind::Binary(op, a, b) => {
                let (a, b) = (a.dual(x, n), b.dual(x, n));
                match op {
                    BinOp::Add => a.add(&b, 1.0, n),
                    BinOp::Sub => a.add(&b, -1.0, n),
                    BinOp::Mul => a.mul(&b, n),
                    BinOp::Div => a.mul(&b.recip(n), n),
                    BinOp::Pow => a.pow(&b, n),
                }
            }
            Kind::Call(f, args) => {
                let a = args[0].dual(x, n);
                let v = a.v;
                match f {
                    Func::Sin => a.chain(v.sin(), v.cos(), -v.sin(), n),
                    Func::Cos => a.chain(v.cos(), -v.sin(), -v.cos(), n),
                    Func::Tan => {
                        let t = v.tan();
                        let s = 1.0 + t * t;
                        a.chain(t, s, 2.0 * t * s, n)
                    }
                    Func::Exp => {
                        let e = v.exp();
                        a.chain(e, e, e, n)
                    }
                    Func::Log => a.chain(v.ln(), 1.0 / v, -1.0 / (v * v), n),
                    Func::Sqrt => {
                        let s = v.sqrt();
                        a.chain(s, 0.5 / s, -0.25 / (s * v), n)
                    }
                    Func::Abs => a.chain(v.abs(), v.signum(), 0.0, n),
                    Func::Sinh => a.chain(v.sinh(), v.cosh(), v.sinh(), n),
                    Func::Cosh => a.chain(v.cosh(), v.sinh(), v.cosh(), n),
                    Func::Tanh => {
                        let t = v.tanh();
                        let s = 1.0 - t * t;
                        a.chain(t, s, -2.0 * t * s, n)
                    }
                    Func::Pow => a.pow(&args[1].dual(x, n), n),
                    Func::Min => {
                        let b = args[1].dual(x, n);
                        if a.v <= b.v {
                            a
                        } else {
                            b
                        }
                    }
                    Func::Max => {
                        let b = args[1].dual(x, n);
                        if a.v >= b.v {
                            a
                        } else {
                            b
                        }
                    }
                }
            }
        }
    }

    fn map_vars(&self, f: &impl Fn(usize, Pos) -> Node) -> Node {
        let kind = match &self.kind {
            Kind::Var(i) => return f(*i, self.pos),
            Kind::Const(c) => Kind::Const(*c),
            Kind::Neg(a) => Kind::Neg(Box::new(a.map_vars(f))),
            Kind::Binary(op, a, b) => Kind::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Kind::Call(g, args) => Kind::Call(*g, args.iter().map(|a| a.map_vars(f)).collect()),
        };
        Node::new(kind, self.pos)
    }

    fn uses_vars(&self) -> bool {
        match &self.kind {
            Kind::Const(_) => false,
            Kind::Var(_) => true,
            Kind::Neg(a) => a.uses_vars(),
            Kind::Binary(_, a, b) => a.uses_vars() || b.uses_vars(),
            Kind::Call(_, args) => args.iter().any(Node::uses_vars),
        }
    }

    fn write(&self, vars: &[String], out: &mut String) {
        use std::fmt::Write;
        match &self.kind {
            Kind::Const(c) if *c < 0.0 => {
                let _ = write!(out, "(-{})", -c);
            }
            Kind::Const(c) => {
                let _ = write!(out, "{c}");
            }
            Kind::Var(i) => out.push_str(&vars[*i]),
            Kind::Neg(a) => {
                out.push_str("(-");
                a.write(vars, out);
                out.push(')');
            }
            Kind::Binary(op, a, b) => {
                out.push('(');
                a.write(vars, out);
                let _ = write!(out, " {} ", op.symbol());
                b.write(vars, out);
                out.push(')');
            }
            Kind::Call(f, args) => {
                out.push_str(f.name());
                out.push('(');
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    a.write(vars, out);
                }
                out.push(')');
            }
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A parsed expression together with its variable names.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
    vars: Vec<String>,
}

impl Expr {
    /// Parses `text` with the given variable names in scope.
    pub fn parse(text: &str, vars: &[&str]) -> Result<Expr, ExprError> {
        let owned: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, at: 0, vars: &owned };
        let root = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ExprError::syntax(tok.pos, format!("unexpected {}", tok.tok)));
        }
        Ok(Expr { root, vars: owned })
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }

    /// Evaluates, locating the innermost sub-expression that produced a
    /// non-finite value.
    pub fn try_eval(&self, x: &[f64]) -> Result<f64, ExprError> {
        let v = self.eval(x);
        if v.is_finite() {
            return Ok(v);
        }
        let pos = self.root.first_non_finite(x).unwrap_or(self.root.pos);
        Err(ExprError {
            kind: ExprErrorKind::Evaluation,
            pos,
            message: format!("non-finite value at {:?}", x),
        })
    }

    /// Value, gradient and Hessian at `x` by forward-mode differentiation.
    pub fn jet(&self, x: &[f64]) -> Jet {
        let n = x.len();
        assert!(n <= MAX_JET_VARS, "jets support at most {MAX_JET_VARS} variables");
        let d = self.root.dual(x, n);
        let mut hessian = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hessian[i * n + j] = d.h[i][j];
            }
        }
        Jet { value: d.v, gradient: d.g[..n].to_vec(), hessian }
    }

    /// `Some(value)` when the expression does not depend on any variable.
    pub fn constant_value(&self) -> Option<f64> {
        (!self.root.uses_vars()).then(|| self.root.eval(&[]))
    }

    /// The expression `z -> self(s * z)`, built by substituting `s * x_i` for
    /// every variable.
    pub fn rescaled(&self, s: f64) -> Expr {
        let root = self.root.map_vars(&|i, pos| {
            Node::new(
                Kind::Binary(
                    BinOp::Mul,
                    Box::new(Node::new(Kind::Const(s), pos)),
                    Box::new(Node::new(Kind::Var(i), pos)),
                ),
                pos,
            )
        });
        Expr { root, vars: self.vars.clone() }
    }

    /// Replaces the named variables by constants; the remaining variables keep
    /// their relative order.
    pub fn bind(&self, values: &[(&str, f64)]) -> Expr {
        let mut remap = Vec::with_capacity(self.vars.len());
        let mut kept = Vec::new();
        for name in &self.vars {
            match values.iter().find(|(n, _)| n == name) {
                Some((_, v)) => remap.push(Err(*v)),
                None => {
                    remap.push(Ok(kept.len()));
                    kept.push(name.clone());
                }
            }
        }
        let root = self.root.map_vars(&|i, pos| match remap[i] {
            Ok(j) => Node::new(Kind::Var(j), pos),
            Err(v) => Node::new(Kind::Const(v), pos),
        });
        Expr { root, vars: kept }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.root.write(&self.vars, &mut s);
        f.write_str(&s)
    }
}

// ---------------------------------------------------------------------------
// second-order forward-mode dual numbers

#[derive(Clone, Copy)]
struct Dual {
    v: f64,
    g: [f64; MAX_JET_VARS],
    h: [[f64; MAX_JET_VARS]; MAX_JET_VARS],
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, g: [0.0; MAX_JET_VARS], h: [[0.0; MAX_JET_VARS]; MAX_JET_VARS] }
    }

    fn variable(v: f64, i: usize) -> Self {
        let mut d = Dual::constant(v);
        d.g[i] = 1.0;
        d
    }

    fn is_constant(&self, n: usize) -> bool {
        (0..n).all(|i| self.g[i] == 0.0 && (0..n).all(|j| self.h[i][j] == 0.0))
    }

    fn scale(mut self, c: f64, n: usize) -> Self {
        self.v *= c;
        for i in 0..n {
            self.g[i] *= c;
            for j in 0..n {
                self.h[i][j] *= c;
            }
        }
        self
    }

    /// `self + c * other`
    fn add(mut self, other: &Dual, c: f64, n: usize) -> Self {
        self.v += c * other.v;
        for i in 0..n {
            self.g[i] += c * other.g[i];
            for j in 0..n {
                self.h[i][j] += c * other.h[i][j];
            }
        }
        self
    }

    fn mul(&self, b: &Dual, n: usize) -> Self {
        let mut r = Dual::constant(self.v * b.v);
        for i in 0..n {
            r.g[i] = self.v * b.g[i] + b.v * self.g[i];
            for j in 0..n {
                r.h[i][j] = self.v * b.h[i][j]
                    + b.v * self.h[i][j]
                    + self.g[i] * b.g[j]
                    + b.g[i] * self.g[j];
            }
        }
        r
    }

    /// `f(self)` given `f`, `f'`, `f''` at `self.v`.
    fn chain(&self, f0: f64, f1: f64, f2: f64, n: usize) -> Self {
        let mut r = Dual::constant(f0);
        for i in 0..n {
            r.g[i] = f1 * self.g[i];
            for j in 0..n {
                r.h[i][j] = f2 * self.g[i] * self.g[j] + f1 * self.h[i][j];
            }
        }
        r
    }

    fn recip(&self, n: usize) -> Self {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v), n)
    }

    fn pow(&self, b: &Dual, n: usize) -> Self {
        if b.is_constant(n) {
            let c = b.v;
            let v = self.v;
            self.chain(pow(v, c), c * pow(v, c - 1.0), c * (c - 1.0) * pow(v, c - 2.0), n)
        } else {
            let lna = self.chain(self.v.ln(), 1.0 / self.v, -1.0 / (self.v * self.v), n);
            let e = b.mul(&lna, n);
            let ev = e.v.exp();
            e.chain(ev, ev, ev, n)
        }
    }
}

// ---------------------------------------------------------------------------
// lexer / parser

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::Comma => f.write_str("','"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || c == '.' {
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
            let s: String = chars[start..i].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| ExprError::syntax(pos, format!("malformed number '{s}'")))?;
            Tok::Num(v)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => return Err(ExprError::syntax(pos, format!("unexpected character '{c}'"))),
            }
        };
        col += i - start;
        tokens.push(Token { tok, pos });
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    at: usize,
    vars: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn end_pos(&self) -> Pos {
        self.tokens
            .last()
            .map(|t| Pos { line: t.pos.line, column: t.pos.column + 1 })
            .unwrap_or(Pos { line: 1, column: 1 })
    }

    fn next(&mut self) -> Result<Token, ExprError> {
        let t = self
            .tokens
            .get(self.at)
            .cloned()
            .ok_or_else(|| ExprError::syntax(self.end_pos(), "unexpected end of expression"))?;
        self.at += 1;
        Ok(t)
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<(char, Pos)> {
        match self.peek() {
            Some(Token { tok: Tok::Op(c), pos }) if ops.contains(c) => {
                let r = (*c, *pos);
                self.at += 1;
                Some(r)
            }
            _ => None,
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        let t = self.next()?;
        if t.tok == want {
            Ok(())
        } else {
            Err(ExprError::syntax(t.pos, format!("expected {want}, found {}", t.tok)))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some((c, pos)) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::new(Kind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.power()?;
        while let Some((c, pos)) = self.eat_op(&['*', '/']) {
            let rhs = self.power()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::new(Kind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.unary()?;
        if let Some((_, pos)) = self.eat_op(&['^']) {
            let exp = self.power()?;
            return Ok(Node::new(Kind::Binary(BinOp::Pow, Box::new(base), Box::new(exp)), pos));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if let Some((c, pos)) = self.eat_op(&['-', '+']) {
            let inner = self.unary()?;
            return Ok(if c == '-' { Node::new(Kind::Neg(Box::new(inner)), pos) } else { inner });
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let t = self.next()?;
        match t.tok {
            Tok::Num(v) => Ok(Node::new(Kind::Const(v), t.pos)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if matches!(self.peek(), Some(Token { tok: Tok::LParen, .. })) {
                    self.at += 1;
                    let f = Func::lookup(&name).ok_or_else(|| self.unknown(&name, t.pos, true))?;
                    let mut args = vec![self.expr()?];
                    while matches!(self.peek(), Some(Token { tok: Tok::Comma, .. })) {
                        self.at += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != f.arity() {
                        return Err(ExprError {
                            kind: ExprErrorKind::Arity {
                                function: name.clone(),
                                expected: f.arity(),
                                found: args.len(),
                            },
                            pos: t.pos,
                            message: format!(
                                "{name} takes {} argument(s), found {}",
                                f.arity(),
                                args.len()
                            ),
                        });
                    }
                    Ok(Node::new(Kind::Call(f, args), t.pos))
                } else if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    Ok(Node::new(Kind::Var(i), t.pos))
                } else if name == "pi" {
                    Ok(Node::new(Kind::Const(std::f64::consts::PI), t.pos))
                } else if name == "e" {
                    Ok(Node::new(Kind::Const(std::f64::consts::E), t.pos))
                } else {
                    Err(self.unknown(&name, t.pos, false))
                }
            }
            other => Err(ExprError::syntax(t.pos, format!("unexpected {other}"))),
        }
    }

    fn unknown(&self, name: &str, pos: Pos, call: bool) -> ExprError {
        let mut known: Vec<String> = self.vars.to_vec();
        known.extend(["pi".to_string(), "e".to_string()]);
        known.extend(Func::ALL.iter().map(|f| f.name().to_string()));
        let mut suggestions: Vec<(usize, String)> = known
            .into_iter()
            .map(|k| (edit_distance(name, &k), k))
            .filter(|(d, k)| *d <= 2.max(name.len() / 3) && *d < k.len().max(name.len()))
            .collect();
        suggestions.sort();
        let suggestions: Vec<String> = suggestions.into_iter().map(|(_, k)| k).collect();
        let what = if call { "function" } else { "identifier" };
        let message = if suggestions.is_empty() {
            format!("unknown {what} '{name}'")
        } else {
            format!("unknown {what} '{name}' (did you mean {}?)", suggestions.join(", "))
        };
        ExprError {
            kind: ExprErrorKind::UnknownIdentifier { name: name.to_string(), suggestions },
            pos,
            message,
        }
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for i in 1..=a.len() {
        let mut cur = vec![i; b.len() + 1];
        for j in 1..=b.len() {
            let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
            cur[j] = sub.min(prev[j] + 1).min(cur[j - 1] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}
