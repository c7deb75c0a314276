//! A small real-valued expression language for kernels, right-hand sides
//! and exact solutions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?            right associative
//! atom    := number | constant | variable | func '(' sum ')' | '(' sum ')'
//! ```
//!
//! Variables are `x`, `s` in one dimension and `x1`, `x2`, `s1`, `s2` in
//! two. Constants are `pi` and `e`; functions are `sin cos exp log sqrt abs`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unbound variable '{0}'")]
    UnboundVariable(String),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    X,
    S,
}

/// Variable `x_i` or `s_i` (axis `i`, 0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub axis: usize,
    pub dim: usize,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            VarKind::X => "x",
            VarKind::S => "s",
        };
        if self.dim == 1 {
            write!(f, "{base}")
        } else {
            write!(f, "{base}{}", self.axis + 1)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
            Self::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Const {
    Pi,
    E,
}

impl Const {
    fn value(self) -> f64 {
        match self {
            Self::Pi => std::f64::consts::PI,
            Self::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
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
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Const(Const),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values for `x` and, for kernels, `s`.
#[derive(Debug, Clone, Copy)]
pub struct Bindings<'a> {
    pub x: Option<&'a [f64]>,
    pub s: Option<&'a [f64]>,
}

impl<'a> Bindings<'a> {
    pub fn x(x: &'a [f64]) -> Self {
        Self { x: Some(x), s: None }
    }

    pub fn xs(x: &'a [f64], s: &'a [f64]) -> Self {
        Self {
            x: Some(x),
            s: Some(s),
        }
    }
}

impl Expr {
    /// Parses `text` with the variable names of dimension `dim`.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ExprError> {
        if !(1..=2).contains(&dim) {
            return Err(ExprError::Syntax {
                offset: 0,
                message: format!("unsupported dimension {dim}"),
            });
        }
        let tokens = lex(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            dim,
            end: text.len(),
        };
        let expr = parser.sum()?;
        match parser.peek() {
            None => Ok(expr),
            Some(tok) => Err(ExprError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind.describe()),
            }),
        }
    }

    pub fn eval(&self, env: &Bindings<'_>) -> Result<f64, ExprError> {
        Ok(match self {
            Self::Num(v) => *v,
            Self::Const(c) => c.value(),
            Self::Var(v) => {
                let values = match v.kind {
                    VarKind::X => env.x,
                    VarKind::S => env.s,
                };
                *values
                    .and_then(|vals| vals.get(v.axis))
                    .ok_or_else(|| ExprError::UnboundVariable(v.to_string()))?
            }
            Self::Neg(a) => -a.eval(env)?,
            Self::Binary(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(ExprError::Domain(format!("division of {a} by zero")));
                        }
                        a / b
                    }
                    BinOp::Pow => power(a, b)?,
                }
            }
            Self::Call(f, a) => {
                let v = a.eval(env)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Abs => v.abs(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(ExprError::Domain(format!("log of nonpositive value {v}")));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative value {v}")));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// Evaluates with `x` bound.
    pub fn eval_x(&self, x: &[f64]) -> Result<f64, ExprError> {
        self.eval(&Bindings::x(x))
    }

    /// Evaluates with `x` and `s` bound.
    pub fn eval_xs(&self, x: &[f64], s: &[f64]) -> Result<f64, ExprError> {
        self.eval(&Bindings::xs(x, s))
    }

    /// True if any `s` variable appears.
    pub fn uses_s(&self) -> bool {
        match self {
            Self::Var(v) => v.kind == VarKind::S,
            Self::Num(_) | Self::Const(_) => false,
            Self::Neg(a) | Self::Call(_, a) => a.uses_s(),
            Self::Binary(_, a, b) => a.uses_s() || b.uses_s(),
        }
    }

    /// True if every variable belongs to dimension `dim`.
    pub fn has_dim(&self, dim: usize) -> bool {
        match self {
            Self::Var(v) => v.dim == dim,
            Self::Num(_) | Self::Const(_) => true,
            Self::Neg(a) | Self::Call(_, a) => a.has_dim(dim),
            Self::Binary(_, a, b) => a.has_dim(dim) && b.has_dim(dim),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Self::Binary(BinOp::Add | BinOp::Sub, ..) => 1,
            Self::Binary(BinOp::Mul | BinOp::Div, ..) => 2,
            Self::Neg(_) => 3,
            Self::Binary(BinOp::Pow, ..) => 4,
            Self::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            _ => 5,
        }
    }
}

fn power(base: f64, exp: f64) -> Result<f64, ExprError> {
    if base == 0.0 && exp == 0.0 {
        return Ok(1.0);
    }
    if base < 0.0 && exp.fract() != 0.0 {
        return Err(ExprError::Domain(format!(
            "negative base {base} with non-integer exponent {exp}"
        )));
    }
    if base == 0.0 && exp < 0.0 {
        return Err(ExprError::Domain(format!("zero raised to negative power {exp}")));
    }
    Ok(base.powf(exp))
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    /// Prints with the minimal parentheses that reparse to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Num(v) => write!(f, "{v:?}"),
            Self::Const(Const::Pi) => write!(f, "pi"),
            Self::Const(Const::E) => write!(f, "e"),
            Self::Var(v) => write!(f, "{v}"),
            Self::Neg(a) => {
                write!(f, "-")?;
                // "--x" is fine for the parser but hard to read
                write_operand(f, a, a.precedence() < 4)
            }
            Self::Call(func, a) => write!(f, "{}({a})", func.name()),
            Self::Binary(op, a, b) => {
                let p = self.precedence();
                let (left_parens, right_parens) = match op {
                    BinOp::Pow => (a.precedence() <= p, b.precedence() < 3),
                    _ => (a.precedence() < p, b.precedence() <= p),
                };
                write_operand(f, a, left_parens)?;
                write!(f, "{}", op.symbol())?;
                write_operand(f, b, right_parens)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            Self::Num(v) => format!("number {v}"),
            Self::Ident(name) => format!("identifier '{name}'"),
            Self::Op(c) => format!("'{c}'"),
            Self::LParen => "'('".to_string(),
            Self::RParen => "')'".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                tokens.push(Token {
                    kind: TokenKind::Op(c as char),
                    offset: start,
                });
                i += 1;
            }
            b'(' | b')' => {
                tokens.push(Token {
                    kind: if c == b'(' { TokenKind::LParen } else { TokenKind::RParen },
                    offset: start,
                });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let literal = &text[start..i];
                let value: f64 = literal.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number '{literal}'"),
                })?;
                tokens.push(Token {
                    kind: TokenKind::Num(value),
                    offset: start,
                });
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dim: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.peek().map_or(self.end, |t| t.offset)
    }

    fn expected(&self, what: &str) -> ExprError {
        let found = self
            .peek()
            .map_or_else(|| "end of input".to_string(), |t| t.kind.describe());
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("expected {what}, found {found}"),
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.product()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.peek_op() == Some('-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.expected("an expression"));
        };
        match tok.kind {
            TokenKind::Num(v) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            TokenKind::LParen => {
                self.pos += 1;
                let inner = self.sum()?;
                self.close_paren()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                        return Err(self.expected(&format!("'(' after function '{name}'")));
                    }
                    self.pos += 1;
                    let arg = self.sum()?;
                    self.close_paren()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "pi" => return Ok(Expr::Const(Const::Pi)),
                    "e" => return Ok(Expr::Const(Const::E)),
                    _ => {}
                }
                self.variable(&name).map(Expr::Var).ok_or(ExprError::UnknownIdentifier {
                    name,
                    offset: tok.offset,
                })
            }
            _ => Err(self.expected("an expression")),
        }
    }

    fn close_paren(&mut self) -> Result<(), ExprError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.expected("')'"))
        }
    }

    fn variable(&self, name: &str) -> Option<Var> {
        let (kind, rest) = match name.as_bytes().first()? {
            b'x' => (VarKind::X, &name[1..]),
            b's' => (VarKind::S, &name[1..]),
            _ => return None,
        };
        let axis = match (self.dim, rest) {
            (1, "") => 0,
            (2, "1") => 0,
            (2, "2") => 1,
            _ => return None,
        };
        Some(Var {
            kind,
            axis,
            dim: self.dim,
        })
    }
}
