//! Arithmetic expressions over `x, y, t, alpha, beta`.
//!
//! Grammar: numbers, the variables, `pi`, `+ - * / ^`, unary minus,
//! parentheses and the functions `sin cos tan exp ln sqrt abs` (one
//! argument) and `max min` (two arguments). `^` is right-associative and
//! binds tighter than unary minus, so `-x^2 = -(x^2)`.

use crate::error::ProblemError;

/// Variable slots in evaluation order.
pub const VARIABLES: [&str; 5] = ["x", "y", "t", "alpha", "beta"];

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Number(f64),
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call1(Func1, Box<Node>),
    Call2(Func2, Box<Node>, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func1 {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func2 {
    Max,
    Min,
}

/// A parsed expression.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    source: String,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, ProblemError> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens, pos: 0, len: source.len() };
        let root = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(err(tok.offset, "unexpected trailing input"));
        }
        Ok(Self {
            root,
            source: source.to_string(),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `vars = [x, y, t, alpha, beta]`.
    pub fn eval(&self, vars: &[f64; 5]) -> f64 {
        eval(&self.root, vars)
    }

    /// Whether the expression mentions variable slot `slot`.
    pub fn uses(&self, slot: usize) -> bool {
        fn walk(n: &Node, slot: usize) -> bool {
            match n {
                Node::Number(_) => false,
                Node::Var(v) => *v == slot,
                Node::Neg(a) | Node::Call1(_, a) => walk(a, slot),
                Node::Binary(_, a, b) | Node::Call2(_, a, b) => walk(a, slot) || walk(b, slot),
            }
        }
        walk(&self.root, slot)
    }
}

fn eval(n: &Node, v: &[f64; 5]) -> f64 {
    match n {
        Node::Number(x) => *x,
        Node::Var(i) => v[*i],
        Node::Neg(a) => -eval(a, v),
        Node::Binary(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Node::Call1(f, a) => {
            let a = eval(a, v);
            match f {
                Func1::Sin => a.sin(),
                Func1::Cos => a.cos(),
                Func1::Tan => a.tan(),
                Func1::Exp => a.exp(),
                Func1::Ln => a.ln(),
                Func1::Sqrt => a.sqrt(),
                Func1::Abs => a.abs(),
            }
        }
        Node::Call2(f, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match f {
                Func2::Max => a.max(b),
                Func2::Min => a.min(b),
            }
        }
    }
}

fn err(offset: usize, message: impl Into<String>) -> ProblemError {
    ProblemError::Expression {
        offset,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn tokenize(s: &str) -> Result<Vec<Token>, ProblemError> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &s[start..i];
            let value = text.parse().map_err(|_| err(start, format!("invalid number '{text}'")))?;
            out.push(Token {
                tok: Tok::Num(value),
                offset: start,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(s[start..i].to_string()),
                offset: start,
            });
        } else if "+-*/^(),".contains(c) {
            out.push(Token {
                tok: Tok::Op(c),
                offset: i,
            });
            i += 1;
        } else {
            return Err(err(i, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek_op(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Token { tok: Tok::Op(c), .. }) => Some(*c),
            _ => None,
        }
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.len, |t| t.offset)
    }

    fn expect(&mut self, c: char) -> Result<(), ProblemError> {
        if self.peek_op() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(err(self.offset(), format!("expected '{c}'")))
        }
    }

    fn expr(&mut self) -> Result<Node, ProblemError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ProblemError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ProblemError> {
        match self.peek_op() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node, ProblemError> {
        let base = self.atom()?;
        if self.peek_op() == Some('^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ProblemError> {
        let Some(token) = self.tokens.get(self.pos).cloned() else {
            return Err(err(self.len, "unexpected end of expression"));
        };
        self.pos += 1;
        match token.tok {
            Tok::Num(v) => Ok(Node::Number(v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Op(c) => Err(err(token.offset, format!("unexpected '{c}'"))),
            Tok::Ident(name) => {
                if let Some(slot) = VARIABLES.iter().position(|v| *v == name) {
                    return Ok(Node::Var(slot));
                }
                if name == "pi" {
                    return Ok(Node::Number(std::f64::consts::PI));
                }
                let f1 = match name.as_str() {
                    "sin" => Some(Func1::Sin),
                    "cos" => Some(Func1::Cos),
                    "tan" => Some(Func1::Tan),
                    "exp" => Some(Func1::Exp),
                    "ln" => Some(Func1::Ln),
                    "sqrt" => Some(Func1::Sqrt),
                    "abs" => Some(Func1::Abs),
                    _ => None,
                };
                let f2 = match name.as_str() {
                    "max" => Some(Func2::Max),
                    "min" => Some(Func2::Min),
                    _ => None,
                };
                if f1.is_none() && f2.is_none() {
                    return Err(err(token.offset, format!("unknown identifier '{name}'")));
                }
                self.expect('(')?;
                let a = self.expr()?;
                let node = if let Some(f) = f1 {
                    Node::Call1(f, Box::new(a))
                } else {
                    self.expect(',')?;
                    let b = self.expr()?;
                    Node::Call2(f2.expect("checked above"), Box::new(a), Box::new(b))
                };
                self.expect(')')?;
                Ok(node)
            }
        }
    }
}
