//! Expression mini-language for scalar data on the torus.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//! var     := 'x1' | 'y1' | 'x2' | 'y2' | 'x3' | 'y3'
//! func    := 'sin' | 'cos' | 'exp'
//! ```
//!
//! Variables are the real coordinates in `[0, 1)`; a variable beyond the
//! grid's complex dimension is rejected at parse time.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("expression error at byte {pos}: {message}")]
pub struct ExprError {
    pub pos: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    /// Index into `[x1, y1, x2, y2, x3, y3]`.
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression, evaluated at `[x1, y1, x2, y2, x3, y3]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    pub fn parse(src: &str, complex_dim: usize) -> Result<Expr, ExprError> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            dim: complex_dim,
        };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, pos: &[f64; 6]) -> f64 {
        eval(&self.root, pos)
    }
}

fn eval(node: &Node, pos: &[f64; 6]) -> f64 {
    match node {
        Node::Num(v) => *v,
        Node::Var(i) => pos[*i],
        Node::Neg(a) => -eval(a, pos),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, pos), eval(b, pos));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                _ => a / b,
            }
        }
        Node::Call(f, a) => {
            let a = eval(a, pos);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError {
            pos: self.pos,
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

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(c as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == digits {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Node::Num).map_err(|_| ExprError {
            pos: start,
            message: format!("invalid number '{text}'"),
        })
    }

    fn word(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let w = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let func = match w {
            "pi" => return Ok(Node::Num(std::f64::consts::PI)),
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            _ => return self.variable(w, start),
        };
        self.expect(b'(')?;
        let arg = self.expr()?;
        self.expect(b')')?;
        Ok(Node::Call(func, Box::new(arg)))
    }

    fn variable(&self, w: &str, start: usize) -> Result<Node, ExprError> {
        let bad = |message: String| ExprError { pos: start, message };
        let b = w.as_bytes();
        if b.len() != 2 || !matches!(b[0], b'x' | b'y') || !(b'1'..=b'3').contains(&b[1]) {
            return Err(bad(format!("unknown identifier '{w}'")));
        }
        let j = (b[1] - b'1') as usize;
        if j >= self.dim {
            return Err(bad(format!("variable '{w}' exceeds complex dimension {}", self.dim)));
        }
        Ok(Node::Var(2 * j + usize::from(b[0] == b'y')))
    }
}
