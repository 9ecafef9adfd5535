//! Expression text grammar.
//!
//! Canonical output is function-call form, e.g. `add(sub(X2, X7), sub(1, X1))`.
//! Input additionally accepts infix `+ - * /`, unary minus, parentheses and
//! `^` with exponents of the form `n / 2^m` (`m <= 4`), which are expanded
//! into nested `sqrt` and repeated `mul`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | variable | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```

use std::fmt;

use crate::primitives::{FunctionSymbol, Terminal};

use super::{Node, SyntaxTree};

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnexpectedToken {
        found: String,
        expected: &'static str,
    },
    UnexpectedEnd {
        expected: &'static str,
    },
    UnknownIdentifier(String),
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
    InvalidNumber(String),
    UnsupportedExponent(String),
}

/// A parse failure at a byte offset into the input.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => {
                write!(
                    f,
                    "unexpected character `{c}` at position {}",
                    self.position
                )
            }
            ParseErrorKind::UnexpectedToken { found, expected } => write!(
                f,
                "expected {expected} but found `{found}` at position {}",
                self.position
            ),
            ParseErrorKind::UnexpectedEnd { expected } => {
                write!(
                    f,
                    "expected {expected} at end of input (position {})",
                    self.position
                )
            }
            ParseErrorKind::UnknownIdentifier(name) => {
                write!(
                    f,
                    "unknown identifier `{name}` at position {}",
                    self.position
                )
            }
            ParseErrorKind::Arity {
                name,
                expected,
                found,
            } => write!(
                f,
                "`{name}` takes {expected} argument(s), got {found} at position {}",
                self.position
            ),
            ParseErrorKind::InvalidNumber(s) => {
                write!(f, "invalid number `{s}` at position {}", self.position)
            }
            ParseErrorKind::UnsupportedExponent(s) => write!(
                f,
                "exponent {s} at position {} is not of the form n/2^m",
                self.position
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "{v}"),
            Tok::Ident(s) => f.write_str(s),
            Tok::Op(c) => write!(f, "{c}"),
        }
    }
}

fn tokenize(input: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit))
        {
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
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &input[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                kind: ParseErrorKind::InvalidNumber(text.to_string()),
                position: start,
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(input[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Op(c as char), i));
            i += 1;
        } else {
            let ch = input[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                kind: ParseErrorKind::UnexpectedChar(ch),
                position: i,
            });
        }
    }
    Ok(out)
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('X')?;
    let digits = digits.strip_prefix('_').unwrap_or(digits);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn err(&self, expected: &'static str) -> ParseError {
        match self.toks.get(self.pos) {
            Some((tok, p)) => ParseError {
                kind: ParseErrorKind::UnexpectedToken {
                    found: tok.to_string(),
                    expected,
                },
                position: *p,
            },
            None => ParseError {
                kind: ParseErrorKind::UnexpectedEnd { expected },
                position: self.end,
            },
        }
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, op: char, expected: &'static str) -> Result<(), ParseError> {
        if self.eat(op) {
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let symbol = if self.eat('+') {
                FunctionSymbol::Add
            } else if self.eat('-') {
                FunctionSymbol::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::call(symbol, vec![lhs, rhs]);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let symbol = if self.eat('*') {
                FunctionSymbol::Mul
            } else if self.eat('/') {
                FunctionSymbol::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::call(symbol, vec![lhs, rhs]);
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            let inner = self.unary()?;
            Ok(match inner {
                Node::Leaf(Terminal::Constant(c)) => Node::constant(-c),
                other => Node::call(FunctionSymbol::Sub, vec![Node::constant(0.0), other]),
            })
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let at = self.offset();
        let exponent = self.unary()?;
        let value = constant_value(&exponent).ok_or_else(|| ParseError {
            kind: ParseErrorKind::UnsupportedExponent(exponent.to_string()),
            position: at,
        })?;
        expand_power(base, value).ok_or_else(|| ParseError {
            kind: ParseErrorKind::UnsupportedExponent(value.to_string()),
            position: at,
        })
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::constant(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect(')', "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(index) = variable_index(&name) {
                    return Ok(Node::var(index));
                }
                let symbol: FunctionSymbol = name.parse().map_err(|_| ParseError {
                    kind: ParseErrorKind::UnknownIdentifier(name.clone()),
                    position: at,
                })?;
                self.expect('(', "`(`")?;
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    args.push(self.expr()?);
                }
                self.expect(')', "`,` or `)`")?;
                if args.len() != symbol.arity() {
                    return Err(ParseError {
                        kind: ParseErrorKind::Arity {
                            name,
                            expected: symbol.arity(),
                            found: args.len(),
                        },
                        position: at,
                    });
                }
                Ok(Node::call(symbol, args))
            }
            _ => Err(self.err("a number, variable, function call or `(`")),
        }
    }
}

fn constant_value(node: &Node) -> Option<f64> {
    match node {
        Node::Leaf(Terminal::Constant(c)) => Some(*c),
        Node::Leaf(Terminal::Variable(_)) => None,
        Node::Call(symbol, children) => {
            let args: Option<Vec<f64>> = children.iter().map(constant_value).collect();
            Some(symbol.apply(&args?))
        }
    }
}

/// `base ^ exponent` for `exponent = n / 2^m`, `1 <= n <= 64`, `m <= 4`.
fn expand_power(base: Node, exponent: f64) -> Option<Node> {
    let (numerator, roots) = (0..=4u32).find_map(|m| {
        let scaled = exponent * f64::from(1u32 << m);
        (scaled.fract() == 0.0 && (1.0..=64.0).contains(&scaled)).then_some((scaled as usize, m))
    })?;
    let mut root = base;
    for _ in 0..roots {
        root = Node::call(FunctionSymbol::Sqrt, vec![root]);
    }
    let mut out = root.clone();
    for _ in 1..numerator {
        out = Node::call(FunctionSymbol::Mul, vec![out, root.clone()]);
    }
    Some(out)
}

/// Parses expression text into a tree.
pub fn parse_text(input: &str) -> Result<SyntaxTree, ParseError> {
    let toks = tokenize(input)?;
    let mut parser = Parser {
        toks,
        pos: 0,
        end: input.len(),
    };
    let root = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return Err(parser.err("an operator or end of input"));
    }
    SyntaxTree::new(root).map_err(|e| ParseError {
        kind: ParseErrorKind::InvalidNumber(e.to_string()),
        position: 0,
    })
}

impl std::str::FromStr for SyntaxTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_text(s)
    }
}
