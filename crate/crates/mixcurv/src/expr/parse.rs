//! Infix parser for the scalar expression grammar.
//!
//! Grammar (loosest binding first):
//!   expr   := term (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := '-' factor | power
//!   power  := atom ('^' exponent)?
//!   atom   := number | coordinate | function '(' expr ')' | '(' expr ')'
//!
//! Coordinates are `x0`, `x1`, ...; functions are exp, log, sin, cos,
//! sinh, cosh, sqrt. Exponents must be rational: an integer literal, a
//! plain decimal such as `1.5`, or a parenthesized ratio like `(-3/2)`.
//! `^` binds tighter than unary minus, so `-x0^2` is `-(x0^2)`.

use super::{Rational, ScalarExpr};
use crate::error::{GeomError, Result};

pub fn parse_expr(input: &str) -> Result<ScalarExpr> {
    let tokens = tokenize(input)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(t) => Err(p.error_at(t.line, t.col, "unexpected trailing input")),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(input: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = input.chars().peekable();

    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                chars.next();
                bump(c, &mut line, &mut col);
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Token {
                    tok,
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_digit() || c == '.' => {
                let mut text = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() || d == '.' {
                        text.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else if (d == 'e' || d == 'E') && text.chars().any(|ch| ch.is_ascii_digit()) {
                        // Scientific notation: e / E followed by an
                        // optionally signed integer.
                        let mut clone = chars.clone();
                        clone.next();
                        match clone.peek() {
                            Some(&s) if s.is_ascii_digit() || s == '+' || s == '-' => {
                                text.push(d);
                                chars.next();
                                bump(d, &mut line, &mut col);
                                if s == '+' || s == '-' {
                                    text.push(s);
                                    chars.next();
                                    bump(s, &mut line, &mut col);
                                }
                            }
                            _ => break,
                        }
                    } else {
                        break;
                    }
                }
                let value: f64 = text.parse().map_err(|_| GeomError::ParseError {
                    line: tline,
                    col: tcol,
                    msg: format!("malformed number '{text}'"),
                })?;
                out.push(Token {
                    tok: Tok::Num(value, text),
                    line: tline,
                    col: tcol,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        bump(d, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(name),
                    line: tline,
                    col: tcol,
                });
            }
            other => {
                return Err(GeomError::ParseError {
                    line: tline,
                    col: tcol,
                    msg: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, line: usize, col: usize, msg: &str) -> GeomError {
        GeomError::ParseError {
            line,
            col,
            msg: msg.to_string(),
        }
    }

    fn error_here(&self, msg: &str) -> GeomError {
        match self.peek() {
            Some(t) => self.error_at(t.line, t.col, msg),
            None => {
                let (line, col) = self
                    .tokens
                    .last()
                    .map(|t| (t.line, t.col + 1))
                    .unwrap_or((1, 1));
                self.error_at(line, col, msg)
            }
        }
    }

    fn eat(&mut self, want: &Tok, what: &str) -> Result<()> {
        match self.peek() {
            Some(t) if t.tok == *want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here(&format!("expected {what}"))),
        }
    }

    fn expr(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.term()?;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Plus => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<ScalarExpr> {
        let mut acc = self.factor()?;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Star => {
                    self.pos += 1;
                    acc = acc.mul(&self.factor()?);
                }
                Tok::Slash => {
                    self.pos += 1;
                    acc = acc.div(&self.factor()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<ScalarExpr> {
        if let Some(t) = self.peek() {
            if t.tok == Tok::Minus {
                self.pos += 1;
                return Ok(self.factor()?.neg());
            }
        }
        self.power()
    }

    fn power(&mut self) -> Result<ScalarExpr> {
        let base = self.atom()?;
        if let Some(t) = self.peek() {
            if t.tok == Tok::Caret {
                self.pos += 1;
                let e = self.exponent()?;
                return Ok(base.pow(e));
            }
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<Rational> {
        let mut sign = 1i64;
        while let Some(t) = self.peek() {
            match t.tok {
                Tok::Minus => {
                    sign = -sign;
                    self.pos += 1;
                }
                Tok::Plus => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        match self.next() {
            Some(Token {
                tok: Tok::Num(_, text),
                line,
                col,
            }) => {
                let r = decimal_to_rational(&text)
                    .ok_or_else(|| self.error_at(line, col, "exponent must be rational"))?;
                Ok(Rational::new(sign * r.num, r.den))
            }
            Some(Token {
                tok: Tok::LParen, ..
            }) => {
                // Parenthesized ratio of integers, e.g. (-3/2).
                let mut inner_sign = sign;
                while let Some(t) = self.peek() {
                    match t.tok {
                        Tok::Minus => {
                            inner_sign = -inner_sign;
                            self.pos += 1;
                        }
                        Tok::Plus => {
                            self.pos += 1;
                        }
                        _ => break,
                    }
                }
                let num = self.integer_literal("exponent numerator")?;
                let den = match self.peek().map(|t| t.tok.clone()) {
                    Some(Tok::Slash) => {
                        self.pos += 1;
                        self.integer_literal("exponent denominator")?
                    }
                    _ => 1,
                };
                self.eat(&Tok::RParen, "')' after exponent")?;
                if den == 0 {
                    return Err(self.error_here("exponent denominator is zero"));
                }
                Ok(Rational::new(inner_sign * num, den))
            }
            _ => Err(self.error_here("expected exponent")),
        }
    }

    fn integer_literal(&mut self, what: &str) -> Result<i64> {
        match self.next() {
            Some(Token {
                tok: Tok::Num(_, text),
                line,
                col,
            }) => text
                .parse::<i64>()
                .map_err(|_| self.error_at(line, col, &format!("{what} must be an integer"))),
            _ => Err(self.error_here(&format!("expected {what}"))),
        }
    }

    fn atom(&mut self) -> Result<ScalarExpr> {
        match self.next() {
            Some(Token {
                tok: Tok::Num(v, _),
                ..
            }) => Ok(ScalarExpr::constant(v)),
            Some(Token {
                tok: Tok::LParen, ..
            }) => {
                let e = self.expr()?;
                self.eat(&Tok::RParen, "')'")?;
                Ok(e)
            }
            Some(Token {
                tok: Tok::Ident(name),
                line,
                col,
            }) => self.ident(&name, line, col),
            _ => Err(self.error_here("expected a number, coordinate, function or '('")),
        }
    }

    fn ident(&mut self, name: &str, line: usize, col: usize) -> Result<ScalarExpr> {
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
                let axis: usize = rest.parse().map_err(|_| {
                    self.error_at(
                        line,
                        col,
                        &format!("coordinate index too large in '{name}'"),
                    )
                })?;
                return Ok(ScalarExpr::coord(axis));
            }
        }
        let func: fn(&ScalarExpr) -> ScalarExpr = match name {
            "exp" => ScalarExpr::exp,
            "log" => ScalarExpr::log,
            "sin" => ScalarExpr::sin,
            "cos" => ScalarExpr::cos,
            "sinh" => ScalarExpr::sinh,
            "cosh" => ScalarExpr::cosh,
            "sqrt" => ScalarExpr::sqrt,
            _ => {
                return Err(self.error_at(
                    line,
                    col,
                    &format!("unknown identifier '{name}' (coordinates are x0, x1, ...)"),
                ));
            }
        };
        self.eat(&Tok::LParen, &format!("'(' after {name}"))?;
        let arg = self.expr()?;
        self.eat(&Tok::RParen, "')'")?;
        Ok(func(&arg))
    }
}

/// Convert a decimal literal to an exact rational (e.g. "1.5" -> 3/2).
fn decimal_to_rational(text: &str) -> Option<Rational> {
    if let Ok(n) = text.parse::<i64>() {
        return Some(Rational::integer(n));
    }
    let (whole, frac) = text.split_once('.')?;
    if frac.contains(['e', 'E']) || whole.contains(['e', 'E']) {
        return None;
    }
    let digits: String = format!("{whole}{frac}");
    let num: i64 = digits.parse().ok()?;
    let den = 10i64.checked_pow(frac.len() as u32)?;
    Some(Rational::new(num, den))
}
