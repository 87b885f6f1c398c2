//! Plain-text mini-language for basis files: one function per line, built
//! from complex literals (`1.5`, `2i`, `3+4i`), `z`, `+`, `-`, `*`, `^k`,
//! `exp(...)` and parentheses. Blank lines and `#` comments are skipped.

use num_complex::Complex64;

use super::BasisExpr;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Imag(f64),
    Var,
    Exp,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line,
        }
    }

    fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            col: self.pos + 1,
            msg: msg.into(),
        }
    }

    fn tokens(mut self) -> Result<Vec<(Token, usize)>> {
        let mut out = Vec::new();
        while self.pos < self.src.len() {
            let start = self.pos;
            let b = self.src[self.pos];
            match b {
                b' ' | b'\t' => {
                    self.pos += 1;
                }
                b'+' => {
                    out.push((Token::Plus, start));
                    self.pos += 1;
                }
                b'-' => {
                    out.push((Token::Minus, start));
                    self.pos += 1;
                }
                b'*' => {
                    out.push((Token::Star, start));
                    self.pos += 1;
                }
                b'^' => {
                    out.push((Token::Caret, start));
                    self.pos += 1;
                }
                b'(' => {
                    out.push((Token::LParen, start));
                    self.pos += 1;
                }
                b')' => {
                    out.push((Token::RParen, start));
                    self.pos += 1;
                }
                b'z' => {
                    out.push((Token::Var, start));
                    self.pos += 1;
                }
                b'i' => {
                    out.push((Token::Imag(1.0), start));
                    self.pos += 1;
                }
                b'e' => {
                    if self.src[self.pos..].starts_with(b"exp") {
                        out.push((Token::Exp, start));
                        self.pos += 3;
                    } else {
                        return Err(self.error("expected 'exp'"));
                    }
                }
                b'0'..=b'9' | b'.' => {
                    let tok = self.number()?;
                    out.push((tok, start));
                }
                other => {
                    return Err(self.error(format!("unexpected character '{}'", other as char)));
                }
            }
        }
        Ok(out)
    }

    fn number(&mut self) -> Result<Token> {
        let start = self.pos;
        while self.pos < self.src.len() && matches!(self.src[self.pos], b'0'..=b'9' | b'.') {
            self.pos += 1;
        }
        // exponent part, careful not to eat an 'exp' keyword
        if self.pos < self.src.len()
            && (self.src[self.pos] == b'e' || self.src[self.pos] == b'E')
            && !self.src[self.pos..].starts_with(b"exp")
        {
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let value: f64 = text
            .parse()
            .map_err(|_| self.error(format!("invalid number '{text}'")))?;
        if self.pos < self.src.len() && self.src[self.pos] == b'i' {
            self.pos += 1;
            Ok(Token::Imag(value))
        } else {
            Ok(Token::Num(value))
        }
    }
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    cursor: usize,
    line: usize,
    len: usize,
}

impl Parser {
    fn error_at(&self, msg: impl Into<String>) -> Error {
        let col = self
            .tokens
            .get(self.cursor)
            .map(|(_, p)| p + 1)
            .unwrap_or(self.len + 1);
        Error::Parse {
            line: self.line,
            col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(t, _)| t)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.cursor).map(|(t, _)| t.clone());
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<()> {
        match self.bump() {
            Some(t) if t == want => Ok(()),
            _ => {
                self.cursor = self.cursor.saturating_sub(1);
                Err(self.error_at(format!("expected {what}")))
            }
        }
    }

    fn expr(&mut self) -> Result<BasisExpr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.bump();
                    acc = BasisExpr::sum(acc, self.term()?);
                }
                Some(Token::Minus) => {
                    self.bump();
                    let rhs = self.term()?;
                    acc = BasisExpr::sum(acc, negate(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<BasisExpr> {
        let mut acc = self.factor()?;
        while matches!(self.peek(), Some(Token::Star)) {
            self.bump();
            acc = BasisExpr::product(acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<BasisExpr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.bump();
            match self.bump() {
                Some(Token::Num(v)) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                    Ok(BasisExpr::power(base, v as u32))
                }
                _ => {
                    self.cursor = self.cursor.saturating_sub(1);
                    Err(self.error_at("exponent must be a nonnegative integer"))
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<BasisExpr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(BasisExpr::constant(Complex64::new(v, 0.0))),
            Some(Token::Imag(v)) => Ok(BasisExpr::constant(Complex64::new(0.0, v))),
            Some(Token::Var) => Ok(BasisExpr::var()),
            Some(Token::Minus) => Ok(negate(self.atom()?)),
            Some(Token::Exp) => {
                self.expect(Token::LParen, "'(' after exp")?;
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing ')'")?;
                Ok(BasisExpr::exp(inner))
            }
            Some(Token::LParen) => {
                let inner = self.expr()?;
                self.expect(Token::RParen, "closing ')'")?;
                Ok(inner)
            }
            _ => {
                self.cursor = self.cursor.saturating_sub(1);
                Err(self.error_at("expected a literal, 'z', 'exp(', '(' or '-'"))
            }
        }
    }
}

fn negate(e: BasisExpr) -> BasisExpr {
    BasisExpr::product(BasisExpr::constant(Complex64::new(-1.0, 0.0)), e)
}

/// Parse a single expression; `line` is used only in error positions.
pub fn parse_expr(src: &str, line: usize) -> Result<BasisExpr> {
    let tokens = Lexer::new(src, line).tokens()?;
    if tokens.is_empty() {
        return Err(Error::Parse {
            line,
            col: 1,
            msg: "empty expression".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        line,
        len: src.len(),
    };
    let e = parser.expr()?;
    if parser.cursor != parser.tokens.len() {
        return Err(parser.error_at("trailing input after expression"));
    }
    Ok(e)
}

/// Parse a whole basis file: one function per line, `#` comments allowed.
pub fn parse_basis_file(text: &str) -> Result<Vec<BasisExpr>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let stripped = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if stripped.trim().is_empty() {
            continue;
        }
        out.push(parse_expr(stripped, idx + 1)?);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 1,
            col: 1,
            msg: "basis file contains no functions".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(src: &str, z: Complex64) -> Complex64 {
        parse_expr(src, 1).unwrap().eval(z).unwrap()
    }

    #[test]
    fn kac_basis_file() {
        let fs = parse_basis_file("z\n").unwrap();
        assert_eq!(fs, vec![BasisExpr::Var]);
    }

    #[test]
    fn literals_and_arithmetic() {
        let z = Complex64::new(0.0, 0.0);
        assert_eq!(eval("3+4i", z), Complex64::new(3.0, 4.0));
        assert_eq!(eval("2-3i", z), Complex64::new(2.0, -3.0));
        assert_eq!(eval("-i", z), Complex64::new(0.0, -1.0));
        assert_eq!(eval("1.5e-2", z), Complex64::new(0.015, 0.0));
    }

    #[test]
    fn powers_products_exp() {
        let z = Complex64::new(2.0, 0.0);
        assert_eq!(eval("z^3", z), Complex64::new(8.0, 0.0));
        assert_eq!(eval("2*z + 1", z), Complex64::new(5.0, 0.0));
        let v = eval("exp(2*z)", Complex64::new(0.0, 0.0));
        assert_eq!(v, Complex64::new(1.0, 0.0));
        let v = eval("(z+1)^2", z);
        assert_eq!(v, Complex64::new(9.0, 0.0));
    }

    #[test]
    fn error_positions() {
        let err = parse_basis_file("z\nz + $\n").unwrap_err();
        match err {
            Error::Parse { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 5);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_fractional_exponent() {
        assert!(parse_expr("z^1.5", 1).is_err());
        assert!(parse_expr("z^-2", 1).is_err());
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let fs = parse_basis_file("# Kac\n\nz  # identity\n").unwrap();
        assert_eq!(fs.len(), 1);
    }
}
