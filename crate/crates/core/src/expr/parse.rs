use thiserror::Error;

use super::{ComplexExpr, Var};

/// Parse failure. `pos` is the 0-based character offset into the input.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at column {}: {msg}", pos + 1)]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at column {}", pos + 1)]
    UnknownIdentifier { pos: usize, name: String },
    #[error("index out of range in `{name}` at column {} (allowed 1..={max})", pos + 1)]
    IndexOutOfRange { pos: usize, name: String, max: usize },
    #[error("exponent at column {} must be an integer literal", pos + 1)]
    NonIntegerExponent { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, integral: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((t, start));
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    integral = false;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme
                .parse::<f64>()
                .map_err(|_| ParseError::Syntax { pos: start, msg: format!("malformed number `{lexeme}`") })?;
            out.push((Tok::Num { value, integral }, start));
        } else if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else {
            return Err(ParseError::Syntax { pos: start, msg: format!("unexpected character `{c}`") });
        }
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    n: usize,
    m: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num { .. } => "a number".to_string(),
            Tok::Ident(s) => format!("`{s}`"),
            t => format!("`{}`", tok_text(t)),
        };
        ParseError::Syntax { pos: self.pos(), msg: format!("expected {what}, found {found}") }
    }

    fn expr(&mut self) -> Result<ComplexExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<ComplexExpr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = acc * self.unary()?;
                }
                Tok::Slash => {
                    self.bump();
                    acc = acc / self.unary()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<ComplexExpr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<ComplexExpr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let pos = self.pos();
        match *self.peek() {
            Tok::Num { value, integral: true } if value <= f64::from(i32::MAX) => {
                self.bump();
                let k = value as i32;
                Ok(base.powi(if negative { -k } else { k }))
            }
            Tok::Num { .. } | Tok::LParen | Tok::Ident(_) => Err(ParseError::NonIntegerExponent { pos }),
            _ => Err(self.unexpected("an integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<ComplexExpr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num { value, .. } => {
                self.bump();
                Ok(ComplexExpr::real(value))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                self.ident(&name, pos)
            }
            _ => Err(self.unexpected("a number, variable, function or `(`")),
        }
    }

    fn ident(&mut self, name: &str, pos: usize) -> Result<ComplexExpr, ParseError> {
        match name {
            "i" => return Ok(ComplexExpr::imag_unit()),
            "exp" | "log" | "conj" => {
                self.expect(&Tok::LParen, &format!("`(` after `{name}`"))?;
                let arg = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                return Ok(match name {
                    "exp" => arg.exp(),
                    "log" => arg.ln(),
                    _ => arg.conj(),
                });
            }
            _ => {}
        }
        let unknown = || ParseError::UnknownIdentifier { pos, name: name.to_string() };
        let (head, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let max = match head {
            "z" => self.n,
            "u" => self.m,
            _ => return Err(unknown()),
        };
        let out_of_range = || ParseError::IndexOutOfRange { pos, name: name.to_string(), max };
        let index: usize = digits.parse().map_err(|_| out_of_range())?;
        if index == 0 || index > max {
            return Err(out_of_range());
        }
        Ok(ComplexExpr::var(if head == "z" { Var::z(index - 1) } else { Var::u(index - 1) }))
    }
}

fn tok_text(t: &Tok) -> &'static str {
    match t {
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Caret => "^",
        Tok::LParen => "(",
        Tok::RParen => ")",
        _ => "?",
    }
}

/// Parses `text` as an expression over `z1..zn`, `u1..um`.
///
/// `^` binds tighter than unary minus, so `-z1^2` is `-(z1^2)`; its
/// exponent must be an integer literal, optionally signed.
pub fn parse_expr(text: &str, n: usize, m: usize) -> Result<ComplexExpr, ParseError> {
    let mut p = Parser { toks: tokenize(text)?, at: 0, n, m };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}
