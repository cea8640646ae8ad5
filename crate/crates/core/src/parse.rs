//! Text syntax for expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | '+' unary | power
//! power   := atom ('^' unary)?            right associative
//! atom    := number | name | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sqrt | sin | cos | bump
//! ```
//!
//! `x1, x2, ...` are the integration variables, `pi` and `I` are the usual
//! constants, and any other identifier is a parameter. `-x^2` means `-(x^2)`.

use crate::error::{Error, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
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
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                line: tl,
                column: tc,
                message: format!("malformed number `{text}`"),
            })?;
            Tok::Num(v)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if "+-*/^()".contains(c) {
            i += 1;
            Tok::Op(c)
        } else {
            return Err(Error::Parse {
                line: tl,
                column: tc,
                message: format!("unexpected character `{c}`"),
            });
        };
        col += i - start;
        out.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, t: &Token, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<()> {
        let t = self.next();
        if t.tok == Tok::Op(c) {
            Ok(())
        } else {
            self.error(&t, format!("expected `{c}`, found {}", describe(&t.tok)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek().tok {
                Tok::Op('+') => {
                    self.next();
                    lhs = lhs + self.term()?;
                }
                Tok::Op('-') => {
                    self.next();
                    lhs = lhs - self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().tok {
                Tok::Op('*') => {
                    self.next();
                    lhs = lhs * self.unary()?;
                }
                Tok::Op('/') => {
                    self.next();
                    lhs = lhs / self.unary()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.next();
                // a negated literal is a negative constant unless it is a power base
                if let Tok::Num(v) = self.peek().tok {
                    if self.toks[self.pos + 1].tok != Tok::Op('^') {
                        self.next();
                        return Ok(Expr::Const(-v));
                    }
                }
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.next();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Op('^') {
            self.next();
            let exponent = self.unary()?;
            return Ok(base.pow(exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.next();
        match &t.tok {
            Tok::Num(v) => Ok(Expr::Const(*v)),
            Tok::Op('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek().tok == Tok::Op('(') {
                    let f: fn(Expr) -> Expr = match name.as_str() {
                        "exp" => Expr::exp,
                        "log" => Expr::log,
                        "sqrt" => Expr::sqrt,
                        "sin" => Expr::sin,
                        "cos" => Expr::cos,
                        "bump" => Expr::bump,
                        _ => return self.error(&t, format!("unknown function `{name}`")),
                    };
                    self.next();
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(f(arg));
                }
                name_to_expr(name).or_else(|msg| self.error(&t, msg))
            }
            other => self.error(&t, format!("unexpected {}", describe(other))),
        }
    }
}

fn name_to_expr(name: &str) -> std::result::Result<Expr, String> {
    match name {
        "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
        "I" => return Ok(Expr::Imag),
        "exp" | "log" | "sqrt" | "sin" | "cos" | "bump" => {
            return Err(format!("function `{name}` needs an argument"))
        }
        _ => {}
    }
    if let Some(digits) = name.strip_prefix('x') {
        if !digits.is_empty() && digits.chars().all(|c| c.is_ascii_digit()) {
            return match digits.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Expr::Var(k - 1)),
                _ => Err(format!("variables are numbered from x1, found `{name}`")),
            };
        }
    }
    Ok(Expr::Param(name.to_string()))
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::End => "end of input".to_string(),
    }
}

/// Parses an expression from text.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.error(&t, format!("unexpected {} after expression", describe(&t.tok)));
    }
    Ok(e)
}
