//! Arithmetic on config values: numbers, named parameters, `+ - * /` and
//! parentheses, e.g. `100/epsilon` or `0.5/lambda`.

use anyhow::{anyhow, bail, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Token>> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < b.len() {
                let d = b[i] as char;
                let exp_sign = (d == '-' || d == '+') && matches!(b[i - 1] as char, 'e' | 'E');
                if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            let text = &s[start..i];
            out.push(Token::Num(text.parse().map_err(|_| anyhow!("invalid number `{text}`"))?));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push(Token::Ident(s[start..i].to_string()));
        } else if "+-*/()".contains(c) {
            out.push(Token::Op(c));
            i += 1;
        } else {
            bail!("unexpected character `{c}` in `{s}`");
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    vars: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        while let Some(Token::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.term()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.factor()?;
        while let Some(Token::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.factor()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64> {
        let t = self.peek().cloned().ok_or_else(|| anyhow!("unexpected end of expression"))?;
        self.pos += 1;
        match t {
            Token::Num(v) => Ok(v),
            Token::Ident(name) => self
                .vars
                .get(&name)
                .copied()
                .ok_or_else(|| anyhow!("unknown name `{name}`")),
            Token::Op('-') => Ok(-self.factor()?),
            Token::Op('(') => {
                let v = self.expr()?;
                match self.peek() {
                    Some(Token::Op(')')) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    _ => bail!("missing `)`"),
                }
            }
            Token::Op(c) => bail!("unexpected `{c}`"),
        }
    }
}

/// Evaluates `s` with the given named values.
pub fn eval(s: &str, vars: &BTreeMap<String, f64>) -> Result<f64> {
    let mut p = Parser {
        tokens: tokenize(s)?,
        pos: 0,
        vars,
    };
    let v = p.expr()?;
    if p.pos != p.tokens.len() {
        bail!("trailing input in `{s}`");
    }
    Ok(v)
}
