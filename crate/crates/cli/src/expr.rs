//! Preconditioner expressions such as `mult(jacobi(3, gamma=auto), tb_coarse(k=32))`.

use std::fmt;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("preconditioner expression, column {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Str(String),
    /// Bare identifiers parse as calls without arguments.
    Call(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub key: Option<String>,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub name: String,
    pub args: Vec<Arg>,
}

impl Value {
    /// Identifier or string payload.
    pub fn as_word(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Call(e) if e.args.is_empty() => Some(&e.name),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Call(e) => write!(f, "{e}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if let Some(k) = &a.key {
                write!(f, "{k}=")?;
            }
            write!(f, "{}", a.value)?;
        }
        f.write_str(")")
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { chars: src.chars().collect(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { pos: self.pos + 1, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.chars.get(self.pos).is_some_and(|c| c.is_alphanumeric() || *c == '_') {
            self.pos += 1;
        }
        if start == self.pos || self.chars[start].is_ascii_digit() {
            self.pos = start;
            return Err(self.err("expected an identifier"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat('(')
            && !self.eat(')') {
                loop {
                    args.push(self.arg()?);
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(self.err("expected `,` or `)`"));
                    }
                }
            }
        Ok(Expr { name, args })
    }

    fn arg(&mut self) -> Result<Arg, ParseError> {
        let save = self.pos;
        if let Ok(key) = self.ident() {
            if self.eat('=') {
                return Ok(Arg { key: Some(key), value: self.value()? });
            }
        }
        self.pos = save;
        Ok(Arg { key: None, value: self.value()? })
    }

    fn value(&mut self) -> Result<Value, ParseError> {
        match self.peek() {
            Some('"') => {
                self.pos += 1;
                let start = self.pos;
                while self.chars.get(self.pos).is_some_and(|&c| c != '"') {
                    self.pos += 1;
                }
                if self.pos == self.chars.len() {
                    return Err(self.err("unterminated string"));
                }
                let s = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                Ok(Value::Str(s))
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => {
                let start = self.pos;
                while self
                    .chars
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '+' | '/'))
                {
                    self.pos += 1;
                }
                let text: String = self.chars[start..self.pos].iter().collect();
                number(&text).map(Value::Num).ok_or_else(|| ParseError {
                    pos: start + 1,
                    msg: format!("bad number `{text}`"),
                })
            }
            Some(_) => Ok(Value::Call(self.expr()?)),
            None => Err(self.err("unexpected end of input")),
        }
    }
}

/// Plain float, or a fraction like `2/3`.
fn number(text: &str) -> Option<f64> {
    match text.split_once('/') {
        Some((a, b)) => Some(a.parse::<f64>().ok()? / b.parse::<f64>().ok()?),
        None => text.parse().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_with_keywords_and_unicode() {
        let e = parse("mult(jacobi(ν=3, γ=auto), tb_coarse(k=32, basis=\"m.onpk\"))").unwrap();
        assert_eq!(e.name, "mult");
        let j = match &e.args[0].value {
            Value::Call(j) => j,
            v => panic!("{v:?}"),
        };
        assert_eq!(j.args[0], Arg { key: Some("ν".into()), value: Value::Num(3.0) });
        assert_eq!(j.args[1].value.as_word(), Some("auto"));
        assert_eq!(e.to_string(), "mult(jacobi(ν=3,γ=auto),tb_coarse(k=32,basis=\"m.onpk\"))");
    }

    #[test]
    fn fractions_and_exponents() {
        let e = parse("jacobi(1, 2/3, tol=1e-8)").unwrap();
        assert_eq!(e.args[1].value, Value::Num(2.0 / 3.0));
        assert_eq!(e.args[2].value, Value::Num(1e-8));
        assert_eq!(parse("identity").unwrap().args, vec![]);
    }

    #[test]
    fn errors_point_at_the_problem() {
        assert_eq!(parse("mult(a b)").unwrap_err().pos, 8);
        assert!(parse("jacobi(1,").is_err());
        assert!(parse("x(\"open)").is_err());
        assert!(parse("a) ").is_err());
        assert!(parse("f(3x)").is_err());
    }
}
