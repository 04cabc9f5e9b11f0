//! Minimal arithmetic expression grammar for user-defined ingredients.
//!
//! Supported: `+ - * /`, unary minus, `exp(e)`, `min(e, e)`, `max(e, e)`,
//! numeric literals, and the variables `x` (the structured variable: size,
//! or age in history expressions) and `S` (resource concentration).

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{ch}` at byte {pos}")]
    BadChar { ch: char, pos: usize },
    #[error("unexpected token `{tok}` at byte {pos}")]
    BadToken { tok: String, pos: usize },
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("unknown identifier `{0}` (expected x, S, exp, min or max)")]
    UnknownIdent(String),
    #[error("`{func}` expects {expected} argument(s)")]
    Arity { func: &'static str, expected: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    VarX,
    VarS,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self, ExprError> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        match p.peek() {
            None => Ok(e),
            Some((tok, pos)) => Err(ExprError::BadToken { tok: tok.describe(), pos }),
        }
    }

    pub fn eval(&self, x: f64, s: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::VarX => x,
            Expr::VarS => s,
            Expr::Neg(e) => -e.eval(x, s),
            Expr::Add(a, b) => a.eval(x, s) + b.eval(x, s),
            Expr::Sub(a, b) => a.eval(x, s) - b.eval(x, s),
            Expr::Mul(a, b) => a.eval(x, s) * b.eval(x, s),
            Expr::Div(a, b) => a.eval(x, s) / b.eval(x, s),
            Expr::Exp(e) => e.eval(x, s).exp(),
            Expr::Min(a, b) => a.eval(x, s).min(b.eval(x, s)),
            Expr::Max(a, b) => a.eval(x, s).max(b.eval(x, s)),
        }
    }

    /// Whether the expression references the resource variable `S`.
    pub fn uses_s(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::VarX => false,
            Expr::VarS => true,
            Expr::Neg(e) | Expr::Exp(e) => e.uses_s(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Min(a, b)
            | Expr::Max(a, b) => a.uses_s() || b.uses_s(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => v.to_string(),
            Token::Ident(s) => s.clone(),
            Token::Plus => "+".into(),
            Token::Minus => "-".into(),
            Token::Star => "*".into(),
            Token::Slash => "/".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
            Token::Comma => ",".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Token, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' => i += 1,
            '+' => { out.push((Token::Plus, i)); i += 1 }
            '-' => { out.push((Token::Minus, i)); i += 1 }
            '*' => { out.push((Token::Star, i)); i += 1 }
            '/' => { out.push((Token::Slash, i)); i += 1 }
            '(' => { out.push((Token::LParen, i)); i += 1 }
            ')' => { out.push((Token::RParen, i)); i += 1 }
            ',' => { out.push((Token::Comma, i)); i += 1 }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, '0'..='9' | '.' | 'e' | 'E')
                {
                    // allow exponent signs like 1e-3
                    if matches!(bytes[i] as char, 'e' | 'E')
                        && i + 1 < bytes.len()
                        && matches!(bytes[i + 1] as char, '+' | '-')
                    {
                        i += 1;
                    }
                    i += 1;
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| ExprError::BadToken { tok: text.into(), pos: start })?;
                out.push((Token::Num(v), start));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && matches!(bytes[i] as char, 'a'..='z' | 'A'..='Z' | '0'..='9' | '_')
                {
                    i += 1;
                }
                out.push((Token::Ident(src[start..i].into()), start));
            }
            _ => return Err(ExprError::BadChar { ch: c, pos: i }),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<(Token, usize)> {
        self.tokens.get(self.pos).cloned()
    }

    fn next(&mut self) -> Result<(Token, usize), ExprError> {
        let t = self.tokens.get(self.pos).cloned().ok_or(ExprError::UnexpectedEnd)?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, want: Token) -> Result<(), ExprError> {
        let (tok, pos) = self.next()?;
        if tok == want {
            Ok(())
        } else {
            Err(ExprError::BadToken { tok: tok.describe(), pos })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Token::Plus => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        while let Some((tok, _)) = self.peek() {
            match tok {
                Token::Star => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Token::Slash => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if let Some((Token::Minus, _)) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let (tok, pos) = self.next()?;
        match tok {
            Token::Num(v) => Ok(Expr::Const(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::VarX),
                "S" => Ok(Expr::VarS),
                "exp" => {
                    self.expect(Token::LParen)?;
                    let a = self.expr()?;
                    self.expect(Token::RParen)
                        .map_err(|_| ExprError::Arity { func: "exp", expected: 1 })?;
                    Ok(Expr::Exp(Box::new(a)))
                }
                "min" | "max" => {
                    self.expect(Token::LParen)?;
                    let a = self.expr()?;
                    self.expect(Token::Comma)
                        .map_err(|_| ExprError::Arity {
                            func: if name == "min" { "min" } else { "max" },
                            expected: 2,
                        })?;
                    let b = self.expr()?;
                    self.expect(Token::RParen)?;
                    Ok(if name == "min" {
                        Expr::Min(Box::new(a), Box::new(b))
                    } else {
                        Expr::Max(Box::new(a), Box::new(b))
                    })
                }
                _ => Err(ExprError::UnknownIdent(name)),
            },
            other => Err(ExprError::BadToken { tok: other.describe(), pos }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64, s: f64) -> f64 {
        Expr::parse(src).unwrap().eval(x, s)
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(ev("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(ev("2 * x - S / 2", 3.0, 4.0), 4.0);
        assert_eq!(ev("-x * -S", 2.0, 3.0), 6.0);
        assert_eq!(ev("1e-3 * x", 2.0, 0.0), 2e-3);
    }

    #[test]
    fn functions() {
        assert!((ev("exp(-x)", 1.0, 0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(ev("min(x, S)", 2.0, 1.0), 1.0);
        assert_eq!(ev("max(0, 2 - S)", 0.0, 3.0), 0.0);
    }

    #[test]
    fn uses_s_detection() {
        assert!(Expr::parse("2*S").unwrap().uses_s());
        assert!(!Expr::parse("exp(-x)").unwrap().uses_s());
    }

    #[test]
    fn errors_carry_positions() {
        assert!(matches!(Expr::parse("1 + $"), Err(ExprError::BadChar { pos: 4, .. })));
        assert!(matches!(Expr::parse("foo(1)"), Err(ExprError::UnknownIdent(_))));
        assert!(Expr::parse("min(1)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("1 2").is_err());
    }
}
