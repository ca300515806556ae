//! Arithmetic expressions over Q_p: rationals, bracketed canonical literals
//! `[p=5 v=0 digits=1,2]`, `+ - * /`, unary minus and parentheses.

use num_bigint::BigInt;
use num_traits::One;
use qgtype_core::padic::{PadicError, PadicNumber, PrecisionContext};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Int(BigInt),
    Literal(String),
    Op(char),
    Open,
    Close,
}

fn tokenize(s: &str) -> Result<Vec<Token>, PadicError> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                out.push(Token::Int(digits.parse().map_err(|_| PadicError::Parse(digits.clone()))?));
            }
            '[' => {
                let end = chars[i..].iter().position(|&c| c == ']').ok_or_else(|| PadicError::Parse("unclosed [".into()))?;
                out.push(Token::Literal(chars[i + 1..i + end].iter().collect()));
                i += end + 1;
            }
            '+' | '-' | '*' | '/' => {
                out.push(Token::Op(c));
                i += 1;
            }
            '(' => {
                out.push(Token::Open);
                i += 1;
            }
            ')' => {
                out.push(Token::Close);
                i += 1;
            }
            other => return Err(PadicError::Parse(format!("unexpected '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    prime: u64,
    ctx: PrecisionContext,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<PadicNumber, PadicError> {
        let mut acc = self.term()?;
        while let Some(Token::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == '+' { acc.add(&rhs)? } else { acc.sub(&rhs)? };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<PadicNumber, PadicError> {
        let mut acc = self.factor()?;
        while let Some(Token::Op(op @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.factor()?;
            acc = if op == '*' { acc.mul(&rhs)? } else { acc.div(&rhs)? };
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<PadicNumber, PadicError> {
        let tok = self.peek().cloned().ok_or_else(|| PadicError::Parse("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Token::Op('-') => Ok(self.factor()?.neg()),
            Token::Int(n) => PadicNumber::from_rational(&n, &BigInt::one(), self.prime, self.ctx),
            Token::Literal(text) => {
                let x: PadicNumber = text.parse()?;
                if x.prime() != self.prime {
                    return Err(PadicError::PrimeMismatch(x.prime(), self.prime));
                }
                Ok(x.with_precision(x.precision().min(self.ctx.digits())))
            }
            Token::Open => {
                let v = self.expr()?;
                match self.peek() {
                    Some(Token::Close) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    _ => Err(PadicError::Parse("missing )".into())),
                }
            }
            other => Err(PadicError::Parse(format!("unexpected {other:?}"))),
        }
    }
}

/// Evaluates `expr` in Q_p. Without an explicit prime the first literal's
/// prime is used.
pub fn evaluate(expr: &str, prime: Option<u64>, ctx: PrecisionContext) -> Result<PadicNumber, PadicError> {
    let tokens = tokenize(expr)?;
    let prime = match prime {
        Some(p) => p,
        None => tokens
            .iter()
            .find_map(|t| match t {
                Token::Literal(text) => Some(text.parse::<PadicNumber>().map(|x| x.prime())),
                _ => None,
            })
            .ok_or_else(|| PadicError::Parse("no prime: pass --prime or a [p=...] literal".into()))??,
    };
    let mut parser = Parser { tokens, pos: 0, prime, ctx };
    let value = parser.expr()?;
    if parser.pos != parser.tokens.len() {
        return Err(PadicError::Parse("trailing input".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let ctx = PrecisionContext::new(8).unwrap();
        let x = evaluate("1/3 + 2", Some(5), ctx).unwrap();
        assert_eq!(x.to_string(), evaluate("7/3", Some(5), ctx).unwrap().to_string());
        let y = evaluate("[p=5 v=1 digits=1] * (2 - 1)", None, ctx).unwrap();
        assert_eq!(y.valuation(), Some(1));
        assert!(evaluate("1/0", Some(5), ctx).is_err());
        assert!(evaluate("1 +", Some(5), ctx).is_err());
        assert!(evaluate("[p=3 v=0 digits=1]", Some(5), ctx).is_err());
    }
}
