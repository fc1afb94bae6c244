//! Multivariate polynomials in the state, used for custom control-affine
//! dynamics. Text form: `1.5 - 2*x0 + x0^2*x1`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    /// Exponent per state component; missing trailing entries are zero.
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: vec![Monomial {
                coef: c,
                powers: vec![],
            }],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.powers
                    .iter()
                    .enumerate()
                    .fold(t.coef, |acc, (i, &p)| acc * x[i].powi(p as i32))
            })
            .sum()
    }

    /// Highest state index referenced, plus one.
    pub fn arity(&self) -> usize {
        self.terms
            .iter()
            .map(|t| {
                t.powers
                    .iter()
                    .rposition(|&p| p > 0)
                    .map_or(0, |i| i + 1)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("polynomial {text:?}: {msg}"));
        let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(bad("empty expression"));
        }
        // Split into signed terms, ignoring signs inside exponents of numbers
        // such as 1e-3.
        let bytes = s.as_bytes();
        let mut terms = Vec::new();
        let mut start = 0;
        for i in 1..bytes.len() {
            let c = bytes[i];
            if (c == b'+' || c == b'-') && !matches!(bytes[i - 1], b'e' | b'E' | b'*' | b'^') {
                terms.push(&s[start..i]);
                start = i;
            }
        }
        terms.push(&s[start..]);

        let mut out = Vec::new();
        for raw in terms {
            let (sign, body) = match raw.as_bytes().first() {
                Some(b'-') => (-1.0, &raw[1..]),
                Some(b'+') => (1.0, &raw[1..]),
                _ => (1.0, raw),
            };
            if body.is_empty() {
                return Err(bad("dangling sign"));
            }
            let mut coef = sign;
            let mut powers: Vec<u32> = Vec::new();
            for factor in body.split('*') {
                if let Some(var) = factor.strip_prefix('x') {
                    let (idx, pow) = match var.split_once('^') {
                        Some((i, p)) => (i, p.parse::<u32>().map_err(|_| bad("bad exponent"))?),
                        None => (var, 1),
                    };
                    let idx: usize = idx.parse().map_err(|_| bad("bad variable index"))?;
                    if powers.len() <= idx {
                        powers.resize(idx + 1, 0);
                    }
                    powers[idx] += pow;
                } else {
                    let c: f64 = factor.parse().map_err(|_| bad("bad coefficient"))?;
                    if !c.is_finite() {
                        return Err(bad("non-finite coefficient"));
                    }
                    coef *= c;
                }
            }
            while powers.last() == Some(&0) {
                powers.pop();
            }
            out.push(Monomial { coef, powers });
        }
        Ok(Self { terms: out })
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let mut parts = vec![format!("{:?}", t.coef.abs())];
            for (i, &p) in t.powers.iter().enumerate() {
                match p {
                    0 => {}
                    1 => parts.push(format!("x{i}")),
                    _ => parts.push(format!("x{i}^{p}")),
                }
            }
            let sign = if t.coef.is_sign_negative() { "-" } else { "+" };
            if k == 0 {
                if sign == "-" {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let p = Polynomial::parse("1.5 - 2*x0 + x0^2*x1").unwrap();
        assert_eq!(p.eval(&[2.0, 3.0]), 1.5 - 4.0 + 12.0);
        assert_eq!(p.arity(), 2);
        let q = Polynomial::parse("-x1").unwrap();
        assert_eq!(q.eval(&[5.0, 2.0]), -2.0);
        let r = Polynomial::parse("1e-3*x0").unwrap();
        assert_eq!(r.eval(&[1000.0]), 1.0);
    }

    #[test]
    fn display_round_trips() {
        for text in ["1.5 - 2*x0 + x0^2*x1", "-x1", "0", "-0.25*x0^3 + 7"] {
            let p = Polynomial::parse(text).unwrap();
            let back = Polynomial::parse(&p.to_string()).unwrap();
            for x in [[0.3, -1.2], [2.0, 0.5]] {
                assert_eq!(p.eval(&x), back.eval(&x));
            }
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(Polynomial::parse("").is_err());
        assert!(Polynomial::parse("2*y").is_err());
        assert!(Polynomial::parse("x0^a").is_err());
        assert!(Polynomial::parse("3 +").is_err());
    }
}
