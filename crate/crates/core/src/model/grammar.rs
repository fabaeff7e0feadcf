//! Distribution specification strings: `uniform:a,b`, `cantor:depth`,
//! `bernoulli:p`, each optionally followed by `@lambda=x`.

use std::fmt;

use super::{DistKind, SiteDistribution};

/// Parse failure with the 0-based byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(position: usize, message: impl Into<String>) -> Self {
        Self { position, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.position + 1, self.message)
    }
}

impl std::error::Error for ParseError {}

const LAMBDA_PREFIX: &str = "lambda=";

pub fn parse_distribution(input: &str) -> Result<SiteDistribution, ParseError> {
    let colon = input
        .find(':')
        .ok_or_else(|| ParseError::new(input.len(), "expected ':' after distribution family"))?;
    let family = &input[..colon];
    let body_start = colon + 1;
    let body = &input[body_start..];
    let (params, suffix) = match body.find('@') {
        Some(at) => (&body[..at], Some((body_start + at + 1, &body[at + 1..]))),
        None => (body, None),
    };

    let kind = match family {
        "uniform" => {
            let Some(comma) = params.find(',') else {
                parse_real(params, body_start)?;
                return Err(ParseError::new(body_start + params.len(), "expected ',' between interval bounds"));
            };
            let a = parse_real(&params[..comma], body_start)?;
            let b_start = body_start + comma + 1;
            let b = parse_real(&params[comma + 1..], b_start)?;
            if a > b {
                return Err(ParseError::new(b_start, format!("interval bounds out of order: {a} > {b}")));
            }
            DistKind::Uniform { a, b }
        }
        "cantor" => {
            let depth = parse_depth(params, body_start)?;
            DistKind::Cantor { depth }
        }
        "bernoulli" => {
            let p = parse_real(params, body_start)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(ParseError::new(body_start, format!("probability out of range: {p}")));
            }
            DistKind::Bernoulli { p }
        }
        _ => {
            return Err(ParseError::new(
                0,
                format!("unknown distribution family '{family}' (expected uniform, cantor or bernoulli)"),
            ))
        }
    };

    let coupling = match suffix {
        None => 1.0,
        Some((start, text)) => {
            let value = text
                .strip_prefix(LAMBDA_PREFIX)
                .ok_or_else(|| ParseError::new(start, "expected 'lambda=' after '@'"))?;
            parse_real(value, start + LAMBDA_PREFIX.len())?
        }
    };

    SiteDistribution::new(kind, coupling).map_err(|e| ParseError::new(body_start, e.to_string()))
}

fn parse_real(text: &str, start: usize) -> Result<f64, ParseError> {
    if text.is_empty() {
        return Err(ParseError::new(start, "expected a number"));
    }
    if let Some(off) = text.find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'))) {
        return Err(ParseError::new(start + off, format!("unexpected character in number '{text}'")));
    }
    let value: f64 = text
        .parse()
        .map_err(|_| ParseError::new(start, format!("malformed number '{text}'")))?;
    if !value.is_finite() {
        return Err(ParseError::new(start, format!("number out of range '{text}'")));
    }
    Ok(value)
}

fn parse_depth(text: &str, start: usize) -> Result<u32, ParseError> {
    if text.is_empty() {
        return Err(ParseError::new(start, "expected a positive integer depth"));
    }
    if let Some(off) = text.find(|c: char| !c.is_ascii_digit()) {
        return Err(ParseError::new(start + off, "depth must be a positive integer"));
    }
    let depth: u32 = text
        .parse()
        .map_err(|_| ParseError::new(start, format!("depth out of range '{text}'")))?;
    if depth == 0 {
        return Err(ParseError::new(start, "depth must be a positive integer"));
    }
    Ok(depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_each_family() {
        let u = parse_distribution("uniform:0,1").unwrap();
        assert_eq!(u.kind(), DistKind::Uniform { a: 0.0, b: 1.0 });
        assert_eq!(u.coupling(), 1.0);
        let c = parse_distribution("cantor:40").unwrap();
        assert_eq!(c.kind(), DistKind::Cantor { depth: 40 });
        let b = parse_distribution("bernoulli:0.5@lambda=2.5").unwrap();
        assert_eq!(b.kind(), DistKind::Bernoulli { p: 0.5 });
        assert_eq!(b.coupling(), 2.5);
        let neg = parse_distribution("uniform:-1,1@lambda=-0.5").unwrap();
        assert_eq!(neg.kind(), DistKind::Uniform { a: -1.0, b: 1.0 });
        assert_eq!(neg.coupling(), -0.5);
    }

    #[test]
    fn numbers_are_bit_exact() {
        let d = parse_distribution("uniform:0.1,0.30000000000000004").unwrap();
        match d.kind() {
            DistKind::Uniform { a, b } => {
                assert_eq!(a.to_bits(), 0.1f64.to_bits());
                assert_eq!(b.to_bits(), (0.1f64 + 0.2).to_bits());
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_distribution("bernoulli:1.5").unwrap_err();
        assert_eq!(e.position, 10);
        assert!(e.message.contains("probability out of range"));

        let e = parse_distribution("gauss:0,1").unwrap_err();
        assert_eq!(e.position, 0);

        let e = parse_distribution("uniform:0;1").unwrap_err();
        assert_eq!(e.position, 9);

        let e = parse_distribution("uniform:0,x").unwrap_err();
        assert_eq!(e.position, 10);

        let e = parse_distribution("cantor:0").unwrap_err();
        assert_eq!(e.position, 7);

        let e = parse_distribution("cantor:4@mu=1").unwrap_err();
        assert_eq!(e.position, 9);

        let e = parse_distribution("uniform").unwrap_err();
        assert_eq!(e.position, 7);

        assert!(parse_distribution("uniform:1,0").is_err());
        assert!(parse_distribution("uniform:0,inf").is_err());
        assert!(parse_distribution("uniform:0,1e999").is_err());
        assert!(parse_distribution("bernoulli:0.5@lambda=").is_err());
        assert!(parse_distribution("uniform: 0,1").is_err());
        assert_eq!(parse_distribution("bernoulli:0.5 ").unwrap_err().position, 13);
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(parse_distribution("uniform:0,1").unwrap().to_string(), "uniform:0,1");
        assert_eq!(parse_distribution("bernoulli:0.25@lambda=3").unwrap().to_string(), "bernoulli:0.25@lambda=3");
        assert_eq!(parse_distribution("cantor:40@lambda=1").unwrap().to_string(), "cantor:40");
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, -1e-6..1e-6f64, any::<f64>().prop_filter("finite", |x| x.is_finite())]
    }

    proptest! {
        #[test]
        fn display_round_trips(a in finite(), w in 0.0..1e3f64, p in 0.0..=1.0f64, depth in 1u32..200, lambda in finite(), which in 0u8..3) {
            let kind = match which {
                0 => DistKind::Uniform { a, b: a + w },
                1 => DistKind::Cantor { depth },
                _ => DistKind::Bernoulli { p },
            };
            if let Ok(d) = SiteDistribution::new(kind, lambda) {
                let text = d.to_string();
                let back = parse_distribution(&text).unwrap();
                prop_assert_eq!(back, d);
            }
        }

        #[test]
        fn never_panics(s in ".{0,40}") {
            let _ = parse_distribution(&s);
        }
    }
}
