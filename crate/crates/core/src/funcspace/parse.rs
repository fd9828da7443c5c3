//! Function-spec grammar shared with the CLI.
//!
//! ```text
//! poly:c_n,...,c_0          coefficients, leading first
//! rat:<poly>/<poly>         numerator / denominator (each optionally "poly:"-prefixed)
//! blaschke:z1,z2,.../w1,... zeros of B1 / zeros of B2 (either side may be empty)
//! ```
//! Complex literals are `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.

use num_complex::Complex64;

use super::poly::Polynomial;
use super::rational::RationalFn;
use crate::{Error, Result};

/// Parsed form of a function spec, before any numerical work.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Poly(Polynomial),
    Rational(Polynomial, Polynomial),
    Blaschke {
        zeros: Vec<Complex64>,
        pole_factors: Vec<Complex64>,
    },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<RationalFn> {
        match self {
            FunctionSpec::Poly(p) => RationalFn::polynomial(p.clone()),
            FunctionSpec::Rational(n, d) => RationalFn::ratio(n.clone(), d.clone()),
            FunctionSpec::Blaschke { zeros, pole_factors } => {
                RationalFn::blaschke_ratio(zeros, pole_factors)
            }
        }
    }
}

pub fn parse_function(spec: &str) -> Result<FunctionSpec> {
    let spec = spec.trim();
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("missing kind prefix in {spec:?}")))?;
    match kind.trim() {
        "poly" => Ok(FunctionSpec::Poly(parse_coeff_list(body)?)),
        "rat" => {
            let (n, d) = body
                .split_once('/')
                .ok_or_else(|| Error::Parse("rat: expects <poly>/<poly>".into()))?;
            let n = parse_coeff_list(n.trim().strip_prefix("poly:").unwrap_or(n))?;
            let d = parse_coeff_list(d.trim().strip_prefix("poly:").unwrap_or(d))?;
            Ok(FunctionSpec::Rational(n, d))
        }
        "blaschke" => {
            let (a, b) = body
                .split_once('/')
                .ok_or_else(|| Error::Parse("blaschke: expects zeros/zeros".into()))?;
            Ok(FunctionSpec::Blaschke {
                zeros: parse_point_list(a)?,
                pole_factors: parse_point_list(b)?,
            })
        }
        other => Err(Error::Parse(format!("unknown function kind {other:?}"))),
    }
}

/// Parse and construct in one go.
pub fn parse_rational(spec: &str) -> Result<RationalFn> {
    parse_function(spec)?.build()
}

fn parse_coeff_list(s: &str) -> Result<Polynomial> {
    let coeffs = parse_point_list(s)?;
    if coeffs.is_empty() {
        return Err(Error::Parse("empty coefficient list".into()));
    }
    Ok(Polynomial::from_descending(&coeffs))
}

fn parse_point_list(s: &str) -> Result<Vec<Complex64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_complex).collect()
}

pub fn parse_complex(s: &str) -> Result<Complex64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let t = t.trim_start_matches('(').trim_end_matches(')');
    if t.is_empty() {
        return Err(Error::Parse("empty complex literal".into()));
    }
    let bad = || Error::Parse(format!("bad complex literal {s:?}"));
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return t.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // Split at the last sign that is not an exponent sign or the leading sign.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let (re_part, im_part) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("", body),
    };
    let re = if re_part.is_empty() {
        0.0
    } else {
        re_part.parse::<f64>().map_err(|_| bad())?
    };
    let im = match im_part {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => x.parse::<f64>().map_err(|_| bad())?,
    };
    Ok(Complex64::new(re, im))
}

pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.re == 0.0 {
        format!("{}i", z.im)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}
