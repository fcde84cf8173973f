//! Input grammar for coordinates, vectors, weights and integer matrices.
//!
//! ```text
//! coord   := rational | decimal | "sqrt(" n ")" [("+"|"-") int] | "golden"
//!          | "liouville(" base ")" | "cf(" cf-body ")"
//! cf-body := "ones" | "n" | "q" | "random:" seed ":" max
//!          | a0 ";" a1,a2,... [";" p1,p2,...]        (p = repeating block)
//! vector  := coord ("," coord)*
//! weight  := rational ("," rational)*
//! wset    := weight (";" weight)* | "grid(" 1/N ")"
//! ```
//!
//! Every error carries a 1-based line and column.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::real::{CfRule, RealExpr};
use crate::target::{Coord, TargetVector};
use crate::weight::{Weight, WeightSet};

/// A slice of input with its position in the original text.
#[derive(Clone, Copy, Debug)]
struct Span<'a> {
    text: &'a str,
    line: usize,
    col: usize,
}

impl<'a> Span<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Span { text, line, col: 1 }
    }

    fn err(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.line, self.col + offset, msg)
    }

    fn trim(self) -> Self {
        let lead = self.text.len() - self.text.trim_start().len();
        Span {
            text: self.text.trim(),
            line: self.line,
            col: self.col + lead,
        }
    }

    fn sub(&self, start: usize, end: usize) -> Self {
        Span {
            text: &self.text[start..end],
            line: self.line,
            col: self.col + self.text[..start].chars().count(),
        }
    }

    /// Splits at `sep` outside parentheses.
    fn split_top(&self, sep: char) -> Result<Vec<Span<'a>>> {
        let mut out = Vec::new();
        let mut depth = 0i32;
        let mut start = 0;
        for (i, ch) in self.text.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(self.err(self.text[..i].chars().count(), "unbalanced ')'"));
                    }
                }
                c if c == sep && depth == 0 => {
                    out.push(self.sub(start, i));
                    start = i + c.len_utf8();
                }
                _ => {}
            }
        }
        if depth != 0 {
            return Err(self.err(self.text.chars().count(), "missing ')'"));
        }
        out.push(self.sub(start, self.text.len()));
        Ok(out)
    }
}

fn parse_int(s: Span) -> Result<BigInt> {
    let s = s.trim();
    if s.text.is_empty() {
        return Err(s.err(0, "expected an integer"));
    }
    let body = s.text.strip_prefix(['+', '-']).unwrap_or(s.text);
    if let Some(i) = body.find(|c: char| !c.is_ascii_digit()) {
        let off = s.text.len() - body.len() + i;
        return Err(s.err(off, format!("unexpected character {:?} in integer", &s.text[off..off + 1])));
    }
    if body.is_empty() {
        return Err(s.err(0, "expected digits"));
    }
    s.text.parse::<BigInt>().map_err(|e| s.err(0, e.to_string()))
}

fn parse_u64(s: Span) -> Result<u64> {
    let s = s.trim();
    s.text
        .parse::<u64>()
        .map_err(|_| s.err(0, format!("expected a non-negative integer, found {:?}", s.text)))
}

/// `a/b`, an integer, or a decimal literal, all exact.
fn parse_rational_span(s: Span) -> Result<BigRational> {
    let s = s.trim();
    if let Some(i) = s.text.find('/') {
        let num = parse_int(s.sub(0, i))?;
        let den = parse_int(s.sub(i + 1, s.text.len()))?;
        if den.is_zero() {
            return Err(s.err(i + 1, "zero denominator"));
        }
        return Ok(BigRational::new(num, den));
    }
    if let Some(i) = s.text.find('.') {
        let int_part = s.sub(0, i).trim();
        let frac = s.sub(i + 1, s.text.len());
        if frac.text.is_empty() || !frac.text.chars().all(|c| c.is_ascii_digit()) {
            return Err(frac.err(0, "expected decimal digits"));
        }
        let neg = int_part.text.starts_with('-');
        let whole = match int_part.text {
            "" | "-" | "+" => BigInt::zero(),
            _ => parse_int(int_part)?,
        };
        let scale = BigInt::from(10u32).pow(frac.text.len() as u32);
        let f = BigRational::new(frac.text.parse::<BigInt>().expect("digits"), scale);
        let w = BigRational::from_integer(whole.clone());
        let neg = neg || whole < BigInt::zero();
        return Ok(if neg { w - f } else { w + f });
    }
    Ok(BigRational::from_integer(parse_int(s)?))
}

/// Parses a single exact rational (line 1).
pub fn parse_rational(text: &str) -> Result<BigRational> {
    parse_rational_span(Span::new(text, 1))
}

fn call<'a>(s: Span<'a>, name: &str) -> Option<Result<Span<'a>>> {
    let rest = s.text.strip_prefix(name)?;
    let rest_t = rest.trim_start();
    if !rest_t.starts_with('(') {
        return None;
    }
    let open = s.text.len() - rest_t.len();
    let Some(close) = s.text.rfind(')') else {
        return Some(Err(s.err(s.text.chars().count(), "missing ')'")));
    };
    Some(Ok(s.sub(open + 1, close)))
}

fn parse_cf(body: Span) -> Result<CfRule> {
    let b = body.trim();
    match b.text {
        "ones" => return Ok(CfRule::ones()),
        "n" => return Ok(CfRule::Linear),
        "q" => return Ok(CfRule::DenominatorFeedback),
        _ => {}
    }
    if let Some(rest) = b.text.strip_prefix("random:") {
        let off = b.text.len() - rest.len();
        let Some(c) = rest.find(':') else {
            return Err(b.err(off, "expected random:seed:max"));
        };
        let seed = parse_u64(b.sub(off, off + c))?;
        let max = parse_u64(b.sub(off + c + 1, b.text.len()))?;
        if max == 0 {
            return Err(b.err(off + c + 1, "max must be positive"));
        }
        return Ok(CfRule::Seeded { seed, max });
    }
    let parts = b.split_top(';')?;
    if parts.len() > 3 || parts[0].trim().text.is_empty() {
        return Err(b.err(0, "expected a0;a1,a2,...[;p1,p2,...]"));
    }
    let list = |s: Span| -> Result<Vec<u64>> {
        let s = s.trim();
        if s.text.is_empty() {
            return Ok(vec![]);
        }
        s.split_top(',')?
            .into_iter()
            .map(|t| {
                let v = parse_u64(t)?;
                if v == 0 {
                    Err(t.trim().err(0, "partial quotients after a0 must be positive"))
                } else {
                    Ok(v)
                }
            })
            .collect()
    };
    let mut head = vec![parse_u64(parts[0])?];
    if parts.len() > 1 {
        head.extend(list(parts[1])?);
    }
    let period = if parts.len() > 2 { list(parts[2])? } else { vec![] };
    Ok(CfRule::Periodic { head, period })
}

fn parse_coord_span(s: Span) -> Result<Coord> {
    let s = s.trim();
    if s.text.is_empty() {
        return Err(s.err(0, "empty coordinate"));
    }
    if s.text == "golden" {
        return Ok(Coord::golden());
    }
    if let Some(arg) = call(s, "sqrt") {
        let arg = arg?;
        let n = parse_rational_span(arg)?;
        if n < BigRational::zero() {
            return Err(arg.trim().err(0, "square root of a negative number"));
        }
        let close = s.text.rfind(')').expect("checked by call");
        let tail = s.sub(close + 1, s.text.len()).trim();
        let shift = if tail.text.is_empty() {
            BigRational::zero()
        } else {
            let neg = match tail.text.chars().next() {
                Some('-') => true,
                Some('+') => false,
                _ => return Err(tail.err(0, "expected '+' or '-' after sqrt(...)")),
            };
            let v = parse_rational_span(tail.sub(1, tail.text.len()))?;
            if neg {
                -v
            } else {
                v
            }
        };
        return Ok(Coord::real(RealExpr::Sum(vec![
            RealExpr::Sqrt(n),
            RealExpr::Rational(shift),
        ])));
    }
    if let Some(arg) = call(s, "liouville") {
        let arg = arg?;
        let base = parse_u64(arg)?;
        if !(2..=u32::MAX as u64).contains(&base) {
            return Err(arg.trim().err(0, "liouville base must be at least 2"));
        }
        return Ok(Coord::real(RealExpr::Liouville { base: base as u32 }));
    }
    if let Some(arg) = call(s, "cf") {
        return Ok(Coord::real(RealExpr::ContinuedFraction(parse_cf(arg?)?)));
    }
    if s.text.starts_with(|c: char| c.is_ascii_alphabetic()) {
        let word: String = s.text.chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
        return Err(s.err(0, format!("unknown constructor {word:?}")));
    }
    parse_rational_span(s).map(Coord::Rational)
}

/// Parses one coordinate expression (line 1).
pub fn parse_coord(text: &str) -> Result<Coord> {
    parse_coord_span(Span::new(text, 1))
}

/// Parses a comma-separated target vector at the given working precision.
pub fn parse_vector(text: &str, precision: u32) -> Result<TargetVector> {
    let coords = Span::new(text, 1)
        .split_top(',')?
        .into_iter()
        .map(parse_coord_span)
        .collect::<Result<Vec<_>>>()?;
    TargetVector::new(coords)?.with_precision(precision)
}

fn parse_weight_span(s: Span) -> Result<Weight> {
    let entries = s
        .split_top(',')?
        .into_iter()
        .map(parse_rational_span)
        .collect::<Result<Vec<_>>>()?;
    Weight::new(entries).map_err(|e| s.trim().err(0, e.to_string()))
}

/// Parses one comma-separated weight.
pub fn parse_weight(text: &str) -> Result<Weight> {
    parse_weight_span(Span::new(text, 1))
}

fn check_dims(ws: Vec<(Weight, Span)>) -> Result<WeightSet> {
    let Some(d) = ws.first().map(|(w, _)| w.dim()) else {
        return Err(Error::parse(1, 1, "empty weight set"));
    };
    if let Some((w, s)) = ws.iter().find(|(w, _)| w.dim() != d) {
        return Err(s.trim().err(0, format!("weight has dimension {} but the first has {d}", w.dim())));
    }
    WeightSet::new(ws.into_iter().map(|(w, _)| w).collect())
}

/// Parses `w1; w2; ...` or `grid(1/N)`; `dim` is needed for the grid form.
pub fn parse_weight_set(text: &str, dim: usize) -> Result<WeightSet> {
    let s = Span::new(text, 1).trim();
    if let Some(arg) = call(s, "grid") {
        let arg = arg?;
        let mesh = parse_rational_span(arg)?;
        return WeightSet::grid(dim, &mesh).map_err(|e| arg.trim().err(0, e.to_string()));
    }
    let parts = s
        .split_top(';')?
        .into_iter()
        .map(|p| Ok((parse_weight_span(p)?, p)))
        .collect::<Result<Vec<_>>>()?;
    check_dims(parts)
}

/// One weight per line; blank lines and `#` comments are skipped.
pub fn parse_weight_file(text: &str) -> Result<WeightSet> {
    let mut parts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let s = Span::new(body, i + 1);
        parts.push((parse_weight_span(s)?, s));
    }
    check_dims(parts)
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_rational_rows(text: &str) -> Result<Vec<Vec<BigRational>>> {
    Span::new(text, 1)
        .split_top(';')?
        .into_iter()
        .map(|row| {
            row.split_top(',')?
                .into_iter()
                .map(parse_rational_span)
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Integer rows separated by `;`, entries by `,`.
pub fn parse_integer_rows(text: &str) -> Result<Vec<Vec<BigInt>>> {
    Span::new(text, 1)
        .split_top(';')?
        .into_iter()
        .map(|row| row.split_top(',')?.into_iter().map(parse_int).collect::<Result<Vec<_>>>())
        .collect()
}

/// Comma-separated rationals.
pub fn parse_rational_list(text: &str) -> Result<Vec<BigRational>> {
    Span::new(text, 1)
        .split_top(',')?
        .into_iter()
        .map(parse_rational_span)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(e: Error) -> (usize, usize) {
        match e {
            Error::Parse { line, column, .. } => (line, column),
            other => panic!("not a parse error: {other:?}"),
        }
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/6").unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(parse_rational("-0.25").unwrap(), BigRational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational("7").unwrap(), BigRational::from_integer(7.into()));
        assert_eq!(pos(parse_rational("1/0").unwrap_err()), (1, 3));
        assert_eq!(pos(parse_rational("1/x").unwrap_err()), (1, 3));
    }

    #[test]
    fn coordinates() {
        let x = parse_vector("1/3, sqrt(2)-1, golden, cf(0;1,2;3), liouville(10)", 256).unwrap();
        assert_eq!(x.dim(), 5);
        assert!(x.coord(0).as_rational().is_some());
        assert!((x.coord(1).to_f64() - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((x.coord(2).to_f64() - 0.618_033_988_749_895).abs() < 1e-15);
        // [0; 1, 2, 3, 3, ...] = 1 / (1 + 1 / (2 + (sqrt(13) - 3) / 2))
        let tail = (13f64.sqrt() - 3.0) / 2.0;
        let v = 1.0 / (1.0 + 1.0 / (2.0 + tail));
        assert!((x.coord(3).to_f64() - v).abs() < 1e-14);
        assert!((x.coord(4).to_f64() - 0.110_001).abs() < 1e-15);
        // finite expansions are exact
        let r = parse_coord("cf(0;2,2)").unwrap();
        assert_eq!(r.as_rational().unwrap(), &BigRational::new(2.into(), 5.into()));
    }

    #[test]
    fn diagnostics_point_at_the_fault() {
        assert_eq!(pos(parse_vector("1/2, 1/z", 256).unwrap_err()), (1, 8));
        assert_eq!(pos(parse_vector("1/2, foo(3)", 256).unwrap_err()), (1, 6));
        assert_eq!(pos(parse_vector("sqrt(2", 256).unwrap_err()), (1, 7));
        let file = "# weights\n1/2,1/2\n\n1/3, 1/3,1/3\n";
        assert_eq!(pos(parse_weight_file(file).unwrap_err()), (4, 1));
        assert_eq!(pos(parse_weight("1/2,1/3").unwrap_err()), (1, 1));
    }

    #[test]
    fn weight_sets() {
        let ws = parse_weight_set("1/2,1/2; 1/3,2/3", 2).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(parse_weight_set("grid(1/4)", 2).unwrap().len(), 3);
        assert_eq!(parse_weight_set("1", 1).unwrap().len(), 1);
        let f = parse_weight_file("1/4, 3/4\n# skip\n1/2,1/2 # inline comment\n").unwrap();
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn matrices() {
        let m = parse_integer_rows("1,0,0; 0,1,-2").unwrap();
        assert_eq!(m[1][2], BigInt::from(-2));
        assert_eq!(pos(parse_integer_rows("1,0;0,1/2").unwrap_err()), (1, 8));
    }
}
