//! Report documents: the JSON envelope, columnar CSV, and re-validation of
//! embedded witnesses.

use std::collections::BTreeMap;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use serde_json::Value;

use super::config::RunConfig;
use super::grammar::{parse_rational, parse_vector, parse_weight, parse_weight_set};
use crate::approx::CertificateKind;
use crate::dynamics::SubmoduleBasis;
use crate::error::{Error, Result};
use crate::norm::{quasi_norm, QuasiNormValue};
use crate::structure::exponent_relation_formula;
use crate::target::TargetVector;
use crate::weight::{Weight, WeightSet};

pub const FORMAT: &str = "wdioph-report";
pub const VERSION: u32 = 1;

/// Fixed-order columns for the CSV form of a report.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    /// Two-column `key,value` table.
    pub fn key_value(pairs: Vec<(&str, String)>) -> Self {
        let mut t = Table::new(&["key", "value"]);
        for (k, v) in pairs {
            t.rows.push(vec![k.to_string(), v]);
        }
        t
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

pub struct Report {
    pub kind: &'static str,
    pub inputs: BTreeMap<&'static str, String>,
    pub payload: Value,
    pub table: Table,
}

#[derive(Serialize)]
struct Metadata {
    tool: &'static str,
    tool_version: &'static str,
    generated_unix_ms: u128,
    elapsed_ms: u128,
}

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'static str,
    version: u32,
    kind: &'static str,
    config: &'a RunConfig,
    inputs: &'a BTreeMap<&'static str, String>,
    payload: &'a Value,
    metadata: Metadata,
}

fn metadata(elapsed: Duration) -> Metadata {
    Metadata {
        tool: "wdioph",
        tool_version: env!("CARGO_PKG_VERSION"),
        generated_unix_ms: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0),
        elapsed_ms: elapsed.as_millis(),
    }
}

pub fn to_json(r: &Report, cfg: &RunConfig, elapsed: Duration) -> Result<String> {
    let env = Envelope {
        format: FORMAT,
        version: VERSION,
        kind: r.kind,
        config: cfg,
        inputs: &r.inputs,
        payload: &r.payload,
        metadata: metadata(elapsed),
    };
    serde_json::to_string_pretty(&env)
        .map(|s| s + "\n")
        .map_err(|e| Error::Io(e.to_string()))
}

/// Comment lines carry the kind, config and inputs; then header and rows.
pub fn to_csv(r: &Report, cfg: &RunConfig) -> Result<String> {
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut out = format!("# {FORMAT} v{VERSION} kind={}\n", r.kind);
    out += &format!(
        "# config={}\n",
        serde_json::to_string(cfg).map_err(|e| Error::Io(e.to_string()))?
    );
    for (k, v) in &r.inputs {
        out += &format!("# input {k}={v}\n");
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&r.table.columns).map_err(io)?;
    for row in &r.table.rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    out += &String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?;
    Ok(out)
}

/// Outcome of re-validating a report document.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Validation {
    pub kind: String,
    pub checked: usize,
    pub problems: Vec<String>,
    pub valid: bool,
}

struct Ctx<'a> {
    doc: &'a Value,
    precision: u32,
    out: Validation,
}

fn field<'a>(v: &'a Value, path: &str) -> Result<&'a Value> {
    path.split('.')
        .try_fold(v, |cur, k| cur.get(k))
        .ok_or_else(|| Error::Io(format!("report is missing {path}")))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    field(v, path)?
        .as_str()
        .ok_or_else(|| Error::Io(format!("{path} is not a string")))
}

fn as_u64(v: &Value, path: &str) -> Result<u64> {
    field(v, path)?
        .as_u64()
        .ok_or_else(|| Error::Io(format!("{path} is not an unsigned integer")))
}

fn as_i128(v: &Value, path: &str) -> Result<i128> {
    let f = field(v, path)?;
    f.as_i64()
        .map(i128::from)
        .or_else(|| f.as_u64().map(i128::from))
        .ok_or_else(|| Error::Io(format!("{path} is not an integer")))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    match field(v, path)? {
        Value::Null => Ok(f64::INFINITY),
        f => f.as_f64().ok_or_else(|| Error::Io(format!("{path} is not a number"))),
    }
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    field(v, path)?
        .as_array()
        .ok_or_else(|| Error::Io(format!("{path} is not an array")))
}

fn big(v: &Value) -> Result<BigInt> {
    v.as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Io(format!("{v} is not an integer string")))
}

/// `||q x - p||_w` recomputed from an embedded approximant.
fn residual_err(x: &TargetVector, w: &Weight, a: &Value) -> Result<(u64, QuasiNormValue)> {
    let q = as_u64(a, "q")?;
    let p = as_array(a, "p")?.iter().map(big).collect::<Result<Vec<_>>>()?;
    if p.len() != x.dim() {
        return Err(Error::Io("approximant has the wrong dimension".into()));
    }
    let qr = BigRational::from_integer(BigInt::from(q));
    let coords = x
        .coords()
        .iter()
        .zip(p)
        .map(|(c, p)| c.affine(&qr, &-BigRational::from_integer(p)))
        .collect();
    let v = TargetVector::new(coords)?.with_precision(x.precision())?;
    Ok((q, quasi_norm(&v, w)?))
}

impl Ctx<'_> {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.out.checked += 1;
        if !ok {
            self.out.problems.push(what());
        }
    }

    fn input(&self, key: &str) -> Result<&str> {
        as_str(self.doc, &format!("inputs.{key}"))
    }

    fn x(&self) -> Result<TargetVector> {
        parse_vector(self.input("x")?, self.precision)
    }

    fn weights(&self, dim: usize) -> Result<WeightSet> {
        if let Ok(w) = self.input("w") {
            return Ok(WeightSet::singleton(parse_weight(w)?));
        }
        parse_weight_set(self.input("W")?, dim)
    }

    fn certificate(&mut self, x: &TargetVector, ws: &WeightSet, cert: &Value) -> Result<()> {
        let kind = match as_str(cert, "kind.name")? {
            "dirichlet" => CertificateKind::Dirichlet,
            "delta_singular" => CertificateKind::DeltaSingular {
                delta: parse_rational(as_str(cert, "kind.parameter")?)?,
            },
            "epsilon_singular" => CertificateKind::EpsilonSingular {
                epsilon: parse_rational(as_str(cert, "kind.parameter")?)?,
            },
            other => return Err(Error::Io(format!("unknown certificate kind {other:?}"))),
        };
        for wt in as_array(cert, "witnesses")? {
            let i = as_u64(wt, "weight_index")? as usize;
            let w = ws
                .weights()
                .get(i)
                .ok_or_else(|| Error::Io(format!("weight index {i} out of range")))?;
            let (q_from, q_to) = (as_u64(wt, "q_from")?, as_u64(wt, "q_to")?);
            let (q, err) = residual_err(x, w, field(wt, "approximant")?)?;
            self.check(q <= q_from && q_from <= q_to, || {
                format!("witness q = {q} does not serve [{q_from}, {q_to}]")
            });
            let holds = kind.holds(&err, q_to)?;
            self.check(holds, || format!("witness q = {q} fails at Q = {q_to}"));
        }
        Ok(())
    }
}

/// Re-parses a report and re-checks its embedded witnesses and identities
/// without repeating any search.
pub fn validate_document(text: &str) -> Result<Validation> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.column(), e.to_string()))?;
    if as_str(&doc, "format")? != FORMAT {
        return Err(Error::Io("not a report document".into()));
    }
    let version = as_u64(&doc, "version")?;
    if version != VERSION as u64 {
        return Err(Error::Io(format!("unsupported report version {version}")));
    }
    let kind = as_str(&doc, "kind")?.to_string();
    let precision = as_u64(&doc, "config.precision_bits")? as u32;
    let mut cx = Ctx {
        doc: &doc,
        precision,
        out: Validation {
            kind: kind.clone(),
            ..Default::default()
        },
    };
    let p = field(&doc, "payload")?;
    match kind.as_str() {
        "norm" => {
            let x = cx.x()?;
            let w = parse_weight(cx.input("w")?)?;
            let v = quasi_norm(&x, &w)?;
            let stored = as_f64(p, "ln_value")?;
            let ln = v.ln_approx();
            cx.check(ln == stored || (ln - stored).abs() <= 1e-12 * (1.0 + ln.abs()), || {
                format!("stored ln value {stored} differs from {ln}")
            });
        }
        "dirichlet" => {
            let x = cx.x()?;
            let w = parse_weight(cx.input("w")?)?;
            let big_q = as_u64(p, "Q")?;
            let (q, err) = residual_err(&x, &w, field(p, "approximant")?)?;
            cx.check(q >= 1 && q <= big_q, || format!("q = {q} outside [1, {big_q}]"));
            let ok = CertificateKind::Dirichlet.holds(&err, big_q)?;
            cx.check(ok, || format!("q = {q} misses 1/Q"));
        }
        "best-seq" => {
            let x = cx.x()?;
            let w = parse_weight(cx.input("w")?)?;
            let mut prev: Option<(u64, QuasiNormValue)> = None;
            for (k, e) in as_array(p, "entries")?.iter().enumerate() {
                let (q, err) = residual_err(&x, &w, e)?;
                if k == 0 {
                    cx.check(q == 1, || format!("first entry has q = {q}"));
                }
                if let Some((pq, perr)) = &prev {
                    let dec = err.cmp(perr)? == std::cmp::Ordering::Less;
                    cx.check(q > *pq && dec, || format!("entry q = {q} is not a strict improvement"));
                }
                prev = Some((q, err));
            }
        }
        "exponents" => {
            for key in ["uniform", "ordinary"] {
                let Some(est) = p.get(key).filter(|e| e.get("per_gap_exponents").is_some()) else {
                    continue;
                };
                let gaps = as_array(est, "per_gap_exponents")?;
                let start = as_u64(est, "window_start")? as usize;
                let mut v = if key == "uniform" { f64::INFINITY } else { f64::NEG_INFINITY };
                for g in &gaps[start.min(gaps.len())..] {
                    let f = if key == "uniform" {
                        as_f64(g, "uniform")?
                    } else {
                        match field(g, "ordinary")? {
                            Value::Null => continue,
                            o => o.as_f64().unwrap_or(f64::NAN),
                        }
                    };
                    v = if key == "uniform" { v.min(f) } else { v.max(f) };
                }
                let stored = as_f64(est, "value")?;
                cx.check(v == stored, || format!("{key} value {stored} is not the tail extremum {v}"));
            }
            if let Some(est) = p.get("sigma_hat").filter(|e| e.get("grid").is_some()) {
                let grid = as_array(est, "grid")?;
                let start = as_u64(est, "window_start")? as usize;
                let mut v = f64::INFINITY;
                for g in &grid[start.min(grid.len())..] {
                    v = v.min(as_f64(g, "eps")?);
                }
                let stored = as_f64(est, "value")?;
                cx.check(v == stored, || format!("sigma_hat value {stored} is not the tail minimum {v}"));
            }
        }
        "singular-cert" => {
            let x = cx.x()?;
            let ws = cx.weights(x.dim())?;
            cx.certificate(&x, &ws, p)?;
        }
        "construct-hyperplane" => {
            let x = parse_vector(as_str(p, "x")?, precision)?;
            let ws = WeightSet::singleton(parse_weight(cx.input("w")?)?);
            cx.certificate(&x, &ws, field(p, "certificate")?)?;
        }
        "structure-diophantine" => {
            let (a, b, c) = (
                cx.input("a")?.parse::<i128>().map_err(|e| Error::Io(e.to_string()))?,
                cx.input("b")?.parse::<i128>().map_err(|e| Error::Io(e.to_string()))?,
                cx.input("c")?.parse::<i128>().map_err(|e| Error::Io(e.to_string()))?,
            );
            match field(p, "solution")? {
                Value::Null => {
                    let g = num_integer::Integer::gcd(&a, &b);
                    cx.check(if g == 0 { c != 0 } else { c % g != 0 }, || "solvable equation reported as none".into());
                }
                s => {
                    let (x0, y0) = (idx(s, "base", 0)?, idx(s, "base", 1)?);
                    let (sx, sy) = (idx(s, "steps", 0)?, idx(s, "steps", 1)?);
                    cx.check(a * x0 - b * y0 == c, || "base point does not solve the equation".into());
                    cx.check(a * sx - b * sy == 0, || "step is not a homogeneous solution".into());
                }
            }
        }
        "structure-pairs" => {
            for r in as_array(p, "rows")? {
                let (q, qn) = (as_i128(r, "q")?, as_i128(r, "q_next")?);
                let (rr, x, y) = (as_i128(r, "r")?, as_i128(r, "x")?, as_i128(r, "y")?);
                cx.check(x * qn - y * q == rr, || format!("x q' - y q != r at q = {q}"));
                for i in 0..2 {
                    let (c, l) = (idx(r, "c", i)?, idx(r, "l", i)?);
                    cx.check(c == l * rr, || format!("c != l r at q = {q}"));
                }
            }
        }
        "structure-relation" => {
            let s2 = parse_rational(cx.input("sigma2")?)?;
            let s1 = parse_rational(as_str(p, "sigma1")?)?;
            cx.check(exponent_relation_formula(&s2)? == s1, || "stored sigma_1 does not match the relation".into());
        }
        "covolume" => {
            let rows = as_array(p, "basis")?
                .iter()
                .map(|r| r.as_array().map(|v| v.iter().map(big).collect::<Result<Vec<_>>>()))
                .collect::<Option<Result<Vec<_>>>>()
                .ok_or_else(|| Error::Io("basis rows must be arrays".into()))??;
            let basis = SubmoduleBasis::new(rows)?;
            let plucker = basis.plucker();
            let stored = as_array(p, "plucker")?;
            cx.check(stored.len() == plucker.len(), || "Plücker coordinate count differs".into());
            for ((idx_, v), s) in plucker.iter().zip(stored) {
                let same = s.get(0).and_then(|i| serde_json::from_value::<Vec<usize>>(i.clone()).ok()) == Some(idx_.clone())
                    && s.get(1).map(big).transpose()?.as_ref() == Some(v);
                cx.check(same, || format!("Plücker coordinate {idx_:?} differs"));
            }
            if let Some(g) = p.get("gram").filter(|g| !g.is_null()) {
                let equal = as_str(g, "gram_determinant")? == as_str(g, "plucker_square_sum")?;
                cx.check(equal == field(g, "equal")?.as_bool().unwrap_or(!equal), || {
                    "Gram flag disagrees with the stored values".into()
                });
            }
        }
        "construct-cf" => {
            let conv = as_array(p, "convergents")?;
            for pair in conv.windows(2) {
                let (p0, q0) = (big(&pair[0][1])?, big(&pair[0][2])?);
                let (p1, q1) = (big(&pair[1][1])?, big(&pair[1][2])?);
                let det = &p1 * &q0 - &p0 * &q1;
                cx.check(det == BigInt::from(1) || det == BigInt::from(-1), || {
                    format!("convergents {p0}/{q0}, {p1}/{q1} are not adjacent")
                });
            }
        }
        "correspondence" => {
            if let Some(s) = p.get("sandwich").filter(|s| s.get("sigma_hat").is_some()) {
                let (sig, lo, hi, slack) = (
                    as_f64(s, "sigma_hat")?,
                    as_f64(s, "lower")?,
                    as_f64(s, "upper")?,
                    as_f64(s, "slack")?,
                );
                let passed = field(s, "passed")?.as_bool().unwrap_or(false);
                cx.check(passed == (lo <= sig + slack && sig <= hi + slack), || "sandwich flag disagrees with its bounds".into());
            }
        }
        "flow" => {
            if let Some(tr) = p.get("trace") {
                for s in as_array(tr, "samples")? {
                    let (t, d, r) = (as_f64(s, "t")?, as_f64(s, "delta")?, as_f64(s, "rate")?);
                    let want = -d.ln() / t;
                    cx.check((want - r).abs() <= 1e-12 * (1.0 + r.abs()), || format!("rate at t = {t} is inconsistent"));
                }
            }
        }
        "probe" => {
            for key in ["subspace_stats", "curve_stats"] {
                let st = field(p, key)?;
                let mut v: Vec<f64> = as_array(st, "values")?
                    .iter()
                    .map(|x| x.as_f64().unwrap_or(f64::INFINITY))
                    .collect();
                v.sort_by(f64::total_cmp);
                let n = v.len();
                let med = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
                cx.check(med == as_f64(st, "median")?, || format!("{key} median is inconsistent"));
            }
        }
        "validation" => {}
        other => return Err(Error::Io(format!("unknown report kind {other:?}"))),
    }
    cx.out.valid = cx.out.problems.is_empty();
    Ok(cx.out)
}

fn idx(v: &Value, key: &str, i: usize) -> Result<i128> {
    let a = as_array(v, key)?;
    let e = a.get(i).ok_or_else(|| Error::Io(format!("{key}[{i}] missing")))?;
    e.as_i64()
        .map(i128::from)
        .ok_or_else(|| Error::Io(format!("{key}[{i}] is not an integer")))
}
