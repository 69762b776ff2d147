//! The JSON form document: `{"d", "m", "q", "translates", "name"}` with the
//! row-major upper triangle of `Q` in `q`. Entries are JSON numbers, or
//! strings holding a decimal or a rational `"p/q"`; every entry is kept as
//! an exact rational.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use periodic_forms::exact::RationalForm;
use periodic_forms::{PeriodicForm, Pqf};
use serde::Deserialize;
use serde_json::{json, Number, Value};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormDocument {
    pub d: usize,
    pub m: usize,
    pub q: Vec<BigRational>,
    pub translates: Vec<Vec<BigRational>>,
    pub name: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    d: usize,
    m: usize,
    q: Vec<Value>,
    #[serde(default)]
    translates: Vec<Vec<Value>>,
    #[serde(default)]
    name: Option<String>,
}

/// Exact value of a decimal literal such as `-1.25e-3`.
pub fn parse_decimal(text: &str) -> Option<BigRational> {
    let s = text.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], s[k + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(if all.is_empty() { "0" } else { &all }).ok()?);
    let shift = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let power = num_traits::pow(ten, shift.unsigned_abs() as usize);
    if shift >= 0 {
        value *= power;
    } else {
        value /= power;
    }
    Some(if negative { -value } else { value })
}

/// A rational `"p/q"` or a decimal.
pub fn parse_scalar_text(text: &str) -> Option<BigRational> {
    match text.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).ok()?;
            let q = BigInt::from_str(q.trim()).ok()?;
            (!q.is_zero()).then(|| BigRational::new(p, q))
        }
        None => parse_decimal(text),
    }
}

fn scalar(value: &Value, field: &str) -> Result<BigRational, CliError> {
    let parsed = match value {
        Value::Number(n) => parse_decimal(&n.to_string()),
        Value::String(s) => parse_scalar_text(s),
        _ => None,
    };
    parsed.ok_or_else(|| CliError::Validation(format!("{field}: {value} is neither a number nor a rational string")))
}

/// Denominators up to this print as `"p/q"`; larger terminating ones as decimals.
const SHORT_DENOMINATOR: u64 = 1_000_000;

/// Exact decimal string of `x` when its denominator is `2^a 5^b`.
fn terminating_decimal(x: &BigRational) -> Option<String> {
    let mut den = x.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let (mut a, mut b) = (0usize, 0usize);
    while (&den % &two).is_zero() {
        den /= &two;
        a += 1;
    }
    while (&den % &five).is_zero() {
        den /= &five;
        b += 1;
    }
    if den != BigInt::from(1) {
        return None;
    }
    let k = a.max(b);
    let scaled = (x * BigRational::from_integer(num_traits::pow(BigInt::from(10), k))).to_integer();
    let digits = scaled.magnitude().to_string();
    let digits = format!("{digits:0>width$}", width = k + 1);
    let (int_part, frac_part) = digits.split_at(digits.len() - k);
    let sign = if scaled.sign() == num_bigint::Sign::Minus { "-" } else { "" };
    Some(format!("{sign}{int_part}.{frac_part}"))
}

/// Rational as JSON: integers as numbers, short fractions as `"p/q"`, long
/// terminating ones as exact decimal strings.
pub fn scalar_json(x: &BigRational) -> Value {
    if x.is_integer() {
        if let Some(i) = x.to_integer().to_i64() {
            return Value::Number(Number::from(i));
        }
    }
    let short = x.denom().to_u64().is_some_and(|d| d <= SHORT_DENOMINATOR);
    match (short, terminating_decimal(x)) {
        (false, Some(decimal)) => Value::String(decimal),
        _ => Value::String(x.to_string()),
    }
}

/// Nearest rational with denominator at most `max_den` when it matches `x`
/// to within `tol`, else the shortest decimal that reads back as `x`.
pub fn rational_from_f64(x: f64, max_den: i64, tol: f64) -> BigRational {
    for den in 1..=max_den {
        let num = (x * den as f64).round();
        if (num / den as f64 - x).abs() <= tol {
            return BigRational::new(BigInt::from(num as i64), BigInt::from(den));
        }
    }
    parse_decimal(&format!("{x:e}")).unwrap_or_else(BigRational::zero)
}

fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

impl FormDocument {
    pub fn from_rational(form: &RationalForm, name: Option<String>) -> Self {
        let d = form.dim();
        let mut q = Vec::with_capacity(d * (d + 1) / 2);
        for r in 0..d {
            for c in r..d {
                q.push(form.gram()[r][c].clone());
            }
        }
        Self { d, m: form.m(), q, translates: form.translates().to_vec(), name }
    }

    /// Converts a floating-point form, recognizing short rationals.
    pub fn from_float(form: &PeriodicForm, name: Option<String>) -> Self {
        let conv = |x: f64| rational_from_f64(x, 1000, 1e-12);
        Self {
            d: form.dim(),
            m: form.m(),
            q: form.q().upper_triangle().into_iter().map(conv).collect(),
            translates: form.translates().iter().map(|t| t.iter().map(|&x| conv(x)).collect()).collect(),
            name,
        }
    }

    pub fn to_rational(&self) -> Result<RationalForm, CliError> {
        RationalForm::from_upper_triangle(self.d, self.q.clone(), self.translates.clone()).map_err(CliError::from_core)
    }

    pub fn to_form(&self) -> Result<PeriodicForm, CliError> {
        let entries: Vec<f64> = self.q.iter().map(to_f64).collect();
        let q = Pqf::from_upper_triangle(self.d, &entries).map_err(CliError::from_core)?;
        let translates = self.translates.iter().map(|t| t.iter().map(to_f64).collect()).collect();
        PeriodicForm::new(q, translates).map_err(CliError::from_core)
    }

    pub fn to_json(&self) -> Value {
        let mut doc = json!({
            "d": self.d,
            "m": self.m,
            "q": self.q.iter().map(scalar_json).collect::<Vec<_>>(),
            "translates": self.translates.iter().map(|t| t.iter().map(scalar_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
        if let Some(name) = &self.name {
            doc["name"] = Value::String(name.clone());
        }
        doc
    }
}

impl fmt::Display for FormDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Parses a document, checking its shape. Malformed JSON yields a
/// positioned parse error; shape and value problems yield validation
/// errors.
pub fn parse_document(text: &str) -> Result<FormDocument, CliError> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
        }
    })?;
    if raw.d == 0 || raw.m == 0 {
        return Err(CliError::Validation("d and m must be positive".into()));
    }
    let expected = raw.d * (raw.d + 1) / 2;
    if raw.q.len() != expected {
        return Err(CliError::Validation(format!("q has {} entries, expected {expected} for d = {}", raw.q.len(), raw.d)));
    }
    if raw.translates.len() + 1 != raw.m {
        return Err(CliError::Validation(format!(
            "m = {} needs {} translates, found {}",
            raw.m,
            raw.m - 1,
            raw.translates.len()
        )));
    }
    let q = raw.q.iter().enumerate().map(|(k, v)| scalar(v, &format!("q[{k}]"))).collect::<Result<Vec<_>, _>>()?;
    let mut translates = Vec::with_capacity(raw.translates.len());
    for (k, t) in raw.translates.iter().enumerate() {
        if t.len() != raw.d {
            return Err(CliError::Validation(format!("translate {} has {} entries, expected {}", k + 1, t.len(), raw.d)));
        }
        translates.push(
            t.iter().enumerate().map(|(c, v)| scalar(v, &format!("translates[{k}][{c}]"))).collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(FormDocument { d: raw.d, m: raw.m, q, translates, name: raw.name })
}

/// Parses and validates a document into a periodic form.
pub fn parse_form(text: &str) -> Result<PeriodicForm, CliError> {
    let doc = parse_document(text)?;
    doc.to_rational()?;
    doc.to_form()
}
