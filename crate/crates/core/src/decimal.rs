//! Decimal-string rendering of floating point values.
//!
//! Every real number that leaves the toolkit in a file is written as a
//! decimal string. Full-precision strings use the shortest representation
//! that parses back to the identical `f64`; rounded strings apply
//! round-half-to-even to that shortest representation.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

/// Shortest decimal string that round-trips to `value`.
pub fn full(value: f64) -> String {
    format!("{value}")
}

pub fn parse(text: &str) -> Result<f64, std::num::ParseFloatError> {
    text.trim().parse()
}

/// Rounds the shortest decimal form of `value` to `places` fractional
/// digits, ties to even. Always emits exactly `places` digits.
pub fn round_half_even(value: f64, places: usize) -> String {
    if !value.is_finite() {
        return full(value);
    }
    let text = full(value.abs());
    let (int_part, frac_part) = match text.split_once('.') {
        Some((i, f)) => (i, f),
        None => (text.as_str(), ""),
    };

    // All digits as one integer string scaled by 10^places.
    let mut digits: Vec<u8> = int_part.bytes().map(|b| b - b'0').collect();
    let frac: Vec<u8> = frac_part.bytes().map(|b| b - b'0').collect();
    let kept = frac.len().min(places);
    digits.extend_from_slice(&frac[..kept]);
    digits.extend(std::iter::repeat_n(0, places - kept));

    let rest = &frac[kept..];
    let round_up = match rest.first() {
        None => false,
        Some(&d) if d > 5 => true,
        Some(&d) if d < 5 => false,
        Some(_) => {
            let exact_tie = rest[1..].iter().all(|&d| d == 0);
            !exact_tie || digits.last().is_some_and(|d| d % 2 == 1)
        }
    };
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }

    let split = digits.len() - places;
    let mut out = String::new();
    if value.is_sign_negative() && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| char::from(b'0' + d)));
    if places > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| char::from(b'0' + d)));
    }
    out
}

/// Like [`round_half_even`] but drops trailing fractional zeros, keeping at
/// least one fractional digit.
pub fn round_half_even_trimmed(value: f64, places: usize) -> String {
    let mut s = round_half_even(value, places);
    if s.contains('.') {
        while s.ends_with('0') && !s.ends_with(".0") {
            s.pop();
        }
    }
    s
}

/// Serde adapter storing an `f64` as a full-precision decimal string.
pub mod as_string {
    use super::*;

    pub fn serialize<S: Serializer>(value: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&full(*value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(|e| D::Error::custom(format!("invalid decimal '{text}': {e}")))
    }
}

/// Serde adapter for `Vec<f64>` stored as decimal strings.
pub mod vec_as_string {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            seq.serialize_element(&full(*v))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|t| parse(t).map_err(|e| D::Error::custom(format!("invalid decimal '{t}': {e}"))))
            .collect()
    }
}

/// Serde adapter for `Option<f64>` stored as a decimal string or null.
pub mod opt_as_string {
    use super::*;

    pub fn serialize<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match value {
            Some(v) => s.serialize_some(&full(*v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<String>::deserialize(d)?
            .map(|t| parse(&t).map_err(|e| D::Error::custom(format!("invalid decimal '{t}': {e}"))))
            .transpose()
    }
}
