//! Hexadecimal floating-point text (`0x1.8p+1`), exact for every `f64`.
//!
//! Usable as `#[serde(with = "crate::hexfloat")]`; the [`vec`] submodule
//! handles `Vec<f64>` and [`nested`] handles `Vec<Vec<f64>>`.

use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

pub fn format(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 { (0, -1022) } else { (1, exp_bits - 1023) };
    let mut digits = format!("{mantissa:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let frac = if digits.is_empty() { String::new() } else { format!(".{digits}") };
    let esign = if exp >= 0 { "+" } else { "-" };
    format!("{sign}0x{lead}{frac}p{esign}{}", exp.abs())
}

pub fn parse(s: &str) -> Option<f64> {
    match s {
        "nan" => return Some(f64::NAN),
        "inf" => return Some(f64::INFINITY),
        "-inf" => return Some(f64::NEG_INFINITY),
        _ => {}
    }
    let (negative, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x")?;
    let (mant, exp) = rest.split_once('p')?;
    let exp: i64 = exp.parse().ok()?;
    let (lead, frac) = match mant.split_once('.') {
        Some((l, f)) => (l, f),
        None => (mant, ""),
    };
    if frac.len() > 13 || !frac.chars().all(|c| c.is_ascii_hexdigit()) {
        return None;
    }
    let lead: u64 = match lead {
        "0" => 0,
        "1" => 1,
        _ => return None,
    };
    let frac_bits = if frac.is_empty() {
        0
    } else {
        u64::from_str_radix(frac, 16).ok()? << (4 * (13 - frac.len()))
    };
    let bits = match (lead, frac_bits) {
        (0, 0) => 0,
        (0, f) if exp == -1022 => f,
        (1, f) if (-1022..=1023).contains(&exp) => (((exp + 1023) as u64) << 52) | f,
        _ => return None,
    };
    let v = f64::from_bits(bits);
    Some(if negative { -v } else { v })
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format(*v))
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let s = String::deserialize(d)?;
    parse(&s).ok_or_else(|| D::Error::custom(format!("invalid hex float '{s}'")))
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&format(*x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        raw.iter()
            .map(|s| parse(s).ok_or_else(|| D::Error::custom(format!("invalid hex float '{s}'"))))
            .collect()
    }
}

pub mod nested {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for row in v {
            let r: Vec<String> = row.iter().map(|x| format(*x)).collect();
            seq.serialize_element(&r)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let raw = Vec::<Vec<String>>::deserialize(d)?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse(s).ok_or_else(|| D::Error::custom(format!("invalid hex float '{s}'"))))
                    .collect()
            })
            .collect()
    }
}
