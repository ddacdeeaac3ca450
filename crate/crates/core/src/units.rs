//! Angle parsing for scenario and pose files.
//!
//! An angle is either a bare JSON number (radians) or a string carrying an
//! explicit unit suffix: `"15deg"`, `"-0.26rad"`. Angles are always
//! serialized back as bare radians, which is the canonical form.

use serde::de::{self, Deserializer, Visitor};
use std::fmt;

/// Parses `"<number>deg"`, `"<number>rad"` or a plain number (radians).
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let (number, to_rad) = if let Some(n) = text.strip_suffix("deg") {
        (n, std::f64::consts::PI / 180.0)
    } else if let Some(n) = text.strip_suffix("rad") {
        (n, 1.0)
    } else {
        (text, 1.0)
    };
    let value: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse angle {text:?}"))?;
    if !value.is_finite() {
        return Err(format!("angle {text:?} is not finite"));
    }
    // Avoid the multiply for radians so round-trips stay bit-exact.
    Ok(if to_rad == 1.0 { value } else { value * to_rad })
}

struct AngleVisitor;

impl Visitor<'_> for AngleVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an angle in radians or a string like \"15deg\" / \"0.2rad\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        parse_angle(v).map_err(E::custom)
    }
}

/// `deserialize_with` hook for a single angle field.
pub fn angle<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(AngleVisitor)
}

/// `deserialize_with` hook for a list of angles.
pub fn angle_list<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(serde::Deserialize)]
    struct Wrapped(#[serde(deserialize_with = "angle")] f64);

    let values: Vec<Wrapped> = serde::Deserialize::deserialize(d)?;
    Ok(values.into_iter().map(|w| w.0).collect())
}
