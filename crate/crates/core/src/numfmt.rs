//! Number formatting and parsing shared by the text, CSV and JSON outputs.

use crate::error::{Error, Result};

/// Rounds to 15 significant digits.
///
/// Any 15-digit decimal survives a round trip through `f64`, so the shortest
/// representation of the rounded value never needs more than 15 digits.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Formats with at most 15 significant digits, `.` decimal separator.
pub fn fmt15(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let r = round15(x);
    let a = r.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{r:e}")
    } else {
        format!("{r}")
    }
}

/// Parses a real number, accepting symbolic multiples of pi such as `pi`,
/// `pi/4`, `-pi/2`, `3pi/4`, `2*pi` and `0.5pi`.
pub fn parse_real(text: &str) -> Result<f64> {
    let s = text.trim();
    if let Ok(v) = s.parse::<f64>() {
        if v.is_nan() {
            return Err(Error::Parse(format!("'{text}' is not a number")));
        }
        return Ok(v);
    }
    let lower = s.to_ascii_lowercase();
    let Some(pos) = lower.find("pi") else {
        return Err(Error::Parse(format!("'{text}' is not a number")));
    };
    let bad = || Error::Parse(format!("'{text}' is not a number or multiple of pi"));

    let coeff_text = lower[..pos].trim().trim_end_matches('*').trim();
    let coeff = match coeff_text {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = lower[pos + 2..].trim();
    let divisor = if rest.is_empty() {
        1.0
    } else if let Some(d) = rest.strip_prefix('/') {
        d.trim().parse::<f64>().map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    if divisor == 0.0 {
        return Err(bad());
    }
    Ok(coeff * std::f64::consts::PI / divisor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn symbolic_pi_forms() {
        assert_eq!(parse_real("pi").unwrap(), PI);
        assert_eq!(parse_real("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_real("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_real("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("2*pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert_eq!(parse_real("5e-4").unwrap(), 5e-4);
        assert!(parse_real("pie").is_err());
        assert!(parse_real("abc").is_err());
        assert!(parse_real("pi/0").is_err());
    }

    #[test]
    fn fifteen_digits() {
        assert_eq!(fmt15(0.1), "0.1");
        assert_eq!(fmt15(PI), "3.14159265358979");
        assert_eq!(fmt15(1.0 / 3.0), "0.333333333333333");
        assert_eq!(fmt15(-2.5e-12), "-2.5e-12");
        let r = round15(PI);
        assert_eq!(fmt15(r), fmt15(PI));
    }
}
