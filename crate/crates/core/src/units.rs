//! Parsing and conversion helpers for user-facing quantities.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Parses an angle in rad: a number, or a multiple/fraction of `pi`
/// (`pi`, `-pi`, `pi/2`, `3pi/4`, `0.5pi`).
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let bad = || Error::invalid(format!("cannot parse angle `{s}`"));
    let Some(pos) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&t[..pos], &t[pos + 2..]);
    let factor = match head.trim_end_matches('*') {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let divisor = match tail {
        "" => 1.0,
        d => d.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?,
    };
    if divisor == 0.0 {
        return Err(bad());
    }
    Ok(factor * PI / divisor)
}

/// Angular frequency (rad/s) to Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert_eq!(parse_angle("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("-pi").unwrap(), -PI);
        assert_eq!(parse_angle("3pi/4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_angle("0.5*pi").unwrap(), 0.5 * PI);
        assert_eq!(parse_angle("1.25").unwrap(), 1.25);
        for bad in ["", "tau", "pi/0", "pi2", "x pi"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }
}
