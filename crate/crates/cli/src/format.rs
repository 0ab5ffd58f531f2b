//! Number formatting for JSON and CSV output.

use serde_json::Value;

pub const JSON_DIGITS: usize = 10;
pub const CSV_DIGITS: usize = 6;

/// `x` rounded to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits - 1, x).parse().unwrap_or(x)
}

/// Rounds every float in `v` to [`JSON_DIGITS`] significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if let Some(r) = serde_json::Number::from_f64(round_sig(x, JSON_DIGITS)) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

/// CSV cell with [`CSV_DIGITS`] significant digits; scientific notation
/// outside `[1e-4, 1e15)`.
pub fn csv_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r = round_sig(x, CSV_DIGITS);
    let a = r.abs();
    if r == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{r}")
    } else {
        let s = format!("{:.*e}", CSV_DIGITS - 1, r);
        // Trim trailing zeros of the mantissa: 1.26400e-5 -> 1.264e-5.
        let (m, e) = s.split_once('e').unwrap_or((&s, "0"));
        let m = if m.contains('.') {
            m.trim_end_matches('0').trim_end_matches('.')
        } else {
            m
        };
        format!("{m}e{e}")
    }
}

pub fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.724721793, 4), 0.7247);
        assert_eq!(round_sig(-8.979088983, 10), -8.979088983);
        assert_eq!(csv_number(1.2641234e-4), "0.000126412");
        assert_eq!(csv_number(1.2641234e-5), "1.26412e-5");
        assert_eq!(csv_number(2.0), "2");
        assert_eq!(csv_number(-3.0e20), "-3e20");
        let mut v = serde_json::json!({"a": [0.12345678901234, 3], "b": {"c": 1e-300}});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[0.123456789,3],"b":{"c":1e-300}}"#);
    }
}
