//! Number formatting, argument parsing helpers and the output buffer.

use serde_json::Value;

use sharp_ext_core::Vec2;

/// Collects output so that nothing is written when a command fails halfway.
pub struct Printer {
    digits: usize,
    buf: String,
}

impl Printer {
    pub fn new(digits: usize) -> Self {
        Printer { digits: digits.clamp(1, 17), buf: String::new() }
    }

    /// `x` rounded to the configured significant digits, trailing zeros
    /// dropped. Plain notation for moderate exponents, scientific otherwise.
    pub fn num(&self, x: f64) -> String {
        fmt_sig(x, self.digits)
    }

    pub fn line(&mut self, text: &str) {
        self.buf.push_str(text);
        self.buf.push('\n');
    }

    pub fn json(&mut self, value: &Value) {
        let rounded = round_json(value, self.digits);
        let text = serde_json::to_string_pretty(&rounded).expect("json values always serialise");
        self.line(&text);
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..16).contains(&exp) {
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let plain = format!("{:.*}", decimals, sci.parse::<f64>().expect("round trip"));
    trim_zeros(&plain).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn round_json(v: &Value, digits: usize) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            fmt_sig(x, digits)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.iter().map(|i| round_json(i, digits)).collect()),
        Value::Object(map) => Value::Object(map.iter().map(|(k, v)| (k.clone(), round_json(v, digits))).collect()),
        other => other.clone(),
    }
}

pub fn parse_pair(text: &str) -> Result<Vec2, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => {
            let x = a.parse::<f64>().map_err(|_| format!("bad number `{a}` in `{text}`"))?;
            let y = b.parse::<f64>().map_err(|_| format!("bad number `{b}` in `{text}`"))?;
            Ok(Vec2::new(x, y))
        }
        _ => Err(format!("expected `x,y`, got `{text}`")),
    }
}

/// `start:end:count` (a single number is a one-point range). With `log`
/// the points are geometrically spaced.
pub fn parse_range(text: &str, log: bool) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| format!("bad number `{s}` in range `{text}`"));
    let (a, b, n) = match parts.as_slice() {
        [x] => {
            let x = num(x)?;
            (x, x, 1)
        }
        [a, b, n] => (num(a)?, num(b)?, n.parse::<usize>().map_err(|_| format!("bad count `{n}` in `{text}`"))?),
        _ => return Err(format!("expected `start:end:count`, got `{text}`")),
    };
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(format!("empty or non-finite range `{text}`"));
    }
    if log && !(a > 0.0 && b > 0.0) {
        return Err(format!("log range needs positive ends, got `{text}`"));
    }
    Ok((0..n)
        .map(|k| {
            if n == 1 {
                return a;
            }
            let s = k as f64 / (n - 1) as f64;
            if log {
                a * (b / a).powf(s)
            } else {
                a + (b - a) * s
            }
        })
        .collect())
}
