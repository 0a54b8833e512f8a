//! Fixed float formatting shared by every emitter, so that identical runs
//! produce byte-identical files.

use std::io::Write;

/// C `printf("%.12g")`.
pub fn g12(x: f64) -> String {
    g(x, 12)
}

/// C `printf("%.{precision}g")`.
pub fn g(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes one comma-separated row.
pub fn write_row<W: Write>(w: &mut W, fields: &[String]) -> std::io::Result<()> {
    writeln!(w, "{}", fields.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-20.5333), "-20.5333");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(1e-5), "1e-05");
        assert_eq!(g12(123456789012345.0), "1.23456789012e+14");
        assert_eq!(g12(0.0001), "0.0001");
        assert_eq!(g12(2.0f64.sqrt() * 1e11), "141421356237");
        assert_eq!(g12(-1.5e-7), "-1.5e-07");
    }
}
