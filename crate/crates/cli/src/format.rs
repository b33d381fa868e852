pub const DEFAULT_PRECISION: usize = 6;

/// `%g`-style rendering with `sig` significant digits.
pub fn sig(v: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if exp < -5 || exp >= sig as i32 {
        let s = format!("{:.*e}", sig - 1, v);
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        return format!("{}e{}", trim_zeros(mantissa), e);
    }
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.0, 6), "0");
        assert_eq!(sig(0.05, 6), "0.05");
        assert_eq!(sig(1.0 / 3.0, 6), "0.333333");
        assert_eq!(sig(123456.7, 6), "123457");
        assert_eq!(sig(1234567.0, 6), "1.23457e6");
        assert_eq!(sig(1.5e-9, 6), "1.5e-9");
        assert_eq!(sig(-2.5, 3), "-2.5");
        assert_eq!(sig(0.1 + 0.2, 17), "0.30000000000000004");
    }
}
