/// `%.{digits}g`-style formatting: `digits` significant digits, trailing
/// zeros removed, scientific notation outside `[1e-4, 10^digits)`.
pub fn fmt_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    // Round first so the exponent reflects carries such as 9.99.. -> 10.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        return format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
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
    use super::fmt_g;

    #[test]
    fn matches_printf_g() {
        // printf("%.12g")
        let cases = [
            (0.0, "0"),
            (1000.5, "1000.5"),
            (3001.0, "3001"),
            (0.650042438036037, "0.650042438036"),
            (0.034748692431879632, "0.0347486924319"),
            (1.0, "1"),
            (0.9999999999999998, "1"),
            (1e-7, "1e-07"),
            (1.5e13, "1.5e+13"),
            (-2.25, "-2.25"),
            (123456789012.4, "123456789012"),
            (0.00001234, "1.234e-05"),
            (0.0001234, "0.0001234"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x, 12), want, "{x}");
        }
    }
}
