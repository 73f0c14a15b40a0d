//! Numeric text formats shared by every CSV writer: floats with 17
//! significant digits so values round-trip exactly.

pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::g17;

    #[test]
    fn seventeen_digits_round_trip() {
        for &x in &[
            0.1,
            -1234.567891234,
            1.0 / 3.0,
            f64::MIN_POSITIVE,
            2.2250738585072014e-308,
            9.87654321e300,
        ] {
            let s = g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}
