//! Physical constants and unit conversions.
//!
//! Energies are carried as frequencies in GHz (E/h), propagator time in ns,
//! coherence times in µs, capacitances in fF, bias currents in mA and power
//! in nW.

use std::f64::consts::PI;

/// Magnetic flux quantum h/2e in Wb.
pub const PHI0: f64 = 2.067_833_848e-15;

pub const TWO_PI: f64 = 2.0 * PI;

/// Converts a coherence time in µs to a rate in 1/ns. Infinite times map to 0.
pub fn rate_per_ns(t_us: f64) -> f64 {
    if t_us.is_infinite() {
        0.0
    } else {
        1.0 / (t_us * 1.0e3)
    }
}

pub fn us_to_ns(t_us: f64) -> f64 {
    t_us * 1.0e3
}

pub fn mhz_to_ghz(f_mhz: f64) -> f64 {
    f_mhz * 1.0e-3
}

pub fn ghz_to_mhz(f_ghz: f64) -> f64 {
    f_ghz * 1.0e3
}

/// Power in nW dissipated by a bias current (mA) switched at `f_ghz`.
pub fn flux_power_nw(i_bias_ma: f64, f_ghz: f64) -> f64 {
    PHI0 * (i_bias_ma * 1.0e-3) * (f_ghz * 1.0e9) * 1.0e9
}

/// Formats a value with `sig` significant digits and no locale dependence,
/// trimming trailing zeros. Used for all CSV output.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let s = format!("{:.*e}", sig.saturating_sub(1), x);
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".to_string() } else { t.to_string() }
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig_formatting() {
        assert_eq!(format_sig(2.999_96, 4), "3");
        assert_eq!(format_sig(15.0024, 4), "15");
        assert_eq!(format_sig(2.3753, 4), "2.375");
        assert_eq!(format_sig(10244.0, 4), "10244");
        assert_eq!(format_sig(0.001_234_5, 3), "0.00123");
        assert_eq!(format_sig(1.5e-9, 12), "1.5e-9");
        assert_eq!(format_sig(-0.0, 4), "0");
    }

    #[test]
    fn flux_power_units() {
        let p = flux_power_nw(1.0, 1.0);
        assert!((p - 2.067_833_848).abs() < 1e-9);
    }
}
