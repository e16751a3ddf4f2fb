//! Modified Bessel functions of the first kind and the gamma function.
//!
//! `log_bessel_i` is the production path: the ascending power series up to
//! `z = 50`, then the large-argument (Hankel) expansion, both kept in log
//! space so concentrations of order 10⁶ never overflow.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Above this argument the large-argument expansion replaces the series.
pub const SERIES_LIMIT: f64 = 50.0;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument p - 1
    let mut a = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// ln Γ(p) for p > 0.
pub fn ln_gamma(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite("gamma argument"));
    }
    if p <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma needs p > 0, got {p}")));
    }
    if p < 0.5 {
        // reflection keeps the Lanczos sum in its accurate range
        let lg = ln_gamma(1.0 - p)?;
        return Ok((PI / (PI * p).sin()).ln() - lg);
    }
    let x = p - 1.0;
    let t = x + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + lanczos_sum(x).ln())
}

/// Γ(p) for p > 0 (Lanczos, g = 7).
pub fn gamma_fn(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite("gamma argument"));
    }
    if p <= 0.0 {
        return Err(Error::InvalidArgument(format!("gamma needs p > 0, got {p}")));
    }
    if p < 0.5 {
        return Ok(PI / ((PI * p).sin() * gamma_fn(1.0 - p)?));
    }
    if p > 171.0 {
        return Ok(ln_gamma(p)?.exp());
    }
    let x = p - 1.0;
    let t = x + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * lanczos_sum(x))
}

fn validate(p: f64, z: f64) -> Result<()> {
    if !p.is_finite() || !z.is_finite() {
        return Err(Error::NonFinite("Bessel argument"));
    }
    if z < 0.0 {
        return Err(Error::InvalidArgument(format!("Bessel I needs z >= 0, got {z}")));
    }
    if p < -1.0 {
        return Err(Error::InvalidArgument(format!("Bessel order must be >= -1, got {p}")));
    }
    Ok(())
}

/// I₋ₙ = Iₙ for integer n; only p = -1 needs remapping in the accepted range.
fn effective_order(p: f64) -> f64 {
    if p == -1.0 {
        1.0
    } else {
        p
    }
}

/// Σₖ (z²/4)ᵏ / (k! (p+1)ₖ), the series factor after (z/2)^p / Γ(p+1).
fn series_sum(p: f64, z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + p));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum
}

/// ln of Σₖ (−1)ᵏ aₖ(p) / zᵏ from the expansion I_p(z) ~ eᶻ/√(2πz)·(…).
fn hankel_log_sum(p: f64, z: f64) -> f64 {
    let mu = 4.0 * p * p;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        term *= -(mu - odd * odd) / (k as f64 * 8.0 * z);
        let mag = term.abs();
        if mag > prev {
            // asymptotic series started diverging
            break;
        }
        sum += term;
        if mag < 1e-17 * sum.abs() {
            break;
        }
        prev = mag;
    }
    sum.ln()
}

/// ln I_p(z) for z ≥ 0 and p ≥ −1.
pub fn log_bessel_i(p: f64, z: f64) -> Result<f64> {
    validate(p, z)?;
    let p = effective_order(p);
    if z == 0.0 {
        return Ok(if p == 0.0 {
            0.0
        } else if p > 0.0 || p.fract() == 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    if z <= SERIES_LIMIT {
        let lead = if p == 0.0 { 0.0 } else { p * (0.5 * z).ln() - ln_gamma(p + 1.0)? };
        Ok(lead + series_sum(p, z).ln())
    } else {
        Ok(z - 0.5 * (2.0 * PI * z).ln() + hankel_log_sum(p, z))
    }
}

/// I_p(z). Accurate to ~1e-14 relative for z ≤ 50; beyond that the value
/// overflows near z ≈ 713 and callers should stay in log space.
pub fn bessel_i(p: f64, z: f64) -> Result<f64> {
    validate(p, z)?;
    let p = effective_order(p);
    if z == 0.0 || z > SERIES_LIMIT {
        return Ok(log_bessel_i(p, z)?.exp());
    }
    let lead = if p == 0.0 { 1.0 } else { (0.5 * z).powf(p) / gamma_fn(p + 1.0)? };
    Ok(lead * series_sum(p, z))
}

/// Mean resultant length of a vMF(κ) on S^q: A_q(κ) = I_{(q+1)/2}(κ) / I_{(q−1)/2}(κ).
pub fn bessel_ratio(q: usize, kappa: f64) -> Result<f64> {
    if kappa == 0.0 {
        return Ok(0.0);
    }
    let p = (q as f64 - 1.0) / 2.0;
    Ok((log_bessel_i(p + 1.0, kappa)? - log_bessel_i(p, kappa)?).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Oracle: I₀ power series Σ (z²/4)^k / (k!)², 30 terms.
    fn i0_series_oracle(z: f64) -> f64 {
        let mut s = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            s += (z * z / 4.0).powi(k) / (fact * fact);
        }
        s
    }

    /// Oracle: the integral representation with t = cos φ, periodic trapezoid.
    fn bessel_quadrature_oracle(p: f64, z: f64) -> f64 {
        let n = 4000;
        let h = PI / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let phi = k as f64 * h;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            s += w * phi.sin().powf(2.0 * p) * (z * phi.cos()).exp();
        }
        (0.5 * z).powf(p) / (PI.sqrt() * gamma_fn(p + 0.5).unwrap()) * s * h
    }

    fn half_order_closed(z: f64) -> f64 {
        (2.0 / (PI * z)).sqrt() * z.sinh()
    }

    #[test]
    fn documented_values() {
        assert_eq!(bessel_i(0.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(bessel_i(0.5, 1.0).unwrap(), half_order_closed(1.0), max_relative = 1e-14);
        assert_relative_eq!(bessel_i(0.5, 1.0).unwrap(), 0.937_674_888, max_relative = 1e-8);
        assert_relative_eq!(bessel_i(0.0, 1.0).unwrap(), i0_series_oracle(1.0), max_relative = 1e-14);
        assert_relative_eq!(bessel_i(0.0, 1.0).unwrap(), 1.266_065_878, max_relative = 1e-9);
        assert_relative_eq!(bessel_i(2.0, 2.0).unwrap(), 0.688_948_448, max_relative = 1e-8);
    }

    #[test]
    fn log_values() {
        assert_eq!(log_bessel_i(0.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(log_bessel_i(0.0, 1.0).unwrap(), i0_series_oracle(1.0).ln(), max_relative = 1e-14);
        // half-integer closed form in log space
        let z: f64 = 100.0;
        let expected = z - 0.5 * (2.0 * PI * z).ln() + (-(-2.0 * z).exp()).ln_1p();
        assert_relative_eq!(log_bessel_i(0.5, z).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(log_bessel_i(0.5, z).unwrap(), 96.778_476, epsilon = 1e-6);
        // very large concentrations stay finite
        assert!(log_bessel_i(0.0, 1e6).unwrap().is_finite());
        assert!(log_bessel_i(0.5, 2e6).unwrap().is_finite());
    }

    #[test]
    fn switch_point_is_continuous() {
        for p in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let series = p * 25.0f64.ln() - ln_gamma(p + 1.0).unwrap() + series_sum(p, SERIES_LIMIT).ln();
            let hankel = SERIES_LIMIT - 0.5 * (2.0 * PI * SERIES_LIMIT).ln() + hankel_log_sum(p, SERIES_LIMIT);
            assert!((series - hankel).abs() < 1e-10, "p={p}: {series} vs {hankel}");
            let below = log_bessel_i(p, SERIES_LIMIT).unwrap();
            let above = log_bessel_i(p, SERIES_LIMIT * (1.0 + 1e-12)).unwrap();
            assert!((below - above).abs() < 1e-9);
        }
    }

    #[test]
    fn integral_representation_agrees() {
        for p in [0.0, 1.0, 2.0] {
            for z in [0.5, 2.0, 10.0] {
                let series = bessel_i(p, z).unwrap();
                let quad = bessel_quadrature_oracle(p, z);
                assert!(((series - quad) / series).abs() < 1e-8, "p={p} z={z}: {series} vs {quad}");
            }
        }
    }

    #[test]
    fn order_minus_one_is_order_one() {
        assert_eq!(bessel_i(-1.0, 3.0).unwrap(), bessel_i(1.0, 3.0).unwrap());
    }

    #[test]
    fn bad_arguments() {
        assert!(bessel_i(0.0, -1.0).is_err());
        assert!(bessel_i(-1.5, 1.0).is_err());
        assert!(log_bessel_i(0.0, f64::NAN).is_err());
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-2.0).is_err());
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma_fn(1.0).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(0.5).unwrap(), PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(5.0).unwrap(), 24.0, max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(1.5).unwrap(), 0.5 * PI.sqrt(), max_relative = 1e-13);
        assert_relative_eq!(gamma_fn(0.1).unwrap(), 9.513_507_698_668_732, max_relative = 1e-12);
        assert_relative_eq!(ln_gamma(100.0).unwrap(), 359.134_205_369_575_4, max_relative = 1e-13);
    }

    #[test]
    fn ratio_closed_forms() {
        for k in [1e-6, 0.1, 1.0, 10.0, 100.0, 1e4] {
            let s2 = bessel_ratio(2, k).unwrap();
            let closed = if k < 1e-3 { k / 3.0 } else { 1.0 / k.tanh() - 1.0 / k };
            assert_relative_eq!(s2, closed, max_relative = 1e-9);
        }
        assert_relative_eq!(bessel_ratio(2, 10.0).unwrap(), 0.900_000_008, max_relative = 1e-8);
    }

    proptest! {
        #[test]
        fn recurrence(p in 0.0f64..3.0, z in 0.1f64..40.0) {
            let lhs = bessel_i(p - 1.0, z).unwrap() - bessel_i(p + 1.0, z).unwrap();
            let rhs = 2.0 * p / z * bessel_i(p, z).unwrap();
            let scale = bessel_i(p - 1.0, z).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * scale.max(rhs.abs()), "{} vs {}", lhs, rhs);
        }

        #[test]
        fn half_integer_identity(z in 0.01f64..40.0) {
            let v = bessel_i(0.5, z).unwrap();
            let c = half_order_closed(z);
            prop_assert!(((v - c) / c).abs() < 1e-10);
        }

        #[test]
        fn log_and_direct_agree(p in prop::sample::select(vec![0.0, 0.5, 1.0, 2.0]), z in 0.0f64..700.0) {
            let direct = bessel_i(p, z).unwrap();
            let via_log = log_bessel_i(p, z).unwrap().exp();
            if direct > 0.0 && direct.is_finite() {
                prop_assert!(((direct - via_log) / direct).abs() < 1e-10);
            }
        }
    }
}
