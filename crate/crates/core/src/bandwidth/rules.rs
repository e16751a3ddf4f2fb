//! Closed-form selectors: the von Mises Taylor rule (h₂) and the
//! directional rule of thumb (h₇), plus maximum-likelihood concentration.

use crate::error::{Error, Result};
use crate::special::{bessel_ratio, log_bessel_i};
use crate::sphere::{Dim, UnitVector};
use crate::vmf::mean_resultant;

pub const KAPPA_BRACKET: (f64, f64) = (1e-8, 1e6);
/// Mean resultant lengths at or above this are treated as a point mass.
pub const POINT_MASS_RBAR: f64 = 1.0 - 1e-10;

fn a_ratio(dim: Dim, kappa: f64) -> f64 {
    match dim {
        // coth κ − 1/κ, with the small-κ series to avoid cancellation
        Dim::Sphere if kappa < 1e-3 => kappa / 3.0 - kappa.powi(3) / 45.0,
        Dim::Sphere => 1.0 / kappa.tanh() - 1.0 / kappa,
        Dim::Circle => bessel_ratio(1, kappa).expect("kappa in bracket"),
    }
}

/// Solves A_q(κ) = r̄ on the ML bracket by bisection in log κ.
pub fn inverse_a(dim: Dim, rbar: f64) -> Result<f64> {
    if !rbar.is_finite() || !(0.0..=1.0).contains(&rbar) {
        return Err(Error::InvalidArgument(format!("mean resultant length {rbar} outside [0, 1]")));
    }
    if rbar >= POINT_MASS_RBAR {
        return Err(Error::PointMass);
    }
    let (lo, hi) = KAPPA_BRACKET;
    if a_ratio(dim, lo) >= rbar {
        return Err(Error::UniformData(rbar));
    }
    if a_ratio(dim, hi) <= rbar {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if a_ratio(dim, m.exp()) < rbar {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Maximum-likelihood vMF concentration of a sample.
pub fn kappa_ml(sample: &[UnitVector]) -> Result<f64> {
    let (rbar, _) = mean_resultant(sample)?;
    inverse_a(sample[0].dim(), rbar)
}

/// h₂ = [4√π I₀(κ)² / (3κ² I₂(2κ) n)]^{1/5}, circle only.
pub fn h2_formula(kappa: f64, n: usize) -> Result<f64> {
    let l = 4f64.ln() + 0.5 * std::f64::consts::PI.ln() + 2.0 * log_bessel_i(0.0, kappa)?
        - 3f64.ln()
        - 2.0 * kappa.ln()
        - log_bessel_i(2.0, 2.0 * kappa)?
        - (n as f64).ln();
    Ok((l / 5.0).exp())
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Rule of thumb on S¹: [4√π I₀(κ)² / (κ[I₁(2κ) + 3κ I₂(2κ)] n)]^{1/5}.
pub fn h7_circle_formula(kappa: f64, n: usize) -> Result<f64> {
    let denom = log_add(log_bessel_i(1.0, 2.0 * kappa)?, (3.0 * kappa).ln() + log_bessel_i(2.0, 2.0 * kappa)?);
    let l = 4f64.ln() + 0.5 * std::f64::consts::PI.ln() + 2.0 * log_bessel_i(0.0, kappa)?
        - kappa.ln()
        - denom
        - (n as f64).ln();
    Ok((l / 5.0).exp())
}

/// (1 + 4κ²) sinh 2κ − 2κ cosh 2κ for κ < 1, as the positive series
/// Σ_{m≥1} 4m² x^{2m+1}/(2m+1)!, x = 2κ (the closed form cancels badly).
fn sphere_rot_denominator_series(kappa: f64) -> f64 {
    let x = 2.0 * kappa;
    let mut term = x; // x^{2m+1}/(2m+1)! at m = 0
    let mut s = 0.0;
    for m in 1..60 {
        term *= x * x / ((2 * m) as f64 * (2 * m + 1) as f64);
        let add = 4.0 * (m * m) as f64 * term;
        s += add;
        if add < 1e-17 * s {
            break;
        }
    }
    s
}

/// Rule of thumb on S²: [8 sinh²κ / (κ[(1+4κ²) sinh 2κ − 2κ cosh 2κ] n)]^{1/6}.
/// Exponentials are factored out for large κ.
pub fn h7_sphere_formula(kappa: f64, n: usize) -> Result<f64> {
    let n = n as f64;
    let ratio = if kappa < 1.0 {
        8.0 * kappa.sinh().powi(2) / (kappa * sphere_rot_denominator_series(kappa) * n)
    } else {
        let e2 = (-2.0 * kappa).exp();
        let e4 = e2 * e2;
        4.0 * (1.0 - e2).powi(2) / (kappa * n * ((1.0 + 4.0 * kappa * kappa) * (1.0 - e4) - 2.0 * kappa * (1.0 + e4)))
    };
    Ok(ratio.powf(1.0 / 6.0))
}

pub fn h2_taylor(sample: &[UnitVector]) -> Result<f64> {
    let first = sample.first().ok_or(Error::EmptySet)?;
    if first.dim() != Dim::Circle {
        return Err(Error::UnsupportedDimension { selector: "h2", dim: first.dim() });
    }
    h2_formula(kappa_ml(sample)?, sample.len())
}

pub fn h7_rot(sample: &[UnitVector]) -> Result<f64> {
    let first = sample.first().ok_or(Error::EmptySet)?;
    let kappa = kappa_ml(sample)?;
    match first.dim() {
        Dim::Circle => h7_circle_formula(kappa, sample.len()),
        Dim::Sphere => h7_sphere_formula(kappa, sample.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::special::bessel_i;
    use crate::sphere::{angle_to_unit, Rotation};
    use crate::vmf::VonMisesFisher;
    use approx::assert_relative_eq;

    #[test]
    fn h2_example() {
        // direct evaluation with series Bessel values
        let i0 = bessel_i(0.0, 1.0).unwrap();
        let i2 = bessel_i(2.0, 2.0).unwrap();
        assert_relative_eq!(i2, 0.688_948, epsilon = 1e-6);
        let oracle = (4.0 * std::f64::consts::PI.sqrt() * i0 * i0 / (3.0 * i2 * 100.0)).powf(0.2);
        assert_relative_eq!(h2_formula(1.0, 100).unwrap(), oracle, max_relative = 1e-12);
        assert_relative_eq!(h2_formula(1.0, 100).unwrap(), 0.560, epsilon = 5e-4);
        // n^{-1/5} law
        let r = h2_formula(3.0, 1000).unwrap() / h2_formula(3.0, 32_000).unwrap();
        assert_relative_eq!(r, 32f64.powf(0.2), max_relative = 1e-12);
    }

    #[test]
    fn h7_examples() {
        let (s1, s2, c2) = (1f64.sinh(), 2f64.sinh(), 2f64.cosh());
        let oracle = (8.0 * s1 * s1 / ((5.0 * s2 - 2.0 * c2) * 100.0)).powf(1.0 / 6.0);
        assert_relative_eq!(h7_sphere_formula(1.0, 100).unwrap(), oracle, max_relative = 1e-12);
        assert_relative_eq!(h7_sphere_formula(1.0, 100).unwrap(), 0.467, epsilon = 5e-4);
        // series branch agrees with the closed form where both are accurate
        for k in [0.3, 0.7, 0.999] {
            let direct = 8.0 * f64::sinh(k).powi(2)
                / (k * ((1.0 + 4.0 * k * k) * (2.0 * k).sinh() - 2.0 * k * (2.0 * k).cosh()) * 50.0);
            assert_relative_eq!(h7_sphere_formula(k, 50).unwrap(), direct.powf(1.0 / 6.0), max_relative = 1e-10);
        }
        // large-κ branch matches the closed form below overflow
        for k in [1.5, 10.0, 29.0, 300.0] {
            let direct = 8.0 * f64::sinh(k).powi(2)
                / (k * ((1.0 + 4.0 * k * k) * (2.0 * k).sinh() - 2.0 * k * (2.0 * k).cosh()) * 50.0);
            assert_relative_eq!(h7_sphere_formula(k, 50).unwrap(), direct.powf(1.0 / 6.0), max_relative = 1e-10);
        }
        assert!(h7_sphere_formula(1e5, 50).unwrap().is_finite());
        let r = h7_sphere_formula(4.0, 100).unwrap() / h7_sphere_formula(4.0, 6400).unwrap();
        assert_relative_eq!(r, 64f64.powf(1.0 / 6.0), max_relative = 1e-12);

        let c = h7_circle_formula(1.0, 100).unwrap();
        let i0 = bessel_i(0.0, 1.0).unwrap();
        let oracle = (4.0 * std::f64::consts::PI.sqrt() * i0 * i0
            / (bessel_i(1.0, 2.0).unwrap() + 3.0 * bessel_i(2.0, 2.0).unwrap())
            / 100.0)
            .powf(0.2);
        assert_relative_eq!(c, oracle, max_relative = 1e-12);
        assert!(c > 0.0 && (c - h2_formula(1.0, 100).unwrap()).abs() > 1e-3);
    }

    #[test]
    fn ml_concentration() {
        for (dim, kappa) in [(Dim::Circle, 0.5), (Dim::Circle, 5.0), (Dim::Sphere, 2.0), (Dim::Sphere, 200.0)] {
            let r = match dim {
                Dim::Circle => bessel_ratio(1, kappa).unwrap(),
                Dim::Sphere => bessel_ratio(2, kappa).unwrap(),
            };
            assert_relative_eq!(inverse_a(dim, r).unwrap(), kappa, max_relative = 1e-8);
        }
        let same = vec![angle_to_unit(1.0).unwrap(); 10];
        assert_eq!(kappa_ml(&same), Err(Error::PointMass));
        assert_eq!(h2_taylor(&same), Err(Error::PointMass));
        let pair = vec![angle_to_unit(0.0).unwrap(), angle_to_unit(std::f64::consts::PI).unwrap()];
        assert!(matches!(kappa_ml(&pair), Err(Error::UniformData(_))));
    }

    #[test]
    fn rotation_invariant() {
        let m = crate::vmf::load_benchmark("S5").unwrap();
        let xs = m.sample(300, &mut stream(1, &[]));
        let rot = Rotation::about_axis([1.0, 2.0, 3.0], 0.7);
        let ys: Vec<_> = xs.iter().map(|x| rot.apply(x)).collect();
        assert_relative_eq!(h7_rot(&xs).unwrap(), h7_rot(&ys).unwrap(), max_relative = 1e-10);
        let c = VonMisesFisher::new(angle_to_unit(0.5).unwrap(), 3.0).unwrap().sample(200, &mut stream(2, &[]));
        let rot = Rotation::about_axis([0.0, 0.0, 1.0], 2.1);
        let d: Vec<_> = c.iter().map(|x| rot.apply(x)).collect();
        assert_relative_eq!(h2_taylor(&c).unwrap(), h2_taylor(&d).unwrap(), max_relative = 1e-10);
        assert_relative_eq!(h7_rot(&c).unwrap(), h7_rot(&d).unwrap(), max_relative = 1e-10);
        assert!(h2_taylor(&xs).is_err());
    }
}
