//! Standard-normal density, distribution and quantile functions.
//!
//! `Φ` goes through the complementary error function (`libm::erfc`, a port
//! of the FreeBSD msun implementation) so that the lower tail keeps full
//! relative precision: `Φ(z) = ½·erfc(−z/√2)`. The quantile is a bracketed
//! Newton iteration on that same `Φ`, so the two never disagree by more than
//! the iteration tolerance.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density `φ(z) = exp(−z²/2)/√(2π)`.
#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF. Accepts `±∞` and returns exactly `0` / `1` there.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
    }
}

/// Absolute tolerance on `|Φ(z) − p|` reached by [`std_normal_quantile`].
pub const QUANTILE_TOL: f64 = 1e-12;

/// Inverse of [`std_normal_cdf`] on `(0, 1)`.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile requires 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }

    // Φ(±38.5) is 0/1 in double precision, so this brackets every p.
    let (mut lo, mut hi) = (-38.5_f64, 38.5_f64);
    let mut z = initial_guess(p);
    for _ in 0..200 {
        let f = std_normal_cdf(z) - p;
        if f == 0.0 {
            return Ok(z);
        }
        if f < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = std_normal_pdf(z);
        let mut next = z - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - z).abs();
        z = next;
        if step <= 4.0 * f64::EPSILON * z.abs().max(1.0) || hi - lo <= f64::EPSILON * z.abs() {
            break;
        }
    }
    Ok(z)
}

// Tail-aware starting point: `√(−2 ln p)` asymptotics outside the central
// region, a scaled linear guess inside it.
fn initial_guess(p: f64) -> f64 {
    let q = p.min(1.0 - p);
    let z = if q < 0.1 {
        let t = (-2.0 * q.ln()).sqrt();
        -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t)
            / (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t))
    } else {
        (q - 0.5) * (2.0 * PI).sqrt()
    };
    if p < 0.5 {
        z
    } else {
        -z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Composite Simpson of the density on [0, z]; independent of erfc.
    fn cdf_by_quadrature(z: f64) -> f64 {
        let n = 4000;
        let h = z / n as f64;
        let mut s = std_normal_pdf(0.0) + std_normal_pdf(z);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * std_normal_pdf(i as f64 * h);
        }
        0.5 + s * h / 3.0
    }

    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf_by_quadrature(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn pdf_values() {
        assert_eq!(std_normal_pdf(0.0), 0.398_942_280_401_432_7);
        assert!((std_normal_pdf(4.0) - 1.3383e-4).abs() < 1e-8);
        assert_eq!(std_normal_pdf(1.7), std_normal_pdf(-1.7));
    }

    #[test]
    fn cdf_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_eq!(std_normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(std_normal_cdf(f64::NEG_INFINITY), 0.0);
        let oracle = cdf_by_quadrature(1.0);
        assert!((std_normal_cdf(1.0) - oracle).abs() < 1e-12, "{oracle}");
        assert!((std_normal_cdf(1.0) - 0.841345).abs() < 1e-6);
    }

    // Mills ratio (1 − Φ(z))/φ(z) by its continued fraction
    // 1/(z + 1/(z + 2/(z + 3/(z + …)))), evaluated bottom-up.
    fn upper_tail_by_continued_fraction(z: f64) -> f64 {
        let mut acc = z;
        for k in (1..400).rev() {
            acc = z + k as f64 / acc;
        }
        std_normal_pdf(z) / acc
    }

    #[test]
    fn cdf_tail_relative_accuracy() {
        for z in [3.0, 4.0, 5.5, 6.0, 7.25, 8.0] {
            let want = upper_tail_by_continued_fraction(z);
            let rel = (std_normal_cdf(-z) - want).abs() / want;
            assert!(rel < 1e-14, "z={z} rel={rel:e}");
        }
    }

    #[test]
    fn quantile_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let z = std_normal_quantile(std_normal_cdf(-4.0)).unwrap();
        assert!((z + 4.0).abs() < 1e-9, "{z}");
        let oracle = quantile_by_bisection(0.975);
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - oracle).abs() < 1e-9);
        assert!((z - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(std_normal_quantile(p), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn quantile_roundtrip_grid() {
        let n = 10_000;
        for i in 0..=n {
            let p = 1e-6 + (1.0 - 2e-6) * i as f64 / n as f64;
            let z = std_normal_quantile(p).unwrap();
            assert!((std_normal_cdf(z) - p).abs() <= 1e-10, "p={p}");
        }
        for k in 1..300 {
            let p = 10f64.powf(-(k as f64));
            let z = std_normal_quantile(p).unwrap();
            // One ulp in z moves Φ by ~|z|·ulp(z) relative in the far tail.
            assert!((std_normal_cdf(z) - p).abs() <= 1e-11 * p, "p={p}");
        }
    }

    proptest! {
        #[test]
        fn cdf_derivative_is_pdf(z in -8.0f64..8.0) {
            let h = 1e-5;
            let fd = (std_normal_cdf(z + h) - std_normal_cdf(z - h)) / (2.0 * h);
            prop_assert!((fd - std_normal_pdf(z)).abs() <= 1e-6);
        }

        #[test]
        fn cdf_symmetry_and_monotone(z in -30.0f64..30.0, dz in 0.0f64..1.0) {
            prop_assert!((std_normal_cdf(-z) - (1.0 - std_normal_cdf(z))).abs() < 1e-15);
            prop_assert!(std_normal_cdf(z + dz) >= std_normal_cdf(z));
            let v = std_normal_cdf(z);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
