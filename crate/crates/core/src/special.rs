//! Complete elliptic integrals and the Grötzsch ring modulus function, via the
//! arithmetic–geometric mean.

use crate::error::{domain_err, Result};
use crate::scalar::Real;

const MAX_AGM_ITER: usize = 64;

/// Arithmetic–geometric mean of two nonnegative numbers.
///
/// Iterates until successive means agree to a few ulps (1e-15 relative in `f64`).
pub fn agm<T: Real>(a: T, b: T) -> T {
    let mut a = a;
    let mut b = b;
    if a.is_zero() || b.is_zero() {
        return T::zero();
    }
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..MAX_AGM_ITER {
        if (a - b).abs() <= tol * a.abs().max(b.abs()) {
            break;
        }
        let mean = (a + b) / T::lit(2.0);
        b = (a * b).sqrt();
        a = mean;
    }
    (a + b) / T::lit(2.0)
}

/// Complete elliptic integral of the first kind in the modulus convention,
/// `K(k) = ∫₀^{π/2} dθ / √(1 − k² sin²θ)`, for `0 ≤ k < 1`.
pub fn ellip_k<T: Real>(k: T) -> Result<T> {
    if !(k >= T::zero() && k < T::one()) {
        return Err(domain_err(format!("elliptic modulus {k:?} outside [0, 1)")));
    }
    Ok(T::FRAC_PI_2() / agm(T::one(), complementary(k)))
}

/// `√(1 − k²)` without cancellation near `k = 1`.
#[inline]
pub fn complementary<T: Real>(k: T) -> T {
    ((T::one() - k) * (T::one() + k)).sqrt()
}

/// Grötzsch ring modulus function
/// `μ(r) = (π/2) K(√(1−r²)) / K(r)`, the modulus of the unit disk slit along `[0, r]`.
///
/// Both integrals reduce to AGMs, so `μ(r) = (π/2) · agm(1, √(1−r²)) / agm(1, r)`.
pub fn grotzsch_mu<T: Real>(r: T) -> Result<T> {
    if !(r > T::zero() && r < T::one()) {
        return Err(domain_err(format!("grotzsch_mu argument {r:?} outside (0, 1)")));
    }
    Ok(T::FRAC_PI_2() * agm(T::one(), complementary(r)) / agm(T::one(), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    #[test]
    fn agm_of_equal_arguments() {
        assert_eq!(agm(2.0_f64, 2.0), 2.0);
        // Reciprocal of Gauss's constant.
        assert_relative_eq!(agm(1.0_f64, 2.0_f64.sqrt()), 1.198_140_234_735_592_2, max_relative = 1e-15);
    }

    #[test]
    fn k_at_zero_is_half_pi() {
        assert_relative_eq!(ellip_k(0.0_f64).unwrap(), PI / 2.0, max_relative = 1e-15);
        assert!(ellip_k(1.0_f64).is_err());
    }

    #[test]
    fn k_matches_quadrature() {
        // Direct midpoint quadrature of the defining integral.
        let k = 0.8_f64;
        let n = 200_000;
        let h = PI / 2.0 / n as f64;
        let q: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * h;
                h / (1.0 - k * k * t.sin().powi(2)).sqrt()
            })
            .sum();
        assert_relative_eq!(ellip_k(k).unwrap(), q, max_relative = 1e-10);
    }

    #[test]
    fn mu_self_dual_point() {
        assert_relative_eq!(grotzsch_mu(FRAC_1_SQRT_2).unwrap(), PI / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn mu_functional_identity_at_half() {
        let v = grotzsch_mu(0.5_f64).unwrap();
        let w = grotzsch_mu(3.0_f64.sqrt() / 2.0).unwrap();
        assert!((v * w - PI * PI / 4.0).abs() < 1e-10);
    }

    #[test]
    fn mu_small_argument_asymptote() {
        let r = 1e-6_f64;
        assert!((grotzsch_mu(r).unwrap() - (4.0 / r).ln()).abs() < 1e-6);
    }

    #[test]
    fn mu_rejects_out_of_range() {
        for r in [0.0, 1.0, -0.5, 2.0, f64::NAN] {
            assert!(grotzsch_mu(r).is_err(), "{r}");
        }
    }

    #[test]
    fn mu_strictly_decreasing() {
        let vals: Vec<f64> = (1..1000).map(|i| grotzsch_mu(i as f64 / 1000.0).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn works_in_single_precision() {
        let v = grotzsch_mu(std::f32::consts::FRAC_1_SQRT_2).unwrap();
        assert!((v - std::f32::consts::FRAC_PI_2).abs() < 1e-5);
    }
}
