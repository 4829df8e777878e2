//! Gauss–Jacobi rules on `[−1, 1]` by the Golub–Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Nodes in increasing order with matching positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Exponents of the weight `(1 − x)^alpha (1 + x)^beta`.
    pub alpha: f64,
    pub beta: f64,
}

impl GaussRule {
    /// `Σ wₖ f(xₖ)`.
    pub fn integrate<T, F>(&self, f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: Fn(f64) -> T,
    {
        self.nodes.iter().zip(&self.weights).fold(T::default(), |acc, (&x, &w)| acc + f(x) * w)
    }
}

/// Integral of `(1 − x)^alpha (1 + x)^beta` over `[−1, 1]`.
pub fn jacobi_weight_integral(alpha: f64, beta: f64) -> f64 {
    ((alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0) + ln_gamma(beta + 1.0)
        - ln_gamma(alpha + beta + 2.0))
    .exp()
}

/// `n`-point Gauss rule for the weight `(1 − x)^alpha (1 + x)^beta`, exact for
/// polynomials of degree `2n − 1`. Requires `alpha, beta > −1`.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> Result<GaussRule> {
    if n == 0 || !(alpha > -1.0) || !(beta > -1.0) {
        return Err(invalid(format!("gauss_jacobi needs n ≥ 1 and exponents > −1, got {n}, {alpha}, {beta}")));
    }
    let ab = alpha + beta;
    // Jacobi matrix of the orthonormal recurrence.
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        jm[(k, k)] = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        if k + 1 < n {
            let m = kf + 1.0;
            let s = 2.0 * m + ab;
            let b2 = if k == 0 {
                // The general formula is 0/0 at alpha + beta = −1.
                4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            jm[(k, k + 1)] = b2.sqrt();
            jm[(k + 1, k)] = b2.sqrt();
        }
    }
    let mu0 = jacobi_weight_integral(alpha, beta);
    let eig = SymmetricEigen::new(jm);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(GaussRule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect(), alpha, beta })
}

pub fn gauss_legendre(n: usize) -> Result<GaussRule> {
    gauss_jacobi(n, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use statrs::function::beta::beta;

    /// `∫ (1−x)^a (1+x)^b x^k dx` by the binomial expansion of `x = 2u − 1` into
    /// Beta integrals, with the sum of absolute terms as a cancellation scale.
    fn moment(a: f64, b: f64, k: u32) -> (f64, f64) {
        let (mut sum, mut scale) = (0.0, 0.0);
        for j in 0..=k {
            let binom = (0..j).fold(1.0, |c, i| c * (k - i) as f64 / (i + 1) as f64);
            let sign = if (k - j) % 2 == 0 { 1.0 } else { -1.0 };
            let term = binom * 2f64.powi(j as i32) * beta(a + 1.0, b + j as f64 + 1.0);
            sum += sign * term;
            scale += term;
        }
        let f = 2f64.powf(a + b + 1.0);
        (f * sum, f * scale)
    }

    #[test]
    fn three_point_legendre() {
        let r = gauss_legendre(3).unwrap();
        let x = (0.6_f64).sqrt();
        for (got, want) in r.nodes.iter().zip([-x, 0.0, x]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in r.weights.iter().zip([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-14);
        }
    }

    #[test]
    fn chebyshev_first_kind_is_recovered() {
        // a = b = −1/2: nodes cos((2k−1)π/2n), equal weights π/n.
        let n = 7;
        let r = gauss_jacobi(n, -0.5, -0.5).unwrap();
        for k in 0..n {
            let want = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
            assert!((r.nodes[k] - want).abs() < 1e-14);
            assert_relative_eq!(r.weights[k], std::f64::consts::PI / n as f64, max_relative = 1e-13);
        }
    }

    #[test]
    fn odd_degree_rules_are_exact() {
        for n in [1, 2, 5, 9, 64] {
            let r = gauss_jacobi(n, 0.3, -0.7).unwrap();
            for k in 0..(2 * n as u32).min(12) {
                let q = r.integrate(|x| x.powi(k as i32));
                let (m, scale) = moment(0.3, -0.7, k);
                assert!((q - m).abs() < 1e-13 * scale, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(gauss_jacobi(4, -1.0, 0.0).is_err());
        assert!(gauss_jacobi(0, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn polynomial_exactness(a in -0.9..2.0_f64, b in -0.9..2.0_f64, n in 1usize..12) {
            let r = gauss_jacobi(n, a, b).unwrap();
            prop_assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(r.weights.iter().all(|&w| w > 0.0));
            for k in 0..(2 * n as u32) {
                let q = r.integrate(|x| x.powi(k as i32));
                let (m, scale) = moment(a, b, k);
                prop_assert!((q - m).abs() <= 1e-12 * scale, "k={} {} vs {}", k, q, m);
            }
        }
    }
}
