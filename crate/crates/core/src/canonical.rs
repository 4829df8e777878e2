//! Canonical rings with closed-form moduli.

use serde::{Deserialize, Serialize};

use crate::error::{domain_err, invalid, Result};
use crate::geometry::{BoundaryComponent, DoublyConnectedDomain, Ray, UnboundedComponent};
use crate::scalar::Real;
use crate::special::{agm, grotzsch_mu};
use crate::Point;

/// Rings whose conformal modulus is known in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalRing {
    /// `{r < |z| < R}`.
    Annulus { r: f64, big_r: f64 },
    /// `{|z| > 1} ∖ [s, ∞)`, `s > 1`.
    Grotzsch { s: f64 },
    /// `ℂ ∖ ([−1, 0] ∪ [s, ∞))`, `s > 0`.
    Teichmuller { s: f64 },
    /// `ℂ ∖ ((−∞, −s] ∪ [−1, 1] ∪ [t, ∞))`, `s, t > 1`.
    DoubleTeich { s: f64, t: f64 },
    /// `ℂ ∖ ((−∞, 0] ∪ [a, b] ∪ [1, ∞))`, `0 < a < b < 1`.
    DoubleTeichUnit { a: f64, b: f64 },
}

/// How a [`ModulusEstimate`] was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusMethod {
    ClosedForm,
    /// Capacity solves on successively refined grids, coarsest first.
    Condenser { levels: Vec<LevelValue> },
    /// The domain is degenerate; the modulus is `+∞` by convention.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelValue {
    pub level: usize,
    pub h: f64,
    pub value: f64,
}

/// A modulus value with an absolute error bar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub method: ModulusMethod,
}

impl ModulusEstimate {
    pub fn closed_form(value: f64) -> Self {
        // Relative rounding of the AGM evaluation.
        ModulusEstimate { value, error_estimate: 1e-14 * value.abs(), method: ModulusMethod::ClosedForm }
    }

    pub fn degenerate() -> Self {
        ModulusEstimate { value: f64::INFINITY, error_estimate: 0.0, method: ModulusMethod::Degenerate }
    }
}

/// `log(R/r)`.
pub fn annulus_modulus<T: Real>(r: T, big_r: T) -> Result<T> {
    if !(r > T::zero() && big_r > r) {
        return Err(domain_err(format!("annulus radii must satisfy 0 < r < R, got {r:?}, {big_r:?}")));
    }
    Ok((big_r / r).ln())
}

/// Modulus of the Teichmüller ring `ℂ ∖ ([−1,0] ∪ [s,∞))`: `2 μ(1/√(1+s))`.
pub fn teichmuller_modulus<T: Real>(s: T) -> Result<T> {
    if !(s > T::zero()) || s.is_infinite() {
        return Err(domain_err(format!("Teichmüller parameter must be positive and finite, got {s:?}")));
    }
    // 2μ(r) with r = 1/√(1+s) and r′ = √(s/(1+s)) formed separately, so tiny
    // s does not round r to 1.
    let r = T::one() / (T::one() + s).sqrt();
    let rc = (s / (T::one() + s)).sqrt();
    Ok(T::PI() * agm(T::one(), rc) / agm(T::one(), r))
}

/// Modulus of the Grötzsch ring `{|z|>1} ∖ [s,∞)`: `μ(1/s)`.
pub fn grotzsch_modulus<T: Real>(s: T) -> Result<T> {
    if !(s > T::one()) || s.is_infinite() {
        return Err(domain_err(format!("Grötzsch parameter must exceed 1, got {s:?}")));
    }
    grotzsch_mu(T::one() / s)
}

/// Teichmüller parameter `s' = (s−1)(t−1) / (2(s+t))` of the ring conformally
/// equivalent to the double Teichmüller ring with parameters `s, t`.
pub fn double_teich_reduction<T: Real>(s: T, t: T) -> Result<T> {
    if !(s > T::one() && t > T::one()) {
        return Err(domain_err(format!("double Teichmüller parameters must exceed 1, got {s:?}, {t:?}")));
    }
    Ok((s - T::one()) * (t - T::one()) / (T::lit(2.0) * (s + t)))
}

pub fn double_teich_modulus<T: Real>(s: T, t: T) -> Result<T> {
    teichmuller_modulus(double_teich_reduction(s, t)?)
}

/// Teichmüller parameter `(1−b)/(b/a−1)` of the unit-normalised double
/// Teichmüller ring `ℂ ∖ ((−∞,0] ∪ [a,b] ∪ [1,∞))`, from the Möbius map `z ↦ z/(1−z)`.
pub fn double_teich_unit_reduction<T: Real>(a: T, b: T) -> Result<T> {
    if !(a > T::zero() && b > a && b < T::one()) {
        return Err(domain_err(format!("need 0 < a < b < 1, got {a:?}, {b:?}")));
    }
    Ok((T::one() - b) / (b / a - T::one()))
}

pub fn double_teich_unit_modulus<T: Real>(a: T, b: T) -> Result<T> {
    teichmuller_modulus(double_teich_unit_reduction(a, b)?)
}

/// Harmonic homeomorphisms `A(r,R) → A(r*,R*)` exist iff `R*/r* ≥ ½(R/r + r/R)`.
pub fn nitsche_existence<T: Real>(ratio: T, target_ratio: T) -> bool {
    target_ratio >= nitsche_bound(ratio)
}

/// `½(ρ + 1/ρ)`, evaluated as `1 + (ρ−1)²/(2ρ)` to keep the excess over 1 accurate
/// for ratios close to 1.
pub fn nitsche_bound<T: Real>(ratio: T) -> T {
    let d = ratio - T::one();
    T::one() + d * d / (T::lit(2.0) * ratio)
}

/// Closed-form modulus of a canonical ring.
pub fn modulus_canonical(ring: &CanonicalRing) -> Result<ModulusEstimate> {
    ring.validate()?;
    let value = match *ring {
        CanonicalRing::Annulus { r, big_r } => annulus_modulus(r, big_r)?,
        CanonicalRing::Grotzsch { s } => grotzsch_modulus(s)?,
        CanonicalRing::Teichmuller { s } => teichmuller_modulus(s)?,
        CanonicalRing::DoubleTeich { s, t } => double_teich_modulus(s, t)?,
        CanonicalRing::DoubleTeichUnit { a, b } => double_teich_unit_modulus(a, b)?,
    };
    Ok(ModulusEstimate::closed_form(value))
}

/// Vertex count used when a round boundary has to be sampled as a polygon.
pub const DEFAULT_CIRCLE_VERTICES: usize = 4096;

/// Vertices of a regular polygon with the same area as the circle `|z − c| = radius`.
pub fn circle_polygon(center: Point, radius: f64, n: usize) -> Vec<Point> {
    let step = std::f64::consts::TAU / n as f64;
    let r_eff = radius * (step / step.sin()).sqrt();
    (0..n).map(|k| center + Point::from_polar(r_eff, k as f64 * step)).collect()
}

impl CanonicalRing {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CanonicalRing::Annulus { r, big_r } => r > 0.0 && big_r > r && big_r.is_finite(),
            CanonicalRing::Grotzsch { s } => s > 1.0 && s.is_finite(),
            CanonicalRing::Teichmuller { s } => s > 0.0 && s.is_finite(),
            CanonicalRing::DoubleTeich { s, t } => s > 1.0 && t > 1.0 && s.is_finite() && t.is_finite(),
            CanonicalRing::DoubleTeichUnit { a, b } => a > 0.0 && b > a && b < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(domain_err(format!("ring parameters out of range: {self:?}")))
        }
    }

    /// Name used in the domain file format.
    pub fn name(&self) -> &'static str {
        match self {
            CanonicalRing::Annulus { .. } => "annulus",
            CanonicalRing::Grotzsch { .. } => "grotzsch",
            CanonicalRing::Teichmuller { .. } => "teichmuller",
            CanonicalRing::DoubleTeich { .. } => "double_teichmuller",
            CanonicalRing::DoubleTeichUnit { .. } => "double_teichmuller_unit",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            CanonicalRing::Annulus { r, big_r } => vec![r, big_r],
            CanonicalRing::Grotzsch { s } | CanonicalRing::Teichmuller { s } => vec![s],
            CanonicalRing::DoubleTeich { s, t } => vec![s, t],
            CanonicalRing::DoubleTeichUnit { a, b } => vec![a, b],
        }
    }

    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(invalid(format!("ring `{name}` takes {n} parameters, got {}", params.len())))
            }
        };
        let ring = match name {
            "annulus" => {
                need(2)?;
                CanonicalRing::Annulus { r: params[0], big_r: params[1] }
            }
            "grotzsch" => {
                need(1)?;
                CanonicalRing::Grotzsch { s: params[0] }
            }
            "teichmuller" => {
                need(1)?;
                CanonicalRing::Teichmuller { s: params[0] }
            }
            "double_teichmuller" => {
                need(2)?;
                CanonicalRing::DoubleTeich { s: params[0], t: params[1] }
            }
            "double_teichmuller_unit" => {
                need(2)?;
                CanonicalRing::DoubleTeichUnit { a: params[0], b: params[1] }
            }
            other => return Err(invalid(format!("unknown ring `{other}`"))),
        };
        ring.validate()?;
        Ok(ring)
    }

    /// Whether both complement components lie on one line.
    pub fn is_collinear(&self) -> bool {
        !matches!(self, CanonicalRing::Annulus { .. } | CanonicalRing::Grotzsch { .. })
    }

    /// Polygonal realisation; round boundaries get `circle_vertices` vertices.
    pub fn realize_with(&self, circle_vertices: usize) -> Result<DoublyConnectedDomain> {
        self.validate()?;
        let re = |x: f64| Point::new(x, 0.0);
        let east = Point::new(1.0, 0.0);
        let west = Point::new(-1.0, 0.0);
        let (bounded, unbounded) = match *self {
            CanonicalRing::Annulus { r, big_r } => (
                BoundaryComponent::Polygon(circle_polygon(Point::new(0.0, 0.0), r, circle_vertices)),
                UnboundedComponent::ExteriorOf(circle_polygon(Point::new(0.0, 0.0), big_r, circle_vertices)),
            ),
            CanonicalRing::Grotzsch { s } => (
                BoundaryComponent::Polygon(circle_polygon(Point::new(0.0, 0.0), 1.0, circle_vertices)),
                UnboundedComponent::Rays(vec![Ray::new(re(s), east)?]),
            ),
            CanonicalRing::Teichmuller { s } => (
                BoundaryComponent::Segment(re(-1.0), re(0.0)),
                UnboundedComponent::Rays(vec![Ray::new(re(s), east)?]),
            ),
            CanonicalRing::DoubleTeich { s, t } => (
                BoundaryComponent::Segment(re(-1.0), re(1.0)),
                UnboundedComponent::Rays(vec![Ray::new(re(-s), west)?, Ray::new(re(t), east)?]),
            ),
            CanonicalRing::DoubleTeichUnit { a, b } => (
                BoundaryComponent::Segment(re(a), re(b)),
                UnboundedComponent::Rays(vec![Ray::new(re(0.0), west)?, Ray::new(re(1.0), east)?]),
            ),
        };
        DoublyConnectedDomain::new(bounded, unbounded, Some(*self))
    }

    pub fn realize(&self) -> Result<DoublyConnectedDomain> {
        self.realize_with(DEFAULT_CIRCLE_VERTICES)
    }
}
