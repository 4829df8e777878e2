//! Harmonic maps between doubly connected domains and their verification.
//!
//! Every model here is harmonic by construction; [`verify_map`] checks the
//! remaining homeomorphism conditions numerically: a positive Jacobian margin
//! `|h_z| − |h_z̄|`, boundary correspondence and winding degree one.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{circle_polygon, CanonicalRing};
use crate::error::{domain_err, invalid, Error, Result};
use crate::geometry::{point_segment_distance_sqr, DoublyConnectedDomain, Region, UnboundedComponent};
use crate::sc::ScShearMap;
use crate::Point;

pub const DEFAULT_TRUNCATION: usize = 64;
pub const DEFAULT_SAMPLES: usize = 512;

/// Harmonic function on `{1 < |z| < ρ}`:
///
/// ```text
/// h = A_0 + B_0 log|z| + Σ_{n≠0} (A_n r^{|n|} + B_n r^{−|n|}) e^{inθ}.
/// ```
///
/// Coefficients are stored scaled to the circle where each term is largest,
/// `a_n = A_n ρ^{|n|}` and `b_n = B_n`, so high frequencies neither overflow
/// nor underflow; [`Self::coefficient`] returns the unscaled pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusHarmonicMap {
    pub rho: f64,
    pub truncation: usize,
    /// `a_n` for `n = −N..=N`, indexed by `n + N`; `a_0 = A_0`.
    pub outer_scaled: Vec<Point>,
    /// `B_n` for `n = −N..=N`, indexed by `n + N`.
    pub inner: Vec<Point>,
    /// Root energy of the scaled coefficients with `N/2 < |n| ≤ N`.
    pub spectral_tail: f64,
    /// Largest mismatch between `h` and the data at the sample angles.
    pub boundary_residual: f64,
}

/// `(1/M) Σ_k f_k e^{−inθ_k}` for `n = −N..=N`.
fn dft(data: &[Point], n_max: usize) -> Vec<Point> {
    let m = data.len();
    (-(n_max as i64)..=n_max as i64)
        .map(|n| {
            let mut s = Point::new(0.0, 0.0);
            for (k, f) in data.iter().enumerate() {
                // Reduce the phase index first so large n·k keeps full precision.
                let idx = (n * k as i64).rem_euclid(m as i64) as f64;
                s += f * Point::from_polar(1.0, -2.0 * PI * idx / m as f64);
            }
            s / m as f64
        })
        .collect()
}

/// Equispaced samples `f(r e^{2πik/M})`, `k = 0..M`.
pub fn sample_circle(r: f64, m: usize, f: impl Fn(Point) -> Point) -> Vec<Point> {
    (0..m).map(|k| f(Point::from_polar(r, 2.0 * PI * k as f64 / m as f64))).collect()
}

/// Dirichlet problem on `A(1, ρ)` with equispaced boundary samples (the first
/// sample at angle 0), solved frequency by frequency.
pub fn solve_annulus_dirichlet(rho: f64, inner_data: &[Point], outer_data: &[Point], truncation: usize) -> Result<AnnulusHarmonicMap> {
    if !(rho > 1.0) || !rho.is_finite() {
        return Err(domain_err(format!("outer radius must exceed 1, got {rho}")));
    }
    let samples = inner_data.len().min(outer_data.len());
    if samples < 2 * truncation + 1 {
        return Err(Error::Undersampled { samples, truncation });
    }
    let n = truncation;
    let c_in = dft(inner_data, n);
    let c_out = dft(outer_data, n);
    let mut outer_scaled = vec![Point::new(0.0, 0.0); 2 * n + 1];
    let mut inner = vec![Point::new(0.0, 0.0); 2 * n + 1];
    outer_scaled[n] = c_in[n];
    inner[n] = (c_out[n] - c_in[n]) / rho.ln();
    for k in 1..=n {
        let q = rho.powi(-(k as i32));
        let det = 1.0 - q * q;
        for idx in [n + k, n - k] {
            // a q + b = c_in at r = 1, a + b q = c_out at r = ρ.
            outer_scaled[idx] = (c_out[idx] - c_in[idx] * q) / det;
            inner[idx] = (c_in[idx] - c_out[idx] * q) / det;
        }
    }
    let tail = (n / 2 + 1..=n)
        .flat_map(|k| [n + k, n - k])
        .map(|i| outer_scaled[i].norm_sqr() + inner[i].norm_sqr())
        .sum::<f64>()
        .sqrt();
    let mut map = AnnulusHarmonicMap { rho, truncation, outer_scaled, inner, spectral_tail: tail, boundary_residual: 0.0 };
    let mut residual = 0.0_f64;
    for (r, data) in [(1.0, inner_data), (rho, outer_data)] {
        for (k, f) in data.iter().enumerate() {
            let z = Point::from_polar(r, 2.0 * PI * k as f64 / data.len() as f64);
            residual = residual.max((map.eval(z) - f).norm());
        }
    }
    map.boundary_residual = residual;
    Ok(map)
}

impl AnnulusHarmonicMap {
    /// `(A_n, B_n)`.
    pub fn coefficient(&self, n: i64) -> (Point, Point) {
        let n_max = self.truncation as i64;
        if n.abs() > n_max {
            return (Point::new(0.0, 0.0), Point::new(0.0, 0.0));
        }
        let i = (n + n_max) as usize;
        (self.outer_scaled[i] * self.rho.powi(-(n.abs() as i32)), self.inner[i])
    }

    pub fn eval(&self, z: Point) -> Point {
        let n = self.truncation;
        let (zr, iz) = (z / self.rho, z.conj().inv());
        let (zbr, izz) = (z.conj() / self.rho, z.inv());
        let mut h = self.outer_scaled[n] + self.inner[n] * z.norm().ln();
        let (mut p1, mut p2, mut p3, mut p4) = (zr, iz, zbr, izz);
        for k in 1..=n {
            // A_k z^k + B_k z̄^{−k} + A_{−k} z̄^k + B_{−k} z^{−k}.
            h += self.outer_scaled[n + k] * p1 + self.inner[n + k] * p2 + self.outer_scaled[n - k] * p3 + self.inner[n - k] * p4;
            p1 *= zr;
            p2 *= iz;
            p3 *= zbr;
            p4 *= izz;
        }
        h
    }

    /// `(h_z, h_z̄)`.
    pub fn wirtinger(&self, z: Point) -> (Point, Point) {
        let n = self.truncation;
        let (zr, iz) = (z / self.rho, z.inv());
        let zb = z.conj();
        let (zbr, izb) = (zb / self.rho, zb.inv());
        let mut hz = self.inner[n] * 0.5 * iz;
        let mut hzb = self.inner[n] * 0.5 * izb;
        let (mut p1, mut p2, mut p3, mut p4) = (zr, iz, zbr, izb);
        for k in 1..=n {
            let kf = k as f64;
            hz += (self.outer_scaled[n + k] * p1 - self.inner[n - k] * p2) * kf * iz;
            hzb += (self.outer_scaled[n - k] * p3 - self.inner[n + k] * p4) * kf * izb;
            p1 *= zr;
            p2 *= iz;
            p3 *= zbr;
            p4 *= izb;
        }
        (hz, hzb)
    }
}

/// Built-in conformal parametrisations `f` of a target ring from `A(1, R)`,
/// each analytic on a neighbourhood of the closed annulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConformalKind {
    Identity,
    /// `(z − a)/(1 − a z)` with real `|a| < 1/R`: onto the region between the
    /// unit circle and an eccentric circle.
    Mobius { a: f64 },
    /// `z + c/z` with `|c| < 1`, injective on `|z| ≥ 1`.
    Joukowski { c: Point },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalParam {
    pub big_r: f64,
    pub kind: ConformalKind,
}

impl ConformalParam {
    pub fn new(big_r: f64, kind: ConformalKind) -> Result<Self> {
        if !(big_r > 1.0) || !big_r.is_finite() {
            return Err(domain_err(format!("need R > 1, got {big_r}")));
        }
        match kind {
            ConformalKind::Mobius { a } if !(a.abs() * big_r < 1.0) => {
                return Err(invalid(format!("Möbius pole 1/a must lie outside |z| ≤ R, got a = {a}")))
            }
            ConformalKind::Joukowski { c } if !(c.norm() < 1.0) => {
                return Err(invalid(format!("z + c/z needs |c| < 1, got {c}")))
            }
            _ => {}
        }
        Ok(ConformalParam { big_r, kind })
    }

    pub fn eval(&self, z: Point) -> Point {
        match self.kind {
            ConformalKind::Identity => z,
            ConformalKind::Mobius { a } => (z - a) / (1.0 - z * a),
            ConformalKind::Joukowski { c } => z + c / z,
        }
    }

    pub fn derivative(&self, z: Point) -> Point {
        match self.kind {
            ConformalKind::Identity => Point::new(1.0, 0.0),
            ConformalKind::Mobius { a } => {
                let d = 1.0 - z * a;
                Point::new(1.0 - a * a, 0.0) / (d * d)
            }
            ConformalKind::Joukowski { c } => 1.0 - c / (z * z),
        }
    }

    /// `f(A(1, R))` with both boundary curves as `vertices`-gons.
    pub fn target_domain(&self, vertices: usize) -> Result<DoublyConnectedDomain> {
        let inner = circle_polygon(Point::new(0.0, 0.0), 1.0, vertices).into_iter().map(|z| self.eval(z)).collect();
        let outer = circle_polygon(Point::new(0.0, 0.0), self.big_r, vertices).into_iter().map(|z| self.eval(z)).collect();
        let tag = match self.kind {
            ConformalKind::Identity => Some(CanonicalRing::Annulus { r: 1.0, big_r: self.big_r }),
            _ => None,
        };
        DoublyConnectedDomain::new(crate::BoundaryComponent::Polygon(inner), UnboundedComponent::ExteriorOf(outer), tag)
    }
}

/// `h_ε` on `A(1, (1+ε)R)` with `h_ε = f` on `|z| = 1` and `h_ε(z) = f(z/(1+ε))`
/// on `|z| = (1+ε)R`. At `ε = 0` the returned map lives on `A(1, R)` and
/// reproduces `f`.
pub fn construct_h_epsilon_with(f: &ConformalParam, epsilon: f64, truncation: usize, samples: usize) -> Result<AnnulusHarmonicMap> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(invalid(format!("epsilon must be finite and ≥ 0, got {epsilon}")));
    }
    let rho = (1.0 + epsilon) * f.big_r;
    let inner = sample_circle(1.0, samples, |z| f.eval(z));
    let outer = sample_circle(rho, samples, |z| f.eval(z / (1.0 + epsilon)));
    solve_annulus_dirichlet(rho, &inner, &outer, truncation)
}

pub fn construct_h_epsilon(f: &ConformalParam, epsilon: f64) -> Result<AnnulusHarmonicMap> {
    construct_h_epsilon_with(f, epsilon, DEFAULT_TRUNCATION, DEFAULT_SAMPLES)
}

/// Minimum of `|h_z| − |h_z̄|` on the `radii × angles` polar grid of
/// `[r0, r1]`, both circles included.
pub fn polar_margin(wirtinger: impl Fn(Point) -> (Point, Point) + Sync, r0: f64, r1: f64, radii: usize, angles: usize) -> f64 {
    (0..radii)
        .into_par_iter()
        .map(|i| {
            let r = r0 + (r1 - r0) * i as f64 / (radii - 1).max(1) as f64;
            (0..angles)
                .map(|j| {
                    let (hz, hzb) = wirtinger(Point::from_polar(r, 2.0 * PI * j as f64 / angles as f64));
                    hz.norm() - hzb.norm()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub const MARGIN_RADII: usize = 64;
pub const MARGIN_ANGLES: usize = 256;

/// Jacobian margin of `h_ε` on the 64 × 256 polar grid of its annulus.
pub fn epsilon_margin(f: &ConformalParam, epsilon: f64) -> Result<f64> {
    let h = construct_h_epsilon(f, epsilon)?;
    Ok(polar_margin(|z| h.wirtinger(z), 1.0, h.rho, MARGIN_RADII, MARGIN_ANGLES))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearch {
    /// Largest passing ε found.
    pub epsilon_1: f64,
    /// Smallest failing ε above `epsilon_1`, if any was seen.
    pub first_failure: Option<f64>,
    /// Every `(ε, margin)` evaluated, in increasing ε.
    pub table: Vec<(f64, f64)>,
}

/// Largest `ε ∈ (0, 1]` with a positive Jacobian margin. The margin is
/// sampled at `1e−6` and `k/32`; the last pass is then bisected against the
/// sample after it down to `tolerance`. No monotonicity in ε is assumed: the
/// table records every evaluation.
pub fn max_epsilon(f: &ConformalParam, tolerance: f64) -> Result<EpsilonSearch> {
    if !(tolerance > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tolerance}")));
    }
    let mut table = Vec::new();
    let first = epsilon_margin(f, 1e-6)?;
    table.push((1e-6, first));
    if !(first > 0.0) {
        return Err(Error::ConstructionFailed(format!("Jacobian margin {first} ≤ 0 already at ε = 1e-6")));
    }
    for k in 1..=32 {
        let e = k as f64 / 32.0;
        table.push((e, epsilon_margin(f, e)?));
    }
    let last_pass = table.iter().rposition(|&(_, m)| m > 0.0).expect("first entry passes");
    let mut first_failure = table.get(last_pass + 1).map(|&(e, _)| e);
    let mut lo = table[last_pass].0;
    if let Some(mut hi) = first_failure {
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            let m = epsilon_margin(f, mid)?;
            table.push((mid, m));
            if m > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        first_failure = Some(hi);
    }
    table.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(EpsilonSearch { epsilon_1: lo, first_failure, table })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonDiagnostics {
    pub epsilon: f64,
    pub sup_deviation: f64,
    pub sup_dz_deviation: f64,
    pub sup_dzbar: f64,
}

/// `sup |h_ε − f|`, `sup |(h_ε)_z − f′|` and `sup |(h_ε)_z̄|` on the polar grid of
/// `A(1, R)`, where both maps are defined.
pub fn epsilon_diagnostics(f: &ConformalParam, epsilon: f64) -> Result<EpsilonDiagnostics> {
    let h = construct_h_epsilon(f, epsilon)?;
    let mut d = EpsilonDiagnostics { epsilon, sup_deviation: 0.0, sup_dz_deviation: 0.0, sup_dzbar: 0.0 };
    for i in 0..MARGIN_RADII {
        let r = 1.0 + (f.big_r - 1.0) * i as f64 / (MARGIN_RADII - 1) as f64;
        for j in 0..MARGIN_ANGLES {
            let z = Point::from_polar(r, 2.0 * PI * j as f64 / MARGIN_ANGLES as f64);
            let (hz, hzb) = h.wirtinger(z);
            d.sup_deviation = d.sup_deviation.max((h.eval(z) - f.eval(z)).norm());
            d.sup_dz_deviation = d.sup_dz_deviation.max((hz - f.derivative(z)).norm());
            d.sup_dzbar = d.sup_dzbar.max(hzb.norm());
        }
    }
    Ok(d)
}

/// `h(z) = a z + b / z̄`; maps circles about 0 to circles, `|z| = ρ` to radius
/// `a ρ + b/ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialNitscheMap {
    pub a: f64,
    pub b: f64,
}

impl RadialNitscheMap {
    pub fn eval(&self, z: Point) -> Point {
        z * self.a + self.b / z.conj()
    }

    pub fn wirtinger(&self, z: Point) -> (Point, Point) {
        let zb = z.conj();
        (Point::new(self.a, 0.0), -self.b / (zb * zb))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NitscheOutcome {
    /// `boundary_degenerate` marks the equality case, where the margin
    /// `a − b/ρ²` vanishes on the inner circle.
    Map { map: RadialNitscheMap, boundary_degenerate: bool },
    /// `R*/r* < ½(R/r + r/R)`: no harmonic homeomorphism exists.
    Nonexistent { ratio: f64, bound: f64 },
    /// Existence is guaranteed but the radial ansatz did not give an injective
    /// map; not a nonexistence claim.
    RadialAnsatzFailed { a: f64, b: f64 },
}

/// Relative slack under which the Nitsche inequality is treated as equality.
const NITSCHE_EQUALITY: f64 = 1e-12;

/// Radial harmonic map `A(r, R) → A(r*, R*)` with `|z| = r ↦ r*` and
/// `|z| = R ↦ R*`. Injectivity `b ≤ a r²` is algebraically equivalent to the
/// Nitsche bound, so [`NitscheOutcome::RadialAnsatzFailed`] only arises from
/// rounding outside the equality tolerance.
pub fn radial_nitsche_map(r: f64, big_r: f64, rstar: f64, big_rstar: f64) -> Result<NitscheOutcome> {
    if !(r > 0.0 && big_r > r && rstar > 0.0 && big_rstar > rstar) || !(big_r.is_finite() && big_rstar.is_finite()) {
        return Err(invalid(format!("need 0 < r < R and 0 < r* < R*, got {r}, {big_r}, {rstar}, {big_rstar}")));
    }
    let ratio = big_rstar / rstar;
    let bound = 0.5 * (big_r / r + r / big_r);
    let equal = (ratio - bound).abs() <= NITSCHE_EQUALITY * bound;
    if ratio < bound && !equal {
        return Ok(NitscheOutcome::Nonexistent { ratio, bound });
    }
    let det = big_r * big_r - r * r;
    let a = (big_r * big_rstar - r * rstar) / det;
    let mut b = r * big_r * (rstar * big_r - big_rstar * r) / det;
    if equal {
        b = a * r * r;
    }
    if !(a > 0.0) || b > a * r * r {
        return Ok(NitscheOutcome::RadialAnsatzFailed { a, b });
    }
    Ok(NitscheOutcome::Map { map: RadialNitscheMap { a, b }, boundary_degenerate: equal })
}

/// `h(z) = Re(z^α) + i Im z`, principal branch with the cut on `(−∞, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerShearMap {
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerShear {
    pub map: PowerShearMap,
    pub source_ring: CanonicalRing,
    pub target_ring: CanonicalRing,
}

fn check_power_shear(a: f64, b: f64, alpha: f64) -> Result<()> {
    if !(0.0 < a && a < b && b < 1.0) || !(alpha > 1.0 && alpha < 1.5) {
        return Err(invalid(format!("need 0 < a < b < 1 and α ∈ (1, 3/2), got {a}, {b}, {alpha}")));
    }
    Ok(())
}

/// `h` carries `G(a^{1/α}, b^{1/α})` onto `G(a, b)`: positive reals go by
/// `x ↦ x^α` and both sides of the cut land on `(−∞, 0]`.
pub fn power_shear_map(a: f64, b: f64, alpha: f64) -> Result<PowerShear> {
    check_power_shear(a, b, alpha)?;
    Ok(PowerShear {
        map: PowerShearMap { alpha },
        source_ring: CanonicalRing::DoubleTeichUnit { a: a.powf(1.0 / alpha), b: b.powf(1.0 / alpha) },
        target_ring: CanonicalRing::DoubleTeichUnit { a, b },
    })
}

impl PowerShearMap {
    pub fn eval(&self, z: Point) -> Point {
        Point::new(z.powf(self.alpha).re, z.im)
    }

    /// `h_z = ½(α z^{α−1} + 1)`, `h_z̄ = ½(conj(α z^{α−1}) − 1)`.
    pub fn wirtinger(&self, z: Point) -> (Point, Point) {
        let w = z.powf(self.alpha - 1.0) * self.alpha;
        ((w + 1.0) * 0.5, (w.conj() - 1.0) * 0.5)
    }
}

/// `(1 − b^{1/α})/(1 − b) > ((b/a)^{1/α} − 1)/(b/a − 1)`: secants of the
/// concave `x ↦ x^{1/α}` over `[b, 1]` and `[1, b/a]`.
pub fn secant_slope_inequality(a: f64, b: f64, alpha: f64) -> bool {
    if check_power_shear(a, b, alpha).is_err() {
        return false;
    }
    let q = b / a;
    (1.0 - b.powf(1.0 / alpha)) / (1.0 - b) > (q.powf(1.0 / alpha) - 1.0) / (q - 1.0)
}

/// `h(z) = p z + q z̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub p: Point,
    pub q: Point,
}

/// Any map the verification suite accepts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HarmonicMapModel {
    Annulus(AnnulusHarmonicMap),
    RadialNitsche(RadialNitscheMap),
    PowerShear(PowerShearMap),
    ScShear(ScShearMap),
    Linear(LinearMap),
}

impl HarmonicMapModel {
    pub fn identity() -> Self {
        HarmonicMapModel::Linear(LinearMap { p: Point::new(1.0, 0.0), q: Point::new(0.0, 0.0) })
    }

    pub fn conjugation() -> Self {
        HarmonicMapModel::Linear(LinearMap { p: Point::new(0.0, 0.0), q: Point::new(1.0, 0.0) })
    }

    pub fn eval(&self, z: Point) -> Result<Point> {
        Ok(match self {
            HarmonicMapModel::Annulus(m) => m.eval(z),
            HarmonicMapModel::RadialNitsche(m) => m.eval(z),
            HarmonicMapModel::PowerShear(m) => m.eval(z),
            HarmonicMapModel::ScShear(m) => m.eval(z)?,
            HarmonicMapModel::Linear(m) => m.p * z + m.q * z.conj(),
        })
    }

    pub fn wirtinger(&self, z: Point) -> Result<(Point, Point)> {
        Ok(match self {
            HarmonicMapModel::Annulus(m) => m.wirtinger(z),
            HarmonicMapModel::RadialNitsche(m) => m.wirtinger(z),
            HarmonicMapModel::PowerShear(m) => m.wirtinger(z),
            HarmonicMapModel::ScShear(m) => m.wirtinger(z),
            HarmonicMapModel::Linear(m) => (m.p, m.q),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub radii: usize,
    pub angles: usize,
    /// Cartesian grid is `cartesian × cartesian`.
    pub cartesian: usize,
    /// Cartesian samples closer than this to the boundary are dropped.
    pub clip: f64,
    /// Step of the five-point Laplacian.
    pub stencil: f64,
    /// Boundary samples per boundary component.
    pub boundary_samples: usize,
    pub distance_tolerance: f64,
    /// When set, the Laplacian residual also enters the verdict.
    pub residual_tolerance: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            radii: MARGIN_RADII,
            angles: MARGIN_ANGLES,
            cartesian: 128,
            clip: 1e-3,
            stencil: 1e-3,
            boundary_samples: 1024,
            distance_tolerance: 1e-4,
            residual_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapVerificationReport {
    /// Largest `|Σ h(z ± δ, z ± iδ) − 4h(z)| / δ²` over the stencil subgrid.
    pub harmonicity_residual: f64,
    /// `min(|h_z| − |h_z̄|)` over all samples, boundary rows included.
    pub jacobian_margin: f64,
    /// Same minimum over interior samples only.
    pub interior_margin: f64,
    /// Set when the margin vanishes on the boundary but stays positive inside.
    pub boundary_degenerate: bool,
    pub boundary_distance: f64,
    pub winding_degree: i64,
    pub samples: usize,
    pub skipped: usize,
    /// `"polar"` or `"cartesian"`.
    pub sampling: String,
    pub clip_distance: f64,
    pub verdict: Verdict,
}

/// Uniform bucket grid over the finite boundary segments of a domain.
struct SegmentIndex {
    segments: Vec<(Point, Point)>,
    lo: Point,
    cell: f64,
    side: usize,
    buckets: Vec<Vec<usize>>,
}

impl SegmentIndex {
    fn new(segments: Vec<(Point, Point)>) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(a, b) in &segments {
            for p in [a, b] {
                lo = Point::new(lo.re.min(p.re), lo.im.min(p.im));
                hi = Point::new(hi.re.max(p.re), hi.im.max(p.im));
            }
        }
        let side = ((segments.len() as f64).sqrt().ceil() as usize).clamp(1, 512);
        let cell = ((hi.re - lo.re).max(hi.im - lo.im) / side as f64).max(1e-12);
        let mut buckets = vec![Vec::new(); side * side];
        let clampi = |v: f64| (v.floor().max(0.0) as usize).min(side - 1);
        for (k, &(a, b)) in segments.iter().enumerate() {
            let (i0, i1) = (clampi((a.re.min(b.re) - lo.re) / cell), clampi((a.re.max(b.re) - lo.re) / cell));
            let (j0, j1) = (clampi((a.im.min(b.im) - lo.im) / cell), clampi((a.im.max(b.im) - lo.im) / cell));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[i * side + j].push(k);
                }
            }
        }
        SegmentIndex { segments, lo, cell, side, buckets }
    }

    /// Exact distance to the nearest segment, searching square rings of cells
    /// outward until the ring lies beyond the best distance found.
    fn distance(&self, z: Point) -> f64 {
        if self.segments.is_empty() {
            return f64::INFINITY;
        }
        let side = self.side as i64;
        let ci = ((z.re - self.lo.re) / self.cell).floor() as i64;
        let cj = ((z.im - self.lo.im) / self.cell).floor() as i64;
        // Rings closer than the grid cannot hold segments.
        let gap_i = if ci < 0 { -ci } else if ci >= side { ci - side + 1 } else { 0 };
        let gap_j = if cj < 0 { -cj } else if cj >= side { cj - side + 1 } else { 0 };
        let mut best = f64::INFINITY;
        let mut ring = gap_i.max(gap_j);
        loop {
            for i in (ci - ring)..=(ci + ring) {
                for j in (cj - ring)..=(cj + ring) {
                    if (i - ci).abs() != ring && (j - cj).abs() != ring {
                        continue;
                    }
                    if i < 0 || j < 0 || i >= side || j >= side {
                        continue;
                    }
                    for &k in &self.buckets[(i * side + j) as usize] {
                        let (a, b) = self.segments[k];
                        best = best.min(point_segment_distance_sqr(z, a, b));
                    }
                }
            }
            // Everything outside the searched block is farther than `ring` cells.
            if best.sqrt() <= ring as f64 * self.cell || ring > 2 * side + gap_i.max(gap_j) {
                return best.sqrt();
            }
            ring += 1;
        }
    }
}

/// Distance to the boundary of `d`, rays included, through a bucket index.
struct BoundaryDistance {
    index: SegmentIndex,
    rays: Vec<crate::Ray>,
}

impl BoundaryDistance {
    fn new(d: &DoublyConnectedDomain) -> Self {
        let mut segments = d.bounded.edges();
        let mut rays = Vec::new();
        match &d.unbounded {
            UnboundedComponent::ExteriorOf(poly) => {
                segments.extend((0..poly.len()).map(|k| (poly[k], poly[(k + 1) % poly.len()])));
            }
            UnboundedComponent::Rays(r) => rays = r.clone(),
        }
        BoundaryDistance { index: SegmentIndex::new(segments), rays }
    }

    fn distance(&self, z: Point) -> f64 {
        let mut best = self.index.distance(z);
        for r in &self.rays {
            let t = ((z - r.from) * r.dir.conj()).re.max(0.0);
            best = best.min((z - r.point_at(t)).norm());
        }
        best
    }
}

/// Centre-at-origin annulus radii when `d` is a tagged annulus realised about 0.
fn centred_annulus(d: &DoublyConnectedDomain) -> Option<(f64, f64)> {
    match d.canonical {
        Some(CanonicalRing::Annulus { r, big_r }) => {
            let verts = d.bounded.vertices();
            let centre = verts.iter().sum::<Point>() / verts.len() as f64;
            // Realised circles sit slightly outside the true radius.
            let on_circle = verts.iter().all(|v| (v.norm() - r).abs() <= 1e-5 * r);
            (centre.norm() <= 1e-9 * r && on_circle).then_some((r, big_r))
        }
        _ => None,
    }
}

/// Winding number of the closed curve `h(γ(t))`, `t ∈ [0, 1]`, about `w`.
/// Steps whose image turns by more than π/4 about `w` are subdivided.
fn winding_number(h: &dyn Fn(Point) -> Result<Point>, gamma: &dyn Fn(f64) -> Point, steps: usize, w: Point) -> Result<i64> {
    let mut total = 0.0;
    let arg = |t: f64| -> Result<Point> { Ok(h(gamma(t))? - w) };
    for k in 0..steps {
        let (t0, t1) = (k as f64 / steps as f64, (k + 1) as f64 / steps as f64);
        let mut stack = vec![(t0, t1, arg(t0)?, arg(t1)?, 0usize)];
        while let Some((a, b, fa, fb, depth)) = stack.pop() {
            let turn = (fb / fa).arg();
            if turn.abs() > PI / 4.0 && depth < 24 {
                let m = 0.5 * (a + b);
                let fm = arg(m)?;
                stack.push((m, b, fm, fb, depth + 1));
                stack.push((a, m, fa, fm, depth + 1));
            } else {
                total += turn;
            }
        }
    }
    Ok((total / (2.0 * PI)).round() as i64)
}

/// Samples along the boundary of `d`: `per_component` points on each
/// component by arclength, rays truncated at `ray_length`.
fn boundary_samples(d: &DoublyConnectedDomain, per_component: usize, ray_length: f64) -> Vec<Point> {
    let segs = d.boundary_segments(ray_length);
    let mut out = Vec::new();
    for outer in [false, true] {
        let part: Vec<_> = segs.iter().filter(|s| s.outer == outer).collect();
        let total: f64 = part.iter().map(|s| (s.b - s.a).norm()).sum();
        if total == 0.0 {
            out.extend(part.iter().map(|s| s.a));
            continue;
        }
        for s in part {
            let len = (s.b - s.a).norm();
            let n = ((per_component as f64 * len / total).ceil() as usize).max(1);
            out.extend((0..=n).map(|k| s.a + (s.b - s.a) * (k as f64 / n as f64)));
        }
    }
    out
}

/// Samples and checks a map from `source` onto `target`.
///
/// Tagged annuli about the origin are sampled on a polar grid whose first and
/// last rows lie on the boundary circles; other sources on a Cartesian grid of
/// half-width `2 max(extent, 1)` about the bounded component, dropping points
/// within `clip` of the boundary. Samples where the map cannot be evaluated
/// are skipped, and more than 1% skipped fails the verdict.
pub fn verify_map(map: &HarmonicMapModel, source: &DoublyConnectedDomain, target: &DoublyConnectedDomain, opts: &VerifyOptions) -> Result<MapVerificationReport> {
    if opts.radii < 3 || opts.angles < 8 || opts.cartesian < 8 || !(opts.stencil > 0.0) || !(opts.clip >= 0.0) {
        return Err(invalid(format!("verification grid too small: {opts:?}")));
    }
    let polar = centred_annulus(source);
    let reach = 2.0 * source.extent().max(1.0);
    let centre = source.bounded_anchor();
    let source_distance = BoundaryDistance::new(source);

    // (point, on_boundary) pairs in a fixed order.
    let grid: Vec<(Point, bool)> = match polar {
        Some((r0, r1)) => (0..opts.radii)
            .flat_map(|i| {
                let r = r0 + (r1 - r0) * i as f64 / (opts.radii - 1) as f64;
                let edge = i == 0 || i == opts.radii - 1;
                (0..opts.angles).map(move |j| (Point::from_polar(r, 2.0 * PI * j as f64 / opts.angles as f64), edge))
            })
            .collect(),
        None => {
            let n = opts.cartesian;
            (0..n)
                .flat_map(|i| {
                    (0..n).map(move |j| {
                        let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                        let y = -1.0 + 2.0 * (j as f64 + 0.5) / n as f64;
                        (centre + Point::new(x, y) * reach, false)
                    })
                })
                .filter(|&(z, _)| source.classify(z) == Region::Domain && source_distance.distance(z) > opts.clip)
                .collect()
        }
    };

    let margins: Vec<Option<(f64, bool)>> = grid
        .par_iter()
        .map(|&(z, edge)| match map.wirtinger(z) {
            Ok((hz, hzb)) if hz.re.is_finite() && hz.im.is_finite() && hzb.re.is_finite() && hzb.im.is_finite() => {
                Some((hz.norm() - hzb.norm(), edge))
            }
            _ => None,
        })
        .collect();
    let skipped = margins.iter().filter(|m| m.is_none()).count();
    let (mut margin, mut interior, mut edge_margin) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut scale = 0.0_f64;
    for (m, &(z, _)) in margins.iter().zip(&grid) {
        if let Some((v, edge)) = *m {
            margin = margin.min(v);
            if edge {
                edge_margin = edge_margin.min(v);
            } else {
                interior = interior.min(v);
            }
            if let Ok((hz, _)) = map.wirtinger(z) {
                scale = scale.max(hz.norm());
            }
        }
    }

    // Laplacian on every fourth sample whose stencil stays in the domain.
    let delta = opts.stencil;
    let stencil_points: Vec<Point> = grid
        .iter()
        .enumerate()
        .filter(|(k, _)| k % 4 == 0)
        .map(|(_, &(z, _))| z)
        .filter(|&z| source_distance.distance(z) > 2.0 * delta)
        .collect();
    let residual = stencil_points
        .par_iter()
        .filter_map(|&z| {
            let c = map.eval(z).ok()?;
            let mut s = Point::new(0.0, 0.0);
            for d in [Point::new(delta, 0.0), Point::new(-delta, 0.0), Point::new(0.0, delta), Point::new(0.0, -delta)] {
                s += map.eval(z + d).ok()?;
            }
            Some((s - c * 4.0).norm() / (delta * delta))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max);

    // Boundary correspondence.
    let bsamples: Vec<Point> = match polar {
        Some((r0, r1)) => [r0, r1]
            .iter()
            .flat_map(|&r| (0..opts.boundary_samples).map(move |j| Point::from_polar(r, 2.0 * PI * j as f64 / opts.boundary_samples as f64)))
            .collect(),
        None => boundary_samples(source, opts.boundary_samples, 2.0 * reach),
    };
    let target_distance = BoundaryDistance::new(target);
    let dists: Vec<Option<f64>> = bsamples.par_iter().map(|&z| map.eval(z).ok().map(|w| target_distance.distance(w))).collect();
    let bskipped = dists.iter().filter(|d| d.is_none()).count();
    let distance = dists.iter().flatten().fold(0.0_f64, |a, &b| a.max(b));

    // Degree of the image of the outer boundary about the target's hole.
    let w = target.bounded_anchor();
    let eval = |z: Point| map.eval(z);
    let degree = match (polar, &source.unbounded) {
        (Some((_, r1)), _) => winding_number(&eval, &|t| Point::from_polar(r1, 2.0 * PI * t), opts.angles, w)?,
        (None, UnboundedComponent::ExteriorOf(poly)) => {
            let n = poly.len();
            let gamma = |t: f64| {
                let s = t * n as f64;
                let k = (s.floor() as usize).min(n - 1);
                poly[k] + (poly[(k + 1) % n] - poly[k]) * (s - k as f64)
            };
            winding_number(&eval, &gamma, n, w)?
        }
        (None, UnboundedComponent::Rays(_)) => {
            let big = 2.0 * reach + centre.norm();
            winding_number(&eval, &|t| Point::from_polar(big, 2.0 * PI * t), opts.angles, w)?
        }
    };

    let total = grid.len() + bsamples.len();
    let skipped_all = skipped + bskipped;
    let tiny = 1e-12 * scale.max(1.0);
    let boundary_degenerate = polar.is_some() && edge_margin.abs() <= tiny && interior > 0.0;
    let mut reasons = Vec::new();
    if grid.is_empty() {
        reasons.push("no interior samples".to_string());
    }
    let margin_ok = if polar.is_some() { interior > 0.0 && edge_margin > -tiny } else { margin > 0.0 };
    if !margin_ok {
        reasons.push(format!("Jacobian margin {margin} not positive"));
    }
    if degree != 1 {
        reasons.push(format!("winding degree {degree}"));
    }
    if !(distance < opts.distance_tolerance) {
        reasons.push(format!("boundary distance {distance} ≥ {}", opts.distance_tolerance));
    }
    if skipped_all * 100 > total {
        reasons.push(format!("{skipped_all} of {total} samples skipped"));
    }
    if let Some(tol) = opts.residual_tolerance {
        if !(residual < tol) {
            reasons.push(format!("harmonicity residual {residual} ≥ {tol}"));
        }
    }
    Ok(MapVerificationReport {
        harmonicity_residual: residual,
        jacobian_margin: margin,
        interior_margin: interior,
        boundary_degenerate,
        boundary_distance: distance,
        winding_degree: degree,
        samples: total,
        skipped: skipped_all,
        sampling: if polar.is_some() { "polar" } else { "cartesian" }.to_string(),
        clip_distance: if polar.is_some() { 0.0 } else { opts.clip },
        verdict: Verdict { pass: reasons.is_empty(), reasons },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn annulus(r: f64, big_r: f64) -> DoublyConnectedDomain {
        CanonicalRing::Annulus { r, big_r }.realize().unwrap()
    }

    #[test]
    fn identity_data_gives_identity_series() {
        let rho = 2.0;
        let inner = sample_circle(1.0, 64, |z| z);
        let outer = sample_circle(rho, 64, |z| z);
        let h = solve_annulus_dirichlet(rho, &inner, &outer, 16).unwrap();
        let (a1, b1) = h.coefficient(1);
        assert!((a1 - 1.0).norm() < 1e-14 && b1.norm() < 1e-14);
        for n in -16..=16 {
            if n != 1 {
                let (a, b) = h.coefficient(n);
                assert!(a.norm() < 1e-14 && b.norm() < 1e-14, "{n}");
            }
        }
    }

    #[test]
    fn constant_data_gives_constant() {
        let c = Point::new(0.3, -2.0);
        let d = vec![c; 33];
        let h = solve_annulus_dirichlet(3.0, &d, &d, 16).unwrap();
        for z in [Point::new(1.5, 0.2), Point::new(-2.0, 1.0)] {
            assert!((h.eval(z) - c).norm() < 1e-14);
        }
    }

    #[test]
    fn radial_data_gives_logarithm() {
        let rho = 2.5;
        let h = solve_annulus_dirichlet(rho, &vec![Point::new(0.0, 0.0); 65], &vec![Point::new(1.0, 0.0); 65], 32).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let z = Point::from_polar(1.0 + (rho - 1.0) * rng.gen::<f64>(), rng.gen_range(0.0..2.0 * PI));
            assert!((h.eval(z) - z.norm().ln() / rho.ln()).norm() < 1e-10);
        }
    }

    #[test]
    fn undersampling_and_bad_radius_are_rejected() {
        let d = vec![Point::new(1.0, 0.0); 10];
        assert!(matches!(solve_annulus_dirichlet(2.0, &d, &d, 5), Err(Error::Undersampled { samples: 10, truncation: 5 })));
        assert!(matches!(solve_annulus_dirichlet(1.0, &d, &d, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn boundary_data_reproduced_for_mobius() {
        let f = ConformalParam::new(2.0, ConformalKind::Mobius { a: 0.2 }).unwrap();
        let h = construct_h_epsilon(&f, 0.05).unwrap();
        assert!(h.boundary_residual < 1e-12 && h.spectral_tail < 1e-12, "{} {}", h.boundary_residual, h.spectral_tail);
        let z = Point::from_polar(1.0, 0.123);
        assert!((h.eval(z) - f.eval(z)).norm() < 1e-12);
    }

    #[test]
    fn epsilon_zero_reproduces_f() {
        let f = ConformalParam::new(2.0, ConformalKind::Identity).unwrap();
        let h = construct_h_epsilon(&f, 0.0).unwrap();
        assert!((h.coefficient(1).0 - 1.0).norm() < 1e-14);
        let f = ConformalParam::new(2.0, ConformalKind::Joukowski { c: Point::new(0.1, 0.05) }).unwrap();
        let h = construct_h_epsilon(&f, 0.0).unwrap();
        let z = Point::new(1.2, 0.9);
        assert!((h.eval(z) - f.eval(z)).norm() < 1e-12);
    }

    #[test]
    fn identity_threshold_matches_radial_solution() {
        // h_ε = a z + b/z̄ with a + b = 1, aρ + b/ρ = 2; margin 2a − 1 at r = 1
        // vanishes at ρ = 2 + √3, that is ε = √3/2.
        let f = ConformalParam::new(2.0, ConformalKind::Identity).unwrap();
        let s = max_epsilon(&f, 1e-4).unwrap();
        assert!((s.epsilon_1 - 0.75f64.sqrt()).abs() < 2e-4, "{s:?}");
        let at = epsilon_margin(&f, 0.1).unwrap();
        let rho = 2.2;
        let a = (2.0 * rho - 1.0) / (rho * rho - 1.0);
        assert_relative_eq!(at, 2.0 * a - 1.0, max_relative = 1e-10);
    }

    #[test]
    fn max_epsilon_fails_on_wild_data() {
        // A pole just outside |z| = R leaves outer data far beyond 64 modes.
        let f = ConformalParam::new(2.0, ConformalKind::Mobius { a: 0.4999 }).unwrap();
        assert!(matches!(max_epsilon(&f, 1e-3), Err(Error::ConstructionFailed(_))));
    }

    #[test]
    fn nitsche_examples() {
        match radial_nitsche_map(1.0, 2.0, 1.0, 1.25).unwrap() {
            NitscheOutcome::Map { map, boundary_degenerate } => {
                assert!(boundary_degenerate);
                assert!((map.a - 0.5).abs() < 1e-15 && (map.b - 0.5).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            radial_nitsche_map(1.0, 2.0, 1.0, 2.0).unwrap(),
            NitscheOutcome::Map { map: RadialNitscheMap { a: 1.0, b: 0.0 }, boundary_degenerate: false }
        );
        assert!(matches!(radial_nitsche_map(1.0, 2.0, 1.0, 1.2).unwrap(), NitscheOutcome::Nonexistent { .. }));
        assert!(radial_nitsche_map(2.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn nitsche_image_circles_have_constant_modulus() {
        let map = match radial_nitsche_map(0.5, 2.0, 1.0, 3.0).unwrap() {
            NitscheOutcome::Map { map, .. } => map,
            other => panic!("{other:?}"),
        };
        for rho in [0.5, 1.0, 2.0] {
            let want = map.a * rho + map.b / rho;
            for k in 0..16 {
                assert_relative_eq!(map.eval(Point::from_polar(rho, k as f64)).norm(), want, max_relative = 1e-14);
            }
        }
        assert_relative_eq!(map.a * 0.5 + map.b / 0.5, 1.0, max_relative = 1e-14);
        assert_relative_eq!(map.a * 2.0 + map.b / 2.0, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn power_shear_endpoints() {
        let (a, b, alpha) = (0.25, 0.5, 1.25);
        let ps = power_shear_map(a, b, alpha).unwrap();
        let CanonicalRing::DoubleTeichUnit { a: sa, b: sb } = ps.source_ring else { panic!() };
        let h = ps.map;
        assert!((h.eval(Point::new(sa, 0.0)) - a).norm() < 1e-12);
        assert!((h.eval(Point::new(sb, 0.0)) - b).norm() < 1e-12);
        assert!((h.eval(Point::new(1.0, 0.0)) - 1.0).norm() < 1e-12);
        assert!(h.eval(Point::new(0.0, 0.0)).norm() < 1e-12);
        for x in [-0.5, -3.0] {
            let up = h.eval(Point::new(x, 1e-14));
            let down = h.eval(Point::new(x, -1e-14));
            assert!(up.re < 0.0 && (up - down).norm() < 1e-12);
        }
    }

    #[test]
    fn secant_inequality() {
        assert!(secant_slope_inequality(0.25, 0.5, 1.25));
        assert!(!secant_slope_inequality(0.25, 0.5, 1.0));
        let mut rng = StdRng::seed_from_u64(99);
        for _ in 0..10_000 {
            let b = rng.gen_range(0.02..0.98);
            let a = b * rng.gen_range(0.01..0.99);
            let alpha = rng.gen_range(1.0005..1.4995);
            assert!(secant_slope_inequality(a, b, alpha), "{a} {b} {alpha}");
        }
    }

    #[test]
    fn identity_on_annulus_passes() {
        let d = annulus(1.0, 2.0);
        let r = verify_map(&HarmonicMapModel::identity(), &d, &d, &VerifyOptions::default()).unwrap();
        assert!(r.verdict.pass, "{r:?}");
        assert!((r.jacobian_margin - 1.0).abs() < 1e-15 && r.harmonicity_residual < 1e-6 && r.boundary_distance < 1e-6, "{r:?}");
        assert_eq!(r.winding_degree, 1);
    }

    #[test]
    fn conjugation_fails_on_margin() {
        let d = annulus(1.0, 2.0);
        let r = verify_map(&HarmonicMapModel::conjugation(), &d, &d, &VerifyOptions::default()).unwrap();
        assert!(!r.verdict.pass && r.jacobian_margin < 0.0 && r.winding_degree == -1, "{r:?}");
    }

    #[test]
    fn equality_case_is_boundary_degenerate() {
        let map = match radial_nitsche_map(1.0, 2.0, 1.0, 1.25).unwrap() {
            NitscheOutcome::Map { map, .. } => map,
            other => panic!("{other:?}"),
        };
        let r = verify_map(&HarmonicMapModel::RadialNitsche(map), &annulus(1.0, 2.0), &annulus(1.0, 1.25), &VerifyOptions::default()).unwrap();
        assert!(r.verdict.pass && r.boundary_degenerate, "{r:?}");
        assert!(r.jacobian_margin.abs() < 1e-15);
    }

    #[test]
    fn wrong_target_fails_on_distance() {
        let r = verify_map(&HarmonicMapModel::identity(), &annulus(1.0, 2.0), &annulus(1.0, 2.1), &VerifyOptions::default()).unwrap();
        assert!(!r.verdict.pass && r.boundary_distance > 0.09, "{r:?}");
    }

    #[test]
    fn power_shear_passes_verification() {
        let ps = power_shear_map(0.25, 0.5, 1.25).unwrap();
        let r = verify_map(
            &HarmonicMapModel::PowerShear(ps.map),
            &ps.source_ring.realize().unwrap(),
            &ps.target_ring.realize().unwrap(),
            &VerifyOptions::default(),
        )
        .unwrap();
        assert!(r.verdict.pass, "{r:?}");
        assert_eq!(r.sampling, "cartesian");
    }

    #[test]
    fn segment_index_matches_brute_force() {
        let poly = circle_polygon(Point::new(0.3, -0.2), 1.7, 200);
        let segs: Vec<_> = (0..poly.len()).map(|k| (poly[k], poly[(k + 1) % poly.len()])).collect();
        let idx = SegmentIndex::new(segs.clone());
        for k in 0..200 {
            let z = Point::from_polar(0.05 * k as f64, 0.7 * k as f64);
            let brute = segs.iter().map(|&(a, b)| point_segment_distance_sqr(z, a, b)).fold(f64::INFINITY, f64::min).sqrt();
            assert!((idx.distance(z) - brute).abs() < 1e-14, "{z}");
        }
    }

    #[test]
    fn model_serialisation_round_trip() {
        let f = ConformalParam::new(2.0, ConformalKind::Identity).unwrap();
        let m = HarmonicMapModel::Annulus(construct_h_epsilon_with(&f, 0.1, 8, 32).unwrap());
        let back: HarmonicMapModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        let z = Point::new(1.3, 0.4);
        assert_eq!(back.eval(z).unwrap(), m.eval(z).unwrap());
    }
}
