//! Schwarz–Christoffel shear construction for double Teichmüller targets.
//!
//! `G_b` is the region above the graph of `g(x) = b` for `x ≤ −1`, linear on
//! `[−1, 1]`, and `0` for `x ≥ 1`. The map `φ_b` of the upper half-plane onto
//! `G_b` fixes `1` and `∞` and sends `−1` to `−1 + bi`. Its derivative is
//!
//! ```text
//! φ_b′(z) = C (z + 1)^μ (z − 1)^{−μ},   μ = arctan(b/2)/π,
//! ```
//!
//! with `C > 0`: the interior angle of `G_b` is `π(1 + μ)` at `−1 + bi` and
//! `π(1 − μ)` at `1`. The harmonic map `h = Re φ_b + i Im z`, extended to the
//! lower half-plane by `h(z) = conj h(z̄)`, carries `F(s_b, t_b)` onto
//! `F(s′, t′)` when `φ_b(−s_b) = −s′ + bi` and `φ_b(t_b) = t′`. The extension is
//! harmonic across the gaps `(−s_b, −1)` and `(1, t_b)` because `φ_b′` is real
//! there, so `∂_y Re φ_b = −Im φ_b′ = 0`; [`seam_harmonicity_residual`] measures
//! this numerically.

use serde::{Deserialize, Serialize};

use crate::canonical::{double_teich_modulus, teichmuller_modulus};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{gauss_jacobi, gauss_legendre, GaussRule};
use crate::Point;

/// Nodes per quadrature panel.
const PANEL_NODES: usize = 64;
/// Longest first panel next to a prevertex.
const FIRST_PANEL: f64 = 1.0;
const MAX_BISECTIONS: usize = 300;
const MAX_DOUBLINGS: usize = 200;

/// Principal power of a point of the closed upper half-plane; `arg ∈ [0, π]`,
/// with `−0.0` imaginary parts read as `+0.0`.
fn upow(w: Point, e: f64) -> Point {
    let im = if w.im <= 0.0 { 0.0 } else { w.im };
    let r = w.re.hypot(im);
    if r == 0.0 {
        return if e > 0.0 { Point::new(0.0, 0.0) } else { Point::new(f64::INFINITY, 0.0) };
    }
    Point::from_polar(r.powf(e), e * im.atan2(w.re))
}

#[derive(Debug, Clone)]
pub struct GbModel {
    pub b: f64,
    pub mu: f64,
    /// Real and positive, since the image of `(1, ∞)` runs along the positive axis.
    pub c: f64,
    /// Weight `(1 + x)^{−μ}`: the singular factor at the prevertex `1`.
    right: GaussRule,
    /// Weight `(1 + x)^{μ}`: the vanishing factor at the prevertex `−1`.
    left: GaussRule,
    legendre: GaussRule,
}

/// Builds `φ_b`. `C` follows from `∫_{−1}^{1} φ_b′ = (−1 + bi) − 1`: on `(−1, 1)`
/// the derivative is `C e^{−iπμ} (1 + x)^μ (1 − x)^{−μ}` and `2 − bi` has
/// argument `−πμ`, so `C = |2 − bi| / ∫ (1 + x)^μ (1 − x)^{−μ} dx`.
pub fn build_gb(b: f64) -> Result<GbModel> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid(format!("G_b needs a finite height b > 0, got {b}")));
    }
    let mu = (0.5 * b).atan() / std::f64::consts::PI;
    let jacobi = gauss_jacobi(PANEL_NODES, -mu, mu)?;
    let integral: f64 = jacobi.integrate(|_| 1.0);
    let c = (4.0 + b * b).sqrt() / integral;
    Ok(GbModel {
        b,
        mu,
        c,
        right: gauss_jacobi(PANEL_NODES, 0.0, -mu)?,
        left: gauss_jacobi(PANEL_NODES, 0.0, mu)?,
        legendre: gauss_legendre(PANEL_NODES)?,
    })
}

impl GbModel {
    /// `φ_b′(z)` on the closed upper half-plane.
    pub fn derivative(&self, z: Point) -> Point {
        upow(z + 1.0, self.mu) * upow(z - 1.0, -self.mu) * self.c
    }

    /// Image of the prevertex `p ∈ {−1, 1}` fixed by the normalisation.
    fn anchor(&self, p: f64) -> Point {
        if p > 0.0 {
            Point::new(1.0, 0.0)
        } else {
            Point::new(-1.0, self.b)
        }
    }

    /// `∫_p^z φ_b′` along the straight segment from the prevertex `p`.
    ///
    /// The first panel, of length at most [`FIRST_PANEL`], absorbs the endpoint
    /// factor into a Gauss–Jacobi weight; the rest of the segment is split into
    /// panels that double in length, each as long as its distance from `p`.
    /// The other prevertex stays at least unit distance from a segment that
    /// starts at the nearer prevertex.
    fn integral_from(&self, p: f64, z: Point) -> Point {
        let d = z - p;
        let len = d.norm();
        if len == 0.0 {
            return Point::new(0.0, 0.0);
        }
        let t1 = (FIRST_PANEL / len).min(1.0);
        let half = 0.5 * t1;
        let at = |t: f64| Point::new(p, 0.0) + d * t;
        let mut sum = if p > 0.0 {
            // (ζ − 1)^{−μ} = t^{−μ} d^{−μ} for t > 0.
            let s: Point = self.right.integrate(|x| upow(at(half * (1.0 + x)) + 1.0, self.mu));
            s * upow(d, -self.mu) * half.powf(1.0 - self.mu)
        } else {
            let s: Point = self.left.integrate(|x| upow(at(half * (1.0 + x)) - 1.0, -self.mu));
            s * upow(d, self.mu) * half.powf(1.0 + self.mu)
        } * d
            * self.c;
        let mut lo = t1;
        while lo < 1.0 {
            let hi = (2.0 * lo).min(1.0);
            let (mid, rad) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let s: Point = self.legendre.integrate(|x| self.derivative(at(mid + rad * x)));
            sum += s * d * rad;
            lo = hi;
        }
        sum
    }

    /// `φ_b(z)` for `z` in the closed upper half-plane.
    pub fn map(&self, z: Point) -> Result<Point> {
        if !(z.im >= -1e-12 * (1.0 + z.norm())) || !z.re.is_finite() || !z.im.is_finite() {
            return Err(invalid(format!("φ_b is defined on the closed upper half-plane, got {z}")));
        }
        let p = if z.re >= 0.0 { 1.0 } else { -1.0 };
        Ok(self.anchor(p) + self.integral_from(p, z))
    }

    /// `|φ_b(−1) − (−1 + bi)|` with `φ_b(−1)` integrated from `1` by quadrature,
    /// through `0`.
    pub fn normalization_residual(&self) -> f64 {
        let zero = Point::new(0.0, 0.0);
        let via_right = Point::new(1.0, 0.0) + self.integral_from(1.0, zero) - self.integral_from(-1.0, zero);
        (via_right - self.anchor(-1.0)).norm()
    }
}

/// Free function form of [`GbModel::map`].
pub fn sc_map(model: &GbModel, z: Point) -> Result<Point> {
    model.map(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScResult {
    pub s_b: f64,
    pub t_b: f64,
    /// `Mod F(s_b, t_b)`.
    pub modulus: f64,
}

/// Solves `f(u) = target` for `u > 0` with `f` increasing, starting from `u = 1`;
/// stops once the bracket is within `1e−10` relative to `u`.
fn solve_increasing(f: impl Fn(f64) -> Result<f64>, target: f64, what: &str) -> Result<f64> {
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut n = 0;
    while f(hi)? < target {
        hi *= 2.0;
        n += 1;
        if n > MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::BracketFailure(format!("{what}: target {target} not reached")));
        }
    }
    n = 0;
    while f(lo)? >= target {
        lo *= 0.5;
        n += 1;
        if n > MAX_DOUBLINGS || lo == 0.0 {
            return Err(Error::BracketFailure(format!("{what}: target {target} not undercut")));
        }
    }
    if hi == lo {
        hi = 2.0 * lo;
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        let mid = if hi > 2.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Preimages `t_b > 1` and `−s_b < −1` of `t′` and `−s′ + bi`. `Re φ_b` is
/// strictly increasing along both rays because `φ_b′ > 0` there.
pub fn solve_preimages(model: &GbModel, s_prime: f64, t_prime: f64) -> Result<ScResult> {
    if !(s_prime > 1.0) || !(t_prime > 1.0) || !s_prime.is_finite() || !t_prime.is_finite() {
        return Err(invalid(format!("need s′, t′ > 1, got {s_prime}, {t_prime}")));
    }
    let ut = solve_increasing(|u| Ok(model.map(Point::new(1.0 + u, 0.0))?.re), t_prime, "t_b")?;
    let us = solve_increasing(|u| Ok(-model.map(Point::new(-1.0 - u, 0.0))?.re), s_prime, "s_b")?;
    let (s_b, t_b) = (1.0 + us, 1.0 + ut);
    // The reduction (s−1)(t−1)/(2(s+t)) from the excesses directly, to keep
    // precision when s_b, t_b approach 1.
    let modulus = teichmuller_modulus(us * ut / (2.0 * (s_b + t_b)))?;
    Ok(ScResult { s_b, t_b, modulus })
}

#[derive(Debug, Clone)]
pub struct BSolution {
    pub b: f64,
    pub model: GbModel,
    pub result: ScResult,
    /// `(b, Mod F(s_b, t_b))` at every evaluated height, in evaluation order.
    pub sweep: Vec<(f64, f64)>,
}

/// Finds `b` with `Mod F(s_b, t_b) = target`. Heights `2^k` are swept to find a
/// sign change, which is then bisected in `log b`; monotonicity in `b` is not
/// assumed.
pub fn solve_b(target_modulus: f64, s_prime: f64, t_prime: f64) -> Result<BSolution> {
    let limit = double_teich_modulus(s_prime, t_prime)?;
    if !(target_modulus > 0.0) {
        return Err(invalid(format!("target modulus must be positive, got {target_modulus}")));
    }
    if target_modulus >= limit {
        return Err(Error::HypothesisViolated(format!(
            "target modulus {target_modulus} is not below Mod F(s′, t′) = {limit}, the b → 0 limit"
        )));
    }
    let mut sweep = Vec::new();
    let mut eval = |b: f64| -> Result<f64> {
        let m = solve_preimages(&build_gb(b)?, s_prime, t_prime)?.modulus;
        sweep.push((b, m));
        Ok(m)
    };
    // Above the target at the low end, at or below it at the high end.
    let ks: Vec<i32> = (-12..=12).collect();
    let mut values = Vec::with_capacity(ks.len());
    for &k in &ks {
        values.push(eval(2f64.powi(k))?);
    }
    let mut bracket = ks.windows(2).zip(values.windows(2)).find(|(_, v)| v[0] > target_modulus && v[1] <= target_modulus);
    let (mut lo, mut hi);
    if let Some((k, _)) = bracket.take() {
        lo = 2f64.powi(k[0]);
        hi = 2f64.powi(k[1]);
    } else if values[0] <= target_modulus {
        // Only very small heights reach the target.
        hi = 2f64.powi(ks[0]);
        lo = hi;
        while eval(lo)? <= target_modulus {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-15 {
                return Err(Error::BracketFailure(format!("no b ≥ 1e-15 reaches modulus {target_modulus}")));
            }
        }
    } else {
        lo = 2f64.powi(ks[ks.len() - 1]);
        hi = lo;
        while eval(hi)? > target_modulus {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::BracketFailure(format!("no b ≤ 1e12 reaches modulus {target_modulus}")));
            }
        }
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let m = eval(mid)?;
        if (m - target_modulus).abs() < 1e-6 * 1e-2 || hi / lo - 1.0 < 1e-14 {
            break;
        }
        if m > target_modulus {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let b = (lo * hi).sqrt();
    let model = build_gb(b)?;
    let result = solve_preimages(&model, s_prime, t_prime)?;
    if (result.modulus - target_modulus).abs() >= 1e-6 {
        return Err(Error::ConstructionFailed(format!(
            "bisection in b stalled at residual {}",
            (result.modulus - target_modulus).abs()
        )));
    }
    Ok(BSolution { b, model, result, sweep })
}

/// `h = Re φ_b + i Im z` on `F(s_b, t_b)`, reflected to the lower half-plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ScShearSpec", into = "ScShearSpec")]
pub struct ScShearMap {
    pub model: GbModel,
    pub result: ScResult,
    pub s_prime: f64,
    pub t_prime: f64,
}

/// Serialised form of [`ScShearMap`]; the quadrature rules are rebuilt on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScShearSpec {
    pub b: f64,
    pub mu: f64,
    pub c: f64,
    pub s_b: f64,
    pub t_b: f64,
    pub modulus: f64,
    pub s_prime: f64,
    pub t_prime: f64,
}

impl From<ScShearMap> for ScShearSpec {
    fn from(m: ScShearMap) -> Self {
        ScShearSpec {
            b: m.model.b,
            mu: m.model.mu,
            c: m.model.c,
            s_b: m.result.s_b,
            t_b: m.result.t_b,
            modulus: m.result.modulus,
            s_prime: m.s_prime,
            t_prime: m.t_prime,
        }
    }
}

impl TryFrom<ScShearSpec> for ScShearMap {
    type Error = Error;
    fn try_from(s: ScShearSpec) -> Result<Self> {
        Ok(ScShearMap {
            model: build_gb(s.b)?,
            result: ScResult { s_b: s.s_b, t_b: s.t_b, modulus: s.modulus },
            s_prime: s.s_prime,
            t_prime: s.t_prime,
        })
    }
}

pub fn assemble_shear_harmonic(model: &GbModel, result: &ScResult, s_prime: f64, t_prime: f64) -> ScShearMap {
    ScShearMap { model: model.clone(), result: *result, s_prime, t_prime }
}

impl ScShearMap {
    pub fn eval(&self, z: Point) -> Result<Point> {
        if z.im >= 0.0 {
            Ok(Point::new(self.model.map(z)?.re, z.im))
        } else {
            Ok(self.eval(z.conj())?.conj())
        }
    }

    /// `(h_z, h_z̄)`. In the upper half-plane `h_z = (φ′ + 1)/2` and
    /// `h_z̄ = (conj φ′ − 1)/2`; below, `H_z(z) = conj h_z(z̄)` and
    /// `H_z̄(z) = conj h_z̄(z̄)`.
    pub fn wirtinger(&self, z: Point) -> (Point, Point) {
        let w = if z.im >= 0.0 { z } else { z.conj() };
        let d = self.model.derivative(w);
        let hz = (d + 1.0) * 0.5;
        let hzb = (d.conj() - 1.0) * 0.5;
        if z.im >= 0.0 {
            (hz, hzb)
        } else {
            (hz.conj(), hzb.conj())
        }
    }

    pub fn source_ring(&self) -> crate::CanonicalRing {
        crate::CanonicalRing::DoubleTeich { s: self.result.s_b, t: self.result.t_b }
    }

    pub fn target_ring(&self) -> crate::CanonicalRing {
        crate::CanonicalRing::DoubleTeich { s: self.s_prime, t: self.t_prime }
    }
}

/// Largest mean-value defect `|avg_{|w−x|=r} h(w) − h(x)|` over points `x` of
/// the reflection gaps `(−s_b, −1)` and `(1, t_b)`, with
/// `r = min(δ, half the distance from x to the gap ends)`.
///
/// Circle averages are exact for harmonic functions and the trapezoid rule
/// converges geometrically on them, so any defect above rounding signals a
/// kink across the gap. A five-point stencil would instead carry an `O(δ⁴)`
/// truncation term and cannot fit in gaps narrower than `2δ`.
pub fn seam_harmonicity_residual(map: &ScShearMap, delta: f64) -> Result<f64> {
    const SAMPLES: usize = 15;
    const RING: usize = 64;
    let gaps = [(-map.result.s_b, -1.0), (1.0, map.result.t_b)];
    let mut worst = 0.0_f64;
    for (a, b) in gaps {
        for k in 1..=SAMPLES {
            let x = a + (b - a) * k as f64 / (SAMPLES + 1) as f64;
            let r = delta.min(0.5 * (x - a).min(b - x));
            let z = Point::new(x, 0.0);
            let mut avg = Point::new(0.0, 0.0);
            for j in 0..RING {
                avg += map.eval(z + Point::from_polar(r, 2.0 * std::f64::consts::PI * j as f64 / RING as f64))?;
            }
            worst = worst.max((avg / RING as f64 - map.eval(z)?).norm());
        }
    }
    Ok(worst)
}

/// Same defect for the unreflected extension `h(z̄)`, which is not harmonic
/// across the gaps; a control for [`seam_harmonicity_residual`].
#[cfg(test)]
fn odd_extension(map: &ScShearMap) -> impl Fn(Point) -> Point + '_ {
    move |z| if z.im >= 0.0 { map.eval(z).unwrap() } else { map.eval(z.conj()).unwrap() }
}
