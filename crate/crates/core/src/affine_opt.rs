//! Affine modulus: the supremum of the conformal modulus over affine images.
//!
//! Every affine map is a similarity composed with a squeeze
//! [`AffineMap::shear`]`(θ, α)`, `θ ∈ [0, π)`, `α ∈ (0, 1]`, so the search runs
//! over that two-parameter family: a coarse grid, then Nelder–Mead in
//! `(θ, log α)` from the best cell.

use std::f64::consts::PI;
use std::sync::Mutex;

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical::{teichmuller_modulus, ModulusEstimate};
use crate::condenser::{modulus, CondenserOptions};
use crate::error::{invalid, Error, Result};
use crate::geometry::{
    apply_affine, complement_on_a_line, projections_overlap_all_theta, separation_and_diameter, width, AffineMap,
    DoublyConnectedDomain, ShearNormalForm, UnboundedComponent, DEFAULT_THETA_SAMPLES,
};
use crate::Point;

/// `Mod f_{θ,α}(Ω)`: closed form when the image keeps a canonical tag,
/// condenser otherwise.
pub fn shear_objective(domain: &DoublyConnectedDomain, theta: f64, alpha: f64, opts: &CondenserOptions) -> Result<ModulusEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) || !theta.is_finite() {
        return Err(invalid(format!("need α ∈ (0, 1] and finite θ, got θ = {theta}, α = {alpha}")));
    }
    let image = apply_affine(&AffineMap::shear(theta, alpha), domain)?;
    modulus(&image, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineOptions {
    pub theta_samples: usize,
    pub alpha_samples: usize,
    pub alpha_floor: f64,
    pub refine_iters: u64,
    /// Stop once the spread of the simplex costs falls below this.
    pub refine_tolerance: f64,
    pub condenser: CondenserOptions,
}

impl Default for AffineOptions {
    fn default() -> Self {
        AffineOptions {
            theta_samples: 36,
            alpha_samples: 24,
            alpha_floor: 1e-3,
            refine_iters: 200,
            refine_tolerance: 1e-6,
            condenser: CondenserOptions::default(),
        }
    }
}

impl AffineOptions {
    fn validate(&self) -> Result<()> {
        if self.theta_samples == 0 || self.alpha_samples < 2 || !(self.alpha_floor > 0.0 && self.alpha_floor < 1.0) {
            return Err(invalid(format!("bad affine search options: {self:?}")));
        }
        self.condenser.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttainedFlag {
    Attained,
    BoundaryLimit,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: f64,
    pub alpha: f64,
    /// `None` when the evaluation failed, typically a squeeze too thin for the grid.
    pub modulus: Option<f64>,
    pub error: Option<f64>,
    /// `false` for the coarse grid, `true` for the refinement stage.
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineModulusResult {
    pub value: f64,
    pub error_estimate: f64,
    pub maximizer: Option<ShearNormalForm>,
    pub attained_flag: AttainedFlag,
    /// Grid evaluations in row order (θ outer, α inner), then refinement steps.
    pub trace: Vec<TracePoint>,
}

/// `(θ, log α)` folded into `θ ∈ [0, π)`, `α ∈ [floor, 1]`. A squeeze by
/// `α > 1` is a squeeze by `1/α` across the perpendicular up to scale.
fn fold(theta: f64, log_alpha: f64, floor: f64) -> (f64, f64) {
    let (theta, la) = if log_alpha > 0.0 { (theta + 0.5 * PI, -log_alpha) } else { (theta, log_alpha) };
    (theta.rem_euclid(PI), if la <= floor.ln() { floor } else { la.exp() })
}

struct Refine<'a> {
    domain: &'a DoublyConnectedDomain,
    opts: &'a AffineOptions,
    trace: Mutex<Vec<TracePoint>>,
}

impl CostFunction for Refine<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        let (theta, alpha) = fold(p[0], p[1], self.opts.alpha_floor);
        let est = shear_objective(self.domain, theta, alpha, &self.opts.condenser).ok();
        self.trace.lock().expect("trace lock").push(TracePoint {
            theta,
            alpha,
            modulus: est.as_ref().map(|e| e.value),
            error: est.as_ref().map(|e| e.error_estimate),
            refine: true,
        });
        // A failed evaluation ranks below every modulus.
        Ok(-est.map_or(0.0, |e| e.value))
    }
}

/// Log-spaced `α` from `floor` to 1 inclusive.
pub fn alpha_grid(floor: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| if k == 0 { floor } else { (floor.ln() * (1.0 - k as f64 / (n - 1) as f64)).exp() }).collect()
}

pub fn affine_modulus(domain: &DoublyConnectedDomain, opts: &AffineOptions) -> Result<AffineModulusResult> {
    opts.validate()?;
    if domain.is_degenerate() {
        return Err(Error::DegenerateDomain("affine modulus of a degenerate domain".into()));
    }
    let alphas = alpha_grid(opts.alpha_floor, opts.alpha_samples);
    let cells: Vec<(f64, f64)> = (0..opts.theta_samples)
        .flat_map(|i| {
            let theta = PI * i as f64 / opts.theta_samples as f64;
            alphas.iter().map(move |&a| (theta, a))
        })
        .collect();
    let mut trace: Vec<TracePoint> = cells
        .par_iter()
        .map(|&(theta, alpha)| {
            let est = shear_objective(domain, theta, alpha, &opts.condenser).ok();
            TracePoint {
                theta,
                alpha,
                modulus: est.as_ref().map(|e| e.value),
                error: est.as_ref().map(|e| e.error_estimate),
                refine: false,
            }
        })
        .collect();
    let best = trace
        .iter()
        .filter(|t| t.modulus.is_some())
        .max_by(|a, b| a.modulus.unwrap().total_cmp(&b.modulus.unwrap()))
        .copied()
        .ok_or_else(|| Error::Optimizer("every grid evaluation failed".into()))?;

    let mut best_point = best;
    if opts.refine_iters > 0 {
        let (t0, u0) = (best.theta, best.alpha.ln());
        let dt = PI / opts.theta_samples as f64;
        let du = -opts.alpha_floor.ln() / (opts.alpha_samples - 1) as f64;
        // Step into α < 1 so the initial simplex does not fold onto itself.
        let su = if u0 - du >= opts.alpha_floor.ln() { -du } else { du };
        let simplex = vec![vec![t0, u0], vec![t0 + dt, u0], vec![t0, u0 + su]];
        let solver = NelderMead::new(simplex)
            .with_sd_tolerance(opts.refine_tolerance)
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let problem = Refine { domain, opts, trace: Mutex::new(Vec::new()) };
        let run = Executor::new(problem, solver)
            .configure(|s| s.max_iters(opts.refine_iters))
            .run()
            .map_err(|e| Error::Optimizer(e.to_string()))?;
        let best_param = run.state().get_best_param().cloned();
        let refined = run.problem.problem.map(|p| p.trace.into_inner().expect("trace lock")).unwrap_or_default();
        if let Some(p) = best_param {
            let (theta, alpha) = fold(p[0], p[1], opts.alpha_floor);
            if let Some(hit) = refined.iter().find(|t| t.theta == theta && t.alpha == alpha && t.modulus.is_some()) {
                if hit.modulus > best_point.modulus {
                    best_point = *hit;
                }
            }
        }
        trace.extend(refined);
    }
    let alpha = best_point.alpha;
    let attained_flag = if alpha <= 2.0 * opts.alpha_floor {
        AttainedFlag::BoundaryLimit
    } else if alpha > 10.0 * opts.alpha_floor {
        AttainedFlag::Attained
    } else {
        AttainedFlag::Inconclusive
    };
    let maximizer = (attained_flag == AttainedFlag::Attained).then_some(ShearNormalForm {
        theta: best_point.theta,
        alpha,
        scale: 1.0,
        rotation: 0.0,
        reflect: false,
        shift: Point::new(0.0, 0.0),
    });
    Ok(AffineModulusResult {
        value: best_point.modulus.expect("best point evaluated"),
        error_estimate: best_point.error.unwrap_or(0.0),
        maximizer,
        attained_flag,
        trace,
    })
}

/// Upper bound `Mod T(d_α / w(Ω_b))` on `Mod f_{θ,α}(Ω)`, with `d_α` the
/// separation of the image's complement components and `w` the width of the
/// original bounded component. The squeeze keeps the component along `e^{iθ}`,
/// so the image's bounded component has diameter at least `w` for every θ.
pub fn degeneration_bound(domain: &DoublyConnectedDomain, theta: f64, alpha: f64) -> Result<f64> {
    let w = width(&domain.bounded)?.width;
    if !(w > 0.0) {
        return Err(Error::UnsupportedGeometry("degeneration bound needs a bounded component of positive width".into()));
    }
    let image = apply_affine(&AffineMap::shear(theta, alpha), domain)?;
    let d = separation_and_diameter(&image)?.d;
    teichmuller_modulus(d / w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttainabilityCheck {
    pub sufficient: bool,
    /// `1`: the bounded component is a segment; `2`: projections separate.
    pub failed_condition: Option<u8>,
    pub width: f64,
    pub witness_theta: Option<f64>,
}

/// Sufficient conditions for the affine modulus to be attained: the bounded
/// component has positive width and its projection meets that of the
/// unbounded one in every direction. Failure proves nothing.
pub fn attainability_sufficient(domain: &DoublyConnectedDomain) -> Result<AttainabilityCheck> {
    if domain.is_degenerate() {
        return Err(Error::DegenerateDomain("attainability of a degenerate domain".into()));
    }
    let w = width(&domain.bounded)?.width;
    if w <= 1e-12 * (1.0 + domain.extent()) {
        return Ok(AttainabilityCheck { sufficient: false, failed_condition: Some(1), width: w, witness_theta: None });
    }
    let overlap = projections_overlap_all_theta(domain, DEFAULT_THETA_SAMPLES)?;
    Ok(AttainabilityCheck {
        sufficient: overlap.holds,
        failed_condition: (!overlap.holds).then_some(2),
        width: w,
        witness_theta: overlap.witness_theta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffineClass {
    Degenerate,
    TeichmullerAffine,
    DoubleTeichmullerAffine,
    NotInvariant,
}

/// Domains whose modulus no affine map changes: degenerate ones, and those
/// whose complement lies on a line with one or two unbounded rays.
pub fn classify_affine_invariance(domain: &DoublyConnectedDomain) -> AffineClass {
    if domain.is_degenerate() {
        return AffineClass::Degenerate;
    }
    match (&domain.unbounded, complement_on_a_line(domain, 1e-12)) {
        (UnboundedComponent::Rays(rays), Some(_)) if rays.len() == 1 => AffineClass::TeichmullerAffine,
        (UnboundedComponent::Rays(rays), Some(_)) if rays.len() == 2 => AffineClass::DoubleTeichmullerAffine,
        _ => AffineClass::NotInvariant,
    }
}

/// Lower bound for `Φ(τ) = λ(coth(π²/(2τ)))` from
/// `λ(t) ≥ (log t − log(1 + log t))/(2 + log t)`, clamped at 0.
pub fn phi_lower(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(crate::error::domain_err(format!("phi_lower needs τ > 0, got {tau}")));
    }
    // log coth x = log1p(q) − log(1 − q) with q = e^{−2x}, stable at both ends.
    let x = PI * PI / (2.0 * tau);
    let q = (-2.0 * x).exp();
    let log_t = q.ln_1p() - (-(-2.0 * x).exp_m1()).ln();
    Ok(((log_t - log_t.ln_1p()) / (2.0 + log_t)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstructionCheck {
    pub obstructed: bool,
    /// Largest ratio `Mod_aff Ω* / Mod Ω` compatible with the error bars.
    pub ratio_upper: f64,
    /// `phi_lower` at the smallest compatible `Mod Ω`.
    pub phi_lower: f64,
}

/// `true` certifies that no harmonic homeomorphism `Ω → Ω*` exists; the
/// comparison uses the worst case over both error bars, so noise never
/// certifies. `false` is inconclusive.
pub fn necessary_obstruction(mod_omega: f64, omega_error: f64, mod_aff_target: f64, target_error: f64) -> Result<ObstructionCheck> {
    if !(mod_omega > 0.0 && mod_aff_target > 0.0) || !(omega_error >= 0.0 && target_error >= 0.0) {
        return Err(invalid(format!(
            "need positive moduli and nonnegative errors, got {mod_omega} ± {omega_error}, {mod_aff_target} ± {target_error}"
        )));
    }
    let low = mod_omega - omega_error;
    if !(low > 0.0) {
        return Ok(ObstructionCheck { obstructed: false, ratio_upper: f64::INFINITY, phi_lower: 0.0 });
    }
    let ratio_upper = (mod_aff_target + target_error) / low;
    let phi = phi_lower(low)?;
    Ok(ObstructionCheck { obstructed: ratio_upper < phi, ratio_upper, phi_lower: phi })
}
