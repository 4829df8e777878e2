//! Conformal modulus of a doubly connected domain from the capacity of the
//! condenser `(Ω_b, Ω_u)`.
//!
//! The potential `u` (0 on the bounded component, 1 on the unbounded one) is
//! computed on a tensor grid in log-polar coordinates `z = z₀ + exp(ρ + iφ)`
//! centred inside the bounded component. The Dirichlet integral is conformally
//! invariant, so in `(ρ, φ)` the finite-volume 5-point stencil has the plain
//! Cartesian conductances, and the far field costs only logarithmically many
//! rows. A boundary that cuts a grid edge at fraction `θ` from a free node
//! connects that node to the boundary value with the edge conductance divided
//! by `θ`; slits and rays are represented exactly, not rasterised.
//!
//! Grid lines pass through every singular boundary point (slit tips, ray
//! origins, reentrant corners), and finer grids bisect coarser ones. The local
//! picture at each singularity is then the same on every level, so the error
//! has a clean leading term `c hᵖ` with `p` fixed by the sharpest corner, which
//! Richardson extrapolation removes. Each level is solved by conjugate gradients
//! preconditioned with a multigrid V-cycle over the coarser levels.
//!
//! When the unbounded component is a union of rays the grid is clipped at a
//! large circle. The clip error decays like a known power of the radius and is
//! extrapolated away on the coarsest level.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::canonical::{LevelValue, ModulusEstimate, ModulusMethod};
use crate::error::{Error, Result};
use crate::geometry::{
    point_segment_distance, BoundaryComponent, DoublyConnectedDomain, LabeledSegment, PolygonIndex, Region,
    UnboundedComponent,
};
use crate::Point;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CondenserOptions {
    /// Nominal angular cells on the finest grid.
    pub resolution: usize,
    /// Number of grids used for extrapolation, each half as fine as the next.
    pub levels: usize,
    /// Clip circle radius, in units of the largest distance from the grid centre
    /// to a finite boundary point. Only used when the unbounded component is a
    /// union of rays.
    pub clip_factor: f64,
    /// Relative residual at which conjugate gradients stops.
    pub tolerance: f64,
    /// Convergence order in the grid spacing assumed by the extrapolation;
    /// `None` derives it from the sharpest boundary corner.
    pub order: Option<f64>,
}

impl Default for CondenserOptions {
    fn default() -> Self {
        CondenserOptions { resolution: 512, levels: 4, clip_factor: 1e6, tolerance: 1e-10, order: None }
    }
}

impl CondenserOptions {
    /// Coarse grids for objective evaluations inside optimisers and sweeps.
    pub fn fast() -> Self {
        CondenserOptions { resolution: 128, levels: 3, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_MG_PHI
            || self.levels == 0
            || self.levels > 12
            || !(self.clip_factor > 1.0)
            || !(self.tolerance > 0.0)
            || self.order.is_some_and(|p| !(p > 0.0))
        {
            return Err(Error::InvalidInput(format!("bad condenser options {self:?}")));
        }
        if self.resolution % (1 << self.levels) != 0 || self.resolution >> (self.levels - 1) < MIN_MG_PHI {
            return Err(Error::InvalidInput(format!(
                "resolution {} cannot be halved {} times down to at least {MIN_MG_PHI} even cells",
                self.resolution,
                self.levels - 1
            )));
        }
        Ok(())
    }
}

const NONE: u32 = u32::MAX;
/// Smallest cut fraction; keeps the conductance of near-boundary nodes finite.
const MIN_CUT: f64 = 1e-6;
/// Coarse hashing block, in grid cells.
const BLOCK: usize = 4;
/// Radius of the disk used as the inner boundary when the bounded component is
/// a slit, relative to the slit half-length.
const SLIT_CORE: f64 = 1e-3;
/// Coarsest multigrid level, in angular cells.
const MIN_MG_PHI: usize = 8;
/// Largest coarsest-level system factorised densely.
const MAX_DENSE: usize = 1500;
const SMOOTH_STEPS: usize = 2;
const JACOBI_DAMPING: f64 = 0.8;
const MAX_MG_ITER: usize = 400;
/// Corners whose opening into the domain exceeds this many half-turns are singular.
const SINGULAR_OPENING: f64 = 1.1;
/// Key lines closer than this fraction of a coarse cell to a kept one are dropped.
const KEY_MERGE: f64 = 0.25;

/// Grid placement shared by all levels of one domain.
#[derive(Debug, Clone, PartialEq)]
struct Frame {
    center: Point,
    rho_min: f64,
    rho_max: f64,
    /// Points that grid lines must pass through.
    keys: Vec<Point>,
    /// Leading order of the discretisation error.
    order: f64,
    /// Decay exponent of the clip error in the energy, `2π / (widest gap between
    /// ray directions)`.
    clip_exponent: Option<f64>,
}

/// Singular boundary points and the opening angle of the domain at each.
fn singular_points(domain: &DoublyConnectedDomain) -> Vec<(Point, f64)> {
    let corners = |poly: &[Point], bounded: bool| -> Vec<(Point, f64)> {
        let n = poly.len();
        let area: f64 = (0..n).map(|k| poly[k].re * poly[(k + 1) % n].im - poly[(k + 1) % n].re * poly[k].im).sum();
        let ccw = if area > 0.0 { 1.0 } else { -1.0 };
        (0..n)
            .filter_map(|k| {
                let (a, b, c) = (poly[(k + n - 1) % n], poly[k], poly[(k + 1) % n]);
                let turn = ((c - b) / (b - a)).arg() * ccw;
                let interior = PI - turn;
                let opening = if bounded { TAU - interior } else { interior };
                (opening > SINGULAR_OPENING * PI).then_some((b, opening))
            })
            .collect()
    };
    let mut out = match &domain.bounded {
        BoundaryComponent::Point(p) => vec![(*p, TAU)],
        BoundaryComponent::Segment(a, b) => vec![(*a, TAU), (*b, TAU)],
        BoundaryComponent::Polygon(v) => corners(v, true),
    };
    match &domain.unbounded {
        UnboundedComponent::ExteriorOf(v) => out.extend(corners(v, false)),
        UnboundedComponent::Rays(rays) => out.extend(rays.iter().map(|r| (r.from, TAU))),
    }
    out
}

fn frame(domain: &DoublyConnectedDomain, clip_factor: f64) -> Result<Frame> {
    let center = domain.bounded_anchor();
    let r_min = match &domain.bounded {
        BoundaryComponent::Point(_) => return Err(Error::DegenerateDomain("bounded component is a point".into())),
        BoundaryComponent::Segment(a, b) => 0.5 * (*b - *a).norm() * SLIT_CORE,
        BoundaryComponent::Polygon(v) => {
            let clearance = (0..v.len())
                .map(|k| point_segment_distance(center, v[k], v[(k + 1) % v.len()]))
                .fold(f64::INFINITY, f64::min);
            0.5 * clearance
        }
    };
    if !(r_min > 0.0) {
        return Err(Error::DegenerateDomain("bounded component has no interior anchor".into()));
    }
    let reach = domain
        .bounded
        .vertices()
        .into_iter()
        .chain(domain.unbounded.anchor_points())
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    let (r_max, clip_exponent) = match &domain.unbounded {
        UnboundedComponent::ExteriorOf(_) => (reach * 1.01, None),
        UnboundedComponent::Rays(rays) => {
            let mut angles: Vec<f64> = rays.iter().map(|r| r.dir.im.atan2(r.dir.re).rem_euclid(TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let gap = (0..angles.len())
                .map(|k| if k + 1 < angles.len() { angles[k + 1] - angles[k] } else { angles[0] + TAU - angles[k] })
                .fold(0.0, f64::max);
            (reach * clip_factor, Some(TAU / gap.max(1e-9)))
        }
    };
    let singular = singular_points(domain);
    let order = singular.iter().map(|&(_, beta)| TAU / beta).fold(2.0, f64::min);
    Ok(Frame {
        center,
        rho_min: r_min.ln(),
        rho_max: r_max.ln(),
        keys: singular.into_iter().map(|(p, _)| p).collect(),
        order,
        clip_exponent,
    })
}

/// Coordinates from `start` through the given interior keys to `end`, with
/// cells of about `h` and a total count divisible by `multiple`. With
/// `open_end`, cells past the last key are exactly `h` and `end` moves outward
/// to fit them, so the cells around the keys do not depend on `end`.
fn lay_out(start: f64, end: f64, keys: &mut [f64], h: f64, multiple: usize, open_end: bool) -> Vec<f64> {
    keys.sort_by(f64::total_cmp);
    let mut stops = vec![start];
    for &k in keys.iter() {
        if k - stops[stops.len() - 1] >= KEY_MERGE * h && end - k >= KEY_MERGE * h {
            stops.push(k);
        }
    }
    stops.push(end);
    let last = stops.len() - 2;
    let mut counts: Vec<usize> = stops.windows(2).map(|w| ((w[1] - w[0]) / h).round().max(1.0) as usize).collect();
    if open_end {
        counts[last] = ((stops[last + 1] - stops[last]) / h).ceil().max(1.0) as usize;
    }
    let total: usize = counts.iter().sum();
    let padded = total.div_ceil(multiple) * multiple;
    let grow = if open_end {
        last
    } else {
        (0..counts.len())
            .max_by(|&a, &b| (stops[a + 1] - stops[a]).total_cmp(&(stops[b + 1] - stops[b])))
            .expect("at least one interval")
    };
    counts[grow] += padded - total;
    if open_end {
        stops[last + 1] = stops[last] + counts[last] as f64 * h;
    }
    let mut out = Vec::with_capacity(padded + 1);
    for (w, &m) in stops.windows(2).zip(&counts) {
        out.extend((0..m).map(|k| w[0] + (w[1] - w[0]) * k as f64 / m as f64));
    }
    out.push(stops[stops.len() - 1]);
    out
}

/// Tensor grid in `(ρ, φ)`, mirror symmetric about `φ = 0`.
#[derive(Debug, Clone)]
pub struct LogPolarGrid {
    pub center: Point,
    /// Row coordinates, increasing; the first and last rows are Dirichlet circles.
    pub rho: Vec<f64>,
    /// Column angles on `[0, π]`; the rest are their mirror images.
    phi_half: Vec<f64>,
    /// All column angles in `[0, 2π)`.
    pub phi: Vec<f64>,
    unit: Vec<Point>,
}

impl LogPolarGrid {
    fn new(center: Point, rho: Vec<f64>, phi_half: Vec<f64>) -> Self {
        let m = phi_half.len() - 1;
        let half_unit: Vec<Point> = phi_half
            .iter()
            .map(|&a| {
                if a == 0.0 {
                    Point::new(1.0, 0.0)
                } else if a == FRAC_PI_2 {
                    Point::new(0.0, 1.0)
                } else if a == PI {
                    Point::new(-1.0, 0.0)
                } else {
                    Point::from_polar(1.0, a)
                }
            })
            .collect();
        let mut phi = phi_half[..m + 1].to_vec();
        let mut unit = half_unit.clone();
        for j in (1..m).rev() {
            phi.push(TAU - phi_half[j]);
            unit.push(half_unit[j].conj());
        }
        LogPolarGrid { center, rho, phi_half, phi, unit }
    }

    pub fn n_rho(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    /// Nominal angular spacing.
    pub fn h(&self) -> f64 {
        PI / (self.phi_half.len() - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        self.center + self.unit[j % self.unit.len()] * self.rho[i].exp()
    }

    /// Angular width of the cell between columns `j` and `j + 1`.
    fn dphi(&self, j: usize) -> f64 {
        let n = self.phi.len();
        if j + 1 < n {
            self.phi[j + 1] - self.phi[j]
        } else {
            TAU - self.phi[n - 1]
        }
    }

    fn refine(&self) -> Self {
        let bisect = |v: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(2 * v.len());
            for w in v.windows(2) {
                out.push(w[0]);
                out.push(0.5 * (w[0] + w[1]));
            }
            out.push(v[v.len() - 1]);
            out
        };
        LogPolarGrid::new(self.center, bisect(&self.rho), bisect(&self.phi_half))
    }

    fn coarsen(&self) -> Option<Self> {
        let (nr, m) = (self.n_rho(), self.phi_half.len() - 1);
        if nr % 2 != 0 || m % 2 != 0 || nr < 4 || m < MIN_MG_PHI {
            return None;
        }
        let even = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
        Some(LogPolarGrid::new(self.center, even(&self.rho), even(&self.phi_half)))
    }

    fn locate(&self, z: Point) -> (usize, usize) {
        let d = z - self.center;
        let rho = d.norm().ln();
        let i = self.rho.partition_point(|&r| r <= rho).saturating_sub(1).min(self.n_rho());
        let phi = d.im.atan2(d.re).rem_euclid(TAU);
        let j = self.phi.partition_point(|&a| a <= phi).saturating_sub(1);
        (i, j)
    }
}

/// The coarsest grid used for extrapolation, aligned to the frame's key points.
fn base_grid(fr: &Frame, n_phi: usize) -> LogPolarGrid {
    let mut coarsenings = 0;
    while n_phi % (2 << coarsenings) == 0 && n_phi >> (coarsenings + 1) >= MIN_MG_PHI {
        coarsenings += 1;
    }
    let multiple = 1 << coarsenings;
    let h = TAU / n_phi as f64;
    let mut rho_keys: Vec<f64> = fr
        .keys
        .iter()
        .map(|k| (k - fr.center).norm().ln())
        .filter(|&r| r > fr.rho_min && r < fr.rho_max)
        .collect();
    let mut phi_keys: Vec<f64> = fr
        .keys
        .iter()
        .filter(|k| (*k - fr.center).norm() > 0.0)
        .map(|k| {
            let a = (k - fr.center).im.atan2((k - fr.center).re).abs();
            a.min(PI)
        })
        .filter(|&a| a > 0.0 && a < PI)
        .collect();
    let rho = lay_out(fr.rho_min, fr.rho_max, &mut rho_keys, h, multiple, true);
    let phi_half = lay_out(0.0, PI, &mut phi_keys, h, multiple, false);
    LogPolarGrid::new(fr.center, rho, phi_half)
}

/// Parameter interval along `p → q` on which the chord meets segment `a–b`.
/// Tolerances are relative to the chord length, not the segment length.
fn chord_hit(p: Point, q: Point, a: Point, b: Point) -> Option<(f64, f64)> {
    const SLACK: f64 = 1e-10;
    let d = q - p;
    // Bounding boxes apart by more than the slack: no hit.
    let margin = 1e-9 * (d.re.abs() + d.im.abs());
    if a.re.max(b.re) < p.re.min(q.re) - margin
        || a.re.min(b.re) > p.re.max(q.re) + margin
        || a.im.max(b.im) < p.im.min(q.im) - margin
        || a.im.min(b.im) > p.im.max(q.im) + margin
    {
        return None;
    }
    let e = b - a;
    let cr = |u: Point, v: Point| u.re * v.im - u.im * v.re;
    let den = cr(d, e);
    let ap = a - p;
    let dn = d.norm_sqr().sqrt();
    let en = e.norm_sqr().sqrt();
    if den.abs() > 1e-13 * dn * en {
        let t = cr(ap, e) / den;
        let s = cr(ap, d) / den;
        let s_slack = SLACK * dn / en;
        if t >= -SLACK && t <= 1.0 + SLACK && s >= -s_slack && s <= 1.0 + s_slack {
            let t = t.clamp(0.0, 1.0);
            return Some((t, t));
        }
        return None;
    }
    // Parallel: only collinear overlaps count.
    if cr(ap, d).abs() > SLACK * dn * dn {
        return None;
    }
    let dd = dn * dn;
    let ta = (ap.re * d.re + ap.im * d.im) / dd;
    let bp = b - p;
    let tb = (bp.re * d.re + bp.im * d.im) / dd;
    let (lo, hi) = (ta.min(tb), ta.max(tb));
    if hi < -SLACK || lo > 1.0 + SLACK {
        None
    } else {
        Some((lo.max(0.0), hi.min(1.0)))
    }
}

/// Discretisation of the condenser problem on one grid.
#[derive(Debug, Clone)]
pub struct CondenserProblem {
    pub grid: LogPolarGrid,
    /// Boundary value of each node, `NaN` for free nodes. Row-major in `(ρ, φ)`.
    fixed: Vec<f64>,
    free_index: Vec<u32>,
    free_nodes: Vec<u32>,
    /// Free neighbours of each free node and the link conductances.
    nbr: Vec<[u32; 4]>,
    weight: Vec<[f64; 4]>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    /// `Σ c g²` over the boundary links of each free node.
    cut_const: Vec<f64>,
}

/// Solved potential on the grid of a [`CondenserProblem`].
#[derive(Debug, Clone)]
pub struct Potential {
    /// Node values, row-major in `(ρ, φ)`.
    pub values: Vec<f64>,
    pub n_rho: usize,
    pub n_phi: usize,
    pub energy: f64,
    pub iterations: usize,
}

impl Potential {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j % self.n_phi]
    }

    pub fn modulus(&self) -> f64 {
        TAU / self.energy
    }
}

impl CondenserProblem {
    fn build(domain: &DoublyConnectedDomain, grid: LogPolarGrid) -> Result<Self> {
        let (n_rho, n_phi) = (grid.n_rho(), grid.n_phi());
        let rows = n_rho + 1;
        let r_outer = grid.rho[n_rho].exp();

        // Rays truncated well beyond the outer circle.
        let segments = domain.boundary_segments(2.0 * (r_outer + domain.extent() + grid.center.norm()));
        let hash = SegmentHash::new(&segments, &grid);

        let inner_poly = match &domain.bounded {
            BoundaryComponent::Polygon(v) => Some(PolygonIndex::new(v)),
            _ => None,
        };
        let outer_poly = match &domain.unbounded {
            UnboundedComponent::ExteriorOf(v) => Some(PolygonIndex::new(v)),
            _ => None,
        };
        let classify = |z: Point| -> Region {
            let in_b = match &inner_poly {
                Some(ix) => ix.contains(z),
                None => domain.bounded.contains(z),
            };
            if in_b {
                return Region::Bounded;
            }
            let in_u = match &outer_poly {
                Some(ix) => !ix.contains(z),
                None => domain.unbounded.contains(z),
            };
            if in_u {
                Region::Unbounded
            } else {
                Region::Domain
            }
        };
        let fixed: Vec<f64> = (0..rows * n_phi)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / n_phi, k % n_phi);
                if i == 0 {
                    0.0
                } else if i == n_rho {
                    1.0
                } else {
                    match classify(grid.node(i, j)) {
                        Region::Bounded => 0.0,
                        Region::Unbounded => 1.0,
                        Region::Domain => f64::NAN,
                    }
                }
            })
            .collect();

        // Neighbouring nodes pinned to different values: the grid cannot
        // separate the two components there.
        for i in 0..rows {
            for j in 0..n_phi {
                let a = fixed[i * n_phi + j];
                if a.is_nan() {
                    continue;
                }
                let right = fixed[i * n_phi + (j + 1) % n_phi];
                let up = if i + 1 < rows { fixed[(i + 1) * n_phi + j] } else { f64::NAN };
                if (!right.is_nan() && right != a) || (!up.is_nan() && up != a) {
                    return Err(Error::ResolutionTooCoarse(format!(
                        "components touch on the {n_phi}-cell grid near {}",
                        grid.node(i, j)
                    )));
                }
            }
        }

        let mut free_index = vec![NONE; rows * n_phi];
        let mut free_nodes = Vec::new();
        for (k, v) in fixed.iter().enumerate() {
            if v.is_nan() {
                free_index[k] = free_nodes.len() as u32;
                free_nodes.push(k as u32);
            }
        }
        if free_nodes.is_empty() {
            return Err(Error::ResolutionTooCoarse("no grid nodes inside the domain".into()));
        }

        let per_node: Vec<([u32; 4], [f64; 4], f64, f64, f64)> = free_nodes
            .par_iter()
            .map(|&k| {
                let k = k as usize;
                let (i, j) = (k / n_phi, k % n_phi);
                let (jp, jm) = ((j + 1) % n_phi, (j + n_phi - 1) % n_phi);
                let dual_phi = 0.5 * (grid.dphi(j) + grid.dphi(jm));
                let dual_rho = 0.5 * (grid.rho[i + 1] - grid.rho[i - 1]);
                let links = [
                    ((i + 1, j), dual_phi / (grid.rho[i + 1] - grid.rho[i])),
                    ((i - 1, j), dual_phi / (grid.rho[i] - grid.rho[i - 1])),
                    ((i, jp), dual_rho / grid.dphi(j)),
                    ((i, jm), dual_rho / grid.dphi(jm)),
                ];
                let mut nbr = [NONE; 4];
                let mut weight = [0.0; 4];
                let (mut diag, mut rhs, mut cconst) = (0.0, 0.0, 0.0);
                for (slot, &((ni, nj), w)) in links.iter().enumerate() {
                    let nk = ni * n_phi + nj;
                    // Intersections are computed along the edge from its lower
                    // index end, so both ends agree on whether the edge is cut.
                    let (lo_node, hi_node) = if k < nk { ((i, j), (ni, nj)) } else { ((ni, nj), (i, j)) };
                    let (p, q) = (grid.node(lo_node.0, lo_node.1), grid.node(hi_node.0, hi_node.1));
                    let mut first: Option<(f64, bool)> = None;
                    let mut last: Option<(f64, bool)> = None;
                    for &s in hash.candidates(lo_node.0, lo_node.1) {
                        let seg = &segments[s as usize];
                        if let Some((lo, hi)) = chord_hit(p, q, seg.a, seg.b) {
                            if first.map_or(true, |(t, _)| lo < t) {
                                first = Some((lo, seg.outer));
                            }
                            if last.map_or(true, |(t, _)| hi > t) {
                                last = Some((hi, seg.outer));
                            }
                        }
                    }
                    let hit = if k < nk { first } else { last.map(|(t, o)| (1.0 - t, o)) };
                    match (hit, fixed[nk].is_nan()) {
                        (None, true) => {
                            nbr[slot] = free_index[nk];
                            weight[slot] = w;
                            diag += w;
                        }
                        (None, false) => {
                            let g = fixed[nk];
                            diag += w;
                            rhs += w * g;
                            cconst += w * g * g;
                        }
                        (Some((t, outer)), _) => {
                            let c = w / t.max(MIN_CUT);
                            let g = if outer { 1.0 } else { 0.0 };
                            diag += c;
                            rhs += c * g;
                            cconst += c * g * g;
                        }
                    }
                }
                (nbr, weight, diag, rhs, cconst)
            })
            .collect();

        let n = per_node.len();
        let mut nbr = Vec::with_capacity(n);
        let mut weight = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        let mut cut_const = Vec::with_capacity(n);
        for (a, w, d, r, c) in per_node {
            nbr.push(a);
            weight.push(w);
            diag.push(d);
            rhs.push(r);
            cut_const.push(c);
        }
        Ok(CondenserProblem { grid, fixed, free_index, free_nodes, nbr, weight, diag, rhs, cut_const })
    }

    pub fn free_count(&self) -> usize {
        self.free_nodes.len()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            let mut acc = self.diag[k] * x[k];
            for (&n, &w) in self.nbr[k].iter().zip(&self.weight[k]) {
                if n != NONE {
                    acc -= w * x[n as usize];
                }
            }
            *o = acc;
        });
    }

    /// Dirichlet energy: free–free edges once each, boundary links per free node.
    fn energy(&self, x: &[f64]) -> f64 {
        chunked_sum(x.len(), |k| {
            let mut e = 0.0;
            let mut coupled = 0.0;
            for (&n, &w) in self.nbr[k].iter().zip(&self.weight[k]) {
                if n != NONE {
                    coupled += w;
                    if (n as usize) > k {
                        let d = x[k] - x[n as usize];
                        e += w * d * d;
                    }
                }
            }
            // Σ c (u − g)² over boundary links, with Σ c = diag − coupled.
            let c = self.diag[k] - coupled;
            e + c * x[k] * x[k] - 2.0 * self.rhs[k] * x[k] + self.cut_const[k]
        })
    }

    fn residual(&self, x: &[f64], b: &[f64], out: &mut [f64]) {
        self.apply(x, out);
        out.par_iter_mut().zip(b).for_each(|(o, b)| *o = b - *o);
    }

    fn jacobi_sweeps(&self, x: &mut [f64], b: &[f64], steps: usize, scratch: &mut [f64]) {
        for _ in 0..steps {
            self.residual(x, b, scratch);
            x.par_iter_mut()
                .zip(scratch.par_iter())
                .zip(self.diag.par_iter())
                .for_each(|((x, r), d)| *x += JACOBI_DAMPING * r / d);
        }
    }

    fn potential(&self, x: &[f64], iterations: usize) -> Potential {
        let mut values = self.fixed.clone();
        for (k, &node) in self.free_nodes.iter().enumerate() {
            values[node as usize] = x[k];
        }
        Potential {
            values,
            n_rho: self.grid.n_rho(),
            n_phi: self.grid.n_phi(),
            energy: self.energy(x),
            iterations,
        }
    }
}

/// Sum over `0..n` in fixed chunks, so the result does not depend on thread scheduling.
fn chunked_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    chunked_sum(a.len(), |k| a[k] * b[k])
}

/// Boundary segments bucketed by blocks of grid cells; each segment is
/// registered in every block it passes through and in their neighbours.
struct SegmentHash {
    blocks_phi: usize,
    cells: Vec<Vec<u32>>,
}

impl SegmentHash {
    fn new(segments: &[LabeledSegment], grid: &LogPolarGrid) -> Self {
        let blocks_rho = grid.n_rho() / BLOCK + 2;
        let blocks_phi = grid.n_phi().div_ceil(BLOCK);
        let mut cells: Vec<Vec<u32>> = vec![Vec::new(); blocks_rho * blocks_phi];
        let min_cell = grid
            .rho
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain((0..grid.n_phi()).map(|j| grid.dphi(j)))
            .fold(f64::INFINITY, f64::min);
        let r_min = grid.rho[0].exp();
        let r_max = grid.rho[grid.n_rho()].exp();
        for (s, seg) in segments.iter().enumerate() {
            let len = (seg.b - seg.a).norm();
            let mut t = 0.0_f64;
            loop {
                let p = seg.a + (seg.b - seg.a) * t.min(1.0);
                let r = (p - grid.center).norm();
                if r <= r_max * 1.5 {
                    let (bi, bj) = if r < r_min {
                        (0, 0)
                    } else {
                        let (i, j) = grid.locate(p);
                        ((i / BLOCK) as isize, (j / BLOCK) as isize)
                    };
                    // Inside the core every angular block is adjacent.
                    let dj_range = if r < r_min { 0..=blocks_phi as isize - 1 } else { -1..=1 };
                    for ii in bi - 1..=bi + 1 {
                        if ii < 0 || ii >= blocks_rho as isize {
                            continue;
                        }
                        for dj in dj_range.clone() {
                            let jj = (bj + dj).rem_euclid(blocks_phi as isize) as usize;
                            let cell = &mut cells[ii as usize * blocks_phi + jj];
                            if cell.last() != Some(&(s as u32)) {
                                cell.push(s as u32);
                            }
                        }
                    }
                }
                if t >= 1.0 || len == 0.0 {
                    break;
                }
                // Half a block at the local radius.
                t += 0.5 * BLOCK as f64 * min_cell * r.max(r_min) / len;
            }
        }
        for c in &mut cells {
            c.sort_unstable();
            c.dedup();
        }
        SegmentHash { blocks_phi, cells }
    }

    fn candidates(&self, i: usize, j: usize) -> &[u32] {
        &self.cells[(i / BLOCK) * self.blocks_phi + (j / BLOCK) % self.blocks_phi]
    }
}

/// Linear interpolation weights of fine line `i` from the even lines around it.
fn line_weights(coord: impl Fn(usize) -> f64, i: usize) -> [(usize, f64); 2] {
    if i % 2 == 0 {
        [(i / 2, 1.0), (i / 2 + 1, 0.0)]
    } else {
        let (a, x, b) = (coord(i - 1), coord(i), coord(i + 1));
        [(i / 2, (b - x) / (b - a)), (i / 2 + 1, (x - a) / (b - a))]
    }
}

/// Interpolation weights of every fine node from the coarse grid made of its even lines.
fn node_weights(fine: &LogPolarGrid, i: usize, j: usize) -> [((usize, usize), f64); 4] {
    let n = fine.n_phi();
    let rows = line_weights(|k| fine.rho[k], i);
    let cols = line_weights(|k| if k < n { fine.phi[k] } else { TAU + fine.phi[k - n] }, j);
    let nc = n / 2;
    let mut out = [((0, 0), 0.0); 4];
    for (a, &(ci, wi)) in rows.iter().enumerate() {
        for (b, &(cj, wj)) in cols.iter().enumerate() {
            out[2 * a + b] = ((ci.min(fine.n_rho() / 2), cj % nc), wi * wj);
        }
    }
    out
}

/// Interpolation from a grid to the next finer one, restricted to free nodes;
/// restriction is its transpose.
#[derive(Debug, Clone)]
struct Transfer {
    interp: Vec<Vec<(u32, f64)>>,
    transpose: Vec<Vec<(u32, f64)>>,
}

impl Transfer {
    fn new(fine: &CondenserProblem, coarse: &CondenserProblem) -> Self {
        let nf = fine.grid.n_phi();
        let nc = coarse.grid.n_phi();
        let interp: Vec<Vec<(u32, f64)>> = fine
            .free_nodes
            .iter()
            .map(|&k| {
                let k = k as usize;
                node_weights(&fine.grid, k / nf, k % nf)
                    .iter()
                    .filter(|(_, w)| *w != 0.0)
                    .filter_map(|&((ci, cj), w)| {
                        let c = coarse.free_index[ci * nc + cj];
                        (c != NONE).then_some((c, w))
                    })
                    .collect()
            })
            .collect();
        let mut transpose = vec![Vec::new(); coarse.free_count()];
        for (f, row) in interp.iter().enumerate() {
            for &(c, w) in row {
                transpose[c as usize].push((f as u32, w));
            }
        }
        Transfer { interp, transpose }
    }

    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        fine.par_iter_mut()
            .zip(self.interp.par_iter())
            .for_each(|(f, row)| *f += row.iter().map(|&(c, w)| w * coarse[c as usize]).sum::<f64>());
    }

    fn restrict(&self, fine: &[f64]) -> Vec<f64> {
        self.transpose
            .par_iter()
            .map(|row| row.iter().map(|&(f, w)| w * fine[f as usize]).sum())
            .collect()
    }
}

enum CoarseSolver {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Iterative,
}

/// Nested grids for one domain, finest first.
struct Hierarchy {
    levels: Vec<CondenserProblem>,
    transfers: Vec<Transfer>,
    coarse: CoarseSolver,
}

impl Hierarchy {
    /// Refines `base` `refinements` times for the upper levels and coarsens it
    /// for multigrid while the coarse grids still resolve the domain.
    fn new(domain: &DoublyConnectedDomain, base: LogPolarGrid, refinements: usize) -> Result<Self> {
        let mut grids = vec![base];
        for _ in 0..refinements {
            let finer = grids[0].refine();
            grids.insert(0, finer);
        }
        let mut levels = Vec::with_capacity(grids.len() + 4);
        for g in grids {
            levels.push(CondenserProblem::build(domain, g)?);
        }
        while let Some(g) = levels[levels.len() - 1].grid.coarsen() {
            match CondenserProblem::build(domain, g) {
                Ok(p) => levels.push(p),
                Err(_) => break,
            }
        }
        let transfers = levels.windows(2).map(|w| Transfer::new(&w[0], &w[1])).collect();
        let last = &levels[levels.len() - 1];
        let coarse = if last.free_count() <= MAX_DENSE {
            let n = last.free_count();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for k in 0..n {
                m[(k, k)] = last.diag[k];
                for (&j, &w) in last.nbr[k].iter().zip(&last.weight[k]) {
                    if j != NONE {
                        m[(k, j as usize)] = -w;
                    }
                }
            }
            m.cholesky().map_or(CoarseSolver::Iterative, CoarseSolver::Dense)
        } else {
            CoarseSolver::Iterative
        };
        Ok(Hierarchy { levels, transfers, coarse })
    }

    /// One symmetric V-cycle for `A_l x = b` from `x = 0`.
    fn v_cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let prob = &self.levels[l];
        if l + 1 == self.levels.len() {
            return match &self.coarse {
                CoarseSolver::Dense(c) => c.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
                CoarseSolver::Iterative => pcg(prob, vec![0.0; b.len()], b, 1e-13, 50_000, |r| jacobi(prob, r))
                    .map(|(x, _)| x)
                    .unwrap_or_else(|(x, _)| x),
            };
        }
        let mut x = vec![0.0; b.len()];
        let mut scratch = vec![0.0; b.len()];
        prob.jacobi_sweeps(&mut x, b, SMOOTH_STEPS, &mut scratch);
        prob.residual(&x, b, &mut scratch);
        let rc = self.transfers[l].restrict(&scratch);
        let ec = self.v_cycle(l + 1, &rc);
        self.transfers[l].prolong_add(&ec, &mut x);
        prob.jacobi_sweeps(&mut x, b, SMOOTH_STEPS, &mut scratch);
        x
    }

    fn solve(&self, l: usize, guess: Option<Vec<f64>>, tol: f64) -> Result<Potential> {
        let prob = &self.levels[l];
        let x0 = guess.unwrap_or_else(|| vec![0.5; prob.free_count()]);
        let (x, it) = if l + 1 < self.levels.len() {
            pcg(prob, x0, &prob.rhs, tol, MAX_MG_ITER, |r| self.v_cycle(l, r))
        } else {
            let max = 20 * (prob.grid.n_rho() + prob.grid.n_phi()) + 2000;
            pcg(prob, x0, &prob.rhs, tol, max, |r| jacobi(prob, r))
        }
        .map_err(|(_, msg)| Error::SolverFailure(msg))?;
        let pot = prob.potential(&x, it);
        if !(pot.energy > 0.0) {
            return Err(Error::SolverFailure("non-positive capacity".into()));
        }
        Ok(pot)
    }

    /// Initial guess on level `l` interpolated from the solution on level `l + 1`.
    fn prolong_solution(&self, l: usize, coarse: &Potential) -> Vec<f64> {
        let fine = &self.levels[l];
        let n = fine.grid.n_phi();
        fine.free_nodes
            .iter()
            .map(|&k| {
                let k = k as usize;
                let v: f64 = node_weights(&fine.grid, k / n, k % n)
                    .iter()
                    .filter(|(_, w)| *w != 0.0)
                    .map(|&((ci, cj), w)| w * coarse.at(ci, cj))
                    .sum();
                if v.is_finite() {
                    v
                } else {
                    0.5
                }
            })
            .collect()
    }
}

fn jacobi(prob: &CondenserProblem, r: &[f64]) -> Vec<f64> {
    r.iter().zip(&prob.diag).map(|(r, d)| r / d).collect()
}

/// Preconditioned conjugate gradients. On failure returns the last iterate and a message.
fn pcg(
    prob: &CondenserProblem,
    mut x: Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    precond: impl Fn(&[f64]) -> Vec<f64>,
) -> std::result::Result<(Vec<f64>, usize), (Vec<f64>, String)> {
    let n = x.len();
    let mut ap = vec![0.0; n];
    let mut r = vec![0.0; n];
    prob.residual(&x, b, &mut r);
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..=max_iter {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok((x, it));
        }
        if it == max_iter {
            break;
        }
        prob.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err((x, "operator lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.par_iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    Err((x, format!("conjugate gradients stalled at relative residual {rel:.3e} after {max_iter} iterations")))
}

/// Solves the condenser problem on a single grid with about `n_phi` angular cells.
pub fn solve_potential(
    domain: &DoublyConnectedDomain,
    n_phi: usize,
    clip_factor: f64,
) -> Result<(CondenserProblem, Potential)> {
    if domain.is_degenerate() {
        return Err(Error::DegenerateDomain("bounded component is a point".into()));
    }
    let fr = frame(domain, clip_factor)?;
    let hier = Hierarchy::new(domain, base_grid(&fr, n_phi), 0)?;
    let pot = hier.solve(0, None, 1e-10)?;
    let prob = hier.levels.into_iter().next().expect("finest level");
    Ok((prob, pot))
}

/// Remaining distance to the limit when the finest differences contract more
/// slowly than `order` predicts, read as a geometric series. Zero otherwise.
fn slow_tail(values: &[LevelValue], order: f64) -> f64 {
    let n = values.len();
    if n < 3 {
        return 0.0;
    }
    let last = values[n - 1].value - values[n - 2].value;
    let prev = values[n - 2].value - values[n - 3].value;
    if last == 0.0 {
        return 0.0;
    }
    let q = last / prev;
    if !(q > 0.0) || q <= 2f64.powf(-order) {
        return 0.0;
    }
    if q >= 1.0 {
        // No contraction at all: the whole observed drift is uncertain.
        return (values[n - 1].value - values[0].value).abs();
    }
    last.abs() * q / (1.0 - q)
}

/// Numerical conformal modulus with an error bar from grid refinement and clipping.
///
/// The value is the Richardson extrapolant of the two finest levels; the error
/// bar is the largest of its deviation from coarser extrapolants, the size of
/// the final correction and the observed slow-convergence tail, plus the clip
/// uncertainty.
pub fn modulus_numeric(domain: &DoublyConnectedDomain, options: &CondenserOptions) -> Result<ModulusEstimate> {
    options.validate()?;
    if domain.is_degenerate() {
        return Ok(ModulusEstimate::degenerate());
    }
    let fr = frame(domain, options.clip_factor)?;
    let order = options.order.unwrap_or(fr.order);

    // Coarse levels that cannot resolve the domain are dropped while two remain.
    let mut levels = options.levels;
    let hier = loop {
        let base = base_grid(&fr, options.resolution >> (levels - 1));
        match Hierarchy::new(domain, base, levels - 1) {
            Ok(h) => break h,
            Err(Error::ResolutionTooCoarse(_)) if levels > 2 => levels -= 1,
            Err(e) => return Err(e),
        }
    };

    let mut values = Vec::with_capacity(levels);
    let mut prev: Option<Potential> = None;
    for l in (0..levels).rev() {
        let guess = prev.as_ref().map(|p| hier.prolong_solution(l, p));
        let pot = hier.solve(l, guess, options.tolerance)?;
        values.push(LevelValue { level: levels - 1 - l, h: hier.levels[l].grid.h(), value: pot.modulus() });
        prev = Some(pot);
    }

    let factor = 2f64.powf(order) - 1.0;
    let extrapolants: Vec<f64> = values.windows(2).map(|w| w[1].value + (w[1].value - w[0].value) / factor).collect();
    let (mut value, mut error) = match extrapolants.last() {
        None => (values[0].value, values[0].h.powf(order) * values[0].value.abs()),
        Some(&best) => {
            let spread = extrapolants.iter().map(|e| (best - e).abs()).fold(0.0, f64::max);
            // The extrapolant is trusted no further than its own correction: coarse
            // levels of thin domains can agree before the asymptotic regime starts.
            let step = (best - values[values.len() - 1].value).abs();
            (best, spread.max(step).max(slow_tail(&values, order)))
        }
    };

    if let Some(gamma) = fr.clip_exponent {
        let base = base_grid(&fr, options.resolution >> (levels - 1));
        let (shift, clip_error) = clip_correction(domain, &fr, gamma, base.n_phi(), options.tolerance)?;
        value += shift;
        error += clip_error;
    }
    error += 1e-12 * value.abs();
    Ok(ModulusEstimate { value, error_estimate: error, method: ModulusMethod::Condenser { levels: values } })
}

/// Change in modulus from moving the clip circle to infinity, and its uncertainty.
///
/// The clipped modulus behaves like `M + c R^{−γ}`. Solves at `R`, `4R` and
/// `16R` give two extrapolations of `M`; their difference is the error bar.
fn clip_correction(domain: &DoublyConnectedDomain, fr: &Frame, gamma: f64, n_phi: usize, tol: f64) -> Result<(f64, f64)> {
    let mut samples = Vec::with_capacity(3);
    for k in 0..3 {
        let wide = Frame { rho_max: fr.rho_max + 2.0 * k as f64 * std::f64::consts::LN_2, ..fr.clone() };
        let hier = Hierarchy::new(domain, base_grid(&wide, n_phi), 0)?;
        let pot = hier.solve(0, None, tol)?;
        samples.push((hier.levels[0].grid.rho[hier.levels[0].grid.n_rho()].exp(), pot.modulus()));
    }
    let extrapolate = |(r1, v1): (f64, f64), (r2, v2): (f64, f64)| {
        let q = (r1 / r2).powf(gamma);
        (v2 - q * v1) / (1.0 - q)
    };
    let e1 = extrapolate(samples[0], samples[1]);
    let e2 = extrapolate(samples[1], samples[2]);
    Ok((e2 - samples[0].1, (e2 - e1).abs()))
}

/// Modulus from the closed form when the domain carries a canonical tag, else numerically.
pub fn modulus(domain: &DoublyConnectedDomain, options: &CondenserOptions) -> Result<ModulusEstimate> {
    if domain.is_degenerate() {
        return Ok(ModulusEstimate::degenerate());
    }
    match &domain.canonical {
        Some(ring) => crate::canonical::modulus_canonical(ring),
        None => modulus_numeric(domain, options),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremalCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub lhs_error: f64,
}

/// Checks `Mod Ω ≤ Mod T(d/d₀)`, with `d` the distance between the complement
/// components and `d₀` the diameter of the bounded one.
pub fn verify_extremal_bound(domain: &DoublyConnectedDomain, options: &CondenserOptions) -> Result<ExtremalCheck> {
    let sd = crate::geometry::separation_and_diameter(domain)?;
    let lhs = modulus(domain, options)?;
    let rhs = crate::canonical::teichmuller_modulus(sd.d / sd.d0)?;
    let slack = lhs.error_estimate + 1e-12 * rhs;
    Ok(ExtremalCheck { holds: lhs.value <= rhs + slack, lhs: lhs.value, rhs, lhs_error: lhs.error_estimate })
}
