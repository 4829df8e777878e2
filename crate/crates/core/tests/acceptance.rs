//! Acceptance suite: one PASS/FAIL line per criterion, with pinned tolerances
//! and budgets. Sub-checks listed in `UNATTAINABLE` are reported but do not
//! fail the run; each entry says why the stated threshold cannot hold.

use std::f64::consts::{E, PI};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use ringmod::affine_opt::{
    affine_modulus, attainability_sufficient, classify_affine_invariance, degeneration_bound, necessary_obstruction,
    phi_lower, shear_objective, AffineClass, AffineOptions, AttainedFlag,
};
use ringmod::canonical::{
    annulus_modulus, double_teich_modulus, double_teich_reduction, double_teich_unit_modulus, teichmuller_modulus,
};
use ringmod::condenser::{modulus_numeric, CondenserOptions};
use ringmod::geometry::{apply_affine, AffineMap};
use ringmod::harmonic::{
    construct_h_epsilon, epsilon_diagnostics, max_epsilon, power_shear_map, radial_nitsche_map, secant_slope_inequality,
    verify_map, ConformalKind, ConformalParam, HarmonicMapModel, NitscheOutcome, VerifyOptions,
};
use ringmod::sc::{assemble_shear_harmonic, build_gb, seam_harmonicity_residual, solve_b, solve_preimages};
use ringmod::{BoundaryComponent, CanonicalRing, DoublyConnectedDomain, Point, UnboundedComponent};

// Pinned tolerances and budgets.
const C1_RELATIVE: f64 = 0.05;
const C1_BUDGET: Duration = Duration::from_secs(120);
const C2_CASES: usize = 20;
const C2_FACTOR: f64 = 2.0;
const C3_STEPS: usize = 20;
const C4_BUDGET: Duration = Duration::from_secs(60);
const C4_DISTANCE: f64 = 1e-4;
const C5_CASES: usize = 100;
const C5_MARGIN: f64 = 1e-10;
const C6_RESIDUAL: f64 = 1e-6;
const C6_SEAM: f64 = 1e-6;
const C6_NEAR_ZERO: f64 = 1e-3;
const C6_LARGE_B: f64 = 0.05;
const C7_ALPHA: f64 = 0.01;
const C8_FACTOR: f64 = 2.0;
const C9_TAIL: f64 = 0.9;
const C9_HEAD: f64 = 1e-3;

/// `(criterion, sub-check, reason)`.
const UNATTAINABLE: &[(u32, &str, &str)] = &[
    (
        6,
        "Mod F(s_b,t_b) < 0.05 at b = 100",
        "Mod F decays like π²/log(16/s′) with s′ = (s_b−1)(t_b−1)/(2(s_b+t_b)); at b = 100, t_b−1 ≈ 1.4e−4 and s_b−1 ≈ 0.16 (confirmed by the local power asymptotics at both corners), so Mod F ≈ 0.66",
    ),
    (
        9,
        "phi_lower(1e6) > 0.9",
        "(log t − log(1 + log t))/(2 + log t) with t = coth(π²/2e6) ≈ 2.0e5 is 0.678; the bound reaches 0.9 only near τ ≈ 1e17",
    ),
];

struct Report {
    criterion: u32,
    checks: Vec<(String, bool, String)>,
}

impl Report {
    fn new(criterion: u32) -> Self {
        Report { criterion, checks: Vec::new() }
    }

    fn check(&mut self, name: impl Into<String>, ok: bool, detail: impl Into<String>) {
        self.checks.push((name.into(), ok, detail.into()));
    }

    fn unattainable(&self, name: &str) -> Option<&'static str> {
        UNATTAINABLE.iter().find(|(c, n, _)| *c == self.criterion && *n == name).map(|(_, _, r)| *r)
    }

    /// Prints the criterion line and returns whether any failure is unexpected.
    fn finish(&self, title: &str, elapsed: Duration) -> bool {
        let pass = self.checks.iter().all(|c| c.1);
        println!("criterion {}: {} - {title} ({:.1}s)", self.criterion, if pass { "PASS" } else { "FAIL" }, elapsed.as_secs_f64());
        let mut unexpected = false;
        for (name, ok, detail) in &self.checks {
            if !ok {
                match self.unattainable(name) {
                    Some(reason) => println!("    FAIL {name}: {detail} [documented: {reason}]"),
                    None => {
                        println!("    FAIL {name}: {detail}");
                        unexpected = true;
                    }
                }
            }
        }
        unexpected
    }
}

fn annulus(r: f64, big_r: f64) -> DoublyConnectedDomain {
    CanonicalRing::Annulus { r, big_r }.realize().unwrap()
}

fn two_polygons(inner: Vec<Point>, outer: Vec<Point>) -> DoublyConnectedDomain {
    DoublyConnectedDomain::new(BoundaryComponent::Polygon(inner), UnboundedComponent::ExteriorOf(outer), None).unwrap()
}

fn pts(v: &[(f64, f64)]) -> Vec<Point> {
    v.iter().map(|&(x, y)| Point::new(x, y)).collect()
}

/// `(Mod Ω, error, Mod Ω*, error)` pairs produced by the constructions.
type Pair = (f64, f64, f64, f64);

fn criterion1() -> Report {
    let mut rep = Report::new(1);
    let t0 = Instant::now();
    let opts = CondenserOptions::default();
    let cases = [
        ("A(1,2)", annulus(1.0, 2.0), 2f64.ln()),
        ("A(1,e)", annulus(1.0, E), 1.0),
        ("T(1)", CanonicalRing::Teichmuller { s: 1.0 }.realize().unwrap(), PI),
        ("F(3,3)", CanonicalRing::DoubleTeich { s: 3.0, t: 3.0 }.realize().unwrap(), double_teich_modulus(3.0, 3.0).unwrap()),
    ];
    for (name, d, exact) in cases {
        let m = modulus_numeric(&d, &opts).unwrap();
        let err = (m.value - exact).abs();
        rep.check(
            name,
            err <= m.error_estimate && err <= C1_RELATIVE * exact,
            format!("{} ± {} vs {exact} (|err| {err:.2e})", m.value, m.error_estimate),
        );
    }
    let elapsed = t0.elapsed();
    rep.check("runtime", elapsed < C1_BUDGET, format!("{:.1}s", elapsed.as_secs_f64()));
    rep
}

fn criterion2() -> Report {
    let mut rep = Report::new(2);
    let mut rng = StdRng::seed_from_u64(2);
    // Gaps near s = 1 or t = 1 are too narrow for the fast grids.
    let opts = CondenserOptions::default();
    let mut worst = 0.0_f64;
    for k in 0..C2_CASES {
        let (s, t) = (rng.gen_range(1.0..10.0_f64).max(1.0 + 1e-9), rng.gen_range(1.0..10.0_f64).max(1.0 + 1e-9));
        let exact = teichmuller_modulus(double_teich_reduction(s, t).unwrap()).unwrap();
        let d = DoublyConnectedDomain::new(
            BoundaryComponent::Segment(Point::new(-1.0, 0.0), Point::new(1.0, 0.0)),
            UnboundedComponent::Rays(vec![
                ringmod::Ray::new(Point::new(-s, 0.0), Point::new(-1.0, 0.0)).unwrap(),
                ringmod::Ray::new(Point::new(t, 0.0), Point::new(1.0, 0.0)).unwrap(),
            ]),
            None,
        )
        .unwrap();
        match modulus_numeric(&d, &opts) {
            Ok(m) => {
                let ratio = (m.value - exact).abs() / m.error_estimate;
                worst = worst.max(ratio);
                rep.check(format!("case {k}"), ratio <= C2_FACTOR, format!("F({s:.3},{t:.3}): {} ± {} vs {exact}", m.value, m.error_estimate));
            }
            Err(e) => rep.check(format!("case {k}"), false, format!("F({s:.3},{t:.3}): {e}")),
        }
    }
    rep.check("summary", true, format!("worst |err|/estimate {worst:.2}"));
    rep
}

fn criterion3(pairs: &mut Vec<Pair>) -> Report {
    let mut rep = Report::new(3);
    let opts = VerifyOptions::default();
    let (mut verified, mut none, mut degenerate) = (0, 0, 0);
    for i in 1..=C3_STEPS {
        let x = 1.0 + 4.0 * i as f64 / C3_STEPS as f64;
        let src = annulus(1.0, x);
        for j in 1..=C3_STEPS {
            let y = 1.0 + 4.0 * j as f64 / C3_STEPS as f64;
            let bound = 0.5 * (x + 1.0 / x);
            let equal = (y - bound).abs() <= 1e-12 * bound;
            let above = y > bound || equal;
            match radial_nitsche_map(1.0, x, 1.0, y).unwrap() {
                NitscheOutcome::Map { map, boundary_degenerate } => {
                    let r = verify_map(&HarmonicMapModel::RadialNitsche(map), &src, &annulus(1.0, y), &opts).unwrap();
                    let ok = above && r.verdict.pass && r.winding_degree == 1 && boundary_degenerate == equal && r.boundary_degenerate == equal;
                    rep.check(format!("({x:.1},{y:.1})"), ok, format!("{:?}, degenerate {boundary_degenerate}", r.verdict));
                    verified += 1;
                    degenerate += equal as usize;
                    pairs.push((x.ln(), 0.0, y.ln(), 0.0));
                }
                NitscheOutcome::Nonexistent { .. } => {
                    rep.check(format!("({x:.1},{y:.1})"), !above, "nonexistence claimed above the bound");
                    none += 1;
                }
                other => rep.check(format!("({x:.1},{y:.1})"), false, format!("{other:?}")),
            }
        }
    }
    rep.check("summary", true, format!("{verified} verified maps ({degenerate} equality cases), {none} nonexistence"));
    rep
}

fn criterion4(pairs: &mut Vec<Pair>) -> Report {
    let mut rep = Report::new(4);
    let t0 = Instant::now();
    let params = [
        ("identity", ConformalParam::new(2.0, ConformalKind::Identity).unwrap()),
        ("mobius a=0.2", ConformalParam::new(2.0, ConformalKind::Mobius { a: 0.2 }).unwrap()),
    ];
    for (name, f) in params {
        let search = max_epsilon(&f, 1e-3).unwrap();
        rep.check(format!("{name} eps1"), search.epsilon_1 > 0.0, format!("ε₁ = {:.4}, next failure {:?}", search.epsilon_1, search.first_failure));
        let eps = 0.5 * search.epsilon_1;
        let h = construct_h_epsilon(&f, eps).unwrap();
        let src = annulus(1.0, h.rho);
        let tgt = f.target_domain(4096).unwrap();
        let r = verify_map(&HarmonicMapModel::Annulus(h.clone()), &src, &tgt, &VerifyOptions::default()).unwrap();
        rep.check(
            format!("{name} verify at eps1/2"),
            r.verdict.pass && r.jacobian_margin > 0.0 && r.winding_degree == 1 && r.boundary_distance < C4_DISTANCE,
            format!("margin {:.3e}, degree {}, distance {:.2e}", r.jacobian_margin, r.winding_degree, r.boundary_distance),
        );
        pairs.push((h.rho.ln(), 0.0, 2f64.ln(), 0.0));
        let d: Vec<_> = [0.2, 0.1, 0.05, 0.025].iter().map(|&e| epsilon_diagnostics(&f, e).unwrap()).collect();
        let dec = d.windows(2).all(|w| w[1].sup_deviation < w[0].sup_deviation && w[1].sup_dzbar < w[0].sup_dzbar);
        rep.check(
            format!("{name} diagnostics decrease"),
            dec,
            format!("sup|h−f| {:?}, sup|h_zbar| {:?}", d.iter().map(|x| x.sup_deviation).collect::<Vec<_>>(), d.iter().map(|x| x.sup_dzbar).collect::<Vec<_>>()),
        );
    }
    let elapsed = t0.elapsed();
    rep.check("runtime", elapsed < C4_BUDGET, format!("{:.1}s", elapsed.as_secs_f64()));
    rep
}

fn criterion5(pairs: &mut Vec<Pair>) -> Report {
    let mut rep = Report::new(5);
    let mut rng = StdRng::seed_from_u64(5);
    let mut triples = vec![(0.25, 0.5, 1.25)];
    while triples.len() < C5_CASES + 1 {
        let b = rng.gen_range(0.05..0.95);
        let a = b * rng.gen_range(0.05..0.95);
        triples.push((a, b, rng.gen_range(1.01..1.49)));
    }
    let opts = VerifyOptions::default();
    let mut failures = 0;
    for (k, &(a, b, alpha)) in triples.iter().enumerate() {
        let ps = power_shear_map(a, b, alpha).unwrap();
        let src = ps.source_ring.realize().unwrap();
        let tgt = ps.target_ring.realize().unwrap();
        let r = verify_map(&HarmonicMapModel::PowerShear(ps.map), &src, &tgt, &opts).unwrap();
        let m_src = double_teich_unit_modulus(a.powf(1.0 / alpha), b.powf(1.0 / alpha)).unwrap();
        let m_tgt = double_teich_unit_modulus(a, b).unwrap();
        let ok = r.verdict.pass && secant_slope_inequality(a, b, alpha) && m_src > m_tgt + C5_MARGIN;
        if !ok || k == 0 {
            rep.check(
                format!("({a:.4},{b:.4},{alpha:.4})"),
                ok,
                format!("{:?}, Mod source {m_src} vs target {m_tgt}", r.verdict),
            );
        }
        failures += !ok as usize;
        pairs.push((m_src, 0.0, m_tgt, 0.0));
    }
    rep.check("summary", failures == 0, format!("{} triples, {failures} failures", triples.len()));
    rep
}

fn criterion6(pairs: &mut Vec<Pair>) -> Report {
    let mut rep = Report::new(6);
    let limit = double_teich_modulus(2.0, 2.0).unwrap();
    let target = 0.5 * limit;
    let sol = solve_b(target, 2.0, 2.0).unwrap();
    let residual = (sol.result.modulus - target).abs();
    rep.check("solve_b residual", residual < C6_RESIDUAL, format!("b = {:.6}, residual {residual:.2e}", sol.b));
    let h = assemble_shear_harmonic(&sol.model, &sol.result, 2.0, 2.0);
    let r = verify_map(
        &HarmonicMapModel::ScShear(h.clone()),
        &h.source_ring().realize().unwrap(),
        &h.target_ring().realize().unwrap(),
        &VerifyOptions::default(),
    )
    .unwrap();
    rep.check(
        "verify",
        r.verdict.pass,
        format!("margin {:.3e}, degree {}, distance {:.2e}, {:?}", r.jacobian_margin, r.winding_degree, r.boundary_distance, r.verdict.reasons),
    );
    let seam = seam_harmonicity_residual(&h, 1e-2).unwrap();
    rep.check("seam harmonicity", seam < C6_SEAM, format!("{seam:.2e}"));
    pairs.push((sol.result.modulus, 0.0, limit, 0.0));
    let small = solve_preimages(&build_gb(1e-3).unwrap(), 2.0, 2.0).unwrap().modulus;
    rep.check("Mod F at b = 1e-3", (small - limit).abs() < C6_NEAR_ZERO, format!("{small} vs {limit}"));
    let large = solve_preimages(&build_gb(100.0).unwrap(), 2.0, 2.0).unwrap().modulus;
    rep.check("Mod F(s_b,t_b) < 0.05 at b = 100", large < C6_LARGE_B, format!("{large}"));
    rep
}

fn criterion7() -> Report {
    let mut rep = Report::new(7);
    let condenser = CondenserOptions::fast();
    let opts = AffineOptions { theta_samples: 12, alpha_samples: 12, refine_iters: 40, condenser, ..AffineOptions::default() };
    let rings = [
        ("square in quadrilateral", two_polygons(pts(&[(-0.4, -0.4), (0.6, -0.4), (0.6, 0.6), (-0.4, 0.6)]), pts(&[(-2.0, -1.5), (2.5, -1.0), (1.5, 2.0), (-1.5, 1.8)]))),
        ("triangle in hexagon", two_polygons(pts(&[(-0.5, -0.3), (0.7, -0.2), (0.0, 0.8)]), ringmod::canonical::circle_polygon(Point::new(0.1, 0.0), 2.5, 6))),
        ("thin bar in wide box", two_polygons(pts(&[(-1.0, -0.2), (1.0, -0.2), (1.0, 0.2), (-1.0, 0.2)]), pts(&[(-3.0, -1.0), (3.0, -1.0), (3.0, 1.0), (-3.0, 1.0)]))),
    ];
    for (name, d) in rings {
        let att = attainability_sufficient(&d).unwrap();
        let res = affine_modulus(&d, &opts).unwrap();
        let alpha = res.maximizer.map(|m| m.alpha).unwrap_or(0.0);
        rep.check(
            name,
            att.sufficient && res.attained_flag == AttainedFlag::Attained && alpha > C7_ALPHA,
            format!("value {:.4} at α* = {alpha:.4}, flag {:?}, sufficient {}", res.value, res.attained_flag, att.sufficient),
        );
        check_degeneration(&mut rep, name, &d, &res.trace);
    }
    let g2 = CanonicalRing::Grotzsch { s: 2.0 }.realize_with(1024).unwrap();
    let res = affine_modulus(&g2, &opts).unwrap();
    let best_alpha = res.trace.iter().filter(|t| t.modulus == Some(res.value)).map(|t| t.alpha).next().unwrap_or(1.0);
    rep.check("G(2) flag", res.attained_flag == AttainedFlag::BoundaryLimit, format!("value {:.4} at α = {best_alpha:.2e}, flag {:?}", res.value, res.attained_flag));
    // The grid column through the best θ, walked toward the floor.
    let best_theta = res.trace.iter().filter(|t| !t.refine && t.modulus.is_some()).max_by(|a, b| a.modulus.partial_cmp(&b.modulus).unwrap()).unwrap().theta;
    let mut column: Vec<_> = res.trace.iter().filter(|t| !t.refine && t.theta == best_theta).collect();
    column.sort_by(|a, b| b.alpha.total_cmp(&a.alpha));
    let monotone = column.windows(2).all(|w| match (w[0].modulus, w[1].modulus) {
        (Some(m0), Some(m1)) => m1 + w[1].error.unwrap_or(0.0) + w[0].error.unwrap_or(0.0) >= m0,
        _ => false,
    });
    rep.check(
        "G(2) monotone trace",
        monotone,
        format!("θ = {best_theta:.3}: {:?}", column.iter().map(|t| (t.alpha, t.modulus)).collect::<Vec<_>>()),
    );
    check_degeneration(&mut rep, "G(2)", &g2, &res.trace);
    rep
}

fn check_degeneration(rep: &mut Report, name: &str, d: &DoublyConnectedDomain, trace: &[ringmod::affine_opt::TracePoint]) {
    let mut worst: Option<String> = None;
    let mut count = 0;
    for t in trace {
        if let (Some(m), Some(e)) = (t.modulus, t.error) {
            let bound = degeneration_bound(d, t.theta, t.alpha).unwrap();
            count += 1;
            if m > bound + e && worst.is_none() {
                worst = Some(format!("θ {:.3} α {:.3e}: {m} > {bound}", t.theta, t.alpha));
            }
        }
    }
    rep.check(format!("{name} degeneration bound"), worst.is_none(), worst.unwrap_or_else(|| format!("{count} trace points")));
}

fn criterion8() -> Report {
    let mut rep = Report::new(8);
    let t2 = CanonicalRing::Teichmuller { s: 2.0 }.realize().unwrap();
    let sheared_t2 = apply_affine(&AffineMap::new(Point::new(1.1, 0.2), Point::new(0.3, -0.4), Point::new(0.5, 2.0)).unwrap(), &t2).unwrap();
    let punctured = DoublyConnectedDomain::new(
        BoundaryComponent::Point(Point::new(0.0, 0.0)),
        UnboundedComponent::ExteriorOf(ringmod::canonical::circle_polygon(Point::new(0.0, 0.0), 1.0, 256)),
        None,
    )
    .unwrap();
    let f23 = CanonicalRing::DoubleTeich { s: 2.0, t: 3.0 }.realize().unwrap();
    let a12 = annulus(1.0, 2.0);
    let cases = [
        ("punctured disk", &punctured, AffineClass::Degenerate),
        ("T(2)", &t2, AffineClass::TeichmullerAffine),
        ("F(2,3)", &f23, AffineClass::DoubleTeichmullerAffine),
        ("A(1,2)", &a12, AffineClass::NotInvariant),
        ("affine image of T(2)", &sheared_t2, AffineClass::TeichmullerAffine),
    ];
    for (name, d, want) in cases {
        let got = classify_affine_invariance(d);
        rep.check(name, got == want, format!("{got:?}"));
    }
    let fast = CondenserOptions::fast();
    for (name, d, exact) in [("T(2)", &t2, teichmuller_modulus(2.0).unwrap()), ("F(2,3)", &f23, double_teich_modulus(2.0, 3.0).unwrap())] {
        let mut worst = 0.0_f64;
        let mut ok = true;
        for i in 0..5 {
            for j in 1..=5 {
                let (theta, alpha) = (PI * i as f64 / 5.0, 0.2 * j as f64);
                let closed = shear_objective(d, theta, alpha, &fast).unwrap().value;
                ok &= closed == exact;
                // The same images through the condenser, untagged.
                let mut image = apply_affine(&AffineMap::shear(theta, alpha), d).unwrap();
                image.canonical = None;
                let m = modulus_numeric(&image, &fast).unwrap();
                let ratio = (m.value - exact).abs() / m.error_estimate;
                worst = worst.max(ratio);
                ok &= ratio <= C8_FACTOR;
            }
        }
        rep.check(format!("{name} constant over 5x5"), ok, format!("worst condenser |err|/estimate {worst:.2}"));
    }
    let m = shear_objective(&a12, 0.0, 0.5, &CondenserOptions::default()).unwrap();
    rep.check("A(1,2) moves under shear", (m.value - 2f64.ln()).abs() > m.error_estimate, format!("α = 1/2: {} ± {}", m.value, m.error_estimate));
    rep
}

fn criterion9(pairs: &[Pair]) -> Report {
    let mut rep = Report::new(9);
    let grid: Vec<f64> = (0..=400).map(|k| phi_lower(10f64.powf(-2.0 + 10.0 * k as f64 / 400.0)).unwrap()).collect();
    rep.check("nondecreasing", grid.windows(2).all(|w| w[1] >= w[0]), "401 log-spaced points on [1e-2, 1e8]");
    let tail = phi_lower(1e6).unwrap();
    rep.check("phi_lower(1e6) > 0.9", tail > C9_TAIL, format!("{tail}"));
    let head = phi_lower(1e-2).unwrap();
    rep.check("phi_lower(1e-2) < 1e-3", head < C9_HEAD, format!("{head}"));
    let obstructed = pairs.iter().filter(|p| necessary_obstruction(p.0, p.1, p.2, p.3).unwrap().obstructed).count();
    rep.check("no obstruction on constructed pairs", obstructed == 0, format!("{obstructed} of {} pairs obstructed", pairs.len()));
    rep
}

fn main() {
    // The annulus modulus is exact, so constructed pairs carry no error bar.
    let _ = annulus_modulus(1.0, 2.0);
    let mut pairs = Vec::new();
    let mut unexpected = false;
    let titles = [
        "condenser agrees with closed forms",
        "Möbius reduction identity on random F(s,t)",
        "radial maps exist exactly above the Nitsche bound",
        "h_epsilon pipeline",
        "power-shear maps",
        "Schwarz-Christoffel shear construction",
        "affine modulus attainability",
        "affine invariance classes",
        "phi_lower and obstruction consistency",
    ];
    for c in 1..=9u32 {
        let t0 = Instant::now();
        let rep = match c {
            1 => criterion1(),
            2 => criterion2(),
            3 => criterion3(&mut pairs),
            4 => criterion4(&mut pairs),
            5 => criterion5(&mut pairs),
            6 => criterion6(&mut pairs),
            7 => criterion7(),
            8 => criterion8(),
            _ => criterion9(&pairs),
        };
        unexpected |= rep.finish(titles[c as usize - 1], t0.elapsed());
    }
    if unexpected {
        std::process::exit(1);
    }
}
