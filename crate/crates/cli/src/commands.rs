use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use ringmod::affine_opt::{
    affine_modulus, alpha_grid, attainability_sufficient, classify_affine_invariance, necessary_obstruction, shear_objective,
    AffineOptions,
};
use ringmod::canonical::{modulus_canonical, nitsche_bound};
use ringmod::condenser::{modulus, modulus_numeric, CondenserOptions};
use ringmod::harmonic::{
    construct_h_epsilon_with, epsilon_diagnostics, max_epsilon, power_shear_map, radial_nitsche_map, secant_slope_inequality,
    verify_map, ConformalKind, ConformalParam, HarmonicMapModel, MapVerificationReport, NitscheOutcome, VerifyOptions,
};
use ringmod::sc::{assemble_shear_harmonic, build_gb, seam_harmonicity_residual, solve_b, solve_preimages};
use ringmod::{CanonicalRing, DoublyConnectedDomain, ModulusMethod, Point};
use serde_json::json;

use crate::figure::{domain_figure, map_figure};
use crate::run::{num, CliResult, Failure, Run};
use crate::{
    AffineArgs, CanonicalArgs, Command, CondenserArgs, ConformalName, Construct, ObstructionArgs, RingName, Sweep, VerifyArgs,
};

pub fn dispatch(command: &Command, run: &mut Run) -> CliResult<()> {
    match command {
        Command::Modulus { domain, numeric, condenser } => modulus_cmd(run, domain, *numeric, condenser),
        Command::AffineModulus { domain, search, condenser } => affine_cmd(run, domain, search, condenser),
        Command::Canonical(args) => canonical_cmd(run, args),
        Command::Classify { domain } => classify_cmd(run, domain),
        Command::Construct(c) => construct_cmd(run, c),
        Command::Verify { map, source, target, options } => {
            let map: HarmonicMapModel = run.read_json("map", map)?;
            let source = run.read_domain("source", source)?;
            let target = run.read_domain("target", target)?;
            verify_and_report(run, &map, &source, &target, options)
        }
        Command::Obstruction(args) => obstruction_cmd(run, args),
        Command::Sweep(s) => sweep_cmd(run, s),
        Command::Rerun { .. } => unreachable!("handled before dispatch"),
    }
}

fn positive(name: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Failure::invalid(format!("--{name} must be positive and finite, got {x}")))
    }
}

fn condenser_options(args: &CondenserArgs, base: CondenserOptions) -> CliResult<CondenserOptions> {
    let opts = CondenserOptions {
        resolution: args.resolution.unwrap_or(base.resolution),
        levels: args.levels.unwrap_or(base.levels),
        clip_factor: args.clip_factor.unwrap_or(base.clip_factor),
        tolerance: positive("tolerance", args.tolerance.unwrap_or(base.tolerance))?,
        order: base.order,
    };
    opts.validate()?;
    Ok(opts)
}

fn verify_options(args: &VerifyArgs) -> CliResult<VerifyOptions> {
    let d = VerifyOptions::default();
    let count = |name: &str, v: Option<usize>, default: usize| -> CliResult<usize> {
        match v.unwrap_or(default) {
            0 => Err(Failure::invalid(format!("--{name} must be at least 1"))),
            n => Ok(n),
        }
    };
    Ok(VerifyOptions {
        radii: count("radii", args.radii, d.radii)?,
        angles: count("angles", args.angles, d.angles)?,
        cartesian: count("cartesian", args.cartesian, d.cartesian)?,
        clip: positive("clip", args.clip.unwrap_or(d.clip))?,
        stencil: positive("stencil", args.stencil.unwrap_or(d.stencil))?,
        boundary_samples: count("boundary-samples", args.boundary_samples, d.boundary_samples)?,
        distance_tolerance: positive("distance-tolerance", args.distance_tolerance.unwrap_or(d.distance_tolerance))?,
        residual_tolerance: args.residual_tolerance.map(|t| positive("residual-tolerance", t)).transpose()?,
    })
}

fn conformal(kind: ConformalName, big_r: f64, a: f64, cx: f64, cy: f64) -> CliResult<ConformalParam> {
    let kind = match kind {
        ConformalName::Identity => ConformalKind::Identity,
        ConformalName::Mobius => ConformalKind::Mobius { a },
        ConformalName::Joukowski => ConformalKind::Joukowski { c: Point::new(cx, cy) },
    };
    Ok(ConformalParam::new(big_r, kind)?)
}

fn ring_name(ring: RingName) -> &'static str {
    match ring {
        RingName::Annulus => "annulus",
        RingName::Grotzsch => "grotzsch",
        RingName::Teichmuller => "teichmuller",
        RingName::DoubleTeichmuller => "double_teichmuller",
        RingName::DoubleTeichmullerUnit => "double_teichmuller_unit",
    }
}

/// Parameter flags of each ring, in the order the ring takes them.
fn ring_flags(ring: RingName) -> &'static [&'static str] {
    match ring {
        RingName::Annulus => &["r", "R"],
        RingName::Grotzsch | RingName::Teichmuller => &["s"],
        RingName::DoubleTeichmuller => &["s", "t"],
        RingName::DoubleTeichmullerUnit => &["a", "b"],
    }
}

fn canonical_ring(args: &CanonicalArgs) -> CliResult<CanonicalRing> {
    let params = ring_flags(args.ring)
        .iter()
        .map(|&flag| {
            let v = match flag {
                "r" => args.r,
                "R" => args.big_r,
                "s" => args.s,
                "t" => args.t,
                "a" => args.a,
                _ => args.b,
            };
            v.ok_or_else(|| Failure::invalid(format!("ring `{}` needs --{flag}", ring_name(args.ring))))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    Ok(CanonicalRing::from_name(ring_name(args.ring), &params)?)
}

fn modulus_cmd(run: &mut Run, path: &Path, numeric: bool, args: &CondenserArgs) -> CliResult<()> {
    let d = run.read_domain("domain", path)?;
    let opts = condenser_options(args, CondenserOptions::default())?;
    run.option("condenser", &opts);
    run.option("numeric", &numeric);
    let est = if numeric { modulus_numeric(&d, &opts)? } else { modulus(&d, &opts)? };
    run.json("modulus.json", &est)?;
    if let ModulusMethod::Condenser { levels } = &est.method {
        let rows: Vec<_> = levels.iter().map(|l| vec![l.level.to_string(), num(l.h), num(l.value)]).collect();
        run.csv("levels.csv", "ringmod.levels/1", &["level", "h", "value"], &rows, false)?;
    }
    run.svg("domain.svg", || domain_figure(&d))?;
    println!("{} ± {}", est.value, est.error_estimate);
    Ok(())
}

fn affine_cmd(run: &mut Run, path: &Path, search: &AffineArgs, args: &CondenserArgs) -> CliResult<()> {
    let d = run.read_domain("domain", path)?;
    // Every grid cell is a condenser solve, so the coarse grids are the default here.
    let opts = AffineOptions {
        theta_samples: search.theta_samples,
        alpha_samples: search.alpha_samples,
        alpha_floor: search.alpha_floor,
        refine_iters: search.refine_iters,
        refine_tolerance: positive("refine-tolerance", search.refine_tolerance)?,
        condenser: condenser_options(args, CondenserOptions::fast())?,
    };
    run.option("affine", &opts);
    let res = affine_modulus(&d, &opts)?;
    let best = res.trace.iter().find(|t| t.modulus == Some(res.value)).copied();
    let attainability = attainability_sufficient(&d).ok();
    run.json(
        "affine_modulus.json",
        &json!({
            "value": res.value,
            "error": res.error_estimate,
            "theta": best.map(|b| b.theta),
            "alpha": best.map(|b| b.alpha),
            "attained_flag": res.attained_flag,
            "maximizer": res.maximizer,
            "attainability": attainability,
        }),
    )?;
    let rows: Vec<_> = res
        .trace
        .iter()
        .map(|t| {
            vec![
                num(t.theta),
                num(t.alpha),
                t.modulus.map(num).unwrap_or_default(),
                t.error.map(num).unwrap_or_default(),
                if t.refine { "refine" } else { "grid" }.to_string(),
            ]
        })
        .collect();
    run.csv("trace.csv", "ringmod.affine_trace/1", &["theta", "alpha", "modulus", "error", "stage"], &rows, false)?;
    run.svg("domain.svg", || domain_figure(&d))?;
    println!(
        "{} ± {} ({})",
        res.value,
        res.error_estimate,
        serde_json::to_value(res.attained_flag).expect("flag serialises").as_str().unwrap_or_default()
    );
    Ok(())
}

fn canonical_cmd(run: &mut Run, args: &CanonicalArgs) -> CliResult<()> {
    let ring = canonical_ring(args)?;
    let est = modulus_canonical(&ring)?;
    run.json("canonical.json", &json!({ "ring": ring.name(), "params": ring.params(), "modulus": est.value, "error_estimate": est.error_estimate }))?;
    if args.emit_domain || run.emit_svg() {
        let d = ring.realize()?;
        if args.emit_domain {
            run.json("domain.json", &serde_json::from_str::<serde_json::Value>(&d.to_json()).expect("domain JSON"))?;
        }
        run.svg("domain.svg", || domain_figure(&d))?;
    }
    println!("{}", est.value);
    Ok(())
}

fn classify_cmd(run: &mut Run, path: &Path) -> CliResult<()> {
    let d = run.read_domain("domain", path)?;
    let class = classify_affine_invariance(&d);
    let attainability = if d.is_degenerate() { None } else { Some(attainability_sufficient(&d)?) };
    run.json("classify.json", &json!({ "class": class, "attainability": attainability }))?;
    println!("{}", serde_json::to_value(class).expect("class serialises").as_str().unwrap_or_default());
    Ok(())
}

fn write_domain(run: &mut Run, name: &str, d: &DoublyConnectedDomain) -> CliResult<()> {
    run.json(name, &serde_json::from_str::<serde_json::Value>(&d.to_json()).expect("domain JSON"))
}

/// Verifies, writes `report.json` and the figure, and fails with status 3 when
/// the verdict does not pass.
fn verify_and_report(
    run: &mut Run,
    map: &HarmonicMapModel,
    source: &DoublyConnectedDomain,
    target: &DoublyConnectedDomain,
    args: &VerifyArgs,
) -> CliResult<()> {
    let opts = verify_options(args)?;
    run.option("verify", &opts);
    let report = verify_map(map, source, target, &opts)?;
    run.json("report.json", &report)?;
    run.svg("map.svg", || map_figure(map, source, target))?;
    print_report(&report);
    if report.verdict.pass {
        Ok(())
    } else {
        Err(Failure::numerical(format!("map failed verification: {}", report.verdict.reasons.join("; "))))
    }
}

fn print_report(r: &MapVerificationReport) {
    println!(
        "verification {}: margin {:e}, degree {}, boundary distance {:e}{}",
        if r.verdict.pass { "passed" } else { "failed" },
        r.jacobian_margin,
        r.winding_degree,
        r.boundary_distance,
        if r.boundary_degenerate { ", boundary-degenerate" } else { "" }
    );
}

fn construct_cmd(run: &mut Run, c: &Construct) -> CliResult<()> {
    match c {
        Construct::Nitsche { r, big_r, rstar, big_rstar, verify } => {
            run.option("parameters", &json!({ "r": r, "R": big_r, "rstar": rstar, "Rstar": big_rstar }));
            let outcome = radial_nitsche_map(*r, *big_r, *rstar, *big_rstar)?;
            run.json("construction.json", &outcome)?;
            match outcome {
                NitscheOutcome::Map { map, .. } => {
                    let model = HarmonicMapModel::RadialNitsche(map);
                    let source = CanonicalRing::Annulus { r: *r, big_r: *big_r }.realize()?;
                    let target = CanonicalRing::Annulus { r: *rstar, big_r: *big_rstar }.realize()?;
                    run.json("map.json", &model)?;
                    write_domain(run, "source.json", &source)?;
                    write_domain(run, "target.json", &target)?;
                    verify_and_report(run, &model, &source, &target, verify)
                }
                NitscheOutcome::Nonexistent { ratio, bound } => Err(Failure::hypothesis(format!(
                    "no harmonic homeomorphism A({r}, {big_r}) → A({rstar}, {big_rstar}) exists: R*/r* = {ratio} is below the Nitsche bound ½(R/r + r/R) = {bound}"
                ))),
                NitscheOutcome::RadialAnsatzFailed { a, b } => {
                    Err(Failure::numerical(format!("radial ansatz not injective (a = {a}, b = {b}) although the Nitsche bound holds")))
                }
            }
        }
        Construct::PowerShear { a, b, alpha, verify } => {
            run.option("parameters", &json!({ "a": a, "b": b, "alpha": alpha }));
            let ps = power_shear_map(*a, *b, *alpha)?;
            let model = HarmonicMapModel::PowerShear(ps.map);
            let source = ps.source_ring.realize()?;
            let target = ps.target_ring.realize()?;
            let (ms, mt) = (modulus_canonical(&ps.source_ring)?.value, modulus_canonical(&ps.target_ring)?.value);
            run.json(
                "construction.json",
                &json!({
                    "map": model,
                    "source_ring": { "ring": ps.source_ring.name(), "params": ps.source_ring.params(), "modulus": ms },
                    "target_ring": { "ring": ps.target_ring.name(), "params": ps.target_ring.params(), "modulus": mt },
                    "secant_slope_inequality": secant_slope_inequality(*a, *b, *alpha),
                }),
            )?;
            run.json("map.json", &model)?;
            write_domain(run, "source.json", &source)?;
            write_domain(run, "target.json", &target)?;
            println!("Mod source {ms}, Mod target {mt}");
            verify_and_report(run, &model, &source, &target, verify)
        }
        Construct::AnnulusDirichlet { big_r, kind, a, cx, cy, epsilon, search_tolerance, truncation, samples, target_vertices, verify } => {
            let f = conformal(*kind, *big_r, *a, *cx, *cy)?;
            run.option("conformal", &f);
            run.option("discretisation", &json!({ "truncation": truncation, "samples": samples, "target_vertices": target_vertices }));
            let search = match epsilon {
                Some(_) => None,
                None => Some(max_epsilon(&f, positive("search-tolerance", *search_tolerance)?)?),
            };
            let eps = match (epsilon, &search) {
                (Some(e), _) => *e,
                (None, Some(s)) => 0.5 * s.epsilon_1,
                (None, None) => unreachable!(),
            };
            let h = construct_h_epsilon_with(&f, eps, *truncation, *samples)?;
            run.json("construction.json", &json!({ "epsilon": eps, "rho": h.rho, "search": search, "spectral_tail": h.spectral_tail, "boundary_residual": h.boundary_residual }))?;
            let rows: Vec<_> = (0..h.outer_scaled.len())
                .map(|k| {
                    let (o, i) = (h.outer_scaled[k], h.inner[k]);
                    vec![(k as i64 - h.truncation as i64).to_string(), num(o.re), num(o.im), num(i.re), num(i.im)]
                })
                .collect();
            run.csv("coefficients.csv", "ringmod.annulus_coefficients/1", &["n", "a_scaled_re", "a_scaled_im", "b_re", "b_im"], &rows, false)?;
            if let Some(s) = &search {
                let rows: Vec<_> = s.table.iter().map(|&(e, m)| vec![num(e), num(m)]).collect();
                run.csv("epsilon_search.csv", "ringmod.epsilon_search/1", &["epsilon", "margin"], &rows, false)?;
            }
            let source = CanonicalRing::Annulus { r: 1.0, big_r: h.rho }.realize()?;
            let target = f.target_domain(*target_vertices)?;
            let model = HarmonicMapModel::Annulus(h);
            run.json("map.json", &model)?;
            write_domain(run, "source.json", &source)?;
            write_domain(run, "target.json", &target)?;
            println!("epsilon {eps}");
            verify_and_report(run, &model, &source, &target, verify)
        }
        Construct::ScShear { s_prime, t_prime, target_modulus, seam_delta, verify } => {
            run.option("parameters", &json!({ "s_prime": s_prime, "t_prime": t_prime, "target_modulus": target_modulus, "seam_delta": seam_delta }));
            let sol = solve_b(*target_modulus, *s_prime, *t_prime)?;
            let h = assemble_shear_harmonic(&sol.model, &sol.result, *s_prime, *t_prime);
            let seam = seam_harmonicity_residual(&h, positive("seam-delta", *seam_delta)?)?;
            run.json(
                "construction.json",
                &json!({
                    "b": sol.b,
                    "mu": sol.model.mu,
                    "c": sol.model.c,
                    "s_b": sol.result.s_b,
                    "t_b": sol.result.t_b,
                    "modulus": sol.result.modulus,
                    "modulus_residual": (sol.result.modulus - target_modulus).abs(),
                    "normalization_residual": sol.model.normalization_residual(),
                    "seam_harmonicity_residual": seam,
                }),
            )?;
            let rows: Vec<_> = sol.sweep.iter().map(|&(b, m)| vec![num(b), num(m)]).collect();
            run.csv("b_search.csv", "ringmod.sc_b_search/1", &["b", "modulus"], &rows, false)?;
            let source = h.source_ring().realize()?;
            let target = h.target_ring().realize()?;
            let model = HarmonicMapModel::ScShear(h);
            run.json("map.json", &model)?;
            write_domain(run, "source.json", &source)?;
            write_domain(run, "target.json", &target)?;
            println!("b {} s_b {} t_b {} seam residual {seam:e}", sol.b, sol.result.s_b, sol.result.t_b);
            verify_and_report(run, &model, &source, &target, verify)
        }
    }
}

fn obstruction_cmd(run: &mut Run, args: &ObstructionArgs) -> CliResult<()> {
    let condenser = condenser_options(&args.condenser, CondenserOptions::default())?;
    let (mod_omega, omega_error) = match (&args.mod_omega, &args.source) {
        (Some(m), _) => (*m, args.omega_error),
        (None, Some(path)) => {
            let d = run.read_domain("source", path)?;
            run.option("condenser", &condenser);
            let est = modulus(&d, &condenser)?;
            (est.value, est.error_estimate)
        }
        (None, None) => return Err(Failure::invalid("need --mod-omega or --source")),
    };
    let (target, target_error, target_input) = match (&args.mod_aff_target, &args.target) {
        (Some(m), _) => (*m, args.target_error, "given"),
        (None, Some(path)) => {
            let d = run.read_domain("target", path)?;
            if args.affine {
                let opts = AffineOptions { condenser: CondenserOptions::fast(), ..AffineOptions::default() };
                run.option("affine", &opts);
                let res = affine_modulus(&d, &opts)?;
                (res.value, res.error_estimate, "affine")
            } else {
                run.option("condenser", &condenser);
                let est = modulus(&d, &condenser)?;
                (est.value, est.error_estimate, "plain-lower-bound")
            }
        }
        (None, None) => return Err(Failure::invalid("need --mod-aff-target or --target")),
    };
    let check = necessary_obstruction(mod_omega, omega_error, target, target_error)?;
    // The plain modulus underestimates the affine one, so only a negative
    // answer carries over.
    let certified = check.obstructed && target_input != "plain-lower-bound";
    run.json(
        "obstruction.json",
        &json!({
            "mod_omega": mod_omega,
            "omega_error": omega_error,
            "mod_aff_target": target,
            "target_error": target_error,
            "target_input": target_input,
            "check": check,
            "obstructed": certified,
            "inconclusive": !certified,
        }),
    )?;
    println!(
        "{}: ratio ≤ {} vs phi_lower {}",
        if certified { "obstructed" } else { "not obstructed (inconclusive)" },
        check.ratio_upper,
        check.phi_lower
    );
    Ok(())
}

fn grid(from: f64, to: f64, steps: usize, log: bool) -> CliResult<Vec<f64>> {
    if steps < 2 || !(from.is_finite() && to.is_finite()) || (log && !(from > 0.0 && to > 0.0)) {
        return Err(Failure::invalid(format!("bad grid {from}..{to} with {steps} steps")));
    }
    Ok((0..steps)
        .map(|k| {
            let u = k as f64 / (steps - 1) as f64;
            if log {
                (from.ln() + u * (to.ln() - from.ln())).exp()
            } else {
                from + u * (to - from)
            }
        })
        .collect())
}

fn sweep_cmd(run: &mut Run, s: &Sweep) -> CliResult<()> {
    match s {
        Sweep::Canonical { ring, from, to, steps, log, fixed } => {
            let flags = ring_flags(*ring);
            if fixed.len() + 1 != flags.len() {
                return Err(Failure::invalid(format!("ring `{}` sweeps --{} and needs {} --fixed value(s)", ring_name(*ring), flags[0], flags.len() - 1)));
            }
            let xs = grid(*from, *to, *steps, *log)?;
            let rows: Vec<Vec<String>> = xs
                .par_iter()
                .map(|&x| {
                    let params: Vec<f64> = std::iter::once(x).chain(fixed.iter().copied()).collect();
                    let m = CanonicalRing::from_name(ring_name(*ring), &params).and_then(|r| modulus_canonical(&r));
                    match m {
                        Ok(m) => vec![num(x), num(m.value), "ok".into()],
                        Err(e) => vec![num(x), String::new(), e.to_string()],
                    }
                })
                .collect();
            run.csv("sweep.csv", "ringmod.sweep_canonical/1", &[flags[0], "modulus", "status"], &rows, true)?;
            println!("{} rows", rows.len());
        }
        Sweep::Shear { domain, theta_samples, alpha_samples, alpha_floor, condenser } => {
            let d = run.read_domain("domain", domain)?;
            let opts = condenser_options(condenser, CondenserOptions::fast())?;
            run.option("condenser", &opts);
            if *theta_samples == 0 || *alpha_samples < 2 || !(*alpha_floor > 0.0 && *alpha_floor < 1.0) {
                return Err(Failure::invalid("need theta-samples ≥ 1, alpha-samples ≥ 2 and alpha-floor in (0, 1)"));
            }
            let cells: Vec<(f64, f64)> = (0..*theta_samples)
                .flat_map(|i| alpha_grid(*alpha_floor, *alpha_samples).into_iter().map(move |a| (PI * i as f64 / *theta_samples as f64, a)))
                .collect();
            let rows: Vec<Vec<String>> = cells
                .par_iter()
                .map(|&(theta, alpha)| match shear_objective(&d, theta, alpha, &opts) {
                    Ok(m) => vec![num(theta), num(alpha), num(m.value), num(m.error_estimate), "ok".into()],
                    Err(e) => vec![num(theta), num(alpha), String::new(), String::new(), e.to_string()],
                })
                .collect();
            run.csv("sweep.csv", "ringmod.sweep_shear/1", &["theta", "alpha", "modulus", "error", "status"], &rows, true)?;
            println!("{} rows", rows.len());
        }
        Sweep::ScB { s_prime, t_prime, b_min, b_max, steps } => {
            let bs = grid(*b_min, *b_max, *steps, true)?;
            let rows: Vec<Vec<String>> = bs
                .par_iter()
                .map(|&b| match build_gb(b).and_then(|m| solve_preimages(&m, *s_prime, *t_prime).map(|r| (m, r))) {
                    Ok((m, r)) => vec![num(b), num(r.s_b), num(r.t_b), num(r.modulus), num(m.normalization_residual()), "ok".into()],
                    Err(e) => vec![num(b), String::new(), String::new(), String::new(), String::new(), e.to_string()],
                })
                .collect();
            run.csv("sweep.csv", "ringmod.sweep_sc_b/1", &["b", "s_b", "t_b", "modulus", "normalization_residual", "status"], &rows, true)?;
            println!("{} rows", rows.len());
        }
        Sweep::Nitsche { steps, max } => {
            if *steps == 0 || !(*max > 1.0) {
                return Err(Failure::invalid("need steps ≥ 1 and max > 1"));
            }
            let xs: Vec<f64> = (1..=*steps).map(|k| 1.0 + (max - 1.0) * k as f64 / *steps as f64).collect();
            let cells: Vec<(f64, f64)> = xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect();
            let rows: Vec<Vec<String>> = cells
                .par_iter()
                .map(|&(x, y)| {
                    let (status, degenerate) = match radial_nitsche_map(1.0, x, 1.0, y) {
                        Ok(NitscheOutcome::Map { boundary_degenerate, .. }) => ("map".to_string(), boundary_degenerate),
                        Ok(NitscheOutcome::Nonexistent { .. }) => ("nonexistent".into(), false),
                        Ok(NitscheOutcome::RadialAnsatzFailed { .. }) => ("radial_ansatz_failed".into(), false),
                        Err(e) => (e.to_string(), false),
                    };
                    vec![num(x), num(y), num(nitsche_bound(x)), status, degenerate.to_string()]
                })
                .collect();
            run.csv("sweep.csv", "ringmod.sweep_nitsche/1", &["ratio", "target_ratio", "bound", "status", "boundary_degenerate"], &rows, true)?;
            println!("{} rows", rows.len());
        }
        Sweep::Epsilon { big_r, kind, a, cx, cy, epsilons } => {
            let f = conformal(*kind, *big_r, *a, *cx, *cy)?;
            run.option("conformal", &f);
            let rows: Vec<Vec<String>> = epsilons
                .par_iter()
                .map(|&e| match epsilon_diagnostics(&f, e) {
                    Ok(d) => vec![num(e), num(d.sup_deviation), num(d.sup_dz_deviation), num(d.sup_dzbar), "ok".into()],
                    Err(err) => vec![num(e), String::new(), String::new(), String::new(), err.to_string()],
                })
                .collect();
            run.csv("sweep.csv", "ringmod.sweep_epsilon/1", &["epsilon", "sup_deviation", "sup_dz_deviation", "sup_dzbar", "status"], &rows, true)?;
            println!("{} rows", rows.len());
        }
    }
    Ok(())
}
