use std::f64::consts::{E, PI};

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use ringmod::canonical::{circle_polygon, modulus_canonical, teichmuller_modulus};
use ringmod::condenser::{modulus, modulus_numeric, solve_potential, verify_extremal_bound, CondenserOptions};
use ringmod::geometry::{apply_affine, AffineMap};
use ringmod::{BoundaryComponent, CanonicalRing, DoublyConnectedDomain, Error, Point, UnboundedComponent};

fn two_polygons(inner: Vec<Point>, outer: Vec<Point>) -> DoublyConnectedDomain {
    DoublyConnectedDomain::new(BoundaryComponent::Polygon(inner), UnboundedComponent::ExteriorOf(outer), None).unwrap()
}

fn annulus(r: f64, big_r: f64) -> DoublyConnectedDomain {
    CanonicalRing::Annulus { r, big_r }.realize().unwrap()
}

fn square(c: Point, half: f64) -> Vec<Point> {
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].iter().map(|&(x, y)| c + Point::new(x, y) * half).collect()
}

#[test]
fn annulus_one_two_is_log_two() {
    let m = modulus_numeric(&annulus(1.0, 2.0), &CondenserOptions::default()).unwrap();
    let err = (m.value - 2f64.ln()).abs();
    assert!(err < 1e-2, "{m:?}");
    assert!(err <= m.error_estimate, "{m:?}");
}

#[test]
fn annulus_one_e_is_one() {
    let m = modulus_numeric(&annulus(1.0, E), &CondenserOptions::default()).unwrap();
    assert!((m.value - 1.0).abs() < 1e-2, "{m:?}");
    assert!((m.value - 1.0).abs() <= m.error_estimate, "{m:?}");
}

#[test]
fn teichmuller_one_is_pi() {
    let m = modulus_numeric(&CanonicalRing::Teichmuller { s: 1.0 }.realize().unwrap(), &CondenserOptions::default()).unwrap();
    assert!((m.value - PI).abs() < 0.05 * PI, "{m:?}");
    assert!((m.value - PI).abs() <= m.error_estimate, "{m:?}");
}

#[test]
fn grotzsch_two_matches_closed_form() {
    let ring = CanonicalRing::Grotzsch { s: 2.0 };
    let exact = modulus_canonical(&ring).unwrap().value;
    let m = modulus_numeric(&ring.realize().unwrap(), &CondenserOptions::default()).unwrap();
    assert!((m.value - exact).abs() <= m.error_estimate, "{m:?} vs {exact}");
}

#[test]
fn tagged_domains_use_the_closed_form() {
    let m = modulus(&annulus(1.0, 2.0), &CondenserOptions::default()).unwrap();
    assert_eq!(m.value, 2f64.ln());
}

#[test]
fn per_level_values_are_reported_coarsest_first() {
    let m = modulus_numeric(&annulus(1.0, 2.0), &CondenserOptions::fast()).unwrap();
    match m.method {
        ringmod::ModulusMethod::Condenser { levels } => {
            assert_eq!(levels.len(), 3);
            assert!(levels.windows(2).all(|w| w[1].h < w[0].h && w[1].level == w[0].level + 1));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn degenerate_domain_has_infinite_modulus() {
    let d = DoublyConnectedDomain::new(
        BoundaryComponent::Point(Point::new(0.0, 0.0)),
        UnboundedComponent::ExteriorOf(circle_polygon(Point::new(0.0, 0.0), 1.0, 64)),
        None,
    )
    .unwrap();
    let m = modulus_numeric(&d, &CondenserOptions::fast()).unwrap();
    assert!(m.value.is_infinite() && m.error_estimate == 0.0);
}

#[test]
fn too_coarse_grid_is_reported() {
    // A gap of 1e-4 between the components cannot be resolved by 16 cells.
    let d = two_polygons(square(Point::new(0.0, 0.0), 1.0), square(Point::new(0.0, 0.0), 1.0001));
    let err = solve_potential(&d, 16, 1e6).unwrap_err();
    assert!(matches!(err, Error::ResolutionTooCoarse(_)), "{err:?}");
}

#[test]
fn bad_options_are_rejected() {
    let d = annulus(1.0, 2.0);
    for opts in [
        CondenserOptions { resolution: 100, ..CondenserOptions::default() },
        CondenserOptions { levels: 0, ..CondenserOptions::default() },
        CondenserOptions { resolution: 64, levels: 5, ..CondenserOptions::default() },
        CondenserOptions { clip_factor: 0.5, ..CondenserOptions::default() },
    ] {
        assert!(matches!(modulus_numeric(&d, &opts), Err(Error::InvalidInput(_))), "{opts:?}");
    }
}

#[test]
fn symmetric_domain_gives_symmetric_potential() {
    for ring in [CanonicalRing::Teichmuller { s: 1.0 }, CanonicalRing::DoubleTeich { s: 3.0, t: 2.0 }] {
        let (prob, pot) = solve_potential(&ring.realize().unwrap(), 128, 1e6).unwrap();
        let n = prob.grid.n_phi();
        let mut worst = 0.0_f64;
        for i in 0..=prob.grid.n_rho() {
            for j in 0..n {
                worst = worst.max((pot.at(i, j) - pot.at(i, (n - j) % n)).abs());
            }
        }
        assert!(worst < 1e-8, "{ring:?}: asymmetry {worst}");
    }
}

#[test]
fn extremal_bound_for_annulus() {
    let c = verify_extremal_bound(&annulus(1.0, 2.0), &CondenserOptions::fast()).unwrap();
    assert!(c.holds);
    assert!((c.rhs - teichmuller_modulus(0.5).unwrap()).abs() < 1e-6);
}

#[test]
fn extremal_bound_is_attained_by_teichmuller_ring() {
    let d = CanonicalRing::Teichmuller { s: 1.5 }.realize().unwrap();
    let c = verify_extremal_bound(&d, &CondenserOptions::fast()).unwrap();
    assert!(c.holds);
    assert!((c.lhs - c.rhs).abs() < 1e-12 * c.rhs, "{c:?}");
}

#[test]
fn similarity_invariance() {
    let d = two_polygons(square(Point::new(0.2, 0.0), 0.6), circle_polygon(Point::new(0.0, 0.1), 2.0, 256));
    let opts = CondenserOptions::fast();
    let base = modulus_numeric(&d, &opts).unwrap();
    for (scale, rot, shift) in [(3.0, 0.7, Point::new(5.0, -2.0)), (0.01, 2.1, Point::new(-0.3, 0.4))] {
        let moved = apply_affine(&AffineMap::similarity(scale, rot, shift), &d).unwrap();
        let m = modulus_numeric(&moved, &opts).unwrap();
        assert!((m.value - base.value).abs() <= m.error_estimate + base.error_estimate, "{m:?} vs {base:?}");
    }
}

#[test]
fn shrinking_the_bounded_component_increases_the_modulus() {
    let outer = circle_polygon(Point::new(0.0, 0.0), 2.0, 256);
    let opts = CondenserOptions::fast();
    let mut prev = 0.0;
    for half in [0.8, 0.6, 0.4, 0.2] {
        let m = modulus_numeric(&two_polygons(square(Point::new(0.1, 0.0), half), outer.clone()), &opts).unwrap();
        assert!(m.value + m.error_estimate >= prev, "{half}: {m:?} after {prev}");
        prev = m.value - m.error_estimate;
    }
}

#[test]
fn error_estimates_are_honest_on_annuli() {
    let mut rng = StdRng::seed_from_u64(0x2545_f491_4f6c_dd1d);
    let opts = CondenserOptions::fast();
    let cases = 50;
    let mut honest = 0;
    for _ in 0..cases {
        let ratio = rng.gen_range(1.2..5.2);
        let c = Point::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = two_polygons(circle_polygon(c, 1.0, 4096), circle_polygon(c, ratio, 4096));
        let m = modulus_numeric(&d, &opts).unwrap();
        if (m.value - ratio.ln()).abs() <= 3.0 * m.error_estimate {
            honest += 1;
        }
    }
    assert!(honest * 100 >= 95 * cases, "{honest} of {cases}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_two_polygon_rings_satisfy_extremal_bound(
        cx in -0.3..0.3_f64, cy in -0.3..0.3_f64, half in 0.2..0.9_f64,
        n in 3usize..9, radius in 1.5..4.0_f64, phase in 0.0..1.0_f64,
    ) {
        let outer: Vec<Point> = (0..n)
            .map(|k| Point::from_polar(radius, 2.0 * PI * (k as f64 + phase) / n as f64))
            .collect();
        // Keep the square inside the inscribed circle of the outer polygon.
        let inner_r = radius * (PI / n as f64).cos();
        prop_assume!(half * 2f64.sqrt() + (cx * cx + cy * cy).sqrt() < 0.9 * inner_r);
        let d = two_polygons(square(Point::new(cx, cy), half), outer);
        let c = verify_extremal_bound(&d, &CondenserOptions::fast()).unwrap();
        prop_assert!(c.holds, "{:?}", c);
    }
}
