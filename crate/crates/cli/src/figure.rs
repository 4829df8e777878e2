//! Static SVG figures: domain outlines and images of grid lines under a map.

use std::f64::consts::PI;
use std::fmt::Write;

use ringmod::geometry::Region;
use ringmod::harmonic::HarmonicMapModel;
use ringmod::{BoundaryComponent, CanonicalRing, DoublyConnectedDomain, Point, UnboundedComponent};

use crate::run::num;

struct Layer {
    stroke: &'static str,
    width: f64,
    lines: Vec<Vec<Point>>,
}

#[derive(Default)]
pub struct Figure {
    layers: Vec<Layer>,
}

/// Rays are drawn out to this multiple of the domain extent.
const RAY_REACH: f64 = 2.0;

impl Figure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&mut self, lines: Vec<Vec<Point>>, stroke: &'static str, width: f64) -> &mut Self {
        self.layers.push(Layer { stroke, width, lines });
        self
    }

    pub fn outline(&mut self, d: &DoublyConnectedDomain, stroke: &'static str) -> &mut Self {
        let mut lines = Vec::new();
        match &d.bounded {
            BoundaryComponent::Point(p) => lines.push(vec![*p, *p]),
            BoundaryComponent::Segment(a, b) => lines.push(vec![*a, *b]),
            BoundaryComponent::Polygon(v) => lines.push(closed(v)),
        }
        match &d.unbounded {
            UnboundedComponent::ExteriorOf(v) => lines.push(closed(v)),
            UnboundedComponent::Rays(rays) => {
                let reach = RAY_REACH * d.extent().max(1.0);
                lines.extend(rays.iter().map(|r| vec![r.from, r.point_at(reach)]));
            }
        }
        self.lines(lines, stroke, 2.0)
    }

    pub fn render(&self) -> String {
        let pts = || self.layers.iter().flat_map(|l| l.lines.iter().flatten());
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in pts() {
            lo = Point::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = Point::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        if !(lo.re.is_finite() && hi.re.is_finite()) {
            (lo, hi) = (Point::new(-1.0, -1.0), Point::new(1.0, 1.0));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-9);
        let pad = 0.05 * span;
        // Unit stroke widths are per mille of the picture.
        let unit = span / 1000.0;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
            num(lo.re - pad),
            num(-hi.im - pad),
            num(hi.re - lo.re + 2.0 * pad),
            num(hi.im - lo.im + 2.0 * pad),
            (800.0 * (hi.im - lo.im + 2.0 * pad) / (hi.re - lo.re + 2.0 * pad)).round().clamp(100.0, 4000.0),
        )
        .unwrap();
        for layer in &self.layers {
            writeln!(s, r#"<g fill="none" stroke="{}" stroke-width="{}">"#, layer.stroke, num(layer.width * unit)).unwrap();
            for line in &layer.lines {
                let coords: Vec<String> = line.iter().map(|p| format!("{:.6},{:.6}", p.re, -p.im)).collect();
                writeln!(s, r#"<polyline points="{}"/>"#, coords.join(" ")).unwrap();
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

fn closed(v: &[Point]) -> Vec<Point> {
    let mut line = v.to_vec();
    if let Some(&first) = v.first() {
        line.push(first);
    }
    line
}

/// Grid lines of `source` pushed through `map`: circles and radii on a centred
/// annulus, otherwise a Cartesian grid clipped to the domain.
pub fn image_grid(map: &HarmonicMapModel, source: &DoublyConnectedDomain) -> Vec<Vec<Point>> {
    const LINES: usize = 24;
    const SAMPLES: usize = 240;
    let mut lines: Vec<Vec<Point>> = Vec::new();
    if let Some(CanonicalRing::Annulus { r, big_r }) = source.canonical {
        for i in 0..=LINES / 2 {
            let rho = r + (big_r - r) * i as f64 / (LINES / 2) as f64;
            lines.push((0..=SAMPLES).map(|k| Point::from_polar(rho, 2.0 * PI * k as f64 / SAMPLES as f64)).collect());
        }
        for j in 0..2 * LINES {
            let t = 2.0 * PI * j as f64 / (2 * LINES) as f64;
            lines.push((0..=SAMPLES).map(|k| Point::from_polar(r + (big_r - r) * k as f64 / SAMPLES as f64, t)).collect());
        }
    } else {
        let c = source.bounded_anchor();
        let half = 1.5 * source.extent().max(1.0);
        let at = |k: usize, n: usize| -half + 2.0 * half * k as f64 / n as f64;
        for i in 0..=LINES {
            lines.push((0..=SAMPLES).map(|k| c + Point::new(at(i, LINES), at(k, SAMPLES))).collect());
            lines.push((0..=SAMPLES).map(|k| c + Point::new(at(k, SAMPLES), at(i, LINES))).collect());
        }
    }
    // Split each line into runs inside the domain where the map evaluates.
    let mut out = Vec::new();
    for line in lines {
        let mut run: Vec<Point> = Vec::new();
        for z in line {
            let w = (source.classify(z) == Region::Domain).then(|| map.eval(z).ok()).flatten().filter(|w| w.re.is_finite() && w.im.is_finite());
            match w {
                Some(w) => run.push(w),
                None => {
                    if run.len() > 1 {
                        out.push(std::mem::take(&mut run));
                    }
                    run.clear();
                }
            }
        }
        if run.len() > 1 {
            out.push(run);
        }
    }
    out
}

/// Target outline under the image grid of `map`.
pub fn map_figure(map: &HarmonicMapModel, source: &DoublyConnectedDomain, target: &DoublyConnectedDomain) -> String {
    Figure::new().lines(image_grid(map, source), "#4a7ab5", 0.6).outline(target, "#202020").render()
}

pub fn domain_figure(d: &DoublyConnectedDomain) -> String {
    Figure::new().outline(d, "#202020").render()
}
