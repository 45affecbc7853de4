//! Procedural sharp images: a colour gradient, filled polygons and thin
//! strokes, all anti-aliased by 4x4 supersampling.

use rand::Rng;

use crate::tensor::{FeatureMap, Real, Shape};

const SUPERSAMPLE: usize = 4;

type Rgb = [Real; 3];

fn random_color(rng: &mut impl Rng) -> Rgb {
    [rng.random(), rng.random(), rng.random()]
}

/// Fraction of the pixel `(x, y)` covered by `inside`.
fn coverage(x: usize, y: usize, inside: &impl Fn(Real, Real) -> bool) -> Real {
    let step = 1.0 / SUPERSAMPLE as Real;
    let mut hits = 0;
    for sy in 0..SUPERSAMPLE {
        for sx in 0..SUPERSAMPLE {
            let px = x as Real + (sx as Real + 0.5) * step;
            let py = y as Real + (sy as Real + 0.5) * step;
            if inside(px, py) {
                hits += 1;
            }
        }
    }
    hits as Real / (SUPERSAMPLE * SUPERSAMPLE) as Real
}

fn paint(img: &mut FeatureMap, color: Rgb, alpha: Real, inside: impl Fn(Real, Real) -> bool) {
    let s = img.shape();
    for y in 0..s.height {
        for x in 0..s.width {
            let a = alpha * coverage(x, y, &inside);
            if a == 0.0 {
                continue;
            }
            for (c, &col) in color.iter().enumerate() {
                let v = img.at(0, c, y, x);
                img.set(0, c, y, x, v * (1.0 - a) + col * a);
            }
        }
    }
}

/// Even-odd rule.
fn point_in_polygon(px: Real, py: Real, pts: &[(Real, Real)]) -> bool {
    let mut inside = false;
    let mut j = pts.len() - 1;
    for i in 0..pts.len() {
        let (xi, yi) = pts[i];
        let (xj, yj) = pts[j];
        if (yi > py) != (yj > py) && px < (xj - xi) * (py - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn segment_distance(px: Real, py: Real, a: (Real, Real), b: (Real, Real)) -> Real {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// One RGB image `1 x 3 x height x width` with values in `[0, 1]`.
pub fn procedural_image(height: usize, width: usize, rng: &mut impl Rng) -> FeatureMap {
    let mut img = FeatureMap::zeros(Shape::new(1, 3, height, width));
    let (h, w) = (height as Real, width as Real);

    let (c0, c1) = (random_color(rng), random_color(rng));
    let theta: Real = rng.random_range(0.0..std::f64::consts::TAU as Real);
    let (gx, gy) = (theta.cos(), theta.sin());
    let span = (w * gx.abs() + h * gy.abs()).max(1.0);
    for y in 0..height {
        for x in 0..width {
            let proj = (x as Real - w / 2.0) * gx + (y as Real - h / 2.0) * gy;
            let t = (proj / span + 0.5).clamp(0.0, 1.0);
            for c in 0..3 {
                img.set(0, c, y, x, c0[c] * (1.0 - t) + c1[c] * t);
            }
        }
    }

    let scale = h.min(w);
    for _ in 0..rng.random_range(2..=4) {
        let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let radius = rng.random_range(0.15..0.4) * scale;
        let n = rng.random_range(3..=6);
        let mut angles: Vec<Real> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU as Real))
            .collect();
        angles.sort_by(|a, b| a.total_cmp(b));
        let pts: Vec<(Real, Real)> = angles
            .iter()
            .map(|&a| {
                let r = radius * rng.random_range(0.6..1.0);
                (cx + r * a.cos(), cy + r * a.sin())
            })
            .collect();
        let color = random_color(rng);
        let alpha = rng.random_range(0.6..1.0);
        paint(&mut img, color, alpha, |px, py| point_in_polygon(px, py, &pts));
    }

    for _ in 0..rng.random_range(1..=3) {
        let mut pts = vec![(rng.random_range(0.0..w), rng.random_range(0.0..h))];
        for _ in 0..rng.random_range(2..=4) {
            let (lx, ly) = *pts.last().unwrap();
            let a: Real = rng.random_range(0.0..std::f64::consts::TAU as Real);
            let len = rng.random_range(0.15..0.35) * scale;
            pts.push(((lx + len * a.cos()).clamp(0.0, w), (ly + len * a.sin()).clamp(0.0, h)));
        }
        let half_width = rng.random_range(0.4..0.8);
        let color: Rgb = if rng.random_bool(0.5) { [0.05; 3] } else { [0.95; 3] };
        paint(&mut img, color, 1.0, |px, py| {
            pts.windows(2)
                .any(|s| segment_distance(px, py, s[0], s[1]) <= half_width)
        });
    }
    img.clamp(0.0, 1.0)
}
