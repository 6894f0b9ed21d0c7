//! Planar polygon utilities: areas, clipping and intersection-over-union.
//!
//! Points are `(x, y)`. In pixel space `x` is the column and `y` the row.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Pixel-space point from `(row, col)`.
    pub const fn rc(row: f64, col: f64) -> Self {
        Point { x: col, y: row }
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

/// A simple polygon as an open ring (the first vertex is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Polygon(pub Vec<Point>);

impl Polygon {
    pub fn new(points: Vec<Point>) -> Self {
        Polygon(points)
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    pub fn signed_area(&self) -> f64 {
        shoelace(&self.0)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn centroid(&self) -> Option<Point> {
        let a = self.signed_area();
        if a == 0.0 {
            return None;
        }
        let n = self.0.len();
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let (p, q) = (self.0[i], self.0[(i + 1) % n]);
            let w = p.cross(q);
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
        }
        Some(Point::new(cx / (6.0 * a), cy / (6.0 * a)))
    }

    pub fn is_convex(&self) -> bool {
        let n = self.0.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0f64;
        for i in 0..n {
            let (a, b, c) = (self.0[i], self.0[(i + 1) % n], self.0[(i + 2) % n]);
            let z = b.sub(a).cross(c.sub(b));
            if z != 0.0 {
                if sign != 0.0 && z.signum() != sign {
                    return false;
                }
                sign = z.signum();
            }
        }
        true
    }

    /// Same ring with counter-clockwise orientation (in a y-up frame).
    pub fn to_ccw(&self) -> Polygon {
        let mut p = self.0.clone();
        if shoelace(&p) < 0.0 {
            p.reverse();
        }
        Polygon(p)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Polygon {
        Polygon(self.0.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect())
    }

    /// Maps every vertex through `f`.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Polygon {
        Polygon(self.0.iter().copied().map(f).collect())
    }

    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    /// Rectangle centered on `center` whose `length` side points along the
    /// unit vector `axis`.
    pub fn oriented_rect(center: Point, axis: Point, length: f64, width: f64) -> Polygon {
        let (hl, hw) = (length / 2.0, width / 2.0);
        let perp = Point::new(-axis.y, axis.x);
        let corner = |sl: f64, sw: f64| {
            Point::new(
                center.x + sl * hl * axis.x + sw * hw * perp.x,
                center.y + sl * hl * axis.y + sw * hw * perp.y,
            )
        };
        Polygon(vec![
            corner(-1.0, -1.0),
            corner(1.0, -1.0),
            corner(1.0, 1.0),
            corner(-1.0, 1.0),
        ])
    }

    /// Inscribed polygon approximating an ellipse with semi-axes `a` (along
    /// `axis`) and `b`.
    pub fn ellipse(center: Point, axis: Point, a: f64, b: f64, vertices: usize) -> Polygon {
        let perp = Point::new(-axis.y, axis.x);
        Polygon(
            (0..vertices)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / vertices as f64;
                    let (u, v) = (a * t.cos(), b * t.sin());
                    Point::new(center.x + u * axis.x + v * perp.x, center.y + u * axis.y + v * perp.y)
                })
                .collect(),
        )
    }

    /// Clips a convex polygon to an axis-aligned box.
    pub fn clip_to_box(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        let clip = Polygon::rect(x0, y0, x1, y1);
        Polygon(clip_convex(&self.to_ccw().0, &clip.0))
    }
}

fn shoelace(p: &[Point]) -> f64 {
    let n = p.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += p[i].cross(p[(i + 1) % n]);
    }
    s / 2.0
}

/// Sutherland-Hodgman clipping of `subject` against a convex, counter-clockwise `clip` ring.
fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let edge = b.sub(a);
        let inside = |p: Point| edge.cross(p.sub(a)) >= 0.0;
        let input = std::mem::take(&mut out);
        let n = input.len();
        for j in 0..n {
            let (p, q) = (input[j], input[(j + 1) % n]);
            let (pin, qin) = (inside(p), inside(q));
            if pin {
                out.push(p);
            }
            if pin != qin {
                let d = q.sub(p);
                let denom = edge.cross(d);
                if denom != 0.0 {
                    let t = edge.cross(a.sub(p)) / denom;
                    out.push(Point::new(p.x + t * d.x, p.y + t * d.y));
                }
            }
        }
    }
    out
}

/// Area of the intersection of two simple polygons.
///
/// Convex pairs are clipped directly. Otherwise each polygon is written as a
/// signed sum of fan triangles, so the overlap is the signed sum of pairwise
/// (convex) triangle overlaps.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    if a.0.len() < 3 || b.0.len() < 3 {
        return 0.0;
    }
    if a.is_convex() && b.is_convex() {
        let (a, b) = (a.to_ccw(), b.to_ccw());
        return shoelace(&clip_convex(&a.0, &b.0)).abs();
    }
    let fan = |p: &Polygon| -> Vec<(f64, [Point; 3])> {
        let o = p.0[0];
        p.0.windows(2)
            .skip(1)
            .filter_map(|w| {
                let tri = [o, w[0], w[1]];
                let s = shoelace(&tri);
                if s == 0.0 {
                    None
                } else if s > 0.0 {
                    Some((1.0, tri))
                } else {
                    Some((-1.0, [o, w[1], w[0]]))
                }
            })
            .collect()
    };
    let (ta, tb) = (fan(a), fan(b));
    let mut total = 0.0;
    for (sa, x) in &ta {
        for (sb, y) in &tb {
            let piece = shoelace(&clip_convex(x, y)).abs();
            total += sa * sb * piece;
        }
    }
    let orient = a.signed_area().signum() * b.signed_area().signum();
    (orient * total).max(0.0)
}

/// Intersection over union; 0 when either polygon has no area.
pub fn iou(a: &Polygon, b: &Polygon) -> f64 {
    let (aa, ab) = (a.area(), b.area());
    if aa == 0.0 || ab == 0.0 {
        return 0.0;
    }
    let inter = intersection_area(a, b).min(aa.min(ab));
    let union = aa + ab - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Convex hull (Andrew's monotone chain), counter-clockwise.
pub fn convex_hull(points: &[Point]) -> Polygon {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return Polygon(pts);
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && lower[lower.len() - 1]
                .sub(lower[lower.len() - 2])
                .cross(p.sub(lower[lower.len() - 1]))
                <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && upper[upper.len() - 1]
                .sub(upper[upper.len() - 2])
                .cross(p.sub(upper[upper.len() - 1]))
                <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    Polygon(lower)
}

/// Distance from `p` to the segment from `a` to `b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
    let t = t.clamp(0.0, 1.0);
    p.dist(Point::new(a.x + t * ab.x, a.y + t * ab.y))
}
