//! Planar convex-polygon helpers used by the direction sweep.

pub type Point = (f64, f64);

const DEDUP_TOL: f64 = 1e-9;
const COLLINEAR_TOL: f64 = 1e-12;

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counterclockwise convex hull without collinear points (monotone chain).
/// Returns one point for a point set and two for a segment.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut unique: Vec<Point> = Vec::with_capacity(pts.len());
    for p in pts {
        if !unique.iter().rev().take_while(|u| p.0 - u.0 <= DEDUP_TOL).any(|u| (u.1 - p.1).abs() <= DEDUP_TOL) {
            unique.push(p);
        }
    }
    if unique.len() <= 2 {
        return unique;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * unique.len());
    for &p in &unique {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= COLLINEAR_TOL {
            hull.pop();
        }
        hull.push(p);
    }
    // the upper chain may not pop into the lower one
    let lower_len = hull.len() + 1;
    for &p in unique.iter().rev().skip(1) {
        while hull.len() >= lower_len && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= COLLINEAR_TOL {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        // everything collinear: keep the two extremes
        let first = unique[0];
        let last = *unique.last().unwrap();
        return vec![first, last];
    }
    hull
}

/// Shoelace area; zero for fewer than three vertices.
pub fn shoelace_area(vertices: &[Point]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|j| {
            let (a, b) = (vertices[j], vertices[(j + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    0.5 * twice.abs()
}

/// Distance by which `p` lies outside the convex polygon (0 if inside).
pub fn outside_distance(vertices: &[Point], p: Point) -> f64 {
    match vertices.len() {
        0 => f64::INFINITY,
        1 => (p.0 - vertices[0].0).hypot(p.1 - vertices[0].1),
        2 => segment_distance(vertices[0], vertices[1], p),
        n => {
            let mut inside = true;
            for j in 0..n {
                let (a, b) = (vertices[j], vertices[(j + 1) % n]);
                if cross(a, b, p) < 0.0 {
                    inside = false;
                    break;
                }
            }
            if inside {
                return 0.0;
            }
            (0..n).map(|j| segment_distance(vertices[j], vertices[(j + 1) % n], p)).fold(f64::INFINITY, f64::min)
        }
    }
}

fn segment_distance(a: Point, b: Point, p: Point) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let t = if len2 == 0.0 { 0.0 } else { (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0) };
    (p.0 - a.0 - t * d.0).hypot(p.1 - a.1 - t * d.1)
}

pub fn contains(vertices: &[Point], p: Point, tol: f64) -> bool {
    outside_distance(vertices, p) <= tol
}

/// Convexity test by the sign of consecutive edge cross products.
pub fn is_convex_ccw(vertices: &[Point]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return true;
    }
    (0..n).all(|j| cross(vertices[j], vertices[(j + 1) % n], vertices[(j + 2) % n]) >= -1e-12)
}
