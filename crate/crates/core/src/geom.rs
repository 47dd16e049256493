//! 2-D geometry for rotated rectangles: vertex kinematics, exact
//! separating-axis overlap tests, convex polygon distance, and max-margin
//! separating planes.
//!
//! Angles are clockwise-positive: θ > 0 tilts a book's top toward +x, so a
//! body offset `h` maps to the world as `R(θ)·h = (c·hx + s·hy, −s·hx + c·hy)`
//! with `c = cos θ`, `s = sin θ`.

pub type Vec2 = [f64; 2];

pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

pub fn scale(a: Vec2, k: f64) -> Vec2 {
    [a[0] * k, a[1] * k]
}

pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

/// Applies the clockwise rotation `R(θ)` to a body-frame offset.
pub fn rotate(theta: f64, h: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    [c * h[0] + s * h[1], -s * h[0] + c * h[1]]
}

/// Body-frame corner offsets in vertex order v1..v4:
/// top-right, bottom-right, bottom-left, top-left.
pub fn corner_offsets(half_w: f64, half_h: f64) -> [Vec2; 4] {
    [
        [half_w, half_h],
        [half_w, -half_h],
        [-half_w, -half_h],
        [-half_w, half_h],
    ]
}

/// A rectangle posed in the world: centroid, half extents, clockwise angle.
#[derive(Clone, Copy, Debug)]
pub struct RotRect {
    pub center: Vec2,
    pub half_w: f64,
    pub half_h: f64,
    pub theta: f64,
}

impl RotRect {
    /// World-frame vertices v1..v4.
    pub fn corners(&self) -> [Vec2; 4] {
        let offs = corner_offsets(self.half_w, self.half_h);
        [
            add(self.center, rotate(self.theta, offs[0])),
            add(self.center, rotate(self.theta, offs[1])),
            add(self.center, rotate(self.theta, offs[2])),
            add(self.center, rotate(self.theta, offs[3])),
        ]
    }

    /// Exact membership test via the body frame.
    pub fn contains(&self, p: Vec2) -> bool {
        let d = sub(p, self.center);
        let ux = rotate(self.theta, [1.0, 0.0]);
        let uy = rotate(self.theta, [0.0, 1.0]);
        dot(d, ux).abs() <= self.half_w && dot(d, uy).abs() <= self.half_h
    }
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &p in poly {
        let v = dot(p, axis);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn edge_normals(poly: &[Vec2], out: &mut Vec<Vec2>) {
    for i in 0..poly.len() {
        let e = sub(poly[(i + 1) % poly.len()], poly[i]);
        let len = norm(e);
        if len > 1e-12 {
            out.push([-e[1] / len, e[0] / len]);
        }
    }
}

/// Separating-axis test over the edge normals of both convex polygons.
/// Returns the signed depth: positive = penetration (minimum translation
/// distance), zero/negative = separated with the best axis gap as `-depth`.
/// Exact for overlap detection and for penetration depth of convex shapes.
pub fn sat_depth(a: &[Vec2], b: &[Vec2]) -> f64 {
    let mut axes = Vec::with_capacity(a.len() + b.len());
    edge_normals(a, &mut axes);
    edge_normals(b, &mut axes);
    let mut depth = f64::INFINITY;
    for axis in axes {
        let (alo, ahi) = project(a, axis);
        let (blo, bhi) = project(b, axis);
        let overlap = ahi.min(bhi) - alo.max(blo);
        depth = depth.min(overlap);
    }
    depth
}

/// True when penetration exceeds `tol` (touching counts as collision-free).
pub fn rects_overlap(a: &RotRect, b: &RotRect, tol: f64) -> bool {
    sat_depth(&a.corners(), &b.corners()) > tol
}

fn closest_point_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    if len2 <= 1e-24 {
        return a;
    }
    let t = (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0);
    add(a, scale(ab, t))
}

/// Exact distance between two convex polygons with the realizing points.
/// Zero for touching or overlapping pairs.
pub fn polygon_distance(a: &[Vec2], b: &[Vec2]) -> (f64, Vec2, Vec2) {
    if sat_depth(a, b) >= 0.0 {
        // touching or overlapping: distance 0, report any shared support
        let p = a[0];
        return (0.0, p, p);
    }
    let mut best = (f64::INFINITY, a[0], b[0]);
    for &p in a {
        for i in 0..b.len() {
            let q = closest_point_on_segment(p, b[i], b[(i + 1) % b.len()]);
            let d = norm(sub(p, q));
            if d < best.0 {
                best = (d, p, q);
            }
        }
    }
    for &p in b {
        for i in 0..a.len() {
            let q = closest_point_on_segment(p, a[i], a[(i + 1) % a.len()]);
            let d = norm(sub(p, q));
            if d < best.0 {
                best = (d, q, p);
            }
        }
    }
    best
}

/// A separating plane `n·x = offset` with `‖n‖ = 1`.
#[derive(Clone, Copy, Debug)]
pub struct Plane {
    pub normal: Vec2,
    pub offset: f64,
}

impl Plane {
    pub fn signed(&self, p: Vec2) -> f64 {
        dot(self.normal, p) - self.offset
    }
}

/// Maximum-margin separating plane between two non-overlapping convex
/// polygons, oriented so `a`-vertices satisfy `n·v ≤ offset` and
/// `b`-vertices `n·v ≥ offset`. For touching pairs this degenerates to the
/// zero-margin supporting line along the contact axis.
pub fn max_margin_plane(a: &[Vec2], b: &[Vec2]) -> Option<Plane> {
    let (dist, pa, pb) = polygon_distance(a, b);
    if dist > 1e-12 {
        let n = scale(sub(pb, pa), 1.0 / dist);
        let offset = dot(n, scale(add(pa, pb), 0.5));
        return Some(Plane { normal: n, offset });
    }
    // touching: take the edge-normal axis with the smallest overlap
    let mut axes = Vec::new();
    edge_normals(a, &mut axes);
    edge_normals(b, &mut axes);
    let mut best: Option<(f64, Plane)> = None;
    for axis in axes {
        let (alo, ahi) = project(a, axis);
        let (blo, bhi) = project(b, axis);
        for (n, a_hi, b_lo) in [(axis, ahi, blo), (scale(axis, -1.0), -alo, -bhi)] {
            let overlap = a_hi - b_lo;
            let plane = Plane { normal: n, offset: 0.5 * (a_hi + b_lo) };
            match best {
                Some((o, _)) if o <= overlap => {}
                _ => best = Some((overlap, plane)),
            }
        }
    }
    let (overlap, plane) = best?;
    if overlap > 1e-9 {
        None // genuinely overlapping: no separating plane exists
    } else {
        Some(plane)
    }
}

/// Merges the x-projections of `occupied` intervals and returns the widest
/// free gap inside `[lo, hi]` as `(center, width)`.
pub fn widest_gap(lo: f64, hi: f64, occupied: &[(f64, f64)]) -> (f64, f64) {
    let mut ivals: Vec<(f64, f64)> = occupied
        .iter()
        .map(|&(a, b)| (a.max(lo), b.min(hi)))
        .filter(|&(a, b)| b > a)
        .collect();
    ivals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in ivals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    let mut cursor = lo;
    let mut best = (lo, 0.0);
    for (a, b) in merged.iter().chain(std::iter::once(&(hi, hi))) {
        let width = a - cursor;
        if width > best.1 {
            best = (0.5 * (cursor + a), width);
        }
        cursor = cursor.max(*b);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn upright(cx: f64, w: f64, h: f64) -> RotRect {
        RotRect { center: [cx, h / 2.0], half_w: w / 2.0, half_h: h / 2.0, theta: 0.0 }
    }

    #[test]
    fn identical_rects_overlap() {
        let a = upright(0.0, 2.0, 6.0);
        assert!(rects_overlap(&a, &a, 1e-9));
        assert!((sat_depth(&a.corners(), &a.corners()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn touching_edge_is_collision_free() {
        let a = upright(0.0, 2.0, 6.0);
        let b = upright(2.0, 2.0, 6.0);
        assert!(!rects_overlap(&a, &b, 0.0));
        assert!(sat_depth(&a.corners(), &b.corners()).abs() < 1e-12);
    }

    #[test]
    fn rotated_overlap_detected() {
        let a = upright(0.0, 2.0, 6.0);
        let b = RotRect { center: [1.5, 3.0], half_w: 1.0, half_h: 3.0, theta: 0.5 };
        assert!(rects_overlap(&a, &b, 1e-6));
    }

    #[test]
    fn plane_separates_disjoint_pair() {
        let a = upright(-3.0, 2.0, 6.0);
        let b = upright(1.0, 2.0, 5.0);
        let plane = max_margin_plane(&a.corners(), &b.corners()).unwrap();
        assert!((norm(plane.normal) - 1.0).abs() < 1e-12);
        for v in a.corners() {
            assert!(plane.signed(v) <= 1e-9);
        }
        for v in b.corners() {
            assert!(plane.signed(v) >= -1e-9);
        }
        // max-margin between verticals at x = −2 and x = 0 is the line x = −1
        assert!((plane.normal[0] - 1.0).abs() < 1e-9);
        assert!((plane.offset + 1.0).abs() < 1e-9);
    }

    #[test]
    fn plane_through_shared_edge_for_touching_pair() {
        let a = upright(0.0, 2.0, 6.0);
        let b = upright(2.0, 2.0, 4.0);
        let plane = max_margin_plane(&a.corners(), &b.corners()).unwrap();
        for v in a.corners() {
            assert!(plane.signed(v) <= 1e-9);
        }
        for v in b.corners() {
            assert!(plane.signed(v) >= -1e-9);
        }
        assert!((plane.signed([1.0, 1.0])).abs() < 1e-9);
    }

    #[test]
    fn no_plane_for_overlapping_pair() {
        let a = upright(0.0, 2.0, 6.0);
        let b = upright(0.5, 2.0, 6.0);
        assert!(max_margin_plane(&a.corners(), &b.corners()).is_none());
    }

    #[test]
    fn distance_matches_hand_value() {
        let a = upright(-2.0, 2.0, 4.0);
        let b = upright(3.0, 2.0, 4.0);
        let (d, _, _) = polygon_distance(&a.corners(), &b.corners());
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn widest_gap_between_intervals() {
        let (c, w) = widest_gap(-9.0, 9.0, &[(-9.0, -4.0), (-1.0, 3.0)]);
        assert!((w - 6.0).abs() < 1e-12);
        assert!((c - 6.0).abs() < 1e-12);
        let (c2, w2) = widest_gap(-9.0, 9.0, &[(-9.0, 9.0)]);
        assert_eq!(w2, 0.0);
        let _ = c2;
    }
}
