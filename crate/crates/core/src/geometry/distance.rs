//! Exact point-to-triangle distance by closest-point region analysis.

use crate::skeleton::Vec3;

/// Twice the area below this counts as degenerate (area ≤ 1e-12 m²).
pub const DEGENERATE_CROSS: f64 = 2e-12;

/// Closest point on the triangle `abc` to `p` (seven Voronoi regions).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

pub fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

fn lex_less(a: &Vec3, b: &Vec3) -> bool {
    (a.x, a.y, a.z).partial_cmp(&(b.x, b.y, b.z)) == Some(std::cmp::Ordering::Less)
}

/// Squared distance and closest point. Vertices are put in a canonical order
/// first, so every permutation of the same triangle gives identical bits.
pub fn point_triangle_closest(p: &Vec3, tri: &[Vec3; 3]) -> (f64, Vec3) {
    let mut t = *tri;
    if lex_less(&t[1], &t[0]) {
        t.swap(0, 1);
    }
    if lex_less(&t[2], &t[1]) {
        t.swap(1, 2);
    }
    if lex_less(&t[1], &t[0]) {
        t.swap(0, 1);
    }
    let [a, b, c] = t;
    let q = if (b - a).cross(&(c - a)).norm() <= DEGENERATE_CROSS {
        [(a, b), (b, c), (a, c)]
            .iter()
            .map(|(u, v)| closest_point_on_segment(p, u, v))
            .min_by(|x, y| (p - x).norm_squared().total_cmp(&(p - y).norm_squared()))
            .unwrap()
    } else {
        closest_point_on_triangle(p, &a, &b, &c)
    };
    ((p - q).norm_squared(), q)
}

pub fn point_triangle_sqdist(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    point_triangle_closest(p, tri).0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn vertex_and_perpendicular_foot() {
        let tri = [v(0.0, 0.0, 0.0), v(10.0, 0.0, 0.0), v(0.0, 10.0, 0.0)];
        assert_eq!(point_triangle_sqdist(&tri[1], &tri), 0.0);
        assert!((point_triangle_sqdist(&v(1.0, 2.0, 0.7), &tri) - 0.49).abs() < 1e-15);
    }

    #[test]
    fn each_region_by_hand() {
        let tri = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(0.0, 1.0, 0.0)];
        // vertex regions
        assert_eq!(point_triangle_sqdist(&v(-1.0, -1.0, 0.0), &tri), 2.0);
        assert_eq!(point_triangle_sqdist(&v(2.0, 0.0, 0.0), &tri), 1.0);
        assert_eq!(point_triangle_sqdist(&v(0.0, 3.0, 1.0), &tri), 5.0);
        // edge regions
        assert_eq!(point_triangle_sqdist(&v(0.5, -2.0, 0.0), &tri), 4.0);
        assert_eq!(point_triangle_sqdist(&v(-3.0, 0.5, 0.0), &tri), 9.0);
        assert!((point_triangle_sqdist(&v(1.0, 1.0, 0.0), &tri) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_triangle_uses_segments() {
        let tri = [v(0.0, 0.0, 0.0), v(1.0, 0.0, 0.0), v(2.0, 0.0, 0.0)];
        assert!((point_triangle_sqdist(&v(1.5, 1.0, 0.0), &tri) - 1.0).abs() < 1e-15);
        assert!((point_triangle_sqdist(&v(3.0, 0.0, 0.0), &tri) - 1.0).abs() < 1e-15);
    }
}
