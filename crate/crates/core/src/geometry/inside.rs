//! Ray-parity inside/outside classification for closed meshes.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::skeleton::Vec3;

const MAX_RAYS: usize = 8;
const GRAZE: f64 = 1e-9;

enum Hit {
    Miss,
    Hit,
    Grazing,
}

fn ray_triangle(o: &Vec3, d: &Vec3, t: &[Vec3; 3]) -> Hit {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let pv = d.cross(&e2);
    let det = e1.dot(&pv);
    let scale = e1.norm() * e2.norm();
    if det.abs() <= GRAZE * scale {
        // ray parallel to the face plane: only a problem if it lies in it
        let n = e1.cross(&e2);
        let off = (o - t[0]).dot(&n);
        return if off.abs() <= GRAZE * scale { Hit::Grazing } else { Hit::Miss };
    }
    let inv = 1.0 / det;
    let s = o - t[0];
    let u = s.dot(&pv) * inv;
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    let dist = e2.dot(&q) * inv;
    let inside_tri = u >= -GRAZE && v >= -GRAZE && u + v <= 1.0 + GRAZE;
    if !inside_tri || dist < -GRAZE {
        return Hit::Miss;
    }
    let on_edge = u.abs() <= GRAZE || v.abs() <= GRAZE || (1.0 - u - v).abs() <= GRAZE;
    if on_edge || dist.abs() <= GRAZE {
        return Hit::Grazing;
    }
    Hit::Hit
}

fn directions() -> &'static [Vec3] {
    static DIRS: OnceLock<Vec<Vec3>> = OnceLock::new();
    DIRS.get_or_init(|| {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed0);
    let mut out = vec![Vec3::new(0.5773, 0.5774, 0.5775).normalize()];
    while out.len() < MAX_RAYS {
        let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = d.norm();
        if n > 0.1 && n <= 1.0 {
            out.push(d / n);
        }
    }
    out
    })
}


/// Parity of crossings along a ray from `p`. A ray that grazes an edge,
/// vertex or face plane is re-cast in a new direction, up to eight rays; if
/// every ray grazes, the last parity is used.
pub fn ray_parity_inside(p: &Vec3, tris: &[[Vec3; 3]]) -> bool {
    let mut last = false;
    for d in directions() {
        let mut crossings = 0usize;
        let mut grazed = false;
        for t in tris {
            match ray_triangle(p, d, t) {
                Hit::Miss => {}
                Hit::Hit => crossings += 1,
                Hit::Grazing => {
                    grazed = true;
                    crossings += 1;
                }
            }
        }
        last = crossings % 2 == 1;
        if !grazed {
            return last;
        }
    }
    last
}
