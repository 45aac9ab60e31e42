//! Axis-aligned bounding volume hierarchy for nearest-triangle queries.

use crate::skeleton::Vec3;

use super::distance::point_triangle_closest;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Aabb {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&o.min), max: self.max.sup(&o.max) }
    }

    pub fn sqdist(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
            d += e * e;
        }
        d
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle indices, permuted so that each leaf owns a contiguous range.
    order: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub sqdist: f64,
    pub point: Vec3,
    pub face: usize,
}

impl Bvh {
    pub fn build(tris: &[[Vec3; 3]]) -> Bvh {
        let mut bvh = Bvh { nodes: Vec::new(), order: (0..tris.len()).collect() };
        if !tris.is_empty() {
            let boxes: Vec<Aabb> = tris
                .iter()
                .map(|t| {
                    let mut b = Aabb::empty();
                    t.iter().for_each(|p| b.grow(p));
                    b
                })
                .collect();
            let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
            bvh.build_range(0, tris.len(), &boxes, &centroids);
        }
        bvh
    }

    fn build_range(&mut self, start: usize, end: usize, boxes: &[Aabb], centroids: &[Vec3]) -> usize {
        let bounds = self.order[start..end].iter().fold(Aabb::empty(), |acc, &i| acc.union(&boxes[i]));
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, end });
            return id;
        }
        let mut cb = Aabb::empty();
        self.order[start..end].iter().for_each(|&i| cb.grow(&centroids[i]));
        let ext = cb.max - cb.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
        self.nodes.push(Node::Leaf { bounds, start, end });
        let left = self.build_range(start, mid, boxes, centroids);
        let right = self.build_range(mid, end, boxes, centroids);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| *n.bounds())
    }

    /// Nearest triangle to `p`. The result value equals the exhaustive
    /// minimum: a subtree is skipped only when its box is strictly farther
    /// than the best distance found, with a margin for rounding.
    pub fn nearest(&self, p: &Vec3, tris: &[[Vec3; 3]]) -> Option<Nearest> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<Nearest> = None;
        let mut stack = vec![(self.nodes[0].bounds().sqdist(p), 0usize)];
        let prune = |box_d: f64, best: &Option<Nearest>| match best {
            Some(b) => box_d > b.sqdist * (1.0 + 1e-12) + 1e-300,
            None => false,
        };
        while let Some((box_d, id)) = stack.pop() {
            if prune(box_d, &best) {
                continue;
            }
            match &self.nodes[id] {
                Node::Leaf { start, end, .. } => {
                    for &f in &self.order[*start..*end] {
                        let (d, q) = point_triangle_closest(p, &tris[f]);
                        let better = match &best {
                            None => true,
                            Some(b) => d < b.sqdist || (d == b.sqdist && f < b.face),
                        };
                        if better {
                            best = Some(Nearest { sqdist: d, point: q, face: f });
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().sqdist(p);
                    let dr = self.nodes[*right].bounds().sqdist(p);
                    // push the farther child first so the nearer one is visited next
                    if dl <= dr {
                        stack.push((dr, *right));
                        stack.push((dl, *left));
                    } else {
                        stack.push((dl, *left));
                        stack.push((dr, *right));
                    }
                }
            }
        }
        best
    }
}

/// Exhaustive loop over all faces; ties go to the lowest face index.
pub fn nearest_exhaustive(p: &Vec3, tris: &[[Vec3; 3]]) -> Option<Nearest> {
    let mut best: Option<Nearest> = None;
    for (f, t) in tris.iter().enumerate() {
        let (d, q) = point_triangle_closest(p, t);
        if best.map_or(true, |b| d < b.sqdist) {
            best = Some(Nearest { sqdist: d, point: q, face: f });
        }
    }
    best
}
