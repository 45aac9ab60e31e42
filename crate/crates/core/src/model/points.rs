//! PointNet-style object encoder: farthest-point seeds, a shared per-point
//! MLP and a max over each seed's nearest-neighbour cluster.

use chainhoi_nn::{impl_module, Linear, Result, Tensor};
use rand::Rng;

use crate::skeleton::Vec3;

fn lex(a: &Vec3, b: &Vec3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

/// Repeats the cloud cyclically up to `k` points when it is smaller.
pub fn pad_cloud(points: &[Vec3], k: usize) -> Vec<Vec3> {
    if points.len() >= k || points.is_empty() {
        return points.to_vec();
    }
    log::warn!("object cloud has {} points, tiling to {}", points.len(), k);
    (0..k).map(|i| points[i % points.len()]).collect()
}

/// Farthest-point sampling. The first seed is the point farthest from the
/// centroid; every later seed maximizes the distance to the chosen set.
/// Ties go to the lexicographically smallest coordinates, so the seed set
/// does not depend on input order.
pub fn farthest_point_seeds(points: &[Vec3], k: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let centroid = points.iter().sum::<Vec3>() / n as f64;
    let better = |i: usize, di: f64, j: usize, dj: f64| di > dj || (di == dj && lex(&points[i], &points[j]).is_lt());
    let mut first = 0;
    let mut best = (points[0] - centroid).norm_squared();
    for i in 1..n {
        let d = (points[i] - centroid).norm_squared();
        if better(i, d, first, best) {
            first = i;
            best = d;
        }
    }
    let mut seeds = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut mind: Vec<f64> = points.iter().map(|p| (p - points[first]).norm_squared()).collect();
    while seeds.len() < k.min(n) {
        let mut pick = None::<usize>;
        for i in (0..n).filter(|&i| !chosen[i]) {
            if pick.map_or(true, |j| better(i, mind[i], j, mind[j])) {
                pick = Some(i);
            }
        }
        let s = pick.unwrap();
        chosen[s] = true;
        seeds.push(s);
        for i in 0..n {
            mind[i] = mind[i].min((points[i] - points[s]).norm_squared());
        }
    }
    seeds
}

/// Cluster id per point: seeds own themselves, every other point joins its
/// nearest seed (earliest seed on ties).
pub fn assign_clusters(points: &[Vec3], seeds: &[usize]) -> Vec<usize> {
    let mut out = vec![0; points.len()];
    for (i, p) in points.iter().enumerate() {
        if let Some(s) = seeds.iter().position(|&s| s == i) {
            out[i] = s;
            continue;
        }
        let mut best = (0, f64::INFINITY);
        for (c, &s) in seeds.iter().enumerate() {
            let d = (p - points[s]).norm_squared();
            if d < best.1 {
                best = (c, d);
            }
        }
        out[i] = best.0;
    }
    out
}

#[derive(Debug, Clone)]
pub struct PointEncoder {
    pub fc1: Linear,
    pub fc2: Linear,
    tokens: usize,
}

impl_module!(PointEncoder { params: [], children: [fc1, fc2] });

impl PointEncoder {
    pub fn new<R: Rng>(hidden: usize, d: usize, tokens: usize, rng: &mut R) -> PointEncoder {
        PointEncoder { fc1: Linear::new(3, hidden, rng), fc2: Linear::new(hidden, d, rng), tokens }
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    /// `[tokens, d]`, ordered by seed selection order.
    pub fn forward(&self, points: &[Vec3]) -> Result<Tensor> {
        let cloud = pad_cloud(points, self.tokens);
        let seeds = farthest_point_seeds(&cloud, self.tokens);
        let clusters = assign_clusters(&cloud, &seeds);
        let flat: Vec<f64> = cloud.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        let x = Tensor::from_vec(flat, &[cloud.len(), 3])?;
        let h = self.fc2.forward(&self.fc1.forward(&x)?.gelu())?;
        h.segment_max(&clusters, seeds.len())
    }
}
