//! HOI joint graph, normalized adjacency, kinetic chains and the chain mask.

use crate::error::{ChainError, Result};
use crate::skeleton::SkeletonSpec;

pub const CHAIN_COUNT: usize = 6;
pub const CHAIN_NAMES: [&str; CHAIN_COUNT] = ["torso", "left_arm", "right_arm", "left_leg", "right_leg", "human_object"];

#[derive(Debug, Clone, PartialEq)]
pub struct HoiGraph {
    pub node_count: usize,
    /// Undirected edges `(a, b)` with `a < b`, in construction order.
    pub edges: Vec<(usize, usize)>,
    /// Dense `node_count²` 0/1 matrix without self-loops.
    pub adjacency: Vec<f64>,
    pub normalized: Vec<f64>,
}

impl HoiGraph {
    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == node || b == node).count()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a * self.node_count + b] != 0.0
    }
}

/// Builds the graph. With `object_to_all_joints` the object node connects to
/// every human joint instead of only the eight interaction joints.
pub fn build_hoi_graph_with(spec: &SkeletonSpec, object_to_all_joints: bool) -> Result<HoiGraph> {
    spec.validate()?;
    let n = spec.node_count();
    let mut edges: Vec<(usize, usize)> = spec.bones().into_iter().map(|(c, p)| (p.min(c), p.max(c))).collect();
    let obj = spec.object_node();
    if object_to_all_joints {
        edges.extend((0..spec.joint_count()).map(|j| (j, obj)));
    } else {
        edges.extend(spec.interaction_joints.iter().map(|&j| (j, obj)));
    }
    edges.extend(spec.foot_joints.iter().map(|&f| (f, spec.foot_contact_node())));
    let mut adjacency = vec![0.0; n * n];
    for &(a, b) in &edges {
        adjacency[a * n + b] = 1.0;
        adjacency[b * n + a] = 1.0;
    }
    let normalized = normalize_adjacency(&adjacency, n);
    Ok(HoiGraph { node_count: n, edges, adjacency, normalized })
}

pub fn build_hoi_graph(spec: &SkeletonSpec) -> Result<HoiGraph> {
    build_hoi_graph_with(spec, false)
}

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
pub fn normalize_adjacency(a: &[f64], n: usize) -> Vec<f64> {
    let deg: Vec<f64> = (0..n).map(|i| 1.0 + a[i * n..(i + 1) * n].iter().sum::<f64>()).collect();
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let aij = a[i * n + j] + if i == j { 1.0 } else { 0.0 };
            out[i * n + j] = inv[i] * aij * inv[j];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticChains {
    pub chains: Vec<Vec<usize>>,
}

/// Five body chains in parent order plus the human-object chain (object node
/// first, then the interaction joints). Hips and collars sit in both the
/// torso and their limb chain; the foot-contact node is in none.
pub fn build_kinetic_chains(spec: &SkeletonSpec) -> Result<KineticChains> {
    spec.validate()?;
    let idx = |name: &str| {
        spec.index_of(name).ok_or_else(|| ChainError::InvalidSpec(format!("skeleton has no joint {:?}", name)))
    };
    let named = |names: &[&str]| names.iter().map(|n| idx(n)).collect::<Result<Vec<_>>>();
    let torso = named(&[
        "pelvis", "left_hip", "right_hip", "spine1", "spine2", "spine3", "left_collar", "right_collar", "neck", "head",
    ])?;
    let left_arm = named(&["left_collar", "left_shoulder", "left_elbow", "left_wrist"])?;
    let right_arm = named(&["right_collar", "right_shoulder", "right_elbow", "right_wrist"])?;
    let left_leg = named(&["left_hip", "left_knee", "left_ankle", "left_foot"])?;
    let right_leg = named(&["right_hip", "right_knee", "right_ankle", "right_foot"])?;
    let mut hoi = vec![spec.object_node()];
    hoi.extend_from_slice(&spec.interaction_joints);
    Ok(KineticChains { chains: vec![torso, left_arm, right_arm, left_leg, right_leg, hoi] })
}

/// `M[c * node_count + n]` is true iff node `n` belongs to chain `c`.
pub fn build_chain_attention_mask(chains: &KineticChains, node_count: usize) -> Result<Vec<bool>> {
    let mut m = vec![false; chains.chains.len() * node_count];
    for (c, chain) in chains.chains.iter().enumerate() {
        if chain.len() < 2 {
            return Err(ChainError::InvalidChains(format!("chain {} has {} nodes", c, chain.len())));
        }
        for &n in chain {
            if n >= node_count {
                return Err(ChainError::InvalidChains(format!("chain {} names node {} of {}", c, n, node_count)));
            }
            m[c * node_count + n] = true;
        }
    }
    Ok(m)
}

/// Aligned text tables: edges, chain membership and the mask.
pub fn describe(spec: &SkeletonSpec, graph: &HoiGraph, chains: &KineticChains, mask: &[bool]) -> String {
    let name = |n: usize| -> String {
        if n < spec.joint_count() {
            spec.joint_names[n].clone()
        } else if n == spec.foot_contact_node() {
            "foot_contact".into()
        } else {
            "object".into()
        }
    };
    let mut s = String::new();
    s.push_str(&format!("edges ({})\n", graph.edges.len()));
    for &(a, b) in &graph.edges {
        s.push_str(&format!("  {:>3} {:<16} -- {:>3} {:<16}\n", a, name(a), b, name(b)));
    }
    s.push_str("\nchains\n");
    for (c, chain) in chains.chains.iter().enumerate() {
        let members: Vec<String> = chain.iter().map(|&n| name(n)).collect();
        s.push_str(&format!("  {:<13} {:>2}  {}\n", CHAIN_NAMES.get(c).unwrap_or(&"chain"), chain.len(), members.join(" ")));
    }
    s.push_str("\nmask (rows: chains, columns: nodes)\n");
    s.push_str(&format!("  {:<13} ", ""));
    for n in 0..graph.node_count {
        s.push_str(&format!("{:>3}", n));
    }
    s.push('\n');
    for c in 0..chains.chains.len() {
        s.push_str(&format!("  {:<13} ", CHAIN_NAMES.get(c).unwrap_or(&"chain")));
        for n in 0..graph.node_count {
            s.push_str(&format!("{:>3}", if mask[c * graph.node_count + n] { 1 } else { 0 }));
        }
        s.push('\n');
    }
    s
}

/// Graph-description text for external renderers.
pub fn to_dot(spec: &SkeletonSpec, graph: &HoiGraph) -> String {
    let mut s = String::from("graph hoi {\n");
    for n in 0..graph.node_count {
        let label = if n < spec.joint_count() {
            spec.joint_names[n].as_str()
        } else if n == spec.foot_contact_node() {
            "foot_contact"
        } else {
            "object"
        };
        s.push_str(&format!("  n{} [label=\"{}\"];\n", n, label));
    }
    for &(a, b) in &graph.edges {
        s.push_str(&format!("  n{} -- n{};\n", a, b));
    }
    s.push_str("}\n");
    s
}
