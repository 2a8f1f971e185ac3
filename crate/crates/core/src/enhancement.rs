//! Gated cross-domain preference enhancement.
//!
//! For a target domain, every other domain's raw aspect preference matrix
//! is passed through an elementwise sigmoid gate and the gated blocks are
//! fused with the target's own raw matrix by a per-target projection. The
//! gate keys on the elementwise product (are both preferences active?) and
//! the difference (do they disagree?) of the two matrices.
//!
//! Empty-domain rule: a source domain in which the user has no
//! interactions contributes a zero block regardless of its gate value.

use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mat::Mat;
use crate::representation::init_uniform;

/// Gate parameters are indexed by source domain (`gate_w[s']` is `d x 2d`,
/// `gate_b[s']` is `d x M`); fusion parameters by target domain
/// (`fuse_w[s]` is `d x S*d`, `fuse_b[s]` is `d x M`).
#[derive(Clone, Debug, PartialEq)]
pub struct EnhancementParams {
    pub gate_w: Vec<Mat>,
    pub gate_b: Vec<Mat>,
    pub fuse_w: Vec<Mat>,
    pub fuse_b: Vec<Mat>,
}

impl EnhancementParams {
    pub fn init(d: usize, num_aspects: usize, num_domains: usize, rng: &mut ChaCha20Rng) -> Self {
        // gates exist only when there is a second domain to transfer from
        let gates = if num_domains >= 2 { num_domains } else { 0 };
        EnhancementParams {
            gate_w: (0..gates).map(|_| init_uniform(d, 2 * d, 2 * d, rng)).collect(),
            gate_b: (0..gates)
                .map(|_| init_uniform(d, num_aspects, 2 * d, rng))
                .collect(),
            fuse_w: (0..num_domains)
                .map(|_| init_uniform(d, num_domains * d, num_domains * d, rng))
                .collect(),
            fuse_b: (0..num_domains)
                .map(|_| init_uniform(d, num_aspects, num_domains * d, rng))
                .collect(),
        }
    }
}

#[derive(Clone)]
pub struct EnhancementNodes {
    pub gate_w: Vec<NodeId>,
    pub gate_b: Vec<NodeId>,
    pub fuse_w: Vec<NodeId>,
    pub fuse_b: Vec<NodeId>,
}

pub fn bind_enhancement(g: &mut Graph, p: &EnhancementParams) -> EnhancementNodes {
    EnhancementNodes {
        gate_w: p.gate_w.iter().map(|m| g.leaf(m.clone())).collect(),
        gate_b: p.gate_b.iter().map(|m| g.leaf(m.clone())).collect(),
        fuse_w: p.fuse_w.iter().map(|m| g.leaf(m.clone())).collect(),
        fuse_b: p.fuse_b.iter().map(|m| g.leaf(m.clone())).collect(),
    }
}

/// Graph builder for the gate matrix of a (target, source) pair:
/// `sigmoid(gate_w [ (A_t o A_s) ; (A_t - A_s) ] + gate_b)`, entries in
/// (0,1).
pub fn gate_matrix_node(
    g: &mut Graph,
    gate_w: NodeId,
    gate_b: NodeId,
    a_target: NodeId,
    a_source: NodeId,
) -> NodeId {
    let prod = g.hadamard(a_target, a_source);
    let diff = g.sub(a_target, a_source);
    let stacked = g.concat_rows(&[prod, diff]);
    let pre = g.matmul(gate_w, stacked);
    let pre = g.add(pre, gate_b);
    g.sigmoid(pre)
}

/// Graph builder for the enhanced matrix of `target`: blocks ordered by
/// domain index, the target's own raw matrix ungated in its natural slot,
/// every other non-empty domain gated, empty domains contributing zeros.
pub fn enhance_aspects_node(
    g: &mut Graph,
    enh: &EnhancementNodes,
    raw: &[NodeId],
    empty: &[bool],
    target: usize,
) -> NodeId {
    let (d, m) = {
        let v = g.value(raw[target]);
        (v.rows(), v.cols())
    };
    let mut blocks = Vec::with_capacity(raw.len());
    for (s, &a_s) in raw.iter().enumerate() {
        if s == target {
            blocks.push(a_s);
        } else if empty[s] {
            blocks.push(g.leaf(Mat::zeros(d, m)));
        } else {
            let gate = gate_matrix_node(g, enh.gate_w[s], enh.gate_b[s], raw[target], a_s);
            blocks.push(g.hadamard(gate, a_s));
        }
    }
    let stacked = g.concat_rows(&blocks);
    let pre = g.matmul(enh.fuse_w[target], stacked);
    let pre = g.add(pre, enh.fuse_b[target]);
    g.sigmoid(pre)
}

fn check_dm(a: &Mat, b: &Mat) -> Result<()> {
    if (a.rows(), a.cols()) != (b.rows(), b.cols()) {
        return Err(Error::Shape(format!(
            "aspect matrices disagree: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Standalone gate computation for one (target, source) pair.
pub fn gate_matrix(target: &Mat, source: &Mat, gate_w: &Mat, gate_b: &Mat) -> Result<Mat> {
    check_dm(target, source)?;
    if gate_w.cols() != 2 * target.rows() {
        return Err(Error::Shape(format!(
            "gate projection has {} columns, expected {}",
            gate_w.cols(),
            2 * target.rows()
        )));
    }
    let mut g = Graph::new();
    let (wt, bt) = (g.leaf(gate_w.clone()), g.leaf(gate_b.clone()));
    let (at, as_) = (g.leaf(target.clone()), g.leaf(source.clone()));
    let gate = gate_matrix_node(&mut g, wt, bt, at, as_);
    Ok(g.value(gate).clone())
}

/// Standalone enhancement: fuses the raw matrices of all domains for
/// `target`. `empty[s]` marks domains whose raw matrix is the zero
/// placeholder.
pub fn enhance_aspects(
    raw: &[Mat],
    empty: &[bool],
    target: usize,
    params: &EnhancementParams,
) -> Result<Mat> {
    if raw.is_empty() || raw.len() != empty.len() || target >= raw.len() {
        return Err(Error::Shape("inconsistent enhancement inputs".into()));
    }
    for a in raw {
        check_dm(a, &raw[0])?;
    }
    let mut g = Graph::new();
    let enh = bind_enhancement(&mut g, params);
    let raw_nodes: Vec<NodeId> = raw.iter().map(|a| g.leaf(a.clone())).collect();
    let out = enhance_aspects_node(&mut g, &enh, &raw_nodes, empty, target);
    Ok(g.value(out).clone())
}

/// Test hook: fusion with externally supplied gate matrices
/// (`gates[s]` ignored for the target slot and empty domains).
pub fn enhance_aspects_with_gates(
    raw: &[Mat],
    empty: &[bool],
    gates: &[Mat],
    target: usize,
    params: &EnhancementParams,
) -> Result<Mat> {
    if raw.len() != gates.len() {
        return Err(Error::Shape("one gate matrix per domain required".into()));
    }
    let (d, m) = (raw[0].rows(), raw[0].cols());
    let mut blocks: Vec<Mat> = Vec::with_capacity(raw.len());
    for s in 0..raw.len() {
        if s == target {
            blocks.push(raw[s].clone());
        } else if empty[s] {
            blocks.push(Mat::zeros(d, m));
        } else {
            blocks.push(gates[s].hadamard(&raw[s]));
        }
    }
    let refs: Vec<&Mat> = blocks.iter().collect();
    let stacked = Mat::concat_rows(&refs);
    let pre = params.fuse_w[target].matmul(&stacked).add(&params.fuse_b[target]);
    Ok(pre.map(|x| 1.0 / (1.0 + (-x).exp())))
}
