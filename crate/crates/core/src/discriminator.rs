//! Domain discriminators: single-hidden-layer MLPs classifying which
//! domain an aspect preference matrix came from.
//!
//! The same shape serves both adversarial networks; they differ only in
//! parameter values and in the sign of their update (the separation
//! discriminator ascends its loss, the adaptation discriminator descends
//! it).

use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mat::Mat;
use crate::representation::init_uniform;

pub const LOG_FLOOR: f64 = 1e-12;

/// MLP over the flattened `M*d` aspect matrix, softmax over `S` domains.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainDiscriminator {
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
}

impl DomainDiscriminator {
    pub fn init(input_dim: usize, hidden: usize, num_domains: usize, rng: &mut ChaCha20Rng) -> Self {
        DomainDiscriminator {
            w1: init_uniform(hidden, input_dim, input_dim, rng),
            b1: init_uniform(hidden, 1, input_dim, rng),
            w2: init_uniform(num_domains, hidden, hidden, rng),
            b2: init_uniform(num_domains, 1, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn num_domains(&self) -> usize {
        self.w2.rows()
    }
}

/// Bound graph nodes for one discriminator.
#[derive(Clone, Copy)]
pub struct DiscriminatorNodes {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

pub fn bind_discriminator(g: &mut Graph, d: &DomainDiscriminator) -> DiscriminatorNodes {
    DiscriminatorNodes {
        w1: g.leaf(d.w1.clone()),
        b1: g.leaf(d.b1.clone()),
        w2: g.leaf(d.w2.clone()),
        b2: g.leaf(d.b2.clone()),
    }
}

/// Softmax probabilities for a batch of flattened inputs (`Md x B`).
pub fn discriminator_probs_node(g: &mut Graph, nodes: DiscriminatorNodes, input: NodeId) -> NodeId {
    let pre1 = g.matmul(nodes.w1, input);
    let pre1 = g.add_col_broadcast(pre1, nodes.b1);
    let h1 = g.relu(pre1);
    let pre2 = g.matmul(nodes.w2, h1);
    let logits = g.add_col_broadcast(pre2, nodes.b2);
    g.softmax_cols(logits)
}

/// Summed cross-entropy of a batch of probability columns against their
/// true domain labels, with the log argument clamped at [`LOG_FLOOR`].
pub fn cross_entropy_node(g: &mut Graph, probs: NodeId, labels: &[usize]) -> NodeId {
    let (s, b) = {
        let v = g.value(probs);
        (v.rows(), v.cols())
    };
    assert_eq!(b, labels.len(), "one label per probability column");
    let mut onehot = Mat::zeros(s, b);
    for (j, &label) in labels.iter().enumerate() {
        onehot.set(label, j, 1.0);
    }
    let oh = g.leaf(onehot);
    let logp = g.log_clamped(probs, LOG_FLOOR);
    let picked = g.hadamard(oh, logp);
    let total = g.sum_all(picked);
    g.scale(total, -1.0)
}

/// Forward probabilities for one flattened input; used by tests and dumps.
pub fn discriminator_probs(d: &DomainDiscriminator, input: &Mat) -> Result<Vec<f64>> {
    if input.rows() != d.input_dim() || input.cols() != 1 {
        return Err(Error::Shape(format!(
            "discriminator input is {}x{}, expected {}x1",
            input.rows(),
            input.cols(),
            d.input_dim()
        )));
    }
    let mut g = Graph::new();
    let nodes = bind_discriminator(&mut g, d);
    let x = g.leaf(input.clone());
    let probs = discriminator_probs_node(&mut g, nodes, x);
    Ok(g.value(probs).col(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn output_is_probability_vector() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let d = DomainDiscriminator::init(6, 8, 3, &mut rng);
        let x = init_uniform(6, 1, 6, &mut rng);
        let p = discriminator_probs(&d, &x).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cross_entropy_of_certain_prediction_is_zero() {
        let mut g = Graph::new();
        let probs = g.leaf(Mat::from_rows(&[&[1.0], &[0.0]]));
        let ce = cross_entropy_node(&mut g, probs, &[0]);
        assert!(g.scalar(ce).abs() < 1e-12);
        // the zero column hits the clamp, never NaN
        let probs2 = g.leaf(Mat::from_rows(&[&[0.0], &[1.0]]));
        let ce2 = cross_entropy_node(&mut g, probs2, &[0]);
        assert!(g.scalar(ce2).is_finite());
    }
}
