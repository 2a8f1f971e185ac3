//! Adversarial losses over the two preference channels.
//!
//! Both losses are the same summed cross-entropy of a domain classifier
//! over flattened aspect preference matrices; they differ in the update
//! directions the training step applies:
//!
//! - **separation** (domain-specific channel): the discriminator *ascends*
//!   its loss (it is trained to be weak) while the encoder descends it,
//!   keeping the domain-specific matrices separable even for a poor
//!   classifier;
//! - **adaptation** (domain-invariant channel): the discriminator
//!   *descends* its loss (a strong classifier) while the encoder ascends
//!   it, pushing the invariant matrices towards indistinguishability.

use crate::discriminator::{
    bind_discriminator, cross_entropy_node, discriminator_probs_node, DomainDiscriminator,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mat::Mat;

/// Loss value plus the gradients a caller needs to drive either side of
/// the minimax game: the discriminator's own parameters and the flattened
/// encoder inputs.
pub struct DiscriminatorLoss {
    pub value: f64,
    pub grad_w1: Mat,
    pub grad_b1: Mat,
    pub grad_w2: Mat,
    pub grad_b2: Mat,
    /// One `d x M` gradient per input sample, aligned with the argument
    /// order.
    pub input_grads: Vec<Mat>,
}

fn discriminator_loss(
    samples: &[(Mat, usize)],
    disc: &DomainDiscriminator,
) -> Result<DiscriminatorLoss> {
    if samples.is_empty() {
        return Err(Error::Shape("discriminator loss needs at least one sample".into()));
    }
    let s = disc.num_domains();
    for (a, label) in samples {
        if a.rows() * a.cols() != disc.input_dim() {
            return Err(Error::Shape(format!(
                "aspect matrix {}x{} does not flatten to discriminator input {}",
                a.rows(),
                a.cols(),
                disc.input_dim()
            )));
        }
        if *label >= s {
            return Err(Error::Shape(format!(
                "domain label {label} out of range for {s} domains"
            )));
        }
    }
    let mut g = Graph::new();
    let nodes = bind_discriminator(&mut g, disc);
    let inputs: Vec<_> = samples.iter().map(|(a, _)| g.leaf(a.clone())).collect();
    let flats: Vec<_> = inputs.iter().map(|&n| g.reshape_col(n)).collect();
    let batch = g.concat_cols(&flats);
    let probs = discriminator_probs_node(&mut g, nodes, batch);
    let labels: Vec<usize> = samples.iter().map(|(_, l)| *l).collect();
    let loss = cross_entropy_node(&mut g, probs, &labels);
    let grads = g.backward(loss);
    Ok(DiscriminatorLoss {
        value: g.scalar(loss),
        grad_w1: grads.get_or_zeros(nodes.w1, disc.w1.rows(), disc.w1.cols()),
        grad_b1: grads.get_or_zeros(nodes.b1, disc.b1.rows(), disc.b1.cols()),
        grad_w2: grads.get_or_zeros(nodes.w2, disc.w2.rows(), disc.w2.cols()),
        grad_b2: grads.get_or_zeros(nodes.b2, disc.b2.rows(), disc.b2.cols()),
        input_grads: samples
            .iter()
            .zip(&inputs)
            .map(|((a, _), &n)| grads.get_or_zeros(n, a.rows(), a.cols()))
            .collect(),
    })
}

/// Domain label prediction loss of the separation network over raw
/// domain-specific aspect matrices. In training, the discriminator ascends
/// this value and the encoder descends it.
pub fn separation_loss(
    samples: &[(Mat, usize)],
    disc: &DomainDiscriminator,
) -> Result<DiscriminatorLoss> {
    discriminator_loss(samples, disc)
}

/// Domain label prediction loss of the adaptation network over
/// domain-invariant aspect matrices. In training, the discriminator
/// descends this value and the encoder ascends it.
pub fn adaptation_loss(
    samples: &[(Mat, usize)],
    disc: &DomainDiscriminator,
) -> Result<DiscriminatorLoss> {
    discriminator_loss(samples, disc)
}
