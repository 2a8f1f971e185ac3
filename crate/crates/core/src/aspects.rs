//! Aspect preference encoding: per-aspect item projections and attention
//! pooling into a `d x M` preference matrix.
//!
//! Both preference channels run this exact encoder; the domain-specific
//! and domain-invariant channels differ only in their parameter values and
//! in which adversarial loss trains them. Projections, biases and pooling
//! queries are indexed by aspect and shared across domains, which keeps
//! the latent aspect space aligned between domains: the domain enters only
//! through the inputs.

use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mat::Mat;
use crate::representation::init_uniform;

/// Per-aspect parameters: `proj[m]` is `d x 2d` applied to the
/// concatenation of an attentional item embedding with the user embedding,
/// `bias[m]` is `d x 1`, `query[m]` is the `d x 1` pooling query.
#[derive(Clone, Debug, PartialEq)]
pub struct AspectEncoderParams {
    pub proj: Vec<Mat>,
    pub bias: Vec<Mat>,
    pub query: Vec<Mat>,
}

impl AspectEncoderParams {
    pub fn init(d: usize, num_aspects: usize, rng: &mut ChaCha20Rng) -> Self {
        let proj = (0..num_aspects)
            .map(|_| init_uniform(d, 2 * d, 2 * d, rng))
            .collect();
        let bias = (0..num_aspects)
            .map(|_| init_uniform(d, 1, 2 * d, rng))
            .collect();
        let query = (0..num_aspects)
            .map(|_| init_uniform(d, 1, d, rng))
            .collect();
        AspectEncoderParams { proj, bias, query }
    }

    pub fn num_aspects(&self) -> usize {
        self.proj.len()
    }

    pub fn embedding_dim(&self) -> usize {
        self.bias[0].rows()
    }
}

#[derive(Clone)]
pub struct AspectEncoderNodes {
    pub proj: Vec<NodeId>,
    pub bias: Vec<NodeId>,
    pub query: Vec<NodeId>,
}

pub fn bind_aspect_encoder(g: &mut Graph, p: &AspectEncoderParams) -> AspectEncoderNodes {
    AspectEncoderNodes {
        proj: p.proj.iter().map(|m| g.leaf(m.clone())).collect(),
        bias: p.bias.iter().map(|m| g.leaf(m.clone())).collect(),
        query: p.query.iter().map(|m| g.leaf(m.clone())).collect(),
    }
}

/// Graph builder for the per-aspect item embeddings: for each aspect `m`,
/// a `d x n` node whose column `i` is `proj[m] (h_i ++ p) + bias[m]` with
/// `++` the concatenation. No activation is applied.
pub fn aspect_item_embeddings_node(
    g: &mut Graph,
    enc: &AspectEncoderNodes,
    h: NodeId,
    p: NodeId,
) -> Vec<NodeId> {
    let n = g.value(h).cols();
    let p_rep = g.repeat_cols(p, n);
    let hp = g.concat_rows(&[h, p_rep]);
    enc.proj
        .iter()
        .zip(&enc.bias)
        .map(|(&w, &b)| {
            let e = g.matmul(w, hp);
            g.add_col_broadcast(e, b)
        })
        .collect()
}

/// Graph builder for attention pooling: per aspect `m`, weights are the
/// softmax over items of `e_{i,m} . query[m]` and the pooled column is the
/// weighted sum. Returns the pooled `d x M` node plus per-aspect weight
/// nodes (`n x 1`).
pub fn aspect_attention_pool_node(
    g: &mut Graph,
    aspect_items: &[NodeId],
    enc: &AspectEncoderNodes,
) -> (NodeId, Vec<NodeId>) {
    let mut pooled = Vec::with_capacity(aspect_items.len());
    let mut weights = Vec::with_capacity(aspect_items.len());
    for (&e, &q) in aspect_items.iter().zip(&enc.query) {
        let et = g.transpose(e);
        let logits = g.matmul(et, q);
        let alpha = g.softmax_cols(logits);
        let col = g.matmul(e, alpha);
        pooled.push(col);
        weights.push(alpha);
    }
    (g.concat_cols(&pooled), weights)
}

/// Convenience builder: embeddings then pooling, the full raw aspect
/// preference matrix for one (user, domain).
pub fn aspect_matrix_node(
    g: &mut Graph,
    enc: &AspectEncoderNodes,
    h: NodeId,
    p: NodeId,
) -> NodeId {
    let items = aspect_item_embeddings_node(g, enc, h, p);
    aspect_attention_pool_node(g, &items, enc).0
}

/// Standalone per-aspect item embeddings (one `d x n` matrix per aspect).
pub fn aspect_item_embeddings(h: &Mat, p: &[f64], params: &AspectEncoderParams) -> Result<Vec<Mat>> {
    let d = params.embedding_dim();
    if h.rows() != d {
        return Err(Error::Shape(format!(
            "H has {} rows, encoder expects {}",
            h.rows(),
            d
        )));
    }
    if p.len() != d {
        return Err(Error::Shape(format!(
            "user embedding has length {}, expected {}",
            p.len(),
            d
        )));
    }
    let mut g = Graph::new();
    let enc = bind_aspect_encoder(&mut g, params);
    let hn = g.leaf(h.clone());
    let pn = g.leaf(Mat::col_vec(p));
    let nodes = aspect_item_embeddings_node(&mut g, &enc, hn, pn);
    Ok(nodes.into_iter().map(|n| g.value(n).clone()).collect())
}

/// Standalone pooling output.
pub struct AspectPool {
    /// `d x M` preference matrix.
    pub pooled: Mat,
    /// Per aspect, the attention weight of every item (sums to 1).
    pub weights: Vec<Vec<f64>>,
    /// True when the interaction list was empty and the matrix is the
    /// all-zero placeholder.
    pub empty: bool,
}

/// Pools per-aspect item embeddings with their queries. An empty item
/// axis yields the zero matrix flagged as empty (consumed by the gated
/// fusion, which zeroes contributions from empty domains).
pub fn aspect_attention_pool(aspect_items: &[Mat], queries: &[Mat]) -> Result<AspectPool> {
    if aspect_items.len() != queries.len() {
        return Err(Error::Shape(format!(
            "{} aspect tensors vs {} queries",
            aspect_items.len(),
            queries.len()
        )));
    }
    if aspect_items.is_empty() {
        return Err(Error::Shape("no aspects".into()));
    }
    let d = queries[0].rows();
    if aspect_items[0].cols() == 0 {
        return Ok(AspectPool {
            pooled: Mat::zeros(d, aspect_items.len()),
            weights: vec![Vec::new(); aspect_items.len()],
            empty: true,
        });
    }
    let mut g = Graph::new();
    let enc = AspectEncoderNodes {
        proj: Vec::new(),
        bias: Vec::new(),
        query: queries.iter().map(|q| g.leaf(q.clone())).collect(),
    };
    let items: Vec<NodeId> = aspect_items.iter().map(|m| g.leaf(m.clone())).collect();
    let (pooled, weights) = aspect_attention_pool_node(&mut g, &items, &enc);
    Ok(AspectPool {
        pooled: g.value(pooled).clone(),
        weights: weights
            .into_iter()
            .map(|w| g.value(w).col(0).to_vec())
            .collect(),
        empty: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_projection_returns_bias_everywhere() {
        let d = 3;
        let params = AspectEncoderParams {
            proj: vec![Mat::zeros(d, 2 * d); 2],
            bias: vec![
                Mat::col_vec(&[0.5, -0.5, 1.0]),
                Mat::col_vec(&[1.0, 2.0, 3.0]),
            ],
            query: vec![Mat::zeros(d, 1); 2],
        };
        let h = Mat::from_rows(&[&[1.0, 2.0], &[0.0, 1.0], &[2.0, 0.0]]);
        let e = aspect_item_embeddings(&h, &[0.1, 0.2, 0.3], &params).unwrap();
        for m in 0..2 {
            for i in 0..2 {
                for r in 0..d {
                    assert_eq!(e[m].get(r, i), params.bias[m].get(r, 0));
                }
            }
        }
    }

    #[test]
    fn concatenation_doubles_projection_input() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let d = 4;
        let params = AspectEncoderParams::init(d, 3, &mut rng);
        assert_eq!(params.proj[0].cols(), 8);
    }

    #[test]
    fn hand_set_projection_matches_reference() {
        // d=2, M=1, W hand-set, h=[1,0], p=[0,1]
        let w = Mat::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]);
        let params = AspectEncoderParams {
            proj: vec![w],
            bias: vec![Mat::col_vec(&[0.5, -1.0])],
            query: vec![Mat::zeros(2, 1)],
        };
        let h = Mat::col_vec(&[1.0, 0.0]);
        let e = aspect_item_embeddings(&h, &[0.0, 1.0], &params).unwrap();
        // (h + p) = [1,0,0,1]; W row0 . x = 1 + 4 = 5; row1 . x = 5 + 8 = 13
        assert_eq!(e[0].get(0, 0), 5.0 + 0.5);
        assert_eq!(e[0].get(1, 0), 13.0 - 1.0);
    }

    #[test]
    fn single_item_pool_weight_is_one() {
        let e = Mat::col_vec(&[1.0, 2.0]);
        let pool = aspect_attention_pool(&[e.clone()], &[Mat::col_vec(&[0.3, -0.3])]).unwrap();
        assert_eq!(pool.weights[0], vec![1.0]);
        assert_eq!(pool.pooled.col(0), e.col(0));
    }

    #[test]
    fn zero_query_pools_to_mean() {
        let e = Mat::from_rows(&[&[1.0, 3.0], &[2.0, 4.0]]);
        let pool = aspect_attention_pool(&[e], &[Mat::zeros(2, 1)]).unwrap();
        assert_eq!(pool.weights[0], vec![0.5, 0.5]);
        assert_eq!(pool.pooled.col(0), &[2.0, 3.0]);
    }

    #[test]
    fn two_item_softmax_matches_hand_computation() {
        // logits l1 = e1.q, l2 = e2.q with q = [1, 0]
        let e = Mat::from_rows(&[&[0.2, 1.2], &[9.0, -9.0]]);
        let q = Mat::col_vec(&[1.0, 0.0]);
        let pool = aspect_attention_pool(&[e.clone()], &[q]).unwrap();
        let (l1, l2) = (0.2, 1.2);
        let z = (l1 - l2 as f64).exp() + 1.0;
        let a1 = (l1 - l2 as f64).exp() / z;
        let a2 = 1.0 / z;
        assert!((pool.weights[0][0] - a1).abs() < 1e-12);
        assert!((pool.weights[0][1] - a2).abs() < 1e-12);
        for r in 0..2 {
            let want = a1 * e.get(r, 0) + a2 * e.get(r, 1);
            assert!((pool.pooled.get(r, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_domain_pools_to_flagged_zero_matrix() {
        let pool = aspect_attention_pool(
            &[Mat::zeros(3, 0), Mat::zeros(3, 0)],
            &[Mat::zeros(3, 1), Mat::zeros(3, 1)],
        )
        .unwrap();
        assert!(pool.empty);
        assert_eq!((pool.pooled.rows(), pool.pooled.cols()), (3, 2));
        assert_eq!(pool.pooled.norm_sq(), 0.0);
    }

    #[test]
    fn pooling_is_permutation_invariant() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let d = 3;
        let n = 5;
        let params = AspectEncoderParams::init(d, 2, &mut rng);
        let h = init_uniform(d, n, d, &mut rng);
        let p: Vec<f64> = (0..d).map(|i| 0.2 * i as f64).collect();
        let items = aspect_item_embeddings(&h, &p, &params).unwrap();
        let pool = aspect_attention_pool(&items, &params.query).unwrap();

        let perm = [4usize, 2, 0, 3, 1];
        let mut hp = Mat::zeros(d, n);
        for (new, &old) in perm.iter().enumerate() {
            hp.col_mut(new).copy_from_slice(h.col(old));
        }
        let items_p = aspect_item_embeddings(&hp, &p, &params).unwrap();
        let pool_p = aspect_attention_pool(&items_p, &params.query).unwrap();
        for m in 0..2 {
            for r in 0..d {
                assert!((pool.pooled.get(r, m) - pool_p.pooled.get(r, m)).abs() < 1e-10);
            }
            let sum: f64 = pool_p.weights[m].iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }
}
