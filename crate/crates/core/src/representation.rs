//! Item and user embedding plus per-domain self-attention.
//!
//! Raw item feature vectors are mapped into the shared `d`-dimensional
//! latent space by a per-domain linear map (no bias, no nonlinearity), and
//! a user's interacted items are related to each other through single-head
//! scaled dot-product self-attention. Users are embedded by table lookup.
//!
//! Matrices are column-per-item throughout: `Z`, `H` are `d x n` with
//! column `i` belonging to the user's `i`-th interaction.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mat::Mat;

/// Backbone parameters shared by both preference channels: per-domain item
/// maps `d x d_s`, per-domain attention projections `d x d`, and the user
/// embedding table `d x N`.
#[derive(Clone, Debug, PartialEq)]
pub struct RepresentationParams {
    pub item_maps: Vec<Mat>,
    pub attn_q: Vec<Mat>,
    pub attn_k: Vec<Mat>,
    pub attn_v: Vec<Mat>,
    pub user_table: Mat,
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
pub(crate) fn init_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha20Rng) -> Mat {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Mat::from_vec(rows, cols, data)
}

impl RepresentationParams {
    /// `feature_dims[s]` = d_s of domain s.
    pub fn init(
        feature_dims: &[usize],
        d: usize,
        num_users: usize,
        rng: &mut ChaCha20Rng,
    ) -> Self {
        let item_maps = feature_dims
            .iter()
            .map(|&ds| init_uniform(d, ds, ds, rng))
            .collect();
        let square = |rng: &mut ChaCha20Rng| init_uniform(d, d, d, rng);
        let attn_q = (0..feature_dims.len()).map(|_| square(rng)).collect();
        let attn_k = (0..feature_dims.len()).map(|_| square(rng)).collect();
        let attn_v = (0..feature_dims.len()).map(|_| square(rng)).collect();
        let user_table = init_uniform(d, num_users, d, rng);
        RepresentationParams {
            item_maps,
            attn_q,
            attn_k,
            attn_v,
            user_table,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.user_table.rows()
    }
}

/// Graph builder: `Z = W x` for every feature column in `features`
/// (`d_s x n`). Returns a `d x n` node.
pub fn embed_items_node(g: &mut Graph, item_map: NodeId, features: NodeId) -> NodeId {
    g.matmul(item_map, features)
}

/// Graph builder for scaled dot-product self-attention over the columns of
/// `z`. Returns `(H, T)` where `T` is the column-stochastic weight matrix:
/// `T[j][i]` is the weight of item `j` in the output for item `i`, and
/// `H = V T`.
pub fn self_attention_node(
    g: &mut Graph,
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
    z: NodeId,
) -> (NodeId, NodeId) {
    let d = g.value(wq).rows();
    let q = g.matmul(wq, z);
    let k = g.matmul(wk, z);
    let v = g.matmul(wv, z);
    let kt = g.transpose(k);
    let scores = g.matmul(kt, q);
    let scaled = g.scale(scores, 1.0 / (d as f64).sqrt());
    let weights = g.softmax_cols(scaled);
    let h = g.matmul(v, weights);
    (h, weights)
}

/// Graph builder: user embedding as a table lookup realized as
/// `W_u * onehot(user)` so gradients flow only into the used column.
pub fn embed_user_node(g: &mut Graph, user_table: NodeId, user: usize, num_users: usize) -> NodeId {
    let mut onehot = Mat::zeros(num_users, 1);
    onehot.set(user, 0, 1.0);
    let oh = g.leaf(onehot);
    g.matmul(user_table, oh)
}

/// Maps raw feature vectors to latent item embeddings: column `i` of the
/// result is `map * features[i]`.
pub fn embed_items(features: &[Vec<f64>], map: &Mat) -> Result<Mat> {
    for (i, f) in features.iter().enumerate() {
        if f.len() != map.cols() {
            return Err(Error::Shape(format!(
                "feature {} has length {}, item map expects {}",
                i,
                f.len(),
                map.cols()
            )));
        }
    }
    if features.is_empty() {
        return Ok(Mat::zeros(map.rows(), 0));
    }
    let mut x = Mat::zeros(map.cols(), features.len());
    for (i, f) in features.iter().enumerate() {
        x.col_mut(i).copy_from_slice(f);
    }
    let mut g = Graph::new();
    let m = g.leaf(map.clone());
    let xn = g.leaf(x);
    let z = embed_items_node(&mut g, m, xn);
    Ok(g.value(z).clone())
}

/// Attentional item embeddings plus the attention weights in
/// row-stochastic orientation (`weights[i][j]` = attention of item `i` on
/// item `j`; every row sums to 1). An empty interaction list yields empty
/// outputs rather than an error.
pub struct AttentionOutput {
    pub h: Mat,
    pub weights: Mat,
}

pub fn self_attention(z: &Mat, wq: &Mat, wk: &Mat, wv: &Mat) -> Result<AttentionOutput> {
    let d = wq.rows();
    for (name, w) in [("W_q", wq), ("W_k", wk), ("W_v", wv)] {
        if w.rows() != d || w.cols() != z.rows() {
            return Err(Error::Shape(format!(
                "{name} is {}x{}, expected {}x{}",
                w.rows(),
                w.cols(),
                d,
                z.rows()
            )));
        }
    }
    if z.cols() == 0 {
        return Ok(AttentionOutput {
            h: Mat::zeros(d, 0),
            weights: Mat::zeros(0, 0),
        });
    }
    let mut g = Graph::new();
    let (wq, wk, wv, z) = (
        g.leaf(wq.clone()),
        g.leaf(wk.clone()),
        g.leaf(wv.clone()),
        g.leaf(z.clone()),
    );
    let (h, t) = self_attention_node(&mut g, wq, wk, wv, z);
    Ok(AttentionOutput {
        h: g.value(h).clone(),
        weights: g.value(t).transpose(),
    })
}

/// Column `user` of the embedding table.
pub fn embed_user(user: usize, table: &Mat) -> Result<Vec<f64>> {
    if user >= table.cols() {
        return Err(Error::Shape(format!(
            "user index {} out of range, table has {} users",
            user,
            table.cols()
        )));
    }
    Ok(table.col(user).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn identity_map_preserves_one_hot() {
        let map = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let z = embed_items(&[vec![0.0, 1.0]], &map).unwrap();
        assert_eq!(z.col(0), &[0.0, 1.0]);
        let zero = embed_items(&[vec![0.0, 0.0]], &map).unwrap();
        assert_eq!(zero.col(0), &[0.0, 0.0]);
    }

    #[test]
    fn hand_computed_matrix_vector_product() {
        let map = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let z = embed_items(&[vec![1.0, 1.0]], &map).unwrap();
        assert_eq!(z.col(0), &[3.0, 7.0]);
    }

    #[test]
    fn embed_items_is_linear() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let map = init_uniform(4, 6, 6, &mut rng);
        let x: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 1.0).collect();
        let y: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let (a, b) = (2.5, -1.25);
        let combo: Vec<f64> = x.iter().zip(&y).map(|(&xi, &yi)| a * xi + b * yi).collect();
        let zc = embed_items(&[combo], &map).unwrap();
        let zx = embed_items(&[x], &map).unwrap();
        let zy = embed_items(&[y], &map).unwrap();
        for i in 0..4 {
            let expect = a * zx.get(i, 0) + b * zy.get(i, 0);
            assert!((zc.get(i, 0) - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn wrong_feature_width_is_shape_error() {
        let map = Mat::zeros(3, 5);
        assert!(matches!(
            embed_items(&[vec![1.0; 4]], &map),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn single_item_attention_weight_is_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let d = 3;
        let wq = init_uniform(d, d, d, &mut rng);
        let wk = init_uniform(d, d, d, &mut rng);
        let wv = init_uniform(d, d, d, &mut rng);
        let z = init_uniform(d, 1, d, &mut rng);
        let out = self_attention(&z, &wq, &wk, &wv).unwrap();
        assert!((out.weights.get(0, 0) - 1.0).abs() < 1e-12);
        let expected = wv.matmul(&z);
        for i in 0..d {
            assert!((out.h.get(i, 0) - expected.get(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_projections_give_uniform_weights() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let d = 4;
        let n = 5;
        let wq = Mat::zeros(d, d);
        let wk = Mat::zeros(d, d);
        let wv = init_uniform(d, d, d, &mut rng);
        let z = init_uniform(d, 1, d, &mut rng).repeat_cols(n);
        let zr = {
            // distinct columns
            let mut m = Mat::zeros(d, n);
            for j in 0..n {
                for i in 0..d {
                    m.set(i, j, (i + j) as f64 * 0.1 - 0.2);
                }
            }
            m
        };
        let out = self_attention(&zr, &wq, &wk, &wv).unwrap();
        let v = wv.matmul(&zr);
        let mut mean = vec![0.0; d];
        for j in 0..n {
            for i in 0..d {
                mean[i] += v.get(i, j) / n as f64;
            }
        }
        for j in 0..n {
            for i in 0..d {
                assert!((out.weights.get(j, i) - 1.0 / n as f64).abs() < 1e-12);
                assert!((out.h.get(i, j) - mean[i]).abs() < 1e-12);
            }
        }
        drop(z);
    }

    #[test]
    fn attention_matches_reference_computation() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let d = 3;
        let n = 3;
        let wq = init_uniform(d, d, d, &mut rng);
        let wk = init_uniform(d, d, d, &mut rng);
        let wv = init_uniform(d, d, d, &mut rng);
        let z = init_uniform(d, 1, d, &mut rng).repeat_cols(n).zip_map(
            &init_uniform(d, n, d, &mut rng),
            |a, b| a + 2.0 * b,
        );
        let out = self_attention(&z, &wq, &wk, &wv).unwrap();

        // straight-line reference: per item i, alpha_ij = softmax_j(q_i . k_j / sqrt d)
        let q = wq.matmul(&z);
        let k = wk.matmul(&z);
        let v = wv.matmul(&z);
        for i in 0..n {
            let mut logits = vec![0.0; n];
            for j in 0..n {
                logits[j] = q
                    .col(i)
                    .iter()
                    .zip(k.col(j))
                    .map(|(&a, &b)| a * b)
                    .sum::<f64>()
                    / (d as f64).sqrt();
            }
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&l| (l - mx).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let mut h_i = vec![0.0; d];
            for j in 0..n {
                let alpha = exps[j] / sum;
                assert!((out.weights.get(i, j) - alpha).abs() < 1e-12);
                for r in 0..d {
                    h_i[r] += alpha * v.get(r, j);
                }
            }
            for r in 0..d {
                assert!((out.h.get(r, i) - h_i[r]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one_and_permutation_equivariance() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let d = 4;
        let n = 6;
        let wq = init_uniform(d, d, d, &mut rng);
        let wk = init_uniform(d, d, d, &mut rng);
        let wv = init_uniform(d, d, d, &mut rng);
        let z = init_uniform(d, n, d, &mut rng);
        let out = self_attention(&z, &wq, &wk, &wv).unwrap();
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| out.weights.get(i, j)).sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
        // permute columns of Z -> H permutes identically
        let perm = [3usize, 0, 5, 1, 4, 2];
        let mut zp = Mat::zeros(d, n);
        for (new, &old) in perm.iter().enumerate() {
            zp.col_mut(new).copy_from_slice(z.col(old));
        }
        let out_p = self_attention(&zp, &wq, &wk, &wv).unwrap();
        for (new, &old) in perm.iter().enumerate() {
            for r in 0..d {
                assert!((out_p.h.get(r, new) - out.h.get(r, old)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn empty_interaction_list_yields_empty_matrix() {
        let wq = Mat::zeros(3, 3);
        let out = self_attention(&Mat::zeros(3, 0), &wq, &wq, &wq).unwrap();
        assert_eq!(out.h.cols(), 0);
    }

    #[test]
    fn user_lookup() {
        let table = Mat::from_rows(&[&[0.0, 0.0, 0.1], &[0.0, 0.0, -0.2]]);
        assert_eq!(embed_user(2, &table).unwrap(), vec![0.1, -0.2]);
        assert_eq!(embed_user(2, &table).unwrap(), embed_user(2, &table).unwrap());
        assert!(matches!(embed_user(3, &table), Err(Error::Shape(_))));
        let eye = Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(embed_user(1, &eye).unwrap(), vec![0.0, 1.0]);
    }
}
