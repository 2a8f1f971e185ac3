//! Reverse-mode differentiation on a flat tape of matrix operations.
//!
//! A [`Graph`] records every intermediate value as it is built; calling
//! [`Graph::backward`] on a scalar node walks the tape in reverse and
//! accumulates gradients for every node that feeds it. Nodes are appended
//! in topological order by construction, so the reverse walk needs no
//! explicit sort and is fully deterministic.
//!
//! Forward-only callers (evaluation, standalone ops) simply never call
//! `backward`; the tape then acts as a plain expression evaluator, which
//! keeps the numerics of training and evaluation on one code path.

use crate::mat::Mat;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct NodeId(u32);

impl NodeId {
    fn idx(self) -> usize {
        self.0 as usize
    }
}

enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// matrix + column vector, broadcast over columns
    AddColBroadcast(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Hadamard(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Relu(NodeId),
    Softplus(NodeId),
    /// softmax over each column independently
    SoftmaxCols(NodeId),
    /// ln(max(x, floor)); zero gradient where the floor is active
    LogClamped(NodeId, f64),
    Transpose(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    RepeatCols(NodeId),
    ReshapeCol(NodeId),
    SumAll(NodeId),
}

struct Node {
    value: Mat,
    op: Op,
}

pub struct Graph {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { value, op });
        id
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        &self.nodes[id.idx()].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!((v.rows(), v.cols()), (1, 1), "scalar() on non-scalar node");
        v.get(0, 0)
    }

    pub fn leaf(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// `a` is rows x cols, `b` is rows x 1; adds `b` to every column of `a`.
    pub fn add_col_broadcast(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (am, bm) = (self.value(a), self.value(b));
        assert_eq!(bm.cols(), 1, "broadcast operand must be a column");
        assert_eq!(am.rows(), bm.rows(), "broadcast row mismatch");
        let mut v = am.clone();
        for j in 0..v.cols() {
            for (x, &y) in v.col_mut(j).iter_mut().zip(bm.col(0).iter()) {
                *x += y;
            }
        }
        self.push(v, Op::AddColBroadcast(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub(a, b))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).hadamard(self.value(b));
        self.push(v, Op::Hadamard(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn softmax_cols(&mut self, a: NodeId) -> NodeId {
        let m = self.value(a);
        let mut v = m.clone();
        for j in 0..v.cols() {
            let col = v.col_mut(j);
            let mx = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in col.iter_mut() {
                *x = (*x - mx).exp();
                sum += *x;
            }
            for x in col.iter_mut() {
                *x /= sum;
            }
        }
        self.push(v, Op::SoftmaxCols(a))
    }

    pub fn log_clamped(&mut self, a: NodeId, floor: f64) -> NodeId {
        let v = self.value(a).map(|x| x.max(floor).ln());
        self.push(v, Op::LogClamped(a, floor))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let mats: Vec<&Mat> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Mat::concat_rows(&mats);
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let mats: Vec<&Mat> = parts.iter().map(|&p| self.value(p)).collect();
        let v = Mat::concat_cols(&mats);
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn repeat_cols(&mut self, a: NodeId, n: usize) -> NodeId {
        let v = self.value(a).repeat_cols(n);
        self.push(v, Op::RepeatCols(a))
    }

    pub fn reshape_col(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).reshape_col();
        self.push(v, Op::ReshapeCol(a))
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let v = Mat::from_vec(1, 1, vec![self.value(a).sum()]);
        self.push(v, Op::SumAll(a))
    }

    /// Gradients of a scalar `root` with respect to every contributing node.
    pub fn backward(&self, root: NodeId) -> Grads {
        {
            let v = self.value(root);
            assert_eq!((v.rows(), v.cols()), (1, 1), "backward root must be scalar");
        }
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.idx()] = Some(Mat::from_vec(1, 1, vec![1.0]));

        for idx in (0..=root.idx()).rev() {
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Grads { grads }
    }

    fn propagate(&self, idx: usize, g: &Mat, grads: &mut [Option<Mat>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let da = g.matmul(&bv.transpose());
                let db = av.transpose().matmul(g);
                acc(grads, *a, da);
                acc(grads, *b, db);
            }
            Op::Add(a, b) => {
                acc_ref(grads, *a, g, 1.0);
                acc_ref(grads, *b, g, 1.0);
            }
            Op::AddColBroadcast(a, b) => {
                acc_ref(grads, *a, g, 1.0);
                let mut db = Mat::zeros(g.rows(), 1);
                for j in 0..g.cols() {
                    for (d, &x) in db.col_mut(0).iter_mut().zip(g.col(j).iter()) {
                        *d += x;
                    }
                }
                acc(grads, *b, db);
            }
            Op::Sub(a, b) => {
                acc_ref(grads, *a, g, 1.0);
                acc_ref(grads, *b, g, -1.0);
            }
            Op::Hadamard(a, b) => {
                let da = g.hadamard(self.value(*b));
                let db = g.hadamard(self.value(*a));
                acc(grads, *a, da);
                acc(grads, *b, db);
            }
            Op::Scale(a, c) => {
                acc_ref(grads, *a, g, *c);
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let da = g.zip_map(y, |gi, yi| gi * yi * (1.0 - yi));
                acc(grads, *a, da);
            }
            Op::Relu(a) => {
                let x = self.value(*a);
                let da = g.zip_map(x, |gi, xi| if xi > 0.0 { gi } else { 0.0 });
                acc(grads, *a, da);
            }
            Op::Softplus(a) => {
                let x = self.value(*a);
                let da = g.zip_map(x, |gi, xi| gi * sigmoid(xi));
                acc(grads, *a, da);
            }
            Op::SoftmaxCols(a) => {
                let y = &node.value;
                let mut da = Mat::zeros(y.rows(), y.cols());
                for j in 0..y.cols() {
                    let yc = y.col(j);
                    let gc = g.col(j);
                    let inner: f64 = yc.iter().zip(gc.iter()).map(|(&a, &b)| a * b).sum();
                    for ((d, &yi), &gi) in da.col_mut(j).iter_mut().zip(yc).zip(gc) {
                        *d = yi * (gi - inner);
                    }
                }
                acc(grads, *a, da);
            }
            Op::LogClamped(a, floor) => {
                let x = self.value(*a);
                let da = g.zip_map(x, |gi, xi| if xi >= *floor { gi / xi } else { 0.0 });
                acc(grads, *a, da);
            }
            Op::Transpose(a) => {
                acc(grads, *a, g.transpose());
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let pr = self.value(*p).rows();
                    let mut dp = Mat::zeros(pr, g.cols());
                    for j in 0..g.cols() {
                        dp.col_mut(j).copy_from_slice(&g.col(j)[off..off + pr]);
                    }
                    acc(grads, *p, dp);
                    off += pr;
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let pc = self.value(*p).cols();
                    let mut dp = Mat::zeros(g.rows(), pc);
                    for j in 0..pc {
                        dp.col_mut(j).copy_from_slice(g.col(off + j));
                    }
                    acc(grads, *p, dp);
                    off += pc;
                }
            }
            Op::RepeatCols(a) => {
                let mut da = Mat::zeros(g.rows(), 1);
                for j in 0..g.cols() {
                    for (d, &x) in da.col_mut(0).iter_mut().zip(g.col(j).iter()) {
                        *d += x;
                    }
                }
                acc(grads, *a, da);
            }
            Op::ReshapeCol(a) => {
                let src = self.value(*a);
                acc(grads, *a, g.reshape(src.rows(), src.cols()));
            }
            Op::SumAll(a) => {
                let src = self.value(*a);
                let gv = g.get(0, 0);
                acc(grads, *a, Mat::zeros(src.rows(), src.cols()).map(|_| gv));
            }
        }
    }
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

fn acc(grads: &mut [Option<Mat>], id: NodeId, contribution: Mat) {
    match &mut grads[id.idx()] {
        Some(g) => g.add_assign_scaled(&contribution, 1.0),
        slot @ None => *slot = Some(contribution),
    }
}

fn acc_ref(grads: &mut [Option<Mat>], id: NodeId, contribution: &Mat, scale: f64) {
    match &mut grads[id.idx()] {
        Some(g) => g.add_assign_scaled(contribution, scale),
        slot @ None => *slot = Some(contribution.scale(scale)),
    }
}

/// Gradient buffers produced by [`Graph::backward`].
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    /// Gradient of the root with respect to `id`; `None` when the node does
    /// not feed the root.
    pub fn get(&self, id: NodeId) -> Option<&Mat> {
        self.grads[id.idx()].as_ref()
    }

    /// Gradient as an owned matrix, zeros when the node is off-path.
    pub fn get_or_zeros(&self, id: NodeId, rows: usize, cols: usize) -> Mat {
        match self.grads[id.idx()].as_ref() {
            Some(g) => g.clone(),
            None => Mat::zeros(rows, cols),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_mat(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Mat::from_vec(rows, cols, data)
    }

    /// Finite-difference check of d(loss)/d(leaf) for a scalar-producing builder.
    fn check_leaf_grad(
        build: impl Fn(&mut Graph, NodeId) -> NodeId,
        leaf_value: &Mat,
        tol: f64,
    ) {
        let mut g = Graph::new();
        let x = g.leaf(leaf_value.clone());
        let loss = build(&mut g, x);
        let grads = g.backward(loss);
        let analytic = grads.get_or_zeros(x, leaf_value.rows(), leaf_value.cols());

        let step = 1e-6;
        for j in 0..leaf_value.cols() {
            for i in 0..leaf_value.rows() {
                let eval = |delta: f64| {
                    let mut perturbed = leaf_value.clone();
                    perturbed.set(i, j, perturbed.get(i, j) + delta);
                    let mut g2 = Graph::new();
                    let x2 = g2.leaf(perturbed);
                    let l2 = build(&mut g2, x2);
                    g2.scalar(l2)
                };
                let fd = (eval(step) - eval(-step)) / (2.0 * step);
                let an = analytic.get(i, j);
                let denom = an.abs().max(fd.abs()).max(1.0);
                assert!(
                    ((an - fd) / denom).abs() < tol,
                    "grad mismatch at ({i},{j}): analytic {an}, fd {fd}"
                );
            }
        }
    }

    #[test]
    fn matmul_softmax_chain_gradient() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let w = random_mat(&mut rng, 3, 4);
        let x = random_mat(&mut rng, 4, 2);
        let probe = random_mat(&mut rng, 3, 2);
        check_leaf_grad(
            |g, leaf| {
                let xn = g.leaf(x.clone());
                let y = g.matmul(leaf, xn);
                let s = g.softmax_cols(y);
                let p = g.leaf(probe.clone());
                let h = g.hadamard(s, p);
                g.sum_all(h)
            },
            &w,
            1e-5,
        );
    }

    #[test]
    fn nonlinearity_gradients() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = random_mat(&mut rng, 4, 3);
        let probe = random_mat(&mut rng, 4, 3);
        for op in 0..3 {
            check_leaf_grad(
                |g, leaf| {
                    let y = match op {
                        0 => g.sigmoid(leaf),
                        1 => g.softplus(leaf),
                        _ => {
                            // keep away from the relu kink
                            let shifted = g.scale(leaf, 3.0);
                            g.relu(shifted)
                        }
                    };
                    let p = g.leaf(probe.clone());
                    let h = g.hadamard(y, p);
                    g.sum_all(h)
                },
                &x,
                1e-5,
            );
        }
    }

    #[test]
    fn structural_op_gradients() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let x = random_mat(&mut rng, 3, 2);
        let other = random_mat(&mut rng, 2, 2);
        let probe = random_mat(&mut rng, 8, 2);
        check_leaf_grad(
            |g, leaf| {
                let o = g.leaf(other.clone());
                let t = g.transpose(leaf); // 2x3
                let tt = g.transpose(t); // back to 3x2
                let cat = g.concat_rows(&[tt, o, tt]); // 8x2, leaf used twice
                let p = g.leaf(probe.clone());
                let h = g.hadamard(cat, p);
                g.sum_all(h)
            },
            &x,
            1e-5,
        );
    }

    #[test]
    fn broadcast_and_reshape_gradients() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let b = random_mat(&mut rng, 3, 1);
        let a = random_mat(&mut rng, 3, 4);
        let probe = random_mat(&mut rng, 12, 1);
        check_leaf_grad(
            |g, leaf| {
                let an = g.leaf(a.clone());
                let y = g.add_col_broadcast(an, leaf);
                let r = g.reshape_col(y);
                let p = g.leaf(probe.clone());
                let h = g.hadamard(r, p);
                g.sum_all(h)
            },
            &b,
            1e-5,
        );
        let v = random_mat(&mut rng, 3, 1);
        let probe2 = random_mat(&mut rng, 3, 5);
        check_leaf_grad(
            |g, leaf| {
                let r = g.repeat_cols(leaf, 5);
                let p = g.leaf(probe2.clone());
                let h = g.hadamard(r, p);
                g.sum_all(h)
            },
            &v,
            1e-5,
        );
    }

    #[test]
    fn log_clamp_zeroes_gradient_below_floor() {
        let x = Mat::col_vec(&[0.5, 1e-15]);
        let mut g = Graph::new();
        let leaf = g.leaf(x);
        let y = g.log_clamped(leaf, 1e-12);
        let s = g.sum_all(y);
        let grads = g.backward(s);
        let dx = grads.get(leaf).unwrap();
        assert!((dx.get(0, 0) - 2.0).abs() < 1e-12);
        assert_eq!(dx.get(1, 0), 0.0);
        assert!(g.scalar(s).is_finite());
    }
}
