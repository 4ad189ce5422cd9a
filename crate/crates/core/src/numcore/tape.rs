//! Reverse-mode differentiation over a fixed operation vocabulary.
//!
//! A [`Tape`] records every intermediate value together with the operation
//! that produced it. [`Tape::backward`] walks the records in reverse and
//! accumulates gradients. Scalar losses whose derivatives are derived by
//! hand enter the tape through [`Tape::fused_scalar`].

use std::rc::Rc;

use super::tensor::{exact_sum, gemm_nn, gemm_nt, gemm_tn, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

/// Sorted, symmetric neighbor lists of an undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    neighbors: Vec<Vec<usize>>,
}

impl Adjacency {
    /// Builds adjacency from neighbor lists, validating symmetry,
    /// strict ascending order and the absence of self-loops.
    pub fn new(neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for (v, list) in neighbors.iter().enumerate() {
            for w in list.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Validation(format!(
                        "neighbor list of node {v} is not strictly ascending"
                    )));
                }
            }
            for &u in list {
                if u >= n {
                    return Err(Error::Validation(format!("node {v} has out-of-range neighbor {u}")));
                }
                if u == v {
                    return Err(Error::Validation(format!("self-loop on node {v}")));
                }
                if neighbors[u].binary_search(&v).is_err() {
                    return Err(Error::Validation(format!("edge {v}-{u} is not symmetric")));
                }
            }
        }
        Ok(Self { neighbors })
    }

    pub fn n_nodes(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Relu(Var),
    Gelu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    BatchNorm { x: Var, inv_std: Vec<f64> },
    L2Rows { x: Var, norms: Vec<f64> },
    GatherRows { x: Var, idx: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Unfold { x: Var, width: usize },
    NeighborSum { x: Var, adj: Rc<Adjacency>, self_weight: f64 },
    WeightedRowSum { x: Var, weights: Vec<f64> },
    Sum(Var),
    Fused { inputs: Vec<Var>, grads: Vec<Tensor> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Records values and the operations producing them.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every recorded value.
pub struct Grads {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, zeros when nothing flowed into it.
    pub fn wrt(&self, v: Var) -> Tensor {
        self.grads[v.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(&self.shapes[v.0]))
    }
}

const LN_EPS: f64 = 1e-5;
const L2_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, name: &str) -> Result<Var> {
        value.check_finite(name)?;
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    fn mat(&self, v: Var, what: &str) -> Result<(usize, usize)> {
        self.value(v)
            .dims2()
            .map_err(|_| Error::Shape(format!("{what}: expected matrix, got {:?}", self.value(v).shape())))
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "leaf")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul_nt(self.value(b))?;
        self.push(out, Op::MatMulNt(a, b), "matmul_nt")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape(format!("add {:?} + {:?}", x.shape(), y.shape())));
        }
        let out = x.zip_map(y, |p, q| p + q);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(Error::Shape(format!("mul {:?} * {:?}", x.shape(), y.shape())));
        }
        let out = x.zip_map(y, |p, q| p * q);
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let out = self.value(a).map(|x| x * c);
        self.push(out, Op::Scale(a, c), "scale")
    }

    /// Adds a row vector `b` (length d) to every row of `x` (n×d).
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var> {
        let (n, d) = self.mat(x, "add_row")?;
        let bias = self.value(b);
        if bias.len() != d {
            return Err(Error::Shape(format!("add_row: bias len {} vs width {d}", bias.len())));
        }
        let mut out = self.value(x).clone();
        let bd = bias.data().to_vec();
        for i in 0..n {
            for (o, bv) in out.data_mut()[i * d..(i + 1) * d].iter_mut().zip(&bd) {
                *o += bv;
            }
        }
        self.push(out, Op::AddRow(x, b), "add_row")
    }

    /// Multiplies every row of `x` (n×d) elementwise by `g` (length d).
    pub fn mul_row(&mut self, x: Var, g: Var) -> Result<Var> {
        let (n, d) = self.mat(x, "mul_row")?;
        let gain = self.value(g);
        if gain.len() != d {
            return Err(Error::Shape(format!("mul_row: gain len {} vs width {d}", gain.len())));
        }
        let gd = gain.data().to_vec();
        let mut out = self.value(x).clone();
        for i in 0..n {
            for (o, gv) in out.data_mut()[i * d..(i + 1) * d].iter_mut().zip(&gd) {
                *o *= gv;
            }
        }
        self.push(out, Op::MulRow(x, g), "mul_row")
    }

    /// Affine map `x · w + b` with `w` of shape in×out and `b` of length out.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), "relu")
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(gelu);
        self.push(out, Op::Gelu(x), "gelu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x), "sigmoid")
    }

    /// Row-wise softmax; columns where `key_mask` is false get probability 0.
    pub fn softmax_rows(&mut self, x: Var, key_mask: Option<&[bool]>) -> Result<Var> {
        let (n, d) = self.mat(x, "softmax_rows")?;
        if let Some(m) = key_mask {
            if m.len() != d {
                return Err(Error::Shape("softmax_rows: mask width".into()));
            }
            if !m.iter().any(|&b| b) {
                return Err(Error::Param("softmax_rows: every key is masked".into()));
            }
        }
        let keep = |j: usize| key_mask.is_none_or(|m| m[j]);
        let xv = self.value(x);
        let mut out = vec![0.0; n * d];
        for i in 0..n {
            let row = xv.row(i);
            let mx = (0..d).filter(|&j| keep(j)).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            let mut s = 0.0;
            for j in 0..d {
                if keep(j) {
                    let e = (row[j] - mx).exp();
                    out[i * d + j] = e;
                    s += e;
                }
            }
            for v in &mut out[i * d..(i + 1) * d] {
                *v /= s;
            }
        }
        let out = Tensor::matrix(n, d, out)?;
        self.push(out, Op::SoftmaxRows(x), "softmax_rows")
    }

    /// Per-row standardization (layer norm without affine parameters).
    pub fn layer_norm(&mut self, x: Var) -> Result<Var> {
        let (n, d) = self.mat(x, "layer_norm")?;
        let xv = self.value(x);
        let mut out = vec![0.0; n * d];
        let mut inv_std = Vec::with_capacity(n);
        for i in 0..n {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LN_EPS).sqrt();
            for j in 0..d {
                out[i * d + j] = (row[j] - mean) * is;
            }
            inv_std.push(is);
        }
        let out = Tensor::matrix(n, d, out)?;
        self.push(out, Op::LayerNorm { x, inv_std }, "layer_norm")
    }

    /// Per-column standardization with batch statistics.
    ///
    /// Column sums are correctly rounded, so the result is exactly
    /// equivariant under row permutations. Returns the normalized values
    /// together with the batch mean and (biased) variance.
    pub fn batch_norm(&mut self, x: Var, eps: f64) -> Result<(Var, Vec<f64>, Vec<f64>)> {
        let (n, d) = self.mat(x, "batch_norm")?;
        let xv = self.value(x);
        let mut means = Vec::with_capacity(d);
        let mut vars = Vec::with_capacity(d);
        let mut inv_std = Vec::with_capacity(d);
        let mut out = vec![0.0; n * d];
        for j in 0..d {
            let mean = exact_sum((0..n).map(|i| xv.get2(i, j))) / n as f64;
            let var = exact_sum((0..n).map(|i| {
                let c = xv.get2(i, j) - mean;
                c * c
            })) / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            for i in 0..n {
                out[i * d + j] = (xv.get2(i, j) - mean) * is;
            }
            means.push(mean);
            vars.push(var);
            inv_std.push(is);
        }
        let out = Tensor::matrix(n, d, out)?;
        let v = self.push(out, Op::BatchNorm { x, inv_std }, "batch_norm")?;
        Ok((v, means, vars))
    }

    /// Scales every row to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        let (n, d) = self.mat(x, "l2_normalize_rows")?;
        let xv = self.value(x);
        let mut out = vec![0.0; n * d];
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let row = xv.row(i);
            let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(L2_EPS);
            for j in 0..d {
                out[i * d + j] = row[j] / nrm;
            }
            norms.push(nrm);
        }
        let out = Tensor::matrix(n, d, out)?;
        self.push(out, Op::L2Rows { x, norms }, "l2_normalize_rows")
    }

    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let (n, d) = self.mat(x, "gather_rows")?;
        if idx.is_empty() {
            return Err(Error::Shape("gather_rows: empty index list".into()));
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            if i >= n {
                return Err(Error::Shape(format!("gather_rows: index {i} >= {n}")));
            }
            out.extend_from_slice(xv.row(i));
        }
        let out = Tensor::matrix(idx.len(), d, out)?;
        self.push(out, Op::GatherRows { x, idx: idx.to_vec() }, "gather_rows")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (n, d) = self.mat(x, "slice_cols")?;
        if len == 0 || start + len > d {
            return Err(Error::Shape(format!("slice_cols {start}+{len} of {d}")));
        }
        let xv = self.value(x);
        let mut out = Vec::with_capacity(n * len);
        for i in 0..n {
            out.extend_from_slice(&xv.row(i)[start..start + len]);
        }
        let out = Tensor::matrix(n, len, out)?;
        self.push(out, Op::SliceCols { x, start }, "slice_cols")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let n = self.mat(parts[0], "concat_cols")?.0;
        let mut total = 0;
        for &p in parts {
            let (r, c) = self.mat(p, "concat_cols")?;
            if r != n {
                return Err(Error::Shape("concat_cols: row mismatch".into()));
            }
            total += c;
        }
        let mut out = Vec::with_capacity(n * total);
        for i in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(i));
            }
        }
        let out = Tensor::matrix(n, total, out)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let d = self.mat(parts[0], "concat_rows")?.1;
        let mut n = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.mat(p, "concat_rows")?;
            if c != d {
                return Err(Error::Shape("concat_rows: width mismatch".into()));
            }
            n += r;
            out.extend_from_slice(self.value(p).data());
        }
        let out = Tensor::matrix(n, d, out)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    /// Zero-padded sliding windows: row `i` of the L×(width·d) output holds
    /// rows `i - width/2 ..= i + width/2` of the L×d input, side by side.
    /// Multiplying by a (width·d)×out matrix gives a "same" 1D convolution.
    pub fn unfold(&mut self, x: Var, width: usize) -> Result<Var> {
        let (n, d) = self.mat(x, "unfold")?;
        if width.is_multiple_of(2) {
            return Err(Error::Param(format!("unfold: window width {width} must be odd")));
        }
        let half = width / 2;
        let xv = self.value(x);
        let mut out = vec![0.0; n * width * d];
        for i in 0..n {
            for t in 0..width {
                let src = i as isize + t as isize - half as isize;
                if src < 0 || src >= n as isize {
                    continue;
                }
                let dst = i * width * d + t * d;
                out[dst..dst + d].copy_from_slice(xv.row(src as usize));
            }
        }
        let out = Tensor::matrix(n, width * d, out)?;
        self.push(out, Op::Unfold { x, width }, "unfold")
    }

    /// GIN aggregation: `self_weight · x_v + Σ_{u ∈ N(v)} x_u` for every node.
    pub fn neighbor_sum(&mut self, x: Var, adj: &Rc<Adjacency>, self_weight: f64) -> Result<Var> {
        let (n, d) = self.mat(x, "neighbor_sum")?;
        if adj.n_nodes() != n {
            return Err(Error::Shape(format!(
                "neighbor_sum: {} nodes vs {n} feature rows",
                adj.n_nodes()
            )));
        }
        let out = aggregate(self.value(x), adj, self_weight);
        self.push(
            out,
            Op::NeighborSum {
                x,
                adj: Rc::clone(adj),
                self_weight,
            },
            "neighbor_sum",
        )
        .inspect(|&v| {
            debug_assert_eq!(self.value(v).shape(), &[n, d]);
        })
    }

    /// `Σ_i weights[i] · x_i` as a 1×d row.
    pub fn weighted_row_sum(&mut self, x: Var, weights: &[f64]) -> Result<Var> {
        let (n, d) = self.mat(x, "weighted_row_sum")?;
        if weights.len() != n {
            return Err(Error::Shape("weighted_row_sum: weight count".into()));
        }
        let xv = self.value(x);
        let mut out = vec![0.0; d];
        for (i, &w) in weights.iter().enumerate() {
            for (o, v) in out.iter_mut().zip(xv.row(i)) {
                *o += w * v;
            }
        }
        let out = Tensor::matrix(1, d, out)?;
        self.push(
            out,
            Op::WeightedRowSum {
                x,
                weights: weights.to_vec(),
            },
            "weighted_row_sum",
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.push(Tensor::scalar(s), Op::Sum(x), "sum")
    }

    /// Records a scalar computed outside the tape, given its gradient with
    /// respect to each input.
    pub fn fused_scalar(&mut self, inputs: &[Var], value: f64, grads: Vec<Tensor>) -> Result<Var> {
        if inputs.len() != grads.len() {
            return Err(Error::Shape("fused_scalar: one gradient per input".into()));
        }
        for (&v, g) in inputs.iter().zip(&grads) {
            if self.value(v).shape() != g.shape() {
                return Err(Error::Shape("fused_scalar: gradient shape".into()));
            }
        }
        self.push(
            Tensor::scalar(value),
            Op::Fused {
                inputs: inputs.to_vec(),
                grads,
            },
            "fused scalar",
        )
    }

    /// Gradients of the one-element node `out` with respect to every node.
    pub fn backward(&self, out: Var) -> Result<Grads> {
        if self.value(out).len() != 1 {
            return Err(Error::Shape("backward needs a scalar output".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Tensor::full(self.value(out).shape(), 1.0));
        for idx in (0..=out.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Grads {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(e) => e.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = (av.rows(), av.cols());
                let n = bv.cols();
                acc(*a, Tensor::matrix(m, k, gemm_nt(g.data(), bv.data(), m, n, k))?);
                acc(*b, Tensor::matrix(k, n, gemm_tn(av.data(), g.data(), m, k, n))?);
            }
            Op::MatMulNt(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = (av.rows(), av.cols());
                let n = bv.rows();
                acc(*a, Tensor::matrix(m, k, gemm_nn(g.data(), bv.data(), m, n, k))?);
                acc(*b, Tensor::matrix(n, k, gemm_tn(g.data(), av.data(), m, n, k))?);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.value(*b), |p, q| p * q));
                acc(*b, g.zip_map(self.value(*a), |p, q| p * q));
            }
            Op::Scale(a, c) => acc(*a, g.map(|v| v * c)),
            Op::AddRow(x, b) => {
                let (n, d) = (g.rows(), g.cols());
                let mut db = vec![0.0; d];
                for i in 0..n {
                    for (s, v) in db.iter_mut().zip(g.row(i)) {
                        *s += v;
                    }
                }
                acc(*x, g.clone());
                acc(*b, Tensor::new(self.value(*b).shape().to_vec(), db)?);
            }
            Op::MulRow(x, gain) => {
                let (n, d) = (g.rows(), g.cols());
                let xv = self.value(*x);
                let gv = self.value(*gain).data();
                let mut dx = g.clone();
                let mut dg = vec![0.0; d];
                for i in 0..n {
                    for j in 0..d {
                        dx.data_mut()[i * d + j] *= gv[j];
                        dg[j] += g.get2(i, j) * xv.get2(i, j);
                    }
                }
                acc(*x, dx);
                acc(*gain, Tensor::new(self.value(*gain).shape().to_vec(), dg)?);
            }
            Op::Relu(x) => acc(*x, g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { 0.0 })),
            Op::Gelu(x) => acc(*x, g.zip_map(self.value(*x), |gv, xv| gv * gelu_grad(xv))),
            Op::Sigmoid(x) => acc(*x, g.zip_map(y, |gv, s| gv * s * (1.0 - s))),
            Op::SoftmaxRows(x) => {
                let (n, d) = (y.rows(), y.cols());
                let mut dx = vec![0.0; n * d];
                for i in 0..n {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        dx[i * d + j] = yr[j] * (gr[j] - dot);
                    }
                }
                acc(*x, Tensor::matrix(n, d, dx)?);
            }
            Op::LayerNorm { x, inv_std } => {
                let (n, d) = (y.rows(), y.cols());
                let mut dx = vec![0.0; n * d];
                for i in 0..n {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let mg = gr.iter().sum::<f64>() / d as f64;
                    let mgy = yr.iter().zip(gr).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for j in 0..d {
                        dx[i * d + j] = inv_std[i] * (gr[j] - mg - yr[j] * mgy);
                    }
                }
                acc(*x, Tensor::matrix(n, d, dx)?);
            }
            Op::BatchNorm { x, inv_std } => {
                let (n, d) = (y.rows(), y.cols());
                let mut dx = vec![0.0; n * d];
                for j in 0..d {
                    let mg = exact_sum((0..n).map(|i| g.get2(i, j))) / n as f64;
                    let mgy = exact_sum((0..n).map(|i| g.get2(i, j) * y.get2(i, j))) / n as f64;
                    for i in 0..n {
                        dx[i * d + j] = inv_std[j] * (g.get2(i, j) - mg - y.get2(i, j) * mgy);
                    }
                }
                acc(*x, Tensor::matrix(n, d, dx)?);
            }
            Op::L2Rows { x, norms } => {
                let (n, d) = (y.rows(), y.cols());
                let mut dx = vec![0.0; n * d];
                for i in 0..n {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        dx[i * d + j] = (gr[j] - yr[j] * dot) / norms[i];
                    }
                }
                acc(*x, Tensor::matrix(n, d, dx)?);
            }
            Op::GatherRows { x, idx } => {
                let xv = self.value(*x);
                let d = xv.cols();
                let mut dx = Tensor::zeros(xv.shape());
                for (r, &i) in idx.iter().enumerate() {
                    for (o, v) in dx.data_mut()[i * d..(i + 1) * d].iter_mut().zip(g.row(r)) {
                        *o += v;
                    }
                }
                acc(*x, dx);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let (n, d) = (xv.rows(), xv.cols());
                let len = g.cols();
                let mut dx = Tensor::zeros(&[n, d]);
                for i in 0..n {
                    dx.data_mut()[i * d + start..i * d + start + len].copy_from_slice(g.row(i));
                }
                acc(*x, dx);
            }
            Op::ConcatCols(parts) => {
                let n = g.rows();
                let mut off = 0;
                for &p in parts {
                    let c = self.value(p).cols();
                    let mut dp = Vec::with_capacity(n * c);
                    for i in 0..n {
                        dp.extend_from_slice(&g.row(i)[off..off + c]);
                    }
                    acc(p, Tensor::matrix(n, c, dp)?);
                    off += c;
                }
            }
            Op::ConcatRows(parts) => {
                let d = g.cols();
                let mut off = 0;
                for &p in parts {
                    let r = self.value(p).rows();
                    acc(p, Tensor::matrix(r, d, g.data()[off * d..(off + r) * d].to_vec())?);
                    off += r;
                }
            }
            Op::Unfold { x, width } => {
                let xv = self.value(*x);
                let (n, d) = (xv.rows(), xv.cols());
                let half = width / 2;
                let mut dx = vec![0.0; n * d];
                for i in 0..n {
                    for t in 0..*width {
                        let src = i as isize + t as isize - half as isize;
                        if src < 0 || src >= n as isize {
                            continue;
                        }
                        let s = src as usize;
                        let base = i * width * d + t * d;
                        for c in 0..d {
                            dx[s * d + c] += g.data()[base + c];
                        }
                    }
                }
                acc(*x, Tensor::matrix(n, d, dx)?);
            }
            Op::NeighborSum { x, adj, self_weight } => {
                // Adjacency is symmetric, so the transpose equals the forward map.
                acc(*x, aggregate(g, adj, *self_weight));
            }
            Op::WeightedRowSum { x, weights } => {
                let xv = self.value(*x);
                let d = xv.cols();
                let mut dx = Vec::with_capacity(xv.len());
                for &w in weights {
                    dx.extend(g.data()[..d].iter().map(|v| w * v));
                }
                acc(*x, Tensor::matrix(weights.len(), d, dx)?);
            }
            Op::Sum(x) => acc(*x, Tensor::full(self.value(*x).shape(), g.data()[0])),
            Op::Fused { inputs, grads: local } => {
                let s = g.data()[0];
                for (&v, lg) in inputs.iter().zip(local) {
                    acc(v, lg.map(|t| t * s));
                }
            }
        }
        Ok(())
    }
}

fn aggregate(x: &Tensor, adj: &Adjacency, self_weight: f64) -> Tensor {
    let (n, d) = (x.rows(), x.cols());
    let mut out = vec![0.0; n * d];
    for v in 0..n {
        let nb = adj.neighbors(v);
        for j in 0..d {
            out[v * d + j] = exact_sum(
                std::iter::once(self_weight * x.get2(v, j)).chain(nb.iter().map(|&u| x.get2(u, j))),
            );
        }
    }
    Tensor::matrix(n, d, out).expect("aggregate shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_are_stochastic_and_masked() {
        let mut t = Tape::new();
        let x = t
            .leaf(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 5.0]).unwrap())
            .unwrap();
        let y = t.softmax_rows(x, Some(&[true, false, true])).unwrap();
        let yv = t.value(y);
        for i in 0..2 {
            assert!((yv.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert_eq!(yv.get2(i, 1), 0.0);
        }
        assert!(t.softmax_rows(x, Some(&[false, false, false])).is_err());
    }

    #[test]
    fn matmul_backward_matches_hand_derivation() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap()).unwrap();
        let b = t.leaf(Tensor::matrix(2, 1, vec![3.0, 4.0]).unwrap()).unwrap();
        let c = t.matmul(a, b).unwrap();
        let s = t.sum(c).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.wrt(a).data(), &[3.0, 4.0]);
        assert_eq!(g.wrt(b).data(), &[1.0, 2.0]);
    }

    #[test]
    fn reused_values_accumulate() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::vector(vec![3.0])).unwrap();
        let y = t.mul(x, x).unwrap();
        let z = t.add(y, x).unwrap();
        let g = t.backward(z).unwrap();
        assert_eq!(g.wrt(x).data(), &[7.0]);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut t = Tape::new();
        assert!(matches!(
            t.leaf(Tensor::vector(vec![f64::INFINITY])),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn adjacency_validation() {
        assert!(Adjacency::new(vec![vec![1], vec![0]]).is_ok());
        assert!(Adjacency::new(vec![vec![1], vec![]]).is_err());
        assert!(Adjacency::new(vec![vec![0]]).is_err());
        assert!(Adjacency::new(vec![vec![2, 1], vec![0], vec![0]]).is_err());
    }

    #[test]
    fn unfold_is_a_same_convolution() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(3, 1, vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        let u = t.unfold(x, 3).unwrap();
        assert_eq!(
            t.value(u).data(),
            &[0.0, 1.0, 2.0, 1.0, 2.0, 3.0, 2.0, 3.0, 0.0]
        );
        assert!(t.unfold(x, 2).is_err());
    }
}
