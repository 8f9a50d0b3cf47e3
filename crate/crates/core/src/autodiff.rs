//! Tape-based reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is an append-only list of nodes. Every operation evaluates
//! eagerly and records its parents, so parents always precede children and
//! the tape is acyclic by construction. [`Graph::backward`] walks the tape in
//! reverse and accumulates gradients into every leaf created with
//! `requires_grad = true`.
//!
//! Broadcasting is limited to [`Graph::add_bias`], which adds a `1 × k` row
//! to every row of an `m × k` matrix. Every other shape mismatch is an
//! [`Error::Shape`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special;

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::contract(format!(
                "tensor shape {shape:?} must be a non-empty list of positive sizes"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::contract(format!(
                "shape {shape:?} holds {len} values but {} were given",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// A `1 × k` row.
    pub fn row(data: Vec<f64>) -> Result<Self> {
        let k = data.len();
        Tensor::new(vec![1, k], data)
    }

    /// A `k × 1` column.
    pub fn column(data: Vec<f64>) -> Result<Self> {
        let k = data.len();
        Tensor::new(vec![k, 1], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1]
        } else {
            1
        }
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() != 1 {
            return Err(Error::contract(format!(
                "item() on a tensor of shape {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols() + col]
    }

    pub fn row_slice(&self, row: usize) -> &[f64] {
        let c = self.cols();
        &self.data[row * c..(row + 1) * c]
    }

    fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    fn is_matrix(&self) -> bool {
        self.shape.len() == 2
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Square(Var),
    SumAxis(Var, usize),
    SumAll(Var),
    LogSumExp(Var),
    Log(Var),
    Exp(Var),
    Neg(Var),
    ScalarMul(Var, f64),
    AddScalar(Var),
    Sqrt(Var),
    ConcatRows(Vec<Var>),
    SqDist(Var, Var),
    Gather(Var, Vec<usize>),
    ClampMin(Var, f64),
    ProbInclusion(Var, u32),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    needs_grad: bool,
    grad: Option<Tensor>,
}

/// Append-only tape of tensor operations.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    /// Constant leaf; never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            needs_grad: requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient accumulated by the last [`Graph::backward`] calls, if any.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = parents(&op).iter().any(|p| self.nodes[p.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad: false,
            needs_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn expect_matrix(&self, op: &'static str, v: Var) -> Result<&Tensor> {
        let t = self.value(v);
        if !t.is_matrix() {
            return Err(Error::shape(op, t.shape(), &[0, 0]));
        }
        Ok(t)
    }

    fn expect_same(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::shape(op, ta.shape(), tb.shape()));
        }
        Ok(())
    }

    /// `(m × k) · (k × p) → m × p`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ta = self.expect_matrix("matmul", a)?;
        let tb = self.expect_matrix("matmul", b)?;
        if ta.cols() != tb.rows() {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let out = matmul_raw(ta, tb);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = transpose_raw(self.expect_matrix("transpose", a)?);
        Ok(self.push(out, Op::Transpose(a)))
    }

    /// Adds a `1 × k` row to every row of an `m × k` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let tx = self.expect_matrix("add_bias", x)?;
        let tb = self.expect_matrix("add_bias", bias)?;
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(Error::shape("add_bias", tx.shape(), tb.shape()));
        }
        let cols = tx.cols();
        let mut out = tx.clone();
        for (i, v) in out.data.iter_mut().enumerate() {
            *v += tb.data[i % cols];
        }
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.expect_same("add", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.expect_same("sub", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x - y);
        Ok(self.push(out, Op::Sub(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.expect_same("mul", a, b)?;
        let out = self.value(a).zip(self.value(b), |x, y| x * y);
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        self.push(out, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x * x);
        self.push(out, Op::Square(a))
    }

    /// Sums a matrix along `axis`, keeping it as a size-1 dimension:
    /// axis 0 gives `1 × k`, axis 1 gives `m × 1`.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.expect_matrix("sum_axis", a)?;
        let (m, k) = (t.rows(), t.cols());
        let out = match axis {
            0 => {
                let mut acc = vec![0.0; k];
                for r in 0..m {
                    for (c, s) in acc.iter_mut().enumerate() {
                        *s += t.get(r, c);
                    }
                }
                Tensor::new(vec![1, k], acc)?
            }
            1 => {
                let acc = (0..m).map(|r| t.row_slice(r).iter().sum()).collect();
                Tensor::new(vec![m, 1], acc)?
            }
            _ => {
                return Err(Error::contract(format!(
                    "sum_axis: axis {axis} out of range for a matrix"
                )))
            }
        };
        Ok(self.push(out, Op::SumAxis(a, axis)))
    }

    /// Sum of every element, as a `[1]` scalar.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data.iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(a))
    }

    /// Mean of every element, as a `[1]` scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scalar_mul(s, 1.0 / n)
    }

    /// Row-wise `ln Σ_j exp(x_ij)`, giving an `m × 1` column.
    pub fn logsumexp(&mut self, a: Var) -> Result<Var> {
        let t = self.expect_matrix("logsumexp", a)?;
        let vals = (0..t.rows()).map(|r| logsumexp_slice(t.row_slice(r))).collect();
        let out = Tensor::new(vec![t.rows(), 1], vals)?;
        Ok(self.push(out, Op::LogSumExp(a)))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::log);
        self.push(out, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::exp);
        self.push(out, Op::Exp(a))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| -x);
        self.push(out, Op::Neg(a))
    }

    pub fn scalar_mul(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.push(out, Op::ScalarMul(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x + k);
        self.push(out, Op::AddScalar(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.value(a).map(libm::sqrt);
        self.push(out, Op::Sqrt(a))
    }

    /// `max(x, floor)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, a: Var, floor: f64) -> Var {
        let out = self.value(a).map(|x| if x < floor { floor } else { x });
        self.push(out, Op::ClampMin(a, floor))
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_rows needs at least one input"))?;
        let cols = self.expect_matrix("concat_rows", *first)?.cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let t = self.expect_matrix("concat_rows", p)?;
            if t.cols() != cols {
                return Err(Error::shape("concat_rows", self.value(*first).shape(), t.shape()));
            }
            rows += t.rows();
            data.extend_from_slice(&t.data);
        }
        let out = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Pairwise squared Euclidean distances between the rows of `z`
    /// (`m × n`) and the rows of `anchors` (`c × n`), giving `m × c`.
    pub fn sq_dist(&mut self, z: Var, anchors: Var) -> Result<Var> {
        let tz = self.expect_matrix("sq_dist", z)?;
        let ta = self.expect_matrix("sq_dist", anchors)?;
        if tz.cols() != ta.cols() {
            return Err(Error::shape("sq_dist", tz.shape(), ta.shape()));
        }
        let (m, c) = (tz.rows(), ta.rows());
        let mut out = Vec::with_capacity(m * c);
        for i in 0..m {
            for j in 0..c {
                out.push(sq_euclidean(tz.row_slice(i), ta.row_slice(j)));
            }
        }
        let out = Tensor::new(vec![m, c], out)?;
        Ok(self.push(out, Op::SqDist(z, anchors)))
    }

    /// Picks column `index[i]` of row `i`, giving an `m × 1` column.
    pub fn gather(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let t = self.expect_matrix("gather", a)?;
        if index.len() != t.rows() {
            return Err(Error::shape("gather", t.shape(), &[index.len()]));
        }
        if let Some(&bad) = index.iter().find(|&&j| j >= t.cols()) {
            return Err(Error::contract(format!(
                "gather: column {bad} out of range for shape {:?}",
                t.shape()
            )));
        }
        let vals = index.iter().enumerate().map(|(r, &j)| t.get(r, j)).collect();
        let out = Tensor::new(vec![t.rows(), 1], vals)?;
        Ok(self.push(out, Op::Gather(a, index.to_vec())))
    }

    /// Elementwise probability of inclusion `Q(n/2, d²/2)`; the backward
    /// pass uses the closed-form chi-square density.
    pub fn prob_inclusion(&mut self, d_sq: Var, n: u32) -> Result<Var> {
        let t = self.value(d_sq);
        let mut out = Vec::with_capacity(t.len());
        for &d in &t.data {
            out.push(special::prob_inclusion(d, n)?);
        }
        let out = Tensor::new(t.shape.clone(), out)?;
        Ok(self.push(out, Op::ProbInclusion(d_sq, n)))
    }

    /// Accumulates `d root / d leaf` into every leaf with `requires_grad`.
    ///
    /// Gradients add onto whatever the leaves already hold; call
    /// [`Graph::zero_grad`] before reusing the graph for a fresh pass.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).len() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.value(root).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor {
            shape: self.value(root).shape.clone(),
            data: vec![1.0],
        });
        for idx in (0..=root.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if node.requires_grad {
                let slot = &mut self.nodes[idx].grad;
                match slot {
                    Some(g) => g.add_assign(&upstream),
                    None => *slot = Some(upstream.clone()),
                }
            }
            let contributions = self.local_grads(idx, &upstream)?;
            for (parent, g) in contributions {
                if !self.nodes[parent.0].needs_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&g),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(())
    }

    fn local_grads(&self, idx: usize, up: &Tensor) -> Result<Vec<(Var, Tensor)>> {
        let node = &self.nodes[idx];
        let out = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        let grads = match &node.op {
            Op::Leaf => Vec::new(),
            Op::MatMul(a, b) => {
                let ga = matmul_raw(up, &transpose_raw(val(*b)));
                let gb = matmul_raw(&transpose_raw(val(*a)), up);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Transpose(a) => vec![(*a, transpose_raw(up))],
            Op::AddBias(x, bias) => {
                let cols = up.cols();
                let mut gb = vec![0.0; cols];
                for r in 0..up.rows() {
                    for (c, g) in gb.iter_mut().enumerate() {
                        *g += up.get(r, c);
                    }
                }
                vec![(*x, up.clone()), (*bias, Tensor::new(vec![1, cols], gb)?)]
            }
            Op::Add(a, b) => vec![(*a, up.clone()), (*b, up.clone())],
            Op::Sub(a, b) => vec![(*a, up.clone()), (*b, up.map(|g| -g))],
            Op::Mul(a, b) => vec![
                (*a, up.zip(val(*b), |g, y| g * y)),
                (*b, up.zip(val(*a), |g, x| g * x)),
            ],
            Op::Relu(a) => vec![(*a, up.zip(val(*a), |g, x| if x > 0.0 { g } else { 0.0 }))],
            Op::Square(a) => vec![(*a, up.zip(val(*a), |g, x| 2.0 * x * g))],
            Op::SumAxis(a, axis) => {
                let src = val(*a);
                let (m, k) = (src.rows(), src.cols());
                let mut g = Vec::with_capacity(m * k);
                for r in 0..m {
                    for c in 0..k {
                        g.push(if *axis == 0 { up.data[c] } else { up.data[r] });
                    }
                }
                vec![(*a, Tensor::new(src.shape.clone(), g)?)]
            }
            Op::SumAll(a) => {
                let g = up.data[0];
                vec![(*a, val(*a).map(|_| g))]
            }
            Op::LogSumExp(a) => {
                let src = val(*a);
                let k = src.cols();
                let mut g = Vec::with_capacity(src.len());
                for r in 0..src.rows() {
                    let lse = out.data[r];
                    for c in 0..k {
                        g.push(up.data[r] * libm::exp(src.get(r, c) - lse));
                    }
                }
                vec![(*a, Tensor::new(src.shape.clone(), g)?)]
            }
            Op::Log(a) => vec![(*a, up.zip(val(*a), |g, x| g / x))],
            Op::Exp(a) => vec![(*a, up.zip(out, |g, y| g * y))],
            Op::Neg(a) => vec![(*a, up.map(|g| -g))],
            Op::ScalarMul(a, k) => vec![(*a, up.map(|g| k * g))],
            Op::AddScalar(a) => vec![(*a, up.clone())],
            Op::Sqrt(a) => vec![(*a, up.zip(out, |g, y| g / (2.0 * y)))],
            Op::ClampMin(a, floor) => {
                vec![(*a, up.zip(val(*a), |g, x| if x < *floor { 0.0 } else { g }))]
            }
            Op::ConcatRows(parts) => {
                let cols = up.cols();
                let mut offset = 0;
                let mut v = Vec::with_capacity(parts.len());
                for p in parts {
                    let shape = val(*p).shape.clone();
                    let len = shape[0] * cols;
                    v.push((*p, Tensor::new(shape, up.data[offset..offset + len].to_vec())?));
                    offset += len;
                }
                v
            }
            Op::SqDist(z, anchors) => {
                let (tz, ta) = (val(*z), val(*anchors));
                let (m, c, n) = (tz.rows(), ta.rows(), tz.cols());
                let mut gz = vec![0.0; m * n];
                let mut ga = vec![0.0; c * n];
                for i in 0..m {
                    for j in 0..c {
                        let g = up.get(i, j);
                        if g == 0.0 {
                            continue;
                        }
                        for k in 0..n {
                            let diff = 2.0 * g * (tz.get(i, k) - ta.get(j, k));
                            gz[i * n + k] += diff;
                            ga[j * n + k] -= diff;
                        }
                    }
                }
                vec![
                    (*z, Tensor::new(tz.shape.clone(), gz)?),
                    (*anchors, Tensor::new(ta.shape.clone(), ga)?),
                ]
            }
            Op::Gather(a, index) => {
                let src = val(*a);
                let mut g = Tensor::zeros(src.shape.clone());
                let cols = src.cols();
                for (r, &j) in index.iter().enumerate() {
                    g.data[r * cols + j] += up.data[r];
                }
                vec![(*a, g)]
            }
            Op::ProbInclusion(d_sq, n) => {
                let src = val(*d_sq);
                let mut g = Vec::with_capacity(src.len());
                for (&u, &d) in up.data.iter().zip(&src.data) {
                    g.push(u * special::prob_inclusion_grad(d, *n)?);
                }
                vec![(*d_sq, Tensor::new(src.shape.clone(), g)?)]
            }
        };
        Ok(grads)
    }
}

fn parents(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => Vec::new(),
        Op::MatMul(a, b)
        | Op::AddBias(a, b)
        | Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::SqDist(a, b) => vec![*a, *b],
        Op::Transpose(a)
        | Op::Relu(a)
        | Op::Square(a)
        | Op::SumAxis(a, _)
        | Op::SumAll(a)
        | Op::LogSumExp(a)
        | Op::Log(a)
        | Op::Exp(a)
        | Op::Neg(a)
        | Op::ScalarMul(a, _)
        | Op::AddScalar(a)
        | Op::Sqrt(a)
        | Op::ClampMin(a, _)
        | Op::Gather(a, _)
        | Op::ProbInclusion(a, _) => vec![*a],
        Op::ConcatRows(parts) => parts.clone(),
    }
}

fn matmul_raw(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k, p) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * p];
    for i in 0..m {
        for t in 0..k {
            let av = a.data[i * k + t];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[t * p..(t + 1) * p];
            for (o, &bv) in out[i * p..(i + 1) * p].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor {
        shape: vec![m, p],
        data: out,
    }
}

fn transpose_raw(a: &Tensor) -> Tensor {
    let (m, k) = (a.rows(), a.cols());
    let mut out = vec![0.0; m * k];
    for i in 0..m {
        for j in 0..k {
            out[j * m + i] = a.data[i * k + j];
        }
    }
    Tensor {
        shape: vec![k, m],
        data: out,
    }
}

/// Numerically stable `ln Σ exp(x_i)`.
pub fn logsumexp_slice(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(s)
}

/// `‖a − b‖²`
pub fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
