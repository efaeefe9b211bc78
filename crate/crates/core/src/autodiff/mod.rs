//! Recorded computations over dense `f64` matrices with reverse-mode
//! gradients.
//!
//! A [`DiffGraph`] is built eagerly: every recording call computes the
//! node's value immediately, so callers can inspect intermediate values
//! (neighbor sampling needs them) while the graph is still growing. The
//! recorded structure can then be replayed with [`DiffGraph::evaluate`]
//! after rebinding leaves, which is what the finite-difference checker
//! relies on.
//!
//! Everything is a 2-D matrix. Vectors are `n×1` or `1×n`, scalars `1×1`.

mod check;
mod optim;

pub use check::finite_difference_check;
pub use optim::{Adam, Parameter};

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Handle to a node recorded in a [`DiffGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    MatMul(Var, Var),
    ConcatCols(Vec<Var>),
    SliceRows {
        input: Var,
        start: usize,
        end: usize,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `m×n + 1×n`, the row broadcast over every row.
    AddRow(Var, Var),
    Scale(Var, f64),
    Neg(Var),
    Exp(Var),
    Ln(Var),
    SquaredNorm(Var),
    Sum(Var),
    Softmax(Var),
    LeakyRelu(Var, f64),
    Sigmoid(Var),
    BceWithLogits {
        logits: Var,
        rows: Vec<usize>,
        targets: Vec<f64>,
    },
    GatherRows {
        input: Var,
        index: Vec<usize>,
    },
    SegmentSoftmax {
        input: Var,
        offsets: Vec<usize>,
    },
    SegmentWeightedSum {
        values: Var,
        weights: Var,
        index: Vec<usize>,
        offsets: Vec<usize>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        use Op::*;
        match self {
            Input => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) => vec![*a, *b],
            ConcatCols(parts) => parts.clone(),
            SliceRows { input, .. } | GatherRows { input, .. } | SegmentSoftmax { input, .. } => {
                vec![*input]
            }
            Scale(a, _) | Neg(a) | Exp(a) | Ln(a) | SquaredNorm(a) | Sum(a) | Softmax(a)
            | LeakyRelu(a, _) | Sigmoid(a) => vec![*a],
            BceWithLogits { logits, .. } => vec![*logits],
            SegmentWeightedSum { values, weights, .. } => vec![*values, *weights],
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    value: Matrix,
    requires_grad: bool,
}

/// Adjoints produced by [`DiffGraph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the loss w.r.t. `v`; zeros when `v` does not reach the loss.
    pub fn get(&self, v: Var) -> Matrix {
        match &self.adjoints[v.0] {
            Some(m) => m.clone(),
            None => Matrix::zeros(self.shapes[v.0]),
        }
    }

    pub fn get_ref(&self, v: Var) -> Option<&Matrix> {
        self.adjoints[v.0].as_ref()
    }
}

#[derive(Clone, Debug, Default)]
pub struct DiffGraph {
    nodes: Vec<Node>,
}

fn shape(m: &Matrix) -> (usize, usize) {
    (m.nrows(), m.ncols())
}

fn same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(op, format!("{:?} vs {:?}", shape(a), shape(b))))
    }
}

fn check_offsets(op: &'static str, offsets: &[usize], len: usize) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&len)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::shape(op, format!("bad segment offsets for {len} rows")))
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max(z,0) − z·y + ln(1 + e^{−|z|})`, the stable form of binary
/// cross-entropy on a logit.
#[inline]
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

fn softmax_slice(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in xs.iter_mut() {
        *x /= total;
    }
}

impl DiffGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Matrix, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op: Op::Input,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Value of a `1×1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn is_input(&self, v: Var) -> bool {
        matches!(self.nodes[v.0].op, Op::Input)
    }

    /// Rebinds a leaf. Call [`evaluate`](Self::evaluate) afterwards to
    /// refresh downstream values.
    pub fn set_input(&mut self, v: Var, value: Matrix) -> Result<()> {
        let node = &mut self.nodes[v.0];
        if !matches!(node.op, Op::Input) {
            return Err(Error::shape("set_input", format!("node {} is not a leaf", v.0)));
        }
        same_shape("set_input", &node.value, &value)?;
        node.value = value;
        Ok(())
    }

    /// Recomputes every non-leaf node in recording order.
    pub fn evaluate(&mut self) -> Result<()> {
        for i in 0..self.nodes.len() {
            if matches!(self.nodes[i].op, Op::Input) {
                continue;
            }
            let value = self.compute(&self.nodes[i].op)?;
            self.nodes[i].value = value;
        }
        Ok(())
    }

    fn record(&mut self, op: Op) -> Result<Var> {
        let value = self.compute(&op)?;
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::MatMul(a, b))
    }

    /// Concatenates along columns; all parts must have equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        self.record(Op::ConcatCols(parts.to_vec()))
    }

    /// Rows `start..end` of `input`.
    pub fn slice_rows(&mut self, input: Var, start: usize, end: usize) -> Result<Var> {
        self.record(Op::SliceRows { input, start, end })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.record(Op::Mul(a, b))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.record(Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        self.record(Op::Scale(a, k))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Neg(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Exp(a))
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Ln(a))
    }

    /// Sum of squares of all entries, as a `1×1`.
    pub fn squared_norm(&mut self, a: Var) -> Result<Var> {
        self.record(Op::SquaredNorm(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sum(a))
    }

    /// Softmax over all entries of `a`, treated as one vector.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Softmax(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.record(Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.record(Op::Sigmoid(a))
    }

    /// Mean binary cross-entropy of `logits[rows[i], 0]` against `targets[i]`.
    pub fn bce_with_logits(&mut self, logits: Var, rows: Vec<usize>, targets: Vec<f64>) -> Result<Var> {
        self.record(Op::BceWithLogits {
            logits,
            rows,
            targets,
        })
    }

    /// Output row `i` is `input[index[i]]`.
    pub fn gather_rows(&mut self, input: Var, index: Vec<usize>) -> Result<Var> {
        self.record(Op::GatherRows { input, index })
    }

    /// Softmax of an `m×1` column within each segment
    /// `offsets[s]..offsets[s+1]`.
    pub fn segment_softmax(&mut self, input: Var, offsets: Vec<usize>) -> Result<Var> {
        self.record(Op::SegmentSoftmax { input, offsets })
    }

    /// Output row `s` is `Σ_{i in segment s} weights[i] · values[index[i]]`.
    pub fn segment_weighted_sum(
        &mut self,
        values: Var,
        weights: Var,
        index: Vec<usize>,
        offsets: Vec<usize>,
    ) -> Result<Var> {
        self.record(Op::SegmentWeightedSum {
            values,
            weights,
            index,
            offsets,
        })
    }

    fn compute(&self, op: &Op) -> Result<Matrix> {
        let val = |v: &Var| &self.nodes[v.0].value;
        Ok(match op {
            Op::Input => unreachable!("leaves are never recomputed"),
            Op::MatMul(a, b) => {
                let (a, b) = (val(a), val(b));
                if a.ncols() != b.nrows() {
                    return Err(Error::shape("matmul", format!("{:?} x {:?}", shape(a), shape(b))));
                }
                a.dot(b)
            }
            Op::ConcatCols(parts) => {
                if parts.is_empty() {
                    return Err(Error::shape("concat_cols", "no inputs"));
                }
                let rows = val(&parts[0]).nrows();
                if let Some(p) = parts.iter().find(|p| val(p).nrows() != rows) {
                    return Err(Error::shape(
                        "concat_cols",
                        format!("{} rows vs {}", val(p).nrows(), rows),
                    ));
                }
                let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| val(p).view()).collect();
                concatenate(Axis(1), &views).expect("row counts checked")
            }
            Op::SliceRows { input, start, end } => {
                let x = val(input);
                if start > end || *end > x.nrows() {
                    return Err(Error::shape(
                        "slice_rows",
                        format!("{start}..{end} of {} rows", x.nrows()),
                    ));
                }
                x.slice(s![*start..*end, ..]).to_owned()
            }
            Op::Add(a, b) => {
                same_shape("add", val(a), val(b))?;
                val(a) + val(b)
            }
            Op::Sub(a, b) => {
                same_shape("sub", val(a), val(b))?;
                val(a) - val(b)
            }
            Op::Mul(a, b) => {
                same_shape("mul", val(a), val(b))?;
                val(a) * val(b)
            }
            Op::AddRow(a, row) => {
                let (a, row) = (val(a), val(row));
                if row.nrows() != 1 || row.ncols() != a.ncols() {
                    return Err(Error::shape("add_row", format!("{:?} + {:?}", shape(a), shape(row))));
                }
                a + row
            }
            Op::Scale(a, k) => val(a) * *k,
            Op::Neg(a) => -val(a),
            Op::Exp(a) => val(a).mapv(f64::exp),
            Op::Ln(a) => val(a).mapv(f64::ln),
            Op::SquaredNorm(a) => Matrix::from_elem((1, 1), val(a).iter().map(|x| x * x).sum()),
            Op::Sum(a) => Matrix::from_elem((1, 1), val(a).sum()),
            Op::Softmax(a) => {
                let x = val(a);
                if x.is_empty() {
                    return Err(Error::EmptySoftmax);
                }
                let mut out = x.as_standard_layout().into_owned();
                softmax_slice(out.as_slice_mut().expect("standard layout"));
                out
            }
            Op::LeakyRelu(a, slope) => val(a).mapv(|x| if x > 0.0 { x } else { slope * x }),
            Op::Sigmoid(a) => val(a).mapv(sigmoid),
            Op::BceWithLogits {
                logits,
                rows,
                targets,
            } => {
                let z = val(logits);
                if z.ncols() != 1 {
                    return Err(Error::shape("bce_with_logits", format!("logits {:?}", shape(z))));
                }
                if rows.len() != targets.len() {
                    return Err(Error::Length(format!(
                        "{} rows vs {} targets",
                        rows.len(),
                        targets.len()
                    )));
                }
                if rows.is_empty() {
                    return Err(Error::EmptyMask);
                }
                if let Some(&r) = rows.iter().find(|&&r| r >= z.nrows()) {
                    return Err(Error::shape("bce_with_logits", format!("row {r} of {}", z.nrows())));
                }
                let total: f64 = rows
                    .iter()
                    .zip(targets)
                    .map(|(&r, &y)| bce_with_logit(z[[r, 0]], y))
                    .sum();
                Matrix::from_elem((1, 1), total / rows.len() as f64)
            }
            Op::GatherRows { input, index } => {
                let x = val(input);
                if let Some(&i) = index.iter().find(|&&i| i >= x.nrows()) {
                    return Err(Error::shape("gather_rows", format!("row {i} of {}", x.nrows())));
                }
                x.select(Axis(0), index)
            }
            Op::SegmentSoftmax { input, offsets } => {
                let x = val(input);
                if x.ncols() != 1 {
                    return Err(Error::shape("segment_softmax", format!("input {:?}", shape(x))));
                }
                check_offsets("segment_softmax", offsets, x.nrows())?;
                let mut out = x.as_standard_layout().into_owned();
                let flat = out.as_slice_mut().expect("standard layout");
                for w in offsets.windows(2) {
                    if w[0] == w[1] {
                        return Err(Error::EmptySoftmax);
                    }
                    softmax_slice(&mut flat[w[0]..w[1]]);
                }
                out
            }
            Op::SegmentWeightedSum {
                values,
                weights,
                index,
                offsets,
            } => {
                let (x, w) = (val(values), val(weights));
                if w.ncols() != 1 || w.nrows() != index.len() {
                    return Err(Error::shape(
                        "segment_weighted_sum",
                        format!("weights {:?} for {} indices", shape(w), index.len()),
                    ));
                }
                if let Some(&i) = index.iter().find(|&&i| i >= x.nrows()) {
                    return Err(Error::shape(
                        "segment_weighted_sum",
                        format!("row {i} of {}", x.nrows()),
                    ));
                }
                check_offsets("segment_weighted_sum", offsets, index.len())?;
                let mut out = Matrix::zeros((offsets.len() - 1, x.ncols()));
                for (s, bounds) in offsets.windows(2).enumerate() {
                    let mut row = out.row_mut(s);
                    for i in bounds[0]..bounds[1] {
                        row.scaled_add(w[[i, 0]], &x.row(index[i]));
                    }
                }
                out
            }
        })
    }

    /// Reverse-mode pass from a `1×1` loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (rows, cols) = shape(&self.nodes[loss.0].value);
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarLoss { rows, cols });
        }
        let mut adj: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        adj[loss.0] = Some(Matrix::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if node.requires_grad {
                self.propagate(node, &g, &mut adj);
            }
            adj[i] = Some(g);
        }

        Ok(Gradients {
            adjoints: adj,
            shapes: self.nodes.iter().map(|n| shape(&n.value)).collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let val = |v: &Var| &self.nodes[v.0].value;
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        let mut acc = |v: Var, delta: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut adj[v.0] {
                Some(m) => *m += &delta,
                slot @ None => *slot = Some(delta),
            }
        };
        let y = &node.value;

        match &node.op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(*a, g.dot(&val(b).t()));
                }
                if wants(b) {
                    acc(*b, val(a).t().dot(g));
                }
            }
            Op::ConcatCols(parts) => {
                let mut col = 0;
                for p in parts {
                    let width = val(p).ncols();
                    if wants(p) {
                        acc(*p, g.slice(s![.., col..col + width]).to_owned());
                    }
                    col += width;
                }
            }
            Op::SliceRows { input, start, end } => {
                let mut full = Matrix::zeros(val(input).raw_dim());
                full.slice_mut(s![*start..*end, ..]).assign(g);
                acc(*input, full);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -g);
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    acc(*a, g * val(b));
                }
                if wants(b) {
                    acc(*b, g * val(a));
                }
            }
            Op::AddRow(a, row) => {
                acc(*a, g.clone());
                if wants(row) {
                    acc(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Scale(a, k) => acc(*a, g * *k),
            Op::Neg(a) => acc(*a, -g),
            Op::Exp(a) => acc(*a, g * y),
            Op::Ln(a) => acc(*a, g / val(a)),
            Op::SquaredNorm(a) => acc(*a, val(a) * (2.0 * g[[0, 0]])),
            Op::Sum(a) => acc(*a, Matrix::from_elem(val(a).raw_dim(), g[[0, 0]])),
            Op::Softmax(a) => {
                let dot: f64 = Zip::from(g).and(y).fold(0.0, |s, &gi, &yi| s + gi * yi);
                let mut dx = y.clone();
                Zip::from(&mut dx).and(g).for_each(|d, &gi| *d *= gi - dot);
                acc(*a, dx);
            }
            Op::LeakyRelu(a, slope) => {
                let mut dx = g.clone();
                Zip::from(&mut dx)
                    .and(val(a))
                    .for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= slope
                        }
                    });
                acc(*a, dx);
            }
            Op::Sigmoid(a) => {
                let mut dx = g.clone();
                Zip::from(&mut dx).and(y).for_each(|d, &s| *d *= s * (1.0 - s));
                acc(*a, dx);
            }
            Op::BceWithLogits {
                logits,
                rows,
                targets,
            } => {
                let z = val(logits);
                let scale = g[[0, 0]] / rows.len() as f64;
                let mut dz = Matrix::zeros(z.raw_dim());
                for (&r, &t) in rows.iter().zip(targets) {
                    dz[[r, 0]] += scale * (sigmoid(z[[r, 0]]) - t);
                }
                acc(*logits, dz);
            }
            Op::GatherRows { input, index } => {
                let mut dx = Matrix::zeros(val(input).raw_dim());
                for (i, &src) in index.iter().enumerate() {
                    dx.row_mut(src).scaled_add(1.0, &g.row(i));
                }
                acc(*input, dx);
            }
            Op::SegmentSoftmax { input, offsets } => {
                let mut dx = Matrix::zeros(y.raw_dim());
                for w in offsets.windows(2) {
                    let dot: f64 = (w[0]..w[1]).map(|i| g[[i, 0]] * y[[i, 0]]).sum();
                    for i in w[0]..w[1] {
                        dx[[i, 0]] = y[[i, 0]] * (g[[i, 0]] - dot);
                    }
                }
                acc(*input, dx);
            }
            Op::SegmentWeightedSum {
                values,
                weights,
                index,
                offsets,
            } => {
                let (x, w) = (val(values), val(weights));
                let mut dx = wants(values).then(|| Matrix::zeros(x.raw_dim()));
                let mut dw = wants(weights).then(|| Matrix::zeros(w.raw_dim()));
                for (s, bounds) in offsets.windows(2).enumerate() {
                    let go = g.row(s);
                    for i in bounds[0]..bounds[1] {
                        if let Some(dx) = dx.as_mut() {
                            dx.row_mut(index[i]).scaled_add(w[[i, 0]], &go);
                        }
                        if let Some(dw) = dw.as_mut() {
                            dw[[i, 0]] = go.dot(&x.row(index[i]));
                        }
                    }
                }
                if let Some(dx) = dx {
                    acc(*values, dx);
                }
                if let Some(dw) = dw {
                    acc(*weights, dw);
                }
            }
        }
    }
}
