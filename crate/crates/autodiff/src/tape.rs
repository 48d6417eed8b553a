use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::AutodiffError;
use crate::kernels;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a [`Tape`]. Cheap to copy; only valid on the tape
/// that created it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unary {
    Softplus,
    Tanh,
    Sigmoid,
    Relu,
    Abs,
    Sqrt,
    Square,
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Softplus => kernels::softplus(x),
            Unary::Tanh => x.tanh(),
            Unary::Sigmoid => kernels::sigmoid(x),
            Unary::Relu => x.max(0.0),
            Unary::Abs => x.abs(),
            Unary::Sqrt => x.sqrt(),
            Unary::Square => x * x,
        }
    }

    /// Derivative given the input `x` and the already computed output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Softplus => kernels::sigmoid(x),
            Unary::Tanh => 1.0 - y * y,
            Unary::Sigmoid => y * (1.0 - y),
            Unary::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Abs => {
                if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Unary::Sqrt => 0.5 / y,
            Unary::Square => 2.0 * x,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Broadcast {
    Full,
    Row,
    Scalar,
}

#[derive(Debug)]
struct GatherSpec {
    table: usize,
    index: Vec<u32>,
    weights: Vec<f64>,
    per_group: usize,
}

#[derive(Debug)]
enum Op {
    Leaf { param: bool },
    Add(usize, usize, Broadcast),
    Sub(usize, usize, Broadcast),
    Mul(usize, usize, Broadcast),
    Scale(usize, f64),
    MatMul(usize, usize),
    Concat(usize, usize),
    Columns { src: usize, start: usize },
    Rows { src: usize, start: usize },
    Reshape(usize),
    Gather(Box<GatherSpec>),
    Unary(usize, Unary),
    Sum(usize),
    RowSum(usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

/// A Wengert list of dense matrix operations.
///
/// Nodes can only reference nodes that already exist, so the recorded
/// graph is acyclic and topologically ordered by construction. Shape errors
/// and variables from another tape are programmer errors and panic at the
/// point of construction.
#[derive(Debug)]
pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf. Gradients are reported for parameters only.
    pub fn param(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "leaf value does not match its shape");
        self.push(Op::Leaf { param: true }, rows, cols, value)
    }

    pub fn constant(&mut self, value: Vec<f64>, rows: usize, cols: usize) -> Var {
        assert_eq!(value.len(), rows * cols, "leaf value does not match its shape");
        self.push(Op::Leaf { param: false }, rows, cols, value)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        self.check(v);
        &self.nodes[v.index].value
    }

    /// Value of a 1×1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        assert_eq!(v.len(), 1, "scalar() on a non-scalar node");
        self.value(v)[0]
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mode = self.broadcast(a, b);
        let value = self.zip(a, b, mode, |x, y| x + y);
        self.push(Op::Add(a.index, b.index, mode), a.rows, a.cols, value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let mode = self.broadcast(a, b);
        let value = self.zip(a, b, mode, |x, y| x - y);
        self.push(Op::Sub(a.index, b.index, mode), a.rows, a.cols, value)
    }

    /// Elementwise product; `b` may be a full matrix, a `1×cols` row or `1×1`.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let mode = self.broadcast(a, b);
        let value = self.zip(a, b, mode, |x, y| x * y);
        self.push(Op::Mul(a.index, b.index, mode), a.rows, a.cols, value)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.check(a);
        let value = self.nodes[a.index].value.iter().map(|x| x * c).collect();
        self.push(Op::Scale(a.index, c), a.rows, a.cols, value)
    }

    /// Row-wise matrix-vector products: `(n×k) · (k×m) → n×m`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        assert_eq!(a.cols, b.rows, "matmul inner dimensions differ");
        let value = kernels::matmul(
            &self.nodes[a.index].value,
            &self.nodes[b.index].value,
            a.rows,
            a.cols,
            b.cols,
        );
        self.push(Op::MatMul(a.index, b.index), a.rows, b.cols, value)
    }

    /// Column-wise concatenation of two matrices with equal row counts.
    pub fn concat(&mut self, a: Var, b: Var) -> Var {
        self.check(a);
        self.check(b);
        assert_eq!(a.rows, b.rows, "concat row counts differ");
        let value = kernels::concat_cols(
            &self.nodes[a.index].value,
            a.cols,
            &self.nodes[b.index].value,
            b.cols,
            a.rows,
        );
        self.push(Op::Concat(a.index, b.index), a.rows, a.cols + b.cols, value)
    }

    /// Columns `start..end` of `a`.
    pub fn columns(&mut self, a: Var, start: usize, end: usize) -> Var {
        self.check(a);
        assert!(start <= end && end <= a.cols, "column range out of bounds");
        let width = end - start;
        let src = &self.nodes[a.index].value;
        let mut value = Vec::with_capacity(a.rows * width);
        for r in 0..a.rows {
            value.extend_from_slice(&src[r * a.cols + start..r * a.cols + end]);
        }
        self.push(Op::Columns { src: a.index, start }, a.rows, width, value)
    }

    /// Rows `start..end` of `a`.
    pub fn rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        self.check(a);
        assert!(start <= end && end <= a.rows, "row range out of bounds");
        let value = self.nodes[a.index].value[start * a.cols..end * a.cols].to_vec();
        self.push(Op::Rows { src: a.index, start }, end - start, a.cols, value)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        self.check(a);
        assert_eq!(a.len(), rows * cols, "reshape changes the element count");
        let value = self.nodes[a.index].value.clone();
        self.push(Op::Reshape(a.index), rows, cols, value)
    }

    /// Weighted grouped gather from the rows of `table`; see
    /// [`kernels::gather`]. `index` and `weights` hold `groups * per_group`
    /// entries per output row. Indices and weights are constants.
    pub fn gather(
        &mut self,
        table: Var,
        index: Vec<u32>,
        weights: Vec<f64>,
        groups: usize,
        per_group: usize,
    ) -> Var {
        self.check(table);
        assert_eq!(index.len(), weights.len(), "gather index/weight length differ");
        assert!(groups > 0 && per_group > 0, "empty gather groups");
        assert_eq!(index.len() % (groups * per_group), 0, "ragged gather layout");
        assert!(
            index.iter().all(|&i| (i as usize) < table.rows),
            "gather index out of range"
        );
        let rows = index.len() / (groups * per_group);
        let value = kernels::gather(
            &self.nodes[table.index].value,
            table.cols,
            &index,
            &weights,
            groups,
            per_group,
        );
        let spec = GatherSpec {
            table: table.index,
            index,
            weights,
            per_group,
        };
        self.push(Op::Gather(Box::new(spec)), rows, groups * table.cols, value)
    }

    pub fn unary(&mut self, a: Var, f: Unary) -> Var {
        self.check(a);
        let value = self.nodes[a.index].value.iter().map(|&x| f.apply(x)).collect();
        self.push(Op::Unary(a.index, f), a.rows, a.cols, value)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Softplus)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Relu)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Abs)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Sqrt)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Square)
    }

    /// Sum of all entries, as a 1×1 node.
    pub fn sum(&mut self, a: Var) -> Var {
        self.check(a);
        let total = self.nodes[a.index].value.iter().sum();
        self.push(Op::Sum(a.index), 1, 1, vec![total])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = a.len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Per-row sums, as an `n×1` node.
    pub fn row_sum(&mut self, a: Var) -> Var {
        self.check(a);
        let value = self.nodes[a.index]
            .value
            .chunks_exact(a.cols.max(1))
            .map(|r| r.iter().sum())
            .collect();
        self.push(Op::RowSum(a.index), a.rows, 1, value)
    }

    /// `Σ a ⊙ c` for a constant weight buffer `c`. Used to inject an
    /// externally computed upstream gradient into the graph.
    pub fn dot_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        let w = self.constant(c, a.rows, a.cols);
        let p = self.mul(a, w);
        self.sum(p)
    }

    /// Gradients of the scalar `output` with respect to every parameter.
    pub fn backward(&self, output: Var) -> Result<Gradients, AutodiffError> {
        self.backward_seeded(output, 1.0)
    }

    /// Like [`Tape::backward`] with the output adjoint seeded to `seed`.
    pub fn backward_seeded(&self, output: Var, seed: f64) -> Result<Gradients, AutodiffError> {
        if output.tape != self.id || output.index >= self.nodes.len() {
            return Err(AutodiffError::ForeignVar);
        }
        if output.len() != 1 {
            return Err(AutodiffError::NonScalarOutput {
                rows: output.rows,
                cols: output.cols,
            });
        }
        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(self.nodes.len());
        adj.resize_with(output.index + 1, || None);
        adj[output.index] = Some(vec![seed]);
        let mut params: Vec<Option<Vec<f64>>> = Vec::new();
        params.resize_with(self.nodes.len(), || None);

        for i in (0..=output.index).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf { param } => {
                    if *param {
                        params[i] = Some(g);
                    }
                }
                Op::Add(a, b, mode) => {
                    accumulate(&mut adj, *a, &self.nodes, |d| add_into(d, &g));
                    accumulate(&mut adj, *b, &self.nodes, |d| {
                        reduce_into(d, &g, *mode, node.cols, |x| x)
                    });
                }
                Op::Sub(a, b, mode) => {
                    accumulate(&mut adj, *a, &self.nodes, |d| add_into(d, &g));
                    accumulate(&mut adj, *b, &self.nodes, |d| {
                        reduce_into(d, &g, *mode, node.cols, |x| -x)
                    });
                }
                Op::Mul(a, b, mode) => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    let cols = node.cols;
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for (j, (dj, gj)) in d.iter_mut().zip(&g).enumerate() {
                            *dj += gj * bv[broadcast_index(j, *mode, cols)];
                        }
                    });
                    accumulate(&mut adj, *b, &self.nodes, |d| {
                        for (j, (gj, aj)) in g.iter().zip(av).enumerate() {
                            d[broadcast_index(j, *mode, cols)] += gj * aj;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for (dj, gj) in d.iter_mut().zip(&g) {
                            *dj += gj * c;
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (an, bn) = (&self.nodes[*a], &self.nodes[*b]);
                    let (n, k, m) = (an.rows, an.cols, bn.cols);
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        kernels::matmul_grad_lhs(&g, &bn.value, d, n, k, m)
                    });
                    accumulate(&mut adj, *b, &self.nodes, |d| {
                        kernels::matmul_grad_rhs(&an.value, &g, d, n, k, m)
                    });
                }
                Op::Concat(a, b) => {
                    let ca = self.nodes[*a].cols;
                    let cb = self.nodes[*b].cols;
                    let cols = ca + cb;
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for r in 0..node.rows {
                            add_into(&mut d[r * ca..(r + 1) * ca], &g[r * cols..r * cols + ca]);
                        }
                    });
                    accumulate(&mut adj, *b, &self.nodes, |d| {
                        for r in 0..node.rows {
                            add_into(
                                &mut d[r * cb..(r + 1) * cb],
                                &g[r * cols + ca..(r + 1) * cols],
                            );
                        }
                    });
                }
                Op::Columns { src, start } => {
                    let sc = self.nodes[*src].cols;
                    let w = node.cols;
                    accumulate(&mut adj, *src, &self.nodes, |d| {
                        for r in 0..node.rows {
                            add_into(
                                &mut d[r * sc + start..r * sc + start + w],
                                &g[r * w..(r + 1) * w],
                            );
                        }
                    });
                }
                Op::Rows { src, start } => {
                    let c = node.cols;
                    accumulate(&mut adj, *src, &self.nodes, |d| {
                        add_into(&mut d[start * c..start * c + g.len()], &g)
                    });
                }
                Op::Reshape(a) => {
                    accumulate(&mut adj, *a, &self.nodes, |d| add_into(d, &g));
                }
                Op::Gather(spec) => {
                    let width = self.nodes[spec.table].cols;
                    accumulate(&mut adj, spec.table, &self.nodes, |d| {
                        kernels::gather_grad(
                            &g,
                            width,
                            &spec.index,
                            &spec.weights,
                            spec.per_group,
                            d,
                        )
                    });
                }
                Op::Unary(a, f) => {
                    let x = &self.nodes[*a].value;
                    let y = &node.value;
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for j in 0..d.len() {
                            d[j] += g[j] * f.derivative(x[j], y[j]);
                        }
                    });
                }
                Op::Sum(a) => {
                    let gs = g[0];
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for dj in d.iter_mut() {
                            *dj += gs;
                        }
                    });
                }
                Op::RowSum(a) => {
                    let c = self.nodes[*a].cols;
                    accumulate(&mut adj, *a, &self.nodes, |d| {
                        for (r, gr) in g.iter().enumerate() {
                            for dj in &mut d[r * c..(r + 1) * c] {
                                *dj += gr;
                            }
                        }
                    });
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads: params,
        })
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        let index = self.nodes.len();
        self.nodes.push(Node {
            op,
            rows,
            cols,
            value,
        });
        Var {
            tape: self.id,
            index,
            rows,
            cols,
        }
    }

    fn check(&self, v: Var) {
        assert!(
            v.tape == self.id && v.index < self.nodes.len(),
            "variable does not belong to this tape"
        );
    }

    fn broadcast(&self, a: Var, b: Var) -> Broadcast {
        self.check(a);
        self.check(b);
        if a.rows == b.rows && a.cols == b.cols {
            Broadcast::Full
        } else if b.rows == 1 && b.cols == a.cols {
            Broadcast::Row
        } else if b.len() == 1 {
            Broadcast::Scalar
        } else {
            panic!(
                "cannot broadcast {}x{} onto {}x{}",
                b.rows, b.cols, a.rows, a.cols
            )
        }
    }

    fn zip(&self, a: Var, b: Var, mode: Broadcast, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let av = &self.nodes[a.index].value;
        let bv = &self.nodes[b.index].value;
        av.iter()
            .enumerate()
            .map(|(j, &x)| f(x, bv[broadcast_index(j, mode, a.cols)]))
            .collect()
    }
}

fn broadcast_index(j: usize, mode: Broadcast, cols: usize) -> usize {
    match mode {
        Broadcast::Full => j,
        Broadcast::Row => j % cols,
        Broadcast::Scalar => 0,
    }
}

fn add_into(d: &mut [f64], g: &[f64]) {
    for (dj, gj) in d.iter_mut().zip(g) {
        *dj += gj;
    }
}

fn reduce_into(d: &mut [f64], g: &[f64], mode: Broadcast, cols: usize, f: impl Fn(f64) -> f64) {
    match mode {
        Broadcast::Full => {
            for (dj, gj) in d.iter_mut().zip(g) {
                *dj += f(*gj);
            }
        }
        Broadcast::Row => {
            for chunk in g.chunks_exact(cols) {
                for (dj, gj) in d.iter_mut().zip(chunk) {
                    *dj += f(*gj);
                }
            }
        }
        Broadcast::Scalar => d[0] += f(g.iter().sum()),
    }
}

fn accumulate(
    adj: &mut [Option<Vec<f64>>],
    target: usize,
    nodes: &[Node],
    f: impl FnOnce(&mut [f64]),
) {
    let buf = adj[target].get_or_insert_with(|| vec![0.0; nodes[target].value.len()]);
    f(buf);
}

/// Parameter gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for parameter `v`, or `None` when the output does not depend
    /// on it.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(|g| g.as_deref())
    }

    /// Gradient for `v`, materialising zeros where the output is
    /// independent of it.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        self.get(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; v.len()])
    }

    /// Takes ownership of the gradient buffer for `v`.
    pub fn take(&mut self, v: Var) -> Vec<f64> {
        if v.tape == self.tape {
            if let Some(g) = self.grads.get_mut(v.index).and_then(Option::take) {
                return g;
            }
        }
        vec![0.0; v.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut t = Tape::new();
        let x = t.param(vec![3.0], 1, 1);
        let y = t.mul(x, x);
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x), vec![6.0]);
    }

    #[test]
    fn softplus_gradient_at_zero() {
        let mut t = Tape::new();
        let x = t.param(vec![0.0], 1, 1);
        let y = t.softplus(x);
        let g = t.backward(y).unwrap();
        assert!((g.wrt(x)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::new();
        let x = t.param(vec![1.0, 2.0], 1, 2);
        let err = t.backward(x).unwrap_err();
        assert_eq!(err, AutodiffError::NonScalarOutput { rows: 1, cols: 2 });
    }

    #[test]
    fn output_from_another_tape_is_rejected() {
        let mut a = Tape::new();
        let b = Tape::new();
        let x = a.param(vec![1.0], 1, 1);
        assert_eq!(b.backward(x).unwrap_err(), AutodiffError::ForeignVar);
    }

    #[test]
    #[should_panic(expected = "does not belong")]
    fn foreign_input_panics_at_construction() {
        let mut a = Tape::new();
        let mut b = Tape::new();
        let x = a.param(vec![1.0], 1, 1);
        let _ = b.abs(x);
    }

    #[test]
    fn output_adjoint_is_one() {
        let mut t = Tape::new();
        let x = t.param(vec![2.0], 1, 1);
        let y = t.scale(x, 1.0);
        // d y / d x = 1, so the parameter gradient equals the output adjoint.
        assert_eq!(t.backward(y).unwrap().wrt(x), vec![1.0]);
    }

    #[test]
    fn colliding_gathers_accumulate() {
        let mut t = Tape::new();
        let table = t.param(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        let out = t.gather(table, vec![1, 1, 0], vec![0.5, 0.25, 1.0], 1, 1);
        let s = t.sum(out);
        let g = t.backward(s).unwrap().wrt(table);
        assert_eq!(g, vec![1.0, 1.0, 0.75, 0.75]);
    }

    #[test]
    fn independent_parameter_has_no_gradient() {
        let mut t = Tape::new();
        let x = t.param(vec![1.0], 1, 1);
        let y = t.param(vec![1.0], 1, 1);
        let z = t.square(x);
        let g = t.backward(z).unwrap();
        assert!(g.get(y).is_none());
        assert_eq!(g.wrt(y), vec![0.0]);
    }
}
