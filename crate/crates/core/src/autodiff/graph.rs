//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only list of nodes. Because a node can only
//! refer to nodes created before it, node ids are already a topological
//! order and the backward sweep is a reverse scan.
//!
//! The backward rules are themselves expressed as graph operations, so the
//! result of [`Graph::grad_of`] is an ordinary node that can be fed into
//! further computation and differentiated again.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;

use super::tensor::{Shape, Tensor};
use super::AutodiffError;

type Id = usize;

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Id, Id),
    Sub(Id, Id),
    Mul(Id, Id),
    /// `a / b`, with the quotient defined as 0 wherever `b == 0`.
    SafeDiv(Id, Id),
    Scale(Id, f64),
    Matmul {
        a: Id,
        b: Id,
        ta: bool,
        tb: bool,
    },
    /// Matrix plus a `1 x cols` row added to every row.
    AddRow(Id, Id),
    /// Scalar spread over a shape.
    Broadcast(Id),
    SumAll(Id),
    SumRows(Id),
    RepeatRows(Id),
    SumCols(Id),
    RepeatCols(Id),
    Concat(Vec<Id>),
    Slice(Id, usize, usize),
    LeakyRelu(Id, f64),
    Square(Id),
    RowNorm(Id),
    Clamp(Id, f64, f64),
    HuberElem(Id, f64),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A computation graph. Build one per optimisation step and drop it.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    graph: &'g Graph,
    id: Id,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

/// First-order gradients of a scalar with respect to the graph's leaves.
#[derive(Debug, Default)]
pub struct Gradients {
    by_id: HashMap<Id, Tensor>,
}

impl Gradients {
    /// Gradient for `leaf`, or zeros of its shape when the output does not
    /// depend on it.
    pub fn wrt(&self, leaf: Var<'_>) -> Tensor {
        match self.by_id.get(&leaf.id) {
            Some(t) => t.clone(),
            None => {
                let s = leaf.shape();
                Tensor::zeros(s.rows, s.cols)
            }
        }
    }

    pub fn collect(&self, leaves: &[Var<'_>]) -> Vec<Tensor> {
        leaves.iter().map(|v| self.wrt(*v)).collect()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// A leaf that receives gradients.
    pub fn param(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn shape_of(&self, id: Id) -> Shape {
        self.nodes.borrow()[id].value.shape()
    }

    fn requires(&self, id: Id) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    fn unary(&self, a: Id, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Var<'_> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            (f(&nodes[a].value), nodes[a].requires_grad)
        };
        self.push(value, op, rg)
    }

    fn binary(
        &self,
        a: Id,
        b: Id,
        op: Op,
        f: impl FnOnce(&Tensor, &Tensor) -> Result<Tensor, AutodiffError>,
    ) -> Result<Var<'_>, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let v = f(&nodes[a].value, &nodes[b].value)?;
            (v, nodes[a].requires_grad || nodes[b].requires_grad)
        };
        Ok(self.push(value, op, rg))
    }

    /// Lifts a scalar operand to the other operand's shape.
    fn conform(&self, a: Id, b: Id, op: &'static str) -> Result<(Id, Id), AutodiffError> {
        let (sa, sb) = (self.shape_of(a), self.shape_of(b));
        if sa == sb {
            Ok((a, b))
        } else if sb.is_scalar() {
            Ok((a, self.broadcast_id(b, sa)))
        } else if sa.is_scalar() {
            Ok((self.broadcast_id(a, sb), b))
        } else {
            Err(AutodiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            })
        }
    }

    fn broadcast_id(&self, a: Id, to: Shape) -> Id {
        self.unary(a, Op::Broadcast(a), |t| {
            Tensor::filled(to.rows, to.cols, t.data()[0])
        })
        .id
    }

    fn elementwise(
        &self,
        a: Id,
        b: Id,
        name: &'static str,
        make: fn(Id, Id) -> Op,
        f: fn(f64, f64) -> f64,
    ) -> Result<Var<'_>, AutodiffError> {
        let (a, b) = self.conform(a, b, name)?;
        self.binary(a, b, make(a, b), |x, y| x.zip_map(y, name, f))
    }

    /// Concatenates along the last axis.
    pub fn concat<'g>(&'g self, parts: &[Var<'g>]) -> Result<Var<'g>, AutodiffError> {
        let ids: Vec<Id> = parts.iter().map(|p| p.id).collect();
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let tensors: Vec<&Tensor> = ids.iter().map(|&i| &nodes[i].value).collect();
            let v = Tensor::concat_cols(&tensors)?;
            (v, ids.iter().any(|&i| nodes[i].requires_grad))
        };
        Ok(self.push(value, Op::Concat(ids), rg))
    }

    /// Gradients of scalar `output` with respect to every leaf created with
    /// [`Graph::param`].
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients, AutodiffError> {
        let grads = self.sweep(output.id, None)?;
        let nodes_len = output.id + 1;
        let mut by_id = HashMap::new();
        for (id, g) in grads.into_iter().enumerate().take(nodes_len) {
            let Some(g) = g else { continue };
            let is_param = {
                let nodes = self.nodes.borrow();
                matches!(nodes[id].op, Op::Leaf) && nodes[id].requires_grad
            };
            if is_param {
                by_id.insert(id, self.nodes.borrow()[g].value.clone());
            }
        }
        Ok(Gradients { by_id })
    }

    /// Gradient of scalar `output` with respect to `wrt` as a graph node, so
    /// that it can take part in a further backward pass. Returns a constant
    /// zero node when `output` does not depend on `wrt`.
    pub fn grad_of<'g>(&'g self, output: Var<'g>, wrt: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        let grads = self.sweep(output.id, Some(wrt.id))?;
        match grads.get(wrt.id).copied().flatten() {
            Some(g) => Ok(Var { graph: self, id: g }),
            None => {
                let s = wrt.shape();
                Ok(self.constant(Tensor::zeros(s.rows, s.cols)))
            }
        }
    }

    /// Reverse sweep from `output`. With `only`, gradients are propagated
    /// solely along paths that pass through that node.
    fn sweep(&self, output: Id, only: Option<Id>) -> Result<Vec<Option<Id>>, AutodiffError> {
        let out_shape = self.shape_of(output);
        if !out_shape.is_scalar() {
            return Err(AutodiffError::NotScalar(out_shape));
        }
        let n = output + 1;
        let relevant: Vec<bool> = match only {
            None => {
                let nodes = self.nodes.borrow();
                nodes[..n].iter().map(|node| node.requires_grad).collect()
            }
            Some(w) => {
                let nodes = self.nodes.borrow();
                let mut rel = vec![false; n];
                if w < n {
                    rel[w] = true;
                    for id in w + 1..n {
                        rel[id] = nodes[id].requires_grad
                            && parents(&nodes[id].op).iter().any(|&p| rel[p]);
                    }
                }
                rel
            }
        };

        let mut grads: Vec<Option<Id>> = vec![None; n];
        if !relevant[output] {
            return Ok(grads);
        }
        grads[output] = Some(self.scalar(1.0).id);

        for id in (0..n).rev() {
            let Some(g) = grads[id] else { continue };
            if !relevant[id] {
                continue;
            }
            let op = self.nodes.borrow()[id].op.clone();
            let needs = |p: Id| relevant[p];
            for (parent, pg) in self.vjp(id, &op, g, &needs) {
                grads[parent] = Some(match grads[parent] {
                    None => pg,
                    Some(prev) => self.add_ids(prev, pg),
                });
            }
        }
        Ok(grads)
    }

    fn add_ids(&self, a: Id, b: Id) -> Id {
        self.binary(a, b, Op::Add(a, b), |x, y| x.zip_map(y, "add", |p, q| p + q))
            .expect("gradient accumulation of equal shapes")
            .id
    }

    /// Local derivative rules, written in graph operations.
    fn vjp<'g>(&'g self, own: Id, op: &Op, g: Id, needs: &dyn Fn(Id) -> bool) -> Vec<(Id, Id)> {
        let v = |id| Var { graph: self, id };
        let gv = v(g);
        let mut out = Vec::new();
        let mut emit = |p: Id, f: &dyn Fn() -> Var<'g>| {
            if needs(p) {
                out.push((p, f().id));
            }
        };
        const OK: &str = "backward rule shapes follow the forward op";
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                emit(a, &|| gv);
                emit(b, &|| gv);
            }
            Op::Sub(a, b) => {
                emit(a, &|| gv);
                emit(b, &|| gv.scale(-1.0));
            }
            Op::Mul(a, b) => {
                emit(a, &|| gv.mul(v(b)).expect(OK));
                emit(b, &|| gv.mul(v(a)).expect(OK));
            }
            Op::SafeDiv(a, b) => {
                emit(a, &|| gv.safe_div(v(b)).expect(OK));
                emit(b, &|| {
                    gv.mul(v(own))
                        .and_then(|t| t.safe_div(v(b)))
                        .expect(OK)
                        .scale(-1.0)
                });
            }
            Op::Scale(a, c) => emit(a, &|| gv.scale(c)),
            Op::Matmul { a, b, ta, tb } => {
                emit(a, &|| {
                    if ta {
                        v(b).matmul_t(gv, tb, true).expect(OK)
                    } else {
                        gv.matmul_t(v(b), false, !tb).expect(OK)
                    }
                });
                emit(b, &|| {
                    if tb {
                        gv.matmul_t(v(a), true, ta).expect(OK)
                    } else {
                        v(a).matmul_t(gv, !ta, false).expect(OK)
                    }
                });
            }
            Op::AddRow(a, b) => {
                emit(a, &|| gv);
                emit(b, &|| gv.sum_rows());
            }
            Op::Broadcast(a) => emit(a, &|| gv.sum()),
            Op::SumAll(a) => emit(a, &|| {
                let s = self.shape_of(a);
                v(self.broadcast_id(g, s))
            }),
            Op::SumRows(a) => emit(a, &|| gv.repeat_rows(self.shape_of(a).rows)),
            Op::RepeatRows(a) => emit(a, &|| gv.sum_rows()),
            Op::SumCols(a) => emit(a, &|| gv.repeat_cols(self.shape_of(a).cols)),
            Op::RepeatCols(a) => emit(a, &|| gv.sum_cols()),
            Op::Concat(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape_of(p).cols;
                    let start = offset;
                    emit(p, &|| gv.slice_cols(start, start + w));
                    offset += w;
                }
            }
            Op::Slice(a, start, end) => emit(a, &|| {
                let s = self.shape_of(a);
                let mut pieces = Vec::with_capacity(3);
                if start > 0 {
                    pieces.push(self.constant(Tensor::zeros(s.rows, start)));
                }
                pieces.push(gv);
                if end < s.cols {
                    pieces.push(self.constant(Tensor::zeros(s.rows, s.cols - end)));
                }
                if pieces.len() == 1 {
                    gv
                } else {
                    self.concat(&pieces).expect(OK)
                }
            }),
            Op::LeakyRelu(a, slope) => emit(a, &|| {
                let mask = self.nodes.borrow()[a]
                    .value
                    .map(|x| if x >= 0.0 { 1.0 } else { slope });
                gv.mul(self.constant(mask)).expect(OK)
            }),
            Op::Square(a) => emit(a, &|| gv.mul(v(a)).expect(OK).scale(2.0)),
            Op::RowNorm(a) => emit(a, &|| {
                let cols = self.shape_of(a).cols;
                gv.safe_div(v(own))
                    .expect(OK)
                    .repeat_cols(cols)
                    .mul(v(a))
                    .expect(OK)
            }),
            Op::Clamp(a, lo, hi) => emit(a, &|| {
                let mask = self.nodes.borrow()[a]
                    .value
                    .map(|x| if (lo..=hi).contains(&x) { 1.0 } else { 0.0 });
                gv.mul(self.constant(mask)).expect(OK)
            }),
            Op::HuberElem(a, delta) => {
                emit(a, &|| gv.mul(v(a).clamp(-delta, delta)).expect(OK))
            }
        }
        out
    }
}

fn parents(op: &Op) -> Vec<Id> {
    match *op {
        Op::Leaf => vec![],
        Op::Add(a, b)
        | Op::Sub(a, b)
        | Op::Mul(a, b)
        | Op::SafeDiv(a, b)
        | Op::AddRow(a, b)
        | Op::Matmul { a, b, .. } => vec![a, b],
        Op::Scale(a, _)
        | Op::Broadcast(a)
        | Op::SumAll(a)
        | Op::SumRows(a)
        | Op::RepeatRows(a)
        | Op::SumCols(a)
        | Op::RepeatCols(a)
        | Op::Slice(a, _, _)
        | Op::LeakyRelu(a, _)
        | Op::Square(a)
        | Op::RowNorm(a)
        | Op::Clamp(a, _, _)
        | Op::HuberElem(a, _) => vec![a],
        Op::Concat(ref parts) => parts.clone(),
    }
}

impl<'g> Var<'g> {
    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn shape(&self) -> Shape {
        self.graph.shape_of(self.id)
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.requires(self.id)
    }

    pub fn value(&self) -> Tensor {
        self.graph.nodes.borrow()[self.id].value.clone()
    }

    /// Value of a `1 x 1` node.
    pub fn item(&self) -> Result<f64, AutodiffError> {
        self.graph.nodes.borrow()[self.id].value.item()
    }

    /// A constant copy: downstream gradients stop here.
    pub fn detach(&self) -> Var<'g> {
        self.graph.constant(self.value())
    }

    pub fn add(&self, other: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        self.graph
            .elementwise(self.id, other.id, "add", Op::Add, |a, b| a + b)
    }

    pub fn sub(&self, other: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        self.graph
            .elementwise(self.id, other.id, "sub", Op::Sub, |a, b| a - b)
    }

    /// Elementwise product.
    pub fn mul(&self, other: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        self.graph
            .elementwise(self.id, other.id, "mul", Op::Mul, |a, b| a * b)
    }

    /// Elementwise quotient, 0 where the divisor is 0.
    pub fn safe_div(&self, other: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        self.graph
            .elementwise(self.id, other.id, "div", Op::SafeDiv, |a, b| {
                if b == 0.0 {
                    0.0
                } else {
                    a / b
                }
            })
    }

    pub fn scale(&self, c: f64) -> Var<'g> {
        self.graph
            .unary(self.id, Op::Scale(self.id, c), |t| t.map(|x| c * x))
    }

    pub fn neg(&self) -> Var<'g> {
        self.scale(-1.0)
    }

    pub fn matmul(&self, other: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        self.matmul_t(other, false, false)
    }

    /// `op(self) * op(other)`, `op` being an optional transpose.
    pub fn matmul_t(&self, other: Var<'g>, ta: bool, tb: bool) -> Result<Var<'g>, AutodiffError> {
        let (a, b) = (self.id, other.id);
        self.graph
            .binary(a, b, Op::Matmul { a, b, ta, tb }, |x, y| x.matmul_t(y, ta, tb))
    }

    /// Adds a `1 x cols` row to every row (layer bias).
    pub fn add_row(&self, row: Var<'g>) -> Result<Var<'g>, AutodiffError> {
        let (s, r) = (self.shape(), row.shape());
        if r.rows != 1 || r.cols != s.cols {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_row",
                left: s,
                right: r,
            });
        }
        self.graph
            .binary(self.id, row.id, Op::AddRow(self.id, row.id), |x, b| {
                let mut out = x.clone();
                let c = s.cols;
                for (i, v) in out.data_mut().iter_mut().enumerate() {
                    *v += b.data()[i % c];
                }
                Ok(out)
            })
    }

    /// Sum of all entries, as a scalar.
    pub fn sum(&self) -> Var<'g> {
        self.graph
            .unary(self.id, Op::SumAll(self.id), |t| Tensor::scalar(t.sum()))
    }

    /// Mean of all entries, as a scalar.
    pub fn mean(&self) -> Var<'g> {
        let n = self.shape().len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Column sums, `1 x cols`.
    pub fn sum_rows(&self) -> Var<'g> {
        self.graph.unary(self.id, Op::SumRows(self.id), |t| {
            let mut out = vec![0.0; t.cols()];
            for r in 0..t.rows() {
                for (o, x) in out.iter_mut().zip(t.row_slice(r)) {
                    *o += x;
                }
            }
            Tensor::row(&out)
        })
    }

    /// Mean over the batch (row) axis, `1 x cols`.
    pub fn mean_rows(&self) -> Var<'g> {
        let n = self.shape().rows as f64;
        self.sum_rows().scale(1.0 / n)
    }

    pub fn repeat_rows(&self, n: usize) -> Var<'g> {
        self.graph.unary(self.id, Op::RepeatRows(self.id), |t| {
            let mut data = Vec::with_capacity(n * t.len());
            for _ in 0..n {
                data.extend_from_slice(t.data());
            }
            Tensor::new(n, t.cols(), data).expect("repeat of a row")
        })
    }

    /// Row sums, `rows x 1`.
    pub fn sum_cols(&self) -> Var<'g> {
        self.graph.unary(self.id, Op::SumCols(self.id), |t| {
            let sums: Vec<f64> = (0..t.rows()).map(|r| t.row_slice(r).iter().sum()).collect();
            Tensor::column(&sums)
        })
    }

    pub fn repeat_cols(&self, n: usize) -> Var<'g> {
        self.graph.unary(self.id, Op::RepeatCols(self.id), |t| {
            let mut data = Vec::with_capacity(n * t.len());
            for r in 0..t.rows() {
                let x = t.get(r, 0);
                data.extend(std::iter::repeat_n(x, n));
            }
            Tensor::new(t.rows(), n, data).expect("repeat of a column")
        })
    }

    pub fn slice_cols(&self, start: usize, end: usize) -> Var<'g> {
        assert!(
            start <= end && end <= self.shape().cols,
            "slice {start}..{end} out of range for {}",
            self.shape()
        );
        self.graph.unary(self.id, Op::Slice(self.id, start, end), |t| {
            t.slice_cols(start, end)
        })
    }

    /// Leaky ReLU; the derivative at exactly 0 is taken as 1.
    pub fn leaky_relu(&self, slope: f64) -> Var<'g> {
        self.graph
            .unary(self.id, Op::LeakyRelu(self.id, slope), |t| {
                t.map(|x| if x >= 0.0 { x } else { slope * x })
            })
    }

    pub fn relu(&self) -> Var<'g> {
        self.leaky_relu(0.0)
    }

    pub fn square(&self) -> Var<'g> {
        self.graph
            .unary(self.id, Op::Square(self.id), |t| t.map(|x| x * x))
    }

    /// Euclidean norm of each row, `rows x 1`. The gradient at a zero row
    /// is taken as zero.
    pub fn row_norm(&self) -> Var<'g> {
        self.graph.unary(self.id, Op::RowNorm(self.id), |t| {
            let norms: Vec<f64> = (0..t.rows())
                .map(|r| t.row_slice(r).iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            Tensor::column(&norms)
        })
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'g> {
        self.graph
            .unary(self.id, Op::Clamp(self.id, lo, hi), |t| t.map(|x| x.clamp(lo, hi)))
    }

    /// Mean Huber loss between `self` and `target`: quadratic for residuals
    /// up to `delta`, linear beyond.
    pub fn huber(&self, target: Var<'g>, delta: f64) -> Result<Var<'g>, AutodiffError> {
        if self.shape() != target.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "huber",
                left: self.shape(),
                right: target.shape(),
            });
        }
        let e = self.sub(target)?;
        let elems = self.graph.unary(e.id, Op::HuberElem(e.id, delta), |t| {
            t.map(|x| {
                let a = x.abs();
                if a <= delta {
                    0.5 * x * x
                } else {
                    delta * (a - 0.5 * delta)
                }
            })
        });
        Ok(elems.mean())
    }
}
