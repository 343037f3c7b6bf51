//! Tape-based reverse-mode automatic differentiation over dense `f64`
//! matrices.
//!
//! Every value on the tape is a 2-D array; scalars are `1×1`. Nodes are
//! appended in evaluation order, so the tape is already topologically
//! sorted and [`Tape::backward`] replays it in reverse. Parameters enter
//! through [`Tape::param`] and their adjoints are written into a
//! [`Gradients`] buffer private to the caller, which lets several tapes run
//! on separate threads and be merged afterwards.

mod gradcheck;
mod params;
pub mod special;

use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};
use thiserror::Error;

pub use gradcheck::check_gradients;
pub use params::{Gradients, ParamId, ParamStore};

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("backward root must be 1x1, got {rows}x{cols}")]
    NonScalarRoot { rows: usize, cols: usize },
    #[error("non-finite value encountered at `{op}` during backward")]
    NonFinite { op: &'static str },
    #[error("`{op}` is undefined at {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("parameter `{0}` holds a non-finite value")]
    NonFiniteParam(String),
    #[error("function value is non-finite at probe of `{param}`[{index}]")]
    NonFiniteProbe { param: String, index: usize },
    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    BadStep(f64),
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    Offset(Var),
    MatMul(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    Exp(Var),
    Ln(Var),
    Square(Var),
    Abs(Var),
    Sigmoid(Var),
    Softplus(Var),
    Tanh(Var),
    Lgamma(Var),
    OneMinusExpNeg(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Reshape(Var),
    SumAll(Var),
    RowSum(Var),
    ExclusiveCumsum(Var),
    Select(Arc<Vec<bool>>, Var, Var),
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Constant => "constant",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Scale(..) => "scale",
            Op::Offset(..) => "offset",
            Op::MatMul(..) => "matmul",
            Op::AddRow(..) => "add_row",
            Op::MulCol(..) => "mul_col",
            Op::Exp(..) => "exp",
            Op::Ln(..) => "ln",
            Op::Square(..) => "square",
            Op::Abs(..) => "abs",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Tanh(..) => "tanh",
            Op::Lgamma(..) => "lgamma",
            Op::OneMinusExpNeg(..) => "one_minus_exp_neg",
            Op::ConcatCols(..) => "concat_cols",
            Op::SliceCols(..) => "slice_cols",
            Op::Reshape(..) => "reshape",
            Op::SumAll(..) => "sum_all",
            Op::RowSum(..) => "row_sum",
            Op::ExclusiveCumsum(..) => "exclusive_cumsum",
            Op::Select(..) => "select",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// A recording of matrix operations for one reverse pass.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops all nodes, keeping the allocation for the next batch.
    pub fn reset(&mut self) {
        self.nodes.clear();
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        let val = self.value(v);
        debug_assert_eq!(val.dim(), (1, 1));
        val[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).mapv(f);
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), x))
    }

    /// Leaf holding a copy of a stored parameter; its adjoint lands in the
    /// gradient buffer slot of `id`.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id), true)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Sub(a, b), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Mul(a, b), ng)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) / self.value(b);
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Div(a, b), ng)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::Scale(a, k), |x| k * x)
    }

    /// `a + k` elementwise.
    pub fn offset(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::Offset(a), |x| x + k)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::MatMul(a, b), ng)
    }

    /// `a[r×c] + row[1×c]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (_, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "add_row: shape mismatch");
        let value = self.value(a) + self.value(row);
        let ng = self.ng(a) || self.ng(row);
        self.push(value, Op::AddRow(a, row), ng)
    }

    /// `a[r×c] * col[r×1]` broadcast over columns.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Var {
        let (r, _) = self.shape(a);
        assert_eq!(self.shape(col), (r, 1), "mul_col: shape mismatch");
        let value = self.value(a) * self.value(col);
        let ng = self.ng(a) || self.ng(col);
        self.push(value, Op::MulCol(a, col), ng)
    }

    /// `exp(min(a, 700))`.
    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), special::exp_guarded)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, Op::Ln(a), f64::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Op::Abs(a), f64::abs)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), special::sigmoid)
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, Op::Softplus(a), special::softplus)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    /// `ln Γ(a)`; non-positive inputs yield NaN and fail the backward pass.
    pub fn lgamma(&mut self, a: Var) -> Var {
        self.unary(a, Op::Lgamma(a), special::lgamma_unchecked)
    }

    /// `1 - exp(-a)` without cancellation for small `a`.
    pub fn one_minus_exp_neg(&mut self, a: Var) -> Var {
        self.unary(a, Op::OneMinusExpNeg(a), |x| -(-x).exp_m1())
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        let ng = parts.iter().any(|&p| self.ng(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), ng)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        let ng = self.ng(a);
        self.push(value, Op::SliceCols(a, start), ng)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let src = self.value(a);
        assert_eq!(src.len(), rows * cols, "reshape: size mismatch");
        let data: Vec<f64> = src.iter().copied().collect();
        let value = Array2::from_shape_vec((rows, cols), data).expect("reshape");
        let ng = self.ng(a);
        self.push(value, Op::Reshape(a), ng)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        let ng = self.ng(a);
        self.push(value, Op::SumAll(a), ng)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Sum over columns: `r×c -> r×1`.
    pub fn row_sum(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ng = self.ng(a);
        self.push(value, Op::RowSum(a), ng)
    }

    /// `out[i, j] = Σ_{k<j} a[i, k]`.
    pub fn exclusive_cumsum(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut value = Array2::zeros(src.raw_dim());
        for (mut out, row) in value.rows_mut().into_iter().zip(src.rows()) {
            let mut acc = 0.0;
            for (o, &x) in out.iter_mut().zip(row.iter()) {
                *o = acc;
                acc += x;
            }
        }
        let ng = self.ng(a);
        self.push(value, Op::ExclusiveCumsum(a), ng)
    }

    /// Row-wise choice: row `i` comes from `a` where `mask[i]`, else `b`.
    pub fn select(&mut self, mask: Arc<Vec<bool>>, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "select: shape mismatch");
        assert_eq!(mask.len(), self.shape(a).0, "select: mask length");
        let mut value = self.value(b).clone();
        for (i, &m) in mask.iter().enumerate() {
            if m {
                value.row_mut(i).assign(&self.value(a).row(i));
            }
        }
        let ng = self.ng(a) || self.ng(b);
        self.push(value, Op::Select(mask, a, b), ng)
    }

    /// Reverse pass from a `1×1` root. Parameter adjoints are added into
    /// `grads`; the tape itself is left intact.
    pub fn backward(&self, root: Var, grads: &mut Gradients) -> Result<(), AutodiffError> {
        let (rows, cols) = self.shape(root);
        if (rows, cols) != (1, 1) {
            return Err(AutodiffError::NonScalarRoot { rows, cols });
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=root.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            if g.iter().any(|x| !x.is_finite()) || node.value.iter().any(|x| !x.is_finite()) {
                return Err(AutodiffError::NonFinite { op: node.op.tag() });
            }
            self.propagate(node, g, &mut adj, grads);
        }
        Ok(())
    }

    fn propagate(
        &self,
        node: &Node,
        g: Array2<f64>,
        adj: &mut [Option<Array2<f64>>],
        grads: &mut Gradients,
    ) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut send = |v: Var, contrib: Array2<f64>| {
            if !self.nodes[v.0].needs_grad {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => *acc += &contrib,
                slot @ None => *slot = Some(contrib),
            }
        };
        let ng = |v: Var| self.nodes[v.0].needs_grad;

        match &node.op {
            Op::Constant => {}
            Op::Param(id) => grads.arrays[id.0] += &g,
            Op::Add(a, b) => {
                if ng(*b) {
                    send(*b, g.clone());
                }
                send(*a, g);
            }
            Op::Sub(a, b) => {
                if ng(*b) {
                    send(*b, -&g);
                }
                send(*a, g);
            }
            Op::Mul(a, b) => {
                if ng(*a) {
                    send(*a, &g * val(*b));
                }
                if ng(*b) {
                    send(*b, &g * val(*a));
                }
            }
            Op::Div(a, b) => {
                let bv = val(*b);
                if ng(*a) {
                    send(*a, &g / bv);
                }
                if ng(*b) {
                    let mut gb = g.clone();
                    Zip::from(&mut gb)
                        .and(&node.value)
                        .and(bv)
                        .for_each(|gb, &out, &b| *gb = -*gb * out / b);
                    send(*b, gb);
                }
            }
            Op::Scale(a, k) => send(*a, g * *k),
            Op::Offset(a) => send(*a, g),
            Op::MatMul(a, b) => {
                if ng(*a) {
                    send(*a, g.dot(&val(*b).t()));
                }
                if ng(*b) {
                    send(*b, val(*a).t().dot(&g));
                }
            }
            Op::AddRow(a, row) => {
                if ng(*row) {
                    send(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                send(*a, g);
            }
            Op::MulCol(a, col) => {
                if ng(*col) {
                    let gc = (&g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    send(*col, gc);
                }
                if ng(*a) {
                    send(*a, &g * val(*col));
                }
            }
            Op::Exp(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(&node.value)
                    .and(val(*a))
                    .for_each(|g, &out, &x| {
                        *g = if x > special::EXP_CLAMP { 0.0 } else { *g * out }
                    });
                send(*a, ga);
            }
            Op::Ln(a) => send(*a, g / val(*a)),
            Op::Square(a) => send(*a, g * val(*a) * 2.0),
            Op::Abs(a) => send(*a, g * &val(*a).mapv(sign)),
            Op::Sigmoid(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(&node.value)
                    .for_each(|g, &s| *g *= s * (1.0 - s));
                send(*a, ga);
            }
            Op::Softplus(a) => {
                let mut ga = g;
                Zip::from(&mut ga).and(val(*a)).for_each(|g, &x| {
                    if x <= special::SOFTPLUS_LINEAR {
                        *g *= special::sigmoid(x);
                    }
                });
                send(*a, ga);
            }
            Op::Tanh(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(&node.value)
                    .for_each(|g, &t| *g *= 1.0 - t * t);
                send(*a, ga);
            }
            Op::Lgamma(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(val(*a))
                    .for_each(|g, &x| *g *= special::digamma(x));
                send(*a, ga);
            }
            Op::OneMinusExpNeg(a) => {
                let mut ga = g;
                Zip::from(&mut ga)
                    .and(val(*a))
                    .for_each(|g, &x| *g *= (-x).exp());
                send(*a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    if ng(p) {
                        send(p, g.slice(s![.., start..start + w]).to_owned());
                    }
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let mut ga = Array2::zeros(val(*a).raw_dim());
                let w = g.ncols();
                ga.slice_mut(s![.., *start..*start + w]).assign(&g);
                send(*a, ga);
            }
            Op::Reshape(a) => {
                let data: Vec<f64> = g.iter().copied().collect();
                let ga = Array2::from_shape_vec(val(*a).raw_dim(), data).expect("reshape");
                send(*a, ga);
            }
            Op::SumAll(a) => {
                let gv = g[[0, 0]];
                send(*a, Array2::from_elem(val(*a).raw_dim(), gv));
            }
            Op::RowSum(a) => {
                let (r, c) = val(*a).dim();
                let ga = Array2::from_shape_fn((r, c), |(i, _)| g[[i, 0]]);
                send(*a, ga);
            }
            Op::ExclusiveCumsum(a) => {
                // ga[i, k] = Σ_{j>k} g[i, j]
                let mut ga = Array2::zeros(g.raw_dim());
                for (mut out, row) in ga.rows_mut().into_iter().zip(g.rows()) {
                    let mut acc = 0.0;
                    for k in (0..row.len()).rev() {
                        out[k] = acc;
                        acc += row[k];
                    }
                }
                send(*a, ga);
            }
            Op::Select(mask, a, b) => {
                if ng(*a) {
                    let mut ga = g.clone();
                    for (i, &m) in mask.iter().enumerate() {
                        if !m {
                            ga.row_mut(i).fill(0.0);
                        }
                    }
                    send(*a, ga);
                }
                if ng(*b) {
                    let mut gb = g;
                    for (i, &m) in mask.iter().enumerate() {
                        if m {
                            gb.row_mut(i).fill(0.0);
                        }
                    }
                    send(*b, gb);
                }
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grad_of_scalar(build: impl Fn(&mut Tape, Var) -> Var, x: f64) -> (f64, f64) {
        let mut store = ParamStore::new();
        let id = store.insert("x", Array2::from_elem((1, 1), x));
        let mut tape = Tape::new();
        let xv = tape.param(&store, id);
        let root = build(&mut tape, xv);
        let mut grads = Gradients::zeros_like(&store);
        tape.backward(root, &mut grads).unwrap();
        (tape.scalar_value(root), grads.get(id)[[0, 0]])
    }

    #[test]
    fn product_rule() {
        let mut store = ParamStore::new();
        let x = store.insert("x", Array2::from_elem((1, 1), 2.0));
        let y = store.insert("y", Array2::from_elem((1, 1), 3.0));
        let mut tape = Tape::new();
        let xv = tape.param(&store, x);
        let yv = tape.param(&store, y);
        let root = tape.mul(xv, yv);
        let mut grads = Gradients::zeros_like(&store);
        tape.backward(root, &mut grads).unwrap();
        assert_eq!(grads.get(x)[[0, 0]], 3.0);
        assert_eq!(grads.get(y)[[0, 0]], 2.0);
    }

    #[test]
    fn sigmoid_at_zero() {
        let (_, g) = grad_of_scalar(|t, x| t.sigmoid(x), 0.0);
        assert_eq!(g, 0.25);
    }

    #[test]
    fn lgamma_derivative_is_digamma() {
        let (_, g) = grad_of_scalar(|t, x| t.lgamma(x), 1.0);
        // central difference of lgamma at 1 with h = 1e-5
        let h = 1e-5;
        let fd = (special::lgamma(1.0 + h).unwrap() - special::lgamma(1.0 - h).unwrap()) / (2.0 * h);
        assert!((g - fd).abs() < 1e-9, "{g} vs {fd}");
        assert!((g + 0.577_215_664_9).abs() < 1e-9);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let store = ParamStore::new();
        let mut tape = Tape::new();
        let c = tape.constant(Array2::zeros((2, 2)));
        let mut grads = Gradients::zeros_like(&store);
        assert!(matches!(
            tape.backward(c, &mut grads),
            Err(AutodiffError::NonScalarRoot { rows: 2, cols: 2 })
        ));
    }

    #[test]
    fn nan_reports_operation() {
        let mut store = ParamStore::new();
        let id = store.insert("x", Array2::from_elem((1, 1), -1.0));
        let mut tape = Tape::new();
        let x = tape.param(&store, id);
        let l = tape.ln(x);
        let root = tape.sum_all(l);
        let mut grads = Gradients::zeros_like(&store);
        let err = tape.backward(root, &mut grads).unwrap_err();
        assert!(matches!(err, AutodiffError::NonFinite { op: "sum_all" | "ln" }), "{err}");
    }

    type Unary = (&'static str, fn(&mut Tape, Var) -> Var, fn(f64) -> f64, (f64, f64));

    #[test]
    fn unary_primitives_match_central_differences() {
        let cases: Vec<Unary> = vec![
            ("exp", |t, x| t.exp(x), |x| x.exp(), (-5.0, 5.0)),
            ("ln", |t, x| t.ln(x), |x| x.ln(), (0.1, 10.0)),
            ("square", |t, x| t.square(x), |x| x * x, (-3.0, 3.0)),
            ("sigmoid", |t, x| t.sigmoid(x), special::sigmoid, (-8.0, 8.0)),
            ("softplus", |t, x| t.softplus(x), special::softplus, (-8.0, 8.0)),
            ("tanh", |t, x| t.tanh(x), f64::tanh, (-3.0, 3.0)),
            ("lgamma", |t, x| t.lgamma(x), special::lgamma_unchecked, (0.2, 50.0)),
            ("1-exp(-x)", |t, x| t.one_minus_exp_neg(x), |x| 1.0 - (-x).exp(), (0.0, 5.0)),
            ("abs", |t, x| t.abs(x), f64::abs, (0.1, 3.0)),
            ("scale", |t, x| t.scale(x, -2.5), |x| -2.5 * x, (-3.0, 3.0)),
            ("offset", |t, x| t.offset(x, 4.0), |x| x + 4.0, (-3.0, 3.0)),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (name, build, f, (lo, hi)) in cases {
            for _ in 0..100 {
                let x = rng.random_range(lo..hi);
                let (_, g) = grad_of_scalar(build, x);
                let h = 1e-6 * x.abs().max(1.0);
                let fd = (f(x + h) - f(x - h)) / (2.0 * h);
                let rel = (g - fd).abs() / (g.abs() + fd.abs() + 1e-12);
                assert!(rel < 1e-6, "{name} at {x}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn binary_and_structural_ops() {
        let mut store = ParamStore::new();
        let a = store.insert("a", array![[0.3, -1.2, 0.7], [1.1, 0.4, -0.5]]);
        let b = store.insert("b", array![[0.9, 0.2, 1.5], [0.6, 1.3, 0.8]]);
        let w = store.insert("w", array![[0.2, -0.4], [0.5, 0.1], [-0.3, 0.7]]);
        let row = store.insert("row", array![[0.1, -0.2]]);
        let build = |tape: &mut Tape, s: &ParamStore| {
            let av = tape.param(s, a);
            let bv = tape.param(s, b);
            let wv = tape.param(s, w);
            let rv = tape.param(s, row);
            let p = tape.mul(av, bv);
            let q = tape.div(p, bv);
            let q = tape.div(q, bv);
            let d = tape.sub(q, av);
            let m = tape.matmul(d, wv);
            let m = tape.add_row(m, rv);
            let rs = tape.row_sum(bv);
            let mc = tape.mul_col(m, rs);
            let cs = tape.exclusive_cumsum(av);
            let cat = tape.concat_cols(&[mc, cs]);
            let sl = tape.slice_cols(cat, 1, 3);
            let rsh = tape.reshape(sl, 3, 2);
            let sq = tape.square(rsh);
            let mask = Arc::new(vec![true, false, true]);
            let alt = tape.scale(rsh, 3.0);
            let sel = tape.select(mask, sq, alt);
            let e = tape.add(sel, sq);
            tape.sum_all(e)
        };
        let mut store = store;
        let err = check_gradients(&mut store, 1e-6, build).unwrap();
        assert!(err < 1e-7, "max rel err {err}");
    }

    #[test]
    fn backward_is_linear_and_repeatable() {
        let mut store = ParamStore::new();
        let x = store.insert("x", array![[0.4, -0.3], [1.2, 0.8]]);
        let run = |a: f64, b: f64, store: &ParamStore| {
            let mut tape = Tape::new();
            let xv = tape.param(store, x);
            let f = tape.tanh(xv);
            let f = tape.sum_all(f);
            let g = tape.square(xv);
            let g = tape.sum_all(g);
            let fa = tape.scale(f, a);
            let gb = tape.scale(g, b);
            let root = tape.add(fa, gb);
            let mut grads = Gradients::zeros_like(store);
            tape.backward(root, &mut grads).unwrap();
            // second replay of the same tape with fresh adjoints
            let mut again = Gradients::zeros_like(store);
            tape.backward(root, &mut again).unwrap();
            assert_eq!(grads, again);
            grads.get(x).clone()
        };
        let gf = run(1.0, 0.0, &store);
        let gg = run(0.0, 1.0, &store);
        let combo = run(2.5, -1.5, &store);
        let expect = &gf * 2.5 - &gg * 1.5;
        for (c, e) in combo.iter().zip(expect.iter()) {
            assert!((c - e).abs() < 1e-14);
        }
    }
}
