//! Reverse-mode automatic differentiation over [`Mat`] values.
//!
//! A [`Tape`] records every operation eagerly; [`Tape::backward`] walks it
//! in reverse and accumulates gradients for nodes that need them. Build a
//! fresh tape per loss evaluation.

use crate::mat::{affine, gemm, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Affine(Var, Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Softplus(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Min(Var, Var),
    HCat(Var, Var),
    Cols(Var, usize, usize),
    SumCols(Var),
    Mean(Var),
}

#[derive(Debug)]
struct Node {
    value: Mat,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
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

    fn push(&mut self, value: Mat, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Mat) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = gemm(self.value(a), false, self.value(b), false);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// `x w + b` with the `1 x n` bias broadcast over rows.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let value = affine(self.value(x), self.value(w), self.value(b));
        let rg = self.needs(&[x, w, b]);
        self.push(value, Op::Affine(x, w, b), rg)
    }

    /// Adds a `1 x n` row vector to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Var {
        let value = self.value(x).add_row(self.value(bias));
        let rg = self.needs(&[x, bias]);
        self.push(value, Op::AddRow(x, bias), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let value = self.value(x).map(|v| v * c);
        let rg = self.needs(&[x]);
        self.push(value, Op::Scale(x, c), rg)
    }

    /// Multiplies every entry of `x` by the `1 x 1` variable `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let c = self.value(s).item();
        let value = self.value(x).map(|v| v * c);
        let rg = self.needs(&[x, s]);
        self.push(value, Op::ScaleBy(x, s), rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        let rg = self.needs(&[x]);
        self.push(value, Op::Relu(x), rg)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::tanh);
        let rg = self.needs(&[x]);
        self.push(value, Op::Tanh(x), rg)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).map(f64::exp);
        let rg = self.needs(&[x]);
        self.push(value, Op::Exp(x), rg)
    }

    pub fn softplus(&mut self, x: Var) -> Var {
        let value = self.value(x).map(softplus);
        let rg = self.needs(&[x]);
        self.push(value, Op::Softplus(x), rg)
    }

    pub fn square(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v * v);
        let rg = self.needs(&[x]);
        self.push(value, Op::Square(x), rg)
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(x).map(|v| v.clamp(lo, hi));
        let rg = self.needs(&[x]);
        self.push(value, Op::Clamp(x, lo, hi), rg)
    }

    /// Elementwise minimum; ties route the gradient to `a`.
    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), f64::min);
        let rg = self.needs(&[a, b]);
        self.push(value, Op::Min(a, b), rg)
    }

    pub fn hcat(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).hcat(self.value(b));
        let rg = self.needs(&[a, b]);
        self.push(value, Op::HCat(a, b), rg)
    }

    pub fn cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let value = self.value(x).cols_range(start, end);
        let rg = self.needs(&[x]);
        self.push(value, Op::Cols(x, start, end), rg)
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let data = m.data.chunks_exact(m.cols.max(1)).map(|r| r.iter().sum()).collect::<Vec<f64>>();
        let value = Mat::from_vec(m.rows, 1, if m.cols == 0 { vec![0.0; m.rows] } else { data });
        let rg = self.needs(&[x]);
        self.push(value, Op::SumCols(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let value = Mat::scalar(m.data.iter().sum::<f64>() / m.len() as f64);
        let rg = self.needs(&[x]);
        self.push(value, Op::Mean(x), rg)
    }

    /// Gradients of the scalar `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.value(loss).shape(), (1, 1), "backward needs a scalar loss");
        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return Grads { grads };
        }
        grads[loss.0] = Some(Mat::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, g, &mut grads);
        }
        Grads { grads }
    }

    fn propagate(&self, node: &Node, mut g: Mat, grads: &mut [Option<Mat>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, delta: Mat| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        let tracked = |v: Var| self.nodes[v.0].requires_grad;
        let col_sums = |g: &Mat| {
            let mut sums = Mat::zeros(1, g.cols);
            for row in g.data.chunks_exact(g.cols.max(1)) {
                for (d, r) in sums.data.iter_mut().zip(row) {
                    *d += r;
                }
            }
            sums
        };
        let in_place = |g: &mut Mat, src: &Mat, f: &dyn Fn(f64, f64) -> f64| {
            for (d, &v) in g.data.iter_mut().zip(&src.data) {
                *d = f(*d, v);
            }
        };
        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if tracked(a) {
                    acc(a, gemm(&g, false, val(b), true));
                }
                if tracked(b) {
                    acc(b, gemm(val(a), true, &g, false));
                }
            }
            Op::Affine(x, w, b) => {
                if tracked(w) {
                    acc(w, gemm(val(x), true, &g, false));
                }
                if tracked(b) {
                    acc(b, col_sums(&g));
                }
                if tracked(x) {
                    acc(x, gemm(&g, false, val(w), true));
                }
            }
            Op::AddRow(x, bias) => {
                if tracked(bias) {
                    acc(bias, col_sums(&g));
                }
                acc(x, g);
            }
            Op::Add(a, b) => {
                if tracked(a) && tracked(b) {
                    acc(a, g.clone());
                }
                if tracked(b) {
                    acc(b, g);
                } else {
                    acc(a, g);
                }
            }
            Op::Sub(a, b) => {
                if tracked(a) && tracked(b) {
                    acc(a, g.clone());
                } else if tracked(a) {
                    acc(a, g);
                    return;
                }
                for d in &mut g.data {
                    *d = -*d;
                }
                acc(b, g);
            }
            Op::Mul(a, b) => {
                if tracked(a) {
                    acc(a, g.zip_map(val(b), |x, y| x * y));
                }
                if tracked(b) {
                    in_place(&mut g, val(a), &|d, v| d * v);
                    acc(b, g);
                }
            }
            Op::Scale(x, c) => {
                for d in &mut g.data {
                    *d *= c;
                }
                acc(x, g);
            }
            Op::ScaleBy(x, s) => {
                let c = val(s).item();
                if tracked(s) {
                    let ds = g.data.iter().zip(&val(x).data).map(|(a, b)| a * b).sum();
                    acc(s, Mat::scalar(ds));
                }
                for d in &mut g.data {
                    *d *= c;
                }
                acc(x, g);
            }
            Op::Relu(x) => {
                in_place(&mut g, &node.value, &|d, y| if y > 0.0 { d } else { 0.0 });
                acc(x, g);
            }
            Op::Tanh(x) => {
                in_place(&mut g, &node.value, &|d, t| d * (1.0 - t * t));
                acc(x, g);
            }
            Op::Exp(x) => {
                in_place(&mut g, &node.value, &|d, e| d * e);
                acc(x, g);
            }
            Op::Softplus(x) => {
                in_place(&mut g, val(x), &|d, v| d * sigmoid(v));
                acc(x, g);
            }
            Op::Square(x) => {
                in_place(&mut g, val(x), &|d, v| 2.0 * d * v);
                acc(x, g);
            }
            Op::Clamp(x, lo, hi) => {
                in_place(&mut g, val(x), &|d, v| if (lo..=hi).contains(&v) { d } else { 0.0 });
                acc(x, g);
            }
            Op::Min(a, b) => {
                let (va, vb) = (val(a), val(b));
                if tracked(a) {
                    let mut da = g.clone();
                    for ((d, x), y) in da.data.iter_mut().zip(&va.data).zip(&vb.data) {
                        if x > y {
                            *d = 0.0;
                        }
                    }
                    acc(a, da);
                }
                if tracked(b) {
                    for ((d, x), y) in g.data.iter_mut().zip(&va.data).zip(&vb.data) {
                        if x <= y {
                            *d = 0.0;
                        }
                    }
                    acc(b, g);
                }
            }
            Op::HCat(a, b) => {
                let split = val(a).cols;
                if tracked(a) {
                    acc(a, g.cols_range(0, split));
                }
                if tracked(b) {
                    acc(b, g.cols_range(split, g.cols));
                }
            }
            Op::Cols(x, start, end) => {
                let src = val(x);
                let mut dx = Mat::zeros(src.rows, src.cols);
                for r in 0..src.rows {
                    dx.data[r * src.cols + start..r * src.cols + end].copy_from_slice(g.row(r));
                }
                acc(x, dx);
            }
            Op::SumCols(x) => {
                let src = val(x);
                let mut dx = Mat::zeros(src.rows, src.cols);
                for r in 0..src.rows {
                    dx.data[r * src.cols..(r + 1) * src.cols].fill(g.data[r]);
                }
                acc(x, dx);
            }
            Op::Mean(x) => {
                let src = val(x);
                acc(x, Mat::filled(src.rows, src.cols, g.item() / src.len() as f64));
            }
        }
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Mat>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, zeros of `like`'s shape when nothing flowed into it.
    pub fn take_or_zeros(&mut self, v: Var, rows: usize, cols: usize) -> Mat {
        self.grads[v.0].take().unwrap_or_else(|| Mat::zeros(rows, cols))
    }
}
