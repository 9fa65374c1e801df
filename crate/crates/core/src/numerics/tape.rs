//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every forward op appends a node holding its value; `backward` walks the
//! tape in reverse and accumulates vector-Jacobian products. The tape is
//! consumed by `backward`, so a graph is used for exactly one gradient pass.

use super::gaussian::{kernel, kernel_partials};
use super::params::{Gradients, ParamId, ParamStore};
use super::{NumericsError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRow(Var, Var),
    Softmax(Var),
    Relu(Var),
    Softplus(Var),
    Square(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Sum(Var),
    Mean(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    Transpose(Var),
    Reshape(Var),
    GatherRows(Var, Vec<usize>),
    PairAdd(Var, Var),
    PairMul(Var, Var),
    Gaussian { alpha: Var, beta: Var, mu: Var, log_sigma: Var, dist: Vec<f64>, types: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> NumericsError {
    NumericsError::Shape { op, detail }
}

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

/// `a (m×k) · b (k×n)`, accumulating over `k` in ascending order.
pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
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

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let t = &self.nodes[v.0].value;
        (t.rows(), t.cols())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { op: name });
        }
        let needs_grad = match &op {
            Op::Constant => false,
            Op::Param(_) => true,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::AddRow(a, b)
            | Op::PairAdd(a, b)
            | Op::PairMul(a, b) => self.needs(*a) || self.needs(*b),
            Op::Scale(a, _)
            | Op::Softmax(a)
            | Op::Relu(a)
            | Op::Softplus(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SliceCols(a, _)
            | Op::SliceRows(a, _)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::GatherRows(a, _) => self.needs(*a),
            Op::LayerNorm { x, gamma, beta, .. } => self.needs(*x) || self.needs(*gamma) || self.needs(*beta),
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.iter().any(|v| self.needs(*v)),
            Op::Gaussian { alpha, beta, mu, log_sigma, .. } => {
                self.needs(*alpha) || self.needs(*beta) || self.needs(*mu) || self.needs(*log_sigma)
            }
        };
        self.nodes.push(Node { value, op, needs_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node { value: t, op: Op::Constant, needs_grad: false });
        Var(self.nodes.len() - 1)
    }

    /// Loads a parameter as a differentiable leaf.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node { value: store.tensor(id).clone(), op: Op::Param(id), needs_grad: true });
        Var(self.nodes.len() - 1)
    }

    fn dims(&self, v: Var, op: &'static str) -> Result<(usize, usize), NumericsError> {
        self.value(v).rank2(op)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, k) = self.dims(a, "matmul")?;
        let (k2, n) = self.dims(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m}, {k}] x [{k2}, {n}]")));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), "matmul")
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<(), NumericsError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape())));
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var, NumericsError> {
        self.same_shape(a, b, name)?;
        let (x, y) = (self.value(a), self.value(b));
        let data = x.data().iter().zip(y.data()).map(|(p, q)| f(*p, *q)).collect();
        let t = Tensor::new(x.shape().to_vec(), data)?;
        self.push(t, op, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip_with(a, b, Op::Add(a, b), "add", |p, q| p + q)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip_with(a, b, Op::Sub(a, b), "sub", |p, q| p - q)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.zip_with(a, b, Op::Mul(a, b), "mul", |p, q| p * q)
    }

    fn map(&mut self, a: Var, op: Op, name: &'static str, f: impl Fn(f64) -> f64) -> Result<Var, NumericsError> {
        let x = self.value(a);
        let t = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| f(*v)).collect())?;
        self.push(t, op, name)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, NumericsError> {
        self.map(a, Op::Scale(a, s), "scale", |v| v * s)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, Op::Relu(a), "relu", |v| v.max(0.0))
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, Op::Softplus(a), "softplus", softplus)
    }

    pub fn square(&mut self, a: Var) -> Result<Var, NumericsError> {
        self.map(a, Op::Square(a), "square", |v| v * v)
    }

    /// `x (r×c) + b (1×c)` broadcast over rows.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(x, "add_row")?;
        let (br, bc) = self.dims(b, "add_row")?;
        if br != 1 || bc != c {
            return Err(shape_err("add_row", format!("[{r}, {c}] + [{br}, {bc}]")));
        }
        let bias = self.value(b).data();
        let data = self.value(x).data().chunks(c).flat_map(|row| row.iter().zip(bias).map(|(p, q)| p + q)).collect();
        self.push(Tensor::matrix(r, c, data)?, Op::AddRow(x, b), "add_row")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(a, "softmax")?;
        let mut data = Vec::with_capacity(r * c);
        for row in self.value(a).data().chunks(c) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            data.extend(exps.iter().map(|e| e / z));
        }
        self.push(Tensor::matrix(r, c, data)?, Op::Softmax(a), "softmax")
    }

    /// Row-wise layer normalisation with per-column gain and bias.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(x, "layer_norm")?;
        for p in [gamma, beta] {
            if self.dims(p, "layer_norm")? != (1, c) {
                return Err(shape_err("layer_norm", format!("gain/bias must be [1, {c}]")));
            }
        }
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = Vec::with_capacity(r * c);
        let mut inv_std = Vec::with_capacity(r);
        let mut out = Vec::with_capacity(r * c);
        for row in self.value(x).data().chunks(c) {
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std.push(is);
            for (k, v) in row.iter().enumerate() {
                let h = (v - mean) * is;
                xhat.push(h);
                out.push(h * g[k] + b[k]);
            }
        }
        let t = Tensor::matrix(r, c, out)?;
        self.push(t, Op::LayerNorm { x, gamma, beta, xhat, inv_std }, "layer_norm")
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, NumericsError> {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a), "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, NumericsError> {
        let x = self.value(a);
        if x.numel() == 0 {
            return Err(shape_err("mean", "empty tensor".into()));
        }
        let s = x.data().iter().sum::<f64>() / x.numel() as f64;
        self.push(Tensor::scalar(s), Op::Mean(a), "mean")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let r =
            self.dims(*parts.first().ok_or_else(|| shape_err("concat_cols", "no inputs".into()))?, "concat_cols")?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (pr, pc) = self.dims(*p, "concat_cols")?;
            if pr != r {
                return Err(shape_err("concat_cols", format!("row counts {r} and {pr}")));
            }
            widths.push(pc);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for row in 0..r {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[row * w..(row + 1) * w]);
            }
        }
        self.push(Tensor::matrix(r, total, data)?, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let c =
            self.dims(*parts.first().ok_or_else(|| shape_err("concat_rows", "no inputs".into()))?, "concat_rows")?.1;
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let (pr, pc) = self.dims(*p, "concat_rows")?;
            if pc != c {
                return Err(shape_err("concat_rows", format!("column counts {c} and {pc}")));
            }
            rows += pr;
            data.extend_from_slice(self.value(*p).data());
        }
        self.push(Tensor::matrix(rows, c, data)?, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(a, "slice_cols")?;
        if start + len > c {
            return Err(shape_err("slice_cols", format!("[{start}, {}) of {c} columns", start + len)));
        }
        let data = self.value(a).data().chunks(c).flat_map(|row| row[start..start + len].iter().copied()).collect();
        self.push(Tensor::matrix(r, len, data)?, Op::SliceCols(a, start), "slice_cols")
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(a, "slice_rows")?;
        if start + len > r {
            return Err(shape_err("slice_rows", format!("[{start}, {}) of {r} rows", start + len)));
        }
        let data = self.value(a).data()[start * c..(start + len) * c].to_vec();
        self.push(Tensor::matrix(len, c, data)?, Op::SliceRows(a, start), "slice_rows")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(a, "transpose")?;
        let data = transpose_raw(self.value(a).data(), r, c);
        self.push(Tensor::matrix(c, r, data)?, Op::Transpose(a), "transpose")
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var, NumericsError> {
        if self.value(a).numel() != rows * cols {
            return Err(shape_err("reshape", format!("{:?} to [{rows}, {cols}]", self.value(a).shape())));
        }
        let data = self.value(a).data().to_vec();
        self.push(Tensor::matrix(rows, cols, data)?, Op::Reshape(a), "reshape")
    }

    /// Output row `k` is input row `idx[k]`.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, NumericsError> {
        let (r, c) = self.dims(a, "gather_rows")?;
        if let Some(bad) = idx.iter().find(|&&i| i >= r) {
            return Err(shape_err("gather_rows", format!("row {bad} of {r}")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        self.push(Tensor::matrix(idx.len(), c, data)?, Op::GatherRows(a, idx.to_vec()), "gather_rows")
    }

    fn pair_dims(&self, a: Var, b: Var, op: &'static str) -> Result<(usize, usize, usize), NumericsError> {
        let (m, k) = self.dims(a, op)?;
        let (n, k2) = self.dims(b, op)?;
        if k != k2 {
            return Err(shape_err(op, format!("[{m}, {k}] vs [{n}, {k2}]")));
        }
        Ok((m, n, k))
    }

    /// Row `i*n + j` of the output is `a[i] + b[j]`.
    pub fn pair_add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, n, k) = self.pair_dims(a, b, "pair_add")?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(m * n * k);
        for i in 0..m {
            for j in 0..n {
                data.extend(x[i * k..(i + 1) * k].iter().zip(&y[j * k..(j + 1) * k]).map(|(p, q)| p + q));
            }
        }
        self.push(Tensor::matrix(m * n, k, data)?, Op::PairAdd(a, b), "pair_add")
    }

    /// Row `i*n + j` of the output is `a[i] ⊙ b[j]`.
    pub fn pair_mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, n, k) = self.pair_dims(a, b, "pair_mul")?;
        let (x, y) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(m * n * k);
        for i in 0..m {
            for j in 0..n {
                data.extend(x[i * k..(i + 1) * k].iter().zip(&y[j * k..(j + 1) * k]).map(|(p, q)| p * q));
            }
        }
        self.push(Tensor::matrix(m * n, k, data)?, Op::PairMul(a, b), "pair_mul")
    }

    /// Gaussian kernel bank: row `p`, column `k` is
    /// `G(alpha[t_p] * d_p + beta[t_p], mu[k], exp(log_sigma[k]))`.
    pub fn gaussian(
        &mut self,
        dist: &[f64],
        types: &[usize],
        alpha: Var,
        beta: Var,
        mu: Var,
        log_sigma: Var,
    ) -> Result<Var, NumericsError> {
        if dist.len() != types.len() {
            return Err(shape_err("gaussian", format!("{} distances, {} types", dist.len(), types.len())));
        }
        let (_, n_types) = self.dims(alpha, "gaussian")?;
        if self.dims(beta, "gaussian")? != (1, n_types) {
            return Err(shape_err("gaussian", "alpha and beta differ in shape".into()));
        }
        let (_, c) = self.dims(mu, "gaussian")?;
        if self.dims(log_sigma, "gaussian")? != (1, c) {
            return Err(shape_err("gaussian", "mu and log_sigma differ in shape".into()));
        }
        if let Some(t) = types.iter().find(|&&t| t >= n_types) {
            return Err(shape_err("gaussian", format!("edge type {t} of {n_types}")));
        }
        let (a, b) = (self.value(alpha).data(), self.value(beta).data());
        let (mu_v, ls) = (self.value(mu).data(), self.value(log_sigma).data());
        let sigma: Vec<f64> = ls.iter().map(|v| v.exp()).collect();
        let mut data = Vec::with_capacity(dist.len() * c);
        for (d, &t) in dist.iter().zip(types) {
            let x = a[t] * d + b[t];
            data.extend(mu_v.iter().zip(&sigma).map(|(m, s)| kernel(x, *m, *s)));
        }
        let t = Tensor::matrix(dist.len(), c, data)?;
        self.push(
            t,
            Op::Gaussian { alpha, beta, mu, log_sigma, dist: dist.to_vec(), types: types.to_vec() },
            "gaussian",
        )
    }

    /// Reverse pass from a scalar. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients, NumericsError> {
        let numel = self.value(loss).numel();
        if numel != 1 {
            return Err(NumericsError::NonScalarLoss(self.value(loss).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = Gradients::new();
        if !self.needs(loss) {
            return Ok(out);
        }
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let mut acc = |v: Var, vals: Vec<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.iter_mut().zip(&vals).for_each(|(e, x)| *e += x),
                    slot @ None => *slot = Some(vals),
                }
            };
            let out_shape = (node.value.rows(), node.value.cols());
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.accumulate(*id, node.value.shape(), &g),
                Op::MatMul(a, b) => {
                    let (m, k) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                    let n = out_shape.1;
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    if self.needs(*a) {
                        let bt = transpose_raw(bv, k, n);
                        acc(*a, matmul_raw(&g, &bt, m, n, k));
                    }
                    if self.needs(*b) {
                        let at = transpose_raw(av, m, k);
                        acc(*b, matmul_raw(&at, &g, k, m, n));
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g.iter().map(|v| -v).collect());
                }
                Op::Mul(a, b) => {
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    acc(*a, g.iter().zip(bv).map(|(x, y)| x * y).collect());
                    acc(*b, g.iter().zip(av).map(|(x, y)| x * y).collect());
                }
                Op::Scale(a, s) => acc(*a, g.iter().map(|v| v * s).collect()),
                Op::AddRow(x, b) => {
                    let c = out_shape.1;
                    let mut gb = vec![0.0; c];
                    for row in g.chunks(c) {
                        gb.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                    }
                    acc(*x, g);
                    acc(*b, gb);
                }
                Op::Softmax(a) => {
                    let c = out_shape.1;
                    let y = node.value.data();
                    let mut gx = Vec::with_capacity(g.len());
                    for (yr, gr) in y.chunks(c).zip(g.chunks(c)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        gx.extend(yr.iter().zip(gr).map(|(p, q)| p * (q - dot)));
                    }
                    acc(*a, gx);
                }
                Op::Relu(a) => {
                    let x = self.nodes[a.0].value.data();
                    acc(*a, g.iter().zip(x).map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 }).collect());
                }
                Op::Softplus(a) => {
                    let x = self.nodes[a.0].value.data();
                    acc(*a, g.iter().zip(x).map(|(gv, xv)| gv * sigmoid(*xv)).collect());
                }
                Op::Square(a) => {
                    let x = self.nodes[a.0].value.data();
                    acc(*a, g.iter().zip(x).map(|(gv, xv)| 2.0 * xv * gv).collect());
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let c = out_shape.1;
                    let gam = self.nodes[gamma.0].value.data();
                    let mut gg = vec![0.0; c];
                    let mut gbeta = vec![0.0; c];
                    let mut gx = Vec::with_capacity(g.len());
                    for ((gr, hr), is) in g.chunks(c).zip(xhat.chunks(c)).zip(inv_std) {
                        let dxhat: Vec<f64> = gr.iter().zip(gam).map(|(a, b)| a * b).collect();
                        let s1: f64 = dxhat.iter().sum();
                        let s2: f64 = dxhat.iter().zip(hr).map(|(a, b)| a * b).sum();
                        for k in 0..c {
                            gg[k] += gr[k] * hr[k];
                            gbeta[k] += gr[k];
                            gx.push(is / c as f64 * (c as f64 * dxhat[k] - s1 - hr[k] * s2));
                        }
                    }
                    acc(*x, gx);
                    acc(*gamma, gg);
                    acc(*beta, gbeta);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.numel();
                    acc(*a, vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.nodes[a.0].value.numel();
                    acc(*a, vec![g[0] / n as f64; n]);
                }
                Op::ConcatCols(parts) => {
                    let (r, total) = out_shape;
                    let mut offset = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols();
                        let mut gp = Vec::with_capacity(r * w);
                        for row in 0..r {
                            gp.extend_from_slice(&g[row * total + offset..row * total + offset + w]);
                        }
                        acc(*p, gp);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.nodes[p.0].value.numel();
                        acc(*p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                    let w = out_shape.1;
                    let mut ga = vec![0.0; r * c];
                    for row in 0..r {
                        ga[row * c + start..row * c + start + w].copy_from_slice(&g[row * w..(row + 1) * w]);
                    }
                    acc(*a, ga);
                }
                Op::SliceRows(a, start) => {
                    let src = &self.nodes[a.0].value;
                    let c = src.cols();
                    let mut ga = vec![0.0; src.numel()];
                    ga[start * c..start * c + g.len()].copy_from_slice(&g);
                    acc(*a, ga);
                }
                Op::Transpose(a) => acc(*a, transpose_raw(&g, out_shape.0, out_shape.1)),
                Op::Reshape(a) => acc(*a, g),
                Op::GatherRows(a, idx) => {
                    let src = &self.nodes[a.0].value;
                    let c = src.cols();
                    let mut ga = vec![0.0; src.numel()];
                    for (k, &i) in idx.iter().enumerate() {
                        ga[i * c..(i + 1) * c].iter_mut().zip(&g[k * c..(k + 1) * c]).for_each(|(s, v)| *s += v);
                    }
                    acc(*a, ga);
                }
                Op::PairAdd(a, b) | Op::PairMul(a, b) => {
                    let is_mul = matches!(node.op, Op::PairMul(..));
                    let (m, k) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                    let n = self.nodes[b.0].value.rows();
                    let x = self.nodes[a.0].value.data();
                    let y = self.nodes[b.0].value.data();
                    let mut ga = vec![0.0; m * k];
                    let mut gb = vec![0.0; n * k];
                    for i in 0..m {
                        for j in 0..n {
                            let row = &g[(i * n + j) * k..(i * n + j + 1) * k];
                            for q in 0..k {
                                if is_mul {
                                    ga[i * k + q] += row[q] * y[j * k + q];
                                    gb[j * k + q] += row[q] * x[i * k + q];
                                } else {
                                    ga[i * k + q] += row[q];
                                    gb[j * k + q] += row[q];
                                }
                            }
                        }
                    }
                    acc(*a, ga);
                    acc(*b, gb);
                }
                Op::Gaussian { alpha, beta, mu, log_sigma, dist, types } => {
                    let c = out_shape.1;
                    let av = self.nodes[alpha.0].value.data();
                    let bv = self.nodes[beta.0].value.data();
                    let mu_v = self.nodes[mu.0].value.data();
                    let sigma: Vec<f64> = self.nodes[log_sigma.0].value.data().iter().map(|v| v.exp()).collect();
                    let mut ga = vec![0.0; av.len()];
                    let mut gbeta = vec![0.0; bv.len()];
                    let mut gmu = vec![0.0; c];
                    let mut gls = vec![0.0; c];
                    for (p, (d, &t)) in dist.iter().zip(types).enumerate() {
                        let x = av[t] * d + bv[t];
                        let mut gx = 0.0;
                        for k in 0..c {
                            let gv = g[p * c + k];
                            if gv == 0.0 {
                                continue;
                            }
                            let (dx, dmu, dls) = kernel_partials(x, mu_v[k], sigma[k]);
                            gx += gv * dx;
                            gmu[k] += gv * dmu;
                            gls[k] += gv * dls;
                        }
                        ga[t] += gx * d;
                        gbeta[t] += gx;
                    }
                    acc(*alpha, ga);
                    acc(*beta, gbeta);
                    acc(*mu, gmu);
                    acc(*log_sigma, gls);
                }
            }
        }
        Ok(out)
    }
}
