//! Minimal reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] walks the record in reverse and returns gradients for
//! every node; [`Tape::accumulate_into`] then adds the parameter-leaf
//! gradients into the owning [`ParamStore`].

use std::collections::HashMap;

use crate::error::{shape_err, Result};
use crate::numerics::params::{ParamId, ParamStore};
use crate::numerics::tensor::{sigmoid, softmax_unchecked, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param,
    /// `W x` for `W: [r, c]`, `x: [c]`.
    MatVec(Var, Var),
    /// `Wᵀ x` for `W: [r, c]`, `x: [r]`.
    MatTVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// Scalar var times vector var.
    ScaleBy(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    LogClamped(Var, f64),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Row(Var, usize),
    StackRows(Vec<Var>),
    Softmax(Var),
    Pick(Var, usize),
    Sum(Var),
    SumScalars(Vec<Var>),
    ScatterAdd(Var, Vec<usize>),
    PadTo(Var),
    MulConst(Var, Tensor),
    Custom(Vec<Var>, Box<dyn CustomOp>),
}

/// Operation with a hand-written vector-Jacobian product.
pub trait CustomOp: std::fmt::Debug + Send + Sync {
    /// Gradients w.r.t. each input, given the upstream gradient of the output.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, upstream: &Tensor) -> Vec<Tensor>;
    fn clone_box(&self) -> Box<dyn CustomOp>;
}

impl Clone for Box<dyn CustomOp> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_vars: HashMap<ParamId, Var>,
}

/// Per-node gradients from one backward pass.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

fn need(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(shape_err(msg()))
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

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.scalar_value()
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Parameter leaf; repeated calls for the same id return the same var.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.param_vars.get(&id) {
            return *v;
        }
        let v = self.push(store.value(id).clone(), Op::Param);
        self.param_vars.insert(id, v);
        v
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (self.value(w), self.value(x));
        need(wt.shape().len() == 2 && wt.cols() == xt.len(), || {
            format!("matvec {:?} x {:?}", wt.shape(), xt.shape())
        })?;
        let (r, c) = (wt.rows(), wt.cols());
        let xd = xt.data();
        let wd = wt.data();
        let out: Vec<f64> = (0..r)
            .map(|i| dot(&wd[i * c..(i + 1) * c], xd))
            .collect();
        Ok(self.push(Tensor::vector(out), Op::MatVec(w, x)))
    }

    pub fn matvec_t(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (self.value(w), self.value(x));
        need(wt.shape().len() == 2 && wt.rows() == xt.len(), || {
            format!("matvec_t {:?} x {:?}", wt.shape(), xt.shape())
        })?;
        let (r, c) = (wt.rows(), wt.cols());
        let mut out = vec![0.0; c];
        for i in 0..r {
            let xi = xt.data()[i];
            if xi != 0.0 {
                axpy(xi, wt.row(i), &mut out);
            }
        }
        Ok(self.push(Tensor::vector(out), Op::MatTVec(w, x)))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        let (at, bt) = (self.value(a), self.value(b));
        need(at.len() == bt.len(), || {
            format!("{name} {:?} vs {:?}", at.shape(), bt.shape())
        })?;
        Ok(at
            .data()
            .iter()
            .zip(bt.data())
            .map(|(x, y)| f(*x, *y))
            .collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "add", |x, y| x + y)?;
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "sub", |x, y| x - y)?;
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.binary(a, b, "mul", |x, y| x * y)?;
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::from_vec(&shape, out)?, Op::Mul(a, b)))
    }

    /// Sum of any number of same-shaped vars.
    pub fn add_all(&mut self, vars: &[Var]) -> Result<Var> {
        let mut acc = vars[0];
        for v in &vars[1..] {
            acc = self.add(acc, *v)?;
        }
        Ok(acc)
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|x| f(*x)).collect();
        let value = Tensor::from_vec(t.shape(), data).expect("same shape");
        self.push(value, op)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, Op::Scale(a, k), |x| x * k)
    }

    pub fn scale_by(&mut self, s: Var, v: Var) -> Result<Var> {
        need(self.value(s).len() == 1, || "scale_by needs a scalar".into())?;
        let k = self.scalar(s);
        Ok(self.unary(v, Op::ScaleBy(s, v), |x| x * k))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.unary(a, Op::OneMinus(a), |x| 1.0 - x)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    /// `ln(max(x, floor))`; the gradient is zero where the floor is active.
    pub fn log_clamped(&mut self, a: Var, floor: f64) -> Var {
        self.unary(a, Op::LogClamped(a, floor), |x| x.max(floor).ln())
    }

    pub fn concat(&mut self, vars: &[Var]) -> Var {
        let mut data = Vec::new();
        for v in vars {
            data.extend_from_slice(self.value(*v).data());
        }
        self.push(Tensor::vector(data), Op::Concat(vars.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(a);
        need(start + len <= t.len(), || {
            format!("slice {start}+{len} of {}", t.len())
        })?;
        let data = t.data()[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(data), Op::Slice(a, start, len)))
    }

    /// Row `idx` of a matrix var (embedding lookup).
    pub fn row(&mut self, table: Var, idx: usize) -> Result<Var> {
        let t = self.value(table);
        need(t.shape().len() == 2 && idx < t.rows(), || {
            format!("row {idx} of {:?}", t.shape())
        })?;
        let data = t.row(idx).to_vec();
        Ok(self.push(Tensor::vector(data), Op::Row(table, idx)))
    }

    pub fn stack_rows(&mut self, vars: &[Var]) -> Result<Var> {
        need(!vars.is_empty(), || "stack_rows of nothing".into())?;
        let c = self.value(vars[0]).len();
        let mut data = Vec::with_capacity(c * vars.len());
        for v in vars {
            let t = self.value(*v);
            need(t.len() == c, || "stack_rows ragged".into())?;
            data.extend_from_slice(t.data());
        }
        let value = Tensor::matrix(vars.len(), c, data)?;
        Ok(self.push(value, Op::StackRows(vars.to_vec())))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(crate::Error::EmptyDistribution);
        }
        let out = softmax_unchecked(t.data());
        Ok(self.push(Tensor::vector(out), Op::Softmax(a)))
    }

    pub fn pick(&mut self, a: Var, idx: usize) -> Result<Var> {
        let t = self.value(a);
        need(idx < t.len(), || format!("pick {idx} of {}", t.len()))?;
        let v = t.data()[idx];
        Ok(self.push(Tensor::scalar(v), Op::Pick(a, idx)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn sum_scalars(&mut self, vars: &[Var]) -> Var {
        let s = vars.iter().map(|v| self.scalar(*v)).sum();
        self.push(Tensor::scalar(s), Op::SumScalars(vars.to_vec()))
    }

    /// `out[index[i]] += a[i]` into a zero vector of length `out_len`.
    pub fn scatter_add(&mut self, a: Var, index: &[usize], out_len: usize) -> Result<Var> {
        let t = self.value(a);
        need(t.len() == index.len() && index.iter().all(|&i| i < out_len), || {
            "scatter_add index mismatch".into()
        })?;
        let mut out = vec![0.0; out_len];
        for (v, &i) in t.data().iter().zip(index) {
            out[i] += v;
        }
        Ok(self.push(Tensor::vector(out), Op::ScatterAdd(a, index.to_vec())))
    }

    /// Zero-extend a vector to `out_len`.
    pub fn pad_to(&mut self, a: Var, out_len: usize) -> Result<Var> {
        let t = self.value(a);
        need(t.len() <= out_len, || "pad_to shrinks".into())?;
        let mut out = t.data().to_vec();
        out.resize(out_len, 0.0);
        Ok(self.push(Tensor::vector(out), Op::PadTo(a)))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mul_const(&mut self, a: Var, mask: &Tensor) -> Result<Var> {
        let t = self.value(a);
        need(t.len() == mask.len(), || "mask length".into())?;
        let data = t.data().iter().zip(mask.data()).map(|(x, m)| x * m).collect();
        let value = Tensor::from_vec(t.shape(), data)?;
        Ok(self.push(value, Op::MulConst(a, mask.clone())))
    }

    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        self.push(value, Op::Custom(inputs.to_vec(), op))
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let root_shape = self.nodes[root.0].value.shape().to_vec();
        let mut seed = Tensor::zeros(&root_shape);
        seed.fill(1.0);
        grads[root.0] = Some(seed);

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gd = g.data();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatVec(w, x) => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let c = wt.cols();
                {
                    let gw = slot(grads, *w, wt.shape());
                    let gwd = gw.data_mut();
                    for (i, gi) in gd.iter().enumerate() {
                        if *gi != 0.0 {
                            axpy(*gi, xt.data(), &mut gwd[i * c..(i + 1) * c]);
                        }
                    }
                }
                let gx = slot(grads, *x, xt.shape());
                let gxd = gx.data_mut();
                for (i, gi) in gd.iter().enumerate() {
                    if *gi != 0.0 {
                        axpy(*gi, wt.row(i), gxd);
                    }
                }
            }
            Op::MatTVec(w, x) => {
                let wt = self.value(*w);
                let xt = self.value(*x);
                let c = wt.cols();
                {
                    let gw = slot(grads, *w, wt.shape());
                    let gwd = gw.data_mut();
                    for (i, xi) in xt.data().iter().enumerate() {
                        if *xi != 0.0 {
                            axpy(*xi, gd, &mut gwd[i * c..(i + 1) * c]);
                        }
                    }
                }
                let gx = slot(grads, *x, xt.shape());
                for (i, gxi) in gx.data_mut().iter_mut().enumerate() {
                    *gxi += dot(wt.row(i), gd);
                }
            }
            Op::Add(a, b) => {
                add_into(slot(grads, *a, g.shape()), gd);
                add_into(slot(grads, *b, g.shape()), gd);
            }
            Op::Sub(a, b) => {
                add_into(slot(grads, *a, g.shape()), gd);
                let gb = slot(grads, *b, g.shape());
                gb.data_mut().iter_mut().zip(gd).for_each(|(x, y)| *x -= y);
            }
            Op::Mul(a, b) => {
                let (at, bt) = (self.value(*a), self.value(*b));
                let ga = slot(grads, *a, at.shape());
                for ((x, y), b) in ga.data_mut().iter_mut().zip(gd).zip(bt.data()) {
                    *x += y * b;
                }
                let gb = slot(grads, *b, bt.shape());
                for ((x, y), a) in gb.data_mut().iter_mut().zip(gd).zip(at.data()) {
                    *x += y * a;
                }
            }
            Op::Scale(a, k) => {
                let ga = slot(grads, *a, g.shape());
                ga.data_mut().iter_mut().zip(gd).for_each(|(x, y)| *x += k * y);
            }
            Op::ScaleBy(s, v) => {
                let k = self.scalar(*s);
                let vt = self.value(*v);
                let ds: f64 = dot(gd, vt.data());
                slot(grads, *s, &[1]).data_mut()[0] += ds;
                let gv = slot(grads, *v, vt.shape());
                gv.data_mut().iter_mut().zip(gd).for_each(|(x, y)| *x += k * y);
            }
            Op::OneMinus(a) => {
                let ga = slot(grads, *a, g.shape());
                ga.data_mut().iter_mut().zip(gd).for_each(|(x, y)| *x -= y);
            }
            Op::Sigmoid(a) => {
                let out = node.value.data();
                let ga = slot(grads, *a, g.shape());
                for ((x, y), s) in ga.data_mut().iter_mut().zip(gd).zip(out) {
                    *x += y * s * (1.0 - s);
                }
            }
            Op::Tanh(a) => {
                let out = node.value.data();
                let ga = slot(grads, *a, g.shape());
                for ((x, y), t) in ga.data_mut().iter_mut().zip(gd).zip(out) {
                    *x += y * (1.0 - t * t);
                }
            }
            Op::Relu(a) => {
                let inp = self.value(*a).data();
                let ga = slot(grads, *a, g.shape());
                for ((x, y), v) in ga.data_mut().iter_mut().zip(gd).zip(inp) {
                    if *v > 0.0 {
                        *x += y;
                    }
                }
            }
            Op::LogClamped(a, floor) => {
                let inp = self.value(*a).data();
                let ga = slot(grads, *a, g.shape());
                for ((x, y), v) in ga.data_mut().iter_mut().zip(gd).zip(inp) {
                    if *v > *floor {
                        *x += y / v;
                    }
                }
            }
            Op::Concat(vars) => {
                let mut off = 0;
                for v in vars {
                    let t = self.value(*v);
                    let n = t.len();
                    add_into(slot(grads, *v, t.shape()), &gd[off..off + n]);
                    off += n;
                }
            }
            Op::Slice(a, start, len) => {
                let ga = slot(grads, *a, self.value(*a).shape());
                add_into_at(ga, *start, &gd[..*len]);
            }
            Op::Row(table, idx) => {
                let shape = self.value(*table).shape().to_vec();
                let ga = slot(grads, *table, &shape);
                add_into_at(ga, idx * shape[1], gd);
            }
            Op::StackRows(vars) => {
                let c = g.cols();
                for (i, v) in vars.iter().enumerate() {
                    add_into(slot(grads, *v, &[c]), &gd[i * c..(i + 1) * c]);
                }
            }
            Op::Softmax(a) => {
                let p = node.value.data();
                let inner = dot(gd, p);
                let ga = slot(grads, *a, g.shape());
                for ((x, y), pi) in ga.data_mut().iter_mut().zip(gd).zip(p) {
                    *x += pi * (y - inner);
                }
            }
            Op::Pick(a, idx) => {
                let ga = slot(grads, *a, self.value(*a).shape());
                ga.data_mut()[*idx] += gd[0];
            }
            Op::Sum(a) => {
                let ga = slot(grads, *a, self.value(*a).shape());
                ga.data_mut().iter_mut().for_each(|x| *x += gd[0]);
            }
            Op::SumScalars(vars) => {
                for v in vars {
                    slot(grads, *v, &[1]).data_mut()[0] += gd[0];
                }
            }
            Op::ScatterAdd(a, index) => {
                let ga = slot(grads, *a, self.value(*a).shape());
                for (x, &i) in ga.data_mut().iter_mut().zip(index) {
                    *x += gd[i];
                }
            }
            Op::PadTo(a) => {
                let n = self.value(*a).len();
                add_into(slot(grads, *a, self.value(*a).shape()), &gd[..n]);
            }
            Op::MulConst(a, mask) => {
                let ga = slot(grads, *a, g.shape());
                for ((x, y), m) in ga.data_mut().iter_mut().zip(gd).zip(mask.data()) {
                    *x += y * m;
                }
            }
            Op::Custom(inputs, op) => {
                let ins: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                let gs = op.backward(&ins, &node.value, g);
                for (v, gi) in inputs.iter().zip(gs) {
                    add_into(slot(grads, *v, gi.shape()), gi.data());
                }
            }
        }
    }

    /// Add gradients of parameter leaves into `store`'s grad buffers.
    pub fn accumulate_into(&self, grads: &Gradients, store: &mut ParamStore) {
        for (id, var) in &self.param_vars {
            if let Some(g) = grads.get(*var) {
                let dst = &mut store.get_mut(*id).grad;
                dst.data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(x, y)| *x += y);
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, shape: &[usize]) -> &'a mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

fn add_into(dst: &mut Tensor, src: &[f64]) {
    dst.data_mut().iter_mut().zip(src).for_each(|(x, y)| *x += y);
}

fn add_into_at(dst: &mut Tensor, offset: usize, src: &[f64]) {
    dst.data_mut()[offset..offset + src.len()]
        .iter_mut()
        .zip(src)
        .for_each(|(x, y)| *x += y);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += k * xi);
}
