//! Tensor-level reverse-mode tape.
//!
//! Every op appends a node holding its result and the indices of its inputs.
//! Nodes are only ever appended, so parents always precede children and the
//! recorded graph is acyclic by construction. `backward` consumes the tape and
//! sweeps it once in reverse order.

use super::{ParamSpec, ParamVector, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param { offset: usize },
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    MulScalarVar(usize, usize),
    MatVec(usize, usize),
    MatMulNt(usize, usize),
    AddRow(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Softplus(usize),
    Ln(usize),
    Abs(usize),
    Clamp(usize, f64, f64),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Sum(usize),
    Reshape(usize),
}

struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// Records a forward computation for one backward pass.
pub struct Tape {
    nodes: Vec<Node>,
    layout: Vec<ParamSpec>,
    param_len: usize,
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

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// `dst += c · src`.
fn axpy(dst: &mut [f64], c: f64, src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Tape {
    /// A tape whose parameter leaves read from `params`.
    pub fn new(params: &ParamVector) -> Self {
        Self {
            nodes: Vec::new(),
            layout: params.layout().to_vec(),
            param_len: params.len(),
        }
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn vals(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.values()
    }

    fn same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape(format!(
                "{op}: {:?} vs {:?}",
                self.shape(a),
                self.shape(b)
            )));
        }
        Ok(())
    }

    /// Records a value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Constant, t, false)
    }

    /// Records parameter block `index` of `params` as a differentiable leaf.
    pub fn param(&mut self, params: &ParamVector, index: usize) -> Result<Var> {
        if params.layout() != self.layout.as_slice() {
            return Err(Error::Layout("tape and parameters disagree".into()));
        }
        let offset = self.layout[index].offset;
        Ok(self.push(Op::Param { offset }, params.tensor(index), true))
    }

    /// Records every parameter block in layout order.
    pub fn params(&mut self, params: &ParamVector) -> Result<Vec<Var>> {
        (0..params.layout().len())
            .map(|i| self.param(params, i))
            .collect()
    }

    fn zip_map(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let values = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(x, y)| f(*x, *y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(b);
        self.push(op, Tensor::from_parts(shape, values), rg)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let values = self.vals(a).iter().map(|x| f(*x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a);
        self.push(op, Tensor::from_parts(shape, values), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_map(a, b, Op::Add(a.0, b.0), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_map(a, b, Op::Sub(a.0, b.0), |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_map(a, b, Op::Mul(a.0, b.0), |x, y| x * y))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "div")?;
        Ok(self.zip_map(a, b, Op::Div(a.0, b.0), |x, y| x / y))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::Scale(a.0, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::AddScalar(a.0), |x| x + c)
    }

    /// Multiplies every entry of `a` by the one-element `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        if !self.value(s).is_scalar() {
            return Err(Error::Shape(format!(
                "mul_scalar: scale has shape {:?}",
                self.shape(s)
            )));
        }
        let c = self.vals(s)[0];
        let values = self.vals(a).iter().map(|x| x * c).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(a) || self.rg(s);
        Ok(self.push(Op::MulScalarVar(a.0, s.0), Tensor::from_parts(shape, values), rg))
    }

    /// `w [m, n] · v [n] -> [m]`.
    pub fn matvec(&mut self, w: Var, v: Var) -> Result<Var> {
        let (m, n) = self.value(w).dims2()?;
        if self.value(v).len() != n {
            return Err(Error::Shape(format!(
                "matvec: [{m}, {n}] · {:?}",
                self.shape(v)
            )));
        }
        let wv = self.vals(w);
        let vv = self.vals(v);
        let out: Vec<f64> = wv
            .chunks_exact(n)
            .map(|row| dot(row, vv))
            .collect();
        let rg = self.rg(w) || self.rg(v);
        Ok(self.push(Op::MatVec(w.0, v.0), Tensor::from_parts(vec![m], out), rg))
    }

    /// `a [m, k] · b[n, k]ᵀ -> [m, n]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (n, k2) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::Shape(format!("matmul_nt: [{m}, {k}] · [{n}, {k2}]ᵀ")));
        }
        let av = self.vals(a);
        let bv = self.vals(b);
        let mut out = Vec::with_capacity(m * n);
        for arow in av.chunks_exact(k) {
            for brow in bv.chunks_exact(k) {
                out.push(dot(arow, brow));
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMulNt(a.0, b.0), Tensor::from_parts(vec![m, n], out), rg))
    }

    /// Adds the vector `b [n]` to every row of `a [m, n]`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2()?;
        if self.value(b).len() != n {
            return Err(Error::Shape(format!(
                "add_row: [{m}, {n}] + {:?}",
                self.shape(b)
            )));
        }
        let bv = self.vals(b);
        let mut out = self.vals(a).to_vec();
        for row in out.chunks_exact_mut(n) {
            add_into(row, bv);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::AddRow(a.0, b.0), Tensor::from_parts(vec![m, n], out), rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a.0), f64::tanh)
    }

    /// `ln(1 + eˣ)`, a smooth nonnegative map.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.map(a, Op::Softplus(a.0), softplus)
    }

    /// Natural log. Inputs must be positive.
    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if self.vals(a).iter().any(|&x| x <= 0.0) {
            return Err(Error::NonFinite("ln of a non-positive value"));
        }
        Ok(self.map(a, Op::Ln(a.0), f64::ln))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.map(a, Op::Abs(a.0), f64::abs)
    }

    /// Clamps to `[lo, hi]`; the gradient is zero wherever the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.map(a, Op::Clamp(a.0, lo, hi), |x| x.clamp(lo, hi))
    }

    /// Flattens and joins the inputs into one vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of nothing".into()));
        }
        let mut out = Vec::with_capacity(parts.iter().map(|p| self.value(*p).len()).sum());
        for p in parts {
            out.extend_from_slice(self.vals(*p));
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        let n = out.len();
        Ok(self.push(
            Op::Concat(parts.iter().map(|p| p.0).collect()),
            Tensor::from_parts(vec![n], out),
            rg,
        ))
    }

    /// Contiguous range `[start, start + len)` of the flattened input.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        if len == 0 || start + len > self.value(a).len() {
            return Err(Error::Shape(format!(
                "slice {start}..{} of {} values",
                start + len,
                self.value(a).len()
            )));
        }
        let out = self.vals(a)[start..start + len].to_vec();
        let rg = self.rg(a);
        Ok(self.push(Op::Slice(a.0, start), Tensor::from_parts(vec![len], out), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.vals(a).iter().sum();
        let rg = self.rg(a);
        self.push(Op::Sum(a.0), Tensor::from_parts(vec![1], vec![s]), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(Error::Shape(format!(
                "reshape {:?} -> {shape:?}",
                self.shape(a)
            )));
        }
        let out = self.vals(a).to_vec();
        let rg = self.rg(a);
        Ok(self.push(Op::Reshape(a.0), Tensor::from_parts(shape, out), rg))
    }

    /// `Σ aᵢ bᵢ` as a one-element value.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let p = self.mul(a, b)?;
        Ok(self.sum(p))
    }

    /// Propagates from the scalar `output` to every parameter leaf.
    ///
    /// Returns `∂output/∂θ` laid out like the parameters the tape was built
    /// with. Consumes the tape: one recording, one backward pass.
    pub fn backward(self, output: Var) -> Result<ParamVector> {
        if !self.value(output).is_scalar() {
            return Err(Error::Shape(format!(
                "backward needs a scalar output, got {:?}",
                self.shape(output)
            )));
        }
        let mut param_grad = vec![0.0; self.param_len];
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        grads[output.0] = Some(vec![1.0]);
        let nodes = &self.nodes;

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &nodes[idx];
            let out = node.value.values();
            // Accumulates a contribution into parent `p` when it needs one.
            macro_rules! acc {
                ($p:expr, $f:expr) => {{
                    let p: usize = $p;
                    if nodes[p].requires_grad {
                        let n = nodes[p].value.len();
                        let slot = grads[p].get_or_insert_with(|| vec![0.0; n]);
                        #[allow(clippy::redundant_closure_call)]
                        ($f)(slot);
                    }
                }};
            }
            match &node.op {
                Op::Constant => {}
                Op::Param { offset } => {
                    add_into(&mut param_grad[*offset..*offset + g.len()], &g);
                }
                Op::Add(a, b) => {
                    acc!(*a, |s: &mut Vec<f64>| add_into(s, &g));
                    acc!(*b, |s: &mut Vec<f64>| add_into(s, &g));
                }
                Op::Sub(a, b) => {
                    acc!(*a, |s: &mut Vec<f64>| add_into(s, &g));
                    acc!(*b, |s: &mut Vec<f64>| {
                        for (d, gi) in s.iter_mut().zip(&g) {
                            *d -= gi;
                        }
                    });
                }
                Op::Mul(a, b) => {
                    let av = nodes[*a].value.values();
                    let bv = nodes[*b].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), y) in s.iter_mut().zip(&g).zip(bv) {
                            *d += gi * y;
                        }
                    });
                    acc!(*b, |s: &mut Vec<f64>| {
                        for ((d, gi), x) in s.iter_mut().zip(&g).zip(av) {
                            *d += gi * x;
                        }
                    });
                }
                Op::Div(a, b) => {
                    let bv = nodes[*b].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), y) in s.iter_mut().zip(&g).zip(bv) {
                            *d += gi / y;
                        }
                    });
                    acc!(*b, |s: &mut Vec<f64>| {
                        for (((d, gi), y), q) in s.iter_mut().zip(&g).zip(bv).zip(out) {
                            *d -= gi * q / y;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    acc!(*a, |s: &mut Vec<f64>| {
                        for (d, gi) in s.iter_mut().zip(&g) {
                            *d += gi * c;
                        }
                    });
                }
                Op::AddScalar(a) => {
                    acc!(*a, |s: &mut Vec<f64>| add_into(s, &g));
                }
                Op::MulScalarVar(a, sv) => {
                    let c = nodes[*sv].value.values()[0];
                    let av = nodes[*a].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for (d, gi) in s.iter_mut().zip(&g) {
                            *d += gi * c;
                        }
                    });
                    acc!(*sv, |s: &mut Vec<f64>| {
                        s[0] += g.iter().zip(av).map(|(gi, x)| gi * x).sum::<f64>();
                    });
                }
                Op::MatVec(w, v) => {
                    let wv = nodes[*w].value.values();
                    let vv = nodes[*v].value.values();
                    let n = vv.len();
                    acc!(*w, |s: &mut Vec<f64>| {
                        for (row, gi) in s.chunks_exact_mut(n).zip(&g) {
                            axpy(row, *gi, vv);
                        }
                    });
                    acc!(*v, |s: &mut Vec<f64>| {
                        for (row, gi) in wv.chunks_exact(n).zip(&g) {
                            axpy(s, *gi, row);
                        }
                    });
                }
                Op::MatMulNt(a, b) => {
                    let av = nodes[*a].value.values();
                    let bv = nodes[*b].value.values();
                    let k = *nodes[*a].value.shape().last().unwrap();
                    let n = nodes[*b].value.shape()[0];
                    // da[i, :] += Σ_j g[i, j] b[j, :]
                    acc!(*a, |s: &mut Vec<f64>| {
                        for (srow, grow) in s.chunks_exact_mut(k).zip(g.chunks_exact(n)) {
                            for (gij, brow) in grow.iter().zip(bv.chunks_exact(k)) {
                                axpy(srow, *gij, brow);
                            }
                        }
                    });
                    // db[j, :] += Σ_i g[i, j] a[i, :]
                    acc!(*b, |s: &mut Vec<f64>| {
                        for (grow, arow) in g.chunks_exact(n).zip(av.chunks_exact(k)) {
                            for (gij, srow) in grow.iter().zip(s.chunks_exact_mut(k)) {
                                axpy(srow, *gij, arow);
                            }
                        }
                    });
                }
                Op::AddRow(a, b) => {
                    acc!(*a, |s: &mut Vec<f64>| add_into(s, &g));
                    acc!(*b, |s: &mut Vec<f64>| {
                        let n = s.len();
                        for grow in g.chunks_exact(n) {
                            add_into(s, grow);
                        }
                    });
                }
                Op::Sigmoid(a) => {
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), y) in s.iter_mut().zip(&g).zip(out) {
                            *d += gi * y * (1.0 - y);
                        }
                    });
                }
                Op::Tanh(a) => {
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), y) in s.iter_mut().zip(&g).zip(out) {
                            *d += gi * (1.0 - y * y);
                        }
                    });
                }
                Op::Softplus(a) => {
                    let av = nodes[*a].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), x) in s.iter_mut().zip(&g).zip(av) {
                            *d += gi * sigmoid(*x);
                        }
                    });
                }
                Op::Ln(a) => {
                    let av = nodes[*a].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), x) in s.iter_mut().zip(&g).zip(av) {
                            *d += gi / x;
                        }
                    });
                }
                Op::Abs(a) => {
                    let av = nodes[*a].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), x) in s.iter_mut().zip(&g).zip(av) {
                            *d += gi * x.signum() * f64::from(u8::from(*x != 0.0));
                        }
                    });
                }
                Op::Clamp(a, lo, hi) => {
                    let av = nodes[*a].value.values();
                    acc!(*a, |s: &mut Vec<f64>| {
                        for ((d, gi), x) in s.iter_mut().zip(&g).zip(av) {
                            if *x > *lo && *x < *hi {
                                *d += gi;
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let n = nodes[p].value.len();
                        acc!(p, |s: &mut Vec<f64>| add_into(s, &g[start..start + n]));
                        start += n;
                    }
                }
                Op::Slice(a, start) => {
                    let start = *start;
                    acc!(*a, |s: &mut Vec<f64>| add_into(
                        &mut s[start..start + g.len()],
                        &g
                    ));
                }
                Op::Sum(a) => {
                    let g0 = g[0];
                    acc!(*a, |s: &mut Vec<f64>| {
                        for d in s.iter_mut() {
                            *d += g0;
                        }
                    });
                }
                Op::Reshape(a) => {
                    acc!(*a, |s: &mut Vec<f64>| add_into(s, &g));
                }
            }
        }
        ParamVector::from_parts(self.layout, param_grad)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn one(name: &str, values: Vec<f64>) -> ParamVector {
        let n = values.len();
        ParamVector::zeros_with_layout([(name, vec![n])])
            .with_values(values)
            .unwrap()
    }

    /// Central-difference derivative of a scalar function of the parameters.
    fn numeric(p: &ParamVector, f: &dyn Fn(&ParamVector) -> f64, h: f64) -> Vec<f64> {
        (0..p.len())
            .map(|i| {
                let mut hi = p.clone();
                hi.values_mut()[i] += h;
                let mut lo = p.clone();
                lo.values_mut()[i] -= h;
                (f(&hi) - f(&lo)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn sigmoid_at_zero() {
        let p = one("x", vec![0.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let y = tape.sigmoid(x);
        assert_eq!(tape.value(y).values(), &[0.5]);
    }

    #[test]
    fn identity_matvec() {
        let p = one("v", vec![1.5, -2.0, 3.25]);
        let mut tape = Tape::new(&p);
        let v = tape.param(&p, 0).unwrap();
        let eye = tape.constant(
            Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
        );
        let y = tape.matvec(eye, v).unwrap();
        assert_eq!(tape.value(y).values(), p.values());
    }

    #[test]
    fn tanh_gradient_at_zero_matches_finite_difference() {
        let p = one("x", vec![0.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let y = tape.tanh(x);
        let g = tape.backward(y).unwrap();
        let fd = numeric(&p, &|q| q.values()[0].tanh(), 1e-5);
        assert!((g.values()[0] - 1.0).abs() < 1e-12);
        assert!((fd[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = one("x", vec![0.3, 0.7]);
        let mut tape = Tape::new(&p);
        tape.param(&p, 0).unwrap();
        let c = tape.constant(Tensor::scalar(4.0).unwrap());
        let g = tape.backward(c).unwrap();
        assert_eq!(g.values(), &[0.0, 0.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let p = one("theta", vec![1.0, 2.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let sq = tape.mul(x, x).unwrap();
        let l = tape.sum(sq);
        assert_eq!(tape.backward(l).unwrap().values(), &[2.0, 4.0]);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let p = one("x", vec![1.0, 2.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let y = tape.tanh(x);
        assert!(matches!(tape.backward(y), Err(Error::Shape(_))));
    }

    #[test]
    fn shape_mismatches_are_errors() {
        let p = one("x", vec![1.0, 2.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let c = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]).unwrap());
        assert!(tape.add(x, c).is_err());
        assert!(tape.mul(x, c).is_err());
        assert!(tape.matvec(c, x).is_err());
        assert!(tape.slice(x, 1, 2).is_err());
        assert!(tape.reshape(x, vec![3]).is_err());
        let s = tape.sum(x);
        assert!(tape.mul_scalar(x, s).is_ok());
        assert!(tape.mul_scalar(s, x).is_err());
    }

    #[test]
    fn ln_rejects_non_positive() {
        let p = one("x", vec![0.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        assert!(tape.ln(x).is_err());
    }

    #[test]
    fn clamp_blocks_gradient_outside_bounds() {
        let p = one("x", vec![-2.0, 0.5, 3.0]);
        let mut tape = Tape::new(&p);
        let x = tape.param(&p, 0).unwrap();
        let c = tape.clamp(x, -1.0, 1.0);
        let s = tape.sum(c);
        assert_eq!(tape.value(c).values(), &[-1.0, 0.5, 1.0]);
        assert_eq!(tape.backward(s).unwrap().values(), &[0.0, 1.0, 0.0]);
    }

    /// Exercises every op in one scalar graph.
    fn composite(tape: &mut Tape, p: &ParamVector) -> Var {
        let w = tape.param(p, 0).unwrap();
        let v = tape.param(p, 1).unwrap();
        let w2 = tape.reshape(w, vec![2, 3]).unwrap();
        let mv = tape.matvec(w2, v).unwrap();
        let sg = tape.sigmoid(mv);
        let th = tape.tanh(v);
        let sp = tape.softplus(th);
        let cat = tape.concat(&[sg, sp]).unwrap();
        let sl = tape.slice(cat, 1, 3).unwrap();
        let mm = tape.matmul_nt(w2, w2).unwrap();
        let bias = tape.slice(v, 0, 2).unwrap();
        let ar = tape.add_row(mm, bias).unwrap();
        let s1 = tape.sum(ar);
        let sc = tape.mul_scalar(sl, s1).unwrap();
        let q = tape.div(sc, sp).unwrap();
        let d = tape.sub(q, th).unwrap();
        let e = tape.mul(d, d).unwrap();
        let f = tape.add_scalar(e, 1.0);
        let l = tape.ln(f).unwrap();
        let m = tape.scale(l, 0.7);
        let m = tape.abs(m);
        let cl = tape.clamp(m, -100.0, 100.0);
        let x = tape.add(cl, sp).unwrap();
        tape.sum(x)
    }

    fn composite_value(p: &ParamVector) -> f64 {
        let mut tape = Tape::new(p);
        let out = composite(&mut tape, p);
        tape.value(out).values()[0]
    }

    fn two_block(values: Vec<f64>) -> ParamVector {
        ParamVector::zeros_with_layout([("w", vec![6]), ("v", vec![3])])
            .with_values(values)
            .unwrap()
    }

    proptest! {
        #[test]
        fn every_op_matches_finite_differences(values in prop::collection::vec(-1.0f64..1.0, 9)) {
            let p = two_block(values);
            let mut tape = Tape::new(&p);
            let out = composite(&mut tape, &p);
            let g = tape.backward(out).unwrap();
            let fd = numeric(&p, &composite_value, 1e-5);
            for (a, n) in g.values().iter().zip(&fd) {
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
                prop_assert!(rel < 1e-5, "analytic {a} numeric {n}");
            }
        }

        #[test]
        fn gradient_is_linear_in_the_loss(
            values in prop::collection::vec(-1.0f64..1.0, 9),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let p = two_block(values);
            let grad_of = |ca: f64, cb: f64| {
                let mut tape = Tape::new(&p);
                let l1 = composite(&mut tape, &p);
                let v = tape.param(&p, 1).unwrap();
                let vv = tape.mul(v, v).unwrap();
                let l2 = tape.sum(vv);
                let x = tape.scale(l1, ca);
                let y = tape.scale(l2, cb);
                let s = tape.add(x, y).unwrap();
                tape.backward(s).unwrap()
            };
            let g1 = grad_of(1.0, 0.0);
            let g2 = grad_of(0.0, 1.0);
            let gc = grad_of(a, b);
            for ((x, y), z) in g1.values().iter().zip(g2.values()).zip(gc.values()) {
                prop_assert!((a * x + b * y - z).abs() < 1e-9);
            }
        }

        #[test]
        fn backward_is_bitwise_deterministic(values in prop::collection::vec(-1.0f64..1.0, 9)) {
            let p = two_block(values);
            let run = || {
                let mut tape = Tape::new(&p);
                let out = composite(&mut tape, &p);
                tape.backward(out).unwrap()
            };
            let a = run();
            let b = run();
            prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
