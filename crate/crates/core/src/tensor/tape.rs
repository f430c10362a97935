//! Reverse-mode automatic differentiation on a define-by-run tape.
//!
//! A [`Tape`] owns every intermediate value of one forward pass. Primitives
//! append nodes and return opaque [`Var`] handles; [`Tape::backward`] runs one
//! reverse sweep and leaves per-node gradients that callers read back for the
//! parameter leaves they registered. A tape is cheap to build and is discarded
//! after each pass; persistent gradient accumulation across passes lives in
//! [`super::param::GradBuffer`].
//!
//! Numerical conventions:
//! * row-wise softmax subtracts the row maximum before exponentiation;
//! * layer normalization acts over the last (feature) axis, ε inside the
//!   square root;
//! * batch normalization acts per channel over all (element, spatial)
//!   positions of a `[n, c, h, w]` activation;
//! * binary cross-entropy clamps predictions to `[1e-7, 1 − 1e-7]`; the clamp
//!   has zero gradient where it binds;
//! * ReLU takes the zero subgradient at the kink.
//!
//! Shape violations are reported as [`Error::Shape`] — the tape never panics
//! on mismatched public inputs. Ops that require finite inputs (softmax,
//! layer/batch norm, cross-entropy) verify finiteness in debug builds.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// Handle to one node of a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Per-channel batch statistics produced by a training-mode batch norm, used
/// by the owner to fold running statistics outside the tape (the op itself
/// never mutates persistent state).
#[derive(Debug, Clone)]
pub struct BatchStats<R: Real> {
    /// Per-channel mean over (element, spatial) positions.
    pub mean: Vec<R>,
    /// Per-channel biased variance over the same positions.
    pub var: Vec<R>,
    /// Number of positions each channel was averaged over.
    pub count: usize,
}

enum Op<R: Real> {
    Leaf,
    /// C[m,n] = A[m,k]·B[k,n]
    Matmul { a: Var, b: Var },
    /// C[m,n] = A[m,k]·B[n,k]ᵀ
    MatmulNT { a: Var, b: Var },
    Add { a: Var, b: Var },
    /// `[m,n] + row[n]` broadcast over rows.
    AddRow { a: Var, row: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, c: R },
    Sigmoid { a: Var },
    Relu { a: Var },
    SoftmaxRows { a: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Tensor<R>, inv_std: Vec<R> },
    BatchNormTrain { x: Var, gain: Var, bias: Var, xhat: Tensor<R>, inv_std: Vec<R> },
    BatchNormEval { x: Var, gain: Var, bias: Var, mean: Vec<R>, inv_std: Vec<R> },
    /// Sum (or mean) over one axis of a 2-D tensor, keeping the axis as 1.
    SumAxis { a: Var, axis: usize, mean: bool },
    ConcatCols { parts: Vec<Var> },
    SliceCols { a: Var, start: usize },
    Reshape { a: Var },
    GatherRows { a: Var, idx: Vec<usize> },
    /// Valid 2-D convolution, stride 1, single input channel.
    Conv2d { x: Var, filters: Var, bias: Var },
    /// Mean two-term binary cross-entropy against fixed labels.
    BceMean { y: Var, yhat: Vec<R>, labels: Vec<R> },
}

struct Node<R: Real> {
    value: Tensor<R>,
    op: Op<R>,
    needs_grad: bool,
}

/// Define-by-run computation graph.
pub struct Tape<R: Real> {
    nodes: Vec<Node<R>>,
    grads: Vec<Option<Tensor<R>>>,
}

/// Zero-initializes (on first touch) and returns the gradient slot of `v`.
fn slot<'g, R: Real>(
    grads: &'g mut [Option<Tensor<R>>],
    shape: &[usize],
    v: Var,
) -> &'g mut Tensor<R> {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape))
}

impl<R: Real> Default for Tape<R> {
    fn default() -> Self {
        Self::new()
    }
}

impl<R: Real> Tape<R> {
    pub fn new() -> Self {
        Tape { nodes: Vec::with_capacity(64), grads: Vec::new() }
    }

    fn push(&mut self, value: Tensor<R>, op: Op<R>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Value of a node.
    pub fn value(&self, v: Var) -> &Tensor<R> {
        &self.nodes[v.0].value
    }

    /// Gradient of a node after [`Tape::backward`]; `None` if the node was not
    /// reached or does not require gradients.
    pub fn grad(&self, v: Var) -> Option<&Tensor<R>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Registers a differentiable leaf (a model parameter).
    pub fn param(&mut self, value: &Tensor<R>) -> Var {
        self.push(value.clone(), Op::Leaf, true)
    }

    /// Registers a non-differentiable input.
    pub fn constant(&mut self, value: Tensor<R>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    // ── Elementwise and linear-algebra primitives ───────────────────────────

    /// `a @ b` for 2-D operands `[m,k] · [k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows() {
            return Err(Error::shape("matmul", format!("{:?} x {:?}", av.shape(), bv.shape())));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.cols());
        let mut out = Tensor::zeros(&[m, n]);
        mm_nn_acc(av.data(), bv.data(), m, k, n, out.data_mut());
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Matmul { a, b }, needs))
    }

    /// `a @ bᵀ` for 2-D operands `[m,k] · [n,k]ᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.cols() {
            return Err(Error::shape("matmul_nt", format!("{:?} x {:?}ᵀ", av.shape(), bv.shape())));
        }
        let (m, k, n) = (av.rows(), av.cols(), bv.rows());
        let mut out = Tensor::zeros(&[m, n]);
        mm_nt_acc(av.data(), bv.data(), m, k, n, out.data_mut());
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::MatmulNT { a, b }, needs))
    }

    /// Elementwise sum of same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape() != bv.shape() {
            return Err(Error::shape("add", format!("{:?} + {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Add { a, b }, needs))
    }

    /// `[m,n] + row` with `row` of `n` elements, broadcast over rows.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (av, rv) = (&self.nodes[a.0].value, &self.nodes[row.0].value);
        if av.rank() != 2 || rv.len() != av.cols() {
            return Err(Error::shape("add_row", format!("{:?} + {:?}", av.shape(), rv.shape())));
        }
        let n = av.cols();
        let mut out = av.clone();
        for r in out.data_mut().chunks_exact_mut(n) {
            for (o, &b) in r.iter_mut().zip(rv.data()) {
                *o += b;
            }
        }
        let needs = self.needs(a) || self.needs(row);
        Ok(self.push(out, Op::AddRow { a, row }, needs))
    }

    /// Elementwise product of same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if av.shape() != bv.shape() {
            return Err(Error::shape("mul", format!("{:?} * {:?}", av.shape(), bv.shape())));
        }
        let mut out = av.clone();
        for (o, &b) in out.data_mut().iter_mut().zip(bv.data()) {
            *o *= b;
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(out, Op::Mul { a, b }, needs))
    }

    /// Multiplication by a fixed scalar.
    pub fn scale(&mut self, a: Var, c: R) -> Var {
        let mut out = self.nodes[a.0].value.clone();
        out.scale_assign(c);
        let needs = self.needs(a);
        self.push(out, Op::Scale { a, c }, needs)
    }

    /// Numerically stable logistic sigmoid, elementwise.
    pub fn sigmoid(&mut self, a: Var) -> Var {
        let mut out = self.nodes[a.0].value.clone();
        for v in out.data_mut() {
            *v = stable_sigmoid(*v);
        }
        let needs = self.needs(a);
        self.push(out, Op::Sigmoid { a }, needs)
    }

    /// Rectified linear unit, elementwise.
    pub fn relu(&mut self, a: Var) -> Var {
        let mut out = self.nodes[a.0].value.clone();
        for v in out.data_mut() {
            if *v < R::zero() {
                *v = R::zero();
            }
        }
        let needs = self.needs(a);
        self.push(out, Op::Relu { a }, needs)
    }

    /// Row-wise softmax of a 2-D tensor (max subtracted before `exp`).
    /// Requires finite inputs.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.rank() != 2 {
            return Err(Error::shape("softmax_rows", format!("{:?}", av.shape())));
        }
        debug_assert!(av.all_finite(), "softmax_rows requires finite inputs");
        let n = av.cols();
        let mut out = av.clone();
        for row in out.data_mut().chunks_exact_mut(n) {
            let mut mx = row[0];
            for &v in row.iter() {
                if v > mx {
                    mx = v;
                }
            }
            let mut sum = R::zero();
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::SoftmaxRows { a }, needs))
    }

    /// Layer normalization of each row of `x: [m,n]` over the feature axis,
    /// with affine `gain`/`bias` of `n` elements: `g ⊙ (x−μ)/√(σ²+ε) + b`.
    /// Requires finite inputs.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: R) -> Result<Var> {
        let (xv, gv, bv) =
            (&self.nodes[x.0].value, &self.nodes[gain.0].value, &self.nodes[bias.0].value);
        if xv.rank() != 2 || gv.len() != xv.cols() || bv.len() != xv.cols() {
            return Err(Error::shape(
                "layer_norm",
                format!("x {:?}, gain {:?}, bias {:?}", xv.shape(), gv.shape(), bv.shape()),
            ));
        }
        debug_assert!(xv.all_finite(), "layer_norm requires finite inputs");
        let (m, n) = (xv.rows(), xv.cols());
        let nr = R::from_f64(n as f64);
        let mut xhat = Tensor::zeros(&[m, n]);
        let mut inv_std = vec![R::zero(); m];
        let mut out = Tensor::zeros(&[m, n]);
        for i in 0..m {
            let row = xv.row(i);
            let mut mu = R::zero();
            for &v in row {
                mu += v;
            }
            mu /= nr;
            let mut var = R::zero();
            for &v in row {
                let d = v - mu;
                var += d * d;
            }
            var /= nr;
            let inv = (var + eps).sqrt().recip();
            inv_std[i] = inv;
            let xh = &mut xhat.data_mut()[i * n..(i + 1) * n];
            let or = &mut out.data_mut()[i * n..(i + 1) * n];
            for j in 0..n {
                xh[j] = (row[j] - mu) * inv;
                or[j] = gv.data()[j] * xh[j] + bv.data()[j];
            }
        }
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, xhat, inv_std }, needs))
    }

    /// Training-mode batch normalization of `x: [n,c,h,w]` per channel over
    /// all (element, spatial) positions. Returns the normalized activation and
    /// the batch statistics; callers fold the statistics into their running
    /// buffers outside the tape. Requires finite inputs.
    pub fn batch_norm_train(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: R,
    ) -> Result<(Var, BatchStats<R>)> {
        let (xv, gv, bv) =
            (&self.nodes[x.0].value, &self.nodes[gain.0].value, &self.nodes[bias.0].value);
        let shape = xv.shape().to_vec();
        if shape.len() != 4 || gv.len() != shape[1] || bv.len() != shape[1] {
            return Err(Error::shape(
                "batch_norm_train",
                format!("x {:?}, gain {:?}, bias {:?}", shape, gv.shape(), bv.shape()),
            ));
        }
        debug_assert!(xv.all_finite(), "batch_norm requires finite inputs");
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let (spatial, count) = (h * w, n * h * w);
        let cr = R::from_f64(count as f64);

        let mut mean = vec![R::zero(); c];
        let mut var = vec![R::zero(); c];
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * spatial;
                let mut s = R::zero();
                for &v in &xv.data()[base..base + spatial] {
                    s += v;
                }
                mean[ch] += s;
            }
        }
        for m in mean.iter_mut() {
            *m /= cr;
        }
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * spatial;
                let mut s = R::zero();
                for &v in &xv.data()[base..base + spatial] {
                    let d = v - mean[ch];
                    s += d * d;
                }
                var[ch] += s;
            }
        }
        for v in var.iter_mut() {
            *v /= cr;
        }

        let inv_std: Vec<R> = var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
        let mut xhat = Tensor::zeros(&shape);
        let mut out = Tensor::zeros(&shape);
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * spatial;
                let (mu, inv, g, b) = (mean[ch], inv_std[ch], gv.data()[ch], bv.data()[ch]);
                for p in 0..spatial {
                    let xh = (xv.data()[base + p] - mu) * inv;
                    xhat.data_mut()[base + p] = xh;
                    out.data_mut()[base + p] = g * xh + b;
                }
            }
        }
        let stats = BatchStats { mean, var, count };
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        let v = self.push(out, Op::BatchNormTrain { x, gain, bias, xhat, inv_std }, needs);
        Ok((v, stats))
    }

    /// Evaluation-mode batch normalization using fixed running statistics:
    /// position-independent, hence permutation-invariant over set elements.
    pub fn batch_norm_eval(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        running_mean: &[R],
        running_var: &[R],
        eps: R,
    ) -> Result<Var> {
        let (xv, gv, bv) =
            (&self.nodes[x.0].value, &self.nodes[gain.0].value, &self.nodes[bias.0].value);
        let shape = xv.shape().to_vec();
        if shape.len() != 4
            || gv.len() != shape[1]
            || bv.len() != shape[1]
            || running_mean.len() != shape[1]
            || running_var.len() != shape[1]
        {
            return Err(Error::shape(
                "batch_norm_eval",
                format!("x {:?}, {} channels of running stats", shape, running_mean.len()),
            ));
        }
        let (n, c, spatial) = (shape[0], shape[1], shape[2] * shape[3]);
        let inv_std: Vec<R> = running_var.iter().map(|&v| (v + eps).sqrt().recip()).collect();
        let mut out = Tensor::zeros(&shape);
        for i in 0..n {
            for ch in 0..c {
                let base = (i * c + ch) * spatial;
                let (mu, inv, g, b) = (running_mean[ch], inv_std[ch], gv.data()[ch], bv.data()[ch]);
                for p in 0..spatial {
                    out.data_mut()[base + p] = g * ((xv.data()[base + p] - mu) * inv) + b;
                }
            }
        }
        let mean = running_mean.to_vec();
        let needs = self.needs(x) || self.needs(gain) || self.needs(bias);
        Ok(self.push(out, Op::BatchNormEval { x, gain, bias, mean, inv_std }, needs))
    }

    /// Sum over one axis of a 2-D tensor, keeping the reduced axis as size 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, false)
    }

    /// Mean over one axis of a 2-D tensor, keeping the reduced axis as size 1.
    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis(a, axis, true)
    }

    fn reduce_axis(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.rank() != 2 || axis > 1 {
            return Err(Error::shape("sum_axis", format!("{:?} axis {axis}", av.shape())));
        }
        let (m, n) = (av.rows(), av.cols());
        let mut out = if axis == 0 { Tensor::zeros(&[1, n]) } else { Tensor::zeros(&[m, 1]) };
        if axis == 0 {
            for i in 0..m {
                let row = av.row(i);
                for (o, &v) in out.data_mut().iter_mut().zip(row) {
                    *o += v;
                }
            }
            if mean {
                out.scale_assign(R::from_f64(1.0 / m as f64));
            }
        } else {
            for i in 0..m {
                let mut s = R::zero();
                for &v in av.row(i) {
                    s += v;
                }
                out.data_mut()[i] = if mean { s / R::from_f64(n as f64) } else { s };
            }
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::SumAxis { a, axis, mean }, needs))
    }

    /// Concatenates 2-D tensors with equal row counts along the feature axis.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat_cols", "no parts"));
        }
        let m = self.nodes[parts[0].0].value.rows();
        let mut n = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            if pv.rank() != 2 || pv.rows() != m {
                return Err(Error::shape("concat_cols", format!("part {:?}", pv.shape())));
            }
            n += pv.cols();
        }
        let mut out = Tensor::zeros(&[m, n]);
        let mut col = 0;
        for &p in parts {
            let pv = &self.nodes[p.0].value;
            let w = pv.cols();
            for i in 0..m {
                out.data_mut()[i * n + col..i * n + col + w].copy_from_slice(pv.row(i));
            }
            col += w;
        }
        let needs = parts.iter().any(|&p| self.needs(p));
        Ok(self.push(out, Op::ConcatCols { parts: parts.to_vec() }, needs))
    }

    /// Columns `[start, start+width)` of a 2-D tensor.
    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.rank() != 2 || start + width > av.cols() {
            return Err(Error::shape(
                "slice_cols",
                format!("{:?} cols [{start}, {})", av.shape(), start + width),
            ));
        }
        let (m, n) = (av.rows(), av.cols());
        let mut out = Tensor::zeros(&[m, width]);
        for i in 0..m {
            out.data_mut()[i * width..(i + 1) * width]
                .copy_from_slice(&av.data()[i * n + start..i * n + start + width]);
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::SliceCols { a, start }, needs))
    }

    /// Splits a 2-D tensor into `heads` equal column blocks.
    pub fn split_cols(&mut self, a: Var, heads: usize) -> Result<Vec<Var>> {
        let n = self.nodes[a.0].value.cols();
        if heads == 0 || n % heads != 0 {
            return Err(Error::shape("split_cols", format!("{n} cols into {heads} heads")));
        }
        let w = n / heads;
        (0..heads).map(|h| self.slice_cols(a, h * w, w)).collect()
    }

    /// Reinterprets a tensor under a new shape with the same element count.
    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.nodes[a.0].value.clone().reshaped(shape)?;
        let needs = self.needs(a);
        Ok(self.push(out, Op::Reshape { a }, needs))
    }

    /// Gathers rows of a 2-D tensor in the given index order. Duplicate
    /// indices are allowed; their gradients accumulate.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let av = &self.nodes[a.0].value;
        if av.rank() != 2 {
            return Err(Error::shape("gather_rows", format!("{:?}", av.shape())));
        }
        let (m, n) = (av.rows(), av.cols());
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(Error::shape("gather_rows", format!("index {bad} out of {m} rows")));
        }
        let mut out = Tensor::zeros(&[idx.len(), n]);
        for (r, &i) in idx.iter().enumerate() {
            out.data_mut()[r * n..(r + 1) * n].copy_from_slice(av.row(i));
        }
        let needs = self.needs(a);
        Ok(self.push(out, Op::GatherRows { a, idx: idx.to_vec() }, needs))
    }

    /// Valid 2-D convolution of single-channel inputs `x: [n,h,w]` with
    /// `filters: [c,k,k]` and per-channel `bias: [c]`, stride 1, no padding.
    /// Output is `[n, c, h−k+1, w−k+1]`.
    pub fn conv2d(&mut self, x: Var, filters: Var, bias: Var) -> Result<Var> {
        let (xv, fv, bv) =
            (&self.nodes[x.0].value, &self.nodes[filters.0].value, &self.nodes[bias.0].value);
        if xv.rank() != 3 || fv.rank() != 3 || fv.shape()[1] != fv.shape()[2] {
            return Err(Error::shape(
                "conv2d",
                format!("x {:?}, filters {:?}", xv.shape(), fv.shape()),
            ));
        }
        let (n, h, w) = (xv.shape()[0], xv.shape()[1], xv.shape()[2]);
        let (c, k) = (fv.shape()[0], fv.shape()[1]);
        if bv.len() != c || k > h || k > w {
            return Err(Error::shape(
                "conv2d",
                format!("x {:?}, filters {:?}, bias {:?}", xv.shape(), fv.shape(), bv.shape()),
            ));
        }
        let (oh, ow) = (h - k + 1, w - k + 1);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        for i in 0..n {
            let img = &xv.data()[i * h * w..(i + 1) * h * w];
            for ch in 0..c {
                let filt = &fv.data()[ch * k * k..(ch + 1) * k * k];
                let ob = (i * c + ch) * oh * ow;
                let out_img = &mut out.data_mut()[ob..ob + oh * ow];
                for r in 0..oh {
                    for s in 0..ow {
                        let mut acc = bv.data()[ch];
                        for u in 0..k {
                            let xrow = &img[(r + u) * w + s..(r + u) * w + s + k];
                            let frow = &filt[u * k..u * k + k];
                            for (xe, fe) in xrow.iter().zip(frow) {
                                acc = fe.mul_add(*xe, acc);
                            }
                        }
                        out_img[r * ow + s] = acc;
                    }
                }
            }
        }
        let needs = self.needs(x) || self.needs(filters) || self.needs(bias);
        Ok(self.push(out, Op::Conv2d { x, filters, bias }, needs))
    }

    /// Mean two-term binary cross-entropy of predictions `y` (any shape,
    /// flattened) against fixed `labels`, with predictions clamped to
    /// `[1e-7, 1 − 1e-7]` before the logarithms. Output is scalar `[1,1]`.
    pub fn bce_mean(&mut self, y: Var, labels: &[R]) -> Result<Var> {
        let yv = &self.nodes[y.0].value;
        if yv.len() != labels.len() || labels.is_empty() {
            return Err(Error::shape(
                "bce_mean",
                format!("{} predictions vs {} labels", yv.len(), labels.len()),
            ));
        }
        debug_assert!(yv.all_finite(), "bce_mean requires finite predictions");
        let (lo, hi) = (R::from_f64(1e-7), R::from_f64(1.0 - 1e-7));
        let yhat: Vec<R> = yv.data().iter().map(|&v| v.max(lo).min(hi)).collect();
        let mut loss = R::zero();
        for (&yh, &t) in yhat.iter().zip(labels) {
            loss -= t * yh.ln() + (R::one() - t) * (R::one() - yh).ln();
        }
        loss /= R::from_f64(labels.len() as f64);
        let out = Tensor::from_vec(&[1, 1], vec![loss])?;
        let needs = self.needs(y);
        Ok(self.push(out, Op::BceMean { y, yhat, labels: labels.to_vec() }, needs))
    }

    // ── Reverse sweep ────────────────────────────────────────────────────────

    /// Runs one reverse sweep from `loss` (which must hold exactly one
    /// element). Gradients of all reachable nodes that require them are then
    /// available through [`Tape::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be scalar, got {:?}", self.nodes[loss.0].value.shape()),
            ));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        self.grads[loss.0] = Some(Tensor::filled(self.nodes[loss.0].value.shape(), R::one()));

        for i in (0..self.nodes.len()).rev() {
            if self.grads[i].is_none() || !self.nodes[i].needs_grad {
                continue;
            }
            let g = self.grads[i].take().expect("grad present");
            self.accumulate_inputs(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Adds the local-gradient contributions of node `i` (whose upstream
    /// gradient is `g`) into its inputs.
    fn accumulate_inputs(&mut self, i: usize, g: &Tensor<R>) {
        // Node values are read-only during the sweep while gradient slots
        // mutate; the two live in disjoint fields.
        let Tape { nodes, grads } = self;
        let needs = |v: Var| nodes[v.0].needs_grad;

        match &nodes[i].op {
            Op::Leaf => {}
            Op::Matmul { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k, n) = (nodes[a.0].value.rows(), nodes[a.0].value.cols(), nodes[b.0].value.cols());
                if needs(a) {
                    // dA = dC · Bᵀ
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    mm_nt_acc(g.data(), nodes[b.0].value.data(), m, n, k, ga.data_mut());
                }
                if needs(b) {
                    // dB = Aᵀ · dC
                    let gb = slot(grads, nodes[b.0].value.shape(), b);
                    mm_tn_acc(nodes[a.0].value.data(), g.data(), m, k, n, gb.data_mut());
                }
            }
            Op::MatmulNT { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k, n) = (nodes[a.0].value.rows(), nodes[a.0].value.cols(), nodes[b.0].value.rows());
                if needs(a) {
                    // dA = dC · B
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    mm_nn_acc(g.data(), nodes[b.0].value.data(), m, n, k, ga.data_mut());
                }
                if needs(b) {
                    // dB = dCᵀ · A
                    let gb = slot(grads, nodes[b.0].value.shape(), b);
                    mm_tn_acc(g.data(), nodes[a.0].value.data(), m, n, k, gb.data_mut());
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                for v in [a, b] {
                    if needs(v) {
                        slot(grads, nodes[v.0].value.shape(), v).add_assign(g);
                    }
                }
            }
            Op::AddRow { a, row } => {
                let (a, row) = (*a, *row);
                if needs(a) {
                    slot(grads, nodes[a.0].value.shape(), a).add_assign(g);
                }
                if needs(row) {
                    let n = nodes[row.0].value.len();
                    let gr = slot(grads, nodes[row.0].value.shape(), row);
                    for chunk in g.data().chunks_exact(n) {
                        for (o, &v) in gr.data_mut().iter_mut().zip(chunk) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                if needs(a) {
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for ((o, &gv), &bv) in
                        ga.data_mut().iter_mut().zip(g.data()).zip(nodes[b.0].value.data())
                    {
                        *o += gv * bv;
                    }
                }
                if needs(b) {
                    let gb = slot(grads, nodes[b.0].value.shape(), b);
                    for ((o, &gv), &av) in
                        gb.data_mut().iter_mut().zip(g.data()).zip(nodes[a.0].value.data())
                    {
                        *o += gv * av;
                    }
                }
            }
            Op::Scale { a, c } => {
                let (a, c) = (*a, *c);
                if needs(a) {
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for (o, &gv) in ga.data_mut().iter_mut().zip(g.data()) {
                        *o += gv * c;
                    }
                }
            }
            Op::Sigmoid { a } => {
                let a = *a;
                if needs(a) {
                    let y = &nodes[i].value;
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for ((o, &gv), &yv) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        *o += gv * yv * (R::one() - yv);
                    }
                }
            }
            Op::Relu { a } => {
                let a = *a;
                if needs(a) {
                    let y = &nodes[i].value;
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for ((o, &gv), &yv) in ga.data_mut().iter_mut().zip(g.data()).zip(y.data()) {
                        if yv > R::zero() {
                            *o += gv;
                        }
                    }
                }
            }
            Op::SoftmaxRows { a } => {
                let a = *a;
                if needs(a) {
                    let y = &nodes[i].value;
                    let n = y.cols();
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g.data()[r * n..(r + 1) * n];
                        let mut dot = R::zero();
                        for (&gv, &yv) in gr.iter().zip(yr) {
                            dot += gv * yv;
                        }
                        let or = &mut ga.data_mut()[r * n..(r + 1) * n];
                        for j in 0..n {
                            or[j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let (m, n) = (xhat.rows(), xhat.cols());
                let nr = R::from_f64(n as f64);
                if needs(gain) {
                    let gg = slot(grads, nodes[gain.0].value.shape(), gain);
                    for r in 0..m {
                        let (xr, gr) = (xhat.row(r), &g.data()[r * n..(r + 1) * n]);
                        for j in 0..n {
                            gg.data_mut()[j] += gr[j] * xr[j];
                        }
                    }
                }
                if needs(bias) {
                    let gb = slot(grads, nodes[bias.0].value.shape(), bias);
                    for r in 0..m {
                        let gr = &g.data()[r * n..(r + 1) * n];
                        for j in 0..n {
                            gb.data_mut()[j] += gr[j];
                        }
                    }
                }
                if needs(x) {
                    let gv = nodes[gain.0].value.data();
                    let gx = slot(grads, xhat.shape(), x);
                    for r in 0..m {
                        let (xr, gr) = (xhat.row(r), &g.data()[r * n..(r + 1) * n]);
                        // dx̂_j = dy_j ⊙ g_j; remove its row mean and its
                        // projection onto x̂, then scale by 1/σ.
                        let mut mean_dx = R::zero();
                        let mut mean_dx_xh = R::zero();
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            mean_dx += dxh;
                            mean_dx_xh += dxh * xr[j];
                        }
                        mean_dx /= nr;
                        mean_dx_xh /= nr;
                        let or = &mut gx.data_mut()[r * n..(r + 1) * n];
                        for j in 0..n {
                            let dxh = gr[j] * gv[j];
                            or[j] += inv_std[r] * (dxh - mean_dx - xr[j] * mean_dx_xh);
                        }
                    }
                }
            }
            Op::BatchNormTrain { x, gain, bias, xhat, inv_std } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let shape = xhat.shape();
                let (n, c, spatial) = (shape[0], shape[1], shape[2] * shape[3]);
                let count = R::from_f64((n * spatial) as f64);
                // Per-channel reductions of dy and dy⊙x̂.
                let mut sum_dy = vec![R::zero(); c];
                let mut sum_dy_xh = vec![R::zero(); c];
                for i2 in 0..n {
                    for ch in 0..c {
                        let base = (i2 * c + ch) * spatial;
                        for p in 0..spatial {
                            let dy = g.data()[base + p];
                            sum_dy[ch] += dy;
                            sum_dy_xh[ch] += dy * xhat.data()[base + p];
                        }
                    }
                }
                if needs(gain) {
                    let gg = slot(grads, nodes[gain.0].value.shape(), gain);
                    for ch in 0..c {
                        gg.data_mut()[ch] += sum_dy_xh[ch];
                    }
                }
                if needs(bias) {
                    let gb = slot(grads, nodes[bias.0].value.shape(), bias);
                    for ch in 0..c {
                        gb.data_mut()[ch] += sum_dy[ch];
                    }
                }
                if needs(x) {
                    let gv = nodes[gain.0].value.data();
                    let gx = slot(grads, xhat.shape(), x);
                    for i2 in 0..n {
                        for ch in 0..c {
                            let base = (i2 * c + ch) * spatial;
                            let (inv, gch) = (inv_std[ch], gv[ch]);
                            let m_dy = sum_dy[ch] / count;
                            let m_dy_xh = sum_dy_xh[ch] / count;
                            for p in 0..spatial {
                                let dy = g.data()[base + p];
                                let xh = xhat.data()[base + p];
                                gx.data_mut()[base + p] += gch * inv * (dy - m_dy - xh * m_dy_xh);
                            }
                        }
                    }
                }
            }
            Op::BatchNormEval { x, gain, bias, mean, inv_std } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let shape = nodes[x.0].value.shape();
                let (n, c, spatial) = (shape[0], shape[1], shape[2] * shape[3]);
                if needs(gain) || needs(bias) {
                    let mut sum_dy = vec![R::zero(); c];
                    let mut sum_dy_xh = vec![R::zero(); c];
                    let xv = nodes[x.0].value.data();
                    for i2 in 0..n {
                        for ch in 0..c {
                            let base = (i2 * c + ch) * spatial;
                            for p in 0..spatial {
                                let dy = g.data()[base + p];
                                sum_dy[ch] += dy;
                                sum_dy_xh[ch] += dy * (xv[base + p] - mean[ch]) * inv_std[ch];
                            }
                        }
                    }
                    if needs(gain) {
                        let gg = slot(grads, nodes[gain.0].value.shape(), gain);
                        for ch in 0..c {
                            gg.data_mut()[ch] += sum_dy_xh[ch];
                        }
                    }
                    if needs(bias) {
                        let gb = slot(grads, nodes[bias.0].value.shape(), bias);
                        for ch in 0..c {
                            gb.data_mut()[ch] += sum_dy[ch];
                        }
                    }
                }
                if needs(x) {
                    let gv = nodes[gain.0].value.data().to_vec();
                    let gx = slot(grads, nodes[x.0].value.shape(), x);
                    for i2 in 0..n {
                        for ch in 0..c {
                            let base = (i2 * c + ch) * spatial;
                            let s = gv[ch] * inv_std[ch];
                            for p in 0..spatial {
                                gx.data_mut()[base + p] += g.data()[base + p] * s;
                            }
                        }
                    }
                }
            }
            Op::SumAxis { a, axis, mean } => {
                let (a, axis, mean) = (*a, *axis, *mean);
                if needs(a) {
                    let (m, n) = (nodes[a.0].value.rows(), nodes[a.0].value.cols());
                    let scale = if mean {
                        R::from_f64(1.0 / if axis == 0 { m as f64 } else { n as f64 })
                    } else {
                        R::one()
                    };
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    if axis == 0 {
                        for r in 0..m {
                            let or = &mut ga.data_mut()[r * n..(r + 1) * n];
                            for (o, &gv) in or.iter_mut().zip(g.data()) {
                                *o += gv * scale;
                            }
                        }
                    } else {
                        for r in 0..m {
                            let gv = g.data()[r] * scale;
                            for o in &mut ga.data_mut()[r * n..(r + 1) * n] {
                                *o += gv;
                            }
                        }
                    }
                }
            }
            Op::ConcatCols { parts } => {
                let total = nodes[i].value.cols();
                let m = nodes[i].value.rows();
                let mut col = 0;
                for idx in 0..parts.len() {
                    let p = parts[idx];
                    let w = nodes[p.0].value.cols();
                    if needs(p) {
                        let gp = slot(grads, nodes[p.0].value.shape(), p);
                        for r in 0..m {
                            let src = &g.data()[r * total + col..r * total + col + w];
                            let dst = &mut gp.data_mut()[r * w..(r + 1) * w];
                            for (o, &v) in dst.iter_mut().zip(src) {
                                *o += v;
                            }
                        }
                    }
                    col += w;
                }
            }
            Op::SliceCols { a, start } => {
                let (a, start) = (*a, *start);
                if needs(a) {
                    let w = nodes[i].value.cols();
                    let (m, n) = (nodes[a.0].value.rows(), nodes[a.0].value.cols());
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for r in 0..m {
                        let src = &g.data()[r * w..(r + 1) * w];
                        let dst = &mut ga.data_mut()[r * n + start..r * n + start + w];
                        for (o, &v) in dst.iter_mut().zip(src) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Reshape { a } => {
                let a = *a;
                if needs(a) {
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for (o, &v) in ga.data_mut().iter_mut().zip(g.data()) {
                        *o += v;
                    }
                }
            }
            Op::GatherRows { a, idx } => {
                let a = *a;
                if needs(a) {
                    let n = nodes[a.0].value.cols();
                    let ga = slot(grads, nodes[a.0].value.shape(), a);
                    for (r, &src_row) in idx.iter().enumerate() {
                        let src = &g.data()[r * n..(r + 1) * n];
                        let dst = &mut ga.data_mut()[src_row * n..(src_row + 1) * n];
                        for (o, &v) in dst.iter_mut().zip(src) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Conv2d { x, filters, bias } => {
                let (x, filters, bias) = (*x, *filters, *bias);
                let xs = nodes[x.0].value.shape();
                let fs = nodes[filters.0].value.shape();
                let (n, h, w) = (xs[0], xs[1], xs[2]);
                let (c, k) = (fs[0], fs[1]);
                let (oh, ow) = (h - k + 1, w - k + 1);
                if needs(bias) {
                    let gb = slot(grads, nodes[bias.0].value.shape(), bias);
                    for i2 in 0..n {
                        for ch in 0..c {
                            let base = (i2 * c + ch) * oh * ow;
                            let mut s = R::zero();
                            for &v in &g.data()[base..base + oh * ow] {
                                s += v;
                            }
                            gb.data_mut()[ch] += s;
                        }
                    }
                }
                if needs(filters) {
                    let xv = nodes[x.0].value.data();
                    let gf = slot(grads, nodes[filters.0].value.shape(), filters);
                    for i2 in 0..n {
                        let img = &xv[i2 * h * w..(i2 + 1) * h * w];
                        for ch in 0..c {
                            let base = (i2 * c + ch) * oh * ow;
                            let gimg = &g.data()[base..base + oh * ow];
                            let frow = &mut gf.data_mut()[ch * k * k..(ch + 1) * k * k];
                            for r in 0..oh {
                                for s in 0..ow {
                                    let gv = gimg[r * ow + s];
                                    for u in 0..k {
                                        for v in 0..k {
                                            frow[u * k + v] =
                                                gv.mul_add(img[(r + u) * w + s + v], frow[u * k + v]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if needs(x) {
                    let fv = nodes[filters.0].value.data().to_vec();
                    let gx = slot(grads, nodes[x.0].value.shape(), x);
                    for i2 in 0..n {
                        let ximg = &mut gx.data_mut()[i2 * h * w..(i2 + 1) * h * w];
                        for ch in 0..c {
                            let base = (i2 * c + ch) * oh * ow;
                            let gimg = &g.data()[base..base + oh * ow];
                            let filt = &fv[ch * k * k..(ch + 1) * k * k];
                            for r in 0..oh {
                                for s in 0..ow {
                                    let gv = gimg[r * ow + s];
                                    for u in 0..k {
                                        for v in 0..k {
                                            ximg[(r + u) * w + s + v] = gv
                                                .mul_add(filt[u * k + v], ximg[(r + u) * w + s + v]);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Op::BceMean { y, yhat, labels } => {
                let y = *y;
                if needs(y) {
                    let scale = g.data()[0] / R::from_f64(labels.len() as f64);
                    let (lo, hi) = (R::from_f64(1e-7), R::from_f64(1.0 - 1e-7));
                    let yv = nodes[y.0].value.data();
                    let m = labels.len();
                    let mut contrib = vec![R::zero(); m];
                    for j in 0..m {
                        // Zero gradient where the clamp binds.
                        if yv[j] >= lo && yv[j] <= hi {
                            let (yh, t) = (yhat[j], labels[j]);
                            contrib[j] = scale * (yh - t) / (yh * (R::one() - yh));
                        }
                    }
                    let gy = slot(grads, nodes[y.0].value.shape(), y);
                    for (o, c) in gy.data_mut().iter_mut().zip(contrib) {
                        *o += c;
                    }
                }
            }
        }
    }
}

/// Numerically stable logistic sigmoid.
#[inline]
fn stable_sigmoid<R: Real>(x: R) -> R {
    if x >= R::zero() {
        R::one() / (R::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (R::one() + e)
    }
}

// ── Matmul kernels ──────────────────────────────────────────────────────────
//
// Row-major, accumulate-into-output. The i-k-j order keeps the inner loop on
// contiguous memory so it vectorizes; `mul_add` maps to FMA.

/// `out[m,n] += a[m,k] · b[k,n]`
fn mm_nn_acc<R: Real>(a: &[R], b: &[R], m: usize, k: usize, n: usize, out: &mut [R]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (l, &av) in arow.iter().enumerate() {
            let brow = &b[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = av.mul_add(bv, *o);
            }
        }
    }
}

/// `out[m,n] += a[m,k] · b[n,k]ᵀ`
fn mm_nt_acc<R: Real>(a: &[R], b: &[R], m: usize, k: usize, n: usize, out: &mut [R]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = R::zero();
            for (&av, &bv) in arow.iter().zip(brow) {
                acc = av.mul_add(bv, acc);
            }
            *o += acc;
        }
    }
}

/// `out[k,n] += a[m,k]ᵀ · b[m,n]`
fn mm_tn_acc<R: Real>(a: &[R], b: &[R], m: usize, k: usize, n: usize, out: &mut [R]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (l, &av) in arow.iter().enumerate() {
            let orow = &mut out[l * n..(l + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = av.mul_add(bv, *o);
            }
        }
    }
}
