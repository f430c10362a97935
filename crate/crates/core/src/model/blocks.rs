//! Attention building blocks: self/cross attention with residual
//! post-processing, pooling attention, the confidence head, and the
//! per-snapshot front ends. Blocks store parameter *indices* into the owning
//! model's [`ParamSet`]; each forward pass registers the live values on a
//! fresh tape.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::config::Activation;
use crate::real::Real;
use crate::tensor::{BatchStats, ParamSet, Tape, Tensor, Var};
use crate::train::init::{self, Init};

/// Layer/batch-norm epsilon used throughout the model.
pub(crate) const NORM_EPS: f64 = 1e-5;

impl Activation {
    pub(crate) fn apply<R: Real>(self, tape: &mut Tape<R>, v: Var) -> Var {
        match self {
            Activation::Sigmoid => tape.sigmoid(v),
            Activation::Relu => tape.relu(v),
        }
    }
}

pub(crate) fn add_weight<R: Real, G: Rng>(
    params: &mut ParamSet<R>,
    rng: &mut G,
    name: &str,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    scheme: Init,
) -> Result<usize> {
    params.add(name, init::weight(scheme, rng, shape, fan_in, fan_out))?;
    Ok(params.len() - 1)
}

pub(crate) fn add_bias<R: Real, G: Rng>(
    params: &mut ParamSet<R>,
    rng: &mut G,
    name: &str,
    n: usize,
    fan_in: usize,
    scheme: Init,
) -> Result<usize> {
    params.add(name, init::bias(scheme, rng, n, fan_in))?;
    Ok(params.len() - 1)
}

/// Trainable tensor with a fixed (non-random) initial value, e.g. norm gains.
fn add_fixed<R: Real>(params: &mut ParamSet<R>, name: &str, value: Tensor<R>) -> Result<usize> {
    params.add(name, value)?;
    Ok(params.len() - 1)
}

fn add_buffer<R: Real>(params: &mut ParamSet<R>, name: &str, value: Tensor<R>) -> Result<usize> {
    params.add_buffer(name, value)?;
    Ok(params.len() - 1)
}

pub(crate) fn index_of<R: Real>(params: &ParamSet<R>, name: &str) -> Result<usize> {
    params
        .index_of(name)
        .ok_or_else(|| Error::config(format!("checkpoint is missing parameter {name:?}")))
}

/// Registers every trainable parameter as a tape leaf; slot `i` of the result
/// corresponds to parameter `i` (buffers stay `None`).
pub(crate) fn register_params<R: Real>(tape: &mut Tape<R>, params: &ParamSet<R>) -> Vec<Option<Var>> {
    params
        .iter()
        .map(|p| if p.trainable { Some(tape.param(&p.value)) } else { None })
        .collect()
}

pub(crate) fn live<R: Real>(vars: &[Option<Var>], idx: usize) -> Var {
    let _ = std::marker::PhantomData::<R>;
    vars[idx].expect("trainable parameter registered on tape")
}

// ── Attention block (shared by self- and cross-attention) ──────────────────

/// Parameter indices of one attention block: query/key/value maps, the
/// residual feed-forward matrix, and two layer norms.
#[derive(Debug, Clone)]
pub(crate) struct AttentionWeights {
    q: usize,
    k: usize,
    v: usize,
    o: usize,
    ln1_g: usize,
    ln1_b: usize,
    ln2_g: usize,
    ln2_b: usize,
}

impl AttentionWeights {
    pub(crate) fn create<R: Real, G: Rng>(
        params: &mut ParamSet<R>,
        rng: &mut G,
        prefix: &str,
        d_in: usize,
        d_h: usize,
        scheme: Init,
    ) -> Result<Self> {
        let q = add_weight(params, rng, &format!("{prefix}.q"), &[d_h, d_in], d_in, d_h, scheme)?;
        let k = add_weight(params, rng, &format!("{prefix}.k"), &[d_h, d_in], d_in, d_h, scheme)?;
        let v = add_weight(params, rng, &format!("{prefix}.v"), &[d_h, d_in], d_in, d_h, scheme)?;
        let o = add_weight(params, rng, &format!("{prefix}.o"), &[d_h, d_h], d_h, d_h, scheme)?;
        let ln1_g = add_fixed(params, &format!("{prefix}.ln1.g"), Tensor::filled(&[d_h], R::one()))?;
        let ln1_b = add_fixed(params, &format!("{prefix}.ln1.b"), Tensor::zeros(&[d_h]))?;
        let ln2_g = add_fixed(params, &format!("{prefix}.ln2.g"), Tensor::filled(&[d_h], R::one()))?;
        let ln2_b = add_fixed(params, &format!("{prefix}.ln2.b"), Tensor::zeros(&[d_h]))?;
        Ok(AttentionWeights { q, k, v, o, ln1_g, ln1_b, ln2_g, ln2_b })
    }

    pub(crate) fn lookup<R: Real>(params: &ParamSet<R>, prefix: &str) -> Result<Self> {
        Ok(AttentionWeights {
            q: index_of(params, &format!("{prefix}.q"))?,
            k: index_of(params, &format!("{prefix}.k"))?,
            v: index_of(params, &format!("{prefix}.v"))?,
            o: index_of(params, &format!("{prefix}.o"))?,
            ln1_g: index_of(params, &format!("{prefix}.ln1.g"))?,
            ln1_b: index_of(params, &format!("{prefix}.ln1.b"))?,
            ln2_g: index_of(params, &format!("{prefix}.ln2.g"))?,
            ln2_b: index_of(params, &format!("{prefix}.ln2.b"))?,
        })
    }
}

/// Cross-attention of `query` `[a, d_in]` over `keyval` `[b, d_in]` followed
/// by the residual post-processing:
///
/// ```text
/// h^α  = Q·query^α + Σ_β softmax_β[(Q·query^α)·(K·keyval^β)/√d_head] V·keyval^β
/// h′   = LayerNorm₁(h)
/// out  = Sigmoid(LayerNorm₂(h′ + act(O·h′)))
/// ```
///
/// Multi-head attention splits the `d_h` features into `n_heads` blocks with
/// per-head scale `1/√(d_h/n_heads)` and concatenates the head outputs.
/// Self-attention is the `query == keyval` case.
pub(crate) fn attention_block<R: Real>(
    tape: &mut Tape<R>,
    query: Var,
    keyval: Var,
    w: &AttentionWeights,
    vars: &[Option<Var>],
    n_heads: usize,
    act: Activation,
) -> Result<Var> {
    let wq = live::<R>(vars, w.q);
    let wk = live::<R>(vars, w.k);
    let wv = live::<R>(vars, w.v);
    let qx = tape.matmul_nt(query, wq)?;
    let kx = tape.matmul_nt(keyval, wk)?;
    let vx = tape.matmul_nt(keyval, wv)?;

    let d_h = tape.value(qx).cols();
    if d_h % n_heads != 0 {
        return Err(Error::config(format!("d_h = {d_h} not divisible by {n_heads} heads")));
    }
    let d_head = d_h / n_heads;
    let scale = R::from_f64(1.0 / (d_head as f64).sqrt());

    let att = if n_heads == 1 {
        let logits = tape.matmul_nt(qx, kx)?;
        let scaled = tape.scale(logits, scale);
        let a = tape.softmax_rows(scaled)?;
        tape.matmul(a, vx)?
    } else {
        let qh = tape.split_cols(qx, n_heads)?;
        let kh = tape.split_cols(kx, n_heads)?;
        let vh = tape.split_cols(vx, n_heads)?;
        let mut outs = Vec::with_capacity(n_heads);
        for h in 0..n_heads {
            let logits = tape.matmul_nt(qh[h], kh[h])?;
            let scaled = tape.scale(logits, scale);
            let a = tape.softmax_rows(scaled)?;
            outs.push(tape.matmul(a, vh[h])?);
        }
        tape.concat_cols(&outs)?
    };

    let h = tape.add(qx, att)?;
    let eps = R::from_f64(NORM_EPS);
    let h1 = tape.layer_norm(h, live::<R>(vars, w.ln1_g), live::<R>(vars, w.ln1_b), eps)?;
    let ff_pre = tape.matmul_nt(h1, live::<R>(vars, w.o))?;
    let ff = act.apply(tape, ff_pre);
    let h2 = tape.add(h1, ff)?;
    let h3 = tape.layer_norm(h2, live::<R>(vars, w.ln2_g), live::<R>(vars, w.ln2_b), eps)?;
    Ok(tape.sigmoid(h3))
}

// ── Pooling attention and confidence head ───────────────────────────────────

/// Parameter indices of the pooling stage and the confidence head.
#[derive(Debug, Clone)]
pub(crate) struct DecoderWeights {
    seed: usize,
    k: usize,
    v: usize,
    ln1_g: usize,
    ln1_b: usize,
    rff_w: usize,
    ln2_g: usize,
    ln2_b: usize,
    head_w: usize,
    head_b: usize,
}

impl DecoderWeights {
    pub(crate) fn create<R: Real, G: Rng>(
        params: &mut ParamSet<R>,
        rng: &mut G,
        d_h: usize,
        scheme: Init,
    ) -> Result<Self> {
        let seed = add_weight(params, rng, "dec.pab.seed", &[1, d_h], d_h, 1, scheme)?;
        let k = add_weight(params, rng, "dec.pab.k", &[d_h, d_h], d_h, d_h, scheme)?;
        let v = add_weight(params, rng, "dec.pab.v", &[d_h, d_h], d_h, d_h, scheme)?;
        let ln1_g = add_fixed(params, "dec.ln1.g", Tensor::filled(&[d_h], R::one()))?;
        let ln1_b = add_fixed(params, "dec.ln1.b", Tensor::zeros(&[d_h]))?;
        let rff_w = add_weight(params, rng, "dec.rff.w", &[d_h, d_h], d_h, d_h, scheme)?;
        let ln2_g = add_fixed(params, "dec.ln2.g", Tensor::filled(&[d_h], R::one()))?;
        let ln2_b = add_fixed(params, "dec.ln2.b", Tensor::zeros(&[d_h]))?;
        let head_w = add_weight(params, rng, "dec.head.w", &[1, d_h], d_h, 1, scheme)?;
        let head_b = add_bias(params, rng, "dec.head.b", 1, d_h, scheme)?;
        Ok(DecoderWeights { seed, k, v, ln1_g, ln1_b, rff_w, ln2_g, ln2_b, head_w, head_b })
    }

    pub(crate) fn lookup<R: Real>(params: &ParamSet<R>) -> Result<Self> {
        Ok(DecoderWeights {
            seed: index_of(params, "dec.pab.seed")?,
            k: index_of(params, "dec.pab.k")?,
            v: index_of(params, "dec.pab.v")?,
            ln1_g: index_of(params, "dec.ln1.g")?,
            ln1_b: index_of(params, "dec.ln1.b")?,
            rff_w: index_of(params, "dec.rff.w")?,
            ln2_g: index_of(params, "dec.ln2.g")?,
            ln2_b: index_of(params, "dec.ln2.b")?,
            head_w: index_of(params, "dec.head.w")?,
            head_b: index_of(params, "dec.head.b")?,
        })
    }
}

/// Pooling attention over the encoder output `z: [n, d_h]`:
/// score `s′^β = softmax_β[S·(K″z^β)/√d_h]` (single-head, as the pooling
/// equations are written), pooled vector `p = S + Σ_β s′^β V″z^β`.
/// Returns `(pooled [1, d_h], scores [1, n])`.
pub(crate) fn pab_forward<R: Real>(
    tape: &mut Tape<R>,
    z: Var,
    w: &DecoderWeights,
    vars: &[Option<Var>],
) -> Result<(Var, Var)> {
    let s = live::<R>(vars, w.seed);
    let d_h = tape.value(s).cols();
    let kz = tape.matmul_nt(z, live::<R>(vars, w.k))?;
    let logits = tape.matmul_nt(s, kz)?;
    let scaled = tape.scale(logits, R::from_f64(1.0 / (d_h as f64).sqrt()));
    let scores = tape.softmax_rows(scaled)?;
    let vz = tape.matmul_nt(z, live::<R>(vars, w.v))?;
    let weighted = tape.matmul(scores, vz)?;
    let pooled = tape.add(s, weighted)?;
    Ok((pooled, scores))
}

/// Confidence head on the pooled vector:
/// `y = Sigmoid(W·LayerNorm₂[p′ + act(Wr·p′)] + b)` with `p′ = LayerNorm₁(p)`.
pub(crate) fn decoder_head<R: Real>(
    tape: &mut Tape<R>,
    pooled: Var,
    w: &DecoderWeights,
    vars: &[Option<Var>],
    act: Activation,
) -> Result<Var> {
    let eps = R::from_f64(NORM_EPS);
    let p1 = tape.layer_norm(pooled, live::<R>(vars, w.ln1_g), live::<R>(vars, w.ln1_b), eps)?;
    let ff_pre = tape.matmul_nt(p1, live::<R>(vars, w.rff_w))?;
    let ff = act.apply(tape, ff_pre);
    let p2 = tape.add(p1, ff)?;
    let p3 = tape.layer_norm(p2, live::<R>(vars, w.ln2_g), live::<R>(vars, w.ln2_b), eps)?;
    let logit = tape.matmul_nt(p3, live::<R>(vars, w.head_w))?;
    let logit_b = tape.add_row(logit, live::<R>(vars, w.head_b))?;
    Ok(tape.sigmoid(logit_b))
}

// ── Front ends ──────────────────────────────────────────────────────────────

/// Parameter indices of the per-snapshot embedding stage.
#[derive(Debug, Clone)]
pub(crate) enum FrontWeights {
    Conv {
        filters: usize,
        bias: usize,
        bn_gain: usize,
        bn_bias: usize,
        bn_mean: usize,
        bn_var: usize,
    },
    Mlp {
        layers: Vec<(usize, usize)>,
    },
    Flatten,
}

impl FrontWeights {
    pub(crate) fn create<R: Real, G: Rng>(
        params: &mut ParamSet<R>,
        rng: &mut G,
        front: &crate::model::config::FrontEnd,
        grid: (usize, usize),
        scheme: Init,
    ) -> Result<Self> {
        use crate::model::config::FrontEnd;
        match front {
            FrontEnd::Conv { channels, kernel } => {
                let (c, k) = (*channels, *kernel);
                let filters =
                    add_weight(params, rng, "front.conv.filters", &[c, k, k], k * k, c * k * k, scheme)?;
                let bias = add_bias(params, rng, "front.conv.bias", c, k * k, scheme)?;
                let bn_gain =
                    add_fixed(params, "front.bn.gain", Tensor::filled(&[c], R::one()))?;
                let bn_bias = add_fixed(params, "front.bn.bias", Tensor::zeros(&[c]))?;
                let bn_mean = add_buffer(params, "front.bn.running_mean", Tensor::zeros(&[c]))?;
                let bn_var =
                    add_buffer(params, "front.bn.running_var", Tensor::filled(&[c], R::one()))?;
                Ok(FrontWeights::Conv { filters, bias, bn_gain, bn_bias, bn_mean, bn_var })
            }
            FrontEnd::Mlp { widths } => {
                let mut layers = Vec::with_capacity(widths.len());
                let mut d_in = grid.0 * grid.1;
                for (i, &d_out) in widths.iter().enumerate() {
                    let w = add_weight(
                        params,
                        rng,
                        &format!("front.mlp.{i}.w"),
                        &[d_out, d_in],
                        d_in,
                        d_out,
                        scheme,
                    )?;
                    let b = add_bias(params, rng, &format!("front.mlp.{i}.b"), d_out, d_in, scheme)?;
                    layers.push((w, b));
                    d_in = d_out;
                }
                Ok(FrontWeights::Mlp { layers })
            }
            FrontEnd::Flatten => Ok(FrontWeights::Flatten),
        }
    }

    pub(crate) fn lookup<R: Real>(
        params: &ParamSet<R>,
        front: &crate::model::config::FrontEnd,
    ) -> Result<Self> {
        use crate::model::config::FrontEnd;
        match front {
            FrontEnd::Conv { .. } => Ok(FrontWeights::Conv {
                filters: index_of(params, "front.conv.filters")?,
                bias: index_of(params, "front.conv.bias")?,
                bn_gain: index_of(params, "front.bn.gain")?,
                bn_bias: index_of(params, "front.bn.bias")?,
                bn_mean: index_of(params, "front.bn.running_mean")?,
                bn_var: index_of(params, "front.bn.running_var")?,
            }),
            FrontEnd::Mlp { widths } => {
                let mut layers = Vec::with_capacity(widths.len());
                for i in 0..widths.len() {
                    layers.push((
                        index_of(params, &format!("front.mlp.{i}.w"))?,
                        index_of(params, &format!("front.mlp.{i}.b"))?,
                    ));
                }
                Ok(FrontWeights::Mlp { layers })
            }
            FrontEnd::Flatten => Ok(FrontWeights::Flatten),
        }
    }

    /// Indices of the running-statistics buffers, if this front end has them.
    pub(crate) fn bn_buffers(&self) -> Option<(usize, usize)> {
        match self {
            FrontWeights::Conv { bn_mean, bn_var, .. } => Some((*bn_mean, *bn_var)),
            _ => None,
        }
    }
}

/// Embeds a `[N, N_r, N_c]` snapshot stack into `[N, d_x]` features. In
/// training mode the convolutional front end normalizes with the stack's own
/// statistics and returns them; in evaluation mode it uses the stored running
/// statistics, making each row independent of the others.
pub(crate) fn front_forward<R: Real>(
    tape: &mut Tape<R>,
    x: Var,
    fw: &FrontWeights,
    params: &ParamSet<R>,
    vars: &[Option<Var>],
    train: bool,
) -> Result<(Var, Option<BatchStats<R>>)> {
    let shape = tape.value(x).shape().to_vec();
    let (n, nr, nc) = (shape[0], shape[1], shape[2]);
    match fw {
        FrontWeights::Conv { filters, bias, bn_gain, bn_bias, bn_mean, bn_var } => {
            let conv = tape.conv2d(x, live::<R>(vars, *filters), live::<R>(vars, *bias))?;
            let eps = R::from_f64(NORM_EPS);
            let gain = live::<R>(vars, *bn_gain);
            let bbias = live::<R>(vars, *bn_bias);
            let (normed, stats) = if train {
                let (v, s) = tape.batch_norm_train(conv, gain, bbias, eps)?;
                (v, Some(s))
            } else {
                let mean = params.at(*bn_mean).value.data().to_vec();
                let var = params.at(*bn_var).value.data().to_vec();
                (tape.batch_norm_eval(conv, gain, bbias, &mean, &var, eps)?, None)
            };
            let d_x = tape.value(normed).len() / n;
            Ok((tape.reshape(normed, &[n, d_x])?, stats))
        }
        FrontWeights::Mlp { layers } => {
            let mut h = tape.reshape(x, &[n, nr * nc])?;
            for &(w, b) in layers {
                let lin = tape.matmul_nt(h, live::<R>(vars, w))?;
                let biased = tape.add_row(lin, live::<R>(vars, b))?;
                h = tape.sigmoid(biased);
            }
            Ok((h, None))
        }
        FrontWeights::Flatten => Ok((tape.reshape(x, &[n, nr * nc])?, None)),
    }
}
