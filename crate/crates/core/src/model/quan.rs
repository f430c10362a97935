//! The set-attention classifier: front end → stacked mini-set attention
//! encoder → pooling attention → confidence head.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::blocks::{
    attention_block, decoder_head, front_forward, pab_forward, register_params, AttentionWeights,
    DecoderWeights, FrontWeights,
};
use crate::model::config::ModelConfig;
use crate::model::plan::MiniSetPlan;
use crate::model::{ForwardMode, ForwardOutput, SetClassifier};
use crate::real::Real;
use crate::seeds::stream;
use crate::tensor::{BatchStats, ParamSet, Tape, Tensor, Var};
use crate::train::init::Init;

#[derive(Debug)]
struct EncoderLayer {
    sab: AttentionWeights,
    /// Cross-attention weights shared by the recurrent and reducing stages;
    /// absent when `mini_sets == 1` (both stages degenerate to identity).
    mab: Option<AttentionWeights>,
}

/// Permutation-invariant set classifier over binary measurement snapshots.
#[derive(Debug)]
pub struct SetAttentionClassifier<R: Real> {
    config: ModelConfig,
    params: ParamSet<R>,
    front: FrontWeights,
    enc: Vec<EncoderLayer>,
    dec: DecoderWeights,
}

impl<R: Real> SetAttentionClassifier<R> {
    /// Builds a freshly initialized model. Parameters are drawn in a fixed
    /// documented order from a stream derived from `seed`, so construction is
    /// reproducible.
    pub fn new(config: ModelConfig, scheme: Init, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, "model-init");
        let mut params = ParamSet::new();
        let front =
            FrontWeights::create(&mut params, &mut rng, &config.front_end, config.grid, scheme)?;
        let mut enc = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let d_in = if l == 0 { config.feature_width() } else { config.d_h };
            let sab = AttentionWeights::create(
                &mut params,
                &mut rng,
                &format!("enc.{l}.sab"),
                d_in,
                config.d_h,
                scheme,
            )?;
            let mab = if config.mini_sets > 1 {
                Some(AttentionWeights::create(
                    &mut params,
                    &mut rng,
                    &format!("enc.{l}.mab"),
                    config.d_h,
                    config.d_h,
                    scheme,
                )?)
            } else {
                None
            };
            enc.push(EncoderLayer { sab, mab });
        }
        let dec = DecoderWeights::create(&mut params, &mut rng, config.d_h, scheme)?;
        Ok(SetAttentionClassifier { config, params, front, enc, dec })
    }

    /// Rebuilds a model around existing parameters (checkpoint load). The
    /// parameter names, shapes, and order must match what `new` would create
    /// for this config; the first mismatch is reported by name.
    pub fn from_params(config: ModelConfig, params: ParamSet<R>) -> Result<Self> {
        config.validate()?;
        let reference = Self::new(config.clone(), Init::XavierNormal, 0)?;
        check_structure(reference.params(), &params)?;
        let front = FrontWeights::lookup(&params, &config.front_end)?;
        let mut enc = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let sab = AttentionWeights::lookup(&params, &format!("enc.{l}.sab"))?;
            let mab = if config.mini_sets > 1 {
                Some(AttentionWeights::lookup(&params, &format!("enc.{l}.mab"))?)
            } else {
                None
            };
            enc.push(EncoderLayer { sab, mab });
        }
        let dec = DecoderWeights::lookup(&params)?;
        Ok(SetAttentionClassifier { config, params, front, enc, dec })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// One encoder layer: parallel self-attention inside each planned
    /// mini-set, recurrent cross-attention around the mini-set ring, and a
    /// reducing fold in the plan's σ order. Consumes `[n, d]`, produces
    /// `[n / mini_sets, d_h]`.
    fn mssab_layer(
        &self,
        tape: &mut Tape<R>,
        x: Var,
        plan: &MiniSetPlan,
        layer: &EncoderLayer,
        vars: &[Option<Var>],
    ) -> Result<Var> {
        let n_heads = self.config.n_heads;
        let act = self.config.residual_activation;
        let n_s = plan.mini_sets();
        if plan.elements() != tape.value(x).rows() {
            return Err(Error::shape(
                "mssab",
                format!("plan for {} elements, input has {}", plan.elements(), tape.value(x).rows()),
            ));
        }
        if n_s == 1 {
            // Single mini-set: the recurrent and reducing stages have nothing
            // to chain, so the layer is exactly self-attention on the whole
            // set in its given order.
            return attention_block(tape, x, x, &layer.sab, vars, n_heads, act);
        }
        let mab = layer.mab.as_ref().expect("cross-attention weights exist when mini_sets > 1");

        // (i) parallel self-attention per mini-set, shared weights.
        let mut y = Vec::with_capacity(n_s);
        for m in 0..n_s {
            let xm = tape.gather_rows(x, plan.mini_set(m))?;
            y.push(attention_block(tape, xm, xm, &layer.sab, vars, n_heads, act)?);
        }

        // (ii) recurrent stage: each mini-set's representation is refined by
        // cross-attending against the others in ring order — queries walk
        // m+1, m+2, …, keys/values carry the evolving state.
        let mut y2 = Vec::with_capacity(n_s);
        for m in 0..n_s {
            let mut h = y[m];
            for t in 0..n_s - 1 {
                let q = y[(m + t + 1) % n_s];
                h = attention_block(tape, q, h, mab, vars, n_heads, act)?;
            }
            y2.push(h);
        }

        // (iii) reducing stage: fold the refined mini-sets in σ order with
        // the same cross-attention weights, leaving one mini-set.
        let sigma = plan.fold_order();
        let mut h = y2[sigma[0]];
        for &label in &sigma[1..] {
            h = attention_block(tape, y2[label], h, mab, vars, n_heads, act)?;
        }
        Ok(h)
    }
}

/// Verifies that `given` has exactly the parameter names, shapes, order, and
/// trainability that `expected` defines.
pub(crate) fn check_structure<R: Real>(expected: &ParamSet<R>, given: &ParamSet<R>) -> Result<()> {
    for i in 0..expected.len() {
        let e = expected.at(i);
        match given.index_of(&e.name) {
            None => {
                return Err(Error::config(format!("checkpoint is missing parameter {:?}", e.name)))
            }
            Some(j) => {
                let g = given.at(j);
                if g.value.shape() != e.value.shape() {
                    return Err(Error::config(format!(
                        "parameter {:?} has shape {:?}, config requires {:?}",
                        e.name,
                        g.value.shape(),
                        e.value.shape()
                    )));
                }
                if g.trainable != e.trainable {
                    return Err(Error::config(format!(
                        "parameter {:?} trainability mismatch",
                        e.name
                    )));
                }
            }
        }
    }
    if given.len() != expected.len() {
        let extra = (0..given.len())
            .map(|i| given.at(i).name.clone())
            .find(|n| expected.index_of(n).is_none())
            .unwrap_or_default();
        return Err(Error::config(format!(
            "checkpoint has {} parameters, config defines {} (unexpected {extra:?})",
            given.len(),
            expected.len()
        )));
    }
    Ok(())
}

impl<R: Real> SetClassifier<R> for SetAttentionClassifier<R> {
    fn variant(&self) -> &'static str {
        "quan"
    }

    fn config_value(&self) -> Result<serde_json::Value> {
        serde_json::to_value(&self.config).map_err(|e| Error::Format(e.to_string()))
    }

    fn grid(&self) -> (usize, usize) {
        self.config.grid
    }

    fn set_size(&self) -> usize {
        self.config.set_size
    }

    fn params(&self) -> &ParamSet<R> {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet<R> {
        &mut self.params
    }

    fn forward_set(
        &self,
        tape: &mut Tape<R>,
        x: &Tensor<R>,
        mut mode: ForwardMode<'_>,
    ) -> Result<ForwardOutput<R>> {
        let (nr, nc) = self.config.grid;
        if x.shape() != [self.config.set_size, nr, nc] {
            return Err(Error::shape(
                "forward_set",
                format!(
                    "input {:?}, config requires [{}, {nr}, {nc}]",
                    x.shape(),
                    self.config.set_size
                ),
            ));
        }
        let vars = register_params(tape, &self.params);
        let xv = tape.constant(x.clone());
        let train = matches!(mode, ForwardMode::Train { .. });
        let (feats, batch_stats) =
            front_forward(tape, xv, &self.front, &self.params, &vars, train)?;

        let mut h = feats;
        for (l, layer) in self.enc.iter().enumerate() {
            let n_l = self.config.layer_input_size(l);
            let plan = match &mut mode {
                ForwardMode::Train { plan_rng } => {
                    MiniSetPlan::random(n_l, self.config.mini_sets, plan_rng)?
                }
                ForwardMode::Eval => MiniSetPlan::identity(n_l, self.config.mini_sets)?,
            };
            h = self.mssab_layer(tape, h, &plan, layer, &vars)?;
        }

        let (pooled, scores) = pab_forward(tape, h, &self.dec, &vars)?;
        let confidence =
            decoder_head(tape, pooled, &self.dec, &vars, self.config.residual_activation)?;
        Ok(ForwardOutput { confidence, scores: Some(scores), batch_stats, param_vars: vars })
    }

    fn apply_batch_stats(&mut self, stats: &[BatchStats<R>], momentum: f64) -> Result<()> {
        let Some((mean_idx, var_idx)) = self.front.bn_buffers() else {
            return Ok(());
        };
        if stats.is_empty() {
            return Ok(());
        }
        let channels = self.params.at(mean_idx).value.len();
        let count = stats[0].count;
        let mut mean = vec![R::zero(); channels];
        let mut var = vec![R::zero(); channels];
        for s in stats {
            if s.mean.len() != channels || s.count != count {
                return Err(Error::shape(
                    "batch_stats",
                    format!(
                        "{} channels / count {} vs expected {channels} / {count}",
                        s.mean.len(),
                        s.count
                    ),
                ));
            }
            for c in 0..channels {
                mean[c] += s.mean[c];
                var[c] += s.var[c];
            }
        }
        let k = R::from_f64(1.0 / stats.len() as f64);
        // Running variance stores the unbiased estimate.
        let unbias = R::from_f64(count as f64 / (count as f64 - 1.0));
        let m = R::from_f64(momentum);
        let keep = R::one() - m;
        for c in 0..channels {
            let batch_mean = mean[c] * k;
            let batch_var = var[c] * k * unbias;
            let rm = &mut self.params.at_mut(mean_idx).value.data_mut()[c];
            *rm = keep * *rm + m * batch_mean;
            let rv = &mut self.params.at_mut(var_idx).value.data_mut()[c];
            *rv = keep * *rv + m * batch_var;
        }
        Ok(())
    }
}

/// Builds a training-mode plan stream for one forward pass: a deterministic
/// generator keyed by (seed, epoch, batch, set) so every pass is replayable.
pub fn plan_stream(seed: u64, label: &str) -> impl RngCore {
    stream(seed, label)
}
