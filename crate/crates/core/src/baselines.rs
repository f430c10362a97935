//! Reference set classifiers used to isolate what attention contributes.
//!
//! [`SumMlp`] has no attention at all: a per-snapshot perceptron stack, a
//! per-snapshot linear score, a sum over the set, and a final logistic
//! squash. Because summation is the only interaction between elements, it is
//! permutation invariant by construction but can only see first-moment
//! statistics of the encoded elements.
//!
//! [`PoolingOnly`] keeps the attention pooling block and confidence head of
//! the main model but replaces the encoder stack with per-snapshot
//! perceptron layers — structurally it is a [`SetAttentionClassifier`] with
//! zero encoder layers and an MLP front end, and it is implemented as
//! exactly that, wrapped so checkpoints carry a distinct variant tag.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::blocks::{add_bias, add_weight, index_of, live, register_params};
use crate::model::config::{Activation, FrontEnd, ModelConfig};
use crate::model::quan::{check_structure, SetAttentionClassifier};
use crate::model::{ForwardMode, ForwardOutput, SetClassifier};
use crate::real::Real;
use crate::seeds::stream;
use crate::tensor::{BatchStats, ParamSet, Tape, Tensor};
use crate::train::init::Init;

/// Architecture of the sum-pooled perceptron classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumMlpConfig {
    /// Snapshot grid `(rows, cols)`.
    pub grid: (usize, usize),
    /// Number of snapshots per training set. The forward pass itself accepts
    /// any set size — sum pooling has no fixed arity.
    pub set_size: usize,
    /// Per-element encoder widths, each layer followed by a logistic
    /// activation. May be empty (decoder reads raw flattened snapshots).
    pub enc_widths: Vec<usize>,
    /// Decoder hidden widths (logistic), before the final linear scalar
    /// layer. May be empty.
    pub dec_widths: Vec<usize>,
}

impl SumMlpConfig {
    pub fn validate(&self) -> Result<()> {
        let (nr, nc) = self.grid;
        if nr == 0 || nc == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        if self.set_size == 0 {
            return Err(Error::config("set_size must be positive"));
        }
        if self.enc_widths.iter().chain(&self.dec_widths).any(|&w| w == 0) {
            return Err(Error::config("perceptron widths must be positive"));
        }
        Ok(())
    }

    /// Widths of every linear layer in order, as `(fan_in, fan_out)` pairs,
    /// ending with the scalar output layer.
    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.grid.0 * self.grid.1;
        for &w in self.enc_widths.iter().chain(&self.dec_widths) {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, 1));
        dims
    }
}

/// Per-element perceptrons, sum pooling, logistic output. No attention.
#[derive(Debug)]
pub struct SumMlp<R: Real> {
    config: SumMlpConfig,
    params: ParamSet<R>,
    /// Parameter indices `(weight, bias)` per linear layer; the last entry is
    /// the scalar output layer, every earlier one is followed by a logistic.
    layers: Vec<(usize, usize)>,
}

impl<R: Real> SumMlp<R> {
    /// Builds a freshly initialized model; parameter draws come from a
    /// stream derived from `seed` in a fixed order.
    pub fn new(config: SumMlpConfig, scheme: Init, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(seed, "model-init");
        let mut params = ParamSet::new();
        let mut layers = Vec::new();
        let dims = config.layer_dims();
        let n_enc = config.enc_widths.len();
        for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
            let name = if i < n_enc {
                format!("enc.{i}")
            } else if i + 1 < dims.len() {
                format!("dec.{}", i - n_enc)
            } else {
                "dec.out".to_string()
            };
            let w = add_weight(
                &mut params,
                &mut rng,
                &format!("{name}.w"),
                &[fan_out, fan_in],
                fan_in,
                fan_out,
                scheme,
            )?;
            let b = add_bias(&mut params, &mut rng, &format!("{name}.b"), fan_out, fan_in, scheme)?;
            layers.push((w, b));
        }
        Ok(SumMlp { config, params, layers })
    }

    /// Rebuilds a model around checkpoint parameters, verifying names,
    /// shapes, and trainability against what `new` would create.
    pub fn from_params(config: SumMlpConfig, params: ParamSet<R>) -> Result<Self> {
        config.validate()?;
        let reference = Self::new(config.clone(), Init::XavierNormal, 0)?;
        check_structure(reference.params(), &params)?;
        let mut layers = Vec::new();
        for (w, b) in &reference.layers {
            let wi = index_of(&params, &reference.params.at(*w).name)?;
            let bi = index_of(&params, &reference.params.at(*b).name)?;
            layers.push((wi, bi));
        }
        Ok(SumMlp { config, params, layers })
    }

    pub fn config(&self) -> &SumMlpConfig {
        &self.config
    }
}

impl<R: Real> SetClassifier<R> for SumMlp<R> {
    fn variant(&self) -> &'static str {
        "smlp"
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
        _mode: ForwardMode<'_>,
    ) -> Result<ForwardOutput<R>> {
        let (nr, nc) = self.config.grid;
        if x.rank() != 3 || x.shape()[1] != nr || x.shape()[2] != nc || x.shape()[0] == 0 {
            return Err(Error::shape(
                "forward_set",
                format!("input {:?}, config requires [n>0, {nr}, {nc}]", x.shape()),
            ));
        }
        let n = x.shape()[0];
        let vars = register_params(tape, &self.params);
        let xv = tape.constant(x.clone());
        let mut h = tape.reshape(xv, &[n, nr * nc])?;
        let last = self.layers.len() - 1;
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            let lin = tape.matmul_nt(h, live::<R>(&vars, w))?;
            h = tape.add_row(lin, live::<R>(&vars, b))?;
            if i < last {
                h = tape.sigmoid(h);
            }
        }
        let pooled = tape.sum_axis(h, 0)?;
        let confidence = tape.sigmoid(pooled);
        Ok(ForwardOutput { confidence, scores: None, batch_stats: None, param_vars: vars })
    }
}

/// Attention pooling and confidence head over a per-element perceptron
/// encoder — the main model with zero encoder layers, tagged separately in
/// checkpoints.
#[derive(Debug)]
pub struct PoolingOnly<R: Real>(SetAttentionClassifier<R>);

impl<R: Real> PoolingOnly<R> {
    /// Builds the model: per-element perceptron layers of the given widths
    /// (the last width is the pooled feature size `d_h`), then attention
    /// pooling and the confidence head.
    pub fn new(
        grid: (usize, usize),
        set_size: usize,
        widths: Vec<usize>,
        residual_activation: Activation,
        scheme: Init,
        seed: u64,
    ) -> Result<Self> {
        let d_h = *widths
            .last()
            .ok_or_else(|| Error::config("pooling-only encoder needs at least one width"))?;
        let config = ModelConfig {
            grid,
            set_size,
            mini_sets: 1,
            layers: 0,
            d_h,
            n_heads: 1,
            front_end: FrontEnd::Mlp { widths },
            residual_activation,
        };
        Ok(PoolingOnly(SetAttentionClassifier::new(config, scheme, seed)?))
    }

    /// Rebuilds from checkpoint parameters. The config must describe a
    /// zero-layer model with an MLP front end.
    pub fn from_params(config: ModelConfig, params: ParamSet<R>) -> Result<Self> {
        if config.layers != 0 {
            return Err(Error::config(format!(
                "pooling-only checkpoint must have layers = 0, found {}",
                config.layers
            )));
        }
        if !matches!(config.front_end, FrontEnd::Mlp { .. }) {
            return Err(Error::config("pooling-only checkpoint must use an mlp front end"));
        }
        Ok(PoolingOnly(SetAttentionClassifier::from_params(config, params)?))
    }

    pub fn config(&self) -> &ModelConfig {
        self.0.config()
    }
}

impl<R: Real> SetClassifier<R> for PoolingOnly<R> {
    fn variant(&self) -> &'static str {
        "pab_only"
    }

    fn config_value(&self) -> Result<serde_json::Value> {
        self.0.config_value()
    }

    fn grid(&self) -> (usize, usize) {
        self.0.grid()
    }

    fn set_size(&self) -> usize {
        self.0.set_size()
    }

    fn params(&self) -> &ParamSet<R> {
        self.0.params()
    }

    fn params_mut(&mut self) -> &mut ParamSet<R> {
        self.0.params_mut()
    }

    fn forward_set(
        &self,
        tape: &mut Tape<R>,
        x: &Tensor<R>,
        mode: ForwardMode<'_>,
    ) -> Result<ForwardOutput<R>> {
        self.0.forward_set(tape, x, mode)
    }

    fn apply_batch_stats(&mut self, stats: &[BatchStats<R>], momentum: f64) -> Result<()> {
        self.0.apply_batch_stats(stats, momentum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::snapshot::{set_to_tensor, Snapshot};
    use crate::model::predict_set;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn random_set(n: usize, rows: usize, cols: usize, seed: u64) -> Vec<Snapshot> {
        let mut rng = stream(seed, "test-set");
        (0..n)
            .map(|_| Snapshot::from_fn(rows, cols, |_, _| u8::from(rng.gen_bool(0.5))))
            .collect::<Result<Vec<_>>>()
            .unwrap()
    }

    fn small_smlp() -> SumMlp<f64> {
        let config = SumMlpConfig {
            grid: (2, 3),
            set_size: 8,
            enc_widths: vec![5, 4],
            dec_widths: vec![3],
        };
        SumMlp::new(config, Init::XavierNormal, 7).unwrap()
    }

    #[test]
    fn smlp_is_permutation_invariant_bit_exactly() {
        let model = small_smlp();
        let set = random_set(8, 2, 3, 11);
        let base = predict_set(&model, &set).unwrap().confidence;
        let mut rng = stream(12, "perm");
        for _ in 0..20 {
            let mut shuffled = set.clone();
            shuffled.shuffle(&mut rng);
            let y = predict_set(&model, &shuffled).unwrap().confidence;
            assert_eq!(y.to_bits(), base.to_bits());
        }
    }

    #[test]
    fn smlp_pre_sigmoid_sum_is_linear_in_duplicates() {
        let model = small_smlp();
        let snap = random_set(1, 2, 3, 21).pop().unwrap();
        let y1 = predict_set(&model, &[snap.clone()]).unwrap().confidence;
        let y2 = predict_set(&model, &[snap.clone(), snap]).unwrap().confidence;
        let logit = |y: f64| (y / (1.0 - y)).ln();
        assert!((logit(y2) - 2.0 * logit(y1)).abs() < 1e-9);
    }

    #[test]
    fn smlp_matches_straight_line_oracle() {
        let config = SumMlpConfig {
            grid: (1, 2),
            set_size: 2,
            enc_widths: vec![2],
            dec_widths: vec![],
        };
        let mut model = SumMlp::<f64>::new(config, Init::XavierNormal, 3).unwrap();
        let ew = vec![0.3, -0.7, 0.5, 0.2];
        let eb = vec![0.1, -0.2];
        let ow = vec![0.8, -0.4];
        let ob = vec![0.25];
        model.params_mut().get_mut("enc.0.w").unwrap().value =
            Tensor::from_vec(&[2, 2], ew.clone()).unwrap();
        model.params_mut().get_mut("enc.0.b").unwrap().value =
            Tensor::from_vec(&[2], eb.clone()).unwrap();
        model.params_mut().get_mut("dec.out.w").unwrap().value =
            Tensor::from_vec(&[1, 2], ow.clone()).unwrap();
        model.params_mut().get_mut("dec.out.b").unwrap().value =
            Tensor::from_vec(&[1], ob.clone()).unwrap();

        let set = vec![
            Snapshot::new(1, 2, vec![1, 0]).unwrap(),
            Snapshot::new(1, 2, vec![1, 1]).unwrap(),
        ];
        let x = set_to_tensor::<f64>(&set).unwrap();
        let mut tape = Tape::new();
        let out = model.forward_set(&mut tape, &x, ForwardMode::Eval).unwrap();
        let got = tape.value(out.confidence).scalar();

        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut pooled = 0.0;
        for element in [[1.0, 0.0], [1.0, 1.0]] {
            let h = [
                sig(ew[0] * element[0] + ew[1] * element[1] + eb[0]),
                sig(ew[2] * element[0] + ew[3] * element[1] + eb[1]),
            ];
            pooled += ow[0] * h[0] + ow[1] * h[1] + ob[0];
        }
        assert!((got - sig(pooled)).abs() < 1e-12, "got {got}, oracle {}", sig(pooled));
    }

    #[test]
    fn smlp_exposes_no_scores_and_roundtrips_structure() {
        let model = small_smlp();
        let set = random_set(8, 2, 3, 31);
        let pred = predict_set(&model, &set).unwrap();
        assert!(pred.scores.is_none());
        assert!(pred.confidence > 0.0 && pred.confidence < 1.0);

        let rebuilt =
            SumMlp::from_params(model.config().clone(), model.params().clone()).unwrap();
        let again = predict_set(&rebuilt, &set).unwrap();
        assert_eq!(again.confidence.to_bits(), pred.confidence.to_bits());

        let mut wrong = model.config().clone();
        wrong.enc_widths = vec![5];
        let err = SumMlp::from_params(wrong, model.params().clone()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("dec.0.w"), "error should name the mismatching field: {msg}");
    }

    #[test]
    fn pooling_only_is_permutation_invariant_and_scores_sum_to_one() {
        let model = PoolingOnly::<f64>::new(
            (2, 3),
            6,
            vec![8, 4],
            Activation::Sigmoid,
            Init::XavierNormal,
            5,
        )
        .unwrap();
        let set = random_set(6, 2, 3, 41);
        let pred = predict_set(&model, &set).unwrap();
        let scores = pred.scores.as_ref().unwrap();
        assert_eq!(scores.len(), 6);
        let total: f64 = scores.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);

        let mut rng = stream(42, "perm");
        for _ in 0..10 {
            let mut shuffled = set.clone();
            shuffled.shuffle(&mut rng);
            let again = predict_set(&model, &shuffled).unwrap();
            assert_eq!(again.confidence.to_bits(), pred.confidence.to_bits());
        }
    }

    #[test]
    fn pooling_only_with_zero_keys_scores_uniformly() {
        let mut model = PoolingOnly::<f64>::new(
            (2, 2),
            5,
            vec![4],
            Activation::Relu,
            Init::XavierNormal,
            9,
        )
        .unwrap();
        let k = model.params_mut().get_mut("dec.pab.k").unwrap();
        k.value = Tensor::zeros(k.value.shape());
        let set = random_set(5, 2, 2, 51);
        let pred = predict_set(&model, &set).unwrap();
        for &s in pred.scores.as_ref().unwrap() {
            assert!((s - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn pooling_only_rejects_layered_configs() {
        let model = PoolingOnly::<f64>::new(
            (2, 2),
            4,
            vec![4],
            Activation::Sigmoid,
            Init::XavierNormal,
            1,
        )
        .unwrap();
        let mut config = model.config().clone();
        config.layers = 1;
        let err = PoolingOnly::from_params(config, model.params().clone()).unwrap_err();
        assert!(err.to_string().contains("layers"));
    }
}
