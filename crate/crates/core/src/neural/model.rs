use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, Attention, AttentionCache, BiLstm, BiLstmCache, ConvCache, ConvPool, Linear};
use super::tensor::{softmax_in_place, Tensor};
use crate::text::{EmbeddingTable, PAD};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Cnn,
    BiLstm,
    Ssae,
    CnnLda,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Cnn => "cnn",
            Architecture::BiLstm => "bilstm",
            Architecture::Ssae => "ssae",
            Architecture::CnnLda => "cnn-lda",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cnn" => Ok(Architecture::Cnn),
            "bilstm" => Ok(Architecture::BiLstm),
            "ssae" => Ok(Architecture::Ssae),
            "cnn-lda" => Ok(Architecture::CnnLda),
            other => Err(Error::UnsupportedModel(other.to_string())),
        }
    }
}

/// Stacked layers in the recurrent classifier.
pub const BILSTM_LAYERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// filled in from the embedding table
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub filter_widths: Vec<usize>,
    pub feature_maps: usize,
    /// LSTM hidden size per direction
    pub hidden: usize,
    pub attention_hidden: usize,
    pub attention_rows: usize,
    pub dropout: f64,
    /// class names; empty means scalar regression
    pub classes: Vec<String>,
    pub topic_dim: usize,
    pub attention_penalty: f64,
    pub train_embeddings: bool,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, classes: Vec<String>) -> Self {
        ModelConfig {
            architecture,
            vocab_size: 0,
            embedding_dim: 0,
            filter_widths: vec![3, 4, 5],
            feature_maps: 100,
            hidden: 64,
            attention_hidden: 64,
            attention_rows: 8,
            dropout: 0.5,
            classes,
            topic_dim: if architecture == Architecture::CnnLda { 50 } else { 0 },
            attention_penalty: 0.0,
            train_embeddings: false,
        }
    }

    pub fn with_regression(mut self) -> Self {
        self.classes.clear();
        self
    }

    pub fn is_regression(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn outputs(&self) -> usize {
        if self.is_regression() {
            1
        } else {
            self.classes.len()
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self.architecture {
            Architecture::Cnn | Architecture::CnnLda => self.filter_widths.len() * self.feature_maps,
            Architecture::BiLstm => 2 * self.hidden,
            Architecture::Ssae => self.attention_rows * 2 * self.hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.vocab_size == 0 || self.embedding_dim == 0 {
            return bad("embedding table is empty");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.classes.len() == 1 {
            return bad("classification needs at least two classes");
        }
        if self.attention_penalty < 0.0 {
            return bad("attention penalty must be non-negative");
        }
        match self.architecture {
            Architecture::Cnn | Architecture::CnnLda => {
                if self.filter_widths.is_empty() || self.filter_widths.contains(&0) || self.feature_maps == 0 {
                    return bad("filter widths and feature maps must be at least 1");
                }
            }
            Architecture::BiLstm => {
                if self.hidden == 0 {
                    return bad("hidden size must be at least 1");
                }
            }
            Architecture::Ssae => {
                if self.hidden == 0 || self.attention_hidden == 0 || self.attention_rows == 0 {
                    return bad("attention sizes must be at least 1");
                }
            }
        }
        match (self.architecture, self.topic_dim) {
            (Architecture::CnnLda, 0) => bad("topic fusion needs a topic size of at least 1"),
            (Architecture::CnnLda, _) | (_, 0) => Ok(()),
            _ => bad("only the topic-fusion model takes topic vectors"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Input {
    pub indices: Vec<usize>,
    /// topic mixture, empty unless the model fuses topics
    pub topic: Vec<f64>,
}

impl Input {
    pub fn tokens(indices: Vec<usize>) -> Self {
        Input { indices, topic: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    Score(f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Cnn(Vec<ConvPool>),
    BiLstm(Vec<BiLstm>),
    Ssae(BiLstm, Attention),
}

enum BodyCache {
    Cnn(Vec<ConvCache>),
    /// per layer: its input and cache
    BiLstm(Vec<(Vec<f64>, BiLstmCache)>),
    Ssae(BiLstmCache, AttentionCache),
}

struct Trace {
    tokens: Vec<usize>,
    x: Vec<f64>,
    n: usize,
    body: BodyCache,
    mask: Option<Vec<f64>>,
    /// penultimate representation after dropout
    features: Vec<f64>,
    output: Vec<f64>,
    penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    embedding: Tensor,
    body: Body,
    out: Linear,
    fusion: Option<Tensor>,
}

impl Model {
    pub fn new(mut config: ModelConfig, embeddings: &EmbeddingTable, seed: u64) -> Result<Self> {
        config.vocab_size = embeddings.rows();
        config.embedding_dim = embeddings.dim();
        config.validate()?;
        let mut rng = seed::rng(seed);
        let d = config.embedding_dim;
        let body = match config.architecture {
            Architecture::Cnn | Architecture::CnnLda => Body::Cnn(
                config
                    .filter_widths
                    .iter()
                    .map(|&w| ConvPool::new(w, config.feature_maps, d, &mut rng))
                    .collect(),
            ),
            Architecture::BiLstm => Body::BiLstm(
                (0..BILSTM_LAYERS)
                    .map(|l| BiLstm::new(if l == 0 { d } else { 2 * config.hidden }, config.hidden, &mut rng))
                    .collect(),
            ),
            Architecture::Ssae => Body::Ssae(
                BiLstm::new(d, config.hidden, &mut rng),
                Attention::new(2 * config.hidden, config.attention_hidden, config.attention_rows, &mut rng),
            ),
        };
        let out = Linear::new(config.feature_dim(), config.outputs(), &mut rng);
        let fusion = (config.topic_dim > 0).then(|| Tensor::glorot(config.outputs(), config.topic_dim, &mut rng));
        let embedding = Tensor::from_vec(&[config.vocab_size, d], embeddings.data().to_vec())?;
        Ok(Model {
            config,
            embedding,
            body,
            out,
            fusion,
        })
    }

    /// Rebuilds a model from named parameters, e.g. out of a checkpoint.
    pub fn from_params(config: ModelConfig, params: Vec<(String, Tensor)>) -> Result<Self> {
        let placeholder = EmbeddingTable::from_rows(
            config.embedding_dim.max(1),
            vec![0.0; config.vocab_size.max(1) * config.embedding_dim.max(1)],
        )?;
        let mut model = Model::new(config, &placeholder, 0)?;
        let expected = model.params().len();
        if params.len() != expected {
            return Err(Error::Format(format!("expected {expected} parameters, found {}", params.len())));
        }
        {
            let mut slots = model.params_mut();
            for (name, tensor) in params {
                let slot = slots
                    .iter_mut()
                    .find(|(n, _)| *n == name)
                    .ok_or_else(|| Error::Format(format!("unknown parameter {name}")))?;
                if slot.1.shape() != tensor.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "{name}: expected {:?}, found {:?}",
                        slot.1.shape(),
                        tensor.shape()
                    )));
                }
                *slot.1 = tensor;
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.embedding)];
        match &self.body {
            Body::Cnn(convs) => {
                for (i, c) in convs.iter().enumerate() {
                    out.push((format!("conv{i}.weight"), &c.weight));
                    out.push((format!("conv{i}.bias"), &c.bias));
                }
            }
            Body::BiLstm(layers) => {
                for (l, b) in layers.iter().enumerate() {
                    push_bilstm(&mut out, &format!("lstm{l}"), b);
                }
            }
            Body::Ssae(b, att) => {
                push_bilstm(&mut out, "lstm0", b);
                out.push(("attention.w1".into(), &att.w1));
                out.push(("attention.w2".into(), &att.w2));
            }
        }
        out.push(("output.weight".into(), &self.out.weight));
        out.push(("output.bias".into(), &self.out.bias));
        if let Some(f) = &self.fusion {
            out.push(("fusion.weight".into(), f));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding)];
        match &mut self.body {
            Body::Cnn(convs) => {
                for (i, c) in convs.iter_mut().enumerate() {
                    out.push((format!("conv{i}.weight"), &mut c.weight));
                    out.push((format!("conv{i}.bias"), &mut c.bias));
                }
            }
            Body::BiLstm(layers) => {
                for (l, b) in layers.iter_mut().enumerate() {
                    push_bilstm_mut(&mut out, &format!("lstm{l}"), b);
                }
            }
            Body::Ssae(b, att) => {
                push_bilstm_mut(&mut out, "lstm0", b);
                out.push(("attention.w1".into(), &mut att.w1));
                out.push(("attention.w2".into(), &mut att.w2));
            }
        }
        out.push(("output.weight".into(), &mut self.out.weight));
        out.push(("output.bias".into(), &mut self.out.bias));
        if let Some(f) = &mut self.fusion {
            out.push(("fusion.weight".into(), f));
        }
        out
    }

    /// Zeroes gradients of trainable parameters; frozen embeddings carry none.
    pub fn zero_grad(&mut self) {
        let train_emb = self.config.train_embeddings;
        for (name, p) in self.params_mut() {
            if name == "embedding" && !train_emb {
                p.clear_grad();
            } else {
                p.grad_mut();
                p.zero_grad();
            }
        }
    }

    fn check_input(&self, input: &Input) -> Result<Vec<usize>> {
        if input.topic.len() != self.config.topic_dim {
            return Err(Error::TopicLength {
                expected: self.config.topic_dim,
                got: input.topic.len(),
            });
        }
        let tokens: Vec<usize> = input.indices.iter().copied().filter(|&i| i != PAD).collect();
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(bad) = tokens.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Error::InvalidInput(format!(
                "token index {bad} outside vocabulary of {}",
                self.config.vocab_size
            )));
        }
        Ok(tokens)
    }

    fn run(&self, input: &Input, dropout: Option<u64>) -> Result<Trace> {
        let tokens = self.check_input(input)?;
        let d = self.config.embedding_dim;
        let n = tokens.len();
        let mut x = Vec::with_capacity(n * d);
        for &t in &tokens {
            x.extend_from_slice(&self.embedding.data()[t * d..(t + 1) * d]);
        }
        let mut penalty = 0.0;
        let (features, body) = match &self.body {
            Body::Cnn(convs) => {
                let mut f = Vec::with_capacity(self.config.feature_dim());
                let mut caches = Vec::with_capacity(convs.len());
                for c in convs {
                    let (o, cache) = c.forward(&x, n);
                    f.extend(o);
                    caches.push(cache);
                }
                (f, BodyCache::Cnn(caches))
            }
            Body::BiLstm(layers) => {
                let mut caches = Vec::with_capacity(layers.len());
                let mut input = x.clone();
                for layer in layers {
                    let cache = layer.run(&input, n);
                    let next = cache.states.clone();
                    caches.push((input, cache));
                    input = next;
                }
                let u = self.config.hidden;
                let states = &caches.last().expect("at least one layer").1.states;
                let mut f = states[(n - 1) * 2 * u..(n - 1) * 2 * u + u].to_vec();
                f.extend_from_slice(&states[u..2 * u]);
                (f, BodyCache::BiLstm(caches))
            }
            Body::Ssae(lstm, att) => {
                let lc = lstm.run(&x, n);
                let (m, ac) = att.forward(&lc.states, n);
                if self.config.attention_penalty > 0.0 {
                    penalty = self.config.attention_penalty * Attention::penalty(&ac.a, att.rows(), n).0;
                }
                (m, BodyCache::Ssae(lc, ac))
            }
        };
        let mask = dropout.map(|s| dropout_mask(features.len(), self.config.dropout, &mut seed::rng(s)));
        let features = match &mask {
            Some(m) => features.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => features,
        };
        let mut output = self.out.forward(&features);
        if let Some(fw) = &self.fusion {
            let k = self.config.topic_dim;
            for (c, o) in output.iter_mut().enumerate() {
                *o += fw.data()[c * k..(c + 1) * k]
                    .iter()
                    .zip(&input.topic)
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }
        if !self.config.is_regression() {
            softmax_in_place(&mut output);
        }
        Ok(Trace {
            tokens,
            x,
            n,
            body,
            mask,
            features,
            output,
            penalty,
        })
    }

    /// Inference: class probabilities, or a one-element score for regression.
    pub fn forward(&self, batch: &[Input]) -> Result<Vec<Vec<f64>>> {
        batch.iter().map(|i| Ok(self.run(i, None)?.output)).collect()
    }

    pub fn predict(&self, input: &Input) -> Result<Vec<f64>> {
        Ok(self.run(input, None)?.output)
    }

    pub fn predict_class(&self, input: &Input) -> Result<usize> {
        let p = self.predict(input)?;
        Ok(argmax(&p))
    }

    fn sample_loss(&self, trace: &Trace, target: Target) -> Result<f64> {
        let base = match (target, self.config.is_regression()) {
            (Target::Class(c), false) => {
                if c >= self.config.outputs() {
                    return Err(Error::InvalidInput(format!("class index {c} out of range")));
                }
                -trace.output[c].max(f64::MIN_POSITIVE).ln()
            }
            (Target::Score(y), true) => (trace.output[0] - y).powi(2),
            _ => return Err(Error::InvalidInput("target kind does not match the model output".into())),
        };
        Ok(base + trace.penalty)
    }

    fn dropout_seed(step: Option<u64>, sample: usize) -> Option<u64> {
        step.map(|s| seed::derive(s, sample as u64))
    }

    /// Mean loss over the batch. `dropout_seed = None` disables dropout.
    pub fn loss(&self, batch: &[Input], targets: &[Target], dropout_seed: Option<u64>) -> Result<f64> {
        check_batch(batch, targets)?;
        let mut total = 0.0;
        for (i, (input, t)) in batch.iter().zip(targets).enumerate() {
            let trace = self.run(input, Self::dropout_seed(dropout_seed, i))?;
            total += self.sample_loss(&trace, *t)?;
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean loss; leaves the gradient of the mean loss in every trainable parameter.
    pub fn loss_and_backward(&mut self, batch: &[Input], targets: &[Target], dropout_seed: Option<u64>) -> Result<f64> {
        check_batch(batch, targets)?;
        self.zero_grad();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for (i, (input, t)) in batch.iter().zip(targets).enumerate() {
            let trace = self.run(input, Self::dropout_seed(dropout_seed, i))?;
            total += self.sample_loss(&trace, *t)?;
            self.backward(input, &trace, *t, scale);
        }
        Ok(total * scale)
    }

    fn backward(&mut self, input: &Input, trace: &Trace, target: Target, scale: f64) {
        let mut dlogits = trace.output.clone();
        match target {
            Target::Class(c) => dlogits[c] -= 1.0,
            Target::Score(y) => dlogits[0] = 2.0 * (trace.output[0] - y),
        }
        dlogits.iter_mut().for_each(|v| *v *= scale);
        if let Some(fw) = &mut self.fusion {
            super::tensor::outer_add(fw.grad_mut(), &dlogits, &input.topic);
        }
        let mut dfeat = self.out.backward(&trace.features, &dlogits);
        if let Some(m) = &trace.mask {
            dfeat.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
        }
        let n = trace.n;
        let penalty = self.config.attention_penalty * scale;
        let dx = match (&mut self.body, &trace.body) {
            (Body::Cnn(convs), BodyCache::Cnn(caches)) => {
                let mut dx = vec![0.0; trace.x.len()];
                let mut off = 0;
                for (c, cache) in convs.iter_mut().zip(caches) {
                    let maps = c.maps();
                    let g = c.backward(&trace.x, n, cache, &dfeat[off..off + maps]);
                    off += maps;
                    dx.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
                dx
            }
            (Body::BiLstm(layers), BodyCache::BiLstm(caches)) => {
                let u = self.config.hidden;
                let mut dstates = vec![0.0; n * 2 * u];
                dstates[(n - 1) * 2 * u..(n - 1) * 2 * u + u].copy_from_slice(&dfeat[..u]);
                for k in 0..u {
                    dstates[u + k] += dfeat[u + k];
                }
                for (layer, (inp, cache)) in layers.iter_mut().zip(caches).rev() {
                    dstates = layer.backprop(inp, n, cache, &dstates);
                }
                dstates
            }
            (Body::Ssae(lstm, att), BodyCache::Ssae(lc, ac)) => {
                let dh = att.backward(&lc.states, ac, &dfeat, penalty);
                lstm.backprop(&trace.x, n, lc, &dh)
            }
            _ => unreachable!("cache built by the same body"),
        };
        if self.config.train_embeddings {
            let d = self.config.embedding_dim;
            let g = self.embedding.grad_mut();
            for (pos, &tok) in trace.tokens.iter().enumerate() {
                for k in 0..d {
                    g[tok * d + k] += dx[pos * d + k];
                }
            }
        }
    }

    /// Attention matrix `A` (`r x n`) over the non-PAD tokens.
    pub fn attention_matrix(&self, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
        let Body::Ssae(lstm, att) = &self.body else {
            return Err(Error::UnsupportedModel(format!(
                "{} has no attention layer",
                self.config.architecture.name()
            )));
        };
        let input = Input {
            indices: indices.to_vec(),
            topic: vec![0.0; self.config.topic_dim],
        };
        let tokens = self.check_input(&input)?;
        let d = self.config.embedding_dim;
        let n = tokens.len();
        let mut x = Vec::with_capacity(n * d);
        for &t in &tokens {
            x.extend_from_slice(&self.embedding.data()[t * d..(t + 1) * d]);
        }
        let lc = lstm.run(&x, n);
        let (_, ac) = att.forward(&lc.states, n);
        Ok(ac.a.chunks(n).map(<[f64]>::to_vec).collect())
    }

    /// Per-token weight: column sums of `A`, normalised over non-PAD tokens.
    /// PAD positions get weight 0.
    pub fn token_attention(&self, indices: &[usize]) -> Result<Vec<f64>> {
        let a = self.attention_matrix(indices)?;
        let n = a[0].len();
        let mut col: Vec<f64> = (0..n).map(|t| a.iter().map(|row| row[t]).sum()).collect();
        let s: f64 = col.iter().sum();
        col.iter_mut().for_each(|v| *v /= s);
        let mut it = col.into_iter();
        Ok(indices
            .iter()
            .map(|&i| if i == PAD { 0.0 } else { it.next().unwrap_or(0.0) })
            .collect())
    }
}

fn push_bilstm<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, b: &'a BiLstm) {
    for (dir, l) in [("fwd", &b.forward), ("bwd", &b.backward)] {
        out.push((format!("{prefix}.{dir}.wx"), &l.wx));
        out.push((format!("{prefix}.{dir}.wh"), &l.wh));
        out.push((format!("{prefix}.{dir}.bias"), &l.bias));
    }
}

fn push_bilstm_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, prefix: &str, b: &'a mut BiLstm) {
    for (dir, l) in [("fwd", &mut b.forward), ("bwd", &mut b.backward)] {
        out.push((format!("{prefix}.{dir}.wx"), &mut l.wx));
        out.push((format!("{prefix}.{dir}.wh"), &mut l.wh));
        out.push((format!("{prefix}.{dir}.bias"), &mut l.bias));
    }
}

fn check_batch(batch: &[Input], targets: &[Target]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptySample);
    }
    if batch.len() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} inputs but {} targets",
            batch.len(),
            targets.len()
        )));
    }
    Ok(())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn classes() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    fn small(arch: Architecture) -> ModelConfig {
        let mut c = ModelConfig::new(arch, classes());
        c.filter_widths = vec![2, 3];
        c.feature_maps = 4;
        c.hidden = 3;
        c.attention_hidden = 4;
        c.attention_rows = 2;
        if arch == Architecture::CnnLda {
            c.topic_dim = 3;
        }
        c
    }

    fn input(arch: Architecture, indices: Vec<usize>) -> Input {
        Input {
            indices,
            topic: if arch == Architecture::CnnLda { vec![0.2, 0.3, 0.5] } else { vec![] },
        }
    }

    const ALL: [Architecture; 4] = [Architecture::Cnn, Architecture::BiLstm, Architecture::Ssae, Architecture::CnnLda];

    #[test]
    fn probabilities_sum_to_one() {
        let table = EmbeddingTable::random(12, 5, 1);
        for arch in ALL {
            let m = Model::new(small(arch), &table, 2).unwrap();
            let p = m.predict(&input(arch, vec![4, 5, 6, 7])).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{arch:?}");
        }
    }

    #[test]
    fn zero_output_layer_gives_log_c() {
        let table = EmbeddingTable::random(12, 5, 1);
        for arch in ALL {
            let mut m = Model::new(small(arch), &table, 2).unwrap();
            for (name, p) in m.params_mut() {
                if name.starts_with("output") || name.starts_with("fusion") {
                    p.data_mut().fill(0.0);
                }
            }
            let batch = [input(arch, vec![3, 4]), input(arch, vec![5, 6, 7])];
            let loss = m.loss(&batch, &[Target::Class(0), Target::Class(2)], None).unwrap();
            assert!((loss - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn regression_at_target_has_zero_gradient() {
        let table = EmbeddingTable::random(12, 5, 1);
        let mut m = Model::new(small(Architecture::Cnn).with_regression(), &table, 2).unwrap();
        let x = input(Architecture::Cnn, vec![3, 4, 5]);
        let y = m.predict(&x).unwrap()[0];
        let loss = m.loss_and_backward(&[x], &[Target::Score(y)], None).unwrap();
        assert_eq!(loss, 0.0);
        for (name, p) in m.params() {
            if name.starts_with("output") {
                assert!(p.grad().unwrap().iter().all(|g| *g == 0.0));
            }
        }
    }

    #[test]
    fn zero_fusion_matches_plain_cnn() {
        let table = EmbeddingTable::random(12, 5, 1);
        let cnn = Model::new(small(Architecture::Cnn), &table, 9).unwrap();
        let mut fused = Model::new(small(Architecture::CnnLda), &table, 9).unwrap();
        for (name, p) in fused.params_mut() {
            if name == "fusion.weight" {
                p.data_mut().fill(0.0);
            }
        }
        let x = vec![3, 4, 5, 6];
        let a = cnn.predict(&Input::tokens(x.clone())).unwrap();
        let b = fused
            .predict(&Input {
                indices: x,
                topic: vec![0.0; 3],
            })
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let table = EmbeddingTable::random(12, 5, 1);
        let m = Model::new(small(Architecture::CnnLda), &table, 2).unwrap();
        assert!(matches!(
            m.predict(&Input { indices: vec![3], topic: vec![0.5] }),
            Err(Error::TopicLength { expected: 3, got: 1 })
        ));
        assert!(matches!(
            m.predict(&Input { indices: vec![0, 0], topic: vec![0.0; 3] }),
            Err(Error::EmptySequence)
        ));
        let cnn = Model::new(small(Architecture::Cnn), &table, 2).unwrap();
        assert!(matches!(cnn.token_attention(&[3]), Err(Error::UnsupportedModel(_))));
    }

    #[test]
    fn single_token_attention_is_one() {
        let table = EmbeddingTable::random(12, 5, 1);
        let m = Model::new(small(Architecture::Ssae), &table, 2).unwrap();
        assert_eq!(m.token_attention(&[7]).unwrap(), vec![1.0]);
        for row in m.attention_matrix(&[3, 4, 5]).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn params_round_trip() {
        let table = EmbeddingTable::random(12, 5, 1);
        let m = Model::new(small(Architecture::Ssae), &table, 2).unwrap();
        let params = m.params().into_iter().map(|(n, t)| (n, t.clone())).collect();
        let back = Model::from_params(m.config().clone(), params).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trailing_padding_is_invisible(tokens in proptest::collection::vec(1usize..12, 1..8), pad in 1usize..6) {
            let table = EmbeddingTable::random(12, 5, 1);
            for arch in ALL {
                let m = Model::new(small(arch), &table, 2).unwrap();
                let mut padded = tokens.clone();
                padded.extend(std::iter::repeat(PAD).take(pad));
                let a = m.predict(&input(arch, tokens.clone())).unwrap();
                let b = m.predict(&input(arch, padded.clone())).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
                prop_assert_eq!(argmax(&a), argmax(&b));
                if arch == Architecture::Ssae {
                    let wa = m.token_attention(&tokens).unwrap();
                    let wb = m.token_attention(&padded).unwrap();
                    prop_assert!(wa.iter().all(|w| *w >= 0.0));
                    prop_assert!((wa.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                    for (x, y) in wa.iter().zip(&wb) {
                        prop_assert!((x - y).abs() < 1e-9);
                    }
                    prop_assert!(wb[tokens.len()..].iter().all(|w| *w == 0.0));
                }
            }
        }
    }
}
