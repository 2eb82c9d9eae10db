//! Latent Dirichlet Allocation fitted by collapsed Gibbs sampling.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;

use crate::text::{tokenize_with, TokenizerConfig, COMMENT_BEGIN_TOKEN, OOV_TOKEN, PAD_TOKEN};
use crate::{seed, Error, Result};

/// File layout after the magic and version: `k`, `|V|` (u64), `alpha`,
/// `beta` (f64), phi (`k x |V|` f64), word-topic counts (`|V| x k` u32),
/// then the vocabulary as length-prefixed strings.
const MAGIC: &[u8; 4] = b"HMLD";
const VERSION: u32 = 1;
/// Sweeps between log-likelihood evaluations.
pub const LIKELIHOOD_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    /// `None` means `50 / k`
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            k: 50,
            alpha: None,
            beta: 0.01,
            iterations: 500,
            seed: 0,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub vocab: Vec<String>,
    /// k x V, row-major
    pub phi: Vec<f64>,
    /// word-topic counts of the final training state, V x k
    pub word_topic: Vec<u32>,
    pub topic_totals: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct LdaFit {
    pub model: LdaModel,
    /// (sweep, log p(w | z)) every `LIKELIHOOD_EVERY` sweeps, plus the initial state at sweep 0
    pub log_likelihood: Vec<(usize, f64)>,
    /// most frequent topic of every token over the second half of the sweeps
    pub modal_assignments: Vec<Vec<usize>>,
}

/// Lowercased word tokens for topic modelling; punctuation and reserved
/// tokens are dropped.
pub fn document_tokens(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizerConfig { lowercase: true })
        .into_iter()
        .filter(|t| {
            ![PAD_TOKEN, OOV_TOKEN, COMMENT_BEGIN_TOKEN].contains(&t.as_str()) && t.chars().any(char::is_alphanumeric)
        })
        .collect()
}

fn phi_from_counts(k: usize, v: usize, beta: f64, word_topic: &[u32], totals: &[u64]) -> Vec<f64> {
    let mut phi = vec![0.0; k * v];
    for t in 0..k {
        let denom = totals[t] as f64 + v as f64 * beta;
        for w in 0..v {
            phi[t * v + w] = (f64::from(word_topic[w * k + t]) + beta) / denom;
        }
    }
    phi
}

fn log_likelihood(k: usize, v: usize, beta: f64, word_topic: &[u32], totals: &[u64]) -> f64 {
    let vb = v as f64 * beta;
    let mut ll = k as f64 * (ln_gamma(vb) - v as f64 * ln_gamma(beta));
    for t in 0..k {
        for w in 0..v {
            ll += ln_gamma(f64::from(word_topic[w * k + t]) + beta);
        }
        ll -= ln_gamma(totals[t] as f64 + vb);
    }
    ll
}

fn sample_discrete(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

impl LdaModel {
    fn new(k: usize, alpha: f64, beta: f64, vocab: Vec<String>, word_topic: Vec<u32>, topic_totals: Vec<u64>) -> Self {
        let phi = phi_from_counts(k, vocab.len(), beta, &word_topic, &topic_totals);
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        LdaModel {
            k,
            alpha,
            beta,
            vocab,
            phi,
            word_topic,
            topic_totals,
            index,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let v = self.vocab.len();
        &self.phi[topic * v..(topic + 1) * v]
    }

    /// Highest-probability words of every topic.
    pub fn top_words(&self, n: usize) -> Vec<Vec<(&str, f64)>> {
        (0..self.k)
            .map(|t| {
                let row = self.phi_row(t);
                let mut idx: Vec<usize> = (0..row.len()).collect();
                idx.sort_by(|a, b| row[*b].total_cmp(&row[*a]).then(a.cmp(b)));
                idx.into_iter().take(n).map(|w| (self.vocab[w].as_str(), row[w])).collect()
            })
            .collect()
    }

    pub fn top_words_report(&self, n: usize) -> String {
        let mut out = String::from("topic\trank\tword\tprobability\n");
        for (t, words) in self.top_words(n).iter().enumerate() {
            for (r, (w, p)) in words.iter().enumerate() {
                let _ = writeln!(out, "{t}\t{}\t{w}\t{p:.6}", r + 1);
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.k as u64).to_le_bytes())?;
        w.write_all(&(self.vocab.len() as u64).to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        w.write_all(&self.beta.to_le_bytes())?;
        for p in &self.phi {
            w.write_all(&p.to_le_bytes())?;
        }
        for c in &self.word_topic {
            w.write_all(&c.to_le_bytes())?;
        }
        for word in &self.vocab {
            w.write_all(&(word.len() as u32).to_le_bytes())?;
            w.write_all(word.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
            let mut b = [0u8; N];
            r.read_exact(&mut b)
                .map_err(|e| Error::Format(format!("truncated topic model: {e}")))?;
            Ok(b)
        }
        if &take::<4, _>(&mut r)? != MAGIC {
            return Err(Error::Format("not a topic model file".into()));
        }
        let version = u32::from_le_bytes(take(&mut r)?);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported topic model version {version}")));
        }
        let k = u64::from_le_bytes(take(&mut r)?) as usize;
        let v = u64::from_le_bytes(take(&mut r)?) as usize;
        let alpha = f64::from_le_bytes(take(&mut r)?);
        let beta = f64::from_le_bytes(take(&mut r)?);
        if k == 0 || v == 0 {
            return Err(Error::Format("topic model with zero topics or words".into()));
        }
        let mut phi = Vec::with_capacity(k * v);
        for _ in 0..k * v {
            phi.push(f64::from_le_bytes(take(&mut r)?));
        }
        let mut word_topic = Vec::with_capacity(k * v);
        for _ in 0..k * v {
            word_topic.push(u32::from_le_bytes(take(&mut r)?));
        }
        let mut vocab = Vec::with_capacity(v);
        for _ in 0..v {
            let len = u32::from_le_bytes(take(&mut r)?) as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)
                .map_err(|e| Error::Format(format!("truncated vocabulary: {e}")))?;
            vocab.push(String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?);
        }
        let mut totals = vec![0u64; k];
        for w in 0..v {
            for t in 0..k {
                totals[t] += u64::from(word_topic[w * k + t]);
            }
        }
        let mut model = LdaModel::new(k, alpha, beta, vocab, word_topic, totals);
        model.phi = phi;
        Ok(model)
    }
}

pub fn fit_lda<D: AsRef<[String]>>(docs: &[D], config: &LdaConfig) -> Result<LdaFit> {
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.k == 0 {
        return Err(Error::InvalidInput("topic count must be at least 1".into()));
    }
    if config.beta <= 0.0 || config.alpha() <= 0.0 {
        return Err(Error::InvalidInput("Dirichlet hyperparameters must be positive".into()));
    }
    let vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.as_ref().iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocab.is_empty() {
        return Err(Error::InvalidInput("empty vocabulary".into()));
    }
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let words: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.as_ref().iter().map(|w| index[w.as_str()]).collect())
        .collect();

    let (k, v) = (config.k, vocab.len());
    let alpha = config.alpha();
    let beta = config.beta;
    let vb = v as f64 * beta;
    let mut rng = seed::rng(config.seed);

    let mut word_topic = vec![0u32; v * k];
    let mut doc_topic = vec![vec![0u32; k]; words.len()];
    let mut totals = vec![0u64; k];
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(words.len());
    for (d, doc) in words.iter().enumerate() {
        let zd: Vec<usize> = doc
            .iter()
            .map(|&w| {
                let t = rng.gen_range(0..k);
                word_topic[w * k + t] += 1;
                doc_topic[d][t] += 1;
                totals[t] += 1;
                t
            })
            .collect();
        z.push(zd);
    }

    let mut trace = vec![(0, log_likelihood(k, v, beta, &word_topic, &totals))];
    let mut tally: Vec<Vec<u32>> = words.iter().map(|d| vec![0u32; d.len() * k]).collect();
    let burn_in = config.iterations / 2;
    let mut weights = vec![0.0; k];
    for sweep in 1..=config.iterations {
        for (d, doc) in words.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = z[d][i];
                word_topic[w * k + old] -= 1;
                doc_topic[d][old] -= 1;
                totals[old] -= 1;
                for t in 0..k {
                    weights[t] = (f64::from(doc_topic[d][t]) + alpha) * (f64::from(word_topic[w * k + t]) + beta)
                        / (totals[t] as f64 + vb);
                }
                let new = sample_discrete(&mut rng, &weights);
                z[d][i] = new;
                word_topic[w * k + new] += 1;
                doc_topic[d][new] += 1;
                totals[new] += 1;
                if sweep > burn_in {
                    tally[d][i * k + new] += 1;
                }
            }
        }
        if sweep % LIKELIHOOD_EVERY == 0 {
            trace.push((sweep, log_likelihood(k, v, beta, &word_topic, &totals)));
        }
    }

    let modal_assignments = z
        .iter()
        .zip(&tally)
        .map(|(zd, td)| {
            zd.iter()
                .enumerate()
                .map(|(i, &last)| {
                    let counts = &td[i * k..(i + 1) * k];
                    let best = (0..k).max_by(|a, b| counts[*a].cmp(&counts[*b]).then(b.cmp(a))).unwrap_or(last);
                    if counts[best] == 0 {
                        last
                    } else {
                        best
                    }
                })
                .collect()
        })
        .collect();

    Ok(LdaFit {
        model: LdaModel::new(k, alpha, beta, vocab, word_topic, totals),
        log_likelihood: trace,
        modal_assignments,
    })
}

/// Topic mixture of an unseen document by Gibbs fold-in against frozen
/// training counts, averaged over the second half of the sweeps. Words
/// outside the model vocabulary are ignored.
pub fn infer_theta(model: &LdaModel, doc: &[String], iterations: usize, seed: u64) -> Vec<f64> {
    let k = model.k;
    let words: Vec<usize> = doc.iter().filter_map(|w| model.word_index(w)).collect();
    let n = words.len();
    let prior = || vec![1.0 / k as f64; k];
    if n == 0 {
        return prior();
    }
    let vb = model.vocab_size() as f64 * model.beta;
    let mut rng = seed::rng(seed);
    let mut doc_topic = vec![0u32; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            doc_topic[t] += 1;
            t
        })
        .collect();
    let denom = n as f64 + k as f64 * model.alpha;
    let theta_of = |counts: &[u32]| -> Vec<f64> {
        counts.iter().map(|c| (f64::from(*c) + model.alpha) / denom).collect()
    };
    let iterations = iterations.max(1);
    let burn_in = iterations / 2;
    let mut acc = vec![0.0; k];
    let mut samples = 0usize;
    let mut weights = vec![0.0; k];
    for sweep in 1..=iterations {
        for (i, &w) in words.iter().enumerate() {
            doc_topic[z[i]] -= 1;
            for t in 0..k {
                weights[t] = (f64::from(doc_topic[t]) + model.alpha)
                    * (f64::from(model.word_topic[w * k + t]) + model.beta)
                    / (model.topic_totals[t] as f64 + vb);
            }
            z[i] = sample_discrete(&mut rng, &weights);
            doc_topic[z[i]] += 1;
        }
        if sweep > burn_in {
            for (a, t) in acc.iter_mut().zip(theta_of(&doc_topic)) {
                *a += t;
            }
            samples += 1;
        }
    }
    let mut theta: Vec<f64> = acc.iter().map(|a| a / samples as f64).collect();
    let s: f64 = theta.iter().sum();
    theta.iter_mut().for_each(|t| *t /= s);
    theta
}

/// Fraction of tokens whose assigned topic matches the reference topic
/// under the best one-to-one relabelling. Exhaustive over permutations.
pub fn alignment_accuracy(assigned: &[Vec<usize>], truth: &[Vec<usize>], k: usize) -> Result<f64> {
    if assigned.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: assigned.len(),
            right: truth.len(),
        });
    }
    if k > 8 {
        return Err(Error::InvalidInput("permutation search supports at most 8 topics".into()));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    let mut total = 0usize;
    for (a, t) in assigned.iter().zip(truth) {
        if a.len() != t.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: t.len(),
            });
        }
        for (x, y) in a.iter().zip(t) {
            if *x >= k || *y >= k {
                return Err(Error::InvalidInput(format!("topic id out of range 0..{k}")));
            }
            confusion[*x][*y] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptySample);
    }
    fn best(conf: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == conf.len() {
            return 0;
        }
        let mut top = 0;
        for c in 0..conf.len() {
            if !used[c] {
                used[c] = true;
                top = top.max(conf[row][c] + best(conf, row + 1, used));
                used[c] = false;
            }
        }
        top
    }
    Ok(best(&confusion, 0, &mut vec![false; k]) as f64 / total as f64)
}
