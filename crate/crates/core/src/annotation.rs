//! Crowd annotation aggregation.
//!
//! Gold labels are estimated with an annotator-competence model fitted by
//! EM: every item has a hidden true label drawn uniformly from `L` labels;
//! annotator `j` either copies it (probability `1 - theta_j`) or "spams" a
//! label drawn from its own preference distribution `xi_j`. The M-step adds
//! `smoothing` pseudo-counts, which makes the procedure MAP-EM under
//! Beta/Dirichlet priors; the tracked objective therefore includes the
//! matching log-prior and never decreases within a restart.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Read;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    items: Vec<String>,
    annotators: Vec<String>,
    item_index: HashMap<String, usize>,
    annotator_index: HashMap<String, usize>,
    /// per item: (annotator, label), sorted by annotator index
    by_item: Vec<Vec<(usize, usize)>>,
    label_count: usize,
}

impl AnnotationSet {
    pub fn new(label_count: usize) -> Self {
        AnnotationSet {
            items: Vec::new(),
            annotators: Vec::new(),
            item_index: HashMap::new(),
            annotator_index: HashMap::new(),
            by_item: Vec::new(),
            label_count,
        }
    }

    /// Registers an item with no annotations yet.
    pub fn add_item(&mut self, item: &str) -> usize {
        if let Some(&i) = self.item_index.get(item) {
            return i;
        }
        let i = self.items.len();
        self.items.push(item.to_string());
        self.item_index.insert(item.to_string(), i);
        self.by_item.push(Vec::new());
        i
    }

    fn add_annotator(&mut self, annotator: &str) -> usize {
        if let Some(&j) = self.annotator_index.get(annotator) {
            return j;
        }
        let j = self.annotators.len();
        self.annotators.push(annotator.to_string());
        self.annotator_index.insert(annotator.to_string(), j);
        j
    }

    pub fn add(&mut self, item: &str, annotator: &str, label: usize) -> Result<()> {
        if label >= self.label_count {
            return Err(Error::InvalidInput(format!(
                "label {label} outside domain of size {}",
                self.label_count
            )));
        }
        let i = self.add_item(item);
        let j = self.add_annotator(annotator);
        let row = &mut self.by_item[i];
        match row.binary_search_by_key(&j, |(a, _)| *a) {
            Ok(_) => Err(Error::InvalidInput(format!(
                "annotator {annotator} labelled item {item} twice"
            ))),
            Err(pos) => {
                row.insert(pos, (j, label));
                Ok(())
            }
        }
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    /// (annotator id, label) pairs of one item.
    pub fn labels_of(&self, item: usize) -> impl Iterator<Item = (&str, usize)> {
        self.by_item[item]
            .iter()
            .map(|&(j, l)| (self.annotators[j].as_str(), l))
    }

    pub fn annotation_count(&self) -> usize {
        self.by_item.iter().map(Vec::len).sum()
    }

    /// Reads `item_id<TAB>annotator_id<TAB>label` rows (header required).
    /// With `label_count = None` the domain is `max label + 1`.
    pub fn read_tsv<R: Read>(reader: R, label_count: Option<usize>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .has_headers(true)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            if rec.len() != 3 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 3 columns, found {}", rec.len()),
                });
            }
            let label: usize = rec[2].trim().parse().map_err(|e| Error::Parse {
                line,
                message: format!("bad label {:?}: {e}", &rec[2]),
            })?;
            rows.push((rec[0].to_string(), rec[1].to_string(), label));
        }
        let domain = label_count.unwrap_or_else(|| rows.iter().map(|r| r.2 + 1).max().unwrap_or(1));
        let mut set = AnnotationSet::new(domain);
        for (item, annotator, label) in rows {
            set.add(&item, &annotator, label)?;
        }
        Ok(set)
    }

    /// Splits each item's annotations into `groups` disjoint worker groups,
    /// shuffled per item from `seed`. Used to compare independent gold runs.
    pub fn split_groups(&self, groups: usize, seed: u64) -> Vec<AnnotationSet> {
        let mut out: Vec<AnnotationSet> = (0..groups.max(1)).map(|_| AnnotationSet::new(self.label_count)).collect();
        for (i, item) in self.items.iter().enumerate() {
            let mut rows = self.by_item[i].clone();
            let mut rng = seed::rng(seed::derive(seed, seed::hash_str(item)));
            rows.shuffle(&mut rng);
            for g in out.iter_mut() {
                g.add_item(item);
            }
            for (k, (j, label)) in rows.into_iter().enumerate() {
                let g = &mut out[k % groups.max(1)];
                g.add(item, &self.annotators[j], label).expect("labels already validated");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaceConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for MaceConfig {
    fn default() -> Self {
        MaceConfig {
            restarts: 10,
            iterations: 50,
            smoothing: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacePosterior {
    pub items: Vec<String>,
    pub annotators: Vec<String>,
    /// per item: distribution over true labels
    pub posteriors: Vec<Vec<f64>>,
    /// per annotator: probability of spamming
    pub spamming: Vec<f64>,
    /// per annotator: spamming preference over labels
    pub preferences: Vec<Vec<f64>>,
    /// smoothed log-likelihood after each EM update of the winning restart
    pub log_likelihood_trace: Vec<f64>,
    pub best_restart: usize,
}

impl MacePosterior {
    /// Argmax label, lowest label on ties.
    pub fn gold(&self, item: usize) -> usize {
        argmax(&self.posteriors[item])
    }

    pub fn confidence(&self, item: usize) -> f64 {
        self.posteriors[item].iter().copied().fold(0.0, f64::max)
    }

    pub fn final_log_likelihood(&self) -> f64 {
        self.log_likelihood_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct Params {
    theta: Vec<f64>,
    xi: Vec<Vec<f64>>,
}

struct Restart {
    params: Params,
    posteriors: Vec<Vec<f64>>,
    trace: Vec<f64>,
}

/// Posteriors and smoothed log-likelihood for fixed parameters.
fn e_step(a: &AnnotationSet, p: &Params, smoothing: f64) -> (Vec<Vec<f64>>, f64) {
    let l = a.label_count;
    let log_prior = -(l as f64).ln();
    let mut ll = 0.0;
    let mut posts = Vec::with_capacity(a.items.len());
    let mut logp = vec![0.0; l];
    for row in &a.by_item {
        for (t, lp) in logp.iter_mut().enumerate() {
            let mut s = log_prior;
            for &(j, label) in row {
                let copy = if label == t { 1.0 - p.theta[j] } else { 0.0 };
                s += (copy + p.theta[j] * p.xi[j][label]).ln();
            }
            *lp = s;
        }
        let z = log_sum_exp(&logp);
        ll += z;
        posts.push(logp.iter().map(|x| (x - z).exp()).collect());
    }
    if smoothing > 0.0 {
        for (theta, xi) in p.theta.iter().zip(&p.xi) {
            ll += smoothing * (theta.ln() + (1.0 - theta).ln());
            ll += smoothing * xi.iter().map(|x| x.ln()).sum::<f64>();
        }
    }
    (posts, ll)
}

fn m_step(a: &AnnotationSet, posts: &[Vec<f64>], p: &Params, smoothing: f64) -> Params {
    let l = a.label_count;
    let m = a.annotators.len();
    let mut spam = vec![0.0; m];
    let mut spam_label = vec![vec![0.0; l]; m];
    let mut total = vec![0.0; m];
    for (row, post) in a.by_item.iter().zip(posts) {
        for &(j, label) in row {
            let copy = 1.0 - p.theta[j];
            let noise = p.theta[j] * p.xi[j][label];
            // spam is certain unless the true label equals the given one
            let denom = copy + noise;
            let not_spam = if denom > 0.0 { post[label] * copy / denom } else { 0.0 };
            let e = 1.0 - not_spam;
            spam[j] += e;
            spam_label[j][label] += e;
            total[j] += 1.0;
        }
    }
    let theta = (0..m)
        .map(|j| {
            let den = total[j] + 2.0 * smoothing;
            if den > 0.0 {
                (spam[j] + smoothing) / den
            } else {
                0.5
            }
        })
        .collect();
    let xi = (0..m)
        .map(|j| {
            let den = spam[j] + l as f64 * smoothing;
            if den > 0.0 {
                spam_label[j].iter().map(|c| (c + smoothing) / den).collect()
            } else {
                vec![1.0 / l as f64; l]
            }
        })
        .collect();
    Params { theta, xi }
}

fn run_restart(a: &AnnotationSet, config: &MaceConfig, restart_seed: u64) -> Restart {
    let l = a.label_count;
    // per-annotator streams keyed by id keep results independent of annotator order
    let mut theta = Vec::with_capacity(a.annotators.len());
    let mut xi = Vec::with_capacity(a.annotators.len());
    for name in &a.annotators {
        let mut rng = seed::rng(seed::derive(restart_seed, seed::hash_str(name)));
        theta.push(rng.gen_range(0.05..0.95));
        let raw: Vec<f64> = (0..l).map(|_| rng.gen_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        xi.push(raw.into_iter().map(|x| x / s).collect());
    }
    let mut params = Params { theta, xi };
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let (mut posts, mut ll) = e_step(a, &params, config.smoothing);
    trace.push(ll);
    for _ in 0..config.iterations {
        params = m_step(a, &posts, &params, config.smoothing);
        (posts, ll) = e_step(a, &params, config.smoothing);
        trace.push(ll);
    }
    Restart {
        params,
        posteriors: posts,
        trace,
    }
}

/// Fits the annotator-competence model with `restarts` seeded restarts and
/// returns the one with the highest final objective.
pub fn mace_em(a: &AnnotationSet, config: &MaceConfig) -> Result<MacePosterior> {
    if config.restarts == 0 {
        return Err(Error::InvalidInput("restarts must be at least 1".into()));
    }
    if a.label_count == 0 {
        return Err(Error::InvalidInput("label domain is empty".into()));
    }
    let empty: Vec<String> = a
        .items
        .iter()
        .zip(&a.by_item)
        .filter(|(_, row)| row.is_empty())
        .map(|(id, _)| id.clone())
        .collect();
    if !empty.is_empty() || a.items.is_empty() {
        return Err(Error::UnannotatedItems(empty));
    }
    let runs: Vec<Restart> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(a, config, seed::derive(config.seed, r as u64)))
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.trace.last() > runs[best].trace.last() {
            best = r;
        }
    }
    let run = runs.into_iter().nth(best).expect("at least one restart");
    Ok(MacePosterior {
        items: a.items.clone(),
        annotators: a.annotators.clone(),
        posteriors: run.posteriors,
        spamming: run.params.theta,
        preferences: run.params.xi,
        log_likelihood_trace: run.trace,
        best_restart: best,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldItem {
    pub item: String,
    pub label: usize,
    pub confidence: f64,
}

/// Keeps the `ceil(threshold * N)` most confident items (ties by item id),
/// returned in original item order.
pub fn select_confident(p: &MacePosterior, threshold: f64) -> Result<Vec<GoldItem>> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidInput(format!("threshold {threshold} not in (0, 1]")));
    }
    let n = p.items.len();
    // tolerate representation error such as 0.9 * 10 = 9.000000000000002
    let keep = ((threshold * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        p.confidence(b)
            .total_cmp(&p.confidence(a))
            .then_with(|| p.items[a].cmp(&p.items[b]))
    });
    let mut kept: Vec<usize> = order.into_iter().take(keep.min(n)).collect();
    kept.sort_unstable();
    Ok(kept
        .into_iter()
        .map(|i| GoldItem {
            item: p.items[i].clone(),
            label: p.gold(i),
            confidence: p.confidence(i),
        })
        .collect())
}

/// Empirical label distribution per item (all zeros for unannotated items).
pub fn label_distribution(a: &AnnotationSet) -> Vec<Vec<f64>> {
    a.by_item
        .iter()
        .map(|row| {
            let mut d = vec![0.0; a.label_count];
            for &(_, label) in row {
                d[label] += 1.0;
            }
            let n = row.len() as f64;
            if n > 0.0 {
                d.iter_mut().for_each(|x| *x /= n);
            }
            d
        })
        .collect()
}

/// Mean scale value per item; label `i` maps to `points[i]`, or to `i + 1`
/// when `points` is `None` (a 1..=L ordinal scale).
pub fn average_scale(a: &AnnotationSet, points: Option<&[f64]>) -> Result<Vec<f64>> {
    if let Some(p) = points {
        if p.len() != a.label_count {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: a.label_count,
            });
        }
    }
    let value = |label: usize| points.map_or(label as f64 + 1.0, |p| p[label]);
    Ok(a.by_item
        .iter()
        .map(|row| {
            if row.is_empty() {
                f64::NAN
            } else {
                row.iter().map(|&(_, l)| value(l)).sum::<f64>() / row.len() as f64
            }
        })
        .collect())
}

/// Inclusive token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Splits a token item id of the form `<doc_id>#<token_index>`.
pub fn parse_token_item(id: &str) -> Option<(&str, usize)> {
    let (doc, idx) = id.rsplit_once('#')?;
    Some((doc, idx.parse().ok()?))
}

/// Gold spans from binary token annotations. Items are tokens named
/// `<doc_id>#<token_index>`; label 1 marks a token as inside a span. Tokens
/// whose gold label is 1 and which survive `select_confident(threshold)` are
/// merged into maximal contiguous spans per document.
pub fn span_gold(
    tokens: &AnnotationSet,
    threshold: f64,
    config: &MaceConfig,
) -> Result<BTreeMap<String, Vec<Span>>> {
    if tokens.label_count != 2 {
        return Err(Error::InvalidInput("span annotations must be binary".into()));
    }
    let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for id in &tokens.items {
        let (doc, _) = parse_token_item(id)
            .ok_or_else(|| Error::InvalidInput(format!("token item {id:?} is not <doc>#<index>")))?;
        out.entry(doc.to_string()).or_default();
    }
    let post = mace_em(tokens, config)?;
    for g in select_confident(&post, threshold)? {
        if g.label == 1 {
            let (doc, idx) = parse_token_item(&g.item).expect("checked above");
            out.get_mut(doc).expect("registered").push(idx);
        }
    }
    Ok(out
        .into_iter()
        .map(|(doc, mut idx)| {
            idx.sort_unstable();
            idx.dedup();
            let mut spans: Vec<Span> = Vec::new();
            for i in idx {
                match spans.last_mut() {
                    Some(s) if s.end + 1 == i => s.end = i,
                    _ => spans.push(Span { start: i, end: i }),
                }
            }
            (doc, spans)
        })
        .collect())
}

/// Rows `item_id, gold_label, confidence`.
pub fn gold_table(gold: &[GoldItem]) -> String {
    let mut s = String::from("item_id\tgold_label\tconfidence\n");
    for g in gold {
        let _ = writeln!(s, "{}\t{}\t{}", g.item, g.label, g.confidence);
    }
    s
}
