//! Hypothesis tests, agreement measures, and attention-based error analysis.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::hash::Hash;

use rayon::prelude::*;

use crate::text::COMMENT_BEGIN_TOKEN;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // the alternating series converges slowly here; use the dual form
        let y = -std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut s = 0.0;
        for j in 0..100 {
            let k = (2 * j + 1) as f64;
            let term = (k * k * y).exp();
            s += term;
            if term < 1e-16 {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = j as f64;
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    // largest |i/n1 - j/n2| kept as the integer |i*n2 - j*n1|, divided once
    let mut num: usize = 0;
    while i < n1 && j < n2 {
        // step both ECDFs past the smallest remaining value, ties together
        let v = x[i].min(y[j]);
        while i < n1 && x[i] <= v {
            i += 1;
        }
        while j < n2 && y[j] <= v {
            j += 1;
        }
        num = num.max((i * n2).abs_diff(j * n1));
    }
    let d = num as f64 / (n1 * n2) as f64;
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q(ne.sqrt() * d),
        n1,
        n2,
    })
}

/// Average ranks (1-based), ties share their mean rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("zero variance".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::Undefined("need at least two observations".into()));
    }
    pearson(&average_ranks(a), &average_ranks(b))
        .map_err(|_| Error::Undefined("zero rank variance".into()))
}

/// Cohen's kappa with chance agreement from the product of marginals.
pub fn cohen_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let mut ma: HashMap<&T, f64> = HashMap::new();
    let mut mb: HashMap<&T, f64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *ma.entry(x).or_default() += 1.0;
        *mb.entry(y).or_default() += 1.0;
    }
    let expected: f64 = ma
        .iter()
        .map(|(k, ca)| ca * mb.get(k).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - expected).abs() < 1e-15 {
        return Err(Error::Undefined("chance agreement is 1".into()));
    }
    Ok((observed - expected) / (1.0 - expected))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

impl Bucket {
    pub fn of(predicted_positive: bool, gold_positive: bool) -> Bucket {
        match (predicted_positive, gold_positive) {
            (true, true) => Bucket::TruePositive,
            (true, false) => Bucket::FalsePositive,
            (false, true) => Bucket::FalseNegative,
            (false, false) => Bucket::TrueNegative,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Bucket::TruePositive => "TP",
            Bucket::FalsePositive => "FP",
            Bucket::FalseNegative => "FN",
            Bucket::TrueNegative => "TN",
        }
    }

    pub const ALL: [Bucket; 4] = [
        Bucket::TruePositive,
        Bucket::FalsePositive,
        Bucket::FalseNegative,
        Bucket::TrueNegative,
    ];
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Tokens and attention weights of one document plus its outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub instance_id: String,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
    pub prediction: String,
    pub gold: String,
    pub bucket: Bucket,
}

/// Attention weights of a document, before its outcome is known.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDoc {
    pub instance_id: String,
    pub tokens: Vec<String>,
    pub weights: Vec<f64>,
}

/// Partitions documents into TP/FP/FN/TN with `positive` as the positive class.
pub fn error_buckets(
    predictions: &[String],
    gold: &[String],
    docs: Vec<WeightedDoc>,
    positive: &str,
) -> Result<BTreeMap<Bucket, Vec<AttentionReport>>> {
    if predictions.len() != gold.len() || gold.len() != docs.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: gold.len().max(docs.len()),
        });
    }
    let mut out: BTreeMap<Bucket, Vec<AttentionReport>> = Bucket::ALL.iter().map(|b| (*b, Vec::new())).collect();
    for ((p, g), d) in predictions.iter().zip(gold).zip(docs) {
        let bucket = Bucket::of(p == positive, g == positive);
        out.get_mut(&bucket).expect("all buckets present").push(AttentionReport {
            instance_id: d.instance_id,
            tokens: d.tokens,
            weights: d.weights,
            prediction: p.clone(),
            gold: g.clone(),
            bucket,
        });
    }
    Ok(out)
}

fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Per-document min-max rescaling of weights to [0, 1]; a constant vector maps to 0.
pub fn heat_intensities(weights: &[f64]) -> Vec<f64> {
    let lo = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weights
        .iter()
        .map(|w| if hi > lo { (w - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// Background colour for an intensity in [0, 1], pale to deep blue.
pub fn heat_color(intensity: f64) -> (u8, u8, u8) {
    let x = intensity.clamp(0.0, 1.0);
    let r = 0.85 * (1.0 - x);
    let g = 0.86 - 0.77 * x;
    let b = 0.95;
    let q = |v: f64| (v * 255.0).round() as u8;
    (q(r), q(g), q(b))
}

/// Standalone HTML heat map; each comment delimiter starts a new paragraph.
pub fn render_heatmap(report: &AttentionReport) -> String {
    let mut s = String::new();
    let id = html_escape(&report.instance_id);
    let _ = writeln!(s, "<!DOCTYPE html>");
    let _ = writeln!(s, "<html>");
    let _ = writeln!(s, "<head><meta charset=\"utf-8\"><title>{id}</title></head>");
    let _ = writeln!(s, "<body>");
    let _ = writeln!(s, "<h3>{id}</h3>");
    let _ = writeln!(
        s,
        "<p class=\"meta\">prediction={} gold={} bucket={}</p>",
        html_escape(&report.prediction),
        html_escape(&report.gold),
        report.bucket
    );
    let intensity = heat_intensities(&report.weights);
    let mut open = false;
    for (tok, x) in report.tokens.iter().zip(intensity) {
        if tok == COMMENT_BEGIN_TOKEN || !open {
            if open {
                s.push_str("</p>\n");
            }
            s.push_str("<p>");
            open = true;
        } else {
            s.push(' ');
        }
        let (r, g, b) = heat_color(x);
        let fg = if x > 0.5 { "#fff" } else { "#000" };
        let _ = write!(
            s,
            "<span style=\"background-color:rgb({r},{g},{b});color:{fg}\">{}</span>",
            html_escape(tok)
        );
    }
    if open {
        s.push_str("</p>\n");
    }
    let _ = writeln!(s, "</body>");
    let _ = writeln!(s, "</html>");
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriggerPhrase {
    pub phrase: String,
    pub mean_weight: f64,
    pub count: usize,
}

/// Ranks n-grams across a bucket by the mean weight of their member tokens
/// (averaged over every occurrence); ties broken lexicographically.
/// N-grams spanning a comment delimiter are skipped.
pub fn top_trigger_ngrams(reports: &[AttentionReport], n: usize, top_k: usize) -> Vec<TriggerPhrase> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    if n == 0 {
        return Vec::new();
    }
    for r in reports {
        if r.tokens.len() < n {
            continue;
        }
        for start in 0..=r.tokens.len() - n {
            let gram = &r.tokens[start..start + n];
            if gram.iter().any(|t| t == COMMENT_BEGIN_TOKEN) {
                continue;
            }
            let mean = r.weights[start..start + n].iter().sum::<f64>() / n as f64;
            let e = acc.entry(gram.join(" ")).or_insert((0.0, 0));
            e.0 += mean;
            e.1 += 1;
        }
    }
    let mut out: Vec<TriggerPhrase> = acc
        .into_iter()
        .map(|(phrase, (sum, count))| TriggerPhrase {
            phrase,
            mean_weight: sum / count as f64,
            count,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_weight
            .total_cmp(&a.mean_weight)
            .then_with(|| a.phrase.cmp(&b.phrase))
    });
    out.truncate(top_k);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupScores {
    pub group: String,
    pub ids: Vec<String>,
    pub scores: Vec<f64>,
}

impl GroupScores {
    pub fn mean(&self) -> f64 {
        self.scores.iter().sum::<f64>() / self.scores.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolation {
    pub first: GroupScores,
    pub second: GroupScores,
    pub ks: KsResult,
}

impl Extrapolation {
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "group_a={}", self.first.group);
        let _ = writeln!(s, "group_a_n={}", self.first.scores.len());
        let _ = writeln!(s, "group_a_mean={}", self.first.mean());
        let _ = writeln!(s, "group_b={}", self.second.group);
        let _ = writeln!(s, "group_b_n={}", self.second.scores.len());
        let _ = writeln!(s, "group_b_mean={}", self.second.mean());
        let _ = writeln!(s, "ks_statistic={}", self.ks.statistic);
        let _ = writeln!(s, "ks_p_value={}", self.ks.p_value);
        s
    }
}

/// Scores held-out documents of two groups with a trained regressor and
/// compares the score distributions. `items` are `(id, group, document)`.
pub fn extrapolate<D, F>(
    score: F,
    items: &[(String, String, D)],
    groups: (&str, &str),
    train_ids: &BTreeSet<String>,
) -> Result<Extrapolation>
where
    D: Sync,
    F: Fn(&D) -> Result<f64> + Sync,
{
    let leaked: Vec<String> = items
        .iter()
        .filter(|(id, _, _)| train_ids.contains(id))
        .map(|(id, _, _)| id.clone())
        .collect();
    if !leaked.is_empty() {
        return Err(Error::Leakage(leaked));
    }
    let scores: Vec<f64> = items
        .par_iter()
        .map(|(_, _, d)| score(d))
        .collect::<Result<_>>()?;
    let mut first = GroupScores {
        group: groups.0.to_string(),
        ids: Vec::new(),
        scores: Vec::new(),
    };
    let mut second = GroupScores {
        group: groups.1.to_string(),
        ids: Vec::new(),
        scores: Vec::new(),
    };
    for ((id, group, _), s) in items.iter().zip(scores) {
        let target = if group == groups.0 {
            &mut first
        } else if group == groups.1 {
            &mut second
        } else {
            continue;
        };
        target.ids.push(id.clone());
        target.scores.push(s);
    }
    let ks = ks_two_sample(&first.scores, &second.scores)?;
    Ok(Extrapolation { first, second, ks })
}
