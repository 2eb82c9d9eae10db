//! Tokenization, vocabularies and word-vector tables.

use std::collections::HashMap;
use std::io::BufRead;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{seed, Error, Result};

pub const PAD: usize = 0;
pub const OOV: usize = 1;
pub const COMMENT_BEGIN: usize = 2;

pub const PAD_TOKEN: &str = "<pad>";
pub const OOV_TOKEN: &str = "OOV";
pub const COMMENT_BEGIN_TOKEN: &str = "OOV_comment_begin";

const RESERVED: [&str; 3] = [PAD_TOKEN, OOV_TOKEN, COMMENT_BEGIN_TOKEN];
const CLITICS: [&str; 6] = ["s", "re", "ve", "d", "ll", "m"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
}

fn is_url(chunk: &str) -> bool {
    let lower = chunk.to_ascii_lowercase();
    let trimmed = lower.trim_start_matches(['(', '[', '<', '"', '\'']);
    trimmed.starts_with("http://") || trimmed.starts_with("https://") || trimmed.starts_with("www.")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits a word carrying an internal apostrophe into stem and clitics.
fn push_word(word: &str, out: &mut Vec<String>) {
    let lower = word.to_lowercase();
    let chars: Vec<char> = word.chars().collect();
    let n = chars.len();
    if n > 3
        && (lower.ends_with("n't") || lower.ends_with("n\u{2019}t"))
        && is_word_char(chars[n - 4])
    {
        let cut = word.len() - chars[n - 3..].iter().map(|c| c.len_utf8()).sum::<usize>();
        push_word(&word[..cut], out);
        out.push(word[cut..].to_string());
        return;
    }
    if let Some(pos) = word.rfind(is_apostrophe) {
        let tail: String = lower[pos..].chars().skip(1).collect();
        if pos > 0 && CLITICS.contains(&tail.as_str()) {
            push_word(&word[..pos], out);
            out.push(word[pos..].to_string());
            return;
        }
    }
    out.push(word.to_string());
}

fn tokenize_chunk(chunk: &str, out: &mut Vec<String>) {
    let chars: Vec<(usize, char)> = chunk.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if is_word_char(c) {
            let mut j = i + 1;
            while j < chars.len() {
                let c = chars[j].1;
                let glued = is_apostrophe(c)
                    && j + 1 < chars.len()
                    && is_word_char(chars[j + 1].1)
                    && is_word_char(chars[j - 1].1);
                if is_word_char(c) || glued {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = chars.get(j).map_or(chunk.len(), |(b, _)| *b);
            push_word(&chunk[start..end], out);
            i = j;
        } else if is_apostrophe(c) {
            // standalone clitic such as "'s" or "'ve"
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_alphabetic() {
                j += 1;
            }
            let end = chars.get(j).map_or(chunk.len(), |(b, _)| *b);
            let tail = chunk[start + c.len_utf8()..end].to_lowercase();
            if j > i + 1 && CLITICS.contains(&tail.as_str()) {
                out.push(chunk[start..end].to_string());
                i = j;
            } else {
                out.push(c.to_string());
                i += 1;
            }
        } else {
            out.push(c.to_string());
            i += 1;
        }
    }
}

/// Rule-based tokenizer: whitespace and punctuation splits, English clitics
/// split off ("don't" -> "do" "n't"), URL-like chunks replaced with `OOV`.
pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with(text, TokenizerConfig::default())
}

pub fn tokenize_with(text: &str, config: TokenizerConfig) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        if is_url(chunk) {
            out.push(OOV_TOKEN.to_string());
        } else {
            tokenize_chunk(chunk, &mut out);
        }
    }
    if config.lowercase {
        for t in &mut out {
            if !RESERVED.contains(&t.as_str()) {
                *t = t.to_lowercase();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::from_tokens(std::iter::empty::<String>())
    }
}

impl Vocabulary {
    /// Builds a vocabulary from non-reserved tokens in index order.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: RESERVED.iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect(),
        };
        for t in tokens {
            let t = t.into();
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED.len()
    }

    /// Index of `token`, falling back to OOV.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(OOV)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Non-reserved tokens in index order.
    pub fn words(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    /// SHA-256 over the token list.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        h.finalize().into()
    }

    pub fn encode(&self, tokens: &[String]) -> TokenizedDoc {
        TokenizedDoc {
            tokens: tokens.to_vec(),
            indices: tokens.iter().map(|t| self.lookup(t)).collect(),
        }
    }
}

/// Frequency descending, then lexicographic; tokens below `min_count` dropped.
pub fn build_vocab<D: AsRef<[String]>>(docs: &[D], min_count: usize) -> Vocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        for t in doc.as_ref() {
            if !RESERVED.contains(&t.as_str()) {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut entries: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count.max(1))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(entries.into_iter().map(|(t, _)| t))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedDoc {
    pub tokens: Vec<String>,
    pub indices: Vec<usize>,
}

impl TokenizedDoc {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Dense word vectors, one row per vocabulary entry. Row `PAD` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        Ok(EmbeddingTable { dim, data })
    }

    /// Seeded uniform rows in [-0.25, 0.25], PAD zeroed.
    pub fn random(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut data: Vec<f64> = (0..vocab_size * dim).map(|_| rng.gen_range(-0.25..=0.25)).collect();
        data[PAD * dim..(PAD + 1) * dim].fill(0.0);
        EmbeddingTable { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Reads a textual vector file (`token v1 .. vd` per line, optional
/// `<count> <dim>` header). Vocabulary words missing from the file get
/// seeded random rows.
pub fn load_embeddings<R: BufRead>(reader: R, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut found: HashMap<usize, Vec<f64>> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if lineno == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
            continue;
        }
        let values = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: "vector has no components".into(),
                })
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {d} components, found {}", values.len()),
                })
            }
            Some(_) => {}
        }
        if let Some(&idx) = vocab.index.get(fields[0]) {
            if idx != PAD {
                found.entry(idx).or_insert(values);
            }
        }
    }
    let dim = dim.ok_or_else(|| Error::Parse {
        line: 0,
        message: "vector file contains no vectors".into(),
    })?;
    let mut table = EmbeddingTable::random(vocab.len(), dim, seed);
    for (idx, values) in found {
        table.data[idx * dim..(idx + 1) * dim].copy_from_slice(&values);
    }
    Ok(table)
}

/// Mean of the rows of the document's non-PAD tokens; zero for empty docs.
pub fn avg_vector(doc: &TokenizedDoc, table: &EmbeddingTable) -> Vec<f64> {
    let mut out = vec![0.0; table.dim()];
    let mut n = 0usize;
    for &idx in doc.indices.iter().filter(|&&i| i != PAD) {
        for (o, v) in out.iter_mut().zip(table.row(idx)) {
            *o += v;
        }
        n += 1;
    }
    if n > 0 {
        for o in &mut out {
            *o /= n as f64;
        }
    }
    out
}

/// Vocabulary, vectors and tokenizer settings bundled for encoding raw text.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    pub tokenizer: TokenizerConfig,
}

impl Encoder {
    pub fn encode(&self, text: &str) -> TokenizedDoc {
        self.vocab.encode(&tokenize_with(text, self.tokenizer))
    }

    pub fn avg_vector(&self, text: &str) -> Vec<f64> {
        avg_vector(&self.encode(text), &self.table)
    }
}
