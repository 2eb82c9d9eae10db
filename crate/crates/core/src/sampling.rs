//! Dataset construction: similarity-matched binary samples, original-post
//! groups, and thread-context triplets.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::corpus::{posts_in_order, DiscussionTree, PostRecord};
use crate::dataset::{self, DatasetRecord, Label};
use crate::text::{avg_vector, Encoder, TokenizedDoc, COMMENT_BEGIN_TOKEN};
use crate::{Error, Result};

/// Posts preceding an outcome post in a triplet instance.
pub const CONTEXT_POSTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedPair {
    pub positive: String,
    pub negative: String,
    pub score: f64,
}

/// A document ready for similarity matching.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub doc: TokenizedDoc,
}

fn as_candidates(owned: &[(String, TokenizedDoc)]) -> Vec<Candidate<'_>> {
    owned
        .iter()
        .map(|(id, doc)| Candidate { id, doc: doc.clone() })
        .collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine of average vectors times the length penalty `1 / (1 + |len(p) - len(c)|)`.
pub fn similarity(p_vec: &[f64], p_len: usize, c_vec: &[f64], c_len: usize) -> f64 {
    cosine(p_vec, c_vec) / (1.0 + p_len.abs_diff(c_len) as f64)
}

/// Greedy matching: positives in the given order each take their best
/// still-unused candidate (lowest index on ties).
pub fn match_negatives(
    positives: &[Candidate<'_>],
    candidates: &[Candidate<'_>],
    encoder: &Encoder,
) -> Result<Vec<MatchedPair>> {
    if candidates.len() < positives.len() {
        return Err(Error::InsufficientCandidates {
            needed: positives.len(),
            available: candidates.len(),
        });
    }
    let cand_vecs: Vec<(Vec<f64>, usize)> = candidates
        .par_iter()
        .map(|c| (avg_vector(&c.doc, &encoder.table), c.doc.len()))
        .collect();
    let mut used = vec![false; candidates.len()];
    let mut out = Vec::with_capacity(positives.len());
    for p in positives {
        let pv = avg_vector(&p.doc, &encoder.table);
        let best = cand_vecs
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, (cv, cl))| (i, similarity(&pv, p.doc.len(), cv, *cl)))
            .reduce_with(|a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            })
            .expect("enough candidates checked above");
        used[best.0] = true;
        out.push(MatchedPair {
            positive: p.id.to_string(),
            negative: candidates[best.0].id.to_string(),
            score: best.1,
        });
    }
    Ok(out)
}

/// Balanced ad hominem vs. matched negatives drawn from posts that break a
/// different rule or earned a delta. Records come in (positive, negative) pairs.
pub fn sample_binary_dataset(trees: &[DiscussionTree], encoder: &Encoder) -> Result<Vec<DatasetRecord>> {
    let posts: Vec<&PostRecord> = posts_in_order(trees).collect();
    let positives: Vec<&PostRecord> = posts.iter().copied().filter(|p| p.is_ad_hominem()).collect();
    if positives.is_empty() {
        return Err(Error::NoQualifying("corpus has no ad hominem posts".into()));
    }
    let pool: Vec<&PostRecord> = posts
        .iter()
        .copied()
        .filter(|p| !p.is_submission() && !p.is_ad_hominem() && (p.violates_other_rule() || p.delta_awarded))
        .collect();
    let cand = |p: &'_ PostRecord| -> (String, TokenizedDoc) { (p.id.clone(), encoder.encode(&p.body)) };
    let pos_owned: Vec<_> = positives.iter().map(|p| cand(p)).collect();
    let neg_owned: Vec<_> = pool.iter().map(|p| cand(p)).collect();
    let pos = as_candidates(&pos_owned);
    let neg = as_candidates(&neg_owned);
    let pairs = match_negatives(&pos, &neg, encoder)?;
    let body = |id: &str| -> String {
        posts
            .iter()
            .find(|p| p.id == id)
            .map(|p| p.body.clone())
            .unwrap_or_default()
    };
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for pair in pairs {
        out.push(DatasetRecord {
            instance_id: pair.positive.clone(),
            label: Label::Class(dataset::AD_HOMINEM.into()),
            text: body(&pair.positive),
            post_ids: vec![pair.positive.clone()],
        });
        out.push(DatasetRecord {
            instance_id: pair.negative.clone(),
            label: Label::Class(dataset::NON_AD_HOMINEM.into()),
            text: body(&pair.negative),
            post_ids: vec![pair.negative.clone()],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
pub struct OpGroups<'a> {
    /// submissions with ad hominem somewhere and no delta
    pub ad_hominem: Vec<&'a PostRecord>,
    /// submissions with a delta and no ad hominem
    pub delta: Vec<&'a PostRecord>,
}

impl OpGroups<'_> {
    pub fn to_records(&self) -> Vec<DatasetRecord> {
        let rec = |p: &PostRecord, label: &str| DatasetRecord {
            instance_id: p.id.clone(),
            label: Label::Class(label.into()),
            text: p.full_text(),
            post_ids: vec![p.id.clone()],
        };
        self.ad_hominem
            .iter()
            .map(|p| rec(p, dataset::AD_HOMINEM_GROUP))
            .chain(self.delta.iter().map(|p| rec(p, dataset::DELTA_GROUP)))
            .collect()
    }
}

pub fn sample_op_groups(trees: &[DiscussionTree]) -> OpGroups<'_> {
    let mut groups = OpGroups::default();
    for tree in trees {
        let has_ah = tree.posts().iter().any(PostRecord::is_ad_hominem);
        let has_delta = tree.posts().iter().any(|p| p.delta_awarded);
        match (has_ah, has_delta) {
            (true, false) => groups.ad_hominem.push(tree.submission()),
            (false, true) => groups.delta.push(tree.submission()),
            _ => {}
        }
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletLabel {
    AdHominem,
    Delta,
}

impl TripletLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TripletLabel::AdHominem => dataset::AD_HOMINEM,
            TripletLabel::Delta => dataset::DELTA,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletInstance {
    pub instance_id: String,
    pub label: TripletLabel,
    /// id of the outcome post; it identifies the thread prefix uniquely
    pub thread_id: String,
    /// context post ids, oldest first
    pub context_ids: Vec<String>,
    pub text: String,
}

impl TripletInstance {
    pub fn to_record(&self) -> DatasetRecord {
        DatasetRecord {
            instance_id: self.instance_id.clone(),
            label: Label::Class(self.label.as_str().into()),
            text: self.text.clone(),
            post_ids: self.context_ids.clone(),
        }
    }
}

/// Outcome posts with three predecessors written by exactly two people
/// (outcome author included). Returns `(outcome, context oldest-first)`.
pub fn two_person_contexts<'a>(
    tree: &'a DiscussionTree,
    outcome: impl Fn(&PostRecord) -> bool,
) -> Vec<(&'a PostRecord, Vec<&'a PostRecord>)> {
    let mut out = Vec::new();
    for post in tree.posts() {
        if !outcome(post) {
            continue;
        }
        let ancestors = tree.ancestors(&post.id);
        if ancestors.len() < CONTEXT_POSTS {
            continue;
        }
        let mut context: Vec<&PostRecord> = ancestors[..CONTEXT_POSTS].to_vec();
        context.reverse();
        let authors: HashSet<&str> = context
            .iter()
            .chain(std::iter::once(&post))
            .map(|p| p.author.as_str())
            .collect();
        if authors.len() == 2 {
            out.push((post, context));
        }
    }
    out
}

/// Concatenates posts oldest-first, each preceded by the comment delimiter.
pub fn context_text(context: &[&PostRecord]) -> String {
    context
        .iter()
        .map(|p| format!("{COMMENT_BEGIN_TOKEN} {}", p.body))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Balanced thread-context instances: contexts before ad hominem outcomes,
/// each matched to the most similar unused context before a delta outcome.
pub fn sample_triplets(trees: &[DiscussionTree], encoder: &Encoder) -> Result<Vec<TripletInstance>> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for tree in trees {
        positives.extend(two_person_contexts(tree, PostRecord::is_ad_hominem));
        negatives.extend(two_person_contexts(tree, |p| p.delta_awarded && !p.is_ad_hominem()));
    }
    if positives.is_empty() {
        return Err(Error::NoQualifying("no two-person thread ends in ad hominem".into()));
    }
    let texts_pos: Vec<String> = positives.iter().map(|(_, c)| context_text(c)).collect();
    let texts_neg: Vec<String> = negatives.iter().map(|(_, c)| context_text(c)).collect();
    let encode_all = |items: &[(&PostRecord, Vec<&PostRecord>)], texts: &[String]| -> Vec<(String, TokenizedDoc)> {
        items
            .iter()
            .zip(texts)
            .map(|((o, _), t)| (o.id.clone(), encoder.encode(t)))
            .collect()
    };
    let pos_owned = encode_all(&positives, &texts_pos);
    let neg_owned = encode_all(&negatives, &texts_neg);
    let pairs = match_negatives(&as_candidates(&pos_owned), &as_candidates(&neg_owned), encoder)?;

    let make = |outcome: &PostRecord, context: &[&PostRecord], text: &str, label: TripletLabel| TripletInstance {
        instance_id: format!(
            "{}_{}",
            if label == TripletLabel::AdHominem { "ah" } else { "delta" },
            outcome.id
        ),
        label,
        thread_id: outcome.id.clone(),
        context_ids: context.iter().map(|p| p.id.clone()).collect(),
        text: text.to_string(),
    };
    let mut out = Vec::with_capacity(pairs.len() * 2);
    for (k, pair) in pairs.iter().enumerate() {
        let (po, pc) = &positives[k];
        out.push(make(po, pc, &texts_pos[k], TripletLabel::AdHominem));
        let j = negatives
            .iter()
            .position(|(o, _)| o.id == pair.negative)
            .expect("matched id comes from the pool");
        let (no, nc) = &negatives[j];
        out.push(make(no, nc, &texts_neg[j], TripletLabel::Delta));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ingest_lines;
    use crate::text::{build_vocab, tokenize, EmbeddingTable, TokenizerConfig};

    fn encoder_for(texts: &[&str]) -> Encoder {
        let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let vocab = build_vocab(&docs, 1);
        let table = EmbeddingTable::random(vocab.len(), 8, 3);
        Encoder {
            vocab,
            table,
            tokenizer: TokenizerConfig::default(),
        }
    }

    #[test]
    fn identical_text_is_chosen_with_score_one() {
        let enc = encoder_for(&["you are rude", "the sky is blue today", "you are rude"]);
        let p = [Candidate { id: "p", doc: enc.encode("you are rude") }];
        let c = [
            Candidate { id: "c0", doc: enc.encode("the sky is blue today") },
            Candidate { id: "c1", doc: enc.encode("you are rude") },
        ];
        let pairs = match_negatives(&p, &c, &enc).unwrap();
        assert_eq!(pairs[0].negative, "c1");
        assert!((pairs[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn length_penalty_breaks_equal_cosine() {
        let enc = encoder_for(&["a b"]);
        let p = [Candidate { id: "p", doc: enc.encode("a b") }];
        // repeating the same tokens keeps the average vector (cosine 1) but adds length
        let long = "a b a b a b a b a b a b";
        let c = [
            Candidate { id: "long", doc: enc.encode(long) },
            Candidate { id: "same", doc: enc.encode("b a") },
        ];
        let pairs = match_negatives(&p, &c, &enc).unwrap();
        assert_eq!(pairs[0].negative, "same");
    }

    #[test]
    fn shortfall_is_reported() {
        let enc = encoder_for(&["x"]);
        let p = [
            Candidate { id: "a", doc: enc.encode("x") },
            Candidate { id: "b", doc: enc.encode("x") },
        ];
        let c = [Candidate { id: "c", doc: enc.encode("x") }];
        assert!(matches!(
            match_negatives(&p, &c, &enc),
            Err(Error::InsufficientCandidates { needed: 2, available: 1 })
        ));
    }

    fn line(id: &str, parent: Option<&str>, author: &str, t: i64, rules: &[u32], delta: bool) -> String {
        let parent = parent.map(|p| format!("\"parent_id\":\"{p}\",")).unwrap_or_default();
        format!(
            "{{\"id\":\"{id}\",{parent}\"submission_id\":\"s\",\"author\":\"{author}\",\"body\":\"text {id}\",\"created_at\":{t},\"violated_rules\":{rules:?},\"delta_awarded\":{delta}}}"
        )
    }

    #[test]
    fn op_group_membership() {
        let mk = |rules: &[u32], delta: bool| {
            let lines = [line("s", None, "op", 0, &[], false), line("a", Some("s"), "x", 1, rules, delta)];
            ingest_lines(lines.iter().map(String::as_str)).trees
        };
        let ah = mk(&[2], false);
        let g = sample_op_groups(&ah);
        assert_eq!((g.ad_hominem.len(), g.delta.len()), (1, 0));
        let d = mk(&[], true);
        let g = sample_op_groups(&d);
        assert_eq!((g.ad_hominem.len(), g.delta.len()), (0, 1));
        let both = mk(&[2], true);
        let g = sample_op_groups(&both);
        assert_eq!((g.ad_hominem.len(), g.delta.len()), (0, 0));
    }

    #[test]
    fn triplet_context_length() {
        let four = [
            line("s", None, "A", 0, &[], false),
            line("a", Some("s"), "B", 1, &[], false),
            line("b", Some("a"), "A", 2, &[], false),
            line("c", Some("b"), "B", 3, &[2], false),
        ];
        let trees = ingest_lines(four.iter().map(String::as_str)).trees;
        let found = two_person_contexts(&trees[0], PostRecord::is_ad_hominem);
        assert_eq!(found.len(), 1);
        let ids: Vec<_> = found[0].1.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["s", "a", "b"]);

        let three = [
            line("s", None, "A", 0, &[], false),
            line("a", Some("s"), "B", 1, &[], false),
            line("b", Some("a"), "A", 2, &[2], false),
        ];
        let trees = ingest_lines(three.iter().map(String::as_str)).trees;
        assert!(two_person_contexts(&trees[0], PostRecord::is_ad_hominem).is_empty());
    }

    #[test]
    fn three_people_do_not_qualify() {
        let lines = [
            line("s", None, "A", 0, &[], false),
            line("a", Some("s"), "B", 1, &[], false),
            line("b", Some("a"), "C", 2, &[], false),
            line("c", Some("b"), "B", 3, &[2], false),
        ];
        let trees = ingest_lines(lines.iter().map(String::as_str)).trees;
        assert!(two_person_contexts(&trees[0], PostRecord::is_ad_hominem).is_empty());
    }

    #[test]
    fn context_text_uses_delimiters() {
        let lines = [line("s", None, "A", 0, &[], false)];
        let trees = ingest_lines(lines.iter().map(String::as_str)).trees;
        let s = trees[0].submission();
        let text = context_text(&[s, s]);
        assert_eq!(text, "OOV_comment_begin text s OOV_comment_begin text s");
        let toks = tokenize(&text);
        assert_eq!(toks[0], COMMENT_BEGIN_TOKEN);
    }
}
