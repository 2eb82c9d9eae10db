use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;

use hominem::corpus::{ingest, DiscussionTree, PostRecord};
use hominem::sampling::{match_negatives, sample_binary_dataset, sample_op_groups, sample_triplets, Candidate};
use hominem::text::{build_vocab, tokenize, EmbeddingTable, Encoder, TokenizerConfig, PAD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/corpus60.jsonl");

fn trees() -> Vec<DiscussionTree> {
    ingest(BufReader::new(File::open(FIXTURE).unwrap())).unwrap().trees
}

fn encoder_for(texts: &[String], dim: usize, seed: u64) -> Encoder {
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
    let vocab = build_vocab(&docs, 1);
    let table = EmbeddingTable::random(vocab.len(), dim, seed);
    Encoder {
        vocab,
        table,
        tokenizer: TokenizerConfig::default(),
    }
}

fn mean_row(idx: &[usize], table: &EmbeddingTable) -> Vec<f64> {
    let rows: Vec<usize> = idx.iter().copied().filter(|&i| i != PAD).collect();
    let mut v = vec![0.0; table.dim()];
    for &i in &rows {
        for (a, b) in v.iter_mut().zip(table.row(i)) {
            *a += b;
        }
    }
    if !rows.is_empty() {
        v.iter_mut().for_each(|a| *a /= rows.len() as f64);
    }
    v
}

fn brute_score(p: &[usize], c: &[usize], table: &EmbeddingTable) -> f64 {
    let (a, b) = (mean_row(p, table), mean_row(c, table));
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cos = if na == 0.0 || nb == 0.0 { 0.0 } else { dot / (na * nb) };
    cos / (1.0 + (p.len() as f64 - c.len() as f64).abs())
}

#[test]
fn greedy_matching_equals_exhaustive_scoring() {
    let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let doc = |rng: &mut ChaCha8Rng| -> String {
        let n = rng.gen_range(3..12);
        (0..n).map(|_| words[rng.gen_range(0..words.len())].clone()).collect::<Vec<_>>().join(" ")
    };
    let pos_text: Vec<String> = (0..10).map(|_| doc(&mut rng)).collect();
    let cand_text: Vec<String> = (0..30).map(|_| doc(&mut rng)).collect();
    let all: Vec<String> = pos_text.iter().chain(&cand_text).cloned().collect();
    let enc = encoder_for(&all, 6, 3);

    let pos_ids: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
    let cand_ids: Vec<String> = (0..30).map(|i| format!("c{i}")).collect();
    let pos: Vec<Candidate> = pos_ids
        .iter()
        .zip(&pos_text)
        .map(|(id, t)| Candidate { id, doc: enc.encode(t) })
        .collect();
    let cands: Vec<Candidate> = cand_ids
        .iter()
        .zip(&cand_text)
        .map(|(id, t)| Candidate { id, doc: enc.encode(t) })
        .collect();
    let got = match_negatives(&pos, &cands, &enc).unwrap();

    let mut used = vec![false; cands.len()];
    for (k, p) in pos.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, c) in cands.iter().enumerate() {
            if used[j] {
                continue;
            }
            let s = brute_score(&p.doc.indices, &c.doc.indices, &enc.table);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let (j, s) = best.unwrap();
        used[j] = true;
        assert_eq!(got[k].positive, pos_ids[k]);
        assert_eq!(got[k].negative, cand_ids[j], "positive {k}");
        assert!((got[k].score - s).abs() < 1e-12);
    }
}

fn corpus_encoder(trees: &[DiscussionTree]) -> Encoder {
    let texts: Vec<String> = trees.iter().flat_map(|t| t.posts().iter().map(|p| p.full_text())).collect();
    encoder_for(&texts, 8, 5)
}

#[test]
fn binary_sample_matches_oracle() {
    let trees = trees();
    let enc = corpus_encoder(&trees);
    let records = sample_binary_dataset(&trees, &enc).unwrap();
    assert_eq!(records.len(), 6);

    let posts: Vec<&PostRecord> = trees.iter().flat_map(|t| t.posts()).collect();
    let positives: Vec<&PostRecord> = posts.iter().copied().filter(|p| p.violated_rules.contains(&2)).collect();
    let pool: Vec<&PostRecord> = posts
        .iter()
        .copied()
        .filter(|p| {
            p.parent_id.is_some()
                && !p.violated_rules.contains(&2)
                && (!p.violated_rules.is_empty() || p.delta_awarded)
        })
        .collect();
    assert_eq!(positives.len(), 3);
    assert_eq!(pool.len(), 10);
    let mut used = HashSet::new();
    let mut expected = Vec::new();
    for p in &positives {
        let pi = enc.encode(&p.body).indices;
        let mut best: Option<(&str, f64)> = None;
        for c in &pool {
            if used.contains(c.id.as_str()) {
                continue;
            }
            let s = brute_score(&pi, &enc.encode(&c.body).indices, &enc.table);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((&c.id, s));
            }
        }
        let (id, _) = best.unwrap();
        used.insert(id);
        expected.push(p.id.clone());
        expected.push(id.to_string());
    }
    let got: Vec<String> = records.iter().map(|r| r.instance_id.clone()).collect();
    assert_eq!(got, expected);
}

/// Ancestors of a post, nearest first, from a plain id index.
fn chain<'a>(id: &str, by_id: &HashMap<&str, &'a PostRecord>) -> Vec<&'a PostRecord> {
    let mut out = Vec::new();
    let mut cur = by_id[id].parent_id.as_deref();
    while let Some(p) = cur {
        out.push(by_id[p]);
        cur = by_id[p].parent_id.as_deref();
    }
    out
}

#[test]
fn triplets_match_thread_filter() {
    let trees = trees();
    let enc = corpus_encoder(&trees);
    let posts: Vec<&PostRecord> = trees.iter().flat_map(|t| t.posts()).collect();
    let by_id: HashMap<&str, &PostRecord> = posts.iter().map(|p| (p.id.as_str(), *p)).collect();
    let qualifies = |p: &PostRecord| {
        let up = chain(&p.id, &by_id);
        up.len() >= 3 && {
            let people: BTreeSet<&str> = up[..3].iter().chain([&p]).map(|q| q.author.as_str()).collect();
            people.len() == 2
        }
    };
    let ah: BTreeSet<String> = posts
        .iter()
        .filter(|p| p.violated_rules.contains(&2) && qualifies(p))
        .map(|p| format!("ah_{}", p.id))
        .collect();
    let delta_pool: BTreeSet<String> = posts
        .iter()
        .filter(|p| p.delta_awarded && !p.violated_rules.contains(&2) && qualifies(p))
        .map(|p| format!("delta_{}", p.id))
        .collect();
    assert_eq!(ah, ["ah_s1_c05", "ah_s2_c04"].map(String::from).into());
    assert_eq!(delta_pool, ["delta_s1_c08", "delta_s2_c09", "delta_s4_c05"].map(String::from).into());

    let got = sample_triplets(&trees, &enc).unwrap();
    assert_eq!(got.len(), 2 * ah.len());
    let got_ah: BTreeSet<String> = got.iter().step_by(2).map(|t| t.instance_id.clone()).collect();
    assert_eq!(got_ah, ah);
    for t in got.iter().skip(1).step_by(2) {
        assert!(delta_pool.contains(&t.instance_id));
    }
    for t in &got {
        let outcome = t.instance_id.split_once('_').unwrap().1;
        let mut expect: Vec<String> = chain(outcome, &by_id)[..3].iter().map(|p| p.id.clone()).collect();
        expect.reverse();
        assert_eq!(t.context_ids, expect);
    }
}

#[test]
fn op_groups_on_fixture() {
    let trees = trees();
    let g = sample_op_groups(&trees);
    let ah: Vec<&str> = g.ad_hominem.iter().map(|p| p.id.as_str()).collect();
    let delta: Vec<&str> = g.delta.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ah, ["s3"]);
    assert_eq!(delta, ["s4"]);
}
