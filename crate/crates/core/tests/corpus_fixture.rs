use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufReader;

use hominem::corpus::{compute_stats, enumerate_threads, ingest, Ingested};
use hominem::text::{build_vocab, tokenize};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/corpus60.jsonl");

fn fixture() -> Ingested {
    ingest(BufReader::new(File::open(FIXTURE).unwrap())).unwrap()
}

#[test]
fn four_trees_two_quarantined() {
    let ing = fixture();
    assert_eq!(ing.trees.len(), 4);
    assert_eq!(ing.quarantine.len(), 2);
    assert_eq!(ing.post_count(), 60);
}

#[test]
fn thread_count_is_leaf_count() {
    // leaves recounted straight from the kept records: posts nobody replies to
    let ing = fixture();
    for tree in &ing.trees {
        let mut has_child: HashMap<&str, bool> = tree.posts().iter().map(|p| (p.id.as_str(), false)).collect();
        for p in tree.posts() {
            if let Some(parent) = &p.parent_id {
                has_child.insert(parent.as_str(), true);
            }
        }
        let leaves = has_child.values().filter(|c| !**c).count();
        assert_eq!(enumerate_threads(tree).len(), leaves, "tree {}", tree.submission().id);
    }
    let total: usize = ing.trees.iter().map(|t| enumerate_threads(t).len()).sum();
    assert_eq!(total, 23);
}

#[test]
fn seven_leaf_tree() {
    let ing = fixture();
    let s1 = ing.trees.iter().find(|t| t.submission().id == "s1").unwrap();
    assert_eq!(s1.leaves().len(), 7);
    assert_eq!(enumerate_threads(s1).len(), 7);
}

#[test]
fn hand_counted_statistics() {
    let st = compute_stats(&fixture().trees).unwrap();
    assert_eq!(st.post_count, 60);
    assert_eq!(st.ad_hominem_count, 3);
    assert_eq!(st.ad_hominem_rate, 3.0 / 60.0);
    assert_eq!(st.threads_total, 23);
    assert_eq!(st.threads_with_ah, 3);
    assert_eq!(st.threads_with_single_ah, 3);
    assert_eq!(st.single_ah_last_fraction, 2.0 / 3.0);
    assert_eq!(st.ah_reply_to_ah_fraction, 0.0);
    assert_eq!(st.attacker_out_of_blue_fraction, 1.0 / 3.0);
    assert_eq!(st.attacker_with_prior_normal_argument_fraction, 2.0 / 3.0);
    assert_eq!(st.op_committed_ah_fraction, 1.0 / 3.0);
    assert_eq!(st.two_person_interplay_fraction, 2.0 / 3.0);
    let mut hist = [0u64; 10];
    hist[5] = 1;
    hist[7] = 1;
    hist[8] = 1;
    assert_eq!(st.first_ah_relative_position_histogram, hist);
    let per: BTreeMap<String, u64> = [("s1", 1), ("s2", 1), ("s3", 1), ("s4", 0)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
    assert_eq!(st.per_submission_ah_counts, per);
}

#[test]
fn vocabulary_size_matches_frequency_count() {
    let ing = fixture();
    let docs: Vec<Vec<String>> = ing
        .trees
        .iter()
        .flat_map(|t| t.posts().iter().map(|p| tokenize(&p.full_text())))
        .collect();
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for d in &docs {
        for t in d {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    // reserved surface forms are already counted among the 3 reserved rows
    let reserved = ["<pad>", "OOV", "OOV_comment_begin"];
    let frequent = freq
        .iter()
        .filter(|(w, c)| **c >= 2 && !reserved.contains(w))
        .count();
    assert_eq!(build_vocab(&docs, 2).len(), 3 + frequent);
}
