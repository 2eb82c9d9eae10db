//! Post ingestion, discussion-tree reconstruction, thread enumeration and
//! corpus-level ad hominem dynamics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Moderation rule id for "don't be rude or hostile". A reply violating it
/// counts as an ad hominem argument.
pub const HOSTILITY_RULE: u32 = 2;

/// Number of equal-width bins in the first-attack position histogram.
pub const POSITION_BINS: usize = 10;

/// One line of the corpus file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<String>,
    pub submission_id: String,
    pub author: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub created_at: i64,
    pub violated_rules: BTreeSet<u32>,
    pub delta_awarded: bool,
}

impl PostRecord {
    pub fn is_submission(&self) -> bool {
        self.parent_id.is_none()
    }

    /// Only replies can be ad hominem: the hostility rule applies to comments.
    pub fn is_ad_hominem(&self) -> bool {
        !self.is_submission() && self.violated_rules.contains(&HOSTILITY_RULE)
    }

    /// Rule violations other than hostility.
    pub fn violates_other_rule(&self) -> bool {
        self.violated_rules.iter().any(|r| *r != HOSTILITY_RULE)
    }

    /// Title and body joined, the way submissions are presented to models.
    pub fn full_text(&self) -> String {
        match &self.title {
            Some(t) if !t.is_empty() => format!("{t}\n{}", self.body),
            _ => self.body.clone(),
        }
    }
}

/// A submission and all replies reachable from it. Posts are stored in
/// pre-order with children sorted by `(created_at, id)`.
#[derive(Debug, Clone)]
pub struct DiscussionTree {
    posts: Vec<PostRecord>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl DiscussionTree {
    fn build(submission: PostRecord, replies: &mut HashMap<String, Vec<PostRecord>>) -> Self {
        let mut tree = DiscussionTree {
            posts: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            index: HashMap::new(),
        };
        // explicit stack keeps deep threads off the call stack
        let mut stack: Vec<(PostRecord, Option<usize>)> = vec![(submission, None)];
        while let Some((post, parent)) = stack.pop() {
            let idx = tree.posts.len();
            if let Some(p) = parent {
                tree.children[p].push(idx);
            }
            let mut kids = replies.remove(&post.id).unwrap_or_default();
            kids.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
            tree.index.insert(post.id.clone(), idx);
            tree.posts.push(post);
            tree.parent.push(parent);
            tree.children.push(Vec::with_capacity(kids.len()));
            for kid in kids.into_iter().rev() {
                stack.push((kid, Some(idx)));
            }
        }
        tree
    }

    pub fn submission(&self) -> &PostRecord {
        &self.posts[0]
    }

    /// All posts in pre-order, submission first.
    pub fn posts(&self) -> &[PostRecord] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&PostRecord> {
        self.index.get(id).map(|&i| &self.posts[i])
    }

    pub fn children(&self, id: &str) -> Vec<&PostRecord> {
        self.index
            .get(id)
            .map(|&i| self.children[i].iter().map(|&c| &self.posts[c]).collect())
            .unwrap_or_default()
    }

    pub fn parent(&self, id: &str) -> Option<&PostRecord> {
        let i = *self.index.get(id)?;
        self.parent[i].map(|p| &self.posts[p])
    }

    /// Ancestors of `id`, nearest first (parent, grandparent, ..., submission).
    pub fn ancestors(&self, id: &str) -> Vec<&PostRecord> {
        let mut out = Vec::new();
        let Some(&start) = self.index.get(id) else {
            return out;
        };
        let mut cur = self.parent[start];
        while let Some(p) = cur {
            out.push(&self.posts[p]);
            cur = self.parent[p];
        }
        out
    }

    pub fn leaves(&self) -> Vec<&PostRecord> {
        (0..self.posts.len())
            .filter(|&i| self.children[i].is_empty())
            .map(|i| &self.posts[i])
            .collect()
    }

    /// Parent-child pairs as ids.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        (0..self.posts.len())
            .filter_map(|i| self.parent[i].map(|p| (self.posts[p].id.as_str(), self.posts[i].id.as_str())))
            .collect()
    }
}

/// Root-to-leaf path through a discussion tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreadPath<'a> {
    pub posts: Vec<&'a PostRecord>,
}

impl ThreadPath<'_> {
    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn last(&self) -> &PostRecord {
        self.posts[self.posts.len() - 1]
    }
}

/// One thread per leaf, in pre-order leaf order.
pub fn enumerate_threads(tree: &DiscussionTree) -> Vec<ThreadPath<'_>> {
    let mut out = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    // (node, depth) frames
    let mut stack = vec![(0usize, 0usize)];
    while let Some((node, depth)) = stack.pop() {
        path.truncate(depth);
        path.push(node);
        let kids = &tree.children[node];
        if kids.is_empty() {
            out.push(ThreadPath {
                posts: path.iter().map(|&i| &tree.posts[i]).collect(),
            });
        }
        for &k in kids.iter().rev() {
            stack.push((k, depth + 1));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuarantineReason {
    Malformed(String),
    DuplicateId,
    DanglingParent(String),
    CrossSubmissionParent(String),
    MissingSubmission(String),
    SubmissionIdMismatch,
    Unreachable,
}

impl fmt::Display for QuarantineReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuarantineReason::Malformed(m) => write!(f, "malformed record: {m}"),
            QuarantineReason::DuplicateId => write!(f, "duplicate id"),
            QuarantineReason::DanglingParent(p) => write!(f, "dangling parent {p}"),
            QuarantineReason::CrossSubmissionParent(p) => {
                write!(f, "parent {p} belongs to another submission")
            }
            QuarantineReason::MissingSubmission(s) => write!(f, "missing submission {s}"),
            QuarantineReason::SubmissionIdMismatch => {
                write!(f, "submission id differs from its submission_id")
            }
            QuarantineReason::Unreachable => {
                write!(f, "unreachable from submission (quarantined ancestor or cycle)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuarantineEntry {
    /// 1-based line number in the input stream.
    pub line: usize,
    pub id: Option<String>,
    pub reason: QuarantineReason,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub trees: Vec<DiscussionTree>,
    pub quarantine: Vec<QuarantineEntry>,
}

impl Ingested {
    pub fn post_count(&self) -> usize {
        self.trees.iter().map(DiscussionTree::len).sum()
    }

    /// Tab-separated quarantine report: line, id, reason.
    pub fn quarantine_table(&self) -> String {
        let mut out = String::from("line\tid\treason\n");
        for q in &self.quarantine {
            let _ = writeln!(out, "{}\t{}\t{}", q.line, q.id.as_deref().unwrap_or(""), q.reason);
        }
        out
    }
}

/// Parses a line-delimited corpus. Bad lines are quarantined, never fatal.
pub fn ingest<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut lines = Vec::new();
    for line in reader.lines() {
        lines.push(line?);
    }
    Ok(ingest_lines(lines.iter().map(String::as_str)))
}

pub fn ingest_lines<'a, I: IntoIterator<Item = &'a str>>(lines: I) -> Ingested {
    let mut quarantine = Vec::new();
    let mut records = Vec::new();
    for (i, raw) in lines.into_iter().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<PostRecord>(raw) {
            Ok(rec) => records.push((line, rec)),
            Err(e) => quarantine.push(QuarantineEntry {
                line,
                id: None,
                reason: QuarantineReason::Malformed(e.to_string()),
            }),
        }
    }
    let mut ingested = ingest_records(records);
    quarantine.append(&mut ingested.quarantine);
    quarantine.sort_by_key(|q| q.line);
    ingested.quarantine = quarantine;
    ingested
}

/// Builds trees from already-parsed records tagged with their line numbers.
pub fn ingest_records(records: Vec<(usize, PostRecord)>) -> Ingested {
    let mut quarantine = Vec::new();
    let mut seen = HashSet::new();
    let mut unique = Vec::with_capacity(records.len());
    for (line, rec) in records {
        if seen.insert(rec.id.clone()) {
            unique.push((line, rec));
        } else {
            quarantine.push(QuarantineEntry {
                line,
                id: Some(rec.id),
                reason: QuarantineReason::DuplicateId,
            });
        }
    }

    let mut submissions = Vec::new();
    let mut replies = Vec::new();
    for (line, rec) in unique {
        if rec.is_submission() {
            if rec.id == rec.submission_id {
                submissions.push((line, rec));
            } else {
                quarantine.push(QuarantineEntry {
                    line,
                    id: Some(rec.id),
                    reason: QuarantineReason::SubmissionIdMismatch,
                });
            }
        } else {
            replies.push((line, rec));
        }
    }

    let submission_ids: HashSet<&str> = submissions.iter().map(|(_, r)| r.id.as_str()).collect();
    let reply_subs: HashMap<&str, &str> = replies
        .iter()
        .map(|(_, r)| (r.id.as_str(), r.submission_id.as_str()))
        .collect();

    let mut accepted: Vec<(usize, PostRecord)> = Vec::new();
    let mut rejected = Vec::new();
    for (line, rec) in &replies {
        let parent = rec.parent_id.as_deref().unwrap_or_default();
        let parent_sub = if submission_ids.contains(parent) {
            Some(parent)
        } else {
            reply_subs.get(parent).copied()
        };
        let reason = if !submission_ids.contains(rec.submission_id.as_str()) {
            Some(QuarantineReason::MissingSubmission(rec.submission_id.clone()))
        } else {
            match parent_sub {
                None => Some(QuarantineReason::DanglingParent(parent.to_string())),
                Some(s) if s != rec.submission_id => {
                    Some(QuarantineReason::CrossSubmissionParent(parent.to_string()))
                }
                Some(_) => None,
            }
        };
        match reason {
            Some(reason) => rejected.push(QuarantineEntry {
                line: *line,
                id: Some(rec.id.clone()),
                reason,
            }),
            None => accepted.push((*line, rec.clone())),
        }
    }
    quarantine.extend(rejected);

    let lines: HashMap<String, usize> = accepted.iter().map(|(l, r)| (r.id.clone(), *l)).collect();
    let mut by_parent: HashMap<String, Vec<PostRecord>> = HashMap::new();
    for (_, rec) in accepted {
        let parent = rec.parent_id.clone().unwrap_or_default();
        by_parent.entry(parent).or_default().push(rec);
    }

    submissions.sort_by(|(_, a), (_, b)| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    let trees: Vec<DiscussionTree> = submissions
        .into_iter()
        .map(|(_, s)| DiscussionTree::build(s, &mut by_parent))
        .collect();

    // whatever is left never hung off a submission
    let mut leftovers: Vec<QuarantineEntry> = by_parent
        .into_values()
        .flatten()
        .map(|rec| QuarantineEntry {
            line: lines[&rec.id],
            id: Some(rec.id),
            reason: QuarantineReason::Unreachable,
        })
        .collect();
    quarantine.append(&mut leftovers);
    quarantine.sort_by_key(|q| q.line);

    Ingested { trees, quarantine }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub post_count: u64,
    pub ad_hominem_count: u64,
    pub ad_hominem_rate: f64,
    pub threads_total: u64,
    pub threads_with_ah: u64,
    pub threads_with_single_ah: u64,
    pub single_ah_last_fraction: f64,
    pub ah_reply_to_ah_fraction: f64,
    pub first_ah_relative_position_histogram: [u64; POSITION_BINS],
    pub attacker_out_of_blue_fraction: f64,
    pub attacker_with_prior_normal_argument_fraction: f64,
    pub op_committed_ah_fraction: f64,
    pub two_person_interplay_fraction: f64,
    pub per_submission_ah_counts: BTreeMap<String, u64>,
}

impl CorpusStats {
    pub fn histogram_bins(&self) -> Vec<HistogramBin> {
        self.first_ah_relative_position_histogram
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBin {
                start: i as f64 / POSITION_BINS as f64,
                end: (i + 1) as f64 / POSITION_BINS as f64,
                count,
            })
            .collect()
    }

    /// Flat `key=value` report.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "post_count={}", self.post_count);
        let _ = writeln!(s, "ad_hominem_count={}", self.ad_hominem_count);
        let _ = writeln!(s, "ad_hominem_rate={}", self.ad_hominem_rate);
        let _ = writeln!(s, "threads_total={}", self.threads_total);
        let _ = writeln!(s, "threads_with_ah={}", self.threads_with_ah);
        let _ = writeln!(s, "threads_with_single_ah={}", self.threads_with_single_ah);
        let _ = writeln!(s, "single_ah_last_fraction={}", self.single_ah_last_fraction);
        let _ = writeln!(s, "ah_reply_to_ah_fraction={}", self.ah_reply_to_ah_fraction);
        let _ = writeln!(s, "attacker_out_of_blue_fraction={}", self.attacker_out_of_blue_fraction);
        let _ = writeln!(
            s,
            "attacker_with_prior_normal_argument_fraction={}",
            self.attacker_with_prior_normal_argument_fraction
        );
        let _ = writeln!(s, "op_committed_ah_fraction={}", self.op_committed_ah_fraction);
        let _ = writeln!(s, "two_person_interplay_fraction={}", self.two_person_interplay_fraction);
        s
    }

    /// Tab-separated histogram table: bin_start, bin_end, count.
    pub fn histogram_table(&self) -> String {
        let mut s = String::from("bin_start\tbin_end\tcount\n");
        for b in self.histogram_bins() {
            let _ = writeln!(s, "{:.1}\t{:.1}\t{}", b.start, b.end, b.count);
        }
        s
    }

    pub fn per_submission_table(&self) -> String {
        let mut s = String::from("submission_id\tad_hominem_count\n");
        for (k, v) in &self.per_submission_ah_counts {
            let _ = writeln!(s, "{k}\t{v}");
        }
        s
    }
}

#[derive(Debug, Default, Clone)]
struct Tally {
    posts: u64,
    ah: u64,
    threads: u64,
    threads_with_ah: u64,
    single: u64,
    single_last: u64,
    replies_to_ah: u64,
    ah_replies_to_ah: u64,
    hist: [u64; POSITION_BINS],
    out_of_blue: u64,
    prior_normal: u64,
    op_ah: u64,
    two_person: u64,
    per_submission: BTreeMap<String, u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.posts += other.posts;
        self.ah += other.ah;
        self.threads += other.threads;
        self.threads_with_ah += other.threads_with_ah;
        self.single += other.single;
        self.single_last += other.single_last;
        self.replies_to_ah += other.replies_to_ah;
        self.ah_replies_to_ah += other.ah_replies_to_ah;
        for (a, b) in self.hist.iter_mut().zip(other.hist) {
            *a += b;
        }
        self.out_of_blue += other.out_of_blue;
        self.prior_normal += other.prior_normal;
        self.op_ah += other.op_ah;
        self.two_person += other.two_person;
        self.per_submission.extend(other.per_submission);
        self
    }

    fn of_tree(tree: &DiscussionTree) -> Tally {
        let mut t = Tally {
            posts: tree.len() as u64,
            ..Tally::default()
        };
        let op = &tree.submission().author;
        let mut sub_ah = 0;
        for post in tree.posts() {
            if let Some(parent) = tree.parent(&post.id) {
                if parent.is_ad_hominem() {
                    t.replies_to_ah += 1;
                    if post.is_ad_hominem() {
                        t.ah_replies_to_ah += 1;
                    }
                }
            }
            if !post.is_ad_hominem() {
                continue;
            }
            sub_ah += 1;
            let prior: Vec<_> = tree
                .ancestors(&post.id)
                .into_iter()
                .filter(|a| a.author == post.author)
                .collect();
            if prior.is_empty() {
                t.out_of_blue += 1;
            }
            if prior.iter().any(|a| !a.is_ad_hominem()) {
                t.prior_normal += 1;
            }
            if &post.author == op {
                t.op_ah += 1;
            }
        }
        t.ah = sub_ah;
        t.per_submission.insert(tree.submission().id.clone(), sub_ah);

        for thread in enumerate_threads(tree) {
            t.threads += 1;
            let ah_positions: Vec<usize> = thread
                .posts
                .iter()
                .enumerate()
                .filter(|(_, p)| p.is_ad_hominem())
                .map(|(i, _)| i)
                .collect();
            let Some(&first) = ah_positions.first() else {
                continue;
            };
            t.threads_with_ah += 1;
            if ah_positions.len() == 1 {
                t.single += 1;
                if first == thread.len() - 1 {
                    t.single_last += 1;
                }
            }
            // index among replies over number of replies, in integer arithmetic
            let replies = thread.len() - 1;
            let bin = ((first - 1) * POSITION_BINS / replies).min(POSITION_BINS - 1);
            t.hist[bin] += 1;
            let authors: HashSet<&str> = thread.posts.iter().map(|p| p.author.as_str()).collect();
            if authors.len() == 2 && authors.contains(op.as_str()) {
                t.two_person += 1;
            }
        }
        t
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_stats(trees: &[DiscussionTree]) -> Result<CorpusStats> {
    if trees.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let t = trees
        .par_iter()
        .map(Tally::of_tree)
        .reduce(Tally::default, Tally::merge);
    Ok(CorpusStats {
        post_count: t.posts,
        ad_hominem_count: t.ah,
        ad_hominem_rate: ratio(t.ah, t.posts),
        threads_total: t.threads,
        threads_with_ah: t.threads_with_ah,
        threads_with_single_ah: t.single,
        single_ah_last_fraction: ratio(t.single_last, t.single),
        ah_reply_to_ah_fraction: ratio(t.ah_replies_to_ah, t.replies_to_ah),
        first_ah_relative_position_histogram: t.hist,
        attacker_out_of_blue_fraction: ratio(t.out_of_blue, t.ah),
        attacker_with_prior_normal_argument_fraction: ratio(t.prior_normal, t.ah),
        op_committed_ah_fraction: ratio(t.op_ah, t.ah),
        two_person_interplay_fraction: ratio(t.two_person, t.threads_with_ah),
        per_submission_ah_counts: t.per_submission,
    })
}

/// Every post in corpus order: trees by submission time, pre-order inside.
pub fn posts_in_order(trees: &[DiscussionTree]) -> impl Iterator<Item = &PostRecord> {
    trees.iter().flat_map(|t| t.posts().iter())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn post(id: &str, parent: Option<&str>, author: &str, t: i64, rules: &[u32]) -> String {
        let rec = PostRecord {
            id: id.into(),
            parent_id: parent.map(Into::into),
            submission_id: "s".into(),
            author: author.into(),
            body: format!("body of {id}"),
            title: parent.is_none().then(|| "title".to_string()),
            created_at: t,
            violated_rules: rules.iter().copied().collect(),
            delta_awarded: false,
        };
        serde_json::to_string(&rec).unwrap()
    }

    #[test]
    fn minimal_tree() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("a", Some("s"), "x", 1, &[]),
            post("b", Some("s"), "y", 2, &[]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert_eq!(ing.trees.len(), 1);
        assert_eq!(ing.trees[0].len(), 3);
        assert!(ing.quarantine.is_empty());
    }

    #[test]
    fn dangling_parent_is_quarantined() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("a", Some("s"), "x", 1, &[]),
            post("b", Some("ghost"), "y", 2, &[]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert_eq!(ing.trees[0].len(), 2);
        assert_eq!(ing.quarantine.len(), 1);
        assert!(ing.quarantine[0].reason.to_string().contains("dangling parent"));
        assert_eq!(ing.quarantine[0].line, 3);
    }

    #[test]
    fn malformed_and_duplicate_lines_do_not_abort() {
        let lines = [
            post("s", None, "op", 0, &[]),
            "{not json".to_string(),
            post("a", Some("s"), "x", 1, &[]),
            post("a", Some("s"), "x", 5, &[]),
            r#"{"id":"z","submission_id":"s","author":"q","body":"","created_at":1,"violated_rules":[],"delta_awarded":false,"extra":1}"#.to_string(),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert_eq!(ing.trees[0].len(), 2);
        let reasons: Vec<_> = ing.quarantine.iter().map(|q| (q.line, q.reason.clone())).collect();
        assert!(matches!(reasons[0], (2, QuarantineReason::Malformed(_))));
        assert_eq!(reasons[1], (4, QuarantineReason::DuplicateId));
        assert!(matches!(reasons[2], (5, QuarantineReason::Malformed(_))));
    }

    #[test]
    fn descendants_of_quarantined_posts_are_unreachable() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("a", Some("ghost"), "x", 1, &[]),
            post("b", Some("a"), "y", 2, &[]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert_eq!(ing.trees[0].len(), 1);
        assert_eq!(ing.quarantine.len(), 2);
        assert_eq!(ing.quarantine[1].reason, QuarantineReason::Unreachable);
    }

    #[test]
    fn cycle_is_unreachable() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("a", Some("b"), "x", 1, &[]),
            post("b", Some("a"), "y", 2, &[]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert_eq!(ing.trees[0].len(), 1);
        assert!(ing.quarantine.iter().all(|q| q.reason == QuarantineReason::Unreachable));
    }

    #[test]
    fn children_sorted_by_time_then_id() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("c", Some("s"), "x", 5, &[]),
            post("b", Some("s"), "x", 1, &[]),
            post("a", Some("s"), "x", 5, &[]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        let ids: Vec<_> = ing.trees[0].children("s").iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn chain_and_fork_threads() {
        let chain = [
            post("s", None, "op", 0, &[]),
            post("a", Some("s"), "x", 1, &[]),
            post("b", Some("a"), "y", 2, &[]),
        ];
        let ing = ingest_lines(chain.iter().map(String::as_str));
        let th = enumerate_threads(&ing.trees[0]);
        assert_eq!(th.len(), 1);
        assert_eq!(th[0].len(), 3);

        let fork = [
            post("s", None, "op", 0, &[]),
            post("a", Some("s"), "x", 1, &[]),
            post("b", Some("s"), "y", 2, &[]),
        ];
        let ing = ingest_lines(fork.iter().map(String::as_str));
        let th = enumerate_threads(&ing.trees[0]);
        assert_eq!(th.len(), 2);
        assert!(th.iter().all(|t| t.len() == 2));
    }

    #[test]
    fn no_ad_hominem_means_zero_rate() {
        let lines = [post("s", None, "op", 0, &[]), post("a", Some("s"), "x", 1, &[5])];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        let stats = compute_stats(&ing.trees).unwrap();
        assert_eq!(stats.ad_hominem_rate, 0.0);
        assert_eq!(stats.first_ah_relative_position_histogram, [0; POSITION_BINS]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(compute_stats(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn submission_hostility_flag_is_not_ad_hominem() {
        let lines = [post("s", None, "op", 0, &[2])];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        assert!(!ing.trees[0].submission().is_ad_hominem());
    }

    #[test]
    fn every_thread_ending_in_attack_gives_fraction_one() {
        let lines = [
            post("s", None, "op", 0, &[]),
            post("a", Some("s"), "x", 1, &[]),
            post("b", Some("a"), "y", 2, &[2]),
            post("c", Some("s"), "z", 3, &[2]),
        ];
        let ing = ingest_lines(lines.iter().map(String::as_str));
        let stats = compute_stats(&ing.trees).unwrap();
        assert_eq!(stats.single_ah_last_fraction, 1.0);
        // b: replies a,b -> index 1 of 2 -> bin 5; c: index 0 of 1 -> bin 0
        assert_eq!(stats.first_ah_relative_position_histogram[5], 1);
        assert_eq!(stats.first_ah_relative_position_histogram[0], 1);
    }
}
