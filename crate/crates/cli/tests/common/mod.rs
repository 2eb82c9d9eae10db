#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPOCH: &str = "1700000000";

pub fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/corpus60.jsonl")
}

pub fn hominem(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hominem"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env("SOURCE_DATE_EPOCH", EPOCH)
        .output()
        .expect("binary runs")
}

/// Runs a command and returns stdout, panicking with stderr on failure.
pub fn ok(out: &Path, args: &[&str]) -> String {
    let o = hominem(out, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

const TOPICS: [(&str, [&str; 6]); 3] = [
    ("transit", ["buses", "fares", "trains", "traffic", "routes", "commute"]),
    ("school", ["homework", "teachers", "grades", "classes", "exams", "students"]),
    ("food", ["pizza", "pineapple", "cheese", "recipes", "flavor", "kitchen"]),
];
const FILLER: [&str; 10] = ["the", "data", "shows", "that", "cost", "would", "more", "people", "think", "because"];
const INSULTS: [&str; 3] = ["idiot", "moron", "clueless"];

fn sentence(rng: &mut ChaCha8Rng, topic: usize, extra: Option<&str>) -> String {
    let mut words: Vec<&str> = (0..rng.gen_range(6..12))
        .map(|_| {
            if rng.gen_bool(0.5) {
                TOPICS[topic].1[rng.gen_range(0..6)]
            } else {
                FILLER[rng.gen_range(0..FILLER.len())]
            }
        })
        .collect();
    if let Some(e) = extra {
        let at = rng.gen_range(0..=words.len());
        words.insert(at, e);
    }
    words.join(" ")
}

fn post(
    s: &mut String,
    id: &str,
    parent: Option<&str>,
    sub: &str,
    author: &str,
    body: &str,
    t: i64,
    rules: &[u32],
    delta: bool,
) {
    let v = serde_json::json!({
        "id": id,
        "parent_id": parent,
        "submission_id": sub,
        "author": author,
        "body": body,
        "title": if parent.is_none() { Some(format!("CMV: {id}")) } else { None },
        "created_at": t,
        "violated_rules": rules,
        "delta_awarded": delta,
    });
    let _ = writeln!(s, "{v}");
}

/// A corpus in the documented JSONL format: every submission carries a
/// two-person four-reply chain ending in an attack (even submissions) or in
/// a delta (odd ones), plus side comments that break another rule.
pub fn write_corpus(path: &Path, submissions: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::new();
    for k in 0..submissions {
        let topic = k % TOPICS.len();
        let sub = format!("t{k:02}");
        let op = format!("op{k}");
        let other = format!("user{k}");
        let base = 10_000 * k as i64;
        post(&mut s, &sub, None, &sub, &op, &sentence(&mut rng, topic, None), base, &[], false);
        let mut parent = sub.clone();
        for step in 1..=4 {
            let id = format!("{sub}_c{step}");
            let author = if step % 2 == 1 { &other } else { &op };
            let last = step == 4;
            let attack = last && k % 2 == 0;
            let insult = attack.then(|| INSULTS[rng.gen_range(0..3)]);
            let rules: &[u32] = if attack { &[2] } else { &[] };
            let body = sentence(&mut rng, topic, insult);
            post(&mut s, &id, Some(&parent), &sub, author, &body, base + step * 10, rules, last && !attack);
            parent = id;
        }
        for side in 0..2 {
            let id = format!("{sub}_x{side}");
            let body = sentence(&mut rng, topic, None);
            post(&mut s, &id, Some(&sub), &sub, &format!("side{k}_{side}"), &body, base + 100 + side, &[5], false);
        }
    }
    fs::write(path, s).unwrap();
}

/// Five workers rate each submission on a 1..5 scale; the transit topic
/// draws higher ratings so the scores carry signal.
pub fn write_scale_annotations(path: &Path, submissions: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = String::from("item_id\tannotator_id\tlabel\n");
    for k in 0..submissions {
        let centre: f64 = match k % TOPICS.len() {
            0 => 3.5,
            1 => 2.0,
            _ => 1.0,
        };
        for w in 0..5 {
            let l = (centre + rng.gen_range(-1.0..1.0)).round().clamp(0.0, 4.0) as usize;
            let _ = writeln!(s, "t{k:02}\tw{w}\t{l}");
        }
    }
    fs::write(path, s).unwrap();
}

/// Every file under `dir`, relative path with contents, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
