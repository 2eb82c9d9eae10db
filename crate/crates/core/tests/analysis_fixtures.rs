use std::collections::HashMap;

use hominem::analysis::{
    cohen_kappa, error_buckets, ks_two_sample, render_heatmap, spearman, top_trigger_ngrams, AttentionReport, Bucket,
    WeightedDoc,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: &str = include_str!("fixtures/golden_heatmap.html");

fn golden_report() -> AttentionReport {
    AttentionReport {
        instance_id: "doc<1>".into(),
        tokens: ["OOV_comment_begin", "idiot", "OOV_comment_begin", "a&b", "ok"].map(String::from).to_vec(),
        weights: vec![0.1, 0.5, 0.1, 0.3, 0.3],
        prediction: "AD_HOMINEM".into(),
        gold: "NONE".into(),
        bucket: Bucket::FalsePositive,
    }
}

#[test]
fn heatmap_matches_golden_file() {
    let r = golden_report();
    let first = render_heatmap(&r);
    assert_eq!(first, GOLDEN);
    assert_eq!(render_heatmap(&r).as_bytes(), first.as_bytes());
}

#[test]
fn twenty_predictions_bucket_sizes() {
    // P = positive, N = negative; pairs are (prediction, gold)
    let rows = [
        "PP", "PP", "PN", "NN", "NP", "PP", "NN", "NN", "PN", "NP", //
        "PP", "NN", "NN", "NP", "PP", "PN", "NN", "PP", "NN", "NN",
    ];
    let name = |c: char| if c == 'P' { "AH".to_string() } else { "OK".to_string() };
    let preds: Vec<String> = rows.iter().map(|r| name(r.chars().next().unwrap())).collect();
    let gold: Vec<String> = rows.iter().map(|r| name(r.chars().nth(1).unwrap())).collect();
    let docs: Vec<WeightedDoc> = (0..20)
        .map(|i| WeightedDoc {
            instance_id: format!("d{i}"),
            tokens: vec!["x".into()],
            weights: vec![1.0],
        })
        .collect();
    let b = error_buckets(&preds, &gold, docs, "AH").unwrap();
    // counted by hand from the table above
    assert_eq!(b[&Bucket::TruePositive].len(), 6);
    assert_eq!(b[&Bucket::FalsePositive].len(), 3);
    assert_eq!(b[&Bucket::FalseNegative].len(), 3);
    assert_eq!(b[&Bucket::TrueNegative].len(), 8);
    let fp: Vec<&str> = b[&Bucket::FalsePositive].iter().map(|r| r.instance_id.as_str()).collect();
    assert_eq!(fp, ["d2", "d8", "d15"]);
}

#[test]
fn trigger_ranking_equals_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let words = ["you", "are", "wrong", "idiot", "point", "fair", "OOV_comment_begin"];
    let reports: Vec<AttentionReport> = (0..6)
        .map(|i| {
            let n = rng.gen_range(4..10);
            let tokens: Vec<String> = (0..n).map(|_| words[rng.gen_range(0..words.len())].to_string()).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = raw.iter().sum();
            AttentionReport {
                instance_id: format!("r{i}"),
                tokens,
                weights: raw.iter().map(|w| w / s).collect(),
                prediction: "AH".into(),
                gold: "AH".into(),
                bucket: Bucket::TruePositive,
            }
        })
        .collect();
    for n in 1..=3 {
        let mut seen: HashMap<String, Vec<f64>> = HashMap::new();
        for r in &reports {
            for s in 0..r.tokens.len() {
                if s + n > r.tokens.len() {
                    break;
                }
                let toks = &r.tokens[s..s + n];
                if toks.iter().any(|t| t == "OOV_comment_begin") {
                    continue;
                }
                let w: f64 = r.weights[s..s + n].iter().sum::<f64>() / n as f64;
                seen.entry(toks.join(" ")).or_default().push(w);
            }
        }
        let mut all: Vec<(String, f64, usize)> = seen
            .into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64, v.len()))
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got = top_trigger_ngrams(&reports, n, 5);
        assert_eq!(got.len(), all.len().min(5));
        for (g, e) in got.iter().zip(&all) {
            assert_eq!(g.phrase, e.0);
            assert_eq!(g.count, e.2);
            assert!((g.mean_weight - e.1).abs() < 1e-12);
        }
    }
}

#[test]
fn statistics_golden_values() {
    let ks = ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.0, 3.0, 4.0, 5.0]).unwrap();
    assert_eq!(ks.statistic, 0.25);
    let same = ks_two_sample(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert_eq!((same.statistic, same.p_value), (0.0, 1.0));
    assert_eq!(ks_two_sample(&[0.0; 4], &[1.0; 4]).unwrap().statistic, 1.0);
    assert!(cohen_kappa(&["A", "A", "B", "B"], &["A", "B", "B", "A"]).unwrap().abs() < 1e-12);
    assert!((cohen_kappa(&["A", "A", "A", "B"], &["A", "A", "B", "B"]).unwrap() - 0.5).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-12);
}
