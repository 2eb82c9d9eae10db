use hominem::topics::{fit_lda, infer_theta, LdaConfig, LdaFit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Documents over two disjoint ten-word vocabularies plus the generating topic of every token.
fn two_topic_corpus(seed: u64) -> (Vec<Vec<String>>, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut docs = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..40 {
        let share_a: f64 = rng.gen_range(0.0..1.0);
        let (mut d, mut t) = (Vec::new(), Vec::new());
        for _ in 0..rng.gen_range(30..60) {
            let topic = usize::from(!rng.gen_bool(share_a));
            let prefix = if topic == 0 { "alpha" } else { "beta" };
            d.push(format!("{prefix}{}", rng.gen_range(0..10)));
            t.push(topic);
        }
        docs.push(d);
        truth.push(t);
    }
    (docs, truth)
}

fn fit(seed: u64) -> (LdaFit, Vec<Vec<usize>>) {
    let (docs, truth) = two_topic_corpus(seed);
    let cfg = LdaConfig {
        k: 2,
        iterations: 200,
        seed,
        ..LdaConfig::default()
    };
    (fit_lda(&docs, &cfg).unwrap(), truth)
}

#[test]
fn modal_assignments_recover_generating_topics() {
    let (fit, truth) = fit(8);
    let tokens: usize = truth.iter().map(Vec::len).sum();
    // the better of the two labellings of the topics
    let same: usize = fit
        .modal_assignments
        .iter()
        .zip(&truth)
        .map(|(a, t)| a.iter().zip(t).filter(|(x, y)| x == y).count())
        .sum();
    let best = same.max(tokens - same) as f64 / tokens as f64;
    assert!(best >= 0.9, "alignment {best}");
    let reported = hominem::topics::alignment_accuracy(&fit.modal_assignments, &truth, 2).unwrap();
    assert!((reported - best).abs() < 1e-12);
}

#[test]
fn phi_rows_are_distributions() {
    let (fit, _) = fit(3);
    let m = &fit.model;
    for k in 0..m.k {
        let row = m.phi_row(k);
        assert_eq!(row.len(), m.vocab_size());
        assert!(row.iter().all(|p| *p >= 0.0));
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn pure_vocabulary_document_lands_on_its_topic() {
    let (fit, _) = fit(8);
    let m = &fit.model;
    let a_index = m.word_index("alpha3").unwrap();
    let a_topic = if m.phi_row(0)[a_index] > m.phi_row(1)[a_index] { 0 } else { 1 };
    // long enough for the words to outweigh the default alpha = 25 prior
    let doc: Vec<String> = (0..100).map(|i| format!("alpha{}", i % 10)).collect();
    let theta = infer_theta(m, &doc, 100, 1);
    assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(theta[a_topic] >= 0.8, "theta {theta:?}");
}

#[test]
fn unknown_words_only_gives_the_prior() {
    let (fit, _) = fit(8);
    let theta = infer_theta(&fit.model, &["zebra".to_string(), "quasar".to_string()], 50, 2);
    assert_eq!(theta, vec![0.5, 0.5]);
}
