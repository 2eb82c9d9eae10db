use hominem::neural::{
    accuracy, cross_validate, train, Architecture, Example, Input, Model, ModelConfig, Objective, Target, TrainConfig,
};
use hominem::text::{build_vocab, tokenize, EmbeddingTable, Encoder, TokenizerConfig};
use hominem::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NEUTRAL: [&str; 16] = [
    "the", "policy", "would", "cost", "more", "than", "it", "saves", "data", "shows", "a", "small", "effect", "on",
    "traffic", "budgets",
];
const INSULTS: [&str; 1] = ["idiot"];

/// 40 documents; the positives are exactly those containing an insult.
fn separable(seed: u64) -> (Encoder, Vec<Example>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut texts = Vec::new();
    for i in 0..40 {
        let n = rng.gen_range(5..10);
        let mut words: Vec<&str> = (0..n).map(|_| NEUTRAL[rng.gen_range(0..NEUTRAL.len())]).collect();
        if i % 2 == 0 {
            let at = rng.gen_range(0..=words.len());
            words.insert(at, INSULTS[rng.gen_range(0..INSULTS.len())]);
        }
        texts.push((i % 2 == 0, words.join(" ")));
    }
    let docs: Vec<Vec<String>> = texts.iter().map(|(_, t)| tokenize(t)).collect();
    let vocab = build_vocab(&docs, 1);
    let table = EmbeddingTable::random(vocab.len(), 16, seed + 1);
    let enc = Encoder {
        vocab,
        table,
        tokenizer: TokenizerConfig::default(),
    };
    let examples = texts
        .iter()
        .enumerate()
        .map(|(i, (pos, t))| Example {
            id: format!("doc{i:02}"),
            input: Input::tokens(enc.encode(t).indices),
            target: Target::Class(usize::from(!*pos)),
        })
        .collect();
    (enc, examples)
}

fn config(arch: Architecture) -> ModelConfig {
    let mut c = ModelConfig::new(arch, vec!["AD_HOMINEM".into(), "NONE".into()]);
    c.filter_widths = vec![1, 2];
    c.feature_maps = 8;
    c.hidden = 8;
    c.attention_hidden = 8;
    c.attention_rows = 2;
    c.dropout = 0.1;
    c.train_embeddings = true;
    c
}

fn fit(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        epochs: 30,
        batch_size: 8,
        seed,
        patience: 30,
        ..TrainConfig::default()
    }
}

#[test]
fn cnn_learns_separable_set() {
    let (enc, data) = separable(1);
    let t = train(&config(Architecture::Cnn), &fit(3), &enc.table, &data).unwrap();
    assert!(t.trace.len() <= 30);
    assert!(accuracy(&t.model, &data).unwrap() >= 0.95);
}

#[test]
fn ssae_learns_separable_set() {
    let (enc, data) = separable(1);
    let t = train(&config(Architecture::Ssae), &fit(3), &enc.table, &data).unwrap();
    assert!(accuracy(&t.model, &data).unwrap() >= 0.95);
}

#[test]
fn cross_validated_accuracy_on_separable_set() {
    let (enc, data) = separable(2);
    for arch in [Architecture::Cnn, Architecture::Ssae] {
        let report = cross_validate(&config(arch), &fit(4), &enc.table, &data, 10).unwrap();
        assert_eq!(report.folds.len(), 10);
        assert!(report.mean >= 0.9, "{} mean {}", arch.name(), report.mean);
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let (enc, data) = separable(1);
    let cfg = config(Architecture::Cnn);
    let tc = TrainConfig {
        learning_rate: 0.0,
        epochs: 2,
        ..fit(9)
    };
    let trained = train(&cfg, &tc, &enc.table, &data).unwrap();
    // model initialisation uses the first derived stream of the training seed
    let initial = Model::new(cfg, &enc.table, hominem::seed::derive(9, 0)).unwrap();
    for ((n1, a), (n2, b)) in trained.model.params().into_iter().zip(initial.params()) {
        assert_eq!(n1, n2);
        assert_eq!(a.data(), b.data(), "{n1}");
    }
}

#[test]
fn same_seed_same_trace() {
    let (enc, data) = separable(1);
    let cfg = config(Architecture::BiLstm);
    let tc = TrainConfig { epochs: 3, ..fit(5) };
    let a = train(&cfg, &tc, &enc.table, &data).unwrap();
    let b = train(&cfg, &tc, &enc.table, &data).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.train_ids, b.train_ids);
}

#[test]
fn divergence_is_reported() {
    let (enc, data) = separable(1);
    let cfg = config(Architecture::Cnn).with_regression();
    let data: Vec<Example> = data
        .into_iter()
        .map(|e| Example {
            target: Target::Score(1e300),
            ..e
        })
        .collect();
    let tc = TrainConfig {
        objective: Objective::MeanSquaredError,
        ..fit(1)
    };
    assert!(matches!(train(&cfg, &tc, &enc.table, &data), Err(Error::Divergence { .. })));
}

#[test]
fn seeded_output_is_bit_identical() {
    // recorded from the first verified build
    const GOLDEN: [u64; 2] = [0x3fe00976d2dc0d6a, 0x3fdfed125a47e52b];
    let emb = EmbeddingTable::random(12, 6, 7);
    let mut cfg = config(Architecture::Ssae);
    cfg.hidden = 4;
    let model = Model::new(cfg, &emb, 42).unwrap();
    let out = model.predict(&Input::tokens(vec![3, 4, 5, 11, 1])).unwrap();
    let bits: Vec<u64> = out.iter().map(|v| v.to_bits()).collect();
    let again: Vec<u64> = model
        .predict(&Input::tokens(vec![3, 4, 5, 11, 1]))
        .unwrap()
        .iter()
        .map(|v| v.to_bits())
        .collect();
    assert_eq!(bits, again);
    assert_eq!(bits, GOLDEN, "got {:#x?}", bits);
}
