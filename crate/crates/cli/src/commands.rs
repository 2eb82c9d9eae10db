use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use hominem::analysis::{self, error_buckets, render_heatmap, top_trigger_ngrams, Bucket, WeightedDoc};
use hominem::annotation::{self, AnnotationSet, MaceConfig};
use hominem::corpus::{self, Ingested};
use hominem::dataset::{self, DatasetRecord, Label};
use hominem::neural::{
    self, Architecture, Checkpoint, CvReport, Example, Input, ModelConfig, Objective, OptimizerKind, Target,
    TrainConfig,
};
use hominem::sampling;
use hominem::seed;
use hominem::text::{self, build_vocab, tokenize_with, EmbeddingTable, Encoder, TokenizerConfig};
use hominem::topics::{self, LdaConfig, LdaModel};

use crate::manifest;
use crate::*;

// seed streams
const EMBEDDINGS: u64 = 1;
const TOPIC_INFERENCE: u64 = 2;
const TRAINING: u64 = 3;
const ANNOTATION: u64 = 4;
const TOPIC_FIT: u64 = 5;

struct Ctx<'a> {
    out: &'a Path,
    seed: u64,
}

impl Ctx<'_> {
    fn dir(&self, sub: &str) -> Result<PathBuf> {
        let d = self.out.join(sub);
        fs::create_dir_all(&d).with_context(|| format!("creating {}", d.display()))?;
        Ok(d)
    }

    fn write(&self, sub: &str, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.dir(sub)?.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn manifest(&self, command: &str, params: &impl Serialize, input: Option<&Path>) -> Result<()> {
        manifest::write(self.out, command, params, input, self.seed)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx {
        out: &cli.global.out,
        seed: cli.global.seed,
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Sample(SampleCommand::Binary(a)) => sample_binary(&ctx, a),
        Command::Sample(SampleCommand::OpGroups(a)) => sample_op_groups(&ctx, a),
        Command::Sample(SampleCommand::Triplets(a)) => sample_triplets(&ctx, a),
        Command::Annotate(AnnotateCommand::Mace(a)) => annotate_mace(&ctx, a),
        Command::Annotate(AnnotateCommand::Distribution(a)) => annotate_distribution(&ctx, a),
        Command::Annotate(AnnotateCommand::Spans(a)) => annotate_spans(&ctx, a),
        Command::Annotate(AnnotateCommand::Scale(a)) => annotate_scale(&ctx, a),
        Command::Lda(LdaCommand::Fit(a)) => lda_fit(&ctx, a),
        Command::Lda(LdaCommand::Infer(a)) => lda_infer(&ctx, a),
        Command::Train(t) => {
            let (arch, a) = match t {
                TrainCommand::Cnn(a) => (Architecture::Cnn, a),
                TrainCommand::Bilstm(a) => (Architecture::BiLstm, a),
                TrainCommand::Ssae(a) => (Architecture::Ssae, a),
                TrainCommand::CnnLda(a) => (Architecture::CnnLda, a),
            };
            train(&ctx, arch, a)
        }
        Command::Cv(a) => cv(&ctx, a),
        Command::Predict(a) => predict(&ctx, a),
        Command::Extrapolate(a) => extrapolate(&ctx, a),
        Command::Kstest(a) => kstest(&ctx, a),
        Command::Kappa(a) => kappa(&ctx, a),
        Command::Spearman(a) => spearman(&ctx, a),
        Command::Explain(a) => explain(&ctx, a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn load_corpus(path: &Path) -> Result<Ingested> {
    let ingested = corpus::ingest(open(path)?)?;
    if ingested.trees.is_empty() {
        bail!("{}: no valid discussion trees", path.display());
    }
    Ok(ingested)
}

fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let records = dataset::read_jsonl(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if records.is_empty() {
        bail!("{}: dataset is empty", path.display());
    }
    Ok(records)
}

fn write_dataset(ctx: &Ctx, name: &str, records: &[DatasetRecord]) -> Result<PathBuf> {
    let path = ctx.dir("datasets")?.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    dataset::write_jsonl(&mut w, records)?;
    w.flush()?;
    Ok(path)
}

fn load_annotations(path: &Path, labels: Option<usize>) -> Result<AnnotationSet> {
    AnnotationSet::read_tsv(open(path)?, labels).with_context(|| format!("reading {}", path.display()))
}

fn read_column(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Ok(out)
}

fn read_numbers(path: &Path) -> Result<Vec<f64>> {
    read_column(path)?
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.parse::<f64>()
                .with_context(|| format!("{} line {}: not a number: {s:?}", path.display(), i + 1))
        })
        .collect()
}

fn tokenizer(lowercase: bool) -> TokenizerConfig {
    TokenizerConfig { lowercase }
}

fn build_encoder<'a>(texts: impl Iterator<Item = &'a str>, args: &EncoderArgs, seed_value: u64) -> Result<Encoder> {
    let tok = tokenizer(args.lowercase);
    let docs: Vec<Vec<String>> = texts.map(|t| tokenize_with(t, tok)).collect();
    let vocab = build_vocab(&docs, 1);
    let emb_seed = seed::derive(seed_value, EMBEDDINGS);
    let table = match &args.embeddings {
        Some(path) => text::load_embeddings(open(path)?, &vocab, emb_seed)
            .with_context(|| format!("reading {}", path.display()))?,
        None => {
            if args.dim == 0 {
                bail!("--dim must be at least 1");
            }
            EmbeddingTable::random(vocab.len(), args.dim, emb_seed)
        }
    };
    Ok(Encoder {
        vocab,
        table,
        tokenizer: tok,
    })
}

fn pairs_table(pairs: impl Iterator<Item = (String, String, f64)>) -> String {
    let mut s = String::from("positive\tnegative\tscore\n");
    for (p, n, sc) in pairs {
        let _ = writeln!(s, "{p}\t{n}\t{sc:.6}");
    }
    s
}

fn ingest(ctx: &Ctx, a: &CorpusArgs) -> Result<()> {
    let ing = corpus::ingest(open(&a.corpus)?)?;
    let records: Vec<&corpus::PostRecord> = corpus::posts_in_order(&ing.trees).collect();
    let path = ctx.dir("datasets")?.join("corpus.jsonl");
    let mut w = BufWriter::new(File::create(&path)?);
    for r in &records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    ctx.write("reports", "quarantine.tsv", &ing.quarantine_table())?;
    println!("trees={}", ing.trees.len());
    println!("posts={}", ing.post_count());
    println!("quarantined={}", ing.quarantine.len());
    ctx.manifest("ingest", a, Some(&a.corpus))
}

fn stats(ctx: &Ctx, a: &CorpusArgs) -> Result<()> {
    let ing = load_corpus(&a.corpus)?;
    let st = corpus::compute_stats(&ing.trees)?;
    let report = st.to_report();
    ctx.write("reports", "stats.txt", &report)?;
    ctx.write("reports", "histogram.tsv", &st.histogram_table())?;
    ctx.write("reports", "per_submission.tsv", &st.per_submission_table())?;
    print!("{report}");
    ctx.manifest("stats", a, Some(&a.corpus))
}

fn corpus_encoder(ing: &Ingested, args: &EncoderArgs, seed_value: u64) -> Result<Encoder> {
    let texts: Vec<String> = corpus::posts_in_order(&ing.trees).map(|p| p.full_text()).collect();
    build_encoder(texts.iter().map(String::as_str), args, seed_value)
}

fn sample_binary(ctx: &Ctx, a: &SampleArgs) -> Result<()> {
    let ing = load_corpus(&a.corpus)?;
    let enc = corpus_encoder(&ing, &a.encoder, ctx.seed)?;
    let records = sampling::sample_binary_dataset(&ing.trees, &enc)?;
    write_dataset(ctx, "binary.jsonl", &records)?;
    let pairs = records
        .chunks(2)
        .map(|c| (c[0].instance_id.clone(), c[1].instance_id.clone(), f64::NAN));
    // scores are recomputed so the table reflects the encoder actually used
    let scored: Vec<(String, String, f64)> = pairs
        .map(|(p, n, _)| {
            let text_of = |id: &str| records.iter().find(|r| r.instance_id == id).map(|r| r.text.as_str()).unwrap_or("");
            let (dp, dn) = (enc.encode(text_of(&p)), enc.encode(text_of(&n)));
            let s = sampling::similarity(
                &text::avg_vector(&dp, &enc.table),
                dp.len(),
                &text::avg_vector(&dn, &enc.table),
                dn.len(),
            );
            (p, n, s)
        })
        .collect();
    ctx.write("reports", "binary_pairs.tsv", &pairs_table(scored.into_iter()))?;
    println!("instances={}", records.len());
    ctx.manifest("sample-binary", a, Some(&a.corpus))
}

fn sample_op_groups(ctx: &Ctx, a: &CorpusArgs) -> Result<()> {
    let ing = load_corpus(&a.corpus)?;
    let groups = sampling::sample_op_groups(&ing.trees);
    let records = groups.to_records();
    write_dataset(ctx, "op_groups.jsonl", &records)?;
    println!("ad_hominem_group={}", groups.ad_hominem.len());
    println!("delta_group={}", groups.delta.len());
    ctx.manifest("sample-op-groups", a, Some(&a.corpus))
}

fn sample_triplets(ctx: &Ctx, a: &SampleArgs) -> Result<()> {
    let ing = load_corpus(&a.corpus)?;
    let enc = corpus_encoder(&ing, &a.encoder, ctx.seed)?;
    let triplets = sampling::sample_triplets(&ing.trees, &enc)?;
    let records: Vec<DatasetRecord> = triplets.iter().map(|t| t.to_record()).collect();
    write_dataset(ctx, "triplets.jsonl", &records)?;
    let scored = triplets.chunks(2).map(|c| {
        let (dp, dn) = (enc.encode(&c[0].text), enc.encode(&c[1].text));
        let s = sampling::similarity(
            &text::avg_vector(&dp, &enc.table),
            dp.len(),
            &text::avg_vector(&dn, &enc.table),
            dn.len(),
        );
        (c[0].instance_id.clone(), c[1].instance_id.clone(), s)
    });
    ctx.write("reports", "triplet_pairs.tsv", &pairs_table(scored))?;
    println!("instances={}", records.len());
    ctx.manifest("sample-triplets", a, Some(&a.corpus))
}

fn mace_config(em: &EmArgs, seed_value: u64) -> MaceConfig {
    MaceConfig {
        restarts: em.restarts,
        iterations: em.iterations,
        smoothing: em.smoothing,
        seed: seed::derive(seed_value, ANNOTATION),
    }
}

fn annotate_mace(ctx: &Ctx, a: &MaceArgs) -> Result<()> {
    let set = load_annotations(&a.annotations, a.labels)?;
    let cfg = mace_config(&a.em, ctx.seed);
    let post = annotation::mace_em(&set, &cfg)?;
    let gold = annotation::select_confident(&post, a.threshold)?;
    ctx.write("reports", "gold.tsv", &annotation::gold_table(&gold))?;
    let mut ann = String::from("annotator_id\tspamming\tpreferences\n");
    for (j, id) in post.annotators.iter().enumerate() {
        let prefs: Vec<String> = post.preferences[j].iter().map(|p| format!("{p:.6}")).collect();
        let _ = writeln!(ann, "{id}\t{:.6}\t{}", post.spamming[j], prefs.join(","));
    }
    ctx.write("reports", "annotators.tsv", &ann)?;
    println!("items={}", post.items.len());
    println!("retained={}", gold.len());
    if let Some(g) = a.groups {
        if g < 2 {
            bail!("--groups needs at least 2");
        }
        let parts = set.split_groups(g, seed::derive(cfg.seed, 1));
        let golds: Vec<Vec<usize>> = parts
            .iter()
            .map(|p| annotation::mace_em(p, &cfg).map(|post| (0..post.items.len()).map(|i| post.gold(i)).collect()))
            .collect::<hominem::Result<_>>()?;
        let mut report = String::new();
        for i in 0..g {
            for j in i + 1..g {
                let k = analysis::cohen_kappa(&golds[i], &golds[j]);
                let value = k.map_or_else(|e| format!("undefined ({e})"), |v| format!("{v}"));
                let _ = writeln!(report, "kappa_group{i}_group{j}={value}");
            }
        }
        ctx.write("reports", "group_kappa.txt", &report)?;
        print!("{report}");
    }
    ctx.manifest("annotate-mace", a, Some(&a.annotations))
}

fn annotate_distribution(ctx: &Ctx, a: &DistributionArgs) -> Result<()> {
    let set = load_annotations(&a.annotations, a.labels)?;
    let dist = annotation::label_distribution(&set);
    let mut s = String::from("item_id");
    for l in 0..set.label_count() {
        let _ = write!(s, "\tlabel_{l}");
    }
    s.push('\n');
    for (item, d) in set.items().iter().zip(&dist) {
        s.push_str(item);
        for p in d {
            let _ = write!(s, "\t{p:.6}");
        }
        s.push('\n');
    }
    ctx.write("reports", "distribution.tsv", &s)?;
    ctx.manifest("annotate-distribution", a, Some(&a.annotations))
}

fn annotate_spans(ctx: &Ctx, a: &SpanArgs) -> Result<()> {
    let set = load_annotations(&a.annotations, Some(2))?;
    let spans = annotation::span_gold(&set, a.threshold, &mace_config(&a.em, ctx.seed))?;
    let mut s = String::from("doc_id\tstart\tend\n");
    for (doc, list) in &spans {
        for sp in list {
            let _ = writeln!(s, "{doc}\t{}\t{}", sp.start, sp.end);
        }
    }
    ctx.write("reports", "spans.tsv", &s)?;
    ctx.manifest("annotate-spans", a, Some(&a.annotations))
}

fn annotate_scale(ctx: &Ctx, a: &ScaleArgs) -> Result<()> {
    let set = load_annotations(&a.annotations, a.labels)?;
    let means = annotation::average_scale(&set, None)?;
    let mut s = String::from("item_id\tmean\n");
    for (item, m) in set.items().iter().zip(&means) {
        let _ = writeln!(s, "{item}\t{m:.6}");
    }
    ctx.write("reports", "scale.tsv", &s)?;
    if let Some(path) = &a.corpus {
        let ing = load_corpus(path)?;
        let subs: HashMap<&str, &corpus::PostRecord> =
            ing.trees.iter().map(|t| (t.submission().id.as_str(), t.submission())).collect();
        let mut records = Vec::new();
        let mut missing = Vec::new();
        for (item, m) in set.items().iter().zip(&means) {
            match subs.get(item.as_str()) {
                Some(p) => records.push(DatasetRecord {
                    instance_id: item.clone(),
                    label: Label::Score(*m),
                    text: p.full_text(),
                    post_ids: vec![item.clone()],
                }),
                None => missing.push(item.clone()),
            }
        }
        if !missing.is_empty() {
            bail!("annotated items not found among submissions: {}", missing.join(", "));
        }
        write_dataset(ctx, &format!("{}.jsonl", a.name), &records)?;
    }
    ctx.manifest("annotate-scale", a, Some(&a.annotations))
}

fn lda_fit(ctx: &Ctx, a: &LdaFitArgs) -> Result<()> {
    let mut docs: Vec<(String, String)> = match (&a.corpus, &a.data) {
        (Some(c), _) => load_corpus(c)?
            .trees
            .iter()
            .map(|t| (t.submission().id.clone(), t.submission().full_text()))
            .collect(),
        (None, Some(d)) => load_dataset(d)?.into_iter().map(|r| (r.instance_id, r.text)).collect(),
        (None, None) => bail!("either --corpus or --data is required"),
    };
    if let Some(ex) = &a.exclude {
        let held: BTreeSet<String> = load_dataset(ex)?.into_iter().map(|r| r.instance_id).collect();
        docs.retain(|(id, _)| !held.contains(id));
    }
    if docs.is_empty() {
        bail!("no documents left to fit the topic model on");
    }
    let tokens: Vec<Vec<String>> = docs.iter().map(|(_, t)| topics::document_tokens(t)).collect();
    let cfg = LdaConfig {
        k: a.k,
        alpha: a.alpha,
        beta: a.beta,
        iterations: a.iterations,
        seed: seed::derive(ctx.seed, TOPIC_FIT),
    };
    let fit = topics::fit_lda(&tokens, &cfg)?;
    let path = ctx.dir("models")?.join("lda.bin");
    let mut w = BufWriter::new(File::create(&path)?);
    fit.model.write_to(&mut w)?;
    w.flush()?;
    ctx.write("reports", "lda_top_words.tsv", &fit.model.top_words_report(a.top))?;
    let mut ll = String::from("sweep\tlog_likelihood\n");
    for (s, v) in &fit.log_likelihood {
        let _ = writeln!(ll, "{s}\t{v:.6}");
    }
    ctx.write("reports", "lda_likelihood.tsv", &ll)?;
    println!("documents={}", docs.len());
    println!("vocabulary={}", fit.model.vocab_size());
    ctx.manifest("lda-fit", a, a.corpus.as_deref().or(a.data.as_deref()))
}

fn load_lda(path: &Path) -> Result<LdaModel> {
    LdaModel::read_from(open(path)?).with_context(|| format!("reading {}", path.display()))
}

/// Fold-in mixtures, each seeded from the master seed and the instance id.
fn topic_vectors(records: &[DatasetRecord], lda: &LdaModel, iterations: usize, seed_value: u64) -> Vec<Vec<f64>> {
    let base = seed::derive(seed_value, TOPIC_INFERENCE);
    records
        .par_iter()
        .map(|r| {
            topics::infer_theta(
                lda,
                &topics::document_tokens(&r.text),
                iterations,
                seed::derive(base, seed::hash_str(&r.instance_id)),
            )
        })
        .collect()
}

fn lda_infer(ctx: &Ctx, a: &LdaInferArgs) -> Result<()> {
    let lda = load_lda(&a.model)?;
    let records = load_dataset(&a.data)?;
    let thetas = topic_vectors(&records, &lda, a.iterations, ctx.seed);
    let mut s = String::from("instance_id");
    for k in 0..lda.k {
        let _ = write!(s, "\ttopic_{k}");
    }
    s.push('\n');
    for (r, th) in records.iter().zip(&thetas) {
        s.push_str(&r.instance_id);
        for v in th {
            let _ = write!(s, "\t{v:.6}");
        }
        s.push('\n');
    }
    ctx.write("reports", "theta.tsv", &s)?;
    ctx.manifest("lda-infer", a, Some(&a.data))
}

/// Class names in sorted order, or empty for a regression dataset.
fn dataset_classes(records: &[DatasetRecord]) -> Result<Vec<String>> {
    let scores = records.iter().filter(|r| r.label.as_score().is_some()).count();
    if scores == records.len() {
        return Ok(Vec::new());
    }
    if scores > 0 {
        bail!("dataset mixes class labels and numeric scores");
    }
    let classes: BTreeSet<String> = records.iter().filter_map(|r| r.label.as_class().map(str::to_string)).collect();
    if classes.len() < 2 {
        bail!("classification needs at least two distinct labels, found {}", classes.len());
    }
    Ok(classes.into_iter().collect())
}

fn target_of(label: &Label, classes: &[String]) -> Result<Target> {
    match label {
        Label::Score(s) => Ok(Target::Score(*s)),
        Label::Class(c) => classes
            .iter()
            .position(|x| x == c)
            .map(Target::Class)
            .ok_or_else(|| anyhow!("label {c:?} unknown to the model")),
    }
}

fn inputs(
    records: &[DatasetRecord],
    enc: &Encoder,
    topic_dim: usize,
    topic_args: &TopicArgs,
    seed_value: u64,
) -> Result<Vec<Input>> {
    let thetas = if topic_dim > 0 {
        let path = topic_args
            .lda
            .as_ref()
            .ok_or_else(|| anyhow!("the topic-fusion model needs --lda"))?;
        let lda = load_lda(path)?;
        if lda.k != topic_dim {
            bail!("topic model has {} topics, the network expects {topic_dim}", lda.k);
        }
        topic_vectors(records, &lda, topic_args.infer_iterations, seed_value)
    } else {
        vec![Vec::new(); records.len()]
    };
    Ok(records
        .iter()
        .zip(thetas)
        .map(|(r, topic)| Input {
            indices: enc.encode(&r.text).indices,
            topic,
        })
        .collect())
}

fn model_config(arch: Architecture, classes: Vec<String>, m: &ModelArgs, topic_dim: usize) -> ModelConfig {
    let mut c = ModelConfig::new(arch, classes);
    c.filter_widths = m.widths.clone();
    c.feature_maps = m.maps;
    c.hidden = m.hidden;
    c.attention_hidden = m.attention_hidden;
    c.attention_rows = m.attention_rows;
    c.attention_penalty = m.attention_penalty;
    c.dropout = m.dropout;
    c.train_embeddings = m.train_embeddings;
    c.topic_dim = topic_dim;
    c
}

fn train_config(f: &FitArgs, regression: bool, seed_value: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: f.lr,
        epochs: f.epochs,
        batch_size: f.batch_size,
        seed: seed::derive(seed_value, TRAINING),
        patience: f.patience,
        objective: if regression {
            Objective::MeanSquaredError
        } else {
            Objective::CrossEntropy
        },
        optimizer: match f.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        },
        validation_fraction: f.validation_fraction,
    }
}

struct Prepared {
    encoder: Encoder,
    examples: Vec<Example>,
    classes: Vec<String>,
    topic_dim: usize,
}

fn prepare(
    arch: Architecture,
    records: &[DatasetRecord],
    enc_args: &EncoderArgs,
    topic_args: &TopicArgs,
    seed_value: u64,
) -> Result<Prepared> {
    let classes = dataset_classes(records)?;
    let encoder = build_encoder(records.iter().map(|r| r.text.as_str()), enc_args, seed_value)?;
    let topic_dim = if arch == Architecture::CnnLda {
        let path = topic_args
            .lda
            .as_ref()
            .ok_or_else(|| anyhow!("cnn-lda needs --lda <topic model>"))?;
        load_lda(path)?.k
    } else {
        0
    };
    let xs = inputs(records, &encoder, topic_dim, topic_args, seed_value)?;
    let examples = records
        .iter()
        .zip(xs)
        .map(|(r, input)| {
            Ok(Example {
                id: r.instance_id.clone(),
                input,
                target: target_of(&r.label, &classes)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Prepared {
        encoder,
        examples,
        classes,
        topic_dim,
    })
}

fn train(ctx: &Ctx, arch: Architecture, a: &TrainArgs) -> Result<()> {
    let records = load_dataset(&a.data)?;
    let p = prepare(arch, &records, &a.encoder, &a.topics, ctx.seed)?;
    let regression = p.classes.is_empty();
    let mcfg = model_config(arch, p.classes.clone(), &a.model, p.topic_dim);
    let tcfg = train_config(&a.fit, regression, ctx.seed);
    let trained = neural::train(&mcfg, &tcfg, &p.encoder.table, &p.examples)?;
    let mut log = String::from("epoch\ttrain_loss\tvalidation_loss\n");
    for e in &trained.trace {
        let v = e.validation_loss.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(log, "{}\t{:.6}\t{v}", e.epoch, e.train_loss);
    }
    let name = arch.name();
    ctx.write("reports", &format!("train_{name}.tsv"), &log)?;
    let ck = Checkpoint {
        model: trained.model,
        vocab: p.encoder.vocab,
        tokenizer: p.encoder.tokenizer,
        train_ids: records.iter().map(|r| r.instance_id.clone()).collect(),
    };
    let path = ctx.dir("models")?.join(format!("{name}.ckpt"));
    let mut w = BufWriter::new(File::create(&path)?);
    ck.write_to(&mut w)?;
    w.flush()?;
    println!("best_epoch={}", trained.best_epoch);
    println!("checkpoint={}", path.display());
    ctx.manifest(&format!("train-{name}"), a, Some(&a.data))
}

/// Published figures: (row, value).
fn reference_rows(table: ReferenceTable) -> &'static [(&'static str, f64)] {
    match table {
        ReferenceTable::AdHominem => &[("human", 0.878), ("bilstm", 0.782), ("cnn", 0.810)],
        ReferenceTable::Controversy => &[("human", 0.804), ("bilstm", 0.539), ("cnn", 0.559), ("cnn-lda", 0.569)],
        ReferenceTable::Reasonableness => &[("human", 0.646), ("bilstm", 0.332), ("cnn", 0.320), ("cnn-lda", 0.385)],
        ReferenceTable::Triplets => &[("cnn", 0.7095), ("ssae", 0.7208)],
    }
}

fn cv(ctx: &Ctx, a: &CvArgs) -> Result<()> {
    let records = load_dataset(&a.data)?;
    let archs: Vec<Architecture> = a
        .model
        .iter()
        .map(|m| Architecture::parse(m.trim()))
        .collect::<hominem::Result<_>>()?;
    let mut results: Vec<(Architecture, CvReport)> = Vec::new();
    for arch in archs {
        let p = prepare(arch, &records, &a.encoder, &a.topics, ctx.seed)?;
        let regression = p.classes.is_empty();
        let mcfg = model_config(arch, p.classes.clone(), &a.model_args, p.topic_dim);
        let tcfg = train_config(&a.fit, regression, ctx.seed);
        let report = neural::cross_validate(&mcfg, &tcfg, &p.encoder.table, &p.examples, a.folds)?;
        ctx.write("reports", &format!("cv_{}.tsv", arch.name()), &report.to_table())?;
        results.push((arch, report));
    }
    let refs = a.reference.map(reference_rows).unwrap_or(&[]);
    let lookup = |name: &str| refs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
    let mut s = String::from("model\tmetric\tmeasured\treference\n");
    if let Some(h) = lookup("human") {
        let metric = results.first().map_or("-", |(_, r)| r.metric.name());
        let _ = writeln!(s, "human\t{metric}\t-\t{h}");
    }
    for (arch, r) in &results {
        let reference = lookup(arch.name()).map_or_else(|| "-".to_string(), |v| v.to_string());
        let _ = writeln!(s, "{}\t{}\t{:.4}\t{reference}", arch.name(), r.metric.name(), r.mean);
    }
    ctx.write("reports", "cv_summary.tsv", &s)?;
    print!("{s}");
    ctx.manifest("cv", a, Some(&a.data))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::read_from(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn checkpoint_inputs(ck: &Checkpoint, records: &[DatasetRecord], topics: &TopicArgs, seed_value: u64) -> Result<Vec<Input>> {
    let enc = Encoder {
        vocab: ck.vocab.clone(),
        table: EmbeddingTable::from_rows(1, vec![0.0])?,
        tokenizer: ck.tokenizer,
    };
    inputs(records, &enc, ck.model.config().topic_dim, topics, seed_value)
}

fn label_text(l: &Label) -> String {
    match l {
        Label::Class(c) => c.clone(),
        Label::Score(s) => format!("{s}"),
    }
}

fn predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let ck = load_checkpoint(&a.model)?;
    let records = load_dataset(&a.data)?;
    let xs = checkpoint_inputs(&ck, &records, &a.topics, ctx.seed)?;
    let outputs: Vec<Vec<f64>> = xs.par_iter().map(|x| ck.model.predict(x)).collect::<hominem::Result<_>>()?;
    let cfg = ck.model.config();
    let mut s = String::from("instance_id\tgold\tprediction\toutputs\n");
    let mut hits = 0usize;
    for (r, o) in records.iter().zip(&outputs) {
        let pred = if cfg.is_regression() {
            format!("{:.6}", o[0])
        } else {
            cfg.classes[neural::argmax(o)].clone()
        };
        let gold = label_text(&r.label);
        hits += usize::from(pred == gold);
        let outs: Vec<String> = o.iter().map(|v| format!("{v:.6}")).collect();
        let _ = writeln!(s, "{}\t{gold}\t{pred}\t{}", r.instance_id, outs.join(","));
    }
    ctx.write("reports", "predictions.tsv", &s)?;
    if !cfg.is_regression() {
        println!("accuracy={}", hits as f64 / records.len() as f64);
    }
    ctx.manifest("predict", a, Some(&a.data))
}

fn extrapolate(ctx: &Ctx, a: &ExtrapolateArgs) -> Result<()> {
    let ck = load_checkpoint(&a.model)?;
    if !ck.model.config().is_regression() {
        return Err(hominem::Error::UnsupportedModel("extrapolation needs a regression model".into()).into());
    }
    let [ga, gb] = a.groups.as_slice() else {
        bail!("--groups takes exactly two labels");
    };
    let records = load_dataset(&a.data)?;
    let xs = checkpoint_inputs(&ck, &records, &a.topics, ctx.seed)?;
    let items: Vec<(String, String, Input)> = records
        .iter()
        .zip(xs)
        .map(|(r, x)| (r.instance_id.clone(), label_text(&r.label), x))
        .collect();
    let train_ids: BTreeSet<String> = ck.train_ids.iter().cloned().collect();
    let ex = analysis::extrapolate(|x: &Input| Ok(ck.model.predict(x)?[0]), &items, (ga, gb), &train_ids)?;
    let report = ex.to_report();
    ctx.write("reports", "extrapolation.txt", &report)?;
    let mut s = String::from("instance_id\tgroup\tscore\n");
    for g in [&ex.first, &ex.second] {
        for (id, sc) in g.ids.iter().zip(&g.scores) {
            let _ = writeln!(s, "{id}\t{}\t{sc:.6}", g.group);
        }
    }
    ctx.write("reports", "extrapolation_scores.tsv", &s)?;
    print!("{report}");
    ctx.manifest("extrapolate", a, Some(&a.data))
}

fn kstest(ctx: &Ctx, a: &PairArgs) -> Result<()> {
    let r = analysis::ks_two_sample(&read_numbers(&a.a)?, &read_numbers(&a.b)?)?;
    let s = format!("statistic={}\np_value={}\nn1={}\nn2={}\n", r.statistic, r.p_value, r.n1, r.n2);
    ctx.write("reports", "kstest.txt", &s)?;
    print!("{s}");
    ctx.manifest("kstest", a, Some(&a.a))
}

fn kappa(ctx: &Ctx, a: &PairArgs) -> Result<()> {
    let k = analysis::cohen_kappa(&read_column(&a.a)?, &read_column(&a.b)?)?;
    let s = format!("kappa={k}\n");
    ctx.write("reports", "kappa.txt", &s)?;
    print!("{s}");
    ctx.manifest("kappa", a, Some(&a.a))
}

fn spearman(ctx: &Ctx, a: &PairArgs) -> Result<()> {
    let rho = analysis::spearman(&read_numbers(&a.a)?, &read_numbers(&a.b)?)?;
    let s = format!("rho={rho}\n");
    ctx.write("reports", "spearman.txt", &s)?;
    print!("{s}");
    ctx.manifest("spearman", a, Some(&a.a))
}

/// File-system safe rendition of an instance id.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') { c } else { '_' })
        .collect()
}

fn explain(ctx: &Ctx, a: &ExplainArgs) -> Result<()> {
    let ck = load_checkpoint(&a.model)?;
    let cfg = ck.model.config();
    if cfg.architecture != Architecture::Ssae {
        return Err(hominem::Error::UnsupportedModel(format!("{} has no attention to explain", cfg.architecture.name())).into());
    }
    let records = load_dataset(&a.data)?;
    let docs: Vec<(hominem::text::TokenizedDoc, Vec<f64>, String)> = records
        .par_iter()
        .map(|r| {
            let doc = ck.vocab.encode(&tokenize_with(&r.text, ck.tokenizer));
            let input = Input::tokens(doc.indices.clone());
            let weights = ck.model.token_attention(&doc.indices)?;
            let pred = cfg.classes[neural::argmax(&ck.model.predict(&input)?)].clone();
            Ok((doc, weights, pred))
        })
        .collect::<hominem::Result<_>>()?;
    let predictions: Vec<String> = docs.iter().map(|d| d.2.clone()).collect();
    let gold: Vec<String> = records.iter().map(|r| label_text(&r.label)).collect();
    let weighted: Vec<WeightedDoc> = records
        .iter()
        .zip(docs)
        .map(|(r, (doc, weights, _))| WeightedDoc {
            instance_id: r.instance_id.clone(),
            tokens: doc.tokens,
            weights,
        })
        .collect();
    let buckets = error_buckets(&predictions, &gold, weighted, &a.positive)?;
    let heat = ctx.dir("heatmaps")?;
    let mut table = String::from("instance_id\tgold\tprediction\tbucket\n");
    let mut by_id: BTreeMap<&str, &analysis::AttentionReport> = BTreeMap::new();
    for reports in buckets.values() {
        for r in reports {
            by_id.insert(&r.instance_id, r);
        }
    }
    for r in records.iter().filter_map(|r| by_id.get(r.instance_id.as_str())) {
        fs::write(heat.join(format!("{}.html", file_stem(&r.instance_id))), render_heatmap(r))?;
        let _ = writeln!(table, "{}\t{}\t{}\t{}", r.instance_id, r.gold, r.prediction, r.bucket);
    }
    ctx.write("reports", "buckets.tsv", &table)?;
    for b in Bucket::ALL {
        let reports = &buckets[&b];
        let mut s = String::from("rank\tphrase\tmean_weight\tcount\n");
        for (i, t) in top_trigger_ngrams(reports, a.ngram, a.top_k).iter().enumerate() {
            let _ = writeln!(s, "{}\t{}\t{:.6}\t{}", i + 1, t.phrase, t.mean_weight, t.count);
        }
        ctx.write("reports", &format!("triggers_{}.tsv", b.short()), &s)?;
        println!("{}={}", b.short(), reports.len());
    }
    ctx.manifest("explain", a, Some(&a.data))
}
