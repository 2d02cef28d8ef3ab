use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use jointscl::corpus::{
    load_domain, parse_processed, parse_tsv, split, write_domain, Corpus, DomainData, SplitSpec,
    NEGATIVE_FILE, POSITIVE_FILE, UNLABELED_FILE,
};
use jointscl::eval::synthetic::{generate, SyntheticSpec};
use jointscl::eval::{
    accuracy, emit_report, prepare_pair, run_benchmark, BenchmarkConfig, BenchmarkSpec, System,
};
use jointscl::featurize::{build_vocabulary, vectorize_corpus, DesignMatrix, Vocabulary};
use jointscl::manifest::{sha256_hex, RunManifest};
use jointscl::models::{
    train_aescl, train_classic_scl, train_joint, train_logreg, AeSclConfig, ClassicSclConfig,
    FeatureRow, LogRegConfig, TrainConfig, TrainedModel,
};
use jointscl::neural::Checkpoint;
use jointscl::pivot::{
    candidate_features, select_pivots, term_overlap, PivotRequest, PivotSet, PivotStrategy,
};
use jointscl::rng::derive_seed;

use crate::args::*;
use crate::CliError;

type Res<T> = Result<T, CliError>;

pub(crate) fn dispatch(cmd: Command, name: &str, recorded: BTreeMap<String, String>) -> Res<()> {
    let seed = recorded.get("seed").and_then(|s| s.parse().ok());
    let mut manifest = RunManifest::new(name, seed);
    manifest.config = recorded;
    match cmd {
        Command::Vocab(a) => vocab(a, manifest),
        Command::Pivots(a) => pivots(a, manifest),
        Command::Overlap(a) => overlap(a, manifest),
        Command::Train(a) => train(a, manifest),
        Command::Eval(a) => eval(a, manifest),
        Command::Benchmark(a) => benchmark(a, manifest),
        Command::Synth(a) => synth(a, manifest),
        Command::Selfcheck(a) => crate::selfcheck::run(&a),
        Command::Replay(a) => {
            let m = RunManifest::read(&a.manifest)?;
            crate::run(crate::replay_argv(&m.command, &m.config)?)
        }
    }
}

fn write(path: &Path, body: &[u8]) -> Res<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, body).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn finish(mut manifest: RunManifest, outputs: &[PathBuf], manifest_path: &Path) -> Res<()> {
    for o in outputs {
        manifest.output(o)?;
    }
    write(manifest_path, manifest.to_json()?.as_bytes())?;
    Ok(())
}

fn is_tsv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "tsv")
}

fn read_labeled(path: &Path, domain: &str) -> Res<Corpus> {
    let c = if is_tsv(path) { parse_tsv(path, domain, true)? } else { parse_processed(path, domain)? };
    if !c.labeled {
        return Err(jointscl::Error::MissingLabels(format!("{} has unlabeled reviews", path.display())).into());
    }
    Ok(c)
}

fn read_unlabeled(path: &Path, domain: &str) -> Res<Corpus> {
    Ok(if is_tsv(path) {
        parse_tsv(path, domain, false)?
    } else {
        parse_processed(path, domain)?.without_labels()
    })
}

struct Inputs {
    source: Corpus,
    source_unlabeled: Option<Corpus>,
    target: Corpus,
}

impl Inputs {
    fn load(d: &DataArgs, manifest: &mut RunManifest) -> Res<Self> {
        if d.source_domain == d.target_domain {
            return Err(CliError::usage("source and target domains need different names".into()));
        }
        manifest.input(&d.source)?.input(&d.target)?;
        let source_unlabeled = match &d.source_unlabeled {
            Some(p) => {
                manifest.input(p)?;
                Some(read_unlabeled(p, &d.source_domain)?)
            }
            None => None,
        };
        Ok(Inputs {
            source: read_labeled(&d.source, &d.source_domain)?,
            source_unlabeled,
            target: read_unlabeled(&d.target, &d.target_domain)?,
        })
    }

    fn vocabulary(&self, extra: &[&Corpus], min_df: u32) -> Res<Vocabulary> {
        let mut all: Vec<&Corpus> = extra.to_vec();
        all.extend(self.source_unlabeled.iter());
        all.push(&self.target);
        Ok(build_vocabulary(&all, min_df)?)
    }

    /// Every unlabeled row: source pool plus target.
    fn unlabeled(&self, vocab: &Vocabulary) -> Res<DesignMatrix> {
        let mut parts = vec![vectorize_corpus(&self.target, vocab)];
        if let Some(c) = &self.source_unlabeled {
            parts.insert(0, vectorize_corpus(c, vocab));
        }
        let refs: Vec<&DesignMatrix> = parts.iter().collect();
        Ok(DesignMatrix::concat(&refs)?.unlabeled())
    }
}

fn vocab(a: VocabArgs, mut manifest: RunManifest) -> Res<()> {
    let inputs = Inputs::load(&a.data, &mut manifest)?;
    let vocab = inputs.vocabulary(&[&inputs.source], a.data.min_df)?;
    write(&a.out, vocab.to_tsv().as_bytes())?;
    manifest.stat("vocabulary_size", vocab.len());
    println!("wrote {} ({} terms)", a.out.display(), vocab.len());
    finish(manifest, &[a.out.clone()], &RunManifest::path_for(&a.out))
}

/// Picks pivots with the requested strategy. `labeled` supplies MI labels;
/// `pool` is every row, for the frequency strategy.
#[allow(clippy::too_many_arguments)]
fn choose_pivots(
    pa: &PivotArgs,
    seed: u64,
    vocab: &Vocabulary,
    data: &DataArgs,
    labeled: &DesignMatrix,
    pool: &DesignMatrix,
    manifest: &mut RunManifest,
) -> Res<PivotSet> {
    let strategy: PivotStrategy = pa.strategy.parse()?;
    let candidates = candidate_features(vocab, (&data.source_domain, &data.target_domain), pa.candidate_min_df)?;
    manifest.stat("candidates", candidates.len());
    let req = PivotRequest {
        p: pa.p,
        strategy,
        seed,
        candidate_min_df: pa.candidate_min_df,
    };
    let set = match strategy {
        PivotStrategy::MiOracle => {
            let path = pa
                .target_labeled
                .as_ref()
                .ok_or_else(|| CliError::usage("the oracle strategy needs --target-labeled".into()))?;
            manifest.input(path)?;
            let target = vectorize_corpus(&read_labeled(path, &data.target_domain)?, vocab);
            select_pivots(&target, &candidates, &req)?
        }
        PivotStrategy::Frequency => select_pivots(pool, &candidates, &req)?,
        _ => select_pivots(labeled, &candidates, &req)?,
    };
    Ok(set)
}

fn pivots(a: PivotsArgs, mut manifest: RunManifest) -> Res<()> {
    let inputs = Inputs::load(&a.data, &mut manifest)?;
    let vocab = inputs.vocabulary(&[&inputs.source], a.data.min_df)?;
    let labeled = vectorize_corpus(&inputs.source, &vocab);
    let pool = DesignMatrix::concat(&[&labeled.unlabeled(), &inputs.unlabeled(&vocab)?])?;
    let set = choose_pivots(&a.pivot, a.seed, &vocab, &a.data, &labeled, &pool, &mut manifest)?;
    write(&a.out, set.to_text(&vocab).as_bytes())?;
    manifest
        .stat("vocabulary_size", vocab.len())
        .stat("vocabulary_sha256", sha256_hex(vocab.to_tsv().as_bytes()))
        .stat("pivots", set.len());
    println!("wrote {} ({} pivots)", a.out.display(), set.len());
    finish(manifest, &[a.out.clone()], &RunManifest::path_for(&a.out))
}

fn read_text(path: &Path) -> Res<String> {
    fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn overlap(a: OverlapArgs, mut manifest: RunManifest) -> Res<()> {
    manifest.input(&a.a)?.input(&a.b)?;
    let (_, ta) = PivotSet::from_text(&read_text(&a.a)?, &a.a)?;
    let (_, tb) = PivotSet::from_text(&read_text(&a.b)?, &a.b)?;
    let report = term_overlap(&ta, &tb);
    write(&a.out, report.to_text().as_bytes())?;
    manifest.stat("shared", report.shared.len());
    println!("shared {} of {} / {}", report.shared.len(), ta.len(), tb.len());
    finish(manifest, &[a.out.clone()], &RunManifest::path_for(&a.out))
}

/// Maps a pivot file's terms onto `vocab`.
fn load_pivots(path: &Path, vocab: &Vocabulary) -> Res<PivotSet> {
    let (mut set, terms) = PivotSet::from_text(&read_text(path)?, path)?;
    set.indices = terms
        .iter()
        .map(|t| {
            vocab.get(t).ok_or_else(|| {
                jointscl::Error::InvalidArgument(format!("pivot `{t}` is not in the vocabulary")).into()
            })
        })
        .collect::<Res<_>>()?;
    Ok(set)
}

fn joint_config(h: &HyperArgs, p: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        hidden: h.hidden,
        pivots: p,
        lambda: h.lambda,
        rho: h.rho,
        lr: h.lr,
        epochs: h.epochs,
        batch_size: h.batch_size,
        seed,
        mask_pivots_in_input: h.mask_pivots,
        use_bias: h.use_bias,
        ..TrainConfig::default()
    }
}

fn aescl_config(h: &HyperArgs) -> AeSclConfig {
    AeSclConfig {
        hidden: h.aescl_hidden,
        ..AeSclConfig::default()
    }
}

fn classic_config(h: &HyperArgs) -> ClassicSclConfig {
    ClassicSclConfig {
        k: h.k,
        ..ClassicSclConfig::default()
    }
}

fn train(a: TrainArgs, mut manifest: RunManifest) -> Res<()> {
    let inputs = Inputs::load(&a.data, &mut manifest)?;
    let (train_c, val_c) = split(
        &inputs.source,
        &SplitSpec::new(a.hyper.train_size, a.hyper.validation_size, a.seed),
    )?;
    let vocab = inputs.vocabulary(&[&train_c, &val_c], a.data.min_df)?;
    let train_m = vectorize_corpus(&train_c, &vocab);
    let val_m = vectorize_corpus(&val_c, &vocab);
    let unlabeled = inputs.unlabeled(&vocab)?;
    let model_seed = derive_seed(a.seed, &a.system);

    let needs_pivots = a.system != "logreg";
    let pivots = match (&a.pivots, needs_pivots) {
        (Some(path), true) => {
            manifest.input(path)?.reference("pivots", path);
            Some(load_pivots(path, &vocab)?)
        }
        (None, true) => {
            let pool = DesignMatrix::concat(&[&train_m.unlabeled(), &unlabeled])?;
            let seed = derive_seed(a.seed, "pivot-seed");
            Some(choose_pivots(&a.pivot, seed, &vocab, &a.data, &train_m, &pool, &mut manifest)?)
        }
        (_, false) => None,
    };
    let model = match a.system.as_str() {
        "joint" => {
            let cfg = joint_config(&a.hyper, pivots.as_ref().unwrap().len(), model_seed);
            TrainedModel::Joint(train_joint(&train_m, &val_m, &unlabeled, pivots.as_ref().unwrap(), &cfg)?)
        }
        "aescl" => TrainedModel::AeScl(train_aescl(
            &train_m,
            &val_m,
            &unlabeled,
            pivots.as_ref().unwrap(),
            &aescl_config(&a.hyper),
            model_seed,
        )?),
        "classic_scl" => TrainedModel::ClassicScl(train_classic_scl(
            &train_m,
            &val_m,
            &unlabeled,
            pivots.as_ref().unwrap(),
            &classic_config(&a.hyper),
            model_seed,
        )?),
        "logreg" => {
            let rows = |m: &DesignMatrix| m.rows.iter().map(FeatureRow::binary).collect::<Vec<_>>();
            let ys = |m: &DesignMatrix| {
                m.labels.as_ref().unwrap().iter().map(|&y| f64::from(y)).collect::<Vec<_>>()
            };
            let cfg = LogRegConfig { seed: model_seed, ..LogRegConfig::default() };
            let val_rows = rows(&val_m);
            let val_y = ys(&val_m);
            TrainedModel::LogReg(train_logreg(&rows(&train_m), &ys(&train_m), Some((&val_rows, &val_y)), train_m.dim, &cfg)?)
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown system `{other}` (expected joint, aescl, classic_scl or logreg)"
            )))
        }
    };
    let ck = model
        .to_checkpoint(model_seed)
        .with_meta("vocab_tsv", vocab.to_tsv())
        .with_meta("source_domain", &a.data.source_domain)
        .with_meta("target_domain", &a.data.target_domain);
    write(&a.out, &ck.to_bytes())?;
    manifest
        .stat("vocabulary_size", vocab.len())
        .stat("vocabulary_sha256", sha256_hex(vocab.to_tsv().as_bytes()))
        .stat("best_epoch", model.best_epoch());
    println!("wrote {} (best epoch {})", a.out.display(), model.best_epoch());
    finish(manifest, &[a.out.clone()], &RunManifest::path_for(&a.out))
}

fn eval(a: EvalArgs, mut manifest: RunManifest) -> Res<()> {
    manifest.input(&a.model)?.input(&a.target)?.reference("model", &a.model);
    let ck = Checkpoint::load(&a.model)?;
    let vocab = Vocabulary::from_tsv(ck.meta("vocab_tsv")?, &a.model)?;
    let model = TrainedModel::from_checkpoint(&ck)?;
    let target = vectorize_corpus(&read_labeled(&a.target, &a.target_domain)?, &vocab);
    let predictions = target
        .rows
        .iter()
        .map(|x| model.predict(x).map(|p| p.label))
        .collect::<jointscl::Result<Vec<u8>>>()?;
    let acc = accuracy(&predictions, target.labels.as_ref().unwrap())?;
    let report = serde_json::json!({
        "model": a.model.display().to_string(),
        "kind": ck.kind,
        "target": a.target.display().to_string(),
        "documents": predictions.len(),
        "accuracy": acc,
    });
    write(&a.out, format!("{}\n", serde_json::to_string_pretty(&report)?).as_bytes())?;
    manifest.stat("accuracy", acc);
    println!("accuracy {acc:.4} on {} reviews", predictions.len());
    finish(manifest, &[a.out.clone()], &RunManifest::path_for(&a.out))
}

fn parse_systems(names: &[String]) -> Res<Vec<System>> {
    let mut out = Vec::new();
    for n in names {
        let s: System = n.parse()?;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    Ok(out)
}

fn benchmark(a: BenchmarkArgs, mut manifest: RunManifest) -> Res<()> {
    let systems = parse_systems(&a.systems)?;
    let baseline: System = a.baseline.parse()?;
    let mut domains: Vec<DomainData> = Vec::new();
    for name in &a.domains {
        for file in [POSITIVE_FILE, NEGATIVE_FILE, UNLABELED_FILE] {
            manifest.input(&a.data_dir.join(name).join(file))?;
        }
        domains.push(load_domain(&a.data_dir, name)?);
    }
    let cfg = BenchmarkConfig {
        joint: joint_config(&a.hyper, a.p, 0),
        aescl: aescl_config(&a.hyper),
        classic: classic_config(&a.hyper),
        logreg: LogRegConfig::default(),
        train_size: a.hyper.train_size,
        validation_size: a.hyper.validation_size,
        min_df: a.min_df,
        candidate_min_df: a.candidate_min_df,
        freeze_split: a.freeze_split,
        base_seed: a.seed,
    };
    let spec = BenchmarkSpec {
        systems,
        seeds: a.seeds,
        baseline: Some(baseline),
        jobs: a.jobs,
    };
    let results = run_benchmark(&domains, &spec, &cfg)?;

    let overlap = match a.overlap.as_slice() {
        [] => None,
        [x, y] => {
            let find = |n: &str| {
                domains
                    .iter()
                    .find(|d| d.name == n)
                    .ok_or_else(|| CliError::usage(format!("--overlap domain `{n}` is not in --domains")))
            };
            let (dx, dy) = (find(x)?, find(y)?);
            let pxy = prepare_pair(dx, dy, &cfg, a.seed)?;
            let pyx = prepare_pair(dy, dx, &cfg, a.seed)?;
            let sx = pxy.pivots(PivotStrategy::MiSource, &cfg, a.seed)?;
            let sy = pyx.pivots(PivotStrategy::MiSource, &cfg, a.seed)?;
            let tx: Vec<&str> = sx.indices.iter().map(|&i| pxy.vocab.term(i)).collect();
            let ty: Vec<&str> = sy.indices.iter().map(|&i| pyx.vocab.term(i)).collect();
            let report = term_overlap(&tx, &ty);
            manifest.stat("pivot_overlap_shared", report.shared.len());
            Some(format!("# a={x}\tb={y}\tstrategy=mi_source\n{}", report.to_text()))
        }
        _ => return Err(CliError::usage("--overlap takes exactly two domains".into())),
    };
    let written = emit_report(&results, &a.out, overlap.as_deref())?;
    manifest.stat("runs", results.runs.len());
    for s in &spec.systems {
        if let Some(m) = results.mean_accuracy(*s) {
            manifest.stat(&format!("mean_accuracy.{s}"), format!("{m:.4}"));
        }
    }
    print!("{}", jointscl::eval::summary_text(&results));
    finish(manifest, &written, &a.out.join("manifest.json"))
}

fn synth(a: SynthArgs, mut manifest: RunManifest) -> Res<()> {
    let [x, y] = a.domains.as_slice() else {
        return Err(CliError::usage("--domains takes exactly two names".into()));
    };
    let spec = SyntheticSpec {
        labeled_per_domain: a.labeled,
        unlabeled_per_domain: a.unlabeled,
        ..SyntheticSpec::default()
    };
    manifest.stat("generator", serde_json::to_string(&spec)?);
    let (dx, dy) = generate(&spec, (x, y), a.seed);
    let mut outputs = Vec::new();
    for d in [&dx, &dy] {
        write_domain(&a.out, d)?;
        for f in [POSITIVE_FILE, NEGATIVE_FILE, UNLABELED_FILE] {
            outputs.push(a.out.join(&d.name).join(f));
        }
    }
    println!("wrote domains {x} and {y} under {}", a.out.display());
    finish(manifest, &outputs, &a.out.join("manifest.json"))
}
