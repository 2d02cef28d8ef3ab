//! Multi-seed, all-pairs adaptation benchmark.
//!
//! For every ordered pair of distinct domains and every seed, the source's
//! labeled reviews are split into train/validation, a vocabulary is built
//! from that pair's text, pivots are chosen per system, the system is
//! trained, and accuracy is measured on the target's full labeled set.
//!
//! Target labels are wrapped in [`HeldOutTarget`]; they are read only to
//! score predictions and, for the oracle system, to rank pivot candidates.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::accuracy;
use super::welch::{welch_one_tailed, WelchResult};
use crate::corpus::{split, DomainData, SplitSpec};
use crate::error::{Error, Result};
use crate::featurize::{build_vocabulary, vectorize_corpus, DesignMatrix, Vocabulary};
use crate::models::{
    train_aescl, train_classic_scl, train_joint, train_logreg, AeSclConfig, ClassicSclConfig,
    FeatureRow, LogRegConfig, TrainConfig, TrainedModel,
};
use crate::pivot::{candidate_features, select_pivots, PivotRequest, PivotSet, PivotStrategy};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Logreg,
    Aescl,
    ClassicScl,
    JointMi,
    JointOracle,
    JointRandom,
}

impl System {
    pub const ALL: [System; 6] = [
        System::Logreg,
        System::Aescl,
        System::ClassicScl,
        System::JointMi,
        System::JointOracle,
        System::JointRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            System::Logreg => "logreg",
            System::Aescl => "aescl",
            System::ClassicScl => "classic_scl",
            System::JointMi => "joint_mi",
            System::JointOracle => "joint_oracle",
            System::JointRandom => "joint_random",
        }
    }

    /// Pivot strategy the system trains with, if it uses pivots.
    pub fn pivot_strategy(self) -> Option<PivotStrategy> {
        match self {
            System::Logreg => None,
            System::JointOracle => Some(PivotStrategy::MiOracle),
            System::JointRandom => Some(PivotStrategy::Random),
            _ => Some(PivotStrategy::MiSource),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown system `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub joint: TrainConfig,
    pub aescl: AeSclConfig,
    pub classic: ClassicSclConfig,
    pub logreg: LogRegConfig,
    pub train_size: usize,
    pub validation_size: usize,
    pub min_df: u32,
    pub candidate_min_df: u32,
    /// Use `base_seed` for every split instead of re-deriving per seed.
    pub freeze_split: bool,
    pub base_seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            joint: TrainConfig::default(),
            aescl: AeSclConfig::default(),
            classic: ClassicSclConfig::default(),
            logreg: LogRegConfig::default(),
            train_size: 1600,
            validation_size: 400,
            min_df: 5,
            candidate_min_df: 10,
            freeze_split: false,
            base_seed: 0,
        }
    }
}

impl BenchmarkConfig {
    /// Short digest of the configuration a system ran under.
    pub fn hash_for(&self, system: System) -> String {
        let json = serde_json::json!({ "system": system.as_str(), "config": self });
        let digest = Sha256::digest(json.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub source: String,
    pub target: String,
    pub system: System,
    pub seed: u64,
    pub target_accuracy: f64,
    pub best_epoch: usize,
    pub config_hash: String,
}

/// Which purposes read the held-out target labels during one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelAudit {
    pub pivot_selection_reads: usize,
    pub evaluation_reads: usize,
}

/// Labeled target rows whose labels can only be used for scoring and
/// oracle pivot ranking.
pub struct HeldOutTarget {
    matrix: DesignMatrix,
    pivot_reads: Cell<usize>,
    eval_reads: Cell<usize>,
}

impl HeldOutTarget {
    pub fn new(matrix: DesignMatrix) -> Result<Self> {
        if matrix.labels.is_none() {
            return Err(Error::MissingLabels("target evaluation rows need labels".into()));
        }
        Ok(HeldOutTarget {
            matrix,
            pivot_reads: Cell::new(0),
            eval_reads: Cell::new(0),
        })
    }

    pub fn len(&self) -> usize {
        self.matrix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.is_empty()
    }

    pub fn oracle_pivots(&self, candidates: &[usize], req: &PivotRequest) -> Result<PivotSet> {
        self.pivot_reads.set(self.pivot_reads.get() + 1);
        select_pivots(&self.matrix, candidates, req)
    }

    pub fn score(&self, model: &TrainedModel) -> Result<f64> {
        self.eval_reads.set(self.eval_reads.get() + 1);
        let predictions = self
            .matrix
            .rows
            .iter()
            .map(|x| model.predict(x).map(|p| p.label))
            .collect::<Result<Vec<u8>>>()?;
        accuracy(&predictions, self.matrix.labels.as_ref().expect("checked in new"))
    }

    pub fn audit(&self) -> LabelAudit {
        LabelAudit {
            pivot_selection_reads: self.pivot_reads.get(),
            evaluation_reads: self.eval_reads.get(),
        }
    }
}

/// Everything one (pair, seed) cell shares across systems.
pub struct PairData {
    pub vocab: Vocabulary,
    pub train: DesignMatrix,
    pub validation: DesignMatrix,
    /// Source and target unlabeled rows; never carries labels.
    pub unlabeled: DesignMatrix,
    pub target: HeldOutTarget,
    pub candidates: Vec<usize>,
}

pub fn prepare_pair(
    source: &DomainData,
    target: &DomainData,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<PairData> {
    if source.name == target.name {
        return Err(Error::InvalidArgument(format!("source and target are both `{}`", source.name)));
    }
    let split_seed = if cfg.freeze_split { cfg.base_seed } else { seed };
    let (train_c, val_c) = split(
        &source.labeled,
        &SplitSpec::new(cfg.train_size, cfg.validation_size, split_seed),
    )?;
    let vocab = build_vocabulary(
        &[&train_c, &val_c, &source.unlabeled, &target.unlabeled],
        cfg.min_df,
    )?;
    let train = vectorize_corpus(&train_c, &vocab);
    let validation = vectorize_corpus(&val_c, &vocab);
    let unlabeled = DesignMatrix::concat(&[
        &vectorize_corpus(&source.unlabeled, &vocab).unlabeled(),
        &vectorize_corpus(&target.unlabeled, &vocab).unlabeled(),
    ])?;
    let target_m = vectorize_corpus(&target.labeled, &vocab);
    let candidates = candidate_features(&vocab, (&source.name, &target.name), cfg.candidate_min_df)?;
    Ok(PairData {
        vocab,
        train,
        validation,
        unlabeled,
        target: HeldOutTarget::new(target_m)?,
        candidates,
    })
}

impl PairData {
    pub fn pivots(&self, strategy: PivotStrategy, cfg: &BenchmarkConfig, seed: u64) -> Result<PivotSet> {
        let req = PivotRequest {
            p: cfg.joint.pivots,
            strategy,
            seed: rng::derive_seed(seed, "pivot-seed"),
            candidate_min_df: cfg.candidate_min_df,
        };
        match strategy {
            PivotStrategy::MiOracle => self.target.oracle_pivots(&self.candidates, &req),
            PivotStrategy::Frequency => {
                let all = DesignMatrix::concat(&[&self.train.unlabeled(), &self.unlabeled])?;
                select_pivots(&all, &self.candidates, &req)
            }
            _ => select_pivots(&self.train, &self.candidates, &req),
        }
    }
}

/// Trains one system on prepared data. Only source-side matrices reach the
/// trainers.
pub fn train_system(
    data: &PairData,
    system: System,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<TrainedModel> {
    assert!(data.unlabeled.labels.is_none(), "unlabeled stream carries labels");
    let model_seed = rng::derive_seed(seed, system.as_str());
    let pivots = match system.pivot_strategy() {
        Some(s) => Some(data.pivots(s, cfg, seed)?),
        None => None,
    };
    let (train, val, unl) = (&data.train, &data.validation, &data.unlabeled);
    Ok(match system {
        System::Logreg => {
            let rows: Vec<FeatureRow> = train.rows.iter().map(FeatureRow::binary).collect();
            let vrows: Vec<FeatureRow> = val.rows.iter().map(FeatureRow::binary).collect();
            let targets = |m: &DesignMatrix| -> Vec<f64> {
                m.labels.as_ref().map_or_else(Vec::new, |l| l.iter().map(|&y| f64::from(y)).collect())
            };
            let mut lcfg = cfg.logreg.clone();
            lcfg.seed = model_seed;
            TrainedModel::LogReg(train_logreg(
                &rows,
                &targets(train),
                Some((&vrows, &targets(val))),
                train.dim,
                &lcfg,
            )?)
        }
        System::Aescl => TrainedModel::AeScl(train_aescl(
            train,
            val,
            unl,
            pivots.as_ref().unwrap(),
            &cfg.aescl,
            model_seed,
        )?),
        System::ClassicScl => TrainedModel::ClassicScl(train_classic_scl(
            train,
            val,
            unl,
            pivots.as_ref().unwrap(),
            &cfg.classic,
            model_seed,
        )?),
        System::JointMi | System::JointOracle | System::JointRandom => {
            let mut jcfg = cfg.joint.clone();
            jcfg.seed = model_seed;
            TrainedModel::Joint(train_joint(train, val, unl, pivots.as_ref().unwrap(), &jcfg)?)
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub source: String,
    pub target: String,
    pub system: System,
    pub baseline: System,
    pub welch: Option<WelchResult>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResults {
    pub runs: Vec<RunResult>,
    pub comparisons: Vec<Comparison>,
    pub systems: Vec<System>,
    pub baseline: Option<System>,
}

impl BenchmarkResults {
    /// Ordered pairs in first-appearance order of the runs.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for r in &self.runs {
            let key = (r.source.clone(), r.target.clone());
            if !out.contains(&key) {
                out.push(key);
            }
        }
        out
    }

    pub fn accuracies(&self, source: &str, target: &str, system: System) -> Vec<f64> {
        self.runs
            .iter()
            .filter(|r| r.source == source && r.target == target && r.system == system)
            .map(|r| r.target_accuracy)
            .collect()
    }

    pub fn mean_accuracy(&self, system: System) -> Option<f64> {
        let accs: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.system == system)
            .map(|r| r.target_accuracy)
            .collect();
        (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
    }

    pub fn comparison(&self, source: &str, target: &str, system: System) -> Option<&Comparison> {
        self.comparisons
            .iter()
            .find(|c| c.source == source && c.target == target && c.system == system)
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub systems: Vec<System>,
    pub seeds: usize,
    /// Welch comparisons are made against this system when present.
    pub baseline: Option<System>,
    /// Worker threads; 1 runs everything on the calling thread.
    pub jobs: usize,
}

/// Seeds used for `count` repetitions under `base`.
pub fn run_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

fn run_cell(
    source: &DomainData,
    target: &DomainData,
    spec: &BenchmarkSpec,
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Result<Vec<RunResult>> {
    let data = prepare_pair(source, target, cfg, seed)?;
    let mut out = Vec::with_capacity(spec.systems.len());
    for &system in &spec.systems {
        log::info!("{}->{} {} seed {}", source.name, target.name, system, seed);
        let model = train_system(&data, system, cfg, seed)?;
        out.push(RunResult {
            source: source.name.clone(),
            target: target.name.clone(),
            system,
            seed,
            target_accuracy: data.target.score(&model)?,
            best_epoch: model.best_epoch(),
            config_hash: cfg.hash_for(system),
        });
    }
    let audit = data.target.audit();
    let oracle_runs = spec.systems.iter().filter(|s| **s == System::JointOracle).count();
    assert_eq!(audit.pivot_selection_reads, oracle_runs, "target labels read outside oracle selection");
    Ok(out)
}

pub fn run_benchmark(
    domains: &[DomainData],
    spec: &BenchmarkSpec,
    cfg: &BenchmarkConfig,
) -> Result<BenchmarkResults> {
    if spec.systems.is_empty() {
        return Err(Error::InvalidArgument("no systems requested".into()));
    }
    for d in domains {
        if d.labeled.is_empty() || !d.labeled.labeled {
            return Err(Error::MissingLabels(format!("domain `{}` has no labeled reviews", d.name)));
        }
    }
    let needed = cfg.train_size + cfg.validation_size;
    if let Some(d) = domains.iter().find(|d| d.labeled.len() < needed) {
        return Err(Error::Size(format!(
            "domain `{}` has {} labeled reviews, split needs {needed}",
            d.name,
            d.labeled.len()
        )));
    }
    let mut cells = Vec::new();
    for si in 0..domains.len() {
        for ti in 0..domains.len() {
            if si == ti {
                continue;
            }
            for seed in run_seeds(cfg.base_seed, spec.seeds) {
                cells.push((si, ti, seed));
            }
        }
    }
    let work = |&(si, ti, seed): &(usize, usize, u64)| run_cell(&domains[si], &domains[ti], spec, cfg, seed);
    let per_cell: Vec<Result<Vec<RunResult>>> = if spec.jobs <= 1 {
        cells.iter().map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(work).collect())
    };
    let mut runs = Vec::new();
    for r in per_cell {
        runs.extend(r?);
    }
    // canonical order: pair (domain order), system (requested order), seed
    let pos = |name: &str| domains.iter().position(|d| d.name == name).unwrap();
    let sys_pos = |s: System| spec.systems.iter().position(|&x| x == s).unwrap();
    runs.sort_by_key(|r| (pos(&r.source), pos(&r.target), sys_pos(r.system), r.seed));

    let mut results = BenchmarkResults {
        runs,
        comparisons: Vec::new(),
        systems: spec.systems.clone(),
        baseline: spec.baseline.filter(|b| spec.systems.contains(b)),
    };
    if let Some(baseline) = results.baseline {
        for (s, t) in results.pairs() {
            let base = results.accuracies(&s, &t, baseline);
            for &system in spec.systems.iter().filter(|&&x| x != baseline) {
                let accs = results.accuracies(&s, &t, system);
                results.comparisons.push(Comparison {
                    source: s.clone(),
                    target: t.clone(),
                    system,
                    baseline,
                    welch: welch_one_tailed(&accs, &base).ok(),
                });
            }
        }
    }
    Ok(results)
}
