//! Pivot feature selection.
//!
//! Candidates are features frequent enough in both domains; among them the
//! pivots are picked by mutual information with source labels
//! ([`PivotStrategy::MiSource`]), with target labels
//! ([`PivotStrategy::MiOracle`]), by document frequency, or uniformly at
//! random.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::featurize::{DesignMatrix, Vocabulary};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PivotStrategy {
    MiSource,
    MiOracle,
    Frequency,
    Random,
}

impl PivotStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PivotStrategy::MiSource => "mi_source",
            PivotStrategy::MiOracle => "mi_oracle",
            PivotStrategy::Frequency => "frequency",
            PivotStrategy::Random => "random",
        }
    }
}

impl fmt::Display for PivotStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PivotStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mi" | "mi_source" => PivotStrategy::MiSource,
            "oracle" | "mi_oracle" => PivotStrategy::MiOracle,
            "frequency" | "freq" => PivotStrategy::Frequency,
            "random" => PivotStrategy::Random,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown pivot strategy `{other}`"
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PivotSet {
    /// Descending score, ties by ascending index (ascending index for
    /// random selections).
    pub indices: Vec<usize>,
    /// `None` for random selections.
    pub scores: Option<Vec<f64>>,
    pub strategy: PivotStrategy,
    pub candidate_min_df: u32,
    pub seed: u64,
    /// Set when fewer than the requested number of candidates existed.
    pub truncated: bool,
}

impl PivotSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `pivots(x)`: binary presence of each pivot in `row`, in pivot order.
    pub fn targets(&self, row: &crate::featurize::SparseVector) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&i| if row.contains(i) { 1.0 } else { 0.0 })
            .collect()
    }

    /// Boolean mask over `dim` features, true at pivot positions.
    pub fn mask(&self, dim: usize) -> Vec<bool> {
        let mut m = vec![false; dim];
        for &i in &self.indices {
            m[i] = true;
        }
        m
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = format!(
            "# strategy={}\tseed={}\tp={}\tcandidate_min_df={}\ttruncated={}\n",
            self.strategy,
            self.seed,
            self.len(),
            self.candidate_min_df,
            self.truncated
        );
        for (rank, &idx) in self.indices.iter().enumerate() {
            let score = match &self.scores {
                Some(s) => format!("{}", s[rank]),
                None => "NA".to_string(),
            };
            let _ = writeln!(out, "{}\t{idx}\t{}\t{score}", rank + 1, vocab.term(idx));
        }
        out
    }

    /// Parses the pivot file. Term strings are returned alongside so callers
    /// can check them against their vocabulary.
    pub fn from_text(text: &str, path: &Path) -> Result<(PivotSet, Vec<String>)> {
        let bad = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::EmptyFile(path.to_path_buf()))?;
        let header = header
            .strip_prefix("# ")
            .ok_or_else(|| bad(1, "missing `# ` header".into()))?;
        let mut strategy = None;
        let mut seed = 0;
        let mut min_df = 0;
        let mut truncated = false;
        for kv in header.split('\t') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(1, format!("bad header field `{kv}`")))?;
            let num = |v: &str| v.parse::<u64>().map_err(|_| bad(1, format!("bad `{k}`")));
            match k {
                "strategy" => strategy = Some(v.parse()?),
                "seed" => seed = num(v)?,
                "candidate_min_df" => min_df = num(v)? as u32,
                "truncated" => truncated = v == "true",
                _ => {}
            }
        }
        let strategy = strategy.ok_or_else(|| bad(1, "header lacks strategy".into()))?;
        let mut indices = Vec::new();
        let mut scores = Vec::new();
        let mut terms = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(i + 1, "expected `rank<TAB>index<TAB>term<TAB>score`".into()));
            }
            indices.push(f[1].parse().map_err(|_| bad(i + 1, "bad index".into()))?);
            terms.push(f[2].to_string());
            if f[3] != "NA" {
                scores.push(f[3].parse().map_err(|_| bad(i + 1, "bad score".into()))?);
            }
        }
        let scores = (!scores.is_empty() || strategy != PivotStrategy::Random).then_some(scores);
        Ok((
            PivotSet {
                indices,
                scores,
                strategy,
                candidate_min_df: min_df,
                seed,
                truncated,
            },
            terms,
        ))
    }
}

/// Features with document frequency of at least `min_df_each` in both
/// domains, ascending.
pub fn candidate_features(
    vocab: &Vocabulary,
    domains: (&str, &str),
    min_df_each: u32,
) -> Result<Vec<usize>> {
    let a = vocab.df_in(domains.0)?;
    let b = vocab.df_in(domains.1)?;
    Ok((0..vocab.len())
        .filter(|&i| a[i] >= min_df_each && b[i] >= min_df_each)
        .collect())
}

/// Plugin mutual information (nats) from a 2×2 table; `n_fy` counts rows
/// with feature value `f` and label `y`.
pub fn mi_from_counts(n00: u64, n01: u64, n10: u64, n11: u64) -> f64 {
    let n = (n00 + n01 + n10 + n11) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let f = [(n00 + n01) as f64, (n10 + n11) as f64];
    let y = [(n00 + n10) as f64, (n01 + n11) as f64];
    let cells = [[n00, n01], [n10, n11]];
    let mut mi = 0.0;
    for (fi, row) in cells.iter().enumerate() {
        for (yi, &c) in row.iter().enumerate() {
            if c == 0 || f[fi] == 0.0 || y[yi] == 0.0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (c * n / (f[fi] * y[yi])).ln();
        }
    }
    // rounding can leave a tiny negative value for independent columns
    mi.max(0.0)
}

pub fn mutual_information(feature_column: &[u8], labels: &[u8]) -> Result<f64> {
    if feature_column.len() != labels.len() {
        return Err(Error::Shape(format!(
            "feature column of {} vs {} labels",
            feature_column.len(),
            labels.len()
        )));
    }
    let mut n = [[0u64; 2]; 2];
    for (&f, &y) in feature_column.iter().zip(labels) {
        n[usize::from(f != 0)][usize::from(y != 0)] += 1;
    }
    Ok(mi_from_counts(n[0][0], n[0][1], n[1][0], n[1][1]))
}

/// MI of every candidate against the matrix labels.
pub fn mi_scores(matrix: &DesignMatrix, candidates: &[usize]) -> Result<Vec<f64>> {
    let labels = matrix
        .labels
        .as_ref()
        .ok_or_else(|| Error::MissingLabels("MI pivot selection needs labeled rows".into()))?;
    let mut with_feature = vec![[0u64; 2]; matrix.dim];
    let mut totals = [0u64; 2];
    for (row, &y) in matrix.rows.iter().zip(labels) {
        let y = usize::from(y != 0);
        totals[y] += 1;
        for &i in &row.indices {
            with_feature[i][y] += 1;
        }
    }
    Ok(candidates
        .iter()
        .map(|&c| {
            let [n10, n11] = with_feature[c];
            mi_from_counts(totals[0] - n10, totals[1] - n11, n10, n11)
        })
        .collect())
}

fn doc_frequencies(matrix: &DesignMatrix, candidates: &[usize]) -> Vec<f64> {
    let mut df = vec![0u64; matrix.dim];
    for row in &matrix.rows {
        for &i in &row.indices {
            df[i] += 1;
        }
    }
    candidates.iter().map(|&c| df[c] as f64).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct PivotRequest {
    pub p: usize,
    pub strategy: PivotStrategy,
    pub seed: u64,
    /// Recorded in the resulting set; the candidates themselves are
    /// computed by the caller.
    pub candidate_min_df: u32,
}

/// Chooses up to `p` pivots among `candidates`.
///
/// For [`PivotStrategy::MiOracle`] the caller passes the labeled *target*
/// matrix; everything else about the selection is identical to
/// [`PivotStrategy::MiSource`].
pub fn select_pivots(
    matrix: &DesignMatrix,
    candidates: &[usize],
    req: &PivotRequest,
) -> Result<PivotSet> {
    if req.p == 0 {
        return Err(Error::InvalidArgument("pivot count must be at least 1".into()));
    }
    if let Some(&c) = candidates.iter().find(|&&c| c >= matrix.dim) {
        return Err(Error::Shape(format!("candidate {c} outside dim {}", matrix.dim)));
    }
    let truncated = req.p > candidates.len();
    if truncated {
        log::warn!(
            "requested {} pivots but only {} candidates exist",
            req.p,
            candidates.len()
        );
    }
    let take = req.p.min(candidates.len());
    let (indices, scores) = match req.strategy {
        PivotStrategy::Random => {
            let mut rng = rng::rng_for(req.seed, "pivots");
            let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), take)
                .into_iter()
                .map(|k| candidates[k])
                .collect();
            picked.sort_unstable();
            (picked, None)
        }
        strategy => {
            let scores = match strategy {
                PivotStrategy::Frequency => doc_frequencies(matrix, candidates),
                _ => mi_scores(matrix, candidates)?,
            };
            let mut ranked: Vec<(usize, f64)> =
                candidates.iter().copied().zip(scores).collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.truncate(take);
            let (i, s) = ranked.into_iter().unzip();
            (i, Some(s))
        }
    };
    Ok(PivotSet {
        indices,
        scores,
        strategy: req.strategy,
        candidate_min_df: req.candidate_min_df,
        seed: req.seed,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapReport {
    pub shared: Vec<String>,
    pub a_only: Vec<String>,
    pub b_only: Vec<String>,
}

impl OverlapReport {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "shared\t{}\na_only\t{}\nb_only\t{}\n",
            self.shared.len(),
            self.a_only.len(),
            self.b_only.len()
        );
        for (name, list) in [("shared", &self.shared), ("a_only", &self.a_only), ("b_only", &self.b_only)] {
            for t in list {
                let _ = writeln!(out, "{name}\t{t}");
            }
        }
        out
    }
}

/// Compares two pivot sets by term string, so sets built over different
/// vocabularies can be compared.
pub fn pivot_overlap(
    a: &PivotSet,
    b: &PivotSet,
    vocab_a: &Vocabulary,
    vocab_b: &Vocabulary,
) -> OverlapReport {
    let ta: Vec<&str> = a.indices.iter().map(|&i| vocab_a.term(i)).collect();
    let tb: Vec<&str> = b.indices.iter().map(|&i| vocab_b.term(i)).collect();
    term_overlap(&ta, &tb)
}

/// Overlap of two term lists, each output list sorted.
pub fn term_overlap<S: AsRef<str>>(a: &[S], b: &[S]) -> OverlapReport {
    let ta: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let tb: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    OverlapReport {
        shared: ta.intersection(&tb).map(|s| s.to_string()).collect(),
        a_only: ta.difference(&tb).map(|s| s.to_string()).collect(),
        b_only: tb.difference(&ta).map(|s| s.to_string()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document};
    use crate::featurize::{build_vocabulary, SparseVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mi_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert_abs_diff_eq!(mutual_information(&[0, 1, 0, 1], &[0, 1, 0, 1]).unwrap(), ln2, epsilon = 1e-15);
        assert_eq!(mutual_information(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.0);
        // F=[1,1,1,0], Y=[1,1,0,0]: cells (1,1)=2, (1,0)=1, (0,0)=1, (0,1)=0
        let direct = 0.5 * (0.5f64 / (0.75 * 0.5)).ln() + 0.25 * (0.25f64 / (0.75 * 0.5)).ln()
            + 0.25 * (0.25f64 / (0.25 * 0.5)).ln();
        assert_abs_diff_eq!(mutual_information(&[1, 1, 1, 0], &[1, 1, 0, 0]).unwrap(), direct, epsilon = 1e-15);
        assert!(mutual_information(&[1], &[1, 0]).is_err());
    }

    fn vocab_two_domains() -> Vocabulary {
        let mk = |domain: &str, spec: &[(&str, usize)]| {
            let mut docs = Vec::new();
            for (term, n) in spec {
                for _ in 0..*n {
                    docs.push(Document::new(docs.len(), vec![term.to_string()], None, domain));
                }
            }
            Corpus::new(domain, false, docs)
        };
        let b = mk("books", &[("x", 12), ("y", 10), ("z", 3)]);
        let e = mk("electronics", &[("y", 10), ("z", 20)]);
        build_vocabulary(&[&b, &e], 1).unwrap()
    }

    #[test]
    fn candidates_need_both_domains() {
        let v = vocab_two_domains();
        let c = candidate_features(&v, ("books", "electronics"), 10).unwrap();
        assert_eq!(c, [v.get("y").unwrap()]);
        assert!(candidate_features(&v, ("books", "dvd"), 10).is_err());
    }

    fn matrix(rows: &[&[usize]], labels: &[u8], dim: usize) -> DesignMatrix {
        let rows = rows.iter().map(|r| SparseVector::from_indices(r.to_vec(), dim)).collect();
        DesignMatrix::new(rows, Some(labels.to_vec()), dim).unwrap()
    }

    fn req(p: usize, strategy: PivotStrategy) -> PivotRequest {
        PivotRequest { p, strategy, seed: 1, candidate_min_df: 10 }
    }

    #[test]
    fn random_truncates() {
        let m = matrix(&[&[3], &[7]], &[0, 1], 10);
        let s = select_pivots(&m, &[3, 7], &req(5, PivotStrategy::Random)).unwrap();
        assert_eq!(s.indices, [3, 7]);
        assert!(s.truncated && s.scores.is_none());
    }

    #[test]
    fn mi_ties_break_by_index() {
        // features 2 and 5 are both perfect predictors
        let m = matrix(&[&[2, 5], &[], &[2, 5], &[]], &[1, 0, 1, 0], 6);
        let s = select_pivots(&m, &[5, 2, 0], &req(2, PivotStrategy::MiSource)).unwrap();
        assert_eq!(s.indices, [2, 5]);
        let s = select_pivots(&m.unlabeled(), &[5, 2], &req(2, PivotStrategy::MiSource));
        assert!(matches!(s, Err(Error::MissingLabels(_))));
    }

    #[test]
    fn frequency_ranks_by_df() {
        let m = matrix(&[&[1, 2], &[2], &[0, 2]], &[1, 0, 1], 3);
        let s = select_pivots(&m.unlabeled(), &[0, 1, 2], &req(2, PivotStrategy::Frequency)).unwrap();
        assert_eq!(s.indices, [2, 0]);
        assert_eq!(s.scores.unwrap(), [3.0, 1.0]);
    }

    #[test]
    fn mi_scores_match_column_mi() {
        let m = matrix(&[&[0, 1], &[1], &[0], &[2], &[0, 2]], &[1, 1, 0, 0, 1], 3);
        let fast = mi_scores(&m, &[0, 1, 2]).unwrap();
        for c in 0..3 {
            let col: Vec<u8> = m.rows.iter().map(|r| u8::from(r.contains(c))).collect();
            let slow = mutual_information(&col, m.labels.as_ref().unwrap()).unwrap();
            assert_abs_diff_eq!(fast[c], slow, epsilon = 1e-15);
        }
    }

    #[test]
    fn overlap_by_term() {
        let v = vocab_two_domains();
        let set = |idx: Vec<usize>| PivotSet {
            indices: idx,
            scores: None,
            strategy: PivotStrategy::Random,
            candidate_min_df: 0,
            seed: 0,
            truncated: false,
        };
        let a = set(vec![0, 1]);
        let same = pivot_overlap(&a, &a, &v, &v);
        assert_eq!(same.shared.len(), 2);
        assert!(same.a_only.is_empty() && same.b_only.is_empty());
        let r = pivot_overlap(&a, &set(vec![2]), &v, &v);
        assert!(r.shared.is_empty());
        assert_eq!(r.b_only, ["z"]);
    }

    #[test]
    fn text_round_trip() {
        let v = vocab_two_domains();
        let m = matrix(&[&[0, 1], &[1], &[2]], &[1, 1, 0], 3);
        let s = select_pivots(&m, &[0, 1, 2], &req(2, PivotStrategy::MiSource)).unwrap();
        let (back, terms) = PivotSet::from_text(&s.to_text(&v), Path::new("p")).unwrap();
        assert_eq!(back, s);
        assert_eq!(terms.len(), 2);
        let r = select_pivots(&m, &[0, 1, 2], &req(2, PivotStrategy::Random)).unwrap();
        let (back, _) = PivotSet::from_text(&r.to_text(&v), Path::new("p")).unwrap();
        assert_eq!(back, r);
    }
}
