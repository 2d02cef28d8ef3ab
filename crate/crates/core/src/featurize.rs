//! Unigram + bigram vocabulary and binary bag-of-n-gram vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    /// Lexicographically sorted; position is the feature index.
    pub terms: Vec<String>,
    pub index: HashMap<String, usize>,
    /// Per-domain document frequency, parallel to `terms`.
    pub df_by_domain: BTreeMap<String, Vec<u32>>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn df_total(&self, index: usize) -> u32 {
        self.df_by_domain.values().map(|df| df[index]).sum()
    }

    pub fn df_in(&self, domain: &str) -> Result<&[u32]> {
        self.df_by_domain
            .get(domain)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownDomain(domain.to_string()))
    }

    /// One `term<TAB>index<TAB>df_total` line per term, in index order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            let _ = writeln!(out, "{t}\t{i}\t{}", self.df_total(i));
        }
        out
    }

    /// Reads the vocabulary file back. Per-domain frequencies are not stored
    /// in the file, so the totals land under a single `*` domain.
    pub fn from_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut terms = Vec::new();
        let mut df = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.split('\t');
            let (Some(term), Some(idx), Some(count), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad("expected `term<TAB>index<TAB>df`"));
            };
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != terms.len() {
                return Err(bad("indices must be consecutive from 0"));
            }
            terms.push(term.to_string());
            df.push(count.parse().map_err(|_| bad("bad df"))?);
        }
        let index = terms.iter().cloned().zip(0..).collect::<HashMap<_, _>>();
        if index.len() != terms.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: "duplicate terms".into(),
            });
        }
        Ok(Vocabulary {
            terms,
            index,
            df_by_domain: BTreeMap::from([("*".to_string(), df)]),
        })
    }
}

/// Counts document frequency over every corpus and keeps terms whose total
/// df reaches `min_df`.
pub fn build_vocabulary(corpora: &[&Corpus], min_df: u32) -> Result<Vocabulary> {
    if corpora.is_empty() {
        return Err(Error::InvalidArgument("no corpora to build a vocabulary from".into()));
    }
    if min_df == 0 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    let domains: Vec<&str> = {
        let mut d: Vec<&str> = corpora.iter().map(|c| c.domain.as_str()).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    let slot = |d: &str| domains.binary_search(&d).expect("domain listed");
    let mut counts: HashMap<String, Vec<u32>> = HashMap::new();
    let mut seen: HashSet<String> = HashSet::new();
    for corpus in corpora {
        for doc in &corpus.documents {
            seen.clear();
            doc.for_each_term(|t| {
                if !seen.contains(t) {
                    seen.insert(t.to_string());
                }
            });
            let k = slot(&doc.domain);
            for t in seen.drain() {
                counts.entry(t).or_insert_with(|| vec![0; domains.len()])[k] += 1;
            }
        }
    }
    let mut kept: Vec<(String, Vec<u32>)> = counts
        .into_iter()
        .filter(|(_, df)| df.iter().sum::<u32>() >= min_df)
        .collect();
    kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut df_by_domain: BTreeMap<String, Vec<u32>> = domains
        .iter()
        .map(|d| (d.to_string(), Vec::with_capacity(kept.len())))
        .collect();
    let mut terms = Vec::with_capacity(kept.len());
    for (term, df) in kept {
        for (d, c) in domains.iter().zip(df) {
            df_by_domain.get_mut(*d).unwrap().push(c);
        }
        terms.push(term);
    }
    let index = terms.iter().cloned().zip(0..).collect();
    Ok(Vocabulary {
        terms,
        index,
        df_by_domain,
    })
}

/// Binary presence vector: strictly increasing indices, every value 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVector {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub dim: usize,
}

impl SparseVector {
    /// Builds a binary vector; `indices` may be unsorted or repeated.
    pub fn from_indices(mut indices: Vec<usize>, dim: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        debug_assert!(indices.last().is_none_or(|&i| i < dim));
        let values = vec![1.0; indices.len()];
        SparseVector {
            indices,
            values,
            dim,
        }
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector::from_indices(Vec::new(), dim)
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<SparseVector>,
    pub labels: Option<Vec<u8>>,
    pub dim: usize,
}

impl DesignMatrix {
    pub fn new(rows: Vec<SparseVector>, labels: Option<Vec<u8>>, dim: usize) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.dim != dim) {
            return Err(Error::Shape(format!("row dim {} != matrix dim {dim}", r.dim)));
        }
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::Shape(format!(
                    "{} labels for {} rows",
                    l.len(),
                    rows.len()
                )));
            }
        }
        Ok(DesignMatrix { rows, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Drops labels; used for the unlabeled training stream.
    pub fn unlabeled(&self) -> DesignMatrix {
        DesignMatrix {
            rows: self.rows.clone(),
            labels: None,
            dim: self.dim,
        }
    }

    /// Stacks matrices of equal dimension. Labels are kept only if every
    /// part has them.
    pub fn concat(parts: &[&DesignMatrix]) -> Result<DesignMatrix> {
        let dim = parts.first().map_or(0, |m| m.dim);
        let mut rows = Vec::new();
        let mut labels = Some(Vec::new());
        for m in parts {
            if m.dim != dim {
                return Err(Error::Shape(format!("concat of dims {dim} and {}", m.dim)));
            }
            rows.extend(m.rows.iter().cloned());
            labels = match (labels, &m.labels) {
                (Some(mut acc), Some(l)) => {
                    acc.extend_from_slice(l);
                    Some(acc)
                }
                _ => None,
            };
        }
        DesignMatrix::new(rows, labels, dim)
    }
}

pub fn vectorize(doc: &Document, vocab: &Vocabulary) -> SparseVector {
    let mut indices = Vec::new();
    doc.for_each_term(|t| {
        if let Some(i) = vocab.get(t) {
            indices.push(i);
        }
    });
    SparseVector::from_indices(indices, vocab.len())
}

pub fn vectorize_corpus(corpus: &Corpus, vocab: &Vocabulary) -> DesignMatrix {
    let rows = corpus.documents.iter().map(|d| vectorize(d, vocab)).collect();
    let labels = if corpus.labeled { corpus.labels() } else { None };
    DesignMatrix {
        rows,
        labels,
        dim: vocab.len(),
    }
}
