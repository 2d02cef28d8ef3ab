//! Review corpora: ingestion of the processed `feature:count` format and of
//! raw TSV text, plus the seeded train/validation split.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// How a document's tokens turn into vocabulary terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    /// Running text: terms are the tokens plus `_`-joined adjacent bigrams.
    Sequence,
    /// Pre-extracted features (processed format): each token is a term.
    FeatureBag,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    /// 0-based position within its file.
    pub id: usize,
    pub tokens: Vec<String>,
    /// `Some(1)` positive, `Some(0)` negative, `None` unlabeled.
    pub label: Option<u8>,
    pub domain: String,
    pub kind: TokenKind,
}

impl Document {
    pub fn new(id: usize, tokens: Vec<String>, label: Option<u8>, domain: &str) -> Self {
        Document {
            id,
            tokens,
            label,
            domain: domain.to_string(),
            kind: TokenKind::Sequence,
        }
    }

    pub fn with_kind(mut self, kind: TokenKind) -> Self {
        self.kind = kind;
        self
    }

    /// Calls `f` once per term occurrence (duplicates included).
    pub fn for_each_term(&self, mut f: impl FnMut(&str)) {
        match self.kind {
            TokenKind::FeatureBag => self.tokens.iter().for_each(|t| f(t)),
            TokenKind::Sequence => {
                for t in &self.tokens {
                    f(t);
                }
                let mut buf = String::new();
                for w in self.tokens.windows(2) {
                    buf.clear();
                    buf.push_str(&w[0]);
                    buf.push('_');
                    buf.push_str(&w[1]);
                    f(&buf);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub domain: String,
    pub labeled: bool,
}

impl Corpus {
    pub fn new(domain: &str, labeled: bool, documents: Vec<Document>) -> Self {
        Corpus {
            documents,
            domain: domain.to_string(),
            labeled,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn labels(&self) -> Option<Vec<u8>> {
        self.documents.iter().map(|d| d.label).collect()
    }

    /// The same documents with labels dropped, for use as unlabeled text.
    pub fn without_labels(mut self) -> Corpus {
        for d in &mut self.documents {
            d.label = None;
        }
        self.labeled = false;
        self
    }

    /// Concatenates corpora of one domain, renumbering document ids.
    pub fn concat(domain: &str, parts: Vec<Corpus>) -> Result<Corpus> {
        let labeled = parts.iter().all(|c| c.labeled);
        if !labeled && parts.iter().any(|c| c.labeled) {
            return Err(Error::InvalidArgument(format!(
                "cannot concatenate labeled and unlabeled corpora of `{domain}`"
            )));
        }
        let documents = parts
            .into_iter()
            .flat_map(|c| c.documents)
            .enumerate()
            .map(|(id, mut d)| {
                d.id = id;
                d.domain = domain.to_string();
                d
            })
            .collect();
        Ok(Corpus::new(domain, labeled, documents))
    }

    /// Serializes to the processed format. Feature counts are written in
    /// term order, so parsing the output back gives the same multiset of
    /// tokens per document.
    pub fn to_processed(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
            for t in &d.tokens {
                *counts.entry(t).or_default() += 1;
            }
            for (t, c) in counts {
                out.push_str(&format!("{t}:{c} "));
            }
            out.push_str(match d.label {
                Some(1) => "#label#:positive\n",
                Some(_) => "#label#:negative\n",
                None => "#label#:unlabeled\n",
            });
        }
        out
    }
}

/// One domain's labeled reviews and its unlabeled pool.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainData {
    pub name: String,
    pub labeled: Corpus,
    pub unlabeled: Corpus,
}

pub const POSITIVE_FILE: &str = "positive.review";
pub const NEGATIVE_FILE: &str = "negative.review";
pub const UNLABELED_FILE: &str = "unlabeled.review";

/// Reads `<dir>/<name>/{positive,negative,unlabeled}.review`. Labels
/// present in the unlabeled file are discarded.
pub fn load_domain(dir: &Path, name: &str) -> Result<DomainData> {
    let base = dir.join(name);
    let pos = parse_processed(base.join(POSITIVE_FILE), name)?;
    let neg = parse_processed(base.join(NEGATIVE_FILE), name)?;
    for (c, want, file) in [(&pos, 1u8, POSITIVE_FILE), (&neg, 0, NEGATIVE_FILE)] {
        if !c.labeled || c.documents.iter().any(|d| d.label != Some(want)) {
            return Err(parse_err(&base.join(file), 0, "every review needs the file's label"));
        }
    }
    let unlabeled = parse_processed(base.join(UNLABELED_FILE), name)?.without_labels();
    Ok(DomainData {
        name: name.to_string(),
        labeled: Corpus::concat(name, vec![pos, neg])?,
        unlabeled,
    })
}

/// Writes a domain in the layout [`load_domain`] reads.
pub fn write_domain(dir: &Path, data: &DomainData) -> Result<()> {
    let base = dir.join(&data.name);
    fs::create_dir_all(&base).map_err(|e| Error::io(&base, e))?;
    let part = |label: u8| {
        let docs = data.labeled.documents.iter().filter(|d| d.label == Some(label)).cloned().collect();
        Corpus::new(&data.name, true, docs)
    };
    for (file, body) in [
        (POSITIVE_FILE, part(1).to_processed()),
        (NEGATIVE_FILE, part(0).to_processed()),
        (UNLABELED_FILE, data.unlabeled.to_processed()),
    ] {
        let path = base.join(file);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_size: usize,
    pub validation_size: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_size: usize, validation_size: usize, seed: u64) -> Self {
        SplitSpec {
            train_size,
            validation_size,
            seed,
        }
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::new(1600, 400, 0)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Parses the processed review format: one review per line, whitespace
/// separated `feature:count` tokens and a trailing `#label#:<tag>`.
pub fn parse_processed(path: impl AsRef<Path>, domain: &str) -> Result<Corpus> {
    let path = path.as_ref();
    parse_processed_str(&read_to_string(path)?, path, domain)
}

pub(crate) fn parse_processed_str(text: &str, path: &Path, domain: &str) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = Vec::new();
        let mut label = None;
        for field in line.split_whitespace() {
            let (feature, value) = field
                .rsplit_once(':')
                .ok_or_else(|| parse_err(path, lineno, format!("missing `:` in `{field}`")))?;
            if feature == "#label#" {
                label = match value {
                    "positive" => Some(1),
                    "negative" => Some(0),
                    "unlabeled" => None,
                    other => {
                        return Err(parse_err(path, lineno, format!("unknown label `{other}`")))
                    }
                };
                continue;
            }
            if feature.is_empty() {
                return Err(parse_err(path, lineno, format!("empty feature in `{field}`")));
            }
            let count: usize = value
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad count in `{field}`")))?;
            for _ in 0..count {
                tokens.push(feature.to_string());
            }
        }
        if tokens.is_empty() {
            return Err(parse_err(path, lineno, "document has no tokens"));
        }
        documents.push(
            Document::new(documents.len(), tokens, label, domain).with_kind(TokenKind::FeatureBag),
        );
    }
    finish(path, domain, documents)
}

fn finish(path: &Path, domain: &str, documents: Vec<Document>) -> Result<Corpus> {
    if documents.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let n_labeled = documents.iter().filter(|d| d.label.is_some()).count();
    if n_labeled != 0 && n_labeled != documents.len() {
        return Err(parse_err(
            path,
            0,
            format!(
                "mixed labeled ({n_labeled}) and unlabeled ({}) documents",
                documents.len() - n_labeled
            ),
        ));
    }
    let labeled = n_labeled == documents.len();
    Ok(Corpus::new(domain, labeled, documents))
}

/// Lowercases, splits on Unicode whitespace and strips non-alphanumerics
/// from token edges. Tokens that strip to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn parse_label(token: &str) -> Option<u8> {
    match token.trim() {
        "1" | "positive" => Some(1),
        "0" | "negative" => Some(0),
        _ => None,
    }
}

/// Parses `label<TAB>text` lines (or bare `text` lines when `labeled` is
/// false).
pub fn parse_tsv(path: impl AsRef<Path>, domain: &str, labeled: bool) -> Result<Corpus> {
    let path = path.as_ref();
    parse_tsv_str(&read_to_string(path)?, path, domain, labeled)
}

pub(crate) fn parse_tsv_str(text: &str, path: &Path, domain: &str, labeled: bool) -> Result<Corpus> {
    let mut documents = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = if labeled {
            let (tag, body) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(path, lineno, "expected `label<TAB>text`"))?;
            let label = parse_label(tag)
                .ok_or_else(|| parse_err(path, lineno, format!("bad label `{tag}`")))?;
            (Some(label), body)
        } else {
            (None, line)
        };
        let tokens = tokenize(body);
        if tokens.is_empty() {
            return Err(parse_err(path, lineno, "document has no tokens"));
        }
        documents.push(Document::new(documents.len(), tokens, label, domain));
    }
    if documents.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    Ok(Corpus::new(domain, labeled, documents))
}

/// Seeded, unstratified split of a labeled corpus.
pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus)> {
    if !corpus.labeled {
        return Err(Error::MissingLabels(format!(
            "cannot split unlabeled corpus `{}`",
            corpus.domain
        )));
    }
    let wanted = spec.train_size + spec.validation_size;
    if wanted > corpus.len() {
        return Err(Error::Size(format!(
            "split needs {wanted} documents but `{}` has {}",
            corpus.domain,
            corpus.len()
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng::rng_for(spec.seed, "split"));
    let take = |range: std::ops::Range<usize>| {
        let docs = order[range]
            .iter()
            .map(|&i| corpus.documents[i].clone())
            .collect();
        Corpus::new(&corpus.domain, true, docs)
    };
    Ok((
        take(0..spec.train_size),
        take(spec.train_size..wanted),
    ))
}
