//! Two-domain synthetic review generator for desk-scale adaptation checks.
//!
//! Each domain shares a block of label-correlated *general* terms, owns a
//! block of label-correlated *specific* terms, and draws the rest of its
//! tokens from a shared pool of label-independent noise terms. A small
//! fraction of tokens are the other domain's specific terms used without
//! any sentiment, so those terms are frequent in both domains while only
//! carrying signal in one of them.
//!
//! A classifier trained on source labels can only transfer through the
//! general terms; a representation that links the target's specific terms
//! to the general ones (learned from unlabeled text) transfers further.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DomainData, Document, TokenKind};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Label-correlated terms shared by both domains (half per polarity).
    pub general_terms: usize,
    /// Label-correlated terms owned by each domain (half per polarity).
    pub specific_terms: usize,
    pub noise_terms: usize,
    pub labeled_per_domain: usize,
    pub unlabeled_per_domain: usize,
    pub tokens_per_doc: usize,
    /// Token-type mixture: general, own specific, other domain's specific;
    /// the remainder is noise.
    pub p_general: f64,
    pub p_specific: f64,
    pub p_leak: f64,
    /// Probability that a specific term's polarity agrees with the
    /// document label.
    pub polarity_agreement: f64,
    /// The same for general terms.
    pub general_agreement: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            general_terms: 40,
            specific_terms: 60,
            noise_terms: 500,
            labeled_per_domain: 1000,
            unlabeled_per_domain: 2000,
            tokens_per_doc: 20,
            p_general: 0.1,
            p_specific: 0.25,
            p_leak: 0.005,
            polarity_agreement: 0.9,
            general_agreement: 0.7,
        }
    }
}

pub fn general_term(i: usize) -> String {
    format!("gen{i:03}")
}

pub fn specific_term(domain: &str, i: usize) -> String {
    format!("{domain}{i:03}")
}

pub fn noise_term(i: usize) -> String {
    format!("noise{i:03}")
}

/// Polarity of the `i`th term in a block of `len`: first half positive.
fn polar(i: usize, len: usize) -> u8 {
    u8::from(i < len / 2)
}

fn pick_polar(rng: &mut impl rand::Rng, len: usize, polarity: u8) -> usize {
    let half = len / 2;
    if polarity == 1 {
        rng.gen_range(0..half)
    } else {
        half + rng.gen_range(0..len - half)
    }
}

fn polarity(rng: &mut impl rand::Rng, label: u8, agreement: f64) -> u8 {
    if rng.gen_bool(agreement) {
        label
    } else {
        1 - label
    }
}

fn document(
    spec: &SyntheticSpec,
    own: &str,
    other: &str,
    label: u8,
    rng: &mut impl rand::Rng,
) -> Vec<String> {
    let p_noise = (1.0 - spec.p_general - spec.p_specific - spec.p_leak).max(0.0);
    let kinds = WeightedIndex::new([spec.p_general, spec.p_specific, spec.p_leak, p_noise])
        .expect("valid mixture");
    let mut tokens = Vec::with_capacity(spec.tokens_per_doc);
    for _ in 0..spec.tokens_per_doc {
        let tok = match kinds.sample(rng) {
            0 => {
                let pol = polarity(rng, label, spec.general_agreement);
                general_term(pick_polar(rng, spec.general_terms, pol))
            }
            1 => {
                let pol = polarity(rng, label, spec.polarity_agreement);
                specific_term(own, pick_polar(rng, spec.specific_terms, pol))
            }
            2 => specific_term(other, rng.gen_range(0..spec.specific_terms)),
            _ => noise_term(rng.gen_range(0..spec.noise_terms)),
        };
        tokens.push(tok);
    }
    tokens
}

fn corpus(
    spec: &SyntheticSpec,
    own: &str,
    other: &str,
    count: usize,
    labeled: bool,
    rng: &mut impl rand::Rng,
) -> Corpus {
    let docs = (0..count)
        .map(|id| {
            let label = u8::from(rng.gen_bool(0.5));
            let tokens = document(spec, own, other, label, rng);
            Document::new(id, tokens, labeled.then_some(label), own).with_kind(TokenKind::FeatureBag)
        })
        .collect();
    Corpus::new(own, labeled, docs)
}

/// Generates the two domains `names.0` and `names.1`.
pub fn generate(spec: &SyntheticSpec, names: (&str, &str), seed: u64) -> (DomainData, DomainData) {
    let make = |own: &str, other: &str| {
        let mut rng = rng::rng_for(seed, &format!("synthetic-{own}"));
        DomainData {
            name: own.to_string(),
            labeled: corpus(spec, own, other, spec.labeled_per_domain, true, &mut rng),
            unlabeled: corpus(spec, own, other, spec.unlabeled_per_domain, false, &mut rng),
        }
    };
    (make(names.0, names.1), make(names.1, names.0))
}

/// True polarity of a generated term, `None` for noise or unknown terms.
pub fn term_polarity(spec: &SyntheticSpec, term: &str, domains: (&str, &str)) -> Option<u8> {
    let idx = |prefix: &str| term.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok());
    if let Some(i) = idx("gen") {
        return Some(polar(i, spec.general_terms));
    }
    for d in [domains.0, domains.1] {
        if let Some(i) = idx(d) {
            return Some(polar(i, spec.specific_terms));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        let spec = SyntheticSpec {
            labeled_per_domain: 30,
            unlabeled_per_domain: 20,
            ..SyntheticSpec::default()
        };
        let (a, b) = generate(&spec, ("src", "tgt"), 5);
        assert_eq!(a.labeled.len(), 30);
        assert_eq!(b.unlabeled.len(), 20);
        assert!(a.labeled.labeled && !a.unlabeled.labeled);
        assert_eq!(generate(&spec, ("src", "tgt"), 5).0, a);
        assert_ne!(generate(&spec, ("src", "tgt"), 6).0, a);
        assert!(a.labeled.documents.iter().all(|d| d.tokens.len() == 20));
    }

    #[test]
    fn polarity_lookup() {
        let spec = SyntheticSpec::default();
        assert_eq!(term_polarity(&spec, "gen000", ("s", "t")), Some(1));
        assert_eq!(term_polarity(&spec, "gen039", ("s", "t")), Some(0));
        assert_eq!(term_polarity(&spec, "noise001", ("s", "t")), None);
    }
}
