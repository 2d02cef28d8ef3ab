//! Joint neural structural correspondence learning for unsupervised domain
//! adaptation of bag-of-n-gram text classifiers.
//!
//! A single hidden layer is trained on two objectives at once: the labeled
//! source-domain task and the reconstruction of *pivot* features, which can
//! be supervised from unlabeled text of both domains. The crate also carries
//! the baselines (source-only logistic regression, AE-SCL and SVD-based
//! SCL), pivot selection, and the multi-seed evaluation protocol.
//!
//! The guide in `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod manifest;
pub mod models;
pub mod neural;
pub mod pivot;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/pivots.md")]
    mod pivots {}
    #[doc = include_str!("../../../book/src/joint_model.md")]
    mod joint_model {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
