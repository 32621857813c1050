//! Classify every comment in a community-question-answering thread as Good or
//! Bad by combining per-comment probabilistic classifiers with exact global
//! inference over pairwise same-label scores.
//!
//! The crate is organized as a pipeline:
//!
//! * [`corpus`] — parse and validate thread datasets (SemEval CQA-QL XML and a
//!   canonical JSONL interchange format).
//! * [`textsim`] — tokenization, n-gram bags, and the string-similarity
//!   measures used by the feature extractors.
//! * [`features`] — sparse feature vectors for the local (Good-vs-Bad) and
//!   pairwise (Same-vs-Different) classifiers.
//! * [`maxent`] — multinomial logistic regression with a Gaussian prior,
//!   trained with deterministic full-batch L-BFGS.
//! * [`inference`] — thread-level decoding: local argmax, minimum s-t cut over
//!   the partition cost, and exact ILP via branch-and-bound, plus brute-force
//!   oracles.
//! * [`eval`] — precision/recall/F1/accuracy, paired approximate randomization
//!   significance testing, and lambda tuning.
//! * [`pipeline`] — glue that featurizes datasets, trains both classifiers,
//!   produces thread scores, and decodes them.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod inference;
pub mod maxent;
pub mod pipeline;
pub mod textsim;

pub use corpus::{Comment, Dataset, Label, LabelMapping, Thread};


// maxent re-exports added with the module
