//! Unsupervised word alignment by beam-search top-down BTG parsing.
//!
//! The pipeline trains IBM Model 1 lexicons in both directions (optionally
//! with variational-Bayes M-steps), turns each sentence pair into a positive
//! soft association matrix, and recursively bipartitions that matrix under
//! the bracketing transduction grammar constraint. The best derivation is
//! projected to a many-to-many alignment. Symmetrization, AER evaluation and
//! phrase extraction complete the toolkit.

pub mod alignment;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod model;
pub mod parser;
pub mod phrase;
pub mod softmatrix;
pub mod symmetrize;

pub use alignment::{Alignment, Link};
pub use corpus::{Corpus, LoadOptions, SentencePair, TextPair, Vocabulary};
pub use error::{Error, Result};
pub use lexicon::{Direction, EmConfig, TTable};
pub use model::{AlignerConfig, Model};
pub use parser::{top_down_parse, Block, Derivation, Orientation, SplitStep};
pub use softmatrix::{MatrixParams, SoftMatrix};
