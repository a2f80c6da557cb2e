//! Retrieval and recommendation networks over a shared term vocabulary.
//!
//! Text (a query or an item document) is embedded as a softmax-weighted
//! average of term embeddings, with the raw weight of each term read from a
//! single global weight vector. The average feeds a one-hidden-layer tower.
//! Users are a plain embedding lookup. A matching network scores the
//! Hadamard product of a context representation and an item representation.
//!
//! The term embedding matrix and the term weight vector are single tensors
//! read by all three text towers (query, retrieval item, recommendation
//! item); nothing else is shared.

mod params;
mod pretrained;
mod score;

pub use params::{DenseStack, MatchNet, ModelConfig, ModelParams, ModelShape, Tower};
pub use pretrained::load_pretrained_embeddings;
pub use score::{Context, DropoutMode, ScoreOutput, ScoreRequest};
pub(crate) use score::eval_rng;
