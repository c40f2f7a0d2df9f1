//! Second-order word embeddings: re-learn word vectors from the
//! nearest-neighbor graph of existing ("first-order") embeddings.
//!
//! The stages are independent modules, each generic over the scalar type
//! ([`scalar::Real`], implemented for `f32` and `f64`):
//!
//! - [`embed_io`]: vocabulary and word2vec-text embedding sets
//! - [`knn`]: exact cosine k-nearest-neighbor lists
//! - [`graph`]: k-NN graph induction from one or more samples
//! - [`walks`]: node2vec biased random walks
//! - [`sgns`]: skip-gram with negative sampling
//! - [`analysis`]: neighborhood density and overlap diagnostics
//! - [`eval_paraphrase`]: additive-composition paraphrase baseline
//! - [`pipeline`]: the whole chain with artifacts and a manifest

pub mod alias;
pub mod analysis;
pub mod embed_io;
pub mod eval_paraphrase;
pub mod graph;
pub mod knn;
pub mod pipeline;
pub mod scalar;
pub mod sgns;
pub mod walks;

pub use embed_io::{load_embeddings, save_embeddings, EmbeddingSet, Vocabulary};
pub use graph::{induce_multi, induce_single, WeightedDigraph};
pub use knn::{all_neighbors, Neighbor, NeighborList};
pub use pipeline::{run_pipeline, PipelineConfig};
pub use scalar::Real;

pub type Embeddings = EmbeddingSet<f64>;
pub type Embeddings32 = EmbeddingSet<f32>;
pub type Neighbors = NeighborList<f64>;
pub type Neighbors32 = NeighborList<f32>;
pub type DensityReport = analysis::DensityReport<f64>;
pub type DensityReport32 = analysis::DensityReport<f32>;
