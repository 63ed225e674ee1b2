//! Deep hashing embeddings for signed networks.
//!
//! The pipeline: [`graph`] parses and cleans a signed edge list, [`triplet`]
//! derives ranking triplets from it, [`model`] maps node ids to relaxed codes
//! through an embedding and tanh stack, [`objective`] scores and
//! differentiates the ranking + quantization loss, [`train`] runs SGD, and
//! [`hamming`] / [`eval`] search and evaluate the resulting binary codes.

pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hamming;
pub mod model;
pub mod objective;
pub mod synth;
pub mod train;
pub mod triplet;

pub use error::{Error, Result};
pub use graph::{parse_edge_list, Direction, EdgeListFormat, GraphStats, Sign, SignedGraph};
pub use hamming::{hamming, CodeMatrix};
pub use model::{binarize, Gradients, HashCode, ModelConfig, ModelParams};
pub use objective::{batch_gradients, batch_loss, LossBreakdown, LossConfig, QuantizationScope, Reduction};
pub use train::{lr_at, lr_range_test, train, TrainConfig, TrainReport};
pub use triplet::{batches, build_triplets, NodeRef, SamplerConfig, Triplet, TripletCorpus, VirtualRule};
