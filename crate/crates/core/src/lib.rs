//! Hodge-Laplacian filtering and attention pooling on clique complexes.
//!
//! The crate is a forward-only engine: it builds clique complexes from
//! graphs, forms Hodge Laplacians from oriented boundary operators, applies
//! spectral filters (exactly or through Laguerre expansions), moves signals
//! between simplex dimensions, and coarsens complexes with attention-weighted
//! pooling. [`model`] chains these stages into a block architecture.

pub mod complex;
pub mod error;
pub mod io;
pub mod model;
pub mod pooling;
pub mod projection;
pub mod sparse;
pub mod spectral;

pub use complex::{build_complex, hop_neighborhood, Graph, GraphData, SimplicialComplex};
pub use error::{Error, Result};
pub use model::{
    forward, load_params, positional_encoding, save_params, Ablation, ModelConfig, ModelParams,
};
pub use pooling::{
    attention_weights, cluster_nodes, downsample, pool_signals, AttentionParams, AttentionWeights,
    CoarseningResult, NodeClustering,
};
pub use projection::{
    msi_forward, project_chain, project_down, project_up, MsiWeights, ProjectionOperator,
};
pub use sparse::{CooBuilder, DenseMatrix, SparseMatrix};
pub use spectral::{
    eigensystem, filter_exact, filter_poly, hodge_laplacian, laguerre_eval, EigenSystem,
    FilterBank, HodgeLaplacian,
};
