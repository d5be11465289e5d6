//! Classical feature transforms: discriminant projection, exact optimal
//! transport, and manifold embeddings.

pub mod embed;
pub mod error;
pub mod io;
pub mod lda;
pub mod lle;
pub mod mds;
pub mod ot;
pub mod tsne;

pub use embed::{silhouette, squared_distances, EmbeddingResult};
pub use error::{Result, TransformError};
pub use io::{read_matrix, write_scatter};
pub use lda::{lda_fit, LdaModel};
pub use lle::{lle_embed, lle_objective, lle_weights, LleConfig, LleWeights, LocalWeights};
pub use mds::{gram, mds_embed, GramForm};
pub use ot::{ot_gradient_targets, ot_solve, squared_cost, GradientTargets, TransportPlan};
pub use tsne::{
    conditional_affinities, low_conditionals, tsne_embed, tsne_gradient, tsne_objective, Bandwidth,
    TsneConfig, TsneObjective,
};
