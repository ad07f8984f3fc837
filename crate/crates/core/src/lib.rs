//! Structural similarity between NL2SQL question/SQL pairs.
//!
//! The pipeline: parse a SQL query into an AST, mask schema mentions and
//! literals into a skeleton tree, measure skeleton distance with the
//! Zhang-Shasha tree edit distance, extract schema links and compare them
//! with Jaccard, compare question embeddings with cosine, and average the
//! three components into a single label. On top of that sit a corpus
//! generator for supervised similarity training data, an in-domain example
//! selector, and a rank-correlation evaluation harness for external
//! similarity predictors.

pub mod corpus;
pub mod embedding;
pub mod evalrank;
pub mod schema;
pub mod selector;
pub mod similarity;
pub mod skeleton;
pub mod sql;
pub mod ted;

pub use embedding::{EmbeddingSet, EmbeddingVector, ExampleId, HashedBagEmbedder};
pub use schema::{extract_links, jaccard_similarity, SchemaCatalog, SchemaLinkSet};
pub use skeleton::{build_skeleton, render_skeleton, SkeletonTree};
pub use similarity::{
    cosine_similarity, rescale_question_sim, score_pool, QuestionSqlPair, SimilarityLabel,
};
pub use sql::{parse_sql, ParseError, SqlAst};
pub use ted::{normalize_distances, ted_bruteforce, tree_edit_distance, EditDistance,
              PostorderTree};
