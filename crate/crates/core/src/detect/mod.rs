//! Statistical detection: pairwise homogeneity tests over transition rows,
//! similarity and robust dissimilarity, single-linkage clustering, cooperation
//! scores and ANOVA-gated classification.

mod anova;
mod classify;
mod linkage;
mod pearson;
mod similarity;
pub mod special;

pub use anova::anova_p;
pub use classify::{
    classify, cooperation_score, detect, detect_with, ClassificationResult, DetectionReport,
    DetectorParams, Verdict, COOPERATIVE_TRANSITIONS, SELFISH_TRANSITIONS,
};
pub use linkage::{single_linkage, Dendrogram, Merge};
pub use pearson::{chi2_statistic, pearson_row_test, PearsonOutcome, PearsonTest, Row};
pub use similarity::{
    dissimilarity, dissimilarity_terms, similarity_l, DissimilarityMatrix, DissimilarityTerms,
    RejectionVector, Similarity, SimilarityMatrix,
};
pub use special::chi2_critical;
