//! Observation, intervention and mechanism analyses over traces and result tables.

mod cluster;
mod mechanism;
mod observe;
mod paths;

pub use cluster::{cluster_intentions, cluster_points};
pub use cluster::{kmeans, silhouette, Clustering, KMeans};
pub use mechanism::{
    dominant_label, intention_behavior_correlation, stage_flow_matrix, window_features, CorrelationMatrix, FlowMatrix,
    IntentionLog,
};
pub use observe::{
    density_heatmap, detect_anomalies, involution_distribution, robust_outliers, Heatmap, InvolutionDistribution,
    DEFAULT_ROBUST_Z,
};
pub use paths::{path_coefficients, standardized_paths, PathCoefficients};
