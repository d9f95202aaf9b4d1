//! Similarity, utility and privacy metrics.

mod forest;
mod joint;
mod marginal;
mod privacy;
mod report;
mod utility;

pub use forest::{ForestConfig, RandomForest, Task};
pub use joint::{
    correlation_matrix, kmeans, log_cluster, numeric_columns, pcd, KMeans, KMeansConfig, Pcd,
    DEFAULT_CLUSTERS, LOG_CLUSTER_FLOOR,
};
pub use marginal::{ks_statistic, w1_distance};
pub use privacy::{
    attribute_disclosure, continuous_matrix, dcr, percentile, reference_stats, Dcr, DcrMode,
    DCR_PERCENTILE, DISCLOSURE_K,
};
pub use report::{
    average_ranks, compare, evaluate, ColumnReport, Direction, EvalConfig, EvalReport, RankTable,
    METRICS,
};
pub use utility::{macro_f1, mape, mlu, Mlu, MluColumn, MAPE_MIN_ABS};
