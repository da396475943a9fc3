//! Online spanning and Steiner trees over a growing metric, with bounded
//! edge swaps per arrival.

pub mod clustering;
pub mod experiment;
pub mod instance;
pub mod leveled_tree;
pub mod maintainer;
pub mod metric;
pub mod oracle;
pub mod rank_state;
pub mod scalar;
mod union_find;

pub use clustering::{run_clustering, ClusterError, ClusterHistory, PhaseClustering, Rank};
pub use experiment::{run_experiment, run_spec, ReportFormat, RunConfig, RunError, RunSummary};
pub use instance::{gen_euclidean, gen_graph, gen_spider, rescale, verify_instance, InstanceError, InstanceSpec, Source};
pub use leveled_tree::{cost_bound_factor, LeveledEdge, LeveledTree, SwapTrace, TreeError, ValidityReport};
pub use maintainer::{Algorithm, Maintainer, MaintainerConfig, MaintainerError, RoundReport, VerifyLevel};
pub use metric::{MetricError, OnlineMetric, PointId};
pub use oracle::{GraphInstance, OracleError};
pub use rank_state::{RankPair, RankVector, Variant, VirtualRankVector};
pub use scalar::{Exact, Scalar};

pub type Metric = OnlineMetric<f64>;
pub type MetricF32 = OnlineMetric<f32>;
pub type ExactMetric = OnlineMetric<Exact>;
pub type Tree = LeveledTree<f64>;
pub type TreeF32 = LeveledTree<f32>;
pub type ExactTree = LeveledTree<Exact>;
pub type Graph = GraphInstance<f64>;
pub type FloatMaintainer = Maintainer<f64>;
pub type ExactMaintainer = Maintainer<Exact>;
