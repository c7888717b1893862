//! Unsupervised floor separation for Wi-Fi fingerprint trajectories.
//!
//! Fingerprints become nodes of a weighted trajectory graph; Node2Vec
//! embeddings of that graph are clustered with K-Means, the number of floors
//! chosen by the Calinski-Harabasz index. Modularity and label-propagation
//! baselines run on the same graph, and every partition is scored against
//! ground truth with majority-mapped accuracy, weighted F1, ARI, NMI and
//! purity, bootstrap intervals and McNemar tests.

pub mod cluster;
pub mod community;
pub mod distance;
pub mod embed;
pub mod error;
pub mod eval;
pub mod exec;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result, Stage};
pub use exec::Exec;
