//! Discrete Bayesian networks with exact, sampling and archive-based belief
//! estimation, plus genetic search for probable trials.

pub mod archive;
pub mod belief;
pub mod exact;
pub mod format;
pub mod genetic;
pub mod netgen;
pub mod network;
pub mod samplers;
pub mod trial;

pub use archive::{Archive, SnapshotError};
pub use belief::BeliefTable;
pub use exact::{exact_posterior, ExactError, ExactSolution, DEFAULT_BUDGET};
pub use format::{parse_network, read_network_file, write_network, FormatError};
pub use genetic::{run_search, GaError, GaParams, SearchReport, StopReason};
pub use netgen::{generate, select_low_prior_evidence, NetGenConfig, NetGenError};
pub use network::{Cpt, Network, NetworkBuilder, NetworkError, Node, NodeId};
pub use samplers::{FrequencyTally, Sampler, SamplerError, SamplingMethod, WeightedTrial};
pub use trial::{Evidence, EvidenceError, IdCode, Trial, TrialLayout};
