//! Toolkit for q-ary polar codes over channels with input alphabet size
//! `q = 2^r`: channel modeling, the minus/plus channel transforms and
//! recursive synthesis, multilevel polarization analysis, information-set
//! code construction with per-symbol frozen-bit prefixes, successive
//! cancellation decoding, and Monte Carlo simulation with analytic error
//! bounds.

pub mod channel;
pub mod code;
pub mod decode;
mod error;
pub mod polarize;
pub mod sim;

pub use channel::{
    bhattacharyya_matrix, bhattacharyya_pair, build_ordered_erasure, build_ordered_symmetric,
    capacity, capacity_ordered_erasure, channel_stats, identity_channel, level_stats,
    merge_equivalent_outputs, ordered_weight, quantize_outputs, random_channel,
    restrict_rightmost, ChannelStats, Dmc, LevelStats,
};
pub use code::{
    construct_by_rate, construct_by_threshold, encode, gn_multiply, CodeConstruction, FrozenFill,
};
pub use decode::{channel_posterior, node_minus, node_plus, LikelihoodVector, ScDecoder};
pub use error::{Error, Result};
pub use polarize::{
    classify, polarization_histogram, sample_path, synthesize, synthesize_all,
    synthesis_fingerprint, transform_minus, transform_plus, validate_bhatta_order,
    validate_transform_identities, ConfigClass, Sign, SynthesisParams, SynthesisTable,
};
pub use sim::{simulate_fer, union_bound, SimParams, SimReport};
