//! Self-aware optimization of adaptation planning strategies.
//!
//! A managed system streams observations (context, active configuration, performance metrics).
//! The framework detects the operating situation, decides whether to keep or replace the active
//! planning strategy, and tunes that strategy's parameters with Bayesian optimization.
//!
//! The numerical kernels (hypervolume, clustering, Gaussian process) are generic over
//! [`Scalar`] (`f32` or `f64`); the framework itself runs in `f64` through the aliases below.

pub mod coord;
pub mod ddm;
pub mod hypervolume;
pub mod paramopt;
pub mod rules;
pub mod scalar;
pub mod sitdet;
pub mod store;
pub mod stratsel;
pub mod value;

/// Detected operating situation. `-1` means noise or not yet determinable.
pub type SituationId = i64;

pub const NOISE: SituationId = -1;

pub use coord::{
    write_decisions_csv, DecisionRecord, DecisionSource, Framework, FrameworkError, RoundRecord, SystemModel,
};
pub use ddm::{parse_ddm, DdmError, DetectionAlgorithm, DomainDataModel, SelectionMethod};
pub use hypervolume::compute_hypervolume;
pub use rules::{FallbackRuleSet, SituationRuleSet};
pub use scalar::Scalar;
pub use store::{EnrichedObservation, Filter, Observation, ObservationStore, StoreError};
pub use value::{AdaptationDecision, DataType, ParameterSetting, Value, ValueMap};

/// Gaussian process surrogate in double precision.
pub type Gp = paramopt::GaussianProcess<f64>;
/// Gaussian process surrogate in single precision.
pub type GpF32 = paramopt::GaussianProcess<f32>;
/// OPTICS reachability ordering in double precision.
pub type Reachability = sitdet::OpticsOrdering<f64>;
/// k-means fit in double precision.
pub type KMeans = sitdet::KMeansFit<f64>;
