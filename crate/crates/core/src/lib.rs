//! Leader-follower flock models and recovery of tracking cost weights from
//! observed trajectories via the hard-constrained minimum principle.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, the command line
//! and anything touching the operating system live in the `flock-ioc` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

mod banded;
pub mod dynamics;
pub mod error;
pub mod hierarchy;
pub mod ioc;
pub mod lqt;
pub mod model;
pub mod pipeline;
pub mod qp_oracle;
pub mod rollout;

pub use banded::{BandMatrix, PivotStats};
pub use error::{Error, Result};
pub use hierarchy::{AgentId, FlockHierarchy, LeaderFollowerPair, Violation};
pub use ioc::{
    assemble_gram_multi, assemble_gram_single, build_selection, diagnose, gram_for_flight,
    integrate_costate_basis, solve_weights, CostateBasisSeries, Diagnostics, GramMatrix, IocSolution,
    SolveOptions,
};
pub use lqt::{riccati_sweep, solve_tracking, RiccatiSweep};
pub use model::{ControlVec, KnownWeights, SampledTrajectory, StateVec, WeightVector, BASIS_DIM};
pub use pipeline::{build_pair_datasets, differentiate, make_desired, PairDataset, PipelineOptions, RawTrack, TrackSample};
pub use qp_oracle::{direct_qp_oracle, QpSolution};
pub use rollout::rollout_hierarchy;
