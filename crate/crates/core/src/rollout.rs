//! Forward simulation of a whole flock from its root leader's trajectory.

use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::error::{Error, Result};
use crate::hierarchy::{AgentId, FlockHierarchy};
use crate::lqt::solve_tracking;
use crate::model::{SampledTrajectory, StateVec, WeightVector};
use crate::pipeline::make_desired;

/// Every follower tracks its leader's realized trajectory delayed by the pair's
/// delay, in leader-before-follower order.
///
/// Followers without an entry in `initial` start on their desired trajectory's
/// first sample. The root leader's trajectory is returned unchanged.
pub fn rollout_hierarchy(
    hierarchy: &FlockHierarchy,
    leader_traj: &SampledTrajectory,
    weights: &BTreeMap<AgentId, WeightVector>,
    initial: &BTreeMap<AgentId, StateVec>,
) -> Result<BTreeMap<AgentId, SampledTrajectory>> {
    hierarchy.ensure_valid(leader_traj.dt())?;
    let roots = hierarchy.roots();
    if roots.len() != 1 {
        return Err(Error::InvalidHierarchy(alloc::format!(
            "expected exactly one root leader, found {}",
            roots.len()
        )));
    }
    let root: String = roots.into_iter().next().unwrap_or_default().into();
    for f in hierarchy.followers() {
        if !weights.contains_key(f) {
            return Err(Error::MissingWeights(f.into()));
        }
    }

    let mut out = BTreeMap::new();
    out.insert(root, leader_traj.clone());
    for pair in hierarchy.topological_pairs()? {
        let leader = &out[&pair.leader];
        let desired = make_desired(leader, pair.delay).map_err(|e| e.for_follower(&pair.follower))?;
        let x0 = initial.get(&pair.follower).copied().unwrap_or(*desired.state(0));
        let traj = solve_tracking(&weights[&pair.follower], &desired, &x0)
            .map_err(|e| e.for_follower(&pair.follower))?;
        out.insert(pair.follower.clone(), traj);
    }
    Ok(out)
}
