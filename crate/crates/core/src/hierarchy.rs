//! Leader-follower structure of the flock.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

pub type AgentId = String;

/// Absolute tolerance when checking that a delay is a whole number of samples.
pub const DELAY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderFollowerPair {
    pub leader: AgentId,
    pub follower: AgentId,
    /// Seconds by which the follower trails its leader.
    pub delay: f64,
}

impl LeaderFollowerPair {
    pub fn new(leader: impl Into<AgentId>, follower: impl Into<AgentId>, delay: f64) -> Self {
        LeaderFollowerPair { leader: leader.into(), follower: follower.into(), delay }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FlockHierarchy {
    pairs: Vec<LeaderFollowerPair>,
}

/// One broken hierarchy invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateFollower(AgentId),
    Cycle(Vec<AgentId>),
    NoRoot,
    NegativeDelay { follower: AgentId, delay: f64 },
    DelayNotMultiple { follower: AgentId, delay: f64, dt: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateFollower(id) => write!(f, "agent {id} follows more than one leader"),
            Violation::Cycle(ids) => write!(f, "cycle through {}", ids.join(" -> ")),
            Violation::NoRoot => f.write_str("every agent is a follower; no root leader"),
            Violation::NegativeDelay { follower, delay } => {
                write!(f, "negative delay {delay} s for follower {follower}")
            }
            Violation::DelayNotMultiple { follower, delay, dt } => {
                write!(f, "delay {delay} s for follower {follower} is not a multiple of {dt} s")
            }
        }
    }
}

impl FlockHierarchy {
    pub fn new(pairs: Vec<LeaderFollowerPair>) -> Self {
        FlockHierarchy { pairs }
    }

    /// The ten-bird pigeon flock: root leader A and nine followers.
    pub fn default_pigeons() -> Self {
        let table = [
            ("A", "M", 0.2),
            ("A", "G", 0.6),
            ("G", "B", 0.2),
            ("G", "D", 0.2),
            ("M", "I", 0.6),
            ("B", "J", 0.2),
            ("B", "L", 0.2),
            ("D", "H", 0.2),
            ("H", "C", 0.2),
        ];
        FlockHierarchy::new(
            table.iter().map(|&(l, f, d)| LeaderFollowerPair::new(l, f, d)).collect(),
        )
    }

    /// Parses `leader,follower,delay_seconds` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let err = |message: String| Error::Parse { line: n + 1, message };
            if fields.len() != 3 {
                return Err(err(alloc::format!("expected leader,follower,delay but got {line:?}")));
            }
            if fields[0].is_empty() || fields[1].is_empty() {
                return Err(err("empty agent id".into()));
            }
            let delay: f64 = fields[2]
                .parse()
                .map_err(|_| err(alloc::format!("bad delay {:?}", fields[2])))?;
            if !delay.is_finite() {
                return Err(err("delay must be finite".into()));
            }
            pairs.push(LeaderFollowerPair::new(fields[0], fields[1], delay));
        }
        Ok(FlockHierarchy { pairs })
    }

    pub fn pairs(&self) -> &[LeaderFollowerPair] {
        &self.pairs
    }

    pub fn agents(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.leader.as_str(), p.follower.as_str()])
            .collect()
    }

    pub fn followers(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.follower.as_str()).collect()
    }

    /// Agents that never appear as followers.
    pub fn roots(&self) -> BTreeSet<&str> {
        let followers = self.followers();
        self.agents().into_iter().filter(|a| !followers.contains(a)).collect()
    }

    pub fn pair_for(&self, follower: &str) -> Option<&LeaderFollowerPair> {
        self.pairs.iter().find(|p| p.follower == follower)
    }

    /// Every broken invariant; empty iff the hierarchy is usable with sample period `dt`.
    pub fn validate(&self, dt: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for p in &self.pairs {
            if !seen.insert(p.follower.as_str()) {
                out.push(Violation::DuplicateFollower(p.follower.clone()));
            }
            if p.delay < 0.0 {
                out.push(Violation::NegativeDelay { follower: p.follower.clone(), delay: p.delay });
            } else if delay_steps(p.delay, dt).is_none() {
                out.push(Violation::DelayNotMultiple {
                    follower: p.follower.clone(),
                    delay: p.delay,
                    dt,
                });
            }
        }
        if !self.pairs.is_empty() && self.roots().is_empty() {
            out.push(Violation::NoRoot);
        }
        out.extend(self.cycles().into_iter().map(Violation::Cycle));
        out
    }

    pub fn ensure_valid(&self, dt: f64) -> Result<()> {
        match self.validate(dt).first() {
            None => Ok(()),
            Some(v) => Err(Error::InvalidHierarchy(v.to_string())),
        }
    }

    /// Follow leader links upward from each agent; report each distinct cycle once.
    fn cycles(&self) -> Vec<Vec<AgentId>> {
        let leader_of: BTreeMap<&str, &str> =
            self.pairs.iter().map(|p| (p.follower.as_str(), p.leader.as_str())).collect();
        let mut reported: BTreeSet<Vec<&str>> = BTreeSet::new();
        let mut cycles = Vec::new();
        for &start in leader_of.keys() {
            let mut path: Vec<&str> = alloc::vec![start];
            let mut cur = start;
            while let Some(&next) = leader_of.get(cur) {
                if let Some(pos) = path.iter().position(|&a| a == next) {
                    let mut cyc: Vec<&str> = path[pos..].to_vec();
                    let min = cyc.iter().enumerate().min_by_key(|(_, a)| **a).map(|(i, _)| i).unwrap();
                    cyc.rotate_left(min);
                    if reported.insert(cyc.clone()) {
                        cycles.push(cyc.iter().map(|a| a.to_string()).collect());
                    }
                    break;
                }
                path.push(next);
                cur = next;
            }
        }
        cycles
    }

    /// Pairs ordered so that every leader's own pair (if any) comes first.
    /// Ties keep declaration order.
    pub fn topological_pairs(&self) -> Result<Vec<&LeaderFollowerPair>> {
        let mut done: BTreeSet<&str> = self.roots();
        let mut remaining: Vec<&LeaderFollowerPair> = self.pairs.iter().collect();
        let mut ordered = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let before = remaining.len();
            let mut next = Vec::new();
            for p in remaining {
                if done.contains(p.leader.as_str()) {
                    ordered.push(p);
                } else {
                    next.push(p);
                }
            }
            for p in &ordered[ordered.len() - (before - next.len())..] {
                done.insert(p.follower.as_str());
            }
            if next.len() == before {
                return Err(Error::InvalidHierarchy("leader links contain a cycle".into()));
            }
            remaining = next;
        }
        Ok(ordered)
    }
}

/// Number of whole samples in `delay`, or `None` if it is negative or not a
/// multiple of `dt` within [`DELAY_TOL`].
pub fn delay_steps(delay: f64, dt: f64) -> Option<usize> {
    if !(dt > 0.0) || delay < -DELAY_TOL || !delay.is_finite() {
        return None;
    }
    let k = libm::round(delay / dt);
    if (k * dt - delay).abs() <= DELAY_TOL {
        Some(k.max(0.0) as usize)
    } else {
        None
    }
}
