//! Recommendation policies.
//!
//! Every policy follows the same round protocol: [`Policy::recommend`] is
//! called for each user at round start and never mutates state; once all
//! users of the round have been served, [`Policy::update_batch`] receives
//! every observation at once (delayed batch feedback). Unseen slots carry no
//! information and are skipped by every update.
//!
//! Policies whose id ends in `-seg` share their statistics across all users
//! of a segment.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::domain::{Carousel, RoundObservation, UserProfile};
use crate::error::{Error, Result};
use crate::rng::{substream, SimRng, StreamTag};

mod epsilon_greedy;
mod explore_commit;
mod kl_ucb;
mod linear_ts;
mod random;
mod stats;
mod thompson;

pub use epsilon_greedy::EpsilonGreedy;
pub use explore_commit::ExploreThenCommit;
pub use kl_ucb::{kl_bernoulli, kl_ucb_index, KlUcb};
pub use linear_ts::{
    LaplaceObjective, LinearArmPosterior, LinearThompson, ModeSearch, UpdateReport,
    GRADIENT_TOLERANCE, MAX_ITERATIONS,
};
pub use random::RandomPolicy;
pub use stats::SegmentArmStats;
pub use thompson::BetaThompson;

/// Per-round random streams handed to a policy.
///
/// `user_rng` gives each user an independent stream; `segment_rng` gives all
/// users of a segment the same stream, which deterministic policies use for
/// tie-breaking so that a segment receives one carousel per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundContext {
    pub seed: u64,
    pub policy_key: u64,
    /// 1-based round index.
    pub round: u64,
}

impl RoundContext {
    pub fn user_rng(&self, user_id: u64) -> SimRng {
        substream(
            self.seed,
            StreamTag::Recommend,
            &[self.policy_key, self.round, user_id],
        )
    }

    pub fn segment_rng(&self, segment: usize) -> SimRng {
        substream(
            self.seed,
            StreamTag::Segment,
            &[self.policy_key, self.round, segment as u64],
        )
    }
}

/// One user's observation at the end of a round.
#[derive(Debug, Clone, Copy)]
pub struct Feedback<'a> {
    pub user: &'a UserProfile,
    pub observation: &'a RoundObservation,
}

pub trait Policy: Send + Sync {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel;

    fn recommend_batch(&self, users: &[&UserProfile], ctx: &RoundContext) -> Vec<Carousel> {
        users.par_iter().map(|u| self.recommend(u, ctx)).collect()
    }

    fn update_batch(&mut self, batch: &[Feedback<'_>]);

    /// Number of segments still exploring, for policies with an explicit
    /// exploration phase.
    fn exploring_segments(&self) -> Option<usize> {
        None
    }
}

/// The policy families, without the cascade switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Random,
    EtcSegExplore,
    EtcSegExploit,
    EpsilonGreedySegExplore,
    EpsilonGreedySegExploit,
    KlUcbSeg,
    TsSegNaive,
    TsSegPessimistic,
    TsLinNaive,
    TsLinPessimistic,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 10] = [
        PolicyKind::Random,
        PolicyKind::EtcSegExplore,
        PolicyKind::EtcSegExploit,
        PolicyKind::EpsilonGreedySegExplore,
        PolicyKind::EpsilonGreedySegExploit,
        PolicyKind::KlUcbSeg,
        PolicyKind::TsSegNaive,
        PolicyKind::TsSegPessimistic,
        PolicyKind::TsLinNaive,
        PolicyKind::TsLinPessimistic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::EtcSegExplore => "etc-seg-explore",
            PolicyKind::EtcSegExploit => "etc-seg-exploit",
            PolicyKind::EpsilonGreedySegExplore => "epsilon-greedy-seg-explore",
            PolicyKind::EpsilonGreedySegExploit => "epsilon-greedy-seg-exploit",
            PolicyKind::KlUcbSeg => "kl-ucb-seg",
            PolicyKind::TsSegNaive => "ts-seg-naive",
            PolicyKind::TsSegPessimistic => "ts-seg-pessimistic",
            PolicyKind::TsLinNaive => "ts-lin-naive",
            PolicyKind::TsLinPessimistic => "ts-lin-pessimistic",
        }
    }
}

const NO_CASCADE_SUFFIX: &str = "-no-cascade";

/// A policy identifier such as `ts-seg-pessimistic` or
/// `epsilon-greedy-seg-explore-no-cascade`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolicyId {
    pub kind: PolicyKind,
    /// `false` for `-no-cascade` variants.
    pub cascade: bool,
}

impl PolicyId {
    pub fn new(kind: PolicyKind, cascade: bool) -> Self {
        PolicyId { kind, cascade }
    }

    /// Builds a fresh policy for `k` arms, carousels of `l` slots, `q`
    /// segments and `d`-dimensional features.
    pub fn build(self, k: usize, l: usize, q: usize, d: usize) -> Box<dyn Policy> {
        match self.kind {
            PolicyKind::Random => Box::new(RandomPolicy::new(k, l)),
            PolicyKind::EtcSegExplore => Box::new(ExploreThenCommit::new(k, l, q, 100)),
            PolicyKind::EtcSegExploit => Box::new(ExploreThenCommit::new(k, l, q, 20)),
            PolicyKind::EpsilonGreedySegExplore => Box::new(EpsilonGreedy::new(k, l, q, 0.1)),
            PolicyKind::EpsilonGreedySegExploit => Box::new(EpsilonGreedy::new(k, l, q, 0.01)),
            PolicyKind::KlUcbSeg => Box::new(KlUcb::new(k, l, q)),
            PolicyKind::TsSegNaive => Box::new(BetaThompson::new(k, l, q, 1.0, 1.0)),
            PolicyKind::TsSegPessimistic => Box::new(BetaThompson::new(k, l, q, 1.0, 99.0)),
            PolicyKind::TsLinNaive => Box::new(LinearThompson::naive(k, l, d)),
            PolicyKind::TsLinPessimistic => Box::new(LinearThompson::pessimistic(k, l, d)),
        }
    }
}

impl fmt::Display for PolicyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if !self.cascade {
            f.write_str(NO_CASCADE_SUFFIX)?;
        }
        Ok(())
    }
}

impl FromStr for PolicyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, cascade) = match s.strip_suffix(NO_CASCADE_SUFFIX) {
            Some(base) => (base, false),
            None => (s, true),
        };
        PolicyKind::ALL
            .iter()
            .find(|k| k.as_str() == base)
            .map(|&kind| PolicyId { kind, cascade })
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

/// Parses a comma-separated list of policy ids.
pub fn parse_policy_list(list: &str) -> Result<Vec<PolicyId>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}
