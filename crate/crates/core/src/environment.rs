//! Ground-truth world: display-to-stream probabilities, user sampling,
//! browsing simulation, observation masking and expected regret.
//!
//! Generation and observation are separate steps on purpose. The browsing
//! simulation decides what a user really saw; the observation functions only
//! look at streams, so a policy's belief about what was seen can disagree
//! with what actually happened.

use std::sync::OnceLock;

use rand::Rng;

use crate::domain::{
    dot, sigmoid, ArmParameters, Carousel, DisplayMode, RoundObservation, SimulationConfig,
    SlotReward, UserProfile,
};
use crate::error::{Error, Result};

/// Users and arms of a simulated world, with `p_ui = sigmoid(x_u . theta_i)`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    users: Vec<UserProfile>,
    arms: Vec<ArmParameters>,
    dim: usize,
    // Arm weights packed row-major, K x D.
    theta: Vec<f64>,
}

impl GroundTruth {
    /// Checks that every feature and weight vector has the same dimension.
    pub fn new(users: Vec<UserProfile>, arms: Vec<ArmParameters>) -> Result<Self> {
        let dim = arms
            .first()
            .map(|a| a.theta.len())
            .ok_or_else(|| Error::Config("ground truth needs at least one arm".into()))?;
        if users.is_empty() {
            return Err(Error::Config("ground truth needs at least one user".into()));
        }
        for a in &arms {
            if a.theta.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.theta.len(),
                });
            }
        }
        for u in &users {
            if u.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: u.features.len(),
                });
            }
        }
        let theta = arms.iter().flat_map(|a| a.theta.iter().copied()).collect();
        Ok(GroundTruth {
            users,
            arms,
            dim,
            theta,
        })
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn arms(&self) -> &[ArmParameters] {
        &self.arms
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of segments implied by the users' segment ids.
    pub fn n_segments(&self) -> usize {
        self.users.iter().map(|u| u.segment + 1).max().unwrap_or(0)
    }

    fn arm_theta(&self, arm: usize) -> &[f64] {
        &self.theta[arm * self.dim..(arm + 1) * self.dim]
    }

    /// `p_ui` for a user whose features have the world's dimension.
    #[inline]
    pub fn probability(&self, user: &UserProfile, arm: usize) -> f64 {
        sigmoid(dot(&user.features, self.arm_theta(arm)))
    }

    /// All K probabilities for one user.
    pub fn probabilities(&self, user: &UserProfile) -> Vec<f64> {
        self.theta
            .chunks_exact(self.dim)
            .map(|t| sigmoid(dot(&user.features, t)))
            .collect()
    }
}

/// What a user actually did with a carousel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrowseOutcome {
    /// Ranks `1..=seen_count` were seen.
    pub seen_count: usize,
    /// 1-based ranks streamed, ascending.
    pub streams: Vec<usize>,
}

impl BrowseOutcome {
    pub fn last_stream(&self) -> Option<usize> {
        self.streams.last().copied()
    }
}

/// `sigmoid(x_u . theta_i)`.
pub fn ground_truth_probability(user: &UserProfile, arm: &ArmParameters) -> Result<f64> {
    if user.features.len() != arm.theta.len() {
        return Err(Error::DimensionMismatch {
            expected: arm.theta.len(),
            found: user.features.len(),
        });
    }
    Ok(sigmoid(dot(&user.features, &arm.theta)))
}

/// Indices of `n` users drawn uniformly without replacement.
pub fn sample_round_indices<R: Rng + ?Sized>(
    truth: &GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n > truth.n_users() {
        return Err(Error::TooManyUsers {
            requested: n,
            available: truth.n_users(),
        });
    }
    Ok(rand::seq::index::sample(rng, truth.n_users(), n).into_vec())
}

/// `n` users drawn uniformly without replacement.
pub fn sample_round_users<'a, R: Rng + ?Sized>(
    truth: &'a GroundTruth,
    n: usize,
    rng: &mut R,
) -> Result<Vec<&'a UserProfile>> {
    Ok(sample_round_indices(truth, n, rng)?
        .into_iter()
        .map(|i| &truth.users[i])
        .collect())
}

/// Simulates one user browsing a carousel.
///
/// In cascade-browse mode the first `l_init` ranks are always seen; after
/// each seen rank from `l_init` on, the user moves one card further with
/// probability `gamma`. Every seen card is streamed independently with its
/// ground-truth probability.
pub fn simulate_browse<R: Rng + ?Sized>(
    truth: &GroundTruth,
    user: &UserProfile,
    carousel: &Carousel,
    config: &SimulationConfig,
    rng: &mut R,
) -> BrowseOutcome {
    let l = carousel.len();
    let seen_count = match config.display_mode {
        DisplayMode::FullDisplay => l,
        DisplayMode::CascadeBrowse => {
            let mut seen = config.l_init.min(l);
            while seen < l && rng.random::<f64>() < config.gamma {
                seen += 1;
            }
            seen
        }
    };
    let streams = (1..=seen_count)
        .filter(|&rank| rng.random::<f64>() < truth.probability(user, carousel.arm_at_rank(rank)))
        .collect();
    BrowseOutcome {
        seen_count,
        streams,
    }
}

/// Cascade-inferred rewards: ranks `1..=max(l_init, last streamed rank)` are
/// taken as seen, everything after as unseen.
pub fn observe_cascade(outcome: &BrowseOutcome, l: usize, l_init: usize) -> Vec<SlotReward> {
    let inferred = outcome.last_stream().unwrap_or(0).max(l_init).min(l);
    let mut rewards = vec![SlotReward::Unseen; l];
    for r in rewards.iter_mut().take(inferred) {
        *r = SlotReward::Seen(false);
    }
    for &rank in &outcome.streams {
        rewards[rank - 1] = SlotReward::Seen(true);
    }
    rewards
}

/// Rewards ignoring the carousel structure: every slot counts as seen.
pub fn observe_no_cascade(outcome: &BrowseOutcome, l: usize) -> Vec<SlotReward> {
    let mut rewards = vec![SlotReward::Seen(false); l];
    for &rank in &outcome.streams {
        rewards[rank - 1] = SlotReward::Seen(true);
    }
    rewards
}

/// Builds the observation a policy receives, cascade-masked or not.
pub fn observe(
    user: &UserProfile,
    carousel: &Carousel,
    outcome: &BrowseOutcome,
    l_init: usize,
    cascade: bool,
) -> RoundObservation {
    let rewards = if cascade {
        observe_cascade(outcome, carousel.len(), l_init)
    } else {
        observe_no_cascade(outcome, carousel.len())
    };
    RoundObservation {
        user_id: user.user_id,
        carousel: carousel.clone(),
        rewards,
    }
}

/// Sum of the `l` largest values of `probs`.
pub fn top_l_sum(probs: &[f64], l: usize) -> f64 {
    let mut p = probs.to_vec();
    let l = l.min(p.len());
    if l == 0 {
        return 0.0;
    }
    if l < p.len() {
        p.select_nth_unstable_by(l - 1, |a, b| b.total_cmp(a));
    }
    let mut top = p[..l].to_vec();
    // Fixed summation order so the value does not depend on the partition.
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    top.iter().sum()
}

/// Expected reward of the best set of `l` arms for `user`.
pub fn optimal_value(user: &UserProfile, truth: &GroundTruth, l: usize) -> f64 {
    top_l_sum(&truth.probabilities(user), l)
}

/// Expected reward of a carousel, summed over its slots.
pub fn carousel_value(user: &UserProfile, truth: &GroundTruth, carousel: &Carousel) -> f64 {
    carousel
        .slots()
        .iter()
        .map(|&a| truth.probability(user, a))
        .sum()
}

/// Expected regret of one round: the gap between each user's optimal set
/// and the recommended set, summed over users.
pub fn round_regret(
    recommendations: &[(&UserProfile, &Carousel)],
    truth: &GroundTruth,
    l: usize,
) -> f64 {
    recommendations
        .iter()
        .map(|(u, c)| (optimal_value(u, truth, l) - carousel_value(u, truth, c)).max(0.0))
        .sum()
}

/// Per-user memo of [`optimal_value`] for a fixed `l`, filled lazily and
/// safe to share between threads.
#[derive(Debug)]
pub struct OptimalValueCache {
    l: usize,
    values: Vec<OnceLock<f64>>,
}

impl OptimalValueCache {
    pub fn new(truth: &GroundTruth, l: usize) -> Self {
        OptimalValueCache {
            l,
            values: (0..truth.n_users()).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Optimal value of the user stored at `index` in `truth`.
    pub fn get(&self, truth: &GroundTruth, index: usize) -> f64 {
        *self.values[index].get_or_init(|| optimal_value(&truth.users()[index], truth, self.l))
    }
}
