//! Core value types and the two numeric primitives shared by every module.

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// A user: latent feature vector (last coordinate is the bias term) and the
/// segment the user was clustered into.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u64,
    pub features: Vec<f64>,
    pub segment: usize,
}

impl UserProfile {
    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Ground-truth logistic weights of one arm (playlist).
#[derive(Debug, Clone, PartialEq)]
pub struct ArmParameters {
    pub arm_id: usize,
    pub theta: Vec<f64>,
}

/// An ordered set of distinct arm indices. Slot 0 is the leftmost card
/// (rank 1).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Carousel(Vec<usize>);

impl Carousel {
    /// Validates that `slots` holds distinct arm indices below `n_arms`.
    pub fn new(slots: Vec<usize>, n_arms: usize) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::InvalidCarousel("no slots".into()));
        }
        let mut seen = vec![false; n_arms];
        for &arm in &slots {
            if arm >= n_arms {
                return Err(Error::InvalidCarousel(format!(
                    "arm {arm} out of range for {n_arms} arms"
                )));
            }
            if std::mem::replace(&mut seen[arm], true) {
                return Err(Error::InvalidCarousel(format!("arm {arm} repeated")));
            }
        }
        Ok(Carousel(slots))
    }

    pub(crate) fn from_distinct(slots: Vec<usize>) -> Self {
        debug_assert!({
            let mut s = slots.clone();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        });
        Carousel(slots)
    }

    pub fn slots(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Arm displayed at 1-based `rank`.
    pub fn arm_at_rank(&self, rank: usize) -> usize {
        self.0[rank - 1]
    }
}

impl fmt::Display for Carousel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "]")
    }
}

/// Policy-visible reward of one slot. `Unseen` slots carry no information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotReward {
    Unseen,
    Seen(bool),
}

impl SlotReward {
    pub fn is_seen(self) -> bool {
        matches!(self, SlotReward::Seen(_))
    }

    /// `Some(streamed)` for seen slots.
    pub fn seen(self) -> Option<bool> {
        match self {
            SlotReward::Unseen => None,
            SlotReward::Seen(s) => Some(s),
        }
    }
}

impl fmt::Display for SlotReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotReward::Unseen => write!(f, "X"),
            SlotReward::Seen(false) => write!(f, "0"),
            SlotReward::Seen(true) => write!(f, "1"),
        }
    }
}

/// What a policy learns about one user at the end of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundObservation {
    pub user_id: u64,
    pub carousel: Carousel,
    /// Aligned with `carousel.slots()`.
    pub rewards: Vec<SlotReward>,
}

impl RoundObservation {
    /// `(arm, streamed)` for every seen slot.
    pub fn seen_events(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.carousel
            .slots()
            .iter()
            .zip(&self.rewards)
            .filter_map(|(&arm, r)| r.seen().map(|s| (arm, s)))
    }
}

/// How the generative browsing model exposes slots to the user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DisplayMode {
    /// First `l_init` slots always seen, then geometric continuation.
    #[default]
    CascadeBrowse,
    /// Every slot is seen.
    FullDisplay,
}

impl DisplayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DisplayMode::CascadeBrowse => "cascade-browse",
            DisplayMode::FullDisplay => "full-display",
        }
    }
}

impl std::str::FromStr for DisplayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "cascade-browse" => Ok(DisplayMode::CascadeBrowse),
            "full-display" => Ok(DisplayMode::FullDisplay),
            other => Err(Error::Config(format!("unknown display mode `{other}`"))),
        }
    }
}

/// Sizes and knobs of one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Number of arms.
    pub k: usize,
    /// Carousel length.
    pub l: usize,
    /// Slots visible without swiping.
    pub l_init: usize,
    /// Number of user segments.
    pub q: usize,
    /// Feature dimension, bias included.
    pub d: usize,
    pub n_users_per_round: usize,
    pub n_rounds: usize,
    /// Probability of swiping one card further once past `l_init`.
    pub gamma: f64,
    pub seed: u64,
    pub display_mode: DisplayMode,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k == 0 || self.l == 0 || self.l_init == 0 || self.q == 0 || self.d == 0 {
            return fail("k, l, l_init, q and d must be positive".into());
        }
        if self.n_users_per_round == 0 || self.n_rounds == 0 {
            return fail("users per round and rounds must be positive".into());
        }
        if self.l_init > self.l {
            return fail(format!("l_init ({}) exceeds l ({})", self.l_init, self.l));
        }
        if self.l >= self.k {
            return fail(format!(
                "l ({}) must be smaller than k ({})",
                self.l, self.k
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1]", self.gamma));
        }
        Ok(())
    }
}

/// Largest double below one; sigmoid output is clamped into
/// `[f64::MIN_POSITIVE, ONE_MINUS_ULP]` so it never reaches 0 or 1.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function `1 / (1 + e^-x)`, stable for large `|x|`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

/// Picks the `l` highest-scoring arms, best first. Equal scores are ordered
/// uniformly at random with draws from `rng`.
pub fn select_top_l<R: Rng + ?Sized>(scores: &[f64], l: usize, rng: &mut R) -> Result<Carousel> {
    let k = scores.len();
    if l > k {
        return Err(Error::TooManySlots {
            requested: l,
            available: k,
        });
    }
    if l == 0 {
        return Err(Error::InvalidCarousel("no slots".into()));
    }
    let mut keyed: Vec<(f64, u64, usize)> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, rng.random::<u64>(), i))
        .collect();
    let by_rank = |a: &(f64, u64, usize), b: &(f64, u64, usize)| -> Ordering {
        b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
    };
    if l < k {
        keyed.select_nth_unstable_by(l - 1, by_rank);
        keyed.truncate(l);
    }
    keyed.sort_unstable_by(by_rank);
    Ok(Carousel::from_distinct(
        keyed.into_iter().map(|e| e.2).collect(),
    ))
}

/// `l` distinct arms drawn uniformly without replacement, in draw order.
pub fn random_carousel<R: Rng + ?Sized>(k: usize, l: usize, rng: &mut R) -> Carousel {
    Carousel::from_distinct(rand::seq::index::sample(rng, k, l).into_vec())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamTag};
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> crate::rng::SimRng {
        crate::rng::SimRng::seed_from_u64(seed)
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        let s50 = sigmoid(50.0);
        assert!((1.0 - 1e-15..1.0).contains(&s50));
        assert!((sigmoid(-5.0) - (1.0 - sigmoid(5.0))).abs() <= 1e-15);
        for x in [-700.0, -50.0, -1.0, 1.0, 50.0, 700.0] {
            let s = sigmoid(x);
            assert!(s > 0.0 && s < 1.0 && s.is_finite(), "sigmoid({x}) = {s}");
        }
        assert!(sigmoid(-745.5) > 0.0);
    }

    #[test]
    fn top_l_distinct_scores() {
        let mut r = rng(1);
        assert_eq!(
            select_top_l(&[0.9, 0.5, 0.1], 2, &mut r).unwrap().slots(),
            &[0, 1]
        );
        assert_eq!(
            select_top_l(&[1.0, 2.0, 3.0], 3, &mut r).unwrap().slots(),
            &[2, 1, 0]
        );
    }

    #[test]
    fn top_l_rejects_oversized() {
        let err = select_top_l(&[1.0, 2.0], 3, &mut rng(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::TooManySlots {
                requested: 3,
                available: 2
            }
        ));
    }

    #[test]
    fn top_l_ties_are_uniform() {
        // With all scores equal, slot 1 holds each arm with probability 1/K.
        let k = 5;
        let draws = 10_000;
        let scores = vec![0.3; k];
        let mut counts = vec![0usize; k];
        let mut r = rng(11);
        for _ in 0..draws {
            counts[select_top_l(&scores, 2, &mut r).unwrap().slots()[0]] += 1;
        }
        let p = 1.0 / k as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!(
                (f - p).abs() <= 3.0 * se,
                "frequency {f} vs {p} ± {}",
                3.0 * se
            );
        }
    }

    #[test]
    fn top_l_deterministic_given_stream() {
        let scores = [0.2, 0.2, 0.2, 0.1, 0.2];
        let a = select_top_l(&scores, 3, &mut substream(3, StreamTag::Segment, &[1])).unwrap();
        let b = select_top_l(&scores, 3, &mut substream(3, StreamTag::Segment, &[1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn carousel_validation() {
        assert!(Carousel::new(vec![0, 2, 1], 3).is_ok());
        assert!(Carousel::new(vec![0, 0], 3).is_err());
        assert!(Carousel::new(vec![3], 3).is_err());
        assert!(Carousel::new(vec![], 3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = SimulationConfig {
            k: 20,
            l: 12,
            l_init: 3,
            q: 2,
            d: 4,
            n_users_per_round: 10,
            n_rounds: 2,
            gamma: 0.9,
            seed: 0,
            display_mode: DisplayMode::CascadeBrowse,
        };
        assert!(c.validate().is_ok());
        c.l = 20;
        assert!(c.validate().is_err());
        c.l = 12;
        c.l_init = 13;
        assert!(c.validate().is_err());
        c.l_init = 3;
        c.gamma = 1.5;
        assert!(c.validate().is_err());
    }

    proptest! {
        #[test]
        fn top_l_invariant_under_increasing_transform(
            scores in prop::collection::vec(-5.0f64..5.0, 1..40),
            l_frac in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let l = 1 + ((scores.len() - 1) as f64 * l_frac) as usize;
            let transformed: Vec<f64> = scores.iter().map(|x| x * x * x + 2.0 * x + 7.0).collect();
            let a = select_top_l(&scores, l, &mut rng(seed)).unwrap();
            let b = select_top_l(&transformed, l, &mut rng(seed)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn top_l_returns_the_l_largest(
            scores in prop::collection::vec(-5.0f64..5.0, 1..40),
            seed in any::<u64>(),
        ) {
            let l = scores.len().div_ceil(2);
            let c = select_top_l(&scores, l, &mut rng(seed)).unwrap();
            let chosen: Vec<f64> = c.slots().iter().map(|&i| scores[i]).collect();
            prop_assert!(chosen.windows(2).all(|w| w[0] >= w[1]));
            let mut sorted = scores.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            prop_assert_eq!(chosen, sorted[..l].to_vec());
        }

        #[test]
        fn sigmoid_strictly_inside_unit_interval(x in -1e3f64..1e3) {
            let s = sigmoid(x);
            prop_assert!(s > 0.0 && s < 1.0);
        }
    }
}
