use rand::Rng;

use super::{Feedback, Policy, RoundContext, SegmentArmStats};
use crate::domain::{random_carousel, select_top_l, Carousel, UserProfile};

/// Epsilon-greedy per segment: with probability `epsilon` a user gets a
/// uniformly random carousel, otherwise the segment's top-`l` arms by
/// empirical stream rate (never-seen arms rate 0).
#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    k: usize,
    l: usize,
    epsilon: f64,
    stats: SegmentArmStats,
}

impl EpsilonGreedy {
    pub fn new(k: usize, l: usize, q: usize, epsilon: f64) -> Self {
        assert!((0.0..=1.0).contains(&epsilon), "epsilon outside [0, 1]");
        EpsilonGreedy {
            k,
            l,
            epsilon,
            stats: SegmentArmStats::new(q, k),
        }
    }

    pub fn stats(&self) -> &SegmentArmStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut SegmentArmStats {
        &mut self.stats
    }

    /// `(carousel, explored)` for one user.
    pub fn recommend_traced(&self, user: &UserProfile, ctx: &RoundContext) -> (Carousel, bool) {
        let mut rng = ctx.user_rng(user.user_id);
        if rng.random::<f64>() < self.epsilon {
            (random_carousel(self.k, self.l, &mut rng), true)
        } else {
            let c = select_top_l(
                &self.stats.means(user.segment),
                self.l,
                &mut ctx.segment_rng(user.segment),
            )
            .expect("l is at most k");
            (c, false)
        }
    }
}

impl Policy for EpsilonGreedy {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel {
        self.recommend_traced(user, ctx).0
    }

    fn update_batch(&mut self, batch: &[Feedback<'_>]) {
        self.stats.record_batch(batch);
    }
}
