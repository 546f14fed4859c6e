use super::{Feedback, Policy, RoundContext, SegmentArmStats};
use crate::domain::{random_carousel, select_top_l, Carousel, UserProfile};

/// Explore-then-commit, per segment.
///
/// A segment plays uniformly random carousels until every arm has been seen
/// `threshold` times by its users, then recommends the top-`l` arms by
/// empirical stream rate. Counters keep updating after commitment.
#[derive(Debug, Clone)]
pub struct ExploreThenCommit {
    k: usize,
    l: usize,
    threshold: u64,
    stats: SegmentArmStats,
}

impl ExploreThenCommit {
    pub fn new(k: usize, l: usize, q: usize, threshold: u64) -> Self {
        assert!(threshold >= 1, "commit threshold must be at least 1");
        ExploreThenCommit {
            k,
            l,
            threshold,
            stats: SegmentArmStats::new(q, k),
        }
    }

    pub fn stats(&self) -> &SegmentArmStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut SegmentArmStats {
        &mut self.stats
    }

    pub fn is_committed(&self, segment: usize) -> bool {
        self.stats.min_displays(segment) >= self.threshold
    }
}

impl Policy for ExploreThenCommit {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel {
        if self.is_committed(user.segment) {
            select_top_l(
                &self.stats.means(user.segment),
                self.l,
                &mut ctx.segment_rng(user.segment),
            )
            .expect("l is at most k")
        } else {
            random_carousel(self.k, self.l, &mut ctx.user_rng(user.user_id))
        }
    }

    fn update_batch(&mut self, batch: &[Feedback<'_>]) {
        self.stats.record_batch(batch);
    }

    fn exploring_segments(&self) -> Option<usize> {
        Some(
            (0..self.stats.n_segments())
                .filter(|&s| !self.is_committed(s))
                .count(),
        )
    }
}
