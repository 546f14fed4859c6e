use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{Feedback, Policy, RoundContext, SegmentArmStats};
use crate::domain::{select_top_l, Carousel, UserProfile};

/// Beta-Bernoulli Thompson sampling per segment.
///
/// Each arm's stream rate in a segment has posterior
/// `Beta(alpha0 + successes, beta0 + displays - successes)`. Every user
/// presentation draws a fresh sample per arm, so users of one segment get
/// different carousels within a round.
#[derive(Debug, Clone)]
pub struct BetaThompson {
    l: usize,
    alpha0: f64,
    beta0: f64,
    stats: SegmentArmStats,
}

impl BetaThompson {
    pub fn new(k: usize, l: usize, q: usize, alpha0: f64, beta0: f64) -> Self {
        assert!(
            alpha0 > 0.0 && beta0 > 0.0,
            "Beta prior parameters must be positive"
        );
        BetaThompson {
            l,
            alpha0,
            beta0,
            stats: SegmentArmStats::new(q, k),
        }
    }

    pub fn stats(&self) -> &SegmentArmStats {
        &self.stats
    }

    pub fn stats_mut(&mut self) -> &mut SegmentArmStats {
        &mut self.stats
    }

    /// Posterior `(alpha, beta)` of an arm in a segment.
    pub fn posterior(&self, segment: usize, arm: usize) -> (f64, f64) {
        let d = self.stats.displays(segment, arm);
        let s = self.stats.successes(segment, arm);
        (self.alpha0 + s as f64, self.beta0 + (d - s) as f64)
    }

    pub fn sample_scores<R: Rng + ?Sized>(&self, segment: usize, rng: &mut R) -> Vec<f64> {
        (0..self.stats.n_arms())
            .map(|arm| {
                let (a, b) = self.posterior(segment, arm);
                Beta::new(a, b).expect("positive parameters").sample(rng)
            })
            .collect()
    }
}

impl Policy for BetaThompson {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel {
        let mut rng = ctx.user_rng(user.user_id);
        let scores = self.sample_scores(user.segment, &mut rng);
        select_top_l(&scores, self.l, &mut rng).expect("l is at most k")
    }

    fn update_batch(&mut self, batch: &[Feedback<'_>]) {
        self.stats.record_batch(batch);
    }
}
