use super::{Feedback, Policy, RoundContext};
use crate::domain::{random_carousel, Carousel, UserProfile};

/// Uniformly random carousels, no learning.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    k: usize,
    l: usize,
}

impl RandomPolicy {
    pub fn new(k: usize, l: usize) -> Self {
        RandomPolicy { k, l }
    }
}

impl Policy for RandomPolicy {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel {
        random_carousel(self.k, self.l, &mut ctx.user_rng(user.user_id))
    }

    fn update_batch(&mut self, _batch: &[Feedback<'_>]) {}
}
