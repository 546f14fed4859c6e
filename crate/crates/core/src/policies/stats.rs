use super::Feedback;

/// Seen-display and stream counters per (segment, arm).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentArmStats {
    q: usize,
    k: usize,
    displays: Vec<u64>,
    successes: Vec<u64>,
}

impl SegmentArmStats {
    pub fn new(q: usize, k: usize) -> Self {
        SegmentArmStats {
            q,
            k,
            displays: vec![0; q * k],
            successes: vec![0; q * k],
        }
    }

    pub fn n_segments(&self) -> usize {
        self.q
    }

    pub fn n_arms(&self) -> usize {
        self.k
    }

    #[inline]
    fn idx(&self, segment: usize, arm: usize) -> usize {
        debug_assert!(segment < self.q && arm < self.k);
        segment * self.k + arm
    }

    pub fn displays(&self, segment: usize, arm: usize) -> u64 {
        self.displays[self.idx(segment, arm)]
    }

    pub fn successes(&self, segment: usize, arm: usize) -> u64 {
        self.successes[self.idx(segment, arm)]
    }

    pub fn record(&mut self, segment: usize, arm: usize, streamed: bool) {
        let i = self.idx(segment, arm);
        self.displays[i] += 1;
        self.successes[i] += u64::from(streamed);
    }

    /// Adds every seen slot of the batch; unseen slots are ignored.
    pub fn record_batch(&mut self, batch: &[Feedback<'_>]) {
        for fb in batch {
            for (arm, streamed) in fb.observation.seen_events() {
                self.record(fb.user.segment, arm, streamed);
            }
        }
    }

    /// Empirical stream rate, 0 for arms never seen.
    pub fn mean(&self, segment: usize, arm: usize) -> f64 {
        let i = self.idx(segment, arm);
        match self.displays[i] {
            0 => 0.0,
            d => self.successes[i] as f64 / d as f64,
        }
    }

    pub fn means(&self, segment: usize) -> Vec<f64> {
        (0..self.k).map(|a| self.mean(segment, a)).collect()
    }

    pub fn min_displays(&self, segment: usize) -> u64 {
        let row = segment * self.k;
        self.displays[row..row + self.k]
            .iter()
            .copied()
            .min()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters() {
        let mut s = SegmentArmStats::new(2, 3);
        s.record(1, 2, true);
        s.record(1, 2, false);
        s.record(0, 0, false);
        assert_eq!(s.displays(1, 2), 2);
        assert_eq!(s.successes(1, 2), 1);
        assert_eq!(s.mean(1, 2), 0.5);
        assert_eq!(s.mean(1, 0), 0.0);
        assert_eq!(s.min_displays(1), 0);
        assert_eq!(s.means(0), vec![0.0, 0.0, 0.0]);
    }
}
