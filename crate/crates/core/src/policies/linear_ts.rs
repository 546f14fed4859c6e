//! Contextual Thompson sampling with per-arm Bayesian logistic regression.
//!
//! Each arm keeps a diagonal Gaussian posterior over its weight vector. At
//! the end of a round the posterior mean is moved toward the minimiser of
//! the regularised logistic loss over the round's seen events by at most
//! [`MAX_ITERATIONS`] gradient steps, and the diagonal precision grows by the
//! loss curvature at the new mean (diagonal Laplace approximation).

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Feedback, Policy, RoundContext};
use crate::domain::{dot, select_top_l, sigmoid, Carousel, UserProfile};

/// Iteration cap of the mode search.
pub const MAX_ITERATIONS: usize = 50;
/// Euclidean gradient norm at which the mode search stops.
pub const GRADIENT_TOLERANCE: f64 = 1e-6;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;
const MAX_STEP: f64 = 1e6;

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Negative log posterior of one arm's weights after a batch:
///
/// `0.5 * sum_j q_j (theta_j - m_j)^2 + sum_e ln(1 + exp(-y_e x_e . theta))`
///
/// with `y_e` in {-1, +1}.
#[derive(Debug, Clone)]
pub struct LaplaceObjective<'a> {
    prior_mean: &'a [f64],
    prior_precision: &'a [f64],
    events: Vec<(&'a [f64], f64)>,
}

/// Result of a mode search.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSearch {
    pub theta: Vec<f64>,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl<'a> LaplaceObjective<'a> {
    pub fn new(prior_mean: &'a [f64], prior_precision: &'a [f64]) -> Self {
        assert_eq!(prior_mean.len(), prior_precision.len());
        LaplaceObjective {
            prior_mean,
            prior_precision,
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, features: &'a [f64], streamed: bool) {
        debug_assert_eq!(features.len(), self.prior_mean.len());
        self.events
            .push((features, if streamed { 1.0 } else { -1.0 }));
    }

    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn dim(&self) -> usize {
        self.prior_mean.len()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let prior: f64 = theta
            .iter()
            .zip(self.prior_mean)
            .zip(self.prior_precision)
            .map(|((t, m), q)| 0.5 * q * (t - m) * (t - m))
            .sum();
        let loss: f64 = self
            .events
            .iter()
            .map(|(x, y)| softplus(-y * dot(x, theta)))
            .sum();
        prior + loss
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = theta
            .iter()
            .zip(self.prior_mean)
            .zip(self.prior_precision)
            .map(|((t, m), q)| q * (t - m))
            .collect();
        for (x, y) in &self.events {
            let w = -y * sigmoid(-y * dot(x, theta));
            for (gj, xj) in g.iter_mut().zip(x.iter()) {
                *gj += w * xj;
            }
        }
        g
    }

    /// Full-batch gradient descent from `start` with Armijo backtracking.
    /// Each iteration first tries twice the previously accepted step.
    pub fn minimize(&self, start: &[f64]) -> ModeSearch {
        let mut theta = start.to_vec();
        let mut f = self.value(&theta);
        let mut g = self.gradient(&theta);
        let mut gnorm = norm(&g);
        let mut iterations = 0;
        let mut step = 1.0_f64;
        while gnorm > GRADIENT_TOLERANCE && iterations < MAX_ITERATIONS {
            iterations += 1;
            let slope = -gnorm * gnorm;
            step = (2.0 * step).min(MAX_STEP);
            let mut accepted = None;
            while step >= MIN_STEP {
                let trial: Vec<f64> = theta.iter().zip(&g).map(|(t, gj)| t - step * gj).collect();
                let ft = self.value(&trial);
                if ft <= f + ARMIJO_C * step * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                step *= 0.5;
            }
            // No representable decrease left: the iterate is as good as it gets.
            let Some((trial, ft)) = accepted else { break };
            theta = trial;
            f = ft;
            g = self.gradient(&theta);
            gnorm = norm(&g);
        }
        ModeSearch {
            theta,
            gradient_norm: gnorm,
            iterations,
            converged: gnorm <= GRADIENT_TOLERANCE,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Diagnostics of one batch update.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub arms_updated: usize,
    pub non_converged: usize,
    pub max_gradient_norm: f64,
}

/// Per-arm diagonal Gaussian posteriors over logistic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearArmPosterior {
    dim: usize,
    k: usize,
    mean: Vec<f64>,
    precision: Vec<f64>,
    // Kept in sync with `precision`; used on the sampling hot path.
    variance: Vec<f64>,
}

impl LinearArmPosterior {
    /// Every arm starts at `prior_mean` with precision `prior_precision` on
    /// each coordinate.
    pub fn new(k: usize, prior_mean: &[f64], prior_precision: f64) -> Self {
        assert!(prior_precision > 0.0, "prior precision must be positive");
        let dim = prior_mean.len();
        LinearArmPosterior {
            dim,
            k,
            mean: prior_mean.repeat(k),
            precision: vec![prior_precision; k * dim],
            variance: vec![1.0 / prior_precision; k * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_arms(&self) -> usize {
        self.k
    }

    pub fn mean(&self, arm: usize) -> &[f64] {
        &self.mean[arm * self.dim..(arm + 1) * self.dim]
    }

    pub fn precision(&self, arm: usize) -> &[f64] {
        &self.precision[arm * self.dim..(arm + 1) * self.dim]
    }

    /// Overwrites one arm's posterior.
    pub fn set_arm(&mut self, arm: usize, mean: &[f64], precision: &[f64]) {
        assert!(precision.iter().all(|&q| q > 0.0));
        let r = arm * self.dim..(arm + 1) * self.dim;
        self.mean[r.clone()].copy_from_slice(mean);
        self.precision[r.clone()].copy_from_slice(precision);
        for (v, q) in self.variance[r].iter_mut().zip(precision) {
            *v = 1.0 / q;
        }
    }

    /// One Thompson draw per arm of `sigmoid(x . theta~)` with
    /// `theta~ ~ N(m_i, diag(1 / q_i))`.
    ///
    /// `x . theta~` is Gaussian with mean `x . m_i` and variance
    /// `sum_j x_j^2 / q_ij`, so it is drawn directly as a scalar.
    pub fn sample_scores<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Vec<f64> {
        debug_assert_eq!(features.len(), self.dim);
        self.mean
            .chunks_exact(self.dim)
            .zip(self.variance.chunks_exact(self.dim))
            .map(|(m, v)| {
                let mut mu = 0.0;
                let mut var = 0.0;
                for ((x, mj), vj) in features.iter().zip(m).zip(v) {
                    mu += x * mj;
                    var += x * x * vj;
                }
                let z: f64 = rng.sample(StandardNormal);
                sigmoid(mu + var.sqrt() * z)
            })
            .collect()
    }

    /// Laplace update from `(arm, features, streamed)` events. Arms without
    /// events are left untouched.
    pub fn update<'a>(
        &mut self,
        events: impl IntoIterator<Item = (usize, &'a [f64], bool)>,
    ) -> UpdateReport {
        let mut per_arm: Vec<Vec<(&[f64], bool)>> = vec![Vec::new(); self.k];
        for (arm, x, y) in events {
            per_arm[arm].push((x, y));
        }
        let touched: Vec<usize> = (0..self.k).filter(|&a| !per_arm[a].is_empty()).collect();
        let results: Vec<(usize, Vec<f64>, Vec<f64>, ModeSearch)> = touched
            .par_iter()
            .map(|&arm| {
                let prior_mean = self.mean(arm);
                let prior_precision = self.precision(arm);
                let mut objective = LaplaceObjective::new(prior_mean, prior_precision);
                for &(x, y) in &per_arm[arm] {
                    objective.push(x, y);
                }
                let search = objective.minimize(prior_mean);
                let mut precision = prior_precision.to_vec();
                for &(x, _) in &per_arm[arm] {
                    let s = sigmoid(dot(x, &search.theta));
                    let w = s * (1.0 - s);
                    for (qj, xj) in precision.iter_mut().zip(x) {
                        *qj += w * xj * xj;
                    }
                }
                (arm, search.theta.clone(), precision, search)
            })
            .collect();

        let mut report = UpdateReport::default();
        for (arm, mean, precision, search) in results {
            report.arms_updated += 1;
            report.max_gradient_norm = report.max_gradient_norm.max(search.gradient_norm);
            if !search.converged {
                report.non_converged += 1;
            }
            self.set_arm(arm, &mean, &precision);
        }
        report
    }
}

/// Linear Thompson sampling over all arms, personalised by user features.
#[derive(Debug, Clone)]
pub struct LinearThompson {
    l: usize,
    posterior: LinearArmPosterior,
    last_report: UpdateReport,
    warned: bool,
}

impl LinearThompson {
    pub fn new(l: usize, posterior: LinearArmPosterior) -> Self {
        LinearThompson {
            l,
            posterior,
            last_report: UpdateReport::default(),
            warned: false,
        }
    }

    /// Prior mean 0 and precision 1 on every coordinate.
    pub fn naive(k: usize, l: usize, d: usize) -> Self {
        Self::new(l, LinearArmPosterior::new(k, &vec![0.0; d], 1.0))
    }

    /// Like [`LinearThompson::naive`] but with bias (last coordinate) prior
    /// mean -5.
    pub fn pessimistic(k: usize, l: usize, d: usize) -> Self {
        let mut m = vec![0.0; d];
        if let Some(b) = m.last_mut() {
            *b = -5.0;
        }
        Self::new(l, LinearArmPosterior::new(k, &m, 1.0))
    }

    pub fn posterior(&self) -> &LinearArmPosterior {
        &self.posterior
    }

    pub fn last_report(&self) -> &UpdateReport {
        &self.last_report
    }
}

impl Policy for LinearThompson {
    fn recommend(&self, user: &UserProfile, ctx: &RoundContext) -> Carousel {
        let mut rng = ctx.user_rng(user.user_id);
        let scores = self.posterior.sample_scores(&user.features, &mut rng);
        select_top_l(&scores, self.l, &mut rng).expect("l is at most k")
    }

    fn update_batch(&mut self, batch: &[Feedback<'_>]) {
        let events = batch.iter().flat_map(|fb| {
            fb.observation
                .seen_events()
                .map(move |(arm, y)| (arm, fb.user.features.as_slice(), y))
        });
        let report = self.posterior.update(events);
        if report.non_converged > 0 {
            // Routine on large batches; reported loudly once per policy.
            let level = if self.warned {
                log::Level::Debug
            } else {
                log::Level::Warn
            };
            self.warned = true;
            log::log!(
                level,
                "ts-lin mode search stopped above the gradient tolerance for {} of {} arms \
                 (max gradient norm {:.3e})",
                report.non_converged,
                report.arms_updated,
                report.max_gradient_norm
            );
        }
        self.last_report = report;
    }
}
