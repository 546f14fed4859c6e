//! Synthetic users and playlists with the same shape as the released data.
//!
//! Users are drawn around one Gaussian centroid per segment; arm weights
//! are Gaussian with a negative bias coefficient so that stream rates are
//! low, as on a real carousel.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Dataset;
use crate::domain::{ArmParameters, UserProfile};
use crate::error::{Error, Result};
use crate::rng::{substream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    /// Number of arms.
    pub k: usize,
    /// Number of segments.
    pub q: usize,
    /// Number of users.
    pub n: usize,
    /// Dimension including the bias coordinate.
    pub d: usize,
    pub seed: u64,
    /// Total standard deviation of segment centroids across latent
    /// coordinates (per coordinate: `centroid_scale / sqrt(d - 1)`).
    pub centroid_scale: f64,
    /// Same, for a user's offset from its centroid.
    pub user_scale: f64,
    /// Per-coordinate standard deviation of latent arm weights.
    pub theta_scale: f64,
    pub bias_mean: f64,
    pub bias_sd: f64,
}

impl SyntheticParams {
    pub fn new(k: usize, q: usize, n: usize, d: usize, seed: u64) -> Self {
        SyntheticParams {
            k,
            q,
            n,
            d,
            seed,
            centroid_scale: 1.0,
            user_scale: 0.5,
            theta_scale: 1.0,
            bias_mean: -4.5,
            bias_sd: 0.5,
        }
    }
}

fn normal(mean: f64, sd: f64) -> Result<Normal<f64>> {
    Normal::new(mean, sd).map_err(|e| Error::Config(format!("invalid normal({mean}, {sd}): {e}")))
}

/// Generates a dataset; identical parameters give identical data.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<Dataset> {
    let SyntheticParams {
        k, q, n, d, seed, ..
    } = *params;
    if d < 2 {
        return Err(Error::Config("d must be at least 2 (latent + bias)".into()));
    }
    if k == 0 || q == 0 || n == 0 {
        return Err(Error::Config("k, q and n must be positive".into()));
    }
    if q > n {
        return Err(Error::Config(format!(
            "q ({q}) exceeds the number of users ({n})"
        )));
    }
    let latent = d - 1;
    let per_coord = (latent as f64).sqrt();
    let centroid = normal(0.0, params.centroid_scale / per_coord)?;
    let offset = normal(0.0, params.user_scale / per_coord)?;
    let weight = normal(0.0, params.theta_scale)?;
    let bias = normal(params.bias_mean, params.bias_sd)?;

    let mut rng = substream(seed, StreamTag::Synthetic, &[0]);
    let centroids: Vec<Vec<f64>> = (0..q)
        .map(|_| (0..latent).map(|_| centroid.sample(&mut rng)).collect())
        .collect();

    let mut rng = substream(seed, StreamTag::Synthetic, &[1]);
    let users = (0..n)
        .map(|i| {
            // The first q users seed every segment so none is empty.
            let segment = if i < q { i } else { rng.random_range(0..q) };
            let mut features: Vec<f64> = centroids[segment]
                .iter()
                .map(|c| c + offset.sample(&mut rng))
                .collect();
            features.push(1.0);
            UserProfile {
                user_id: i as u64,
                features,
                segment,
            }
        })
        .collect();

    let mut rng = substream(seed, StreamTag::Synthetic, &[2]);
    let arms = (0..k)
        .map(|arm_id| {
            let mut theta: Vec<f64> = (0..latent).map(|_| weight.sample(&mut rng)).collect();
            theta.push(bias.sample(&mut rng));
            ArmParameters { arm_id, theta }
        })
        .collect();

    let ds = Dataset { users, arms, q };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{dot, sigmoid};

    #[test]
    fn shape() {
        let ds = generate_synthetic(&SyntheticParams::new(7, 5, 100, 4, 1)).unwrap();
        assert_eq!(ds.users.len(), 100);
        assert_eq!(ds.arms.len(), 7);
        assert!(ds
            .users
            .iter()
            .all(|u| u.segment < 5 && u.dim() == 4 && u.features[3] == 1.0));
        for s in 0..5 {
            assert!(ds.users.iter().any(|u| u.segment == s));
        }
    }

    #[test]
    fn deterministic() {
        let p = SyntheticParams::new(10, 3, 50, 5, 77);
        assert_eq!(
            generate_synthetic(&p).unwrap(),
            generate_synthetic(&p).unwrap()
        );
        let mut other = p.clone();
        other.seed = 78;
        assert_ne!(
            generate_synthetic(&p).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn realistic_stream_rates() {
        for (d, seed) in [(11, 0), (97, 1), (3, 2)] {
            let ds = generate_synthetic(&SyntheticParams::new(100, 20, 2000, d, seed)).unwrap();
            let mut total = 0.0;
            for u in &ds.users {
                for a in &ds.arms {
                    total += sigmoid(dot(&u.features, &a.theta));
                }
            }
            let mean = total / (ds.users.len() * ds.arms.len()) as f64;
            assert!((0.01..=0.15).contains(&mean), "d={d}: grand mean {mean}");
        }
    }

    /// The logit is Gaussian with variance
    /// `bias_sd^2 + theta_scale^2 (centroid_scale^2 + user_scale^2)`;
    /// its expected sigmoid is integrated numerically.
    #[test]
    fn grand_mean_matches_logit_integral() {
        let p = SyntheticParams::new(1000, 200, 2000, 11, 3);
        let var = p.bias_sd.powi(2)
            + p.theta_scale.powi(2) * (p.centroid_scale.powi(2) + p.user_scale.powi(2));
        let sd = var.sqrt();
        let steps = 20_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / steps as f64;
        let expected: f64 = (0..=steps)
            .map(|i| {
                let z = lo + i as f64 * h;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
                w * h * density / (1.0 + (-(p.bias_mean + sd * z)).exp())
            })
            .sum();
        let ds = generate_synthetic(&p).unwrap();
        let mut total = 0.0;
        for u in &ds.users {
            for a in &ds.arms {
                total += sigmoid(dot(&u.features, &a.theta));
            }
        }
        let mean = total / (ds.users.len() * ds.arms.len()) as f64;
        assert!(
            (mean / expected - 1.0).abs() < 0.15,
            "empirical {mean}, integral {expected}"
        );
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_synthetic(&SyntheticParams::new(5, 2, 10, 1, 0)).is_err());
        assert!(generate_synthetic(&SyntheticParams::new(5, 20, 10, 3, 0)).is_err());
        assert!(generate_synthetic(&SyntheticParams::new(0, 2, 10, 3, 0)).is_err());
    }
}
