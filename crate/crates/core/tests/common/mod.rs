#![allow(dead_code)]

use carousel_bandit::data::Dataset;
use carousel_bandit::domain::{ArmParameters, UserProfile};

/// Hand-set display-to-stream probabilities, users x arms.
pub const HAND_P: [[f64; 5]; 3] = [
    [0.60, 0.05, 0.30, 0.10, 0.45],
    [0.02, 0.70, 0.20, 0.55, 0.01],
    [0.25, 0.25, 0.90, 0.05, 0.40],
];

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Realises `p` exactly: user `u` is one-hot on coordinate `u` plus a bias,
/// arm `i` carries `logit(p[u][i])` on coordinate `u`.
pub fn dataset_from_probabilities(p: &[[f64; 5]], segments: &[usize]) -> Dataset {
    let n = p.len();
    let users = (0..n)
        .map(|u| {
            let mut features = vec![0.0; n + 1];
            features[u] = 1.0;
            features[n] = 1.0;
            UserProfile {
                user_id: u as u64,
                features,
                segment: segments[u],
            }
        })
        .collect();
    let arms = (0..5)
        .map(|i| {
            let mut theta: Vec<f64> = (0..n).map(|u| logit(p[u][i])).collect();
            theta.push(0.0);
            ArmParameters { arm_id: i, theta }
        })
        .collect();
    Dataset::new(users, arms).unwrap()
}

/// Every `l`-subset of `0..k`.
pub fn subsets(k: usize, l: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, k: usize, l: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == l {
            out.push(cur.clone());
            return;
        }
        for i in start..k {
            cur.push(i);
            rec(i + 1, k, l, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, k, l, &mut Vec::new(), &mut out);
    out
}

/// Regret of a uniformly random `l`-subset, averaged by enumeration.
pub fn random_policy_regret(p: &[[f64; 5]], l: usize) -> f64 {
    let sets = subsets(5, l);
    p.iter()
        .map(|row| {
            let best = sets
                .iter()
                .map(|s| s.iter().map(|&i| row[i]).sum::<f64>())
                .fold(f64::MIN, f64::max);
            let avg = sets
                .iter()
                .map(|s| s.iter().map(|&i| row[i]).sum::<f64>())
                .sum::<f64>()
                / sets.len() as f64;
            best - avg
        })
        .sum()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
