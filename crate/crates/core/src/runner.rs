//! The offline evaluation protocol.
//!
//! Each round draws one batch of users shared by every policy. Each policy
//! recommends a carousel to every user, the users browse, and the policy's
//! expected regret for the round is accumulated. Only once the whole batch
//! has been served does the policy receive its observations.
//!
//! Browsing draws are keyed by (round, user) only. Policy draws are keyed by
//! policy family name, so a policy and its `-no-cascade` twin serve
//! identical carousels in round one and only diverge through what they
//! learn.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::data::{
    format_float, generate_synthetic, load_arms, load_users, Dataset, SyntheticParams,
};
use crate::domain::{Carousel, RoundObservation, SimulationConfig, UserProfile};
use crate::environment::{
    carousel_value, observe, sample_round_indices, simulate_browse, GroundTruth, OptimalValueCache,
};
use crate::error::{Error, Result};
use crate::policies::{Feedback, Policy, PolicyId, RoundContext};
use crate::rng::{stable_hash, substream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Files { users: PathBuf, arms: PathBuf },
    Synthetic(SyntheticParams),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Files { users, arms } => {
                Dataset::new(load_users(users)?, load_arms(arms)?)
            }
            DatasetSource::Synthetic(p) => generate_synthetic(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub simulation: SimulationConfig,
    pub policies: Vec<PolicyId>,
    pub source: DatasetSource,
    /// Trajectories file; a manifest is written next to it.
    pub output: Option<PathBuf>,
}

/// Expected regret of one policy, round by round.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrajectory {
    pub policy: String,
    pub per_round: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Realised streams per round, a diagnostic only.
    pub streams: Vec<u64>,
    /// Segments still exploring after each round's update, for policies
    /// that report it.
    pub exploring_segments: Vec<Option<usize>>,
}

impl RegretTrajectory {
    fn new(policy: String) -> Self {
        RegretTrajectory {
            policy,
            per_round: Vec::new(),
            cumulative: Vec::new(),
            streams: Vec::new(),
            exploring_segments: Vec::new(),
        }
    }

    fn push(&mut self, regret: f64) {
        let total = self.final_regret() + regret;
        self.per_round.push(regret);
        self.cumulative.push(total);
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn n_rounds(&self) -> usize {
        self.per_round.len()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub trajectories: Vec<RegretTrajectory>,
    pub wall_clock: Duration,
}

/// Loads the configured dataset and runs the experiment, writing results
/// when an output path is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dataset = config.source.load()?;
    let output = run_with_dataset(&config.simulation, &config.policies, &dataset)?;
    if let Some(path) = &config.output {
        write_trajectories(&output.trajectories, path)?;
        write_manifest(&manifest_path(path), config, &output)?;
    }
    Ok(output)
}

fn check_dataset(sim: &SimulationConfig, dataset: &Dataset) -> Result<()> {
    if dataset.arms.len() != sim.k {
        return Err(Error::Config(format!(
            "config has k = {} but the dataset has {} arms",
            sim.k,
            dataset.arms.len()
        )));
    }
    if dataset.dim() != sim.d {
        return Err(Error::DimensionMismatch {
            expected: sim.d,
            found: dataset.dim(),
        });
    }
    if dataset.q > sim.q {
        return Err(Error::Config(format!(
            "config has q = {} but the dataset uses {} segments",
            sim.q, dataset.q
        )));
    }
    if sim.n_users_per_round > dataset.users.len() {
        return Err(Error::TooManyUsers {
            requested: sim.n_users_per_round,
            available: dataset.users.len(),
        });
    }
    Ok(())
}

struct Contender {
    id: PolicyId,
    key: u64,
    policy: Box<dyn Policy>,
    trajectory: RegretTrajectory,
}

/// Runs every policy on the same rounds of `dataset`.
pub fn run_with_dataset(
    sim: &SimulationConfig,
    policies: &[PolicyId],
    dataset: &Dataset,
) -> Result<ExperimentOutput> {
    let start = Instant::now();
    sim.validate()?;
    check_dataset(sim, dataset)?;
    if policies.is_empty() {
        return Err(Error::Config("at least one policy is required".into()));
    }
    for (i, p) in policies.iter().enumerate() {
        if policies[..i].contains(p) {
            return Err(Error::Config(format!("policy `{p}` listed twice")));
        }
    }

    let truth = GroundTruth::new(dataset.users.clone(), dataset.arms.clone())?;
    let optimal = OptimalValueCache::new(&truth, sim.l);
    let mut contenders: Vec<Contender> = policies
        .iter()
        .map(|&id| Contender {
            id,
            key: stable_hash(id.kind.as_str()),
            policy: id.build(sim.k, sim.l, sim.q, sim.d),
            trajectory: RegretTrajectory::new(id.to_string()),
        })
        .collect();

    for round in 1..=sim.n_rounds as u64 {
        let indices = sample_round_indices(
            &truth,
            sim.n_users_per_round,
            &mut substream(sim.seed, StreamTag::UserSample, &[round]),
        )?;
        let users: Vec<&UserProfile> = indices.iter().map(|&i| &truth.users()[i]).collect();
        for c in contenders.iter_mut() {
            let ctx = RoundContext {
                seed: sim.seed,
                policy_key: c.key,
                round,
            };
            let carousels = c.policy.recommend_batch(&users, &ctx);
            let served = serve_round(&truth, &optimal, sim, &indices, carousels, c, round);
            let regret: f64 = served.iter().map(|s| s.regret).sum();
            let streams: u64 = served.iter().map(|s| s.streams).sum();
            let feedback: Vec<Feedback<'_>> = users
                .iter()
                .zip(&served)
                .map(|(u, s)| Feedback {
                    user: u,
                    observation: &s.observation,
                })
                .collect();
            c.policy.update_batch(&feedback);
            c.trajectory.push(regret);
            c.trajectory.streams.push(streams);
            c.trajectory
                .exploring_segments
                .push(c.policy.exploring_segments());
        }
        if log::log_enabled!(log::Level::Info) {
            let mut line = format!("round {round}/{}", sim.n_rounds);
            for c in &contenders {
                let _ = write!(line, "  {}={:.1}", c.id, c.trajectory.final_regret());
            }
            log::info!("{line}");
        }
    }

    Ok(ExperimentOutput {
        trajectories: contenders.into_iter().map(|c| c.trajectory).collect(),
        wall_clock: start.elapsed(),
    })
}

struct Served {
    observation: RoundObservation,
    regret: f64,
    streams: u64,
}

fn serve_round(
    truth: &GroundTruth,
    optimal: &OptimalValueCache,
    sim: &SimulationConfig,
    indices: &[usize],
    carousels: Vec<Carousel>,
    contender: &Contender,
    round: u64,
) -> Vec<Served> {
    indices
        .par_iter()
        .zip(carousels)
        .map(|(&i, carousel)| {
            let user = &truth.users()[i];
            // Shared by all policies: a user shown the same carousel browses
            // identically whichever policy chose it.
            let mut rng = substream(sim.seed, StreamTag::Browse, &[round, user.user_id]);
            let outcome = simulate_browse(truth, user, &carousel, sim, &mut rng);
            let regret = (optimal.get(truth, i) - carousel_value(user, truth, &carousel)).max(0.0);
            let streams = outcome.streams.len() as u64;
            let observation = observe(user, &carousel, &outcome, sim.l_init, contender.id.cascade);
            Served {
                observation,
                regret,
                streams,
            }
        })
        .collect()
}

const TRAJECTORY_HEADER: &str = "policy_id,round,round_regret,cumulative_regret";

/// One row per (policy, round), rounds 1-based.
pub fn write_trajectories(trajectories: &[RegretTrajectory], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let body = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for t in trajectories {
            for (r, (x, c)) in t.per_round.iter().zip(&t.cumulative).enumerate() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    t.policy,
                    r + 1,
                    format_float(*x),
                    format_float(*c)
                )?;
            }
        }
        w.flush()
    };
    body(&mut w).map_err(|e| Error::io(path, e))
}

/// Reads a trajectories file back, keeping policies in first-seen order.
pub fn read_trajectories(path: impl AsRef<Path>) -> Result<Vec<RegretTrajectory>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out: Vec<RegretTrajectory> = Vec::new();
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let n = i + 1;
        if n == 1 {
            if line.trim() != TRAJECTORY_HEADER {
                return Err(bad(n, format!("expected header `{TRAJECTORY_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(bad(n, format!("expected 4 columns, found {}", cells.len())));
        }
        let round: usize = cells[1]
            .parse()
            .map_err(|_| bad(n, "invalid round".into()))?;
        let regret: f64 = cells[2]
            .parse()
            .map_err(|_| bad(n, "invalid regret".into()))?;
        let cumulative: f64 = cells[3]
            .parse()
            .map_err(|_| bad(n, "invalid cumulative".into()))?;
        let t = match out.iter().position(|t| t.policy == cells[0]) {
            Some(p) => &mut out[p],
            None => {
                out.push(RegretTrajectory::new(cells[0].to_string()));
                out.last_mut().unwrap()
            }
        };
        if round != t.per_round.len() + 1 {
            return Err(bad(
                n,
                format!("round {round} out of sequence for {}", t.policy),
            ));
        }
        t.per_round.push(regret);
        t.cumulative.push(cumulative);
    }
    Ok(out)
}

/// `<output>.manifest.txt`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.txt");
    PathBuf::from(s)
}

/// Plain-text run record: seed, configuration echo, policies, wall-clock
/// time and per-policy diagnostics.
pub fn write_manifest(
    path: &Path,
    config: &ExperimentConfig,
    output: &ExperimentOutput,
) -> Result<()> {
    let sim = &config.simulation;
    let mut m = String::new();
    let _ = writeln!(m, "seed = {}", sim.seed);
    let _ = writeln!(m, "k = {}", sim.k);
    let _ = writeln!(m, "l = {}", sim.l);
    let _ = writeln!(m, "l_init = {}", sim.l_init);
    let _ = writeln!(m, "q = {}", sim.q);
    let _ = writeln!(m, "d = {}", sim.d);
    let _ = writeln!(m, "users_per_round = {}", sim.n_users_per_round);
    let _ = writeln!(m, "rounds = {}", sim.n_rounds);
    let _ = writeln!(m, "gamma = {}", sim.gamma);
    let _ = writeln!(m, "display_mode = {}", sim.display_mode.as_str());
    match &config.source {
        DatasetSource::Files { users, arms } => {
            let _ = writeln!(m, "users_file = {}", users.display());
            let _ = writeln!(m, "arms_file = {}", arms.display());
        }
        DatasetSource::Synthetic(p) => {
            let _ = writeln!(
                m,
                "synthetic = k={} q={} n={} d={} seed={}",
                p.k, p.q, p.n, p.d, p.seed
            );
        }
    }
    let ids: Vec<String> = config.policies.iter().map(|p| p.to_string()).collect();
    let _ = writeln!(m, "policies = {}", ids.join(","));
    let _ = writeln!(m, "paired_user_batches = true");
    let _ = writeln!(m, "regret = expected");
    let _ = writeln!(
        m,
        "wall_clock_seconds = {:.3}",
        output.wall_clock.as_secs_f64()
    );
    for t in &output.trajectories {
        let streams: u64 = t.streams.iter().sum();
        let _ = writeln!(m, "streams[{}] = {}", t.policy, streams);
    }
    std::fs::write(path, m).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DisplayMode;
    use crate::policies::PolicyKind;

    fn sim(k: usize, q: usize, d: usize, users: usize, rounds: usize) -> SimulationConfig {
        SimulationConfig {
            k,
            l: 3,
            l_init: 2,
            q,
            d,
            n_users_per_round: users,
            n_rounds: rounds,
            gamma: 0.8,
            seed: 5,
            display_mode: DisplayMode::CascadeBrowse,
        }
    }

    fn tiny() -> Dataset {
        generate_synthetic(&SyntheticParams::new(8, 2, 40, 3, 1)).unwrap()
    }

    #[test]
    fn single_random_round() {
        let out = run_with_dataset(
            &sim(8, 2, 3, 10, 1),
            &[PolicyId::new(PolicyKind::Random, true)],
            &tiny(),
        )
        .unwrap();
        assert_eq!(out.trajectories.len(), 1);
        assert_eq!(out.trajectories[0].n_rounds(), 1);
        assert!(out.trajectories[0].per_round[0] >= 0.0);
    }

    #[test]
    fn rejects_mismatched_config() {
        let p = [PolicyId::new(PolicyKind::Random, true)];
        assert!(run_with_dataset(&sim(9, 2, 3, 10, 1), &p, &tiny()).is_err());
        assert!(run_with_dataset(&sim(8, 2, 4, 10, 1), &p, &tiny()).is_err());
        assert!(run_with_dataset(&sim(8, 1, 3, 10, 1), &p, &tiny()).is_err());
        assert!(run_with_dataset(&sim(8, 2, 3, 41, 1), &p, &tiny()).is_err());
        assert!(run_with_dataset(&sim(8, 2, 3, 10, 1), &[], &tiny()).is_err());
        assert!(run_with_dataset(&sim(8, 2, 3, 10, 1), &[p[0], p[0]], &tiny()).is_err());
    }

    #[test]
    fn cumulative_is_prefix_sum_and_monotone() {
        let ids: Vec<PolicyId> = PolicyKind::ALL
            .iter()
            .map(|&k| PolicyId::new(k, true))
            .collect();
        let out = run_with_dataset(&sim(8, 2, 3, 20, 6), &ids, &tiny()).unwrap();
        for t in &out.trajectories {
            let mut acc = 0.0;
            for (r, c) in t.per_round.iter().zip(&t.cumulative) {
                assert!(*r >= 0.0);
                acc += r;
                assert_eq!(acc, *c);
            }
        }
    }

    #[test]
    fn trajectories_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = RegretTrajectory::new("random".into());
        for x in [0.1, 2.0 / 3.0, 1e-300] {
            t.push(x);
        }
        write_trajectories(std::slice::from_ref(&t), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        let back = read_trajectories(&path).unwrap();
        assert_eq!(back[0].per_round, t.per_round);
        assert_eq!(back[0].cumulative, t.cumulative);
    }
}
