//! `carousel-bandit` command line: simulate, generate-data, cluster, report.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    generate_synthetic, kmeans_segment, load_users, write_arms, write_users, SyntheticParams,
};
use crate::domain::{DisplayMode, SimulationConfig};
use crate::error::{Error, Result};
use crate::policies::parse_policy_list;
use crate::runner::{
    manifest_path, read_trajectories, run_with_dataset, write_manifest, write_trajectories,
    DatasetSource, ExperimentConfig, RegretTrajectory,
};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "CAROUSEL_BANDIT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "carousel-bandit",
    version,
    about = "Carousel personalization bandit simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run policies through the simulated rounds and write regret trajectories.
    Simulate(SimulateArgs),
    /// Write a synthetic users file and arms file.
    GenerateData(GenerateArgs),
    /// Re-segment a users file with k-means.
    Cluster(ClusterArgs),
    /// Rank policies by final cumulative regret.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Users file (user_id,segment,features...).
    #[arg(long, requires = "arms", conflicts_with = "synthetic")]
    pub users: Option<PathBuf>,
    /// Arms file (arm_id,weights...).
    #[arg(long, requires = "users")]
    pub arms: Option<PathBuf>,
    /// Generate a synthetic world instead of loading files: K,Q,N,D.
    #[arg(long, value_name = "K,Q,N,D")]
    pub synthetic: Option<String>,
    /// Comma-separated policy ids.
    #[arg(long)]
    pub policies: String,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long, default_value_t = 20_000)]
    pub users_per_round: usize,
    /// Carousel length.
    #[arg(long, default_value_t = 12)]
    pub l: usize,
    /// Cards visible without swiping.
    #[arg(long, default_value_t = 3)]
    pub l_init: usize,
    /// Probability of swiping one card further past the initial cards.
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Browsing model: cascade-browse or full-display.
    #[arg(long, default_value = "cascade-browse")]
    pub display_mode: DisplayMode,
    /// Trajectories file; the manifest goes to <output>.manifest.txt.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 862)]
    pub k: usize,
    #[arg(long, default_value_t = 100)]
    pub q: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    /// Dimension including the bias coordinate.
    #[arg(long, default_value_t = 97)]
    pub d: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub users_out: PathBuf,
    #[arg(long)]
    pub arms_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub users: PathBuf,
    /// Number of segments.
    #[arg(long, default_value_t = 100)]
    pub q: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the re-segmented users; defaults to rewriting --users.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trajectories file written by `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Also write cumulative regret per round, one column per policy.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// human-readable output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::GenerateData(a) => cmd_generate_data(&a, out),
        Command::Cluster(a) => cmd_cluster(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn parse_synthetic(spec: &str, seed: u64) -> Result<SyntheticParams> {
    let parts: Vec<usize> = spec
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--synthetic expects K,Q,N,D, got `{spec}`")))?;
    match parts[..] {
        [k, q, n, d] => Ok(SyntheticParams::new(k, q, n, d, seed)),
        _ => Err(Error::Config(format!(
            "--synthetic expects K,Q,N,D, got `{spec}`"
        ))),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let policies = parse_policy_list(&args.policies)?;
    let source = match (&args.users, &args.arms, &args.synthetic) {
        (Some(users), Some(arms), None) => DatasetSource::Files {
            users: users.clone(),
            arms: arms.clone(),
        },
        (None, None, Some(spec)) => DatasetSource::Synthetic(parse_synthetic(spec, args.seed)?),
        _ => {
            return Err(Error::Config(
                "give either --users and --arms, or --synthetic K,Q,N,D".into(),
            ))
        }
    };
    let dataset = source.load()?;
    let simulation = SimulationConfig {
        k: dataset.arms.len(),
        l: args.l,
        l_init: args.l_init,
        q: dataset.q,
        d: dataset.dim(),
        n_users_per_round: args.users_per_round,
        n_rounds: args.rounds,
        gamma: args.gamma,
        seed: args.seed,
        display_mode: args.display_mode,
    };
    let config = ExperimentConfig {
        simulation,
        policies,
        source,
        output: Some(args.output.clone()),
    };
    let output = run_with_dataset(&config.simulation, &config.policies, &dataset)?;
    write_trajectories(&output.trajectories, &args.output)?;
    write_manifest(&manifest_path(&args.output), &config, &output)?;
    print_ranking(&output.trajectories, out)?;
    writeln!(out, "wrote {}", args.output.display()).map_err(io_err)
}

pub fn cmd_generate_data(args: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let ds = generate_synthetic(&SyntheticParams::new(
        args.k, args.q, args.n, args.d, args.seed,
    ))?;
    write_users(&args.users_out, &ds.users)?;
    write_arms(&args.arms_out, &ds.arms)?;
    writeln!(
        out,
        "wrote {} users to {} and {} arms to {}",
        ds.users.len(),
        args.users_out.display(),
        ds.arms.len(),
        args.arms_out.display()
    )
    .map_err(io_err)
}

pub fn cmd_cluster(args: &ClusterArgs, out: &mut dyn Write) -> Result<()> {
    let mut users = load_users(&args.users)?;
    let result = kmeans_segment(&users, args.q, args.max_iters, args.seed)?;
    for (u, s) in users.iter_mut().zip(&result.assignments) {
        u.segment = *s;
    }
    let target: &Path = args.output.as_deref().unwrap_or(&args.users);
    write_users(target, &users)?;
    writeln!(
        out,
        "clustered {} users into {} segments (inertia {:.6e}, {} iterations); wrote {}",
        users.len(),
        args.q,
        result.inertia(),
        result.iterations,
        target.display()
    )
    .map_err(io_err)
}

/// Policies sorted by ascending final cumulative regret.
pub fn ranking(trajectories: &[RegretTrajectory]) -> Vec<(&str, f64)> {
    let mut rows: Vec<(&str, f64)> = trajectories
        .iter()
        .map(|t| (t.policy.as_str(), t.final_regret()))
        .collect();
    rows.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    rows
}

fn print_ranking(trajectories: &[RegretTrajectory], out: &mut dyn Write) -> Result<()> {
    let rows = ranking(trajectories);
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(6).max(6);
    writeln!(
        out,
        "{:>4}  {:<width$}  {:>18}",
        "rank", "policy", "final_regret"
    )
    .map_err(io_err)?;
    for (i, (p, r)) in rows.iter().enumerate() {
        writeln!(out, "{:>4}  {:<width$}  {:>18.4}", i + 1, p, r).map_err(io_err)?;
    }
    Ok(())
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let trajectories = read_trajectories(&args.input)?;
    print_ranking(&trajectories, out)?;
    if let Some(path) = &args.plot_data {
        write_plot_data(&trajectories, path)?;
        writeln!(out, "wrote {}", path.display()).map_err(io_err)?;
    }
    Ok(())
}

/// `round,<policy>,...` rows of cumulative regret.
pub fn write_plot_data(trajectories: &[RegretTrajectory], path: &Path) -> Result<()> {
    let rounds = trajectories.iter().map(|t| t.n_rounds()).max().unwrap_or(0);
    let mut text = String::from("round");
    for t in trajectories {
        text.push(',');
        text.push_str(&t.policy);
    }
    text.push('\n');
    for r in 0..rounds {
        text.push_str(&(r + 1).to_string());
        for t in trajectories {
            text.push(',');
            if let Some(c) = t.cumulative.get(r) {
                text.push_str(&crate::data::format_float(*c));
            }
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
