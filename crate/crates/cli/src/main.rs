//! Command-line front end for the maximum-dissimilarity ball toolkit.
//!
//! Every subcommand accepts `--config file.json` holding the same fields as
//! its flags (unknown keys are rejected); flags on the command line are
//! ignored when a config file is given. All randomness derives from a single
//! `--seed`, so repeated runs produce byte-identical outputs.
//!
//! Exit codes: 0 on success, 1 on numerical failure (non-convergent or
//! ill-conditioned fits), 2 on bad input (malformed files, invalid options).

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use maxdissim::basis::ParamSurface;
use maxdissim::dissimilarity::{
    self, solve_bmd, solve_bmd_posterior, solve_bmmd, solve_hl_bmd, CdfEvaluator,
    DissimilarityObjective, OptConfig, PosteriorSolveOptions, ScalarizedObjective, SolveError,
};
use maxdissim::geometry::{GeometryError, GroundSet};
use maxdissim::inference::{
    self, CoefficientPosterior, InferenceError, ObservedData,
};
use maxdissim::io::{self as mdio, IoError};
use maxdissim::metrics::{self, McScenario, MetricsError, MonteCarloConfig};
use maxdissim::rng::subseed;
use maxdissim::simulate::{self, MaternParams, SimulateError};

// ---------------------------------------------------------------------------
// Error classification
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    /// Bad input: files, flags, config. Exit code 2.
    Input(String),
    /// Numerical failure after valid input. Exit code 1.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<InferenceError> for CliError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::NotPositiveDefinite
            | InferenceError::NewtonDiverged { .. }
            | InferenceError::AllCandidatesFailed(_) => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Inference(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<SimulateError> for CliError {
    fn from(e: SimulateError) -> Self {
        match e {
            SimulateError::FactorizationFailed => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Inference(inner) => inner.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Inference(inner) => inner.into(),
            MetricsError::Solve(inner) => inner.into(),
            MetricsError::Simulate(inner) => inner.into(),
            MetricsError::TooManyFailures { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Command-line surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "maxdissim",
    version,
    about = "Balls of maximum dissimilarity between stochastic processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate synthetic data for the two builtin scenarios
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Fit a coefficient posterior to observed data
    Fit(FitArgs),
    /// Find the ball of maximum dissimilarity for one pair of parameters
    Bmd(BmdArgs),
    /// Find the ball maximizing a weighted sum of dissimilarity objectives
    Bmmd(BmmdArgs),
    /// Averaged (Hardy-Littlewood) variant of the ball search
    Hl(HlArgs),
    /// Youden index of two samples: maximal CDF gap over an interval
    Youden(YoudenArgs),
    /// Dissimilarity index as a function of the volume budget
    Curve(CurveArgs),
    /// Monte Carlo study of estimation error against a known truth
    McStudy(McStudyArgs),
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Replicated Gaussian curves on [0, 1] around the builtin mean pair
    Gp(GpArgs),
    /// Paired inhomogeneous Poisson point patterns on [-3, 3]^2
    Pp(PpArgs),
}

fn d_seed() -> u64 {
    0
}
fn d_one() -> f64 {
    1.0
}
fn d_gamma() -> f64 {
    100.0
}
fn d_delta() -> f64 {
    0.5
}
fn d_p() -> f64 {
    2.0
}
fn d_dic_draws() -> usize {
    200
}
fn d_grid_size() -> usize {
    512
}
fn d_path(name: &str) -> PathBuf {
    PathBuf::from(name)
}
fn d_gp_x() -> PathBuf {
    d_path("gp_x.csv")
}
fn d_gp_y() -> PathBuf {
    d_path("gp_y.csv")
}
fn d_gp_prov() -> PathBuf {
    d_path("gp_provenance.json")
}
fn d_pp_x() -> PathBuf {
    d_path("pp_x.csv")
}
fn d_pp_y() -> PathBuf {
    d_path("pp_y.csv")
}
fn d_pp_prov() -> PathBuf {
    d_path("pp_provenance.json")
}
fn d_posterior() -> PathBuf {
    d_path("posterior.json")
}
fn d_solution() -> PathBuf {
    d_path("solution.json")
}
fn d_curve() -> PathBuf {
    d_path("curve.csv")
}
fn d_ghe() -> PathBuf {
    d_path("ghe.csv")
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GpArgs {
    /// Number of replicate curves per process
    #[arg(long)]
    n: Option<usize>,
    /// Number of equally spaced observation sites on [0, 1]
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 0)]
    #[serde(default = "d_seed")]
    seed: u64,
    /// Matérn marginal standard deviation of the error process
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "d_one")]
    sigma: f64,
    /// Matérn smoothness
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "d_one")]
    nu: f64,
    /// Matérn range
    #[arg(long, default_value_t = 1.0)]
    #[serde(default = "d_one")]
    ell: f64,
    #[arg(long, default_value = "gp_x.csv")]
    #[serde(default = "d_gp_x")]
    out_x: PathBuf,
    #[arg(long, default_value = "gp_y.csv")]
    #[serde(default = "d_gp_y")]
    out_y: PathBuf,
    /// Where to record the resolved configuration and seed
    #[arg(long, default_value = "gp_provenance.json")]
    #[serde(default = "d_gp_prov")]
    provenance: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PpArgs {
    /// Peak intensity of the first process
    #[arg(long)]
    gamma: Option<f64>,
    /// Intensity ratio of the second process to the first
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "pp_x.csv")]
    #[serde(default = "d_pp_x")]
    out_x: PathBuf,
    #[arg(long, default_value = "pp_y.csv")]
    #[serde(default = "d_pp_y")]
    out_y: PathBuf,
    #[arg(long, default_value = "pp_provenance.json")]
    #[serde(default = "d_pp_prov")]
    provenance: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Likelihood {
    /// Replicated curves with Gaussian noise (CSV: replicate,t1[,t2],value)
    Gaussian,
    /// A point pattern with log-linear intensity (CSV: t1[,t2])
    Poisson,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitArgs {
    /// Input CSV; layout depends on --likelihood
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    likelihood: Option<Likelihood>,
    /// Ground set bounds "lo,hi" (1-D) or "lo1,hi1,lo2,hi2" (2-D);
    /// defaults to [0,1] for gaussian and [-3,3]^2 for poisson
    #[arg(long)]
    ground: Option<String>,
    /// Basis functions per dimension for a single fit
    #[arg(long)]
    basis_size: Option<usize>,
    /// Comma-separated candidate sizes; fits each, prints its DIC, keeps the
    /// best
    #[arg(long, conflicts_with = "basis_size")]
    basis_sizes: Option<String>,
    /// Bins per dimension for the poisson likelihood (default 128 in 1-D,
    /// 32 in 2-D)
    #[arg(long)]
    bins: Option<usize>,
    /// Posterior draws used by the DIC estimate
    #[arg(long, default_value_t = 200)]
    #[serde(default = "d_dic_draws")]
    dic_draws: usize,
    #[arg(long, default_value_t = 0)]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long, default_value = "posterior.json")]
    #[serde(default = "d_posterior")]
    out: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BmdArgs {
    /// Builtin parameter pair: funex1 (curves on [0,1]) or funex2
    /// (intensities on [-3,3]^2, see --gamma/--delta)
    #[arg(long, conflicts_with_all = ["post_x", "post_y"])]
    truth: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    #[serde(default = "d_gamma")]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "d_delta")]
    delta: f64,
    /// Posterior JSON for the first process
    #[arg(long, requires = "post_y")]
    post_x: Option<PathBuf>,
    /// Posterior JSON for the second process
    #[arg(long, requires = "post_x")]
    post_y: Option<PathBuf>,
    /// Norm order of the ball and the sub-norm
    #[arg(long, default_value_t = 2.0)]
    #[serde(default = "d_p")]
    p: f64,
    /// Nominal volume budget of the ball
    #[arg(long)]
    c: Option<f64>,
    /// Posterior draws; solves the ball problem per draw (needs --post-x/y)
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    #[serde(default = "d_seed")]
    seed: u64,
    /// Quadrature nodes per dimension
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value = "solution.json")]
    #[serde(default = "d_solution")]
    out: PathBuf,
    /// Per-draw CSV written in posterior mode
    #[arg(long)]
    draws_out: Option<PathBuf>,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BmmdArgs {
    /// Posterior pair "x.json,y.json"; repeat once per objective
    #[arg(long = "pair")]
    pairs: Vec<String>,
    /// Comma-separated positive weights, one per --pair
    #[arg(long)]
    w: Option<String>,
    #[arg(long, default_value_t = 2.0)]
    #[serde(default = "d_p")]
    p: f64,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value = "solution.json")]
    #[serde(default = "d_solution")]
    out: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HlArgs {
    /// Builtin parameter pair (funex1 or funex2)
    #[arg(long, conflicts_with_all = ["post_x", "post_y"])]
    truth: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    #[serde(default = "d_gamma")]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "d_delta")]
    delta: f64,
    #[arg(long, requires = "post_y")]
    post_x: Option<PathBuf>,
    #[arg(long, requires = "post_x")]
    post_y: Option<PathBuf>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value = "solution.json")]
    #[serde(default = "d_solution")]
    out: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct YoudenArgs {
    /// CSV of draws from the first distribution (single `value` column)
    #[arg(long)]
    samples_x: Option<PathBuf>,
    /// CSV of draws from the second distribution
    #[arg(long)]
    samples_y: Option<PathBuf>,
    /// Search interval; defaults to the pooled sample range
    #[arg(long)]
    lo: Option<f64>,
    #[arg(long)]
    hi: Option<f64>,
    #[arg(long, default_value_t = 512)]
    #[serde(default = "d_grid_size")]
    grid: usize,
    /// Optional JSON output path; the result is always printed to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveArgs {
    /// Builtin parameter pair (funex1 or funex2)
    #[arg(long, conflicts_with_all = ["post_x", "post_y"])]
    truth: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    #[serde(default = "d_gamma")]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    #[serde(default = "d_delta")]
    delta: f64,
    #[arg(long, requires = "post_y")]
    post_x: Option<PathBuf>,
    #[arg(long, requires = "post_x")]
    post_y: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    #[serde(default = "d_p")]
    p: f64,
    /// Strictly increasing comma-separated volume budgets
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value = "curve.csv")]
    #[serde(default = "d_curve")]
    out: PathBuf,
    /// JSON file holding these fields; overrides all other flags
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct McStudyArgs {
    /// Scenario number: 1 = Gaussian curves, 2 = point patterns
    #[arg(long)]
    scenario: Option<u8>,
    /// Replicate curves per process (scenario 1)
    #[arg(long)]
    n: Option<usize>,
    /// Observation sites per curve (scenario 1)
    #[arg(long)]
    j: Option<usize>,
    /// Peak intensity (scenario 2)
    #[arg(long)]
    gamma: Option<f64>,
    /// Intensity ratio (scenario 2)
    #[arg(long)]
    delta: Option<f64>,
    /// Monte Carlo replicates M
    #[arg(long)]
    replicates: Option<usize>,
    /// Posterior draws m per replicate and budget
    #[arg(long)]
    draws: Option<usize>,
    /// Comma-separated budget grid; defaults to 10 points on [0.05, 0.5]|T|
    #[arg(long)]
    c_grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    #[serde(default = "d_seed")]
    seed: u64,
    #[arg(long)]
    basis_size: Option<usize>,
    #[arg(long)]
    norm_order: Option<f64>,
    #[arg(long, default_value = "ghe.csv")]
    #[serde(default = "d_ghe")]
    out: PathBuf,
    /// Full study configuration as JSON (scenario, replicates,
    /// posterior_draws, c_grid, base_seed, basis_size, norm_order, matern);
    /// overrides the per-field flags above
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input(format!("config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("config {}: {e}", path.display())))
}

/// Replaces the parsed flags wholesale with the config file, when given.
trait Configurable: Sized + DeserializeOwned {
    fn config_path(&self) -> Option<PathBuf>;

    fn merged(self) -> Result<Self, CliError> {
        match self.config_path() {
            Some(path) => load_config(&path),
            None => Ok(self),
        }
    }
}

macro_rules! configurable {
    ($($t:ty),*) => {
        $(impl Configurable for $t {
            fn config_path(&self) -> Option<PathBuf> {
                self.config.clone()
            }
        })*
    };
}

configurable!(GpArgs, PpArgs, FitArgs, BmdArgs, BmmdArgs, HlArgs, YoudenArgs, CurveArgs);

fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| input(format!("{flag} is required (flag or config file)")))
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| input(format!("{flag}: {s:?} is not a number")))
        })
        .collect()
}

fn parse_ground(text: &str) -> Result<GroundSet, CliError> {
    let v = parse_f64_list(text, "--ground")?;
    match v.len() {
        2 => Ok(GroundSet::interval(v[0], v[1])?),
        4 => Ok(GroundSet::new(vec![v[0], v[2]], vec![v[1], v[3]])?),
        n => Err(input(format!(
            "--ground needs 2 values (1-D) or 4 values (2-D), got {n}"
        ))),
    }
}

/// Named truth pairs used by the examples and the acceptance checks.
fn builtin_truth(
    name: &str,
    gamma: f64,
    delta: f64,
) -> Result<(Arc<dyn ParamSurface>, Arc<dyn ParamSurface>, GroundSet), CliError> {
    match name {
        "funex1" => {
            let (x, y) = simulate::scenario1_pair();
            Ok((Arc::new(x), Arc::new(y), GroundSet::unit_interval()))
        }
        "funex2" => {
            let cfg = simulate::Scenario2Config::new(gamma, delta)?;
            let ground = cfg.ground.clone();
            let (x, y) = simulate::scenario2_intensity(&cfg);
            Ok((Arc::new(x), Arc::new(y), ground))
        }
        other => Err(input(format!(
            "unknown truth {other:?}; available: funex1, funex2"
        ))),
    }
}

enum Source {
    Truth(Arc<dyn ParamSurface>, Arc<dyn ParamSurface>, GroundSet),
    Posterior(Box<CoefficientPosterior>, Box<CoefficientPosterior>),
}

impl Source {
    fn resolve(
        truth: &Option<String>,
        gamma: f64,
        delta: f64,
        post_x: &Option<PathBuf>,
        post_y: &Option<PathBuf>,
    ) -> Result<Self, CliError> {
        match (truth, post_x, post_y) {
            (Some(name), None, None) => {
                let (x, y, g) = builtin_truth(name, gamma, delta)?;
                Ok(Source::Truth(x, y, g))
            }
            (None, Some(px), Some(py)) => {
                let px = mdio::read_posterior_json(px)?;
                let py = mdio::read_posterior_json(py)?;
                if px.basis.ground() != py.basis.ground() {
                    return Err(input(
                        "the two posteriors are defined over different ground sets",
                    ));
                }
                Ok(Source::Posterior(Box::new(px), Box::new(py)))
            }
            _ => Err(input(
                "provide either --truth or both --post-x and --post-y",
            )),
        }
    }

    /// Point-estimate surfaces: the truth itself, or the posterior means.
    fn surfaces(&self) -> (Arc<dyn ParamSurface>, Arc<dyn ParamSurface>, GroundSet) {
        match self {
            Source::Truth(x, y, g) => (x.clone(), y.clone(), g.clone()),
            Source::Posterior(px, py) => (
                Arc::new(px.mean_parameter()),
                Arc::new(py.mean_parameter()),
                px.basis.ground().clone(),
            ),
        }
    }
}

fn with_nodes(obj: DissimilarityObjective, nodes: Option<usize>) -> DissimilarityObjective {
    match nodes {
        Some(n) => obj.with_nodes_per_dim(n),
        None => obj,
    }
}

fn format_center(center: &[f64]) -> String {
    let parts: Vec<String> = center.iter().map(|c| format!("{c:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

fn run_simulate_gp(args: GpArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let n = require(args.n, "--n")?;
    let j = require(args.grid, "--grid")?;
    if j < 2 {
        return Err(input("--grid must be at least 2"));
    }
    let params = MaternParams {
        sigma: args.sigma,
        nu: args.nu,
        ell: args.ell,
    };
    let grid: Vec<f64> = (0..j).map(|i| i as f64 / (j - 1) as f64).collect();
    let (mean_x, mean_y) = simulate::scenario1_pair();
    let data_x = simulate::sample_gp(&mean_x, &params, &grid, n, subseed(args.seed, 0))?;
    let data_y = simulate::sample_gp(&mean_y, &params, &grid, n, subseed(args.seed, 1))?;
    mdio::write_gaussian_csv(&mut File::create(&args.out_x)?, &data_x)?;
    mdio::write_gaussian_csv(&mut File::create(&args.out_y)?, &data_y)?;
    write_json(&args.provenance, &args)?;
    println!(
        "simulate gp: {n} replicates x {j} sites -> {} / {}",
        args.out_x.display(),
        args.out_y.display()
    );
    Ok(())
}

fn run_simulate_pp(args: PpArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let gamma = require(args.gamma, "--gamma")?;
    let delta = require(args.delta, "--delta")?;
    let cfg = simulate::Scenario2Config::new(gamma, delta)?;
    let ground = cfg.ground.clone();
    let (lam_x, lam_y) = simulate::scenario2_intensity(&cfg);
    let pat_x = simulate::sample_poisson_process(&lam_x, &ground, subseed(args.seed, 0))?;
    let pat_y = simulate::sample_poisson_process(&lam_y, &ground, subseed(args.seed, 1))?;
    mdio::write_points_csv(&mut File::create(&args.out_x)?, &pat_x)?;
    mdio::write_points_csv(&mut File::create(&args.out_y)?, &pat_y)?;
    write_json(&args.provenance, &args)?;
    println!(
        "simulate pp: {} and {} points -> {} / {}",
        pat_x.count(),
        pat_y.count(),
        args.out_x.display(),
        args.out_y.display()
    );
    Ok(())
}

fn run_fit(args: FitArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let input_path = require(args.input.clone(), "--input")?;
    let likelihood = require(args.likelihood, "--likelihood")?;
    let ground = match &args.ground {
        Some(text) => parse_ground(text)?,
        None => match likelihood {
            Likelihood::Gaussian => GroundSet::unit_interval(),
            Likelihood::Poisson => GroundSet::square(-3.0, 3.0)?,
        },
    };
    let prior = inference::GaussianPrior::default();
    let file = File::open(&input_path)
        .map_err(|e| input(format!("{}: {e}", input_path.display())))?;

    // Hold whichever data layout was read so `ObservedData` can borrow it.
    let mut gaussian_data = None;
    let mut pattern_data = None;
    let data = match likelihood {
        Likelihood::Gaussian => {
            let obs = mdio::read_gaussian_csv(file)?;
            ObservedData::Gaussian(gaussian_data.insert(obs))
        }
        Likelihood::Poisson => {
            let pat = mdio::read_points_csv(file)?;
            ObservedData::Pattern(pattern_data.insert(pat))
        }
    };

    let post = if let Some(sizes_text) = &args.basis_sizes {
        let sizes: Vec<usize> = sizes_text
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| input(format!("--basis-sizes: {s:?} is not a size")))
            })
            .collect::<Result<_, _>>()?;
        let (best, scores) =
            inference::select_basis_by_dic(&data, &ground, &sizes, &prior, args.dic_draws, args.seed)?;
        for (size, dic) in &scores {
            println!("dic: size={size} dic={dic:.4}");
        }
        best
    } else {
        let size = args.basis_size.unwrap_or(match ground.dim() {
            1 => 15,
            _ => 8,
        });
        let basis = inference::basis_for_size(&ground, size)?;
        match &data {
            ObservedData::Gaussian(obs) => inference::fit_gaussian(obs, &basis, &prior)?,
            ObservedData::Pattern(pat) => {
                let bins = args
                    .bins
                    .unwrap_or_else(|| inference::default_bins_per_dim(ground.dim()));
                inference::fit_poisson(pat, &basis, &prior, bins)?
            }
        }
    };

    mdio::write_posterior_json(&args.out, &post)?;
    println!(
        "fit: {} coefficients -> {}",
        post.mean.len(),
        args.out.display()
    );
    Ok(())
}

fn run_bmd(args: BmdArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let c = require(args.c, "--c")?;
    let source = Source::resolve(&args.truth, args.gamma, args.delta, &args.post_x, &args.post_y)?;
    let cfg = OptConfig::default();

    if let Some(m) = args.m {
        let (px, py) = match &source {
            Source::Posterior(px, py) => (px.as_ref(), py.as_ref()),
            Source::Truth(..) => {
                return Err(input("--m needs fitted posteriors (--post-x/--post-y)"))
            }
        };
        let mut opts = PosteriorSolveOptions::new(args.p);
        opts.nodes_per_dim = args.nodes;
        let posterior = solve_bmd_posterior(px, py, c, m, args.seed, &opts, &cfg)?;
        write_json(&args.out, &posterior)?;
        if let Some(draws_path) = &args.draws_out {
            mdio::write_posterior_draws_csv(&mut File::create(draws_path)?, &posterior)?;
        }
        let s = &posterior.summary;
        println!(
            "bmd posterior: m={m} mean center={} mean radius={:.6} mean index={:.6}",
            format_center(&s.mean_center),
            s.mean_radius,
            s.mean_index
        );
        return Ok(());
    }

    let (sx, sy, ground) = source.surfaces();
    let obj = with_nodes(
        DissimilarityObjective::new(sx, sy, args.p, ground)?,
        args.nodes,
    );
    let sol = solve_bmd(&obj, c, &cfg)?;
    mdio::write_solution_json(&args.out, &sol)?;
    println!(
        "bmd: center={} radius={:.6} index={:.6}",
        format_center(&sol.center),
        sol.radius,
        sol.index
    );
    Ok(())
}

fn run_bmmd(args: BmmdArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let c = require(args.c, "--c")?;
    if args.pairs.is_empty() {
        return Err(input("at least one --pair x.json,y.json is required"));
    }
    let mut objectives = Vec::with_capacity(args.pairs.len());
    for pair in &args.pairs {
        let (px, py) = pair
            .split_once(',')
            .ok_or_else(|| input(format!("--pair {pair:?} must be \"x.json,y.json\"")))?;
        let px = mdio::read_posterior_json(Path::new(px.trim()))?;
        let py = mdio::read_posterior_json(Path::new(py.trim()))?;
        let ground = px.basis.ground().clone();
        let obj = DissimilarityObjective::new(
            Arc::new(px.mean_parameter()),
            Arc::new(py.mean_parameter()),
            args.p,
            ground,
        )?;
        objectives.push(with_nodes(obj, args.nodes));
    }
    let weights = match &args.w {
        Some(text) => parse_f64_list(text, "--w")?,
        None => vec![1.0; objectives.len()],
    };
    if weights.len() != objectives.len() {
        return Err(input(format!(
            "--w has {} weights for {} pairs",
            weights.len(),
            objectives.len()
        )));
    }
    let scal = ScalarizedObjective::new(objectives, weights)?;
    let sol = solve_bmmd(&scal, c, &OptConfig::default())?;
    mdio::write_solution_json(&args.out, &sol)?;
    println!(
        "bmmd: center={} radius={:.6} index={:.6}",
        format_center(&sol.center),
        sol.radius,
        sol.index
    );
    Ok(())
}

fn run_hl(args: HlArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let c = require(args.c, "--c")?;
    let source = Source::resolve(&args.truth, args.gamma, args.delta, &args.post_x, &args.post_y)?;
    let (sx, sy, ground) = source.surfaces();
    let obj = with_nodes(DissimilarityObjective::averaged(sx, sy, ground), args.nodes);
    let sol = solve_hl_bmd(&obj, c, &OptConfig::default())?;
    mdio::write_solution_json(&args.out, &sol)?;
    println!(
        "hl: center={} radius={:.6} index={:.6}",
        format_center(&sol.center),
        sol.radius,
        sol.index
    );
    Ok(())
}

fn run_youden(args: YoudenArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let path_x = require(args.samples_x.clone(), "--samples-x")?;
    let path_y = require(args.samples_y.clone(), "--samples-y")?;
    let open = |p: &PathBuf| File::open(p).map_err(|e| input(format!("{}: {e}", p.display())));
    let sx = mdio::read_samples_csv(open(&path_x)?)?;
    let sy = mdio::read_samples_csv(open(&path_y)?)?;
    let pooled_min = sx.iter().chain(&sy).cloned().fold(f64::INFINITY, f64::min);
    let pooled_max = sx
        .iter()
        .chain(&sy)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = args.lo.unwrap_or(pooled_min);
    let hi = args.hi.unwrap_or(pooled_max);
    if !(lo < hi) {
        return Err(input(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    let fx = CdfEvaluator::empirical(sx);
    let fy = CdfEvaluator::empirical(sy);
    let (t_star, j) = dissimilarity::youden(&fx, &fy, lo, hi, args.grid);

    #[derive(Serialize)]
    struct YoudenOut {
        t_star: f64,
        j: f64,
    }
    let result = YoudenOut { t_star, j };
    println!("{}", serde_json::to_string(&result)?);
    if let Some(out) = &args.out {
        write_json(out, &result)?;
    }
    Ok(())
}

fn run_curve(args: CurveArgs) -> Result<(), CliError> {
    let args = args.merged()?;
    let grid_text = require(args.c_grid.clone(), "--c-grid")?;
    let c_grid = parse_f64_list(&grid_text, "--c-grid")?;
    let source = Source::resolve(&args.truth, args.gamma, args.delta, &args.post_x, &args.post_y)?;
    let (sx, sy, ground) = source.surfaces();
    let obj = with_nodes(
        DissimilarityObjective::new(sx, sy, args.p, ground)?,
        args.nodes,
    );
    let curve = dissimilarity::dissimilarity_curve(&obj, &c_grid, &OptConfig::default())?;
    let mut out = File::create(&args.out)?;
    use std::io::Write;
    writeln!(out, "c,index")?;
    for (c, index) in &curve {
        writeln!(out, "{c},{index}")?;
    }
    println!("curve: {} budgets -> {}", curve.len(), args.out.display());
    Ok(())
}

fn run_mc_study(args: McStudyArgs) -> Result<(), CliError> {
    // The config file here holds the full study description consumed by the
    // library, not a mirror of the flags; --seed/--out still apply.
    let cfg = match &args.config {
        Some(path) => load_config::<MonteCarloConfig>(path)?,
        None => {
            let scenario = match require(args.scenario, "--scenario")? {
                1 => McScenario::GaussianCurves {
                    n: require(args.n, "--n")?,
                    j: require(args.j, "--j")?,
                },
                2 => McScenario::PointPatterns {
                    gamma: require(args.gamma, "--gamma")?,
                    delta: require(args.delta, "--delta")?,
                },
                other => return Err(input(format!("--scenario must be 1 or 2, got {other}"))),
            };
            let c_grid = match &args.c_grid {
                Some(text) => parse_f64_list(text, "--c-grid")?,
                None => Vec::new(),
            };
            MonteCarloConfig {
                scenario,
                replicates: require(args.replicates, "--replicates")?,
                posterior_draws: require(args.draws, "--draws")?,
                c_grid,
                base_seed: args.seed,
                basis_size: args.basis_size,
                norm_order: args.norm_order,
                matern: None,
            }
        }
    };
    let result = metrics::run_mc_study(&cfg)?;
    metrics::write_ghe_csv_file(&args.out, &cfg, &result)?;
    println!(
        "mc-study: {} replicates ({} failed), median GHE {:.6} -> {}",
        result.values.len(),
        result.failed,
        result.median(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(SimulateCommand::Gp(args)) => run_simulate_gp(args),
        Command::Simulate(SimulateCommand::Pp(args)) => run_simulate_pp(args),
        Command::Fit(args) => run_fit(args),
        Command::Bmd(args) => run_bmd(args),
        Command::Bmmd(args) => run_bmmd(args),
        Command::Hl(args) => run_hl(args),
        Command::Youden(args) => run_youden(args),
        Command::Curve(args) => run_curve(args),
        Command::McStudy(args) => run_mc_study(args),
    }
}

fn main() {
    if let Ok(text) = std::env::var("MAXDISSIM_THREADS") {
        match text.parse::<usize>() {
            Ok(n) if n >= 1 => {
                // Ignore the error: the pool can only be configured once,
                // which matters solely under test harnesses.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("MAXDISSIM_THREADS must be a positive integer, got {text:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
