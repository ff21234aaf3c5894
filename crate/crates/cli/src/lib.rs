//! `wrmlab` command-line interface.

// Negated comparisons such as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use wrmlab::cluster::{boolean_graph, clusters, gilbert_graph, lattice_graph};
use wrmlab::env::{sample_bernoulli_field, sample_marked_ppp, sample_ppp};
use wrmlab::experiments::{lattice_discontinuity, pbm_discontinuity, pgg_discontinuity, quasilocality_decay};
use wrmlab::gnz::{
    default_test_fns, gnz_check_continuum, gnz_check_lattice, ContinuumModel, TestFn,
};
use wrmlab::io::{decomposition_json, read_env, read_joint_config, rows_to_csv, write_cloud, write_lattice_env, EnvFile};
use wrmlab::wrm_continuum::{
    chi_density, local_robustness_probe, pbm_papangelou, sample_overlap_removed, ContinuumParams, MarkedPoint,
};
use wrmlab::wrm_lattice::{
    discrete_papangelou, z_enum, z_random_cluster, z_sites, PapConvention, TransferGrid,
};
use wrmlab::{
    JointContinuumConfig, LatticeBox, LatticeConfig, LatticeEnv, MarkedPointCloud, RadiusLaw, Site, SpinWeights, Window,
    WrmError,
};

pub use config::{load_config, ConfigFile, KEYS};
pub use manifest::{manifest_path, sha256_hex, validate_manifest, verify_outputs, Manifest, OutputDigest};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config { line: usize, msg: String },
    Core(WrmError),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Config { line, msg } => write!(f, "config line {line}: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<WrmError> for CliError {
    fn from(e: WrmError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

/// 0 success; 1 parameter, parse or usage error; 2 budget or cap exceeded;
/// 3 failed internal cross-check.
pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) | CliError::Config { .. } | CliError::Io(_) => 1,
        CliError::Core(w) => match w {
            WrmError::CapExceeded { .. } | WrmError::Budget(_) | WrmError::Degenerate(_) => 2,
            WrmError::Inconsistency(_) => 3,
            _ => 1,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Format as ValueEnum>::from_str(s, true)
    }
}

#[derive(Parser, Debug)]
#[command(name = "wrmlab", version, about = "Quenched Widom-Rowlinson models on random environments")]
struct Cli {
    /// Flat `key = value` file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; a `<out>.manifest.json` is written alongside.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(flatten)]
    params: ParamFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ParamFlags {
    #[arg(long, global = true)]
    p_plus: Option<f64>,
    #[arg(long, global = true)]
    p_minus: Option<f64>,
    /// Defaults to 1 - p_plus - p_minus.
    #[arg(long, global = true)]
    p_zero: Option<f64>,
    /// Site density of the lattice environment.
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Poisson intensity of the continuum environment.
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    lambda_plus: Option<f64>,
    #[arg(long, global = true)]
    lambda_minus: Option<f64>,
    /// Hard-core radius of the continuum coloring.
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Gilbert connection radius.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Radius marks are uniform on (0, m_max].
    #[arg(long, global = true)]
    m_max: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
}

/// Parameters after merging defaults, the config file and flags.
#[derive(Debug, Clone, Serialize)]
struct Params {
    seed: u64,
    p_plus: f64,
    p_minus: f64,
    p_zero: f64,
    q: f64,
    beta: f64,
    lambda_plus: f64,
    lambda_minus: f64,
    a: f64,
    eps: f64,
    r: f64,
    m_max: f64,
    samples: usize,
}

impl Params {
    fn resolve(cli: &Cli, file: &ConfigFile) -> Result<Self, CliError> {
        fn pick<T: std::str::FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T, CliError> {
            Ok(match flag {
                Some(v) => v,
                None => file.get(key)?.unwrap_or(default),
            })
        }
        let f = &cli.params;
        let p_plus = pick(f.p_plus, file, "p_plus", 0.3)?;
        let p_minus = pick(f.p_minus, file, "p_minus", 0.3)?;
        let p_zero = pick(f.p_zero, file, "p_zero", 1.0 - p_plus - p_minus)?;
        let params = Self {
            seed: pick(cli.seed, file, "seed", 0)?,
            p_plus,
            p_minus,
            p_zero,
            q: pick(f.q, file, "q", 0.3)?,
            beta: pick(f.beta, file, "beta", 0.1)?,
            lambda_plus: pick(f.lambda_plus, file, "lambda_plus", 1.0)?,
            lambda_minus: pick(f.lambda_minus, file, "lambda_minus", 1.0)?,
            a: pick(f.a, file, "a", 0.5)?,
            eps: pick(f.eps, file, "eps", 0.1)?,
            r: pick(f.r, file, "r", 1.0)?,
            m_max: pick(f.m_max, file, "m_max", 0.5)?,
            samples: pick(f.samples, file, "samples", 10_000)?,
        };
        for (name, v) in [("p_plus", p_plus), ("p_minus", p_minus), ("p_zero", p_zero)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(WrmError::Parameter(format!("{name} = {v} must lie in [0, 1]")).into());
            }
        }
        let sum = p_plus + p_minus + p_zero;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(WrmError::Parameter(format!("p_plus + p_minus + p_zero must equal 1 (got {sum})")).into());
        }
        Ok(params)
    }

    fn weights(&self) -> Result<SpinWeights, CliError> {
        Ok(SpinWeights::new(self.p_plus, self.p_minus, self.p_zero)?)
    }

    fn continuum(&self) -> ContinuumParams {
        ContinuumParams {
            beta: self.beta,
            lambda_plus: self.lambda_plus,
            lambda_minus: self.lambda_minus,
            a: self.a,
        }
    }

    fn radius_law(&self) -> Result<RadiusLaw, CliError> {
        let law = RadiusLaw::Uniform { low: 0.0, high: self.m_max };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Sample an environment, or decompose one into clusters.
    Env(EnvArgs),
    /// Partition function of a lattice cluster.
    Z(ZArgs),
    /// Papangelou intensity (lattice or Boolean model).
    Pap(PapArgs),
    /// GNZ / DLR consistency checks.
    Gnz(GnzArgs),
    /// Half-lattice discontinuity experiments.
    Discont(DiscontArgs),
    /// Overlap-removed colorings and the density of choice variables.
    Overlap(OverlapArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Env(_) => "env",
            Command::Z(_) => "z",
            Command::Pap(_) => "pap",
            Command::Gnz(_) => "gnz",
            Command::Discont(_) => "discont",
            Command::Overlap(_) => "overlap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum EnvKind {
    Lattice,
    Gilbert,
    Boolean,
}

#[derive(Args, Debug, Serialize)]
struct EnvArgs {
    #[arg(long, value_enum, default_value = "lattice")]
    kind: EnvKind,
    /// Box side (lattice sites) or window side length.
    #[arg(long, default_value_t = 10.0)]
    size: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Read the environment from a file instead of sampling it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Emit the cluster decomposition as JSON instead of the environment.
    #[arg(long)]
    decompose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ClusterKind {
    Single,
    Edge,
    Box,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ZMethod {
    Auto,
    Enum,
    Transfer,
    Rc,
}

#[derive(Args, Debug, Serialize)]
struct ZArgs {
    #[arg(long, value_enum, default_value = "edge")]
    cluster: ClusterKind,
    #[arg(long, default_value_t = 3)]
    width: usize,
    #[arg(long, default_value_t = 3)]
    height: usize,
    /// Lattice environment file for `--cluster file`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "auto")]
    method: ZMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum PapModel {
    Lattice,
    Pbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Convention {
    Explicit,
    Literal,
}

#[derive(Args, Debug, Serialize)]
struct PapArgs {
    #[arg(long, value_enum, default_value = "lattice")]
    model: PapModel,
    /// Lattice environment file or joint configuration JSON.
    #[arg(long)]
    input: PathBuf,
    /// Added point: lattice site `x,y` or continuum position.
    #[arg(long, allow_hyphen_values = true)]
    at: String,
    /// Spin of the added lattice site.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    spin: i8,
    /// Boundary spins in site order (default all 0).
    #[arg(long, allow_hyphen_values = true)]
    spins: Option<String>,
    #[arg(long, value_enum, default_value = "explicit")]
    convention: Convention,
    /// Radius mark of the added continuum point.
    #[arg(long, default_value_t = 0.5)]
    m: f64,
    /// Comma-separated perturbation sizes: run the local robustness probe.
    #[arg(long)]
    robustness: Option<String>,
    #[arg(long, default_value_t = 20)]
    perturbations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum GnzModel {
    Lattice,
    Poisson,
    Pgg,
    Pbm,
}

#[derive(Args, Debug, Serialize)]
struct GnzArgs {
    #[arg(long, value_enum, default_value = "lattice")]
    model: GnzModel,
    #[arg(long, default_value_t = 2)]
    width: usize,
    #[arg(long, default_value_t = 2)]
    height: usize,
    /// Random spot checks instead of exhaustive enumeration.
    #[arg(long)]
    spot: bool,
    /// Side of the square window.
    #[arg(long, default_value_t = 10.0)]
    window: f64,
    /// Comma-separated test functions (default: all for the model).
    #[arg(long)]
    tests: Option<String>,
    /// Drop the overlap factor of the Boolean intensity.
    #[arg(long)]
    drop_chi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DiscontModel {
    Lattice,
    Pgg,
    Pbm,
    Decay,
}

#[derive(Args, Debug, Serialize)]
struct DiscontArgs {
    #[arg(long, value_enum, default_value = "lattice")]
    model: DiscontModel,
    /// Comma-separated values of p.
    #[arg(long)]
    p: Option<String>,
    /// Range `a..b` (inclusive) or comma-separated list.
    #[arg(long, default_value = "1..6")]
    n: String,
    /// Thickening levels.
    #[arg(long, default_value = "1,2,5,10,20")]
    k: String,
    /// Boolean-model intensities (default: λ|B_ε| = ln 2).
    #[arg(long)]
    lambda: Option<String>,
    /// Monte Carlo cross-check samples for the Boolean model (0 disables).
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
}

#[derive(Args, Debug, Serialize)]
struct OverlapArgs {
    /// Marked cloud file (default: sampled on the window).
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 5.0)]
    window: f64,
    /// `x,y,m`: report the choice-variable density at this added point.
    #[arg(long, allow_hyphen_values = true)]
    chi: Option<String>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| CliError::Usage(format!("bad {what} value {t:?}"))))
        .collect()
}

fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| CliError::Usage(format!("bad range {s:?}")))?;
        let b: usize = b.trim().parse().map_err(|_| CliError::Usage(format!("bad range {s:?}")))?;
        if a > b {
            return Err(CliError::Usage(format!("empty range {s:?}")));
        }
        Ok((a..=b).collect())
    } else {
        parse_list(s, "n")
    }
}

/// Plain decimal with at most 12 fractional digits.
fn human(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-6 {
        return format!("{x:e}");
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn read_text(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

struct Output {
    text: String,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 1 } else { code };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let start = now();
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let params = Params::resolve(cli, &file)?;
    let format = match cli.format {
        Some(f) => Some(f),
        None => file.get::<Format>("format")?,
    };
    if let Some(n) = cli.threads.or(file.get("threads")?) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A global pool can only be installed once per process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let output = match &cli.command {
        Command::Env(a) => cmd_env(a, &params, format)?,
        Command::Z(a) => cmd_z(a, &params, format)?,
        Command::Pap(a) => cmd_pap(a, &params, format)?,
        Command::Gnz(a) => cmd_gnz(a, &params)?,
        Command::Discont(a) => cmd_discont(a, &params, format)?,
        Command::Overlap(a) => cmd_overlap(a, &params)?,
    };
    match &cli.out {
        None => print!("{}", output.text),
        Some(path) => {
            std::fs::write(path, &output.text)?;
            let mut resolved: BTreeMap<String, serde_json::Value> = match serde_json::to_value(&params) {
                Ok(serde_json::Value::Object(m)) => m.into_iter().collect(),
                _ => BTreeMap::new(),
            };
            resolved.insert("command".into(), serde_json::to_value(&cli.command).unwrap_or_default());
            resolved.insert("format".into(), serde_json::to_value(format).unwrap_or_default());
            let manifest = Manifest {
                tool: "wrmlab".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                subcommand: cli.command.name().into(),
                params: resolved,
                seed: params.seed,
                start,
                end: now(),
                outputs: vec![OutputDigest {
                    path: path.display().to_string(),
                    sha256: sha256_hex(output.text.as_bytes()),
                }],
            };
            let text = serde_json::to_string_pretty(&manifest).expect("serializable");
            std::fs::write(manifest_path(path), text + "\n")?;
        }
    }
    Ok(())
}

fn json_out<T: Serialize>(v: &T) -> Output {
    Output {
        text: serde_json::to_string_pretty(v).expect("serializable") + "\n",
    }
}

fn cmd_env(a: &EnvArgs, p: &Params, format: Option<Format>) -> Result<Output, CliError> {
    let env = match &a.input {
        Some(path) => read_env(&read_text(path)?)?,
        None => {
            if !(a.size > 0.0) {
                return Err(WrmError::Parameter("--size must be positive".into()).into());
            }
            match a.kind {
                EnvKind::Lattice => {
                    let side = a.size.round() as i64;
                    let bbox = LatticeBox::new(vec![0; a.dim], vec![side - 1; a.dim])?;
                    EnvFile::Lattice(sample_bernoulli_field(&bbox, p.q, p.seed)?)
                }
                EnvKind::Gilbert => EnvFile::Cloud(sample_ppp(&Window::cube(a.dim, a.size)?, p.beta, p.seed)?),
                EnvKind::Boolean => EnvFile::Cloud(sample_marked_ppp(
                    &Window::cube(a.dim, a.size)?,
                    p.beta,
                    &p.radius_law()?,
                    p.seed,
                )?),
            }
        }
    };
    if a.decompose || format == Some(Format::Json) {
        let graph = match &env {
            EnvFile::Lattice(e) => lattice_graph(e),
            EnvFile::Cloud(c) if c.is_marked() => boolean_graph(c, p.a)?,
            EnvFile::Cloud(c) => gilbert_graph(c, p.r)?,
        };
        return Ok(Output {
            text: decomposition_json(&clusters(&graph)) + "\n",
        });
    }
    Ok(Output {
        text: match &env {
            EnvFile::Lattice(e) => write_lattice_env(e),
            EnvFile::Cloud(c) => write_cloud(c),
        },
    })
}

fn cmd_z(a: &ZArgs, p: &Params, format: Option<Format>) -> Result<Output, CliError> {
    let w = p.weights()?;
    let sites: Vec<Site> = match a.cluster {
        ClusterKind::Single => vec![vec![0, 0]],
        ClusterKind::Edge => vec![vec![0, 0], vec![1, 0]],
        ClusterKind::Box => LatticeBox::rect(a.width, a.height)?.sites(),
        ClusterKind::File => {
            let path = a.input.as_ref().ok_or_else(|| CliError::Usage("--cluster file needs --input".into()))?;
            match read_env(&read_text(path)?)? {
                EnvFile::Lattice(e) => e.sites(),
                EnvFile::Cloud(_) => return Err(WrmError::RuleMismatch("z expects a lattice environment".into()).into()),
            }
        }
    };
    let env = LatticeEnv::from_sites(sites.clone())?;
    let graph = lattice_graph(&env);
    let all: Vec<usize> = (0..graph.num_vertices()).collect();
    let z = match a.method {
        ZMethod::Auto => z_sites(&sites, &w)?,
        ZMethod::Enum => z_enum(&all, &graph, &w)?,
        ZMethod::Rc => z_random_cluster(&all, &graph, &w)?,
        ZMethod::Transfer => TransferGrid::from_sites(&sites)?.z(&w).value(),
    };
    Ok(match format {
        Some(Format::Json) => json_out(&json!({"z": z, "ln_z": z.ln(), "sites": sites.len()})),
        _ => Output { text: human(z) + "\n" },
    })
}

fn parse_point(s: &str) -> Result<[f64; 2], CliError> {
    match parse_list::<f64>(s, "coordinate")?.as_slice() {
        [x, y] => Ok([*x, *y]),
        _ => Err(CliError::Usage(format!("expected `x,y`, got {s:?}"))),
    }
}

fn cmd_pap(a: &PapArgs, p: &Params, format: Option<Format>) -> Result<Output, CliError> {
    let text = read_text(&a.input)?;
    match a.model {
        PapModel::Lattice => {
            let EnvFile::Lattice(env) = read_env(&text)? else {
                return Err(WrmError::RuleMismatch("lattice intensity needs a lattice environment".into()).into());
            };
            let spins: Vec<i8> = match &a.spins {
                Some(s) => parse_list(s, "spin")?,
                None => vec![0; env.len()],
            };
            let site: Vec<i64> = parse_list(&a.at, "site")?;
            let boundary = LatticeConfig::from_vec(env, &spins)?;
            let convention = match a.convention {
                Convention::Explicit => PapConvention::ExplicitWeight,
                Convention::Literal => PapConvention::PaperLiteral,
            };
            let rho = discrete_papangelou(a.spin, &site, &boundary, p.q, &p.weights()?, convention)?;
            Ok(match format {
                Some(Format::Json) => json_out(&json!({"rho": rho})),
                _ => Output { text: human(rho) + "\n" },
            })
        }
        PapModel::Pbm => {
            let joint: JointContinuumConfig = read_joint_config(&text)?;
            let xbar = MarkedPoint::bare(parse_point(&a.at)?, a.m)?;
            let params = p.continuum();
            match &a.robustness {
                Some(list) => {
                    let eps: Vec<f64> = parse_list(list, "eps")?;
                    let rows = local_robustness_probe(&xbar, &joint.env, &params, &eps, a.perturbations, p.samples, p.seed)?;
                    Ok(json_out(&rows))
                }
                None => Ok(json_out(&pbm_papangelou(&xbar, &joint, &params, p.samples, p.seed)?)),
            }
        }
    }
}

fn cmd_gnz(a: &GnzArgs, p: &Params) -> Result<Output, CliError> {
    let report = match a.model {
        GnzModel::Lattice => gnz_check_lattice(&LatticeBox::rect(a.width, a.height)?, p.q, &p.weights()?, !a.spot, p.seed)?,
        _ => {
            let model = match a.model {
                GnzModel::Poisson => ContinuumModel::FreePoisson { beta: p.beta },
                GnzModel::Pgg => ContinuumModel::Pgg {
                    beta: p.beta,
                    r: p.r,
                    w: p.weights()?,
                },
                _ => ContinuumModel::Pbm {
                    params: p.continuum(),
                    law: p.radius_law()?,
                    include_chi: !a.drop_chi,
                },
            };
            let fns: Vec<TestFn> = match &a.tests {
                Some(s) => s.split(',').map(|t| t.trim().parse()).collect::<Result<_, _>>()?,
                None => default_test_fns(&model),
            };
            gnz_check_continuum(&model, &Window::cube(2, a.window)?, &fns, p.samples, p.seed)?
        }
    };
    Ok(json_out(&report))
}

const DEFAULT_PS: [f64; 8] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.45, 0.49];

fn cmd_discont(a: &DiscontArgs, p: &Params, format: Option<Format>) -> Result<Output, CliError> {
    let ns = parse_range(&a.n)?;
    let ps: Vec<f64> = match &a.p {
        Some(s) => parse_list(s, "p")?,
        None => match a.model {
            DiscontModel::Pgg => vec![0.05],
            DiscontModel::Decay => vec![0.01, 0.05],
            _ => DEFAULT_PS.to_vec(),
        },
    };
    let (rows, fits) = match a.model {
        DiscontModel::Lattice => (lattice_discontinuity(&ps, &ns)?, None),
        DiscontModel::Pgg => {
            let ks: Vec<usize> = parse_list(&a.k, "k")?;
            let mut rows = Vec::new();
            for &pv in &ps {
                rows.extend(pgg_discontinuity(pv, &ks, &ns, p.eps)?);
            }
            (rows, None)
        }
        DiscontModel::Pbm => {
            let lambdas: Vec<f64> = match &a.lambda {
                Some(s) => parse_list(s, "lambda")?,
                None => vec![std::f64::consts::LN_2 / (std::f64::consts::PI * p.eps * p.eps)],
            };
            (pbm_discontinuity(&lambdas, p.eps, p.a, &ns, a.mc_samples, p.seed)?, None)
        }
        DiscontModel::Decay => {
            let (rows, fits) = quasilocality_decay(&ps, &ns)?;
            (rows, Some(fits))
        }
    };
    Ok(match format {
        Some(Format::Json) => match fits {
            Some(f) => json_out(&json!({"rows": rows, "fits": f})),
            None => json_out(&rows),
        },
        _ => {
            if let Some(f) = fits {
                for fit in f {
                    eprintln!(
                        "p = {}: exponent {} (R^2 = {}), strictly decreasing: {}",
                        fit.p, fit.exponent, fit.r2, fit.strictly_decreasing
                    );
                }
            }
            Output { text: rows_to_csv(&rows) }
        }
    })
}

fn cmd_overlap(a: &OverlapArgs, p: &Params) -> Result<Output, CliError> {
    let env: MarkedPointCloud = match &a.input {
        Some(path) => match read_env(&read_text(path)?)? {
            EnvFile::Cloud(c) if c.is_marked() => c,
            _ => return Err(WrmError::RuleMismatch("overlap needs a marked cloud".into()).into()),
        },
        None => sample_marked_ppp(&Window::cube(2, a.window)?, p.beta, &p.radius_law()?, p.seed)?,
    };
    if let Some(spec) = &a.chi {
        let v: Vec<f64> = parse_list(spec, "chi")?;
        let [x, y, m] = v[..] else {
            return Err(CliError::Usage(format!("--chi expects `x,y,m`, got {spec:?}")));
        };
        let xbar = MarkedPoint::bare([x, y], m)?;
        return Ok(json_out(&chi_density(&xbar, &env, p.lambda_plus, p.lambda_minus, p.samples, p.seed)?));
    }
    let (config, w) = sample_overlap_removed(&env, p.lambda_plus, p.lambda_minus, p.seed)?;
    let mut joint = JointContinuumConfig::new(env, config.union())?;
    joint.w = Some(w);
    Ok(Output {
        text: wrmlab::io::joint_config_json(&joint) + "\n",
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_error_class() {
        let core = |e: WrmError| exit_code(&CliError::Core(e));
        assert_eq!(exit_code(&CliError::Usage("x".into())), 1);
        assert_eq!(core(WrmError::Parameter("bad".into())), 1);
        assert_eq!(core(WrmError::Budget("x".into())), 2);
        assert_eq!(core(WrmError::Degenerate("x".into())), 2);
        assert_eq!(core(WrmError::Inconsistency("x".into())), 3);
    }
}
