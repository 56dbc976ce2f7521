//! The `ratesplit` command line.
//!
//! Exit codes: 0 success, 2 solver did not reach optimality, 3 every region
//! point infeasible, 4 bound violated, 64 usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ratesplit_core::decoupling::{self, DecouplingConfig, HaarSetup, ProtocolConfig, SingleSetup, TrialReport};
use ratesplit_core::region::{self, Direction, P2pRegion, QicRegion, QmacRegion, RatePoint, RegionTrace, Tracer};
use ratesplit_core::{entropy, Channel, EntropyResult, SigmaPolicy, SolveStatus};
use rayon::prelude::*;
use serde::Serialize;

use crate::files::{self, LoadError};
use crate::presets;
use crate::report::{self, Envelope, EntropyDoc, ProtocolDoc, TraceDoc, TrialDoc};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_BOUND: i32 = 4;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "ratesplit", version, about = "One-shot rate splitting over quantum multi-user channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate an entropic quantity of a state.
    Entropy(EntropyArgs),
    /// Trace an achievable rate region over the split parameter.
    Region(RegionArgs),
    /// Monte Carlo decoupling checks and the split protocol.
    Decouple(DecoupleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    Hmin,
    Hmax,
    Imin,
    H2,
    Vonneumann,
    Conditional,
    Coherent,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EntropyArgs {
    /// Builtin state (epr2, mixed2, ghz3, ...) or a state document.
    #[arg(long)]
    pub state: String,
    #[arg(long, value_enum)]
    pub quantity: Quantity,
    /// Comma-separated labels; defaults to every label not in --condition.
    #[arg(long, value_delimiter = ',')]
    pub system: Vec<String>,
    /// Comma-separated conditioning (or receiving) labels.
    #[arg(long, value_delimiter = ',')]
    pub condition: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// For h2: `marginal` or `alternating:<rounds>`.
    #[arg(long, default_value = "marginal")]
    pub sigma_policy: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub record_runtime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionMode {
    P2p,
    Qmac,
    Qic,
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HelpDirection {
    Both,
    AHelpsB,
    BHelpsA,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    /// `builtin:<name>[:p1,p2,...]` or a channel document.
    #[arg(long)]
    pub channel: String,
    #[arg(long, value_enum)]
    pub mode: RegionMode,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = region::DEFAULT_THETA_STEPS)]
    pub theta_steps: usize,
    /// Ebit budget of sender A (multiple-access and interference modes).
    #[arg(long, default_value_t = 0.0)]
    pub ebits_a: f64,
    #[arg(long, default_value_t = 0.0)]
    pub ebits_b: f64,
    /// Comma-separated ebit budgets of the assisted part (point-to-point mode).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub ebits_a1: Vec<f64>,
    /// Comma-separated helper rates `Q_0` (interference mode).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub q0: Vec<f64>,
    #[arg(long, value_enum, default_value = "both")]
    pub direction: HelpDirection,
    /// Blocklength of the asymptotic region (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Output prefix; `<out>.csv` and `<out>.json` are written.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub record_runtime: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Single,
    Onehaar,
    Twohaar,
    Protocol,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecoupleArgs {
    #[arg(long, value_enum)]
    pub variant: Variant,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Union-bound parameter of the high-probability checks.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    /// Channel; defaults to a seeded random channel (identity for the protocol).
    #[arg(long)]
    pub channel: Option<String>,
    /// Sender dimension of the single-sender check.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Environment dimension of the single-sender check.
    #[arg(long, default_value_t = 2)]
    pub env_dim: usize,
    /// Split parameter of the protocol run.
    #[arg(long, default_value_t = 0.0)]
    pub theta: f64,
    /// Message dimensions `d0,d1` of the protocol run.
    #[arg(long, value_delimiter = ',')]
    pub message_dims: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub record_runtime: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: msg.into() }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        usage(e.to_string())
    }
}

impl From<ratesplit_core::Error> for Failure {
    fn from(e: ratesplit_core::Error) -> Self {
        usage(e.to_string())
    }
}

/// Output of one command: the report text and a one-line summary.
struct Outcome {
    code: i32,
    summary: String,
    /// `(extension, contents)`; written next to `--out` or printed.
    documents: Vec<(&'static str, String)>,
}

/// Runs the command line on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", text);
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", text);
                    EXIT_USAGE
                }
            };
        }
    };
    let (result, out, single_doc) = match &cli.command {
        Command::Entropy(a) => (entropy_cmd(a), a.out.clone(), true),
        Command::Region(a) => (region_cmd(a), a.out.clone(), false),
        Command::Decouple(a) => (decouple_cmd(a), a.out.clone(), true),
    };
    match result {
        Ok(outcome) => {
            if let Err(msg) = emit(&outcome, out.as_deref(), single_doc, stdout) {
                let _ = writeln!(stderr, "error: {}", msg);
                return EXIT_USAGE;
            }
            let _ = writeln!(stderr, "{}", outcome.summary);
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(outcome: &Outcome, out: Option<&Path>, single_doc: bool, stdout: &mut dyn Write) -> Result<(), String> {
    match out {
        None => {
            if let Some((_, text)) = outcome.documents.first() {
                stdout.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
            }
        }
        Some(path) => {
            for (ext, text) in &outcome.documents {
                let target = if single_doc { path.to_path_buf() } else { with_extension(path, ext) };
                if let Some(parent) = target.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent).map_err(|e| format!("{}: {}", parent.display(), e))?;
                }
                fs::write(&target, text).map_err(|e| format!("{}: {}", target.display(), e))?;
            }
        }
    }
    Ok(())
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn elapsed(start: Instant, record: bool) -> Option<f64> {
    record.then(|| start.elapsed().as_secs_f64())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| usage(e.to_string()))
}

// ---------------------------------------------------------------------------
// entropy

fn sigma_policy(s: &str) -> Result<SigmaPolicy, Failure> {
    if s == "marginal" {
        return Ok(SigmaPolicy::Marginal);
    }
    if let Some(n) = s.strip_prefix("alternating:") {
        let rounds = n.parse::<usize>().map_err(|_| usage(format!("bad round count in `{}`", s)))?;
        return Ok(SigmaPolicy::Alternating(rounds));
    }
    Err(usage(format!("unknown sigma policy `{}`; use marginal or alternating:<rounds>", s)))
}

fn entropy_cmd(a: &EntropyArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let state = files::resolve_state(&a.state)?;
    let rho = state.density();
    let labels: Vec<String> = rho.rows().labels().iter().map(|s| s.to_string()).collect();
    for l in a.system.iter().chain(&a.condition) {
        if !labels.contains(l) {
            return Err(usage(format!("state has no system `{}` (systems: {})", l, labels.join(", "))));
        }
    }
    let system: Vec<String> = if a.system.is_empty() {
        labels.iter().filter(|l| !a.condition.contains(l)).cloned().collect()
    } else {
        a.system.clone()
    };
    if system.is_empty() {
        return Err(usage("no system left to evaluate"));
    }
    let sys: Vec<&str> = system.iter().map(|s| s.as_str()).collect();
    let cond: Vec<&str> = a.condition.iter().map(|s| s.as_str()).collect();
    let name = format!("{:?}", a.quantity).to_lowercase();
    let needs_condition = matches!(a.quantity, Quantity::Coherent | Quantity::Conditional);
    if needs_condition && cond.is_empty() {
        return Err(usage(format!("{} needs --condition", name)));
    }
    let doc = match a.quantity {
        Quantity::Vonneumann => {
            if !cond.is_empty() {
                return Err(usage("vonneumann takes no --condition; use conditional"));
            }
            EntropyDoc::exact(&name, &system, &a.condition, entropy::von_neumann_of(&rho, &sys)?)
        }
        Quantity::Conditional => EntropyDoc::exact(&name, &system, &a.condition, entropy::conditional_entropy(&rho, &sys, &cond)?),
        Quantity::Coherent => EntropyDoc::exact(&name, &system, &a.condition, entropy::coherent_information(&rho, &sys, &cond)?),
        Quantity::H2 => {
            let b = entropy::h2_cond_bound(&rho, &sys, &cond, &sigma_policy(&a.sigma_policy)?)?;
            EntropyDoc::exact(&name, &system, &a.condition, b.value)
        }
        Quantity::Hmin | Quantity::Hmax | Quantity::Imin => {
            let r: EntropyResult = match a.quantity {
                Quantity::Hmin => entropy::hmin_cond(&rho, &sys, &cond, a.epsilon)?,
                Quantity::Hmax => entropy::hmax_cond(&rho, &sys, &cond, a.epsilon)?,
                _ => entropy::imin(&rho, &sys, &cond, a.epsilon)?,
            };
            EntropyDoc::from_result(&name, &system, &a.condition, &r)
        }
    };
    let code = if doc.status == SolveStatus::Optimal.as_str() { EXIT_OK } else { EXIT_SOLVER };
    let sep = if matches!(a.quantity, Quantity::Coherent | Quantity::Imin) { ">" } else { "|" };
    let summary = format!(
        "{}({}{}{}) = {:.6}  [{}, gap {:.1e}]",
        name,
        system.join(""),
        if cond.is_empty() { "" } else { sep },
        a.condition.join(""),
        doc.value,
        doc.status,
        doc.gap
    );
    let text = match a.format {
        Format::Json => Envelope::new("entropy", a, &doc, elapsed(start, a.record_runtime)).to_json(),
        Format::Csv => doc.csv(),
    };
    Ok(Outcome { code, summary, documents: vec![(ext(a.format), text)] })
}

fn ext(f: Format) -> &'static str {
    match f {
        Format::Json => "json",
        Format::Csv => "csv",
    }
}

// ---------------------------------------------------------------------------
// region

const QIC_NOTE: &str = "interference-channel encoding terms use unconditional smooth min-entropies as stated; \
the multiple-access bounds use a collision-entropy quantity in the same place, so this may be a misprint";
const QIC_IID_NOTE: &str = "the asymptotic interference-channel constraints are emitted as stated, without a sum-rate inequality";

fn traced(tracer: &dyn Tracer, grid: &[f64], jobs: usize) -> Result<RegionTrace, Failure> {
    let pool = pool(jobs)?;
    let per_theta: Vec<Vec<RatePoint>> = pool.install(|| grid.par_iter().map(|&t| tracer.points_at(t)).collect());
    Ok(tracer.finish(per_theta.into_iter().flatten().collect())?)
}

fn directions(d: HelpDirection) -> Vec<Direction> {
    match d {
        HelpDirection::Both => vec![Direction::AHelpsB, Direction::BHelpsA],
        HelpDirection::AHelpsB => vec![Direction::AHelpsB],
        HelpDirection::BHelpsA => vec![Direction::BHelpsA],
    }
}

/// Builds the trace for `a` on an already resolved channel.
pub fn region_trace(a: &RegionArgs, ch: &Channel) -> Result<(RegionTrace, Vec<String>), Failure> {
    let grid = region::theta_grid(a.theta_steps)?;
    let id = a.channel.as_str();
    let ebits = (a.ebits_a, a.ebits_b);
    let outputs = ch.outputs().len();
    Ok(match a.mode {
        RegionMode::P2p => (traced(&P2pRegion::new(ch, id, a.epsilon, &a.ebits_a1)?, &grid, a.jobs)?, vec![]),
        RegionMode::Qmac => (traced(&QmacRegion::new(ch, id, a.epsilon, ebits)?, &grid, a.jobs)?, vec![]),
        RegionMode::Qic => {
            let q = QicRegion::new(ch, id, a.epsilon, &a.q0, &directions(a.direction), ebits)?;
            (traced(&q, &grid, a.jobs)?, vec![QIC_NOTE.to_string()])
        }
        RegionMode::Iid if outputs == 2 => (
            region::qic_iid_region(ch, id, a.k, &grid, &directions(a.direction), ebits)?,
            vec![QIC_IID_NOTE.to_string()],
        ),
        RegionMode::Iid => (region::qmac_iid_region(ch, id, None, a.k, ebits)?, vec![]),
    })
}

fn corner_summary(t: &RegionTrace) -> String {
    t.corners
        .iter()
        .map(|c| {
            let rates: Vec<String> = c.rates.iter().map(|(n, v)| format!("{}={:.6}", n, v)).collect();
            format!("{}: {}", c.name, rates.join(" "))
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn region_cmd(a: &RegionArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let ch = files::resolve_channel(&a.channel)?;
    let (trace, notes) = region_trace(a, &ch)?;
    let available = trace.available_points().count();
    let usable = trace.available_points().filter(|p| p.feasible != Some(false)).count();
    let total = trace.points.len();
    let code = if usable == 0 { EXIT_INFEASIBLE } else { EXIT_OK };
    let mut summary = format!(
        "region {} {}: {} points, {} available, {} feasible",
        trace.scenario.as_str(),
        trace.mode.as_str(),
        total,
        available,
        usable
    );
    let corners = corner_summary(&trace);
    if !corners.is_empty() {
        summary.push_str("; ");
        summary.push_str(&corners);
    }
    for p in trace.points.iter().filter(|p| !p.available) {
        summary.push_str(&format!("\nunavailable at theta={}: {}", p.theta, p.note.as_deref().unwrap_or("")));
    }
    for p in trace.available_points().filter(|p| p.feasible == Some(false)) {
        summary.push_str(&format!("\ninfeasible at theta={} ({}): {}", p.theta, p.branch, p.note.as_deref().unwrap_or("")));
    }
    let csv = report::trace_csv(&trace);
    let json = Envelope::new("region", a, TraceDoc::new(&trace, notes), elapsed(start, a.record_runtime)).to_json();
    Ok(Outcome { code, summary, documents: vec![("csv", csv), ("json", json)] })
}

// ---------------------------------------------------------------------------
// decouple

fn config(a: &DecoupleArgs) -> Result<DecouplingConfig, Failure> {
    let cfg = DecouplingConfig { trials: a.trials, seed: a.seed, epsilon: a.epsilon, k: a.k };
    cfg.validate()?;
    Ok(cfg)
}

/// Single-sender check with trials spread over `jobs` threads.
pub fn single_report(setup: &SingleSetup, cfg: &DecouplingConfig, jobs: usize) -> Result<TrialReport, Failure> {
    cfg.validate()?;
    setup.validate()?;
    let values = pool(jobs)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| decoupling::decoupling_trial(setup, &cfg.stream(i)))
            .collect::<ratesplit_core::Result<Vec<f64>>>()
    })?;
    let (bound, inputs) = decoupling::decoupling_bound(setup, cfg.epsilon)?;
    Ok(TrialReport::expectation(values, bound, inputs))
}

/// High-probability check with trials spread over `jobs` threads.
pub fn haar_report(setup: &HaarSetup, cfg: &DecouplingConfig, jobs: usize) -> Result<TrialReport, Failure> {
    cfg.validate()?;
    setup.validate()?;
    let values = pool(jobs)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| decoupling::haar_trial(setup, &cfg.stream(i)))
            .collect::<ratesplit_core::Result<Vec<f64>>>()
    })?;
    let (bounds, inputs) = decoupling::haar_bounds(setup, cfg)?;
    Ok(TrialReport::fraction(values, bounds, cfg.k, inputs))
}

/// Message dimensions `(d0, d1)`: everything on the unassisted part at
/// `θ = 1`, otherwise everything on the assisted part.
pub fn default_message_dims(theta: f64, input_dim: usize) -> [usize; 2] {
    if theta >= 1.0 {
        [input_dim, 1]
    } else {
        [1, input_dim]
    }
}

fn decouple_cmd(a: &DecoupleArgs) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let cfg = config(a)?;
    let channel = a.channel.as_deref().map(files::resolve_channel).transpose()?;
    let variant = format!("{:?}", a.variant).to_lowercase();
    let (code, summary, json, csv) = match a.variant {
        Variant::Protocol => {
            let ch = match channel {
                Some(c) => c,
                None => Channel::builtin("identity", &[])?,
            };
            if ch.inputs().len() != 1 || ch.outputs().len() != 1 {
                return Err(usage("the protocol needs a one-input, one-output channel"));
            }
            let din = ch.inputs().dim();
            let dims = match a.message_dims.as_slice() {
                [] => default_message_dims(a.theta, din),
                [d0, d1] => [*d0, *d1],
                _ => return Err(usage("--message-dims takes two values")),
            };
            let omega = ratesplit_core::Ket::max_entangled(decoupling::labels::CONTROL, decoupling::labels::INPUT, din)?;
            let (eta, psi) = decoupling::epr_messages(dims[0], dims[1])?;
            let pcfg = ProtocolConfig { seed: a.seed, epsilon: a.epsilon, ..ProtocolConfig::default() };
            let run = decoupling::p2p_split_protocol(&ch, &omega, a.theta, &eta, &psi, &pcfg)?;
            let doc = ProtocolDoc::new(&run, dims);
            let summary = format!(
                "protocol theta={}: trace distance {:.6}, fidelity {:.6}, delta {:.4e}, attempts {}{}",
                a.theta,
                doc.trace_distance,
                doc.fidelity,
                doc.delta["composed"],
                doc.attempts,
                if doc.failed { ", FAILED" } else { "" }
            );
            let code = if doc.failed { EXIT_BOUND } else { EXIT_OK };
            let csv = doc.csv();
            (code, summary, Envelope::new("decouple", a, doc, elapsed(start, a.record_runtime)).to_json(), csv)
        }
        _ => {
            let report = match a.variant {
                Variant::Single => single_report(&presets::single(a.seed, a.dim, a.env_dim, channel.as_ref())?, &cfg, a.jobs)?,
                Variant::Onehaar => haar_report(&presets::onehaar(a.seed, channel.as_ref())?, &cfg, a.jobs)?,
                _ => haar_report(&presets::twohaar(a.seed, channel.as_ref())?, &cfg, a.jobs)?,
            };
            let doc = TrialDoc::new(&variant, &report);
            let mut summary = format!(
                "{}: mean {:.6} (se {:.2e}), bound {:.6}",
                variant, doc.mean, doc.std_error, doc.theoretical_bound
            );
            if let (Some(req), Some(first)) = (doc.required_fraction, doc.checks.first()) {
                summary.push_str(&format!(", fraction within {:.3} (required {:.3})", first.fraction_within, req));
            }
            summary.push_str(if doc.pass { ", pass" } else { ", FAIL" });
            let code = if doc.pass { EXIT_OK } else { EXIT_BOUND };
            let csv = doc.csv();
            (code, summary, Envelope::new("decouple", a, doc, elapsed(start, a.record_runtime)).to_json(), csv)
        }
    };
    let text = match a.format {
        Format::Json => json,
        Format::Csv => csv,
    };
    Ok(Outcome { code, summary, documents: vec![(ext(a.format), text)] })
}
