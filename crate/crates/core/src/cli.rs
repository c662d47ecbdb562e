//! The `dht-lab` batch front end.
//!
//! Every command reads one problem (`--input FILE` or an inline `--family`
//! spec), runs a pipeline and writes a JSON envelope `{schema, command,
//! report}` or a CSV table. Exit codes: 0 affirmative, 1 input error,
//! 2 negative verdict, 3 inconclusive.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::boundedness::{theorem1_check, BoundednessReport, Verdict, DEFAULT_GROWTH_TOL};
use crate::error::{Error, Result};
use crate::generators::{FamilySpec, Instance, Problem};
use crate::invertibility::{invertibility_verdict, Decision, InvertibilityParams, InvertibilityVerdict};
use crate::measure::{discrete_measure, AnnulusMeasure};
use crate::oracle::{convergence_study, ConvergenceStudy};
use crate::point::Point;
use crate::splitting::{feichtinger_split, piece_study, FeichtingerSplit};

pub const SCHEMA: u32 = 1;
pub const THREADS_ENV: &str = "DHT_LAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "dht-lab", version, about = "Weighted discrete Hilbert transform analysis")]
struct Cli {
    #[command(subcommand)]
    command: CommandKind,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// Two-condition boundedness check of a measure (or the target system as one).
    Bounded,
    /// Split a Bessel-weighted target system into certified pieces.
    Split,
    /// Invertibility verdict with perturbation class and oracle cross-check.
    Invert,
    /// Singular-value convergence study over truncation sizes.
    Oracle,
    /// Materialize a family (and seeded measure) as explicit data.
    Generate,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Bounded => "bounded",
            CommandKind::Split => "split",
            CommandKind::Invert => "invert",
            CommandKind::Oracle => "oracle",
            CommandKind::Generate => "generate",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(clap::Args, Debug)]
struct Flags {
    /// Problem file (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Inline family spec, e.g. '{"family":"example1","c":0.25,"n":200}'.
    #[arg(long, global = true, value_name = "SPEC-JSON")]
    family: Option<String>,
    #[arg(long, global = true, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long = "big-m", global = true)]
    big_m: Option<f64>,
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Comma-separated increasing truncation sizes.
    #[arg(long, global = true, value_delimiter = ',', value_name = "N,N,...")]
    sizes: Option<Vec<usize>>,
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

/// A fully resolved run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub problem: Problem,
    pub epsilon: f64,
    pub big_m: Option<f64>,
    pub margin: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(command: CommandKind, problem: Problem) -> Self {
        Self {
            command,
            problem,
            epsilon: 0.1,
            big_m: None,
            margin: None,
            sizes: None,
            out: None,
            format: Format::Json,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        if let Some(m) = self.big_m {
            positive("big-m", m)?;
        }
        if let Some(m) = self.margin {
            positive("margin", m)?;
        }
        if let Some(s) = &self.sizes {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(
                    "sizes must be positive and strictly increasing".into(),
                ));
            }
        }
        Ok(())
    }
}

/// The JSON report wrapper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema: u32,
    pub command: String,
    pub report: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceStudy {
    pub piece: usize,
    /// `None` when the piece has no points in the smallest truncation.
    pub study: Option<ConvergenceStudy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub split: FeichtingerSplit,
    pub studies: Vec<PieceStudy>,
}

/// What a run produced: the primary document, sidecar files and the exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub primary: String,
    pub sidecars: Vec<(PathBuf, String)>,
    pub messages: Vec<String>,
}

impl Outcome {
    fn new(exit_code: i32, primary: String) -> Self {
        Self {
            exit_code,
            primary,
            sidecars: Vec::new(),
            messages: Vec::new(),
        }
    }
}

/// Entry point of the binary: parses `std::env::args` and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    let config = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    match execute(&config) {
        Ok(outcome) => {
            for m in &outcome.messages {
                eprintln!("{m}");
            }
            if let Err(e) = emit(&config, &outcome) {
                eprintln!("error: {e}");
                return EXIT_INPUT;
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
    // a second initialization (tests calling run_from twice) is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let f = cli.flags;
    let problem = match (&f.input, &f.family) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<Problem>(&text)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?
        }
        (None, Some(spec)) => Problem::from_family(
            serde_json::from_str::<FamilySpec>(spec)
                .map_err(|e| Error::InvalidParameter(format!("--family: {e}")))?,
        ),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter("give either --input or --family, not both".into()))
        }
        (None, None) => return Err(Error::InvalidParameter("one of --input or --family is required".into())),
    };
    let config = RunConfig {
        command: cli.command,
        problem,
        epsilon: f.epsilon,
        big_m: f.big_m,
        margin: f.margin,
        sizes: f.sizes,
        out: f.out,
        format: f.format,
        seed: f.seed,
    };
    config.validate()?;
    Ok(config)
}

/// Runs the command without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    match config.command {
        CommandKind::Bounded => cmd_bounded(config),
        CommandKind::Split => cmd_split(config),
        CommandKind::Invert => cmd_invert(config),
        CommandKind::Oracle => cmd_oracle(config),
        CommandKind::Generate => cmd_generate(config),
    }
}

fn emit(config: &RunConfig, outcome: &Outcome) -> Result<()> {
    match &config.out {
        Some(path) => {
            write_atomic(path, &outcome.primary)?;
            for (p, text) in &outcome.sidecars {
                write_atomic(p, text)?;
            }
        }
        None => print!("{}", outcome.primary),
    }
    Ok(())
}

/// Writes `text` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let io = |e: std::io::Error| Error::InvalidParameter(format!("{}: {e}", path.display()));
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, text).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

/// `<stem>.<tag>.csv` next to `path`.
pub fn sidecar_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{tag}.csv"))
}

fn envelope<T: Serialize>(command: CommandKind, report: &T) -> Result<String> {
    let env = Envelope {
        schema: SCHEMA,
        command: command.name().to_string(),
        report,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv<R>(header: &str, rows: R) -> String
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

// shortest round-trip decimal
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn base_size(problem: &Problem, inst: &Instance) -> usize {
    match (&problem.family, &problem.nodes) {
        (Some(f), None) => f.size(),
        _ => inst.nodes.len(),
    }
}

/// `N/8, N/4, N/2, N`, or `1, 2, 3` for tiny problems.
pub fn default_sizes(n: usize) -> Vec<usize> {
    let mut s: Vec<usize> = [n / 8, n / 4, n / 2, n].into_iter().filter(|&k| k > 0).collect();
    s.dedup();
    if s.len() < 3 {
        s = vec![1, 2, 3];
    }
    s
}

fn target_measure(inst: &Instance) -> Result<AnnulusMeasure> {
    if let Some(mu) = inst.measure()? {
        return Ok(mu);
    }
    let ts = inst
        .target
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("bounded needs a measure or a target system".into()))?;
    let atoms: Vec<(Point, f64)> = ts.points().iter().copied().zip(ts.weights().iter().copied()).collect();
    discrete_measure(&atoms, &inst.nodes)
}

fn cmd_bounded(config: &RunConfig) -> Result<Outcome> {
    let inst = config.problem.instantiate(config.seed)?;
    let mu = target_measure(&inst)?;
    let report: BoundednessReport = theorem1_check(&inst.nodes, &mu, DEFAULT_GROWTH_TOL)?;
    let code = match report.verdict {
        Verdict::Bounded => EXIT_OK,
        Verdict::UnboundedTrend => EXIT_NEGATIVE,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let primary = match config.format {
        Format::Json => envelope(config.command, &report)?,
        Format::Csv => csv(
            "size,local,a2",
            report
                .trend
                .iter()
                .map(|r| vec![r.size.to_string(), num(r.local), num(r.a2)]),
        ),
    };
    Ok(Outcome::new(code, primary))
}

fn require_target(inst: &Instance) -> Result<&crate::target::TargetSystem> {
    inst.target
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("this command needs a target system".into()))
}

fn cmd_split(config: &RunConfig) -> Result<Outcome> {
    let inst = config.problem.instantiate(config.seed)?;
    let ts = require_target(&inst)?;
    let split = match feichtinger_split(&inst.nodes, ts, config.epsilon) {
        Ok(s) => s,
        Err(Error::BoundednessPrecheckFailed(msg)) => {
            let mut out = Outcome::new(EXIT_NEGATIVE, String::new());
            out.messages.push(format!("boundedness precheck failed: {msg}"));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let sizes = match &config.sizes {
        Some(s) => s.clone(),
        None => default_sizes(inst.nodes.len()),
    };
    let studies = split
        .pieces
        .iter()
        .enumerate()
        .map(|(i, piece)| PieceStudy {
            piece: i,
            study: piece_study(&inst.nodes, ts, piece, &sizes).ok(),
        })
        .collect::<Vec<_>>();
    let report = SplitReport { split, studies };
    let primary = match config.format {
        Format::Json => envelope(config.command, &report)?,
        Format::Csv => csv(
            "piece,size,sigma_max,sigma_min",
            report.studies.iter().filter_map(|p| p.study.as_ref().map(|s| (p.piece, s))).flat_map(|(i, s)| {
                (0..s.sizes.len())
                    .map(move |k| vec![i.to_string(), s.sizes[k].to_string(), num(s.sigma_max[k]), num(s.sigma_min[k])])
            }),
        ),
    };
    Ok(Outcome::new(EXIT_OK, primary))
}

fn invert_params(config: &RunConfig) -> InvertibilityParams {
    let mut p = InvertibilityParams::default();
    if let Some(m) = config.big_m {
        p.big_m = m;
    }
    if let Some(m) = config.margin {
        p.margin = m;
    }
    p.sizes = config.sizes.clone();
    p
}

fn cmd_invert(config: &RunConfig) -> Result<Outcome> {
    let inst = config.problem.instantiate(config.seed)?;
    let ts = require_target(&inst)?;
    let verdict: InvertibilityVerdict = invertibility_verdict(&inst.nodes, ts, &invert_params(config))?;
    let code = match verdict.verdict {
        Decision::Invertible | Decision::InvertibleAfterAdjustingOnePoint => EXIT_OK,
        Decision::NotInvertible => EXIT_NEGATIVE,
        Decision::Inconclusive => EXIT_INCONCLUSIVE,
    };
    let mut out = match config.format {
        Format::Json => Outcome::new(code, envelope(config.command, &verdict)?),
        Format::Csv => {
            let rho = &verdict.rho;
            let primary = csv(
                "n,log_rho",
                rho.indices
                    .iter()
                    .zip(&rho.log_rho)
                    .map(|(n, l)| vec![n.to_string(), num(*l)]),
            );
            let mut out = Outcome::new(code, primary);
            if let (Some(path), Some(x)) = (&config.out, &verdict.oracle_crosscheck) {
                let table = csv(
                    "size,sigma_max,sigma_min",
                    (0..x.sizes.len()).map(|k| vec![x.sizes[k].to_string(), num(x.sigma_max[k]), num(x.sigma_min[k])]),
                );
                out.sidecars.push((sidecar_path(path, "oracle"), table));
            }
            out
        }
    };
    if let Some(a) = &verdict.advisory {
        out.messages.push(format!("advisory: {a}"));
    }
    Ok(out)
}

fn cmd_oracle(config: &RunConfig) -> Result<Outcome> {
    let inst = config.problem.instantiate(config.seed)?;
    let sizes = match &config.sizes {
        Some(s) => s.clone(),
        None => default_sizes(base_size(&config.problem, &inst)),
    };
    let study = convergence_study(|k| config.problem.operator_at(k, config.seed), &sizes)?;
    let primary = match config.format {
        Format::Json => envelope(config.command, &study)?,
        Format::Csv => csv(
            "size,sigma_max,sigma_min,witness_max",
            (0..study.sizes.len()).map(|k| {
                vec![
                    study.sizes[k].to_string(),
                    num(study.sigma_max[k]),
                    num(study.sigma_min[k]),
                    num(study.witness_max[k]),
                ]
            }),
        ),
    };
    Ok(Outcome::new(EXIT_OK, primary))
}

fn cmd_generate(config: &RunConfig) -> Result<Outcome> {
    let problem = config.problem.materialize(config.seed)?;
    let primary = match config.format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&problem).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let inst = problem.instantiate(config.seed)?;
            let mut s = String::from("set,index,re,im,offset_re,offset_im,weight\n");
            let mut rows = |set: &str, pts: &[Point], w: &[f64]| {
                for (i, (p, w)) in pts.iter().zip(w).enumerate() {
                    let (a, o) = (p.anchor(), p.offset());
                    let _ = writeln!(
                        s,
                        "{set},{},{},{},{},{},{}",
                        i + 1,
                        num(a.re),
                        num(a.im),
                        num(o.re),
                        num(o.im),
                        num(*w)
                    );
                }
            };
            rows("node", inst.nodes.nodes(), inst.nodes.weights());
            if let Some(ts) = &inst.target {
                rows("target", ts.points(), ts.weights());
            }
            if let Some(atoms) = &inst.atoms {
                let (p, w): (Vec<Point>, Vec<f64>) = atoms.iter().copied().unzip();
                rows("atom", &p, &w);
            }
            s
        }
    };
    Ok(Outcome::new(EXIT_OK, primary))
}
