//! The `percolab` command line: argument parsing, dispatch, and artifact
//! writing. Every artifact carries a [`RunManifest`].
//!
//! Exit codes: 0 success, 1 a checked property failed, 2 usage or input
//! error, 3 an estimator gave up (attempt cap) or an artifact could not be
//! written.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::conntree::{build_connectivity_tree, classify_tree, TreeClassification};
use crate::diagrams::{
    check_convolution, default_truncation, fit_scaling, four_cycle_diagram, one_loop, one_loop_diagram,
    run_convolution_family, square_pins, star_diagram, val, Diagram, Method, Variant, VariantKind,
};
use crate::error::Error;
use crate::estimation::{
    estimate_bubble_capped, estimate_rho_truncated_capped, estimate_tau_k_box, scaling_probe, BoxLattice,
    MAX_ATTEMPTS, MAX_BOX_VERTICES,
};
use crate::integrals::{eval_i_t, predicted_kpoint_constant, quad_i3, ContinuumPoint, Integrator, QuadParams};
use crate::lattice::{clusters, sample_configuration, Graph, LatticeBox, LatticePoint, VertexId};
use crate::manifest::{load_inputs, RunManifest};
use crate::oracle::{exact_event_probability, EventSpec};
use crate::suites::{run_suite, SUITES};
use crate::trees::{enumerate_trees, AbstractTree};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "percolab", version, about = "Exact and Monte Carlo machinery for k-point connectivity in bond percolation")]
pub struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, env = "PERCOLAB_SEED", default_value_t = 0, global = true)]
    pub seed: u64,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on this; `--workers 1` is the reference.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Write the artifact here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a configuration, optionally with connectivity trees.
    Sample(SampleArgs),
    /// Enumerate binary trees with k labelled leaves.
    Trees(TreesArgs),
    /// Value a diagram (exactly or by importance sampling).
    Val(ValArgs),
    /// Convolution ratio checks.
    ConvCheck(ConvArgs),
    /// One-loop diagram exponent fit.
    OneLoop(OneLoopArgs),
    /// Fit log value against log n from a CSV file.
    Fit(FitArgs),
    /// Monte Carlo (or, for k = 3, quadrature) value of a tree integral.
    Integral(IntegralArgs),
    /// Predicted k-point limit constant from limit inputs.
    Predict(PredictArgs),
    /// k-point connection probability.
    Tau(TauArgs),
    /// Truncated proxy estimate of ρ.
    Rho(RhoArgs),
    /// Proxy estimate of the bubble sum of double connections.
    Bubble(BubbleArgs),
    /// Rescaled τ_k along n·y.
    Probe(ProbeArgs),
    /// Run an exhaustive verification suite.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Serialize)]
pub struct BoxArgs {
    /// Dimension of the box.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Sup-norm radius of the box.
    #[arg(long, default_value_t = 4)]
    pub radius: i64,
    /// Largest box (vertices) to build.
    #[arg(long, default_value_t = MAX_BOX_VERTICES)]
    pub max_vertices: u128,
}

#[derive(Args, Debug, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub lattice: BoxArgs,
    /// Edge-list file; replaces the box.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub p: f64,
    /// Marked points x_0;x_1;… as tuples, e.g. "(0,0);(2,1);(-1,3)".
    #[arg(long)]
    pub marked: Option<String>,
    /// Add the connectivity tree of the marked points.
    #[arg(long, requires = "marked")]
    pub emit_trees: bool,
    /// Emit the bit-string export instead of JSON.
    #[arg(long)]
    pub bits: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeEmit {
    Json,
    Newick,
}

#[derive(Args, Debug, Serialize)]
pub struct TreesArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = TreeEmit::Json)]
    pub emit: TreeEmit,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Pins 0, n e_1, n e_2 joined to one free vertex.
    Star,
    /// w_1 = 0, w_2 = n e_1.
    OneLoop,
    /// Pins at the corners of an n-square, one leg each on a 4-cycle.
    FourCycle,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Exact,
    Mc,
}

#[derive(Args, Debug, Serialize)]
pub struct ValArgs {
    /// Diagram JSON file: {"d", "pins": [[…]], "free": F, "edges": [[a, b] or [a, b, exponent]]};
    /// vertices are numbered pins first, then free vertices.
    #[arg(long, conflicts_with = "preset")]
    pub diagram: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 7)]
    pub d: usize,
    /// Scales for the preset, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub n: Vec<i64>,
    /// Truncation radius (default: 4 × largest pin magnitude).
    #[arg(long)]
    pub radius: Option<i64>,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Also value at twice the radius and report the relative change.
    #[arg(long)]
    pub doubling: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VariantArg {
    Std,
    Log,
    Triple,
}

#[derive(Args, Debug, Serialize)]
pub struct ConvArgs {
    #[arg(long, default_value_t = 5)]
    pub d: usize,
    #[arg(long, default_value_t = 2.0)]
    pub a: f64,
    #[arg(long, default_value_t = 2.0)]
    pub b: f64,
    #[arg(long, value_enum, default_value_t = VariantArg::Std)]
    pub variant: VariantArg,
    /// Single instance: y as a tuple (x is the origin). Without it the fixed family runs.
    #[arg(long)]
    pub y: Option<String>,
    /// Third pin for the triple variant.
    #[arg(long)]
    pub w: Option<String>,
    /// Truncation radius for a single instance.
    #[arg(long)]
    pub radius: Option<i64>,
    /// Largest max/min ratio accepted across the family.
    #[arg(long, default_value_t = 3.0)]
    pub max_spread: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct OneLoopArgs {
    #[arg(long, default_value_t = 7)]
    pub d: usize,
    #[arg(long, value_delimiter = ',', default_value = "6,9,12,18")]
    pub n: Vec<i64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Accepted deviation from the expected slope (default 0.4 below d = 8, 0.5 above).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct FitArgs {
    /// CSV with columns `n` and `value` (other columns ignored, `#` lines skipped).
    #[arg(long)]
    pub input: PathBuf,
    /// Expected slope; with it a verdict is reported and failure exits 1.
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub tol: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct IntegralArgs {
    /// Tree in newick form (default: the star on the given points).
    #[arg(long)]
    pub tree: Option<String>,
    /// Points as a JSON array of coordinate arrays, or a path to such a file.
    #[arg(long)]
    pub points: String,
    #[arg(long, default_value_t = 7)]
    pub d: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Deterministic quadrature instead (three points only).
    #[arg(long)]
    pub quad: bool,
    #[arg(long, default_value_t = 4)]
    pub nodes: usize,
    #[arg(long, default_value_t = 40.0)]
    pub cutoff: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub k: usize,
    /// JSON file with alpha, p_c, rho, d.
    #[arg(long)]
    pub inputs: PathBuf,
    /// Points (JSON or path); default y_0 = 0, y_i = e_i.
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long)]
    pub quad: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct TauArgs {
    #[command(flatten)]
    pub lattice: BoxArgs,
    /// Integer points as JSON (array of coordinate arrays) or a path to such a file.
    #[arg(long)]
    pub points: String,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    /// Also compute the exact value by enumeration (small boxes only).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Args, Debug, Serialize)]
pub struct RhoArgs {
    #[command(flatten)]
    pub lattice: BoxArgs,
    #[arg(long)]
    pub p: f64,
    /// Proxy radius: conditioning on ↔ ∂B(R).
    #[arg(long = "R")]
    pub r: i64,
    /// Truncation: f̲ ∈ B(M).
    #[arg(long = "M")]
    pub m: i64,
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    #[arg(long, default_value_t = MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct BubbleArgs {
    #[command(flatten)]
    pub lattice: BoxArgs,
    #[arg(long)]
    pub p: f64,
    #[arg(long = "R")]
    pub r: i64,
    /// Sum over |u|_∞ ≤ this (default: the whole box).
    #[arg(long)]
    pub sum_radius: Option<i64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct ProbeArgs {
    #[arg(long)]
    pub k: usize,
    /// Directions y_0..y_{k-1}: JSON array or a path to one.
    #[arg(long)]
    pub y: String,
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub n: Vec<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    /// One of switching, bubble-switch, bk, tree-bound, pivotal-order, conntree, witness, or `all`.
    pub suite: String,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(Error::AttemptCap { .. }) => EXIT_RUNTIME,
            Failure::Lib(_) => EXIT_USAGE,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<Artifact, Failure>;

/// What a command produced: the text to write and whether its checks passed.
struct Artifact {
    text: String,
    passed: bool,
}

impl Artifact {
    fn json(m: &RunManifest, result: impl Serialize, passed: bool) -> Self {
        let v = m.wrap(result);
        Artifact {
            text: format!("{}\n", serde_json::to_string_pretty(&v).expect("serialisable")),
            passed,
        }
    }

    fn csv(m: &RunManifest, header: &[&str], rows: Vec<Vec<String>>, passed: bool) -> Self {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory write");
        for r in rows {
            w.write_record(&r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8");
        Artifact {
            text: format!("{}\n{body}", m.csv_comment()),
            passed,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {workers} workers: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut manifest = RunManifest::start(command_name(&cli.command), cli.seed, workers);
    manifest.argv = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = pool.install(|| dispatch(&cli, &mut manifest));
    match outcome {
        Ok(artifact) => {
            if let Err(e) = write_artifact(cli.out.as_deref(), &artifact.text) {
                eprintln!("error: {e}");
                return EXIT_RUNTIME;
            }
            if artifact.passed {
                EXIT_OK
            } else {
                eprintln!("check failed; see the artifact for details");
                EXIT_ASSERTION
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sample(_) => "sample",
        Command::Trees(_) => "trees",
        Command::Val(_) => "val",
        Command::ConvCheck(_) => "conv-check",
        Command::OneLoop(_) => "one-loop",
        Command::Fit(_) => "fit",
        Command::Integral(_) => "integral",
        Command::Predict(_) => "predict",
        Command::Tau(_) => "tau",
        Command::Rho(_) => "rho",
        Command::Bubble(_) => "bubble",
        Command::Probe(_) => "probe",
        Command::Verify(_) => "verify",
    }
}

/// Writes via a temporary file and a rename, so a failed run leaves no
/// partial artifact behind.
fn write_artifact(out: Option<&Path>, text: &str) -> std::result::Result<(), String> {
    match out {
        None => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| e.to_string())
        }
        Some(path) => {
            let tmp = path.with_extension("partial");
            std::fs::write(&tmp, text)
                .and_then(|_| std::fs::rename(&tmp, path))
                .map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}

fn dispatch(cli: &Cli, m: &mut RunManifest) -> CmdResult {
    let seed = cli.seed;
    let out = match &cli.command {
        Command::Sample(a) => record(m, a).and_then(|m| cmd_sample(a, seed, m)),
        Command::Trees(a) => record(m, a).and_then(|m| cmd_trees(a, m)),
        Command::Val(a) => record(m, a).and_then(|m| cmd_val(a, seed, m)),
        Command::ConvCheck(a) => record(m, a).and_then(|m| cmd_conv(a, m)),
        Command::OneLoop(a) => record(m, a).and_then(|m| cmd_one_loop(a, seed, m)),
        Command::Fit(a) => record(m, a).and_then(|m| cmd_fit(a, m)),
        Command::Integral(a) => record(m, a).and_then(|m| cmd_integral(a, seed, m)),
        Command::Predict(a) => record(m, a).and_then(|m| cmd_predict(a, seed, m)),
        Command::Tau(a) => record(m, a).and_then(|m| cmd_tau(a, seed, m)),
        Command::Rho(a) => record(m, a).and_then(|m| cmd_rho(a, seed, m)),
        Command::Bubble(a) => record(m, a).and_then(|m| cmd_bubble(a, seed, m)),
        Command::Probe(a) => record(m, a).and_then(|m| cmd_probe(a, seed, m)),
        Command::Verify(a) => record(m, a).and_then(|m| cmd_verify(a, seed, m)),
    };
    out
}

fn record<'a>(m: &'a mut RunManifest, args: &impl Serialize) -> std::result::Result<&'a mut RunManifest, Failure> {
    if let Value::Object(map) = serde_json::to_value(args).unwrap_or(Value::Null) {
        for (k, v) in map {
            m.params.insert(k, v);
        }
    }
    Ok(m)
}

// ---------------------------------------------------------------------------
// input helpers

fn parse_tuple(s: &str) -> std::result::Result<LatticePoint, Failure> {
    s.parse::<LatticePoint>().map_err(Failure::Usage)
}

fn parse_tuples(s: &str) -> std::result::Result<Vec<LatticePoint>, Failure> {
    s.split(';').filter(|t| !t.trim().is_empty()).map(parse_tuple).collect()
}

/// Inline JSON when it looks like JSON, otherwise a file holding it.
fn json_arg<T: serde::de::DeserializeOwned>(s: &str, what: &str) -> std::result::Result<T, Failure> {
    let text = if s.trim_start().starts_with('[') || s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        std::fs::read_to_string(s).map_err(|e| Failure::Usage(format!("{what}: {s}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{what}: {e}")))
}

fn build_box(b: &BoxArgs) -> std::result::Result<BoxLattice, Failure> {
    if b.dim == 0 || b.radius < 0 {
        return Err(Failure::Usage("--dim must be positive and --radius nonnegative".into()));
    }
    Ok(BoxLattice::with_limit(LatticeBox::centered(b.dim, b.radius), b.max_vertices)?)
}

fn check(cond: bool, msg: impl Into<String>) -> std::result::Result<(), Failure> {
    if cond {
        Ok(())
    } else {
        Err(Failure::Usage(msg.into()))
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:e}")
}

// ---------------------------------------------------------------------------
// commands

fn cmd_sample(a: &SampleArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let graph = match &a.graph {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            Arc::new(Graph::parse_edge_list(&text)?)
        }
        None => build_box(&a.lattice)?.graph,
    };
    let config = sample_configuration(graph.clone(), a.p, seed)?;
    if a.bits {
        m.finish();
        return Ok(Artifact {
            text: format!("{}\n{}", m.csv_comment(), config.export(Some(seed))),
            passed: true,
        });
    }
    let part = clusters(&config);
    let largest = (0..part.count()).map(|c| part.members(c).len()).max().unwrap_or(0);
    let mut result = json!({
        "graph_hash": graph.hash_hex(),
        "vertices": graph.num_vertices(),
        "edges": graph.num_edges(),
        "p": a.p,
        "open": config.open_count(),
        "clusters": part.count(),
        "largest_cluster": largest,
        "bits": config.statuses().iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
    });
    if let Some(spec) = &a.marked {
        let marked: Vec<VertexId> = parse_tuples(spec)?
            .iter()
            .map(|p| graph.vertex(p))
            .collect::<crate::Result<_>>()?;
        result["marked"] = json!(marked.iter().map(|&v| graph.point(v).0.clone()).collect::<Vec<_>>());
        let connected = marked.iter().all(|&v| part.same(v, marked[0]));
        result["connected"] = json!(connected);
        if a.emit_trees {
            result["tree"] = if connected {
                let t = build_connectivity_tree(&config, &marked)?;
                let mut j = t.to_json(&graph);
                j["classification"] = match classify_tree(&t) {
                    TreeClassification::Binary(bt) => json!({"binary": bt.newick()}),
                    TreeClassification::Degenerate(r) => json!({"degenerate": r}),
                };
                j
            } else {
                Value::Null
            };
        }
    }
    m.finish();
    Ok(Artifact::json(m, result, true))
}

fn cmd_trees(a: &TreesArgs, m: &mut RunManifest) -> CmdResult {
    let trees = enumerate_trees(a.k)?;
    m.finish();
    match a.emit {
        TreeEmit::Newick => {
            let mut text = format!("{}\n", m.csv_comment());
            for t in &trees {
                text.push_str(&t.newick());
                text.push('\n');
            }
            Ok(Artifact { text, passed: true })
        }
        TreeEmit::Json => {
            let list: Vec<Value> = trees
                .iter()
                .map(|t| json!({"newick": t.newick(), "edges": t.num_edges(), "internal": t.num_internal()}))
                .collect();
            Ok(Artifact::json(m, json!({"k": a.k, "count": trees.len(), "trees": list}), true))
        }
    }
}

#[derive(serde::Deserialize)]
struct DiagramFile {
    d: usize,
    pins: Vec<Vec<i64>>,
    #[serde(default)]
    free: usize,
    edges: Vec<Vec<f64>>,
}

fn load_diagram(path: &Path) -> std::result::Result<Diagram, Failure> {
    let f: DiagramFile = json_arg(&path.to_string_lossy(), "diagram")?;
    let mut g = Diagram::new(f.d);
    for p in f.pins {
        check(p.len() == f.d, format!("diagram pin {p:?} is not {}-dimensional", f.d))?;
        g.pin(LatticePoint::new(p));
    }
    for _ in 0..f.free {
        g.free();
    }
    for e in f.edges {
        check(e.len() == 2 || e.len() == 3, "diagram edges are [a, b] or [a, b, exponent]")?;
        let (a, b) = (e[0] as usize, e[1] as usize);
        match e.get(2) {
            Some(&x) => g.edge_with(a, b, x),
            None => g.edge(a, b),
        }
    }
    g.validate()?;
    Ok(g)
}

fn preset_diagram(p: Preset, d: usize, n: i64) -> Diagram {
    let o = LatticePoint::origin(d);
    match p {
        Preset::Star => star_diagram(&[o, LatticePoint::axis(d, 0, n), LatticePoint::axis(d, 1, n)]),
        Preset::OneLoop => one_loop_diagram(&o, &LatticePoint::axis(d, 0, n)),
        Preset::FourCycle => {
            let s = square_pins(d, n);
            four_cycle_diagram([&s[0], &s[1], &s[2], &s[3]])
        }
    }
}

fn cmd_val(a: &ValArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let instances: Vec<(i64, Diagram)> = match (&a.diagram, a.preset) {
        (Some(path), _) => vec![(0, load_diagram(path)?)],
        (None, Some(p)) => {
            check(a.d >= 2, "presets need d ≥ 2")?;
            a.n.iter().map(|&n| (n, preset_diagram(p, a.d, n))).collect()
        }
        (None, None) => return Err(Failure::Usage("give --diagram or --preset".into())),
    };
    let method = match a.method {
        MethodArg::Exact => Method::Exact,
        MethodArg::Mc => Method::ImportanceMc { samples: a.samples, seed },
    };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for (i, (n, g)) in instances.iter().enumerate() {
        let pins: Vec<&LatticePoint> = g.pinned().into_iter().map(|(_, p)| p).collect();
        let l = a.radius.unwrap_or_else(|| default_truncation(&pins));
        let v = val(g, &LatticeBox::centered(g.d, l), &method)?;
        let doubled = if a.doubling {
            let v2 = val(g, &LatticeBox::centered(g.d, 2 * l), &method)?;
            Some(json!({"radius": 2 * l, "value": v2.value(), "relative_change": (v2.value() - v.value()) / v.value()}))
        } else {
            None
        };
        rows.push(vec![i.to_string(), n.to_string(), fmt_f(v.value()), fmt_f(v.stderr())]);
        results.push(json!({"instance": i, "n": n, "radius": l, "valuation": v, "doubling": doubled}));
    }
    let fit = if instances.len() >= 3 {
        let pts: Vec<(f64, f64)> = instances.iter().zip(&results).map(|((n, _), r)| (*n as f64, r["valuation"]["value"].as_f64().unwrap_or(0.0))).collect();
        fit_scaling(&pts).ok()
    } else {
        None
    };
    m.finish();
    match a.format {
        Format::Csv => {
            if let Some(f) = &fit {
                eprintln!("{}", json!({"slope": f.slope, "residual_max": f.residual_max}));
            }
            Ok(Artifact::csv(m, &["instance", "n", "value", "stderr"], rows, true))
        }
        Format::Json => Ok(Artifact::json(m, json!({"rows": results, "fit": fit}), true)),
    }
}

fn cmd_conv(a: &ConvArgs, m: &mut RunManifest) -> CmdResult {
    let d = a.d;
    check(d >= 1, "--d must be positive")?;
    let kind = match a.variant {
        VariantArg::Std => VariantKind::Std,
        VariantArg::Log => VariantKind::Log,
        VariantArg::Triple => VariantKind::Triple,
    };
    let cases = match &a.y {
        Some(y) => {
            let y = parse_tuple(y)?;
            check(y.dim() == d, "--y must have d coordinates")?;
            let x = LatticePoint::origin(d);
            let w = a.w.as_deref().map(parse_tuple).transpose()?;
            let variant = match (kind, &w) {
                (VariantKind::Triple, Some(w)) => Variant::Triple(w.clone()),
                (VariantKind::Triple, None) => return Err(Failure::Usage("the triple variant needs --w".into())),
                (VariantKind::Log, _) => Variant::Log,
                (VariantKind::Std, _) => Variant::Std,
            };
            let mut pins = vec![&x, &y];
            if let Some(w) = &w {
                pins.push(w);
            }
            let l = a.radius.unwrap_or_else(|| default_truncation(&pins));
            let r = check_convolution(&x, &y, a.a, a.b, l, &variant)?;
            vec![(crate::diagrams::ConvCase { x: x.clone(), y: y.clone(), w: w.clone() }, r, l)]
        }
        None => run_convolution_family(d, a.a, a.b, kind)?
            .into_iter()
            .map(|(c, r)| {
                let mut pins = vec![&c.x, &c.y];
                if let Some(w) = &c.w {
                    pins.push(w);
                }
                let l = default_truncation(&pins);
                (c, r, l)
            })
            .collect(),
    };
    let (lo, hi) = cases.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, r, _)| (lo.min(r.ratio), hi.max(r.ratio)));
    let spread = hi / lo;
    let bounded = cases.iter().all(|(_, r, _)| r.ratio.is_finite() && r.ratio > 0.0);
    let passed = bounded && (cases.len() < 2 || spread <= a.max_spread);
    let summary = json!({"instances": cases.len(), "min_ratio": lo, "max_ratio": hi, "spread": spread, "max_spread": a.max_spread, "pass": passed});
    m.finish();
    match a.format {
        Format::Csv => {
            eprintln!("{summary}");
            let rows = cases
                .iter()
                .enumerate()
                .map(|(i, (c, r, l))| {
                    vec![
                        i.to_string(),
                        c.y.to_string(),
                        c.w.as_ref().map(|w| w.to_string()).unwrap_or_default(),
                        l.to_string(),
                        fmt_f(r.lhs),
                        fmt_f(r.rhs),
                        fmt_f(r.ratio),
                    ]
                })
                .collect();
            Ok(Artifact::csv(m, &["instance", "y", "w", "radius", "lhs", "rhs", "ratio"], rows, passed))
        }
        Format::Json => {
            let rows: Vec<Value> = cases
                .iter()
                .map(|(c, r, l)| json!({"x": c.x, "y": c.y, "w": c.w, "radius": l, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio}))
                .collect();
            Ok(Artifact::json(m, json!({"summary": summary, "rows": rows}), passed))
        }
    }
}

/// Exponent of the one-loop diagram in n, by regime of d (the d = 8 log is ignored).
pub fn one_loop_exponent(d: usize) -> f64 {
    let d = d as f64;
    if d > 8.0 {
        4.0 - d
    } else if d == 8.0 {
        -4.0
    } else {
        12.0 - 2.0 * d
    }
}

fn cmd_one_loop(a: &OneLoopArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    check(a.d > 6, "the one-loop regimes need d > 6")?;
    check(a.n.len() >= 3 && a.n.iter().all(|&n| n >= 1), "need at least three positive n")?;
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for (i, &n) in a.n.iter().enumerate() {
        let w1 = LatticePoint::origin(a.d);
        let w2 = LatticePoint::axis(a.d, 0, n);
        let v = one_loop(&w1, &w2, 2 * n, a.samples, crate::rng::mix(seed, i as u64))?;
        rows.push((i, n, v));
        pts.push((n as f64, v.value()));
    }
    let fit = fit_scaling(&pts)?;
    let expected = one_loop_exponent(a.d);
    let tol = a.tol.unwrap_or(if a.d < 8 { 0.4 } else { 0.5 });
    let passed = (fit.slope - expected).abs() <= tol;
    let summary = json!({"slope": fit.slope, "expected": expected, "tol": tol, "pass": passed, "residual_max": fit.residual_max});
    m.finish();
    match a.format {
        Format::Csv => {
            eprintln!("{summary}");
            let rows = rows
                .iter()
                .map(|(i, n, v)| vec![i.to_string(), n.to_string(), fmt_f(v.value()), fmt_f(v.stderr())])
                .collect();
            Ok(Artifact::csv(m, &["instance", "n", "value", "stderr"], rows, passed))
        }
        Format::Json => {
            let rows: Vec<Value> = rows.iter().map(|(i, n, v)| json!({"instance": i, "n": n, "valuation": v})).collect();
            Ok(Artifact::json(m, json!({"summary": summary, "fit": fit, "rows": rows}), passed))
        }
    }
}

fn cmd_fit(a: &FitArgs, m: &mut RunManifest) -> CmdResult {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Failure::Usage(format!("{}: {e}", a.input.display())))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let headers = r.headers().map_err(|e| Failure::Usage(format!("fit input: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Failure::Usage(format!("fit input: missing column `{name}`")))
    };
    let (ni, vi) = (col("n")?, col("value")?);
    let mut pts = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Usage(format!("fit input: {e}")))?;
        let num = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Failure::Lib(Error::Parse { line: line + 2, msg: "expected numbers in `n` and `value`".into() }))
        };
        pts.push((num(ni)?, num(vi)?));
    }
    let fit = fit_scaling(&pts)?;
    let verdict = a.expect.map(|e| (fit.slope - e).abs() <= a.tol);
    m.finish();
    Ok(Artifact::json(
        m,
        json!({"slope": fit.slope, "intercept": fit.intercept, "residual_max": fit.residual_max, "points": pts.len(), "expected": a.expect, "tol": a.tol, "pass": verdict}),
        verdict.unwrap_or(true),
    ))
}

fn continuum_points(s: &str) -> std::result::Result<Vec<ContinuumPoint>, Failure> {
    let raw: Vec<Vec<f64>> = json_arg(s, "points")?;
    Ok(raw.into_iter().map(ContinuumPoint).collect())
}

fn cmd_integral(a: &IntegralArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let y = continuum_points(&a.points)?;
    let result = if a.quad {
        check(y.len() == 3, "quadrature takes exactly three points")?;
        check(a.tree.is_none(), "quadrature evaluates the three-point star only")?;
        crate::integrals::check_points(&y, a.d)?;
        let rel = |p: &ContinuumPoint| ContinuumPoint(p.0.iter().zip(&y[0].0).map(|(a, b)| a - b).collect());
        let q = quad_i3(&rel(&y[1]), &rel(&y[2]), a.d, QuadParams { nodes: a.nodes, cutoff: a.cutoff })?;
        json!({"mean": q.value, "stderr": q.error, "error": q.error, "tail": q.tail, "tail_bound": q.tail_bound, "method": "quadrature"})
    } else {
        let tree = match &a.tree {
            Some(t) => AbstractTree::parse_newick(t)?,
            None if y.len() == 3 => AbstractTree::star3(),
            None => return Err(Failure::Usage("--tree is required unless there are three points".into())),
        };
        check(tree.k() == y.len(), format!("the tree has {} leaves but {} points were given", tree.k(), y.len()))?;
        let e = eval_i_t(&tree, &y, a.d, a.samples, seed)?;
        json!({"mean": e.mean, "stderr": e.stderr, "samples": e.samples, "tree": tree.newick(), "method": "monte-carlo"})
    };
    m.finish();
    Ok(Artifact::json(m, result, true))
}

fn cmd_predict(a: &PredictArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let inputs = load_inputs(&a.inputs)?;
    check(a.k >= 2, "--k must be at least 2")?;
    let y = match &a.points {
        Some(s) => continuum_points(s)?,
        None => {
            check(a.k <= inputs.d + 1, "default points need k ≤ d + 1")?;
            (0..a.k)
                .map(|i| {
                    let mut c = vec![0.0; inputs.d];
                    if i > 0 {
                        c[i - 1] = 1.0;
                    }
                    ContinuumPoint(c)
                })
                .collect()
        }
    };
    check(y.len() == a.k, format!("--k {} but {} points", a.k, y.len()))?;
    let integrator = if a.quad {
        Integrator::Quadrature(QuadParams::default())
    } else {
        Integrator::MonteCarlo { samples: a.samples, seed }
    };
    let pred = predicted_kpoint_constant(&y, &inputs, None, integrator)?;
    m.finish();
    Ok(Artifact::json(m, json!({"inputs": inputs, "beta": inputs.beta(), "prediction": pred}), true))
}

fn cmd_tau(a: &TauArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let lab = build_box(&a.lattice)?;
    let raw: Vec<Vec<i64>> = json_arg(&a.points, "points")?;
    let pts: Vec<LatticePoint> = raw.into_iter().map(LatticePoint::new).collect();
    check(!pts.is_empty(), "need at least one point")?;
    let est = estimate_tau_k_box(&lab, a.p, &pts, a.trials, seed)?;
    let exact = if a.exact {
        let vs: Vec<VertexId> = pts.iter().map(|p| lab.vertex(p)).collect::<crate::Result<_>>()?;
        let ev = EventSpec::Gamma(vs);
        Some(exact_event_probability(&lab.graph, a.p, &ev)?)
    } else {
        None
    };
    m.finish();
    Ok(Artifact::json(m, json!({"estimate": est, "exact": exact}), true))
}

fn cmd_rho(a: &RhoArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let lab = build_box(&a.lattice)?;
    let est = estimate_rho_truncated_capped(&lab, a.p, a.r, a.m, a.trials, seed, a.max_attempts)?;
    m.finish();
    Ok(Artifact::json(m, json!({"proxy": true, "rho": est}), true))
}

fn cmd_bubble(a: &BubbleArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let lab = build_box(&a.lattice)?;
    let est = estimate_bubble_capped(&lab, a.p, a.r, a.sum_radius, a.trials, seed, a.max_attempts)?;
    m.finish();
    Ok(Artifact::json(m, json!({"proxy": true, "bubble": est}), true))
}

fn cmd_probe(a: &ProbeArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let y: Vec<Vec<f64>> = json_arg(&a.y, "directions")?;
    check(y.len() == a.k, format!("--k {} but {} directions", a.k, y.len()))?;
    let rows = scaling_probe(&y, a.d, a.p, &a.n, a.trials, seed)?;
    m.finish();
    match a.format {
        Format::Csv => {
            let out = rows
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![
                        i.to_string(),
                        r.n.to_string(),
                        fmt_f(r.tau.mean),
                        fmt_f(r.tau.stderr),
                        fmt_f(r.rescaled),
                        fmt_f(r.rescaled_stderr),
                    ]
                })
                .collect();
            Ok(Artifact::csv(m, &["instance", "n", "value", "stderr", "rescaled", "rescaled_stderr"], out, true))
        }
        Format::Json => Ok(Artifact::json(m, json!({"rows": rows}), true)),
    }
}

fn cmd_verify(a: &VerifyArgs, seed: u64, m: &mut RunManifest) -> CmdResult {
    let names: Vec<&str> = if a.suite == "all" { SUITES.to_vec() } else { vec![a.suite.as_str()] };
    let reports = names.iter().map(|s| run_suite(s, seed)).collect::<crate::Result<Vec<_>>>()?;
    let passed = reports.iter().all(|r| r.passed());
    m.finish();
    if reports.len() == 1 {
        Ok(Artifact::json(m, &reports[0], passed))
    } else {
        Ok(Artifact::json(m, &reports, passed))
    }
}
