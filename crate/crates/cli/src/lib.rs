//! The `petriform` command line: argument parsing, dispatch to the library
//! and report rendering. [`run`] is the whole program minus process exit,
//! so it can be driven from tests.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use petriform::export;
use petriform::net::{parse_net, serialize_net, PetriNet, DEFAULT_REACHABILITY_CAP};
use petriform::oracle::{self, OracleError};
use petriform::product_form::{self, Ergodicity, InvariantMeasure, ProductFormError};
use petriform::rational::format_rational;
use petriform::reductions::{self, ReductionError};
use petriform::structure;
use petriform::traffic::{self, NlteOutcome, Solved, TrafficError, DEFAULT_TOLERANCE};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Version tag of the JSON report layout.
pub const SCHEMA: &str = "petriform-report/1";

pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 2;
    pub const PRECONDITION: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const USAGE: i32 = 64;
    pub const IO: i32 = 66;
}

#[derive(Parser, Debug)]
#[command(name = "petriform", version, about = "Product-form analysis of Markovian Petri nets")]
struct Cli {
    /// Relative tolerance for residuals and comparisons.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    tol: f64,
    /// Maximum number of markings explored.
    #[arg(long, global = true, env = "PETRIFORM_CAP")]
    cap: Option<usize>,
    /// Seed for simulation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Complexes, ranks, deficiency, weak reversibility, net class.
    Analyze {
        file: PathBuf,
        /// Print a DOT graph instead of the report.
        #[arg(long, value_enum)]
        dot: Option<DotKind>,
    },
    /// Solve the linear and non-linear traffic equations.
    Solve {
        file: PathBuf,
        /// Include the matrix B with B·N = A.
        #[arg(long)]
        show_b: bool,
    },
    /// Product-form invariant measure over the reachable markings.
    Invariant {
        file: PathBuf,
        /// Normalize into a stationary distribution.
        #[arg(long)]
        normalize: bool,
    },
    /// Compare the product form against a direct stationary solve.
    Verify { file: PathBuf },
    /// Simulate the marking process.
    Simulate {
        file: PathBuf,
        /// Model time to simulate.
        #[arg(long)]
        horizon: f64,
    },
    /// Transform into a state machine, a reduced GSM or a Jackson network.
    Reduce {
        file: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        /// Reduce even when the net is not weakly reversible.
        #[arg(long)]
        force: bool,
    },
    /// Export the net and its marking graph as JSON, or a graph as DOT.
    Export {
        file: PathBuf,
        #[arg(long, value_enum)]
        dot: Option<DotKind>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DotKind {
    Reaction,
    Marking,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Target {
    Sm,
    Rgsm,
    Jackson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Info,
    Warning,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub level: Level,
    pub message: String,
}

/// Everything a subcommand reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub command: String,
    pub input: String,
    /// SHA-256 of the normalized net in file syntax.
    pub net_digest: String,
    pub payload: Value,
    pub diagnostics: Vec<Diagnostic>,
}

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<TrafficError> for Failure {
    fn from(e: TrafficError) -> Self {
        let code = match e {
            TrafficError::ResidualTooLarge { .. } => exit::NUMERIC,
            TrafficError::NonPositiveInput => exit::PRECONDITION,
        };
        Failure::new(code, e)
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        let code = match e {
            OracleError::SingularBeyondTolerance { .. } => exit::NUMERIC,
            _ => exit::PRECONDITION,
        };
        Failure::new(code, e)
    }
}

impl From<ProductFormError> for Failure {
    fn from(e: ProductFormError) -> Self {
        Failure::new(exit::PRECONDITION, e)
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        Failure::new(exit::PRECONDITION, e)
    }
}

/// Parsed state shared by all subcommands.
struct Ctx {
    net: PetriNet,
    cap: usize,
    tol: f64,
    seed: u64,
    diagnostics: Vec<Diagnostic>,
}

impl Ctx {
    fn warn(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            level: Level::Warning,
            message: message.into(),
        });
    }

    fn info(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            level: Level::Info,
            message: message.into(),
        });
    }

    fn reachability(&mut self) -> petriform::net::MarkingGraph {
        let g = self.net.reachability(self.cap);
        if g.truncated() {
            self.warn(format!("reachability truncated at {} markings", self.cap));
        }
        g
    }

    fn solve(&mut self) -> Result<Solved, Failure> {
        match traffic::solve_nlte(&self.net, self.tol)? {
            NlteOutcome::Solved(s) => Ok(*s),
            NlteOutcome::NoSolution(w) => Err(Failure::new(
                exit::PRECONDITION,
                format!(
                    "no product form from the traffic equations: {:?} (existence {:?}, deficiency {})",
                    w.reason, w.existence, w.deficiency
                ),
            )),
        }
    }
}

/// Text and JSON renderings of a successful command.
struct Rendered {
    payload: Value,
    text: String,
}

pub fn digest(net: &PetriNet) -> String {
    Sha256::digest(serialize_net(net).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs the program on `args` (including the program name).
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            return if code == exit::OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };

    let (name, file) = match &cli.command {
        Command::Analyze { file, .. } => ("analyze", file),
        Command::Solve { file, .. } => ("solve", file),
        Command::Invariant { file, .. } => ("invariant", file),
        Command::Verify { file } => ("verify", file),
        Command::Simulate { file, .. } => ("simulate", file),
        Command::Reduce { file, .. } => ("reduce", file),
        Command::Export { file, .. } => ("export", file),
    };
    let input = file
        .file_name()
        .map_or_else(|| file.display().to_string(), |f| f.to_string_lossy().into_owned());

    let fail = |code: i32, message: String, digest: String| {
        let stdout = if cli.json {
            let report = Report {
                schema: SCHEMA.into(),
                command: name.into(),
                input: input.clone(),
                net_digest: digest,
                payload: Value::Null,
                diagnostics: vec![Diagnostic {
                    level: Level::Error,
                    message: message.clone(),
                }],
            };
            serde_json::to_string_pretty(&report).unwrap() + "\n"
        } else {
            String::new()
        };
        Outcome {
            code,
            stdout,
            stderr: format!("error: {message}\n"),
        }
    };

    let text = match read(file) {
        Ok(t) => t,
        Err(msg) => return fail(exit::IO, msg, String::new()),
    };
    let parsed = match parse_net(&text) {
        Ok(p) => p,
        Err(e) => return fail(exit::PARSE, format!("{}: {e}", file.display()), String::new()),
    };
    let mut ctx = Ctx {
        net: parsed.net,
        cap: cli.cap.unwrap_or(DEFAULT_REACHABILITY_CAP).max(1),
        tol: cli.tol,
        seed: cli.seed,
        diagnostics: Vec::new(),
    };
    for w in &parsed.warnings {
        ctx.warn(w.to_string());
    }
    let net_digest = digest(&ctx.net);

    let result = match &cli.command {
        Command::Analyze { dot, .. } => analyze(&mut ctx, *dot),
        Command::Solve { show_b, .. } => solve(&mut ctx, *show_b),
        Command::Invariant { normalize, .. } => invariant(&mut ctx, *normalize),
        Command::Verify { .. } => verify(&mut ctx),
        Command::Simulate { horizon, .. } => simulate(&mut ctx, *horizon),
        Command::Reduce { to, force, .. } => reduce(&mut ctx, *to, *force),
        Command::Export { dot, .. } => export_cmd(&mut ctx, *dot),
    };

    match result {
        Err(f) => fail(f.code, f.message, net_digest),
        Ok(rendered) => {
            let code = if ctx.diagnostics.iter().any(|d| d.level == Level::Error) {
                exit::NUMERIC
            } else {
                exit::OK
            };
            let mut stderr = String::new();
            let stdout = if cli.json {
                let report = Report {
                    schema: SCHEMA.into(),
                    command: name.into(),
                    input,
                    net_digest,
                    payload: rendered.payload,
                    diagnostics: ctx.diagnostics,
                };
                serde_json::to_string_pretty(&report).unwrap() + "\n"
            } else {
                for d in &ctx.diagnostics {
                    let level = match d.level {
                        Level::Info => "note",
                        Level::Warning => "warning",
                        Level::Error => "error",
                    };
                    writeln!(stderr, "{level}: {}", d.message).unwrap();
                }
                rendered.text
            };
            Outcome { code, stdout, stderr }
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn analyze(ctx: &mut Ctx, dot: Option<DotKind>) -> Result<Rendered, Failure> {
    if let Some(kind) = dot {
        let text = match kind {
            DotKind::Reaction => export::reaction_graph_dot(&ctx.net),
            DotKind::Marking => {
                let g = ctx.reachability();
                export::marking_graph_dot(&ctx.net, &g)
            }
        };
        return Ok(Rendered {
            payload: json!({ "dot": text }),
            text,
        });
    }
    let r = structure::analyze(&ctx.net);
    let mut text = String::new();
    writeln!(text, "places            {}", r.places).unwrap();
    writeln!(text, "transitions       {}", r.transitions).unwrap();
    writeln!(text, "complexes         {} ({})", r.complex_count, r.complexes.join(", ")).unwrap();
    writeln!(text, "linkage classes   {}", r.linkage_classes).unwrap();
    writeln!(text, "rank N            {}", r.rank_n).unwrap();
    writeln!(text, "rank A            {}", r.rank_a).unwrap();
    writeln!(text, "deficiency        {}", r.deficiency).unwrap();
    writeln!(text, "weakly reversible {}", yes(r.weakly_reversible)).unwrap();
    writeln!(text, "weighted          {}", yes(r.class.weighted)).unwrap();
    writeln!(text, "free-choice       {}", yes(r.class.free_choice)).unwrap();
    writeln!(text, "state machine     {}", yes(r.class.state_machine)).unwrap();
    writeln!(text, "generalized SM    {}", yes(r.class.generalized_state_machine)).unwrap();
    if let Some(clusters) = &r.clusters {
        for c in clusters {
            writeln!(text, "cluster           {{{}}}", c.places.iter().chain(&c.transitions).cloned().collect::<Vec<_>>().join(", ")).unwrap();
        }
    }
    Ok(Rendered {
        payload: serde_json::to_value(&r).unwrap(),
        text,
    })
}

fn solve(ctx: &mut Ctx, show_b: bool) -> Result<Rendered, Failure> {
    let outcome = traffic::solve_nlte(&ctx.net, ctx.tol)?;
    let s = match outcome {
        NlteOutcome::NoSolution(w) => {
            let reason = serde_json::to_value(w.reason).unwrap();
            let existence = serde_json::to_value(w.existence).unwrap();
            ctx.info(format!(
                "no positive solution is produced: {} ({})",
                reason.as_str().unwrap(),
                existence.as_str().unwrap()
            ));
            let text = format!(
                "no solution: {} (existence {}, deficiency {})\n",
                reason.as_str().unwrap(),
                existence.as_str().unwrap(),
                w.deficiency
            );
            return Ok(Rendered {
                payload: json!({ "status": "no-solution", "witness": w }),
                text,
            });
        }
        NlteOutcome::Solved(s) => s,
    };
    let net = &ctx.net;
    let labels: Vec<String> = s.lte.complexes.iter().map(|c| net.bag_label(c)).collect();
    let v = traffic::format_values(&s.lte.v);
    let mut text = String::from("linear traffic solution v\n");
    for (l, x) in labels.iter().zip(&v) {
        writeln!(text, "  {l:<16} {x}").unwrap();
    }
    text.push_str("non-linear solution u\n");
    for (p, u) in net.places().iter().zip(&s.nlte.u) {
        writeln!(text, "  {p:<16} {u:.12e}").unwrap();
    }
    writeln!(text, "max residual {:.3e}", s.nlte.max_residual).unwrap();

    let mut payload = json!({
        "status": "solved",
        "complexes": labels,
        "v": v,
        "reference": s.lte.reference.iter().map(|&c| net.bag_label(&s.lte.complexes[c])).collect::<Vec<_>>(),
        "places": net.places(),
        "u": s.nlte.u,
        "log_u": s.nlte.log_u,
        "residuals": s.nlte.residuals,
        "max_residual": s.nlte.max_residual,
    });
    if show_b {
        let m = &s.b.matrix;
        let rows: Vec<Vec<String>> = (0..m.rows())
            .map(|i| m.row(i).iter().map(format_rational).collect())
            .collect();
        text.push_str("B (rows: complexes, columns: places)\n");
        for (l, row) in labels.iter().zip(&rows) {
            writeln!(text, "  {l:<16} [{}]", row.join(", ")).unwrap();
        }
        payload["b"] = json!({ "aligned": s.b.aligned, "rows": rows });
    }
    Ok(Rendered { payload, text })
}

fn marking_label(m: &petriform::net::Marking) -> String {
    m.to_string()
}

fn invariant(ctx: &mut Ctx, normalize: bool) -> Result<Rendered, Failure> {
    let s = ctx.solve()?;
    let measure = InvariantMeasure::new(&s.nlte.u, ctx.net.kinetics())?;
    let g = ctx.reachability();
    let verdict = product_form::ergodicity_report(&ctx.net, &measure, &g);
    let mut text = String::from("u\n");
    for (p, u) in ctx.net.places().iter().zip(&s.nlte.u) {
        writeln!(text, "  {p:<16} {u:.12e}").unwrap();
    }
    let verdict_text = match &verdict {
        Ergodicity::ErgodicFinite { states } => format!("ergodic (finite, {states} states)"),
        Ergodicity::ErgodicMassAction { .. } => "ergodic (mass-action kinetics)".into(),
        Ergodicity::ConditionallyErgodic { note, .. } => format!("undecided: {note}"),
        Ergodicity::Unknown { note } => format!("unknown: {note}"),
    };
    writeln!(text, "ergodicity: {verdict_text}").unwrap();

    let mut payload = json!({
        "places": ctx.net.places(),
        "u": s.nlte.u,
        "ergodicity": verdict,
    });
    if g.truncated() {
        ctx.info("measure listed over the explored markings only");
    }
    let (values, log_k): (Vec<f64>, Option<f64>) = if normalize {
        let d = product_form::normalize(&measure, &g)?;
        (d.probabilities, Some(d.log_normalizing_constant))
    } else {
        (g.nodes().iter().map(|m| measure.value(m)).collect(), None)
    };
    let states: Vec<Value> = g
        .nodes()
        .iter()
        .zip(&values)
        .map(|(m, v)| json!({ "marking": m.as_slice(), "value": v }))
        .collect();
    writeln!(text, "{}", if normalize { "stationary distribution" } else { "π (unnormalized)" }).unwrap();
    for (m, v) in g.nodes().iter().zip(&values) {
        writeln!(text, "  {:<16} {v:.12e}", marking_label(m)).unwrap();
    }
    if let Some(k) = log_k {
        writeln!(text, "log normalizing constant {k:.12e}").unwrap();
        payload["log_normalizing_constant"] = json!(k);
    }
    payload["normalized"] = json!(normalize);
    payload["states"] = Value::Array(states);
    Ok(Rendered { payload, text })
}

fn verify(ctx: &mut Ctx) -> Result<Rendered, Failure> {
    let s = ctx.solve()?;
    let measure = InvariantMeasure::new(&s.nlte.u, ctx.net.kinetics())?;
    let g = ctx.reachability();
    let pf = product_form::normalize(&measure, &g)?;
    let q = oracle::generator(&ctx.net, &g)?;
    let exact = oracle::stationary_numeric(&q)?;
    let err = oracle::compare(&pf, &exact)?;
    let tv = oracle::total_variation(&pf, &exact)?;
    let balance = product_form::balance_residuals(&ctx.net, &measure, &g)?
        .into_iter()
        .fold(0.0, f64::max);
    if !(err < ctx.tol) {
        ctx.diagnostics.push(Diagnostic {
            level: Level::Error,
            message: format!("product form differs from the direct solve: {err:e} ≥ {:e}", ctx.tol),
        });
    }
    let text = format!(
        "states                 {}\nmax relative error     {err:.3e}\ntotal variation        {tv:.3e}\nmax balance residual   {balance:.3e}\ntolerance              {:e}\n{}\n",
        g.len(),
        ctx.tol,
        if err < ctx.tol { "agree" } else { "DISAGREE" }
    );
    Ok(Rendered {
        payload: json!({
            "states": g.len(),
            "max_relative_error": err,
            "total_variation": tv,
            "max_balance_residual": balance,
            "tolerance": ctx.tol,
            "agree": err < ctx.tol,
        }),
        text,
    })
}

fn simulate(ctx: &mut Ctx, horizon: f64) -> Result<Rendered, Failure> {
    let r = oracle::simulate(&ctx.net, ctx.seed, horizon).map_err(|e| Failure::new(exit::USAGE, e))?;
    if let Some(m) = &r.deadlock {
        ctx.warn(format!("deadlock at {m}"));
    }
    let g = ctx.net.reachability(ctx.cap);
    let mut tv = None;
    if !g.truncated() {
        if let Ok(exact) = oracle::generator(&ctx.net, &g).and_then(|q| oracle::stationary_numeric(&q)) {
            let emp = r.empirical_on(&exact.support);
            tv = oracle::total_variation(&emp, &exact).ok();
        }
    }
    let mut text = format!("seed {}  horizon {}  jumps {}\n", r.seed, r.horizon, r.jumps);
    for (m, f) in r.states.iter().zip(&r.occupancy) {
        writeln!(text, "  {:<16} {f:.6}", marking_label(m)).unwrap();
    }
    if let Some(tv) = tv {
        writeln!(text, "total variation to the stationary distribution {tv:.3e}").unwrap();
    }
    Ok(Rendered {
        payload: json!({
            "seed": r.seed,
            "horizon": r.horizon,
            "jumps": r.jumps,
            "deadlock": r.deadlock.as_ref().map(|m| m.as_slice()),
            "occupancy": r.states.iter().zip(&r.occupancy)
                .map(|(m, f)| json!({ "marking": m.as_slice(), "fraction": f }))
                .collect::<Vec<_>>(),
            "total_variation_to_stationary": tv,
        }),
        text,
    })
}

fn reduce(ctx: &mut Ctx, to: Target, force: bool) -> Result<Rendered, Failure> {
    match to {
        Target::Sm => {
            let sm = reductions::associated_sm(&ctx.net)?;
            let text = serialize_net(&sm);
            Ok(Rendered {
                payload: json!({ "net": text, "structure": structure::analyze(&sm) }),
                text,
            })
        }
        Target::Rgsm => {
            let r = reductions::rgsm(&ctx.net, force)?;
            for w in &r.warnings {
                ctx.warn(w.clone());
            }
            let mut text = String::new();
            if r.forced {
                text.push_str("# forced: the source net is not weakly reversible\n");
            }
            text.push_str(&serialize_net(&r.net));
            Ok(Rendered {
                payload: json!({
                    "net": serialize_net(&r.net),
                    "forced": r.forced,
                    "complexes": r.complexes.iter().map(|c| ctx.net.bag_label(c)).collect::<Vec<_>>(),
                    "structure": structure::analyze(&r.net),
                }),
                text,
            })
        }
        Target::Jackson => {
            let j = reductions::to_jackson(&ctx.net)?;
            let value = serde_json::to_value(&j).unwrap();
            Ok(Rendered {
                text: serde_json::to_string_pretty(&value).unwrap() + "\n",
                payload: value,
            })
        }
    }
}

fn export_cmd(ctx: &mut Ctx, dot: Option<DotKind>) -> Result<Rendered, Failure> {
    if dot.is_some() {
        return analyze(ctx, dot);
    }
    let g = ctx.reachability();
    let value = json!({
        "net": export::net_json(&ctx.net),
        "marking_graph": export::marking_graph_json(&ctx.net, &g),
    });
    Ok(Rendered {
        text: serde_json::to_string_pretty(&value).unwrap() + "\n",
        payload: value,
    })
}
