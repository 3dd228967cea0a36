//! The `btflow` command line. [`run`] is the whole program; `main` only
//! forwards the process arguments and exit code.

pub mod plant;

use std::ffi::OsString;
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use btflow_core::body::ExternRegistry;
use btflow_core::check::{CheckItem, Severity};
use btflow_core::difftest::{fuzz, FuzzConfig};
use btflow_core::oracle::run_oracle;
use btflow_core::parser::parse_bytes;
use btflow_core::runtime::{RunError, Runtime, Scenario, Trace};
use btflow_core::translate::{dot, translate, Mutation, TranslateOptions};
use btflow_core::{pretty_print, validate, BtDef, Diagnostic};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "btflow", version, about = "Behavior trees with explicit dataflow, compiled to a deterministic reactor network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a tree.
    Check { file: PathBuf },
    /// Draw a tree or its compiled network as Graphviz DOT.
    Dot {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "bt")]
        view: View,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a tree over a scenario and write its trace.
    Run {
        file: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Interpret the tree directly instead of compiling it.
        #[arg(long, conflicts_with = "full")]
        oracle: bool,
        /// Include events on ports internal to the compiled network.
        #[arg(long)]
        full: bool,
    },
    /// Compare compiled and interpreted execution on generated trees.
    Fuzz {
        #[arg(long, default_value_t = 100)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 5)]
        children: usize,
        #[arg(long, default_value_t = 100)]
        ticks: u64,
        /// Deliberately miscompile, to see the divergence being caught.
        #[arg(long, value_enum)]
        mutate: Option<MutationArg>,
        /// Where a minimized reproduction is written on divergence.
        #[arg(long, default_value = "btflow-repro.btlf")]
        repro: PathBuf,
    },
    /// Run the bundled AGV plant and check it against its golden trace.
    Plant {
        /// Rewrite the golden trace instead of checking it.
        #[arg(long)]
        bless: bool,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum View {
    Bt,
    Reactors,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MutationArg {
    SwapFallback,
}

/// Runs the program on `args` (including the program name) and returns
/// the exit code: 0 success, 1 findings or failed runs, 2 usage or I/O errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return e.exit_code();
        }
    };
    let mut ctx = Ctx { out, err, color: color_enabled() };
    match ctx.dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(ctx.err, "{}: {e:#}", ctx.paint("error", "1;31"));
            2
        }
    }
}

fn color_enabled() -> bool {
    match std::env::var("BTFLOW_COLOR").as_deref() {
        Ok("0") => false,
        Ok("1") => true,
        _ => std::io::stderr().is_terminal(),
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    color: bool,
}

type CmdResult = anyhow::Result<i32>;

impl Ctx<'_> {
    fn paint(&self, text: &str, sgr: &str) -> String {
        if self.color {
            format!("\x1b[{sgr}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    fn dispatch(&mut self, command: Command) -> CmdResult {
        match command {
            Command::Check { file } => self.check(&file),
            Command::Dot { file, view, output } => self.dot(&file, view, output.as_deref()),
            Command::Run { file, scenario, trace, oracle, full } => {
                self.run(&file, &scenario, trace.as_deref(), oracle, full)
            }
            Command::Fuzz { count, seed, depth, children, ticks, mutate, repro } => {
                let options = TranslateOptions { mutation: mutate.map(|MutationArg::SwapFallback| Mutation::SwapFallbackWiring) };
                self.fuzz(FuzzConfig { count, seed, depth, children, ticks, options }, &repro)
            }
            Command::Plant { bless, trace, fixtures } => {
                self.plant(bless, trace.as_deref(), &fixtures.unwrap_or_else(plant::fixtures_dir))
            }
        }
    }

    fn report_parse(&mut self, diags: &[Diagnostic]) -> anyhow::Result<()> {
        for d in diags {
            let json = serde_json::json!({
                "severity": d.severity,
                "code": "E000",
                "nodePath": null,
                "message": d.message,
                "line": d.span.start_line,
                "col": d.span.start_col,
            });
            writeln!(self.out, "{json}")?;
            let label = self.paint(&d.severity.to_string(), "1;31");
            writeln!(self.err, "{}: {label}: {}", d.span, d.message)?;
        }
        Ok(())
    }

    fn report_check(&mut self, items: &[CheckItem]) -> anyhow::Result<()> {
        for item in items {
            let mut json = serde_json::to_value(item)?;
            json["line"] = item.span.start_line.into();
            json["col"] = item.span.start_col.into();
            writeln!(self.out, "{json}")?;
            let sgr = if item.severity == Severity::Error { "1;31" } else { "1;33" };
            let label = self.paint(&format!("{}[{}]", item.severity, item.code), sgr);
            let at = item.node_path.as_deref().map(|p| format!(" (node {p})")).unwrap_or_default();
            writeln!(self.err, "{}: {label}: {}{at}", item.span, item.message)?;
        }
        Ok(())
    }

    /// Reads, parses and validates a tree, reporting problems. `None` means
    /// findings were reported.
    fn load(&mut self, file: &Path) -> anyhow::Result<Option<BtDef>> {
        let bytes = std::fs::read(file).with_context(|| format!("cannot read {}", file.display()))?;
        let def = match parse_bytes(&file.display().to_string(), &bytes) {
            Ok(def) => def,
            Err(diags) => {
                self.report_parse(&diags)?;
                return Ok(None);
            }
        };
        let report = validate(&def);
        if !report.is_empty() {
            self.report_check(&report.items)?;
            return Ok(None);
        }
        Ok(Some(def))
    }

    fn check(&mut self, file: &Path) -> CmdResult {
        Ok(match self.load(file)? {
            Some(def) => {
                writeln!(self.err, "{}: ok ({} nodes)", file.display(), def.node_count())?;
                0
            }
            None => 1,
        })
    }

    fn dot(&mut self, file: &Path, view: View, output: Option<&Path>) -> CmdResult {
        let Some(def) = self.load(file)? else { return Ok(1) };
        let text = match view {
            View::Bt => dot::bt_to_dot(&def),
            View::Reactors => dot::graph_to_dot(&translate(&def)?),
        };
        self.emit(output, &text)?;
        Ok(0)
    }

    fn emit(&mut self, output: Option<&Path>, text: &str) -> anyhow::Result<()> {
        match output {
            Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
            None => Ok(self.out.write_all(text.as_bytes())?),
        }
    }

    fn run(&mut self, file: &Path, scenario: &Path, trace: Option<&Path>, oracle: bool, full: bool) -> CmdResult {
        let Some(def) = self.load(file)? else { return Ok(1) };
        let text = std::fs::read_to_string(scenario).with_context(|| format!("cannot read {}", scenario.display()))?;
        let scenario = match Scenario::from_json(&text) {
            Ok(s) => s,
            Err(e) => {
                writeln!(self.err, "{}: {e}", self.paint("error", "1;31"))?;
                return Ok(1);
            }
        };
        let result = execute(&def, &scenario, &plant::externs(), oracle, full);
        let (trace_out, failure) = match result {
            Ok(t) => (t, None),
            Err(e) => (e.trace, Some(e.error)),
        };
        self.emit(trace, &trace_out.to_jsonl())?;
        match failure {
            Some(e) => {
                writeln!(self.err, "{}: {e}", self.paint("error", "1;31"))?;
                Ok(1)
            }
            None => Ok(0),
        }
    }

    fn fuzz(&mut self, cfg: FuzzConfig, repro: &Path) -> CmdResult {
        let report = fuzz(&cfg);
        let Some(failure) = report.failure else {
            writeln!(self.out, "{}/{} equivalent", report.runs, cfg.count)?;
            return Ok(0);
        };
        let tree = pretty_print(&failure.minimized);
        writeln!(self.out, "case {} (seed {}) diverged", report.runs, failure.case_seed)?;
        writeln!(self.out, "minimized from {} to {} nodes:", failure.def.node_count(), failure.minimized.node_count())?;
        writeln!(self.out, "{tree}")?;
        writeln!(self.out, "{}", failure.divergence)?;
        let mutate = if cfg.options.mutation.is_some() { " --mutate swap-fallback" } else { "" };
        let header = format!(
            "// btflow fuzz --seed {} --count 1 --depth {} --children {} --ticks {}{mutate}\n",
            failure.case_seed, cfg.depth, cfg.children, cfg.ticks
        );
        std::fs::write(repro, header + &tree).with_context(|| format!("cannot write {}", repro.display()))?;
        let scenario_path = repro.with_extension("json");
        std::fs::write(&scenario_path, failure.scenario.to_json() + "\n")
            .with_context(|| format!("cannot write {}", scenario_path.display()))?;
        writeln!(self.err, "reproduction written to {} and {}", repro.display(), scenario_path.display())?;
        Ok(1)
    }

    fn plant(&mut self, bless: bool, trace: Option<&Path>, fixtures: &Path) -> CmdResult {
        let def = btflow_core::parse_file("agv.btlf", plant::AGV_BT).map_err(|d| anyhow::anyhow!("{}", d[0]))?;
        let scenario = plant::scenario();
        let externs = plant::externs();
        let compiled = execute(&def, &scenario, &externs, false, false)?;
        let oracle = execute(&def, &scenario, &externs, true, false)?;
        let text = compiled.to_jsonl();
        if text != oracle.to_jsonl() {
            writeln!(self.err, "compiled and interpreted plant traces differ")?;
            return Ok(1);
        }
        if let Some(path) = trace {
            std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        let summary = plant::summarize(&compiled);
        writeln!(self.out, "ticks: {}", summary.ticks)?;
        writeln!(self.out, "jobs completed: {}", summary.jobs_completed)?;
        writeln!(
            self.out,
            "safety stops: {} at {:?} ms, movement at those tags: {}",
            summary.stops, summary.safety_tags, summary.movement_during_safety
        )?;
        let golden = fixtures.join("plant").join("golden.jsonl");
        if bless {
            std::fs::write(&golden, &text).with_context(|| format!("cannot write {}", golden.display()))?;
            writeln!(self.err, "wrote {}", golden.display())?;
            return Ok(0);
        }
        let expected = match std::fs::read_to_string(&golden) {
            Ok(t) => t,
            Err(e) => bail!("cannot read {}: {e} (run with --bless to create it)", golden.display()),
        };
        if let Some((i, (want, got))) = expected.lines().zip(text.lines()).enumerate().find(|(_, (a, b))| a != b) {
            writeln!(self.err, "golden trace differs at line {}:\n- {want}\n+ {got}", i + 1)?;
            return Ok(1);
        }
        if expected.lines().count() != text.lines().count() {
            writeln!(self.err, "golden trace has {} lines, run produced {}", expected.lines().count(), text.lines().count())?;
            return Ok(1);
        }
        writeln!(self.out, "golden trace matches")?;
        Ok(0)
    }
}

/// Runs `def` compiled, or interpreted when `oracle` is set.
pub fn execute(
    def: &BtDef,
    scenario: &Scenario,
    externs: &ExternRegistry,
    oracle: bool,
    full: bool,
) -> Result<Trace, RunError> {
    if oracle {
        return run_oracle(def, scenario, externs);
    }
    let graph = translate(def).map_err(|e| RunError {
        error: btflow_core::runtime::RuntimeError::Invalid(e.to_string()),
        trace: Trace::default(),
    })?;
    let runtime = Runtime::new(graph, externs.clone())
        .map_err(|error| RunError { error, trace: Trace::default() })?
        .with_full_trace(full);
    runtime.run(scenario)
}
