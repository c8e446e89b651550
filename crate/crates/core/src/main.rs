//! Command-line front end: `cpds check <model-file> [options]`.
//!
//! Exit status is 0 when the targets are unreachable, 1 when they are
//! reachable (a validated witness is available) and 2 when the check was
//! inconclusive or failed.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cpds::parse::{parse_automaton, parse_model, render_automaton};
use cpds::pipeline::{run_pipeline, Engine, Forward, PipelineConfig, Target, Verdict};
use cpds::Mode;

#[derive(Parser)]
#[command(name = "cpds", version, about = "Reachability checking for collapsible pushdown systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the initial configuration can reach the targets.
    Check(CheckArgs),
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Model file with an `init` line and `target` lines.
    model: PathBuf,
    /// Target automaton file, replacing the model's `target` lines.
    #[arg(long)]
    automaton: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EngineArg::Fast)]
    engine: EngineArg,
    #[arg(long, value_enum, default_value_t = ForwardArg::On)]
    forward: ForwardArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    mode: ModeArg,
    /// Write the witness as JSON to this file (`-` for standard output).
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write the saturated automaton to this file.
    #[arg(long)]
    dump_automaton: Option<PathBuf>,
    /// Write the forward-analysis graph to this file.
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    /// Print one line per worklist event to standard error.
    #[arg(long)]
    trace: bool,
    /// Give up after this many seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Give up once the automaton has more transitions than this.
    #[arg(long)]
    max_transitions: Option<usize>,
    /// Reject witnesses containing larger stacks.
    #[arg(long)]
    stack_cap: Option<usize>,
}

#[derive(Copy, Clone, ValueEnum)]
enum EngineArg {
    Fast,
    Naive,
}

#[derive(Copy, Clone, ValueEnum)]
enum ForwardArg {
    On,
    Prune,
    Off,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Full,
    Nonalt,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => check(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn check(args: &CheckArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.model).with_context(|| format!("reading {}", args.model.display()))?;
    let file = parse_model(&text).with_context(|| format!("parsing {}", args.model.display()))?;
    let model = file.model;
    let Some(init) = file.init else {
        bail!("the model file has no `init` line");
    };
    let target = match &args.automaton {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Target::Automaton(parse_automaton(&text, &model).with_context(|| format!("parsing {}", path.display()))?)
        }
        None if file.targets.is_empty() => bail!("no targets: add `target` lines or pass --automaton"),
        None => Target::Controls(file.targets),
    };
    if let Some(t) = args.timeout {
        if !(t.is_finite() && t >= 0.0) {
            bail!("invalid timeout {t}");
        }
    }
    let config = PipelineConfig {
        engine: match args.engine {
            EngineArg::Fast => Engine::Fast,
            EngineArg::Naive => Engine::Naive,
        },
        forward: match args.forward {
            ForwardArg::On => Forward::On,
            ForwardArg::Prune => Forward::Prune,
            ForwardArg::Off => Forward::Off,
        },
        mode: match args.mode {
            ModeArg::Full => Mode::Full,
            ModeArg::Nonalt => Mode::NonAlternating,
        },
        trace: args.trace,
        stack_cap: args.stack_cap,
        timeout: args.timeout.map(Duration::from_secs_f64),
        max_transitions: args.max_transitions,
        ..PipelineConfig::default()
    };
    let report = run_pipeline(&model, &init, &target, &config);

    for line in &report.trace {
        eprintln!("{line}");
    }
    if let (Some(path), Some(g)) = (&args.dump_graph, &report.graph) {
        fs::write(path, g.dump(&model)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let (Some(path), Some(sat)) = (&args.dump_automaton, &report.saturated) {
        fs::write(path, render_automaton(&sat.automaton, &report.derived.model))
            .with_context(|| format!("writing {}", path.display()))?;
    }

    match &report.verdict {
        Verdict::Unreachable => println!("unreachable"),
        Verdict::Reachable(w) => {
            println!("reachable");
            match w.rule_sequence() {
                Some(seq) => {
                    let names: Vec<&str> = seq.iter().map(|&r| model.rule(r).name.as_str()).collect();
                    println!("witness: {}", names.join(" "));
                }
                None => println!("witness: tree with {} nodes and {} leaves", w.size(), w.leaves().len()),
            }
            if let Some(path) = &args.witness {
                let doc = serde_json::to_string_pretty(&w.to_document(&model))?;
                if path.as_os_str() == "-" {
                    println!("{doc}");
                } else {
                    fs::write(path, doc + "\n").with_context(|| format!("writing {}", path.display()))?;
                }
            }
        }
        Verdict::Inconclusive(e) => println!("inconclusive: {e}"),
    }
    Ok(report.verdict.exit_code() as u8)
}
