//! The end-to-end checking procedure.
//!
//! Given a system, an initial configuration and a target set, the pipeline
//! optionally runs the forward analysis to obtain a smaller guarded system,
//! saturates the target automaton, tests the initial configuration and, on a
//! positive answer, extracts a witness tree and replays it against the
//! original system before reporting it.

use std::time::{Duration, Instant};

use crate::automaton::StackAutomaton;
use crate::fast::saturate_fast_traced;
use crate::forward::{back_rules, build_graph, extract_guarded, ApproxGraph, DerivedModel};
use crate::model::{Configuration, ControlId, Cpds};
use crate::saturation::{saturate, Budget, Mode, SaturationError, SaturationResult};
use crate::witness::{extract, validate, ReplayError, WitnessError, WitnessNode, WitnessOptions};

/// Saturation engine.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum Engine {
    #[default]
    Fast,
    Naive,
}

/// Use of the forward analysis.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum Forward {
    /// Saturate the guarded, pruned system.
    #[default]
    On,
    /// Saturate the pruned system without guards.
    Prune,
    /// Saturate the original system.
    Off,
}

/// Pipeline settings.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub engine: Engine,
    pub forward: Forward,
    pub mode: Mode,
    /// Collect one line per worklist event (worklist engine only).
    pub trace: bool,
    /// Reject witnesses containing a stack with more characters than this.
    pub stack_cap: Option<usize>,
    pub timeout: Option<Duration>,
    /// Give up once the automaton has more transitions than this.
    pub max_transitions: Option<usize>,
    pub witness: WitnessOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            engine: Engine::Fast,
            forward: Forward::On,
            mode: Mode::Full,
            trace: false,
            stack_cap: None,
            timeout: None,
            max_transitions: None,
            witness: WitnessOptions::default(),
        }
    }
}

/// What the initial configuration should reach.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Target {
    /// Any configuration whose control is one of these.
    Controls(Vec<ControlId>),
    /// The language of an explicit automaton.
    Automaton(StackAutomaton),
}

/// Reasons for an inconclusive verdict.
#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("non-alternating mode requires a system without alternating rules")]
    AlternatingModel,
    #[error("non-alternating mode requires a syntactically non-alternating target automaton")]
    AlternatingAutomaton,
    #[error(transparent)]
    Saturation(#[from] SaturationError),
    #[error("witness extraction failed: {0}")]
    Witness(#[from] WitnessError),
    #[error("internal error: witness failed validation: {0}")]
    Replay(#[from] ReplayError),
    #[error("witness contains a stack with more than {0} characters")]
    StackCap(usize),
}

/// The answer for the initial configuration.
#[derive(Debug)]
pub enum Verdict {
    Unreachable,
    /// Reachable, with a validated witness over the original system.
    Reachable(WitnessNode),
    Inconclusive(PipelineError),
}

impl Verdict {
    /// Process exit code: 0 unreachable, 1 reachable, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::Unreachable => 0,
            Verdict::Reachable(_) => 1,
            Verdict::Inconclusive(_) => 2,
        }
    }

    pub fn is_reachable(&self) -> bool {
        matches!(self, Verdict::Reachable(_))
    }
}

/// The verdict together with intermediate results.
#[derive(Debug)]
pub struct Report {
    pub verdict: Verdict,
    /// The system that was saturated.
    pub derived: DerivedModel,
    pub graph: Option<ApproxGraph>,
    pub saturated: Option<SaturationResult>,
    pub trace: Vec<String>,
    pub elapsed: Duration,
}

/// The target automaton for a target description.
pub fn target_automaton(model: &Cpds, target: &Target) -> StackAutomaton {
    match target {
        Target::Controls(cs) => StackAutomaton::control_targets(model, cs),
        Target::Automaton(a) => a.clone(),
    }
}

/// Controls that may start an accepted configuration: those whose initial
/// state accepts some stack.
pub fn target_controls(model: &Cpds, a0: &StackAutomaton) -> Vec<ControlId> {
    (0..model.num_controls() as u32)
        .map(ControlId)
        .filter(|&p| a0.is_nonempty(a0.control_state(p)))
        .collect()
}

/// Runs the whole procedure.
pub fn run_pipeline(model: &Cpds, init: &Configuration, target: &Target, config: &PipelineConfig) -> Report {
    let start = Instant::now();
    let a0 = target_automaton(model, target);
    let mut report = Report {
        verdict: Verdict::Unreachable,
        derived: DerivedModel::identity(model),
        graph: None,
        saturated: None,
        trace: Vec::new(),
        elapsed: Duration::ZERO,
    };
    let finish = |mut r: Report, v: Verdict| {
        r.verdict = v;
        r.elapsed = start.elapsed();
        r
    };
    if config.mode == Mode::NonAlternating {
        if model.has_alternation() {
            return finish(report, Verdict::Inconclusive(PipelineError::AlternatingModel));
        }
        if !a0.is_syntactically_non_alternating() {
            return finish(report, Verdict::Inconclusive(PipelineError::AlternatingAutomaton));
        }
    }

    if config.forward != Forward::Off {
        let g = build_graph(model, init);
        let back = back_rules(&g, &target_controls(model, &a0));
        let guarded = extract_guarded(model, &g, &back);
        report.derived = match config.forward {
            Forward::Prune => guarded.trivialise(),
            _ => guarded,
        };
        report.graph = Some(g);
    }

    let budget = Budget {
        deadline: config.timeout.map(|t| start + t),
        max_transitions: config.max_transitions,
    };
    let derived = &report.derived.model;
    let result = match config.engine {
        Engine::Naive => saturate(derived, &a0, config.mode, budget),
        Engine::Fast => {
            let mut lines = Vec::new();
            let mut sink = |s: &str| lines.push(s.to_string());
            let trace: Option<&mut dyn FnMut(&str)> = if config.trace { Some(&mut sink) } else { None };
            let r = saturate_fast_traced(derived, &a0, config.mode, budget, trace).map(|(r, _)| r);
            report.trace = lines;
            r
        }
    };
    let sat = match result {
        Ok(s) => s,
        Err(e) => return finish(report, Verdict::Inconclusive(e.into())),
    };
    let accepted = sat.accepts_config(init.control, &init.stack);
    let verdict = if accepted {
        match witness_for(model, &report.derived, &sat.automaton, &a0, init, config) {
            Ok(w) => Verdict::Reachable(w),
            Err(e) => Verdict::Inconclusive(e),
        }
    } else {
        Verdict::Unreachable
    };
    report.saturated = Some(sat);
    finish(report, verdict)
}

/// Extracts a witness over the derived system, maps it back to the original
/// system and replays it against both.
fn witness_for(
    model: &Cpds,
    derived: &DerivedModel,
    a: &StackAutomaton,
    a0: &StackAutomaton,
    init: &Configuration,
    config: &PipelineConfig,
) -> Result<WitnessNode, PipelineError> {
    let (tree, _) = extract(&derived.model, a, init, config.witness)?;
    validate(&tree, &derived.model, a0)?;
    let tree = map_rules(tree, derived);
    validate(&tree, model, a0)?;
    if let Some(cap) = config.stack_cap {
        let mut work = vec![&tree];
        while let Some(n) = work.pop() {
            if n.config.stack.char_count() > cap {
                return Err(PipelineError::StackCap(cap));
            }
            work.extend(n.children.iter());
        }
    }
    Ok(tree)
}

fn map_rules(mut tree: WitnessNode, derived: &DerivedModel) -> WitnessNode {
    let mut work = vec![&mut tree];
    while let Some(n) = work.pop() {
        n.rule = n.rule.map(|r| derived.original_rule(r));
        work.extend(n.children.iter_mut());
    }
    tree
}
