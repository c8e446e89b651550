//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status on
//! any failure. All sizes, bounds and time limits are fixed below.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cpds::fast::saturate_fast;
use cpds::forward::{back_rules, build_graph, extract_guarded};
use cpds::model::{Configuration, ControlId, Cpds};
use cpds::oracle::reaches_language;
use cpds::parse::{parse_automaton, parse_model, parse_stack};
use cpds::pipeline::{run_pipeline, target_controls, Engine, Forward, PipelineConfig, Target, Verdict};
use cpds::run::{accepting, initial_run};
use cpds::saturation::saturate;
use cpds::stack::{CollapsibleStack, Symbol};
use cpds::witness::{extract, validate, WitnessOptions};
use cpds::{Budget, Mode, StackAutomaton, StateSet};
use rand::seq::SliceRandom;
use rand::Rng;

/// Instances in the random suite (criteria 2, 3 and 5).
const SUITE_INSTANCES: usize = 500;
/// Extra random seeds per suite instance besides `<p0, [..[a]..]>`.
const EXTRA_SEEDS: usize = 2;
/// Characters in random seed stacks.
const SEED_CHARS: usize = 4;
const ORACLE_DEPTH: usize = 8;
const ORACLE_CAP: usize = 12;
/// Saturation budget per instance; instances exceeding it are replaced.
const MAX_TRANSITIONS: usize = 4000;
const SUITE_TIME_LIMIT: Duration = Duration::from_secs(300);
const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(1);
const ENGINE_INSTANCES: usize = 100;
const MEMBERSHIP_AUTOMATA: usize = 50;
const MEMBERSHIP_STACK_CHARS: usize = 6;
const NONALT_INSTANCES: usize = 100;
const LAW_CHECKS: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("1 golden example", golden),
        ("2 oracle completeness", oracle_completeness_and_witnesses),
        ("3 witness soundness", witness_soundness),
        ("4 engine equivalence", engine_equivalence),
        ("5 forward-phase preservation", forward_preservation),
        ("6 membership and emptiness", membership_and_emptiness),
        ("7 non-alternation", non_alternation),
        ("8 stack laws", stack_laws),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(msg) => println!("PASS {name} ({secs:.2}s): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {msg}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Criterion 1

const FIGURE: &str = "order 2\nalphabet a b c d\ninit q1 [[b][c][d]]\ntarget q5\n\
    rule q1 b cpush a 2 q2\nrule q2 a push 2 q3\nrule q3 a collapse 2 q4\nrule q4 c pop 2 q5\n";

fn golden() -> Outcome {
    let start = Instant::now();
    let f = parse_model(FIGURE).map_err(|e| e.to_string())?;
    let m = &f.model;
    let a0 = parse_automaton("q5 -- d / {} --> ({};{})\n", m).map_err(|e| e.to_string())?;
    let mut want = vec![
        "q4 -- c / {} --> ({};{q5})",
        "q3 -- a / {q4} --> ({};{})",
        "q2 -- a / {q4} --> ({};{})",
        "q1 -- b / {} --> ({};{q4})",
    ];
    want.sort();
    let init = f.init.clone().unwrap();
    let runs = [
        ("q1", "[[b][c][d]]"),
        ("q2", "[[a^(2,2) b][c][d]]"),
        ("q3", "[[a^(2,2) b][a^(2,2) b][c][d]]"),
        ("q4", "[[c][d]]"),
        ("q5", "[[d]]"),
    ];
    for (engine, r) in [
        ("naive", saturate(m, &a0, Mode::Full, Budget::UNLIMITED)),
        ("fast", saturate_fast(m, &a0, Mode::Full, Budget::UNLIMITED)),
    ] {
        let r = r.map_err(|e| e.to_string())?;
        let mut added: Vec<String> = r
            .automaton
            .one_ids()
            .skip(r.initial.num_one())
            .map(|t| r.automaton.render_long(&r.automaton.long_of(t), &m.alphabet, &m.controls))
            .collect();
        added.sort();
        check(added == want, || format!("{engine}: added transitions {added:?}"))?;
        for (ctl, w) in runs {
            let p = m.lookup_control(ctl).unwrap();
            let w = parse_stack(w, 2, &m.alphabet).map_err(|e| e.to_string())?;
            check(r.accepts_config(p, &w), || format!("{engine}: <{ctl}, {w:?}> rejected"))?;
        }
        let (tree, _) = extract(m, &r.automaton, &init, WitnessOptions::default()).map_err(|e| e.to_string())?;
        validate(&tree, m, &a0).map_err(|e| e.to_string())?;
        let names: Vec<&str> = tree
            .rule_sequence()
            .unwrap_or_default()
            .into_iter()
            .map(|id| m.rule(id).name.as_str())
            .collect();
        check(names == ["r1", "r2", "r3", "r4"], || format!("{engine}: witness {names:?}"))?;
    }
    let took = start.elapsed();
    check(took < GOLDEN_TIME_LIMIT, || format!("took {took:?}"))?;
    Ok("4 added transitions, 5 run configurations accepted, witness r1 r2 r3 r4 (both engines)".into())
}

// ---------------------------------------------------------------------------
// The random suite (criteria 2, 3 and 5)

struct Instance {
    seed: u64,
    model: Cpds,
    a0: StackAutomaton,
    seeds: Vec<Configuration>,
}

/// The first `SUITE_INSTANCES` random instances whose saturation fits the
/// budget with both engines, with their seeds.
fn suite() -> (Vec<Instance>, usize) {
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut seed = 0u64;
    while out.len() < SUITE_INSTANCES {
        let mut rng = common::rng(1_000_000 + seed);
        let model = common::random_model(&mut rng, common::Shape::SUITE);
        let (a0, _) = common::random_a0(&mut rng, &model);
        let budget = Budget::with_max_transitions(MAX_TRANSITIONS);
        if saturate_fast(&model, &a0, Mode::Full, budget).is_err() {
            skipped += 1;
            seed += 1;
            continue;
        }
        let mut seeds = vec![Configuration::new(ControlId(0), common::single(model.order, Symbol(0)))];
        seeds.extend(common::random_seeds(&mut rng, &model, EXTRA_SEEDS, SEED_CHARS));
        out.push(Instance { seed, model, a0, seeds });
        seed += 1;
    }
    (out, skipped)
}

struct SuiteReport {
    instances: usize,
    skipped: usize,
    seeds: usize,
    oracle_reached: usize,
    accepted: usize,
    witnesses: usize,
    descent_checks: usize,
    completeness_violations: Vec<String>,
    witness_violations: Vec<String>,
}

fn run_suite() -> SuiteReport {
    let start = Instant::now();
    let (instances, skipped) = suite();
    let mut rep = SuiteReport {
        instances: instances.len(),
        skipped,
        seeds: 0,
        oracle_reached: 0,
        accepted: 0,
        witnesses: 0,
        descent_checks: 0,
        completeness_violations: Vec::new(),
        witness_violations: Vec::new(),
    };
    for inst in &instances {
        let m = &inst.model;
        let naive = saturate(m, &inst.a0, Mode::Full, Budget::UNLIMITED).expect("naive saturation");
        let fast = saturate_fast(m, &inst.a0, Mode::Full, Budget::UNLIMITED).expect("fast saturation");
        for c in &inst.seeds {
            rep.seeds += 1;
            let oracle = reaches_language(m, c, &inst.a0, ORACLE_DEPTH, ORACLE_CAP);
            let by_naive = naive.accepts_config(c.control, &c.stack);
            let by_fast = fast.accepts_config(c.control, &c.stack);
            if oracle.reached {
                rep.oracle_reached += 1;
                if !(by_naive && by_fast) {
                    rep.completeness_violations
                        .push(format!("instance {}: seed {:?} (naive {by_naive}, fast {by_fast})", inst.seed, c));
                }
            }
            for (engine, res, acc) in [("naive", &naive, by_naive), ("fast", &fast, by_fast)] {
                if !acc {
                    continue;
                }
                rep.accepted += 1;
                let opts = WitnessOptions {
                    max_nodes: 200_000,
                    check_descent: true,
                    check_runs: false,
                };
                match extract(m, &res.automaton, c, opts) {
                    Ok((tree, stats)) => {
                        rep.descent_checks += stats.descent_checks;
                        match validate(&tree, m, &inst.a0) {
                            Ok(()) => rep.witnesses += 1,
                            Err(e) => rep.witness_violations.push(format!("instance {} {engine}: {e}", inst.seed)),
                        }
                    }
                    Err(e) => rep.witness_violations.push(format!("instance {} {engine}: {e}", inst.seed)),
                }
            }
        }
    }
    if start.elapsed() > SUITE_TIME_LIMIT {
        rep.completeness_violations.push(format!("suite took {:?}", start.elapsed()));
    }
    rep
}

fn suite_report() -> &'static SuiteReport {
    static REPORT: std::sync::OnceLock<SuiteReport> = std::sync::OnceLock::new();
    REPORT.get_or_init(run_suite)
}

fn oracle_completeness_and_witnesses() -> Outcome {
    let r = suite_report();
    check(r.instances >= SUITE_INSTANCES, || format!("only {} instances", r.instances))?;
    check(r.completeness_violations.is_empty(), || {
        format!("{} violations, first: {}", r.completeness_violations.len(), r.completeness_violations[0])
    })?;
    Ok(format!(
        "{} instances ({} over budget replaced), {} seeds, {} reached by the oracle, all accepted by both engines",
        r.instances, r.skipped, r.seeds, r.oracle_reached
    ))
}

fn witness_soundness() -> Outcome {
    let r = suite_report();
    check(r.witness_violations.is_empty(), || {
        format!("{} violations, first: {}", r.witness_violations.len(), r.witness_violations[0])
    })?;
    Ok(format!(
        "{} accepted (seed, engine) pairs, {} witnesses validated, {} descent checks",
        r.accepted, r.witnesses, r.descent_checks
    ))
}

// ---------------------------------------------------------------------------
// Criterion 4

fn engine_equivalence() -> Outcome {
    let mut compared = 0;
    let mut seed = 0u64;
    while compared < ENGINE_INSTANCES {
        let mut rng = common::rng(2_000_000 + seed);
        seed += 1;
        let m = common::random_model(&mut rng, common::Shape::SUITE);
        let (a0, _) = common::random_a0(&mut rng, &m);
        let budget = Budget::with_max_transitions(MAX_TRANSITIONS);
        let (Ok(n), Ok(f)) = (saturate(&m, &a0, Mode::Full, budget), saturate_fast(&m, &a0, Mode::Full, budget)) else {
            continue;
        };
        let (nt, ft) = (n.automaton.canonical_transitions(), f.automaton.canonical_transitions());
        check(nt == ft, || {
            format!(
                "instance {}: {} transitions only in naive, {} only in fast",
                seed - 1,
                nt.difference(&ft).count(),
                ft.difference(&nt).count()
            )
        })?;
        compared += 1;
    }
    Ok(format!("{compared} instances with identical transition sets"))
}

// ---------------------------------------------------------------------------
// Criterion 5

fn forward_preservation() -> Outcome {
    let (instances, _) = suite();
    let mut verdicts = 0;
    let mut inclusions = 0;
    let mut reachable = 0;
    for inst in &instances {
        let m = &inst.model;
        let target = Target::Automaton(inst.a0.clone());
        for c in &inst.seeds {
            let mut seen = Vec::new();
            for forward in [Forward::On, Forward::Prune, Forward::Off] {
                let cfg = PipelineConfig {
                    engine: Engine::Fast,
                    forward,
                    ..PipelineConfig::default()
                };
                let report = run_pipeline(m, c, &target, &cfg);
                match report.verdict {
                    Verdict::Inconclusive(e) => return Err(format!("instance {} {forward:?}: {e}", inst.seed)),
                    v => seen.push(v.is_reachable()),
                }
            }
            check(seen.iter().all(|&v| v == seen[0]), || {
                format!("instance {}: verdicts (on, prune, off) = {seen:?} for {c:?}", inst.seed)
            })?;
            verdicts += 1;
            reachable += seen[0] as usize;

            // The guarded system extracted for this seed against its
            // trivialisation.
            let g = build_graph(m, c);
            let back = back_rules(&g, &target_controls(m, &inst.a0));
            let guarded = extract_guarded(m, &g, &back);
            subset_check(&guarded.model, &inst.a0).map_err(|e| format!("instance {} extracted: {e}", inst.seed))?;
            inclusions += 1;
        }
        // Random guards on the original system.
        let mut rng = common::rng(3_000_000 + inst.seed);
        let guarded = common::with_random_guards(&mut rng, m);
        subset_check(&guarded, &inst.a0).map_err(|e| format!("instance {} random guards: {e}", inst.seed))?;
        inclusions += 1;
    }
    Ok(format!(
        "{verdicts} seeds with identical verdicts across forward settings ({reachable} reachable), {inclusions} guarded-in-trivialised inclusions"
    ))
}

fn subset_check(guarded: &Cpds, a0: &StackAutomaton) -> Result<(), String> {
    let g = saturate_fast(guarded, a0, Mode::Full, Budget::UNLIMITED).map_err(|e| e.to_string())?;
    let t = saturate_fast(&guarded.trivialise(), a0, Mode::Full, Budget::UNLIMITED).map_err(|e| e.to_string())?;
    let (gt, tt) = (g.automaton.canonical_transitions(), t.automaton.canonical_transitions());
    check(gt.is_subset(&tt), || format!("{} guarded transitions missing from the trivialisation", gt.difference(&tt).count()))
}

// ---------------------------------------------------------------------------
// Criterion 6

fn membership_and_emptiness() -> Outcome {
    let mut checks = 0;
    let mut members = 0;
    let mut emptiness = 0;
    for i in 0..MEMBERSHIP_AUTOMATA as u64 {
        let mut rng = common::rng(4_000_000 + i);
        let shape = common::Shape {
            max_order: 2,
            max_controls: 3,
            max_symbols: 2,
            max_rules: 6,
            alt_ratio: 0.2,
        };
        let m = common::random_model(&mut rng, shape);
        // Even-numbered automata are random, odd-numbered ones saturated.
        let a = if i % 2 == 0 {
            common::random_automaton(&mut rng, &m)
        } else {
            let (a0, _) = common::random_a0(&mut rng, &m);
            saturate_fast(&m, &a0, Mode::Full, Budget::UNLIMITED)
                .map_err(|e| e.to_string())?
                .automaton
        };
        let stacks = common::enumerate_stacks(&m, MEMBERSHIP_STACK_CHARS);
        let nonempty = a.nonempty_states();
        let order_n: Vec<cpds::StateId> = (0..a.num_states() as u32)
            .map(cpds::StateId)
            .filter(|&q| a.state_order(q) == m.order)
            .collect();
        let mut found: std::collections::HashSet<cpds::StateId> = std::collections::HashSet::new();
        for w in &stacks {
            for &q in &order_n {
                let by_labels = a.accepts_from(w, &StateSet::singleton(q));
                let by_runs = common::accepts_by_runs(&a, q, w);
                checks += 1;
                check(by_labels == by_runs, || {
                    format!("automaton {i}: state {q:?} on {w:?}: labels {by_labels}, runs {by_runs}")
                })?;
                if by_labels {
                    members += 1;
                    found.insert(q);
                }
            }
        }
        // Accepted configurations have trimmed accepting runs.
        for p in 0..m.num_controls() as u32 {
            let p = ControlId(p);
            for w in stacks.iter().take(200) {
                if a.accepts_config(p, w) {
                    let r = initial_run(&a, p, w).ok_or_else(|| format!("automaton {i}: no run for an accepted stack"))?;
                    check(accepting(&a, &r, a.control_state(p)), || format!("automaton {i}: built run is not accepting"))?;
                }
            }
        }
        for &q in &order_n {
            emptiness += 1;
            if found.contains(&q) {
                check(nonempty.contains(&q), || format!("automaton {i}: member found for fixpoint-empty {q:?}"))?;
            }
            if !nonempty.contains(&q) {
                check(!found.contains(&q), || format!("automaton {i}: fixpoint-empty {q:?} has a member"))?;
            }
        }
    }
    Ok(format!(
        "{MEMBERSHIP_AUTOMATA} automata, {checks} membership checks ({members} members), {emptiness} emptiness checks"
    ))
}

// ---------------------------------------------------------------------------
// Criterion 7

fn non_alternation() -> Outcome {
    let mut compared = 0;
    let mut configs = 0;
    let mut seed = 0u64;
    while compared < NONALT_INSTANCES {
        let mut rng = common::rng(5_000_000 + seed);
        seed += 1;
        let m = common::random_model(&mut rng, common::Shape::SMALL);
        let (a0, _) = common::random_a0(&mut rng, &m);
        if !common::non_alternating(&m, &a0) {
            continue;
        }
        let budget = Budget::with_max_transitions(MAX_TRANSITIONS);
        let (Ok(full), Ok(na)) = (
            saturate_fast(&m, &a0, Mode::Full, budget),
            saturate_fast(&m, &a0, Mode::NonAlternating, budget),
        ) else {
            continue;
        };
        let n = m.order;
        for t in na.automaton.one_ids() {
            let lt = na.automaton.long_of(t);
            check(lt.targets[n - 1].len() <= 1, || format!("instance {}: order-{n} target set of size {}", seed - 1, lt.targets[n - 1].len()))?;
        }
        let mut stacks = common::enumerate_stacks(&m, 4);
        stacks.shuffle(&mut rng);
        stacks.truncate(300);
        for w in &stacks {
            for p in 0..m.num_controls() as u32 {
                let p = ControlId(p);
                configs += 1;
                let (f, g) = (full.accepts_config(p, w), na.accepts_config(p, w));
                check(f == g, || format!("instance {}: full {f}, non-alternating {g} on {w:?}", seed - 1))?;
            }
        }
        compared += 1;
    }
    Ok(format!("{compared} instances, {configs} configurations classified identically"))
}

// ---------------------------------------------------------------------------
// Criterion 8

fn stack_laws() -> Outcome {
    let mut rng = common::rng(6_000_000);
    let mut checked = 0;
    while checked < LAW_CHECKS {
        let m = common::random_model(&mut rng, common::Shape::SUITE);
        let w: CollapsibleStack = common::random_stack(&mut rng, &m, 8);
        let n = m.order;
        let syms: Vec<Symbol> = m.alphabet.symbols().collect();
        let b = *syms.choose(&mut rng).unwrap();
        let k = rng.gen_range(1..=n);
        match rng.gen_range(0..4) {
            0 => {
                if k >= 2 {
                    let v = w.push(k).ok_or("push undefined on a nonempty stack")?;
                    check(v.pop(k).as_ref() == Some(&w), || format!("pop_{k}(push_{k}(w)) != w for {w:?}"))?;
                }
            }
            1 => {
                let v = w.push_char(b, k, ()).ok_or("push_char undefined on a nonempty stack")?;
                check(v.pop(1).as_ref() == Some(&w), || format!("pop_1(push_b^{k}(w)) != w for {w:?}"))?;
            }
            2 => {
                let v = w.push_char(b, k, ()).ok_or("push_char undefined on a nonempty stack")?;
                check(v.collapse(k) == w.pop(k), || format!("collapse_{k}(push_b^{k}(w)) != pop_{k}(w) for {w:?}"))?;
            }
            _ => {
                let (a, _) = w.top_char().ok_or("random stacks have a top character")?;
                let v = w.rew(b).ok_or("rew undefined on a nonempty stack")?;
                check(v.rew(a).as_ref() == Some(&w), || format!("rew_a(rew_b(w)) != w for {w:?}"))?;
            }
        }
        checked += 1;
    }
    Ok(format!("{checked} law applications"))
}
