//! Witness trees: extraction from a saturated automaton and replay.
//!
//! Extraction starts from a trimmed accepting run of the queried
//! configuration and repeatedly follows the justification of the run's head
//! transition: the justification names the rule to fire and the transitions
//! with which to rebuild an accepting run of the successor configuration.
//! Every step strictly decreases the run under the descent relation of
//! [`crate::run`], which is checked on every step, so extraction terminates.

use serde_json::{json, Value};

use crate::automaton::{Justification, StackAutomaton, StateSet, TransId};
use crate::model::{Configuration, ControlId, Cpds, Op, Outcome, RuleId, RuleKind};
use crate::parse::render_stack;
use crate::run::{accepting, annotation, initial_run, measure_less, trimmed, Run};

/// A node of a witness tree: a configuration and, at internal nodes, the rule
/// fired from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessNode {
    pub config: Configuration,
    pub rule: Option<RuleId>,
    pub children: Vec<WitnessNode>,
}

/// Failures of witness extraction. All of them indicate an inconsistency
/// between the automaton and its justifications, or an exhausted budget.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum WitnessError {
    #[error("the configuration is not accepted by the saturated automaton")]
    NotAccepted,
    #[error("transition {trans:?} has a justification that does not fit rule {rule}: {detail}")]
    MalformedJustification { trans: TransId, rule: String, detail: String },
    #[error("a run did not decrease along a witness step (rule {rule})")]
    NoDescent { rule: String },
    #[error("an intermediate run is not a trimmed accepting run (rule {rule})")]
    InvalidRun { rule: String },
    #[error("witness exceeds {0} nodes")]
    TooLarge(usize),
}

/// Extraction settings.
#[derive(Clone, Copy, Debug)]
pub struct WitnessOptions {
    /// Maximum number of tree nodes.
    pub max_nodes: usize,
    /// Check the descent relation on every step.
    pub check_descent: bool,
    /// Check that every intermediate run is trimmed and accepting (slow).
    pub check_runs: bool,
}

impl Default for WitnessOptions {
    fn default() -> Self {
        WitnessOptions {
            max_nodes: 1_000_000,
            check_descent: true,
            check_runs: false,
        }
    }
}

/// Counters collected during extraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WitnessStats {
    pub nodes: usize,
    pub descent_checks: usize,
}

/// Extracts a witness tree for `<p, w>` from the saturated automaton `a`.
pub fn extract(
    model: &Cpds,
    a: &StackAutomaton,
    config: &Configuration,
    opts: WitnessOptions,
) -> Result<(WitnessNode, WitnessStats), WitnessError> {
    let run = initial_run(a, config.control, &config.stack).ok_or(WitnessError::NotAccepted)?;
    get_witness(model, a, config.control, run, opts)
}

/// Builds the witness tree rooted at the configuration of `run` (from control
/// `p`), following justifications.
pub fn get_witness(
    model: &Cpds,
    a: &StackAutomaton,
    p: ControlId,
    run: Run,
    opts: WitnessOptions,
) -> Result<(WitnessNode, WitnessStats), WitnessError> {
    struct Pending {
        control: ControlId,
        run: Run,
        parent: Option<usize>,
    }
    // Arena of nodes; children are linked by index and assembled at the end.
    let mut nodes: Vec<(Configuration, Option<RuleId>, Vec<usize>)> = Vec::new();
    let mut stats = WitnessStats::default();
    let mut work = vec![Pending {
        control: p,
        run,
        parent: None,
    }];
    while let Some(item) = work.pop() {
        if nodes.len() >= opts.max_nodes {
            return Err(WitnessError::TooLarge(opts.max_nodes));
        }
        let idx = nodes.len();
        let config = Configuration::new(item.control, item.run.project());
        if let Some(par) = item.parent {
            nodes[par].2.push(idx);
        }
        let (_, _, head) = item.run.top_char_ann().ok_or(WitnessError::NotAccepted)?;
        let t = *head.first().ok_or(WitnessError::NotAccepted)?;
        let jus = a.justification(t).clone();
        let Some(rule) = jus.rule() else {
            nodes.push((config, None, Vec::new()));
            continue;
        };
        nodes.push((config, Some(rule), Vec::new()));
        let next = step(model, a, item.control, &item.run, t, &jus)?;
        // Push in reverse so that children come out in order.
        for (control, r2) in next.into_iter().rev() {
            if opts.check_descent {
                stats.descent_checks += 1;
                if !measure_less(a, &item.run, &r2) {
                    return Err(WitnessError::NoDescent {
                        rule: model.display_rule(rule),
                    });
                }
            }
            if opts.check_runs && !(accepting(a, &r2, a.control_state(control)) && trimmed(a, &r2)) {
                return Err(WitnessError::InvalidRun {
                    rule: model.display_rule(rule),
                });
            }
            work.push(Pending {
                control,
                run: r2,
                parent: Some(idx),
            });
        }
    }
    stats.nodes = nodes.len();
    Ok((assemble(&mut nodes, 0), stats))
}

fn assemble(nodes: &mut [(Configuration, Option<RuleId>, Vec<usize>)], root: usize) -> WitnessNode {
    // Iterative post-order to avoid deep recursion on long linear witnesses.
    let mut built: Vec<Option<WitnessNode>> = vec![None; nodes.len()];
    let mut stack = vec![(root, false)];
    while let Some((i, expanded)) = stack.pop() {
        if expanded {
            let children = nodes[i].2.iter().map(|&c| built[c].take().expect("child built")).collect();
            built[i] = Some(WitnessNode {
                config: nodes[i].0.clone(),
                rule: nodes[i].1,
                children,
            });
        } else {
            stack.push((i, true));
            for &c in &nodes[i].2 {
                stack.push((c, false));
            }
        }
    }
    built[root].take().expect("root built")
}

/// One extraction step: the successor runs (with their controls) obtained by
/// following the justification `jus` of the head transition `t`.
fn step(
    model: &Cpds,
    a: &StackAutomaton,
    p: ControlId,
    run: &Run,
    t: TransId,
    jus: &Justification,
) -> Result<Vec<(ControlId, Run)>, WitnessError> {
    let n = model.order;
    let rule = jus.rule().expect("non-initial justification");
    let malformed = |detail: &str| WitnessError::MalformedJustification {
        trans: t,
        rule: model.display_rule(rule),
        detail: detail.to_string(),
    };
    let head = a.long_of(t);
    match (&model.rule(rule).kind, jus) {
        (RuleKind::Alt { from, to }, Justification::Alt { set, .. }) => {
            if *from != p {
                return Err(malformed("rule source differs from the run's control"));
            }
            let mut out = Vec::new();
            for &p2 in to {
                let q = a.control_state(p2);
                let tj = set
                    .iter()
                    .copied()
                    .find(|&u| a.ancestor(a.one(u).src, n) == Some(q))
                    .ok_or_else(|| malformed("no transition for a branch control"))?;
                let r2 = run.with_top_ann(vec![tj]).ok_or_else(|| malformed("empty run"))?;
                out.push((p2, r2));
            }
            Ok(out)
        }
        (RuleKind::Step { op, to, .. }, _) => {
            let next = match (op, jus) {
                (Op::Pop(k), Justification::Rule { .. }) => {
                    let s = single(&head.targets[k - 1]).ok_or_else(|| malformed("pop target is not a singleton"))?;
                    let popped = run.pop(*k).ok_or_else(|| malformed("pop undefined on the run"))?;
                    pick_continuation(a, &popped, s, *k).ok_or_else(|| malformed("no continuation after pop"))?
                }
                (Op::Collapse(k), Justification::Rule { .. }) => {
                    let s = single(&head.br).ok_or_else(|| malformed("collapse branch is not a singleton"))?;
                    let c = run.collapse(*k).ok_or_else(|| malformed("collapse undefined on the run"))?;
                    pick_continuation(a, &c, s, *k).ok_or_else(|| malformed("no continuation after collapse"))?
                }
                (Op::Rew(b), Justification::Rew { trans, .. }) => run
                    .rew(*b)
                    .and_then(|r| r.with_top_ann(vec![*trans]))
                    .ok_or_else(|| malformed("rewrite undefined on the run"))?,
                (Op::Push(k), Justification::Push { head: h, set, .. }) => run
                    .with_top_ann(annotation(set.clone()))
                    .and_then(|r| r.push(*k))
                    .and_then(|r| r.with_top_ann(vec![*h]))
                    .ok_or_else(|| malformed("push undefined on the run"))?,
                (Op::PushChar(b, k), Justification::Push { head: h, set, .. }) => run
                    .with_top_ann(annotation(set.clone()))
                    .and_then(|r| r.push_char(*b, *k, vec![*h]))
                    .ok_or_else(|| malformed("character push undefined on the run"))?,
                _ => return Err(malformed("justification form does not match the rule")),
            };
            Ok(vec![(*to, next)])
        }
        _ => Err(malformed("justification form does not match the rule")),
    }
}

fn single(s: &StateSet) -> Option<crate::automaton::StateId> {
    if s.len() == 1 {
        s.iter().next()
    } else {
        None
    }
}

/// After a pop or collapse at order `k`, chooses the transition at the new top
/// whose order-`k` state is `s`, preferring the earliest justified one.
fn pick_continuation(a: &StackAutomaton, r: &Run, s: crate::automaton::StateId, k: usize) -> Option<Run> {
    let (_, _, ts) = r.top_char_ann()?;
    let best = ts
        .iter()
        .copied()
        .filter(|&u| a.ancestor(a.one(u).src, k) == Some(s))
        .min_by_key(|&u| (a.justification(u).step(), u))?;
    r.with_top_ann(vec![best])
}

/// Why a tree fails to be a witness.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("rule {rule} does not apply at {config}")]
    NotApplicable { rule: String, config: String },
    #[error("children of rule {rule} at {config} do not match its successors")]
    WrongChildren { rule: String, config: String },
    #[error("leaf {config} is not accepted by the target automaton")]
    LeafRejected { config: String },
}

/// Replays a witness tree: every internal node's children are exactly the
/// successors of its rule and every leaf is accepted by `a0`.
pub fn validate(tree: &WitnessNode, model: &Cpds, a0: &StackAutomaton) -> Result<(), ReplayError> {
    let show = |c: &Configuration| format!("<{}, {}>", model.control_name(c.control), render_stack(&c.stack, &model.alphabet));
    let mut work = vec![tree];
    while let Some(node) = work.pop() {
        match node.rule {
            None => {
                if !node.children.is_empty() {
                    return Err(ReplayError::WrongChildren {
                        rule: "(none)".into(),
                        config: show(&node.config),
                    });
                }
                if !a0.accepts_config(node.config.control, &node.config.stack) {
                    return Err(ReplayError::LeafRejected {
                        config: show(&node.config),
                    });
                }
            }
            Some(r) => {
                let outcome = model.apply(r, &node.config).ok_or_else(|| ReplayError::NotApplicable {
                    rule: model.display_rule(r),
                    config: show(&node.config),
                })?;
                let expected: Vec<Configuration> = match outcome {
                    Outcome::Single(c) => vec![c],
                    Outcome::Branch(cs) => cs,
                };
                let got: Vec<&Configuration> = node.children.iter().map(|c| &c.config).collect();
                let matches = got.len() == expected.len() && expected.iter().all(|e| got.contains(&e));
                if !matches {
                    return Err(ReplayError::WrongChildren {
                        rule: model.display_rule(r),
                        config: show(&node.config),
                    });
                }
                work.extend(node.children.iter());
            }
        }
    }
    Ok(())
}

impl WitnessNode {
    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut count = 0;
        let mut work = vec![self];
        while let Some(n) = work.pop() {
            count += 1;
            work.extend(n.children.iter());
        }
        count
    }

    /// The leaves, left to right.
    pub fn leaves(&self) -> Vec<&WitnessNode> {
        let mut out = Vec::new();
        let mut work = vec![self];
        while let Some(n) = work.pop() {
            if n.children.is_empty() {
                out.push(n);
            }
            work.extend(n.children.iter().rev());
        }
        out
    }

    /// The rule sequence of a tree without branching.
    pub fn rule_sequence(&self) -> Option<Vec<RuleId>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match (cur.rule, cur.children.as_slice()) {
                (None, []) => return Some(out),
                (Some(r), [child]) => {
                    out.push(r);
                    cur = child;
                }
                _ => return None,
            }
        }
    }

    /// JSON rendering `{control, stack, rule, children}`.
    pub fn to_json(&self, model: &Cpds) -> Value {
        let children: Vec<Value> = self.children.iter().map(|c| c.to_json(model)).collect();
        json!({
            "control": model.control_name(self.config.control),
            "stack": render_stack(&self.config.stack, &model.alphabet),
            "rule": self.rule.map(|r| model.rule(r).name.clone()),
            "children": children,
        })
    }

    /// The witness as a JSON document: the tree plus, for linear witnesses,
    /// the flat rule sequence.
    pub fn to_document(&self, model: &Cpds) -> Value {
        let seq = self
            .rule_sequence()
            .map(|rs| rs.into_iter().map(|r| model.rule(r).name.clone()).collect::<Vec<_>>());
        json!({ "tree": self.to_json(model), "rules": seq })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fast::saturate_fast;
    use crate::parse::{parse_automaton, parse_model};
    use crate::saturation::{saturate, Budget, Mode};

    const FIG3: &str = "order 2\nalphabet a b c d\nlinkorder a=2\ninit q1 [[b][c][d]]\ntarget q5\n\
        rule q1 b cpush a 2 q2\nrule q2 a push 2 q3\nrule q3 a collapse 2 q4\nrule q4 c pop 2 q5\n";

    #[test]
    fn worked_example_witness_is_the_four_rules() {
        let f = parse_model(FIG3).unwrap();
        let m = &f.model;
        let a0 = parse_automaton("q5 -- d / {} --> ({};{})\n", m).unwrap();
        let init = f.init.clone().unwrap();
        let opts = WitnessOptions {
            check_runs: true,
            ..WitnessOptions::default()
        };
        for a in [
            saturate(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap().automaton,
            saturate_fast(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap().automaton,
        ] {
            let (tree, stats) = extract(m, &a, &init, opts).unwrap();
            let names: Vec<&str> = tree.rule_sequence().unwrap().into_iter().map(|r| m.rule(r).name.as_str()).collect();
            assert_eq!(names, ["r1", "r2", "r3", "r4"]);
            assert_eq!(stats.descent_checks, 4);
            validate(&tree, m, &a0).unwrap();
        }
    }

    #[test]
    fn accepted_target_gives_a_leaf() {
        let f = parse_model(FIG3).unwrap();
        let m = &f.model;
        let a0 = parse_automaton("q5 -- d / {} --> ({};{})\n", m).unwrap();
        let a = saturate(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap().automaton;
        let q5 = m.lookup_control("q5").unwrap();
        let c = Configuration::new(q5, crate::parse::parse_stack("[[d]]", 2, &m.alphabet).unwrap());
        let (tree, _) = extract(m, &a, &c, WitnessOptions::default()).unwrap();
        assert_eq!(tree.size(), 1);
        assert_eq!(tree.rule_sequence(), Some(vec![]));
    }

    #[test]
    fn wrong_successor_is_rejected() {
        let f = parse_model(FIG3).unwrap();
        let m = &f.model;
        let a0 = parse_automaton("q5 -- d / {} --> ({};{})\n", m).unwrap();
        let a = saturate(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap().automaton;
        let (mut tree, _) = extract(m, &a, &f.init.clone().unwrap(), WitnessOptions::default()).unwrap();
        tree.children[0].config.stack = crate::parse::parse_stack("[[c][d]]", 2, &m.alphabet).unwrap();
        assert!(matches!(validate(&tree, m, &a0), Err(ReplayError::WrongChildren { .. })));
    }
}
