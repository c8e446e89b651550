//! Reference saturation: the saturation function applied round by round until
//! nothing changes.
//!
//! Each round reads only the transitions that existed when the round started
//! (tracked by a [`Snapshot`]) and records the round number in the
//! justification of every transition it adds. The worklist engine in
//! [`crate::fast`] computes the same automaton much faster; this one is kept as
//! a readable reference and a differential-testing partner.

use std::time::Instant;

use crate::automaton::{AutomatonError, Justification, LongTrans, Snapshot, StackAutomaton, StateId, StateSet, TransId};
use crate::model::{ControlId, Cpds, Op, RuleId, RuleKind};
use crate::stack::Symbol;

/// Which saturation function to apply.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    /// The full alternating saturation function.
    #[default]
    Full,
    /// The restriction that never adds a transition whose order-`n` target
    /// set has more than one state. Sound and complete for non-alternating
    /// systems and automata.
    NonAlternating,
}

/// Resource limits for a saturation run.
#[derive(Copy, Clone, Debug, Default)]
pub struct Budget {
    /// Give up after this instant.
    pub deadline: Option<Instant>,
    /// Give up once the automaton has more short-form transitions than this.
    pub max_transitions: Option<usize>,
}

impl Budget {
    pub const UNLIMITED: Budget = Budget {
        deadline: None,
        max_transitions: None,
    };

    pub fn with_max_transitions(n: usize) -> Budget {
        Budget {
            deadline: None,
            max_transitions: Some(n),
        }
    }

    /// Fails if the budget is exhausted for an automaton of `size` transitions.
    pub fn check(&self, size: usize) -> Result<(), SaturationError> {
        if let Some(max) = self.max_transitions {
            if size > max {
                return Err(SaturationError::TooManyTransitions(max));
            }
        }
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(SaturationError::Timeout);
            }
        }
        Ok(())
    }
}

/// Errors raised by either saturation engine.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SaturationError {
    #[error("initial automaton: {0}")]
    Automaton(#[from] AutomatonError),
    #[error("initial automaton has order {automaton} but the model has order {model}")]
    OrderMismatch { automaton: usize, model: usize },
    #[error("initial automaton has {automaton} control states but the model has {model}")]
    ControlMismatch { automaton: usize, model: usize },
    #[error("saturation exceeded the limit of {0} transitions")]
    TooManyTransitions(usize),
    #[error("saturation timed out")]
    Timeout,
}

/// The saturated automaton together with the automaton it started from.
#[derive(Clone, Debug)]
pub struct SaturationResult {
    /// The saturated automaton; recognises the predecessors of `initial`.
    pub automaton: StackAutomaton,
    /// The initial automaton (its states keep their identifiers in
    /// `automaton`).
    pub initial: StackAutomaton,
    /// Number of rounds (reference engine) or processed transitions
    /// (worklist engine).
    pub iterations: usize,
}

impl SaturationResult {
    /// Whether `<p, w>` is recognised by the saturated automaton.
    pub fn accepts_config(&self, p: ControlId, w: &crate::stack::CollapsibleStack) -> bool {
        self.automaton.accepts_config(p, w)
    }
}

/// Checks that `a0` fits `model` and follows the initial-state conventions.
pub fn check_initial(model: &Cpds, a0: &StackAutomaton) -> Result<(), SaturationError> {
    if a0.order() != model.order {
        return Err(SaturationError::OrderMismatch {
            automaton: a0.order(),
            model: model.order,
        });
    }
    if a0.num_controls() != model.num_controls() {
        return Err(SaturationError::ControlMismatch {
            automaton: a0.num_controls(),
            model: model.num_controls(),
        });
    }
    a0.check_conventions(&|q| a0.state_name(q, &model.controls))?;
    Ok(())
}

/// All paths of higher-order transitions from `q` down to order `k` that
/// existed at `snap`: the reached order-`k` state and the target sets
/// `[Q_n, ..., Q_{k+1}]` passed on the way.
pub fn paths_to_order(a: &StackAutomaton, q: StateId, k: usize, snap: Snapshot) -> Vec<(StateId, Vec<StateSet>)> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    walk(a, q, k, snap, &mut prefix, &mut out);
    out
}

fn walk(
    a: &StackAutomaton,
    q: StateId,
    k: usize,
    snap: Snapshot,
    prefix: &mut Vec<StateSet>,
    out: &mut Vec<(StateId, Vec<StateSet>)>,
) {
    if a.state_order(q) == k {
        out.push((q, prefix.clone()));
        return;
    }
    for &h in a.high_from(q) {
        if (h.0 as usize) >= snap.high {
            continue;
        }
        let ht = a.high(h);
        prefix.push(ht.tgt.clone());
        walk(a, ht.mid, k, snap, prefix, out);
        prefix.pop();
    }
}

/// Target vector `(∅, ..., ∅, {s_k}?, Q_{k+1}, ..., Q_n)` from a path prefix.
pub(crate) fn targets_from_prefix(n: usize, k: usize, at_k: StateSet, prefix: &[StateSet]) -> Vec<StateSet> {
    let mut targets = vec![StateSet::new(); n];
    targets[k - 1] = at_k;
    for (j, set) in prefix.iter().enumerate() {
        // prefix[0] = Q_n, prefix[j] = Q_{n-j}
        targets[n - 1 - j] = set.clone();
    }
    targets
}

/// Whether a guard (if any) is met at the pivot state `s`.
pub(crate) fn guard_met(a: &StackAutomaton, s: StateId, guard: &Option<Vec<Symbol>>, snap: Snapshot) -> bool {
    match guard {
        None => true,
        Some(g) => g.iter().any(|&b| a.has_long_from(s, b, snap)),
    }
}

/// Combines the head transition of a `push_k` step with a lifted transition.
pub(crate) fn push_targets(head: &LongTrans, lifted_br: &StateSet, lifted: &[StateSet], k: usize) -> (StateSet, Vec<StateSet>) {
    let br = head.br.union(lifted_br);
    let mut targets = head.targets.clone();
    for i in 0..k - 1 {
        targets[i] = targets[i].union(&lifted[i]);
    }
    targets[k - 1] = lifted[k - 1].clone();
    (br, targets)
}

/// Combines the head transition of a `push_b^k` step with an order-1 lifted
/// transition.
pub(crate) fn push_char_targets(head: &LongTrans, lifted1: &StateSet, k: usize) -> Vec<StateSet> {
    let mut targets = head.targets.clone();
    targets[0] = lifted1.clone();
    targets[k - 1] = targets[k - 1].union(&head.br);
    targets
}

/// Whether the branch set of a `push_b^k` head transition may be moved into
/// the order-`k` target set.
pub(crate) fn branch_fits(a: &StackAutomaton, br: &StateSet, k: usize) -> bool {
    br.is_empty() || a.set_order(br) == Some(k)
}

struct Round<'a> {
    a: &'a mut StackAutomaton,
    snap: Snapshot,
    step: u64,
    mode: Mode,
    added: usize,
}

impl Round<'_> {
    fn add(&mut self, t: LongTrans, j: Justification) -> Result<(), SaturationError> {
        if self.mode == Mode::NonAlternating && t.targets.last().map_or(0, StateSet::len) > 1 {
            return Ok(());
        }
        if !t.br.is_empty() && self.a.set_order(&t.br).is_none() {
            return Ok(());
        }
        if !self.a.add_long(&t, j)?.is_empty() {
            self.added += 1;
        }
        Ok(())
    }
}

/// Saturates `a0` with respect to `model` using the reference round-based
/// procedure.
pub fn saturate(model: &Cpds, a0: &StackAutomaton, mode: Mode, budget: Budget) -> Result<SaturationResult, SaturationError> {
    check_initial(model, a0)?;
    let mut a = a0.clone();
    let n = model.order;
    let mut rounds = 0usize;
    loop {
        budget.check(a.num_short())?;
        let snap = a.snapshot();
        let mut round = Round {
            a: &mut a,
            snap,
            step: rounds as u64 + 1,
            mode,
            added: 0,
        };
        for id in model.rule_ids() {
            apply_rule(model, id, &mut round, n)?;
            budget.check(round.a.num_short())?;
        }
        rounds += 1;
        if round.added == 0 {
            break;
        }
    }
    Ok(SaturationResult {
        automaton: a,
        initial: a0.clone(),
        iterations: rounds,
    })
}

fn apply_rule(model: &Cpds, id: RuleId, r: &mut Round<'_>, n: usize) -> Result<(), SaturationError> {
    let snap = r.snap;
    let step = r.step;
    match &model.rule(id).kind {
        RuleKind::Alt { from, to } => {
            let q = r.a.control_state(*from);
            let set: StateSet = to.iter().map(|&p| r.a.control_state(p)).collect();
            for a in model.alphabet.symbols() {
                for l in r.a.lifted(&set, n, a, snap) {
                    let t = LongTrans {
                        src: q,
                        sym: a,
                        br: l.br,
                        targets: l.targets,
                    };
                    r.add(t, Justification::Alt { rule: id, set: l.members, step })?;
                }
            }
        }
        RuleKind::Step { from, sym, op, guard, to } => {
            let q = r.a.control_state(*from);
            let q2 = r.a.control_state(*to);
            let a = *sym;
            match op {
                Op::Pop(k) => {
                    for (s, prefix) in paths_to_order(r.a, q2, *k, snap) {
                        if !guard_met(r.a, s, guard, snap) {
                            continue;
                        }
                        let t = LongTrans {
                            src: q,
                            sym: a,
                            br: StateSet::new(),
                            targets: targets_from_prefix(n, *k, StateSet::singleton(s), &prefix),
                        };
                        r.add(t, Justification::Rule { rule: id, step })?;
                    }
                }
                Op::Collapse(k) => {
                    for (s, prefix) in paths_to_order(r.a, q2, *k, snap) {
                        if !guard_met(r.a, s, guard, snap) {
                            continue;
                        }
                        let t = LongTrans {
                            src: q,
                            sym: a,
                            br: StateSet::singleton(s),
                            targets: targets_from_prefix(n, *k, StateSet::new(), &prefix),
                        };
                        r.add(t, Justification::Rule { rule: id, step })?;
                    }
                }
                Op::Push(k) => {
                    let heads: Vec<TransId> = r.a.long_from(q2, a, snap);
                    for h in heads {
                        let head = r.a.long_of(h);
                        let qk = head.targets[k - 1].clone();
                        // When the head's own order-k state is lifted through the same
                        // order-k transition as the head, both continue identically.
                        let pivot = r.a.ancestor(r.a.one(h).src, *k);
                        let mid = r.a.ancestor(r.a.one(h).src, k - 1);
                        let aut: &StackAutomaton = r.a;
                        let allow = |q: StateId, t: TransId| {
                            Some(q) != pivot || t == h || aut.ancestor(aut.one(t).src, k - 1) != mid
                        };
                        let lifts = aut.lifted_filtered(&qk, *k, a, snap, &allow);
                        for l in lifts {
                            let (br, targets) = push_targets(&head, &l.br, &l.targets, *k);
                            let t = LongTrans { src: q, sym: a, br, targets };
                            r.add(
                                t,
                                Justification::Push {
                                    rule: id,
                                    head: h,
                                    set: l.members,
                                    step,
                                },
                            )?;
                        }
                    }
                }
                Op::PushChar(b, k) => {
                    let heads: Vec<TransId> = r.a.long_from(q2, *b, snap);
                    for h in heads {
                        let head = r.a.long_of(h);
                        if !branch_fits(r.a, &head.br, *k) {
                            continue;
                        }
                        let q1 = head.targets[0].clone();
                        for l in r.a.lifted(&q1, 1, a, snap) {
                            let targets = push_char_targets(&head, &l.targets[0], *k);
                            let t = LongTrans {
                                src: q,
                                sym: a,
                                br: l.br,
                                targets,
                            };
                            r.add(
                                t,
                                Justification::Push {
                                    rule: id,
                                    head: h,
                                    set: l.members,
                                    step,
                                },
                            )?;
                        }
                    }
                }
                Op::Rew(b) => {
                    let heads: Vec<TransId> = r.a.long_from(q2, *b, snap);
                    for h in heads {
                        let head = r.a.long_of(h);
                        let t = LongTrans {
                            src: q,
                            sym: a,
                            br: head.br,
                            targets: head.targets,
                        };
                        r.add(t, Justification::Rew { rule: id, trans: h, step })?;
                    }
                }
            }
        }
    }
    Ok(())
}
