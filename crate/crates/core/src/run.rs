//! Automaton runs represented as annotated stacks.
//!
//! A run of a stack automaton over a stack annotates every character with the
//! set of order-1 transitions that read it; the higher-order transitions are
//! implicit because every order-1 source state is minted from exactly one
//! higher-order transition. This module provides
//!
//! * the validity predicates on such runs (`Q`-validity, link-validity,
//!   trimmedness), implemented directly from their definitions through stack
//!   operations on the run itself, independently of the automaton's
//!   membership labelling;
//! * the descent relation `↪_k` that guarantees termination of witness
//!   extraction;
//! * construction of a trimmed accepting run for an accepted configuration.

use std::collections::BTreeMap;

use crate::automaton::{LabelTree, StackAutomaton, StateId, StateSet, TransId};
use crate::model::ControlId;
use crate::stack::{CollapsibleStack, Link, Stack};

/// A run: a stack whose characters carry sorted sets of order-1 transitions.
pub type Run = Stack<Vec<TransId>>;

/// Normalises a transition set to the sorted, duplicate-free form used as a
/// run annotation.
pub fn annotation(mut ts: Vec<TransId>) -> Vec<TransId> {
    ts.sort();
    ts.dedup();
    ts
}

/// The states `q` for which the run `r` (of order `k >= 1`) is `{q}`-valid.
///
/// `Q`-validity is closed under unions and subsets, so `r` is `Q`-valid
/// exactly when `Q` is contained in this set.
pub fn valid_states(a: &StackAutomaton, r: &Run) -> StateSet {
    let k = r.order();
    let kids: Vec<&Run> = r.children().collect();
    // Bottom-up over the suffixes of the sequence.
    let mut below: StateSet = a.finals().filter(|&q| a.state_order(q) == k).collect();
    for child in kids.into_iter().rev() {
        let mut here = StateSet::new();
        if k == 1 {
            let (sym, _, ts) = child.as_char().expect("order-1 runs contain characters");
            for &t in ts {
                let tr = a.one(t);
                if tr.sym == sym && tr.tgt.is_subset(&below) {
                    here.insert(tr.src);
                }
            }
        } else {
            for m in valid_states(a, child).iter() {
                if let Some(parent) = a.parent(m) {
                    if let crate::automaton::StateKey::Minted { targets, .. } = a.state_key(m) {
                        if targets.is_subset(&below) {
                            here.insert(parent);
                        }
                    }
                }
            }
        }
        below = here;
    }
    below
}

/// Whether `r` is `Q`-valid.
pub fn q_valid(a: &StackAutomaton, r: &Run, q: &StateSet) -> bool {
    q.is_empty() || q.is_subset(&valid_states(a, r))
}

/// Every substack obtained from `r` by pops whose top character exists,
/// together with its position: the number of order-`(k-1)` stacks popped at
/// each order `k`, listed from order `n` down to order 1.
pub fn positions<A: std::hash::Hash + Clone>(r: &Stack<A>) -> Vec<(Vec<usize>, Stack<A>)> {
    let n = r.order();
    let mut out = Vec::new();
    let mut work: Vec<(Vec<usize>, Stack<A>)> = vec![(Vec::new(), r.clone())];
    while let Some((path, s)) = work.pop() {
        let level = n - path.len();
        if level == 0 {
            out.push((path, s));
            continue;
        }
        let len = s.top_len(level).unwrap_or(0);
        let mut cur = s;
        for i in 0..len {
            let mut p = path.clone();
            p.push(i);
            work.push((p, cur.clone()));
            if i + 1 < len {
                cur = cur.pop(level).expect("pops within the length are defined");
            }
        }
    }
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

/// Whether every transition `q --a, Q_br--> Q` annotating a character whose
/// link is `<k, i>` sees a `Q_br`-valid stack at `top_{k+1}(collapse_k)`.
pub fn link_valid(a: &StackAutomaton, r: &Run) -> bool {
    for (_, sub) in positions(r) {
        let (_, link, ts) = sub.top_char_ann().expect("positions have a top character");
        for &t in ts {
            let br = &a.one(t).br;
            if br.is_empty() {
                continue;
            }
            if !collapse_target_valid(a, &sub, link, br) {
                return false;
            }
        }
    }
    true
}

fn collapse_target_valid(a: &StackAutomaton, sub: &Run, link: Link, br: &StateSet) -> bool {
    if a.set_order(br) != Some(link.order) {
        return false;
    }
    match sub.collapse(link.order).and_then(|c| c.top(link.order + 1)) {
        Some(target) => q_valid(a, &target, br),
        None => false,
    }
}

/// Whether `r` is an accepting run from the order-`n` state `q`: `{q}`-valid,
/// link-valid, and with a singleton annotation at the top character.
pub fn accepting(a: &StackAutomaton, r: &Run, q: StateId) -> bool {
    if let Some((_, _, ts)) = r.top_char_ann() {
        if ts.len() != 1 {
            return false;
        }
    }
    q_valid(a, r, &StateSet::singleton(q)) && link_valid(a, r)
}

/// Whether every transition in the run is useful: for each pop-reachable
/// substack and each transition `t` at its top with long form targets
/// `(Q_1, ..., Q_n)`, the stacks `top_{i+1}(pop_i)` are `Q_i`-valid for every
/// order `i` below the least order at which something was popped.
pub fn trimmed(a: &StackAutomaton, r: &Run) -> bool {
    let n = r.order();
    for (path, sub) in positions(r) {
        // path[j] counts pops at order n - j.
        let least = path
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, _)| n - j)
            .min()
            .unwrap_or(n + 1);
        let (_, _, ts) = sub.top_char_ann().expect("positions have a top character");
        for &t in ts {
            let lt = a.long_of(t);
            for i in 1..least.min(n + 1) {
                let Some(rest) = sub.pop(i).and_then(|s| s.top(i + 1)) else {
                    return false;
                };
                if !q_valid(a, &rest, &lt.targets[i - 1]) {
                    return false;
                }
            }
        }
    }
    true
}

/// Occurrence counts of order-1 transitions per justification step.
fn step_counts(a: &StackAutomaton, r: &Run, out: &mut BTreeMap<u64, usize>) {
    if let Some((_, _, ts)) = r.as_char() {
        for &t in ts {
            *out.entry(a.justification(t).step()).or_default() += 1;
        }
        return;
    }
    for c in r.children() {
        step_counts(a, c, out);
    }
}

/// The descent relation: `measure_less(a, r, r2)` holds when `r ↪_k r2` for
/// `k` the order of `r`, i.e. `r2` is strictly smaller than `r`.
///
/// At order 1 the runs are compared by their per-step transition counts,
/// lexicographically from the latest step down. At higher orders the
/// sequences are compared from the bottom.
pub fn measure_less(a: &StackAutomaton, r: &Run, r2: &Run) -> bool {
    let k = r.order();
    if k != r2.order() || k == 0 {
        return false;
    }
    if k == 1 {
        let mut c1 = BTreeMap::new();
        let mut c2 = BTreeMap::new();
        step_counts(a, r, &mut c1);
        step_counts(a, r2, &mut c2);
        let mut steps: Vec<u64> = c1.keys().chain(c2.keys()).copied().collect();
        steps.sort_unstable();
        steps.dedup();
        for s in steps.into_iter().rev() {
            let x = c1.get(&s).copied().unwrap_or(0);
            let y = c2.get(&s).copied().unwrap_or(0);
            if x != y {
                return y < x;
            }
        }
        return false;
    }
    // Children listed bottom-first: u[0] is u_1.
    let mut u: Vec<&Run> = r.children().collect();
    let mut v: Vec<&Run> = r2.children().collect();
    u.reverse();
    v.reverse();
    let (l, l2) = (u.len(), v.len());
    if l2 < l {
        if l2 == 0 {
            return true;
        }
        u[..l2 - 1] == v[..l2 - 1] && (u[l2 - 1] == v[l2 - 1] || measure_less(a, u[l2 - 1], v[l2 - 1]))
    } else {
        if l == 0 {
            return false;
        }
        u[..l - 1] == v[..l - 1] && v[l - 1..].iter().all(|vi| measure_less(a, u[l - 1], vi))
    }
}

/// Builds a trimmed accepting run of `w` from `q_p`, choosing at every
/// position the smallest transition compatible with the membership labels.
/// Returns `None` when `<p, w>` is not accepted.
pub fn initial_run(a: &StackAutomaton, p: ControlId, w: &CollapsibleStack) -> Option<Run> {
    let q = a.control_state(p);
    let labels = a.label_tree(w);
    if !labels.top().contains(q) {
        return None;
    }
    let mut req_ctx: Vec<Vec<StateSet>> = vec![Vec::new(); w.order() + 2];
    let mut label_ctx: Vec<Vec<StateSet>> = vec![Vec::new(); w.order() + 2];
    Some(build_chain(a, w, &labels, StateSet::singleton(q), &mut req_ctx, &mut label_ctx))
}

/// Top-down choice of transitions over one sequence. `req_ctx[k]` holds the
/// requirements on the suffixes of the enclosing order-`k` sequence (links
/// inside the current element add to it), `label_ctx[k]` its labels.
fn build_chain(
    a: &StackAutomaton,
    w: &CollapsibleStack,
    labels: &LabelTree,
    required: StateSet,
    req_ctx: &mut Vec<Vec<StateSet>>,
    label_ctx: &mut Vec<Vec<StateSet>>,
) -> Run {
    let k = w.order();
    let elems: Vec<&CollapsibleStack> = w.children().collect();
    let len = elems.len();
    let saved_req = std::mem::replace(&mut req_ctx[k], vec![StateSet::new(); len + 1]);
    let saved_lbl = std::mem::take(&mut label_ctx[k]);
    req_ctx[k][len] = required;
    let mut out: Vec<Run> = Vec::with_capacity(len);
    for s in (1..=len).rev() {
        let child = elems[len - s];
        // Only the suffixes strictly below this element are link targets.
        label_ctx[k] = labels.labels[..s].to_vec();
        let req = req_ctx[k][s].clone();
        let below = labels.labels[s - 1].clone();
        if k >= 2 {
            let kid = &labels.kids[s - 1];
            let mut child_req = StateSet::new();
            for q in req.iter() {
                let pick = a
                    .high_from(q)
                    .iter()
                    .copied()
                    .find(|&h| {
                        let ht = a.high(h);
                        kid.top().contains(ht.mid) && ht.tgt.is_subset(&below)
                    })
                    .expect("labelled states have a compatible transition");
                let ht = a.high(pick);
                child_req.insert(ht.mid);
                let tgt = ht.tgt.clone();
                req_ctx[k][s - 1] = req_ctx[k][s - 1].union(&tgt);
            }
            out.push(build_chain(a, child, kid, child_req, req_ctx, label_ctx));
        } else {
            let (sym, link, _) = child.as_char().expect("order-1 stacks contain characters");
            let mut picked = Vec::new();
            for q in req.iter() {
                let t = a
                    .one_from(q, sym)
                    .iter()
                    .copied()
                    .find(|&t| {
                        let tr = a.one(t);
                        tr.tgt.is_subset(&below) && branch_allowed(a, &tr.br, link, label_ctx)
                    })
                    .expect("labelled states have a compatible transition");
                let tr = a.one(t);
                req_ctx[1][s - 1] = req_ctx[1][s - 1].union(&tr.tgt);
                if !tr.br.is_empty() {
                    let slot = &mut req_ctx[link.order][link.index];
                    *slot = slot.union(&tr.br);
                }
                picked.push(t);
            }
            out.push(Stack::character(sym, link, annotation(picked)));
        }
    }
    req_ctx[k] = saved_req;
    label_ctx[k] = saved_lbl;
    Stack::from_children(k, out)
}

/// The branch condition as used by the labelling: an empty branch set is
/// always allowed; otherwise the link must have the order of the branch
/// states and point to a suffix whose label contains them.
fn branch_allowed(a: &StackAutomaton, br: &StateSet, link: Link, label_ctx: &[Vec<StateSet>]) -> bool {
    if br.is_empty() {
        return true;
    }
    if a.set_order(br) != Some(link.order) {
        return false;
    }
    label_ctx
        .get(link.order)
        .and_then(|labels| labels.get(link.index))
        .is_some_and(|l| br.is_subset(l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_automaton, parse_model, parse_stack};
    use crate::saturation::{saturate, Budget, Mode};

    const FIG3: &str = "order 2\nalphabet a b c d\nlinkorder a=2\ninit q1 [[b][c][d]]\ntarget q5\n\
        rule q1 b cpush a 2 q2\nrule q2 a push 2 q3\nrule q3 a collapse 2 q4\nrule q4 c pop 2 q5\n";

    #[test]
    fn initial_run_of_worked_example() {
        let f = parse_model(FIG3).unwrap();
        let m = &f.model;
        let a0 = parse_automaton("q5 -- d / {} --> ({};{})\n", m).unwrap();
        let r = saturate(m, &a0, Mode::Full, Budget::UNLIMITED).unwrap();
        let a = &r.automaton;
        let q1 = m.lookup_control("q1").unwrap();
        let w = parse_stack("[[b][c][d]]", 2, &m.alphabet).unwrap();
        let run = initial_run(a, q1, &w).unwrap();
        assert_eq!(run.project(), w);
        // One transition per character.
        for (_, sub) in positions(&run) {
            assert_eq!(sub.top_char_ann().unwrap().2.len(), 1);
        }
        assert!(accepting(a, &run, a.control_state(q1)));
        assert!(trimmed(a, &run));
        let q5 = m.lookup_control("q5").unwrap();
        assert!(initial_run(a, q5, &parse_stack("[[c]]", 2, &m.alphabet).unwrap()).is_none());
    }

    #[test]
    fn empty_run_validity_is_finality() {
        let f = parse_model(FIG3).unwrap();
        let a = parse_automaton("q5 -- d / {} --> ({};{})\n", &f.model).unwrap();
        let empty: Run = Stack::empty(2);
        assert!(q_valid(&a, &empty, &StateSet::new()));
        let q5 = a.control_state(f.model.lookup_control("q5").unwrap());
        assert!(!q_valid(&a, &empty, &StateSet::singleton(q5)));
    }

    #[test]
    fn positions_cover_every_character() {
        let f = parse_model(FIG3).unwrap();
        let w = parse_stack("[[a b][c][d]]", 2, &f.model.alphabet).unwrap();
        let ps = positions(&w);
        assert_eq!(ps.len(), 4);
        assert_eq!(ps[0].0, vec![0, 0]);
        assert_eq!(ps[1].0, vec![0, 1]);
    }
}
