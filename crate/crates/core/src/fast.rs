//! Worklist saturation with sources, targets and trip-wires.
//!
//! Every new short-form transition is processed exactly once: it is matched
//! against the rules of the system (adding transitions directly for pop,
//! collapse and rewrite rules) and against the pending trip-wires. Push and
//! alternating rules depend on a *set* of transitions; for these a source
//! describes what to build and a target collects, state by state, the
//! transitions leaving a set of states. When a target becomes complete the
//! matching sources fire, propagating one order down until a new order-1
//! transition is produced.
//!
//! Guarded pop/collapse rules whose guard is not yet met are parked on the
//! `(state, character)` pair they wait for and fire as soon as a matching
//! transition appears.

use std::collections::HashMap;

use crate::automaton::{Justification, LongTrans, ShortId, StackAutomaton, StateId, StateSet, TransId};
use crate::model::{Cpds, Op, RuleId, RuleKind};
use crate::saturation::{branch_fits, check_initial, Budget, Mode, SaturationError, SaturationResult};
use crate::stack::Symbol;

/// Provenance carried by a source until it produces a transition.
#[derive(Clone, Debug)]
enum SrcJus {
    /// Alternating rule.
    Alt(RuleId),
    /// `push_k`: `mid` is the order-`(k-1)` state under the head transition;
    /// `shared` records whether the lifted part reuses it.
    Push { rule: RuleId, mid: StateId, shared: bool },
    /// `push_b^k` from the order-1 transition `head`.
    PushChar { rule: RuleId, head: TransId },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct SrcKey {
    order: usize,
    state: StateId,
    below: Option<StateId>,
    sym: Symbol,
    set: StateSet,
    extra: StateSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Target {
    order: usize,
    set: StateSet,
    countdown: StateSet,
    /// Order-1 targets only.
    sym: Option<Symbol>,
    lbl: StateSet,
    tgt: StateSet,
}

/// A pending unit of work that may add transitions.
enum Deferred {
    Add(LongTrans, Justification),
}

/// Statistics of a worklist run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FastStats {
    pub processed: usize,
    pub sources: usize,
    pub targets: usize,
}

struct Engine<'m, 't> {
    model: &'m Cpds,
    mode: Mode,
    budget: Budget,
    a: StackAutomaton,
    worklist: Vec<ShortId>,
    rel_high_by_src: HashMap<StateId, Vec<crate::automaton::HTransId>>,
    rel_one_by_src_sym: HashMap<(StateId, Symbol), Vec<TransId>>,
    sources: Vec<(SrcKey, SrcJus)>,
    source_index: HashMap<SrcKey, usize>,
    sources_by_set: HashMap<(usize, StateSet, Option<Symbol>), Vec<usize>>,
    targets: Vec<Target>,
    target_just: Vec<Vec<TransId>>,
    target_index: HashMap<Target, usize>,
    awaiting: HashMap<(usize, StateId, Option<Symbol>), Vec<usize>>,
    complete: HashMap<(usize, StateSet, Option<Symbol>), Vec<usize>>,
    parked: HashMap<(StateId, Symbol), Vec<(LongTrans, Justification)>>,
    processed: usize,
    trace: Option<&'t mut dyn FnMut(&str)>,
}

/// Saturates `a0` with respect to `model` using the worklist algorithm.
pub fn saturate_fast(model: &Cpds, a0: &StackAutomaton, mode: Mode, budget: Budget) -> Result<SaturationResult, SaturationError> {
    saturate_fast_traced(model, a0, mode, budget, None).map(|(r, _)| r)
}

/// As [`saturate_fast`], reporting one line per worklist event to `trace`.
pub fn saturate_fast_traced(
    model: &Cpds,
    a0: &StackAutomaton,
    mode: Mode,
    budget: Budget,
    trace: Option<&mut dyn FnMut(&str)>,
) -> Result<(SaturationResult, FastStats), SaturationError> {
    check_initial(model, a0)?;
    let mut e = Engine {
        model,
        mode,
        budget,
        a: a0.clone(),
        worklist: Vec::new(),
        rel_high_by_src: HashMap::new(),
        rel_one_by_src_sym: HashMap::new(),
        sources: Vec::new(),
        source_index: HashMap::new(),
        sources_by_set: HashMap::new(),
        targets: Vec::new(),
        target_just: Vec::new(),
        target_index: HashMap::new(),
        awaiting: HashMap::new(),
        complete: HashMap::new(),
        parked: HashMap::new(),
        processed: 0,
        trace,
    };
    e.run()?;
    let stats = FastStats {
        processed: e.processed,
        sources: e.sources.len(),
        targets: e.targets.len(),
    };
    Ok((
        SaturationResult {
            automaton: e.a,
            initial: a0.clone(),
            iterations: e.processed,
        },
        stats,
    ))
}

impl Engine<'_, '_> {
    fn log(&mut self, msg: impl FnOnce() -> String) {
        if let Some(t) = self.trace.as_mut() {
            t(&msg());
        }
    }

    fn run(&mut self) -> Result<(), SaturationError> {
        let n = self.model.order;
        // Everything in the initial automaton starts on the worklist (in
        // reverse so that the first transition is processed first).
        let mut initial: Vec<ShortId> = self.a.high_ids().map(ShortId::High).collect();
        initial.extend(self.a.one_ids().map(ShortId::One));
        initial.reverse();
        self.worklist = initial;
        for k in 2..=n {
            self.seed_target(k, None);
        }
        for a in self.model.alphabet.symbols() {
            self.seed_target(1, Some(a));
        }
        let model = self.model;
        for id in model.rule_ids() {
            match &model.rule(id).kind {
                RuleKind::Step {
                    from,
                    sym,
                    op: Op::Pop(k),
                    guard,
                    to,
                } if *k == n => {
                    let q = self.a.control_state(*from);
                    let s = self.a.control_state(*to);
                    let mut targets = vec![StateSet::new(); n];
                    targets[n - 1] = StateSet::singleton(s);
                    let t = LongTrans {
                        src: q,
                        sym: *sym,
                        br: StateSet::new(),
                        targets,
                    };
                    self.guarded_add(s, guard, t, id)?;
                }
                RuleKind::Step {
                    from,
                    sym,
                    op: Op::Collapse(k),
                    guard,
                    to,
                } if *k == n => {
                    let q = self.a.control_state(*from);
                    let s = self.a.control_state(*to);
                    let t = LongTrans {
                        src: q,
                        sym: *sym,
                        br: StateSet::singleton(s),
                        targets: vec![StateSet::new(); n],
                    };
                    self.guarded_add(s, guard, t, id)?;
                }
                RuleKind::Alt { from, to } => {
                    let q = self.a.control_state(*from);
                    let set: StateSet = to.iter().map(|&p| self.a.control_state(p)).collect();
                    for a in model.alphabet.symbols() {
                        self.create_trip(n, q, None, a, set.clone(), StateSet::new(), SrcJus::Alt(id))?;
                    }
                }
                _ => {}
            }
        }
        while let Some(t) = self.worklist.pop() {
            self.budget.check(self.a.num_short())?;
            self.log(|| format!("process {t:?}"));
            self.update_rules(t)?;
            self.update_trip(t)?;
            match t {
                ShortId::High(h) => self.rel_high_by_src.entry(self.a.high(h).src).or_default().push(h),
                ShortId::One(o) => {
                    let tr = self.a.one(o);
                    self.rel_one_by_src_sym.entry((tr.src, tr.sym)).or_default().push(o)
                }
            }
            self.processed += 1;
        }
        Ok(())
    }

    fn seed_target(&mut self, order: usize, sym: Option<Symbol>) {
        let t = Target {
            order,
            set: StateSet::new(),
            countdown: StateSet::new(),
            sym,
            lbl: StateSet::new(),
            tgt: StateSet::new(),
        };
        self.insert_target(t, Vec::new());
    }

    /// Records a target and indexes it; returns its index, or `None` if it
    /// already existed.
    fn insert_target(&mut self, t: Target, just: Vec<TransId>) -> Option<usize> {
        if self.target_index.contains_key(&t) {
            return None;
        }
        let idx = self.targets.len();
        for q in t.countdown.iter() {
            self.awaiting.entry((t.order, q, t.sym)).or_default().push(idx);
        }
        if t.countdown.is_empty() {
            self.complete.entry((t.order, t.set.clone(), t.sym)).or_default().push(idx);
        }
        self.target_index.insert(t.clone(), idx);
        self.targets.push(t);
        self.target_just.push(just);
        Some(idx)
    }

    /// Adds `t` now if the guard is met at `pivot`, otherwise parks it.
    fn guarded_add(&mut self, pivot: StateId, guard: &Option<Vec<Symbol>>, t: LongTrans, rule: RuleId) -> Result<(), SaturationError> {
        let j = Justification::Rule { rule, step: 0 };
        match guard {
            None => self.add_worklist(t, j),
            Some(g) => {
                if g.iter().any(|&b| self.a.reads(pivot, b)) {
                    return self.add_worklist(t, j);
                }
                for &b in g {
                    self.parked.entry((pivot, b)).or_default().push((t.clone(), j.clone()));
                }
                Ok(())
            }
        }
    }

    /// Adds a long-form transition; new short forms go on the worklist and the
    /// order-1 one gets `jus` stamped with the current size.
    fn add_worklist(&mut self, t: LongTrans, jus: Justification) -> Result<(), SaturationError> {
        let mut queue = vec![Deferred::Add(t, jus)];
        while let Some(Deferred::Add(t, jus)) = queue.pop() {
            if self.mode == Mode::NonAlternating && t.targets.last().map_or(0, StateSet::len) > 1 {
                continue;
            }
            if !t.br.is_empty() && self.a.set_order(&t.br).is_none() {
                continue;
            }
            if self.a.contains_long(&t) {
                continue;
            }
            let created = self.a.add_long(&t, jus.clone())?;
            let stamp = self.a.num_short() as u64;
            for &u in &created {
                self.worklist.push(u);
                if let ShortId::One(o) = u {
                    *self.a.justification_mut(o) = restamp(jus.clone(), stamp);
                    // Release parked guarded rules waiting for this character.
                    let sym = self.a.one(o).sym;
                    let mut s = Some(self.a.one(o).src);
                    while let Some(q) = s {
                        if let Some(list) = self.parked.remove(&(q, sym)) {
                            for (lt, j) in list {
                                queue.push(Deferred::Add(lt, j));
                            }
                        }
                        s = self.a.parent(q);
                    }
                }
            }
            self.log(|| format!("add {:?} ({} new short forms)", t, created.len()));
        }
        self.budget.check(self.a.num_short())
    }

    fn update_rules(&mut self, u: ShortId) -> Result<(), SaturationError> {
        let n = self.model.order;
        let model = self.model;
        match u {
            ShortId::High(h) => {
                let ht = self.a.high(h).clone();
                let k = self.a.state_order(ht.src);
                let Some((p2, prefix)) = self.a.control_path(ht.src) else {
                    return Ok(());
                };
                let m = ht.mid;
                // Target sets Q_k, ..., Q_n of this transition.
                let mut upper = vec![StateSet::new(); n];
                upper[k - 1] = ht.tgt.clone();
                for (j, set) in prefix.iter().enumerate() {
                    upper[n - 1 - j] = set.clone();
                }
                for id in model.rule_ids() {
                    let RuleKind::Step { from, sym, op, guard, to } = &model.rule(id).kind else {
                        continue;
                    };
                    if *to != p2 {
                        continue;
                    }
                    let q = self.a.control_state(*from);
                    match op {
                        Op::Pop(j) if *j == k - 1 => {
                            let mut targets = upper.clone();
                            targets[k - 2] = StateSet::singleton(m);
                            let t = LongTrans {
                                src: q,
                                sym: *sym,
                                br: StateSet::new(),
                                targets,
                            };
                            self.guarded_add(m, guard, t, id)?;
                        }
                        Op::Collapse(j) if *j == k - 1 => {
                            let t = LongTrans {
                                src: q,
                                sym: *sym,
                                br: StateSet::singleton(m),
                                targets: upper.clone(),
                            };
                            self.guarded_add(m, guard, t, id)?;
                        }
                        Op::Push(j) if *j == k => {
                            let src = self.a.minted_path(*from, &prefix);
                            self.create_trip(
                                k,
                                src,
                                Some(m),
                                *sym,
                                ht.tgt.clone(),
                                StateSet::new(),
                                SrcJus::Push {
                                    rule: id,
                                    mid: m,
                                    shared: false,
                                },
                            )?;
                        }
                        _ => {}
                    }
                }
            }
            ShortId::One(o) => {
                let lt = self.a.long_of(o);
                let Some((p2, _)) = self.a.control_path(self.a.one(o).src) else {
                    return Ok(());
                };
                for id in model.rule_ids() {
                    let RuleKind::Step { from, sym, op, to, .. } = &model.rule(id).kind else {
                        continue;
                    };
                    if *to != p2 {
                        continue;
                    }
                    match op {
                        Op::Rew(b) if *b == lt.sym => {
                            let t = LongTrans {
                                src: self.a.control_state(*from),
                                sym: *sym,
                                br: lt.br.clone(),
                                targets: lt.targets.clone(),
                            };
                            self.add_worklist(t, Justification::Rew { rule: id, trans: o, step: 0 })?;
                        }
                        Op::PushChar(b, k) if *b == lt.sym => {
                            if !branch_fits(&self.a, &lt.br, *k) {
                                continue;
                            }
                            // Path sets [Q_n, ..., Q_2] with Q_br merged into Q_k.
                            let mut path: Vec<StateSet> = Vec::with_capacity(n - 1);
                            for j in (2..=n).rev() {
                                let mut s = lt.targets[j - 1].clone();
                                if j == *k {
                                    s = s.union(&lt.br);
                                }
                                path.push(s);
                            }
                            let extra = if *k == 1 { lt.br.clone() } else { StateSet::new() };
                            let src = self.a.minted_path(*from, &path);
                            self.create_trip(
                                1,
                                src,
                                None,
                                *sym,
                                lt.targets[0].clone(),
                                extra,
                                SrcJus::PushChar { rule: id, head: o },
                            )?;
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    fn update_trip(&mut self, u: ShortId) -> Result<(), SaturationError> {
        let (order, src, sym) = match u {
            ShortId::High(h) => {
                let s = self.a.high(h).src;
                (self.a.state_order(s), s, None)
            }
            ShortId::One(o) => {
                let t = self.a.one(o);
                (1, t.src, Some(t.sym))
            }
        };
        let waiting = self.awaiting.get(&(order, src, sym)).cloned().unwrap_or_default();
        for idx in waiting {
            self.proc_targ(idx, u)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn create_trip(
        &mut self,
        order: usize,
        state: StateId,
        below: Option<StateId>,
        sym: Symbol,
        set: StateSet,
        extra: StateSet,
        jus: SrcJus,
    ) -> Result<(), SaturationError> {
        let key = SrcKey {
            order,
            state,
            below,
            sym,
            set: set.clone(),
            extra,
        };
        if self.source_index.contains_key(&key) {
            return Ok(());
        }
        let sidx = self.sources.len();
        self.source_index.insert(key.clone(), sidx);
        self.sources.push((key, jus));
        let tsym = if order == 1 { Some(sym) } else { None };
        self.sources_by_set.entry((order, set.clone(), tsym)).or_default().push(sidx);
        self.log(|| format!("source order {order} at {state} over {set:?}"));
        let fresh = Target {
            order,
            set: set.clone(),
            countdown: set.clone(),
            sym: tsym,
            lbl: StateSet::new(),
            tgt: StateSet::new(),
        };
        if self.target_index.contains_key(&fresh) {
            let done = self.complete.get(&(order, set, tsym)).cloned().unwrap_or_default();
            for tidx in done {
                self.proc_src_comp_targ(sidx, tidx)?;
            }
            Ok(())
        } else {
            self.add_target(fresh, Vec::new())
        }
    }

    fn add_target(&mut self, t: Target, just: Vec<TransId>) -> Result<(), SaturationError> {
        let Some(idx) = self.insert_target(t, just) else {
            return Ok(());
        };
        self.after_new_target(idx)?;
        // Replay processed transitions leaving a state of the countdown.
        let t = self.targets[idx].clone();
        for q in t.countdown.iter() {
            let replay: Vec<ShortId> = if t.order == 1 {
                let a = t.sym.expect("order-1 targets carry a character");
                self.rel_one_by_src_sym
                    .get(&(q, a))
                    .map(|v| v.iter().map(|&o| ShortId::One(o)).collect())
                    .unwrap_or_default()
            } else {
                self.rel_high_by_src
                    .get(&q)
                    .map(|v| v.iter().map(|&h| ShortId::High(h)).collect())
                    .unwrap_or_default()
            };
            for u in replay {
                self.proc_targ(idx, u)?;
            }
        }
        Ok(())
    }

    /// Fires the sources waiting on a target that is complete on arrival.
    fn after_new_target(&mut self, idx: usize) -> Result<(), SaturationError> {
        let t = &self.targets[idx];
        if !t.countdown.is_empty() {
            return Ok(());
        }
        let srcs = self
            .sources_by_set
            .get(&(t.order, t.set.clone(), t.sym))
            .cloned()
            .unwrap_or_default();
        for s in srcs {
            self.proc_src_comp_targ(s, idx)?;
        }
        Ok(())
    }

    fn proc_targ(&mut self, idx: usize, u: ShortId) -> Result<(), SaturationError> {
        let t = self.targets[idx].clone();
        let (q, lbl_add, tgt_add, one) = match u {
            ShortId::High(h) => {
                let ht = self.a.high(h);
                (ht.src, StateSet::singleton(ht.mid), ht.tgt.clone(), None)
            }
            ShortId::One(o) => {
                let tr = self.a.one(o);
                if Some(tr.sym) != t.sym {
                    return Ok(());
                }
                (tr.src, tr.br.clone(), tr.tgt.clone(), Some(o))
            }
        };
        if !t.countdown.contains(q) {
            return Ok(());
        }
        let lbl = t.lbl.union(&lbl_add);
        if t.order == 1 && !lbl.is_empty() && self.a.set_order(&lbl).is_none() {
            return Ok(());
        }
        let next = Target {
            order: t.order,
            set: t.set.clone(),
            countdown: t.countdown.without(q),
            sym: t.sym,
            lbl,
            tgt: t.tgt.union(&tgt_add),
        };
        let mut just = self.target_just[idx].clone();
        if let Some(o) = one {
            just.push(o);
        }
        self.add_target(next, just)
    }

    fn proc_src_comp_targ(&mut self, sidx: usize, tidx: usize) -> Result<(), SaturationError> {
        let (key, jus) = self.sources[sidx].clone();
        let targ = self.targets[tidx].clone();
        if key.order >= 2 {
            let state = self.a.minted(key.state, targ.tgt.clone());
            let mut set = targ.lbl.clone();
            let mut jus = jus;
            if let Some(b) = key.below {
                if let SrcJus::Push { shared, .. } = &mut jus {
                    *shared = set.contains(b);
                }
                set.insert(b);
            }
            return self.create_trip(key.order - 1, state, None, key.sym, set, key.extra, jus);
        }
        let Some((p, path)) = self.a.control_path(key.state) else {
            return Ok(());
        };
        let n = self.model.order;
        let mut targets = vec![StateSet::new(); n];
        targets[0] = targ.tgt.union(&key.extra);
        for (j, set) in path.iter().enumerate() {
            targets[n - 1 - j] = set.clone();
        }
        let t = LongTrans {
            src: self.a.control_state(p),
            sym: key.sym,
            br: targ.lbl.clone(),
            targets,
        };
        let set = self.target_just[tidx].clone();
        let jus = match jus {
            SrcJus::Alt(rule) => Justification::Alt { rule, set, step: 0 },
            SrcJus::PushChar { rule, head } => Justification::Push { rule, head, set, step: 0 },
            SrcJus::Push { rule, mid, shared } => {
                let k = self.a.state_order(mid);
                let head = set
                    .iter()
                    .copied()
                    .find(|&o| self.a.ancestor(self.a.one(o).src, k) == Some(mid))
                    .expect("the head state is part of the completed target");
                let set = if shared {
                    set
                } else {
                    set.into_iter().filter(|&o| o != head).collect()
                };
                Justification::Push { rule, head, set, step: 0 }
            }
        };
        self.add_worklist(t, jus)
    }
}

fn restamp(j: Justification, stamp: u64) -> Justification {
    match j {
        Justification::Initial => Justification::Initial,
        Justification::Rule { rule, .. } => Justification::Rule { rule, step: stamp },
        Justification::Rew { rule, trans, .. } => Justification::Rew { rule, trans, step: stamp },
        Justification::Alt { rule, set, .. } => Justification::Alt { rule, set, step: stamp },
        Justification::Push { rule, head, set, .. } => Justification::Push {
            rule,
            head,
            set,
            step: stamp,
        },
    }
}
