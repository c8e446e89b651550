//! Alternating stack automata over collapsible stacks.
//!
//! States are interned by their construction key: `q_p` for each control
//! state, user-named states, and minted intermediate states keyed by the
//! higher-order transition they are the middle of. Higher-order transitions
//! `q --q'--> Q` are unique per `(q, Q)`, so the minted state `q'` determines
//! the transition and every order-1 transition determines its long form by
//! walking up the parent chain of its source.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::model::{Alphabet, ControlId, Cpds, RuleId};
use crate::stack::{Link, Stack, Symbol};

/// Interned automaton state.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A sorted, duplicate-free set of states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateSet(Vec<StateId>);

impl StateSet {
    pub fn new() -> Self {
        StateSet(Vec::new())
    }

    pub fn singleton(q: StateId) -> Self {
        StateSet(vec![q])
    }

    pub fn from_iter_states<I: IntoIterator<Item = StateId>>(it: I) -> Self {
        let mut v: Vec<StateId> = it.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        StateSet(v)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, q: StateId) -> bool {
        self.0.binary_search(&q).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = StateId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[StateId] {
        &self.0
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            return other.clone();
        }
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => {
                    v.push(self.0[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    v.push(other.0[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    v.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        v.extend_from_slice(&self.0[i..]);
        v.extend_from_slice(&other.0[j..]);
        StateSet(v)
    }

    pub fn with(&self, q: StateId) -> StateSet {
        self.union(&StateSet::singleton(q))
    }

    pub fn without(&self, q: StateId) -> StateSet {
        StateSet(self.0.iter().copied().filter(|&x| x != q).collect())
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        let mut j = 0;
        for &x in &self.0 {
            while j < other.0.len() && other.0[j] < x {
                j += 1;
            }
            if j == other.0.len() || other.0[j] != x {
                return false;
            }
        }
        true
    }

    pub fn insert(&mut self, q: StateId) -> bool {
        match self.0.binary_search(&q) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, q);
                true
            }
        }
    }
}

impl FromIterator<StateId> for StateSet {
    fn from_iter<I: IntoIterator<Item = StateId>>(it: I) -> Self {
        StateSet::from_iter_states(it)
    }
}

/// How a state came to exist.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StateKey {
    /// `q_p`, the order-`n` initial state of control `p`.
    Control(ControlId),
    /// A state given by name in an automaton description.
    Named(String, usize),
    /// The middle state of the higher-order transition `parent --> targets`.
    Minted { parent: StateId, targets: StateSet },
}

#[derive(Clone, Debug)]
struct StateInfo {
    key: StateKey,
    order: usize,
}

/// Identifier of an order-1 transition.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransId(pub u32);

impl TransId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a higher-order (order >= 2) transition.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HTransId(pub u32);

/// A short-form transition of either kind.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShortId {
    High(HTransId),
    One(TransId),
}

/// A higher-order short-form transition `src --mid--> tgt`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HTrans {
    pub src: StateId,
    pub mid: StateId,
    pub tgt: StateSet,
}

/// An order-1 transition `src --sym, br--> tgt`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trans1 {
    pub src: StateId,
    pub sym: Symbol,
    pub br: StateSet,
    pub tgt: StateSet,
}

/// Provenance of an order-1 transition (and thus of its long form).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Justification {
    /// Present in the initial automaton.
    Initial,
    /// Added by a pop or collapse rule.
    Rule { rule: RuleId, step: u64 },
    /// Added by a rewrite rule from `trans`.
    Rew { rule: RuleId, trans: TransId, step: u64 },
    /// Added by an alternating rule from the lifted transition `set`.
    Alt { rule: RuleId, set: Vec<TransId>, step: u64 },
    /// Added by a push rule from `head` combined with the lifted `set`.
    Push {
        rule: RuleId,
        head: TransId,
        set: Vec<TransId>,
        step: u64,
    },
}

impl Justification {
    /// Iteration number (naive engine) or timestamp (worklist engine).
    pub fn step(&self) -> u64 {
        match self {
            Justification::Initial => 0,
            Justification::Rule { step, .. }
            | Justification::Rew { step, .. }
            | Justification::Alt { step, .. }
            | Justification::Push { step, .. } => *step,
        }
    }

    pub fn rule(&self) -> Option<RuleId> {
        match self {
            Justification::Initial => None,
            Justification::Rule { rule, .. }
            | Justification::Rew { rule, .. }
            | Justification::Alt { rule, .. }
            | Justification::Push { rule, .. } => Some(*rule),
        }
    }
}

/// A long-form transition `src --sym, br--> (Q_1, ..., Q_k)` where `k` is the
/// order of `src`; `targets[i]` holds `Q_{i+1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LongTrans {
    pub src: StateId,
    pub sym: Symbol,
    pub br: StateSet,
    pub targets: Vec<StateSet>,
}

/// A transition lifted to a set of source states: the union of one chosen
/// long form per source state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lifted {
    pub br: StateSet,
    pub targets: Vec<StateSet>,
    /// The chosen order-1 transitions, one per source state.
    pub members: Vec<TransId>,
}

/// Bounds restricting queries to transitions that existed at some earlier
/// point (transition ids are allocated increasingly).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub high: usize,
    pub one: usize,
}

impl Snapshot {
    pub const ALL: Snapshot = Snapshot {
        high: usize::MAX,
        one: usize::MAX,
    };
}

/// Errors raised by automaton construction and checks.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("branch set mixes states of different orders")]
    MixedBranchOrders,
    #[error("target set for order {expected} contains a state of order {found}")]
    TargetOrder { expected: usize, found: usize },
    #[error("long-form transition from an order-{order} state needs {order} target sets, got {got}")]
    TargetCount { order: usize, got: usize },
    #[error("initial state {0} must not be final")]
    InitialFinal(String),
    #[error("initial state {0} must not have incoming transitions")]
    InitialIncoming(String),
    #[error("final state {name} has order {order}, outside 1..={max}")]
    FinalOrder { name: String, order: usize, max: usize },
}

/// An order-`n` alternating stack automaton.
#[derive(Clone, Debug)]
pub struct StackAutomaton {
    order: usize,
    states: Vec<StateInfo>,
    keys: HashMap<StateKey, StateId>,
    controls: Vec<StateId>,
    finals: HashSet<StateId>,
    high: Vec<HTrans>,
    high_index: HashMap<(StateId, StateSet), HTransId>,
    high_by_src: HashMap<StateId, Vec<HTransId>>,
    one: Vec<Trans1>,
    one_index: HashMap<Trans1, TransId>,
    one_by_src_sym: HashMap<(StateId, Symbol), Vec<TransId>>,
    one_by_src: HashMap<StateId, Vec<TransId>>,
    one_by_sym: HashMap<Symbol, Vec<TransId>>,
    just: Vec<Justification>,
    reads: HashSet<(StateId, Symbol)>,
}

impl StackAutomaton {
    /// An automaton with one `q_p` state per control and no transitions.
    pub fn new(order: usize, num_controls: usize) -> Self {
        let mut a = StackAutomaton {
            order,
            states: Vec::new(),
            keys: HashMap::new(),
            controls: Vec::new(),
            finals: HashSet::new(),
            high: Vec::new(),
            high_index: HashMap::new(),
            high_by_src: HashMap::new(),
            one: Vec::new(),
            one_index: HashMap::new(),
            one_by_src_sym: HashMap::new(),
            one_by_src: HashMap::new(),
            one_by_sym: HashMap::new(),
            just: Vec::new(),
            reads: HashSet::new(),
        };
        for p in 0..num_controls {
            let id = a.intern(StateKey::Control(ControlId(p as u32)), order);
            a.controls.push(id);
        }
        a
    }

    /// The automaton accepting every configuration whose control is in
    /// `targets` and whose stack has a top character: `q_p --a, {}--> ({}, ..., {})`
    /// for every target `p` and character `a`.
    pub fn control_targets(model: &Cpds, targets: &[ControlId]) -> Self {
        let mut a = StackAutomaton::for_model(model);
        for &p in targets {
            for sym in model.alphabet.symbols() {
                let t = LongTrans {
                    src: a.control_state(p),
                    sym,
                    br: StateSet::new(),
                    targets: vec![StateSet::new(); model.order],
                };
                a.add_long(&t, Justification::Initial)
                    .expect("empty targets are always well-formed");
            }
        }
        a
    }

    /// An automaton sized for `model`.
    pub fn for_model(model: &Cpds) -> Self {
        StackAutomaton::new(model.order, model.num_controls())
    }

    fn intern(&mut self, key: StateKey, order: usize) -> StateId {
        if let Some(&id) = self.keys.get(&key) {
            return id;
        }
        let id = StateId(self.states.len() as u32);
        self.states.push(StateInfo { key: key.clone(), order });
        self.keys.insert(key, id);
        id
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `q_p`.
    pub fn control_state(&self, p: ControlId) -> StateId {
        self.controls[p.index()]
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    /// The control whose `q_p` is `q`, if any.
    pub fn control_of(&self, q: StateId) -> Option<ControlId> {
        match self.states[q.index()].key {
            StateKey::Control(p) => Some(p),
            _ => None,
        }
    }

    /// Returns (creating if needed) the named state of the given order.
    pub fn named_state(&mut self, name: &str, order: usize) -> StateId {
        self.intern(StateKey::Named(name.to_string(), order), order)
    }

    pub fn lookup_named(&self, name: &str) -> Option<StateId> {
        (1..=self.order).find_map(|k| self.keys.get(&StateKey::Named(name.to_string(), k)).copied())
    }

    /// Returns (creating if needed) the minted state under `parent` for `targets`.
    pub fn minted(&mut self, parent: StateId, targets: StateSet) -> StateId {
        let order = self.state_order(parent) - 1;
        self.intern(StateKey::Minted { parent, targets }, order)
    }

    /// Mints the chain `q_p`, `q_{p,S_0}`, `q_{p,S_0,S_1}`, ... and returns its end.
    pub fn minted_path(&mut self, p: ControlId, sets: &[StateSet]) -> StateId {
        let mut cur = self.control_state(p);
        for s in sets {
            cur = self.minted(cur, s.clone());
        }
        cur
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_order(&self, q: StateId) -> usize {
        self.states[q.index()].order
    }

    pub fn state_key(&self, q: StateId) -> &StateKey {
        &self.states[q.index()].key
    }

    /// Parent of a minted state.
    pub fn parent(&self, q: StateId) -> Option<StateId> {
        match &self.states[q.index()].key {
            StateKey::Minted { parent, .. } => Some(*parent),
            _ => None,
        }
    }

    /// Whether `q` is initial: a control state or a minted middle state.
    pub fn is_initial(&self, q: StateId) -> bool {
        !matches!(self.states[q.index()].key, StateKey::Named(..))
    }

    pub fn set_final(&mut self, q: StateId) {
        self.finals.insert(q);
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn finals(&self) -> impl Iterator<Item = StateId> + '_ {
        let mut v: Vec<StateId> = self.finals.iter().copied().collect();
        v.sort_unstable();
        v.into_iter()
    }

    fn finals_of_order(&self, k: usize) -> StateSet {
        self.finals
            .iter()
            .copied()
            .filter(|&q| self.state_order(q) == k)
            .collect()
    }

    /// Order of the states in `s`, or `None` when empty or mixed.
    pub fn set_order(&self, s: &StateSet) -> Option<usize> {
        let mut it = s.iter().map(|q| self.state_order(q));
        let first = it.next()?;
        if it.all(|o| o == first) {
            Some(first)
        } else {
            None
        }
    }

    fn homogeneous(&self, s: &StateSet) -> bool {
        s.is_empty() || self.set_order(s).is_some()
    }

    pub fn high(&self, id: HTransId) -> &HTrans {
        &self.high[id.0 as usize]
    }

    pub fn one(&self, id: TransId) -> &Trans1 {
        &self.one[id.index()]
    }

    pub fn num_high(&self) -> usize {
        self.high.len()
    }

    pub fn num_one(&self) -> usize {
        self.one.len()
    }

    /// Total number of short-form transitions.
    pub fn num_short(&self) -> usize {
        self.high.len() + self.one.len()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            high: self.high.len(),
            one: self.one.len(),
        }
    }

    pub fn justification(&self, t: TransId) -> &Justification {
        &self.just[t.index()]
    }

    pub(crate) fn justification_mut(&mut self, t: TransId) -> &mut Justification {
        &mut self.just[t.index()]
    }

    pub fn one_ids(&self) -> impl Iterator<Item = TransId> {
        (0..self.one.len() as u32).map(TransId)
    }

    pub fn high_ids(&self) -> impl Iterator<Item = HTransId> {
        (0..self.high.len() as u32).map(HTransId)
    }

    /// Higher-order transitions leaving `q`.
    pub fn high_from(&self, q: StateId) -> &[HTransId] {
        self.high_by_src.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Order-1 transitions leaving `q` and reading `a`.
    pub fn one_from(&self, q: StateId, a: Symbol) -> &[TransId] {
        self.one_by_src_sym.get(&(q, a)).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All order-1 transitions leaving `q`.
    pub fn one_from_any(&self, q: StateId) -> &[TransId] {
        self.one_by_src.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Order-1 transitions reading `a`.
    pub fn one_reading(&self, a: Symbol) -> &[TransId] {
        self.one_by_sym.get(&a).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The higher-order transition `q --> Q`, if present.
    pub fn high_between(&self, q: StateId, targets: &StateSet) -> Option<HTransId> {
        self.high_index.get(&(q, targets.clone())).copied()
    }

    /// Whether some long form from `q` reads `a` (maintained incrementally).
    pub fn reads(&self, q: StateId, a: Symbol) -> bool {
        self.reads.contains(&(q, a))
    }

    fn check_long(&self, t: &LongTrans) -> Result<(), AutomatonError> {
        let k = self.state_order(t.src);
        if t.targets.len() != k {
            return Err(AutomatonError::TargetCount {
                order: k,
                got: t.targets.len(),
            });
        }
        if !self.homogeneous(&t.br) {
            return Err(AutomatonError::MixedBranchOrders);
        }
        for (i, set) in t.targets.iter().enumerate() {
            for q in set.iter() {
                let o = self.state_order(q);
                if o != i + 1 {
                    return Err(AutomatonError::TargetOrder {
                        expected: i + 1,
                        found: o,
                    });
                }
            }
        }
        Ok(())
    }

    /// Adds a long-form transition, minting intermediate states as needed.
    /// Returns the short-form transitions that were new. The justification is
    /// recorded only if the order-1 transition is new.
    pub fn add_long(&mut self, t: &LongTrans, j: Justification) -> Result<Vec<ShortId>, AutomatonError> {
        self.check_long(t)?;
        let mut created = Vec::new();
        let mut cur = t.src;
        for k in (2..=self.state_order(t.src)).rev() {
            let tgt = &t.targets[k - 1];
            if let Some(&h) = self.high_index.get(&(cur, tgt.clone())) {
                cur = self.high[h.0 as usize].mid;
                continue;
            }
            let mid = self.minted(cur, tgt.clone());
            let h = HTransId(self.high.len() as u32);
            self.high.push(HTrans {
                src: cur,
                mid,
                tgt: tgt.clone(),
            });
            self.high_index.insert((cur, tgt.clone()), h);
            self.high_by_src.entry(cur).or_default().push(h);
            created.push(ShortId::High(h));
            cur = mid;
        }
        let t1 = Trans1 {
            src: cur,
            sym: t.sym,
            br: t.br.clone(),
            tgt: t.targets[0].clone(),
        };
        if !self.one_index.contains_key(&t1) {
            let id = TransId(self.one.len() as u32);
            self.one_index.insert(t1.clone(), id);
            self.one_by_src_sym.entry((cur, t.sym)).or_default().push(id);
            self.one_by_src.entry(cur).or_default().push(id);
            self.one_by_sym.entry(t.sym).or_default().push(id);
            self.one.push(t1);
            self.just.push(j);
            let mut q = Some(cur);
            while let Some(s) = q {
                if !self.reads.insert((s, t.sym)) {
                    break;
                }
                q = self.parent(s);
            }
            created.push(ShortId::One(id));
        }
        Ok(created)
    }

    /// The short-form transitions making up `t`, if all are present.
    pub fn extract_short(&self, t: &LongTrans) -> Option<Vec<ShortId>> {
        let mut out = Vec::new();
        let mut cur = t.src;
        for k in (2..=self.state_order(t.src)).rev() {
            let h = *self.high_index.get(&(cur, t.targets.get(k - 1)?.clone()))?;
            out.push(ShortId::High(h));
            cur = self.high[h.0 as usize].mid;
        }
        let t1 = Trans1 {
            src: cur,
            sym: t.sym,
            br: t.br.clone(),
            tgt: t.targets.first()?.clone(),
        };
        out.push(ShortId::One(*self.one_index.get(&t1)?));
        Some(out)
    }

    pub fn contains_long(&self, t: &LongTrans) -> bool {
        self.extract_short(t).is_some()
    }

    /// The long form rooted at the top of `t`'s parent chain.
    pub fn long_of(&self, t: TransId) -> LongTrans {
        let tr = &self.one[t.index()];
        let mut targets = vec![tr.tgt.clone()];
        let mut cur = tr.src;
        while let StateKey::Minted { parent, targets: q } = &self.states[cur.index()].key {
            targets.push(q.clone());
            cur = *parent;
        }
        LongTrans {
            src: cur,
            sym: tr.sym,
            br: tr.br.clone(),
            targets,
        }
    }

    /// The ancestor of `q` at order `k` (following minted parents).
    pub fn ancestor(&self, q: StateId, k: usize) -> Option<StateId> {
        let mut cur = q;
        loop {
            let o = self.state_order(cur);
            if o == k {
                return Some(cur);
            }
            if o > k {
                return None;
            }
            cur = self.parent(cur)?;
        }
    }

    /// For a state of the form `q_{p, Q_n, ..., Q_{k+1}}` returns `p` and the
    /// sets `[Q_n, ..., Q_{k+1}]`.
    pub fn control_path(&self, q: StateId) -> Option<(ControlId, Vec<StateSet>)> {
        let mut sets = Vec::new();
        let mut cur = q;
        loop {
            match &self.states[cur.index()].key {
                StateKey::Control(p) => {
                    sets.reverse();
                    return Some((*p, sets));
                }
                StateKey::Named(..) => return None,
                StateKey::Minted { parent, targets } => {
                    sets.push(targets.clone());
                    cur = *parent;
                }
            }
        }
    }

    /// Order-1 transitions (below `snap`) whose long form from `q` reads `a`.
    pub fn long_from(&self, q: StateId, a: Symbol, snap: Snapshot) -> Vec<TransId> {
        let mut out = Vec::new();
        self.collect_long_from(q, a, snap, &mut out);
        out
    }

    fn collect_long_from(&self, q: StateId, a: Symbol, snap: Snapshot, out: &mut Vec<TransId>) {
        if self.state_order(q) == 1 {
            out.extend(self.one_from(q, a).iter().copied().filter(|t| t.index() < snap.one));
            return;
        }
        for &h in self.high_from(q) {
            if (h.0 as usize) < snap.high {
                self.collect_long_from(self.high[h.0 as usize].mid, a, snap, out);
            }
        }
    }

    /// Whether some long form from `q` (below `snap`) reads `a`.
    pub fn has_long_from(&self, q: StateId, a: Symbol, snap: Snapshot) -> bool {
        if snap == Snapshot::ALL {
            return self.reads(q, a);
        }
        if self.state_order(q) == 1 {
            return self.one_from(q, a).iter().any(|t| t.index() < snap.one);
        }
        self.high_from(q)
            .iter()
            .filter(|h| (h.0 as usize) < snap.high)
            .any(|&h| self.has_long_from(self.high[h.0 as usize].mid, a, snap))
    }

    /// Targets of `t`'s long form restricted to orders `1..=k`.
    fn targets_upto(&self, t: TransId, k: usize) -> Vec<StateSet> {
        let lt = self.long_of(t);
        lt.targets.into_iter().take(k).collect()
    }

    /// All lifted transitions `S --a, br--> (Q_1, ..., Q_k)` from the order-`k`
    /// set `S`, choosing one long form per state (below `snap`). Choices whose
    /// branch sets mix orders are rejected. Results are deduplicated on
    /// `(br, targets)`, keeping the first choice found.
    pub fn lifted(&self, set: &StateSet, k: usize, a: Symbol, snap: Snapshot) -> Vec<Lifted> {
        self.lifted_filtered(set, k, a, snap, &|_, _| true)
    }

    /// Like [`StackAutomaton::lifted`], but a state `q` may only choose the
    /// transitions `t` with `allow(q, t)`.
    pub fn lifted_filtered(
        &self,
        set: &StateSet,
        k: usize,
        a: Symbol,
        snap: Snapshot,
        allow: &dyn Fn(StateId, TransId) -> bool,
    ) -> Vec<Lifted> {
        let mut partial = vec![Lifted {
            br: StateSet::new(),
            targets: vec![StateSet::new(); k],
            members: Vec::new(),
        }];
        for q in set.iter() {
            let options: Vec<(TransId, StateSet, Vec<StateSet>)> = self
                .long_from(q, a, snap)
                .into_iter()
                .filter(|&t| allow(q, t))
                .map(|t| (t, self.one[t.index()].br.clone(), self.targets_upto(t, k)))
                .collect();
            if options.is_empty() {
                return Vec::new();
            }
            let mut next = Vec::new();
            let mut seen = HashSet::new();
            for p in &partial {
                for (t, br, tg) in &options {
                    let nbr = p.br.union(br);
                    if !self.homogeneous(&nbr) {
                        continue;
                    }
                    let ntg: Vec<StateSet> = p.targets.iter().zip(tg).map(|(x, y)| x.union(y)).collect();
                    if !seen.insert((nbr.clone(), ntg.clone())) {
                        continue;
                    }
                    let mut members = p.members.clone();
                    members.push(*t);
                    next.push(Lifted {
                        br: nbr,
                        targets: ntg,
                        members,
                    });
                }
            }
            partial = next;
        }
        partial
    }

    /// Checks the initial-state conventions: initial states (control states
    /// and minted middle states) are not final and have no incoming
    /// transitions; final states have a valid order.
    pub fn check_conventions(&self, names: &dyn Fn(StateId) -> String) -> Result<(), AutomatonError> {
        for &q in &self.finals {
            let o = self.state_order(q);
            if o == 0 || o > self.order {
                return Err(AutomatonError::FinalOrder {
                    name: names(q),
                    order: o,
                    max: self.order,
                });
            }
            if self.is_initial(q) {
                return Err(AutomatonError::InitialFinal(names(q)));
            }
        }
        let incoming = self
            .high
            .iter()
            .flat_map(|h| h.tgt.iter())
            .chain(self.one.iter().flat_map(|t| t.tgt.iter().chain(t.br.iter())));
        for q in incoming {
            if self.is_initial(q) {
                return Err(AutomatonError::InitialIncoming(names(q)));
            }
        }
        Ok(())
    }

    /// Whether the automaton is syntactically non-alternating: no order-`n`
    /// target set or order-`n` branch set has more than one state.
    pub fn is_syntactically_non_alternating(&self) -> bool {
        let n = self.order;
        let high_ok = self
            .high
            .iter()
            .all(|h| self.state_order(h.src) != n || h.tgt.len() <= 1);
        let one_ok = self.one.iter().all(|t| {
            let top_ok = n != 1 || self.state_order(t.src) != 1 || t.tgt.len() <= 1;
            let br_ok = self.set_order(&t.br) != Some(n) || t.br.len() <= 1;
            top_ok && br_ok
        });
        high_ok && one_ok
    }

    // ----------------------------------------------------------------------
    // Membership
    // ----------------------------------------------------------------------

    /// Bottom-up labelling of a stack of order `k`: for every suffix of every
    /// sequence in the stack, the set of states accepting it.
    pub fn label_tree<A>(&self, w: &Stack<A>) -> LabelTree {
        let mut ctx: Vec<Vec<StateSet>> = vec![Vec::new(); self.order + 2];
        self.label_chain(w, &mut ctx)
    }

    fn label_chain<A>(&self, w: &Stack<A>, ctx: &mut Vec<Vec<StateSet>>) -> LabelTree {
        let k = w.order();
        let elems: Vec<&Stack<A>> = w.children().collect();
        let len = elems.len();
        let mut labels = Vec::with_capacity(len + 1);
        labels.push(self.finals_of_order(k));
        let mut kids = Vec::new();
        for s in 1..=len {
            let child = elems[len - s];
            let below = &labels[s - 1];
            if k >= 2 {
                // Expose the suffixes computed so far to links inside the child.
                let saved = std::mem::take(&mut ctx[k]);
                ctx[k] = labels;
                let sub = self.label_chain(child, ctx);
                labels = std::mem::replace(&mut ctx[k], saved);
                let below = &labels[s - 1];
                let top = sub.top();
                let mut acc = StateSet::new();
                for m in top.iter() {
                    if let StateKey::Minted { parent, targets } = &self.states[m.index()].key {
                        if targets.is_subset(below) && self.high_between(*parent, targets).is_some() {
                            acc.insert(*parent);
                        }
                    }
                }
                labels.push(acc);
                kids.push(sub);
            } else {
                let (sym, link, _) = child.as_char().expect("order-1 stacks contain characters");
                let link_label = link_target(&labels, ctx, link);
                let mut acc = StateSet::new();
                for &t in self.one_reading(sym) {
                    let tr = &self.one[t.index()];
                    if acc.contains(tr.src) || !tr.tgt.is_subset(below) {
                        continue;
                    }
                    if branch_ok(self, &tr.br, link, link_label) {
                        acc.insert(tr.src);
                    }
                }
                labels.push(acc);
            }
        }
        LabelTree { labels, kids }
    }

    /// Whether the stack `w` is accepted from every state of `states`.
    pub fn accepts_from<A>(&self, w: &Stack<A>, states: &StateSet) -> bool {
        if states.is_empty() {
            return true;
        }
        states.is_subset(self.label_tree(w).top())
    }

    /// Whether `<p, w>` is accepted, i.e. `w` is accepted from `q_p`.
    pub fn accepts_config<A>(&self, p: ControlId, w: &Stack<A>) -> bool {
        self.accepts_from(w, &StateSet::singleton(self.control_state(p)))
    }

    // ----------------------------------------------------------------------
    // Emptiness
    // ----------------------------------------------------------------------

    /// States from which some stack is accepted (least fixpoint starting from
    /// all final states).
    pub fn nonempty_states(&self) -> HashSet<StateId> {
        let mut live: HashSet<StateId> = self.finals.clone();
        loop {
            let mut changed = false;
            for h in &self.high {
                if !live.contains(&h.src) && live.contains(&h.mid) && h.tgt.iter().all(|q| live.contains(&q)) {
                    live.insert(h.src);
                    changed = true;
                }
            }
            for t in &self.one {
                if !live.contains(&t.src)
                    && t.tgt.iter().all(|q| live.contains(&q))
                    && t.br.iter().all(|q| live.contains(&q))
                {
                    live.insert(t.src);
                    changed = true;
                }
            }
            if !changed {
                return live;
            }
        }
    }

    /// Whether some stack is accepted from `q`.
    pub fn is_nonempty(&self, q: StateId) -> bool {
        self.nonempty_states().contains(&q)
    }

    // ----------------------------------------------------------------------
    // Canonical forms and display
    // ----------------------------------------------------------------------

    /// Engine-independent description of every long-form transition.
    pub fn canonical_transitions(&self) -> BTreeSet<CanonTrans> {
        let mut memo: HashMap<StateId, CanonState> = HashMap::new();
        let mut out = BTreeSet::new();
        for t in self.one_ids() {
            let lt = self.long_of(t);
            out.insert(CanonTrans {
                src: self.canon(lt.src, &mut memo),
                sym: lt.sym,
                br: self.canon_set(&lt.br, &mut memo),
                targets: lt.targets.iter().map(|s| self.canon_set(s, &mut memo)).collect(),
            });
        }
        out
    }

    fn canon_set(&self, s: &StateSet, memo: &mut HashMap<StateId, CanonState>) -> Vec<CanonState> {
        let mut v: Vec<CanonState> = s.iter().map(|q| self.canon(q, memo)).collect();
        v.sort();
        v
    }

    /// Engine-independent description of a state.
    pub fn canon(&self, q: StateId, memo: &mut HashMap<StateId, CanonState>) -> CanonState {
        if let Some(c) = memo.get(&q) {
            return c.clone();
        }
        let c = match &self.states[q.index()].key {
            StateKey::Control(p) => CanonState::Control(p.0),
            StateKey::Named(n, o) => CanonState::Named(n.clone(), *o),
            StateKey::Minted { parent, targets } => {
                let p = self.canon(*parent, memo);
                let t = self.canon_set(targets, memo);
                CanonState::Minted(Box::new(p), t)
            }
        };
        memo.insert(q, c.clone());
        c
    }

    /// Human-readable state name; `q_p` states use the control name.
    pub fn state_name(&self, q: StateId, controls: &[String]) -> String {
        match &self.states[q.index()].key {
            StateKey::Control(p) => controls
                .get(p.index())
                .cloned()
                .unwrap_or_else(|| format!("p{}", p.0)),
            StateKey::Named(n, _) => n.clone(),
            StateKey::Minted { .. } => format!("#{}", q.0),
        }
    }

    /// Renders a long form in the automaton file syntax.
    pub fn render_long(&self, t: &LongTrans, alphabet: &Alphabet, controls: &[String]) -> String {
        let set = |s: &StateSet| {
            let names: Vec<String> = s.iter().map(|q| self.state_name(q, controls)).collect();
            format!("{{{}}}", names.join(","))
        };
        let targets: Vec<String> = t.targets.iter().map(set).collect();
        format!(
            "{} -- {} / {} --> ({})",
            self.state_name(t.src, controls),
            alphabet.name(t.sym),
            set(&t.br),
            targets.join(";")
        )
    }
}

fn link_target<'a>(labels: &'a [StateSet], ctx: &'a [Vec<StateSet>], link: Link) -> Option<&'a StateSet> {
    let pool: &[StateSet] = if link.order == 1 {
        labels
    } else {
        ctx.get(link.order).map(Vec::as_slice).unwrap_or(&[])
    };
    pool.get(link.index)
}

fn branch_ok(a: &StackAutomaton, br: &StateSet, link: Link, target: Option<&StateSet>) -> bool {
    if br.is_empty() {
        return true;
    }
    if a.set_order(br) != Some(link.order) {
        return false;
    }
    match target {
        Some(t) => br.is_subset(t),
        None => false,
    }
}

/// Labels of one sequence (an order-`k` stack viewed as the chain of its
/// suffixes). `labels[s]` belongs to the suffix with `s` children; `kids[s-1]`
/// is the label tree of the child at the top of that suffix (only for
/// `k >= 2`).
#[derive(Clone, Debug)]
pub struct LabelTree {
    pub labels: Vec<StateSet>,
    pub kids: Vec<LabelTree>,
}

impl LabelTree {
    /// Label of the whole sequence.
    pub fn top(&self) -> &StateSet {
        self.labels.last().expect("labels always contain the empty suffix")
    }
}

/// Engine-independent state description used to compare automata built by
/// different procedures.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonState {
    Control(u32),
    Named(String, usize),
    Minted(Box<CanonState>, Vec<CanonState>),
}

/// Engine-independent long-form transition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonTrans {
    pub src: CanonState,
    pub sym: Symbol,
    pub br: Vec<CanonState>,
    pub targets: Vec<Vec<CanonState>>,
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::Stack;

    fn set(v: &[StateId]) -> StateSet {
        v.iter().copied().collect()
    }

    #[test]
    fn add_long_is_idempotent_and_shares_middles() {
        let mut a = StackAutomaton::new(2, 2);
        let q0 = a.control_state(ControlId(0));
        let q1 = a.control_state(ControlId(1));
        let t = LongTrans {
            src: q0,
            sym: Symbol(0),
            br: StateSet::new(),
            targets: vec![StateSet::new(), set(&[q1])],
        };
        let first = a.add_long(&t, Justification::Initial).unwrap();
        assert_eq!(first.len(), 2);
        assert!(a.add_long(&t, Justification::Initial).unwrap().is_empty());
        let t2 = LongTrans { sym: Symbol(1), ..t.clone() };
        let second = a.add_long(&t2, Justification::Initial).unwrap();
        assert_eq!(second.len(), 1);
        let s1 = a.one(TransId(0)).src;
        let s2 = a.one(TransId(1)).src;
        assert_eq!(s1, s2);
        assert_eq!(a.extract_short(&t).unwrap(), first);
        assert_eq!(a.long_of(TransId(1)), t2);
    }

    #[test]
    fn rejects_mixed_branch_orders() {
        let mut a = StackAutomaton::new(2, 1);
        let q0 = a.control_state(ControlId(0));
        let x1 = a.named_state("x1", 1);
        let x2 = a.named_state("x2", 2);
        let t = LongTrans {
            src: q0,
            sym: Symbol(0),
            br: set(&[x1, x2]),
            targets: vec![StateSet::new(), StateSet::new()],
        };
        assert_eq!(a.add_long(&t, Justification::Initial), Err(AutomatonError::MixedBranchOrders));
    }

    #[test]
    fn lifted_from_empty_set_is_single_empty_transition() {
        let a = StackAutomaton::new(2, 1);
        let l = a.lifted(&StateSet::new(), 2, Symbol(0), Snapshot::ALL);
        assert_eq!(l.len(), 1);
        assert!(l[0].br.is_empty() && l[0].targets.iter().all(StateSet::is_empty));
    }

    #[test]
    fn emptiness_basics() {
        let mut a = StackAutomaton::new(1, 1);
        let x = a.named_state("x", 1);
        assert!(!a.is_nonempty(x));
        let t = LongTrans {
            src: x,
            sym: Symbol(0),
            br: StateSet::new(),
            targets: vec![StateSet::new()],
        };
        a.add_long(&t, Justification::Initial).unwrap();
        assert!(a.is_nonempty(x));
    }

    #[test]
    fn membership_of_empty_requirement() {
        let a = StackAutomaton::new(2, 1);
        let w: Stack<()> = Stack::empty(2);
        assert!(a.accepts_from(&w, &StateSet::new()));
    }
}
