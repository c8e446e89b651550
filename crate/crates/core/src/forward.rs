//! Forward over-approximation of the reachable configurations and extraction
//! of a guarded, pruned system.
//!
//! The analysis abstracts a configuration by its *head* (control and top
//! character) and describes its stack by *stack descriptors*: for every order
//! `k` the head at which the stack exposed by `pop_k` was on top, and the head
//! at which the collapse target was on top. *Summary edges* propagate the
//! lower components of descriptors across pops and collapses, in the manner of
//! an order-1 summary algorithm.
//!
//! From the resulting graph, the rules that may lie on a path to a target head
//! are kept and every pop and collapse is guarded by the characters it was
//! seen to expose. Saturating the guarded system gives the same verdict for
//! the initial configuration while usually building a much smaller automaton.
//!
//! Initial stacks with more than one character are handled by *synthetic*
//! heads, one per pop-reachable substack of the initial stack, whose
//! descriptors describe the initial stack exactly; synthetic heads have no
//! rules.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use indexmap::{IndexMap, IndexSet};

use crate::model::{Configuration, ControlId, Cpds, Op, RuleId, RuleKind};
use crate::run::positions;
use crate::stack::{CollapsibleStack, Symbol};

/// The control component of a head.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeadCtl {
    Control(ControlId),
    /// Stands for one substack of the initial stack.
    Synthetic(u32),
}

/// A head `(p, a)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Head {
    pub ctl: HeadCtl,
    pub sym: Symbol,
}

impl Head {
    pub fn new(p: ControlId, sym: Symbol) -> Head {
        Head {
            ctl: HeadCtl::Control(p),
            sym,
        }
    }

    /// The control, unless the head is synthetic.
    pub fn control(&self) -> Option<ControlId> {
        match self.ctl {
            HeadCtl::Control(p) => Some(p),
            HeadCtl::Synthetic(_) => None,
        }
    }
}

/// A stack descriptor `<h_n, ..., h_1, h_c>`; `None` stands for an undefined
/// operation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Descriptor {
    /// `pops[k-1]` is `h_k`.
    pub pops: Vec<Option<Head>>,
    pub collapse: Option<Head>,
}

impl Descriptor {
    /// The all-undefined descriptor of order `n`.
    pub fn bottom(n: usize) -> Descriptor {
        Descriptor {
            pops: vec![None; n],
            collapse: None,
        }
    }

    /// Components above order `k`: `[h_{k+1}, ..., h_n]`.
    fn upper(&self, k: usize) -> Vec<Option<Head>> {
        self.pops[k..].to_vec()
    }

    /// This descriptor's components up to order `k` (and collapse) combined
    /// with the given upper components.
    fn with_upper(&self, k: usize, upper: &[Option<Head>]) -> Descriptor {
        let mut pops = self.pops[..k].to_vec();
        pops.extend_from_slice(upper);
        Descriptor {
            pops,
            collapse: self.collapse,
        }
    }
}

/// A summary edge `(from, <h_n, ..., h_{k+1}>, to)` of order `k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SummaryEdge {
    pub from: Head,
    pub order: usize,
    /// `[h_{k+1}, ..., h_n]`.
    pub upper: Vec<Option<Head>>,
    pub to: Head,
}

/// An edge `(h, r, h')` of the graph.
pub type Edge = (Head, RuleId, Head);

/// The approximate reachability graph with its summary edges.
#[derive(Clone, Debug, Default)]
pub struct ApproxGraph {
    pub order: usize,
    pub heads: IndexSet<Head>,
    pub edges: IndexSet<Edge>,
    pub descriptors: IndexMap<Head, IndexSet<Descriptor>>,
    pub summaries: IndexSet<SummaryEdge>,
    /// Number of synthetic heads created for the initial stack.
    pub synthetic: usize,
    /// Number of successful insertions into any component.
    pub insertions: usize,
}

enum Task {
    Desc(Head, Descriptor),
    Summary(SummaryEdge),
}

struct Builder<'m> {
    model: &'m Cpds,
    g: ApproxGraph,
    summaries_from: HashMap<Head, Vec<usize>>,
    tasks: VecDeque<Task>,
}

/// Builds the approximate reachability graph from the initial configuration.
pub fn build_graph(model: &Cpds, init: &Configuration) -> ApproxGraph {
    let n = model.order;
    let mut b = Builder {
        model,
        g: ApproxGraph {
            order: n,
            ..ApproxGraph::default()
        },
        summaries_from: HashMap::new(),
        tasks: VecDeque::new(),
    };
    let (root, seeds) = seed_descriptors(model, init);
    for (h, d) in seeds {
        b.add_head(h);
        b.tasks.push_back(Task::Desc(h, d));
    }
    if let Some(h) = root {
        b.add_head(h);
    }
    b.g.synthetic = b
        .g
        .heads
        .iter()
        .filter(|h| matches!(h.ctl, HeadCtl::Synthetic(_)))
        .count();
    b.run();
    b.g
}

/// Descriptors for the initial stack: the root head with the descriptor of
/// the whole stack, and one synthetic head per proper pop-reachable
/// substack.
fn seed_descriptors(model: &Cpds, init: &Configuration) -> (Option<Head>, Vec<(Head, Descriptor)>) {
    let n = model.order;
    let w = &init.stack;
    let Some((top, _)) = w.top_char() else {
        return (None, Vec::new());
    };
    let root = Head::new(init.control, top);
    if w.char_count() == 1 {
        return (Some(root), vec![(root, Descriptor::bottom(n))]);
    }
    // Every pop-reachable substack with a top character gets a head.
    let subs = positions(w);
    let mut head_of: HashMap<CollapsibleStack, Head> = HashMap::new();
    for (i, (path, s)) in subs.iter().enumerate() {
        let (sym, _) = s.top_char().expect("positions have a top character");
        let h = if path.iter().all(|&c| c == 0) {
            root
        } else {
            Head {
                ctl: HeadCtl::Synthetic(i as u32),
                sym,
            }
        };
        head_of.entry(s.clone()).or_insert(h);
    }
    let lookup = |x: Option<CollapsibleStack>| -> Option<Head> {
        let x = x?;
        x.top_char()?;
        head_of.get(&x).copied()
    };
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (_, s) in &subs {
        let h = head_of[s];
        if !seen.insert(h) {
            continue;
        }
        let pops = (1..=n).map(|k| lookup(s.pop(k))).collect();
        let (_, link) = s.top_char().expect("positions have a top character");
        let collapse = lookup(s.collapse(link.order));
        out.push((h, Descriptor { pops, collapse }));
    }
    (Some(root), out)
}

impl Builder<'_> {
    fn add_head(&mut self, h: Head) {
        if self.g.heads.insert(h) {
            self.g.insertions += 1;
        }
    }

    fn add_edge(&mut self, e: Edge) {
        self.add_head(e.2);
        if self.g.edges.insert(e) {
            self.g.insertions += 1;
        }
    }

    fn run(&mut self) {
        while let Some(task) = self.tasks.pop_front() {
            match task {
                Task::Desc(h, d) => self.add_descriptor(h, d),
                Task::Summary(s) => self.add_summary(s),
            }
        }
    }

    fn add_descriptor(&mut self, h: Head, d: Descriptor) {
        self.add_head(h);
        if !self.g.descriptors.entry(h).or_default().insert(d.clone()) {
            return;
        }
        self.g.insertions += 1;
        self.process(h, &d);
        for &si in self.summaries_from.get(&h).map(Vec::as_slice).unwrap_or(&[]) {
            let s = &self.g.summaries[si];
            self.tasks.push_back(Task::Desc(s.to, d.with_upper(s.order, &s.upper)));
        }
    }

    fn add_summary(&mut self, s: SummaryEdge) {
        let (idx, fresh) = self.g.summaries.insert_full(s.clone());
        if !fresh {
            return;
        }
        self.g.insertions += 1;
        self.summaries_from.entry(s.from).or_default().push(idx);
        if let Some(ds) = self.g.descriptors.get(&s.from) {
            for d in ds {
                self.tasks.push_back(Task::Desc(s.to, d.with_upper(s.order, &s.upper)));
            }
        }
    }

    /// Processes the rules applicable at head `h` on stacks described by `d`.
    fn process(&mut self, h: Head, d: &Descriptor) {
        let Some(p) = h.control() else {
            return;
        };
        let a = h.sym;
        let model = self.model;
        for id in model.rule_ids() {
            match &model.rule(id).kind {
                RuleKind::Alt { from, to } if *from == p => {
                    for &p2 in to {
                        let h2 = Head::new(p2, a);
                        self.add_edge((h, id, h2));
                        self.tasks.push_back(Task::Desc(h2, d.clone()));
                    }
                }
                RuleKind::Step {
                    from,
                    sym,
                    op,
                    guard,
                    to,
                } if *from == p && *sym == a => {
                    let allowed = |b: Symbol| guard.as_ref().is_none_or(|g| g.contains(&b));
                    match op {
                        Op::Rew(b) => {
                            let h2 = Head::new(*to, *b);
                            self.add_edge((h, id, h2));
                            self.tasks.push_back(Task::Desc(h2, d.clone()));
                        }
                        Op::PushChar(b, k) => {
                            let h2 = Head::new(*to, *b);
                            self.add_edge((h, id, h2));
                            let mut d2 = d.clone();
                            d2.collapse = d.pops[k - 1];
                            d2.pops[0] = Some(h);
                            self.tasks.push_back(Task::Desc(h2, d2));
                        }
                        Op::Push(k) => {
                            let h2 = Head::new(*to, a);
                            self.add_edge((h, id, h2));
                            let mut d2 = d.clone();
                            d2.pops[k - 1] = Some(h);
                            self.tasks.push_back(Task::Desc(h2, d2));
                        }
                        Op::Pop(k) => {
                            if let Some(hk) = d.pops[k - 1] {
                                if !allowed(hk.sym) {
                                    continue;
                                }
                                let h2 = Head::new(*to, hk.sym);
                                self.add_edge((h, id, h2));
                                self.tasks.push_back(Task::Summary(SummaryEdge {
                                    from: hk,
                                    order: *k,
                                    upper: d.upper(*k),
                                    to: h2,
                                }));
                            }
                        }
                        Op::Collapse(k) => {
                            if model.alphabet.link_order(a).is_some_and(|o| o != *k) {
                                continue;
                            }
                            if let Some(hc) = d.collapse {
                                if !allowed(hc.sym) {
                                    continue;
                                }
                                let h2 = Head::new(*to, hc.sym);
                                self.add_edge((h, id, h2));
                                self.tasks.push_back(Task::Summary(SummaryEdge {
                                    from: hc,
                                    order: *k,
                                    upper: d.upper(*k),
                                    to: h2,
                                }));
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

impl ApproxGraph {
    /// Total number of stored objects.
    pub fn size(&self) -> usize {
        self.heads.len() + self.edges.len() + self.descriptors.values().map(IndexSet::len).sum::<usize>() + self.summaries.len()
    }

    /// The polynomial bound on the size of the structure for `model` (with
    /// `extra` additional synthetic heads).
    pub fn size_bound(model: &Cpds, extra: usize) -> u128 {
        let n = model.order as u32;
        let h = (model.num_controls() * model.alphabet.len() + extra) as u128;
        let r = model.rules.len() as u128;
        let hb = h + 1;
        let descriptors = h * hb.pow(n + 1);
        let summaries: u128 = (1..=n).map(|k| h * hb.pow(n - k) * h).sum();
        h + h * r * h + descriptors + summaries
    }

    /// Descriptors of a head.
    pub fn descriptors_of(&self, h: &Head) -> impl Iterator<Item = &Descriptor> {
        self.descriptors.get(h).into_iter().flatten()
    }

    /// Whether the stack `w` is described by `d` (relative to this graph).
    pub fn describes(&self, d: &Descriptor, w: &CollapsibleStack) -> bool {
        let mut memo = HashMap::new();
        self.describes_memo(d, w, &mut memo)
    }

    fn describes_memo(&self, d: &Descriptor, w: &CollapsibleStack, memo: &mut HashMap<(Descriptor, CollapsibleStack), bool>) -> bool {
        let key = (d.clone(), w.clone());
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        // Provisionally false: descriptors never describe a stack through itself.
        memo.insert(key.clone(), false);
        let n = self.order;
        let mut ok = true;
        for k in 1..=n {
            let next = w.pop(k).filter(|x| x.top_char().is_some());
            if !self.component_matches(d.pops[k - 1], k, d, next, memo) {
                ok = false;
                break;
            }
        }
        if ok {
            let (_, link) = w.top_char().expect("described stacks have a top character");
            let next = w.collapse(link.order).filter(|x| x.top_char().is_some());
            ok = self.component_matches(d.collapse, link.order, d, next, memo);
        }
        memo.insert(key, ok);
        ok
    }

    fn component_matches(
        &self,
        h: Option<Head>,
        k: usize,
        d: &Descriptor,
        next: Option<CollapsibleStack>,
        memo: &mut HashMap<(Descriptor, CollapsibleStack), bool>,
    ) -> bool {
        match (h, next) {
            (None, None) => true,
            (Some(h), Some(x)) => {
                if x.top_char().map(|(s, _)| s) != Some(h.sym) {
                    return false;
                }
                let upper = d.upper(k);
                let cands: Vec<Descriptor> = self.descriptors_of(&h).map(|d2| d2.with_upper(k, &upper)).collect();
                cands.iter().any(|d2| self.describes_memo(d2, &x, memo))
            }
            _ => false,
        }
    }

    /// Line-oriented dump of heads, edges, descriptors and summaries.
    pub fn dump(&self, model: &Cpds) -> String {
        let head = |h: &Head| match h.ctl {
            HeadCtl::Control(p) => format!("({},{})", model.control_name(p), model.alphabet.name(h.sym)),
            HeadCtl::Synthetic(i) => format!("(init#{},{})", i, model.alphabet.name(h.sym)),
        };
        let opt = |h: &Option<Head>| h.as_ref().map_or("_".to_string(), head);
        let mut out = String::new();
        for h in &self.heads {
            let _ = writeln!(out, "head {}", head(h));
        }
        for (h, r, h2) in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", head(h), model.rule(*r).name, head(h2));
        }
        for (h, ds) in &self.descriptors {
            for d in ds {
                let comps: Vec<String> = d.pops.iter().rev().map(opt).collect();
                let _ = writeln!(out, "desc {} <{};{}>", head(h), comps.join(","), opt(&d.collapse));
            }
        }
        for s in &self.summaries {
            let upper: Vec<String> = s.upper.iter().rev().map(opt).collect();
            let _ = writeln!(out, "summary {} {} <{}> {}", head(&s.from), s.order, upper.join(","), head(&s.to));
        }
        out
    }
}

/// Edges that may lie on a path to a head whose control is a target: the
/// least set containing every edge into a target head and every edge into
/// the source of a selected edge.
pub fn back_rules(g: &ApproxGraph, targets: &[ControlId]) -> IndexSet<Edge> {
    let mut relevant: HashSet<Head> = g
        .heads
        .iter()
        .filter(|h| h.control().is_some_and(|p| targets.contains(&p)))
        .copied()
        .collect();
    let mut into: HashMap<Head, Vec<&Edge>> = HashMap::new();
    for e in &g.edges {
        into.entry(e.2).or_default().push(e);
    }
    let mut queue: VecDeque<Head> = relevant.iter().copied().collect();
    let mut back = IndexSet::new();
    while let Some(h) = queue.pop_front() {
        for e in into.get(&h).map(Vec::as_slice).unwrap_or(&[]) {
            back.insert(**e);
            if relevant.insert(e.0) {
                queue.push_back(e.0);
            }
        }
    }
    back.sort();
    back
}

/// A system derived from another by dropping and guarding rules;
/// `origin[i]` is the rule of the original system that rule `i` comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivedModel {
    pub model: Cpds,
    pub origin: Vec<RuleId>,
}

impl DerivedModel {
    /// The identity derivation.
    pub fn identity(model: &Cpds) -> DerivedModel {
        DerivedModel {
            model: model.clone(),
            origin: model.rule_ids().collect(),
        }
    }

    /// Maps a rule of the derived system back to the original.
    pub fn original_rule(&self, r: RuleId) -> RuleId {
        self.origin[r.index()]
    }

    /// The derived system with guards removed.
    pub fn trivialise(&self) -> DerivedModel {
        DerivedModel {
            model: self.model.trivialise(),
            origin: self.origin.clone(),
        }
    }
}

/// The guarded system made of the rules occurring in `back`: pops and
/// collapses are guarded by the characters they expose in the graph.
///
/// When link orders are not declared for every character, collapse guards are
/// left as they were, since the graph cannot tell apart links of different
/// orders.
pub fn extract_guarded(model: &Cpds, g: &ApproxGraph, back: &IndexSet<Edge>) -> DerivedModel {
    let used: HashSet<RuleId> = back.iter().map(|e| e.1).collect();
    let mut exposed: HashMap<RuleId, Vec<Symbol>> = HashMap::new();
    for (_, r, h2) in &g.edges {
        let v = exposed.entry(*r).or_default();
        if !v.contains(&h2.sym) {
            v.push(h2.sym);
        }
    }
    let precise_collapse = model.alphabet.link_orders_declared();
    let mut out = Cpds {
        order: model.order,
        alphabet: model.alphabet.clone(),
        controls: model.controls.clone(),
        rules: Vec::new(),
    };
    let mut origin = Vec::new();
    for id in model.rule_ids() {
        if !used.contains(&id) {
            continue;
        }
        let mut rule = model.rule(id).clone();
        if let RuleKind::Step { op, guard, .. } = &mut rule.kind {
            let guarded = match op {
                Op::Pop(_) => true,
                Op::Collapse(_) => precise_collapse,
                _ => false,
            };
            if guarded {
                let mut s: Vec<Symbol> = exposed.get(&id).cloned().unwrap_or_default();
                if let Some(old) = guard {
                    s.retain(|b| old.contains(b));
                }
                s.sort();
                *guard = Some(s);
            }
        }
        out.rules.push(rule);
        origin.push(id);
    }
    DerivedModel { model: out, origin }
}
