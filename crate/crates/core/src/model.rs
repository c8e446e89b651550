//! Collapsible pushdown systems: alphabets, rules, configurations and the
//! one-step semantics, including guarded pop/collapse operations.

use std::collections::HashMap;
use std::fmt;

use crate::stack::{CollapsibleStack, Symbol};

/// Interned control state.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ControlId(pub u32);

impl ControlId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Stable identifier of a rule: its position in the owning model.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub u32);

impl RuleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// The stack alphabet together with optional per-character link orders.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, Symbol>,
    link_orders: Vec<Option<usize>>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut a = Alphabet::default();
        for n in names {
            a.intern(&n.into());
        }
        a
    }

    /// Returns the symbol for `name`, adding it if absent.
    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(&s) = self.index.get(name) {
            return s;
        }
        let s = Symbol(self.names.len() as u32);
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), s);
        self.link_orders.push(None);
        s
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.index.get(name).copied()
    }

    pub fn name(&self, s: Symbol) -> &str {
        &self.names[s.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.names.len() as u32).map(Symbol)
    }

    /// Declared link order of a character, if the model declares one.
    pub fn link_order(&self, s: Symbol) -> Option<usize> {
        self.link_orders[s.index()]
    }

    pub fn set_link_order(&mut self, s: Symbol, order: usize) {
        self.link_orders[s.index()] = Some(order);
    }

    /// Whether every character has a declared link order.
    pub fn link_orders_declared(&self) -> bool {
        !self.names.is_empty() && self.link_orders.iter().all(Option::is_some)
    }
}

/// A stack operation of an ordinary rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    /// `pop_k`, `1 <= k <= n`.
    Pop(usize),
    /// `push_k`, `2 <= k <= n`.
    Push(usize),
    /// `collapse_k`, `2 <= k <= n`.
    Collapse(usize),
    /// `push_b^k`, `1 <= k <= n`.
    PushChar(Symbol, usize),
    /// `rew_b`.
    Rew(Symbol),
}

impl Op {
    /// Whether the operation may carry a guard.
    pub fn is_destructive(&self) -> bool {
        matches!(self, Op::Pop(_) | Op::Collapse(_))
    }
}

/// Rule body.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    /// `(p, a, o, p')`, optionally guarded by the set of permitted resulting
    /// top characters (pop and collapse only).
    Step {
        from: ControlId,
        sym: Symbol,
        op: Op,
        guard: Option<Vec<Symbol>>,
        to: ControlId,
    },
    /// `p -> P`.
    Alt { from: ControlId, to: Vec<ControlId> },
}

/// A named rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub name: String,
    pub kind: RuleKind,
}

impl Rule {
    pub fn from(&self) -> ControlId {
        match &self.kind {
            RuleKind::Step { from, .. } | RuleKind::Alt { from, .. } => *from,
        }
    }
}

/// A configuration `<p, w>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub control: ControlId,
    pub stack: CollapsibleStack,
}

impl Configuration {
    pub fn new(control: ControlId, stack: CollapsibleStack) -> Self {
        Configuration { control, stack }
    }
}

/// Result of firing one rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Single(Configuration),
    Branch(Vec<Configuration>),
}

/// An order-`n` (possibly guarded, possibly alternating) CPDS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cpds {
    pub order: usize,
    pub alphabet: Alphabet,
    pub controls: Vec<String>,
    pub rules: Vec<Rule>,
}

/// Errors detected when checking a model's well-formedness.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("model order must be at least 1")]
    ZeroOrder,
    #[error("the alphabet is empty")]
    EmptyAlphabet,
    #[error("rule {rule}: order {k} is outside the valid range for {op}")]
    BadOrder { rule: String, op: &'static str, k: usize },
    #[error("rule {rule}: only pop and collapse may be guarded")]
    GuardOnConstructive { rule: String },
    #[error("rule {rule}: character {sym} is declared with link order {declared} but pushed at order {k}")]
    LinkOrderMismatch {
        rule: String,
        sym: String,
        declared: usize,
        k: usize,
    },
    #[error("rule {rule}: alternating rule with an empty control set")]
    EmptyAlternation { rule: String },
}

impl Cpds {
    pub fn new(order: usize, alphabet: Alphabet) -> Self {
        Cpds {
            order,
            alphabet,
            controls: Vec::new(),
            rules: Vec::new(),
        }
    }

    /// Returns the control named `name`, adding it if absent.
    pub fn control(&mut self, name: &str) -> ControlId {
        if let Some(i) = self.controls.iter().position(|c| c == name) {
            return ControlId(i as u32);
        }
        self.controls.push(name.to_string());
        ControlId(self.controls.len() as u32 - 1)
    }

    pub fn lookup_control(&self, name: &str) -> Option<ControlId> {
        self.controls.iter().position(|c| c == name).map(|i| ControlId(i as u32))
    }

    pub fn control_name(&self, c: ControlId) -> &str {
        &self.controls[c.index()]
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    /// Appends an ordinary rule with a default name `r<N>`.
    pub fn add_step(&mut self, from: ControlId, sym: Symbol, op: Op, to: ControlId) -> RuleId {
        self.add_rule_kind(RuleKind::Step {
            from,
            sym,
            op,
            guard: None,
            to,
        })
    }

    /// Appends an alternating rule with a default name `r<N>`.
    pub fn add_alt(&mut self, from: ControlId, to: Vec<ControlId>) -> RuleId {
        self.add_rule_kind(RuleKind::Alt { from, to })
    }

    pub fn add_rule_kind(&mut self, kind: RuleKind) -> RuleId {
        let id = RuleId(self.rules.len() as u32);
        self.rules.push(Rule {
            name: format!("r{}", self.rules.len() + 1),
            kind,
        });
        id
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.index()]
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = RuleId> {
        (0..self.rules.len() as u32).map(RuleId)
    }

    pub fn has_alternation(&self) -> bool {
        self.rules.iter().any(|r| matches!(r.kind, RuleKind::Alt { .. }))
    }

    pub fn is_guarded(&self) -> bool {
        self.rules
            .iter()
            .any(|r| matches!(&r.kind, RuleKind::Step { guard: Some(_), .. }))
    }

    /// Checks rule orders, guard placement and declared link orders.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.order == 0 {
            return Err(ModelError::ZeroOrder);
        }
        if self.alphabet.is_empty() {
            return Err(ModelError::EmptyAlphabet);
        }
        let n = self.order;
        for r in &self.rules {
            match &r.kind {
                RuleKind::Step { op, guard, .. } => {
                    let (name, k, lo) = match op {
                        Op::Pop(k) => ("pop", *k, 1),
                        Op::Push(k) => ("push", *k, 2),
                        Op::Collapse(k) => ("collapse", *k, 2),
                        Op::PushChar(_, k) => ("cpush", *k, 1),
                        Op::Rew(_) => ("rew", 1, 1),
                    };
                    if k < lo || k > n {
                        return Err(ModelError::BadOrder {
                            rule: r.name.clone(),
                            op: name,
                            k,
                        });
                    }
                    if guard.is_some() && !op.is_destructive() {
                        return Err(ModelError::GuardOnConstructive { rule: r.name.clone() });
                    }
                    if let Op::PushChar(b, k) = op {
                        if let Some(d) = self.alphabet.link_order(*b) {
                            if d != *k {
                                return Err(ModelError::LinkOrderMismatch {
                                    rule: r.name.clone(),
                                    sym: self.alphabet.name(*b).to_string(),
                                    declared: d,
                                    k: *k,
                                });
                            }
                        }
                    }
                }
                RuleKind::Alt { to, .. } => {
                    if to.is_empty() {
                        return Err(ModelError::EmptyAlternation { rule: r.name.clone() });
                    }
                }
            }
        }
        Ok(())
    }

    /// Applies a single rule to a configuration.
    pub fn apply(&self, id: RuleId, c: &Configuration) -> Option<Outcome> {
        let rule = self.rule(id);
        match &rule.kind {
            RuleKind::Alt { from, to } => {
                if *from != c.control {
                    return None;
                }
                Some(Outcome::Branch(
                    to.iter().map(|&p| Configuration::new(p, c.stack.clone())).collect(),
                ))
            }
            RuleKind::Step {
                from,
                sym,
                op,
                guard,
                to,
            } => {
                if *from != c.control {
                    return None;
                }
                let (top, _) = c.stack.top_char()?;
                if top != *sym {
                    return None;
                }
                let w = apply_op(&c.stack, op)?;
                if let Some(g) = guard {
                    let (t, _) = w.top_char()?;
                    if !g.contains(&t) {
                        return None;
                    }
                }
                Some(Outcome::Single(Configuration::new(*to, w)))
            }
        }
    }

    /// All rule applications from `c`, in rule order.
    pub fn successors(&self, c: &Configuration) -> Vec<(RuleId, Outcome)> {
        self.rule_ids()
            .filter_map(|id| self.apply(id, c).map(|o| (id, o)))
            .collect()
    }

    /// The trivialisation: every guarded operation loses its guard.
    pub fn trivialise(&self) -> Cpds {
        let mut out = self.clone();
        for r in &mut out.rules {
            if let RuleKind::Step { guard, .. } = &mut r.kind {
                *guard = None;
            }
        }
        out
    }

    /// Renders a rule in the model file syntax.
    pub fn display_rule(&self, id: RuleId) -> String {
        crate::parse::render_rule(self, self.rule(id))
    }
}

/// Applies a stack operation (without guard).
pub fn apply_op(w: &CollapsibleStack, op: &Op) -> Option<CollapsibleStack> {
    match op {
        Op::Pop(k) => w.pop(*k),
        Op::Push(k) => w.push(*k),
        Op::Collapse(k) => w.collapse(*k),
        Op::PushChar(b, k) => w.push_char(*b, *k, ()),
        Op::Rew(b) => w.rew(*b),
    }
}

impl fmt::Display for ControlId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}
